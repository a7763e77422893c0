//! IRIs used by the graph layout and the configurable namespaces that mint
//! new ones.

use serde::{Deserialize, Serialize};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDF_STATEMENT: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Statement";
pub const RDF_SUBJECT: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#subject";
pub const RDF_PREDICATE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#predicate";
pub const RDF_OBJECT: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#object";
pub const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";

pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
pub const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";
pub const XSD_DATE: &str = "http://www.w3.org/2001/XMLSchema#date";

/// Terms of the engine's own metamodel (statements, evidence, documents).
pub mod kg {
    pub const NS: &str = "urn:kgforge:vocab:";

    pub const HAS_STATEMENT: &str = "urn:kgforge:vocab:hasStatement";
    pub const SUBJECT_MENTION: &str = "urn:kgforge:vocab:subjectMention";
    pub const OBJECT_MENTION: &str = "urn:kgforge:vocab:objectMention";
    pub const SUBJECT_TYPE: &str = "urn:kgforge:vocab:subjectType";
    pub const OBJECT_TYPE: &str = "urn:kgforge:vocab:objectType";
    pub const EVIDENCE_SENTENCE: &str = "urn:kgforge:vocab:evidenceSentence";
    pub const EVIDENCE_DOCUMENT: &str = "urn:kgforge:vocab:evidenceDocument";
    pub const EVIDENCE_OFFSET: &str = "urn:kgforge:vocab:evidenceOffset";
    pub const CONFIDENCE: &str = "urn:kgforge:vocab:confidence";

    pub const DOCUMENT: &str = "urn:kgforge:vocab:Document";
    pub const DOC_ID: &str = "urn:kgforge:vocab:docId";
    pub const ABOUT: &str = "urn:kgforge:vocab:about";
    pub const YEAR: &str = "urn:kgforge:vocab:year";
    pub const TEXT: &str = "urn:kgforge:vocab:text";
    pub const TEXT_PAYLOAD_PROPERTY: &str = "urn:kgforge:vocab:TextPayloadProperty";
}

/// Namespaces under which IRIs are minted.
///
/// `base` hosts statement and document nodes, `kb` hosts entities, types and
/// relations referenced by identifier (Q-/P-style ids).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Namespaces {
    pub base: String,
    pub kb: String,
}

impl Default for Namespaces {
    fn default() -> Self {
        Namespaces {
            base: "urn:kgforge:".to_string(),
            kb: "http://www.wikidata.org/entity/".to_string(),
        }
    }
}

impl Namespaces {
    pub fn statement_prefix(&self) -> String {
        format!("{}stmt/", self.base)
    }

    pub fn statement_iri(&self, hash_hex: &str) -> String {
        format!("{}stmt/{}", self.base, hash_hex)
    }

    pub fn document_iri(&self, doc_id: &str) -> String {
        format!("{}doc/{}", self.base, crate::ingest::encode_segment(doc_id))
    }

    pub fn kb_iri(&self, id: &str) -> String {
        format!("{}{}", self.kb, crate::ingest::encode_segment(id))
    }

    /// Inverse of [`Namespaces::kb_iri`]; IRIs outside the namespace are returned whole.
    pub fn kb_id(&self, iri: &str) -> String {
        match iri.strip_prefix(&self.kb) {
            Some(rest) => crate::ingest::decode_segment(rest),
            None => iri.to_string(),
        }
    }

    pub fn is_statement(&self, iri: &str) -> bool {
        iri.starts_with(&self.statement_prefix())
    }
}
