//! Declarative mapping from JSON source records to triples. The document
//! format is described in `docs/mapping-spec.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::normalize::NormalizeRules;
use crate::store::Iri;

pub const MAPPING_SPEC_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("invalid mapping document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported mapping spec version {0}")]
    Version(u32),
    #[error("mapping has no id rule")]
    MissingIdRule,
    #[error("id rule has no key fields")]
    EmptyKeys,
    #[error("{0:?} is not an absolute IRI")]
    RelativeIri(String),
    #[error("property {path}: unknown kind {kind:?}")]
    UnknownKind { path: String, kind: String },
    #[error("property {path}: entity-ref requires a namespace and a key_path")]
    IncompleteEntityRef { path: String },
    #[error("normalizer for {path}: unknown rule {rule:?}")]
    UnknownNormalizer { path: String, rule: String },
    #[error("{0} is not part of the ontology vocabulary")]
    UnknownTerm(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyKind {
    Literal,
    Date,
    EntityRef { namespace: String, key_path: String },
    TextPayload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyRule {
    /// JSON pointer into the record.
    pub path: String,
    pub predicate: Iri,
    pub kind: PropertyKind,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdRule {
    pub keys: Vec<String>,
    pub namespace: String,
}

/// A validated mapping for one source application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingSpec {
    pub source: String,
    pub record_type: Iri,
    pub id: IdRule,
    /// Pointer to the record's year, attached to documents for trend analysis.
    pub year_path: Option<String>,
    pub properties: Vec<PropertyRule>,
    pub normalizers: BTreeMap<String, NormalizeRules>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default = "default_version")]
    version: u32,
    source: String,
    record_type: String,
    id: Option<RawId>,
    #[serde(default)]
    year: Option<String>,
    #[serde(default)]
    properties: Vec<RawProperty>,
    #[serde(default)]
    normalizers: BTreeMap<String, Vec<String>>,
}

fn default_version() -> u32 {
    MAPPING_SPEC_VERSION
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawId {
    keys: Vec<String>,
    namespace: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProperty {
    path: String,
    predicate: String,
    kind: String,
    #[serde(default)]
    namespace: Option<String>,
    #[serde(default)]
    key_path: Option<String>,
    #[serde(default)]
    required: bool,
}

fn absolute(iri: &str) -> Result<Iri, MappingError> {
    Iri::new(iri).map_err(|_| MappingError::RelativeIri(iri.to_string()))
}

/// Validates a mapping document.
pub fn parse_mapping(doc: &serde_json::Value) -> Result<MappingSpec, MappingError> {
    let raw: RawSpec = serde_json::from_value(doc.clone())?;
    if raw.version != MAPPING_SPEC_VERSION {
        return Err(MappingError::Version(raw.version));
    }
    let id = raw.id.ok_or(MappingError::MissingIdRule)?;
    if id.keys.is_empty() {
        return Err(MappingError::EmptyKeys);
    }
    absolute(&id.namespace)?;
    let record_type = absolute(&raw.record_type)?;

    let mut properties = Vec::with_capacity(raw.properties.len());
    for p in raw.properties {
        let predicate = absolute(&p.predicate)?;
        let kind = match p.kind.as_str() {
            "literal" => PropertyKind::Literal,
            "date" => PropertyKind::Date,
            "text-payload" => PropertyKind::TextPayload,
            "entity-ref" => match (p.namespace, p.key_path) {
                (Some(namespace), Some(key_path)) => {
                    absolute(&namespace)?;
                    PropertyKind::EntityRef { namespace, key_path }
                }
                _ => return Err(MappingError::IncompleteEntityRef { path: p.path }),
            },
            other => {
                return Err(MappingError::UnknownKind {
                    path: p.path,
                    kind: other.to_string(),
                })
            }
        };
        properties.push(PropertyRule {
            path: p.path,
            predicate,
            kind,
            required: p.required,
        });
    }

    let normalizers = raw
        .normalizers
        .into_iter()
        .map(|(path, names)| match NormalizeRules::parse(&names) {
            Ok(rules) => Ok((path, rules)),
            Err(rule) => Err(MappingError::UnknownNormalizer { path, rule }),
        })
        .collect::<Result<_, _>>()?;

    Ok(MappingSpec {
        source: raw.source,
        record_type,
        id: IdRule {
            keys: id.keys,
            namespace: id.namespace,
        },
        year_path: raw.year,
        properties,
        normalizers,
    })
}

impl MappingSpec {
    pub fn from_file(path: &Path) -> Result<Self, super::IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| super::IngestError::io(path, e))?;
        let doc: serde_json::Value = serde_json::from_str(&text).map_err(MappingError::from)?;
        Ok(parse_mapping(&doc)?)
    }

    pub fn rules_for(&self, path: &str) -> NormalizeRules {
        self.normalizers.get(path).cloned().unwrap_or_default()
    }

    /// Predicates whose values are free text handed to extraction.
    pub fn text_payload_predicates(&self) -> impl Iterator<Item = &Iri> {
        self.properties
            .iter()
            .filter(|p| p.kind == PropertyKind::TextPayload)
            .map(|p| &p.predicate)
    }

    /// Checks the record type and every predicate against an ontology vocabulary.
    pub fn check_vocabulary(&self, vocabulary: &Vocabulary) -> Result<(), MappingError> {
        std::iter::once(&self.record_type)
            .chain(self.properties.iter().map(|p| &p.predicate))
            .try_for_each(|iri| {
                if vocabulary.contains(iri.as_str()) {
                    Ok(())
                } else {
                    Err(MappingError::UnknownTerm(iri.as_str().to_string()))
                }
            })
    }
}

/// Flat list of ontology IRIs the mappings are aligned to.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    terms: BTreeSet<String>,
}

impl Vocabulary {
    /// One IRI per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let terms = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        Vocabulary { terms }
    }

    pub fn contains(&self, iri: &str) -> bool {
        self.terms.contains(iri)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}
