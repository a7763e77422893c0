//! Integration of siloed JSON application records: declarative mapping,
//! value cleaning, deterministic entity resolution and text fingerprinting.

mod background;
mod fingerprint;
mod mapping;
mod normalize;
mod source;

use std::path::Path;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use background::{load_background, parse_background, BackgroundFact, LabeledId};
pub use fingerprint::{digest, needs_reextraction, Fingerprint, FingerprintLedger};
pub use mapping::{
    parse_mapping, IdRule, MappingError, MappingSpec, PropertyKind, PropertyRule, Vocabulary, MAPPING_SPEC_VERSION,
};
pub use normalize::{coerce_date, collapse_whitespace, normalize, DateOrder, NormalizeRules};
pub use source::{fetch_url, load_source, SourceSpec};

use crate::store::{Iri, Literal, Term, Triple};
use crate::vocab::{self, kg, Namespaces};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("{path}: value {value:?} cannot be normalized ({reason})")]
    Normalization {
        path: String,
        value: String,
        reason: String,
    },
    #[error("{path}: expected a scalar or array of scalars, found {found}")]
    NotScalar { path: String, found: String },
    #[error("record has no usable value for key field {0}")]
    MissingKey(String),
    #[error("required path {0} did not resolve")]
    MissingPath(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("source {source_name}: {message}")]
    Source { source_name: String, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

impl IngestError {
    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        IngestError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

/// RFC 3986 unreserved characters stay literal; everything else is encoded.
const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

pub fn encode_segment(value: &str) -> String {
    utf8_percent_encode(value, SEGMENT).to_string()
}

pub fn decode_segment(value: &str) -> String {
    percent_decode_str(value).decode_utf8_lossy().into_owned()
}

/// One JSON record pulled from a source application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved_at: Option<String>,
    pub value: Value,
}

impl SourceRecord {
    pub fn new(source: impl Into<String>, value: Value) -> Self {
        SourceRecord {
            source: source.into(),
            retrieved_at: None,
            value,
        }
    }
}

/// A text payload registered for extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub owner: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
}

impl Document {
    /// Document node triples: type, id, owner link, year and text.
    pub fn to_triples(&self, ns: &Namespaces) -> Vec<Triple> {
        let node = Term::iri(ns.document_iri(&self.doc_id));
        let pred = Iri::new_unchecked;
        let mut triples = vec![
            Triple::new(node.clone(), pred(vocab::RDF_TYPE), Term::iri(kg::DOCUMENT)),
            Triple::new(node.clone(), pred(kg::DOC_ID), Term::literal(&self.doc_id)),
            Triple::new(node.clone(), pred(kg::ABOUT), Term::iri(&self.owner)),
            Triple::new(node.clone(), pred(kg::TEXT), Term::literal(&self.text)),
        ];
        if let Some(year) = self.year {
            triples.push(Triple::new(
                node,
                pred(kg::YEAR),
                Term::typed(year.to_string(), vocab::XSD_INTEGER),
            ));
        }
        triples
    }
}

/// Output of mapping one record.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedRecord {
    pub subject: Iri,
    pub triples: Vec<Triple>,
    pub documents: Vec<Document>,
}

fn resolve<'a>(value: &'a Value, pointer: &str) -> Option<&'a Value> {
    value.pointer(pointer).filter(|v| !v.is_null())
}

fn lexical(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn mint_key(value: Option<&Value>, rules: &NormalizeRules, path: &str) -> Result<String, IngestError> {
    let value = value.ok_or_else(|| IngestError::MissingKey(path.to_string()))?;
    let key = lexical(&normalize(value, rules, path)?);
    if key.is_empty() {
        return Err(IngestError::MissingKey(path.to_string()));
    }
    Ok(encode_segment(&key))
}

/// Namespace followed by the percent-encoded, `/`-joined normalized key
/// values. The same key values always produce the same IRI.
pub fn mint_iri(record: &Value, spec: &MappingSpec) -> Result<Iri, IngestError> {
    let parts = spec
        .id
        .keys
        .iter()
        .map(|key| mint_key(resolve(record, key), &spec.rules_for(key), key))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Iri::new_unchecked(format!("{}{}", spec.id.namespace, parts.join("/"))))
}

fn year_of(value: &Value) -> Option<i32> {
    match value {
        Value::Number(n) => n.as_i64().and_then(|y| i32::try_from(y).ok()),
        Value::String(s) => s.trim().get(..4).and_then(|y| y.parse().ok()),
        _ => None,
    }
}

fn literal_term(value: &Value) -> Term {
    match value {
        Value::Bool(b) => Term::typed(b.to_string(), vocab::XSD_BOOLEAN),
        Value::Number(n) if n.is_i64() || n.is_u64() => Term::typed(n.to_string(), vocab::XSD_INTEGER),
        Value::Number(n) => Term::typed(n.to_string(), vocab::XSD_DECIMAL),
        other => Term::Literal(Literal::plain(lexical(other))),
    }
}

/// Maps one record: a type assertion plus one triple per resolved scalar of
/// every property rule (arrays fan out). Text payloads are also returned as
/// documents for extraction.
pub fn record_to_triples(record: &SourceRecord, spec: &MappingSpec) -> Result<MappedRecord, IngestError> {
    let value = &record.value;
    let subject = mint_iri(value, spec)?;
    let subject_term = Term::from(subject.clone());
    let year = spec
        .year_path
        .as_deref()
        .and_then(|p| resolve(value, p))
        .and_then(year_of);

    let mut triples = vec![Triple::new(
        subject_term.clone(),
        Iri::new_unchecked(vocab::RDF_TYPE),
        Term::from(spec.record_type.clone()),
    )];
    let mut documents = Vec::new();

    for rule in &spec.properties {
        let Some(found) = resolve(value, &rule.path) else {
            if rule.required {
                return Err(IngestError::MissingPath(rule.path.clone()));
            }
            continue;
        };
        let elements: Vec<(Option<usize>, &Value)> = match found {
            Value::Array(items) => items
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_null())
                .map(|(i, v)| (Some(i), v))
                .collect(),
            single => vec![(None, single)],
        };
        let rules = spec.rules_for(&rule.path);
        for (index, element) in elements {
            let object = match &rule.kind {
                PropertyKind::Literal => literal_term(&normalize(element, &rules, &rule.path)?),
                PropertyKind::Date => {
                    let mut date_rules = rules.clone();
                    date_rules.date.get_or_insert(DateOrder::YearMonthDay);
                    let iso = normalize(element, &date_rules, &rule.path)?;
                    Term::typed(lexical(&iso), vocab::XSD_DATE)
                }
                PropertyKind::EntityRef { namespace, key_path } => {
                    let key_rules_path = format!("{}{}", rule.path, key_path);
                    let key = mint_key(
                        resolve(element, key_path),
                        &spec.rules_for(&key_rules_path),
                        &key_rules_path,
                    )?;
                    Term::iri(format!("{namespace}{key}"))
                }
                PropertyKind::TextPayload => {
                    let text = lexical(&normalize(element, &rules, &rule.path)?);
                    let mut doc_id = format!(
                        "{}#{}",
                        subject.as_str(),
                        rule.path.trim_start_matches('/').replace('/', ".")
                    );
                    if let Some(i) = index {
                        doc_id.push_str(&format!(".{i}"));
                    }
                    documents.push(Document {
                        doc_id,
                        owner: subject.as_str().to_string(),
                        text: text.clone(),
                        year,
                    });
                    Term::literal(text)
                }
            };
            triples.push(Triple::new(subject_term.clone(), rule.predicate.clone(), object));
        }
    }

    Ok(MappedRecord {
        subject,
        triples,
        documents,
    })
}
