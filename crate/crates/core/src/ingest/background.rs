//! Snapshot import of background-KB facts (e.g. a Wikidata extract), one
//! labeled triple per JSONL line. Background facts are asserted directly on
//! KB-namespace IRIs, unlike induced facts which are only reified.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::store::{Iri, Term, Triple};
use crate::vocab::{Namespaces, RDFS_LABEL};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledId {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundFact {
    pub subject: LabeledId,
    pub relation: LabeledId,
    pub object: LabeledId,
}

impl BackgroundFact {
    pub fn to_triples(&self, ns: &Namespaces) -> Vec<Triple> {
        let s = ns.kb_iri(&self.subject.id);
        let p = ns.kb_iri(&self.relation.id);
        let o = ns.kb_iri(&self.object.id);
        let mut triples = vec![Triple::iris(&s, &p, &o)];
        for (iri, part) in [(&s, &self.subject), (&p, &self.relation), (&o, &self.object)] {
            if let Some(label) = part.label.as_deref().filter(|l| !l.is_empty()) {
                triples.push(Triple::new(
                    Term::iri(iri.clone()),
                    Iri::new_unchecked(RDFS_LABEL),
                    Term::literal(label),
                ));
            }
        }
        triples
    }
}

pub fn parse_background<R: BufRead>(reader: R) -> Result<Vec<BackgroundFact>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| IngestError::Line { line: i + 1, message };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fact: BackgroundFact = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if [&fact.subject.id, &fact.relation.id, &fact.object.id]
            .iter()
            .any(|id| id.is_empty())
        {
            return Err(err("empty id".to_string()));
        }
        out.push(fact);
    }
    Ok(out)
}

pub fn load_background(path: &Path) -> Result<Vec<BackgroundFact>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_background(std::io::BufReader::new(file))
}
