//! Text-to-fact pipeline: sentence chunking, gazetteer mention detection,
//! rule-based relation generation and reification with evidence.

mod fact;
mod gazetteer;
mod reify;
mod rules;
mod sentences;

use std::collections::HashSet;

use thiserror::Error;

pub use fact::{import_external_facts, write_facts, ExtractedFact, FactEntity, RelationRef, TypeRef};
pub use gazetteer::{find_mentions, Gazetteer, GazetteerEntry, Mention};
pub use reify::{decimal_lexical, reify, statement_hash, statement_iri};
pub use rules::{apply_rules, load_rules, tokenize, Direction, RelationRule};
pub use sentences::{split_sentences, Sentence, DEFAULT_ABBREVIATIONS};

use crate::ingest::Document;

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// A mention located in its document (character offsets into the document text).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentMention {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub entry: GazetteerEntry,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentExtraction {
    pub sentences: Vec<Sentence>,
    pub mentions: Vec<DocumentMention>,
    pub facts: Vec<ExtractedFact>,
}

/// The deterministic rule-based extractor.
#[derive(Debug, Clone)]
pub struct Extractor {
    pub gazetteer: Gazetteer,
    pub rules: Vec<RelationRule>,
    pub abbreviations: HashSet<String>,
}

impl Extractor {
    pub fn new(gazetteer: Gazetteer, rules: Vec<RelationRule>) -> Self {
        Extractor {
            gazetteer,
            rules,
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn extract(&self, doc: &Document) -> DocumentExtraction {
        let mut out = DocumentExtraction {
            sentences: split_sentences(doc, &self.abbreviations),
            ..Default::default()
        };
        for sentence in &out.sentences {
            let mentions = find_mentions(sentence, &self.gazetteer);
            out.facts.extend(apply_rules(sentence, &mentions, &self.rules));
            out.mentions.extend(mentions.into_iter().map(|m| DocumentMention {
                doc_id: doc.doc_id.clone(),
                start: sentence.start + m.start,
                end: sentence.start + m.end,
                entry: m.entry,
            }));
        }
        out
    }
}
