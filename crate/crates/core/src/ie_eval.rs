//! Micro-averaged P/R/F1 of extraction output against gold annotations.
//!
//! Criteria: MD exact character span; TYPE span + type label; EL span +
//! canonical entity label; RN (subject, relation, object) labels; REL the
//! full quintuple including both type labels. Labels are compared lowercased
//! with whitespace collapsed. Identical predictions are collapsed, then each
//! prediction claims the first unmatched gold item with an equal key.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::DocumentExtraction;
use crate::ingest::collapse_whitespace;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unknown document {0:?} in predictions")]
    UnknownDocument(String),
    #[error("duplicate document {0:?}")]
    DuplicateDocument(String),
    #[error("document {doc_id:?}: mention span {start}..{end} outside text")]
    BadSpan { doc_id: String, start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotatedMention {
    pub start: usize,
    pub end: usize,
    pub label: String,
    #[serde(rename = "type")]
    pub type_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelRef {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotatedEntity {
    pub label: String,
    #[serde(rename = "type")]
    pub entity_type: LabelRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mention: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotatedFact {
    pub subject: AnnotatedEntity,
    pub relation: LabelRef,
    pub object: AnnotatedEntity,
}

/// One gold or predicted document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub mentions: Vec<AnnotatedMention>,
    #[serde(default)]
    pub facts: Vec<AnnotatedFact>,
}

impl AnnotatedDocument {
    /// Converts extractor output into the annotation shape.
    pub fn from_extraction(doc_id: &str, text: &str, extraction: &DocumentExtraction) -> Self {
        let entity = |e: &crate::extraction::FactEntity| AnnotatedEntity {
            label: e.label.clone(),
            entity_type: LabelRef {
                label: e.entity_type.label.clone(),
                id: Some(e.entity_type.id.clone()),
            },
            id: Some(e.id.clone()),
            mention: Some(e.mention.clone()),
        };
        AnnotatedDocument {
            doc_id: doc_id.to_string(),
            text: text.to_string(),
            mentions: extraction
                .mentions
                .iter()
                .map(|m| AnnotatedMention {
                    start: m.start,
                    end: m.end,
                    label: m.entry.label.clone(),
                    type_label: m.entry.type_label.clone(),
                })
                .collect(),
            facts: extraction
                .facts
                .iter()
                .map(|f| AnnotatedFact {
                    subject: entity(&f.subject),
                    relation: LabelRef {
                        label: f.relation.label.clone(),
                        id: Some(f.relation.id.clone()),
                    },
                    object: entity(&f.object),
                })
                .collect(),
        }
    }
}

pub fn read_documents<R: BufRead>(reader: R) -> Result<Vec<AnnotatedDocument>, EvalError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| EvalError::Line { line: i + 1, message };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: AnnotatedDocument = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(EvalError::DuplicateDocument(doc.doc_id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricReport {
    pub md: Counts,
    #[serde(rename = "type")]
    pub typing: Counts,
    pub el: Counts,
    pub rn: Counts,
    pub rel: Counts,
}

fn norm(label: &str) -> String {
    collapse_whitespace(label).to_lowercase()
}

fn greedy<K: PartialEq>(gold: &[K], predicted: &[K]) -> Counts {
    let mut used = vec![false; gold.len()];
    let mut tp = 0;
    for p in predicted {
        if let Some(i) = (0..gold.len()).find(|&i| !used[i] && gold[i] == *p) {
            used[i] = true;
            tp += 1;
        }
    }
    Counts {
        tp,
        fp: predicted.len() - tp,
        fn_: gold.len() - tp,
    }
}

fn dedup<T: Clone + Eq + std::hash::Hash>(items: &[T]) -> Vec<T> {
    let mut seen = HashSet::new();
    items.iter().filter(|x| seen.insert(*x)).cloned().collect()
}

fn score_document(gold: &AnnotatedDocument, pred: Option<&AnnotatedDocument>) -> MetricReport {
    let empty = AnnotatedDocument {
        doc_id: gold.doc_id.clone(),
        text: String::new(),
        mentions: vec![],
        facts: vec![],
    };
    let pred = pred.unwrap_or(&empty);
    let pm = dedup(&pred.mentions);
    let pf = dedup(&pred.facts);

    let span = |m: &AnnotatedMention| (m.start, m.end);
    let typed = |m: &AnnotatedMention| (m.start, m.end, norm(&m.type_label));
    let linked = |m: &AnnotatedMention| (m.start, m.end, norm(&m.label));
    let triple = |f: &AnnotatedFact| (norm(&f.subject.label), norm(&f.relation.label), norm(&f.object.label));
    let quint = |f: &AnnotatedFact| {
        (
            norm(&f.subject.label),
            norm(&f.subject.entity_type.label),
            norm(&f.relation.label),
            norm(&f.object.label),
            norm(&f.object.entity_type.label),
        )
    };
    fn keys<T, K>(items: &[T], f: impl Fn(&T) -> K) -> Vec<K> {
        items.iter().map(f).collect()
    }

    MetricReport {
        md: greedy(&keys(&gold.mentions, span), &keys(&pm, span)),
        typing: greedy(&keys(&gold.mentions, typed), &keys(&pm, typed)),
        el: greedy(&keys(&gold.mentions, linked), &keys(&pm, linked)),
        rn: greedy(&keys(&gold.facts, triple), &keys(&pf, triple)),
        rel: greedy(&keys(&gold.facts, quint), &keys(&pf, quint)),
    }
}

fn check_spans(doc: &AnnotatedDocument) -> Result<(), EvalError> {
    let len = doc.text.chars().count();
    match doc.mentions.iter().find(|m| m.start >= m.end || m.end > len) {
        Some(m) => Err(EvalError::BadSpan {
            doc_id: doc.doc_id.clone(),
            start: m.start,
            end: m.end,
        }),
        None => Ok(()),
    }
}

/// Micro-averaged counts over the gold corpus. Gold documents without
/// predictions contribute only false negatives.
pub fn score(gold: &[AnnotatedDocument], predicted: &[AnnotatedDocument]) -> Result<MetricReport, EvalError> {
    let mut by_id: HashMap<&str, &AnnotatedDocument> = HashMap::new();
    for g in gold {
        check_spans(g)?;
        if by_id.insert(&g.doc_id, g).is_some() {
            return Err(EvalError::DuplicateDocument(g.doc_id.clone()));
        }
    }
    let mut preds: HashMap<&str, &AnnotatedDocument> = HashMap::new();
    for p in predicted {
        if !by_id.contains_key(p.doc_id.as_str()) {
            return Err(EvalError::UnknownDocument(p.doc_id.clone()));
        }
        if preds.insert(&p.doc_id, p).is_some() {
            return Err(EvalError::DuplicateDocument(p.doc_id.clone()));
        }
    }
    let mut report = MetricReport::default();
    for g in gold {
        let r = score_document(g, preds.get(g.doc_id.as_str()).copied());
        report.md.add(r.md);
        report.typing.add(r.typing);
        report.el.add(r.el);
        report.rn.add(r.rn);
        report.rel.add(r.rel);
    }
    Ok(report)
}

pub const REPORT_COLUMNS: [&str; 7] = ["MD-F1", "TYPE-F1", "EL-F1", "RN-F1", "REL-P", "REL-R", "REL-F1"];

impl MetricReport {
    /// Row values in percentage points, in [`REPORT_COLUMNS`] order.
    pub fn row(&self) -> [f64; 7] {
        [
            self.md.f1(),
            self.typing.f1(),
            self.el.f1(),
            self.rn.f1(),
            self.rel.precision(),
            self.rel.recall(),
            self.rel.f1(),
        ]
        .map(|v| v * 100.0)
    }
}

pub fn render_report(report: &MetricReport) -> String {
    let mut out = String::new();
    let header: Vec<String> = REPORT_COLUMNS.iter().map(|c| format!("{c:>7}")).collect();
    let cells: Vec<String> = report.row().iter().map(|v| format!("{v:>7.2}")).collect();
    let _ = writeln!(out, "{}", header.join(" | "));
    let _ = writeln!(out, "{}", cells.join(" | "));
    out
}
