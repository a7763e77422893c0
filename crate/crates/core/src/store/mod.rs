//! Immutable, fully indexed in-memory triple store.
//!
//! Writes go through a [`GraphBuilder`]; [`GraphBuilder::publish`] freezes the
//! triple set into a [`GraphSnapshot`] whose term dictionary is sorted by
//! canonical N-Triples text, so every index (SPO, POS, OSP) enumerates in
//! canonical order and query results are reproducible.

mod ntriples;
mod term;

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use thiserror::Error;

pub use ntriples::{parse_document, parse_line};
pub use term::{Iri, Literal, Term, Triple};

use crate::vocab::Namespaces;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("literal {0} cannot be the subject of a triple")]
    LiteralSubject(String),
    #[error("invalid IRI: {0:?}")]
    InvalidIri(String),
    #[error("invalid language tag: {0:?}")]
    InvalidLanguageTag(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Single-writer build phase of a graph.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    triples: HashSet<Triple>,
    version: u64,
}

impl GraphBuilder {
    pub fn new() -> Self {
        GraphBuilder {
            triples: HashSet::new(),
            version: 1,
        }
    }

    pub fn with_version(version: u64) -> Self {
        GraphBuilder {
            triples: HashSet::new(),
            version,
        }
    }

    /// Returns `true` iff the triple was not already present.
    pub fn insert(&mut self, triple: Triple) -> Result<bool, StoreError> {
        triple.validate()?;
        Ok(self.triples.insert(triple))
    }

    /// Inserts every triple; returns how many were new.
    pub fn extend<I: IntoIterator<Item = Triple>>(&mut self, triples: I) -> Result<usize, StoreError> {
        let mut added = 0;
        for t in triples {
            if self.insert(t)? {
                added += 1;
            }
        }
        Ok(added)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn set_version(&mut self, version: u64) {
        self.version = version;
    }

    pub fn publish(self) -> GraphSnapshot {
        GraphSnapshot::from_triples(self.triples, self.version)
    }
}

type Row = [u32; 3];

/// A published, read-only graph.
#[derive(Debug, Clone)]
pub struct GraphSnapshot {
    version: u64,
    terms: Vec<Term>,
    ids: HashMap<Term, u32>,
    /// (s, p, o)
    spo: Vec<Row>,
    /// (p, o, s)
    pos: Vec<Row>,
    /// (o, s, p)
    osp: Vec<Row>,
}

impl Default for GraphSnapshot {
    fn default() -> Self {
        GraphSnapshot::from_triples(HashSet::new(), 0)
    }
}

impl GraphSnapshot {
    fn from_triples(triples: HashSet<Triple>, version: u64) -> Self {
        let mut keyed: Vec<(String, Term)> = triples
            .iter()
            .flat_map(|t| [t.subject.clone(), Term::from(t.predicate.clone()), t.object.clone()])
            .collect::<HashSet<Term>>()
            .into_iter()
            .map(|term| (term.canonical(), term))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let terms: Vec<Term> = keyed.into_iter().map(|(_, t)| t).collect();
        let ids: HashMap<Term, u32> = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();

        let mut spo: Vec<Row> = triples
            .iter()
            .map(|t| [ids[&t.subject], ids[&Term::from(t.predicate.clone())], ids[&t.object]])
            .collect();
        spo.sort_unstable();
        let mut pos: Vec<Row> = spo.iter().map(|&[s, p, o]| [p, o, s]).collect();
        pos.sort_unstable();
        let mut osp: Vec<Row> = spo.iter().map(|&[s, p, o]| [o, s, p]).collect();
        osp.sort_unstable();

        GraphSnapshot {
            version,
            terms,
            ids,
            spo,
            pos,
            osp,
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    /// Cardinalities of the SPO, POS and OSP indexes.
    pub fn index_cardinalities(&self) -> [usize; 3] {
        [self.spo.len(), self.pos.len(), self.osp.len()]
    }

    /// Starts a successor build containing this snapshot's triples.
    pub fn to_builder(&self) -> GraphBuilder {
        GraphBuilder {
            triples: self.triples().collect(),
            version: self.version + 1,
        }
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.match_pattern(Some(&triple.subject), Some(&triple.predicate), Some(&triple.object))
            .next()
            .is_some()
    }

    /// All triples in SPO order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(move |&row| self.decode(row))
    }

    /// Triples agreeing with every bound position, in the order of the index
    /// that serves the pattern.
    pub fn match_pattern<'a>(
        &'a self,
        subject: Option<&Term>,
        predicate: Option<&Iri>,
        object: Option<&Term>,
    ) -> Box<dyn Iterator<Item = Triple> + 'a> {
        let lookup = |term: Option<Term>| -> Result<Option<u32>, ()> {
            match term {
                None => Ok(None),
                Some(t) => self.ids.get(&t).copied().map(Some).ok_or(()),
            }
        };
        let (s, p, o) = match (
            lookup(subject.cloned()),
            lookup(predicate.cloned().map(Term::from)),
            lookup(object.cloned()),
        ) {
            (Ok(s), Ok(p), Ok(o)) => (s, p, o),
            _ => return Box::new(std::iter::empty()),
        };
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => {
                let found = self.spo.binary_search(&[s, p, o]).is_ok();
                Box::new(found.then(|| self.decode([s, p, o])).into_iter())
            }
            (Some(s), Some(p), None) => self.scan(&self.spo, &[s, p], |r| r),
            (Some(s), None, Some(o)) => self.scan(&self.osp, &[o, s], |[o, s, p]| [s, p, o]),
            (Some(s), None, None) => self.scan(&self.spo, &[s], |r| r),
            (None, Some(p), Some(o)) => self.scan(&self.pos, &[p, o], |[p, o, s]| [s, p, o]),
            (None, Some(p), None) => self.scan(&self.pos, &[p], |[p, o, s]| [s, p, o]),
            (None, None, Some(o)) => self.scan(&self.osp, &[o], |[o, s, p]| [s, p, o]),
            (None, None, None) => Box::new(self.triples()),
        }
    }

    /// Objects of `(subject, predicate, ?)` in canonical text order.
    pub fn objects(&self, subject: &Term, predicate: &Iri) -> Vec<Term> {
        let mut ids: Vec<u32> = match self.ids_of(subject, predicate) {
            Some((s, p)) => prefix_range(&self.spo, &[s, p])
                .map(|r| self.spo[r].iter().map(|row| row[2]).collect())
                .unwrap_or_default(),
            None => Vec::new(),
        };
        ids.sort_unstable();
        ids.into_iter().map(|i| self.terms[i as usize].clone()).collect()
    }

    /// Subjects of `(?, predicate, object)` in canonical text order.
    pub fn subjects(&self, predicate: &Iri, object: &Term) -> Vec<Term> {
        let mut ids: Vec<u32> = match self.ids_of(object, predicate) {
            Some((o, p)) => prefix_range(&self.pos, &[p, o])
                .map(|r| self.pos[r].iter().map(|row| row[2]).collect())
                .unwrap_or_default(),
            None => Vec::new(),
        };
        ids.sort_unstable();
        ids.into_iter().map(|i| self.terms[i as usize].clone()).collect()
    }

    /// First object in canonical order, if any.
    pub fn object(&self, subject: &Term, predicate: &Iri) -> Option<Term> {
        self.objects(subject, predicate).into_iter().next()
    }

    /// Canonical N-Triples export: one line per triple, lines sorted bytewise,
    /// trailing newline. An empty graph exports as the empty byte string.
    pub fn export_canonical(&self) -> Vec<u8> {
        let mut lines: Vec<String> = self.triples().map(|t| t.to_string()).collect();
        lines.sort_unstable();
        let mut out = Vec::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
        for line in lines {
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
        out
    }

    /// Parses a canonical (or any subset-conforming) N-Triples document using
    /// the default statement namespace.
    pub fn import_canonical(doc: &[u8]) -> Result<GraphSnapshot, StoreError> {
        Self::import_with(doc, &Namespaces::default(), 1)
    }

    pub fn import_with(doc: &[u8], ns: &Namespaces, version: u64) -> Result<GraphSnapshot, StoreError> {
        let mut builder = GraphBuilder::with_version(version);
        for t in parse_document(doc, &ns.statement_prefix())? {
            builder.insert(t)?;
        }
        Ok(builder.publish())
    }

    fn ids_of(&self, a: &Term, p: &Iri) -> Option<(u32, u32)> {
        let a = *self.ids.get(a)?;
        let p = *self.ids.get(&Term::from(p.clone()))?;
        Some((a, p))
    }

    fn decode(&self, [s, p, o]: Row) -> Triple {
        let predicate = match &self.terms[p as usize] {
            Term::Iri(iri) | Term::Statement(iri) => Iri::new_unchecked(iri.clone()),
            Term::Literal(_) => unreachable!("predicate ids always denote IRIs"),
        };
        Triple::new(
            self.terms[s as usize].clone(),
            predicate,
            self.terms[o as usize].clone(),
        )
    }

    fn scan<'a>(
        &'a self,
        index: &'a [Row],
        prefix: &[u32],
        to_spo: fn(Row) -> Row,
    ) -> Box<dyn Iterator<Item = Triple> + 'a> {
        match prefix_range(index, prefix) {
            Some(range) => Box::new(index[range].iter().map(move |&row| self.decode(to_spo(row)))),
            None => Box::new(std::iter::empty()),
        }
    }
}

fn prefix_range(index: &[Row], prefix: &[u32]) -> Option<Range<usize>> {
    let n = prefix.len();
    let start = index.partition_point(|row| &row[..n] < prefix);
    let end = index.partition_point(|row| &row[..n] <= prefix);
    (start < end).then_some(start..end)
}
