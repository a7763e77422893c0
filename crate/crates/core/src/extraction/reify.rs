use sha2::{Digest, Sha256};

use super::fact::ExtractedFact;
use crate::store::{Iri, Term, Triple};
use crate::vocab::{self, kg, Namespaces};

/// Hex of the first 128 bits of SHA-256 over the fact's identifying fields.
pub fn statement_hash(fact: &ExtractedFact) -> String {
    let mut h = Sha256::new();
    let offset = fact.offset.to_string();
    let parts = [
        fact.doc_id.as_str(),
        offset.as_str(),
        fact.subject.id.as_str(),
        fact.relation.id.as_str(),
        fact.object.id.as_str(),
    ];
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h.update([0x1f]);
        }
        h.update(part.as_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

pub fn statement_iri(fact: &ExtractedFact, ns: &Namespaces) -> String {
    ns.statement_iri(&statement_hash(fact))
}

/// Decimal lexical form; integral values keep no fractional part ("1").
pub fn decimal_lexical(value: f64) -> String {
    format!("{value}")
}

/// Reified triples for one fact, linked from `owner` (the entity whose text
/// carried the evidence sentence).
pub fn reify(fact: &ExtractedFact, owner: &str, ns: &Namespaces) -> Vec<Triple> {
    let stmt = Term::Statement(statement_iri(fact, ns));
    let p = |s: &str| Iri::new_unchecked(s);
    let subject = ns.kb_iri(&fact.subject.id);
    let object = ns.kb_iri(&fact.object.id);
    let relation = ns.kb_iri(&fact.relation.id);
    let subject_type = ns.kb_iri(&fact.subject.entity_type.id);
    let object_type = ns.kb_iri(&fact.object.entity_type.id);
    let label = |iri: &str, text: &str| Triple::new(Term::iri(iri), p(vocab::RDFS_LABEL), Term::literal(text));
    let on = |pred: &str, o: Term| Triple::new(stmt.clone(), p(pred), o);

    vec![
        on(vocab::RDF_TYPE, Term::iri(vocab::RDF_STATEMENT)),
        on(vocab::RDF_SUBJECT, Term::iri(&subject)),
        on(vocab::RDF_PREDICATE, Term::iri(&relation)),
        on(vocab::RDF_OBJECT, Term::iri(&object)),
        on(kg::SUBJECT_MENTION, Term::literal(&fact.subject.mention)),
        on(kg::OBJECT_MENTION, Term::literal(&fact.object.mention)),
        on(kg::SUBJECT_TYPE, Term::iri(&subject_type)),
        on(kg::OBJECT_TYPE, Term::iri(&object_type)),
        on(kg::EVIDENCE_SENTENCE, Term::literal(&fact.sentence)),
        on(kg::EVIDENCE_DOCUMENT, Term::iri(ns.document_iri(&fact.doc_id))),
        on(
            kg::EVIDENCE_OFFSET,
            Term::typed(fact.offset.to_string(), vocab::XSD_INTEGER),
        ),
        on(
            kg::CONFIDENCE,
            Term::typed(decimal_lexical(fact.confidence), vocab::XSD_DECIMAL),
        ),
        label(&subject, &fact.subject.label),
        label(&object, &fact.object.label),
        label(&subject_type, &fact.subject.entity_type.label),
        label(&object_type, &fact.object.entity_type.label),
        label(&relation, &fact.relation.label),
        Triple::new(Term::iri(owner), p(kg::HAS_STATEMENT), stmt.clone()),
    ]
}
