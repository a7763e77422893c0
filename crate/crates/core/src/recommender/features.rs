use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{FeatureCounts, FeatureGroup, FeatureKey, RecError, RecommenderConfig};
use crate::extraction::tokenize;
use crate::store::{GraphSnapshot, Iri, Term};
use crate::vocab::{self, kg, Namespaces};

/// Extracts feature counts for entities of one graph snapshot.
pub struct Featurizer<'a> {
    graph: &'a GraphSnapshot,
    ns: &'a Namespaces,
    config: &'a RecommenderConfig,
    stopwords: HashSet<String>,
    text_payload: HashSet<String>,
}

fn pred(iri: &str) -> Iri {
    Iri::new_unchecked(iri)
}

impl<'a> Featurizer<'a> {
    pub fn new(graph: &'a GraphSnapshot, ns: &'a Namespaces, config: &'a RecommenderConfig) -> Self {
        let text_payload = graph
            .subjects(&pred(vocab::RDF_TYPE), &Term::iri(kg::TEXT_PAYLOAD_PROPERTY))
            .into_iter()
            .map(|t| t.value().to_string())
            .collect();
        Featurizer {
            graph,
            ns,
            config,
            stopwords: config.stopwords.iter().map(|s| s.to_lowercase()).collect(),
            text_payload,
        }
    }

    fn known(&self, entity: &Term) -> bool {
        self.graph.match_pattern(Some(entity), None, None).next().is_some()
            || self.graph.match_pattern(None, None, Some(entity)).next().is_some()
    }

    fn label(&self, iri: &str) -> String {
        match self.graph.object(&Term::iri(iri), &pred(vocab::RDFS_LABEL)) {
            Some(t) => t.value().to_string(),
            None => self.ns.kb_id(iri),
        }
    }

    fn documents(&self, entity: &Term) -> Vec<Term> {
        self.graph.subjects(&pred(kg::ABOUT), entity)
    }

    /// bow, entity and frame features from the entity's own text and facts.
    fn own_textual(&self, entity: &Term, counts: &mut FeatureCounts) {
        let mut add = |group, name: String| *counts.entry(FeatureKey::new(group, name)).or_insert(0) += 1;
        for doc in self.documents(entity) {
            for text in self.graph.objects(&doc, &pred(kg::TEXT)) {
                for token in tokenize(text.value()) {
                    if token.chars().count() >= 2 && !self.stopwords.contains(&token) {
                        add(FeatureGroup::Bow, token);
                    }
                }
            }
        }
        for stmt in self.graph.objects(entity, &pred(kg::HAS_STATEMENT)) {
            let get = |p: &str| self.graph.object(&stmt, &pred(p)).map(|t| self.label(t.value()));
            let (Some(s), Some(r), Some(o), Some(st), Some(ot)) = (
                get(vocab::RDF_SUBJECT),
                get(vocab::RDF_PREDICATE),
                get(vocab::RDF_OBJECT),
                get(kg::SUBJECT_TYPE),
                get(kg::OBJECT_TYPE),
            ) else {
                continue;
            };
            add(FeatureGroup::Entity, format!("{s}:{st}"));
            add(FeatureGroup::Entity, format!("{o}:{ot}"));
            add(FeatureGroup::Frame, format!("{st},{r},{ot}"));
        }
    }

    fn structural(&self, entity: &Term, counts: &mut FeatureCounts) {
        for t in self.graph.match_pattern(Some(entity), None, None) {
            let p = t.predicate.as_str();
            if p == vocab::RDF_TYPE || p == vocab::RDFS_LABEL || p.starts_with(kg::NS) || self.text_payload.contains(p)
            {
                continue;
            }
            let key = FeatureKey::new(FeatureGroup::Struct, format!("{p}={}", t.object.value()));
            *counts.entry(key).or_insert(0) += 1;
        }
    }

    fn aggregates(&self, entity: &Term) -> bool {
        if !self.documents(entity).is_empty() {
            return false;
        }
        if self.config.aggregate_types.is_empty() {
            return true;
        }
        let types = self.graph.objects(entity, &pred(vocab::RDF_TYPE));
        types
            .iter()
            .any(|t| self.config.aggregate_types.iter().any(|a| a == t.value()))
    }

    /// Nodes within two hops over the aggregation predicates, either direction.
    pub fn neighborhood(&self, entity: &Term) -> BTreeSet<String> {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut frontier = vec![entity.clone()];
        for _ in 0..2 {
            let mut next = Vec::new();
            for node in &frontier {
                for p in &self.config.aggregation_predicates {
                    let p = pred(p);
                    let out = self.graph.objects(node, &p);
                    let inc = self.graph.subjects(&p, node);
                    for n in out.into_iter().chain(inc) {
                        if n.is_literal() || n == *entity {
                            continue;
                        }
                        if seen.insert(n.value().to_string()) {
                            next.push(n);
                        }
                    }
                }
            }
            frontier = next;
        }
        seen
    }

    pub fn featurize(&self, entity: &str) -> Result<FeatureCounts, RecError> {
        let term = Term::iri(entity);
        if !self.known(&term) {
            return Err(RecError::UnknownEntity(entity.to_string()));
        }
        let mut counts = BTreeMap::new();
        self.structural(&term, &mut counts);
        if self.aggregates(&term) {
            for node in self.neighborhood(&term) {
                self.own_textual(&Term::iri(node), &mut counts);
            }
        } else {
            self.own_textual(&term, &mut counts);
        }
        Ok(counts)
    }
}
