//! Content-based entity recommendation over a tf-idf vector space model,
//! with per-feature explanations.
//!
//! Every entity is a row of concatenated feature groups: bag of words from
//! its text, structured `predicate=value` pairs, linked entities as
//! `label:type label`, and frames `subject type,relation,object type`.

mod features;
mod vsm;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::Featurizer;
pub use vsm::{cosine, idf, FeatureCounts, SparseVector, VsmModel};

use crate::store::{GraphSnapshot, Iri, Term};
use crate::vocab::{self, Namespaces};

#[derive(Debug, Error, PartialEq)]
pub enum RecError {
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("entity {0} has no row in the model")]
    MissingRow(String),
    #[error("model has no rows")]
    Unfitted,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("model: {0}")]
    Model(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Bow,
    Struct,
    Entity,
    Frame,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Bow,
        FeatureGroup::Struct,
        FeatureGroup::Entity,
        FeatureGroup::Frame,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureGroup::Bow => "bow",
            FeatureGroup::Struct => "struct",
            FeatureGroup::Entity => "entity",
            FeatureGroup::Frame => "frame",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureKey {
    pub group: FeatureGroup,
    pub name: String,
}

impl FeatureKey {
    pub fn new(group: FeatureGroup, name: impl Into<String>) -> Self {
        FeatureKey {
            group,
            name: name.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommenderConfig {
    pub group_weights: BTreeMap<FeatureGroup, f64>,
    /// Edges (either direction) that mark an item as already known to a user.
    pub authorship_predicates: Vec<String>,
    /// Edges followed (either direction, up to two hops) to build profiles of
    /// entities without their own text.
    pub aggregation_predicates: Vec<String>,
    /// Types whose text-less members get aggregated profiles; empty means all.
    pub aggregate_types: Vec<String>,
    pub stopwords: Vec<String>,
    /// Recommendation category name to target type IRI.
    pub categories: BTreeMap<String, String>,
    /// Types whose instances become rows of the model; empty means every typed subject.
    pub row_types: Vec<String>,
    pub top_m: usize,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        RecommenderConfig {
            group_weights: FeatureGroup::ALL.iter().map(|g| (*g, 1.0)).collect(),
            authorship_predicates: vec![],
            aggregation_predicates: vec![],
            aggregate_types: vec![],
            stopwords: vec![],
            categories: BTreeMap::new(),
            row_types: vec![],
            top_m: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub rank: usize,
    pub item: String,
    pub item_type: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub group: FeatureGroup,
    pub feature: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedEntity {
    pub label: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityGroup {
    pub type_label: String,
    pub entities: Vec<GroupedEntity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub score: f64,
    /// Every nonzero contribution, largest first.
    pub contributions: Vec<Contribution>,
    /// The `top_m` largest contributions of each group.
    pub top: BTreeMap<FeatureGroup, Vec<Contribution>>,
    /// Entity-group contributions split into (label, type label), grouped by
    /// type label; groups ordered by total weight.
    pub grouped: Vec<EntityGroup>,
}

fn by_weight_desc(a: &Contribution, b: &Contribution) -> std::cmp::Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then(a.group.cmp(&b.group))
        .then_with(|| a.feature.cmp(&b.feature))
}

/// Contribution of each shared feature: u_f·v_f / (‖u‖‖v‖).
pub fn explain_vectors(model: &VsmModel, u: &SparseVector, v: &SparseVector, top_m: usize) -> Explanation {
    let denom = u.norm() * v.norm();
    let mut contributions: Vec<Contribution> = if denom == 0.0 {
        vec![]
    } else {
        u.products(v)
            .into_iter()
            .map(|(i, p)| Contribution {
                group: model.vocab[i].group,
                feature: model.vocab[i].name.clone(),
                weight: p / denom,
            })
            .filter(|c| c.weight != 0.0)
            .collect()
    };
    contributions.sort_by(by_weight_desc);
    let score = cosine(u, v);

    let mut top: BTreeMap<FeatureGroup, Vec<Contribution>> = BTreeMap::new();
    for c in &contributions {
        let list = top.entry(c.group).or_default();
        if list.len() < top_m {
            list.push(c.clone());
        }
    }

    let mut groups: BTreeMap<String, Vec<GroupedEntity>> = BTreeMap::new();
    for c in contributions.iter().filter(|c| c.group == FeatureGroup::Entity) {
        let (label, type_label) = c.feature.rsplit_once(':').unwrap_or((c.feature.as_str(), ""));
        groups.entry(type_label.to_string()).or_default().push(GroupedEntity {
            label: label.to_string(),
            weight: c.weight,
        });
    }
    let mut grouped: Vec<EntityGroup> = groups
        .into_iter()
        .map(|(type_label, entities)| EntityGroup { type_label, entities })
        .collect();
    let total = |g: &EntityGroup| g.entities.iter().map(|e| e.weight).sum::<f64>();
    grouped.sort_by(|a, b| {
        total(b)
            .total_cmp(&total(a))
            .then_with(|| a.type_label.cmp(&b.type_label))
    });

    Explanation {
        score,
        contributions,
        top,
        grouped,
    }
}

/// Subjects considered as model rows.
pub fn row_entities(graph: &GraphSnapshot, config: &RecommenderConfig) -> Vec<String> {
    let rdf_type = Iri::new_unchecked(vocab::RDF_TYPE);
    let mut out: Vec<String> = if config.row_types.is_empty() {
        graph
            .match_pattern(None, Some(&rdf_type), None)
            .filter(|t| matches!(t.subject, Term::Iri(_)) && !t.object.value().starts_with(vocab::kg::NS))
            .map(|t| t.subject.value().to_string())
            .collect()
    } else {
        config
            .row_types
            .iter()
            .flat_map(|ty| graph.subjects(&rdf_type, &Term::iri(ty)))
            .map(|t| t.value().to_string())
            .collect()
    };
    out.sort();
    out.dedup();
    out
}

/// Featurizes `entities` and fits the tf-idf model.
pub fn fit(
    graph: &GraphSnapshot,
    ns: &Namespaces,
    config: &RecommenderConfig,
    entities: &[String],
) -> Result<VsmModel, RecError> {
    let featurizer = Featurizer::new(graph, ns, config);
    let mut counts = BTreeMap::new();
    for e in entities {
        counts.insert(e.clone(), featurizer.featurize(e)?);
    }
    Ok(VsmModel::fit(&counts, &config.group_weights))
}

/// A fitted model bound to the snapshot it was fitted on.
#[derive(Debug, Clone)]
pub struct Recommender {
    pub model: Arc<VsmModel>,
    pub graph: Arc<GraphSnapshot>,
    pub config: RecommenderConfig,
}

impl Recommender {
    pub fn new(model: Arc<VsmModel>, graph: Arc<GraphSnapshot>, config: RecommenderConfig) -> Self {
        Recommender { model, graph, config }
    }

    fn user_row(&self, user: &str) -> Result<&SparseVector, RecError> {
        if self.model.rows.is_empty() {
            return Err(RecError::Unfitted);
        }
        self.model
            .row(user)
            .ok_or_else(|| RecError::MissingRow(user.to_string()))
    }

    /// Items linked to `user` by an authorship predicate in either direction.
    pub fn connected(&self, user: &str) -> HashSet<String> {
        let u = Term::iri(user);
        let mut out = HashSet::new();
        for p in &self.config.authorship_predicates {
            let p = Iri::new_unchecked(p.as_str());
            out.extend(self.graph.objects(&u, &p).into_iter().map(|t| t.value().to_string()));
            out.extend(self.graph.subjects(&p, &u).into_iter().map(|t| t.value().to_string()));
        }
        out
    }

    pub fn recommend(
        &self,
        user: &str,
        target_type: &str,
        k: usize,
        exclude_connected: bool,
    ) -> Result<Vec<Recommendation>, RecError> {
        if k < 1 {
            return Err(RecError::InvalidK);
        }
        let u = self.user_row(user)?;
        let excluded = if exclude_connected {
            self.connected(user)
        } else {
            HashSet::new()
        };
        let mut scored: Vec<(f64, String)> = self
            .graph
            .subjects(&Iri::new_unchecked(vocab::RDF_TYPE), &Term::iri(target_type))
            .into_iter()
            .map(|t| t.value().to_string())
            .filter(|item| item != user && !excluded.contains(item))
            .filter_map(|item| self.model.row(&item).map(|v| (cosine(u, v), item)))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        Ok(scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (score, item))| Recommendation {
                rank: i + 1,
                item,
                item_type: target_type.to_string(),
                score,
            })
            .collect())
    }

    pub fn recommend_category(&self, user: &str, category: &str, k: usize) -> Result<Vec<Recommendation>, RecError> {
        let target = self
            .config
            .categories
            .get(category)
            .ok_or_else(|| RecError::UnknownCategory(category.to_string()))?;
        self.recommend(user, target, k, true)
    }

    pub fn explain(&self, user: &str, item: &str, top_m: usize) -> Result<Explanation, RecError> {
        let u = self.user_row(user)?;
        let v = self
            .model
            .row(item)
            .ok_or_else(|| RecError::MissingRow(item.to_string()))?;
        Ok(explain_vectors(&self.model, u, v, top_m))
    }
}
