use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FeatureGroup, FeatureKey, RecError};

/// Sparse row: strictly ascending indexes, no stored zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds from unordered pairs; weights of repeated indexes are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, w) in pairs {
            *merged.entry(i).or_insert(0.0) += w;
        }
        SparseVector {
            entries: merged.into_iter().filter(|(_, w)| *w != 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map_or(0.0, |pos| self.entries[pos].1)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    /// Products u_f·v_f over the shared support, ascending by index.
    pub fn products(&self, other: &SparseVector) -> Vec<(usize, f64)> {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 * b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        self.products(other).iter().map(|(_, p)| p).sum()
    }
}

/// u·v / (‖u‖‖v‖), 0 when either side is empty.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return 0.0;
    }
    u.dot(v) / denom
}

/// Smoothed inverse document frequency.
pub fn idf(n: usize, df: usize) -> f64 {
    ((1.0 + n as f64) / (1.0 + df as f64)).ln() + 1.0
}

pub type FeatureCounts = BTreeMap<FeatureKey, u32>;

/// The entity-feature matrix with tf-idf weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VsmModel {
    /// Features in index order.
    pub vocab: Vec<FeatureKey>,
    pub idf: Vec<f64>,
    pub group_weights: BTreeMap<FeatureGroup, f64>,
    pub rows: BTreeMap<String, SparseVector>,
}

impl VsmModel {
    /// weight(e, f) = count(f, e) · idf(f) · group_weight(group(f)).
    pub fn fit(counts: &BTreeMap<String, FeatureCounts>, group_weights: &BTreeMap<FeatureGroup, f64>) -> Self {
        let mut df: BTreeMap<&FeatureKey, usize> = BTreeMap::new();
        for row in counts.values() {
            for key in row.keys() {
                *df.entry(key).or_insert(0) += 1;
            }
        }
        let n = counts.len();
        let vocab: Vec<FeatureKey> = df.keys().map(|k| (*k).clone()).collect();
        let idf_values: Vec<f64> = df.values().map(|&d| idf(n, d)).collect();
        let weights: BTreeMap<FeatureGroup, f64> = FeatureGroup::ALL
            .iter()
            .map(|g| (*g, group_weights.get(g).copied().unwrap_or(1.0)))
            .collect();
        let rows = counts
            .iter()
            .map(|(entity, row)| {
                let vector = SparseVector::from_pairs(row.iter().map(|(key, &c)| {
                    let index = vocab.binary_search(key).expect("feature in vocabulary");
                    (index, c as f64 * idf_values[index] * weights[&key.group])
                }));
                (entity.clone(), vector)
            })
            .collect();
        VsmModel {
            vocab,
            idf: idf_values,
            group_weights: weights,
            rows,
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.vocab.len()
    }

    pub fn row(&self, entity: &str) -> Option<&SparseVector> {
        self.rows.get(entity)
    }

    pub fn index_of(&self, key: &FeatureKey) -> Option<usize> {
        self.vocab.binary_search(key).ok()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, RecError> {
        let model: VsmModel = serde_json::from_str(text).map_err(|e| RecError::Model(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<(), RecError> {
        if self.idf.len() != self.vocab.len() {
            return Err(RecError::Model("idf length differs from vocabulary".into()));
        }
        if self.vocab.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RecError::Model("vocabulary not strictly sorted".into()));
        }
        for (entity, row) in &self.rows {
            let ok = row.entries.windows(2).all(|w| w[0].0 < w[1].0)
                && row
                    .entries
                    .iter()
                    .all(|&(i, w)| i < self.vocab.len() && w != 0.0 && w.is_finite());
            if !ok {
                return Err(RecError::Model(format!("malformed row for {entity}")));
            }
        }
        Ok(())
    }
}
