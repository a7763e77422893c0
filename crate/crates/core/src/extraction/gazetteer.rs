use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{ExtractionError, Sentence};

/// Dictionary entry linking surface forms to a canonical KB entity and its type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub surface_forms: Vec<String>,
    pub entity_id: String,
    pub label: String,
    pub type_id: String,
    pub type_label: String,
}

/// A validated gazetteer with surface forms pre-normalized for matching.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    /// (lowercased surface chars, entry index), longest first, then entry order.
    forms: Vec<(Vec<char>, usize)>,
}

fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

impl Gazetteer {
    pub fn new(entries: Vec<GazetteerEntry>) -> Result<Self, ExtractionError> {
        let mut seen = HashSet::new();
        let mut forms = Vec::new();
        for (idx, e) in entries.iter().enumerate() {
            if !seen.insert(e.entity_id.as_str()) {
                return Err(ExtractionError::Invalid(format!(
                    "duplicate gazetteer entity {}",
                    e.entity_id
                )));
            }
            if e.entity_id.is_empty() || e.label.is_empty() || e.type_id.is_empty() || e.type_label.is_empty() {
                return Err(ExtractionError::Invalid(format!(
                    "gazetteer entry {idx} has empty fields"
                )));
            }
            let surfaces: Vec<Vec<char>> = e
                .surface_forms
                .iter()
                .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
                .filter(|s| !s.is_empty())
                .map(|s| s.chars().map(fold).collect())
                .collect();
            if surfaces.is_empty() {
                return Err(ExtractionError::Invalid(format!(
                    "gazetteer entity {} has no surface forms",
                    e.entity_id
                )));
            }
            forms.extend(surfaces.into_iter().map(|s| (s, idx)));
        }
        forms.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        Ok(Gazetteer { entries, forms })
    }

    pub fn from_json(text: &str) -> Result<Self, ExtractionError> {
        let entries: Vec<GazetteerEntry> =
            serde_json::from_str(text).map_err(|e| ExtractionError::Invalid(format!("gazetteer: {e}")))?;
        Gazetteer::new(entries)
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A gazetteer match. `start`/`end` are character offsets within the sentence (end exclusive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub entry: GazetteerEntry,
}

/// Leftmost-longest, non-overlapping, case-insensitive matches on word boundaries.
pub fn find_mentions(sentence: &Sentence, gazetteer: &Gazetteer) -> Vec<Mention> {
    let chars: Vec<char> = sentence.text.chars().collect();
    let folded: Vec<char> = chars.iter().copied().map(fold).collect();
    let n = chars.len();
    let word = |i: usize| chars[i].is_alphanumeric();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let starts_word = i == 0 || !word(i - 1) || !word(i);
        let hit = starts_word
            .then(|| {
                gazetteer.forms.iter().find(|(form, _)| {
                    let end = i + form.len();
                    end <= n && folded[i..end] == form[..] && (end == n || !word(end) || !word(end - 1))
                })
            })
            .flatten();
        match hit {
            Some((form, idx)) => {
                let end = i + form.len();
                out.push(Mention {
                    start: i,
                    end,
                    text: chars[i..end].iter().collect(),
                    entry: gazetteer.entries[*idx].clone(),
                });
                i = end;
            }
            None => i += 1,
        }
    }
    out
}
