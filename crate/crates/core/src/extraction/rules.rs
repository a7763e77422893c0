use serde::{Deserialize, Serialize};

use super::fact::{ExtractedFact, FactEntity, RelationRef, TypeRef};
use super::gazetteer::Mention;
use super::{ExtractionError, Sentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// The subject mention precedes the object mention.
    SubjectFirst,
    ObjectFirst,
    Either,
}

/// A relation pattern: typed mention pair plus trigger tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRule {
    pub relation_id: String,
    pub relation_label: String,
    pub subject_type: String,
    pub object_type: String,
    /// Matched as a contiguous token sequence after tokenization.
    pub trigger: String,
    pub direction: Direction,
    pub confidence: f64,
}

impl RelationRule {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(ExtractionError::Invalid(format!(
                "rule {}: confidence {} outside (0, 1]",
                self.relation_id, self.confidence
            )));
        }
        if tokenize(&self.trigger).is_empty() {
            return Err(ExtractionError::Invalid(format!(
                "rule {}: empty trigger",
                self.relation_id
            )));
        }
        Ok(())
    }
}

pub fn load_rules(text: &str) -> Result<Vec<RelationRule>, ExtractionError> {
    let rules: Vec<RelationRule> =
        serde_json::from_str(text).map_err(|e| ExtractionError::Invalid(format!("rules: {e}")))?;
    rules.iter().try_for_each(RelationRule::validate)?;
    Ok(rules)
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn char_slice(chars: &[char], from: usize, to: usize) -> String {
    chars[from..to].iter().collect()
}

/// Tokens strictly between the mentions plus one flanking token on each side.
fn window(chars: &[char], first: &Mention, second: &Mention) -> Vec<String> {
    let mut tokens = Vec::new();
    if let Some(before) = tokenize(&char_slice(chars, 0, first.start)).pop() {
        tokens.push(before);
    }
    tokens.extend(tokenize(&char_slice(chars, first.end, second.start)));
    if let Some(after) = tokenize(&char_slice(chars, second.end, chars.len())).into_iter().next() {
        tokens.push(after);
    }
    tokens
}

fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

fn side(m: &Mention) -> FactEntity {
    FactEntity {
        mention: m.text.clone(),
        label: m.entry.label.clone(),
        id: m.entry.entity_id.clone(),
        entity_type: TypeRef {
            id: m.entry.type_id.clone(),
            label: m.entry.type_label.clone(),
        },
    }
}

/// Emits a fact for every ordered mention pair whose types fit a rule under
/// its direction and whose window contains the trigger. Facts with the same
/// subject, relation and object are collapsed, keeping the highest confidence.
pub fn apply_rules(sentence: &Sentence, mentions: &[Mention], rules: &[RelationRule]) -> Vec<ExtractedFact> {
    let chars: Vec<char> = sentence.text.chars().collect();
    let triggers: Vec<Vec<String>> = rules.iter().map(|r| tokenize(&r.trigger)).collect();
    let mut facts: Vec<ExtractedFact> = Vec::new();

    for (i, first) in mentions.iter().enumerate() {
        for second in &mentions[i + 1..] {
            if first.entry.entity_id == second.entry.entity_id {
                continue;
            }
            let tokens = window(&chars, first, second);
            for (rule, trigger) in rules.iter().zip(&triggers) {
                if !contains_sequence(&tokens, trigger) {
                    continue;
                }
                let forward = matches!(rule.direction, Direction::SubjectFirst | Direction::Either)
                    && first.entry.type_id == rule.subject_type
                    && second.entry.type_id == rule.object_type;
                let backward = matches!(rule.direction, Direction::ObjectFirst | Direction::Either)
                    && second.entry.type_id == rule.subject_type
                    && first.entry.type_id == rule.object_type;
                let pairs = [(forward, first, second), (backward, second, first)];
                for (_, subject, object) in pairs.iter().filter(|p| p.0) {
                    let fact = ExtractedFact {
                        doc_id: sentence.doc_id.clone(),
                        sentence: sentence.text.clone(),
                        offset: sentence.start,
                        confidence: rule.confidence,
                        subject: side(subject),
                        relation: RelationRef {
                            id: rule.relation_id.clone(),
                            label: rule.relation_label.clone(),
                        },
                        object: side(object),
                    };
                    match facts.iter_mut().find(|f| f.key() == fact.key()) {
                        Some(existing) => existing.confidence = existing.confidence.max(fact.confidence),
                        None => facts.push(fact),
                    }
                }
            }
        }
    }
    facts
}
