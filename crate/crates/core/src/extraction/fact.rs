use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ExtractionError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypeRef {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationRef {
    pub id: String,
    pub label: String,
}

/// One side of a fact: surface mention, canonical entity and its type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactEntity {
    pub mention: String,
    pub label: String,
    pub id: String,
    #[serde(rename = "type")]
    pub entity_type: TypeRef,
}

/// `<Subject (Subject Type), relation, Object (Object Type)>` with its
/// evidence sentence. Serializes to one line of the fact JSONL format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedFact {
    pub doc_id: String,
    pub sentence: String,
    /// Character offset of the sentence within the document.
    pub offset: usize,
    pub confidence: f64,
    pub subject: FactEntity,
    pub relation: RelationRef,
    pub object: FactEntity,
}

impl ExtractedFact {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(format!("confidence {} outside (0, 1]", self.confidence));
        }
        let fields = [
            ("doc_id", &self.doc_id),
            ("sentence", &self.sentence),
            ("subject.mention", &self.subject.mention),
            ("subject.label", &self.subject.label),
            ("subject.id", &self.subject.id),
            ("subject.type.id", &self.subject.entity_type.id),
            ("subject.type.label", &self.subject.entity_type.label),
            ("relation.id", &self.relation.id),
            ("relation.label", &self.relation.label),
            ("object.mention", &self.object.mention),
            ("object.label", &self.object.label),
            ("object.id", &self.object.id),
            ("object.type.id", &self.object.entity_type.id),
            ("object.type.label", &self.object.entity_type.label),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| v.trim().is_empty()) {
            return Err(format!("{name} is empty"));
        }
        let sentence = self.sentence.to_lowercase();
        for side in [&self.subject, &self.object] {
            if !sentence.contains(&side.mention.to_lowercase()) {
                return Err(format!("sentence does not contain mention {:?}", side.mention));
            }
        }
        Ok(())
    }

    /// Identity of the asserted fact, ignoring where it was found.
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.subject.id, &self.relation.id, &self.object.id)
    }
}

/// Reads and validates fact JSONL produced by any extractor.
pub fn import_external_facts<R: BufRead>(reader: R) -> Result<Vec<ExtractedFact>, ExtractionError> {
    let mut facts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| ExtractionError::Line { line: i + 1, message };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fact: ExtractedFact = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        fact.validate().map_err(err)?;
        facts.push(fact);
    }
    Ok(facts)
}

pub fn write_facts<W: Write>(mut writer: W, facts: &[ExtractedFact]) -> std::io::Result<()> {
    for fact in facts {
        serde_json::to_writer(&mut writer, fact)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
