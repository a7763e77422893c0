use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IngestError;

/// SHA-256 of the text, hex encoded.
pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Digest of an entity's concatenated text payloads at a build version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub iri: String,
    pub digest: String,
    pub version: u64,
}

impl Fingerprint {
    pub fn new(iri: impl Into<String>, text: &str, version: u64) -> Self {
        Fingerprint {
            iri: iri.into(),
            digest: digest(text),
            version,
        }
    }
}

/// True iff there is no prior fingerprint for the entity or its text changed.
pub fn needs_reextraction(entity: &str, text: &str, prior: Option<&Fingerprint>) -> bool {
    match prior {
        Some(fp) => fp.iri != entity || fp.digest != digest(text),
        None => true,
    }
}

/// Fingerprints keyed by entity IRI, persisted as JSONL `{iri, digest, version}`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FingerprintLedger {
    entries: BTreeMap<String, Fingerprint>,
}

impl FingerprintLedger {
    pub fn get(&self, iri: &str) -> Option<&Fingerprint> {
        self.entries.get(iri)
    }

    pub fn insert(&mut self, fp: Fingerprint) {
        self.entries.insert(fp.iri.clone(), fp);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fingerprint> {
        self.entries.values()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut ledger = FingerprintLedger::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| IngestError::Line {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let fp: Fingerprint = serde_json::from_str(&line).map_err(|e| IngestError::Line {
                line: i + 1,
                message: e.to_string(),
            })?;
            ledger.insert(fp);
        }
        Ok(ledger)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for fp in self.entries.values() {
            serde_json::to_writer(&mut writer, fp)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}
