use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Up,
    Down,
}

/// One accepted feedback event, as logged and echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub id: u64,
    pub timestamp: String,
    pub user: String,
    pub item: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u64>,
}

/// Client-supplied part of an event.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackDraft {
    pub user: String,
    pub item: String,
    pub verdict: Verdict,
    pub comment: Option<String>,
    pub category: Option<String>,
    pub rank: Option<u64>,
}

impl FeedbackDraft {
    pub fn parse(body: &[u8]) -> Result<Self, String> {
        let v: Value = serde_json::from_slice(body).map_err(|e| format!("invalid JSON: {e}"))?;
        let obj = v.as_object().ok_or("body must be a JSON object")?;
        let text = |key: &str| -> Result<Option<String>, String> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(format!("{key} must be a string")),
            }
        };
        let required = |key: &str| -> Result<String, String> {
            text(key)?
                .filter(|s| !s.is_empty())
                .ok_or_else(|| format!("missing {key}"))
        };
        let verdict = match required("verdict")?.as_str() {
            "up" => Verdict::Up,
            "down" => Verdict::Down,
            other => return Err(format!("verdict must be up or down, got {other:?}")),
        };
        let rank = match obj.get("rank") {
            None | Some(Value::Null) => None,
            Some(r) => Some(
                r.as_u64()
                    .filter(|&r| r >= 1)
                    .ok_or("rank must be a positive integer")?,
            ),
        };
        Ok(FeedbackDraft {
            user: required("user")?,
            item: required("item")?,
            verdict,
            comment: text("comment")?,
            category: text("category")?,
            rank,
        })
    }
}

/// Append-only JSONL log. Ids continue from the existing line count.
#[derive(Debug)]
pub struct FeedbackLog {
    path: PathBuf,
    file: File,
    next_id: u64,
}

impl FeedbackLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let existing = match File::open(path) {
            Ok(f) => BufReader::new(f)
                .lines()
                .map_while(Result::ok)
                .filter(|l| !l.trim().is_empty())
                .count(),
            Err(_) => 0,
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FeedbackLog {
            path: path.to_path_buf(),
            file,
            next_id: existing as u64 + 1,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, draft: FeedbackDraft) -> std::io::Result<FeedbackEvent> {
        let event = FeedbackEvent {
            id: self.next_id,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            user: draft.user,
            item: draft.item,
            verdict: draft.verdict,
            comment: draft.comment,
            category: draft.category,
            rank: draft.rank,
        };
        let mut line = serde_json::to_vec(&event).expect("serializable");
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        self.next_id += 1;
        Ok(event)
    }
}
