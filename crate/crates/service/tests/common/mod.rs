#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use kgforge_core::pipeline::{self, KnowledgeBase, PipelineConfig};
use kgforge_service::{AppState, Builder, FeedbackLog, Tokens};

pub const READER: &str = "reader-secret";
pub const ADMIN: &str = "admin-secret";

pub fn config() -> PipelineConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/config.json");
    PipelineConfig::load(&path).unwrap()
}

pub fn kb(version: u64) -> KnowledgeBase {
    pipeline::build_knowledge_base(&config(), version).unwrap()
}

pub fn tokens() -> Tokens {
    Tokens {
        reader: READER.into(),
        admin: ADMIN.into(),
    }
}

pub fn state(log: &Path, builder: Builder) -> Arc<AppState> {
    Arc::new(AppState::new(kb(1), tokens(), builder, FeedbackLog::open(log).unwrap()))
}

pub fn fixture_builder() -> Builder {
    let cfg = config();
    Arc::new(move |v| pipeline::build_knowledge_base(&cfg, v).map_err(|e| e.to_string()))
}
