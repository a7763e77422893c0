use std::path::{Path, PathBuf};

use kgforge_core::analytics::Provenance;
use kgforge_core::pipeline::{self, PipelineConfig, FACTS_FILE, GRAPH_FILE, MODEL_FILE};
use kgforge_core::vocab::kg;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config() -> PipelineConfig {
    PipelineConfig::load(&fixtures().join("config.json")).unwrap()
}

fn config_in(out: &Path) -> PipelineConfig {
    let mut cfg = config();
    cfg.output_dir = out.to_path_buf();
    cfg
}

#[test]
fn fixture_corpus_builds() {
    let run = pipeline::run(&config(), 1).unwrap();
    assert_eq!(run.ingested.documents.len(), 21);
    assert!(!run.extracted.facts.is_empty());
    for f in &run.extracted.facts {
        f.validate().unwrap();
    }
    let stmts = run
        .kb
        .graph
        .triples()
        .filter(|t| t.predicate.as_str() == kg::HAS_STATEMENT)
        .count();
    assert_eq!(stmts, run.extracted.facts.len());
}

#[test]
fn infobox_carries_evidence_and_background() {
    let kb = pipeline::build_knowledge_base(&config(), 1).unwrap();
    // Linked Data
    let infobox = kb.analytics.infobox("Q515701").unwrap();
    let part_of = infobox.rows.iter().find(|r| r.relation == "P361").expect("part of row");
    let open_data = part_of.objects.iter().find(|o| o.id == "Q309901").expect("Open Data");
    let evidence: Vec<_> = open_data
        .provenance
        .iter()
        .filter_map(|p| match p {
            Provenance::Evidence(e) => Some(e),
            Provenance::BackgroundKb => None,
        })
        .collect();
    assert_eq!(evidence.len(), 2);
    assert!(evidence
        .iter()
        .all(|e| e.sentence.contains("Linked Data") && e.sentence.contains("Open Data")));
    let semantic_web = part_of.objects.iter().find(|o| o.id == "Q54837").expect("Semantic Web");
    assert!(semantic_web.provenance.contains(&Provenance::BackgroundKb));
}

#[test]
fn schema_for_disciplines() {
    let kb = pipeline::build_knowledge_base(&config(), 1).unwrap();
    let schema = kb.analytics.induce_schema("Q11862829", 10).unwrap();
    let ids: Vec<&str> = schema.relations.iter().map(|r| r.id.as_str()).collect();
    for id in ["P361", "P1269", "P144", "P2578"] {
        assert!(ids.contains(&id), "{id} missing from {ids:?}");
    }
    assert!(schema.relations.windows(2).all(|w| w[0].frequency >= w[1].frequency));
}

#[test]
fn cyclic_background_types_collapse() {
    let kb = pipeline::build_knowledge_base(&config(), 1).unwrap();
    let h = kb.analytics.hierarchy();
    assert_eq!(h.representative("Q7397"), h.representative("Q166142"));
}

#[test]
fn trend_rows_sum_to_one_hundred() {
    let kb = pipeline::build_knowledge_base(&config(), 1).unwrap();
    let table = kb.analytics.trend_table("Q11862829", 2000, 2021).unwrap();
    assert!(!table.rows.is_empty());
    for row in &table.rows {
        let sum: f64 = row.percentages.iter().sum();
        assert!((sum - 100.0).abs() < 1e-9, "{} sums to {sum}", row.label);
    }
}

#[test]
fn staged_build_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let cfg = config_in(dir);
        pipeline::write_ingest(&cfg).unwrap();
        pipeline::write_extract(&cfg, 1).unwrap();
        pipeline::write_build(&cfg, 1).unwrap();
    }
    for name in [GRAPH_FILE, MODEL_FILE] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
    let in_memory = pipeline::build_knowledge_base(&config(), 1).unwrap();
    assert_eq!(
        std::fs::read(a.path().join(GRAPH_FILE)).unwrap(),
        in_memory.graph.export_canonical()
    );
}

#[test]
fn unchanged_corpus_is_not_reextracted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path());
    pipeline::write_ingest(&cfg).unwrap();
    let first = pipeline::write_extract(&cfg, 1).unwrap();
    let facts_before = std::fs::read(dir.path().join(FACTS_FILE)).unwrap();
    let second = pipeline::write_extract(&cfg, 2).unwrap();
    assert!(first.reextracted > 0);
    assert_eq!(second.reextracted, 0);
    assert_eq!(std::fs::read(dir.path().join(FACTS_FILE)).unwrap(), facts_before);
    assert_eq!(first.fingerprints, second.fingerprints);
}

#[test]
fn rejects_unknown_config_keys() {
    let err = PipelineConfig::from_json(
        r#"{"mappings": [], "sources": [], "gazetteer": "g", "rules": "r", "output_dir": "o", "bogus": 1}"#,
        Path::new("."),
    );
    assert!(err.is_err());
}
