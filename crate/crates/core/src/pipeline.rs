//! Stage wiring: ingest, extract, build. One [`KnowledgeBase`] bundles a
//! graph snapshot with the model and analytics computed from it, all
//! carrying the same build version.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{Analytics, AnalyticsConfig};
use crate::extraction::{
    import_external_facts, load_rules, reify, write_facts, ExtractedFact, ExtractionError, Extractor, Gazetteer,
};
use crate::ingest::{
    load_background, load_source, record_to_triples, Document, Fingerprint, FingerprintLedger, IngestError,
    MappingSpec, SourceSpec, Vocabulary,
};
use crate::recommender::{fit, row_entities, RecError, Recommender, RecommenderConfig};
use crate::store::{GraphBuilder, GraphSnapshot, Iri, StoreError, Term, Triple};
use crate::vocab::{self, kg, Namespaces};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Recommender(#[from] RecError),
    #[error("duplicate document id {0}")]
    DuplicateDocument(String),
}

fn io_err(path: &Path, err: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Environment variable holding the reader bearer token.
    pub token_env: String,
    pub admin_token_env: String,
    /// Feedback log, relative to the output directory.
    pub feedback_log: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".to_string(),
            port: 8080,
            token_env: "KGFORGE_TOKEN".to_string(),
            admin_token_env: "KGFORGE_ADMIN_TOKEN".to_string(),
            feedback_log: "feedback.jsonl".to_string(),
        }
    }
}

/// Pipeline configuration. Relative paths resolve against `base_dir`
/// (the directory of the config file when loaded with [`PipelineConfig::load`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub namespaces: Namespaces,
    #[serde(default)]
    pub vocabulary: Option<PathBuf>,
    pub mappings: Vec<PathBuf>,
    pub sources: Vec<SourceSpec>,
    pub gazetteer: PathBuf,
    pub rules: PathBuf,
    #[serde(default)]
    pub abbreviations: Option<Vec<String>>,
    #[serde(default)]
    pub background_kb: Option<PathBuf>,
    /// Fact JSONL files from other extractors, merged with rule output.
    #[serde(default)]
    pub external_facts: Vec<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub recommender: RecommenderConfig,
    #[serde(default)]
    pub analytics: AnalyticsConfig,
    #[serde(default)]
    pub service: ServiceConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.resolve(&self.output_dir).join(name)
    }

    fn read(&self, path: &Path) -> Result<String, PipelineError> {
        let full = self.resolve(path);
        std::fs::read_to_string(&full).map_err(|e| io_err(&full, e))
    }

    pub fn extractor(&self) -> Result<Extractor, PipelineError> {
        let gazetteer = Gazetteer::from_json(&self.read(&self.gazetteer)?)?;
        let rules = load_rules(&self.read(&self.rules)?)?;
        let mut extractor = Extractor::new(gazetteer, rules);
        if let Some(list) = &self.abbreviations {
            extractor.abbreviations = list.iter().cloned().collect();
        }
        Ok(extractor)
    }
}

/// Mapped triples and the text payloads registered for extraction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOutput {
    pub triples: Vec<Triple>,
    pub documents: Vec<Document>,
}

pub fn ingest(cfg: &PipelineConfig) -> Result<IngestOutput, PipelineError> {
    let vocabulary = match &cfg.vocabulary {
        Some(p) => Some(Vocabulary::parse(&cfg.read(p)?)),
        None => None,
    };
    let mut out = IngestOutput::default();
    let mut seen = HashSet::new();
    for mapping_path in &cfg.mappings {
        let spec = MappingSpec::from_file(&cfg.resolve(mapping_path))?;
        if let Some(v) = &vocabulary {
            spec.check_vocabulary(v).map_err(IngestError::from)?;
        }
        for payload in spec.text_payload_predicates() {
            out.triples.push(Triple::iris(
                payload.as_str(),
                vocab::RDF_TYPE,
                kg::TEXT_PAYLOAD_PROPERTY,
            ));
        }
        for source in cfg.sources.iter().filter(|s| s.name == spec.source) {
            for record in load_source(source, &cfg.base_dir)? {
                let mapped = record_to_triples(&record, &spec)?;
                out.triples.extend(mapped.triples);
                for doc in mapped.documents {
                    if !seen.insert(doc.doc_id.clone()) {
                        return Err(PipelineError::DuplicateDocument(doc.doc_id));
                    }
                    out.triples.extend(doc.to_triples(&cfg.namespaces));
                    out.documents.push(doc);
                }
            }
        }
    }
    out.documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(out)
}

/// Text used to fingerprint an entity: its payloads in document id order.
fn entity_texts(documents: &[Document]) -> BTreeMap<&str, String> {
    let mut by_owner: BTreeMap<&str, Vec<&Document>> = BTreeMap::new();
    for d in documents {
        by_owner.entry(&d.owner).or_default().push(d);
    }
    by_owner
        .into_iter()
        .map(|(owner, mut docs)| {
            docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
            let text = docs.iter().map(|d| d.text.as_str()).collect::<Vec<_>>().join("\n");
            (owner, text)
        })
        .collect()
}

/// Output of a previous extraction, used to skip unchanged entities.
#[derive(Debug, Clone, Default)]
pub struct PriorExtraction {
    pub fingerprints: FingerprintLedger,
    pub facts: Vec<ExtractedFact>,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractOutput {
    pub facts: Vec<ExtractedFact>,
    pub fingerprints: FingerprintLedger,
    /// Entities whose text was (re-)extracted in this run.
    pub reextracted: usize,
}

pub fn extract(
    cfg: &PipelineConfig,
    documents: &[Document],
    prior: Option<&PriorExtraction>,
    version: u64,
) -> Result<ExtractOutput, PipelineError> {
    let extractor = cfg.extractor()?;
    let owner_of: HashMap<&str, &str> = documents
        .iter()
        .map(|d| (d.doc_id.as_str(), d.owner.as_str()))
        .collect();
    let mut out = ExtractOutput::default();
    let mut reuse: HashSet<&str> = HashSet::new();
    for (owner, text) in entity_texts(documents) {
        let prior_fp = prior.and_then(|p| p.fingerprints.get(owner));
        if crate::ingest::needs_reextraction(owner, &text, prior_fp) {
            out.reextracted += 1;
            out.fingerprints.insert(Fingerprint::new(owner, &text, version));
        } else {
            reuse.insert(owner);
            out.fingerprints
                .insert(prior_fp.expect("unchanged implies prior").clone());
        }
    }
    let reused: Vec<&ExtractedFact> = prior
        .map(|p| {
            p.facts
                .iter()
                .filter(|f| owner_of.get(f.doc_id.as_str()).is_some_and(|o| reuse.contains(o)))
                .collect()
        })
        .unwrap_or_default();
    for doc in documents {
        if reuse.contains(doc.owner.as_str()) {
            out.facts
                .extend(reused.iter().filter(|f| f.doc_id == doc.doc_id).map(|f| (*f).clone()));
        } else {
            out.facts.extend(extractor.extract(doc).facts);
        }
    }
    for path in &cfg.external_facts {
        let full = cfg.resolve(path);
        let file = std::fs::File::open(&full).map_err(|e| io_err(&full, e))?;
        out.facts.extend(import_external_facts(BufReader::new(file))?);
    }
    Ok(out)
}

/// Assembles the snapshot from mapped triples, reified facts and background facts.
pub fn build_graph(
    cfg: &PipelineConfig,
    ingested: &IngestOutput,
    facts: &[ExtractedFact],
    version: u64,
) -> Result<GraphSnapshot, PipelineError> {
    let ns = &cfg.namespaces;
    let owner_of: HashMap<&str, &str> = ingested
        .documents
        .iter()
        .map(|d| (d.doc_id.as_str(), d.owner.as_str()))
        .collect();
    let mut b = GraphBuilder::with_version(version);
    b.extend(ingested.triples.iter().cloned())?;
    for f in facts {
        let owner = match owner_of.get(f.doc_id.as_str()) {
            Some(o) => o.to_string(),
            None => ns.document_iri(&f.doc_id),
        };
        b.extend(reify(f, &owner, ns))?;
    }
    if let Some(path) = &cfg.background_kb {
        for fact in load_background(&cfg.resolve(path))? {
            b.extend(fact.to_triples(ns))?;
        }
    }
    Ok(b.publish())
}

/// A graph snapshot with everything derived from it.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub version: u64,
    pub namespaces: Namespaces,
    pub graph: Arc<GraphSnapshot>,
    pub recommender: Recommender,
    pub analytics: Arc<Analytics>,
}

impl KnowledgeBase {
    pub fn from_graph(cfg: &PipelineConfig, graph: GraphSnapshot) -> Result<Self, PipelineError> {
        let version = graph.version();
        let entities = row_entities(&graph, &cfg.recommender);
        let model = fit(&graph, &cfg.namespaces, &cfg.recommender, &entities)?;
        let analytics = Analytics::build(&graph, &cfg.namespaces, cfg.analytics.clone());
        let graph = Arc::new(graph);
        Ok(KnowledgeBase {
            version,
            namespaces: cfg.namespaces.clone(),
            recommender: Recommender::new(Arc::new(model), graph.clone(), cfg.recommender.clone()),
            graph,
            analytics: Arc::new(analytics),
        })
    }

    /// Resolves a KB id or a full IRI to an entity IRI.
    pub fn entity_iri(&self, id: &str) -> String {
        if id.contains(':') {
            id.to_string()
        } else {
            self.namespaces.kb_iri(id)
        }
    }

    pub fn label_of(&self, iri: &str) -> Option<String> {
        self.graph
            .object(&Term::iri(iri), &Iri::new_unchecked(vocab::RDFS_LABEL))
            .map(|t| t.value().to_string())
    }
}

/// Every artifact of one full in-memory run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub ingested: IngestOutput,
    pub extracted: ExtractOutput,
    pub kb: KnowledgeBase,
}

pub fn run(cfg: &PipelineConfig, version: u64) -> Result<PipelineRun, PipelineError> {
    let ingested = ingest(cfg)?;
    let extracted = extract(cfg, &ingested.documents, None, version)?;
    let graph = build_graph(cfg, &ingested, &extracted.facts, version)?;
    let kb = KnowledgeBase::from_graph(cfg, graph)?;
    Ok(PipelineRun {
        ingested,
        extracted,
        kb,
    })
}

pub fn build_knowledge_base(cfg: &PipelineConfig, version: u64) -> Result<KnowledgeBase, PipelineError> {
    Ok(run(cfg, version)?.kb)
}

pub const INGEST_FILE: &str = "ingest.nt";
pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const FACTS_FILE: &str = "facts.jsonl";
pub const FINGERPRINTS_FILE: &str = "fingerprints.jsonl";
pub const GRAPH_FILE: &str = "graph.nt";
pub const MODEL_FILE: &str = "model.json";
pub const HIERARCHY_FILE: &str = "hierarchy.json";

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.push(b'\n');
    }
    out
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| io_err(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// Runs ingestion and writes the mapped triples and registered documents.
pub fn write_ingest(cfg: &PipelineConfig) -> Result<IngestOutput, PipelineError> {
    let out = ingest(cfg)?;
    let mut b = GraphBuilder::new();
    b.extend(out.triples.iter().cloned())?;
    write_file(&cfg.output_path(INGEST_FILE), &b.publish().export_canonical())?;
    write_file(&cfg.output_path(DOCUMENTS_FILE), &jsonl(&out.documents))?;
    Ok(out)
}

fn read_ingest(cfg: &PipelineConfig) -> Result<IngestOutput, PipelineError> {
    let nt = cfg.output_path(INGEST_FILE);
    let docs = cfg.output_path(DOCUMENTS_FILE);
    if !nt.exists() || !docs.exists() {
        return write_ingest(cfg);
    }
    let bytes = std::fs::read(&nt).map_err(|e| io_err(&nt, e))?;
    let graph = GraphSnapshot::import_with(&bytes, &cfg.namespaces, 1)?;
    Ok(IngestOutput {
        triples: graph.triples().collect(),
        documents: read_jsonl(&docs)?,
    })
}

/// Extracts facts, reusing the previous run's facts for entities whose
/// fingerprints are unchanged, and writes facts and fingerprints.
pub fn write_extract(cfg: &PipelineConfig, version: u64) -> Result<ExtractOutput, PipelineError> {
    let ingested = read_ingest(cfg)?;
    let facts_path = cfg.output_path(FACTS_FILE);
    let fp_path = cfg.output_path(FINGERPRINTS_FILE);
    let prior = if facts_path.exists() && fp_path.exists() {
        let fp_file = std::fs::File::open(&fp_path).map_err(|e| io_err(&fp_path, e))?;
        let facts_file = std::fs::File::open(&facts_path).map_err(|e| io_err(&facts_path, e))?;
        Some(PriorExtraction {
            fingerprints: FingerprintLedger::read(BufReader::new(fp_file))?,
            facts: import_external_facts(BufReader::new(facts_file))?,
        })
    } else {
        None
    };
    let out = extract(cfg, &ingested.documents, prior.as_ref(), version)?;
    let mut facts = Vec::new();
    write_facts(&mut facts, &out.facts).map_err(|e| io_err(&facts_path, e))?;
    write_file(&facts_path, &facts)?;
    let mut fps = Vec::new();
    out.fingerprints.write(&mut fps).map_err(|e| io_err(&fp_path, e))?;
    write_file(&fp_path, &fps)?;
    Ok(out)
}

/// Builds the graph from the stage outputs and writes graph, model and hierarchy.
pub fn write_build(cfg: &PipelineConfig, version: u64) -> Result<KnowledgeBase, PipelineError> {
    let ingested = read_ingest(cfg)?;
    let facts_path = cfg.output_path(FACTS_FILE);
    let facts = if facts_path.exists() {
        let file = std::fs::File::open(&facts_path).map_err(|e| io_err(&facts_path, e))?;
        import_external_facts(BufReader::new(file))?
    } else {
        write_extract(cfg, version)?.facts
    };
    let graph = build_graph(cfg, &ingested, &facts, version)?;
    let kb = KnowledgeBase::from_graph(cfg, graph)?;
    write_artifacts(cfg, &kb)?;
    Ok(kb)
}

pub fn write_artifacts(cfg: &PipelineConfig, kb: &KnowledgeBase) -> Result<(), PipelineError> {
    write_file(&cfg.output_path(GRAPH_FILE), &kb.graph.export_canonical())?;
    write_file(&cfg.output_path(MODEL_FILE), kb.recommender.model.to_json().as_bytes())?;
    let mut hierarchy = serde_json::to_string_pretty(&kb.analytics.top_types(usize::MAX)).expect("serializable");
    hierarchy.push('\n');
    write_file(&cfg.output_path(HIERARCHY_FILE), hierarchy.as_bytes())
}
