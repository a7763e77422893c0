//! `kgforge` subcommands. Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kgforge_core::analytics::{render_infobox, render_trend_table};
use kgforge_core::ie_eval::{self, AnnotatedDocument};
use kgforge_core::ingest::Document;
use kgforge_core::pipeline::{self, KnowledgeBase, PipelineConfig};
use kgforge_core::rec_eval::{self, Criterion};
use kgforge_core::recommender::FeatureGroup;
use serde::Serialize;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "kgforge",
    version,
    about = "Knowledge graph induction, recommendation and analytics"
)]
pub struct Cli {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map source records to triples and register text payloads.
    Ingest,
    /// Extract facts from text payloads, skipping unchanged entities.
    Extract(VersionArg),
    /// Build the graph, fit the recommender and compute the type hierarchy.
    Build(VersionArg),
    /// Rank items of a category for a user.
    Recommend(RecommendArgs),
    /// Yearly distribution of a type's instances.
    Trends(TrendArgs),
    /// Infobox of an entity with evidence.
    Infobox(InfoboxArgs),
    /// Score extraction output against gold annotations.
    EvalIe(EvalIeArgs),
    /// MAP and P@K of judged recommendation lists.
    EvalRec(EvalRecArgs),
    /// Canonical N-Triples export of the built graph.
    Export(ExportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct VersionArg {
    /// Build version recorded in fingerprints and snapshots.
    #[arg(long = "build-version", default_value_t = 1)]
    pub version: u64,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// User IRI or KB id.
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub category: String,
    #[arg(long, default_value_t = 10)]
    pub k: i64,
    /// Group weight override, e.g. `bow=0.5`.
    #[arg(long = "weight", value_parser = parse_weight)]
    pub weights: Vec<(FeatureGroup, f64)>,
    /// Show the explanation of the top item (table format).
    #[arg(long)]
    pub explain: bool,
}

#[derive(Debug, Args)]
pub struct TrendArgs {
    #[arg(long = "type")]
    pub type_id: String,
    #[arg(long)]
    pub from: i32,
    #[arg(long)]
    pub to: i32,
}

#[derive(Debug, Args)]
pub struct InfoboxArgs {
    #[arg(long)]
    pub entity: String,
}

#[derive(Debug, Args)]
pub struct EvalIeArgs {
    /// Gold JSONL.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predicted JSONL. Without it the configured extractor runs on the gold texts.
    #[arg(long)]
    pub predicted: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalRecArgs {
    /// CSV with columns user,item,category,rank,grade.
    #[arg(long)]
    pub judgments: PathBuf,
    /// Criteria to report; all three when omitted.
    #[arg(long = "criterion")]
    pub criteria: Vec<Criterion>,
    /// Cutoff override, e.g. `papers=10`.
    #[arg(long = "cutoff", value_parser = parse_cutoff)]
    pub cutoffs: Vec<(String, usize)>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
}

fn parse_weight(s: &str) -> Result<(FeatureGroup, f64), String> {
    let (g, w) = s.split_once('=').ok_or("expected group=weight")?;
    let group = FeatureGroup::ALL
        .into_iter()
        .find(|x| x.as_str() == g)
        .ok_or_else(|| format!("unknown feature group {g:?}"))?;
    let weight: f64 = w.parse().map_err(|_| format!("bad weight {w:?}"))?;
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(format!("weight must be non-negative, got {w}"));
    }
    Ok((group, weight))
}

fn parse_cutoff(s: &str) -> Result<(String, usize), String> {
    let (c, k) = s.split_once('=').ok_or("expected category=k")?;
    let k: usize = k.parse().map_err(|_| format!("bad cutoff {k:?}"))?;
    if k < 1 {
        return Err("cutoff must be at least 1".into());
    }
    Ok((c.to_string(), k))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl<E: std::fmt::Display> From<E> for Failure
where
    E: Into<Box<dyn std::error::Error>>,
{
    fn from(e: E) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(
                err,
                "error: {msg}\n\nUsage: kgforge --config <FILE> <COMMAND>\nRun `kgforge --help` for details."
            );
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}

fn config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::Usage("this command needs --config".into()))?;
    if !path.exists() {
        return Err(Failure::Usage(format!("config file {} not found", path.display())));
    }
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = std::env::current_dir()?.join(dir);
    }
    Ok(cfg)
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Outcome {
    let v = serde_json::to_value(value)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Outcome {
    match &cli.command {
        Command::Ingest => {
            let cfg = config(cli)?;
            let ingested = pipeline::write_ingest(&cfg)?;
            let summary = serde_json::json!({
                "triples": ingested.triples.len(),
                "documents": ingested.documents.len(),
                "output": cfg.output_path(pipeline::INGEST_FILE),
            });
            report(cli.format, out, &summary)
        }
        Command::Extract(v) => {
            let cfg = config(cli)?;
            let extracted = pipeline::write_extract(&cfg, v.version)?;
            let summary = serde_json::json!({
                "facts": extracted.facts.len(),
                "entities": extracted.fingerprints.len(),
                "reextracted": extracted.reextracted,
                "output": cfg.output_path(pipeline::FACTS_FILE),
            });
            report(cli.format, out, &summary)
        }
        Command::Build(v) => {
            let cfg = config(cli)?;
            let kb = pipeline::write_build(&cfg, v.version)?;
            match cli.format {
                Format::Json => emit_json(
                    out,
                    &serde_json::json!({
                        "version": kb.version,
                        "triples": kb.graph.len(),
                        "model_rows": kb.recommender.model.n(),
                        "features": kb.recommender.model.m(),
                        "types": kb.analytics.top_types(10),
                    }),
                ),
                Format::Table => {
                    writeln!(
                        out,
                        "version {} | {} triples | {} model rows x {} features",
                        kb.version,
                        kb.graph.len(),
                        kb.recommender.model.n(),
                        kb.recommender.model.m()
                    )?;
                    for t in kb.analytics.top_types(10) {
                        writeln!(out, "{}", t.render())?;
                    }
                    Ok(())
                }
            }
        }
        Command::Recommend(args) => recommend(cli, args, out),
        Command::Trends(args) => {
            let kb = knowledge_base(cli)?;
            let table = kb.analytics.trend_table(&args.type_id, args.from, args.to)?;
            match cli.format {
                Format::Json => emit_json(out, &table),
                Format::Table => Ok(write!(out, "{}", render_trend_table(&table))?),
            }
        }
        Command::Infobox(args) => {
            let kb = knowledge_base(cli)?;
            let infobox = kb.analytics.infobox(&args.entity)?;
            match cli.format {
                Format::Json => emit_json(out, &infobox),
                Format::Table => Ok(write!(out, "{}", render_infobox(&infobox))?),
            }
        }
        Command::EvalIe(args) => eval_ie(cli, args, out),
        Command::EvalRec(args) => {
            let file =
                File::open(&args.judgments).map_err(|e| Failure::Data(format!("{}: {e}", args.judgments.display())))?;
            let judgments = rec_eval::read_judgments(BufReader::new(file))?;
            let criteria = if args.criteria.is_empty() {
                Criterion::ALL.to_vec()
            } else {
                args.criteria.clone()
            };
            let mut cutoffs = rec_eval::default_cutoffs();
            cutoffs.extend(args.cutoffs.iter().cloned());
            let report = rec_eval::evaluate(&judgments, &criteria, &cutoffs)?;
            match cli.format {
                Format::Json => emit_json(out, &report),
                Format::Table => Ok(write!(out, "{}", rec_eval::render_report(&report))?),
            }
        }
        Command::Export(args) => {
            let kb = knowledge_base(cli)?;
            let bytes = kb.graph.export_canonical();
            match &args.out {
                Some(path) => {
                    std::fs::write(path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?
                }
                None => out.write_all(&bytes)?,
            }
            Ok(())
        }
        Command::Serve(args) => {
            let mut cfg = config(cli)?;
            if let Some(bind) = &args.bind {
                cfg.service.bind = bind.clone();
            }
            if let Some(port) = args.port {
                cfg.service.port = port;
            }
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(kgforge_service::serve(&cfg))?;
            Ok(())
        }
    }
}

/// Small key/value summaries: JSON object or `key: value` lines.
fn report(format: Format, out: &mut dyn Write, summary: &serde_json::Value) -> Outcome {
    match format {
        Format::Json => emit_json(out, summary),
        Format::Table => {
            for (k, v) in summary.as_object().into_iter().flatten() {
                match v {
                    serde_json::Value::String(s) => writeln!(out, "{k}: {s}")?,
                    other => writeln!(out, "{k}: {other}")?,
                }
            }
            Ok(())
        }
    }
}

fn knowledge_base(cli: &Cli) -> Result<KnowledgeBase, Failure> {
    Ok(pipeline::build_knowledge_base(&config(cli)?, 1)?)
}

fn recommend(cli: &Cli, args: &RecommendArgs, out: &mut dyn Write) -> Outcome {
    if args.k < 1 {
        return Err(Failure::Usage(format!("--k must be at least 1, got {}", args.k)));
    }
    let mut cfg = config(cli)?;
    for (group, weight) in &args.weights {
        cfg.recommender.group_weights.insert(*group, *weight);
    }
    let kb = pipeline::build_knowledge_base(&cfg, 1)?;
    let user = kb.entity_iri(&args.user);
    let list = kgforge_service::recommendations(&kb, &user, &args.category, args.k as usize)?;
    if cli.format == Format::Json {
        return emit_json(out, &list);
    }
    writeln!(out, "{:>4} | {:>6} | item", "rank", "score")?;
    for r in list.as_array().into_iter().flatten() {
        let rank = r["rank"].as_u64().unwrap_or_default();
        let score = r["score"].as_f64().unwrap_or_default();
        writeln!(
            out,
            "{rank:>4} | {score:>6.4} | {}",
            r["item"].as_str().unwrap_or_default()
        )?;
    }
    if args.explain {
        if let Some(top) = list.get(0) {
            writeln!(out, "\nwhy {}:", top["item"].as_str().unwrap_or_default())?;
            for group in top["explanation"]["grouped"].as_array().into_iter().flatten() {
                let names: Vec<String> = group["entities"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .map(|e| {
                        format!(
                            "{} ({:.4})",
                            e["label"].as_str().unwrap_or_default(),
                            e["weight"].as_f64().unwrap_or(0.0)
                        )
                    })
                    .collect();
                writeln!(
                    out,
                    "  {}: {}",
                    group["type_label"].as_str().unwrap_or_default(),
                    names.join(", ")
                )?;
            }
        }
    }
    Ok(())
}

fn read_annotated(path: &Path) -> Result<Vec<AnnotatedDocument>, Failure> {
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(ie_eval::read_documents(BufReader::new(file))?)
}

/// Extractor output on the gold texts, one predicted document per gold document.
pub fn predict_gold(
    cfg: &PipelineConfig,
    gold: &[AnnotatedDocument],
) -> Result<Vec<AnnotatedDocument>, pipeline::PipelineError> {
    let extractor = cfg.extractor()?;
    Ok(gold
        .iter()
        .map(|g| {
            let doc = Document {
                doc_id: g.doc_id.clone(),
                owner: cfg.namespaces.document_iri(&g.doc_id),
                text: g.text.clone(),
                year: None,
            };
            AnnotatedDocument::from_extraction(&g.doc_id, &g.text, &extractor.extract(&doc))
        })
        .collect())
}

fn eval_ie(cli: &Cli, args: &EvalIeArgs, out: &mut dyn Write) -> Outcome {
    let gold = read_annotated(&args.gold)?;
    let predicted = match &args.predicted {
        Some(p) => read_annotated(p)?,
        None => predict_gold(&config(cli)?, &gold)?,
    };
    let report = ie_eval::score(&gold, &predicted)?;
    match cli.format {
        Format::Json => {
            let scores: BTreeMap<&str, serde_json::Value> = [
                ("md", report.md),
                ("type", report.typing),
                ("el", report.el),
                ("rn", report.rn),
                ("rel", report.rel),
            ]
            .into_iter()
            .map(|(k, c)| {
                (k, serde_json::json!({"tp": c.tp, "fp": c.fp, "fn": c.fn_, "precision": c.precision(), "recall": c.recall(), "f1": c.f1()}))
            })
            .collect();
            emit_json(out, &scores)
        }
        Format::Table => Ok(write!(out, "{}", ie_eval::render_report(&report))?),
    }
}
