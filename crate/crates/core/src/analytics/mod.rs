//! Type-hierarchy analytics over induced facts: cumulative type frequencies,
//! per-year trend tables, induced infobox schemas and infoboxes with
//! per-fact provenance.

mod hierarchy;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hierarchy::TypeHierarchy;

use crate::store::{GraphSnapshot, Iri, Term};
use crate::vocab::{self, kg, Namespaces};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("unknown type {0}")]
    UnknownType(String),
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("unknown statement {0}")]
    UnknownStatement(String),
    #[error("empty year range {from}..={to}")]
    EmptyRange { from: i32, to: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsConfig {
    /// Relation id whose facts (induced or background) are subclass edges.
    pub subclass_relation: String,
    pub schema_size: usize,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            subclass_relation: "P279".to_string(),
            schema_size: 10,
        }
    }
}

/// One reified statement, decoded into KB ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementRecord {
    pub id: String,
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub subject_type: String,
    pub object_type: String,
    pub doc_id: String,
    pub year: Option<i32>,
    pub sentence: String,
    pub offset: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeStats {
    pub id: String,
    pub label: String,
    pub direct: usize,
    pub transitive: usize,
    pub triples: usize,
}

impl TypeStats {
    pub fn render(&self) -> String {
        format!(
            "{} - {} direct / {} transitive",
            self.label, self.direct, self.transitive
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub entity: String,
    pub label: String,
    pub counts: Vec<usize>,
    pub percentages: Vec<f64>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTable {
    pub type_id: String,
    pub from: i32,
    pub to: i32,
    pub years: Vec<i32>,
    pub rows: Vec<TrendRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaRelation {
    pub id: String,
    pub label: String,
    pub frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoboxSchema {
    pub type_id: String,
    pub relations: Vec<SchemaRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub statement: String,
    pub sentence: String,
    pub doc_id: String,
    pub offset: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Provenance {
    Evidence(EvidenceRecord),
    BackgroundKb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoboxObject {
    pub id: String,
    pub label: String,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoboxRow {
    pub relation: String,
    pub label: String,
    pub objects: Vec<InfoboxObject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledType {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infobox {
    pub entity: String,
    pub label: String,
    pub types: Vec<LabeledType>,
    pub rows: Vec<InfoboxRow>,
}

/// Precomputed analytics over one graph snapshot.
#[derive(Debug, Clone)]
pub struct Analytics {
    config: AnalyticsConfig,
    hierarchy: TypeHierarchy,
    statements: Vec<StatementRecord>,
    statement_index: BTreeMap<String, usize>,
    labels: BTreeMap<String, String>,
    /// Representative type to entities asserted of exactly that type.
    direct: BTreeMap<String, BTreeSet<String>>,
    /// Entity to the raw type ids it is asserted of.
    entity_types: BTreeMap<String, BTreeSet<String>>,
    /// Background facts by subject: (relation, object).
    background: BTreeMap<String, Vec<(String, String)>>,
    known: BTreeSet<String>,
    stats: BTreeMap<String, TypeStats>,
}

fn p(iri: &str) -> Iri {
    Iri::new_unchecked(iri)
}

fn decode_statements(graph: &GraphSnapshot, ns: &Namespaces) -> Vec<StatementRecord> {
    let prefix = ns.statement_prefix();
    let mut out = Vec::new();
    for stmt in graph.subjects(&p(vocab::RDF_TYPE), &Term::iri(vocab::RDF_STATEMENT)) {
        let get = |pred: &str| graph.object(&stmt, &p(pred));
        let id = |pred: &str| get(pred).map(|t| ns.kb_id(t.value()));
        let (Some(subject), Some(relation), Some(object), Some(subject_type), Some(object_type)) = (
            id(vocab::RDF_SUBJECT),
            id(vocab::RDF_PREDICATE),
            id(vocab::RDF_OBJECT),
            id(kg::SUBJECT_TYPE),
            id(kg::OBJECT_TYPE),
        ) else {
            continue;
        };
        let doc = get(kg::EVIDENCE_DOCUMENT);
        let doc_id = doc
            .as_ref()
            .and_then(|d| graph.object(d, &p(kg::DOC_ID)))
            .map(|t| t.value().to_string())
            .unwrap_or_default();
        let year = doc
            .as_ref()
            .and_then(|d| graph.object(d, &p(kg::YEAR)))
            .and_then(|t| t.value().parse().ok());
        out.push(StatementRecord {
            id: stmt.value().strip_prefix(&prefix).unwrap_or(stmt.value()).to_string(),
            subject,
            relation,
            object,
            subject_type,
            object_type,
            doc_id,
            year,
            sentence: get(kg::EVIDENCE_SENTENCE)
                .map(|t| t.value().to_string())
                .unwrap_or_default(),
            offset: get(kg::EVIDENCE_OFFSET)
                .and_then(|t| t.value().parse().ok())
                .unwrap_or(0),
            confidence: get(kg::CONFIDENCE).and_then(|t| t.value().parse().ok()).unwrap_or(0.0),
        });
    }
    out
}

impl Analytics {
    pub fn build(graph: &GraphSnapshot, ns: &Namespaces, config: AnalyticsConfig) -> Self {
        let statements = decode_statements(graph, ns);

        let mut labels = BTreeMap::new();
        for t in graph.match_pattern(None, Some(&p(vocab::RDFS_LABEL)), None) {
            if let Term::Iri(iri) = &t.subject {
                if iri.starts_with(&ns.kb) {
                    labels
                        .entry(ns.kb_id(iri))
                        .or_insert_with(|| t.object.value().to_string());
                }
            }
        }

        let mut background: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        let mut known = BTreeSet::new();
        let mut edges = Vec::new();
        for t in graph.triples() {
            let (Term::Iri(s), Term::Iri(o)) = (&t.subject, &t.object) else {
                continue;
            };
            if !(s.starts_with(&ns.kb) && o.starts_with(&ns.kb) && t.predicate.as_str().starts_with(&ns.kb)) {
                continue;
            }
            let (s, r, o) = (ns.kb_id(s), ns.kb_id(t.predicate.as_str()), ns.kb_id(o));
            if r == config.subclass_relation {
                edges.push((s.clone(), o.clone()));
            }
            known.insert(s.clone());
            known.insert(o.clone());
            background.entry(s).or_default().push((r, o));
        }

        let mut nodes = BTreeSet::new();
        let mut entity_types: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for st in &statements {
            nodes.insert(st.subject_type.clone());
            nodes.insert(st.object_type.clone());
            entity_types
                .entry(st.subject.clone())
                .or_default()
                .insert(st.subject_type.clone());
            entity_types
                .entry(st.object.clone())
                .or_default()
                .insert(st.object_type.clone());
            known.insert(st.subject.clone());
            known.insert(st.object.clone());
            if st.relation == config.subclass_relation {
                edges.push((st.subject.clone(), st.object.clone()));
            }
        }
        let hierarchy = TypeHierarchy::new(nodes, edges);

        let mut direct: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (entity, types) in &entity_types {
            for ty in types {
                let rep = hierarchy.representative(ty).expect("type is a node").to_string();
                direct.entry(rep).or_default().insert(entity.clone());
            }
        }
        let statement_index = statements.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();

        let mut a = Analytics {
            config,
            hierarchy,
            statements,
            statement_index,
            labels,
            direct,
            entity_types,
            background,
            known,
            stats: BTreeMap::new(),
        };
        a.stats = a
            .hierarchy
            .nodes()
            .map(|rep| (rep.to_string(), a.compute_stats(rep)))
            .collect();
        a
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.hierarchy
    }

    pub fn statements(&self) -> &[StatementRecord] {
        &self.statements
    }

    pub fn config(&self) -> &AnalyticsConfig {
        &self.config
    }

    pub fn label(&self, id: &str) -> String {
        self.labels.get(id).cloned().unwrap_or_else(|| id.to_string())
    }

    fn rep(&self, type_id: &str) -> Result<&str, AnalyticsError> {
        self.hierarchy
            .representative(type_id)
            .ok_or_else(|| AnalyticsError::UnknownType(type_id.to_string()))
    }

    /// Distinct entities asserted of the type or any descendant.
    pub fn instances(&self, type_id: &str) -> Result<BTreeSet<String>, AnalyticsError> {
        let rep = self.rep(type_id)?;
        Ok(self
            .hierarchy
            .descendants_or_self(rep)
            .iter()
            .filter_map(|t| self.direct.get(t))
            .flatten()
            .cloned()
            .collect())
    }

    fn compute_stats(&self, rep: &str) -> TypeStats {
        let instances = self.instances(rep).expect("node");
        let triples = self
            .statements
            .iter()
            .filter(|s| instances.contains(&s.subject) || instances.contains(&s.object))
            .count();
        TypeStats {
            id: rep.to_string(),
            label: self.label(rep),
            direct: self.direct.get(rep).map_or(0, BTreeSet::len),
            transitive: instances.len(),
            triples,
        }
    }

    pub fn type_stats(&self, type_id: &str) -> Result<TypeStats, AnalyticsError> {
        let rep = self.rep(type_id)?;
        Ok(self.stats[rep].clone())
    }

    fn ranked(&self, mut list: Vec<TypeStats>) -> Vec<TypeStats> {
        list.sort_by(|a, b| b.transitive.cmp(&a.transitive).then_with(|| a.id.cmp(&b.id)));
        list
    }

    pub fn top_types(&self, n: usize) -> Vec<TypeStats> {
        let mut list = self.ranked(self.stats.values().cloned().collect());
        list.truncate(n);
        list
    }

    pub fn children_sorted(&self, type_id: &str) -> Result<Vec<TypeStats>, AnalyticsError> {
        let rep = self.rep(type_id)?;
        Ok(self.ranked(self.hierarchy.children(rep).map(|c| self.stats[c].clone()).collect()))
    }

    /// Per-entity distribution over years of the distinct documents whose
    /// facts mention the entity.
    pub fn trend_table(&self, type_id: &str, from: i32, to: i32) -> Result<TrendTable, AnalyticsError> {
        if from > to {
            return Err(AnalyticsError::EmptyRange { from, to });
        }
        let rep = self.rep(type_id)?.to_string();
        let instances = self.instances(&rep)?;
        let mut docs: BTreeMap<&str, BTreeMap<i32, BTreeSet<&str>>> = BTreeMap::new();
        for st in &self.statements {
            let Some(year) = st.year.filter(|y| (from..=to).contains(y)) else {
                continue;
            };
            for e in [&st.subject, &st.object] {
                if instances.contains(e) {
                    docs.entry(e).or_default().entry(year).or_default().insert(&st.doc_id);
                }
            }
        }
        let years: Vec<i32> = (from..=to).collect();
        let mut rows: Vec<TrendRow> = docs
            .into_iter()
            .map(|(entity, by_year)| {
                let counts: Vec<usize> = years.iter().map(|y| by_year.get(y).map_or(0, BTreeSet::len)).collect();
                let total: usize = counts.iter().sum();
                TrendRow {
                    entity: entity.to_string(),
                    label: self.label(entity),
                    percentages: counts.iter().map(|&c| 100.0 * c as f64 / total as f64).collect(),
                    counts,
                    total,
                }
            })
            .filter(|r| r.total > 0)
            .collect();
        rows.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.entity.cmp(&b.entity)));
        Ok(TrendTable {
            type_id: rep,
            from,
            to,
            years,
            rows,
        })
    }

    /// Most frequent relations of facts whose subject type is the type or a descendant.
    pub fn induce_schema(&self, type_id: &str, n: usize) -> Result<InfoboxSchema, AnalyticsError> {
        let rep = self.rep(type_id)?.to_string();
        let below = self.hierarchy.descendants_or_self(&rep);
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for st in &self.statements {
            let st_rep = self.hierarchy.representative(&st.subject_type).expect("node");
            if below.contains(st_rep) {
                *freq.entry(&st.relation).or_insert(0) += 1;
            }
        }
        let mut relations: Vec<SchemaRelation> = freq
            .into_iter()
            .map(|(id, frequency)| SchemaRelation {
                id: id.to_string(),
                label: self.label(id),
                frequency,
            })
            .collect();
        relations.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.id.cmp(&b.id)));
        relations.truncate(n);
        Ok(InfoboxSchema {
            type_id: rep,
            relations,
        })
    }

    fn evidence(st: &StatementRecord) -> EvidenceRecord {
        EvidenceRecord {
            statement: st.id.clone(),
            sentence: st.sentence.clone(),
            doc_id: st.doc_id.clone(),
            offset: st.offset,
            confidence: st.confidence,
        }
    }

    pub fn infobox(&self, entity: &str) -> Result<Infobox, AnalyticsError> {
        if !self.known.contains(entity) {
            return Err(AnalyticsError::UnknownEntity(entity.to_string()));
        }
        let types: Vec<LabeledType> = self
            .entity_types
            .get(entity)
            .into_iter()
            .flatten()
            .map(|t| LabeledType {
                id: t.clone(),
                label: self.label(t),
            })
            .collect();

        let mut relations: Vec<String> = Vec::new();
        for t in &types {
            for r in self.induce_schema(&t.id, self.config.schema_size)?.relations {
                if !relations.contains(&r.id) {
                    relations.push(r.id);
                }
            }
        }

        let mut rows = Vec::new();
        for relation in relations {
            let mut objects: Vec<InfoboxObject> = Vec::new();
            let slot = |objects: &mut Vec<InfoboxObject>, id: &str, prov: Provenance| match objects
                .iter_mut()
                .find(|o| o.id == id)
            {
                Some(o) => o.provenance.push(prov),
                None => objects.push(InfoboxObject {
                    id: id.to_string(),
                    label: self.label(id),
                    provenance: vec![prov],
                }),
            };
            let mut induced: Vec<&StatementRecord> = self
                .statements
                .iter()
                .filter(|s| s.subject == entity && s.relation == relation)
                .collect();
            induced.sort_by(|a, b| (&a.object, &a.doc_id, a.offset).cmp(&(&b.object, &b.doc_id, b.offset)));
            for st in induced {
                slot(&mut objects, &st.object, Provenance::Evidence(Self::evidence(st)));
            }
            let mut bg: Vec<&String> = self
                .background
                .get(entity)
                .into_iter()
                .flatten()
                .filter(|(r, _)| *r == relation)
                .map(|(_, o)| o)
                .collect();
            bg.sort();
            bg.dedup();
            for o in bg {
                slot(&mut objects, o, Provenance::BackgroundKb);
            }
            if !objects.is_empty() {
                rows.push(InfoboxRow {
                    label: self.label(&relation),
                    relation,
                    objects,
                });
            }
        }
        Ok(Infobox {
            entity: entity.to_string(),
            label: self.label(entity),
            types,
            rows,
        })
    }

    /// Evidence of every statement asserting the same subject, relation and
    /// object as `statement` (each sentence yields its own statement node).
    pub fn evidence_for(&self, statement: &str) -> Result<Vec<EvidenceRecord>, AnalyticsError> {
        let key = statement.rsplit('/').next().unwrap_or(statement);
        let &i = self
            .statement_index
            .get(key)
            .ok_or_else(|| AnalyticsError::UnknownStatement(statement.to_string()))?;
        let target = &self.statements[i];
        let mut out: Vec<EvidenceRecord> = self
            .statements
            .iter()
            .filter(|s| s.subject == target.subject && s.relation == target.relation && s.object == target.object)
            .map(Self::evidence)
            .collect();
        out.sort_by(|a, b| (&a.doc_id, a.offset, &a.statement).cmp(&(&b.doc_id, b.offset, &b.statement)));
        Ok(out)
    }
}

pub fn render_trend_table(table: &TrendTable) -> String {
    let width = table
        .rows
        .iter()
        .map(|r| r.label.chars().count())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "entity");
    for y in &table.years {
        let _ = write!(out, " {y:>6}");
    }
    let _ = writeln!(out, " {:>6}", "total");
    for row in &table.rows {
        let _ = write!(out, "{:<width$}", row.label);
        for p in &row.percentages {
            let _ = write!(out, " {p:>6.1}");
        }
        let _ = writeln!(out, " {:>6}", row.total);
    }
    out
}

pub fn render_infobox(infobox: &Infobox) -> String {
    let mut out = String::new();
    let types: Vec<String> = infobox.types.iter().map(|t| t.label.clone()).collect();
    let _ = writeln!(out, "{} ({})", infobox.label, types.join(", "));
    for row in &infobox.rows {
        let objects: Vec<String> = row
            .objects
            .iter()
            .map(|o| {
                let evidence = o
                    .provenance
                    .iter()
                    .filter(|p| matches!(p, Provenance::Evidence(_)))
                    .count();
                let kb = o.provenance.iter().any(|p| matches!(p, Provenance::BackgroundKb));
                match (evidence, kb) {
                    (0, _) => format!("{} [kb]", o.label),
                    (n, false) => format!("{} [{n} evidence]", o.label),
                    (n, true) => format!("{} [{n} evidence, kb]", o.label),
                }
            })
            .collect();
        let _ = writeln!(out, "  {}: {}", row.label, objects.join("; "));
    }
    out
}
