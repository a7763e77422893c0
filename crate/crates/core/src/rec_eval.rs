//! Graded-relevance evaluation of recommendation lists: grades are binarized
//! under a criterion, then scored with P@K and MAP per item category.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RecEvalError {
    #[error("K must be at least 1")]
    InvalidK,
    #[error("duplicate judgment for user {user} and item {item}")]
    Duplicate { user: String, item: String },
    #[error("user {user}, category {category}: ranks are not 1..{len}")]
    Ranks { user: String, category: String, len: usize },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unknown grade {0:?}")]
    Grade(String),
    #[error("unknown criterion {0:?}")]
    Criterion(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Grade {
    None,
    Low,
    Medium,
    High,
}

impl FromStr for Grade {
    type Err = RecEvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NONE" | "N" => Ok(Grade::None),
            "LOW" | "L" => Ok(Grade::Low),
            "MEDIUM" | "M" => Ok(Grade::Medium),
            "HIGH" | "H" => Ok(Grade::High),
            _ => Err(RecEvalError::Grade(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Criterion {
    Low,
    Medium,
    High,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Low, Criterion::Medium, Criterion::High];

    /// Whether `grade` counts as relevant: LOW accepts L/M/H, MEDIUM M/H, HIGH only H.
    pub fn accepts(&self, grade: Grade) -> bool {
        match self {
            Criterion::Low => grade >= Grade::Low,
            Criterion::Medium => grade >= Grade::Medium,
            Criterion::High => grade == Grade::High,
        }
    }
}

impl FromStr for Criterion {
    type Err = RecEvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LOW" => Ok(Criterion::Low),
            "MEDIUM" => Ok(Criterion::Medium),
            "HIGH" => Ok(Criterion::High),
            _ => Err(RecEvalError::Criterion(s.to_string())),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Low => "LOW",
            Criterion::Medium => "MEDIUM",
            Criterion::High => "HIGH",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub user: String,
    pub item: String,
    pub category: String,
    pub rank: usize,
    pub grade: Grade,
}

/// Reads `user,item,category,rank,grade` rows (header required).
pub fn read_judgments<R: Read>(reader: R) -> Result<Vec<Judgment>, RecEvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let err = |message: String| RecEvalError::Line { line, message };
        let record = record.map_err(|e| err(e.to_string()))?;
        if record.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", record.len())));
        }
        out.push(Judgment {
            user: record[0].to_string(),
            item: record[1].to_string(),
            category: record[2].to_string(),
            rank: record[3]
                .parse()
                .map_err(|_| err(format!("bad rank {:?}", &record[3])))?,
            grade: record[4].parse().map_err(|e: RecEvalError| err(e.to_string()))?,
        });
    }
    Ok(out)
}

/// Relevant fraction of the first `k` entries; missing entries count as non-relevant.
pub fn precision_at_k(rels: &[bool], k: usize) -> Result<f64, RecEvalError> {
    if k < 1 {
        return Err(RecEvalError::InvalidK);
    }
    let hits = rels.iter().take(k).filter(|&&r| r).count();
    Ok(hits as f64 / k as f64)
}

/// Mean of P@i over relevant positions i, normalized by the number of
/// relevant entries in the judged list.
pub fn average_precision(rels: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in rels.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

pub fn default_cutoffs() -> BTreeMap<String, usize> {
    BTreeMap::from([
        ("papers".to_string(), 10),
        ("projects".to_string(), 10),
        ("achievements".to_string(), 5),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionScores {
    pub criterion: Criterion,
    pub map: f64,
    pub p_at_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub category: String,
    pub k: usize,
    pub users: usize,
    pub scores: Vec<CriterionScores>,
}

impl CategoryReport {
    pub fn get(&self, criterion: Criterion) -> Option<&CriterionScores> {
        self.scores.iter().find(|s| s.criterion == criterion)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub categories: Vec<CategoryReport>,
}

impl EvalReport {
    pub fn category(&self, name: &str) -> Option<&CategoryReport> {
        self.categories.iter().find(|c| c.category == name)
    }
}

/// User to `(rank, grade)` pairs.
type RankedLists<'a> = BTreeMap<&'a str, Vec<(usize, Grade)>>;

/// Scores every category under each of `criteria`. Categories missing from
/// `cutoffs` use the length of their longest list as K.
pub fn evaluate(
    judgments: &[Judgment],
    criteria: &[Criterion],
    cutoffs: &BTreeMap<String, usize>,
) -> Result<EvalReport, RecEvalError> {
    let mut seen = HashSet::new();
    let mut lists: BTreeMap<&str, RankedLists> = BTreeMap::new();
    for j in judgments {
        if !seen.insert((j.user.as_str(), j.item.as_str())) {
            return Err(RecEvalError::Duplicate {
                user: j.user.clone(),
                item: j.item.clone(),
            });
        }
        lists
            .entry(&j.category)
            .or_default()
            .entry(&j.user)
            .or_default()
            .push((j.rank, j.grade));
    }

    let mut categories = Vec::new();
    for (category, users) in lists {
        let mut ordered: BTreeMap<&str, Vec<Grade>> = BTreeMap::new();
        for (user, mut list) in users {
            list.sort();
            if list.iter().enumerate().any(|(i, (rank, _))| *rank != i + 1) {
                return Err(RecEvalError::Ranks {
                    user: user.to_string(),
                    category: category.to_string(),
                    len: list.len(),
                });
            }
            ordered.insert(user, list.into_iter().map(|(_, g)| g).collect());
        }
        let k = match cutoffs.get(category) {
            Some(&k) => k,
            None => ordered.values().map(Vec::len).max().unwrap_or(1),
        };
        let n = ordered.len() as f64;
        let mut scores = Vec::new();
        for &criterion in criteria {
            let (mut map, mut p) = (0.0, 0.0);
            for grades in ordered.values() {
                let rels: Vec<bool> = grades.iter().map(|g| criterion.accepts(*g)).collect();
                map += average_precision(&rels);
                p += precision_at_k(&rels, k)?;
            }
            scores.push(CriterionScores {
                criterion,
                map: map / n,
                p_at_k: p / n,
            });
        }
        categories.push(CategoryReport {
            category: category.to_string(),
            k,
            users: ordered.len(),
            scores,
        });
    }
    Ok(EvalReport { categories })
}

/// Text table with one row per criterion and a MAP / P@K column pair per category.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let mut header = format!("{:<9}", "");
    let mut sub = format!("{:<9}", "criterion");
    for c in &report.categories {
        let _ = write!(header, " | {:<13}", format!("{} (n={})", c.category, c.users));
        let _ = write!(sub, " | {:<6}{:<7}", "MAP", format!("P@{}", c.k));
    }
    let _ = writeln!(out, "{}", header.trim_end());
    let _ = writeln!(out, "{}", sub.trim_end());
    let criteria: Vec<Criterion> = report
        .categories
        .first()
        .map(|c| c.scores.iter().map(|s| s.criterion).collect())
        .unwrap_or_default();
    for criterion in criteria {
        let mut row = format!("{:<9}", criterion.to_string());
        for c in &report.categories {
            if let Some(s) = c.get(criterion) {
                let _ = write!(row, " | {:<6.2}{:<7.2}", s.map, s.p_at_k);
            }
        }
        let _ = writeln!(out, "{}", row.trim_end());
    }
    out
}
