//! Domain types shared across the pipeline: questions, answer sets, clusterings,
//! categorical distributions and match assignments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for "sums to one" checks.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Label conventionally used for the discardable cluster of incorrect answers.
pub const WRONG_LABEL: &str = "wrong";

/// Which implicit slot the question asks to fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    #[serde(alias = "Arg0", alias = "agent")]
    Arg0,
    #[serde(alias = "Purpose")]
    Purpose,
    #[serde(alias = "Instrument")]
    Instrument,
    #[serde(alias = "Time")]
    Time,
    #[serde(alias = "Location")]
    Location,
    #[serde(other)]
    Other,
}

impl Slot {
    pub fn as_str(self) -> &'static str {
        match self {
            Slot::Arg0 => "arg0",
            Slot::Purpose => "purpose",
            Slot::Instrument => "instrument",
            Slot::Time => "time",
            Slot::Location => "location",
            Slot::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub context: String,
    pub slot: Slot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Gold,
    Predicted,
}

/// Raw answer strings for one question, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSet {
    pub question_id: String,
    pub answers: Vec<String>,
    pub role: Role,
}

impl AnswerSet {
    pub fn gold(question_id: impl Into<String>, answers: Vec<String>) -> Self {
        AnswerSet {
            question_id: question_id.into(),
            answers,
            role: Role::Gold,
        }
    }

    pub fn predicted(question_id: impl Into<String>, answers: Vec<String>) -> Self {
        AnswerSet {
            question_id: question_id.into(),
            answers,
            role: Role::Predicted,
        }
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

/// Lowercase, trim and collapse internal whitespace.
///
/// This is the only normalizer in the crate; raw strings are never rewritten
/// in place, it is applied at embedding and matching boundaries.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalize and split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    normalize(text)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub label: String,
    /// Sorted indices into the gold answer set.
    pub members: Vec<usize>,
}

/// A partition of one gold answer set into concept clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub question_id: String,
    pub clusters: Vec<Cluster>,
    /// Label of the cluster holding incorrect gold answers, if any.
    pub wrong: Option<String>,
}

impl Clustering {
    /// Build a clustering, checking label uniqueness, member disjointness and
    /// that the wrong label names an existing cluster.
    pub fn new(
        question_id: impl Into<String>,
        mut clusters: Vec<Cluster>,
        wrong: Option<String>,
    ) -> Result<Self> {
        let mut labels = HashSet::new();
        let mut seen = HashSet::new();
        for c in clusters.iter_mut() {
            if !labels.insert(c.label.clone()) {
                return Err(Error::InvalidClustering(format!(
                    "duplicate cluster label {:?}",
                    c.label
                )));
            }
            c.members.sort_unstable();
            for &m in &c.members {
                if !seen.insert(m) {
                    return Err(Error::InvalidClustering(format!(
                        "index {m} assigned to more than one cluster"
                    )));
                }
            }
        }
        if let Some(w) = &wrong {
            if !labels.contains(w) {
                return Err(Error::InvalidClustering(format!(
                    "wrong label {w:?} names no cluster"
                )));
            }
        }
        Ok(Clustering {
            question_id: question_id.into(),
            clusters,
            wrong,
        })
    }

    /// Build a canonical clustering from one group id per point. Labels are
    /// `c0, c1, ...` ordered by each group's smallest member index.
    pub fn from_assignment(question_id: impl Into<String>, groups: &[usize]) -> Self {
        let mut order: Vec<usize> = Vec::new();
        let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, &g) in groups.iter().enumerate() {
            members
                .entry(g)
                .or_insert_with(|| {
                    order.push(g);
                    Vec::new()
                })
                .push(i);
        }
        let clusters = order
            .iter()
            .enumerate()
            .map(|(rank, g)| Cluster {
                label: format!("c{rank}"),
                members: members.remove(g).unwrap_or_default(),
            })
            .collect();
        Clustering {
            question_id: question_id.into(),
            clusters,
            wrong: None,
        }
    }

    /// Check that the clusters cover every index in `0..n_answers` exactly once.
    pub fn check_partition(&self, n_answers: usize) -> Result<()> {
        let mut owner = vec![false; n_answers];
        for c in &self.clusters {
            for &m in &c.members {
                if m >= n_answers {
                    return Err(Error::InvalidClustering(format!(
                        "index {m} out of range for {n_answers} answers"
                    )));
                }
                if owner[m] {
                    return Err(Error::InvalidClustering(format!(
                        "index {m} assigned to more than one cluster"
                    )));
                }
                owner[m] = true;
            }
        }
        if let Some(missing) = owner.iter().position(|o| !o) {
            return Err(Error::InvalidClustering(format!("uncovered index {missing}")));
        }
        Ok(())
    }

    pub fn is_wrong(&self, label: &str) -> bool {
        self.wrong.as_deref() == Some(label)
    }

    /// Clusters that take part in scoring, i.e. everything but the wrong cluster.
    pub fn scoring_clusters(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(move |c| !self.is_wrong(&c.label))
    }

    pub fn scoring_labels(&self) -> Vec<String> {
        self.scoring_clusters().map(|c| c.label.clone()).collect()
    }

    /// Cluster index (into `clusters`) for every gold answer index.
    pub fn owner_map(&self, n_answers: usize) -> Vec<Option<usize>> {
        let mut owner = vec![None; n_answers];
        for (ci, c) in self.clusters.iter().enumerate() {
            for &m in &c.members {
                if m < n_answers {
                    owner[m] = Some(ci);
                }
            }
        }
        owner
    }

    pub fn cluster(&self, label: &str) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.label == label)
    }
}

/// Probabilities over an ordered list of cluster labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDistribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl CategoricalDistribution {
    /// Validating constructor: equal lengths, non-negative finite entries,
    /// unique labels, total mass 1 within [`PROB_TOLERANCE`].
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} labels but {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::InvalidDistribution("no categories".into()));
        }
        let unique: HashSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::InvalidDistribution("duplicate labels".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("bad probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("mass sums to {total}")));
        }
        Ok(CategoricalDistribution { labels, probs })
    }

    /// Normalize non-negative weights into a distribution.
    pub fn from_weights(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Self::new(labels, probs)
    }

    pub fn uniform(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        Self::from_weights(labels, vec![1.0; n])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probs[i])
    }

    /// Number of categories with non-zero mass.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|p| **p > 0.0).count()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|p| *p > 0.0)
    }

    pub fn same_labels(&self, other: &CategoricalDistribution) -> bool {
        self.labels == other.labels
    }

    /// Pointwise convex combination `Σ coeffs[i] * dists[i]` over shared labels.
    pub fn mixture(parts: &[(f64, &CategoricalDistribution)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidDistribution("empty mixture".into()))?
            .1;
        let mut probs = vec![0.0; first.len()];
        for (w, d) in parts {
            if !d.same_labels(first) {
                return Err(Error::LabelMismatch {
                    left: first.labels.clone(),
                    right: d.labels.clone(),
                });
            }
            for (acc, p) in probs.iter_mut().zip(&d.probs) {
                *acc += w * p;
            }
        }
        Self::new(first.labels.clone(), probs)
    }
}

/// Where one predicted answer landed among the gold clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchAssignment {
    pub prediction_index: usize,
    /// Cluster label to weight; may include the wrong cluster.
    pub weights: BTreeMap<String, f64>,
    pub unmatched: bool,
}

impl MatchAssignment {
    pub fn unmatched(prediction_index: usize) -> Self {
        MatchAssignment {
            prediction_index,
            weights: BTreeMap::new(),
            unmatched: true,
        }
    }

    /// Split weight evenly across the given labels (deduplicated).
    pub fn split_evenly<I, S>(prediction_index: usize, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let unique: std::collections::BTreeSet<String> = labels.into_iter().collect();
        if unique.is_empty() {
            return Self::unmatched(prediction_index);
        }
        let w = 1.0 / unique.len() as f64;
        MatchAssignment {
            prediction_index,
            weights: unique.into_iter().map(|l| (l, w)).collect(),
            unmatched: false,
        }
    }

    pub fn matched_labels(&self) -> impl Iterator<Item = &str> {
        self.weights.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    EmptyQuestionId,
    DuplicateQuestion,
    EmptyGold,
    DuplicateGold,
    MissingGold,
    OrphanGold,
    NotGold,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagnosticKind::EmptyQuestionId => "empty question id",
            DiagnosticKind::DuplicateQuestion => "duplicate question",
            DiagnosticKind::EmptyGold => "empty gold set",
            DiagnosticKind::DuplicateGold => "duplicate gold",
            DiagnosticKind::MissingGold => "missing gold",
            DiagnosticKind::OrphanGold => "gold set for unknown question",
            DiagnosticKind::NotGold => "answer set is not marked gold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub question_id: String,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.question_id, self.kind)
    }
}

/// Report every way the dataset breaks the model's invariants. An empty list
/// means every question has exactly one non-empty gold set.
pub fn validate_dataset(questions: &[Question], gold: &[AnswerSet]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |question_id: &str, kind| {
        out.push(Diagnostic {
            question_id: question_id.to_owned(),
            kind,
        })
    };

    let mut ids = HashSet::new();
    for q in questions {
        if q.id.is_empty() {
            push(&q.id, DiagnosticKind::EmptyQuestionId);
        } else if !ids.insert(q.id.as_str()) {
            push(&q.id, DiagnosticKind::DuplicateQuestion);
        }
    }

    let mut gold_count: HashMap<&str, usize> = HashMap::new();
    for set in gold {
        if set.role != Role::Gold {
            push(&set.question_id, DiagnosticKind::NotGold);
            continue;
        }
        let count = gold_count.entry(set.question_id.as_str()).or_default();
        *count += 1;
        if *count == 2 {
            push(&set.question_id, DiagnosticKind::DuplicateGold);
        }
        if set.answers.is_empty() {
            push(&set.question_id, DiagnosticKind::EmptyGold);
        }
        if !ids.contains(set.question_id.as_str()) {
            push(&set.question_id, DiagnosticKind::OrphanGold);
        }
    }
    for q in questions {
        if !q.id.is_empty() && !gold_count.contains_key(q.id.as_str()) {
            push(&q.id, DiagnosticKind::MissingGold);
        }
    }
    out
}
