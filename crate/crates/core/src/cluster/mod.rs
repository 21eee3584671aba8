//! Partitioning gold answers into concept clusters.
//!
//! Three automatic algorithms (Ward HAC, X-means, G-means) operate on answer
//! vectors; [`load_human_clusterings`] reads curated clusterings from JSON.
//! Out-of-vocabulary answers never enter the geometry: each becomes its own
//! singleton cluster.

pub mod gmeans;
pub mod hac;
pub mod kmeans;
pub mod xmeans;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::answer::{AnswerSet, Cluster, Clustering, WRONG_LABEL};
use crate::embedding::AnswerVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Hac,
    XMeans,
    GMeans,
    HumanFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Ward,
}

/// Where to cut the HAC dendrogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HacStop {
    ClusterCount(usize),
    Distance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub algorithm: Algorithm,
    pub hac_linkage: Linkage,
    pub hac_stop: HacStop,
    pub xmeans_kmax: usize,
    pub gmeans_significance: f64,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            algorithm: Algorithm::Hac,
            hac_linkage: Linkage::Ward,
            hac_stop: HacStop::ClusterCount(8),
            xmeans_kmax: 20,
            gmeans_significance: 0.05,
            seed: 0,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        match self.hac_stop {
            HacStop::ClusterCount(0) => {
                return Err(Error::Config("HAC cluster count must be at least 1".into()))
            }
            HacStop::Distance(d) if !(d >= 0.0) => {
                return Err(Error::Config("HAC distance threshold must be non-negative".into()))
            }
            _ => {}
        }
        if self.xmeans_kmax < 1 {
            return Err(Error::Config("xmeans_kmax must be at least 1".into()));
        }
        if !(self.gmeans_significance > 0.0 && self.gmeans_significance < 1.0) {
            return Err(Error::Config("gmeans_significance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn centroid(points: &[&[f64]]) -> Vec<f64> {
    let dim = points.first().map_or(0, |p| p.len());
    let mut c = vec![0.0; dim];
    for p in points {
        for (acc, x) in c.iter_mut().zip(p.iter()) {
            *acc += x;
        }
    }
    let n = points.len().max(1) as f64;
    c.iter_mut().for_each(|x| *x /= n);
    c
}

/// Cluster the gold answer vectors of one question.
///
/// The result is canonical: labels are `c0, c1, ...` in order of each
/// cluster's smallest member index, so identical inputs and seed give an
/// identical clustering.
pub fn cluster_gold(
    question_id: &str,
    vectors: &[AnswerVector],
    config: &ClusterConfig,
) -> Result<Clustering> {
    config.validate()?;
    if vectors.is_empty() {
        return Err(Error::TooFewVectors {
            requested: 1,
            available: 0,
        });
    }
    let dim = vectors[0].dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.dim(),
        });
    }
    if let (Algorithm::Hac, HacStop::ClusterCount(k)) = (config.algorithm, config.hac_stop) {
        if vectors.len() < k {
            return Err(Error::TooFewVectors {
                requested: k,
                available: vectors.len(),
            });
        }
    }

    let in_vocab: Vec<usize> = (0..vectors.len()).filter(|&i| !vectors[i].is_oov()).collect();
    let points: Vec<&[f64]> = in_vocab.iter().map(|&i| vectors[i].vector.as_slice()).collect();

    let local_groups: Vec<usize> = if points.is_empty() {
        Vec::new()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        match config.algorithm {
            Algorithm::Hac => {
                let dendrogram = hac::ward(&points);
                match config.hac_stop {
                    HacStop::ClusterCount(k) => dendrogram.cut_count(k),
                    HacStop::Distance(t) => dendrogram.cut_height(t),
                }
            }
            Algorithm::XMeans => xmeans::xmeans(&points, config.xmeans_kmax, &mut rng).assignment,
            Algorithm::GMeans => {
                gmeans::gmeans(&points, config.gmeans_significance, &mut rng).assignment
            }
            Algorithm::HumanFile => {
                return Err(Error::Config(
                    "human clusterings are loaded from file, not computed".into(),
                ))
            }
        }
    };

    // Geometry groups first, then one fresh group per OOV answer.
    let mut groups = vec![0usize; vectors.len()];
    for (local, &global) in in_vocab.iter().enumerate() {
        groups[global] = local_groups[local];
    }
    let mut next = vectors.len();
    for (i, v) in vectors.iter().enumerate() {
        if v.is_oov() {
            groups[i] = next;
            next += 1;
        }
    }
    Ok(Clustering::from_assignment(question_id, &groups))
}

/// On-disk shape of one human clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanClusteringRecord {
    pub question_id: String,
    pub clusters: Vec<HumanCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanCluster {
    pub label: String,
    pub indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub wrong: bool,
}

impl HumanClusteringRecord {
    /// Validate against the gold set and convert. A cluster is the wrong
    /// cluster if it sets `"wrong": true` or is labelled `wrong`.
    pub fn to_clustering(&self, gold: &AnswerSet) -> Result<Clustering> {
        let err = |message: String| Error::ClusteringFile {
            question_id: self.question_id.clone(),
            message,
        };
        if gold.question_id != self.question_id {
            return Err(err(format!(
                "gold answer set belongs to question {}",
                gold.question_id
            )));
        }
        let n = gold.answers.len();
        let mut owner: HashMap<usize, &str> = HashMap::new();
        let mut wrong = None;
        let mut labels = BTreeSet::new();
        for c in &self.clusters {
            if !labels.insert(c.label.as_str()) {
                return Err(err(format!("duplicate label {:?}", c.label)));
            }
            if c.wrong || c.label.eq_ignore_ascii_case(WRONG_LABEL) {
                if wrong.is_some() {
                    return Err(err("more than one wrong cluster".into()));
                }
                wrong = Some(c.label.clone());
            }
            for &i in &c.indices {
                if i >= n {
                    return Err(err(format!("index {i} out of range ({n} gold answers)")));
                }
                if let Some(prev) = owner.insert(i, &c.label) {
                    return Err(err(format!(
                        "doubly-assigned index {i} ({prev:?} and {:?})",
                        c.label
                    )));
                }
            }
        }
        if let Some(missing) = (0..n).find(|i| !owner.contains_key(i)) {
            return Err(err(format!("uncovered index {missing}")));
        }
        let clusters = self
            .clusters
            .iter()
            .map(|c| Cluster {
                label: c.label.clone(),
                members: c.indices.clone(),
            })
            .collect();
        Clustering::new(self.question_id.clone(), clusters, wrong)
    }
}

impl From<&Clustering> for HumanClusteringRecord {
    fn from(c: &Clustering) -> Self {
        HumanClusteringRecord {
            question_id: c.question_id.clone(),
            clusters: c
                .clusters
                .iter()
                .map(|cl| HumanCluster {
                    label: cl.label.clone(),
                    indices: cl.members.clone(),
                    wrong: c.is_wrong(&cl.label),
                })
                .collect(),
        }
    }
}

/// Read human clusterings from a JSON file holding one record, an array of
/// records, or one record per line.
pub fn load_human_clusterings(path: &Path) -> Result<Vec<HumanClusteringRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(many) = serde_json::from_str::<Vec<HumanClusteringRecord>>(&text) {
        return Ok(many);
    }
    if let Ok(one) = serde_json::from_str::<HumanClusteringRecord>(&text) {
        return Ok(vec![one]);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Load the human clustering for `gold` from `path`.
pub fn load_human_clustering(path: &Path, gold: &AnswerSet) -> Result<Clustering> {
    let records = load_human_clusterings(path)?;
    let rec = records
        .iter()
        .find(|r| r.question_id == gold.question_id)
        .ok_or_else(|| Error::ClusteringFile {
            question_id: gold.question_id.clone(),
            message: format!("no clustering in {}", path.display()),
        })?;
    rec.to_clustering(gold)
}
