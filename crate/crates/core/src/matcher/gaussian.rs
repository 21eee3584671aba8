//! Per-cluster membership regressors: RBF-kernel ridge regression trained
//! one-vs-rest on the gold answer vectors (members 1, non-members 0).
//!
//! All clusters share one kernel matrix, so a single Cholesky factorization
//! of `K + ridge * I` serves every cluster. The kernel bandwidth is the median
//! pairwise distance between in-vocabulary gold vectors.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector};

use crate::answer::{Clustering, MatchAssignment};
use crate::cluster::sq_dist;
use crate::embedding::AnswerVector;

/// Ridge escalation when the regularized kernel is not numerically
/// positive definite: multiply by this factor, at most this many times.
const RIDGE_GROWTH: f64 = 10.0;
const RIDGE_RETRIES: usize = 8;

#[derive(Debug, Clone)]
enum Model {
    /// No in-vocabulary negatives: every in-vocabulary prediction belongs.
    Always,
    /// No in-vocabulary members: nothing can be scored into this cluster.
    Never,
    Fitted(DVector<f64>),
}

#[derive(Debug, Clone)]
pub struct GaussianRegressors {
    labels: Vec<String>,
    models: Vec<Model>,
    train: Vec<Vec<f64>>,
    bandwidth: f64,
    ridge: f64,
}

/// Median of non-zero pairwise Euclidean distances; 1.0 if there are none.
pub fn median_bandwidth(points: &[&[f64]]) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let v = sq_dist(points[i], points[j]).sqrt();
            if v > 0.0 {
                d.push(v);
            }
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    }
}

pub fn rbf(a: &[f64], b: &[f64], bandwidth: f64) -> f64 {
    (-sq_dist(a, b) / (2.0 * bandwidth * bandwidth)).exp()
}

/// Fit one regressor per cluster of `clustering`, including the wrong
/// cluster if present. Deterministic.
pub fn fit_gaussian_regressors(
    clustering: &Clustering,
    gold_vecs: &[AnswerVector],
    ridge: f64,
) -> GaussianRegressors {
    let in_vocab: Vec<usize> = (0..gold_vecs.len()).filter(|&i| !gold_vecs[i].is_oov()).collect();
    let train: Vec<Vec<f64>> = in_vocab.iter().map(|&i| gold_vecs[i].vector.clone()).collect();
    let refs: Vec<&[f64]> = train.iter().map(Vec::as_slice).collect();
    let bandwidth = median_bandwidth(&refs);
    let owner = clustering.owner_map(gold_vecs.len());
    let labels: Vec<String> = clustering.clusters.iter().map(|c| c.label.clone()).collect();

    let n = train.len();
    let kernel = DMatrix::from_fn(n, n, |i, j| rbf(&train[i], &train[j], bandwidth));
    let mut used_ridge = ridge;
    let mut factor: Option<Cholesky<f64, nalgebra::Dyn>> = None;
    let needs_solve = clustering.clusters.iter().enumerate().any(|(ci, _)| {
        let pos = in_vocab.iter().filter(|&&i| owner[i] == Some(ci)).count();
        pos > 0 && pos < n
    });
    if needs_solve {
        for attempt in 0..=RIDGE_RETRIES {
            let regularized = &kernel + DMatrix::identity(n, n) * used_ridge;
            if let Some(ch) = regularized.cholesky() {
                factor = Some(ch);
                break;
            }
            if attempt < RIDGE_RETRIES {
                warn!(
                    "kernel matrix not positive definite at ridge {used_ridge}; retrying with {}",
                    used_ridge * RIDGE_GROWTH
                );
                used_ridge *= RIDGE_GROWTH;
            }
        }
    }

    let models = (0..clustering.clusters.len())
        .map(|ci| {
            let targets = DVector::from_iterator(
                n,
                in_vocab.iter().map(|&i| if owner[i] == Some(ci) { 1.0 } else { 0.0 }),
            );
            let positives = targets.iter().filter(|&&y| y > 0.0).count();
            if positives == 0 {
                Model::Never
            } else if positives == n {
                Model::Always
            } else {
                match &factor {
                    Some(ch) => Model::Fitted(ch.solve(&targets)),
                    None => {
                        warn!("kernel ridge solve failed; cluster {ci} will never match");
                        Model::Never
                    }
                }
            }
        })
        .collect();

    GaussianRegressors {
        labels,
        models,
        train,
        bandwidth,
        ridge: used_ridge,
    }
}

impl GaussianRegressors {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Ridge actually used, after any escalation.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Membership score in [0, 1] for every cluster, in clustering order.
    pub fn scores(&self, v: &[f64]) -> Vec<f64> {
        let k: Vec<f64> = self.train.iter().map(|t| rbf(v, t, self.bandwidth)).collect();
        self.models
            .iter()
            .map(|m| match m {
                Model::Always => 1.0,
                Model::Never => 0.0,
                Model::Fitted(alpha) => {
                    let s: f64 = alpha.iter().zip(&k).map(|(a, kv)| a * kv).sum();
                    s.clamp(0.0, 1.0)
                }
            })
            .collect()
    }
}

/// Match every cluster whose regressor scores at least `threshold`.
pub fn match_gaussian(
    prediction_index: usize,
    prediction: &AnswerVector,
    regressors: &GaussianRegressors,
    threshold: f64,
) -> MatchAssignment {
    if prediction.is_oov() {
        return MatchAssignment::unmatched(prediction_index);
    }
    let scores = regressors.scores(&prediction.vector);
    match_scores(prediction_index, &regressors.labels, &scores, threshold)
}

pub(crate) fn match_scores(
    prediction_index: usize,
    labels: &[String],
    scores: &[f64],
    threshold: f64,
) -> MatchAssignment {
    let hits = labels
        .iter()
        .zip(scores)
        .filter(|(_, &s)| s >= threshold)
        .map(|(l, _)| l.clone());
    MatchAssignment::split_evenly(prediction_index, hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::Cluster;

    fn av(v: Vec<f64>) -> AnswerVector {
        AnswerVector {
            vector: v,
            covered_tokens: 1,
            total_tokens: 1,
        }
    }

    fn labels() -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }

    #[test]
    fn threshold_semantics() {
        let m = match_scores(0, &labels(), &[0.9, 0.1, 0.1], 0.5);
        assert_eq!(m.weights.len(), 1);
        assert_eq!(m.weights.get("a"), Some(&1.0));

        let m = match_scores(0, &labels(), &[0.7, 0.6, 0.1], 0.5);
        assert_eq!(m.weights.get("a"), Some(&0.5));
        assert_eq!(m.weights.get("b"), Some(&0.5));

        assert!(match_scores(0, &labels(), &[0.4, 0.3, 0.1], 0.5).unmatched);
    }

    #[test]
    fn single_cluster_matches_everything_in_vocab() {
        let c = Clustering::from_assignment("q", &[0, 0, 0]);
        let g = vec![av(vec![0.0, 0.0]), av(vec![1.0, 0.0]), av(vec![0.0, 1.0])];
        let r = fit_gaussian_regressors(&c, &g, 0.1);
        for p in [vec![100.0, -50.0], vec![0.5, 0.5]] {
            let m = match_gaussian(0, &av(p), &r, 0.5);
            assert_eq!(m.weights.get("c0"), Some(&1.0));
        }
        assert!(match_gaussian(0, &AnswerVector::oov(2, 1), &r, 0.5).unmatched);
    }

    #[test]
    fn far_away_scores_vanish() {
        let c = Clustering::from_assignment("q", &[0, 0, 1, 1]);
        let g = vec![
            av(vec![0.0, 0.0]),
            av(vec![0.2, 0.0]),
            av(vec![3.0, 3.0]),
            av(vec![3.2, 3.0]),
        ];
        let r = fit_gaussian_regressors(&c, &g, 0.1);
        let s = r.scores(&[1e3, -1e3]);
        assert!(s.iter().all(|&x| x < 1e-12), "{s:?}");
    }

    #[test]
    fn clusters_without_vectors_never_match() {
        let c = Clustering::new(
            "q",
            vec![
                Cluster { label: "a".into(), members: vec![0, 1] },
                Cluster { label: "b".into(), members: vec![2] },
            ],
            None,
        )
        .unwrap();
        let g = vec![av(vec![0.0]), av(vec![0.1]), AnswerVector::oov(1, 1)];
        let r = fit_gaussian_regressors(&c, &g, 0.1);
        assert_eq!(r.scores(&[0.05]), vec![1.0, 0.0]);
    }

    #[test]
    fn median_bandwidth_odd_and_even() {
        let p = [vec![0.0], vec![1.0], vec![3.0]];
        let refs: Vec<&[f64]> = p.iter().map(Vec::as_slice).collect();
        // distances 1, 3, 2 -> median 2
        assert_eq!(median_bandwidth(&refs), 2.0);
        let same = [vec![1.0], vec![1.0]];
        let refs: Vec<&[f64]> = same.iter().map(Vec::as_slice).collect();
        assert_eq!(median_bandwidth(&refs), 1.0);
    }
}
