//! Smoothed categorical distributions over gold clusters, the KL score, and
//! the MaxAnswer@k baseline.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::answer::{CategoricalDistribution, Clustering, MatchAssignment};
use crate::error::{Error, Result};

/// Additive (Laplace) smoothing: `dummy_count` pseudo-answers per category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub dummy_count: u32,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { dummy_count: 1 }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dummy_count == 0 {
            return Err(Error::Config("dummy_count must be at least 1".into()));
        }
        Ok(())
    }

    fn dummy(&self) -> f64 {
        f64::from(self.dummy_count)
    }
}

/// `P(c) = (|c| + dummy) / (Σ|c'| + dummy·K)` over the K non-wrong clusters.
pub fn gold_distribution(
    clustering: &Clustering,
    smoothing: SmoothingConfig,
) -> Result<CategoricalDistribution> {
    smoothing.validate()?;
    let (labels, counts): (Vec<String>, Vec<f64>) = clustering
        .scoring_clusters()
        .map(|c| (c.label.clone(), c.members.len() as f64 + smoothing.dummy()))
        .unzip();
    if labels.is_empty() {
        return Err(Error::InvalidClustering(format!(
            "question {} has no non-wrong clusters",
            clustering.question_id
        )));
    }
    CategoricalDistribution::from_weights(labels, counts)
}

/// Pseudo-count per label is the summed match weight plus the dummy count.
/// Weight towards labels outside `labels` (the wrong cluster) and unmatched
/// predictions contribute nothing.
pub fn predicted_distribution(
    assignments: &[MatchAssignment],
    labels: &[String],
    smoothing: SmoothingConfig,
) -> Result<CategoricalDistribution> {
    smoothing.validate()?;
    let counts = weighted_counts(assignments, labels);
    let weights = counts.iter().map(|c| c + smoothing.dummy()).collect();
    CategoricalDistribution::from_weights(labels.to_vec(), weights)
}

/// Raw summed match weight per label.
pub fn weighted_counts(assignments: &[MatchAssignment], labels: &[String]) -> Vec<f64> {
    labels
        .iter()
        .map(|l| {
            assignments
                .iter()
                .filter(|a| !a.unmatched)
                .filter_map(|a| a.weights.get(l))
                .sum()
        })
        .collect()
}

/// `D_KL(gold || pred)` in nats. Terms with zero gold mass vanish; a zero
/// prediction where gold has mass is an error.
pub fn kl_score(gold: &CategoricalDistribution, pred: &CategoricalDistribution) -> Result<f64> {
    if !gold.same_labels(pred) {
        return Err(Error::LabelMismatch {
            left: gold.labels().to_vec(),
            right: pred.labels().to_vec(),
        });
    }
    let mut kl = 0.0;
    for ((label, &g), &p) in gold.labels().iter().zip(gold.probs()).zip(pred.probs()) {
        if g == 0.0 {
            continue;
        }
        if p <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "predicted mass for {label:?} is zero where gold has {g}"
            )));
        }
        kl += g * (g / p).ln();
    }
    Ok(kl.max(0.0))
}

/// MaxAnswer@k: only the first `k` ranked predictions count; each credits
/// the size of one not-yet-hit cluster it matched (the largest such), and
/// the total is normalized by the sum of the `k` largest cluster sizes.
/// The wrong cluster earns nothing.
pub fn maxanswer_at_k(clustering: &Clustering, ranked: &[MatchAssignment], k: usize) -> f64 {
    let (earned, best) = maxanswer_credit(clustering, ranked, k);
    if best == 0 {
        return 0.0;
    }
    earned as f64 / best as f64
}

/// Numerator and denominator of [`maxanswer_at_k`]. The numerator never
/// decreases with `k`; the ratio can, because the denominator grows too.
pub fn maxanswer_credit(clustering: &Clustering, ranked: &[MatchAssignment], k: usize) -> (usize, usize) {
    let clusters: Vec<(&str, usize)> = clustering
        .scoring_clusters()
        .map(|c| (c.label.as_str(), c.members.len()))
        .collect();
    let mut sizes: Vec<usize> = clusters.iter().map(|c| c.1).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let best: usize = sizes.iter().take(k).sum();
    let mut hit: HashSet<&str> = HashSet::new();
    let mut earned = 0usize;
    for a in ranked.iter().take(k) {
        if a.unmatched {
            continue;
        }
        let pick = clusters
            .iter()
            .filter(|(l, _)| a.weights.contains_key(*l) && !hit.contains(l))
            .max_by(|x, y| x.1.cmp(&y.1).then_with(|| y.0.cmp(x.0)));
        if let Some(&(label, size)) = pick {
            hit.insert(label);
            earned += size;
        }
    }
    (earned, best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::Cluster;

    fn clustering(sizes: &[(&str, usize)], wrong: Option<&str>) -> Clustering {
        let mut next = 0;
        let clusters = sizes
            .iter()
            .map(|(l, n)| {
                let members = (next..next + n).collect();
                next += n;
                Cluster { label: l.to_string(), members }
            })
            .collect();
        Clustering::new("q", clusters, wrong.map(str::to_owned)).unwrap()
    }

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    fn one(i: usize, l: &str) -> MatchAssignment {
        MatchAssignment::split_evenly(i, [l])
    }

    #[test]
    fn gold_smoothing_examples() {
        let d = gold_distribution(&clustering(&[("A", 3), ("B", 1)], None), SmoothingConfig::default()).unwrap();
        assert_eq!(d.probs(), &[4.0 / 6.0, 2.0 / 6.0]);

        let d = gold_distribution(
            &clustering(&[("A", 50), ("B", 30), ("C", 20)], None),
            SmoothingConfig::default(),
        )
        .unwrap();
        assert_eq!(d.probs(), &[51.0 / 103.0, 31.0 / 103.0, 21.0 / 103.0]);

        let d = gold_distribution(&clustering(&[("A", 17)], None), SmoothingConfig::default()).unwrap();
        assert_eq!(d.probs(), &[1.0]);
    }

    #[test]
    fn wrong_cluster_is_excluded() {
        let c = clustering(&[("A", 3), ("wrong", 5), ("B", 1)], Some("wrong"));
        let d = gold_distribution(&c, SmoothingConfig::default()).unwrap();
        assert_eq!(d.labels(), &labels(&["A", "B"])[..]);
        let only_wrong = clustering(&[("wrong", 2)], Some("wrong"));
        assert!(gold_distribution(&only_wrong, SmoothingConfig::default()).is_err());
    }

    #[test]
    fn zero_dummy_rejected() {
        let c = clustering(&[("A", 1)], None);
        assert!(gold_distribution(&c, SmoothingConfig { dummy_count: 0 }).is_err());
    }

    #[test]
    fn predicted_examples() {
        let s = SmoothingConfig::default();
        let ls = labels(&["A", "B", "C"]);
        let none = vec![MatchAssignment::unmatched(0), MatchAssignment::unmatched(1)];
        let d = predicted_distribution(&none, &ls, s).unwrap();
        assert!(d.probs().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));

        let ls = labels(&["A", "B"]);
        let d = predicted_distribution(&[one(0, "A"), one(1, "A")], &ls, s).unwrap();
        assert_eq!(d.probs(), &[0.75, 0.25]);

        let split = MatchAssignment::split_evenly(0, ["A", "B"]);
        let d = predicted_distribution(&[split], &ls, s).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);

        // Weight sent to the wrong cluster is discarded.
        let d = predicted_distribution(&[one(0, "wrong")], &ls, s).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn kl_examples() {
        let ls = labels(&["a", "b", "c"]);
        let g = CategoricalDistribution::new(ls.clone(), vec![0.5, 0.3, 0.2]).unwrap();
        let p = CategoricalDistribution::new(ls.clone(), vec![0.7, 0.2, 0.1]).unwrap();
        assert_eq!(kl_score(&g, &g).unwrap(), 0.0);
        // Direct summation: 0.5 ln(5/7) + 0.3 ln(3/2) + 0.2 ln 2.
        let oracle = 0.5 * (0.5f64 / 0.7).ln() + 0.3 * (0.3f64 / 0.2).ln() + 0.2 * (0.2f64 / 0.1).ln();
        assert!((oracle - 0.09203).abs() < 1e-4);
        assert!((kl_score(&g, &p).unwrap() - oracle).abs() < 1e-12);

        let e = 1e-3;
        let ls2 = labels(&["a", "b"]);
        let g = CategoricalDistribution::new(ls2.clone(), vec![1.0 - e, e]).unwrap();
        let p = CategoricalDistribution::new(ls2, vec![e, 1.0 - e]).unwrap();
        // (1 - 2e) ln((1 - e) / e) = 0.998 ln 999
        let oracle = (1.0 - 2.0 * e) * ((1.0 - e) / e).ln();
        assert!((oracle - 6.89294).abs() < 1e-5);
        assert!((kl_score(&g, &p).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn kl_label_mismatch_and_zero_support() {
        let g = CategoricalDistribution::new(labels(&["a", "b"]), vec![0.5, 0.5]).unwrap();
        let p = CategoricalDistribution::new(labels(&["a", "c"]), vec![0.5, 0.5]).unwrap();
        assert!(matches!(kl_score(&g, &p), Err(Error::LabelMismatch { .. })));
        let z = CategoricalDistribution::new(labels(&["a", "b"]), vec![1.0, 0.0]).unwrap();
        assert!(kl_score(&g, &z).is_err());
        assert!(kl_score(&z, &g).unwrap() > 0.0);
    }

    /// Brute-force oracle: best achievable credit is the max over all
    /// k-subsets of cluster sizes.
    fn best_by_enumeration(sizes: &[usize], k: usize) -> usize {
        let n = sizes.len();
        (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize <= k)
            .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| sizes[i]).sum())
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn maxanswer_examples() {
        let c = clustering(&[("A", 5), ("B", 3), ("C", 2)], None);
        assert_eq!(best_by_enumeration(&[5, 3, 2], 2), 8);
        let got = maxanswer_at_k(&c, &[one(0, "B"), one(1, "C")], 2);
        assert_eq!(got, 5.0 / 8.0);
        assert_eq!(maxanswer_at_k(&c, &[one(0, "A"), one(1, "B")], 2), 1.0);
        assert_eq!(maxanswer_at_k(&c, &[MatchAssignment::unmatched(0)], 2), 0.0);
        // Repeated hits count once; predictions past k are ignored.
        assert_eq!(maxanswer_at_k(&c, &[one(0, "B"), one(1, "B"), one(2, "A")], 2), 3.0 / 8.0);
    }

    #[test]
    fn maxanswer_credit_monotone_in_k() {
        let c = clustering(&[("A", 5), ("B", 3), ("C", 2), ("D", 2)], None);
        let ranked = vec![one(0, "C"), MatchAssignment::unmatched(1), one(2, "A"), one(3, "C"), one(4, "D")];
        let mut prev = 0;
        for k in 1..8 {
            let (earned, best) = maxanswer_credit(&c, &ranked, k);
            assert!(earned >= prev);
            assert!(earned <= best);
            prev = earned;
        }
        // The normalized score is not monotone: 2/5 at k=1, 2/8 at k=2.
        assert_eq!(maxanswer_at_k(&c, &ranked, 1), 0.4);
        assert_eq!(maxanswer_at_k(&c, &ranked, 2), 0.25);
    }

    #[test]
    fn maxanswer_monotone_when_ranked_by_size() {
        let c = clustering(&[("A", 5), ("B", 3), ("C", 2), ("D", 2)], None);
        let ranked = vec![one(0, "A"), one(1, "B"), one(2, "C"), one(3, "D")];
        let mut prev = 0.0;
        for k in 1..6 {
            let s = maxanswer_at_k(&c, &ranked, k);
            assert!(s >= prev);
            prev = s;
        }
    }
}
