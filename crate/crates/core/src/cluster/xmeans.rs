//! X-means: k-means that grows k by splitting clusters whenever the
//! Bayesian information criterion of the two-child model beats the parent.

use rand::Rng;

use super::kmeans::{lloyd, two_means, KMeansResult};
use super::centroid;
use super::sq_dist;

/// BIC of a spherical-Gaussian mixture with shared per-dimension variance,
/// evaluated on `points` under the hard assignment in `model`.
pub fn bic(points: &[&[f64]], model: &KMeansResult) -> f64 {
    let r = points.len() as f64;
    let k = model.k() as f64;
    let m = points.first().map_or(0, |p| p.len()) as f64;
    if r <= k || m == 0.0 {
        return f64::NEG_INFINITY;
    }
    let sse: f64 = points
        .iter()
        .zip(&model.assignment)
        .map(|(p, &a)| sq_dist(p, &model.centroids[a]))
        .sum();
    let variance = (sse / (m * (r - k))).max(f64::MIN_POSITIVE);
    let mut counts = vec![0.0; model.k()];
    for &a in &model.assignment {
        counts[a] += 1.0;
    }
    let mixing: f64 = counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| c * (c / r).ln())
        .sum();
    let loglik = mixing
        - 0.5 * r * m * (2.0 * std::f64::consts::PI * variance).ln()
        - sse / (2.0 * variance);
    let params = (k - 1.0) + m * k + 1.0;
    loglik - 0.5 * params * r.ln()
}

/// Run X-means, never exceeding `kmax` clusters.
///
/// Splitting starts from two clusters: a lone cluster over groups arranged
/// on a ring can lose the first BIC comparison even though the fully split
/// model wins by a wide margin. The final model is compared against the
/// one-cluster model by BIC, so a single group still yields one cluster.
pub fn xmeans<R: Rng + ?Sized>(points: &[&[f64]], kmax: usize, rng: &mut R) -> KMeansResult {
    let kmax = kmax.max(1).min(points.len().max(1));
    let single = lloyd(points, vec![centroid(points)]);
    if kmax == 1 {
        return single;
    }
    let mut model = two_means(points, None, rng);
    loop {
        model = lloyd(points, model.centroids.clone());
        // (bic gain, parent cluster, children centroids)
        let mut candidates: Vec<(f64, usize, Vec<Vec<f64>>)> = Vec::new();
        for j in 0..model.k() {
            let idx = model.members(j);
            if idx.len() < 4 {
                continue;
            }
            let sub: Vec<&[f64]> = idx.iter().map(|&i| points[i]).collect();
            let parent = KMeansResult {
                centroids: vec![model.centroids[j].clone()],
                assignment: vec![0; sub.len()],
                inertia: 0.0,
            };
            let children = two_means(&sub, None, rng);
            if children.k() < 2 {
                continue;
            }
            let gain = bic(&sub, &children) - bic(&sub, &parent);
            if gain > 0.0 {
                candidates.push((gain, j, children.centroids));
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let budget = kmax.saturating_sub(model.k());
        if budget == 0 {
            break;
        }
        let mut centroids = model.centroids.clone();
        let mut replaced = vec![false; centroids.len()];
        let mut added = Vec::new();
        for (_, j, children) in candidates.into_iter().take(budget) {
            replaced[j] = true;
            added.extend(children);
        }
        centroids = centroids
            .into_iter()
            .zip(&replaced)
            .filter(|(_, &r)| !r)
            .map(|(c, _)| c)
            .chain(added)
            .collect();
        let before = model.k();
        model = lloyd(points, centroids);
        // Lloyd drops clusters that end up empty; stop if splitting made no
        // net progress (e.g. points equal up to rounding).
        if model.k() <= before || model.k() >= kmax {
            break;
        }
    }
    if model.k() > 1 && bic(points, &single) >= bic(points, &model) {
        return single;
    }
    model
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::cluster::kmeans::kmeans;

    fn blobs(centers: &[[f64; 2]], per: usize, sd: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sd).unwrap();
        let mut out = Vec::new();
        for c in centers {
            for _ in 0..per {
                out.push(vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
            }
        }
        out
    }

    #[test]
    fn finds_three_blobs() {
        let data = blobs(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]], 30, 1.0, 4);
        let pts: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = xmeans(&pts, 10, &mut rng);
        assert_eq!(model.k(), 3);
    }

    #[test]
    fn single_blob_stays_whole() {
        let data = blobs(&[[3.0, -2.0]], 60, 1.0, 8);
        let pts: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(xmeans(&pts, 10, &mut rng).k(), 1);
    }

    #[test]
    fn respects_kmax() {
        let data = blobs(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0], [20.0, 20.0]], 20, 0.5, 5);
        let pts: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(xmeans(&pts, 2, &mut rng).k() <= 2);
    }

    #[test]
    fn split_bic_beats_single_gaussian_on_two_blobs() {
        let data = blobs(&[[0.0, 0.0], [10.0, 0.0]], 25, 1.0, 9);
        let pts: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = kmeans(&pts, 1, &mut rng);
        let two = kmeans(&pts, 2, &mut rng);
        assert!(bic(&pts, &two) > bic(&pts, &one));
    }
}
