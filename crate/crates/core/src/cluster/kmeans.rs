//! Seeded k-means (k-means++ seeding, Lloyd iterations) shared by X-means
//! and G-means.

use rand::Rng;

use super::{centroid, sq_dist};

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    /// Centroid index per point.
    pub assignment: Vec<usize>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

const MAX_ITER: usize = 100;

/// Nearest centroid, lowest index on ties.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding. Falls back to unused points in index order once every
/// remaining point coincides with a chosen center.
pub fn plus_plus_init<R: Rng + ?Sized>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let k = k.min(n);
    let mut chosen = Vec::with_capacity(k);
    if k == 0 {
        return Vec::new();
    }
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            if d2[pick] <= 0.0 {
                d2.iter().rposition(|&d| d > 0.0).unwrap_or(pick)
            } else {
                pick
            }
        } else {
            match (0..n).find(|i| !chosen.contains(i)) {
                Some(i) => i,
                None => break,
            }
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, points[next]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen.into_iter().map(|i| points[i].to_vec()).collect()
}

/// Lloyd iterations from the given centroids. Empty clusters are reseeded
/// with the point farthest from its centroid; clusters still empty at the
/// end are dropped.
pub fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>) -> KMeansResult {
    let n = points.len();
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centroids);
            dists[i] = d;
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        let mut counts = vec![0usize; centroids.len()];
        for &a in &assignment {
            counts[a] += 1;
        }
        for j in 0..centroids.len() {
            if counts[j] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assignment[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    if dists[i] > 0.0 {
                        counts[assignment[i]] -= 1;
                        assignment[i] = j;
                        counts[j] = 1;
                        dists[i] = 0.0;
                        changed = true;
                    }
                }
            }
        }
        for (j, c) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64]> = points
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == j)
                .map(|(p, _)| *p)
                .collect();
            if !members.is_empty() {
                *c = centroid(&members);
            }
        }
        if !changed {
            break;
        }
    }
    finish(points, centroids, assignment)
}

fn finish(points: &[&[f64]], centroids: Vec<Vec<f64>>, assignment: Vec<usize>) -> KMeansResult {
    let mut remap = vec![usize::MAX; centroids.len()];
    let mut kept = Vec::new();
    for (j, c) in centroids.into_iter().enumerate() {
        if assignment.contains(&j) {
            remap[j] = kept.len();
            kept.push(c);
        }
    }
    let assignment: Vec<usize> = assignment.iter().map(|&a| remap[a]).collect();
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| sq_dist(p, &kept[a]))
        .sum();
    KMeansResult {
        centroids: kept,
        assignment,
        inertia,
    }
}

pub fn kmeans<R: Rng + ?Sized>(points: &[&[f64]], k: usize, rng: &mut R) -> KMeansResult {
    let init = plus_plus_init(points, k, rng);
    lloyd(points, init)
}

/// Random k-means++ restarts tried when splitting a cluster in two.
pub const SPLIT_RESTARTS: usize = 4;

/// Best two-way split of `points` by inertia, over the optional `init` and
/// [`SPLIT_RESTARTS`] k-means++ restarts. Earlier candidates win ties. A
/// single 2-means run often cuts one dense group in half when three groups
/// lie in a row; restarts avoid locking that in.
pub fn two_means<R: Rng + ?Sized>(
    points: &[&[f64]],
    init: Option<Vec<Vec<f64>>>,
    rng: &mut R,
) -> KMeansResult {
    let mut best: Option<KMeansResult> = init.map(|c| lloyd(points, c));
    for _ in 0..SPLIT_RESTARTS {
        let cand = kmeans(points, 2, rng);
        let better = match &best {
            None => true,
            Some(b) => cand.k() == 2 && (b.k() < 2 || cand.inertia < b.inertia),
        };
        if better {
            best = Some(cand);
        }
    }
    best.expect("at least one candidate")
}
