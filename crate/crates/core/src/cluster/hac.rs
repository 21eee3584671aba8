//! Ward-linkage agglomerative clustering over Euclidean distance.
//!
//! Uses the Lance–Williams update on squared distances. Merge heights follow
//! the usual convention `sqrt(2 n_a n_b / (n_a + n_b)) * |c_a - c_b|`, which
//! is non-decreasing along the merge sequence.

use super::sq_dist;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Representative ids (smallest original point index) of the two sides.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Size of the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Apply merges while more than `k` clusters remain, then keep applying
    /// zero-height merges so coincident points always end up together.
    pub fn cut_count(&self, k: usize) -> Vec<usize> {
        let mut applied = 0;
        let mut clusters = self.n;
        for m in &self.merges {
            if clusters > k || m.height <= ZERO_HEIGHT {
                applied += 1;
                clusters -= 1;
            } else {
                break;
            }
        }
        self.labels_after(applied)
    }

    /// Apply every merge with height at most `threshold`.
    pub fn cut_height(&self, threshold: f64) -> Vec<usize> {
        let applied = self
            .merges
            .iter()
            .take_while(|m| m.height <= threshold || m.height <= ZERO_HEIGHT)
            .count();
        self.labels_after(applied)
    }

    /// Group id per point after the first `applied` merges; ids are the
    /// smallest point index in each group.
    fn labels_after(&self, applied: usize) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in &self.merges[..applied] {
            let a = find(&mut parent, m.left);
            let b = find(&mut parent, m.right);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
        (0..self.n).map(|i| find(&mut parent, i)).collect()
    }
}

const ZERO_HEIGHT: f64 = 1e-12;

/// Build the full Ward dendrogram. O(n^3) time, O(n^2) memory; fine for the
/// answer-set sizes this crate deals with (hundreds of points).
pub fn ward(points: &[&[f64]]) -> Dendrogram {
    let n = points.len();
    // Squared Ward "distance", i.e. height^2.
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sq_dist(points[i], points[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for _ in 1..n {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && d[i][j] < best.2 {
                    best = (i, j, d[i][j]);
                }
            }
        }
        let (a, b, dab) = best;
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((na + nk) * d[a][k] + (nb + nk) * d[b][k] - nk * dab) / (na + nb + nk);
            let v = v.max(0.0);
            d[a][k] = v;
            d[k][a] = v;
        }
        active[b] = false;
        size[a] += size[b];
        merges.push(Merge {
            left: a,
            right: b,
            height: dab.max(0.0).sqrt(),
            size: size[a],
        });
    }
    Dendrogram { n, merges }
}
