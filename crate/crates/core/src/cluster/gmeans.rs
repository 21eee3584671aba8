//! G-means: grow k by splitting any cluster whose points, projected onto the
//! axis joining its two k-means children, fail an Anderson–Darling normality
//! test.

use std::collections::HashSet;

use rand::Rng;
use statrs::function::erf::erfc;

use super::kmeans::{lloyd, two_means, KMeansResult};
use super::{centroid, sq_dist};

/// Clusters smaller than this are never tested for a split.
const MIN_TEST_SIZE: usize = 8;

/// Standard normal CDF.
fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Anderson–Darling statistic with the small-sample correction for
/// estimated mean and variance, `A*² = A²(1 + 4/n - 25/n²)`. Returns `None`
/// for samples that are too small or have zero variance.
pub fn anderson_darling(sample: &[f64]) -> Option<f64> {
    let n = sample.len();
    if n < MIN_TEST_SIZE {
        return None;
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if !(var > 0.0) {
        return None;
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = sample.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let eps = 1e-15;
    let mut s = 0.0;
    for i in 0..n {
        let lo = phi(z[i]).clamp(eps, 1.0 - eps);
        let hi = phi(z[n - 1 - i]).clamp(eps, 1.0 - eps);
        s += (2.0 * i as f64 + 1.0) * (lo.ln() + (1.0 - hi).ln());
    }
    let a2 = -nf - s / nf;
    Some(a2 * (1.0 + 4.0 / nf - 25.0 / (nf * nf)))
}

/// Approximate p-value of the corrected statistic (D'Agostino & Stephens).
pub fn ad_p_value(a: f64) -> f64 {
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    p.clamp(0.0, 1.0)
}

/// Leading principal direction and its eigenvalue via power iteration.
fn principal_component<R: Rng + ?Sized>(points: &[&[f64]], mean: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let dim = mean.len();
    let n = points.len() as f64;
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut next = vec![0.0; dim];
        for p in points {
            let proj: f64 = p.iter().zip(mean).zip(&v).map(|((x, m), vi)| (x - m) * vi).sum();
            for ((acc, x), m) in next.iter_mut().zip(p.iter()).zip(mean) {
                *acc += proj * (x - m);
            }
        }
        next.iter_mut().for_each(|x| *x /= n);
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (v, 0.0);
        }
        let converged = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a / norm - b).abs())
            .fold(0.0, f64::max)
            < 1e-10;
        v = next.iter().map(|x| x / norm).collect();
        lambda = norm;
        if converged {
            break;
        }
    }
    (v, lambda)
}

/// Try to split one cluster; returns the two child centroids when the
/// projection along the child axis is non-normal at level `alpha`.
fn try_split<R: Rng + ?Sized>(sub: &[&[f64]], alpha: f64, rng: &mut R) -> Option<Vec<Vec<f64>>> {
    if sub.len() < MIN_TEST_SIZE {
        return None;
    }
    let c = centroid(sub);
    let (dir, lambda) = principal_component(sub, &c, rng);
    if lambda <= 0.0 {
        return None;
    }
    let scale = (2.0 * lambda / std::f64::consts::PI).sqrt();
    let init = vec![
        c.iter().zip(&dir).map(|(x, d)| x + d * scale).collect::<Vec<_>>(),
        c.iter().zip(&dir).map(|(x, d)| x - d * scale).collect(),
    ];
    let children = two_means(sub, Some(init), rng);
    if children.k() < 2 {
        return None;
    }
    let axis: Vec<f64> = children.centroids[0]
        .iter()
        .zip(&children.centroids[1])
        .map(|(a, b)| a - b)
        .collect();
    let axis_sq = sq_dist(&children.centroids[0], &children.centroids[1]);
    if axis_sq == 0.0 {
        return None;
    }
    let projected: Vec<f64> = sub
        .iter()
        .map(|p| p.iter().zip(&axis).map(|(x, a)| x * a).sum::<f64>() / axis_sq)
        .collect();
    let stat = anderson_darling(&projected)?;
    (ad_p_value(stat) < alpha).then_some(children.centroids)
}

/// Run G-means from a single cluster at significance `alpha`. A cluster that
/// passed the normality test is not re-tested until its membership changes.
pub fn gmeans<R: Rng + ?Sized>(points: &[&[f64]], alpha: f64, rng: &mut R) -> KMeansResult {
    let mut model = lloyd(points, vec![centroid(points)]);
    let mut accepted: HashSet<Vec<usize>> = HashSet::new();
    loop {
        let mut centroids = Vec::new();
        let mut grew = false;
        for j in 0..model.k() {
            let members = model.members(j);
            if accepted.contains(&members) {
                centroids.push(model.centroids[j].clone());
                continue;
            }
            let sub: Vec<&[f64]> = members.iter().map(|&i| points[i]).collect();
            match try_split(&sub, alpha, rng) {
                Some(children) => {
                    centroids.extend(children);
                    grew = true;
                }
                None => {
                    accepted.insert(members);
                    centroids.push(model.centroids[j].clone());
                }
            }
        }
        if !grew || centroids.len() >= points.len() {
            break;
        }
        let before = model.k();
        model = lloyd(points, centroids);
        if model.k() <= before {
            break;
        }
    }
    model
}
