//! Tail bound on the KL divergence between an n-sample empirical
//! distribution over k categories and the true distribution,
//!
//! ```text
//! P(D(g_{n,k} || f) >= eps) <= e^{-n eps} * (3 c1 / c2) * Σ_{i=0}^{k-2} K_{i-1} (e sqrt(n) / 2π)^i
//! ```
//!
//! with `K_{i-1}` the volume of the unit ball in `R^i` (`K_{-1} = 1`), plus a
//! Monte-Carlo estimator of the same tail probability used to check it.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::answer::CategoricalDistribution;
use crate::error::{Error, Result};
use crate::seeding::rng_for;

/// Leading constants of the bound.
///
/// Defaults: `c1 = e / sqrt(2π)` and `c2 = 1`, the Stirling-ratio constants
/// of the multinomial-coefficient estimate the bound is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c1: std::f64::consts::E / (2.0 * std::f64::consts::PI).sqrt(),
            c2: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: u64,
    pub k: usize,
    pub epsilon: f64,
    pub constants: BoundConstants,
}

impl BoundParams {
    pub fn new(n: u64, k: usize, epsilon: f64) -> Self {
        BoundParams {
            n,
            k,
            epsilon,
            constants: BoundConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.k < 2 {
            return Err(Error::Config("k must be at least 2".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.constants.c1 > 0.0 && self.constants.c2 > 0.0) {
            return Err(Error::Config("bound constants must be positive".into()));
        }
        Ok(())
    }
}

/// ln of the unit-ball volume in R^d, `π^{d/2} / Γ(d/2 + 1)`.
fn ln_unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)
}

/// Natural log of the unclamped bound.
pub fn ln_kl_tail_bound(params: &BoundParams) -> Result<f64> {
    params.validate()?;
    let n = params.n as f64;
    let base = (std::f64::consts::E * n.sqrt() / (2.0 * std::f64::consts::PI)).ln();
    let terms: Vec<f64> = (0..=params.k - 2)
        .map(|i| ln_unit_ball_volume(i) + i as f64 * base)
        .collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    let c = params.constants;
    Ok(-n * params.epsilon + (3.0 * c.c1 / c.c2).ln() + lse)
}

/// The bound as a probability, capped at 1.
pub fn kl_tail_bound(params: &BoundParams) -> Result<f64> {
    Ok(ln_kl_tail_bound(params)?.exp().min(1.0))
}

/// Smallest n from which the bound is strictly decreasing in n. Each term
/// scales as `e^{-nε} n^{i/2}`, whose log-derivative `-ε + i/(2n)` is
/// negative for all `i <= k-2` once `n > (k-2)/(2ε)`.
pub fn monotone_from(k: usize, epsilon: f64) -> u64 {
    ((k.saturating_sub(2)) as f64 / (2.0 * epsilon)).floor() as u64 + 1
}

/// Smallest n whose bound is at most `target`.
pub fn min_samples(k: usize, epsilon: f64, target: f64, constants: BoundConstants) -> Result<u64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Config("target must lie in (0, 1]".into()));
    }
    let bound = |n: u64| {
        kl_tail_bound(&BoundParams {
            n,
            k,
            epsilon,
            constants,
        })
    };
    let n0 = monotone_from(k, epsilon);
    for n in 1..=n0 {
        if bound(n)? <= target {
            return Ok(n);
        }
    }
    // Strictly decreasing past n0: exponential then binary search.
    let mut lo = n0;
    let mut hi = n0.max(1) * 2;
    while bound(hi)? > target {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::Config("target unreachable".into()))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One `(n, bound)` row per n in `range`, for plotting.
pub fn bound_curve(
    range: std::ops::RangeInclusive<u64>,
    k: usize,
    epsilon: f64,
    constants: BoundConstants,
) -> Result<Vec<(u64, f64)>> {
    range
        .map(|n| {
            kl_tail_bound(&BoundParams {
                n,
                k,
                epsilon,
                constants,
            })
            .map(|b| (n, b))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub probability: f64,
    /// Binomial standard error `sqrt(p(1-p)/trials)`.
    pub standard_error: f64,
    pub trials: usize,
    pub hits: usize,
}

pub const MIN_TRIALS: usize = 1000;

/// `D(empirical || truth)` with `0 log 0 = 0`.
pub fn empirical_kl(counts: &[u64], truth: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .zip(truth)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &t)| {
            let g = c as f64 / n;
            g * (g / t).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Multinomial draw by sequential conditional binomials.
fn multinomial<R: rand::Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == probs.len() - 1 || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let c = Binomial::new(remaining, q).map_or(0, |b| b.sample(rng));
        counts[i] = c;
        remaining -= c;
        mass -= p;
    }
    counts
}

/// Fraction of `trials` n-sample empirical distributions whose KL from
/// `truth` is at least `epsilon`. Trials run in parallel with per-trial
/// seeds derived from `seed`, so the estimate is reproducible.
pub fn kl_tail_monte_carlo(
    truth: &CategoricalDistribution,
    n: u64,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<TailEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!("at least {MIN_TRIALS} trials required")));
    }
    if n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let probs = truth.probs();
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = rng_for(seed, &[b"kl-tail", &(t as u64).to_le_bytes()]);
            let counts = multinomial(n, probs, &mut rng);
            empirical_kl(&counts, probs) >= epsilon
        })
        .count();
    let p = hits as f64 / trials as f64;
    Ok(TailEstimate {
        probability: p,
        standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
        hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(k: usize) -> CategoricalDistribution {
        CategoricalDistribution::uniform((0..k).map(|i| format!("c{i}")).collect()).unwrap()
    }

    #[test]
    fn ball_volumes() {
        let v: Vec<f64> = (0..4).map(|d| ln_unit_ball_volume(d).exp()).collect();
        let pi = std::f64::consts::PI;
        for (got, want) in v.iter().zip([1.0, 2.0, pi, 4.0 * pi / 3.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    /// Direct (non-log) evaluation for small inputs as an independent check.
    #[test]
    fn log_space_matches_direct_sum() {
        let c = BoundConstants::default();
        for &(n, k, eps) in &[(10u64, 3usize, 0.1), (50, 5, 0.2), (100, 8, 0.2)] {
            let x = std::f64::consts::E * (n as f64).sqrt() / (2.0 * std::f64::consts::PI);
            let pi = std::f64::consts::PI;
            // Unit-ball volumes by the two-step recurrence V_d = 2π/d V_{d-2}.
            let mut vol = vec![1.0, 2.0];
            for d in 2..k {
                vol.push(2.0 * pi / d as f64 * vol[d - 2]);
            }
            let sum: f64 = (0..=k - 2).map(|i| vol[i] * x.powi(i as i32)).sum();
            let direct = (-(n as f64) * eps).exp() * 3.0 * c.c1 / c.c2 * sum;
            let got = ln_kl_tail_bound(&BoundParams::new(n, k, eps)).unwrap().exp();
            assert!((got / direct - 1.0).abs() < 1e-10, "{got} vs {direct}");
        }
    }

    #[test]
    fn hundred_samples_eight_categories() {
        let b = kl_tail_bound(&BoundParams::new(100, 8, 0.2)).unwrap();
        assert!(b < 0.05, "{b}");
    }

    #[test]
    fn large_epsilon_drives_bound_to_zero() {
        let b = kl_tail_bound(&BoundParams::new(100, 8, 50.0)).unwrap();
        assert!(b < 1e-300 || b == 0.0);
    }

    #[test]
    fn decreasing_past_n0() {
        let n0 = monotone_from(8, 0.2);
        assert_eq!(n0, 16);
        let mut prev = f64::INFINITY;
        for n in n0..600 {
            let b = ln_kl_tail_bound(&BoundParams::new(n, 8, 0.2)).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn min_samples_contract() {
        let c = BoundConstants::default();
        let n = min_samples(8, 0.2, 0.05, c).unwrap();
        assert!(n <= 100, "{n}");
        let at = |n| kl_tail_bound(&BoundParams::new(n, 8, 0.2)).unwrap();
        assert!(at(n) <= 0.05);
        assert!(at(n - 1) > 0.05);
        assert_eq!(min_samples(8, 0.2, 1.0, c).unwrap(), 1);
        assert!(min_samples(8, 0.2, 0.0, c).is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(kl_tail_bound(&BoundParams::new(0, 8, 0.2)).is_err());
        assert!(kl_tail_bound(&BoundParams::new(10, 1, 0.2)).is_err());
        assert!(kl_tail_bound(&BoundParams::new(10, 8, 0.0)).is_err());
    }

    #[test]
    fn multinomial_conserves_total() {
        let mut rng = rng_for(3, &[]);
        for _ in 0..100 {
            let c = multinomial(57, &[0.1, 0.2, 0.3, 0.4], &mut rng);
            assert_eq!(c.iter().sum::<u64>(), 57);
        }
    }

    #[test]
    fn empirical_kl_handles_empty_cells() {
        assert_eq!(empirical_kl(&[5, 5], &[0.5, 0.5]), 0.0);
        let v = empirical_kl(&[10, 0], &[0.5, 0.5]);
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_epsilon_always_hits() {
        let est = kl_tail_monte_carlo(&uniform(4), 20, 0.0, 1000, 1).unwrap();
        assert_eq!(est.probability, 1.0);
    }

    #[test]
    fn too_few_trials_rejected() {
        assert!(kl_tail_monte_carlo(&uniform(4), 20, 0.1, 10, 1).is_err());
    }
}
