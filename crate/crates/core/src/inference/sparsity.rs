//! Conditional Monte Carlo test of `H₀: d(Π₀, I) ≤ k₀`.
//!
//! The statistic is the number of rows moved by the best-fitting candidate.
//! Under a null permutation `Π` the pair `(M_{ΠX}Y, ‖(I − M_{ΠX})Y‖)` is
//! sufficient, and given it `Y` is uniform on a sphere in the residual
//! space; resampling that sphere calibrates the statistic without knowing
//! `β` or `σ`. The critical value is the largest calibrated quantile over the
//! null-compatible candidates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{localized_null, CandidateSet};
use crate::error::{Error, Result};
use crate::numerics::linalg::{check_len, norm_sq, Matrix, Qr};
use crate::numerics::{gaussian_vector, RngStream};
use crate::permutation::SparsePermutation;

/// Least-squares fits of every candidate, factored once.
pub struct CandidateFits<'a> {
    set: &'a CandidateSet,
    qrs: Vec<Qr>,
    /// Candidate indices sorted by (distance, enumeration order): the scan
    /// order that realises the tie-break.
    order: Vec<usize>,
}

impl<'a> CandidateFits<'a> {
    pub fn new(x: &Matrix, set: &'a CandidateSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        check_len(set.n, x.rows())?;
        let qrs = set
            .permutations()
            .map(|p| Qr::factor(&p.apply_rows(x)?))
            .collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.sort_by(|&a, &b| set.uniques[a].permutation.cmp(&set.uniques[b].permutation));
        Ok(Self { set, qrs, order })
    }

    /// Index of the best fit and its residual sum of squares.
    pub fn best(&self, y: &[f64]) -> (usize, f64) {
        let mut best = (self.order[0], f64::INFINITY);
        for &i in &self.order {
            let rss = self.qrs[i].residual_norm_sq(y);
            if rss < best.1 {
                best = (i, rss);
            }
        }
        best
    }

    pub fn statistic(&self, y: &[f64]) -> usize {
        self.set.uniques[self.best(y).0]
            .permutation
            .hamming_distance()
    }
}

/// `Π̂(Y)`: the candidate with the smallest residual sum of squares; ties go
/// to fewer moved rows, then to enumeration order.
pub fn best_fit_in_set(
    y: &[f64],
    x: &Matrix,
    cs: &CandidateSet,
) -> Result<(SparsePermutation, f64)> {
    check_len(x.rows(), y.len())?;
    let fits = CandidateFits::new(x, cs)?;
    let (i, rss) = fits.best(y);
    Ok((cs.uniques[i].permutation.clone(), rss))
}

/// `D(Y) = d(Π̂(Y), I)`.
pub fn test_statistic(y: &[f64], x: &Matrix, cs: &CandidateSet) -> Result<usize> {
    Ok(best_fit_in_set(y, x, cs)?.0.hamming_distance())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    /// `M_{ΠX}Y`.
    pub s1: Vec<f64>,
    /// `‖(I − M_{ΠX})Y‖`.
    pub s2: f64,
}

pub fn sufficient_stats(y: &[f64], x: &Matrix, p: &SparsePermutation) -> Result<SufficientStats> {
    check_len(x.rows(), y.len())?;
    let qr = Qr::factor(&p.apply_rows(x)?)?;
    let s1 = qr.project(y);
    let s2 = y
        .iter()
        .zip(&s1)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(SufficientStats { s1, s2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityTestConfig {
    pub k0: usize,
    /// Level; the test rejects with probability at most `alpha` under the null.
    pub alpha: f64,
    /// Monte Carlo size `M`.
    pub mc_draws: usize,
    pub seed: u64,
}

impl SparsityTestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.alpha * (self.mc_draws as f64 + 1.0) < 1.0 {
            return Err(Error::Domain(format!(
                "M = {} is too small to resolve the {} quantile; need alpha (M + 1) >= 1",
                self.mc_draws,
                1.0 - self.alpha
            )));
        }
        Ok(())
    }
}

/// Stream of the `m`-th synthetic response for null candidate `index`.
pub fn calibration_stream(seed: u64, index: usize, m: usize) -> RngStream {
    RngStream::new(seed, index as u64).derive(m as u64)
}

/// `Y*_m = s₁ + s₂ (I − M_{ΠX})u / ‖(I − M_{ΠX})u‖`.
pub fn synthetic_response(qr: &Qr, stats: &SufficientStats, rng: &RngStream) -> Vec<f64> {
    let n = stats.s1.len();
    let r = qr.residual(&gaussian_vector(rng, n));
    let scale = stats.s2 / norm_sq(&r).sqrt();
    stats
        .s1
        .iter()
        .zip(&r)
        .map(|(a, b)| a + scale * b)
        .collect()
}

/// The statistics `D*_1 … D*_M` under null candidate `null_pi`.
pub fn conditional_mc_statistics(
    y: &[f64],
    x: &Matrix,
    null_pi: &SparsePermutation,
    null_index: usize,
    cs: &CandidateSet,
    cfg: &SparsityTestConfig,
) -> Result<Vec<usize>> {
    let fits = CandidateFits::new(x, cs)?;
    mc_statistics(y, x, null_pi, null_index, &fits, cfg)
}

fn mc_statistics(
    y: &[f64],
    x: &Matrix,
    null_pi: &SparsePermutation,
    null_index: usize,
    fits: &CandidateFits,
    cfg: &SparsityTestConfig,
) -> Result<Vec<usize>> {
    check_len(x.rows(), y.len())?;
    let qr = Qr::factor(&null_pi.apply_rows(x)?)?;
    let s1 = qr.project(y);
    let s2 = y
        .iter()
        .zip(&s1)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let stats = SufficientStats { s1, s2 };
    Ok((0..cfg.mc_draws)
        .into_par_iter()
        .map(|m| {
            let y_star =
                synthetic_response(&qr, &stats, &calibration_stream(cfg.seed, null_index, m));
            fits.statistic(&y_star)
        })
        .collect())
}

/// 1-based rank of the conservative `(1 − α)` order statistic among `M`.
pub fn quantile_rank(alpha: f64, m: usize) -> usize {
    let r = ((1.0 - alpha) * (m as f64 + 1.0) - 1e-9).ceil() as usize;
    r.clamp(1, m.max(1))
}

/// The `⌈(1 − α)(M + 1)⌉`-th smallest of the calibration statistics.
pub fn mc_quantile(stats: &[usize], alpha: f64) -> usize {
    let mut s = stats.to_vec();
    s.sort_unstable();
    s[quantile_rank(alpha, s.len()) - 1]
}

pub fn conditional_mc_quantile(
    y: &[f64],
    x: &Matrix,
    null_pi: &SparsePermutation,
    cs: &CandidateSet,
    cfg: &SparsityTestConfig,
) -> Result<usize> {
    cfg.validate()?;
    Ok(mc_quantile(
        &conditional_mc_statistics(y, x, null_pi, 0, cs, cfg)?,
        cfg.alpha,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullQuantile {
    pub permutation: SparsePermutation,
    pub quantile: usize,
    /// `#{m : D*_m ≥ d_obs}`.
    pub exceedances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityTestReport {
    pub kind: String,
    pub config: SparsityTestConfig,
    pub candidate_set_size: usize,
    pub best_fit: SparsePermutation,
    pub d_obs: usize,
    /// Composite critical value; `-1` when the localised null set is empty.
    pub c_hat: i64,
    pub quantiles: Vec<NullQuantile>,
    /// Smallest level at which the test rejects.
    pub p_value: f64,
    pub reject: bool,
    pub null_set_size: usize,
    pub degenerate_null: bool,
}

/// Reject when `D(Y)` exceeds every null candidate's calibrated quantile.
///
/// The p-value is `max_Π (1 + #{D*_m ≥ d_obs}) / (M + 1)`, the smallest level
/// at which the rejection rule fires. An empty localised null set means no
/// candidate is compatible with `H₀`; the test then rejects and flags it.
pub fn sparsity_test(
    y: &[f64],
    x: &Matrix,
    cs: &CandidateSet,
    cfg: &SparsityTestConfig,
) -> Result<SparsityTestReport> {
    cfg.validate()?;
    check_len(x.rows(), y.len())?;
    let fits = CandidateFits::new(x, cs)?;
    let (best, _) = fits.best(y);
    let best_fit = cs.uniques[best].permutation.clone();
    let d_obs = best_fit.hamming_distance();
    let nulls = localized_null(cs, cfg.k0);
    let base = SparsityTestReport {
        kind: "sparsity-test".into(),
        config: *cfg,
        candidate_set_size: cs.len(),
        best_fit,
        d_obs,
        c_hat: -1,
        quantiles: Vec::new(),
        p_value: 0.0,
        reject: true,
        null_set_size: nulls.len(),
        degenerate_null: nulls.is_empty(),
    };
    if nulls.is_empty() {
        return Ok(base);
    }
    let mut quantiles = Vec::with_capacity(nulls.len());
    for (idx, pi) in nulls.into_iter().enumerate() {
        let stats = mc_statistics(y, x, &pi, idx, &fits, cfg)?;
        let exceedances = stats.iter().filter(|&&d| d >= d_obs).count();
        quantiles.push(NullQuantile {
            quantile: mc_quantile(&stats, cfg.alpha),
            exceedances,
            permutation: pi,
        });
    }
    let c_hat = quantiles
        .iter()
        .map(|q| q.quantile)
        .max()
        .expect("non-empty") as i64;
    let m1 = cfg.mc_draws as f64 + 1.0;
    let p_value = quantiles
        .iter()
        .map(|q| (1 + q.exceedances) as f64 / m1)
        .fold(0.0, f64::max);
    Ok(SparsityTestReport {
        c_hat,
        reject: d_obs as i64 > c_hat,
        p_value,
        quantiles,
        ..base
    })
}
