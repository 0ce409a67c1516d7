//! Choosing the LAP penalties, and the computable theory constants.
//!
//! The plug-in rule estimates the largest diagonal residual, the projection
//! mismatch term `η_op` (with `‖Y‖²` standing in for the unknown signal
//! bound) and the objective gap `Δ_F` around the unpenalised LAP solution,
//! then spends 90% of the remaining budget `Δ_F/(2k) − η_op`, split evenly
//! between `λ₁` and `λ₂·B_diag`.
//!
//! At moderate `n` the plug-in `η_op` is large (often infinite, when its
//! denominator is not positive) and the budget collapses to zero, which
//! leaves the LAP unpenalised. [`PenaltyRule::Auto`] keeps the plug-in budget
//! when it is positive and otherwise falls back to a noise-scaled budget
//! `4σ̂² ln n`, with `σ̂` the MAD scale of `Y − m̂`.

use std::f64::consts::{E, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::surrogate_from_fit;
use crate::candidates::{DesignVariant, ReproProblem};
use crate::error::{Error, Result};
use crate::numerics::linalg::{norm_sq, residual_norm_sq, Matrix};
use crate::numerics::RngStream;
use crate::permutation::{PermutationClass, SparsePermutation};
use crate::report::extended_float;

pub const DEFAULT_XI: f64 = 0.05;
pub const DEFAULT_SWAPS: usize = 50;
pub const SAFETY_FACTOR: f64 = 0.9;
/// Multiplier `c` in the fallback budget `c·σ̂²·ln n`.
pub const NOISE_FLOOR_MULTIPLIER: f64 = 4.0;
const B_DIAG_FLOOR: f64 = 1e-12;
const MAD_SCALE: f64 = 1.4826;
/// Classes larger than this are refused by the brute-force diagnostics.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyRule {
    /// Plug-in budget, with the noise-scaled fallback when it is zero.
    Auto,
    /// The plug-in budget as is.
    PlugIn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningSettings {
    pub rule: PenaltyRule,
    pub xi: f64,
    pub n_swaps: usize,
}

impl Default for TuningSettings {
    fn default() -> Self {
        Self {
            rule: PenaltyRule::Auto,
            xi: DEFAULT_XI,
            n_swaps: DEFAULT_SWAPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub rule: PenaltyRule,
    pub b_diag_hat: f64,
    #[serde(with = "extended_float")]
    pub eta_op_hat: f64,
    pub delta_f_hat: f64,
    /// `0.9·(Δ̂_F/(2k) − η̂_op)₊`.
    pub budget_b: f64,
    /// MAD scale of `Y − m̂`.
    pub sigma_hat: f64,
    /// `4σ̂² ln n`.
    pub noise_floor: f64,
    /// Budget actually split between the penalties.
    pub effective_budget: f64,
    pub floor_applied: bool,
    pub lam1: f64,
    pub lam2: f64,
    pub xi: f64,
    pub swaps_tried: usize,
    /// `λ₁ + λ₂·B̂_diag + η̂_op < Δ̂_F/(2k)`.
    pub window_ok: bool,
    /// Every occurrence of the unknown signal bound in `η_op` is replaced by `‖Y‖²`.
    pub b_y_substitution: String,
}

/// `η_op` for a given signal bound; `+∞` when the denominator is not positive.
pub fn eta_op(n: usize, p: usize, k: usize, xi: f64, b_y: f64) -> f64 {
    let l4 = ((4 * k + 2) as f64 / xi).ln();
    let kk = k as f64 + 2.0 * (k as f64 * l4).sqrt() + 2.0 * l4;
    let dof = n as f64 - p as f64;
    let inner = dof - 2.0 * (dof * (2.0 / xi).ln()).sqrt();
    if !(inner > 0.0) {
        return f64::INFINITY;
    }
    let denom = inner.sqrt() - 2.0 * kk.sqrt();
    if !(denom > 0.0) {
        return f64::INFINITY;
    }
    8.0 * b_y * kk.sqrt() / denom
}

/// Plug-in penalties for the plain design.
pub fn select_lambdas(
    y: &[f64],
    x: &Matrix,
    ustar: &[f64],
    k: usize,
    xi: f64,
    rng: &RngStream,
    n_swaps: usize,
) -> Result<TuningReport> {
    let problem = ReproProblem::new(y, x, DesignVariant::Plain)?;
    let settings = TuningSettings {
        rule: PenaltyRule::PlugIn,
        xi,
        n_swaps,
    };
    tune(&problem, ustar, k, &settings, rng)
}

/// Penalties for one repro draw of any design variant.
pub fn tune(
    problem: &ReproProblem,
    ustar: &[f64],
    k: usize,
    settings: &TuningSettings,
    rng: &RngStream,
) -> Result<TuningReport> {
    let xi = settings.xi;
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::Domain(format!("xi must lie in (0, 1), got {xi}")));
    }
    if settings.n_swaps == 0 {
        return Err(Error::Domain("need at least one swap".into()));
    }
    let y = problem.response();
    let n = y.len();
    let m = problem.fit(ustar)?;
    let resid: Vec<f64> = y.iter().zip(&m).map(|(a, b)| a - b).collect();
    let b_diag_hat = resid.iter().map(|r| r * r).fold(0.0, f64::max);
    let eta_op_hat = eta_op(n, problem.fitted_columns(), k, xi, norm_sq(y));

    let base = surrogate_from_fit(y, &m, 0.0, 0.0, n)?.permutation;
    let f_base = problem.objective(&base, ustar)?;
    let mut gen = rng.generator();
    let base_images = base.images();
    let mut delta_f_hat = f64::INFINITY;
    for _ in 0..settings.n_swaps {
        let a = gen.random_range(0..n);
        let mut b = gen.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let mut images = base_images.clone();
        images.swap(a, b);
        let swapped = SparsePermutation::from_images(&images)?;
        let diff = problem.objective(&swapped, ustar)? - f_base;
        if diff > 0.0 && diff < delta_f_hat {
            delta_f_hat = diff;
        }
    }
    if !delta_f_hat.is_finite() {
        delta_f_hat = 0.0;
    }

    let per_move = if k == 0 {
        0.0
    } else {
        delta_f_hat / (2.0 * k as f64)
    };
    let budget_b = SAFETY_FACTOR * (per_move - eta_op_hat).max(0.0);
    let sigma_hat = MAD_SCALE * median_abs(&resid);
    let noise_floor = NOISE_FLOOR_MULTIPLIER * sigma_hat * sigma_hat * (n as f64).ln();
    let (effective_budget, floor_applied) = match settings.rule {
        PenaltyRule::PlugIn => (budget_b, false),
        PenaltyRule::Auto if budget_b >= noise_floor => (budget_b, false),
        PenaltyRule::Auto => (noise_floor, true),
    };
    let lam1 = effective_budget / 2.0;
    let lam2 = effective_budget / (2.0 * b_diag_hat.max(B_DIAG_FLOOR));
    let window_ok = lam1 + lam2 * b_diag_hat + eta_op_hat < per_move;

    Ok(TuningReport {
        rule: settings.rule,
        b_diag_hat,
        eta_op_hat,
        delta_f_hat,
        budget_b,
        sigma_hat,
        noise_floor,
        effective_budget,
        floor_applied,
        lam1,
        lam2,
        xi,
        swaps_tried: settings.n_swaps,
        window_ok,
        b_y_substitution: "all".into(),
    })
}

fn median_abs(v: &[f64]) -> f64 {
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    if n % 2 == 1 {
        a[n / 2]
    } else {
        0.5 * (a[n / 2 - 1] + a[n / 2])
    }
}

/// Theory constants at the true parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub c_min: f64,
    pub b_y: f64,
    pub b_diag: f64,
    #[serde(with = "extended_float")]
    pub eta_op: f64,
    pub delta_under: f64,
    pub xi: f64,
}

/// `C_min(Π₀)` by enumeration of `P(n, k) \ {Π₀}`.
pub fn c_min_bruteforce(
    x: &Matrix,
    beta0: &[f64],
    pi0: &SparsePermutation,
    k: usize,
) -> Result<f64> {
    let n = x.rows();
    let signal = pi0.apply(&x.mul_vec(beta0)?)?;
    let d0 = pi0.hamming_distance();
    let mut best = f64::INFINITY;
    for pi in PermutationClass::new(n, k)?.enumerate_with_limit(BRUTE_FORCE_LIMIT)? {
        if &pi == pi0 {
            continue;
        }
        let num = residual_norm_sq(&pi.apply_rows(x)?, &signal)?;
        let denom = n as f64 * (d0.saturating_sub(pi.hamming_distance()).max(1)) as f64;
        best = best.min(num / denom);
    }
    Ok(if best.is_finite() { best } else { 0.0 })
}

/// All theory constants for a known instance.
pub fn theory_constants(
    x: &Matrix,
    beta0: &[f64],
    pi0: &SparsePermutation,
    sigma0: f64,
    k: usize,
    xi: f64,
) -> Result<TheoryConstants> {
    let (n, p) = (x.rows(), x.cols());
    if !(xi > 0.0 && xi < 1.0) || sigma0 < 0.0 || n < p + 2 {
        return Err(Error::Domain(format!(
            "need xi in (0,1), sigma0 >= 0, n >= p + 2 (n = {n}, p = {p})"
        )));
    }
    let c_min = c_min_bruteforce(x, beta0, pi0, k)?;
    let signal = pi0.apply(&x.mul_vec(beta0)?)?;
    let s = norm_sq(&signal).sqrt();
    let nf = n as f64;
    let l2 = (2.0 / xi).ln();
    let b_y = s * s
        + 2.0 * sigma0 * s * (2.0 * l2).sqrt()
        + sigma0 * sigma0 * (nf + 2.0 * (nf * l2).sqrt() + 2.0 * l2);
    let off = residual_norm_sq(x, &signal)?;
    let l16 = (16.0 * nf / xi).ln();
    let b_diag = off
        + sigma0 * sigma0
        + 2.0 * sigma0 * off.sqrt() * (2.0 * l16).sqrt()
        + 2.0 * sigma0 * sigma0 * (l16.sqrt() + l16);
    let m_k = PermutationClass::new(n, k)?.count()? as f64;
    let theta1 = (xi / (6.0 * m_k)).powf(1.0 / (nf - p as f64 - 1.0));
    let gamma1 = theta1.cos();
    let l6 = (6.0 / xi).ln();
    let b_u = 1.0 + 2.0 * (l6 / nf).sqrt() + 2.0 * l6 / nf;
    let delta_under = (1.0 - gamma1 * gamma1) * c_min
        - 2.0 * sigma0 * (c_min * b_u).sqrt()
        - sigma0 * sigma0 * b_u;
    Ok(TheoryConstants {
        c_min,
        b_y,
        b_diag,
        eta_op: eta_op(n, p, k, xi, b_y),
        delta_under,
        xi,
    })
}

fn psi(x: f64) -> f64 {
    x - 1.0 - x.ln()
}

/// `Δ(γ)`, the non-alignment part of the candidate-set miss bound.
pub fn delta_gamma_bound(
    n: usize,
    p: usize,
    k: usize,
    sigma0: f64,
    c_min: f64,
    gamma: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 0.25) {
        return Err(Error::Domain(format!(
            "gamma must lie in (0, 1/4], got {gamma}"
        )));
    }
    if !(c_min > 0.0) || !(sigma0 > 0.0) || n < p + 2 {
        return Err(Error::Domain(format!(
            "need c_min > 0, sigma0 > 0, n > p + 1 (c_min = {c_min}, sigma0 = {sigma0}, n = {n}, p = {p})"
        )));
    }
    let count = PermutationClass::new(n, k)?.count()? as f64;
    let nf = n as f64;
    let log_e_g = (E / gamma).ln();
    let r1 = (c_min * log_e_g / (2.0 * sigma0 * sigma0 * gamma)).max(1.0);
    let r2 = (c_min * log_e_g * log_e_g / (16.0 * sigma0 * sigma0)).max(1.0);
    let exp_part = count * ((-0.5 * nf * psi(r1)).exp() + (-0.5 * nf * psi(r2)).exp());
    let q = (n - p) as f64;
    let log_tail =
        (q - 2.0) * (PI / 2.0).ln() + count.ln() + 0.5 * (q - 1.0) * (gamma * log_e_g).ln();
    Ok(exp_part + log_tail.exp())
}

/// `γ_L = min{1/4, ((n−1) ln(eL)/L)^{1/(n−1)}}`.
pub fn gamma_l(n: usize, l: usize) -> f64 {
    let m = (n - 1) as f64;
    let lf = l as f64;
    (m * (E * lf).ln() / lf).powf(1.0 / m).min(0.25)
}

/// `δ_L = Δ(γ_L) + (1 − γ_L^{n−1}/(n−1))^L`.
pub fn delta_l_bound(
    n: usize,
    p: usize,
    k: usize,
    sigma0: f64,
    c_min: f64,
    l: usize,
) -> Result<f64> {
    if l < 2 || n < 2 {
        return Err(Error::Domain(format!(
            "need L >= 2 and n >= 2, got L = {l}, n = {n}"
        )));
    }
    let g = gamma_l(n, l);
    let x = g.powi(n as i32 - 1) / (n - 1) as f64;
    Ok(delta_gamma_bound(n, p, k, sigma0, c_min, g)? + (l as f64 * (-x).ln_1p()).exp())
}

/// Two coefficient vectors that fit the same noiseless response under
/// different permutations, for `n − 2k < p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub x: Matrix,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub pi1: SparsePermutation,
}

/// `Π₁Xβ₁ = Xβ₀` with `β₀ ≠ β₁` and `Π₁` a transposition of rows 0 and 1.
///
/// Rows 0 and 1 are `e₁ + e₂` and `e₂ − e₁`; every other row is a basis
/// vector with zero first coordinate (covering `e₂ … e_p`, then repeating
/// `e₂`), so `X` has full column rank and `X(β₀ − β₁)` vanishes off rows 0, 1.
pub fn counterexample(n: usize, p: usize, k: usize) -> Result<Counterexample> {
    if p == 0 || p >= n || k < 2 || n > p - 1 + 2 * k {
        return Err(Error::PreconditionViolated(format!(
            "need 1 <= p < n, k >= 2 and n - 2k <= p - 1 (n = {n}, p = {p}, k = {k})"
        )));
    }
    let pi1 = SparsePermutation::transposition(n, 0, 1)?;
    if p == 1 {
        let mut col = vec![0.0; n];
        col[0] = 1.0;
        col[1] = -1.0;
        return Ok(Counterexample {
            x: Matrix::from_columns(&[col])?,
            beta0: vec![1.0],
            beta1: vec![-1.0],
            pi1,
        });
    }
    let mut rows = vec![vec![0.0; p]; n];
    rows[0][0] = 1.0;
    rows[0][1] = 1.0;
    rows[1][0] = -1.0;
    rows[1][1] = 1.0;
    for (r, row) in rows.iter_mut().enumerate().skip(2) {
        let c = r - 1;
        row[if c < p { c } else { 1 }] = 1.0;
    }
    let mut beta0 = vec![0.0; p];
    let mut beta1 = vec![0.0; p];
    beta0[0] = -0.5;
    beta0[1] = 0.5;
    beta1[0] = 0.5;
    beta1[1] = 0.5;
    Ok(Counterexample {
        x: Matrix::from_rows(&rows)?,
        beta0,
        beta1,
        pi1,
    })
}
