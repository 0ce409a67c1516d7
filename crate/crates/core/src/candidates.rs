//! Repro-sample localisation of the permutation.
//!
//! Each draw `ℓ` pairs the data with an artificial noise vector `u*_ℓ` and
//! finds the `k`-sparse permutation that best explains `Y` with `u*_ℓ` as an
//! extra regressor. The distinct winners form the candidate set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::surrogate_from_fit;
use crate::error::{Error, Result};
use crate::numerics::linalg::{check_len, Matrix, Qr};
use crate::numerics::{gaussian_vector, RngStream};
use crate::permutation::{PermutationClass, SparsePermutation};
use crate::tuning::{tune, TuningReport, TuningSettings, BRUTE_FORCE_LIMIT};

/// How the rows of the design enter the fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DesignVariant {
    Plain,
    /// Extra covariates `Z` whose rows are never permuted.
    Partial {
        z: Matrix,
    },
    /// Ridge penalty `λ‖β‖²`, fitted as least squares on `[X; √λ I]`.
    Ridge {
        lambda: f64,
    },
}

/// Response, design and variant, with the augmented pieces prebuilt.
#[derive(Clone, Debug)]
pub struct ReproProblem {
    y: Vec<f64>,
    x: Matrix,
    variant: DesignVariant,
    /// Ridge only: `(Y, 0_p)` and `[X; √λ I_p]`.
    augmented: Option<(Vec<f64>, Matrix)>,
}

impl ReproProblem {
    pub fn new(y: &[f64], x: &Matrix, variant: DesignVariant) -> Result<Self> {
        let n = x.rows();
        check_len(n, y.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        let mut augmented = None;
        let mut fitted = x.cols();
        match &variant {
            DesignVariant::Plain => {}
            DesignVariant::Partial { z } => {
                if z.rows() != n {
                    return Err(Error::DimMismatch(format!(
                        "Z has {} rows, X has {n}",
                        z.rows()
                    )));
                }
                Qr::factor(z)?;
                fitted += z.cols();
            }
            DesignVariant::Ridge { lambda } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::Domain(format!(
                        "ridge lambda must be positive, got {lambda}"
                    )));
                }
                let p = x.cols();
                let root = lambda.sqrt();
                let pad = Matrix::new(
                    p,
                    p,
                    (0..p * p)
                        .map(|i| if i % (p + 1) == 0 { root } else { 0.0 })
                        .collect(),
                )?;
                let mut y_aug = y.to_vec();
                y_aug.resize(n + p, 0.0);
                augmented = Some((y_aug, x.vstack(&pad)?));
            }
        }
        if n < fitted + 2 {
            return Err(Error::PreconditionViolated(format!(
                "need n > {} + 1 rows, got {n}",
                fitted
            )));
        }
        Ok(Self {
            y: y.to_vec(),
            x: x.clone(),
            variant,
            augmented,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self) -> &Matrix {
        &self.x
    }

    pub fn variant(&self) -> &DesignVariant {
        &self.variant
    }

    /// Number of regression coefficients besides the repro column.
    pub fn fitted_columns(&self) -> usize {
        match &self.variant {
            DesignVariant::Partial { z } => self.x.cols() + z.cols(),
            _ => self.x.cols(),
        }
    }

    fn design_for(&self, pi: &SparsePermutation, ustar: &[f64]) -> Result<(Matrix, &[f64])> {
        check_len(self.n(), ustar.len())?;
        Ok(match (&self.variant, &self.augmented) {
            (DesignVariant::Ridge { .. }, Some((y_aug, x_aug))) => {
                let n = self.n();
                let p = self.x.cols();
                let mut u_aug = ustar.to_vec();
                u_aug.resize(n + p, 0.0);
                (
                    pi.extend(n + p).apply_rows(x_aug)?.with_column(&u_aug)?,
                    y_aug.as_slice(),
                )
            }
            (DesignVariant::Partial { z }, _) => (
                pi.apply_rows(&self.x)?.hstack(z)?.with_column(ustar)?,
                &self.y,
            ),
            _ => (pi.apply_rows(&self.x)?.with_column(ustar)?, &self.y),
        })
    }

    /// The repro objective `F(Π)` for this variant.
    pub fn objective(&self, pi: &SparsePermutation, ustar: &[f64]) -> Result<f64> {
        let (design, target) = self.design_for(pi, ustar)?;
        Ok(Qr::factor(&design)?.residual_norm_sq(target))
    }

    /// `m`, the unpermuted fit of `Y` including `u*`; first `n` rows only.
    pub fn fit(&self, ustar: &[f64]) -> Result<Vec<f64>> {
        let (design, target) = self.design_for(&SparsePermutation::identity(self.n()), ustar)?;
        let mut m = Qr::factor(&design)?.project(target);
        m.truncate(self.n());
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Penalties {
    /// Tuned per draw.
    Tuned(TuningSettings),
    Fixed {
        lam1: f64,
        lam2: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    SurrogateLap,
    BruteForce,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproConfig {
    pub draws: usize,
    pub k: usize,
    pub penalties: Penalties,
    pub solver: Solver,
    pub seed: u64,
}

impl ReproConfig {
    pub fn new(draws: usize, k: usize, seed: u64) -> Self {
        Self {
            draws,
            k,
            penalties: Penalties::Tuned(TuningSettings::default()),
            solver: Solver::SurrogateLap,
            seed,
        }
    }
}

/// The repro noise of draw `ℓ` (1-based).
pub fn repro_noise(seed: u64, draw: usize, n: usize) -> Vec<f64> {
    gaussian_vector(&RngStream::new(seed, draw as u64), n)
}

/// Stream for the swap search when tuning draw `ℓ`.
pub fn tuning_stream(seed: u64, draw: usize) -> RngStream {
    RngStream::new(seed, draw as u64).derive(0x7475_6e65)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub permutation: SparsePermutation,
    pub multiplicity: usize,
    /// Smallest repro objective among the draws that chose it.
    pub min_objective: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    /// Draw index `ℓ`, also the stream id of `u*_ℓ`.
    pub draw: usize,
    /// Position of the chosen permutation in the unique list.
    pub candidate: usize,
    pub objective: Option<f64>,
    pub sparsity_violation: bool,
    /// Penalties used by the LAP; absent for enumeration.
    pub lam1: Option<f64>,
    pub lam2: Option<f64>,
    /// Whether the noise-floor fallback set the penalties.
    pub floor_applied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub n: usize,
    pub k: usize,
    pub uniques: Vec<Candidate>,
    pub draws: Vec<DrawRecord>,
}

impl CandidateSet {
    /// A set with the given members, one synthetic draw each.
    pub fn from_permutations(
        n: usize,
        k: usize,
        perms: impl IntoIterator<Item = SparsePermutation>,
    ) -> Result<Self> {
        let mut set = Self {
            n,
            k,
            uniques: Vec::new(),
            draws: Vec::new(),
        };
        for (i, p) in perms.into_iter().enumerate() {
            if p.n() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: p.n(),
                });
            }
            set.push(i + 1, p, DrawOutcome::bare(None));
        }
        Ok(set)
    }

    fn push(&mut self, draw: usize, p: SparsePermutation, o: DrawOutcome) {
        let idx = match self.uniques.iter().position(|c| c.permutation == p) {
            Some(i) => {
                let c = &mut self.uniques[i];
                c.multiplicity += 1;
                c.min_objective = match (c.min_objective, o.objective) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                i
            }
            None => {
                self.uniques.push(Candidate {
                    permutation: p,
                    multiplicity: 1,
                    min_objective: o.objective,
                });
                self.uniques.len() - 1
            }
        };
        self.draws.push(DrawRecord {
            draw,
            candidate: idx,
            objective: o.objective,
            sparsity_violation: o.violation,
            lam1: o.lam1,
            lam2: o.lam2,
            floor_applied: o.floor_applied,
        });
    }

    pub fn len(&self) -> usize {
        self.uniques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uniques.is_empty()
    }

    pub fn permutations(&self) -> impl Iterator<Item = &SparsePermutation> {
        self.uniques.iter().map(|c| &c.permutation)
    }

    pub fn contains(&self, p: &SparsePermutation) -> bool {
        self.permutations().any(|q| q == p)
    }
}

struct DrawOutcome {
    objective: Option<f64>,
    violation: bool,
    lam1: Option<f64>,
    lam2: Option<f64>,
    floor_applied: bool,
}

impl DrawOutcome {
    fn bare(objective: Option<f64>) -> Self {
        Self {
            objective,
            violation: false,
            lam1: None,
            lam2: None,
            floor_applied: false,
        }
    }
}

fn solve_draw(
    problem: &ReproProblem,
    cfg: &ReproConfig,
    draw: usize,
    class: Option<&[SparsePermutation]>,
) -> Result<(SparsePermutation, DrawOutcome)> {
    let n = problem.n();
    let ustar = repro_noise(cfg.seed, draw, n);
    if let Some(members) = class {
        let mut best: Option<(f64, &SparsePermutation)> = None;
        for p in members {
            let f = problem.objective(p, &ustar)?;
            if best.is_none_or(|(b, _)| f < b) {
                best = Some((f, p));
            }
        }
        let (objective, p) = best.expect("class contains the identity");
        return Ok((p.clone(), DrawOutcome::bare(Some(objective))));
    }
    let (lam1, lam2, floor_applied) = match cfg.penalties {
        Penalties::Fixed { lam1, lam2 } => (lam1, lam2, false),
        Penalties::Tuned(settings) => {
            let r: TuningReport = tune(
                problem,
                &ustar,
                cfg.k,
                &settings,
                &tuning_stream(cfg.seed, draw),
            )?;
            (r.lam1, r.lam2, r.floor_applied)
        }
    };
    let m = problem.fit(&ustar)?;
    let sol = surrogate_from_fit(problem.response(), &m, lam1, lam2, cfg.k)?;
    let objective = problem.objective(&sol.permutation, &ustar)?;
    Ok((
        sol.permutation,
        DrawOutcome {
            objective: Some(objective),
            violation: sol.sparsity_violation,
            lam1: Some(lam1),
            lam2: Some(lam2),
            floor_applied,
        },
    ))
}

/// The candidate set `C^(L)` from draws `ℓ = 1..L`.
pub fn generate_candidates(
    y: &[f64],
    x: &Matrix,
    variant: DesignVariant,
    cfg: &ReproConfig,
) -> Result<CandidateSet> {
    let problem = ReproProblem::new(y, x, variant)?;
    generate_for(&problem, cfg)
}

pub fn generate_for(problem: &ReproProblem, cfg: &ReproConfig) -> Result<CandidateSet> {
    if cfg.draws == 0 {
        return Err(Error::Domain("need at least one repro draw".into()));
    }
    let n = problem.n();
    let class = PermutationClass::new(n, cfg.k)?;
    let mut set = CandidateSet {
        n,
        k: cfg.k,
        uniques: Vec::new(),
        draws: Vec::with_capacity(cfg.draws),
    };
    if cfg.k == 0 {
        let id = SparsePermutation::identity(n);
        let outcomes: Vec<f64> = (1..=cfg.draws)
            .into_par_iter()
            .map(|l| problem.objective(&id, &repro_noise(cfg.seed, l, n)))
            .collect::<Result<_>>()?;
        for (l, f) in outcomes.into_iter().enumerate() {
            set.push(l + 1, id.clone(), DrawOutcome::bare(Some(f)));
        }
        return Ok(set);
    }
    let members: Option<Vec<SparsePermutation>> = match cfg.solver {
        Solver::BruteForce => Some(class.enumerate_with_limit(BRUTE_FORCE_LIMIT)?.collect()),
        Solver::SurrogateLap => None,
    };
    let outcomes: Vec<(SparsePermutation, DrawOutcome)> = (1..=cfg.draws)
        .into_par_iter()
        .map(|l| solve_draw(problem, cfg, l, members.as_deref()))
        .collect::<Result<_>>()?;
    for (l, (p, o)) in outcomes.into_iter().enumerate() {
        set.push(l + 1, p, o);
    }
    Ok(set)
}

/// Exact minimiser of `F` over `P(n, k)` for a given noise vector, first in
/// enumeration order among ties.
pub fn bruteforce_argmin(
    problem: &ReproProblem,
    ustar: &[f64],
    k: usize,
) -> Result<(SparsePermutation, f64)> {
    let mut best: Option<(f64, SparsePermutation)> = None;
    for p in PermutationClass::new(problem.n(), k)?.enumerate_with_limit(BRUTE_FORCE_LIMIT)? {
        let f = problem.objective(&p, ustar)?;
        if best.as_ref().is_none_or(|(b, _)| f < *b) {
            best = Some((f, p));
        }
    }
    let (f, p) = best.expect("class contains the identity");
    Ok((p, f))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecovery {
    pub permutation: SparsePermutation,
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub objective: f64,
}

/// Recovery with the realised noise: the minimiser of `F` with `u = u_rel`,
/// and the coefficients of `Y` on `[ΠX | u_rel]`.
pub fn oracle_recover(y: &[f64], x: &Matrix, u_rel: &[f64], k: usize) -> Result<OracleRecovery> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 * k + p {
        return Err(Error::IdentifiabilityViolated { n, k, p });
    }
    let problem = ReproProblem::new(y, x, DesignVariant::Plain)?;
    let (permutation, objective) = bruteforce_argmin(&problem, u_rel, k)?;
    let coef = Qr::factor(&permutation.apply_rows(x)?.with_column(u_rel)?)?.solve(y);
    Ok(OracleRecovery {
        sigma: coef[p],
        beta: coef[..p].to_vec(),
        permutation,
        objective,
    })
}

/// `ψ = 1 − min_ℓ d(Π̂_ℓ, Π₀)/n`.
pub fn matching_fraction(cs: &CandidateSet, truth: &SparsePermutation) -> Result<f64> {
    let best = cs
        .permutations()
        .map(|p| p.distance(truth))
        .min()
        .ok_or(Error::EmptySet)?;
    Ok(1.0 - best as f64 / cs.n as f64)
}

/// `C^(L) ∩ P(n, k₀)`, in candidate order.
pub fn localized_null(cs: &CandidateSet, k0: usize) -> Vec<SparsePermutation> {
    cs.permutations()
        .filter(|p| p.hamming_distance() <= k0)
        .cloned()
        .collect()
}
