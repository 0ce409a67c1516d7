//! Monte Carlo experiments under the permuted regression model.
//!
//! A scenario fixes `X` and `Π₀` once (keyed by the seed and a hash of the
//! scenario fields) and redraws only the noise per replication. Each rep
//! builds the candidate set, runs the sparsity test and the coefficient
//! region, and records the outcome; aggregates are plain means with binomial
//! standard errors.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{
    generate_candidates, matching_fraction, DesignVariant, Penalties, ReproConfig, Solver,
};
use crate::error::{Error, Result};
use crate::inference::{coef_region, region_volume_mc, sparsity_test, SparsityTestConfig};
use crate::numerics::linalg::{check_len, Matrix};
use crate::numerics::rng::mix64;
use crate::numerics::{gaussian_vector, RngStream};
use crate::permutation::{PermutationClass, SparsePermutation};
use crate::tuning::TuningSettings;

/// Environment variable capping simulation work, in seconds.
pub const BUDGET_ENV: &str = "PERMREG_BUDGET_SECONDS";
pub const DEFAULT_BUDGET_SECONDS: f64 = 3600.0;
/// Rough throughput used to turn `reps · L · n³` into seconds.
pub const WORK_UNITS_PER_SECOND: f64 = 2e8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DesignSpec {
    GaussianIid,
    Fixed { x: Matrix },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    pub k_true: usize,
    pub k_search: usize,
    pub k0: usize,
    pub sigma0: f64,
    /// Repro draws `L`.
    pub draws: usize,
    /// Calibration draws `M`.
    pub mc_draws: usize,
    pub alpha_test: f64,
    /// Coverage level of the coefficient region.
    pub alpha_coef: f64,
    pub reps: usize,
    pub seed: u64,
    pub beta0: Vec<f64>,
    pub design: DesignSpec,
    pub variant: DesignVariant,
    pub penalties: Penalties,
    pub solver: Solver,
    /// Monte Carlo samples for the region volume; 0 skips it.
    pub volume_samples: usize,
}

impl ScenarioConfig {
    /// The desk-scale default: `β₀ = (0.5, −1, 2)`, Gaussian design.
    pub fn desk(n: usize, k_true: usize, sigma0: f64, seed: u64) -> Self {
        Self {
            n,
            p: 3,
            k_true,
            k_search: k_true.max(2),
            k0: 0,
            sigma0,
            draws: 100,
            mc_draws: 200,
            alpha_test: 0.05,
            alpha_coef: 0.95,
            reps: 200,
            seed,
            beta0: vec![0.5, -1.0, 2.0],
            design: DesignSpec::GaussianIid,
            variant: DesignVariant::Plain,
            penalties: Penalties::Tuned(TuningSettings::default()),
            solver: Solver::SurrogateLap,
            volume_samples: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.draws == 0 {
            return Err(Error::Domain("reps and draws must be positive".into()));
        }
        if self.k_true == 1 || self.k_true > self.n {
            return Err(Error::InvalidDistance {
                n: self.n,
                k: self.n,
                distance: self.k_true,
            });
        }
        check_len(self.p, self.beta0.len())?;
        if let DesignSpec::Fixed { x } = &self.design {
            if x.rows() != self.n || x.cols() != self.p {
                return Err(Error::DimMismatch(format!(
                    "fixed design is {}x{}, expected {}x{}",
                    x.rows(),
                    x.cols(),
                    self.n,
                    self.p
                )));
            }
        }
        if !(self.sigma0 >= 0.0) {
            return Err(Error::Domain(format!(
                "sigma0 must be non-negative, got {}",
                self.sigma0
            )));
        }
        Ok(())
    }

    /// Key mixing the seed with the fields that shape the instance, so
    /// different `(n, p, k)` never share streams. Noise level, draw counts
    /// and levels are left out on purpose: sweeping them reuses the same
    /// design, truth and noise (common random numbers).
    pub fn scenario_key(&self) -> u64 {
        let fields = [
            self.n as u64,
            self.p as u64,
            self.k_true as u64,
            self.k_search as u64,
        ];
        fields.iter().fold(mix64(self.seed), |h, &f| mix64(h ^ f))
    }

    /// `reps · L · n³`.
    pub fn work_estimate(&self) -> f64 {
        self.reps as f64 * self.draws as f64 * (self.n as f64).powi(3)
    }
}

const DOMAIN_DESIGN: u64 = 1;
const DOMAIN_TRUTH: u64 = 2;
const DOMAIN_NOISE: u64 = 3;
const DOMAIN_REPRO: u64 = 4;
const DOMAIN_TEST: u64 = 5;
const DOMAIN_VOLUME: u64 = 6;

fn scenario_stream(cfg: &ScenarioConfig, domain: u64, index: u64) -> RngStream {
    RngStream::new(cfg.scenario_key(), index).derive(domain)
}

fn seed_for(cfg: &ScenarioConfig, domain: u64, rep: usize) -> u64 {
    scenario_stream(cfg, domain, rep as u64).seed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub y: Vec<f64>,
    pub x: Matrix,
    pub pi0: SparsePermutation,
    /// The realised standard normal noise.
    pub u_rel: Vec<f64>,
}

pub fn scenario_design(cfg: &ScenarioConfig) -> Result<Matrix> {
    match &cfg.design {
        DesignSpec::Fixed { x } => Ok(x.clone()),
        DesignSpec::GaussianIid => {
            let cols: Vec<Vec<f64>> = (0..cfg.p)
                .map(|j| gaussian_vector(&scenario_stream(cfg, DOMAIN_DESIGN, j as u64), cfg.n))
                .collect();
            Matrix::from_columns(&cols)
        }
    }
}

pub fn scenario_truth(cfg: &ScenarioConfig) -> Result<SparsePermutation> {
    let class = PermutationClass::new(cfg.n, cfg.k_true)?;
    class.random_with_distance(
        &mut scenario_stream(cfg, DOMAIN_TRUTH, 0).generator(),
        cfg.k_true,
    )
}

/// `Y = Π₀Xβ₀ + σ₀U` for replication `rep`.
pub fn generate_instance(cfg: &ScenarioConfig, rep: usize) -> Result<Instance> {
    cfg.validate()?;
    let x = scenario_design(cfg)?;
    let pi0 = scenario_truth(cfg)?;
    Ok(instance_with(cfg, rep, x, pi0))
}

fn instance_with(cfg: &ScenarioConfig, rep: usize, x: Matrix, pi0: SparsePermutation) -> Instance {
    let u_rel = gaussian_vector(&scenario_stream(cfg, DOMAIN_NOISE, rep as u64), cfg.n);
    let signal = pi0
        .apply(&x.mul_vec(&cfg.beta0).expect("validated"))
        .expect("validated");
    let y = signal
        .iter()
        .zip(&u_rel)
        .map(|(s, u)| s + cfg.sigma0 * u)
        .collect();
    Instance { y, x, pi0, u_rel }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub candidate_set_size: usize,
    pub contains_truth: bool,
    pub matching_fraction: f64,
    pub d_obs: usize,
    pub c_hat: i64,
    pub p_value: f64,
    pub reject: bool,
    pub covered: bool,
    pub volume: Option<f64>,
    /// Draws whose penalties came from the noise-floor fallback.
    pub floor_draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub mean: f64,
    pub stderr: f64,
}

impl Rate {
    fn of(flags: impl Iterator<Item = bool>) -> Self {
        let (mut hits, mut total) = (0usize, 0usize);
        for f in flags {
            hits += f as usize;
            total += 1;
        }
        let mean = hits as f64 / total as f64;
        Self {
            mean,
            stderr: (mean * (1.0 - mean) / total as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub reps: usize,
    pub mean_candidate_set_size: f64,
    pub inclusion: Rate,
    pub mean_matching_fraction: f64,
    pub rejection: Rate,
    pub coverage: Rate,
    pub mean_volume: Option<f64>,
}

impl Aggregates {
    pub fn from_records(records: &[RepRecord]) -> Self {
        let r = records.len() as f64;
        let volumes: Option<Vec<f64>> = records.iter().map(|x| x.volume).collect();
        Self {
            reps: records.len(),
            mean_candidate_set_size: records
                .iter()
                .map(|x| x.candidate_set_size as f64)
                .sum::<f64>()
                / r,
            inclusion: Rate::of(records.iter().map(|x| x.contains_truth)),
            mean_matching_fraction: records.iter().map(|x| x.matching_fraction).sum::<f64>() / r,
            rejection: Rate::of(records.iter().map(|x| x.reject)),
            coverage: Rate::of(records.iter().map(|x| x.covered)),
            mean_volume: volumes.map(|v| v.iter().sum::<f64>() / r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub truth: SparsePermutation,
    pub records: Vec<RepRecord>,
    pub aggregates: Aggregates,
}

fn budget_seconds() -> f64 {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_BUDGET_SECONDS)
}

/// Refuse scenarios whose work estimate exceeds the budget.
pub fn check_budget(cfg: &ScenarioConfig) -> Result<()> {
    let budget = budget_seconds() * WORK_UNITS_PER_SECOND;
    let estimate = cfg.work_estimate();
    if estimate > budget {
        return Err(Error::BudgetExceeded { estimate, budget });
    }
    Ok(())
}

/// One replication of the full pipeline.
pub fn run_rep(
    cfg: &ScenarioConfig,
    rep: usize,
    x: &Matrix,
    pi0: &SparsePermutation,
) -> Result<RepRecord> {
    let inst = instance_with(cfg, rep, x.clone(), pi0.clone());
    let repro = ReproConfig {
        draws: cfg.draws,
        k: cfg.k_search,
        penalties: cfg.penalties,
        solver: cfg.solver,
        seed: seed_for(cfg, DOMAIN_REPRO, rep),
    };
    let cs = generate_candidates(&inst.y, x, cfg.variant.clone(), &repro)?;
    let test_cfg = SparsityTestConfig {
        k0: cfg.k0,
        alpha: cfg.alpha_test,
        mc_draws: cfg.mc_draws,
        seed: seed_for(cfg, DOMAIN_TEST, rep),
    };
    let test = sparsity_test(&inst.y, x, &cs, &test_cfg)?;
    let region = coef_region(&inst.y, x, &cs, cfg.alpha_coef)?;
    let volume = match cfg.volume_samples {
        0 => None,
        s => Some(
            region_volume_mc(&region, &scenario_stream(cfg, DOMAIN_VOLUME, rep as u64), s)?.volume,
        ),
    };
    Ok(RepRecord {
        rep,
        candidate_set_size: cs.len(),
        contains_truth: cs.contains(pi0),
        matching_fraction: matching_fraction(&cs, pi0)?,
        d_obs: test.d_obs,
        c_hat: test.c_hat,
        p_value: test.p_value,
        reject: test.reject,
        covered: region.contains(&cfg.beta0)?,
        volume,
        floor_draws: cs.draws.iter().filter(|d| d.floor_applied).count(),
    })
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    check_budget(cfg)?;
    let x = scenario_design(cfg)?;
    let truth = scenario_truth(cfg)?;
    let records: Vec<RepRecord> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| run_rep(cfg, r, &x, &truth))
        .collect::<Result<_>>()?;
    let aggregates = Aggregates::from_records(&records);
    Ok(ScenarioResult {
        config: cfg.clone(),
        truth,
        records,
        aggregates,
    })
}

/// One CSV row per replication, header first.
pub fn records_to_csv(records: &[RepRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))
}

/// Swap `⌊rate·n⌋` rows (rounded down to even) in pairs whose timestamps
/// differ by at most `window`. Returns the shuffled response and the
/// permutation applied, so that `shuffled = Π y`.
pub fn inject_local_mismatch<R: Rng + ?Sized>(
    y: &[f64],
    timestamps: &[f64],
    rate: f64,
    window: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, SparsePermutation)> {
    let n = y.len();
    check_len(n, timestamps.len())?;
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Domain(format!(
            "rate must lie in [0, 1], got {rate}"
        )));
    }
    if !(window >= 1.0) {
        return Err(Error::Domain(format!(
            "window must be at least 1, got {window}"
        )));
    }
    if timestamps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("timestamps must be sorted".into()));
    }
    let pairs_wanted = ((rate * n as f64).floor() as usize) / 2;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut used = vec![false; n];
    let mut moved = Vec::with_capacity(2 * pairs_wanted);
    for &i in &order {
        if moved.len() == 2 * pairs_wanted {
            break;
        }
        if used[i] {
            continue;
        }
        let lo = timestamps.partition_point(|&t| t < timestamps[i] - window);
        let hi = timestamps.partition_point(|&t| t <= timestamps[i] + window);
        let partners: Vec<usize> = (lo..hi).filter(|&j| j != i && !used[j]).collect();
        if partners.is_empty() {
            continue;
        }
        let j = partners[rng.random_range(0..partners.len())];
        used[i] = true;
        used[j] = true;
        moved.push((i, j));
        moved.push((j, i));
    }
    if moved.len() < 2 * pairs_wanted {
        return Err(Error::InfeasibleWindow(format!(
            "paired {} of {} rows within a window of {window}",
            moved.len(),
            2 * pairs_wanted
        )));
    }
    let pi = SparsePermutation::from_moved(n, moved)?;
    Ok((pi.apply(y)?, pi))
}
