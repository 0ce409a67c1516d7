//! Batch command-line front end.
//!
//! Every command ingests (or simulates), calls one library routine and
//! writes its serialization atomically. Exit codes: 0 success, 1 bad flags or
//! unmet preconditions, 2 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::candidates::{
    generate_candidates, repro_noise, tuning_stream, CandidateSet, DesignVariant, Penalties,
    ReproConfig, ReproProblem,
};
use crate::error::Error;
use crate::inference::{
    partial_coef_region, region_volume_mc, sparsity_test, ConfidenceRegion, RegionKind,
    SparsityTestConfig, VolumeEstimate,
};
use crate::io::{hourly_fixture, ingest_csv, Dataset, FixtureSpec};
use crate::numerics::RngStream;
use crate::report::{to_json_pretty, write_atomic};
use crate::simulate::{records_to_csv, run_scenario, ScenarioConfig, ScenarioResult};
use crate::tuning::{counterexample, tune, PenaltyRule, TuningSettings, DEFAULT_SWAPS, DEFAULT_XI};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "permreg",
    version,
    about = "Inference for sparsely permuted linear regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub covariates: Vec<String>,
    /// Unpermuted covariates `Z`.
    #[arg(long = "nuisance-covariates", value_delimiter = ',')]
    pub nuisance: Vec<String>,
    /// Keep the raw scale instead of standardizing every column.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    /// Sparsity level searched by the repro solver.
    #[arg(long)]
    pub k: usize,
    /// Number of repro draws.
    #[arg(long = "L", default_value_t = 100)]
    pub draws: usize,
    /// `auto`, `plugin`, or fixed penalties `lam1,lam2`.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    #[arg(long)]
    pub ridge: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegionArg {
    Coefficients,
    Joint,
    Beta1Only,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Candidate set of permutations from repro draws.
    Candidates {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        repro: ReproArgs,
    },
    /// Conditional Monte Carlo test of `d(Π₀) ≤ k0`.
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        repro: ReproArgs,
        #[arg(long, default_value_t = 0)]
        k0: usize,
        #[arg(long = "M", default_value_t = 200)]
        mc_draws: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Union-of-ellipsoids confidence region for the coefficients.
    Confset {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        repro: ReproArgs,
        /// Coverage level.
        #[arg(long, default_value_t = 0.95)]
        alpha: f64,
        #[arg(long, value_enum)]
        region: Option<RegionArg>,
        #[arg(long, default_value_t = 0)]
        volume_samples: usize,
    },
    /// Penalty selection for one repro draw.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        repro: ReproArgs,
        #[arg(long, default_value_t = 1)]
        draw: usize,
        #[arg(long, default_value_t = DEFAULT_XI)]
        xi: f64,
        #[arg(long, default_value_t = DEFAULT_SWAPS)]
        swaps: usize,
    },
    /// Monte Carlo scenario: per-rep CSV plus aggregate JSON.
    Simulate {
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        k_true: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        k0: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma0: f64,
        #[arg(long = "L", default_value_t = 100)]
        draws: usize,
        #[arg(long = "M", default_value_t = 200)]
        mc_draws: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.95)]
        coverage: f64,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value = "auto")]
        lambda: String,
        #[arg(long, default_value_t = 0)]
        volume_samples: usize,
        /// Per-rep CSV path; defaults to `--out` with a `.csv` extension.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Non-identifiable design for `n − 2k < p`.
    Counterexample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        k: usize,
    },
    /// Synthetic hourly dataset shaped like an air-quality record.
    Fixture {
        #[arg(long, default_value_t = 200)]
        hours: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        shuffle_rate: f64,
        #[arg(long, default_value_t = 3)]
        window: usize,
        /// Where to write the applied shuffle as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Run metadata. `generated_at_unix` is the only field that varies between
/// runs with the same flags; `SOURCE_DATE_EPOCH` pins it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub generated_at_unix: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub metadata: Metadata,
    pub report: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfsetReport {
    pub candidate_set_size: usize,
    pub region: ConfidenceRegion,
    pub volume: Option<VolumeEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub rank: usize,
    pub hamming_distance: usize,
    pub multiplicity: usize,
    pub min_objective: Option<f64>,
    pub moved: String,
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Candidates { .. } => "candidates",
        Command::Test { .. } => "test",
        Command::Confset { .. } => "confset",
        Command::Tune { .. } => "tune",
        Command::Simulate { .. } => "simulate",
        Command::Counterexample { .. } => "counterexample",
        Command::Fixture { .. } => "fixture",
    }
}

pub fn parse_lambda(s: &str) -> CliResult<Penalties> {
    let tuned = |rule| {
        Penalties::Tuned(TuningSettings {
            rule,
            ..TuningSettings::default()
        })
    };
    match s.trim() {
        "auto" => Ok(tuned(PenaltyRule::Auto)),
        "plugin" => Ok(tuned(PenaltyRule::PlugIn)),
        pair => {
            let parts: Vec<&str> = pair.split(',').collect();
            let vals: Vec<f64> = parts.iter().filter_map(|v| v.trim().parse().ok()).collect();
            match vals[..] {
                [lam1, lam2] if parts.len() == 2 && lam1 >= 0.0 && lam2 >= 0.0 => {
                    Ok(Penalties::Fixed { lam1, lam2 })
                }
                _ => Err(usage(format!(
                    "--lambda expects auto, plugin or two non-negative numbers, got `{s}`"
                ))),
            }
        }
    }
}

fn check_prob(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("{name} must lie in (0, 1), got {v}")))
    }
}

struct Prepared {
    data: Dataset,
    variant: DesignVariant,
    repro: ReproConfig,
}

fn prepare(data: &DataArgs, repro: &ReproArgs, seed: u64) -> CliResult<Prepared> {
    let penalties = parse_lambda(&repro.lambda)?;
    if repro.draws == 0 {
        return Err(usage("--L must be positive"));
    }
    if let Some(r) = repro.ridge {
        if !(r > 0.0) {
            return Err(usage(format!("--ridge must be positive, got {r}")));
        }
        if !data.nuisance.is_empty() {
            return Err(usage(
                "--ridge cannot be combined with --nuisance-covariates",
            ));
        }
    }
    let ds = ingest_csv(
        &data.input,
        &data.response,
        &data.covariates,
        &data.nuisance,
        !data.raw,
    )?;
    if repro.k > ds.n() {
        return Err(usage(format!(
            "--k {} exceeds the {} complete rows",
            repro.k,
            ds.n()
        )));
    }
    let variant = match (&ds.z, repro.ridge) {
        (Some(z), _) => DesignVariant::Partial { z: z.clone() },
        (None, Some(lambda)) => DesignVariant::Ridge { lambda },
        (None, None) => DesignVariant::Plain,
    };
    let cfg = ReproConfig {
        penalties,
        ..ReproConfig::new(repro.draws, repro.k, seed)
    };
    Ok(Prepared {
        data: ds,
        variant,
        repro: cfg,
    })
}

fn candidates_for(prep: &Prepared) -> CliResult<CandidateSet> {
    Ok(generate_candidates(
        &prep.data.y,
        &prep.data.x,
        prep.variant.clone(),
        &prep.repro,
    )?)
}

fn derived_seed(seed: u64, domain: u64) -> u64 {
    RngStream::new(seed, 0).derive(domain).seed
}

/// Bytes to write, plus an optional per-rep CSV sidecar.
struct Artifacts {
    main: Vec<u8>,
    sidecar: Option<(PathBuf, Vec<u8>)>,
}

fn envelope<T: Serialize>(meta: Metadata, report: T) -> CliResult<Vec<u8>> {
    Ok(to_json_pretty(&Envelope {
        metadata: meta,
        report,
    })?
    .into_bytes())
}

fn json_only(format: Format, what: &str) -> CliResult<()> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(usage(format!("{what} reports are JSON only"))),
    }
}

fn candidate_rows(cs: &CandidateSet) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (rank, c) in cs.uniques.iter().enumerate() {
        w.serialize(CandidateRow {
            rank,
            hamming_distance: c.permutation.hamming_distance(),
            multiplicity: c.multiplicity,
            min_objective: c.min_objective,
            moved: serde_json::to_string(c.permutation.moved()).map_err(Error::from)?,
        })
        .map_err(Error::from)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Runtime(Error::Io(e.into_error())))
}

fn execute(cli: &Cli) -> CliResult<Artifacts> {
    let meta = Metadata {
        tool: "permreg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command_name(&cli.command).into(),
        seed: cli.seed,
        generated_at_unix: timestamp(),
    };
    let plain = |main| {
        Ok(Artifacts {
            main,
            sidecar: None,
        })
    };
    match &cli.command {
        Command::Candidates { data, repro } => {
            let prep = prepare(data, repro, cli.seed)?;
            let cs = candidates_for(&prep)?;
            match cli.format {
                Format::Json => plain(envelope(meta, cs)?),
                Format::Csv => plain(candidate_rows(&cs)?),
            }
        }
        Command::Test {
            data,
            repro,
            k0,
            mc_draws,
            alpha,
        } => {
            json_only(cli.format, "test")?;
            if !data.nuisance.is_empty() {
                return Err(usage("the sparsity test takes no --nuisance-covariates"));
            }
            let test_cfg = SparsityTestConfig {
                k0: *k0,
                alpha: *alpha,
                mc_draws: *mc_draws,
                seed: derived_seed(cli.seed, 0x7465_7374),
            };
            test_cfg.validate().map_err(|e| usage(e.to_string()))?;
            let prep = prepare(data, repro, cli.seed)?;
            let cs = candidates_for(&prep)?;
            plain(envelope(
                meta,
                sparsity_test(&prep.data.y, &prep.data.x, &cs, &test_cfg)?,
            )?)
        }
        Command::Confset {
            data,
            repro,
            alpha,
            region,
            volume_samples,
        } => {
            json_only(cli.format, "confset")?;
            check_prob("--alpha", *alpha)?;
            if *volume_samples != 0 && *volume_samples < 1000 {
                return Err(usage("--volume-samples must be 0 or at least 1000"));
            }
            let kind = match (region, data.nuisance.is_empty()) {
                (None, true) | (Some(RegionArg::Coefficients), true) => RegionKind::Coefficients,
                (None, false) | (Some(RegionArg::Joint), false) => RegionKind::Joint,
                (Some(RegionArg::Beta1Only), false) => RegionKind::Beta1Only,
                (Some(RegionArg::Coefficients), false) => return Err(usage(
                    "--region coefficients ignores --nuisance-covariates; use joint or beta1-only",
                )),
                (Some(_), true) => {
                    return Err(usage(
                        "joint and beta1-only regions need --nuisance-covariates",
                    ))
                }
            };
            let prep = prepare(data, repro, cli.seed)?;
            let cs = candidates_for(&prep)?;
            let region = partial_coef_region(
                &prep.data.y,
                &prep.data.x,
                prep.data.z.as_ref(),
                &cs,
                *alpha,
                kind,
            )?;
            let volume = match volume_samples {
                0 => None,
                &s => Some(region_volume_mc(
                    &region,
                    &RngStream::new(derived_seed(cli.seed, 0x766f_6c75), 0),
                    s,
                )?),
            };
            plain(envelope(
                meta,
                ConfsetReport {
                    candidate_set_size: cs.len(),
                    region,
                    volume,
                },
            )?)
        }
        Command::Tune {
            data,
            repro,
            draw,
            xi,
            swaps,
        } => {
            json_only(cli.format, "tune")?;
            check_prob("--xi", *xi)?;
            if *draw == 0 || *swaps == 0 {
                return Err(usage("--draw and --swaps must be positive"));
            }
            let rule = match parse_lambda(&repro.lambda)? {
                Penalties::Tuned(s) => s.rule,
                Penalties::Fixed { .. } => return Err(usage("tune needs --lambda auto or plugin")),
            };
            let prep = prepare(data, repro, cli.seed)?;
            let problem = ReproProblem::new(&prep.data.y, &prep.data.x, prep.variant.clone())?;
            let ustar = repro_noise(cli.seed, *draw, problem.n());
            let settings = TuningSettings {
                rule,
                xi: *xi,
                n_swaps: *swaps,
            };
            let report = tune(
                &problem,
                &ustar,
                repro.k,
                &settings,
                &tuning_stream(cli.seed, *draw),
            )?;
            plain(envelope(meta, report)?)
        }
        Command::Simulate {
            n,
            p,
            k_true,
            k,
            k0,
            sigma0,
            draws,
            mc_draws,
            alpha,
            coverage,
            reps,
            lambda,
            volume_samples,
            csv,
        } => {
            check_prob("--alpha", *alpha)?;
            check_prob("--coverage", *coverage)?;
            if *p == 0 || *p >= *n {
                return Err(usage(format!("need 1 <= p < n, got p = {p}, n = {n}")));
            }
            let beta0 = (0..*p).map(|j| [0.5, -1.0, 2.0][j % 3]).collect();
            let cfg = ScenarioConfig {
                p: *p,
                k_search: *k,
                k0: *k0,
                draws: *draws,
                mc_draws: *mc_draws,
                alpha_test: *alpha,
                alpha_coef: *coverage,
                reps: *reps,
                beta0,
                penalties: parse_lambda(lambda)?,
                volume_samples: *volume_samples,
                ..ScenarioConfig::desk(*n, *k_true, *sigma0, cli.seed)
            };
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            SparsityTestConfig {
                k0: *k0,
                alpha: *alpha,
                mc_draws: *mc_draws,
                seed: 0,
            }
            .validate()
            .map_err(|e| usage(e.to_string()))?;
            let result: ScenarioResult = run_scenario(&cfg)?;
            let rows = records_to_csv(&result.records)?.into_bytes();
            match cli.format {
                Format::Csv => plain(rows),
                Format::Json => {
                    let sidecar_path = csv
                        .clone()
                        .or_else(|| cli.out.as_ref().map(|o| o.with_extension("csv")));
                    Ok(Artifacts {
                        main: envelope(meta, result)?,
                        sidecar: sidecar_path.map(|p| (p, rows)),
                    })
                }
            }
        }
        Command::Counterexample { n, p, k } => {
            json_only(cli.format, "counterexample")?;
            let ce = counterexample(*n, *p, *k).map_err(|e| usage(e.to_string()))?;
            plain(envelope(meta, ce)?)
        }
        Command::Fixture {
            hours,
            noise,
            shuffle_rate,
            window,
            truth,
        } => {
            if !(0.0..=1.0).contains(shuffle_rate) || *window == 0 || !(*noise >= 0.0) {
                return Err(usage(
                    "need shuffle-rate in [0, 1], window >= 1 and noise >= 0",
                ));
            }
            if *hours < 24 {
                return Err(usage("--hours must cover at least one day"));
            }
            let spec = FixtureSpec {
                hours: *hours,
                noise: *noise,
                shuffle_rate: *shuffle_rate,
                window_hours: *window,
                seed: cli.seed,
            };
            let fx = hourly_fixture(&spec)?;
            let sidecar = match truth {
                Some(path) => Some((path.clone(), to_json_pretty(&fx.shuffle)?.into_bytes())),
                None => None,
            };
            Ok(Artifacts {
                main: fx.to_csv()?.into_bytes(),
                sidecar,
            })
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => write_atomic(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).map_err(Error::from)?;
            stdout.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

/// Run a parsed command with the requested thread count.
pub fn run_cli(cli: &Cli) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| usage(format!("cannot start {} threads: {e}", cli.threads)))?;
    let artifacts = pool.install(|| execute(cli))?;
    if let Some((path, bytes)) = &artifacts.sidecar {
        write_atomic(path, bytes)?;
    }
    emit(cli.out.as_deref(), &artifacts.main)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run_cli(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
