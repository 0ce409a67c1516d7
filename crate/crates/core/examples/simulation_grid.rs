//! A small noise-level sweep: candidate-set size, inclusion, rejection, coverage.
//!
//! cargo run --release --example simulation_grid

use permreg::simulate::{run_scenario, ScenarioConfig};

fn main() -> permreg::Result<()> {
    println!("sigma0   |C|   incl   psi    reject  cover");
    for sigma0 in [0.01, 0.05, 0.1, 0.2, 0.5] {
        let cfg = ScenarioConfig {
            reps: 100,
            ..ScenarioConfig::desk(30, 2, sigma0, 17)
        };
        let a = run_scenario(&cfg)?.aggregates;
        println!(
            "{sigma0:<6} {:>6.2} {:>6.2} {:>6.3} {:>7.2} {:>6.2}",
            a.mean_candidate_set_size,
            a.inclusion.mean,
            a.mean_matching_fraction,
            a.rejection.mean,
            a.coverage.mean
        );
    }
    Ok(())
}
