//! Penalty selection for one repro draw, and the theory constants.
//!
//! cargo run --release --example penalty_tuning

use permreg::candidates::{repro_noise, tuning_stream, DesignVariant, ReproProblem};
use permreg::simulate::{generate_instance, ScenarioConfig};
use permreg::tuning::{delta_l_bound, eta_op, theory_constants, tune, PenaltyRule, TuningSettings};

fn main() -> permreg::Result<()> {
    let cfg = ScenarioConfig::desk(30, 2, 0.05, 3);
    let inst = generate_instance(&cfg, 0)?;
    let problem = ReproProblem::new(&inst.y, &inst.x, DesignVariant::Plain)?;
    let ustar = repro_noise(7, 1, 30);
    for rule in [PenaltyRule::PlugIn, PenaltyRule::Auto] {
        let settings = TuningSettings {
            rule,
            ..TuningSettings::default()
        };
        let r = tune(&problem, &ustar, 2, &settings, &tuning_stream(7, 1))?;
        println!(
            "{rule:?}: eta = {:.3e}  delta_F = {:.3}  b = {:.3}  floor = {}  lam = ({:.4}, {:.4})  window ok = {}",
            r.eta_op_hat, r.delta_f_hat, r.budget_b, r.floor_applied, r.lam1, r.lam2, r.window_ok
        );
    }
    println!("eta_op shrinks with n at fixed B_Y:");
    for n in [50, 500, 5000, 50_000] {
        println!("  n = {n:>6}: {:.3e}", eta_op(n, 3, 2, 0.05, 1.0));
    }
    let tc = theory_constants(&inst.x, &cfg.beta0, &inst.pi0, 0.05, 2, 0.05)?;
    println!("C_min = {:.4}, B_diag = {:.3}", tc.c_min, tc.b_diag);
    for l in [10, 1000, 100_000] {
        println!(
            "  delta_L(L = {l}) = {:.4e}",
            delta_l_bound(30, 3, 2, 0.05, tc.c_min, l)?
        );
    }
    Ok(())
}
