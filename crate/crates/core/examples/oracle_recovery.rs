//! With the realised noise in hand, brute force recovers Π₀, β₀ and σ₀.
//!
//! cargo run --example oracle_recovery

use permreg::candidates::oracle_recover;
use permreg::simulate::{generate_instance, ScenarioConfig};

fn main() -> permreg::Result<()> {
    for sigma0 in [0.0, 0.5] {
        let cfg = ScenarioConfig {
            p: 3,
            ..ScenarioConfig::desk(10, 2, sigma0, 21)
        };
        let inst = generate_instance(&cfg, 0)?;
        let rec = oracle_recover(&inst.y, &inst.x, &inst.u_rel, 2)?;
        println!(
            "sigma0 = {sigma0}: truth {:?} -> {:?}, beta {:.10?}, sigma {:.10}",
            inst.pi0.moved(),
            rec.permutation.moved(),
            rec.beta,
            rec.sigma
        );
    }
    Ok(())
}
