//! Localise a sparse permutation with repro samples.
//!
//! cargo run --release --example candidate_set

use permreg::candidates::{generate_candidates, matching_fraction, ReproConfig};
use permreg::simulate::{generate_instance, ScenarioConfig};

fn main() -> permreg::Result<()> {
    let cfg = ScenarioConfig::desk(30, 2, 0.05, 3);
    let inst = generate_instance(&cfg, 0)?;
    println!("truth moves {:?}", inst.pi0.moved());

    let cs = generate_candidates(
        &inst.y,
        &inst.x,
        cfg.variant.clone(),
        &ReproConfig::new(100, 2, 11),
    )?;
    println!(
        "{} unique candidates from {} draws",
        cs.len(),
        cs.draws.len()
    );
    for c in &cs.uniques {
        println!(
            "  x{:<3} d = {}  {:?}",
            c.multiplicity,
            c.permutation.hamming_distance(),
            c.permutation.moved()
        );
    }
    println!(
        "contains truth: {}, psi = {:.3}",
        cs.contains(&inst.pi0),
        matching_fraction(&cs, &inst.pi0)?
    );
    let floor = cs.draws.iter().filter(|d| d.floor_applied).count();
    println!("{floor} draws used the noise-floor penalty");
    Ok(())
}
