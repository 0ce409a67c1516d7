//! Union-of-ellipsoids region for β, with and without unpermuted covariates.
//!
//! cargo run --release --example confidence_region

use permreg::candidates::{generate_candidates, DesignVariant, ReproConfig};
use permreg::inference::{coef_region, partial_coef_region, region_volume_mc, RegionKind};
use permreg::numerics::{gaussian_vector, Matrix, RngStream};
use permreg::simulate::{generate_instance, ScenarioConfig};

fn main() -> permreg::Result<()> {
    let cfg = ScenarioConfig::desk(30, 2, 0.1, 8);
    let inst = generate_instance(&cfg, 0)?;
    let cs = generate_candidates(
        &inst.y,
        &inst.x,
        DesignVariant::Plain,
        &ReproConfig::new(100, 2, 2),
    )?;
    let region = coef_region(&inst.y, &inst.x, &cs, 0.95)?;
    println!(
        "{} pieces, covers beta0 = {}",
        region.pieces.len(),
        region.contains(&cfg.beta0)?
    );
    for piece in &region.pieces {
        let e = &piece.ellipsoid;
        println!(
            "  center {:.3?} half-widths {:.3?}",
            e.center,
            e.half_widths()?
        );
    }
    let vol = region_volume_mc(&region, &RngStream::new(1, 0), 20_000)?;
    println!("volume {:.4} ± {:.4}", vol.volume, vol.stderr);

    // An unpermuted block Z: joint region and the β₁-only region.
    let z = Matrix::from_columns(&[gaussian_vector(&RngStream::new(4, 0), 30)])?;
    let y: Vec<f64> = inst
        .y
        .iter()
        .zip(z.column(0))
        .map(|(a, b)| a + 0.7 * b)
        .collect();
    let cs = generate_candidates(
        &y,
        &inst.x,
        DesignVariant::Partial { z: z.clone() },
        &ReproConfig::new(100, 2, 2),
    )?;
    let joint = partial_coef_region(&y, &inst.x, Some(&z), &cs, 0.95, RegionKind::Joint)?;
    let beta1 = partial_coef_region(&y, &inst.x, Some(&z), &cs, 0.95, RegionKind::Beta1Only)?;
    let mut full = cfg.beta0.clone();
    full.push(0.7);
    println!("joint covers (beta1, beta2): {}", joint.contains(&full)?);
    println!(
        "beta1-only covers beta1:     {}",
        beta1.contains(&cfg.beta0)?
    );
    Ok(())
}
