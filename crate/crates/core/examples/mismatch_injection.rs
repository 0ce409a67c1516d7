//! Swap rows within a time window, as record-linkage errors would.
//!
//! cargo run --example mismatch_injection

use permreg::simulate::inject_local_mismatch;
use rand::SeedableRng;

fn main() -> permreg::Result<()> {
    let hours: Vec<f64> = (0..48).map(f64::from).collect();
    let y: Vec<f64> = hours.iter().map(|t| (t / 4.0).sin()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let (_, pi) = inject_local_mismatch(&y, &hours, 0.25, 2.0, &mut rng)?;
    println!("{} of 48 rows moved", pi.hamming_distance());
    for &(i, j) in pi.moved() {
        println!("  row {i:>2} -> {j:>2}");
    }
    match inject_local_mismatch(&y, &hours, 1.0, 1.0, &mut rng) {
        Ok((_, p)) => println!("full-rate shuffle moved {}", p.hamming_distance()),
        Err(e) => println!("full-rate shuffle: {e}"),
    }
    Ok(())
}
