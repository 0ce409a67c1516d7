//! Two parameter pairs that produce the same noiseless data when n − 2k < p.
//!
//! cargo run --example counterexample

use permreg::tuning::counterexample;

fn main() -> permreg::Result<()> {
    for (n, p, k) in [(4, 1, 2), (6, 3, 2), (7, 4, 2)] {
        let ce = counterexample(n, p, k)?;
        let a = ce.x.mul_vec(&ce.beta0)?;
        let b = ce.pi1.apply(&ce.x.mul_vec(&ce.beta1)?)?;
        println!("(n, p, k) = ({n}, {p}, {k})");
        println!(
            "  beta0 = {:?}  beta1 = {:?}  pi1 moves {:?}",
            ce.beta0,
            ce.beta1,
            ce.pi1.moved()
        );
        println!("  X beta0       = {a:?}");
        println!("  pi1 X beta1   = {b:?}");
    }
    Ok(())
}
