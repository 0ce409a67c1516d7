//! Sizes and members of the classes of k-sparse permutations.
//!
//! cargo run --example permutation_classes

use permreg::permutation::{binomial, derangements, PermutationClass};
use rand::SeedableRng;

fn main() -> permreg::Result<()> {
    println!(" n  k   |P(n,k)|");
    for n in [5, 8, 12] {
        for k in [0, 2, 3, n] {
            println!(
                "{n:>2} {k:>2} {:>10}",
                PermutationClass::new(n, k)?.count()?
            );
        }
    }
    println!(
        "C(10,3) = {}, D(6) = {}",
        binomial(10, 3)?,
        derangements(6)?
    );

    let class = PermutationClass::new(5, 2)?;
    for p in class.enumerate()?.take(4) {
        println!("moved {:?}", p.moved());
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let p = PermutationClass::new(20, 4)?.random_with_distance(&mut rng, 4)?;
    println!("random d = {}: {:?}", p.hamming_distance(), p.moved());
    Ok(())
}
