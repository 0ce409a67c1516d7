//! Synthetic hourly data: ingest, then test for a windowed shuffle.
//!
//! cargo run --release --example hourly_fixture

use permreg::candidates::{generate_candidates, DesignVariant, ReproConfig};
use permreg::inference::{sparsity_test, SparsityTestConfig};
use permreg::io::{hourly_fixture, ingest_csv, Fixture, FixtureSpec, FIXTURE_RESPONSE};

fn main() -> permreg::Result<()> {
    let dir = tempfile::tempdir()?;
    for rate in [0.0, 0.08] {
        let fx = hourly_fixture(&FixtureSpec {
            shuffle_rate: rate,
            ..FixtureSpec::default()
        })?;
        let path = dir.path().join("hourly.csv");
        std::fs::write(&path, fx.to_csv()?)?;
        let data = ingest_csv(
            &path,
            FIXTURE_RESPONSE,
            &Fixture::covariate_names(),
            &[],
            true,
        )?;
        let cs = generate_candidates(
            &data.y,
            &data.x,
            DesignVariant::Plain,
            &ReproConfig::new(250, 20, 1),
        )?;
        let cfg = SparsityTestConfig {
            k0: 0,
            alpha: 0.05,
            mc_draws: 200,
            seed: 2,
        };
        let r = sparsity_test(&data.y, &data.x, &cs, &cfg)?;
        println!(
            "shuffle {:>3.0}% ({} rows moved): |C| = {:>2}, p = {:.3}, {}",
            rate * 100.0,
            fx.shuffle.hamming_distance(),
            cs.len(),
            r.p_value,
            if r.reject { "rejected" } else { "not rejected" }
        );
    }
    Ok(())
}
