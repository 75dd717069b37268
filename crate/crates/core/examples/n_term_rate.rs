//! Greedy N-term approximation of random 64-atom expansions against the
//! `sum|beta| (N+1)^(-1/2)` bound, in one and two dimensions.
//!
//! ```text
//! cargo run --release --example n_term_rate
//! ```

use radnet::approximation::{coefficient_l1, random_expansion, rate_table, RateSetup};
use radnet::rng::substream;
use radnet::wavelets::RadialKernelSystem;

fn main() -> radnet::Result<()> {
    let ns = [0, 1, 2, 4, 8, 16, 32, 64];
    for (n, seeds) in [(1usize, 3u64), (2, 2)] {
        let sys = RadialKernelSystem::sigmoid(n)?;
        let setup = RateSetup::standard(n)?;
        for seed in 0..seeds {
            let exp = random_expansion(&setup.dict, 64, &mut substream(seed, "rate-expansion"))?;
            println!(
                "n = {n}, seed {seed}, sum|beta| = {:.4}",
                coefficient_l1(&exp)
            );
            println!(
                "  {:>3}  {:>12}  {:>12}  {:>6}",
                "N", "l2 error", "bound", "ratio"
            );
            for row in rate_table(&sys, &exp, &setup.grid, &ns)? {
                println!(
                    "  {:>3}  {:>12.6e}  {:>12.6e}  {:>6.3}",
                    row.n_terms,
                    row.l2_error,
                    row.bound,
                    row.l2_error / row.bound
                );
            }
        }
    }
    Ok(())
}
