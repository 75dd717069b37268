//! Decay constants `C_sigma` of the built-in activations and of a tabulated
//! one, per dimension and derivative order.
//!
//! ```text
//! cargo run --release --example activation_decay
//! ```

use radnet::activation::{decay_constant, decay_samples, verify_decay, TableActivation};
use radnet::ActivationProfile;

fn main() -> radnet::Result<()> {
    let knots: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
    let values: Vec<f64> = knots.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
    let acts = [
        ActivationProfile::sigmoid(),
        ActivationProfile::gaussian_tail(),
        ActivationProfile::table(TableActivation::new(knots, values)?),
    ];
    let r = 1.0;
    for act in &acts {
        println!("{}", act.name());
        for n in 1..=3 {
            let per_order: Vec<String> = (0..=act.smoothness_order())
                .map(|i| {
                    let rep = verify_decay(act, r, n, i, &decay_samples(r, n, i));
                    format!(
                        "i={i}: {} {:.4e}",
                        if rep.holds { "ok  " } else { "FAIL" },
                        rep.empirical_c
                    )
                })
                .collect();
            println!(
                "  n = {n}  C_sigma = {:<12.6}  {}",
                decay_constant(act, r, n),
                per_order.join("  ")
            );
        }
    }
    // The table is extended by its end values, so its left tail stops at
    // sigmoid(-10) instead of decaying: the check rejects it.
    Ok(())
}
