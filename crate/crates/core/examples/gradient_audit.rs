//! Analytic RQNN and DNN4 derivatives against central differences.
//!
//! ```text
//! cargo run --release --example gradient_audit
//! ```

use radnet::networks::{audit_dnn_gradient, audit_rqnn_gradient};
use radnet::rng::substream;
use radnet::ActivationProfile;

fn main() -> radnet::Result<()> {
    for act in [
        ActivationProfile::sigmoid(),
        ActivationProfile::gaussian_tail(),
    ] {
        for n in 1..=3 {
            let audit =
                audit_rqnn_gradient(&act, n, 3, 50, 1e-3, &mut substream(42, "gradient-audit"))?;
            println!(
                "{:<13} RQNN n = {n}: max rel. error {:.3e}",
                act.name(),
                audit.max_rel_err
            );
        }
        // The worst gaussian-tail sample has dPsi/dw11 about 4e-8 |Psi|, so
        // the difference quotient itself is only good to about 1e-6 there.
        let audit = audit_dnn_gradient(&act, 3, 3, 50, 1e-3, &mut substream(42, "gradient-audit"))?;
        println!(
            "{:<13} DNN4 w11:    max rel. error {:.3e}",
            act.name(),
            audit.max_rel_err
        );
    }
    match audit_rqnn_gradient(
        &ActivationProfile::heaviside(),
        1,
        1,
        1,
        1e-5,
        &mut substream(42, "x"),
    ) {
        Err(e) => println!("heaviside: {e}"),
        Ok(_) => unreachable!("heaviside has no derivative"),
    }
    Ok(())
}
