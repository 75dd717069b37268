//! Rewrites a wavelet expansion as an RQNN with two neurons per atom and
//! checks the two agree pointwise.
//!
//! ```text
//! cargo run --release --example wavelets_to_rqnn
//! ```

use radnet::approximation::atom_center;
use radnet::approximation::{random_expansion, to_rqnn, RateSetup};
use radnet::field::Grid;
use radnet::rng::substream;
use radnet::wavelets::{eval_psi, RadialKernelSystem};
use radnet::ActivationProfile;

fn main() -> radnet::Result<()> {
    let act = ActivationProfile::sigmoid();
    for n in [1, 2] {
        let sys = RadialKernelSystem::sigmoid(n)?;
        let setup = RateSetup::standard(n)?;
        let exp = random_expansion(&setup.dict, 12, &mut substream(5, "conversion"))?;
        let net = to_rqnn(&sys, &exp)?;
        let grid =
            Grid::midpoint_box(&vec![-3.0; n], &vec![3.0; n], if n == 1 { 600 } else { 60 })?;
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            let x = grid.node(i);
            let direct: f64 = exp
                .terms()
                .iter()
                .map(|t| t.beta * eval_psi(&sys, t.atom.k, &x, &atom_center(&t.atom, n).unwrap()))
                .sum();
            worst = worst.max((net.eval(&act, &x)? - direct).abs());
        }
        println!(
            "n = {n}: {} atoms -> {} neurons, max |RQNN - expansion| = {worst:.2e} over {} points",
            exp.len(),
            net.neurons(),
            grid.len()
        );
    }
    Ok(())
}
