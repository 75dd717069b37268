//! Plants a sparse wavelet expansion, samples it, and lets matching pursuit
//! find it again from the samples alone.
//!
//! ```text
//! cargo run --release --example matching_pursuit
//! ```

use radnet::approximation::{
    analyze_greedy, l2_error, synthesize, DictionaryBounds, FrameExpansion, FrameTerm, WaveletAtom,
};
use radnet::field::Grid;
use radnet::wavelets::RadialKernelSystem;

fn main() -> radnet::Result<()> {
    let sys = RadialKernelSystem::sigmoid(1)?;
    let grid = Grid::midpoint_box(&[-14.0], &[14.0], 2048)?;
    let dict = DictionaryBounds {
        k_min: 0,
        k_max: 3,
        center_lo: vec![-2.0],
        center_hi: vec![2.0],
    };
    let planted = FrameExpansion::new(vec![
        FrameTerm {
            atom: WaveletAtom::new(0, vec![-1]),
            beta: 0.8,
        },
        FrameTerm {
            atom: WaveletAtom::new(2, vec![3]),
            beta: -0.5,
        },
        FrameTerm {
            atom: WaveletAtom::new(3, vec![-10]),
            beta: 0.3,
        },
    ])?;
    let f = synthesize(&sys, &planted, &grid)?;
    println!(
        "dictionary: {} atoms, |f| = {:.4}",
        dict.atoms().len(),
        f.l2_norm()
    );
    for iterations in [1, 3, 10, 50] {
        let found = analyze_greedy(&sys, &f, &dict, iterations)?;
        let err = l2_error(&sys, &planted, &found, &grid)?;
        println!(
            "{iterations:>3} iterations: {:>2} terms, residual {err:.3e}",
            found.len()
        );
    }
    let found = analyze_greedy(&sys, &f, &dict, 50)?;
    let mut strongest: Vec<&FrameTerm> = found.terms().iter().collect();
    strongest.sort_by(|a, b| b.beta.abs().total_cmp(&a.beta.abs()));
    for t in strongest.iter().take(5) {
        println!(
            "  k = {}, j = {:?}: beta = {:+.6}",
            t.atom.k, t.atom.j, t.beta
        );
    }
    Ok(())
}
