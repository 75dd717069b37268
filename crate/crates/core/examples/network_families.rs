//! One small network from every family, evaluated at a point, plus the
//! reductions between families and the JSON document format.
//!
//! ```text
//! cargo run --release --example network_families
//! ```

use radnet::networks::{
    complete_square, AffineParams, DeepParams, MatrixConstrainedParams, QuadraticParams,
    ScalarLayer,
};
use radnet::{ActivationProfile, NetworkParams, RadialParams};

fn main() -> radnet::Result<()> {
    let act = ActivationProfile::sigmoid();
    let x = [0.3, -0.7];
    let alpha = vec![1.0, -0.5];
    let w = vec![vec![0.4, 1.0], vec![-1.2, 0.3]];
    let theta = vec![0.1, 0.8];
    let identity = vec![1.0, 0.0, 0.0, 1.0];

    let affine = AffineParams::new(alpha.clone(), w.clone(), theta.clone())?;
    let nets = [
        NetworkParams::Alnn(affine.clone()),
        NetworkParams::Gqnn(QuadraticParams::new(
            alpha.clone(),
            w.clone(),
            vec![vec![-1.0, 0.5, 0.5, -2.0], vec![0.0; 4]],
            theta.clone(),
        )?),
        NetworkParams::Mcnn(MatrixConstrainedParams::new(
            alpha.clone(),
            w.clone(),
            vec![-1.5, -0.5],
            theta.clone(),
            vec![identity.clone(), identity.clone()],
        )?),
        NetworkParams::Rqnn(RadialParams::new(
            alpha.clone(),
            w.clone(),
            vec![-1.5, -0.5],
            theta.clone(),
        )?),
        NetworkParams::Sbqnn(affine.clone()),
        NetworkParams::Cunn(affine.clone()),
    ];
    for net in &nets {
        println!(
            "{:<6} N = {}  params = {:>2}  Psi(x) = {:+.12}",
            net.family().as_str(),
            net.neurons(),
            net.param_count(),
            net.eval(&act, &x)?
        );
    }
    let deep = NetworkParams::Dnn4(DeepParams::new(
        ScalarLayer {
            alpha: vec![1.0, -1.0],
            w: vec![2.0, 0.5],
            theta: vec![0.0, 0.3],
        },
        ScalarLayer {
            alpha: vec![0.7],
            w: vec![1.5],
            theta: vec![-0.2],
        },
    )?);
    println!(
        "DNN4   params = {:>2}  Psi(0.3) = {:+.12}",
        deep.param_count(),
        deep.eval(&act, &[0.3])?
    );

    // GQNN with A = 0 is the ALNN; MCNN with identity matrices is the RQNN.
    let gq0 = NetworkParams::Gqnn(QuadraticParams::new(
        alpha.clone(),
        w.clone(),
        vec![vec![0.0; 4]; 2],
        theta.clone(),
    )?);
    println!(
        "GQNN(A=0) - ALNN   = {:e}",
        gq0.eval(&act, &x)? - nets[0].eval(&act, &x)?
    );
    println!(
        "MCNN(I)   - RQNN   = {:e}",
        nets[2].eval(&act, &x)? - nets[3].eval(&act, &x)?
    );

    // Each radial decision function is xi |x - y|^2 + kappa.
    if let NetworkParams::Rqnn(p) = &nets[3] {
        for j in 0..p.neurons() {
            let form = complete_square(&p.w[j], p.xi[j], p.theta[j])?;
            println!(
                "neuron {j}: centre {:?}, kappa {:.6}, xi {}",
                form.center, form.kappa, form.xi
            );
        }
    }
    println!("{}", nets[3].to_json()?);
    Ok(())
}
