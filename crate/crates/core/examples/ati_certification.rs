//! Certifies the AtI inequalities for the sigmoid kernel family in n = 1, 2
//! and prints how much slack the proven constants leave.
//!
//! ```text
//! cargo run --release --example ati_certification
//! ```

use radnet::wavelets::{
    check_ati_item1, check_ati_item2, check_ati_mass, check_double_lipschitz, AtIQuintuple,
    RadialKernelSystem, SamplingPlan, SigmoidKernelConstants,
};

fn main() -> radnet::Result<()> {
    for n in [1, 2] {
        let sys = RadialKernelSystem::sigmoid(n)?.with_decay_constant();
        let c_sigma = sys.c_sigma();
        let consts = SigmoidKernelConstants::new(n, sys.c_n, c_sigma);
        let quint = AtIQuintuple::for_radial(n, sys.c_n, c_sigma)?;
        println!(
            "n = {n}: C_n = {:.12}, C_sigma = {c_sigma:.6}, R = {}",
            sys.c_n, sys.box_half_width
        );
        let plan = SamplingPlan::default().with_samples(20_000);
        let reports = [
            check_ati_item1(&sys, &quint.with_c(consts.item1), &plan)?,
            check_ati_item2(&sys, &quint, &plan)?,
            check_double_lipschitz(&sys, &quint, &plan)?,
        ];
        for (rep, c) in reports
            .iter()
            .zip([consts.item1, consts.item2, consts.double_lipschitz])
        {
            println!(
                "  {:<17} samples {:>6}  excluded {:>5}  violations {}  empirical C {:.4e}  proven C {:.4e}  slack x{:.1}",
                rep.item,
                rep.samples,
                rep.excluded,
                rep.violations,
                rep.empirical_c,
                c,
                c / rep.empirical_c
            );
        }
        let mass = check_ati_mass(&sys, &SamplingPlan::default().with_k_range(-2, 4), 5, 1e-6)?;
        println!(
            "  {:<17} max |mass - 1| = {:.2e}, violations {}",
            mass.item, mass.empirical_c, mass.violations
        );
    }
    Ok(())
}
