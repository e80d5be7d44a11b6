//! Two-sided sampling inequalities: the kernel-constant sandwich on random
//! signals and the derivative-based bound for a single hat.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rksampling::kernel::{make_linear_spline_kernel_on, ConstantsOptions};
use rksampling::noise::{derivative_stability_check, lattice_bundle, stability_check};
use rksampling::operator::{build_bundle, Signal};
use rksampling::sampling::{generate_jittered, normalized_indicator_bupu};

fn main() -> rksampling::Result<()> {
    let kernel = Arc::new(make_linear_spline_kernel_on(1, (-12.0, 12.0), None)?);
    let set = generate_jittered(0.25, 0.1, kernel.domain(), 31)?;
    let bundle = build_bundle(&kernel, &normalized_indicator_bupu(&set, 0.3)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let signals: Vec<Signal> = (0..50).map(|_| Signal::random(kernel.clone(), &mut rng)).collect();
    let opts = ConstantsOptions::with_resolution(5e-3);
    for p in [1.0, 2.0, f64::INFINITY] {
        let r = stability_check(&bundle, p, &signals, &opts)?;
        println!(
            "p = {p:<4} r0 {:.4}, r0' {:.4}, using {:?}: {} violations, worst slack {:.3}",
            r.r0,
            r.r0_prime.unwrap_or(f64::NAN),
            r.route,
            r.violations,
            r.worst_slack
        );
    }

    let hat = Signal::basis(kernel.clone(), kernel.axis(0).labels().iter().position(|&l| l == 0).unwrap());
    for step in [0.25, 0.5, 1.0] {
        let r = derivative_stability_check(&hat, 1.0, &lattice_bundle(&kernel, step)?, 2.0)?;
        println!(
            "hat on lattice {step}: |f'|/|f| = {:.3}, precondition {}, C = {:?}, holds {:?}",
            r.derivative_ratio, r.precondition_met, r.constant, r.holds
        );
    }
    Ok(())
}
