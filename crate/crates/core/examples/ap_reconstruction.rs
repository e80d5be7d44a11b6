//! Iterative approximation-projection reconstruction from irregular samples,
//! with its discrete twin on sample values.
//!
//! `cargo run --release --example ap_reconstruction -- [delta] [seed]`

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rksampling::kernel::{make_linear_spline_kernel_on, ConstantsOptions};
use rksampling::operator::{build_bundle, Signal};
use rksampling::reconstruct::{ap_discrete, ap_reconstruct, Certificate, IterationOptions};
use rksampling::sampling::{generate_jittered, maximal_gap, normalized_indicator_bupu};

fn main() -> rksampling::Result<()> {
    let mut args = std::env::args().skip(1);
    let step: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let kernel = Arc::new(make_linear_spline_kernel_on(1, (-12.0, 12.0), None)?);
    let set = generate_jittered(step, 0.25, kernel.domain(), seed)?;
    let bundle = build_bundle(&kernel, &normalized_indicator_bupu(&set, maximal_gap(&set)?)?)?;
    let cert = Certificate::compute(&kernel, bundle.delta(), &ConstantsOptions::with_resolution(5e-3))?;
    println!("{} samples, delta0 {:.4}, r0 {:.4}, r1 {:.4}", bundle.n_samples(), bundle.delta(), cert.r0, cert.r1);

    let g = Signal::random(kernel.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
    let c0 = bundle.sample(&g);
    let opts = IterationOptions { nmax: 100, tol: 1e-13, certified: Some(cert.r0), ..Default::default() };
    let r = ap_reconstruct(&bundle, &c0, &opts)?;
    println!("{:>4} {:>12} {:>12} {:>8}", "n", "increment", "residual", "ratio");
    for s in &r.trace.steps {
        println!("{:>4} {:>12.4e} {:>12.4e} {:>8}", s.step, s.increment, s.residual, s.ratio.map_or("-".into(), |x| format!("{x:.4}")));
    }
    println!(
        "stop {:?}, measured only {}, relative error {:.2e}",
        r.trace.stop_reason,
        r.trace.measured_only,
        r.signal.sub(&g).norm(f64::INFINITY) / g.norm(f64::INFINITY)
    );

    let d = ap_discrete(&bundle, &c0, &IterationOptions { p: 2.0, ..opts })?;
    let dev = d.values.iter().zip(&bundle.sample(&r.signal)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("discrete iteration: {} steps, max deviation from continuous at samples {dev:.2e}", d.trace.steps.len() - 1);
    Ok(())
}
