//! Preconditioned frame reconstruction on a dense jittered set, where the frame
//! certificate `r2 < 1` holds, and on a sparse one, where it diverges.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rksampling::kernel::{make_linear_spline_kernel_on, ConstantsOptions};
use rksampling::operator::{build_bundle, Signal};
use rksampling::reconstruct::{frame_reconstruct, Certificate, IterationOptions};
use rksampling::sampling::{generate_jittered, voronoi_bupu};
use rksampling::Error;

fn main() -> rksampling::Result<()> {
    let kernel = Arc::new(make_linear_spline_kernel_on(1, (-12.0, 12.0), None)?);
    let g = Signal::random(kernel.clone(), &mut ChaCha8Rng::seed_from_u64(2));
    for step in [0.02, 1.0] {
        let set = generate_jittered(step, 0.3, kernel.domain(), 5)?;
        let bundle = build_bundle(&kernel, &voronoi_bupu(&set)?)?;
        let cert = Certificate::compute(&kernel, bundle.delta(), &ConstantsOptions::with_resolution(5e-3))?;
        print!("step {step}: delta {:.4}, r2 {:.4} -> ", bundle.delta(), cert.r2);
        let opts = IterationOptions { nmax: 100, tol: 1e-13, certified: Some(cert.r2), ..Default::default() };
        match frame_reconstruct(&bundle, &bundle.sample(&g), &opts) {
            Ok(r) => println!(
                "{} steps, max ratio {:.4}, relative error {:.2e}",
                r.trace.steps.len() - 1,
                r.trace.max_ratio(),
                r.signal.sub(&g).norm(f64::INFINITY) / g.norm(f64::INFINITY)
            ),
            Err(Error::Divergence { step, ratio, .. }) => println!("diverged at step {step} (ratio {ratio:.3})"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
