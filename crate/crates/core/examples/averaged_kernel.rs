//! Cube-averaged kernels `K_{δ0}` and how fast they approach `K`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rksampling::kernel::{make_linear_spline_kernel_on, ConstantsOptions};
use rksampling::operator::{averaged_kernel, averaging_bound, Signal};

fn main() -> rksampling::Result<()> {
    let kernel = Arc::new(make_linear_spline_kernel_on(1, (-10.0, 10.0), None)?);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..50).map(|i| (vec![-3.0 + 0.12 * i as f64], vec![-2.9 + 0.11 * i as f64])).collect();
    let f = Signal::random(kernel.clone(), &mut ChaCha8Rng::seed_from_u64(1));
    let opts = ConstantsOptions::with_resolution(1e-2);
    println!("{:>6} {:>12} {:>14} {:>10}", "delta0", "defect", "||T'f - f||", "bound");
    for d0 in [0.4, 0.2, 0.1, 0.05] {
        let avg = averaged_kernel(&kernel, d0, 0.0)?;
        let diff = avg.apply(&f).sub(&f).norm(f64::INFINITY) / f.norm(f64::INFINITY);
        println!("{d0:>6} {:>12.4e} {diff:>14.4e} {:>10.4}", avg.defect(&pairs)?, averaging_bound(&kernel, d0, &opts)?);
    }
    Ok(())
}
