//! Decay and regularity constants of the linear-spline kernels.
//!
//! `cargo run --release --example kernel_constants -- [N] [grid]`

use std::time::Instant;

use rksampling::kernel::{kernel_constants, make_linear_spline_kernel_on, r0_prime, ConstantsOptions};

fn main() -> rksampling::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let grid: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5e-3);
    let kernel = make_linear_spline_kernel_on(n, (-15.0, 15.0), None)?;
    let opts = ConstantsOptions::with_resolution(grid);

    let start = Instant::now();
    let deltas = [0.05, 0.1, 0.2, 0.3];
    let c = kernel_constants(&kernel, &deltas, &[1.0, 2.0, f64::INFINITY], &opts)?;
    println!("K_{n}: r1 = {:.6}  ({:.2?})", c.r1, start.elapsed());
    let inner = kernel_constants(&kernel, &deltas, &[], &ConstantsOptions { interior: true, ..opts.clone() })?;
    println!("away from the window edges: r1 = {:.6}", inner.r1);
    println!("{:>6} {:>10} {:>10} {:>10}", "delta", "r0", "r2", "r0/delta");
    for row in &c.rows {
        println!("{:>6} {:>10.5} {:>10.5} {:>10.4}", row.delta, row.r0, row.r2, row.r0 / row.delta);
    }
    for row in &inner.rows {
        println!("interior {:>6} {:>10.5} {:>10.5} {:>10.4}", row.delta, row.r0, row.r2, row.r0 / row.delta);
    }

    println!("\ncontinuous-kernel bound, windows |t| <= delta0/2:");
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "delta0", "first", "second", "p=1", "p=2", "p=inf");
    for d0 in [0.1, 0.2, 0.3, 0.4] {
        let v: Vec<f64> = [1.0, 2.0, f64::INFINITY]
            .iter()
            .map(|&p| r0_prime(&kernel, d0, p, &opts).map(|r| r.value))
            .collect::<Result<_, _>>()?;
        let r = r0_prime(&kernel, d0, 2.0, &opts)?;
        println!("{:>6} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}", d0, r.first, r.second, v[0], v[1], v[2]);
    }
    Ok(())
}
