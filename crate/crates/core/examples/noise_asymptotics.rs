//! Monte-Carlo study of the pointwise reconstruction error under uniform noise on
//! lattices `δZ`, against the displayer-column variance and `∫|K(0,z)|² dz`.
//!
//! `cargo run --release --example noise_asymptotics -- [trials] [seed]`

use std::sync::Arc;

use rksampling::kernel::make_linear_spline_kernel_on;
use rksampling::noise::{noise_sweep, Displayer, MonteCarloOptions, NoiseModel};
use rksampling::operator::Signal;

fn main() -> rksampling::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let kernel = Arc::new(make_linear_spline_kernel_on(1, (-12.0, 12.0), None)?);
    let g = Signal::zero(kernel.clone());
    let noise = NoiseModel::uniform_with_sigma(0.1)?;
    let opts = MonteCarloOptions { trials, seed, allow_measured: true, ..Default::default() };
    for displayer in [Displayer::NeumannAp, Displayer::PlainT] {
        let (rows, reports) = noise_sweep(&kernel, &g, &[0.2, 0.1, 0.05], &[0.0], &noise, displayer, &opts)?;
        println!("{displayer:?}");
        println!("{:>6} {:>11} {:>11} {:>13} {:>10}", "delta", "mean", "var", "var/(d s^2)", "predicted");
        for (row, rep) in rows.iter().zip(&reports) {
            let p = &rep.points[0];
            println!(
                "{:>6} {:>+11.3e} {:>11.4e} {:>13.4} {:>10.4}",
                row.delta,
                row.mean_error,
                row.variance,
                row.scaled_variance.unwrap_or(f64::NAN),
                p.predicted_variance / (rep.alpha_delta * noise.sigma2)
            );
        }
        println!("energy integral at 0: {:.6}", rows[0].energy);
    }
    Ok(())
}
