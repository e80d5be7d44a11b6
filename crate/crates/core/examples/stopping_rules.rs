//! Noise-driven stopping steps and the error bound of stopped iterations.
//!
//! `cargo run --example stopping_rules -- [snr_db] [r0]`

use rksampling::reconstruct::{noisy_error_bound, sner_objective, sner_y0, stopping_step_snr, stopping_step_sner, Certificate, NoiseBudget};

fn main() -> rksampling::Result<()> {
    let mut args = std::env::args().skip(1);
    let snr_db: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(40.0);
    let r0: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let b = NoiseBudget { snr_db, sner_db: snr_db + 20.0, r0 };
    let n0 = stopping_step_snr(&b)?;
    let n1 = stopping_step_sner(&b)?;
    println!("SNR {snr_db} dB, r0 {r0}: n0 = {n0}");
    println!("SNER {} dB: y0 = {:.4}, n1 = {n1}", b.sner_db, sner_y0(&b)?);
    for y in [n1 as f64, sner_y0(&b)?.floor(), sner_y0(&b)?] {
        println!("  r0^y + y 10^(-SNER/20) at y = {y:.3}: {:.6}", sner_objective(&b, y));
    }

    let cert = Certificate { delta0: 0.1, r1: 2.39, r0, r2: (2.0 * 2.39 + r0) * r0, grid_resolution: 1e-3 };
    let masses = vec![0.1; 200];
    let (c0, eps) = (10.0, 10.0 * 10f64.powf(-snr_db / 20.0));
    println!("{:>4} {:>12}", "n", "bound");
    for n in [0, n0 / 2, n0, 2 * n0] {
        println!("{n:>4} {:>12.4e}", noisy_error_bound(&cert, &masses, c0, eps, Some(n), 2.0)?);
    }
    println!("limit {:>8.4e}", noisy_error_bound(&cert, &masses, c0, eps, None, 2.0)?);
    Ok(())
}
