//! Builds each kernel family and checks the reproducing identity and the
//! energy integral `∫|K(x,z)|² dz = K(x,x)` of the symmetric ones.

use rksampling::kernel::{make_bspline_kernel, make_generator_pair_kernel, make_linear_spline_kernel_on, make_shift_invariant_kernel, Kernel};
use rksampling::poly::PiecewisePoly;

fn sup_defect(k: &Kernel) -> f64 {
    let grid: Vec<f64> = (0..21).map(|i| -4.0 + 0.4 * i as f64).collect();
    let mut m = 0.0f64;
    for &x in &grid {
        for &y in &grid {
            m = m.max(k.reproducing_defect(&[x], &[y]).unwrap());
        }
    }
    m
}

fn main() -> rksampling::Result<()> {
    let knots: Vec<f64> = (-10..=10).map(f64::from).collect();
    // biorthogonal pair: hats against their own dual on a short window
    let hats: Vec<PiecewisePoly> = (-3..=3).map(|c| PiecewisePoly::hat(c as f64, 1.0)).collect();
    let (duals, _, _) = rksampling::kernel::gram_dual(&hats)?;
    let anchors: Vec<f64> = (-3..=3).map(f64::from).collect();
    let kernels = [
        ("K_1", make_linear_spline_kernel_on(1, (-10.0, 10.0), None)?),
        ("K_3", make_linear_spline_kernel_on(3, (-10.0, 10.0), None)?),
        ("Haar", make_shift_invariant_kernel(&[PiecewisePoly::indicator(0.0, 1.0)], (-10.0, 10.0), None)?),
        ("quadratic B-spline", make_bspline_kernel(2, &knots, None)?),
        ("hat/dual pair", make_generator_pair_kernel(hats, duals, anchors, (-10.0, 10.0))?),
    ];
    println!("{:<20} {:>6} {:>10} {:>12} {:>12}", "kernel", "basis", "symmetric", "sup defect", "K(0,0)");
    for (name, k) in &kernels {
        println!("{:<20} {:>6} {:>10} {:>12.2e} {:>12.6}", name, k.n_basis(), k.symmetric(), sup_defect(k), k.eval(&[0.0], &[0.0])?);
    }
    let k1 = &kernels[0].1;
    for x in [0.0, 0.5] {
        println!("K_1: energy at {x} = {:.10}, K(x,x) = {:.10}", k1.energy_integral(&[x])?, k1.eval(&[x], &[x])?);
    }
    Ok(())
}
