//! The sampling operators on a jittered set: `T`, `P`, `S`, the matrix `A` and the
//! residual `Q`, plus saving and reloading the precomputed bundle.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rksampling::kernel::make_linear_spline_kernel_on;
use rksampling::operator::{apply_t, build_bundle, OperatorBundle, Signal, Source};
use rksampling::poly::PiecewisePoly;
use rksampling::sampling::{generate_jittered, maximal_gap, normalized_indicator_bupu};

fn main() -> rksampling::Result<()> {
    let kernel = Arc::new(make_linear_spline_kernel_on(1, (-10.0, 10.0), None)?);
    let set = generate_jittered(0.1, 0.25, kernel.domain(), 3)?;
    let bupu = normalized_indicator_bupu(&set, maximal_gap(&set)?)?;
    let bundle = build_bundle(&kernel, &bupu)?;
    println!("{} samples, delta {:.4}, {} basis functions", bundle.n_samples(), bundle.delta(), kernel.n_basis());

    // T projects L^p onto V; the unit-cell indicator lands on geometric coefficients
    let box_fn = [PiecewisePoly::indicator(0.0, 1.0)];
    let t = apply_t(&kernel, Source::Separable(&box_fn))?;
    println!("T(chi[0,1)) coefficients near 0: {:?}", &t.signal.coeffs()[9..14]);

    let g = Signal::random(kernel.clone(), &mut ChaCha8Rng::seed_from_u64(4));
    let c = bundle.sample(&g);
    let pg = bundle.apply_p(&c)?;
    let sg = bundle.apply_s(&c)?;
    let sup = g.norm(f64::INFINITY);
    println!("||Pg - g|| / ||g|| = {:.4e}", pg.sub(&g).norm(f64::INFINITY) / sup);
    println!("||Sg - g|| / ||g|| = {:.4e}", sg.sub(&g).norm(f64::INFINITY) / sup);
    println!("||Qg|| / ||g||     = {:.4e}", bundle.apply_q(&g).norm(f64::INFINITY) / sup);
    println!("A consistency defect {:.2e}", bundle.consistency_defect());

    let dir = std::env::temp_dir().join("rksampling-bundle");
    bundle.save(&dir)?;
    let back = OperatorBundle::load(&dir, &kernel, &bupu)?;
    println!("reloaded bundle from {}: A identical = {}", dir.display(), back.a == bundle.a);
    Ok(())
}
