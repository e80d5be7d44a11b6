use std::sync::Arc;

use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::kernel::{make_linear_spline_kernel_on, make_shift_invariant_kernel, ConstantsOptions};
use crate::sampling::{generate_jittered, normalized_indicator_bupu, voronoi_bupu, SamplingSet};

fn k1() -> Arc<Kernel> {
    Arc::new(make_linear_spline_kernel_on(1, (-12.0, 12.0), None).unwrap())
}

fn label_index(k: &Kernel, l: i64) -> usize {
    k.axis(0).labels().iter().position(|&x| x == l).unwrap()
}

fn lattice_bundle(k: &Arc<Kernel>, step: f64) -> OperatorBundle {
    let n = (12.0 / step).round() as i32;
    let xs: Vec<f64> = (-n..=n).map(|i| i as f64 * step).collect();
    let set = SamplingSet::from_1d(&xs, (-12.0, 12.0)).unwrap();
    build_bundle(k, &normalized_indicator_bupu(&set, step).unwrap()).unwrap()
}

#[test]
fn t_reproduces_basis_functions() {
    let k = k1();
    let i0 = label_index(&k, 0);
    let t = apply_t(&k, Source::Signal(&Signal::basis(k.clone(), i0))).unwrap();
    assert!(!t.fallback);
    for (j, &c) in t.signal.coeffs().iter().enumerate() {
        assert_abs_diff_eq!(c, if j == i0 { 1.0 } else { 0.0 }, epsilon = 1e-8);
    }
    let z = apply_t(&k, Source::Signal(&Signal::zero(k.clone()))).unwrap();
    assert!(z.signal.coeffs().iter().all(|&c| c == 0.0));
}

#[test]
fn t_of_unit_cell_indicator() {
    // κ_k = √3 Σ_j ρ^{|j-k|} φ_j, ∫_0^1 φ_0 = ∫_0^1 φ_1 = 1/2
    let k = k1();
    let rho = 3f64.sqrt() - 2.0;
    let g = [PiecewisePoly::indicator(0.0, 1.0)];
    let t = apply_t(&k, Source::Separable(&g)).unwrap();
    for l in -3..=4i64 {
        let e = if l >= 1 { l - 1 } else { -l };
        let expect = 3f64.sqrt() * rho.powi(e as i32) * (1.0 + rho) / 2.0;
        assert_abs_diff_eq!(t.signal.coeffs()[label_index(&k, l)], expect, epsilon = 1e-12);
    }
    let f = |y: &[f64]| if (0.0..1.0).contains(&y[0]) { 1.0 } else { 0.0 };
    let fb = apply_t(&k, Source::Function(&f)).unwrap();
    assert!(fb.fallback);
    assert!(fb.signal.coeff_distance(&t.signal) < 1e-12);
}

#[test]
fn lattice_matrix_entries() {
    let k = k1();
    let b = lattice_bundle(&k, 1.0);
    let g0 = b.set().points().iter().position(|p| p[0] == 0.0).unwrap();
    assert_abs_diff_eq!(b.a.get(g0, g0), (3.0 + 3f64.sqrt()) / 4.0, epsilon = 1e-12);
    // constant along diagonals away from the edges
    for off in -2i32..=2 {
        let v = b.a.get(g0, (g0 as i32 + off) as usize);
        for s in [-3i32, 3] {
            let g = (g0 as i32 + s) as usize;
            assert_abs_diff_eq!(b.a.get(g, (g as i32 + off) as usize), v, epsilon = 1e-12);
        }
    }
    assert_eq!(b.masses(), b.bupu().masses());
    assert!(b.consistency_defect() <= 1e-12);
}

#[test]
fn p_and_s_are_linear_maps() {
    let k = k1();
    let b = lattice_bundle(&k, 0.5);
    let m = b.n_samples();
    assert!(b.apply_p(&vec![0.0; m]).unwrap().coeffs().iter().all(|&c| c == 0.0));
    let mut e = vec![0.0; m];
    e[7] = 1.0;
    assert_eq!(b.apply_p(&e).unwrap().coeffs(), &b.tu.column(7)[..]);
    let s = b.apply_s(&e).unwrap();
    for (c, kg) in s.coeffs().iter().zip(b.kg.column(7)) {
        assert_abs_diff_eq!(*c, 0.5 * kg, epsilon = 1e-15);
    }
    assert!(b.apply_p(&[1.0]).is_err());
}

#[test]
fn operator_bounds_on_random_signals() {
    let k = k1();
    let delta = 0.1;
    let set = generate_jittered(delta, 0.2, vec![(-12.0, 12.0)], 11).unwrap();
    let bupu = normalized_indicator_bupu(&set, 1.5 * delta).unwrap();
    let b = build_bundle(&k, &bupu).unwrap();
    let d0 = b.delta();
    let c = crate::kernel::kernel_constants(&k, &[d0], &[], &ConstantsOptions::with_resolution(5e-3)).unwrap();
    let (r0, r1) = (c.rows[0].r0, c.r1);
    assert!(r0 < 1.0, "r0 = {r0}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let g = Signal::random(k.clone(), &mut rng);
        let gn = g.norm(f64::INFINITY);
        let q = b.apply_q(&g).norm(f64::INFINITY);
        assert!(q <= r0 * 1.05 * gn, "{q} > r0 {r0} · {gn}");
        let pg = b.apply_p(&b.sample(&g)).unwrap();
        assert!(pg.sub(&g).norm(f64::INFINITY) <= r1 * r0 * gn);
        // A (g(γ)) = (Pg)(γ)
        let lhs = b.apply_a(&b.sample(&g)).unwrap();
        for (l, p) in lhs.iter().zip(b.set().points()) {
            assert_abs_diff_eq!(*l, pg.eval(p), epsilon = 1e-12);
        }
    }
}

#[test]
fn frame_operator_bound() {
    let k = k1();
    let b = lattice_bundle(&k, 0.02);
    let c = crate::kernel::kernel_constants(&k, &[0.02], &[], &ConstantsOptions::with_resolution(5e-3)).unwrap();
    let r2 = c.rows[0].r2;
    assert!(r2 < 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let g = Signal::random(k.clone(), &mut rng);
        let sg = b.apply_s(&b.sample(&g)).unwrap();
        assert!(sg.sub(&g).norm(f64::INFINITY) <= r2 * 1.05 * g.norm(f64::INFINITY));
    }
}

#[test]
fn semigroup_identities() {
    let k = k1();
    let b = lattice_bundle(&k, 0.25);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = Signal::random(k.clone(), &mut rng);
    let tg = apply_t(&k, Source::Signal(&g)).unwrap().signal;
    let pg = b.apply_p(&b.sample(&g)).unwrap();
    let ptg = b.apply_p(&b.sample(&tg)).unwrap();
    let tpg = apply_t(&k, Source::Signal(&pg)).unwrap().signal;
    assert!(ptg.coeff_distance(&pg) < 1e-10);
    assert!(tpg.coeff_distance(&pg) < 1e-10);
    let sg = b.apply_s(&b.sample(&g)).unwrap();
    let stg = b.apply_s(&b.sample(&tg)).unwrap();
    let tsg = apply_t(&k, Source::Signal(&sg)).unwrap().signal;
    assert!(stg.coeff_distance(&sg) < 1e-10);
    assert!(tsg.coeff_distance(&sg) < 1e-10);
}

#[test]
fn neumann_series() {
    let k = k1();
    let t = |g: &Signal| apply_t(&k, Source::Signal(g)).unwrap().signal;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = Signal::random(k.clone(), &mut rng);
    let r = neumann_apply(t, &g, 10, 1e-12, 0.0).unwrap();
    assert!(r.term_norms.is_empty() && r.converged);

    let b = lattice_bundle(&k, 0.1);
    let p = |f: &Signal| b.apply_p(&b.sample(f)).unwrap();
    let f0 = p(&g);
    let res = neumann_apply(p, &f0, 200, 1e-13, 0.6).unwrap();
    assert!(res.converged && !res.measured_only);
    assert!(res.signal.unwrap().coeff_distance(&g) < 1e-11);
    for w in res.term_norms.windows(2) {
        assert!(w[1] <= 0.6 * w[0] * 1.05);
    }
}

#[test]
fn neumann_refuses_expanding_maps() {
    let k = k1();
    let g = Signal::basis(k.clone(), label_index(&k, 0));
    let err = neumann_apply(|f: &Signal| f.scale(-1.5), &g, 10, 1e-12, 1.2).unwrap_err();
    assert!(matches!(err, Error::NoCertificate { .. }));
}

#[test]
fn averaged_kernel_converges() {
    let k = k1();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> =
        (0..40).map(|i| (vec![-2.0 + 0.1 * i as f64], vec![-1.73 + 0.09 * i as f64])).collect();
    let d: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|&d0| averaged_kernel(&k, d0, 0.0).unwrap().defect(&pairs).unwrap()).collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");

    let opts = ConstantsOptions::with_resolution(1e-2);
    let avg = averaged_kernel(&k, 0.2, 0.0).unwrap();
    let bound = averaging_bound(&k, 0.2, &opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3 {
        let f = Signal::random(k.clone(), &mut rng);
        let diff = avg.apply(&f).sub(&f).norm(f64::INFINITY);
        assert!(diff <= bound * 1.05 * f.norm(f64::INFINITY));
    }
}

#[test]
fn haar_averaging_is_exact() {
    let haar = PiecewisePoly::indicator(0.0, 1.0);
    let k = Arc::new(make_shift_invariant_kernel(&[haar], (0.0, 8.0), None).unwrap());
    let avg = averaged_kernel(&k, 1.0, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = Signal::random(k.clone(), &mut rng);
    assert!(avg.apply(&f).coeff_distance(&f) < 1e-14);
    assert!(avg.defect(&[(vec![2.5], vec![2.2]), (vec![3.1], vec![3.9])]).unwrap() < 1e-14);
}

#[test]
fn bundle_round_trip() {
    let k = k1();
    let set = generate_jittered(0.4, 0.2, vec![(-12.0, 12.0)], 9).unwrap();
    let bupu = voronoi_bupu(&set).unwrap();
    let b = build_bundle(&k, &bupu).unwrap();
    let dir = tempfile::tempdir().unwrap();
    b.save(dir.path()).unwrap();
    let c = OperatorBundle::load(dir.path(), &k, &bupu).unwrap();
    assert_eq!(b.a, c.a);
    assert_eq!(b.tu, c.tu);
    let other = normalized_indicator_bupu(&set, 1.0).unwrap();
    assert!(OperatorBundle::load(dir.path(), &k, &other).is_err());
}

#[test]
fn voronoi_bundle_matches_masses() {
    // Σ_k TU[k, γ] φ_k integrates to the mass when Σ_k φ_k = 1
    let k = k1();
    let set = generate_jittered(0.5, 0.3, vec![(-12.0, 12.0)], 21).unwrap();
    let b = build_bundle(&k, &voronoi_bupu(&set).unwrap()).unwrap();
    let q = b.apply_q(&Signal::zero(k.clone()));
    assert_eq!(q.norm(1.0), 0.0);
    assert_eq!(b.masses().len(), set.len());
}
