use crate::error::{Error, Result};
use crate::linalg::{bandwidth, BandCholesky, Mat};
use crate::poly::{PiecewisePoly, Poly};

use super::{AxisKernel, Kernel, KernelFamily, SupportIndex};

/// Geometric tails of the linear-spline cokernels stop once `|ratio|^m` drops below this.
pub const LINEAR_SPLINE_TAIL: f64 = 1e-14;

const ORTHO_TOL: f64 = 1e-8;

/// `K_N` with hats `h(· - k)` for `k` in `window` (inclusive) on the domain
/// `[kmin - 1, kmax + 1]`.
pub fn make_linear_spline_kernel(n: u32, window: (i64, i64)) -> Result<Kernel> {
    if window.1 < window.0 {
        return Err(Error::Argument(format!("empty basis window {window:?}")));
    }
    make_linear_spline_kernel_on(n, ((window.0 - 1) as f64, (window.1 + 1) as f64), Some(window))
}

/// `K_N` on `domain`; the default window holds every hat supported inside the domain.
pub fn make_linear_spline_kernel_on(n: u32, domain: (f64, f64), window: Option<(i64, i64)>) -> Result<Kernel> {
    if n == 0 {
        return Err(Error::Argument("N must be at least 1".into()));
    }
    let (kmin, kmax) = window.unwrap_or(((domain.0 + 1.0).ceil() as i64, (domain.1 - 1.0).floor() as i64));
    if kmax < kmin {
        return Err(Error::Argument(format!("empty basis window ({kmin}, {kmax})")));
    }
    let nf = n as f64;
    let root = (9.0 * nf * nf - 6.0 * nf).sqrt();
    let rho = root - 3.0 * nf + 1.0;
    let scale = 3.0 * nf * nf / root;
    let m = if rho == 0.0 { 0 } else { (LINEAR_SPLINE_TAIL.ln() / rho.abs().ln()).ceil() as i64 };
    let mut basis = Vec::new();
    let mut cok = Vec::new();
    for k in kmin..=kmax {
        basis.push(PiecewisePoly::hat(k as f64, 1.0));
        let narrow: Vec<PiecewisePoly> = (k - m..=k + m).map(|l| PiecewisePoly::hat(l as f64, 1.0 / nf)).collect();
        let terms: Vec<(f64, &PiecewisePoly)> = (k - m..=k + m)
            .zip(&narrow)
            .map(|(l, f)| (scale * rho.powi((k - l).abs() as i32), f))
            .collect();
        cok.push(PiecewisePoly::linear_combination(&terms).unwrap().trimmed());
    }
    let labels: Vec<i64> = (kmin..=kmax).collect();
    let anchors = labels.iter().map(|&k| k as f64).collect();
    let mut axis = AxisKernel::new(basis, cok, labels, anchors, domain, n == 1)?;
    let last = axis.len() - 1;
    axis.boundary[0] = true;
    axis.boundary[last] = true;
    Ok(Kernel::one_dim(axis, KernelFamily::LinearSpline { n }).with_decay_rate(Some(rho.abs())))
}

/// `f(x) · (a + b x)`.
fn mul_affine(f: &PiecewisePoly, a: f64, b: f64) -> PiecewisePoly {
    let pieces = f
        .pieces()
        .iter()
        .zip(f.breaks())
        .map(|(p, &x0)| p.mul(&Poly::linear(a + b * x0, b)))
        .collect();
    PiecewisePoly::new(f.breaks().to_vec(), pieces).unwrap()
}

/// Normalized B-splines of the given degree on `knots` (Cox–de Boor).
pub fn bspline_basis(degree: u32, knots: &[f64]) -> Result<Vec<PiecewisePoly>> {
    let p = degree as usize;
    if knots.len() < p + 2 {
        return Err(Error::Argument(format!("need at least {} knots for degree {p}", p + 2)));
    }
    if knots.iter().any(|t| !t.is_finite()) || knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("knots must be finite and strictly increasing".into()));
    }
    let mut level: Vec<PiecewisePoly> = knots.windows(2).map(|w| PiecewisePoly::indicator(w[0], w[1])).collect();
    for q in 1..=p {
        let mut next = Vec::with_capacity(level.len() - 1);
        for i in 0..level.len() - 1 {
            let (ti, tiq, ti1, tiq1) = (knots[i], knots[i + q], knots[i + 1], knots[i + q + 1]);
            let left = mul_affine(&level[i], -ti / (tiq - ti), 1.0 / (tiq - ti));
            let right = mul_affine(&level[i + 1], tiq1 / (tiq1 - ti1), -1.0 / (tiq1 - ti1));
            next.push(left.add(&right).trimmed());
        }
        level = next;
    }
    Ok(level)
}

/// Exact Gram matrix `⟨f_i, g_j⟩` of two families (entries vanish off overlapping supports).
pub(crate) fn cross_gram(f: &[PiecewisePoly], g: &[PiecewisePoly]) -> Mat {
    let gsup: Vec<_> = g.iter().map(PiecewisePoly::support).collect();
    let idx = SupportIndex::new(&gsup);
    let mut out = Mat::zeros(f.len(), g.len());
    let mut act = Vec::new();
    for (i, fi) in f.iter().enumerate() {
        let (lo, hi) = fi.support();
        idx.query_range(lo, hi, &mut act);
        for &j in &act {
            out.set(i, j, fi.mul(&g[j]).integral_total());
        }
    }
    out
}

/// Dual family `φ̃_i = Σ_j (G^{-1})_{ij} φ_j` from the Gram matrix of `phis`,
/// together with `G^{-1}` and a 1-norm condition estimate.
pub fn gram_dual(phis: &[PiecewisePoly]) -> Result<(Vec<PiecewisePoly>, Mat, f64)> {
    let g = cross_gram(phis, phis);
    let w = bandwidth(&g);
    let inv = BandCholesky::factor(&g, w)?.inverse();
    let cond = g.norm1() * inv.norm1();
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::Construction(format!("Gram matrix is near-singular (condition estimate {cond:.3e})")));
    }
    let big = inv.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let duals = (0..phis.len())
        .map(|i| {
            let terms: Vec<(f64, &PiecewisePoly)> = (0..phis.len())
                .map(|j| (inv.get(i, j), &phis[j]))
                .filter(|(c, _)| c.abs() > 1e-16 * big)
                .collect();
            PiecewisePoly::linear_combination(&terms).unwrap().trimmed()
        })
        .collect();
    Ok((duals, inv, cond))
}

/// Least-squares slope of `log|row_j|` against `|j - i|`, as a geometric ratio.
fn fit_decay(inv: &Mat, i: usize) -> Option<f64> {
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let diag = inv.get(i, i).abs();
    for j in 0..inv.cols {
        let v = inv.get(i, j).abs();
        if j == i || v <= 1e-13 * diag {
            continue;
        }
        let x = i.abs_diff(j) as f64;
        let y = v.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1.0;
    }
    if n < 2.0 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Some(slope.exp())
}

/// Gram-inverse kernel `K(x,y) = Σ B_i(x) b_ij B_j(y)` for degree-`order` B-splines.
/// `window` selects a contiguous range of B-spline indices; default is all of them.
pub fn make_bspline_kernel(order: u32, knots: &[f64], window: Option<(usize, usize)>) -> Result<Kernel> {
    if order == 0 {
        return Err(Error::Argument("B-spline order must be at least 1".into()));
    }
    let span = knots.last().copied().unwrap_or(0.0) - knots.first().copied().unwrap_or(0.0);
    if knots.windows(2).any(|w| !(w[1] - w[0] > 1e-9 * span.abs().max(1.0))) {
        return Err(Error::Argument("degenerate knot sequence".into()));
    }
    let all = bspline_basis(order, knots)?;
    let (i0, i1) = window.unwrap_or((0, all.len() - 1));
    if i1 < i0 || i1 >= all.len() {
        return Err(Error::Argument(format!("window ({i0}, {i1}) outside 0..{}", all.len())));
    }
    let basis: Vec<PiecewisePoly> = all[i0..=i1].to_vec();
    let (cok, inv, _) = gram_dual(&basis)?;
    let n = basis.len();
    let rate = fit_decay(&inv, n / 2);
    let labels: Vec<i64> = (i0..=i1).map(|i| i as i64).collect();
    let anchors = basis
        .iter()
        .map(|b| {
            let (lo, hi) = b.support();
            0.5 * (lo + hi)
        })
        .collect();
    let domain = (knots[0], *knots.last().unwrap());
    let mut axis = AxisKernel::new(basis, cok, labels, anchors, domain, true)?;
    let reach = match rate {
        Some(r) if r > 0.0 && r < 1.0 => (1e-6f64.ln() / r.ln()).ceil() as usize,
        _ => n,
    };
    for i in 0..n {
        axis.boundary[i] = i < reach || n - 1 - i < reach;
    }
    Ok(Kernel::one_dim(axis, KernelFamily::Bspline { order }).with_decay_rate(rate))
}

/// Worst deviation of a cross-Gram matrix from the identity: `(diagonal, off-diagonal)`.
fn identity_deviation(g: &Mat) -> (f64, f64) {
    let (mut diag, mut off): (f64, f64) = (0.0, 0.0);
    for i in 0..g.rows {
        for j in 0..g.cols {
            if i == j {
                diag = diag.max((g.get(i, j) - 1.0).abs());
            } else {
                off = off.max(g.get(i, j).abs());
            }
        }
    }
    (diag, off)
}

/// `K(x,y) = Σ_i Σ_k φ_i(x-k) φ_i(y-k)` for orthonormal shifts of the generators.
/// Generators are given at shift 0; the default window keeps every shift whose
/// support lies in the domain.
pub fn make_shift_invariant_kernel(
    generators: &[PiecewisePoly],
    domain: (f64, f64),
    window: Option<(i64, i64)>,
) -> Result<Kernel> {
    if generators.is_empty() {
        return Err(Error::Argument("no generators".into()));
    }
    let mut basis = Vec::new();
    let mut labels = Vec::new();
    for g in generators {
        let (lo, hi) = g.support();
        let (kmin, kmax) =
            window.unwrap_or(((domain.0 - lo).ceil() as i64, (domain.1 - hi).floor() as i64));
        for k in kmin..=kmax {
            basis.push(g.shifted(k as f64));
            labels.push(k);
        }
    }
    if basis.is_empty() {
        return Err(Error::Argument("empty basis window".into()));
    }
    let (diag, off) = identity_deviation(&cross_gram(&basis, &basis));
    if diag.max(off) > ORTHO_TOL {
        return Err(Error::Construction(format!(
            "shifts are not orthonormal (worst Gram deviation: diagonal {diag:.6}, off-diagonal {off:.6})"
        )));
    }
    let anchors = labels.iter().map(|&k| k as f64).collect();
    let axis = AxisKernel::new(basis.clone(), basis, labels, anchors, domain, true)?;
    Ok(Kernel::one_dim(axis, KernelFamily::ShiftInvariant { generators: generators.len() }))
}

/// `K(x,y) = Σ_λ φ_λ(x) φ̃_λ(y)` for a biorthogonal pair of localized families.
pub fn make_generator_pair_kernel(
    phis: Vec<PiecewisePoly>,
    phitildes: Vec<PiecewisePoly>,
    anchors: Vec<f64>,
    domain: (f64, f64),
) -> Result<Kernel> {
    if phis.len() != phitildes.len() || phis.len() != anchors.len() {
        return Err(Error::Argument("families and anchors must have equal length".into()));
    }
    let mut sorted = anchors.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("anchors must be distinct".into()));
    }
    let (diag, off) = identity_deviation(&cross_gram(&phis, &phitildes));
    if diag.max(off) > ORTHO_TOL {
        return Err(Error::Construction(format!(
            "families are not biorthogonal (worst deviation: diagonal {diag:.6}, off-diagonal {off:.6})"
        )));
    }
    let symmetric = phis == phitildes;
    let labels = (0..phis.len() as i64).collect();
    let axis = AxisKernel::new(phis, phitildes, labels, anchors, domain, symmetric)?;
    Ok(Kernel::one_dim(axis, KernelFamily::GeneratorPair))
}
