//! Idempotent integral kernels in factorized form `K(x,y) = Σ_k φ_k(x) κ_k(y)`.
//!
//! A [`Kernel`] in `d` dimensions is a tensor product of one-dimensional
//! [`AxisKernel`]s, so `K(x,y) = Π_i K_i(x_i, y_i)` and the basis is indexed by
//! row-major multi-indices over the axis windows.

mod build;
mod constants;
mod linear;
mod spec;

pub use build::{
    bspline_basis, gram_dual, make_bspline_kernel, make_generator_pair_kernel, make_linear_spline_kernel,
    make_linear_spline_kernel_on, make_shift_invariant_kernel, LINEAR_SPLINE_TAIL,
};
pub use constants::{kernel_constants, r0_prime, r2_crossing, ConstantsOptions, DeltaRow, KernelConstants, QRow, R0Prime};
pub(crate) use constants::{de_inf, ser_inf};
pub use spec::{GeneratorSpec, KernelSpec, KernelType};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::PiecewisePoly;
use crate::quadrature::{integrate_composite, merge_breaks};

/// Which constructor produced a kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    LinearSpline { n: u32 },
    ShiftInvariant { generators: usize },
    Bspline { order: u32 },
    GeneratorPair,
    Averaged { delta0: f64 },
    Custom,
}

/// Sorted interval index over function supports.
#[derive(Clone, Debug)]
pub(crate) struct SupportIndex {
    order: Vec<usize>,
    los: Vec<f64>,
    his: Vec<f64>,
    max_width: f64,
}

impl SupportIndex {
    pub(crate) fn new(supports: &[(f64, f64)]) -> Self {
        let mut order: Vec<usize> = (0..supports.len()).collect();
        order.sort_by(|&a, &b| supports[a].0.partial_cmp(&supports[b].0).unwrap());
        let los = order.iter().map(|&i| supports[i].0).collect();
        let his = order.iter().map(|&i| supports[i].1).collect();
        let max_width = supports.iter().map(|s| s.1 - s.0).fold(0.0, f64::max);
        SupportIndex { order, los, his, max_width }
    }

    /// Indices whose closed support meets `[a, b]`.
    pub(crate) fn query_range(&self, a: f64, b: f64, out: &mut Vec<usize>) {
        out.clear();
        let start = self.los.partition_point(|&lo| lo < a - self.max_width);
        let end = self.los.partition_point(|&lo| lo <= b);
        for p in start..end {
            if self.his[p] >= a {
                out.push(self.order[p]);
            }
        }
    }
}

/// One-dimensional factorized kernel on an interval.
#[derive(Clone, Debug)]
pub struct AxisKernel {
    pub(crate) basis: Vec<PiecewisePoly>,
    pub(crate) cokernels: Vec<PiecewisePoly>,
    pub(crate) labels: Vec<i64>,
    pub(crate) anchors: Vec<f64>,
    pub(crate) boundary: Vec<bool>,
    pub(crate) domain: (f64, f64),
    pub(crate) symmetric: bool,
    pub(crate) continuous: bool,
    pub(crate) basis_index: SupportIndex,
    pub(crate) cokernel_index: SupportIndex,
}

impl AxisKernel {
    pub(crate) fn new(
        basis: Vec<PiecewisePoly>,
        cokernels: Vec<PiecewisePoly>,
        labels: Vec<i64>,
        anchors: Vec<f64>,
        domain: (f64, f64),
        symmetric: bool,
    ) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::Argument("empty basis window".into()));
        }
        if basis.len() != cokernels.len() || basis.len() != labels.len() || basis.len() != anchors.len() {
            return Err(Error::Argument("basis, cokernel, label and anchor counts differ".into()));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::Argument(format!("empty domain {domain:?}")));
        }
        let continuous = basis.iter().chain(&cokernels).all(|f| f.is_continuous(1e-12));
        let bsup: Vec<_> = basis.iter().map(PiecewisePoly::support).collect();
        let csup: Vec<_> = cokernels.iter().map(PiecewisePoly::support).collect();
        let n = basis.len();
        Ok(AxisKernel {
            basis_index: SupportIndex::new(&bsup),
            cokernel_index: SupportIndex::new(&csup),
            basis,
            cokernels,
            labels,
            anchors,
            boundary: vec![false; n],
            domain,
            symmetric,
            continuous,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn basis(&self) -> &[PiecewisePoly] {
        &self.basis
    }

    pub fn cokernels(&self) -> &[PiecewisePoly] {
        &self.cokernels
    }

    /// Window labels (e.g. the integer shift `k` of `h(· - k)`).
    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    /// Largest distance from an anchor to the far end of its basis or cokernel support.
    pub fn support_radius(&self) -> f64 {
        let mut r: f64 = 0.0;
        for (k, a) in self.anchors.iter().enumerate() {
            for f in [&self.basis[k], &self.cokernels[k]] {
                let (lo, hi) = f.support();
                r = r.max((a - lo).abs()).max((hi - a).abs());
            }
        }
        r
    }

    /// Basis indices whose support contains `x`.
    pub fn active_basis(&self, x: f64, out: &mut Vec<usize>) {
        self.basis_index.query_range(x, x, out);
    }

    pub fn active_cokernels(&self, y: f64, out: &mut Vec<usize>) {
        self.cokernel_index.query_range(y, y, out);
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut act = Vec::new();
        self.active_basis(x, &mut act);
        act.iter().map(|&k| self.basis[k].eval(x) * self.cokernels[k].eval(y)).sum()
    }

    /// `∫_domain K(x,z) K(z,y) dz`.
    pub fn compose_at(&self, x: f64, y: f64) -> f64 {
        let mut kx = Vec::new();
        self.active_basis(x, &mut kx);
        let mut my = Vec::new();
        self.active_cokernels(y, &mut my);
        let lists: Vec<&[f64]> = kx
            .iter()
            .map(|&k| self.cokernels[k].breaks())
            .chain(my.iter().map(|&m| self.basis[m].breaks()))
            .collect();
        let breaks = merge_breaks(lists);
        let left: Vec<(f64, &PiecewisePoly)> = kx.iter().map(|&k| (self.basis[k].eval(x), &self.cokernels[k])).collect();
        let right: Vec<(f64, &PiecewisePoly)> = my.iter().map(|&m| (self.cokernels[m].eval(y), &self.basis[m])).collect();
        integrate_composite(&breaks, self.domain.0, self.domain.1, |z| {
            let a: f64 = left.iter().map(|(c, f)| c * f.eval(z)).sum();
            if a == 0.0 {
                return 0.0;
            }
            let b: f64 = right.iter().map(|(c, f)| c * f.eval(z)).sum();
            a * b
        })
    }

    /// `∫_domain K(x,z)^2 dz`.
    pub fn energy_at(&self, x: f64) -> f64 {
        let mut kx = Vec::new();
        self.active_basis(x, &mut kx);
        let lists: Vec<&[f64]> = kx.iter().map(|&k| self.cokernels[k].breaks()).collect();
        let breaks = merge_breaks(lists);
        let left: Vec<(f64, &PiecewisePoly)> = kx.iter().map(|&k| (self.basis[k].eval(x), &self.cokernels[k])).collect();
        integrate_composite(&breaks, self.domain.0, self.domain.1, |z| {
            let a: f64 = left.iter().map(|(c, f)| c * f.eval(z)).sum();
            a * a
        })
    }

    /// Candidate coordinates for a sup over `[c - r, c + r]`: both ends plus the
    /// breakpoints strictly inside, each break with its left limit when `sided`.
    fn window_candidates(c: f64, r: f64, breaks: &[f64], step: Option<f64>, out: &mut Vec<(f64, bool)>) {
        out.clear();
        out.push((c - r, false));
        out.push((c + r, false));
        out.push((c + r, true));
        let i0 = breaks.partition_point(|&b| b <= c - r);
        for &b in &breaks[i0..] {
            if b >= c + r {
                break;
            }
            out.push((b, false));
            out.push((b, true));
        }
        if let Some(h) = step {
            let m = (2.0 * r / h).ceil() as usize;
            for j in 1..m {
                out.push((c - r + 2.0 * r * j as f64 / m as f64, false));
            }
        }
    }

    fn eval_sided(&self, x: f64, xl: bool, y: f64, yl: bool) -> f64 {
        let mut act = Vec::new();
        self.basis_index.query_range(x, x, &mut act);
        act.iter()
            .map(|&k| {
                let fx = if xl { self.basis[k].eval_left(x) } else { self.basis[k].eval(x) };
                let gy = if yl { self.cokernels[k].eval_left(y) } else { self.cokernels[k].eval(y) };
                fx * gy
            })
            .sum()
    }

    pub(crate) fn all_basis_breaks(&self) -> Vec<f64> {
        merge_breaks(self.basis.iter().map(|f| f.breaks()))
    }

    pub(crate) fn all_cokernel_breaks(&self) -> Vec<f64> {
        merge_breaks(self.cokernels.iter().map(|f| f.breaks()))
    }

    pub(crate) fn max_degree(&self) -> usize {
        self.basis.iter().chain(&self.cokernels).map(PiecewisePoly::max_degree).max().unwrap_or(0)
    }

    /// Bounds over the box `[x-r, x+r] × [y-r, y+r]`: `(sup|K|, sup|∂²ₓK|, sup|∂²ᵧK|)`.
    fn box_bounds(&self, x: f64, y: f64, r: f64) -> (f64, f64, f64) {
        let mut act = Vec::new();
        self.basis_index.query_range(x - r, x + r, &mut act);
        let (mut m0, mut mx, mut my) = (0.0, 0.0, 0.0);
        for &k in &act {
            let (f, g) = (&self.basis[k], &self.cokernels[k]);
            let fa = f.max_abs_near(x - r, x + r);
            let ga = g.max_abs_near(y - r, y + r);
            m0 += fa * ga;
            mx += f.derivative().derivative().max_abs_near(x - r, x + r) * ga;
            my += fa * g.derivative().derivative().max_abs_near(y - r, y + r);
        }
        (m0, mx, my)
    }
}

/// Tensor-product kernel on a box in `R^d`.
#[derive(Clone, Debug)]
pub struct Kernel {
    axes: Vec<AxisKernel>,
    family: KernelFamily,
    decay_rate: Option<f64>,
    spec: Option<KernelSpec>,
}

impl Kernel {
    pub fn from_axes(axes: Vec<AxisKernel>, family: KernelFamily) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Argument("kernel needs at least one axis".into()));
        }
        Ok(Kernel { axes, family, decay_rate: None, spec: None })
    }

    pub fn one_dim(axis: AxisKernel, family: KernelFamily) -> Self {
        Kernel { axes: vec![axis], family, decay_rate: None, spec: None }
    }

    /// Tensor power: the same axis kernel on every coordinate.
    pub fn tensor_power(axis: AxisKernel, d: usize, family: KernelFamily) -> Result<Self> {
        Kernel::from_axes(vec![axis; d], family)
    }

    pub fn with_decay_rate(mut self, rate: Option<f64>) -> Self {
        self.decay_rate = rate;
        self
    }

    pub fn with_spec(mut self, spec: KernelSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    pub fn spec(&self) -> Option<&KernelSpec> {
        self.spec.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisKernel] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &AxisKernel {
        &self.axes[i]
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    /// Fitted geometric decay rate of the dual coefficients, when recorded.
    pub fn decay_rate(&self) -> Option<f64> {
        self.decay_rate
    }

    pub fn symmetric(&self) -> bool {
        self.axes.iter().all(|a| a.symmetric)
    }

    pub fn is_continuous(&self) -> bool {
        self.axes.iter().all(|a| a.continuous)
    }

    pub fn support_radius(&self) -> f64 {
        self.axes.iter().map(AxisKernel::support_radius).fold(0.0, f64::max)
    }

    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| a.domain).collect()
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.domain.1 - a.domain.0).product()
    }

    /// Number of basis functions in the (flattened) window.
    pub fn n_basis(&self) -> usize {
        self.axes.iter().map(AxisKernel::len).product()
    }

    /// Row-major multi-index of a flat basis index.
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (i, a) in self.axes.iter().enumerate().rev() {
            idx[i] = k % a.len();
            k /= a.len();
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    /// True when any axis index of `k` is a flagged boundary column.
    pub fn is_boundary(&self, k: usize) -> bool {
        self.multi_index(k).iter().zip(&self.axes).any(|(&i, a)| a.boundary[i])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.axes).all(|(v, a)| {
                let tol = 1e-12 * (1.0 + a.domain.0.abs().max(a.domain.1.abs()));
                *v >= a.domain.0 - tol && *v <= a.domain.1 + tol
            })
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        if !self.contains(x) {
            return Err(Error::Domain { point: x.to_vec(), domain: self.domain() });
        }
        Ok(())
    }

    pub fn basis_eval(&self, k: usize, x: &[f64]) -> f64 {
        self.multi_index(k).iter().zip(&self.axes).zip(x).map(|((&i, a), &v)| a.basis[i].eval(v)).product()
    }

    pub fn cokernel_eval(&self, k: usize, y: &[f64]) -> f64 {
        self.multi_index(k).iter().zip(&self.axes).zip(y).map(|((&i, a), &v)| a.cokernels[i].eval(v)).product()
    }

    /// `K(x, y)`; exact up to rounding.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.axes.iter().zip(x.iter().zip(y)).map(|(a, (&u, &v))| a.eval(u, v)).product()
    }

    /// Nonzero `(k, φ_k(x))` pairs at `x`.
    pub fn active_basis_values(&self, x: &[f64]) -> Vec<(usize, f64)> {
        self.active_values(x, |a, i, v| a.basis[i].eval(v), |a, v, out| a.active_basis(v, out))
    }

    /// Nonzero `(k, κ_k(y))` pairs at `y`.
    pub fn active_cokernel_values(&self, y: &[f64]) -> Vec<(usize, f64)> {
        self.active_values(y, |a, i, v| a.cokernels[i].eval(v), |a, v, out| a.active_cokernels(v, out))
    }

    fn active_values(
        &self,
        x: &[f64],
        val: impl Fn(&AxisKernel, usize, f64) -> f64,
        act: impl Fn(&AxisKernel, f64, &mut Vec<usize>),
    ) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = vec![(0, 1.0)];
        let mut buf = Vec::new();
        for (a, &v) in self.axes.iter().zip(x) {
            act(a, v, &mut buf);
            let vals: Vec<(usize, f64)> =
                buf.iter().map(|&i| (i, val(a, i, v))).filter(|(_, f)| *f != 0.0).collect();
            let mut next = Vec::with_capacity(out.len() * vals.len());
            for &(k, f) in &out {
                for &(i, g) in &vals {
                    next.push((k * a.len() + i, f * g));
                }
            }
            out = next;
        }
        out
    }

    /// `sup_{|x'|,|y'| ≤ δ} |K(x+x', y+y') - K(x,y)|` (sup-norm boxes).
    ///
    /// Candidates are the box corners and breakpoints on each axis, which is exact
    /// for kernels that are piecewise multilinear; higher degrees add a sub-grid and
    /// a second-derivative correction so the result never under-estimates.
    pub fn modulus(&self, delta: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(Error::Argument(format!("modulus window must be nonnegative, got {delta}")));
        }
        self.check(x)?;
        self.check(y)?;
        if delta == 0.0 {
            return Ok(0.0);
        }
        let base = self.eval_unchecked(x, y);
        // per-axis candidate lists of (value at corner) over (x', y') pairs
        let any_high = self.axes.iter().any(|a| a.max_degree() > 1);
        let mut per_axis: Vec<Vec<f64>> = Vec::with_capacity(self.dim());
        let mut bounds = Vec::with_capacity(self.dim());
        for (a, (&u, &v)) in self.axes.iter().zip(x.iter().zip(y)) {
            let step = (a.max_degree() > 1).then(|| (delta / 16.0).min(1e-2));
            let (mut cx, mut cy) = (Vec::new(), Vec::new());
            AxisKernel::window_candidates(u, delta, &a.all_basis_breaks(), step, &mut cx);
            AxisKernel::window_candidates(v, delta, &a.all_cokernel_breaks(), step, &mut cy);
            let mut vals = Vec::with_capacity(cx.len() * cy.len());
            for &(px, lx) in &cx {
                for &(py, ly) in &cy {
                    vals.push(a.eval_sided(px, lx, py, ly));
                }
            }
            per_axis.push(vals);
            if any_high {
                let (m0, mx, my) = a.box_bounds(u, v, delta);
                let c = step.map_or(0.0, |h| h * h / 8.0 * (mx + my));
                bounds.push((m0, c));
            }
        }
        let mut best: f64 = 0.0;
        let mut idx = vec![0usize; self.dim()];
        loop {
            let val: f64 = idx.iter().zip(&per_axis).map(|(&i, vs)| vs[i]).product();
            best = best.max((val - base).abs());
            let mut ax = 0;
            loop {
                if ax == self.dim() {
                    break;
                }
                idx[ax] += 1;
                if idx[ax] < per_axis[ax].len() {
                    break;
                }
                idx[ax] = 0;
                ax += 1;
            }
            if ax == self.dim() {
                break;
            }
        }
        // interpolation slack for curved pieces: Σ_i c_i Π_{j≠i} sup|K_j|
        let mut corr = 0.0;
        for (i, &(_, c)) in bounds.iter().enumerate() {
            if c > 0.0 {
                let others: f64 = bounds.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| t.0).product();
                corr += c * others;
            }
        }
        Ok(best + corr)
    }

    /// `|∫ K(x,z) K(z,y) dz - K(x,y)|` by composite Gauss–Legendre over breakpoint cells.
    pub fn reproducing_defect(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        let comp: f64 = self.axes.iter().zip(x.iter().zip(y)).map(|(a, (&u, &v))| a.compose_at(u, v)).product();
        Ok((comp - self.eval_unchecked(x, y)).abs())
    }

    /// `∫ |K(x,z)|² dz`.
    pub fn energy_integral(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.axes.iter().zip(x).map(|(a, &u)| a.energy_at(u)).product())
    }

    /// The same kernel multiplied by `c` (applied to the first axis's cokernels).
    pub fn with_scaled_cokernels(&self, c: f64) -> Kernel {
        let mut out = self.clone();
        let a = &mut out.axes[0];
        a.cokernels = a.cokernels.iter().map(|f| f.scale(c)).collect();
        out.family = KernelFamily::Custom;
        out.spec = None;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k1() -> Kernel {
        make_linear_spline_kernel_on(1, (-20.0, 20.0), None).unwrap()
    }

    #[test]
    fn k1_diagonal_value() {
        assert_abs_diff_eq!(k1().eval(&[0.0], &[0.0]).unwrap(), 3f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn k1_off_diagonal_geometric() {
        let rho = 3f64.sqrt() - 2.0;
        assert_abs_diff_eq!(k1().eval(&[0.0], &[5.0]).unwrap(), 3f64.sqrt() * rho.powi(5), epsilon = 1e-15);
    }

    #[test]
    fn eval_outside_domain_errors() {
        assert!(matches!(k1().eval(&[25.0], &[0.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn k1_is_symmetric_pointwise() {
        let k = k1();
        for (x, y) in [(0.3, 1.7), (-2.25, 4.5), (0.0, 0.5)] {
            assert_abs_diff_eq!(k.eval(&[x], &[y]).unwrap(), k.eval(&[y], &[x]).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn modulus_of_single_hat() {
        let axis = AxisKernel::new(
            vec![PiecewisePoly::hat(0.0, 1.0)],
            vec![PiecewisePoly::indicator(-5.0, 5.0)],
            vec![0],
            vec![0.0],
            (-2.0, 2.0),
            false,
        )
        .unwrap();
        let k = Kernel::one_dim(axis, KernelFamily::Custom);
        assert_abs_diff_eq!(k.modulus(0.25, &[0.0], &[0.0]).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn modulus_zero_window() {
        assert_eq!(k1().modulus(0.0, &[0.4], &[1.3]).unwrap(), 0.0);
    }

    #[test]
    fn modulus_rejects_negative_window() {
        assert!(k1().modulus(-0.1, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn scaled_cokernels_break_idempotency() {
        let k = k1().with_scaled_cokernels(1.1);
        let d = k.reproducing_defect(&[0.0], &[0.0]).unwrap();
        // (1.1² - 1.1)·√3
        assert_abs_diff_eq!(d, 0.11 * 3f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn tensor_indexing_roundtrip() {
        let k = Kernel::tensor_power(k1().axis(0).clone(), 2, KernelFamily::LinearSpline { n: 1 }).unwrap();
        for flat in [0, 5, 38, k.n_basis() - 1] {
            assert_eq!(k.flat_index(&k.multi_index(flat)), flat);
        }
        let v = k.eval(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v, 3.0, epsilon = 1e-12);
    }
}
