//! Piecewise-linear view of an axis kernel used by the constant estimators.
//!
//! Pieces of degree > 1 are refined and replaced by their linear interpolant;
//! `err` bounds `|K - K_lin|` uniformly so every sup computed on the surrogate
//! can be inflated back to a bound for the original kernel.

use crate::poly::PiecewisePoly;
use crate::quadrature::merge_breaks;

use super::{AxisKernel, SupportIndex};

#[derive(Clone, Debug)]
pub(crate) struct LinFn {
    breaks: Vec<f64>,
    v0: Vec<f64>,
    slope: Vec<f64>,
    sup: f64,
}

impl LinFn {
    fn from_linear(f: &PiecewisePoly) -> Self {
        let mut v0 = Vec::with_capacity(f.pieces().len());
        let mut slope = Vec::with_capacity(f.pieces().len());
        for p in f.pieces() {
            let c = p.coeffs();
            v0.push(c.first().copied().unwrap_or(0.0));
            slope.push(c.get(1).copied().unwrap_or(0.0));
        }
        LinFn { breaks: f.breaks().to_vec(), v0, slope, sup: f.max_abs() }
    }

    pub(crate) fn support(&self) -> (f64, f64) {
        (self.breaks[0], *self.breaks.last().unwrap())
    }

    /// Value and slope on the piece containing `x` (right-continuous).
    #[inline]
    pub(crate) fn local(&self, x: f64) -> (f64, f64) {
        let (lo, hi) = self.support();
        if !(x >= lo && x < hi) {
            return (0.0, 0.0);
        }
        let i = self.breaks.partition_point(|&b| b <= x) - 1;
        (self.v0[i] + self.slope[i] * (x - self.breaks[i]), self.slope[i])
    }

    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        self.local(x).0
    }

    #[inline]
    pub(crate) fn eval_left(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x > lo && x <= hi) {
            return 0.0;
        }
        let i = self.breaks.partition_point(|&b| b < x) - 1;
        self.v0[i] + self.slope[i] * (x - self.breaks[i])
    }

    /// `sup |f|` on `[lo, hi]` (linear pieces peak at their ends).
    pub(crate) fn max_abs_on(&self, lo: f64, hi: f64) -> f64 {
        let (a, b) = self.support();
        let (lo, hi) = (lo.max(a), hi.min(b));
        if hi < lo {
            return 0.0;
        }
        let mut m = self.eval(lo).abs().max(self.eval_left(hi).abs()).max(self.eval(hi).abs());
        let i0 = self.breaks.partition_point(|&x| x <= lo);
        for &x in &self.breaks[i0..] {
            if x >= hi {
                break;
            }
            m = m.max(self.eval(x).abs()).max(self.eval_left(x).abs());
        }
        m
    }

    pub(crate) fn breaks(&self) -> &[f64] {
        &self.breaks
    }
}

/// Replaces curved pieces by linear interpolants on a grid of step `h`.
/// Returns the surrogate and the sup of the interpolation error.
fn linearize(f: &PiecewisePoly, h: f64) -> (LinFn, f64) {
    if f.max_degree() <= 1 {
        return (LinFn::from_linear(f), 0.0);
    }
    let (lin, errs) = f.refined(h).linear_interpolant();
    (LinFn::from_linear(&lin), errs.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub(crate) struct LinearAxis {
    pub(crate) basis: Vec<LinFn>,
    pub(crate) cok: Vec<LinFn>,
    pub(crate) index: SupportIndex,
    pub(crate) bbreaks: Vec<f64>,
    pub(crate) cbreaks: Vec<f64>,
    pub(crate) domain: (f64, f64),
    /// Span of the non-boundary basis supports.
    pub(crate) interior: (f64, f64),
    pub(crate) continuous: bool,
    /// Uniform bound on `|K - K_lin|`.
    pub(crate) err: f64,
}

/// Where a coordinate sits along a path parametrized by `z`.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Coord {
    /// `z + offset`.
    Moving(f64),
    /// A fixed value, taken as a left limit when the flag is set.
    Fixed(f64, bool),
}

impl LinearAxis {
    pub(crate) fn new(axis: &AxisKernel, step: f64) -> Self {
        let (basis, berr): (Vec<_>, Vec<_>) = axis.basis().iter().map(|f| linearize(f, step)).unzip();
        let (cok, cerr): (Vec<_>, Vec<_>) = axis.cokernels().iter().map(|f| linearize(f, step)).unzip();
        let mut err = 0.0;
        if berr.iter().chain(&cerr).any(|&e| e > 0.0) {
            // |φκ - φ'κ'| <= e_φ sup|κ| + sup|φ'| e_κ, summed over the basis functions alive at one x
            let mut events: Vec<(f64, f64)> = Vec::new();
            for k in 0..basis.len() {
                let w = berr[k] * axis.cokernels()[k].max_abs() + basis[k].sup * cerr[k];
                let (lo, hi) = basis[k].support();
                events.push((lo, w));
                events.push((hi, -w));
            }
            events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(b.1.partial_cmp(&a.1).unwrap()));
            let mut acc: f64 = 0.0;
            for (_, w) in events {
                acc += w;
                err = f64::max(err, acc);
            }
        }
        let sup: Vec<_> = basis.iter().map(LinFn::support).collect();
        let mut interior = (f64::INFINITY, f64::NEG_INFINITY);
        for (s, &b) in sup.iter().zip(axis.boundary_flags()) {
            if !b {
                interior = (interior.0.min(s.0), interior.1.max(s.1));
            }
        }
        if !(interior.0 < interior.1) {
            interior = axis.domain();
        }
        LinearAxis {
            interior,
            index: SupportIndex::new(&sup),
            bbreaks: merge_breaks(basis.iter().map(|f| f.breaks())),
            cbreaks: merge_breaks(cok.iter().map(|f| f.breaks())),
            basis,
            cok,
            domain: axis.domain(),
            continuous: axis.is_continuous(),
            err,
        }
    }

    /// Coefficients `[c0, c1, c2]` of `u ↦ K(X(zm+u), Y(zm+u))` around `zm`.
    pub(crate) fn path_quad(&self, x: Coord, y: Coord, zm: f64, act: &mut Vec<usize>) -> [f64; 3] {
        let xv = match x {
            Coord::Moving(o) => zm + o,
            Coord::Fixed(v, _) => v,
        };
        self.index.query_range(xv, xv, act);
        let mut c = [0.0; 3];
        for &k in act.iter() {
            let (p0, p1) = match x {
                Coord::Moving(_) => self.basis[k].local(xv),
                Coord::Fixed(v, false) => (self.basis[k].eval(v), 0.0),
                Coord::Fixed(v, true) => (self.basis[k].eval_left(v), 0.0),
            };
            if p0 == 0.0 && p1 == 0.0 {
                continue;
            }
            let (q0, q1) = match y {
                Coord::Moving(o) => self.cok[k].local(zm + o),
                Coord::Fixed(v, false) => (self.cok[k].eval(v), 0.0),
                Coord::Fixed(v, true) => (self.cok[k].eval_left(v), 0.0),
            };
            c[0] += p0 * q0;
            c[1] += p0 * q1 + p1 * q0;
            c[2] += p1 * q1;
        }
        c
    }

    /// Cheap bound on `|K(X, Y)|` over `X` anywhere and `Y - X ∈ [lo, hi]`.
    pub(crate) fn band_envelope(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        for (f, g) in self.basis.iter().zip(&self.cok) {
            let (a, b) = f.support();
            total += f.sup * g.max_abs_on(a + lo, b + hi);
        }
        total + self.err
    }

    /// `K(x, y)` on the surrogate.
    #[cfg(test)]
    pub(crate) fn eval(&self, x: f64, y: f64, act: &mut Vec<usize>) -> f64 {
        self.index.query_range(x, x, act);
        act.iter().map(|&k| self.basis[k].eval(x) * self.cok[k].eval(y)).sum()
    }
}

/// `sup |c0 + c1 u + c2 u²|` over `|u| ≤ r`.
#[inline]
pub(crate) fn quad_sup_abs(c: [f64; 3], r: f64) -> f64 {
    let f = |u: f64| c[0] + u * (c[1] + u * c[2]);
    let mut m = f(-r).abs().max(f(r).abs());
    if c[2] != 0.0 {
        let v = -c[1] / (2.0 * c[2]);
        if v.abs() < r {
            m = m.max(f(v).abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_bspline_kernel, make_linear_spline_kernel_on};

    #[test]
    fn linear_kernels_have_no_surrogate_error() {
        let k = make_linear_spline_kernel_on(2, (-8.0, 8.0), None).unwrap();
        let la = LinearAxis::new(k.axis(0), 1e-2);
        assert_eq!(la.err, 0.0);
        let mut act = Vec::new();
        for (x, y) in [(0.3, -0.2), (1.0, 2.5), (-3.7, -3.1)] {
            assert!((la.eval(x, y, &mut act) - k.eval(&[x], &[y]).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn surrogate_error_bounds_quadratic_kernel() {
        let knots: Vec<f64> = (-8..=8).map(f64::from).collect();
        let k = make_bspline_kernel(2, &knots, None).unwrap();
        let la = LinearAxis::new(k.axis(0), 0.05);
        assert!(la.err > 0.0 && la.err < 5e-2, "{}", la.err);
        let mut act = Vec::new();
        for i in 0..200 {
            let x = -3.0 + 0.031 * i as f64;
            let y = 0.7 - 0.017 * i as f64;
            let d = (la.eval(x, y, &mut act) - k.eval(&[x], &[y]).unwrap()).abs();
            assert!(d <= la.err, "{d} > {}", la.err);
        }
    }

    #[test]
    fn path_quad_matches_pointwise() {
        let k = make_linear_spline_kernel_on(1, (-8.0, 8.0), None).unwrap();
        let la = LinearAxis::new(k.axis(0), 1e-2);
        let mut act = Vec::new();
        let (t, zm) = (0.37, 1.21);
        let c = la.path_quad(Coord::Moving(t), Coord::Moving(0.0), zm, &mut act);
        for u in [-0.05, 0.0, 0.04] {
            let direct = la.eval(zm + u + t, zm + u, &mut act);
            assert!((c[0] + c[1] * u + c[2] * u * u - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn quad_sup_uses_vertex() {
        assert_eq!(quad_sup_abs([1.0, 0.0, -1.0], 2.0), 3.0);
        assert_eq!(quad_sup_abs([0.5, 0.0, -1.0], 0.5), 0.5);
    }
}
