use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::poly::{integrate_max_abs, PiecewisePoly, Poly};
use crate::quadrature::{gl8, merge_breaks};
use crate::sampling::SamplingSet;

/// How a norm was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    /// Closed form on polynomial pieces (1-D).
    Exact,
    /// Tensor Gauss–Legendre per breakpoint cell.
    GaussLegendre,
    /// Vertices of a grid ten times finer than the breakpoints.
    Grid,
}

/// Element `f = Σ_k c_k φ_k` of the range space of a kernel.
#[derive(Clone, Debug)]
pub struct Signal {
    kernel: Arc<Kernel>,
    coeffs: Vec<f64>,
}

impl Signal {
    pub fn new(kernel: Arc<Kernel>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != kernel.n_basis() {
            return Err(Error::Dimension { expected: kernel.n_basis(), got: coeffs.len() });
        }
        Ok(Signal { kernel, coeffs })
    }

    pub fn zero(kernel: Arc<Kernel>) -> Self {
        let n = kernel.n_basis();
        Signal { kernel, coeffs: vec![0.0; n] }
    }

    /// The basis function `φ_k`.
    pub fn basis(kernel: Arc<Kernel>, k: usize) -> Self {
        let mut s = Self::zero(kernel);
        s.coeffs[k] = 1.0;
        s
    }

    /// Coefficients drawn uniformly from `[-1, 1]`.
    pub fn random(kernel: Arc<Kernel>, rng: &mut impl Rng) -> Self {
        let coeffs = (0..kernel.n_basis()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Signal { kernel, coeffs }
    }

    pub(crate) fn from_parts(kernel: &Arc<Kernel>, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), kernel.n_basis());
        Signal { kernel: kernel.clone(), coeffs }
    }

    pub fn kernel(&self) -> &Arc<Kernel> {
        &self.kernel
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.kernel.active_basis_values(x).into_iter().map(|(k, v)| self.coeffs[k] * v).sum()
    }

    /// `(f(γ))_γ`.
    pub fn sample(&self, set: &SamplingSet) -> Vec<f64> {
        set.points().iter().map(|p| self.eval(p)).collect()
    }

    pub fn add(&self, o: &Signal) -> Signal {
        self.combine(o, 1.0)
    }

    pub fn sub(&self, o: &Signal) -> Signal {
        self.combine(o, -1.0)
    }

    fn combine(&self, o: &Signal, s: f64) -> Signal {
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + s * b).collect();
        Signal { kernel: self.kernel.clone(), coeffs }
    }

    pub fn scale(&self, k: f64) -> Signal {
        Signal { kernel: self.kernel.clone(), coeffs: self.coeffs.iter().map(|c| c * k).collect() }
    }

    /// Largest coefficient difference.
    pub fn coeff_distance(&self, o: &Signal) -> f64 {
        self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Piecewise-polynomial form (1-D only).
    pub fn to_poly(&self) -> Option<PiecewisePoly> {
        if self.kernel.dim() != 1 {
            return None;
        }
        let basis = self.kernel.axis(0).basis();
        let terms: Vec<(f64, &PiecewisePoly)> = self.coeffs.iter().copied().zip(basis).collect();
        PiecewisePoly::linear_combination(&terms)
    }

    pub fn norm_method(&self, p: f64) -> NormMethod {
        if self.kernel.dim() == 1 {
            NormMethod::Exact
        } else if p.is_infinite() {
            NormMethod::Grid
        } else {
            NormMethod::GaussLegendre
        }
    }

    /// `‖f‖_p` over the domain, `p ∈ [1, ∞]`.
    pub fn norm(&self, p: f64) -> f64 {
        if self.kernel.dim() == 1 {
            return match self.to_poly() {
                Some(f) => piecewise_norm(&f, p),
                None => 0.0,
            };
        }
        let axes: Vec<Vec<f64>> = self
            .kernel
            .axes()
            .iter()
            .map(|a| {
                let (lo, hi) = a.domain();
                let mut b = merge_breaks(a.basis().iter().map(|f| f.breaks()));
                b.retain(|&x| x > lo && x < hi);
                b.insert(0, lo);
                b.push(hi);
                b
            })
            .collect();
        if p.is_infinite() {
            let fine: Vec<Vec<f64>> = axes
                .iter()
                .map(|b| {
                    let mut out = Vec::with_capacity(10 * b.len());
                    for w in b.windows(2) {
                        out.extend((0..10).map(|j| w[0] + (w[1] - w[0]) * j as f64 / 10.0));
                    }
                    // stay inside the half-open domain
                    out.push(b[b.len() - 1] - 1e-12 * (1.0 + b[b.len() - 1].abs()));
                    out
                })
                .collect();
            let mut m: f64 = 0.0;
            for_each_product(&fine, |x, _| m = m.max(self.eval(x).abs()));
            return m;
        }
        let (gx, gw) = gl8();
        let nodes: Vec<Vec<(f64, f64)>> = axes
            .iter()
            .map(|b| {
                let mut out = Vec::with_capacity(8 * b.len());
                for w in b.windows(2) {
                    let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                    out.extend(gx.iter().zip(gw).map(|(x, wt)| (c + h * x, h * wt)));
                }
                out
            })
            .collect();
        let coords: Vec<Vec<f64>> = nodes.iter().map(|v| v.iter().map(|t| t.0).collect()).collect();
        let weights: Vec<Vec<f64>> = nodes.iter().map(|v| v.iter().map(|t| t.1).collect()).collect();
        let mut total = 0.0;
        for_each_product(&coords, |x, idx| {
            let w: f64 = idx.iter().enumerate().map(|(ax, &i)| weights[ax][i]).product();
            total += w * self.eval(x).abs().powf(p);
        });
        total.powf(1.0 / p)
    }
}

/// Visits every point of the tensor grid `axes[0] × axes[1] × …`.
pub(crate) fn for_each_product<T: Copy>(axes: &[Vec<T>], mut f: impl FnMut(&[T], &[usize])) {
    if axes.iter().any(Vec::is_empty) {
        return;
    }
    let d = axes.len();
    let mut idx = vec![0usize; d];
    let mut x: Vec<T> = axes.iter().map(|a| a[0]).collect();
    loop {
        f(&x, &idx);
        let mut ax = d;
        loop {
            if ax == 0 {
                return;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < axes[ax].len() {
                x[ax] = axes[ax][idx[ax]];
                break;
            }
            idx[ax] = 0;
            x[ax] = axes[ax][0];
        }
    }
}

/// `∫_a^b |q|^p` in the local variable of `q`, or `sup |q|` for `p = ∞`.
pub(crate) fn poly_power_integral(q: &Poly, a: f64, b: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return q.sup_abs(a, b);
    }
    if p == 1.0 {
        return integrate_max_abs(std::slice::from_ref(q), a, b);
    }
    if p == 2.0 {
        return q.mul(q).integral(a, b);
    }
    let mut cuts = vec![a];
    cuts.extend(q.roots_in(a, b));
    cuts.push(b);
    let (gx, gw) = gl8();
    let mut s = 0.0;
    for w in cuts.windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        s += h * gx.iter().zip(gw).map(|(x, wt)| wt * q.eval(c + h * x).abs().powf(p)).sum::<f64>();
    }
    s
}

/// `‖f‖_p` of a piecewise polynomial.
pub fn piecewise_norm(f: &PiecewisePoly, p: f64) -> f64 {
    let br = f.breaks();
    let parts = f.pieces().iter().enumerate().map(|(i, q)| poly_power_integral(q, 0.0, br[i + 1] - br[i], p));
    if p.is_infinite() {
        parts.fold(0.0, f64::max)
    } else {
        parts.sum::<f64>().powf(1.0 / p)
    }
}

/// `ℓ^p` norm of a vector.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        v.iter().map(|x| x.abs()).fold(0.0, f64::max)
    } else if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_linear_spline_kernel_on, KernelSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn hat_norms() {
        let k = Arc::new(make_linear_spline_kernel_on(1, (-5.0, 5.0), None).unwrap());
        let mid = k.axis(0).labels().iter().position(|&l| l == 0).unwrap();
        let f = Signal::basis(k, mid);
        assert_abs_diff_eq!(f.norm(f64::INFINITY), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.norm(1.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.norm(2.0), (2.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(f.norm(3.0), 0.5f64.powf(1.0 / 3.0), epsilon = 1e-12);
        assert_eq!(f.eval(&[0.25]), 0.75);
    }

    #[test]
    fn tensor_norms_agree_with_products() {
        let spec = r#"{"type": "linear_spline", "n": 1, "domain": [-4, 4], "dim": 2}"#;
        let k = Arc::new(KernelSpec::from_json(spec).unwrap().build().unwrap());
        let one = Arc::new(make_linear_spline_kernel_on(1, (-4.0, 4.0), None).unwrap());
        let mid = one.axis(0).labels().iter().position(|&l| l == 0).unwrap();
        let f = Signal::basis(k.clone(), k.flat_index(&[mid, mid]));
        assert_abs_diff_eq!(f.norm(2.0), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.norm(1.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.norm(f64::INFINITY), 1.0, epsilon = 1e-12);
        assert_eq!(f.norm_method(2.0), NormMethod::GaussLegendre);
    }

    #[test]
    fn vector_norms() {
        let v = [3.0, -4.0];
        assert_eq!(lp_norm(&v, 1.0), 7.0);
        assert_eq!(lp_norm(&v, 2.0), 5.0);
        assert_eq!(lp_norm(&v, f64::INFINITY), 4.0);
    }
}
