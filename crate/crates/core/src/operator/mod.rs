//! The operators `T`, `Q_{Γ,U}`, `P_{Γ,U}`, `S_{Γ,U}`, the sample matrix `A` and
//! Neumann-series pseudo-inverses, all acting on coefficient vectors.

mod averaged;
mod signal;

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Mat;
use crate::poly::PiecewisePoly;
use crate::quadrature::{gl8, merge_breaks};
use crate::sampling::{Bupu, BupuKind, SamplingSet};

pub use averaged::{averaged_kernel, averaging_bound, AveragedOperator};
pub use signal::{lp_norm, piecewise_norm, NormMethod, Signal};
pub(crate) use signal::{for_each_product, poly_power_integral};

/// What `T` is applied to.
pub enum Source<'a> {
    Signal(&'a Signal),
    /// Product `Π_i g_i(y_i)` of one piecewise polynomial per axis.
    Separable(&'a [PiecewisePoly]),
    /// Pointwise callable; integrated on a fixed fine partition.
    Function(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub signal: Signal,
    /// Set when the integrand carried no breakpoint information.
    pub fallback: bool,
}

/// Applies the matrices `mats[i]` (`n_i × m_i`) along the axes of a row-major tensor.
pub(crate) fn tensor_apply(mats: &[Mat], x: &[f64]) -> Vec<f64> {
    let mut shape: Vec<usize> = mats.iter().map(|m| m.cols).collect();
    assert_eq!(shape.iter().product::<usize>(), x.len());
    let mut cur = x.to_vec();
    for (ax, m) in mats.iter().enumerate() {
        let pre: usize = shape[..ax].iter().product();
        let post: usize = shape[ax + 1..].iter().product();
        let mut out = vec![0.0; pre * m.rows * post];
        for a in 0..pre {
            for i in 0..m.rows {
                let row = m.row(i);
                let dst = &mut out[(a * m.rows + i) * post..(a * m.rows + i + 1) * post];
                for (j, &w) in row.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let src = &cur[(a * m.cols + j) * post..(a * m.cols + j + 1) * post];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        shape[ax] = m.rows;
        cur = out;
    }
    cur
}

/// `∫ κ_j φ_i` per axis, `n × n`.
pub(crate) fn cross_matrices(kernel: &Kernel) -> Vec<Mat> {
    kernel
        .axes()
        .iter()
        .map(|a| {
            let n = a.len();
            let mut m = Mat::zeros(n, n);
            for (j, kj) in a.cokernels().iter().enumerate() {
                let (lo, hi) = kj.support();
                for (i, fi) in a.basis().iter().enumerate() {
                    let (bl, bh) = fi.support();
                    if bh <= lo || bl >= hi {
                        continue;
                    }
                    m.set(j, i, kj.mul(fi).integral_total());
                }
            }
            m
        })
        .collect()
}

/// `T g`: coefficients `c_k = ∫ κ_k(y) g(y) dy`.
pub fn apply_t(kernel: &Arc<Kernel>, g: Source<'_>) -> Result<Projection> {
    let (coeffs, fallback) = match g {
        Source::Signal(s) => {
            if !Arc::ptr_eq(s.kernel(), kernel) && s.kernel().n_basis() != kernel.n_basis() {
                return Err(Error::Dimension { expected: kernel.n_basis(), got: s.coeffs().len() });
            }
            (tensor_apply(&cross_matrices(s.kernel()), s.coeffs()), false)
        }
        Source::Separable(fs) => {
            if fs.len() != kernel.dim() {
                return Err(Error::Dimension { expected: kernel.dim(), got: fs.len() });
            }
            let per_axis: Vec<Vec<f64>> = kernel
                .axes()
                .iter()
                .zip(fs)
                .map(|(a, g)| {
                    let (lo, hi) = g.support();
                    a.cokernels()
                        .iter()
                        .map(|kj| {
                            let (cl, ch) = kj.support();
                            if ch <= lo || cl >= hi {
                                0.0
                            } else {
                                kj.mul(g).integral_total()
                            }
                        })
                        .collect()
                })
                .collect();
            let mut out = vec![1.0];
            for v in &per_axis {
                out = out.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
            }
            (out, false)
        }
        Source::Function(f) => (project_callable(kernel, f), true),
    };
    Ok(Projection { signal: Signal::from_parts(kernel, coeffs), fallback })
}

fn project_callable(kernel: &Kernel, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Vec<f64> {
    let d = kernel.dim();
    let cells = match d {
        1 => 256.0,
        2 => 64.0,
        _ => 16.0,
    };
    let (gx, gw) = gl8();
    let mut mats = Vec::with_capacity(d);
    let mut nodes = Vec::with_capacity(d);
    for a in kernel.axes() {
        let (lo, hi) = a.domain();
        let h = (hi - lo) / cells;
        let mut br = merge_breaks(a.cokernels().iter().map(|g| g.breaks()));
        br.retain(|&x| x > lo && x < hi);
        br.insert(0, lo);
        br.push(hi);
        let mut pts = Vec::new();
        for w in br.windows(2) {
            let m = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
            for s in 0..m {
                let (a0, a1) = (w[0] + (w[1] - w[0]) * s as f64 / m as f64, w[0] + (w[1] - w[0]) * (s + 1) as f64 / m as f64);
                let (c, r) = (0.5 * (a0 + a1), 0.5 * (a1 - a0));
                pts.extend(gx.iter().zip(gw).map(|(x, wt)| (c + r * x, r * wt)));
            }
        }
        let mut m = Mat::zeros(a.len(), pts.len());
        let mut act = Vec::new();
        for (col, &(y, w)) in pts.iter().enumerate() {
            a.active_cokernels(y, &mut act);
            for &k in &act {
                m.set(k, col, w * a.cokernels()[k].eval(y));
            }
        }
        mats.push(m);
        nodes.push(pts.into_iter().map(|t| t.0).collect::<Vec<f64>>());
    }
    let mut vals = Vec::with_capacity(nodes.iter().map(Vec::len).product());
    for_each_product(&nodes, |y, _| vals.push(f(y)));
    tensor_apply(&mats, &vals)
}

/// Matrices of the approximation-projection and frame operators for one
/// sampling set and partition of unity.
#[derive(Clone, Debug)]
pub struct OperatorBundle {
    kernel: Arc<Kernel>,
    bupu: Bupu,
    /// `∫ κ_k u_γ`: coefficients of `T u_γ`, `n × |Γ|`.
    pub tu: Mat,
    /// `κ_k(γ)`: coefficients of `K(·, γ)`, `n × |Γ|`.
    pub kg: Mat,
    /// `(T u_{γ'})(γ)`, `|Γ| × |Γ|`.
    pub a: Mat,
    /// `φ_k(γ)`, `|Γ| × n`.
    pub e: Mat,
}

/// `Q f = Σ_γ f(γ) u_γ − f`.
pub struct QImage<'a> {
    bundle: &'a OperatorBundle,
    values: Vec<f64>,
    f: Signal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BundleMeta {
    n_basis: usize,
    n_samples: usize,
    bupu: BupuKind,
    delta: f64,
    masses: Vec<f64>,
    blobs: Vec<(String, usize, usize)>,
}

pub fn build_bundle(kernel: &Arc<Kernel>, bupu: &Bupu) -> Result<OperatorBundle> {
    let set = bupu.set();
    if set.dim() != kernel.dim() {
        return Err(Error::Dimension { expected: kernel.dim(), got: set.dim() });
    }
    if let Some(p) = set.points().iter().find(|p| !kernel.contains(p)) {
        return Err(Error::Domain { point: p.clone(), domain: kernel.domain() });
    }
    let n = kernel.n_basis();
    let m = set.len();
    let h = 0.5 * bupu.delta();
    let axes = kernel.axes();
    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|g| {
            let p = set.point(g);
            // cokernels per axis that can meet the cube of γ
            let near: Vec<Vec<usize>> = axes
                .iter()
                .zip(p)
                .map(|(a, &c)| {
                    a.cokernels()
                        .iter()
                        .enumerate()
                        .filter(|(_, f)| {
                            let (lo, hi) = f.support();
                            hi > c - h && lo < c + h
                        })
                        .map(|(k, _)| k)
                        .collect()
                })
                .collect();
            let mut col = vec![0.0; n];
            for_each_product(&near, |idx, _| {
                let fs: Vec<&PiecewisePoly> = idx.iter().zip(axes).map(|(&k, a)| &a.cokernels()[k]).collect();
                col[kernel.flat_index(idx)] = bupu.integrate_separable(g, &fs);
            });
            col
        })
        .collect();
    let mut tu = Mat::zeros(n, m);
    let mut kg = Mat::zeros(n, m);
    let mut e = Mat::zeros(m, n);
    for (g, col) in columns.iter().enumerate() {
        for (k, &v) in col.iter().enumerate() {
            tu.set(k, g, v);
        }
        for (k, v) in kernel.active_cokernel_values(set.point(g)) {
            kg.set(k, g, v);
        }
        for (k, v) in kernel.active_basis_values(set.point(g)) {
            e.set(g, k, v);
        }
    }
    let a = e.matmul(&tu);
    Ok(OperatorBundle { kernel: kernel.clone(), bupu: bupu.clone(), tu, kg, a, e })
}

impl OperatorBundle {
    pub fn kernel(&self) -> &Arc<Kernel> {
        &self.kernel
    }

    pub fn bupu(&self) -> &Bupu {
        &self.bupu
    }

    pub fn set(&self) -> &SamplingSet {
        self.bupu.set()
    }

    pub fn masses(&self) -> &[f64] {
        self.bupu.masses()
    }

    pub fn delta(&self) -> f64 {
        self.bupu.delta()
    }

    pub fn n_samples(&self) -> usize {
        self.bupu.len()
    }

    fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_samples() {
            return Err(Error::Dimension { expected: self.n_samples(), got: values.len() });
        }
        Ok(())
    }

    /// `(f(γ))_γ`.
    pub fn sample(&self, f: &Signal) -> Vec<f64> {
        self.e.matvec(f.coeffs())
    }

    /// `P c = Σ_γ c(γ) T u_γ`.
    pub fn apply_p(&self, values: &[f64]) -> Result<Signal> {
        self.check(values)?;
        Ok(Signal::from_parts(&self.kernel, self.tu.matvec(values)))
    }

    /// `S c = Σ_γ c(γ) ‖u_γ‖_1 K(·, γ)`.
    pub fn apply_s(&self, values: &[f64]) -> Result<Signal> {
        self.check(values)?;
        let w: Vec<f64> = values.iter().zip(self.masses()).map(|(v, m)| v * m).collect();
        Ok(Signal::from_parts(&self.kernel, self.kg.matvec(&w)))
    }

    /// `A c`.
    pub fn apply_a(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check(values)?;
        Ok(self.a.matvec(values))
    }

    pub fn apply_q(&self, f: &Signal) -> QImage<'_> {
        QImage { bundle: self, values: self.sample(f), f: f.clone() }
    }

    /// `max |A[γ, γ'] − (T u_{γ'})(γ)|` with the right side evaluated pointwise.
    pub fn consistency_defect(&self) -> f64 {
        let m = self.n_samples();
        let mut worst: f64 = 0.0;
        for gp in 0..m {
            let col = Signal::from_parts(&self.kernel, self.tu.column(gp));
            for g in 0..m {
                worst = worst.max((self.a.get(g, gp) - col.eval(self.set().point(g))).abs());
            }
        }
        worst
    }

    /// Writes `bundle.json` and little-endian row-major `f64` blobs into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut blobs = Vec::new();
        for (name, mat) in [("tu", &self.tu), ("kg", &self.kg), ("a", &self.a), ("e", &self.e)] {
            let file = format!("{name}.bin");
            let bytes: Vec<u8> = mat.data.iter().flat_map(|v| v.to_le_bytes()).collect();
            std::fs::write(dir.join(&file), bytes)?;
            blobs.push((file, mat.rows, mat.cols));
        }
        let meta = BundleMeta {
            n_basis: self.kernel.n_basis(),
            n_samples: self.n_samples(),
            bupu: self.bupu.kind(),
            delta: self.delta(),
            masses: self.masses().to_vec(),
            blobs,
        };
        std::fs::write(dir.join("bundle.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Reads a bundle written by [`save`](Self::save); the kernel and partition must
    /// be the ones it was built from.
    pub fn load(dir: &Path, kernel: &Arc<Kernel>, bupu: &Bupu) -> Result<Self> {
        let meta: BundleMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("bundle.json"))?)?;
        if meta.n_basis != kernel.n_basis() {
            return Err(Error::Dimension { expected: kernel.n_basis(), got: meta.n_basis });
        }
        if meta.n_samples != bupu.len() || meta.bupu != bupu.kind() {
            return Err(Error::Argument("stored bundle was built for a different partition".into()));
        }
        let mut mats = Vec::new();
        for (file, rows, cols) in &meta.blobs {
            let bytes = std::fs::read(dir.join(file))?;
            if bytes.len() != rows * cols * 8 {
                return Err(Error::Argument(format!("{file}: expected {} bytes, found {}", rows * cols * 8, bytes.len())));
            }
            let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            mats.push(Mat { rows: *rows, cols: *cols, data });
        }
        let [tu, kg, a, e]: [Mat; 4] =
            mats.try_into().map_err(|_| Error::Argument("bundle.json must list four blobs".into()))?;
        Ok(OperatorBundle { kernel: kernel.clone(), bupu: bupu.clone(), tu, kg, a, e })
    }
}

impl QImage<'_> {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let s: f64 = self.bundle.bupu.weights_at(x).into_iter().map(|(g, w)| self.values[g] * w).sum();
        s - self.f.eval(x)
    }

    pub fn norm_method(&self) -> NormMethod {
        if self.f.kernel().dim() == 1 {
            NormMethod::Exact
        } else {
            NormMethod::Grid
        }
    }

    /// `‖Q f‖_p` over the domain of the sampling set.
    pub fn norm(&self, p: f64) -> f64 {
        if self.f.kernel().dim() == 1 {
            let steps = self.bundle.bupu.step_pieces(&self.values);
            let f = self.f.to_poly();
            let mut br: Vec<f64> = steps.iter().flat_map(|s| [s.0, s.1]).collect();
            if let Some(f) = &f {
                br.extend(f.breaks().iter().copied().filter(|&b| b > steps[0].0 && b < steps[steps.len() - 1].1));
            }
            br.sort_by(|a, b| a.partial_cmp(b).unwrap());
            br.dedup();
            let mut acc: f64 = 0.0;
            let mut si = 0;
            for w in br.windows(2) {
                while steps[si].1 <= w[0] {
                    si += 1;
                }
                let mut q = f.as_ref().map_or(crate::poly::Poly::zero(), |f| f.poly_from(w[0])).scale(-1.0);
                q = q.add(&crate::poly::Poly::constant(steps[si].2));
                let v = poly_power_integral(&q, 0.0, w[1] - w[0], p);
                if p.is_infinite() {
                    acc = acc.max(v);
                } else {
                    acc += v;
                }
            }
            return if p.is_infinite() { acc } else { acc.powf(1.0 / p) };
        }
        // midpoint grid, 200 cells per axis
        let dom = self.bundle.set().domain();
        let axes: Vec<Vec<f64>> =
            dom.iter().map(|&(lo, hi)| (0..200).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / 200.0).collect()).collect();
        let vol: f64 = dom.iter().map(|(lo, hi)| (hi - lo) / 200.0).product();
        let mut acc: f64 = 0.0;
        for_each_product(&axes, |x, _| {
            let v = self.eval(x).abs();
            if p.is_infinite() {
                acc = acc.max(v);
            } else {
                acc += v.powf(p) * vol;
            }
        });
        if p.is_infinite() {
            acc
        } else {
            acc.powf(1.0 / p)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NeumannResult {
    #[serde(skip)]
    pub signal: Option<Signal>,
    /// `‖(T − op)^n f_0‖_∞` for the terms that were added, `n ≥ 1`.
    pub term_norms: Vec<f64>,
    pub certified: f64,
    /// Set when the certificate failed and a measured ratio below one was used.
    pub measured_only: bool,
    pub measured_ratio: Option<f64>,
    pub converged: bool,
}

/// `T f_0 + Σ_{n=1}^{n*} (T − op)^n f_0` on the range space, where `T` acts as the
/// identity; stops once a term has sup norm below `tol` or after `nmax` terms.
pub fn neumann_apply(
    op: impl Fn(&Signal) -> Signal,
    f0: &Signal,
    nmax: usize,
    tol: f64,
    certified: f64,
) -> Result<NeumannResult> {
    let step = |g: &Signal| g.sub(&op(g));
    let mut measured = None;
    let mut measured_only = false;
    if !(certified < 1.0) {
        // power iteration on T − op
        let mut g = f0.clone();
        let mut prev = g.norm(f64::INFINITY);
        let mut r = 0.0;
        for _ in 0..8 {
            if prev == 0.0 {
                break;
            }
            g = step(&g);
            let cur = g.norm(f64::INFINITY);
            r = cur / prev;
            prev = cur;
        }
        measured = Some(r);
        if !(r < 1.0) {
            return Err(Error::NoCertificate { certified, measured: r });
        }
        measured_only = true;
    }
    let mut sum = f0.clone();
    let mut term = f0.clone();
    let mut norms = Vec::new();
    let mut converged = false;
    for _ in 0..nmax {
        term = step(&term);
        let t = term.norm(f64::INFINITY);
        if t < tol {
            converged = true;
            break;
        }
        sum = sum.add(&term);
        norms.push(t);
    }
    Ok(NeumannResult {
        signal: Some(sum),
        term_norms: norms,
        certified,
        measured_only,
        measured_ratio: measured,
        converged,
    })
}

#[cfg(test)]
mod tests;
