use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{kernel_constants, AxisKernel, ConstantsOptions, Kernel, KernelFamily};
use crate::linalg::Mat;
use crate::poly::PiecewisePoly;

use super::{cross_matrices, tensor_apply, Signal};

/// `K_{δ0}(x, y) = δ0^{-d} Σ_λ ∫∫ K(x, λ+z1) K(λ+z2, y) dz1 dz2` over the cubes of
/// the lattice `offset + δ0 Z^d`, kept in factorized form: the cokernels become
/// `κ'_k = Σ_j M[k, j] κ_j` with `M = (∫_{cube λ} κ_k)(δ0^{-1} ∫_{cube λ} φ_j)` per axis.
#[derive(Clone, Debug)]
pub struct AveragedOperator {
    source: Arc<Kernel>,
    averaged: Arc<Kernel>,
    delta0: f64,
    mats: Vec<Mat>,
    cross: Vec<Mat>,
}

pub fn averaged_kernel(kernel: &Arc<Kernel>, delta0: f64, offset: f64) -> Result<AveragedOperator> {
    if !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(Error::Argument(format!("delta0 must be positive, got {delta0}")));
    }
    let mut mats = Vec::with_capacity(kernel.dim());
    let mut axes = Vec::with_capacity(kernel.dim());
    for a in kernel.axes() {
        let (lo, hi) = a.domain();
        let j0 = ((lo - offset) / delta0 - 0.5).floor() as i64;
        let j1 = ((hi - offset) / delta0 + 0.5).ceil() as i64;
        let cubes: Vec<(f64, f64)> = (j0..=j1)
            .map(|j| {
                let c = offset + j as f64 * delta0;
                (c - 0.5 * delta0, c + 0.5 * delta0)
            })
            .filter(|&(a0, a1)| a1 > lo && a0 < hi)
            .collect();
        let n = a.len();
        let mut tc = Mat::zeros(n, cubes.len());
        let mut avg = Mat::zeros(cubes.len(), n);
        for (l, &(c0, c1)) in cubes.iter().enumerate() {
            for k in 0..n {
                tc.set(k, l, a.cokernels()[k].integral(c0, c1));
                avg.set(l, k, a.basis()[k].integral(c0, c1) / delta0);
            }
        }
        let m = tc.matmul(&avg);
        let cok: Vec<PiecewisePoly> = (0..n)
            .map(|k| {
                let terms: Vec<(f64, &PiecewisePoly)> = m.row(k).iter().copied().zip(a.cokernels()).collect();
                PiecewisePoly::linear_combination(&terms).unwrap_or_else(|| PiecewisePoly::zero_on(lo, hi))
            })
            .collect();
        let mut axis = AxisKernel::new(
            a.basis().to_vec(),
            cok,
            a.labels().to_vec(),
            a.anchors().to_vec(),
            a.domain(),
            a.symmetric,
        )?;
        axis.boundary = a.boundary_flags().to_vec();
        axes.push(axis);
        mats.push(m);
    }
    let averaged = Kernel::from_axes(axes, KernelFamily::Averaged { delta0 })?.with_decay_rate(kernel.decay_rate());
    Ok(AveragedOperator { source: kernel.clone(), averaged: Arc::new(averaged), delta0, mats, cross: cross_matrices(kernel) })
}

impl AveragedOperator {
    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    /// `K_{δ0}` as a kernel over the same basis.
    pub fn kernel(&self) -> &Arc<Kernel> {
        &self.averaged
    }

    /// `T_{δ0} f` for `f` in the range of `T`.
    pub fn apply(&self, f: &Signal) -> Signal {
        let moments = tensor_apply(&self.cross, f.coeffs());
        Signal::from_parts(&self.source, tensor_apply(&self.mats, &moments))
    }

    /// `max |K_{δ0}(x, y) − K(x, y)|` over the given pairs.
    pub fn defect(&self, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let mut m: f64 = 0.0;
        for (x, y) in pairs {
            m = m.max((self.averaged.eval(x, y)? - self.source.eval(x, y)?).abs());
        }
        Ok(m)
    }
}

/// `r1(δ0) = ‖sup_z |K(·+z, z)|‖_1 · ‖sup_z ω_{δ0}(K)(·+z, z)‖_1`, the bound on
/// `‖T_{δ0} − T‖`.
pub fn averaging_bound(kernel: &Kernel, delta0: f64, opts: &ConstantsOptions) -> Result<f64> {
    let c = kernel_constants(kernel, &[delta0], &[], opts)?;
    Ok(c.r1 * c.rows[0].d_full)
}
