use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{PiecewisePoly, Poly};

use super::build::{
    make_bspline_kernel, make_generator_pair_kernel, make_linear_spline_kernel_on, make_shift_invariant_kernel,
};
use super::Kernel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelType {
    LinearSpline,
    ShiftInvariant,
    Bspline,
    GeneratorPair,
}

/// Piecewise polynomial given by breakpoints and per-piece coefficients in the
/// local variable `x - breakpoints[i]`, lowest degree first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub breakpoints: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
}

impl GeneratorSpec {
    pub fn to_poly(&self) -> Result<PiecewisePoly> {
        PiecewisePoly::new(self.breakpoints.clone(), self.coefficients.iter().map(|c| Poly(c.clone())).collect())
    }
}

/// JSON description of a kernel. Only the fields relevant to `type` are read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(rename = "type")]
    pub kind: KernelType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phis: Vec<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phitildes: Vec<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(i64, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<(f64, f64)>,
    /// Tensor power; 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<f64>,
}

impl KernelSpec {
    pub fn linear_spline(n: u32, domain: (f64, f64)) -> Self {
        KernelSpec {
            kind: KernelType::LinearSpline,
            n: Some(n),
            order: None,
            knots: None,
            generators: Vec::new(),
            phis: Vec::new(),
            phitildes: Vec::new(),
            anchors: Vec::new(),
            window: None,
            domain: Some(domain),
            dim: None,
            grid_resolution: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn dim(&self) -> usize {
        self.dim.unwrap_or(1)
    }

    fn need_domain(&self) -> Result<(f64, f64)> {
        self.domain.ok_or_else(|| Error::Argument("kernel spec needs a domain".into()))
    }

    pub fn build(&self) -> Result<Kernel> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Argument("dim must be at least 1".into()));
        }
        let one = match self.kind {
            KernelType::LinearSpline => {
                let n = self.n.ok_or_else(|| Error::Argument("linear_spline needs n".into()))?;
                make_linear_spline_kernel_on(n, self.need_domain()?, self.window)?
            }
            KernelType::ShiftInvariant => {
                let gens = self.generators.iter().map(GeneratorSpec::to_poly).collect::<Result<Vec<_>>>()?;
                make_shift_invariant_kernel(&gens, self.need_domain()?, self.window)?
            }
            KernelType::Bspline => {
                let order = self.order.ok_or_else(|| Error::Argument("bspline needs order".into()))?;
                let knots = self.knots.as_ref().ok_or_else(|| Error::Argument("bspline needs knots".into()))?;
                let window = match self.window {
                    Some((a, b)) if a < 0 || b < 0 => {
                        return Err(Error::Argument("bspline window indices must be non-negative".into()))
                    }
                    Some((a, b)) => Some((a as usize, b as usize)),
                    None => None,
                };
                make_bspline_kernel(order, knots, window)?
            }
            KernelType::GeneratorPair => {
                let phis = self.phis.iter().map(GeneratorSpec::to_poly).collect::<Result<Vec<_>>>()?;
                let tildes = self.phitildes.iter().map(GeneratorSpec::to_poly).collect::<Result<Vec<_>>>()?;
                make_generator_pair_kernel(phis, tildes, self.anchors.clone(), self.need_domain()?)?
            }
        };
        let kernel = if d == 1 {
            one
        } else {
            let rate = one.decay_rate();
            Kernel::tensor_power(one.axis(0).clone(), d, one.family().clone())?.with_decay_rate(rate)
        };
        Ok(kernel.with_spec(self.clone()))
    }
}
