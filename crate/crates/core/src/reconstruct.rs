//! Iterative approximation-projection (AP) and frame reconstruction, the
//! discrete AP iteration on sample values, and the noise-driven stopping rules.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_constants, ConstantsOptions, Kernel};
use crate::operator::{lp_norm, OperatorBundle, Signal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ap,
    ApDiscrete,
    Frame,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    Nmax,
    StoppingRule,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// `‖f_n − f_{n−1}‖` (`‖f_0‖` at step 0).
    pub increment: f64,
    /// `‖c_0 − (f_n(γ))_γ‖_∞`.
    pub residual: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub algorithm: Algorithm,
    pub steps: Vec<TraceStep>,
    pub stop_reason: StopReason,
    /// Contraction constant the run was certified with, if any.
    pub certified: Option<f64>,
    /// True when no certificate below one was available.
    pub measured_only: bool,
}

impl IterationTrace {
    pub fn max_ratio(&self) -> f64 {
        self.steps.iter().filter_map(|s| s.ratio).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "increment", "residual", "ratio"])?;
        for s in &self.steps {
            let ratio = s.ratio.map_or(String::new(), |r| format!("{r:.17e}"));
            w.write_record([
                s.step.to_string(),
                format!("{:.17e}", s.increment),
                format!("{:.17e}", s.residual),
                ratio,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct IterationOptions {
    pub nmax: usize,
    /// Stop once the increment falls below `tol` times the step-0 increment.
    pub tol: f64,
    /// Run exactly this many steps (stopping rule); `tol` is then ignored.
    pub steps: Option<usize>,
    /// Contraction certificate for the trace; `None` or `>= 1` marks the run measured-only.
    pub certified: Option<f64>,
    /// Exponent of the `‖·‖_{p,U}` increment norm of the discrete iteration.
    pub p: f64,
    /// Keep every iterate.
    pub record: bool,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions { nmax: 200, tol: 1e-12, steps: None, certified: None, p: f64::INFINITY, record: false }
    }
}

impl IterationOptions {
    pub fn new(nmax: usize, tol: f64) -> Self {
        IterationOptions { nmax, tol, ..Default::default() }
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub signal: Signal,
    pub trace: IterationTrace,
    /// `‖Σ_γ (c_0(γ) − f(γ)) T u_γ‖` (AP) or the frame analogue, in coefficients.
    pub limit_residual: f64,
    /// Coefficients of `f_0, f_1, …` when recorded.
    pub iterates: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct DiscreteReconstruction {
    pub values: Vec<f64>,
    pub trace: IterationTrace,
    /// `F_0, F_1, …` when recorded.
    pub iterates: Vec<Vec<f64>>,
}

fn max_abs(v: &[f64]) -> f64 {
    lp_norm(v, f64::INFINITY)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Runs `x_n = update(x_{n−1})` from `x_0 = init` with the shared stopping and
/// divergence logic.
fn iterate(
    algorithm: Algorithm,
    init: Vec<f64>,
    update: impl Fn(&[f64]) -> Vec<f64>,
    inc_norm: impl Fn(&[f64]) -> f64,
    residual: impl Fn(&[f64]) -> f64,
    opts: &IterationOptions,
) -> Result<(Vec<f64>, IterationTrace, Vec<Vec<f64>>)> {
    let mut trace = IterationTrace {
        algorithm,
        steps: Vec::new(),
        stop_reason: StopReason::Nmax,
        certified: opts.certified,
        measured_only: opts.certified.is_none_or(|r| !(r < 1.0)),
    };
    let mut iterates = Vec::new();
    let mut x = init;
    let inc0 = inc_norm(&x);
    trace.steps.push(TraceStep { step: 0, increment: inc0, residual: residual(&x), ratio: None });
    if opts.record {
        iterates.push(x.clone());
    }
    let nsteps = opts.steps.unwrap_or(opts.nmax);
    if opts.steps.is_none() && inc0 == 0.0 {
        trace.stop_reason = StopReason::Tolerance;
        return Ok((x, trace, iterates));
    }
    let mut prev = inc0;
    let mut growing = 0;
    for n in 1..=nsteps {
        let next = update(&x);
        let inc = inc_norm(&diff(&next, &x));
        let ratio = (prev > 0.0).then(|| inc / prev);
        x = next;
        trace.steps.push(TraceStep { step: n, increment: inc, residual: residual(&x), ratio });
        if opts.record {
            iterates.push(x.clone());
        }
        // ratios in the rounding floor carry no information
        if ratio.is_some_and(|r| r > 1.0) && inc > 1e-12 * inc0 {
            growing += 1;
        } else {
            growing = 0;
        }
        if growing >= 3 {
            trace.stop_reason = StopReason::Diverged;
            return Err(Error::Divergence { step: n, ratio: ratio.unwrap(), trace: Box::new(trace) });
        }
        prev = inc;
        if opts.steps.is_none() && inc <= opts.tol * inc0 {
            trace.stop_reason = StopReason::Tolerance;
            return Ok((x, trace, iterates));
        }
    }
    trace.stop_reason = if opts.steps.is_some() { StopReason::StoppingRule } else { StopReason::Nmax };
    Ok((x, trace, iterates))
}

fn check_len(bundle: &OperatorBundle, c0: &[f64]) -> Result<()> {
    if c0.len() != bundle.n_samples() {
        return Err(Error::Dimension { expected: bundle.n_samples(), got: c0.len() });
    }
    Ok(())
}

/// `f_0 = Σ_γ c_0(γ) T u_γ`, `f_n = f_0 + f_{n−1} − Σ_γ f_{n−1}(γ) T u_γ`.
pub fn ap_reconstruct(bundle: &OperatorBundle, c0: &[f64], opts: &IterationOptions) -> Result<Reconstruction> {
    check_len(bundle, c0)?;
    let kernel = bundle.kernel();
    let f0 = bundle.tu.matvec(c0);
    let sig = |c: &[f64]| Signal::new(kernel.clone(), c.to_vec()).expect("coefficient length");
    let (coeffs, trace, iterates) = iterate(
        Algorithm::Ap,
        f0.clone(),
        |c| {
            let p = bundle.tu.matvec(&bundle.e.matvec(c));
            f0.iter().zip(c).zip(&p).map(|((a, b), q)| a + b - q).collect()
        },
        |d| sig(d).norm(f64::INFINITY),
        |c| max_abs(&diff(c0, &bundle.e.matvec(c))),
        opts,
    )?;
    let signal = sig(&coeffs);
    let limit_residual = max_abs(&bundle.tu.matvec(&diff(c0, &bundle.sample(&signal))));
    Ok(Reconstruction { signal, trace, limit_residual, iterates })
}

/// `F_0 = A c_0`, `F_n = F_0 + (I − A) F_{n−1}`; increments in `‖·‖_{p,U}`.
pub fn ap_discrete(bundle: &OperatorBundle, c0: &[f64], opts: &IterationOptions) -> Result<DiscreteReconstruction> {
    check_len(bundle, c0)?;
    let f0 = bundle.a.matvec(c0);
    let (values, trace, iterates) = iterate(
        Algorithm::ApDiscrete,
        f0.clone(),
        |f| {
            let af = bundle.a.matvec(f);
            f0.iter().zip(f).zip(&af).map(|((a, b), q)| a + b - q).collect()
        },
        |d| bundle.bupu().weighted_norm(d, opts.p),
        |f| max_abs(&diff(c0, f)),
        opts,
    )?;
    Ok(DiscreteReconstruction { values, trace, iterates })
}

/// `f_0 = Σ_γ c_0(γ)‖u_γ‖_1 K(·,γ)`, `f_n = f_0 + f_{n−1} − S f_{n−1}`.
pub fn frame_reconstruct(bundle: &OperatorBundle, c0: &[f64], opts: &IterationOptions) -> Result<Reconstruction> {
    check_len(bundle, c0)?;
    let kernel = bundle.kernel();
    let weighted = |v: &[f64]| -> Vec<f64> { v.iter().zip(bundle.masses()).map(|(a, m)| a * m).collect() };
    let f0 = bundle.kg.matvec(&weighted(c0));
    let sig = |c: &[f64]| Signal::new(kernel.clone(), c.to_vec()).expect("coefficient length");
    let (coeffs, trace, iterates) = iterate(
        Algorithm::Frame,
        f0.clone(),
        |c| {
            let s = bundle.kg.matvec(&weighted(&bundle.e.matvec(c)));
            f0.iter().zip(c).zip(&s).map(|((a, b), q)| a + b - q).collect()
        },
        |d| sig(d).norm(f64::INFINITY),
        |c| max_abs(&diff(c0, &bundle.e.matvec(c))),
        opts,
    )?;
    let signal = sig(&coeffs);
    let limit_residual = max_abs(&bundle.kg.matvec(&weighted(&diff(c0, &bundle.sample(&signal)))));
    Ok(Reconstruction { signal, trace, limit_residual, iterates })
}

/// Contraction constants of a kernel at one gap `δ0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub delta0: f64,
    /// Schur bound, also used for `‖T‖`.
    pub r1: f64,
    pub r0: f64,
    pub r2: f64,
    pub grid_resolution: f64,
}

impl Certificate {
    pub fn compute(kernel: &Kernel, delta0: f64, opts: &ConstantsOptions) -> Result<Self> {
        let c = kernel_constants(kernel, &[delta0], &[], opts)?;
        let row = &c.rows[0];
        Ok(Certificate { delta0, r1: c.r1, r0: row.r0, r2: row.r2, grid_resolution: c.grid_resolution })
    }

    /// The constant that certifies `algorithm`.
    pub fn contraction(&self, algorithm: Algorithm) -> f64 {
        match algorithm {
            Algorithm::Ap | Algorithm::ApDiscrete => self.r0,
            Algorithm::Frame => self.r2,
        }
    }
}

/// Noise levels on the decibel scale and the contraction rate they are read against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub snr_db: f64,
    pub sner_db: f64,
    pub r0: f64,
}

fn check_rate(r0: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::Argument(format!("stopping rules need r0 in (0, 1), got {r0}")));
    }
    Ok((1.0 / r0).log10())
}

/// `n0 = ⌊SNR / (20 log10(1/r0))⌋`.
pub fn stopping_step_snr(b: &NoiseBudget) -> Result<usize> {
    let l = check_rate(b.r0)?;
    Ok((b.snr_db / (20.0 * l)).floor().max(0.0) as usize)
}

/// The displayed minimizer `y0 = SNER/(20 log10(1/r0)) − log10(ln(1/r0))/log10(1/r0)`.
pub fn sner_y0(b: &NoiseBudget) -> Result<f64> {
    let l = check_rate(b.r0)?;
    Ok(b.sner_db / (20.0 * l) - (1.0 / b.r0).ln().log10() / l)
}

/// `n1 = ⌊y0 − 1⌋`, clamped at zero.
pub fn stopping_step_sner(b: &NoiseBudget) -> Result<usize> {
    Ok((sner_y0(b)? - 1.0).floor().max(0.0) as usize)
}

/// `r0^y + y 10^{−SNER/20}`, the quantity the SNER rule balances.
pub fn sner_objective(b: &NoiseBudget, y: f64) -> f64 {
    b.r0.powf(y) + y * 10f64.powf(-b.sner_db / 20.0)
}

/// `‖T‖² (1 − r0)^{−1} (sup_γ ‖u_γ‖_1)^{1/p} (‖c_0‖_p r0^{n+1} + ‖ε‖_p)` with `‖T‖`
/// replaced by `r1`; `n = None` is the limit.
pub fn noisy_error_bound(cert: &Certificate, masses: &[f64], c0_norm: f64, eps_norm: f64, n: Option<usize>, p: f64) -> Result<f64> {
    check_rate(cert.r0)?;
    let sup_mass = masses.iter().copied().fold(0.0, f64::max);
    let mass = if p.is_infinite() { 1.0 } else { sup_mass.powf(1.0 / p) };
    let decay = n.map_or(0.0, |n| cert.r0.powi(n as i32 + 1));
    Ok(cert.r1 * cert.r1 / (1.0 - cert.r0) * mass * (c0_norm * decay + eps_norm))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingMode {
    #[default]
    Tolerance,
    Snr,
    Sner,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stopping {
    #[serde(default)]
    pub mode: StoppingMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sner_db: Option<f64>,
    /// Rate to read the budget against; the certificate's `r0` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
}

impl Stopping {
    /// Fixed step count for the rule-based modes.
    pub fn steps(&self, cert_r0: f64) -> Result<Option<usize>> {
        let r0 = self.r0.unwrap_or(cert_r0);
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Argument(format!("stopping mode needs {name}")));
        match self.mode {
            StoppingMode::Tolerance => Ok(None),
            StoppingMode::Snr => {
                let snr_db = need(self.snr_db, "snr_db")?;
                stopping_step_snr(&NoiseBudget { snr_db, sner_db: 0.0, r0 }).map(Some)
            }
            StoppingMode::Sner => {
                let sner_db = need(self.sner_db, "sner_db")?;
                stopping_step_sner(&NoiseBudget { snr_db: 0.0, sner_db, r0 }).map(Some)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::make_linear_spline_kernel_on;
    use crate::operator::build_bundle;
    use crate::sampling::{generate_jittered, normalized_indicator_bupu};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(delta: f64) -> (Arc<Kernel>, OperatorBundle) {
        let k = Arc::new(make_linear_spline_kernel_on(1, (-12.0, 12.0), None).unwrap());
        let set = generate_jittered(delta, 0.25, vec![(-12.0, 12.0)], 17).unwrap();
        let gap = crate::sampling::maximal_gap(&set).unwrap();
        let b = build_bundle(&k, &normalized_indicator_bupu(&set, gap).unwrap()).unwrap();
        (k, b)
    }

    #[test]
    fn stopping_rules() {
        let b = NoiseBudget { snr_db: 40.0, sner_db: 60.0, r0: 0.5 };
        assert_eq!(stopping_step_snr(&b).unwrap(), 6);
        assert_eq!(stopping_step_sner(&b).unwrap(), 9);
        assert_eq!(stopping_step_snr(&NoiseBudget { snr_db: 0.0, ..b }).unwrap(), 0);
        assert_eq!(stopping_step_snr(&NoiseBudget { snr_db: 20.0, sner_db: 0.0, r0: 0.1 }).unwrap(), 1);
        assert_eq!(stopping_step_sner(&NoiseBudget { sner_db: 0.0, ..b }).unwrap(), 0);
        assert!(stopping_step_snr(&NoiseBudget { r0: 1.0, ..b }).is_err());
        assert_abs_diff_eq!(sner_y0(&b).unwrap(), 10.494550657606985, epsilon = 1e-12);
    }

    #[test]
    fn zero_data_stops_immediately() {
        let (_, b) = setup(0.3);
        let r = ap_reconstruct(&b, &vec![0.0; b.n_samples()], &IterationOptions::default()).unwrap();
        assert_eq!(r.trace.steps.len(), 1);
        assert_eq!(r.trace.stop_reason, StopReason::Tolerance);
        assert!(r.signal.coeffs().iter().all(|&c| c == 0.0));
        let f = frame_reconstruct(&b, &vec![0.0; b.n_samples()], &IterationOptions::default()).unwrap();
        assert!(f.signal.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn ap_is_consistent() {
        let (k, b) = setup(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Signal::random(k, &mut rng);
        let r = ap_reconstruct(&b, &b.sample(&g), &IterationOptions::new(60, 1e-13)).unwrap();
        let err = r.signal.sub(&g).norm(f64::INFINITY) / g.norm(f64::INFINITY);
        assert!(err <= 1e-8, "{err}");
        assert!(r.limit_residual < 1e-10);
        assert!(r.trace.measured_only);
    }

    #[test]
    fn discrete_matches_continuous() {
        let (_, b) = setup(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c0: Vec<f64> = (0..b.n_samples()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let opts = IterationOptions { steps: Some(12), record: true, ..Default::default() };
        let cont = ap_reconstruct(&b, &c0, &opts).unwrap();
        let disc = ap_discrete(&b, &c0, &opts).unwrap();
        assert_eq!(disc.trace.steps.len(), 13);
        assert_eq!(disc.trace.stop_reason, StopReason::StoppingRule);
        for (c, f) in cont.iterates.iter().zip(&disc.iterates) {
            let at = b.e.matvec(c);
            for (x, y) in at.iter().zip(f) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn telescoping_identity() {
        let (k, b) = setup(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = Signal::random(k, &mut rng);
        let c0 = b.sample(&g);
        let f0 = b.apply_p(&c0).unwrap();
        let mut sum = f0.clone();
        let mut term = f0.clone();
        for n in 1..=5 {
            term = term.sub(&b.apply_p(&b.sample(&term)).unwrap());
            sum = sum.add(&term);
            let r = ap_reconstruct(&b, &c0, &IterationOptions { steps: Some(n), ..Default::default() }).unwrap();
            assert!(r.signal.coeff_distance(&sum) < 1e-10);
        }
    }

    #[test]
    fn frame_is_consistent_on_fine_lattice() {
        let (k, b) = setup(0.025);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Signal::random(k, &mut rng);
        let r = frame_reconstruct(&b, &b.sample(&g), &IterationOptions::new(200, 1e-13)).unwrap();
        let err = r.signal.sub(&g).norm(f64::INFINITY) / g.norm(f64::INFINITY);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn divergence_is_reported_with_trace() {
        let (k, mut b) = setup(0.3);
        // an inflated A makes I − A expansive
        b.tu = {
            let mut m = b.tu.clone();
            m.data.iter_mut().for_each(|v| *v *= 3.0);
            m
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Signal::random(k, &mut rng);
        match ap_reconstruct(&b, &b.sample(&g), &IterationOptions::new(50, 1e-12)) {
            Err(Error::Divergence { trace, .. }) => {
                assert_eq!(trace.stop_reason, StopReason::Diverged);
                assert!(trace.steps.len() >= 4);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn noisy_bound_behaviour() {
        let cert = Certificate { delta0: 0.1, r1: 2.4, r0: 0.5, r2: 0.0, grid_resolution: 1e-3 };
        let masses = [0.1, 0.12, 0.09];
        let at = |n| noisy_error_bound(&cert, &masses, 3.0, 0.01, n, 2.0).unwrap();
        assert!(at(Some(3)) >= at(Some(4)) && at(Some(4)) >= at(None));
        assert_eq!(noisy_error_bound(&cert, &masses, 3.0, 0.0, None, 2.0).unwrap(), 0.0);
        // at n0 the decay term is below the noise term
        let n0 = stopping_step_snr(&NoiseBudget { snr_db: 20.0 * (3.0f64 / 0.01).log10(), sner_db: 0.0, r0: 0.5 }).unwrap();
        let cap = 2.0 * 2.4 * 2.4 / 0.5 * 0.12f64.sqrt() * 0.01;
        assert!(at(Some(n0)) <= cap * (1.0 + 1e-12));
    }
}
