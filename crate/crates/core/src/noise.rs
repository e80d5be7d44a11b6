//! Sampling stability checks and Monte-Carlo study of the pointwise reconstruction
//! error under bounded i.i.d. noise.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_constants, r0_prime, ConstantsOptions, Kernel};
use crate::operator::{lp_norm, piecewise_norm, OperatorBundle, Signal};
use crate::quadrature::integrate_cell;
use crate::reconstruct::{ap_reconstruct, frame_reconstruct, Certificate, IterationOptions};
use crate::sampling::{gap_counts, normalized_indicator_bupu, SamplingSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    UniformBounded,
    TruncatedGaussian,
}

/// Zero-mean noise supported in `[−bound, bound]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub bound: f64,
    pub sigma2: f64,
}

/// Truncation point of the Gaussian model in standard deviations.
const TRUNCATION: f64 = 4.0;

impl NoiseModel {
    pub fn uniform(bound: f64) -> Result<Self> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::Argument(format!("noise bound must be finite and nonnegative, got {bound}")));
        }
        Ok(NoiseModel { kind: NoiseKind::UniformBounded, bound, sigma2: bound * bound / 3.0 })
    }

    /// Uniform noise with standard deviation `sigma`.
    pub fn uniform_with_sigma(sigma: f64) -> Result<Self> {
        Self::uniform(sigma * 3f64.sqrt())
    }

    /// `N(0, s²)` conditioned on `|ε| ≤ 4s`; `sigma2` is the variance after truncation.
    pub fn truncated_gaussian(s: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Argument(format!("noise scale must be finite and nonnegative, got {s}")));
        }
        let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cells = 16;
        let h = TRUNCATION / cells as f64;
        let (mut mass, mut second) = (0.0, 0.0);
        for i in 0..cells {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            mass += 2.0 * integrate_cell(a, b, density);
            second += 2.0 * integrate_cell(a, b, |t| t * t * density(t));
        }
        Ok(NoiseModel { kind: NoiseKind::TruncatedGaussian, bound: TRUNCATION * s, sigma2: s * s * second / mass })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.bound == 0.0 {
            return 0.0;
        }
        match self.kind {
            NoiseKind::UniformBounded => rng.random_range(-self.bound..=self.bound),
            NoiseKind::TruncatedGaussian => {
                let normal = Normal::new(0.0, self.bound / TRUNCATION).expect("finite scale");
                loop {
                    let v: f64 = normal.sample(rng);
                    if v.abs() <= self.bound {
                        return v;
                    }
                }
            }
        }
    }
}

/// Which bound certified a stability check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityRoute {
    /// The discrete-kernel modulus constant `r0`.
    R0,
    /// The continuous-kernel constant `r0′(p)`.
    R0Prime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub signal_norm: f64,
    pub sample_norm: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub delta0: f64,
    #[serde(serialize_with = "crate::kernel::ser_inf", deserialize_with = "crate::kernel::de_inf")]
    pub p: f64,
    pub r0: f64,
    pub r0_prime: Option<f64>,
    pub certified: f64,
    pub route: StabilityRoute,
    pub count_lower: u32,
    pub count_upper: u32,
    pub rows: Vec<SandwichRow>,
    pub violations: usize,
    /// Smallest of `sample_norm − lower` and `upper − sample_norm`, relative to `‖f‖_p`.
    pub worst_slack: f64,
}

/// Checks `(1−r)(δ0^{−d}A)^{1/p}‖f‖_p ≤ ‖(f(γ))‖_p ≤ (1+r)(δ0^{−d}B)^{1/p}‖f‖_p`
/// with `r = min(r0, r0′(p))` and `A`, `B` the covering counts at `δ0 = bundle.delta()`.
pub fn stability_check(bundle: &OperatorBundle, p: f64, signals: &[Signal], opts: &ConstantsOptions) -> Result<StabilityReport> {
    let kernel = bundle.kernel();
    let delta0 = bundle.delta();
    let r0 = kernel_constants(kernel, &[delta0], &[], opts)?.rows[0].r0;
    let r0p = if kernel.is_continuous() { Some(r0_prime(kernel, delta0, p, opts)?.value) } else { None };
    let (certified, route) = match r0p {
        Some(v) if v < r0 => (v, StabilityRoute::R0Prime),
        _ => (r0, StabilityRoute::R0),
    };
    if !(certified < 1.0) {
        let measured = signals
            .iter()
            .map(|f| {
                let n = f.norm(p);
                if n > 0.0 { bundle.apply_q(f).norm(p) / n } else { 0.0 }
            })
            .fold(0.0, f64::max);
        return Err(Error::NoCertificate { certified, measured });
    }
    let (a, b) = gap_counts(bundle.set(), delta0)?;
    let d = kernel.dim() as i32;
    let scale = |c: u32| if p.is_infinite() { 1.0 } else { (c as f64 / delta0.powi(d)).powf(1.0 / p) };
    let (lo_c, hi_c) = ((1.0 - certified) * scale(a), (1.0 + certified) * scale(b));
    let mut rows = Vec::with_capacity(signals.len());
    let mut worst = f64::INFINITY;
    for f in signals {
        let n = f.norm(p);
        let s = lp_norm(&bundle.sample(f), p);
        let (lower, upper) = (lo_c * n, hi_c * n);
        // relative rounding allowance of the two norm evaluations
        let tol = 1e-12 * n.max(s);
        let holds = s >= lower - tol && s <= upper + tol;
        if n > 0.0 {
            worst = worst.min((s - lower).min(upper - s) / n);
        }
        rows.push(SandwichRow { signal_norm: n, sample_norm: s, lower, upper, holds });
    }
    let violations = rows.iter().filter(|r| !r.holds).count();
    Ok(StabilityReport {
        delta0,
        p,
        r0,
        r0_prime: r0p,
        certified,
        route,
        count_lower: a,
        count_upper: b,
        rows,
        violations,
        worst_slack: if worst.is_finite() { worst } else { 0.0 },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    #[serde(serialize_with = "crate::kernel::ser_inf", deserialize_with = "crate::kernel::de_inf")]
    pub p: f64,
    pub b0: f64,
    pub delta0: f64,
    /// `‖f′‖_p / ‖f‖_p`.
    pub derivative_ratio: f64,
    pub precondition_met: bool,
    /// `δ0 B0`, the bound on `‖ω_{δ0/2}(f)‖_p / ‖f‖_p`.
    pub r: Option<f64>,
    /// `max(1/(1−r), 1+r)`.
    pub constant: Option<f64>,
    pub signal_norm: f64,
    /// `‖(f(γ) ‖u_γ‖_1^{1/p})_γ‖_p`.
    pub weighted_sample_norm: f64,
    pub holds: Option<bool>,
}

/// Two-sided bound for signals with `‖f′‖_p ≤ B0‖f‖_p` on a set with maximal gap
/// `δ0 < 1/B0`, using `ω_{δ0/2}(f)(x) ≤ ∫_{−δ0/2}^{δ0/2} |f′(x+t)| dt`.
pub fn derivative_stability_check(f: &Signal, b0: f64, bundle: &OperatorBundle, p: f64) -> Result<DerivativeReport> {
    let poly = f.to_poly().ok_or_else(|| Error::Argument("derivative check is one-dimensional".into()))?;
    if !(b0 > 0.0) {
        return Err(Error::Argument(format!("B0 must be positive, got {b0}")));
    }
    let delta0 = bundle.delta();
    let n = piecewise_norm(&poly, p);
    let dn = piecewise_norm(&poly.derivative(), p);
    let derivative_ratio = if n > 0.0 { dn / n } else { 0.0 };
    let weighted = bundle.bupu().weighted_norm(&bundle.sample(f), p);
    let precondition_met = derivative_ratio <= b0 * (1.0 + 1e-12) && delta0 * b0 < 1.0;
    let mut report = DerivativeReport {
        p,
        b0,
        delta0,
        derivative_ratio,
        precondition_met,
        r: None,
        constant: None,
        signal_norm: n,
        weighted_sample_norm: weighted,
        holds: None,
    };
    if precondition_met {
        let r = delta0 * b0;
        let c = (1.0 / (1.0 - r)).max(1.0 + r);
        let tol = 1e-12 * n.max(weighted);
        report.r = Some(r);
        report.constant = Some(c);
        report.holds = Some(weighted >= n / c - tol && weighted <= c * n + tol);
    }
    Ok(report)
}

/// `∫ |K(x,z)|² dz`.
pub fn energy_integral(kernel: &Kernel, x: &[f64]) -> Result<f64> {
    kernel.energy_integral(x)
}

/// Reconstruction method whose output is `Σ_γ c(γ)‖u_γ‖_1 R_γ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Displayer {
    NeumannAp,
    NeumannFrame,
    /// `Σ c(γ) T u_γ`.
    PlainT,
    /// `Σ c(γ)‖u_γ‖_1 K(·,γ)`.
    PlainK,
}

impl Displayer {
    pub fn is_neumann(self) -> bool {
        matches!(self, Displayer::NeumannAp | Displayer::NeumannFrame)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    pub trials: usize,
    pub seed: u64,
    pub nmax: usize,
    pub tol: f64,
    /// Run a Neumann displayer even when its certificate is not below one.
    pub allow_measured: bool,
    pub constants: ConstantsOptions,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            trials: 2000,
            seed: 0,
            nmax: 500,
            tol: 1e-13,
            allow_measured: false,
            constants: ConstantsOptions::with_resolution(5e-3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub x: Vec<f64>,
    pub mean_error: f64,
    pub variance: f64,
    pub se_mean: f64,
    /// Normal-theory standard error of the sample variance.
    pub se_variance: f64,
    /// `σ² Σ_γ ‖u_γ‖_1² |R_γ(x)|²`.
    pub predicted_variance: f64,
    pub energy: f64,
    /// `variance / (α(δ) σ²)`.
    pub scaled_variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub displayer: Displayer,
    pub noise: NoiseModel,
    pub trials: usize,
    pub seed: u64,
    pub delta: f64,
    /// Median mass, the common size of `‖u_γ‖_1` when the masses are asymptotically equal.
    pub alpha_delta: f64,
    /// Largest relative deviation of a mass from `alpha_delta`.
    pub mass_spread: f64,
    pub certificate: Option<f64>,
    /// The trial count cannot resolve the variance to 5% at one standard error.
    pub underpowered: bool,
    pub points: Vec<PointReport>,
}

impl ErrorReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let d = self.points.first().map_or(1, |p| p.x.len());
        let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        for h in ["mean_error", "variance", "se_mean", "se_variance", "predicted_variance", "energy", "scaled_variance"] {
            header.push(h.into());
        }
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec: Vec<String> = p.x.iter().map(|v| format!("{v:.17e}")).collect();
            for v in [p.mean_error, p.variance, p.se_mean, p.se_variance, p.predicted_variance, p.energy] {
                rec.push(format!("{v:.17e}"));
            }
            rec.push(p.scaled_variance.map_or(String::new(), |v| format!("{v:.17e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Applies the displayer to sample values and returns the reconstruction.
fn display(bundle: &OperatorBundle, displayer: Displayer, c: &[f64], opts: &IterationOptions) -> Result<Signal> {
    match displayer {
        Displayer::NeumannAp => Ok(ap_reconstruct(bundle, c, opts)?.signal),
        Displayer::NeumannFrame => Ok(frame_reconstruct(bundle, c, opts)?.signal),
        Displayer::PlainT => bundle.apply_p(c),
        Displayer::PlainK => bundle.apply_s(c),
    }
}

/// Noise vector of trial `t`: an independent ChaCha stream per trial.
pub fn trial_noise(noise: &NoiseModel, seed: u64, trial: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (0..n).map(|_| noise.sample(&mut rng)).collect()
}

/// Reconstructs `g(γ) + ε` for `M` noise draws and compares the pointwise error
/// statistics with the displayer-column variance and the energy integral.
pub fn monte_carlo_error(
    bundle: &OperatorBundle,
    g: &Signal,
    noise: &NoiseModel,
    eval_points: &[Vec<f64>],
    displayer: Displayer,
    opts: &MonteCarloOptions,
) -> Result<ErrorReport> {
    let m = opts.trials;
    if m < 2 {
        return Err(Error::Argument(format!("need at least 2 trials, got {m}")));
    }
    let kernel = bundle.kernel();
    for x in eval_points {
        if !kernel.contains(x) {
            return Err(Error::Domain { point: x.clone(), domain: kernel.domain() });
        }
    }
    let certificate = if displayer.is_neumann() {
        let cert = Certificate::compute(kernel, bundle.delta(), &opts.constants)?;
        let r = match displayer {
            Displayer::NeumannAp => cert.r0,
            _ => cert.r2,
        };
        if !(r < 1.0) && !opts.allow_measured {
            let mut probe = vec![0.0; bundle.n_samples()];
            probe[bundle.n_samples() / 2] = 1.0;
            let iter = IterationOptions::new(opts.nmax.min(50), opts.tol);
            let measured = match displayer {
                Displayer::NeumannAp => ap_reconstruct(bundle, &probe, &iter).map(|r| r.trace.max_ratio()),
                _ => frame_reconstruct(bundle, &probe, &iter).map(|r| r.trace.max_ratio()),
            }
            .unwrap_or(f64::INFINITY);
            return Err(Error::NoCertificate { certified: r, measured });
        }
        Some(r)
    } else {
        None
    };
    let iter = IterationOptions { nmax: opts.nmax, tol: opts.tol, certified: certificate, ..Default::default() };
    let clean = bundle.sample(g);
    let truth: Vec<f64> = eval_points.iter().map(|x| g.eval(x)).collect();
    let n = bundle.n_samples();

    let errors: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|t| {
            let eps = trial_noise(noise, opts.seed, t, n);
            let c: Vec<f64> = clean.iter().zip(&eps).map(|(a, e)| a + e).collect();
            let f = display(bundle, displayer, &c, &iter)?;
            Ok(eval_points.iter().zip(&truth).map(|(x, gx)| gx - f.eval(x)).collect())
        })
        .collect::<Result<_>>()?;

    // R_γ(x) from the unit sample vectors
    let masses = bundle.masses();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let f = display(bundle, displayer, &e, &iter)?;
            Ok(eval_points.iter().map(|x| f.eval(x) / masses[j]).collect())
        })
        .collect::<Result<_>>()?;

    let alpha = median(masses);
    let mass_spread = masses.iter().map(|m| (m / alpha - 1.0).abs()).fold(0.0, f64::max);
    let mf = m as f64;
    let points = eval_points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mean = errors.iter().map(|e| e[i]).sum::<f64>() / mf;
            let var = errors.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / (mf - 1.0);
            let predicted = noise.sigma2 * columns.iter().zip(masses).map(|(c, w)| (w * c[i]).powi(2)).sum::<f64>();
            let energy = kernel.energy_integral(x)?;
            let scaled = (noise.sigma2 > 0.0).then(|| var / (alpha * noise.sigma2));
            Ok(PointReport {
                x: x.clone(),
                mean_error: mean,
                variance: var,
                se_mean: (var / mf).sqrt(),
                se_variance: var * (2.0 / (mf - 1.0)).sqrt(),
                predicted_variance: predicted,
                energy,
                scaled_variance: scaled,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorReport {
        displayer,
        noise: *noise,
        trials: m,
        seed: opts.seed,
        delta: bundle.delta(),
        alpha_delta: alpha,
        mass_spread,
        certificate,
        underpowered: (2.0 / (mf - 1.0)).sqrt() > 0.05,
        points,
    })
}

/// Lattice `δZ ∩ domain` with its normalized indicator BUPU.
pub fn lattice_bundle(kernel: &Arc<Kernel>, delta: f64) -> Result<OperatorBundle> {
    if kernel.dim() != 1 {
        return Err(Error::Argument("lattice configuration is one-dimensional".into()));
    }
    let (lo, hi) = kernel.axis(0).domain();
    let (a, b) = ((lo / delta).ceil() as i64, (hi / delta).floor() as i64);
    let xs: Vec<f64> = (a..=b).map(|i| i as f64 * delta).collect();
    let set = SamplingSet::from_1d(&xs, (lo, hi))?;
    crate::operator::build_bundle(kernel, &normalized_indicator_bupu(&set, delta)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub x: f64,
    pub mean_error: f64,
    pub variance: f64,
    pub scaled_variance: Option<f64>,
    pub energy: f64,
}

/// `monte_carlo_error` on the lattice `δZ` for each `δ`, evaluated at the points `xs`.
pub fn noise_sweep(
    kernel: &Arc<Kernel>,
    g: &Signal,
    deltas: &[f64],
    xs: &[f64],
    noise: &NoiseModel,
    displayer: Displayer,
    opts: &MonteCarloOptions,
) -> Result<(Vec<SweepRow>, Vec<ErrorReport>)> {
    let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &delta in deltas {
        let bundle = lattice_bundle(kernel, delta)?;
        let rep = monte_carlo_error(&bundle, g, noise, &pts, displayer, opts)?;
        for p in &rep.points {
            rows.push(SweepRow {
                delta,
                x: p.x[0],
                mean_error: p.mean_error,
                variance: p.variance,
                scaled_variance: p.scaled_variance,
                energy: p.energy,
            });
        }
        reports.push(rep);
    }
    Ok((rows, reports))
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["delta", "x", "mean_err", "var", "var_over_alpha_sigma2", "energy_integral"])?;
    for r in rows {
        w.write_record([
            format!("{:.17e}", r.delta),
            format!("{:.17e}", r.x),
            format!("{:.17e}", r.mean_error),
            format!("{:.17e}", r.variance),
            r.scaled_variance.map_or(String::new(), |v| format!("{v:.17e}")),
            format!("{:.17e}", r.energy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::make_linear_spline_kernel_on;
    use crate::sampling::generate_jittered;
    use approx::assert_abs_diff_eq;

    fn k1(h: f64) -> Arc<Kernel> {
        Arc::new(make_linear_spline_kernel_on(1, (-h, h), None).unwrap())
    }

    #[test]
    fn noise_models() {
        let u = NoiseModel::uniform(0.3).unwrap();
        assert_abs_diff_eq!(u.sigma2, 0.03, epsilon = 1e-15);
        let g = NoiseModel::truncated_gaussian(0.1).unwrap();
        assert_eq!(g.bound, 0.4);
        // variance of N(0,1) restricted to [−4, 4]
        assert_abs_diff_eq!(g.sigma2 / 0.01, 0.998929290372474, epsilon = 1e-12);
        for model in [u, g] {
            let v = trial_noise(&model, 3, 0, 20000);
            assert!(v.iter().all(|e| e.abs() <= model.bound));
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64;
            assert!(mean.abs() < 4.0 * (model.sigma2 / 20000.0).sqrt());
            assert!((var / model.sigma2 - 1.0).abs() < 0.05);
        }
        assert_ne!(trial_noise(&u, 3, 0, 4), trial_noise(&u, 3, 1, 4));
        assert_eq!(trial_noise(&u, 3, 1, 4), trial_noise(&u, 3, 1, 4));
    }

    #[test]
    fn zero_signal_sandwich_is_trivial() {
        let k = k1(12.0);
        let set = generate_jittered(0.05, 0.2, vec![(-12.0, 12.0)], 1).unwrap();
        let b = crate::operator::build_bundle(&k, &normalized_indicator_bupu(&set, 0.08).unwrap()).unwrap();
        let rep = stability_check(&b, 2.0, &[Signal::zero(k.clone())], &ConstantsOptions::with_resolution(1e-2)).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.rows[0].lower, 0.0);
        assert_eq!(rep.rows[0].sample_norm, 0.0);
    }

    #[test]
    fn single_hat_derivative_check() {
        let k = k1(6.0);
        let i0 = k.axis(0).labels().iter().position(|&l| l == 0).unwrap();
        let hat = Signal::basis(k.clone(), i0);
        let fine = lattice_bundle(&k, 0.25).unwrap();
        let rep = derivative_stability_check(&hat, 1.0, &fine, f64::INFINITY).unwrap();
        assert_abs_diff_eq!(rep.derivative_ratio, 1.0, epsilon = 1e-12);
        assert!(rep.precondition_met && rep.holds == Some(true));
        let coarse = lattice_bundle(&k, 1.0).unwrap();
        assert!(!derivative_stability_check(&hat, 1.0, &coarse, 2.0).unwrap().precondition_met);
        assert!(!derivative_stability_check(&hat, 0.5, &fine, 2.0).unwrap().precondition_met);
    }

    #[test]
    fn noiseless_trials_reproduce_signal() {
        let k = k1(6.0);
        let b = lattice_bundle(&k, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Signal::random(k.clone(), &mut rng);
        let opts = MonteCarloOptions { trials: 4, ..Default::default() };
        let rep = monte_carlo_error(&b, &g, &NoiseModel::uniform(0.0).unwrap(), &[vec![0.3]], Displayer::NeumannAp, &opts).unwrap();
        assert!(rep.points[0].variance <= 1e-24);
        assert!(rep.points[0].mean_error.abs() <= 1e-11);
        assert!(rep.underpowered);
    }

    #[test]
    fn plain_displayers_have_closed_form_columns() {
        // PlainT columns are T u_γ / ‖u_γ‖_1 evaluated at x
        let k = k1(6.0);
        let b = lattice_bundle(&k, 0.2).unwrap();
        let g = Signal::zero(k.clone());
        let noise = NoiseModel::uniform(0.1).unwrap();
        let opts = MonteCarloOptions { trials: 2, ..Default::default() };
        let x = vec![0.1];
        let rep = monte_carlo_error(&b, &g, &noise, &[x.clone()], Displayer::PlainT, &opts).unwrap();
        let direct: f64 = (0..b.n_samples())
            .map(|j| {
                let col = Signal::new(k.clone(), b.tu.column(j)).unwrap();
                col.eval(&x).powi(2)
            })
            .sum();
        assert_abs_diff_eq!(rep.points[0].predicted_variance, noise.sigma2 * direct, epsilon = 1e-15);
    }
}
