//! Command-line front end: JSON configs in, CSV/JSON reports out, all paths
//! relative to a working directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_constants, ConstantsOptions, Kernel, KernelConstants, KernelSpec};
use crate::noise::{
    noise_sweep, stability_check, trial_noise, write_sweep_csv, Displayer, NoiseKind, NoiseModel, MonteCarloOptions,
    StabilityReport,
};
use crate::operator::{build_bundle, OperatorBundle, Signal};
use crate::reconstruct::{
    ap_discrete, ap_reconstruct, frame_reconstruct, Algorithm, Certificate, IterationOptions, IterationTrace, StopReason,
    Stopping,
};
use crate::sampling::{generate_jittered, maximal_gap, normalized_indicator_bupu, voronoi_bupu, Bupu, BupuKind, SamplingSet};

#[derive(Debug, Parser)]
#[command(name = "rksampling", version, about = "Sampling and reconstruction in reproducing kernel subspaces")]
pub struct Cli {
    /// Directory that all input and output paths are relative to.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel constants r1, r0(δ), r2(δ), a_δ(q), b_δ(q) and certified δ thresholds.
    KernelInfo(KernelInfoArgs),
    /// Jittered sampling set written as CSV.
    SampleGen(SampleGenArgs),
    /// Run AP, discrete AP or frame reconstruction from a JSON config.
    Reconstruct(ConfigArg),
    /// Monte-Carlo noise experiment over a list of lattice spacings.
    NoiseSweep(ConfigArg),
    /// Sampling stability sandwich on random signals.
    StabilityCheck(ConfigArg),
}

#[derive(Debug, Args)]
pub struct KernelInfoArgs {
    /// Kernel spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Comma-separated window sizes δ.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1, 0.2, 0.3])]
    pub deltas: Vec<f64>,
    /// Comma-separated exponents q (`inf` allowed).
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, f64::INFINITY])]
    pub qs: Vec<f64>,
    /// Step of the midpoint rule.
    #[arg(long, default_value_t = 5e-3)]
    pub resolution: f64,
    #[arg(long, default_value = "kernel_info.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleGenArgs {
    /// Lattice step before jitter.
    #[arg(long)]
    pub delta: f64,
    /// Jitter as a fraction of δ, in [0, 0.5).
    #[arg(long, default_value_t = 0.25)]
    pub jitter: f64,
    /// Domain interval `lo,hi`; repeat once per dimension.
    #[arg(long, value_parser = parse_interval, required = true)]
    pub domain: Vec<(f64, f64)>,
    #[arg(long, default_value = "samples.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Experiment config JSON.
    #[arg(long)]
    pub config: PathBuf,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

fn de_exponents<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }
    Vec::<NumOrStr>::deserialize(d)?
        .into_iter()
        .map(|v| match v {
            NumOrStr::Num(x) => Ok(x),
            NumOrStr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            NumOrStr::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s}"))),
        })
        .collect()
}

/// Where the sampling set comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SamplingSource {
    Csv { path: PathBuf },
    Jittered { delta: f64, jitter: f64 },
    Lattice { delta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BupuChoice {
    pub kind: BupuKind,
    /// Cube size of the indicator BUPU; the maximal gap when absent.
    #[serde(default)]
    pub delta: Option<f64>,
}

impl Default for BupuChoice {
    fn default() -> Self {
        BupuChoice { kind: BupuKind::Indicator, delta: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default = "default_noise_kind")]
    pub kind: NoiseKind,
    /// Standard deviation of the (untruncated) noise.
    pub sigma: f64,
}

fn default_noise_kind() -> NoiseKind {
    NoiseKind::UniformBounded
}

impl NoiseConfig {
    pub fn model(&self) -> Result<NoiseModel> {
        match self.kind {
            NoiseKind::UniformBounded => NoiseModel::uniform_with_sigma(self.sigma),
            NoiseKind::TruncatedGaussian => NoiseModel::truncated_gaussian(self.sigma),
        }
    }
}

fn default_nmax() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-12
}
fn default_trials() -> usize {
    2000
}
fn default_signals() -> usize {
    100
}
fn default_resolution() -> f64 {
    5e-3
}
fn default_algorithm() -> Algorithm {
    Algorithm::Ap
}
fn default_displayer() -> Displayer {
    Displayer::NeumannAp
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Shared config of the reconstruct, noise-sweep and stability-check commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kernel_spec: KernelSpec,
    #[serde(default)]
    pub sampling: Option<SamplingSource>,
    #[serde(default)]
    pub bupu: BupuChoice,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_nmax")]
    pub nmax: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub stopping: Stopping,
    /// CSV with a `value` column, one row per sample point in file order.
    #[serde(default)]
    pub values_csv: Option<PathBuf>,
    /// Draw a random ground-truth signal and sample it.
    #[serde(default)]
    pub truth_seed: Option<u64>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default = "default_resolution")]
    pub constants_resolution: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub eval_points: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_displayer")]
    pub displayer: Displayer,
    #[serde(default, deserialize_with = "de_exponents")]
    pub p_values: Vec<f64>,
    #[serde(default = "default_signals")]
    pub signals: usize,
    /// Run Neumann displayers without a certificate below one.
    #[serde(default)]
    pub allow_measured: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Argument(format!("cannot read config {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn constants_options(&self) -> ConstantsOptions {
        ConstantsOptions::with_resolution(self.constants_resolution)
    }
}

/// Exit status for an error: 3 for numerical divergence, 2 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 3,
        _ => 2,
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Argument("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let wd = &cli.workdir;
    match &cli.command {
        Command::KernelInfo(a) => cmd_kernel_info(wd, a),
        Command::SampleGen(a) => cmd_sample_gen(wd, cli.seed, a),
        Command::Reconstruct(a) => cmd_reconstruct(wd, cli.seed, &ExperimentConfig::load(&wd.join(&a.config))?),
        Command::NoiseSweep(a) => cmd_noise_sweep(wd, cli.seed, &ExperimentConfig::load(&wd.join(&a.config))?),
        Command::StabilityCheck(a) => cmd_stability_check(wd, cli.seed, &ExperimentConfig::load(&wd.join(&a.config))?),
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct KernelInfo {
    pub spec: KernelSpec,
    pub n_basis: usize,
    pub symmetric: bool,
    pub continuous: bool,
    pub constants: KernelConstants,
    /// Smallest δ with r0(δ) ≥ 1.
    pub r0_threshold: f64,
    /// Smallest δ with r2(δ) ≥ 1.
    pub r2_threshold: f64,
}

/// Smallest `δ` with `r0(δ) >= target`, by bisection to `tol`.
fn r0_inverse(kernel: &Kernel, opts: &ConstantsOptions, target: f64, tol: f64) -> Result<f64> {
    let r0 = |d: f64| -> Result<f64> { Ok(kernel_constants(kernel, &[d], &[], opts)?.rows[0].r0) };
    let (mut lo, mut hi) = (0.0, 0.01);
    while r0(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Argument(format!("r0 stays below {target} for every window tried")));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if r0(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn cmd_kernel_info(wd: &Path, a: &KernelInfoArgs) -> Result<()> {
    let spec = KernelSpec::load(&wd.join(&a.spec))?;
    let kernel = spec.build()?;
    let opts = ConstantsOptions::with_resolution(a.resolution);
    let mut constants = kernel_constants(&kernel, &a.deltas, &a.qs, &opts)?;
    // a_δ(q), b_δ(q) are undefined at δ = 0
    constants.q_rows.retain(|r| r.delta > 0.0);
    let r1 = constants.r1;
    let info = KernelInfo {
        spec,
        n_basis: kernel.n_basis(),
        symmetric: kernel.symmetric(),
        continuous: kernel.is_continuous(),
        r0_threshold: r0_inverse(&kernel, &opts, 1.0, 1e-4)?,
        // r2 = (2 r1 + r0) r0 < 1 exactly when r0 < sqrt(r1² + 1) − r1
        r2_threshold: r0_inverse(&kernel, &opts, (r1 * r1 + 1.0).sqrt() - r1, 1e-4)?,
        constants,
    };
    let c = &info.constants;
    println!("basis size {}  symmetric {}  continuous {}", info.n_basis, info.symmetric, info.continuous);
    println!("r1 = {:.6}", c.r1);
    println!("{:>8} {:>10} {:>10}", "delta", "r0", "r2");
    for r in &c.rows {
        println!("{:>8} {:>10.6} {:>10.6}", r.delta, r.r0, r.r2);
    }
    for q in &c.q_rows {
        println!("a_{}({}) = {:.6}  b = {:.6}", q.delta, q.q, q.a, q.b);
    }
    println!("r0 < 1 for delta < {:.4}; r2 < 1 for delta < {:.4}", info.r0_threshold, info.r2_threshold);
    write_json(&wd.join(&a.out), &info)
}

pub fn cmd_sample_gen(wd: &Path, seed: u64, a: &SampleGenArgs) -> Result<()> {
    let set = generate_jittered(a.delta, a.jitter, a.domain.clone(), seed)?;
    let out = wd.join(&a.out);
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    set.write_csv(&out)?;
    write_json(&out.with_extension("meta.json"), &set.meta)?;
    println!("{} points, maximal gap {:.6}", set.len(), maximal_gap(&set)?);
    Ok(())
}

fn load_set(wd: &Path, cfg: &ExperimentConfig, kernel: &Kernel, seed: u64) -> Result<SamplingSet> {
    let domain = kernel.domain();
    match &cfg.sampling {
        None => Err(Error::Argument("config needs a sampling section".into())),
        Some(SamplingSource::Csv { path }) => SamplingSet::read_csv(&wd.join(path), domain),
        Some(SamplingSource::Jittered { delta, jitter }) => generate_jittered(*delta, *jitter, domain, seed),
        Some(SamplingSource::Lattice { delta }) => generate_jittered(*delta, 0.0, domain, seed),
    }
}

fn load_bupu(cfg: &ExperimentConfig, set: &SamplingSet) -> Result<Bupu> {
    match cfg.bupu.kind {
        BupuKind::Indicator => {
            let delta = match cfg.bupu.delta {
                Some(d) => d,
                None => maximal_gap(set)?,
            };
            normalized_indicator_bupu(set, delta)
        }
        BupuKind::Voronoi => voronoi_bupu(set),
    }
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let col = r
        .headers()?
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Argument(format!("{} has no value column", path.display())))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let s = rec.get(col).unwrap_or("");
            s.trim().parse().map_err(|e| Error::Argument(format!("bad value {s:?}: {e}")))
        })
        .collect()
}

fn truth_signal(kernel: &Arc<Kernel>, seed: Option<u64>) -> Option<Signal> {
    seed.map(|s| Signal::random(kernel.clone(), &mut ChaCha8Rng::seed_from_u64(s)))
}

#[derive(Debug, Serialize)]
pub struct ReconstructSummary {
    pub algorithm: Algorithm,
    pub n_samples: usize,
    pub delta: f64,
    pub certificate: Certificate,
    pub contraction: f64,
    pub measured_only: bool,
    pub stop_reason: StopReason,
    pub steps: usize,
    pub max_ratio: f64,
    pub limit_residual: Option<f64>,
    /// Relative sup-norm error against the ground truth, when known.
    pub sup_error: Option<f64>,
    pub noise: Option<NoiseModel>,
}

fn write_column(path: &Path, header: &str, v: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", header])?;
    for (i, x) in v.iter().enumerate() {
        w.write_record([i.to_string(), format!("{x:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_reconstruct(wd: &Path, seed: u64, cfg: &ExperimentConfig) -> Result<()> {
    let kernel = Arc::new(cfg.kernel_spec.build()?);
    let set = load_set(wd, cfg, &kernel, seed)?;
    let bupu = load_bupu(cfg, &set)?;
    let bundle = build_bundle(&kernel, &bupu)?;
    let truth = truth_signal(&kernel, cfg.truth_seed);
    let mut c0 = match (&cfg.values_csv, &truth) {
        (Some(p), _) => read_values(&wd.join(p))?,
        (None, Some(g)) => bundle.sample(g),
        (None, None) => return Err(Error::Argument("config needs values_csv or truth_seed".into())),
    };
    if c0.len() != bundle.n_samples() {
        return Err(Error::Dimension { expected: bundle.n_samples(), got: c0.len() });
    }
    let noise = cfg.noise.as_ref().map(|n| n.model()).transpose()?;
    if let Some(model) = &noise {
        for (c, e) in c0.iter_mut().zip(trial_noise(model, seed, 0, bundle.n_samples())) {
            *c += e;
        }
    }
    let cert = Certificate::compute(&kernel, bundle.delta(), &cfg.constants_options())?;
    let contraction = cert.contraction(cfg.algorithm);
    let opts = IterationOptions {
        nmax: cfg.nmax,
        tol: cfg.tol,
        steps: cfg.stopping.steps(cert.r0)?,
        certified: Some(contraction),
        ..Default::default()
    };
    let out = wd.join(&cfg.output);
    std::fs::create_dir_all(&out)?;
    let write_trace = |t: &IterationTrace| t.write_csv(&out.join("trace.csv"));
    let result = match cfg.algorithm {
        Algorithm::Ap => ap_reconstruct(&bundle, &c0, &opts).map(|r| (Some(r), None)),
        Algorithm::Frame => frame_reconstruct(&bundle, &c0, &opts).map(|r| (Some(r), None)),
        Algorithm::ApDiscrete => ap_discrete(&bundle, &c0, &opts).map(|r| (None, Some(r))),
    };
    let (cont, disc) = match result {
        Ok(v) => v,
        Err(Error::Divergence { step, ratio, trace }) => {
            write_trace(&trace)?;
            return Err(Error::Divergence { step, ratio, trace });
        }
        Err(e) => return Err(e),
    };
    let (trace, limit_residual, sup_error) = match (&cont, &disc) {
        (Some(r), _) => {
            write_column(&out.join("coefficients.csv"), "coefficient", r.signal.coeffs())?;
            let err = truth.as_ref().map(|g| r.signal.sub(g).norm(f64::INFINITY) / g.norm(f64::INFINITY));
            (&r.trace, Some(r.limit_residual), err)
        }
        (None, Some(r)) => {
            write_column(&out.join("values.csv"), "value", &r.values)?;
            let err = truth.as_ref().map(|g| {
                let exact = bundle.sample(g);
                let d = exact.iter().zip(&r.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                d / exact.iter().map(|v| v.abs()).fold(0.0, f64::max)
            });
            (&r.trace, None, err)
        }
        (None, None) => unreachable!(),
    };
    write_trace(trace)?;
    let summary = ReconstructSummary {
        algorithm: cfg.algorithm,
        n_samples: bundle.n_samples(),
        delta: bundle.delta(),
        contraction,
        measured_only: trace.measured_only,
        stop_reason: trace.stop_reason,
        steps: trace.steps.len() - 1,
        max_ratio: trace.max_ratio(),
        limit_residual,
        sup_error,
        noise,
        certificate: cert,
    };
    println!(
        "{:?}: {} steps, stop {:?}, contraction {:.4}{}",
        summary.algorithm,
        summary.steps,
        summary.stop_reason,
        summary.contraction,
        summary.sup_error.map_or(String::new(), |e| format!(", sup error {e:.3e}"))
    );
    write_json(&out.join("summary.json"), &summary)
}

pub fn cmd_noise_sweep(wd: &Path, seed: u64, cfg: &ExperimentConfig) -> Result<()> {
    let kernel = Arc::new(cfg.kernel_spec.build()?);
    if cfg.deltas.is_empty() || cfg.eval_points.is_empty() {
        return Err(Error::Argument("noise sweep needs deltas and eval_points".into()));
    }
    let noise = cfg.noise.as_ref().ok_or_else(|| Error::Argument("noise sweep needs a noise section".into()))?.model()?;
    let g = truth_signal(&kernel, cfg.truth_seed).unwrap_or_else(|| Signal::zero(kernel.clone()));
    let opts = MonteCarloOptions {
        trials: cfg.trials,
        seed,
        nmax: cfg.nmax,
        tol: cfg.tol,
        allow_measured: cfg.allow_measured,
        constants: cfg.constants_options(),
    };
    let (rows, reports) = noise_sweep(&kernel, &g, &cfg.deltas, &cfg.eval_points, &noise, cfg.displayer, &opts)?;
    let out = wd.join(&cfg.output);
    std::fs::create_dir_all(&out)?;
    write_sweep_csv(&rows, &out.join("sweep.csv"))?;
    for (i, rep) in reports.iter().enumerate() {
        rep.write_csv(&out.join(format!("report_{i}.csv")))?;
        rep.write_json(&out.join(format!("report_{i}.json")))?;
    }
    for r in &rows {
        println!(
            "delta {:<6} x {:<6} mean {:+.3e} var/(alpha sigma2) {} energy {:.6}",
            r.delta,
            r.x,
            r.mean_error,
            r.scaled_variance.map_or("-".into(), |v| format!("{v:.6}")),
            r.energy
        );
    }
    Ok(())
}

pub fn cmd_stability_check(wd: &Path, seed: u64, cfg: &ExperimentConfig) -> Result<()> {
    let kernel = Arc::new(cfg.kernel_spec.build()?);
    let set = load_set(wd, cfg, &kernel, seed)?;
    let bundle: OperatorBundle = build_bundle(&kernel, &load_bupu(cfg, &set)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.truth_seed.unwrap_or(seed));
    let signals: Vec<Signal> = (0..cfg.signals).map(|_| Signal::random(kernel.clone(), &mut rng)).collect();
    let ps = if cfg.p_values.is_empty() { vec![1.0, 2.0, f64::INFINITY] } else { cfg.p_values.clone() };
    let opts = cfg.constants_options();
    let reports: Vec<StabilityReport> =
        ps.iter().map(|&p| stability_check(&bundle, p, &signals, &opts)).collect::<Result<_>>()?;
    for r in &reports {
        println!(
            "p = {:<4} certified {:.4} ({:?}) violations {}/{} worst slack {:.4}",
            r.p,
            r.certified,
            r.route,
            r.violations,
            r.rows.len(),
            r.worst_slack
        );
    }
    let out = wd.join(&cfg.output);
    write_json(&out.join("stability.json"), &reports)
}
