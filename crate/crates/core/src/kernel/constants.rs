//! Decay and regularity constants of a kernel.
//!
//! For one axis, `r1 = ∫ sup_z |K(t+z, z)| dt` and `D(a) = ∫ sup_z ω_a(K)(t+z, z) dt`.
//! The inner sups are exact on polynomial pieces: for every `t` of a midpoint
//! grid the path `z ↦ (t+z, z)` is split at all shifted breakpoints and the
//! modulus is reduced to finitely many vertex families (box corners, fixed
//! breakpoints in either variable, and breakpoint pairs), each a quadratic in `z`.
//! Tensor kernels combine per-axis values through product bounds.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::poly::{integrate_max_abs, Poly};

use super::linear::{quad_sup_abs, Coord, LinearAxis};
use super::Kernel;

/// Below this envelope the exact sup is replaced by the envelope itself.
const SKIP_ENVELOPE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsOptions {
    /// Step of the midpoint rule in `t`.
    pub grid_resolution: f64,
    /// Only `|t| <= radius` is computed exactly; the rest is bounded by an envelope.
    pub truncation_radius: Option<f64>,
    /// Largest envelope mass tolerated beyond the truncation radius.
    pub tail_tolerance: f64,
    /// Refinement step for linearizing pieces of degree > 1.
    pub surrogate_step: f64,
    /// Restrict the sup over `z` to base points whose first coordinate lies where
    /// no boundary column is active. The default covers the whole domain, which
    /// includes edge effects of the finite window.
    #[serde(default)]
    pub interior: bool,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        ConstantsOptions {
            grid_resolution: 1e-3,
            truncation_radius: None,
            tail_tolerance: 1e-6,
            surrogate_step: 1e-2,
            interior: false,
        }
    }
}

impl ConstantsOptions {
    pub fn with_resolution(h: f64) -> Self {
        ConstantsOptions { grid_resolution: h, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.grid_resolution > 0.0) || !(self.surrogate_step > 0.0) {
            return Err(Error::Argument("grid resolution and surrogate step must be positive".into()));
        }
        if let Some(r) = self.truncation_radius {
            if !(r >= 0.0) {
                return Err(Error::Argument(format!("truncation radius must be nonnegative, got {r}")));
            }
        }
        Ok(())
    }
}

/// Constants that depend on a window size `δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    /// `∫ sup_z ω_{δ/2}(K)(t+z, z) dt`.
    pub r0: f64,
    /// `(2 r1 + r0) r0`.
    pub r2: f64,
    /// `∫ sup_z ω_δ(K)(t+z, z) dt`.
    pub d_full: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    pub delta: f64,
    #[serde(serialize_with = "ser_inf", deserialize_with = "de_inf")]
    pub q: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub r1: f64,
    pub rows: Vec<DeltaRow>,
    pub q_rows: Vec<QRow>,
    pub grid_resolution: f64,
    pub truncation_radius: Option<f64>,
    /// Envelope mass added for `|t|` beyond the truncation radius.
    pub tail_mass: f64,
    /// Uniform bound on the linear-surrogate error (0 for piecewise-linear kernels).
    pub surrogate_error: f64,
}

impl KernelConstants {
    fn row(&self, delta: f64) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.delta == delta)
    }

    pub fn r0_of(&self, delta: f64) -> Option<f64> {
        self.row(delta).map(|r| r.r0)
    }

    pub fn r2_of(&self, delta: f64) -> Option<f64> {
        self.row(delta).map(|r| r.r2)
    }

    pub fn aq_of(&self, delta: f64, q: f64) -> Option<f64> {
        self.q_rows.iter().find(|r| r.delta == delta && r.q == q).map(|r| r.a)
    }

    pub fn bq_of(&self, delta: f64, q: f64) -> Option<f64> {
        self.q_rows.iter().find(|r| r.delta == delta && r.q == q).map(|r| r.b)
    }
}

pub(crate) fn ser_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

pub(crate) fn de_inf<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }
    match NumOrStr::deserialize(d)? {
        NumOrStr::Num(v) => Ok(v),
        NumOrStr::Str(s) if s == "inf" => Ok(f64::INFINITY),
        NumOrStr::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s}"))),
    }
}

/// Per-axis sweep output.
struct AxisSweep {
    r1: f64,
    /// `D(a)` for each requested radius.
    d: Vec<f64>,
    tail: f64,
}

fn push_breaks(list: &[f64], off: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    let i0 = list.partition_point(|&b| b - off <= lo);
    for &b in &list[i0..] {
        let z = b - off;
        if z >= hi {
            break;
        }
        out.push(z);
    }
}

struct Scratch {
    brk: Vec<f64>,
    act: Vec<usize>,
}

/// `sup_{z ∈ [zlo, zhi]} |K(X(z), Y(z)) - K(t+z, z)|`, or `|K(t+z, z)|` when `x` is `None`.
fn path_sup(la: &LinearAxis, t: f64, xy: Option<(Coord, Coord)>, zlo: f64, zhi: f64, s: &mut Scratch) -> f64 {
    let brk = &mut s.brk;
    brk.clear();
    brk.push(zlo);
    brk.push(zhi);
    push_breaks(&la.bbreaks, t, zlo, zhi, brk);
    push_breaks(&la.cbreaks, 0.0, zlo, zhi, brk);
    if let Some((x, y)) = xy {
        if let Coord::Moving(o) = x {
            push_breaks(&la.bbreaks, o, zlo, zhi, brk);
        }
        if let Coord::Moving(o) = y {
            push_breaks(&la.cbreaks, o, zlo, zhi, brk);
        }
    }
    brk.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    brk.dedup();
    let base = (Coord::Moving(t), Coord::Moving(0.0));
    let mut m: f64 = 0.0;
    let mut eval = |zm: f64, r: f64, act: &mut Vec<usize>| {
        let mut c = la.path_quad(base.0, base.1, zm, act);
        if let Some((x, y)) = xy {
            let e = la.path_quad(x, y, zm, act);
            for i in 0..3 {
                c[i] = e[i] - c[i];
            }
        }
        m = m.max(quad_sup_abs(c, r));
    };
    if brk.len() == 1 {
        eval(zlo, 0.0, &mut s.act);
    } else {
        for i in 0..brk.len() - 1 {
            let (a, b) = (brk[i], brk[i + 1]);
            eval(0.5 * (a + b), 0.5 * (b - a), &mut s.act);
        }
    }
    m
}

/// `sup_{z ∈ Z} ω_a(K)(t+z, z)` on the surrogate, by vertex families.
fn modulus_sup(la: &LinearAxis, t: f64, a: f64, zlo: f64, zhi: f64, s: &mut Scratch) -> f64 {
    let sides: &[bool] = if la.continuous { &[false] } else { &[false, true] };
    let mut m: f64 = 0.0;
    for dx in [-a, a] {
        for dy in [-a, a] {
            m = m.max(path_sup(la, t, Some((Coord::Moving(t + dx), Coord::Moving(dy))), zlo, zhi, s));
        }
    }
    // primal breakpoint b inside the x-window: z ∈ [b-t-a, b-t+a]
    let bb = &la.bbreaks;
    let i0 = bb.partition_point(|&b| b < zlo + t - a);
    for &b in &bb[i0..] {
        if b > zhi + t + a {
            break;
        }
        let (lo, hi) = (zlo.max(b - t - a), zhi.min(b - t + a));
        if hi < lo {
            continue;
        }
        for &side in sides {
            for dy in [-a, a] {
                m = m.max(path_sup(la, t, Some((Coord::Fixed(b, side), Coord::Moving(dy))), lo, hi, s));
            }
        }
    }
    let cb = &la.cbreaks;
    let j0 = cb.partition_point(|&c| c < zlo - a);
    for &c in &cb[j0..] {
        if c > zhi + a {
            break;
        }
        let (lo, hi) = (zlo.max(c - a), zhi.min(c + a));
        if hi < lo {
            continue;
        }
        for &side in sides {
            for dx in [-a, a] {
                m = m.max(path_sup(la, t, Some((Coord::Moving(t + dx), Coord::Fixed(c, side))), lo, hi, s));
            }
        }
        // both coordinates pinned at breakpoints
        let k0 = bb.partition_point(|&b| b < c + t - 2.0 * a);
        for &b in &bb[k0..] {
            if b > c + t + 2.0 * a {
                break;
            }
            let (lo2, hi2) = (lo.max(b - t - a), hi.min(b - t + a));
            if hi2 < lo2 {
                continue;
            }
            for &sb in sides {
                for &sc in sides {
                    let xy = (Coord::Fixed(b, sb), Coord::Fixed(c, sc));
                    m = m.max(path_sup(la, t, Some(xy), lo2, hi2, s));
                }
            }
        }
    }
    m
}

fn axis_sweep(la: &LinearAxis, radii: &[f64], opts: &ConstantsOptions) -> Result<AxisSweep> {
    let (l0, l1) = la.domain;
    let amax = radii.iter().copied().fold(0.0, f64::max);
    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (f, g) in la.basis.iter().zip(&la.cok) {
        let ((a, b), (c, d)) = (f.support(), g.support());
        tmin = tmin.min(a - d);
        tmax = tmax.max(b - c);
    }
    let t_lo = (tmin - 2.0 * amax).max(l0 - l1);
    let t_hi = (tmax + 2.0 * amax).min(l1 - l0);
    if !(t_hi > t_lo) {
        return Ok(AxisSweep { r1: 0.0, d: vec![0.0; radii.len()], tail: 0.0 });
    }
    let n = ((t_hi - t_lo) / opts.grid_resolution).ceil().max(1.0) as usize;
    let step = (t_hi - t_lo) / n as f64;
    let err = la.err;
    let samples: Vec<(f64, Vec<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = t_lo + (i as f64 + 0.5) * step;
            let outside = opts.truncation_radius.is_some_and(|r| t.abs() > r);
            let envelope = |a: f64| 2.0 * la.band_envelope(-t - 2.0 * a, -t + 2.0 * a);
            if outside || envelope(amax) < SKIP_ENVELOPE {
                let h = la.band_envelope(-t, -t);
                let d = radii.iter().map(|&a| if a == 0.0 { 0.0 } else { envelope(a) }).collect();
                return (h, d, outside);
            }
            let (x0, x1) = if opts.interior { la.interior } else { la.domain };
            let (zlo, zhi) = (l0.max(x0 - t), l1.min(x1 - t));
            if zhi < zlo {
                return (0.0, vec![0.0; radii.len()], false);
            }
            let mut s = Scratch { brk: Vec::new(), act: Vec::new() };
            let h = path_sup(la, t, None, zlo, zhi, &mut s) + err;
            let d = radii
                .iter()
                .map(|&a| if a == 0.0 { 0.0 } else { modulus_sup(la, t, a, zlo, zhi, &mut s) + 2.0 * err })
                .collect();
            (h, d, false)
        })
        .collect();
    let mut out = AxisSweep { r1: 0.0, d: vec![0.0; radii.len()], tail: 0.0 };
    for (h, d, outside) in samples {
        out.r1 += step * h;
        for (acc, v) in out.d.iter_mut().zip(&d) {
            *acc += step * v;
        }
        if outside {
            out.tail += step * d.iter().copied().fold(h, f64::max);
        }
    }
    if out.tail > opts.tail_tolerance {
        return Err(Error::DecayViolation { tail_mass: out.tail, radius: opts.truncation_radius.unwrap_or(f64::INFINITY) });
    }
    Ok(out)
}

/// `r1`, `r0(δ)`, `r2(δ)` and the `a_δ(q)`, `b_δ(q)` bounds for every `δ` in
/// `deltas` and `q` in `qs` (`q = ∞` allowed).
pub fn kernel_constants(kernel: &Kernel, deltas: &[f64], qs: &[f64], opts: &ConstantsOptions) -> Result<KernelConstants> {
    opts.validate()?;
    if let Some(d) = deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::Argument(format!("window sizes must be finite and nonnegative, got {d}")));
    }
    if let Some(q) = qs.iter().find(|q| !(**q >= 1.0)) {
        return Err(Error::Argument(format!("q must lie in [1, inf], got {q}")));
    }
    let mut radii: Vec<f64> = deltas.iter().flat_map(|&d| [0.5 * d, d]).collect();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    let pos = |a: f64| radii.iter().position(|&r| r == a).unwrap();

    let (mut r1, mut dvals, mut tail, mut serr) = (1.0, vec![0.0; radii.len()], 0.0, 0.0f64);
    for (i, axis) in kernel.axes().iter().enumerate() {
        let la = LinearAxis::new(axis, opts.surrogate_step);
        serr = serr.max(la.err);
        let sw = axis_sweep(&la, &radii, opts)?;
        tail += sw.tail;
        if i == 0 {
            r1 = sw.r1;
            dvals = sw.d;
        } else {
            // ω(K_A K_B) <= ω_A (h_B + ω_B) + h_A ω_B, integrated in t
            for (acc, db) in dvals.iter_mut().zip(&sw.d) {
                *acc = *acc * (sw.r1 + db) + r1 * db;
            }
            r1 *= sw.r1;
        }
    }
    let dim = kernel.dim() as f64;
    let mut rows = Vec::new();
    let mut q_rows = Vec::new();
    for &delta in deltas {
        let r0 = dvals[pos(0.5 * delta)];
        let d_full = dvals[pos(delta)];
        rows.push(DeltaRow { delta, r0, r2: (2.0 * r1 + r0) * r0, d_full });
        for &q in qs {
            let iq = if q.is_infinite() { 0.0 } else { 1.0 / q };
            let scale = delta.powf(-dim + dim * iq);
            let a = scale * r1.powf(iq) * (r1 + d_full).powf(1.0 - iq);
            let b = (6f64.powf(dim) + 1.0).powf(1.0 - iq) * scale * d_full;
            q_rows.push(QRow { delta, q, a, b });
        }
    }
    Ok(KernelConstants {
        r1,
        rows,
        q_rows,
        grid_resolution: opts.grid_resolution,
        truncation_radius: opts.truncation_radius,
        tail_mass: tail,
        surrogate_error: serr,
    })
}

/// Smallest `δ` with `r2(δ) >= 1`, by bisection to `tol`.
pub fn r2_crossing(kernel: &Kernel, opts: &ConstantsOptions, tol: f64) -> Result<f64> {
    let r2 = |d: f64| -> Result<f64> { Ok(kernel_constants(kernel, &[d], &[], opts)?.rows[0].r2) };
    let (mut lo, mut hi) = (0.0, 0.01);
    while r2(hi)? < 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Argument("r2 stays below 1 for every window tried".into()));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if r2(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The two one-sided modulus norms of the continuous-kernel stability bound and
/// their geometric interpolation `first^(1-1/p) · second^(1/p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct R0Prime {
    pub delta0: f64,
    #[serde(serialize_with = "ser_inf", deserialize_with = "de_inf")]
    pub p: f64,
    /// `sup_x ‖sup_{|t|≤δ0/2} |K(x+t,·) - K(x,·)|‖_1`.
    pub first: f64,
    /// `sup_y ‖sup_{|t|≤δ0/2} |K(·+t,y) - K(·,y)|‖_1`.
    pub second: f64,
    pub value: f64,
}

struct AxisR0Prime {
    first: f64,
    second: f64,
    /// `sup_x ∫ |K(x,y)| dy`.
    row_norm: f64,
    /// `sup_y ∫ |K(x,y)| dx`.
    col_norm: f64,
}

fn in_domain(v: f64, dom: (f64, f64)) -> bool {
    v >= dom.0 && v <= dom.1
}

fn event_points(breaks: &[f64], offsets: &[f64], dom: (f64, f64)) -> Vec<f64> {
    let mut ev = vec![dom.0, dom.1];
    for &b in breaks {
        for &o in offsets {
            if in_domain(b + o, dom) {
                ev.push(b + o);
            }
        }
    }
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev.dedup();
    ev
}

/// `∫_dom max_i |Σ_k w_ik κ_k(y)| dy` for a few coefficient rows `w`.
fn integrate_max_rows(la: &LinearAxis, ks: &[usize], rows: &[Vec<f64>]) -> f64 {
    let dom = la.domain;
    let mut brk = vec![dom.0, dom.1];
    for &k in ks {
        brk.extend(la.cok[k].breaks().iter().copied().filter(|&b| b > dom.0 && b < dom.1));
    }
    brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
    brk.dedup();
    let mut total = 0.0;
    let mut polys = vec![Poly::zero(); rows.len()];
    for w in brk.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ym = 0.5 * (a + b);
        for (p, row) in polys.iter_mut().zip(rows) {
            let (mut v, mut s) = (0.0, 0.0);
            for (&k, &c) in ks.iter().zip(row) {
                let (q0, q1) = la.cok[k].local(ym);
                v += c * q0;
                s += c * q1;
            }
            // in the local variable u = y - a
            *p = Poly::linear(v - s * (ym - a), s);
        }
        total += integrate_max_abs(&polys, 0.0, b - a);
    }
    total
}

fn axis_r0_prime(la: &LinearAxis, a: f64) -> AxisR0Prime {
    let dom = la.domain;
    let bb = &la.bbreaks;
    let mut act = Vec::new();

    // first factor and row norm: convex in x between the events {b, b ± a}
    let mut first: f64 = 0.0;
    let mut row_norm: f64 = 0.0;
    for x in event_points(bb, &[-a, 0.0, a], dom) {
        la.index.query_range(x - a, x + a, &mut act);
        let ks = act.clone();
        let mut shifts = vec![-a, a];
        shifts.extend(bb.iter().map(|&b| b - x).filter(|t| t.abs() < a));
        let base: Vec<f64> = ks.iter().map(|&k| la.basis[k].eval(x)).collect();
        let rows: Vec<Vec<f64>> = shifts
            .iter()
            .map(|&t| ks.iter().zip(&base).map(|(&k, &b0)| la.basis[k].eval(x + t) - b0).collect())
            .collect();
        first = first.max(integrate_max_rows(la, &ks, &rows));
        row_norm = row_norm.max(integrate_max_rows(la, &ks, &[base]));
    }

    // second factor and column norm: convex in y on each cokernel piece
    let mut second: f64 = 0.0;
    let mut col_norm: f64 = 0.0;
    let xev = event_points(bb, &[-a, 0.0, a], dom);
    let ycands: Vec<f64> = event_points(&la.cbreaks, &[0.0], dom);
    for y in ycands {
        let ky: Vec<f64> = la.cok.iter().map(|g| g.eval(y)).collect();
        if ky.iter().all(|&v| v == 0.0) {
            continue;
        }
        let f_local = |x: f64, act: &mut Vec<usize>| -> (f64, f64) {
            la.index.query_range(x, x, act);
            let (mut v, mut s) = (0.0, 0.0);
            for &k in act.iter() {
                let (p0, p1) = la.basis[k].local(x);
                v += p0 * ky[k];
                s += p1 * ky[k];
            }
            (v, s)
        };
        let f_at = |x: f64, act: &mut Vec<usize>| -> f64 {
            la.index.query_range(x, x, act);
            act.iter().map(|&k| la.basis[k].eval(x) * ky[k]).sum()
        };
        let (mut sec, mut col) = (0.0, 0.0);
        for w in xev.windows(2) {
            let (u, v) = (w[0], w[1]);
            let xm = 0.5 * (u + v);
            let (f0, s0) = f_local(xm, &mut act);
            let mut polys = Vec::new();
            for t in [-a, a] {
                let (f1, s1) = f_local(xm + t, &mut act);
                polys.push(Poly::linear(f1 - f0 - (s1 - s0) * (xm - u), s1 - s0));
            }
            let j0 = bb.partition_point(|&b| b <= xm - a);
            for &b in &bb[j0..] {
                if b >= xm + a {
                    break;
                }
                let fb = f_at(b, &mut act);
                polys.push(Poly::linear(fb - f0 + s0 * (xm - u), -s0));
            }
            sec += integrate_max_abs(&polys, 0.0, v - u);
            col += integrate_max_abs(&[Poly::linear(f0 - s0 * (xm - u), s0)], 0.0, v - u);
        }
        second = second.max(sec);
        col_norm = col_norm.max(col);
    }
    let len = dom.1 - dom.0;
    AxisR0Prime {
        first: first + 2.0 * la.err * len,
        second: second + 2.0 * la.err * len,
        row_norm: row_norm + la.err * len,
        col_norm: col_norm + la.err * len,
    }
}

/// Stability constant for continuous kernels: `first^(1-1/p) · second^(1/p)`
/// with windows `|t| <= δ0/2`.
pub fn r0_prime(kernel: &Kernel, delta0: f64, p: f64, opts: &ConstantsOptions) -> Result<R0Prime> {
    opts.validate()?;
    if !kernel.is_continuous() {
        return Err(Error::Argument("this bound needs a continuous kernel".into()));
    }
    if !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(Error::Argument(format!("delta0 must be positive, got {delta0}")));
    }
    if !(p >= 1.0) {
        return Err(Error::Argument(format!("p must lie in [1, inf], got {p}")));
    }
    let a = 0.5 * delta0;
    let (mut first, mut second, mut rn, mut cn) = (0.0, 0.0, 1.0, 1.0);
    for (i, axis) in kernel.axes().iter().enumerate() {
        let la = LinearAxis::new(axis, opts.surrogate_step);
        let ax = axis_r0_prime(&la, a);
        if i == 0 {
            (first, second, rn, cn) = (ax.first, ax.second, ax.row_norm, ax.col_norm);
        } else {
            first = first * (ax.row_norm + ax.first) + rn * ax.first;
            second = second * (ax.col_norm + ax.second) + cn * ax.second;
            rn *= ax.row_norm;
            cn *= ax.col_norm;
        }
    }
    let ip = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let value = match ip {
        0.0 => first,
        1.0 => second,
        _ => first.powf(1.0 - ip) * second.powf(ip),
    };
    Ok(R0Prime { delta0, p, first, second, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_linear_spline_kernel_on, make_shift_invariant_kernel};
    use crate::poly::PiecewisePoly;

    fn k1() -> Kernel {
        make_linear_spline_kernel_on(1, (-12.0, 12.0), None).unwrap()
    }

    #[test]
    fn zero_window_has_zero_modulus() {
        let c = kernel_constants(&k1(), &[0.0], &[], &ConstantsOptions::with_resolution(1e-2)).unwrap();
        assert_eq!(c.r0_of(0.0), Some(0.0));
    }

    #[test]
    fn r2_identity() {
        let c = kernel_constants(&k1(), &[0.1, 0.2], &[1.0, f64::INFINITY], &ConstantsOptions::with_resolution(1e-2))
            .unwrap();
        for row in &c.rows {
            assert_eq!(row.r2, (2.0 * c.r1 + row.r0) * row.r0);
        }
    }

    #[test]
    fn haar_constants() {
        // K(t+z, z) = 1 for some z iff |t| < 1, so r1 = 2; ω_a jumps by 1 wherever a cell edge is within reach
        let k = make_shift_invariant_kernel(&[PiecewisePoly::indicator(0.0, 1.0)], (-10.0, 10.0), None).unwrap();
        let c = kernel_constants(&k, &[0.2], &[], &ConstantsOptions::with_resolution(1e-3)).unwrap();
        assert!((c.r1 - 2.0).abs() < 5e-3, "{}", c.r1);
        // |t| < 1 + 2a every shift sees a jump
        assert!((c.rows[0].r0 - 2.0 * 1.2).abs() < 5e-3, "{}", c.rows[0].r0);
    }

    // reference values from a dense-grid evaluation of the bi-infinite K_1
    #[test]
    fn k1_interior_matches_dense_grid() {
        let opts = ConstantsOptions { interior: true, ..ConstantsOptions::with_resolution(5e-3) };
        let c = kernel_constants(&k1(), &[0.05, 0.3], &[], &opts).unwrap();
        assert!((c.r1 - 2.391).abs() < 2e-3, "{}", c.r1);
        // the grid sup can only fall short of the exact one
        assert!(c.rows[0].r0 >= 0.281 && c.rows[0].r0 < 0.281 * 1.01, "{}", c.rows[0].r0);
        assert!(c.rows[1].r0 >= 1.565 && c.rows[1].r0 < 1.57 * 1.01, "{}", c.rows[1].r0);
    }

    #[test]
    fn edge_columns_raise_the_constants() {
        let opts = ConstantsOptions::with_resolution(1e-2);
        let whole = kernel_constants(&k1(), &[0.1], &[], &opts).unwrap();
        let inner = kernel_constants(&k1(), &[0.1], &[], &ConstantsOptions { interior: true, ..opts }).unwrap();
        assert!(whole.r1 > inner.r1 + 0.2);
        assert!(whole.rows[0].r0 >= inner.rows[0].r0);
    }

    #[test]
    fn k1_one_sided_factors() {
        let opts = ConstantsOptions::default();
        for (d0, second) in [(0.1, 0.303170), (0.2, 0.612679), (0.4, 1.250718)] {
            let r = r0_prime(&k1(), d0, 2.0, &opts).unwrap();
            assert!((r.first / d0 - 2.612).abs() < 2e-3, "{}", r.first / d0);
            assert!((r.second - second).abs() < 1e-5, "{}", r.second);
            assert!((r.value - (r.first * r.second).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn r0_prime_endpoints_in_p() {
        let opts = ConstantsOptions::default();
        let inf = r0_prime(&k1(), 0.2, f64::INFINITY, &opts).unwrap();
        assert_eq!(inf.value, inf.first);
        let one = r0_prime(&k1(), 0.2, 1.0, &opts).unwrap();
        assert_eq!(one.value, one.second);
    }

    #[test]
    fn truncation_tail_is_detected() {
        let opts = ConstantsOptions { truncation_radius: Some(1.0), ..ConstantsOptions::with_resolution(1e-2) };
        let err = kernel_constants(&k1(), &[0.1], &[], &opts).unwrap_err();
        assert!(matches!(err, Error::DecayViolation { .. }));
    }

    #[test]
    fn inf_q_serializes_as_string() {
        let row = QRow { delta: 0.1, q: f64::INFINITY, a: 1.0, b: 2.0 };
        let s = serde_json::to_string(&row).unwrap();
        assert!(s.contains("\"inf\""));
        let back: QRow = serde_json::from_str(&s).unwrap();
        assert!(back.q.is_infinite());
    }

    #[test]
    fn r0_prime_rejects_discontinuous() {
        let k = make_shift_invariant_kernel(&[PiecewisePoly::indicator(0.0, 1.0)], (-10.0, 10.0), None).unwrap();
        assert!(r0_prime(&k, 0.2, 2.0, &ConstantsOptions::default()).is_err());
    }
}
