//! Sampling sets on a domain box, covering statistics and bounded uniform
//! partitions of unity (BUPUs).
//!
//! Cubes are half-open, `γ + [-δ/2, δ/2)^d`, and the domain box is treated as
//! `[lo, hi)` per axis when counting, so the partition of unity is exact.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::PiecewisePoly;
use crate::quadrature::{integrate_triangle, merge_breaks};

/// Domain box, one `(lo, hi)` per axis.
pub type Domain = Vec<(f64, f64)>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

/// Finite set of distinct points in a domain box, sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingSet {
    points: Vec<Vec<f64>>,
    domain: Domain,
    pub meta: SampleMeta,
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap() {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

impl SamplingSet {
    pub fn new(mut points: Vec<Vec<f64>>, domain: Domain) -> Result<Self> {
        if domain.is_empty() || domain.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::Argument(format!("invalid domain box {domain:?}")));
        }
        for p in &points {
            if p.len() != domain.len() {
                return Err(Error::Dimension { expected: domain.len(), got: p.len() });
            }
            if p.iter().zip(&domain).any(|(&x, &(lo, hi))| !(x >= lo && x <= hi)) {
                return Err(Error::Domain { point: p.clone(), domain: domain.clone() });
            }
        }
        points.sort_by(|a, b| lex(a, b));
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("sampling points must be distinct".into()));
        }
        Ok(SamplingSet { points, domain, meta: SampleMeta { method: "given".into(), ..Default::default() } })
    }

    /// Convenience constructor for 1-D sets.
    pub fn from_1d(xs: &[f64], domain: (f64, f64)) -> Result<Self> {
        Self::new(xs.iter().map(|&x| vec![x]).collect(), vec![domain])
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn volume(&self) -> f64 {
        self.domain.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record((1..=self.dim()).map(|i| format!("x{i}")))?;
        for p in &self.points {
            w.write_record(p.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, domain: Domain) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut pts = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let p = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Argument(format!("bad coordinate {s:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            pts.push(p);
        }
        let mut set = Self::new(pts, domain)?;
        set.meta.method = "csv".into();
        Ok(set)
    }
}

/// Arrangement of the clipped half-open cubes: per-axis cell boundaries and
/// the covering multiplicity of every elementary cell (row-major).
#[derive(Clone, Debug)]
struct Arrangement {
    coords: Vec<Vec<f64>>,
    counts: Vec<u32>,
    /// Per point, per axis, the half-open range of cell indices its cube covers.
    ranges: Vec<Vec<(usize, usize)>>,
}

impl Arrangement {
    fn build(set: &SamplingSet, delta: f64) -> Self {
        let d = set.dim();
        let h = 0.5 * delta;
        let scale = set.domain.iter().map(|&(lo, hi)| lo.abs().max(hi.abs())).fold(1.0, f64::max);
        let eps = 1e-14 * scale;
        let mut coords = Vec::with_capacity(d);
        for (ax, &(lo, hi)) in set.domain.iter().enumerate() {
            let mut c = vec![lo, hi];
            for p in &set.points {
                for v in [p[ax] - h, p[ax] + h] {
                    if v > lo && v < hi {
                        c.push(v);
                    }
                }
            }
            c.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // boundaries closer than rounding noise are one boundary
            c.dedup_by(|a, b| *a - *b <= eps);
            let last = c.len() - 1;
            c[last] = hi;
            if c[last] - c[last - 1] <= eps && last > 1 {
                c.remove(last - 1);
            }
            coords.push(c);
        }
        let dims: Vec<usize> = coords.iter().map(|c| c.len() - 1).collect();
        let ranges: Vec<Vec<(usize, usize)>> = set
            .points
            .iter()
            .map(|p| {
                (0..d)
                    .map(|ax| {
                        let c = &coords[ax];
                        let (lo, hi) = (p[ax] - h, p[ax] + h);
                        let i0 = c.partition_point(|&v| v < lo - eps).min(dims[ax]);
                        let i1 = c.partition_point(|&v| v < hi - eps).min(dims[ax]);
                        (i0, i1)
                    })
                    .collect()
            })
            .collect();
        // difference array on the (n_i + 1)-grid, then prefix sums per axis
        let ext: Vec<usize> = dims.iter().map(|n| n + 1).collect();
        let total: usize = ext.iter().product();
        let mut diff = vec![0i64; total];
        let flat = |idx: &[usize]| idx.iter().zip(&ext).fold(0, |acc, (&i, &n)| acc * n + i);
        let mut idx = vec![0usize; d];
        for r in &ranges {
            if r.iter().any(|&(a, b)| b <= a) {
                continue;
            }
            for corner in 0..(1usize << d) {
                let mut sign = 1i64;
                for ax in 0..d {
                    if corner >> ax & 1 == 1 {
                        idx[ax] = r[ax].1;
                        sign = -sign;
                    } else {
                        idx[ax] = r[ax].0;
                    }
                }
                diff[flat(&idx)] += sign;
            }
        }
        let mut stride = 1;
        for ax in (0..d).rev() {
            let n = ext[ax];
            for base in 0..total {
                if (base / stride) % n != 0 {
                    diff[base] += diff[base - stride];
                }
            }
            stride *= n;
        }
        let cells: usize = dims.iter().product();
        let mut counts = Vec::with_capacity(cells);
        let mut cidx = vec![0usize; d];
        for c in 0..cells {
            let mut rem = c;
            for ax in (0..d).rev() {
                cidx[ax] = rem % dims[ax];
                rem /= dims[ax];
            }
            counts.push(diff[flat(&cidx)] as u32);
        }
        Arrangement { coords, counts, ranges }
    }

    fn dims(&self) -> Vec<usize> {
        self.coords.iter().map(|c| c.len() - 1).collect()
    }

    /// Flat and per-axis index of the cell containing `x`.
    fn cell_of(&self, x: &[f64]) -> Option<(usize, Vec<usize>)> {
        let mut flat = 0;
        let mut idx = Vec::with_capacity(x.len());
        for (c, &v) in self.coords.iter().zip(x) {
            let n = c.len() - 1;
            if !(v >= c[0] && v < c[n]) {
                return None;
            }
            let i = c.partition_point(|&b| b <= v) - 1;
            flat = flat * n + i;
            idx.push(i);
        }
        Some((flat, idx))
    }
}

/// `(A, B)`: the least and largest number of cubes `γ + [-δ/2, δ/2)^d` covering
/// a point of the domain.
pub fn gap_counts(set: &SamplingSet, delta: f64) -> Result<(u32, u32)> {
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("delta must be positive, got {delta}")));
    }
    if set.is_empty() {
        return Ok((0, 0));
    }
    let arr = Arrangement::build(set, delta);
    let a = arr.counts.iter().copied().min().unwrap_or(0);
    let b = arr.counts.iter().copied().max().unwrap_or(0);
    Ok((a, b))
}

/// Smallest `δ` whose cubes cover the domain, by bisection to `1e-12`.
pub fn maximal_gap(set: &SamplingSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Argument("maximal gap of an empty set".into()));
    }
    let covers = |d: f64| gap_counts(set, d).map(|(a, _)| a >= 1);
    let mut hi = 2.0 * set.domain.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    while !covers(hi)? {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if covers(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Jittered lattice: `δ·Z^d` centred in the domain, each coordinate perturbed by an
/// independent uniform draw from `[-jitter·δ, jitter·δ]` and clamped to the domain.
pub fn generate_jittered(delta: f64, jitter: f64, domain: Domain, seed: u64) -> Result<SamplingSet> {
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("delta must be positive, got {delta}")));
    }
    if !(0.0..0.5).contains(&jitter) {
        return Err(Error::Argument(format!("jitter must lie in [0, 0.5), got {jitter}")));
    }
    let axes: Vec<Vec<f64>> = domain
        .iter()
        .map(|&(lo, hi)| {
            let n = ((hi - lo) / delta + 1e-9).floor() as usize + 1;
            let off = lo + 0.5 * ((hi - lo) - (n - 1) as f64 * delta);
            (0..n).map(|i| off + i as f64 * delta).collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = axes.iter().map(Vec::len).product();
    let mut pts = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut p = vec![0.0; domain.len()];
        for ax in (0..domain.len()).rev() {
            p[ax] = axes[ax][rem % axes[ax].len()];
            rem /= axes[ax].len();
        }
        for (v, &(lo, hi)) in p.iter_mut().zip(&domain) {
            if jitter > 0.0 {
                let u: f64 = rng.random();
                *v += (2.0 * u - 1.0) * jitter * delta;
            }
            *v = v.clamp(lo, hi);
        }
        pts.push(p);
    }
    let mut set = SamplingSet::new(pts, domain)?;
    set.meta = SampleMeta { method: "jittered".into(), seed: Some(seed), delta: Some(delta), jitter: Some(jitter) };
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BupuKind {
    Indicator,
    Voronoi,
}

#[derive(Clone, Debug)]
enum Repr {
    Indicator(Arrangement),
    /// 1-D Voronoi cells `[a, b)`.
    Intervals(Vec<(f64, f64)>),
    /// 2-D Voronoi polygons (counter-clockwise).
    Polygons(Vec<Vec<[f64; 2]>>),
}

/// Partition of unity `{u_γ}` subordinate to the cubes of a sampling set.
#[derive(Clone, Debug)]
pub struct Bupu {
    kind: BupuKind,
    delta: f64,
    masses: Vec<f64>,
    set: SamplingSet,
    repr: Repr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassRow {
    pub index: usize,
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BupuSummary {
    pub kind: BupuKind,
    pub delta: f64,
    pub total_mass: f64,
    pub masses: Vec<MassRow>,
}

/// `u_γ = χ_{γ+[-δ/2,δ/2)^d} / Σ_γ' χ_{γ'+[-δ/2,δ/2)^d}`.
pub fn normalized_indicator_bupu(set: &SamplingSet, delta: f64) -> Result<Bupu> {
    let (a, _) = gap_counts(set, delta)?;
    if a == 0 {
        return Err(Error::Coverage { delta });
    }
    let arr = Arrangement::build(set, delta);
    let dims = arr.dims();
    let masses = (0..set.len())
        .map(|g| {
            let mut m = 0.0;
            for_each_cell(&arr.ranges[g], &dims, |flat, idx| {
                let vol: f64 = idx.iter().enumerate().map(|(ax, &i)| arr.coords[ax][i + 1] - arr.coords[ax][i]).product();
                m += vol / arr.counts[flat] as f64;
            });
            m
        })
        .collect();
    Ok(Bupu { kind: BupuKind::Indicator, delta, masses, set: set.clone(), repr: Repr::Indicator(arr) })
}

fn for_each_cell(ranges: &[(usize, usize)], dims: &[usize], mut f: impl FnMut(usize, &[usize])) {
    if ranges.iter().any(|&(a, b)| b <= a) {
        return;
    }
    let d = ranges.len();
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    loop {
        let flat = idx.iter().zip(dims).fold(0, |acc, (&i, &n)| acc * n + i);
        f(flat, &idx);
        let mut ax = d;
        loop {
            if ax == 0 {
                return;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < ranges[ax].1 {
                break;
            }
            idx[ax] = ranges[ax].0;
            if ax == 0 {
                return;
            }
        }
    }
}

/// Clip a convex polygon to the half-plane `n·p <= c`.
fn clip_halfplane(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let side = |p: &[f64; 2]| n[0] * p[0] + n[1] * p[1] - c;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sp, sq) = (side(&p), side(&q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a.abs()
}

fn clip_box(poly: &[[f64; 2]], bx: [(f64, f64); 2]) -> Vec<[f64; 2]> {
    let mut p = clip_halfplane(poly, [1.0, 0.0], bx[0].1);
    p = clip_halfplane(&p, [-1.0, 0.0], -bx[0].0);
    p = clip_halfplane(&p, [0.0, 1.0], bx[1].1);
    clip_halfplane(&p, [0.0, -1.0], -bx[1].0)
}

/// `u_γ = χ_{V_γ ∩ domain}` for the Voronoi cells of the set (`d <= 2`); `δ` is
/// twice the largest sup-norm distance from a point to its own cell.
pub fn voronoi_bupu(set: &SamplingSet) -> Result<Bupu> {
    if set.is_empty() {
        return Err(Error::Argument("Voronoi partition of an empty set".into()));
    }
    match set.dim() {
        1 => {
            let (lo, hi) = set.domain[0];
            let xs: Vec<f64> = set.points.iter().map(|p| p[0]).collect();
            let n = xs.len();
            let cells: Vec<(f64, f64)> = (0..n)
                .map(|i| {
                    let a = if i == 0 { lo } else { 0.5 * (xs[i - 1] + xs[i]) };
                    let b = if i + 1 == n { hi } else { 0.5 * (xs[i] + xs[i + 1]) };
                    (a, b)
                })
                .collect();
            let masses = cells.iter().map(|(a, b)| b - a).collect();
            let reach = cells.iter().zip(&xs).map(|(&(a, b), &x)| (x - a).max(b - x)).fold(0.0, f64::max);
            Ok(Bupu { kind: BupuKind::Voronoi, delta: 2.0 * reach, masses, set: set.clone(), repr: Repr::Intervals(cells) })
        }
        2 => {
            let dom = [set.domain[0], set.domain[1]];
            let square = vec![[dom[0].0, dom[1].0], [dom[0].1, dom[1].0], [dom[0].1, dom[1].1], [dom[0].0, dom[1].1]];
            let pts = &set.points;
            let mut polys = Vec::with_capacity(pts.len());
            let mut reach: f64 = 0.0;
            for (i, p) in pts.iter().enumerate() {
                let mut poly = square.clone();
                for (j, q) in pts.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    // |x - p|² <= |x - q|²  ⇔  2(q - p)·x <= |q|² - |p|²
                    let n = [2.0 * (q[0] - p[0]), 2.0 * (q[1] - p[1])];
                    let c = q[0] * q[0] + q[1] * q[1] - p[0] * p[0] - p[1] * p[1];
                    poly = clip_halfplane(&poly, n, c);
                    if poly.is_empty() {
                        break;
                    }
                }
                for v in &poly {
                    reach = reach.max((v[0] - p[0]).abs()).max((v[1] - p[1]).abs());
                }
                polys.push(poly);
            }
            let masses = polys.iter().map(|p| polygon_area(p)).collect();
            Ok(Bupu { kind: BupuKind::Voronoi, delta: 2.0 * reach, masses, set: set.clone(), repr: Repr::Polygons(polys) })
        }
        d => Err(Error::Argument(format!("Voronoi partitions are implemented for d <= 2, got {d}"))),
    }
}

impl Bupu {
    pub fn kind(&self) -> BupuKind {
        self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `‖u_γ‖_1` per point.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn set(&self) -> &SamplingSet {
        &self.set
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Nonzero `(γ, u_γ(x))` pairs.
    pub fn weights_at(&self, x: &[f64]) -> Vec<(usize, f64)> {
        match &self.repr {
            Repr::Indicator(arr) => {
                let Some((cell, idx)) = arr.cell_of(x) else { return Vec::new() };
                let w = 1.0 / arr.counts[cell] as f64;
                arr.ranges
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.iter().zip(&idx).all(|(&(a, b), &i)| a <= i && i < b))
                    .map(|(g, _)| (g, w))
                    .collect()
            }
            Repr::Intervals(cells) => {
                let i = cells.partition_point(|c| c.1 <= x[0]);
                if i < cells.len() && x[0] >= cells[i].0 {
                    vec![(i, 1.0)]
                } else if x[0] == self.set.domain[0].1 {
                    vec![(cells.len() - 1, 1.0)]
                } else {
                    Vec::new()
                }
            }
            Repr::Polygons(_) => {
                // nearest point, lowest index on ties
                let mut best = (0, f64::INFINITY);
                for (i, p) in self.set.points.iter().enumerate() {
                    let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                vec![(best.0, 1.0)]
            }
        }
    }

    pub fn weight(&self, g: usize, x: &[f64]) -> f64 {
        self.weights_at(x).into_iter().find(|&(i, _)| i == g).map_or(0.0, |(_, w)| w)
    }

    /// Pieces of `u_γ` in 1-D as `(a, b, weight)` on `[a, b)`.
    pub fn intervals(&self, g: usize) -> Vec<(f64, f64, f64)> {
        match &self.repr {
            Repr::Indicator(arr) if arr.coords.len() == 1 => {
                let (i0, i1) = arr.ranges[g][0];
                (i0..i1).map(|i| (arr.coords[0][i], arr.coords[0][i + 1], 1.0 / arr.counts[i] as f64)).collect()
            }
            Repr::Intervals(cells) => vec![(cells[g].0, cells[g].1, 1.0)],
            _ => panic!("intervals() needs a 1-D partition"),
        }
    }

    /// `∫ u_γ(y) Π_i f_i(y_i) dy`, exact for piecewise polynomials.
    pub fn integrate_separable(&self, g: usize, fs: &[&PiecewisePoly]) -> f64 {
        match &self.repr {
            Repr::Indicator(arr) => {
                let dims = arr.dims();
                // per-axis integrals over each cell of the range
                let per_axis: Vec<Vec<f64>> = arr.ranges[g]
                    .iter()
                    .enumerate()
                    .map(|(ax, &(a, b))| (a..b).map(|i| fs[ax].integral(arr.coords[ax][i], arr.coords[ax][i + 1])).collect())
                    .collect();
                let mut total = 0.0;
                let r = &arr.ranges[g];
                for_each_cell(r, &dims, |flat, idx| {
                    let v: f64 = idx.iter().enumerate().map(|(ax, &i)| per_axis[ax][i - r[ax].0]).product();
                    total += v / arr.counts[flat] as f64;
                });
                total
            }
            Repr::Intervals(cells) => fs[0].integral(cells[g].0, cells[g].1),
            Repr::Polygons(polys) => integrate_polygon(&polys[g], fs[0], fs[1]),
        }
    }

    /// Values of `Σ_γ c(γ) u_γ` on the arrangement cells, with the cell volumes
    /// (indicator partitions only).
    fn cell_values(&self, arr: &Arrangement, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dims = arr.dims();
        let mut vals = vec![0.0; arr.counts.len()];
        for (g, &cg) in c.iter().enumerate() {
            for_each_cell(&arr.ranges[g], &dims, |flat, _| vals[flat] += cg / arr.counts[flat] as f64);
        }
        let mut vols = Vec::with_capacity(vals.len());
        let mut idx = vec![0usize; dims.len()];
        for flat in 0..vals.len() {
            let mut rem = flat;
            for ax in (0..dims.len()).rev() {
                idx[ax] = rem % dims[ax];
                rem /= dims[ax];
            }
            vols.push(idx.iter().enumerate().map(|(ax, &i)| arr.coords[ax][i + 1] - arr.coords[ax][i]).product());
        }
        (vals, vols)
    }

    /// `‖Σ_γ c(γ) u_γ‖_p`; with `|c|` this is the `‖c‖_{p,U}` norm.
    pub fn combination_norm(&self, c: &[f64], p: f64) -> f64 {
        assert_eq!(c.len(), self.len());
        let (vals, vols): (Vec<f64>, Vec<f64>) = match &self.repr {
            Repr::Indicator(arr) => self.cell_values(arr, c),
            _ => (c.to_vec(), self.masses.clone()),
        };
        if p.is_infinite() {
            return vals.iter().zip(&vols).filter(|(_, &w)| w > 0.0).map(|(v, _)| v.abs()).fold(0.0, f64::max);
        }
        vals.iter().zip(&vols).map(|(v, w)| v.abs().powf(p) * w).sum::<f64>().powf(1.0 / p)
    }

    /// `‖c‖_{p,U} = ‖Σ_γ |c(γ)| u_γ‖_p`.
    pub fn weighted_norm(&self, c: &[f64], p: f64) -> f64 {
        let abs: Vec<f64> = c.iter().map(|v| v.abs()).collect();
        self.combination_norm(&abs, p)
    }

    /// `Σ_γ c(γ) u_γ` in 1-D as constant pieces `(a, b, value)` on `[a, b)`.
    pub fn step_pieces(&self, c: &[f64]) -> Vec<(f64, f64, f64)> {
        assert_eq!(c.len(), self.len());
        match &self.repr {
            Repr::Indicator(arr) if arr.coords.len() == 1 => {
                let (vals, _) = self.cell_values(arr, c);
                arr.coords[0].windows(2).zip(vals).map(|(w, v)| (w[0], w[1], v)).collect()
            }
            Repr::Intervals(cells) => cells.iter().zip(c).map(|(&(a, b), &v)| (a, b, v)).collect(),
            _ => panic!("step_pieces() needs a 1-D partition"),
        }
    }

    /// `max_x |Σ_γ u_γ(x) - 1|` over the given probes.
    pub fn partition_residual(&self, probes: &[Vec<f64>]) -> f64 {
        probes
            .iter()
            .map(|x| (self.weights_at(x).iter().map(|w| w.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> BupuSummary {
        BupuSummary {
            kind: self.kind,
            delta: self.delta,
            total_mass: self.masses.iter().sum(),
            masses: self
                .masses
                .iter()
                .enumerate()
                .map(|(i, &m)| MassRow { index: i, point: self.set.points[i].clone(), mass: m })
                .collect(),
        }
    }
}

/// `∫_poly f(x) g(y)`, splitting the polygon along the breakpoints of `f` and `g`
/// so each piece is integrated by an exact triangle rule.
fn integrate_polygon(poly: &[[f64; 2]], f: &PiecewisePoly, g: &PiecewisePoly) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for v in poly {
        x0 = x0.min(v[0]);
        x1 = x1.max(v[0]);
        y0 = y0.min(v[1]);
        y1 = y1.max(v[1]);
    }
    let (fs, gs) = (f.support(), g.support());
    let (x0, x1, y0, y1) = (x0.max(fs.0), x1.min(fs.1), y0.max(gs.0), y1.min(gs.1));
    if !(x1 > x0 && y1 > y0) {
        return 0.0;
    }
    let xb: Vec<f64> = merge_breaks([f.breaks(), &[x0, x1][..]]).into_iter().filter(|&b| b >= x0 && b <= x1).collect();
    let yb: Vec<f64> = merge_breaks([g.breaks(), &[y0, y1][..]]).into_iter().filter(|&b| b >= y0 && b <= y1).collect();
    let mut total = 0.0;
    for wx in xb.windows(2) {
        for wy in yb.windows(2) {
            let piece = clip_box(poly, [(wx[0], wx[1]), (wy[0], wy[1])]);
            if piece.len() < 3 {
                continue;
            }
            let (xm, ym) = (0.5 * (wx[0] + wx[1]), 0.5 * (wy[0] + wy[1]));
            let (pi, qi) = (f.piece_index(xm), g.piece_index(ym));
            let (Some(pi), Some(qi)) = (pi, qi) else { continue };
            let (pf, pg) = (&f.pieces()[pi], &g.pieces()[qi]);
            let (bx, by) = (f.breaks()[pi], g.breaks()[qi]);
            for k in 1..piece.len() - 1 {
                total += integrate_triangle(piece[0], piece[k], piece[k + 1], |x, y| pf.eval(x - bx) * pg.eval(y - by));
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ints(lo: i32, hi: i32, step: f64) -> Vec<f64> {
        (lo..=hi).map(|i| i as f64 * step).collect()
    }

    #[test]
    fn integer_lattice_counts() {
        let s = SamplingSet::from_1d(&ints(0, 10, 1.0), (0.0, 10.0)).unwrap();
        assert_eq!(gap_counts(&s, 1.0).unwrap(), (1, 1));
        assert_eq!(gap_counts(&s, 2.0).unwrap(), (2, 2));
    }

    #[test]
    fn irregular_counts() {
        let s = SamplingSet::from_1d(&[0.0, 0.6, 1.0, 1.9], (0.0, 2.0)).unwrap();
        assert_eq!(gap_counts(&s, 1.0).unwrap(), (1, 2));
    }

    #[test]
    fn empty_set_counts() {
        let s = SamplingSet::from_1d(&[], (0.0, 1.0)).unwrap();
        assert_eq!(gap_counts(&s, 1.0).unwrap(), (0, 0));
        assert!(gap_counts(&s, 0.0).is_err());
    }

    #[test]
    fn maximal_gaps() {
        let s = SamplingSet::from_1d(&ints(0, 20, 0.5), (0.0, 10.0)).unwrap();
        assert_abs_diff_eq!(maximal_gap(&s).unwrap(), 0.5, epsilon = 2e-12);
        let s = SamplingSet::from_1d(&[0.0, 1.0], (0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(maximal_gap(&s).unwrap(), 1.0, epsilon = 2e-12);
        let s = SamplingSet::from_1d(&[2.0], (1.25, 2.75)).unwrap();
        assert_abs_diff_eq!(maximal_gap(&s).unwrap(), 1.5, epsilon = 2e-12);
    }

    #[test]
    fn jitter_zero_is_lattice() {
        let s = generate_jittered(0.5, 0.0, vec![(0.0, 10.0)], 1).unwrap();
        assert_eq!(s.len(), 21);
        assert_abs_diff_eq!(maximal_gap(&s).unwrap(), 0.5, epsilon = 2e-12);
    }

    #[test]
    fn jitter_is_reproducible_and_bounded() {
        let a = generate_jittered(0.3, 0.25, vec![(-6.0, 6.0)], 42).unwrap();
        let b = generate_jittered(0.3, 0.25, vec![(-6.0, 6.0)], 42).unwrap();
        assert_eq!(a, b);
        assert!(maximal_gap(&a).unwrap() <= 1.5 * 0.3 + 1e-12);
        let c = generate_jittered(0.3, 0.25, vec![(-6.0, 6.0)], 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn indicator_masses() {
        let s = SamplingSet::from_1d(&ints(0, 10, 1.0), (0.0, 10.0)).unwrap();
        let u = normalized_indicator_bupu(&s, 1.0).unwrap();
        for m in &u.masses()[1..10] {
            assert_abs_diff_eq!(*m, 1.0, epsilon = 1e-15);
        }
        let u2 = normalized_indicator_bupu(&s, 2.0).unwrap();
        for m in &u2.masses()[1..10] {
            assert_abs_diff_eq!(*m, 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(u2.masses().iter().sum::<f64>(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn indicator_needs_cover() {
        let s = SamplingSet::from_1d(&[0.0, 3.0], (0.0, 3.0)).unwrap();
        assert!(matches!(normalized_indicator_bupu(&s, 1.0), Err(Error::Coverage { .. })));
    }

    #[test]
    fn voronoi_1d_masses() {
        let s = SamplingSet::from_1d(&[0.0, 1.0, 3.0], (-0.5, 4.0)).unwrap();
        let u = voronoi_bupu(&s).unwrap();
        assert_eq!(u.masses(), &[1.0, 1.5, 2.0]);
        assert_eq!(u.delta(), 2.0 * 1.0);
    }

    #[test]
    fn voronoi_2d_tiles_the_box() {
        let s = generate_jittered(1.0, 0.2, vec![(0.0, 5.0), (0.0, 4.0)], 3).unwrap();
        let u = voronoi_bupu(&s).unwrap();
        assert_abs_diff_eq!(u.masses().iter().sum::<f64>(), 20.0, epsilon = 1e-10);
        // each cell sits inside its own cube
        let ind = normalized_indicator_bupu(&s, u.delta()).unwrap();
        assert_eq!(ind.len(), u.len());
        let one = PiecewisePoly::indicator(-1.0, 10.0);
        for g in 0..u.len() {
            assert_abs_diff_eq!(u.integrate_separable(g, &[&one, &one]), u.masses()[g], epsilon = 1e-10);
        }
    }

    #[test]
    fn indicator_2d_partition() {
        let s = generate_jittered(1.0, 0.3, vec![(0.0, 4.0), (0.0, 3.0)], 9).unwrap();
        let u = normalized_indicator_bupu(&s, 1.6).unwrap();
        let probes: Vec<Vec<f64>> =
            (0..40).flat_map(|i| (0..30).map(move |j| vec![0.05 + 0.1 * i as f64, 0.037 + 0.1 * j as f64])).collect();
        assert!(u.partition_residual(&probes) < 1e-12);
        assert_abs_diff_eq!(u.masses().iter().sum::<f64>(), 12.0, epsilon = 1e-10);
    }

    #[test]
    fn separable_integral_matches_mass() {
        let s = SamplingSet::from_1d(&[0.0, 0.6, 1.0, 1.9], (0.0, 2.0)).unwrap();
        let u = normalized_indicator_bupu(&s, 1.0).unwrap();
        let one = PiecewisePoly::indicator(-5.0, 5.0);
        for g in 0..u.len() {
            assert_abs_diff_eq!(u.integrate_separable(g, &[&one]), u.masses()[g], epsilon = 1e-15);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let s = generate_jittered(0.7, 0.2, vec![(0.0, 3.0), (0.0, 2.0)], 5).unwrap();
        s.write_csv(&p).unwrap();
        let t = SamplingSet::read_csv(&p, s.domain().clone()).unwrap();
        assert_eq!(s.points(), t.points());
    }
}
