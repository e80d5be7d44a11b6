//! Dense polynomials and piecewise polynomials on the real line.
//!
//! Every piece of a [`PiecewisePoly`] is stored in its local variable
//! `s = x - breaks[i]`, which keeps coefficients well scaled on long supports.
//! Pieces are half-open `[breaks[i], breaks[i+1])`; outside the support the
//! function is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial with ascending coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Poly(vec![c0, c1])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    /// Degree after dropping trailing zeros; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        let mut n = self.0.len();
        while n > 0 && self.0[n - 1] == 0.0 {
            n -= 1;
        }
        n.saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::zero();
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, &c)| j as f64 * c)
                .collect(),
        )
    }

    /// Antiderivative vanishing at 0.
    pub fn antiderivative(&self) -> Poly {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(0.0);
        for (j, &c) in self.0.iter().enumerate() {
            out.push(c / (j + 1) as f64);
        }
        Poly(out)
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let p = self.antiderivative();
        p.eval(b) - p.eval(a)
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * k).collect())
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly(
            (0..n)
                .map(|j| self.0.get(j).copied().unwrap_or(0.0) + o.0.get(j).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    pub fn add_scaled(&mut self, o: &Poly, k: f64) {
        if self.0.len() < o.0.len() {
            self.0.resize(o.0.len(), 0.0);
        }
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a += k * b;
        }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.0.is_empty() || o.0.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    /// `q(s) = p(s + c)`.
    pub fn shift(&self, c: f64) -> Poly {
        let mut a = self.0.clone();
        let n = a.len();
        if c == 0.0 || n <= 1 {
            return Poly(a);
        }
        for i in 0..n {
            for j in (i..n - 1).rev() {
                a[j] += c * a[j + 1];
            }
        }
        Poly(a)
    }

    /// `q(s) = p(a s)`.
    pub fn scale_arg(&self, a: f64) -> Poly {
        let mut f = 1.0;
        Poly(
            self.0
                .iter()
                .map(|&c| {
                    let v = c * f;
                    f *= a;
                    v
                })
                .collect(),
        )
    }

    /// Real roots in the closed interval `[lo, hi]`, sorted.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let deg = self.degree();
        if self.is_zero() || deg == 0 || hi < lo {
            return Vec::new();
        }
        let c = &self.0;
        if deg == 1 {
            let r = -c[0] / c[1];
            return if r >= lo && r <= hi { vec![r] } else { Vec::new() };
        }
        if deg == 2 {
            let (a, b, cc) = (c[2], c[1], c[0]);
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                return Vec::new();
            }
            let sgn = if b >= 0.0 { 1.0 } else { -1.0 };
            let q = -0.5 * (b + sgn * disc.sqrt());
            let mut rs = Vec::with_capacity(2);
            if q != 0.0 {
                rs.push(q / a);
                rs.push(cc / q);
            } else {
                rs.push(0.0);
            }
            rs.retain(|r| *r >= lo && *r <= hi);
            rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rs.dedup();
            return rs;
        }
        // Roots are isolated by the critical points; each monotone stretch has at most one.
        let mut knots = vec![lo];
        knots.extend(self.derivative().roots_in(lo, hi));
        knots.push(hi);
        let mut out: Vec<f64> = Vec::new();
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (self.eval(a), self.eval(b));
            if fa == 0.0 {
                out.push(a);
            }
            if fa * fb < 0.0 {
                out.push(bisect(self, a, b, fa));
            }
        }
        if self.eval(hi) == 0.0 {
            out.push(hi);
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    /// `sup |p|` over `[lo, hi]`.
    pub fn sup_abs(&self, lo: f64, hi: f64) -> f64 {
        let mut m = self.eval(lo).abs().max(self.eval(hi).abs());
        if self.degree() >= 2 {
            for r in self.derivative().roots_in(lo, hi) {
                m = m.max(self.eval(r).abs());
            }
        }
        m
    }

    /// Coefficient bound on `|p|` over `[lo, hi]`, cheap and never below the true sup.
    pub fn abs_bound(&self, lo: f64, hi: f64) -> f64 {
        let r = lo.abs().max(hi.abs());
        self.0.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }
}

fn bisect(p: &Poly, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = p.eval(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// `∫_lo^hi max_i |p_i(s)| ds`, exact up to root-finding precision.
pub fn integrate_max_abs(polys: &[Poly], lo: f64, hi: f64) -> f64 {
    if polys.is_empty() || hi <= lo {
        return 0.0;
    }
    let mut cuts = vec![lo, hi];
    for (i, p) in polys.iter().enumerate() {
        cuts.extend(p.roots_in(lo, hi));
        for q in &polys[i + 1..] {
            cuts.extend(p.sub(q).roots_in(lo, hi));
            cuts.extend(p.add(q).roots_in(lo, hi));
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        let (mut best, mut val) = (0, f64::NEG_INFINITY);
        for (i, p) in polys.iter().enumerate() {
            let v = p.eval(m).abs();
            if v > val {
                val = v;
                best = i;
            }
        }
        let sign = if polys[best].eval(m) < 0.0 { -1.0 } else { 1.0 };
        total += sign * polys[best].integral(a, b);
    }
    total
}

/// Real function that is polynomial on each of finitely many half-open pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Poly>,
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<f64>, pieces: Vec<Poly>) -> Result<Self> {
        if breaks.len() != pieces.len() + 1 || pieces.is_empty() {
            return Err(Error::Argument(format!(
                "piecewise polynomial needs n+1 breakpoints for n>0 pieces (got {} and {})",
                breaks.len(),
                pieces.len()
            )));
        }
        if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("breakpoints must be finite and strictly increasing".into()));
        }
        Ok(PiecewisePoly { breaks, pieces })
    }

    /// The zero function on `[lo, hi)`.
    pub fn zero_on(lo: f64, hi: f64) -> Self {
        PiecewisePoly { breaks: vec![lo, hi], pieces: vec![Poly::zero()] }
    }

    /// Indicator of `[lo, hi)`.
    pub fn indicator(lo: f64, hi: f64) -> Self {
        PiecewisePoly { breaks: vec![lo, hi], pieces: vec![Poly::constant(1.0)] }
    }

    /// The hat function `max(1 - |x - c|/w, 0)`.
    pub fn hat(c: f64, w: f64) -> Self {
        PiecewisePoly {
            breaks: vec![c - w, c, c + w],
            pieces: vec![Poly::linear(0.0, 1.0 / w), Poly::linear(1.0, -1.0 / w)],
        }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breaks[0], *self.breaks.last().unwrap())
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(Poly::degree).max().unwrap_or(0)
    }

    /// Piece containing `x` under the half-open convention.
    #[inline]
    pub fn piece_index(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.support();
        if !(x >= lo && x < hi) {
            return None;
        }
        let i = self.breaks.partition_point(|&b| b <= x);
        Some(i - 1)
    }

    /// Piece whose closure is approached from the left at `x`.
    #[inline]
    pub fn piece_index_left(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.support();
        if !(x > lo && x <= hi) {
            return None;
        }
        let i = self.breaks.partition_point(|&b| b < x);
        Some(i - 1)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.piece_index(x) {
            Some(i) => self.pieces[i].eval(x - self.breaks[i]),
            None => 0.0,
        }
    }

    /// Left limit at `x`.
    #[inline]
    pub fn eval_left(&self, x: f64) -> f64 {
        match self.piece_index_left(x) {
            Some(i) => self.pieces[i].eval(x - self.breaks[i]),
            None => 0.0,
        }
    }

    /// Piece `i` re-expressed in the local variable `s = x - x0`.
    pub fn local_poly(&self, i: usize, x0: f64) -> Poly {
        self.pieces[i].shift(x0 - self.breaks[i])
    }

    /// Polynomial valid on `[x0, x0 + ε)` in the variable `s = x - x0`; zero outside the support.
    pub fn poly_from(&self, x0: f64) -> Poly {
        match self.piece_index(x0) {
            Some(i) => self.local_poly(i, x0),
            None => Poly::zero(),
        }
    }

    /// `g(x) = f(x - c)`.
    pub fn shifted(&self, c: f64) -> Self {
        PiecewisePoly {
            breaks: self.breaks.iter().map(|b| b + c).collect(),
            pieces: self.pieces.clone(),
        }
    }

    /// `g(x) = f(a x)` for `a > 0`.
    pub fn scaled_arg(&self, a: f64) -> Self {
        assert!(a > 0.0);
        PiecewisePoly {
            breaks: self.breaks.iter().map(|b| b / a).collect(),
            pieces: self.pieces.iter().map(|p| p.scale_arg(a)).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        PiecewisePoly {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(k)).collect(),
        }
    }

    pub fn derivative(&self) -> Self {
        PiecewisePoly {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(Poly::derivative).collect(),
        }
    }

    /// `∫_lo^hi f`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return -self.integral(hi, lo);
        }
        let mut total = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let (a, b) = (self.breaks[i].max(lo), self.breaks[i + 1].min(hi));
            if b > a {
                total += p.integral(a - self.breaks[i], b - self.breaks[i]);
            }
        }
        total
    }

    pub fn integral_total(&self) -> f64 {
        self.integral(self.breaks[0], *self.breaks.last().unwrap())
    }

    pub fn abs_integral(&self) -> f64 {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, p)| integrate_max_abs(std::slice::from_ref(p), 0.0, self.breaks[i + 1] - self.breaks[i]))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, p)| p.sup_abs(0.0, self.breaks[i + 1] - self.breaks[i]))
            .fold(0.0, f64::max)
    }

    /// `sup |f|` over the pieces meeting `[lo, hi]`, taken on each whole piece.
    pub fn max_abs_near(&self, lo: f64, hi: f64) -> f64 {
        let (a, b) = self.support();
        if hi < a || lo > b {
            return 0.0;
        }
        let i0 = self.breaks.partition_point(|&x| x <= lo).saturating_sub(1);
        let mut m: f64 = 0.0;
        for i in i0..self.pieces.len() {
            if self.breaks[i] > hi {
                break;
            }
            m = m.max(self.pieces[i].sup_abs(0.0, self.breaks[i + 1] - self.breaks[i]));
        }
        m
    }

    /// Largest jump over all breakpoints, support ends included.
    pub fn max_jump(&self) -> f64 {
        let n = self.pieces.len();
        let mut m = self.pieces[0].eval(0.0).abs();
        m = m.max(self.pieces[n - 1].eval(self.breaks[n] - self.breaks[n - 1]).abs());
        for i in 1..n {
            let left = self.pieces[i - 1].eval(self.breaks[i] - self.breaks[i - 1]);
            let right = self.pieces[i].eval(0.0);
            m = m.max((left - right).abs());
        }
        m
    }

    pub fn is_continuous(&self, tol: f64) -> bool {
        self.max_jump() <= tol
    }

    /// Pointwise combination on the merged breakpoint set.
    pub fn combine(&self, o: &PiecewisePoly, f: impl Fn(&Poly, &Poly) -> Poly) -> PiecewisePoly {
        let mut br: Vec<f64> = self.breaks.iter().chain(o.breaks.iter()).copied().collect();
        br.sort_by(|a, b| a.partial_cmp(b).unwrap());
        br.dedup();
        let pieces = br.windows(2).map(|w| f(&self.poly_from(w[0]), &o.poly_from(w[0]))).collect();
        PiecewisePoly { breaks: br, pieces }
    }

    pub fn add(&self, o: &PiecewisePoly) -> PiecewisePoly {
        self.combine(o, |a, b| a.add(b))
    }

    pub fn mul(&self, o: &PiecewisePoly) -> PiecewisePoly {
        self.combine(o, |a, b| a.mul(b))
    }

    /// Linear combination of many functions sharing similar breakpoints.
    pub fn linear_combination(terms: &[(f64, &PiecewisePoly)]) -> Option<PiecewisePoly> {
        let mut br: Vec<f64> = terms
            .iter()
            .filter(|(c, _)| *c != 0.0)
            .flat_map(|(_, f)| f.breaks.iter().copied())
            .collect();
        if br.is_empty() {
            return None;
        }
        br.sort_by(|a, b| a.partial_cmp(b).unwrap());
        br.dedup();
        let pieces = br
            .windows(2)
            .map(|w| {
                let mut acc = Poly::zero();
                for (c, f) in terms {
                    if *c != 0.0 {
                        acc.add_scaled(&f.poly_from(w[0]), *c);
                    }
                }
                acc
            })
            .collect();
        Some(PiecewisePoly { breaks: br, pieces })
    }

    /// Splits every piece so no piece is longer than `h`.
    pub fn refined(&self, h: f64) -> PiecewisePoly {
        let mut breaks = vec![self.breaks[0]];
        let mut pieces = Vec::new();
        for (i, p) in self.pieces.iter().enumerate() {
            let (a, b) = (self.breaks[i], self.breaks[i + 1]);
            let m = ((b - a) / h).ceil().max(1.0) as usize;
            if p.degree() <= 1 || m == 1 {
                breaks.push(b);
                pieces.push(p.clone());
                continue;
            }
            for j in 0..m {
                let x0 = a + (b - a) * j as f64 / m as f64;
                let x1 = if j + 1 == m { b } else { a + (b - a) * (j + 1) as f64 / m as f64 };
                pieces.push(p.shift(x0 - a));
                breaks.push(x1);
            }
        }
        PiecewisePoly { breaks, pieces }
    }

    /// Piecewise-linear interpolant of every piece (one-sided end values) and the
    /// per-piece bound `len²/8 · sup|f''|` on the interpolation error.
    pub fn linear_interpolant(&self) -> (PiecewisePoly, Vec<f64>) {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut errs = Vec::with_capacity(self.pieces.len());
        for (i, p) in self.pieces.iter().enumerate() {
            let len = self.breaks[i + 1] - self.breaks[i];
            if p.degree() <= 1 {
                pieces.push(p.clone());
                errs.push(0.0);
                continue;
            }
            let (v0, v1) = (p.eval(0.0), p.eval(len));
            pieces.push(Poly::linear(v0, (v1 - v0) / len));
            let d2 = p.derivative().derivative();
            errs.push(len * len / 8.0 * d2.sup_abs(0.0, len));
        }
        (PiecewisePoly { breaks: self.breaks.clone(), pieces }, errs)
    }

    /// Drops leading/trailing pieces that are identically zero.
    pub fn trimmed(&self) -> PiecewisePoly {
        let n = self.pieces.len();
        let first = self.pieces.iter().position(|p| !p.is_zero());
        let Some(first) = first else {
            return self.clone();
        };
        let last = n - 1 - self.pieces.iter().rev().position(|p| !p.is_zero()).unwrap();
        PiecewisePoly {
            breaks: self.breaks[first..=last + 1].to_vec(),
            pieces: self.pieces[first..=last].to_vec(),
        }
    }
}
