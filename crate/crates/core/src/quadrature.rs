//! Gauss–Legendre rules, composite over breakpoint cells, and a Duffy-collapsed
//! product rule on triangles.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// The default 8-point rule, computed once.
pub fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8))
}

/// `∫_a^b f` with the 8-point rule on a single cell.
pub fn integrate_cell(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (x, w) = gl8();
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        s += wi * f(c + h * xi);
    }
    s * h
}

/// Composite rule over the cells cut by `breaks` (sorted), restricted to `[lo, hi]`.
pub fn integrate_composite(breaks: &[f64], lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let cuts = cells_within(breaks, lo, hi);
    cuts.windows(2).map(|c| integrate_cell(c[0], c[1], &mut f)).sum()
}

/// `lo`, the breakpoints strictly inside `(lo, hi)`, and `hi`.
pub fn cells_within(breaks: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut cuts = vec![lo];
    cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts
}

/// Sorted, deduplicated union of breakpoint lists.
pub fn merge_breaks<'a>(lists: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut all: Vec<f64> = lists.into_iter().flatten().copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    all
}

/// `∫` over the triangle with vertices `p0, p1, p2` using the collapsed product rule.
pub fn integrate_triangle(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], mut f: impl FnMut(f64, f64) -> f64) -> f64 {
    let (x, w) = gl8();
    let area2 = ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
    if area2 == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for (ui, wu) in x.iter().zip(w) {
        let u = 0.5 * (ui + 1.0);
        for (vi, wv) in x.iter().zip(w) {
            let v = 0.5 * (vi + 1.0);
            // (u, v) on the unit square → barycentric (u(1-v), uv)
            let (a, b) = (u * (1.0 - v), u * v);
            let px = p0[0] + a * (p1[0] - p0[0]) + b * (p2[0] - p0[0]);
            let py = p0[1] + a * (p1[1] - p0[1]) + b * (p2[1] - p0[1]);
            s += wu * wv * u * f(px, py);
        }
    }
    s * 0.25 * area2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rule_integrates_degree_15_exactly() {
        let v = integrate_cell(-1.0, 2.0, |x| x.powi(15) - 3.0 * x.powi(4));
        let exact = (2f64.powi(16) - 1.0) / 16.0 - 3.0 * (2f64.powi(5) + 1.0) / 5.0;
        assert_abs_diff_eq!(v, exact, epsilon = 1e-9);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 8, 13] {
            let (_, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn triangle_moments() {
        // ∫ x y over the unit right triangle = 1/24
        let v = integrate_triangle([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], |x, y| x * y);
        assert_abs_diff_eq!(v, 1.0 / 24.0, epsilon = 1e-14);
    }

    #[test]
    fn composite_respects_kinks() {
        let v = integrate_composite(&[0.0], -1.0, 1.0, |x: f64| x.abs());
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
    }
}
