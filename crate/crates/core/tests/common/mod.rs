#![allow(dead_code)]

use fae_core::basis::BasisSystem;
use fae_core::FunctionalSample;

/// Textbook recursive Cox–de Boor on an explicit knot vector.
pub fn naive_bspline(knots: &[f64], i: usize, order: usize, t: f64) -> f64 {
    if order == 1 {
        let (a, b) = (knots[i], knots[i + 1]);
        let last = knots[knots.len() - 1];
        return if (a <= t && t < b) || (t == last && b == last && a < b) { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + order - 1] - knots[i];
    if d1 > 0.0 {
        v += (t - knots[i]) / d1 * naive_bspline(knots, i, order - 1, t);
    }
    let d2 = knots[i + order] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + order] - t) / d2 * naive_bspline(knots, i + 1, order - 1, t);
    }
    v
}

/// Clamped uniform knot vector built independently of the library.
pub fn clamped_knots(lo: f64, hi: f64, m: usize, order: usize) -> Vec<f64> {
    let interior = m - order;
    let mut k = vec![lo; order];
    for i in 1..=interior {
        k.push(lo + (hi - lo) * i as f64 / (interior + 1) as f64);
    }
    k.extend(std::iter::repeat_n(hi, order));
    k
}

/// Midpoint-rule Gram matrix with `cells` subintervals.
pub fn midpoint_gram(basis: &BasisSystem, cells: usize) -> Vec<Vec<f64>> {
    let m = basis.num_basis();
    let d = basis.domain();
    let h = (d.hi - d.lo) / cells as f64;
    let mut g = vec![vec![0.0; m]; m];
    for c in 0..cells {
        let t = d.lo + (c as f64 + 0.5) * h;
        let phi = basis.evaluate(t).unwrap();
        for a in 0..m {
            for b in 0..m {
                g[a][b] += h * phi[a] * phi[b];
            }
        }
    }
    g
}

pub fn uniform(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

pub fn curve(times: Vec<f64>, f: impl Fn(f64) -> f64) -> FunctionalSample {
    let v = times.iter().map(|&t| f(t)).collect();
    FunctionalSample::new(times, v, None).unwrap()
}

/// Max relative error with a floor that keeps tiny entries from dominating.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
