//! B-spline and Fourier basis systems.
//!
//! B-splines use equally spaced interior knots with boundary knots repeated
//! `order` times, so the system is fully determined by the domain, the number
//! of functions and the order. Fourier systems are orthonormal on the domain:
//! `1/√T, √(2/T) sin(2πt̃), √(2/T) cos(2πt̃), √(2/T) sin(4πt̃), …` with
//! `t̃ = (t - lo) / T`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::quadrature;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config("domain must satisfy lo < hi"));
        }
        Ok(Domain { lo, hi })
    }

    pub fn unit() -> Self {
        Domain { lo: 0.0, hi: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain {
                t,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// `n` equally spaced points covering the domain, endpoints included.
    pub fn uniform_grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![self.lo],
            _ => {
                let h = self.width() / (n - 1) as f64;
                let mut g: Vec<f64> = (0..n).map(|i| self.lo + i as f64 * h).collect();
                g[n - 1] = self.hi;
                g
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum BasisKind {
    Bspline { order: usize },
    Fourier,
}

/// Serialized description of a basis system; knots are re-derived on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub domain: Domain,
    pub num_basis: usize,
}

/// A family of `M` known functions evaluable anywhere on the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisSpec", into = "BasisSpec")]
pub struct BasisSystem {
    kind: BasisKind,
    domain: Domain,
    num_basis: usize,
    knots: Vec<f64>,
}

impl TryFrom<BasisSpec> for BasisSystem {
    type Error = Error;

    fn try_from(spec: BasisSpec) -> Result<Self> {
        match spec.kind {
            BasisKind::Bspline { order } => BasisSystem::bspline(spec.domain, spec.num_basis, order),
            BasisKind::Fourier => BasisSystem::fourier(spec.domain, spec.num_basis),
        }
    }
}

impl From<BasisSystem> for BasisSpec {
    fn from(b: BasisSystem) -> Self {
        b.spec()
    }
}

impl BasisSystem {
    /// B-spline system of the given order (4 = cubic) with `num_basis` functions.
    pub fn bspline(domain: Domain, num_basis: usize, order: usize) -> Result<Self> {
        let domain = Domain::new(domain.lo, domain.hi)?;
        if order == 0 {
            return Err(Error::config("B-spline order must be positive"));
        }
        if num_basis < order {
            return Err(Error::config(alloc::format!(
                "B-spline basis needs num_basis >= order ({num_basis} < {order})"
            )));
        }
        let interior = num_basis - order;
        let mut knots = Vec::with_capacity(num_basis + order);
        knots.extend(core::iter::repeat_n(domain.lo, order));
        let h = domain.width() / (interior + 1) as f64;
        for i in 1..=interior {
            knots.push(domain.lo + i as f64 * h);
        }
        knots.extend(core::iter::repeat_n(domain.hi, order));
        Ok(BasisSystem {
            kind: BasisKind::Bspline { order },
            domain,
            num_basis,
            knots,
        })
    }

    /// Cubic B-splines on `[0, 1]`.
    pub fn cubic_unit(num_basis: usize) -> Result<Self> {
        BasisSystem::bspline(Domain::unit(), num_basis, 4)
    }

    pub fn fourier(domain: Domain, num_basis: usize) -> Result<Self> {
        let domain = Domain::new(domain.lo, domain.hi)?;
        if num_basis == 0 {
            return Err(Error::config("Fourier basis needs at least one function"));
        }
        Ok(BasisSystem {
            kind: BasisKind::Fourier,
            domain,
            num_basis,
            knots: Vec::new(),
        })
    }

    pub fn spec(&self) -> BasisSpec {
        BasisSpec {
            kind: self.kind,
            domain: self.domain,
            num_basis: self.num_basis,
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    /// Knot sequence (empty for Fourier systems).
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Values `(φ_1(t), …, φ_M(t))`.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_basis];
        self.evaluate_into(t, &mut out)?;
        Ok(out)
    }

    /// Like [`evaluate`](Self::evaluate) but writes into `out` (length `M`).
    pub fn evaluate_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.domain.check(t)?;
        if out.len() != self.num_basis {
            return Err(Error::arg("output buffer length must equal num_basis"));
        }
        match self.kind {
            BasisKind::Bspline { order } => self.eval_bspline(order, t, out),
            BasisKind::Fourier => self.eval_fourier(t, out),
        }
        Ok(())
    }

    /// Index `μ` with `knots[μ] <= t < knots[μ + 1]`; the last non-empty span at `t = hi`.
    fn find_span(&self, order: usize, t: f64) -> usize {
        let last = self.num_basis - 1;
        if t >= self.domain.hi {
            return last;
        }
        let (mut lo, mut hi) = (order - 1, last + 1);
        // binary search over knots[order-1 ..= num_basis]
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    fn eval_bspline(&self, order: usize, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        let span = self.find_span(order, t);
        let degree = order - 1;
        // Triangular Cox–de Boor scheme on the `order` nonzero functions.
        let mut n = [0.0f64; 32];
        let mut left = [0.0f64; 32];
        let mut right = [0.0f64; 32];
        let mut heap_n;
        let mut heap_left;
        let mut heap_right;
        let (n, left, right): (&mut [f64], &mut [f64], &mut [f64]) = if order <= 32 {
            (&mut n[..order], &mut left[..order], &mut right[..order])
        } else {
            heap_n = vec![0.0; order];
            heap_left = vec![0.0; order];
            heap_right = vec![0.0; order];
            (&mut heap_n, &mut heap_left, &mut heap_right)
        };
        n[0] = 1.0;
        for j in 1..=degree {
            left[j] = t - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let first = span - degree;
        out[first..=span].copy_from_slice(&n[..order]);
    }

    fn eval_fourier(&self, t: f64, out: &mut [f64]) {
        let width = self.domain.width();
        let x = (t - self.domain.lo) / width;
        let c0 = 1.0 / math::sqrt(width);
        let c = math::sqrt(2.0 / width);
        out[0] = c0;
        for (m, o) in out.iter_mut().enumerate().skip(1) {
            let k = m.div_ceil(2) as f64;
            let arg = 2.0 * PI * k * x;
            *o = if m % 2 == 1 { c * math::sin(arg) } else { c * math::cos(arg) };
        }
    }

    /// `J × M` matrix whose row `j` is `evaluate(times[j])`.
    pub fn design_matrix(&self, times: &[f64]) -> Result<Matrix> {
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("design matrix times must be strictly increasing"));
        }
        self.design_matrix_unchecked_order(times)
    }

    /// Design matrix for arbitrary (possibly unsorted) evaluation points.
    pub(crate) fn design_matrix_unchecked_order(&self, times: &[f64]) -> Result<Matrix> {
        let mut m = Matrix::zeros(times.len(), self.num_basis);
        for (j, &t) in times.iter().enumerate() {
            self.evaluate_into(t, m.row_mut(j))?;
        }
        Ok(m)
    }

    /// `G[m][n] ≈ ∫ φ_m φ_n` by the trapezoidal rule on `resolution` uniform points.
    pub fn gram_matrix(&self, resolution: usize) -> Result<Matrix> {
        if resolution < 2 {
            return Err(Error::arg("Gram resolution must be at least 2"));
        }
        let grid = self.domain.uniform_grid(resolution);
        let w = quadrature::trapezoid_weights(&grid)?;
        let phi = self.design_matrix(&grid)?;
        let m = self.num_basis;
        let mut g = Matrix::zeros(m, m);
        for (j, &wj) in w.weights().iter().enumerate() {
            let row = phi.row(j);
            for a in 0..m {
                let va = row[a] * wj;
                if va == 0.0 {
                    continue;
                }
                for b in a..m {
                    g[(a, b)] += va * row[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        Ok(g)
    }

    /// `Σ_m coeffs[m] φ_m(t)`.
    pub fn combine(&self, coeffs: &[f64], t: f64) -> Result<f64> {
        if coeffs.len() != self.num_basis {
            return Err(Error::arg("coefficient length must equal num_basis"));
        }
        let phi = self.evaluate(t)?;
        Ok(crate::linalg::dot(&phi, coeffs))
    }

    /// `Σ_m coeffs[m] φ_m(t)` at each of `times`.
    pub fn combine_many(&self, coeffs: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.num_basis {
            return Err(Error::arg("coefficient length must equal num_basis"));
        }
        let mut phi = vec![0.0; self.num_basis];
        times
            .iter()
            .map(|&t| {
                self.evaluate_into(t, &mut phi)?;
                Ok(crate::linalg::dot(&phi, coeffs))
            })
            .collect()
    }
}
