//! Functional principal component analysis on a basis expansion.
//!
//! Curves are first smoothed onto a basis by (ridge-stabilized) least
//! squares. With `G` the Gram matrix of the basis and `S` the covariance of
//! the coefficient vectors, the eigenfunctions solve the symmetric problem
//! `G^{1/2} S G^{1/2} u = λ u` and have coefficients `G^{-1/2} u`, which makes
//! them orthonormal in `L²`. Scores are `ξ_k = (c − μ)ᵀ G ψ_k`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, Matrix, Qr};
use crate::math;
use crate::sample::FunctionalSample;

fn default_ridge() -> f64 {
    1e-9
}

fn default_gram_resolution() -> usize {
    10_001
}

const GRAM_EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcaConfig {
    /// Smoothing basis.
    pub basis: BasisSystem,
    pub num_components: usize,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// Number of trapezoid points used for the Gram matrix.
    #[serde(default = "default_gram_resolution")]
    pub gram_resolution: usize,
}

impl FpcaConfig {
    pub fn new(basis: BasisSystem, num_components: usize) -> Self {
        FpcaConfig {
            basis,
            num_components,
            ridge: default_ridge(),
            gram_resolution: default_gram_resolution(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcaModel {
    basis: BasisSystem,
    ridge: f64,
    mean_coeffs: Vec<f64>,
    /// `M × K`; column `k` holds the coefficients of eigenfunction `k`.
    eigen_coeffs: Matrix,
    /// Descending.
    eigenvalues: Vec<f64>,
    gram: Matrix,
}

/// Least-squares coefficients of one curve: `argmin Σ_j (X_j − φ(t_j)ᵀc)² + ridge ‖c‖²`.
pub fn smooth_sample(sample: &FunctionalSample, basis: &BasisSystem, ridge: f64) -> Result<Vec<f64>> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::arg("ridge must be nonnegative"));
    }
    let m = basis.num_basis();
    let design = basis.design_matrix(sample.times())?;
    let j = sample.len();
    if ridge == 0.0 {
        if j < m {
            return Err(Error::Singular(alloc::format!(
                "{j} observations cannot determine {m} coefficients without a ridge"
            )));
        }
        return Qr::new(&design)?.solve(sample.values());
    }
    let root = math::sqrt(ridge);
    let aug = Matrix::from_fn(j + m, m, |r, c| {
        if r < j {
            design[(r, c)]
        } else if r - j == c {
            root
        } else {
            0.0
        }
    });
    let mut rhs = sample.values().to_vec();
    rhs.resize(j + m, 0.0);
    Qr::new(&aug)?.solve(&rhs)
}

/// Row `i` holds the smoothed coefficients of `samples[i]`.
pub fn smooth_to_basis(samples: &[FunctionalSample], basis: &BasisSystem, ridge: f64) -> Result<Matrix> {
    let m = basis.num_basis();
    let mut out = Matrix::zeros(samples.len(), m);
    for (i, s) in samples.iter().enumerate() {
        let c = smooth_sample(s, basis, ridge)?;
        out.row_mut(i).copy_from_slice(&c);
    }
    Ok(out)
}

/// Fits FPCA on pre-smoothed coefficients (`N × M`) using the default Gram resolution.
pub fn fit(coeffs: &Matrix, basis: &BasisSystem, num_components: usize) -> Result<FpcaModel> {
    let gram = basis.gram_matrix(default_gram_resolution())?;
    fit_with_gram(coeffs, basis, gram, num_components, default_ridge())
}

/// Smooths `samples` onto `config.basis` and fits FPCA.
pub fn train(samples: &[FunctionalSample], config: &FpcaConfig) -> Result<FpcaModel> {
    let coeffs = smooth_to_basis(samples, &config.basis, config.ridge)?;
    let gram = config.basis.gram_matrix(config.gram_resolution)?;
    fit_with_gram(&coeffs, &config.basis, gram, config.num_components, config.ridge)
}

/// Fits FPCA with an explicit Gram matrix.
pub fn fit_with_gram(
    coeffs: &Matrix,
    basis: &BasisSystem,
    mut gram: Matrix,
    num_components: usize,
    ridge: f64,
) -> Result<FpcaModel> {
    let (n, m) = (coeffs.rows(), coeffs.cols());
    if m != basis.num_basis() {
        return Err(Error::arg("coefficient columns must equal the basis size"));
    }
    if n < 2 {
        return Err(Error::arg("FPCA needs at least two curves"));
    }
    if num_components == 0 || num_components > m {
        return Err(Error::arg(alloc::format!(
            "num_components must lie in 1..={m}, got {num_components}"
        )));
    }
    if gram.rows() != m || gram.cols() != m {
        return Err(Error::arg("Gram matrix shape does not match the basis"));
    }
    gram.symmetrize();

    let mean: Vec<f64> = (0..m).map(|c| (0..n).map(|r| coeffs[(r, c)]).sum::<f64>() / n as f64).collect();
    let mut cov = Matrix::zeros(m, m);
    for r in 0..n {
        let row = coeffs.row(r);
        for a in 0..m {
            let da = row[a] - mean[a];
            for b in a..m {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..m {
        for b in a..m {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let g_eig = symmetric_eigen(&gram)?;
    let g_max = g_eig.values.first().copied().unwrap_or(0.0);
    let g_min = g_eig.values.last().copied().unwrap_or(0.0);
    if g_min < -1e-10 * g_max.max(1.0) {
        return Err(Error::Numerical("Gram matrix is not positive semidefinite".into()));
    }
    let g_half = g_eig.map_spectrum(|l| math::sqrt(l.max(GRAM_EIGEN_FLOOR)));
    let g_inv_half = g_eig.map_spectrum(|l| 1.0 / math::sqrt(l.max(GRAM_EIGEN_FLOOR)));

    let mut target = g_half.matmul(&cov).matmul(&g_half);
    target.symmetrize();
    let eig = symmetric_eigen(&target)?;
    let u = Matrix::from_fn(m, num_components, |r, c| eig.vectors[(r, c)]);
    let mut eigen_coeffs = g_inv_half.matmul(&u);
    // Sign convention: the largest-magnitude coefficient of each eigenfunction is positive.
    for k in 0..num_components {
        let col = eigen_coeffs.column(k);
        let pivot = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if pivot < 0.0 {
            for r in 0..m {
                eigen_coeffs[(r, k)] = -eigen_coeffs[(r, k)];
            }
        }
    }
    let eigenvalues = eig.values[..num_components].iter().map(|&l| l.max(0.0)).collect();
    Ok(FpcaModel {
        basis: basis.clone(),
        ridge,
        mean_coeffs: mean,
        eigen_coeffs,
        eigenvalues,
        gram,
    })
}

impl FpcaModel {
    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn mean_coeffs(&self) -> &[f64] {
        &self.mean_coeffs
    }

    pub fn eigen_coeffs(&self) -> &Matrix {
        &self.eigen_coeffs
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn num_components(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Scores of an already-smoothed coefficient vector.
    pub fn scores_from_coeffs(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.mean_coeffs.len() {
            return Err(Error::arg("coefficient length does not match the basis"));
        }
        let centered: Vec<f64> = coeffs.iter().zip(&self.mean_coeffs).map(|(c, m)| c - m).collect();
        let g_centered = self.gram.matvec(&centered);
        Ok((0..self.num_components())
            .map(|k| dot(&g_centered, &self.eigen_coeffs.column(k)))
            .collect())
    }

    /// FPC scores `ξ_k = ∫ (X − μ) ψ_k` of a raw sample.
    pub fn scores(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        let c = smooth_sample(sample, &self.basis, self.ridge)?;
        self.scores_from_coeffs(&c)
    }

    /// Basis coefficients of `μ + Σ_k ξ_k ψ_k`.
    pub fn reconstruct_coeffs(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() > self.num_components() {
            return Err(Error::arg("more scores than fitted components"));
        }
        let mut c = self.mean_coeffs.clone();
        for (k, &xi) in scores.iter().enumerate() {
            for (r, cr) in c.iter_mut().enumerate() {
                *cr += xi * self.eigen_coeffs[(r, k)];
            }
        }
        Ok(c)
    }

    /// `μ(t) + Σ_k ξ_k ψ_k(t)` at `eval_times`.
    pub fn reconstruct(&self, scores: &[f64], eval_times: &[f64]) -> Result<Vec<f64>> {
        let c = self.reconstruct_coeffs(scores)?;
        self.basis.combine_many(&c, eval_times)
    }

    /// `ψ_k(t)`.
    pub fn eigenfunction(&self, k: usize, eval_times: &[f64]) -> Result<Vec<f64>> {
        if k >= self.num_components() {
            return Err(Error::arg("eigenfunction index out of range"));
        }
        self.basis.combine_many(&self.eigen_coeffs.column(k), eval_times)
    }

    pub fn mean_function(&self, eval_times: &[f64]) -> Result<Vec<f64>> {
        self.basis.combine_many(&self.mean_coeffs, eval_times)
    }

    /// Truncated reconstruction of a sample at its own observation times.
    pub fn reconstruct_sample(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        let scores = self.scores(sample)?;
        self.reconstruct(&scores, sample.times())
    }

    /// Fraction of the retained variance carried by each component.
    pub fn explained_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return vec![0.0; self.eigenvalues.len()];
        }
        self.eigenvalues.iter().map(|l| l / total).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Domain;

    #[test]
    fn constant_curve_gives_constant_coefficients() {
        let b = BasisSystem::cubic_unit(6).unwrap();
        let t = Domain::unit().uniform_grid(15);
        let s = FunctionalSample::new(t, vec![2.5; 15], None).unwrap();
        let c = smooth_sample(&s, &b, 0.0).unwrap();
        assert!(c.iter().all(|&v| (v - 2.5).abs() < 1e-8));
        let c = smooth_sample(&s, &b, 1e-9).unwrap();
        assert!(c.iter().all(|&v| (v - 2.5).abs() < 1e-8));
    }

    #[test]
    fn too_few_points_without_ridge_is_singular() {
        let b = BasisSystem::cubic_unit(6).unwrap();
        let s = FunctionalSample::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0], None).unwrap();
        assert!(matches!(smooth_sample(&s, &b, 0.0), Err(Error::Singular(_))));
        assert!(smooth_sample(&s, &b, 1e-3).is_ok());
    }

    #[test]
    fn argument_checks() {
        let b = BasisSystem::cubic_unit(4).unwrap();
        let c = Matrix::from_fn(5, 4, |i, j| (i * j) as f64);
        assert!(matches!(fit(&c, &b, 5), Err(Error::Argument(_))));
        assert!(matches!(fit(&c, &b, 0), Err(Error::Argument(_))));
        let one = Matrix::from_fn(1, 4, |_, j| j as f64);
        assert!(fit(&one, &b, 1).is_err());
    }

    #[test]
    fn zero_scores_reconstruct_the_mean() {
        let b = BasisSystem::cubic_unit(5).unwrap();
        let c = Matrix::from_fn(6, 5, |i, j| libm::sin(i as f64 + 0.3 * j as f64));
        let model = fit(&c, &b, 3).unwrap();
        let grid = Domain::unit().uniform_grid(9);
        assert_eq!(model.reconstruct(&[0.0; 3], &grid).unwrap(), model.mean_function(&grid).unwrap());
        assert!(model.reconstruct(&[0.0; 4], &grid).is_err());
        assert!(model.reconstruct(&[0.0], &[1.5]).is_err());
    }
}
