//! Symmetric circulant tridiagonal error precision.
//!
//! The precision has constant diagonal `σ₀⁻²` and constant wrap-around
//! off-diagonal `ω`. It is parameterised by `(ϖ₀, ϖ₁)` with
//!
//! ```text
//! σ₀⁻² = (ϖ₀ + ϖ₁)/√2,   ω = (ϖ₀ − ϖ₁)/(2√2)
//! ```
//!
//! so that its eigenvalues `λ_m = σ₀⁻² + 2ω·cos(2πm/K)` range between
//! `√2·ϖ₀` (m = 0) and `√2·ϖ₁` (m = K/2). Everything here uses the closed-form
//! spectrum; dense matrices are only materialised on request.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirculantPrecision {
    varpi0: f64,
    varpi1: f64,
    k: usize,
}

impl CirculantPrecision {
    pub fn build(varpi0: f64, varpi1: f64, k: usize) -> Result<Self> {
        if !(varpi0 > 0.0 && varpi0.is_finite() && varpi1 > 0.0 && varpi1.is_finite()) {
            return Err(Error::Domain(format!(
                "varpi must be positive and finite, got ({varpi0}, {varpi1})"
            )));
        }
        if k < 3 {
            return Err(Error::Domain(format!("circulant precision needs K >= 3, got {k}")));
        }
        Ok(Self { varpi0, varpi1, k })
    }

    /// Builds from the diagonal and off-diagonal directly. Fails when the
    /// implied `ϖ` are not both positive.
    pub fn from_diag_offdiag(diag: f64, offdiag: f64, k: usize) -> Result<Self> {
        Self::build(
            (diag + 2.0 * offdiag) / SQRT_2,
            (diag - 2.0 * offdiag) / SQRT_2,
            k,
        )
    }

    /// `σ₀⁻² I`, i.e. `ω = 0`.
    pub fn diagonal(precision: f64, k: usize) -> Result<Self> {
        Self::from_diag_offdiag(precision, 0.0, k)
    }

    pub fn varpi0(&self) -> f64 {
        self.varpi0
    }

    pub fn varpi1(&self) -> f64 {
        self.varpi1
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `σ₀⁻²`
    pub fn diag(&self) -> f64 {
        (self.varpi0 + self.varpi1) / SQRT_2
    }

    /// `ω`
    pub fn offdiag(&self) -> f64 {
        (self.varpi0 - self.varpi1) / (2.0 * SQRT_2)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        spectrum(self.diag(), self.offdiag(), self.k)
    }

    pub fn log_det(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.ln()).sum()
    }

    /// `vᵀ Σ⁻¹ v` in O(K).
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.k);
        quad_form_parts(v).combine(self.diag(), self.offdiag())
    }

    /// `Σ⁻¹ v` in O(K).
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        let (d, w, k) = (self.diag(), self.offdiag(), self.k);
        for i in 0..k {
            out[i] = d * v[i] + w * (v[(i + 1) % k] + v[(i + k - 1) % k]);
        }
    }

    /// First row of `Σ = (Σ⁻¹)⁻¹`, by inverse DFT of `1/λ_m`.
    pub fn covariance_row(&self) -> Vec<f64> {
        let lambda = self.eigenvalues();
        let k = self.k as f64;
        (0..self.k)
            .map(|lag| {
                lambda
                    .iter()
                    .enumerate()
                    .map(|(m, l)| (2.0 * PI * (m * lag) as f64 / k).cos() / l)
                    .sum::<f64>()
                    / k
            })
            .collect()
    }

    /// Lag correlations `ρ_k = Σ_{1,1+k}/Σ_{1,1}` for `k = 1..⌊K/2⌋`.
    pub fn lag_correlations(&self) -> Vec<f64> {
        let row = self.covariance_row();
        (1..=self.k / 2).map(|lag| row[lag] / row[0]).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (d, w, k) = (self.diag(), self.offdiag(), self.k);
        DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                d
            } else if (i + 1) % k == j || (j + 1) % k == i {
                w
            } else {
                0.0
            }
        })
    }

    pub fn covariance_dense(&self) -> DMatrix<f64> {
        let row = self.covariance_row();
        let k = self.k;
        DMatrix::from_fn(k, k, |i, j| row[(j + k - i) % k])
    }
}

/// `λ_m = d + 2w·cos(2πm/K)`.
pub fn spectrum(diag: f64, offdiag: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|m| diag + 2.0 * offdiag * (2.0 * PI * m as f64 / k as f64).cos())
        .collect()
}

/// Sufficient statistics of a quadratic form under a circulant tridiagonal
/// precision: `vᵀPv = diag·sum_sq + 2·offdiag·sum_adj`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuadParts {
    pub sum_sq: f64,
    /// `Σ_i v_i v_{i+1}` with wrap-around.
    pub sum_adj: f64,
}

impl QuadParts {
    pub fn combine(&self, diag: f64, offdiag: f64) -> f64 {
        diag * self.sum_sq + 2.0 * offdiag * self.sum_adj
    }
}

pub fn quad_form_parts(v: &[f64]) -> QuadParts {
    let k = v.len();
    let mut parts = QuadParts::default();
    for i in 0..k {
        parts.sum_sq += v[i] * v[i];
        parts.sum_adj += v[i] * v[(i + 1) % k];
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn identity_when_offdiag_vanishes() {
        let h = SQRT_2 / 2.0;
        let p = CirculantPrecision::build(h, h, 4).unwrap();
        assert!((p.diag() - 1.0).abs() < 1e-15);
        assert!(p.offdiag().abs() < 1e-15);
        assert!((p.to_dense() - DMatrix::identity(4, 4)).norm() < 1e-15);
        assert!(p.log_det().abs() < 1e-15);
        assert!(p.lag_correlations().iter().all(|r| r.abs() < 1e-15));
        assert!((p.quad_form(&[1.0, 2.0, 2.0, 0.0]) - 9.0).abs() < 1e-14);
    }

    #[test]
    fn hand_arithmetic_diag_offdiag() {
        let p = CirculantPrecision::build(2.0 * SQRT_2, SQRT_2, 12).unwrap();
        assert!((p.diag() - 3.0).abs() < 1e-14);
        assert!((p.offdiag() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn k4_spectrum_and_logdet() {
        let p = CirculantPrecision::from_diag_offdiag(3.0, 0.5, 4).unwrap();
        let l = p.eigenvalues();
        for (got, want) in l.iter().zip([4.0, 3.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!((p.log_det() - 72.0f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn smallest_eigenvalue_tends_to_zero_with_varpi1() {
        for eps in [1e-2, 1e-5, 1e-9] {
            let p = CirculantPrecision::build(SQRT_2, eps, 12).unwrap();
            let min = p.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0);
            assert!((min - SQRT_2 * eps).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(CirculantPrecision::build(0.0, 1.0, 4).is_err());
        assert!(CirculantPrecision::build(1.0, -1.0, 4).is_err());
        assert!(CirculantPrecision::build(1.0, 1.0, 2).is_err());
    }

    #[test]
    fn negative_offdiag_gives_positive_lag1_correlation() {
        let p = CirculantPrecision::from_diag_offdiag(3.0, -0.1, 12).unwrap();
        let dense_cov = p.to_dense().try_inverse().unwrap();
        let rho1 = dense_cov[(0, 1)] / dense_cov[(0, 0)];
        assert!(rho1 > 0.0);
        assert!((p.lag_correlations()[0] - rho1).abs() < 1e-12);
    }

    #[test]
    fn lag_correlations_match_dense_inverse() {
        let p = CirculantPrecision::from_diag_offdiag(3.0, 0.5, 12).unwrap();
        let cov = p.to_dense().try_inverse().unwrap();
        let rho = p.lag_correlations();
        assert_eq!(rho.len(), 6);
        for (lag, r) in rho.iter().enumerate() {
            assert!((r - cov[(0, lag + 1)] / cov[(0, 0)]).abs() < 1e-9);
        }
        assert!((p.covariance_dense() - cov).norm() < 1e-12);
    }

    #[test]
    fn mul_vec_matches_dense() {
        let p = CirculantPrecision::from_diag_offdiag(2.0, -0.7, 5).unwrap();
        let v = [0.3, -1.0, 2.0, 0.5, 1.5];
        let mut out = [0.0; 5];
        p.mul_vec(&v, &mut out);
        let dense = p.to_dense() * nalgebra::DVector::from_column_slice(&v);
        for i in 0..5 {
            assert!((out[i] - dense[i]).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn positive_varpi_is_positive_definite(
            v0 in 1e-3f64..50.0, v1 in 1e-3f64..50.0, k in 3usize..20
        ) {
            let p = CirculantPrecision::build(v0, v1, k).unwrap();
            prop_assert!(p.eigenvalues().iter().all(|&l| l > 0.0));
            prop_assert!(p.to_dense().cholesky().is_some());
            let dense = sorted(p.to_dense().symmetric_eigenvalues().iter().copied().collect());
            let closed = sorted(p.eigenvalues());
            for (a, b) in dense.iter().zip(&closed) {
                prop_assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn nonpositive_varpi1_is_not_pd_for_even_k(
            v0 in 1e-3f64..50.0, v1 in -50.0f64..=0.0, half in 2usize..10
        ) {
            let k = 2 * half;
            let d = (v0 + v1) / SQRT_2;
            let w = (v0 - v1) / (2.0 * SQRT_2);
            prop_assert!(spectrum(d, w, k).iter().any(|&l| l <= 1e-12));
        }

        #[test]
        fn rows_sum_to_diag_plus_twice_offdiag(
            v0 in 1e-3f64..10.0, v1 in 1e-3f64..10.0, k in 3usize..16
        ) {
            let p = CirculantPrecision::build(v0, v1, k).unwrap();
            let dense = p.to_dense();
            for i in 0..k {
                let s: f64 = dense.row(i).iter().sum();
                prop_assert!((s - (p.diag() + 2.0 * p.offdiag())).abs() < 1e-12);
            }
        }

        #[test]
        fn error_correlations_are_symmetric_in_lag(
            v0 in 1e-2f64..10.0, v1 in 1e-2f64..10.0, k in 3usize..16
        ) {
            let p = CirculantPrecision::build(v0, v1, k).unwrap();
            let cov = p.covariance_dense();
            for j in 0..k {
                for l in 1..k {
                    let fwd = cov[(j, (j + l) % k)];
                    let back = cov[(j, (j + k - l) % k)];
                    prop_assert!((fwd - back).abs() < 1e-12 * cov[(0, 0)].abs());
                }
            }
        }
    }
}
