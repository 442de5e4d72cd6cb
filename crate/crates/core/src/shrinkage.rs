//! Regularised horseshoe machinery for multivariate-response regression.
//!
//! For `Y = XA + E` with rows of `E` distributed `N_Q(0, Σ)` and a horseshoe
//! prior `a_jk ~ N(0, τ²λ_jk²)`, the conditional posterior mean of row `j` of
//! `A` is `(I_Q − 𝒦_j) â_j` when the predictors are uncorrelated, with shrinkage
//! factor matrix
//!
//! ```text
//! 𝒦_j = (I_Q + N s_j² τ² Λ_j Σ⁻¹)⁻¹,   Λ_j = diag(λ_j1², …, λ_jQ²).
//! ```
//!
//! Its eigenvalues lie in (0, 1), and `m_eff = Σ_j tr(I − 𝒦_j)` counts the
//! effective number of non-zero coefficients. With `Σ = σ²I` and unit predictor
//! variances, `E(m_eff | τ, σ) = PQ·√N τ/σ / (1 + √N τ/σ)`, which calibrates the
//! global scale `τ₀ = e₀/(PQ − e₀) · σ/√N`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circulant::CirculantPrecision;
use crate::error::{Error, Result};
use crate::stats;

/// Prior calibration inputs for the global scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeConfig {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub e0: f64,
    pub c2_shape: f64,
    pub c2_scale: f64,
}

impl HorseshoeConfig {
    pub fn new(p: usize, q: usize, n: usize, e0: f64) -> Result<Self> {
        let cfg = Self {
            p,
            q,
            n,
            e0,
            c2_shape: 2.0,
            c2_scale: 8.0,
        };
        cfg.tau0(1.0)?;
        Ok(cfg)
    }

    pub fn tau0(&self, sigma: f64) -> Result<f64> {
        tau0_from_sparsity(self.e0, self.p, self.q, self.n, sigma)
    }
}

/// `τ₀ = e₀/(PQ − e₀) · σ/√N`.
pub fn tau0_from_sparsity(e0: f64, p: usize, q: usize, n: usize, sigma: f64) -> Result<f64> {
    let pq = (p * q) as f64;
    if !(e0 > 0.0 && e0 < pq) {
        return Err(Error::Domain(format!("e0 = {e0} outside (0, {pq})")));
    }
    if !(sigma > 0.0) || n == 0 {
        return Err(Error::Domain(format!(
            "need sigma > 0 and N > 0, got sigma = {sigma}, N = {n}"
        )));
    }
    Ok(e0 / (pq - e0) * sigma / (n as f64).sqrt())
}

/// `λ̃² = c²λ² / (c² + τ²λ²)`. An infinite `c²` gives the plain horseshoe `λ²`.
pub fn regularised_local_scale(lambda: f64, tau: f64, c2: f64) -> f64 {
    let l2 = lambda * lambda;
    if c2.is_infinite() {
        return l2;
    }
    if l2.is_infinite() {
        return c2 / (tau * tau);
    }
    c2 * l2 / (c2 + tau * tau * l2)
}

/// Local scales, global scale and slab variance for a `P × Q` coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageState {
    pub lambda: DMatrix<f64>,
    pub tau: f64,
    /// `f64::INFINITY` for the unregularised horseshoe.
    pub c2: f64,
}

impl ShrinkageState {
    pub fn new(lambda: DMatrix<f64>, tau: f64, c2: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && !v.is_nan();
        if !lambda.iter().all(|&l| ok(l) && l.is_finite()) || !(ok(tau) && tau.is_finite()) || !ok(c2)
        {
            return Err(Error::Domain("shrinkage state must be strictly positive".into()));
        }
        Ok(Self { lambda, tau, c2 })
    }

    /// Prior variances `τ²λ̃²_jk`.
    pub fn prior_variances(&self) -> DMatrix<f64> {
        self.lambda
            .map(|l| self.tau * self.tau * regularised_local_scale(l, self.tau, self.c2))
    }
}

/// Error structure passed to the shrinkage computations.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorPrecision {
    Circulant(CirculantPrecision),
    /// `precision · I_q`
    Diagonal { precision: f64, q: usize },
    Dense(DMatrix<f64>),
}

impl ErrorPrecision {
    pub fn dim(&self) -> usize {
        match self {
            ErrorPrecision::Circulant(p) => p.k(),
            ErrorPrecision::Diagonal { q, .. } => *q,
            ErrorPrecision::Dense(m) => m.nrows(),
        }
    }

    pub fn precision_dense(&self) -> DMatrix<f64> {
        match self {
            ErrorPrecision::Circulant(p) => p.to_dense(),
            ErrorPrecision::Diagonal { precision, q } => DMatrix::identity(*q, *q) * *precision,
            ErrorPrecision::Dense(m) => m.clone(),
        }
    }

    pub fn covariance_dense(&self) -> Result<DMatrix<f64>> {
        match self {
            ErrorPrecision::Circulant(p) => Ok(p.covariance_dense()),
            ErrorPrecision::Diagonal { precision, q } => {
                Ok(DMatrix::identity(*q, *q) / *precision)
            }
            ErrorPrecision::Dense(m) => m
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Domain("error precision is singular".into())),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `𝒦_j = (I + N s² τ² Λ_j Σ⁻¹)⁻¹` where `Λ_j = diag(λ²)`.
pub fn shrinkage_factor_matrix(
    precision: &ErrorPrecision,
    lambda_col: &[f64],
    tau: f64,
    n: usize,
    s2: f64,
) -> Result<DMatrix<f64>> {
    let q = precision.dim();
    if lambda_col.len() != q {
        return Err(Error::Dimension(format!(
            "{} local scales for a {q}-dimensional response",
            lambda_col.len()
        )));
    }
    check_positive("tau", tau)?;
    check_positive("s2", s2)?;
    for &l in lambda_col {
        check_positive("lambda", l)?;
    }
    let scale = n as f64 * s2 * tau * tau;
    if let ErrorPrecision::Diagonal { precision, .. } = precision {
        return Ok(DMatrix::from_diagonal(&DVector::from_iterator(
            q,
            lambda_col
                .iter()
                .map(|l| 1.0 / (1.0 + scale * l * l * precision)),
        )));
    }
    let p = precision.precision_dense();
    let mut inv = DMatrix::identity(q, q);
    for i in 0..q {
        let d = scale * lambda_col[i] * lambda_col[i];
        for j in 0..q {
            inv[(i, j)] += d * p[(i, j)];
        }
    }
    inv.try_inverse()
        .ok_or_else(|| Error::Domain("shrinkage factor matrix is singular".into()))
}

/// Eigenvalues of `𝒦_j`, computed through the symmetric similarity
/// `I + D^{1/2} Σ⁻¹ D^{1/2}` with `D = N s² τ² Λ_j`.
pub fn shrinkage_eigenvalues(
    precision: &ErrorPrecision,
    lambda_col: &[f64],
    tau: f64,
    n: usize,
    s2: f64,
) -> Result<Vec<f64>> {
    let q = precision.dim();
    let scale = n as f64 * s2 * tau * tau;
    let half: Vec<f64> = lambda_col.iter().map(|l| (scale * l * l).sqrt()).collect();
    let p = precision.precision_dense();
    let sym = DMatrix::from_fn(q, q, |i, j| half[i] * p[(i, j)] * half[j]);
    Ok(sym
        .symmetric_eigenvalues()
        .iter()
        .map(|eta| 1.0 / (1.0 + eta))
        .collect())
}

/// `Σ_j tr(I − 𝒦_j)`.
pub fn m_eff(factors: &[DMatrix<f64>]) -> f64 {
    factors
        .iter()
        .map(|k| (0..k.nrows()).map(|i| 1.0 - k[(i, i)]).sum::<f64>())
        .sum()
}

/// `PQ · a/(1 + a)` with `a = √N τ/σ`.
pub fn expected_m_eff_diagonal(p: usize, q: usize, n: usize, tau: f64, sigma: f64) -> f64 {
    let a = (n as f64).sqrt() * tau / sigma;
    (p * q) as f64 * a / (1.0 + a)
}

fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "X has {} rows, Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let xtx = x.transpose() * x;
    let xtx_inv = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Rank("XᵀX is not invertible".into()))?
        .inverse();
    let a_hat = &xtx_inv * x.transpose() * y;
    Ok((a_hat, xtx))
}

/// `E(A | Λ*, τ, Σ, Y)` through the full Kronecker-structured formula
/// `m* = τ²Λ* [τ²Λ* + (XᵀX)⁻¹ ⊗ Σ]⁻¹ â*` with `a* = vec(Aᵀ)`.
pub fn conditional_posterior_mean(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    state: &ShrinkageState,
    sigma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (p, q) = (x.ncols(), y.ncols());
    if state.lambda.shape() != (p, q) || sigma.shape() != (q, q) {
        return Err(Error::Dimension("shrinkage state or Σ has the wrong shape".into()));
    }
    let (a_hat, xtx) = least_squares(x, y)?;
    let xtx_inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::Rank("XᵀX is not invertible".into()))?;
    let v = state.prior_variances();
    let pq = p * q;
    let mut g = DMatrix::zeros(pq, pq);
    for j in 0..p {
        for jj in 0..p {
            for k in 0..q {
                for kk in 0..q {
                    g[(j * q + k, jj * q + kk)] = xtx_inv[(j, jj)] * sigma[(k, kk)];
                }
            }
        }
    }
    let mut prior = DVector::zeros(pq);
    for j in 0..p {
        for k in 0..q {
            prior[j * q + k] = v[(j, k)];
            g[(j * q + k, j * q + k)] += v[(j, k)];
        }
    }
    let a_star = DVector::from_fn(pq, |i, _| a_hat[(i / q, i % q)]);
    let solved = g
        .lu()
        .solve(&a_star)
        .ok_or_else(|| Error::Rank("posterior system is singular".into()))?;
    Ok(DMatrix::from_fn(p, q, |j, k| {
        prior[j * q + k] * solved[j * q + k]
    }))
}

/// Row-wise `(I − 𝒦_j) â_j` with `s_j² = (XᵀX)_jj / N`; equals
/// [`conditional_posterior_mean`] when `XᵀX` is diagonal.
pub fn blockwise_posterior_mean(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    state: &ShrinkageState,
    precision: &ErrorPrecision,
) -> Result<DMatrix<f64>> {
    let (p, q) = (x.ncols(), y.ncols());
    let n = x.nrows();
    let (a_hat, xtx) = least_squares(x, y)?;
    let mut m = DMatrix::zeros(p, q);
    for j in 0..p {
        let s2 = xtx[(j, j)] / n as f64;
        let lambda_tilde: Vec<f64> = (0..q)
            .map(|k| regularised_local_scale(state.lambda[(j, k)], state.tau, state.c2).sqrt())
            .collect();
        let kj = shrinkage_factor_matrix(precision, &lambda_tilde, state.tau, n, s2)?;
        let shrink = DMatrix::identity(q, q) - kj;
        let row = shrink * a_hat.row(j).transpose();
        m.set_row(j, &row.transpose());
    }
    Ok(m)
}

/// Monte Carlo summary of the shrinkage-factor prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShrinkagePriorSummary {
    pub draws: usize,
    pub k: usize,
    pub tau: f64,
    pub n: usize,
    /// Quantile levels for the two quantile vectors below.
    pub probs: Vec<f64>,
    pub diag_quantiles: Vec<f64>,
    pub offdiag_quantiles: Vec<f64>,
    /// Ten equal bins on [0, 1].
    pub diag_histogram: Vec<usize>,
    pub offdiag_histogram_edges: Vec<f64>,
    pub offdiag_histogram: Vec<usize>,
    pub m_eff_mean: f64,
    pub m_eff_se: f64,
}

fn half_cauchy<R: Rng>(rng: &mut R) -> f64 {
    // tan(πU/2) for U uniform on (0, 1)
    let u: f64 = rng.random();
    (PI * u / 2.0).tan().max(f64::MIN_POSITIVE)
}

fn draw_rng(seed: u64, draw: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    rng
}

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let idx = if width > 0.0 {
            (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
        } else {
            0
        };
        h[idx] += 1;
    }
    h
}

/// Draws `λ ~ C⁺(0,1)` for one predictor column and maps each draw through
/// [`shrinkage_factor_matrix`]. Each draw has its own RNG stream, so results
/// do not depend on thread scheduling.
pub fn simulate_shrinkage_prior(
    precision: &ErrorPrecision,
    tau: f64,
    n: usize,
    s2: f64,
    draws: usize,
    seed: u64,
) -> Result<ShrinkagePriorSummary> {
    let q = precision.dim();
    let factors: Vec<DMatrix<f64>> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = draw_rng(seed, d);
            let lambda: Vec<f64> = (0..q).map(|_| half_cauchy(&mut rng)).collect();
            shrinkage_factor_matrix(precision, &lambda, tau, n, s2)
        })
        .collect::<Result<_>>()?;

    let mut diag = Vec::with_capacity(draws * q);
    let mut off = Vec::with_capacity(draws * q * (q - 1));
    let mut meff = Vec::with_capacity(draws);
    for f in &factors {
        for i in 0..q {
            for j in 0..q {
                if i == j {
                    diag.push(f[(i, j)]);
                } else {
                    off.push(f[(i, j)]);
                }
            }
        }
        meff.push(m_eff(std::slice::from_ref(f)));
    }
    let probs = vec![0.025, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975];
    let (off_lo, off_hi) = off.iter().fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let off_bins = 10;
    let edges = (0..=off_bins)
        .map(|i| off_lo + (off_hi - off_lo) * i as f64 / off_bins as f64)
        .collect();
    Ok(ShrinkagePriorSummary {
        draws,
        k: q,
        tau,
        n,
        diag_quantiles: stats::quantiles(&diag, &probs),
        offdiag_quantiles: if off.is_empty() {
            Vec::new()
        } else {
            stats::quantiles(&off, &probs)
        },
        probs,
        diag_histogram: histogram(&diag, 0.0, 1.0, 10),
        offdiag_histogram_edges: edges,
        offdiag_histogram: histogram(&off, off_lo, off_hi, off_bins),
        m_eff_mean: stats::mean(&meff),
        m_eff_se: stats::sample_sd(&meff) / (draws as f64).sqrt(),
    })
}

/// Monte Carlo estimate of `E(m_eff)` under `Σ = σ²I`, unit predictor variances
/// and `λ_jk ~ C⁺(0,1)`. Returns `(mean, standard error)`.
pub fn m_eff_monte_carlo(
    p: usize,
    q: usize,
    n: usize,
    tau: f64,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let precision = ErrorPrecision::Diagonal {
        precision: 1.0 / (sigma * sigma),
        q,
    };
    let values: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = draw_rng(seed, d);
            let factors = (0..p)
                .map(|_| {
                    let lambda: Vec<f64> = (0..q).map(|_| half_cauchy(&mut rng)).collect();
                    shrinkage_factor_matrix(&precision, &lambda, tau, n, 1.0)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(m_eff(&factors))
        })
        .collect::<Result<_>>()?;
    Ok((
        stats::mean(&values),
        stats::sample_sd(&values) / (draws as f64).sqrt(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::SQRT_2;

    #[test]
    fn tau0_examples() {
        assert!((tau0_from_sparsity(8.0, 4, 4, 100, 2.0).unwrap() - 0.2).abs() < 1e-15);
        let t = tau0_from_sparsity(12.0, 12, 12, 257, 1.0).unwrap();
        assert!((t - (12.0 / 132.0) / 257f64.sqrt()).abs() < 1e-15);
        assert!((t - 0.0056708).abs() < 1e-7);
        assert!(tau0_from_sparsity(1e-12, 12, 12, 257, 1.0).unwrap() < 1e-14);
        assert!(tau0_from_sparsity(0.0, 2, 2, 10, 1.0).is_err());
        assert!(tau0_from_sparsity(4.0, 2, 2, 10, 1.0).is_err());
    }

    #[test]
    fn regularised_scale_examples() {
        assert!((regularised_local_scale(1.0, 0.1, 4.0) - 4.0 / 4.01).abs() < 1e-15);
        assert!((regularised_local_scale(2.0, 0.1, 1e12) - 4.0).abs() < 1e-8);
        assert_eq!(regularised_local_scale(2.0, 0.1, f64::INFINITY), 4.0);
        let tau = 0.3;
        let capped = tau * tau * regularised_local_scale(1e9, tau, 5.0);
        assert!((capped - 5.0).abs() < 1e-6);
    }

    #[test]
    fn diagonal_sigma_matches_closed_form() {
        let prec = CirculantPrecision::diagonal(2.5, 4).unwrap();
        let lam = [0.5, 1.0, 2.0, 3.0];
        let (tau, n, s2) = (0.1, 50, 1.3);
        let k = shrinkage_factor_matrix(&ErrorPrecision::Circulant(prec), &lam, tau, n, s2).unwrap();
        for i in 0..4 {
            let want = 1.0 / (1.0 + n as f64 * s2 * tau * tau * lam[i] * lam[i] * 2.5);
            assert!((k[(i, i)] - want).abs() < 1e-14);
            for j in 0..4 {
                if i != j {
                    assert!(k[(i, j)].abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn complete_shrinkage_as_tau_vanishes() {
        let prec = ErrorPrecision::Circulant(CirculantPrecision::from_diag_offdiag(3.0, 0.5, 6).unwrap());
        let k = shrinkage_factor_matrix(&prec, &[1.0; 6], 1e-9, 100, 1.0).unwrap();
        assert!((k - DMatrix::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn circulant_example_spectrum() {
        // N τ² s² = 1/3, λ = 1: 𝒦 = (I + Σ⁻¹/3)⁻¹, Σ⁻¹ spectrum {4,3,2,3}
        let p = CirculantPrecision::from_diag_offdiag(3.0, 0.5, 4).unwrap();
        let prec = ErrorPrecision::Circulant(p);
        let tau = (1.0f64 / 3.0).sqrt();
        let k = shrinkage_factor_matrix(&prec, &[1.0; 4], tau, 1, 1.0).unwrap();
        let dense = (DMatrix::identity(4, 4) + p.to_dense() / 3.0).try_inverse().unwrap();
        assert!((&k - dense).norm() < 1e-14);
        let mut eig: Vec<f64> = k.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for (got, want) in eig.iter().zip([3.0 / 7.0, 0.5, 0.5, 0.6]) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn m_eff_trace_arithmetic() {
        assert_eq!(m_eff(&[DMatrix::identity(3, 3), DMatrix::identity(3, 3)]), 0.0);
        let half = DMatrix::identity(2, 2) * 0.5;
        assert!((m_eff(&[half.clone(), half]) - 2.0).abs() < 1e-15);
    }

    fn orthogonal_design(n: usize, s: &[f64], rng: &mut impl Rng) -> DMatrix<f64> {
        let raw = DMatrix::from_fn(n, s.len(), |_, _| rng.random::<f64>() - 0.5);
        let q = raw.qr().q();
        DMatrix::from_fn(n, s.len(), |i, j| q[(i, j)] * (n as f64).sqrt() * s[j])
    }

    #[test]
    fn posterior_mean_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = orthogonal_design(50, &[1.0, 1.5], &mut rng);
        let y = DMatrix::from_fn(50, 2, |i, j| x[(i, 0)] * 0.7 - x[(i, 1)] * 0.2 * j as f64 + rng.random::<f64>());
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let lam = DMatrix::from_element(2, 2, 1.0);
        let (a_hat, _) = least_squares(&x, &y).unwrap();
        let wide = ShrinkageState::new(lam.clone(), 1e8, f64::INFINITY).unwrap();
        let m = conditional_posterior_mean(&x, &y, &wide, &sigma).unwrap();
        assert!((&m - &a_hat).norm() < 1e-8);
        let narrow = ShrinkageState::new(lam, 1e-9, f64::INFINITY).unwrap();
        let m = conditional_posterior_mean(&x, &y, &narrow, &sigma).unwrap();
        assert!(m.norm() < 1e-12);
    }

    #[test]
    fn singular_design_is_rank_error() {
        let x = DMatrix::from_fn(10, 2, |i, _| i as f64);
        let y = DMatrix::from_element(10, 1, 1.0);
        let st = ShrinkageState::new(DMatrix::from_element(2, 1, 1.0), 1.0, 4.0).unwrap();
        let sigma = DMatrix::identity(1, 1);
        assert!(matches!(
            conditional_posterior_mean(&x, &y, &st, &sigma),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn kronecker_and_block_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let x = orthogonal_design(50, &[1.0, 0.6], &mut rng);
            let y = DMatrix::from_fn(50, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let lam = DMatrix::from_fn(2, 2, |_, _| half_cauchy(&mut rng));
            let st = ShrinkageState::new(lam, 0.05 + rng.random::<f64>(), 3.0).unwrap();
            let sigma = DMatrix::from_row_slice(2, 2, &[1.2, -0.4, -0.4, 0.8]);
            let prec = ErrorPrecision::Dense(sigma.clone().try_inverse().unwrap());
            let full = conditional_posterior_mean(&x, &y, &st, &sigma).unwrap();
            let block = blockwise_posterior_mean(&x, &y, &st, &prec).unwrap();
            assert!((full - block).norm() < 1e-8);
        }
    }

    #[test]
    fn diagonal_prior_draws_are_u_shaped() {
        // √N τ/σ = 1: diagonal entries are Beta(1/2, 1/2).
        let prec = ErrorPrecision::Diagonal { precision: 1.0, q: 4 };
        let s = simulate_shrinkage_prior(&prec, 0.1, 100, 1.0, 100_000, 5).unwrap();
        let h = &s.diag_histogram;
        assert!(h[0] > h[4] && h[0] > h[5]);
        assert!(h[9] > h[4] && h[9] > h[5]);
        assert!(s.offdiag_quantiles.iter().all(|q| *q == 0.0));
    }

    #[test]
    fn prior_simulation_is_reproducible() {
        let prec = ErrorPrecision::Circulant(CirculantPrecision::build(2.0 * SQRT_2, SQRT_2, 6).unwrap());
        let a = simulate_shrinkage_prior(&prec, 0.05, 100, 1.0, 2000, 42).unwrap();
        let b = simulate_shrinkage_prior(&prec, 0.05, 100, 1.0, 2000, 42).unwrap();
        assert_eq!(a.diag_quantiles, b.diag_quantiles);
        assert_eq!(a.m_eff_mean.to_bits(), b.m_eff_mean.to_bits());
        let c = simulate_shrinkage_prior(&prec, 0.05, 100, 1.0, 2000, 43).unwrap();
        assert_ne!(a.m_eff_mean, c.m_eff_mean);
    }

    proptest! {
        #[test]
        fn eigenvalues_strictly_inside_unit_interval(
            v0 in 0.01f64..10.0, v1 in 0.01f64..10.0,
            tau in 1e-3f64..2.0,
            lam in proptest::collection::vec(1e-3f64..1e3, 6),
        ) {
            let prec = ErrorPrecision::Circulant(CirculantPrecision::build(v0, v1, 6).unwrap());
            let eig = shrinkage_eigenvalues(&prec, &lam, tau, 50, 1.0).unwrap();
            prop_assert!(eig.iter().all(|&e| e > 0.0 && e < 1.0));
        }

        #[test]
        fn larger_tau_never_raises_eigenvalues(
            v0 in 0.01f64..10.0, v1 in 0.01f64..10.0,
            tau in 1e-3f64..1.0, factor in 1.0f64..10.0,
            lam in proptest::collection::vec(1e-2f64..1e2, 5),
        ) {
            let prec = ErrorPrecision::Circulant(CirculantPrecision::build(v0, v1, 5).unwrap());
            let mut lo = shrinkage_eigenvalues(&prec, &lam, tau, 30, 1.0).unwrap();
            let mut hi = shrinkage_eigenvalues(&prec, &lam, tau * factor, 30, 1.0).unwrap();
            lo.sort_by(f64::total_cmp);
            hi.sort_by(f64::total_cmp);
            for (a, b) in lo.iter().zip(&hi) {
                prop_assert!(*b <= *a + 1e-12);
            }
        }

        #[test]
        fn regularised_scale_monotone_and_capped(
            l1 in 1e-3f64..1e3, dl in 1e-6f64..1e3, tau in 1e-3f64..10.0, c2 in 1e-2f64..100.0,
        ) {
            let a = regularised_local_scale(l1, tau, c2);
            let b = regularised_local_scale(l1 + dl, tau, c2);
            prop_assert!(b >= a);
            prop_assert!(a <= l1 * l1 * (1.0 + 1e-12));
            prop_assert!(a <= c2 / (tau * tau) * (1.0 + 1e-12));
        }
    }
}
