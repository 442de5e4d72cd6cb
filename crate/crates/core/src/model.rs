//! Hierarchical VAR(1) with a seasonal, covariate-driven mean.
//!
//! For bins `k = 1..K` and times `t = 2..N`,
//!
//! ```text
//! y_t = μ_t + A (y_{t−1} − μ_{t−1}) + ε_t,     ε_t ~ N_K(0, Σ),  Σ⁻¹ circulant tridiagonal
//! μ_t = α_t + Σ_j β_j sin(2πtj/52) + γ_j cos(2πtj/52)
//! α_tk = b_0k + Σ_ℓ b_ℓk x_{t−1,ℓ}
//! x_t = Φ_X x_{t−1} + η_t,                     η_t ~ N_L(0, Σ_X)
//! ```
//!
//! The first row of `y` and of `x` is conditioned on. Before `x_1` there is no
//! covariate row, so `α_1 = b_0`.
//!
//! Sampling happens on an unconstrained vector (see [`ParamLayout`]). Scales are
//! log-transformed, `Φ_X` is logit-transformed, `Σ_X` is stored as a Cholesky
//! factor with log diagonal, and `A` is non-centred: `a_ij = τ λ̃_ij z_ij`.
//! Missing cells of `y` and `x` are latent coordinates.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::circulant::{spectrum, CirculantPrecision};
use crate::data_io::SeriesTable;
use crate::error::{Error, Result};
use crate::shrinkage::{self, ErrorPrecision};
use crate::stats::LN_2PI;

/// Prior hyperparameters and mean-structure settings. Every field can be
/// overridden from JSON; missing fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Number of harmonic pairs in the seasonal mean.
    pub harmonics: usize,
    /// Seasonal period in time steps.
    pub period: f64,
    /// Prior guess of the number of non-zero entries of `A`; defaults to `K`.
    pub e0: Option<f64>,
    /// Coefficient of variation of the gamma priors on `ϖ₀, ϖ₁`.
    pub precision_prior_cv: f64,
    /// `log σ ~ N(mean, sd²)`.
    pub sigma_log_mean: f64,
    pub sigma_log_sd: f64,
    /// `μ_Bℓ ~ N(mean, sd²)`.
    pub intercept_mean_mean: f64,
    pub intercept_mean_sd: f64,
    /// `σ²_Bℓ ~ IG(shape, scale)`.
    pub intercept_var_shape: f64,
    pub intercept_var_scale: f64,
    /// `φ_ℓ ~ Beta(a, b)`.
    pub ar_beta_a: f64,
    pub ar_beta_b: f64,
    /// Inverse-Wishart scale matrix for `Σ_X`; identity when absent.
    pub covariate_cov_scale: Option<Vec<Vec<f64>>>,
    /// Inverse-Wishart degrees of freedom; `L + 4` when absent.
    pub covariate_cov_dof: Option<f64>,
    /// Prior variance of each harmonic coefficient.
    pub harmonic_prior_var: f64,
    /// `c² ~ IG(shape, scale)`.
    pub slab_shape: f64,
    pub slab_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            harmonics: 2,
            period: 52.0,
            e0: None,
            precision_prior_cv: 1.0,
            sigma_log_mean: 0.0,
            sigma_log_sd: 10f64.sqrt(),
            intercept_mean_mean: 0.0,
            intercept_mean_sd: 95f64.sqrt(),
            intercept_var_shape: 2.25,
            intercept_var_scale: 6.25,
            ar_beta_a: 2.0,
            ar_beta_b: 2.0,
            covariate_cov_scale: None,
            covariate_cov_dof: None,
            harmonic_prior_var: 100.0,
            slab_shape: 2.0,
            slab_scale: 8.0,
        }
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn e0_for(&self, k: usize) -> f64 {
        self.e0.unwrap_or(k as f64)
    }

    pub fn dof_for(&self, l: usize) -> f64 {
        self.covariate_cov_dof.unwrap_or(l as f64 + 4.0)
    }

    pub fn scale_matrix_for(&self, l: usize) -> Result<DMatrix<f64>> {
        match &self.covariate_cov_scale {
            None => Ok(DMatrix::identity(l, l)),
            Some(rows) => {
                if rows.len() != l || rows.iter().any(|r| r.len() != l) {
                    return Err(Error::Dimension(format!(
                        "covariate_cov_scale must be {l}x{l}"
                    )));
                }
                Ok(DMatrix::from_fn(l, l, |i, j| rows[i][j]))
            }
        }
    }

    /// Checks the configuration against data dimensions.
    pub fn validate(&self, k: usize, l: usize) -> Result<()> {
        let positive = [
            ("period", self.period),
            ("precision_prior_cv", self.precision_prior_cv),
            ("sigma_log_sd", self.sigma_log_sd),
            ("intercept_mean_sd", self.intercept_mean_sd),
            ("intercept_var_shape", self.intercept_var_shape),
            ("intercept_var_scale", self.intercept_var_scale),
            ("ar_beta_a", self.ar_beta_a),
            ("ar_beta_b", self.ar_beta_b),
            ("harmonic_prior_var", self.harmonic_prior_var),
            ("slab_shape", self.slab_shape),
            ("slab_scale", self.slab_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.harmonics == 0 {
            return Err(Error::Domain("at least one harmonic is required".into()));
        }
        if k < 3 {
            return Err(Error::Domain(format!("need K >= 3 bins, got {k}")));
        }
        let e0 = self.e0_for(k);
        if !(e0 > 0.0 && e0 < (k * k) as f64) {
            return Err(Error::Domain(format!("e0 = {e0} outside (0, {})", k * k)));
        }
        if l > 0 {
            let dof = self.dof_for(l);
            if !(dof > l as f64 + 1.0) {
                return Err(Error::Domain(format!(
                    "covariate_cov_dof = {dof} must exceed L + 1 = {}",
                    l + 1
                )));
            }
            let s = self.scale_matrix_for(l)?;
            if s.cholesky().is_none() {
                return Err(Error::Domain("covariate_cov_scale is not positive definite".into()));
            }
        }
        Ok(())
    }
}

/// Observed series ready for fitting.
#[derive(Debug, Clone)]
pub struct ModelData {
    /// `N × K`, `NaN` where missing.
    pub y: DMatrix<f64>,
    pub y_missing: DMatrix<bool>,
    /// `N × L`, `NaN` where missing.
    pub x: DMatrix<f64>,
    pub x_missing: DMatrix<bool>,
    pub bin_names: Vec<String>,
    pub covariate_names: Vec<String>,
    /// Index of the first retained row in the source tables.
    pub row_offset: usize,
}

impl ModelData {
    /// Aligns the covariates to the bin timestamps and drops leading rows until
    /// both the first `y` row and the first `x` row are fully observed.
    pub fn new(bins: &SeriesTable, covariates: Option<&SeriesTable>) -> Result<Self> {
        let x_table = match covariates {
            Some(c) => Some(c.align_to(bins.timestamps())?),
            None => None,
        };
        let complete = |t: usize| {
            (0..bins.ncols()).all(|k| !bins.is_missing(t, k))
                && x_table
                    .as_ref()
                    .is_none_or(|x| (0..x.ncols()).all(|l| !x.is_missing(t, l)))
        };
        let first = (0..bins.nrows())
            .find(|&t| complete(t))
            .ok_or_else(|| Error::Domain("no fully observed row to condition on".into()))?;
        if first > 0 {
            log::info!("dropping {first} leading row(s) before the first complete observation");
        }
        let n = bins.nrows() - first;
        if n < 3 {
            return Err(Error::Domain(format!("need at least 3 time points, got {n}")));
        }
        let k = bins.ncols();
        let y = bins.values().rows(first, n).into_owned();
        let y_missing = bins.missing().rows(first, n).into_owned();
        let (x, x_missing, covariate_names) = match &x_table {
            Some(xt) => (
                xt.values().rows(first, n).into_owned(),
                xt.missing().rows(first, n).into_owned(),
                xt.columns().to_vec(),
            ),
            None => (DMatrix::zeros(n, 0), DMatrix::from_element(n, 0, false), Vec::new()),
        };
        debug_assert_eq!(y.ncols(), k);
        Ok(Self {
            y,
            y_missing,
            x,
            x_missing,
            bin_names: bins.columns().to_vec(),
            covariate_names,
            row_offset: first,
        })
    }

    /// Builds directly from matrices; `NaN` marks missing cells.
    pub fn from_matrices(y: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::Dimension(format!(
                "y has {} rows, x has {}",
                y.nrows(),
                x.nrows()
            )));
        }
        let y_missing = y.map(|v| v.is_nan());
        let x_missing = x.map(|v| v.is_nan());
        let bin_names = (1..=y.ncols()).map(|k| format!("bin_{k}")).collect();
        let covariate_names = (1..=x.ncols()).map(|l| format!("x{l}")).collect();
        Ok(Self {
            y,
            y_missing,
            x,
            x_missing,
            bin_names,
            covariate_names,
            row_offset: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn k(&self) -> usize {
        self.y.ncols()
    }

    pub fn l(&self) -> usize {
        self.x.ncols()
    }

    /// One-based time index of row `t`, used by the harmonic terms.
    pub fn time_index(&self, t: usize) -> f64 {
        (self.row_offset + t + 1) as f64
    }
}

/// Offsets of each parameter block in the unconstrained vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub k: usize,
    pub l: usize,
    pub harmonics: usize,
    /// `K²` non-centred coefficients, row-major.
    pub z: usize,
    /// `K²` log local scales, row-major.
    pub log_lambda: usize,
    pub log_tau: usize,
    pub log_c2: usize,
    pub log_varpi0: usize,
    pub log_varpi1: usize,
    pub log_sigma: usize,
    /// `J × K`, row-major by harmonic.
    pub beta: usize,
    pub gamma: usize,
    /// `(L+1) × K`, row 0 is the intercept.
    pub b: usize,
    pub mu_b: usize,
    pub log_sigma2_b: usize,
    pub logit_phi: usize,
    /// Lower-triangular Cholesky factor of `Σ_X`, row-major, log diagonal.
    pub chol: usize,
    pub y_latent: usize,
    pub x_latent: usize,
    pub dim: usize,
}

impl ParamLayout {
    pub fn new(k: usize, l: usize, harmonics: usize, y_latent: usize, x_latent: usize) -> Self {
        let kk = k * k;
        let z = 0;
        let log_lambda = z + kk;
        let log_tau = log_lambda + kk;
        let log_c2 = log_tau + 1;
        let log_varpi0 = log_c2 + 1;
        let log_varpi1 = log_varpi0 + 1;
        let log_sigma = log_varpi1 + 1;
        let beta = log_sigma + 1;
        let gamma = beta + harmonics * k;
        let b = gamma + harmonics * k;
        let mu_b = b + (l + 1) * k;
        let log_sigma2_b = mu_b + l + 1;
        let logit_phi = log_sigma2_b + l + 1;
        let chol = logit_phi + l;
        let yl = chol + l * (l + 1) / 2;
        let xl = yl + y_latent;
        Self {
            k,
            l,
            harmonics,
            z,
            log_lambda,
            log_tau,
            log_c2,
            log_varpi0,
            log_varpi1,
            log_sigma,
            beta,
            gamma,
            b,
            mu_b,
            log_sigma2_b,
            logit_phi,
            chol,
            y_latent: yl,
            x_latent: xl,
            dim: xl + x_latent,
        }
    }

    /// Position of `(i, j)`, `j ≤ i`, in the packed Cholesky block.
    pub fn chol_index(&self, i: usize, j: usize) -> usize {
        self.chol + i * (i + 1) / 2 + j
    }
}

/// Model parameters on their natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub z: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub tau: f64,
    pub c2: f64,
    pub varpi0: f64,
    pub varpi1: f64,
    pub sigma: f64,
    pub beta: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub mu_b: Vec<f64>,
    pub sigma2_b: Vec<f64>,
    pub phi_x: Vec<f64>,
    /// Lower-triangular with positive diagonal.
    pub sigma_x_chol: DMatrix<f64>,
    /// Latent values in the model's cell order.
    pub y_latent: Vec<f64>,
    pub x_latent: Vec<f64>,
}

impl Params {
    /// `a_ij = τ λ̃_ij z_ij`.
    pub fn a(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.z.nrows(), self.z.ncols(), |i, j| {
            self.tau
                * shrinkage::regularised_local_scale(self.lambda[(i, j)], self.tau, self.c2).sqrt()
                * self.z[(i, j)]
        })
    }

    pub fn precision(&self) -> Result<CirculantPrecision> {
        CirculantPrecision::build(self.varpi0, self.varpi1, self.z.nrows())
    }

    pub fn sigma_x(&self) -> DMatrix<f64> {
        &self.sigma_x_chol * self.sigma_x_chol.transpose()
    }
}

/// Selects which terms of the log posterior are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub likelihood: bool,
    pub prior: bool,
    pub missing_model: bool,
}

impl Terms {
    pub const ALL: Terms = Terms {
        likelihood: true,
        prior: true,
        missing_model: true,
    };
    pub const LIKELIHOOD: Terms = Terms {
        likelihood: true,
        prior: false,
        missing_model: false,
    };
    pub const PRIOR: Terms = Terms {
        likelihood: false,
        prior: true,
        missing_model: false,
    };
    pub const MISSING_MODEL: Terms = Terms {
        likelihood: false,
        prior: false,
        missing_model: true,
    };
}

/// `μ_t = b₀ + Σ_ℓ b_ℓ x_{t−1,ℓ} + Σ_j β_j sin(2πtj/period) + γ_j cos(2πtj/period)`.
///
/// `beta` and `gamma` are `J × K`, `b` is `(L+1) × K` with the intercept in row 0
/// and `x_prev` has length `L`.
pub fn mean_at(
    t: f64,
    period: f64,
    beta: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x_prev: &[f64],
) -> Result<DVector<f64>> {
    let k = b.ncols();
    if beta.ncols() != k || gamma.shape() != beta.shape() || b.nrows() != x_prev.len() + 1 {
        return Err(Error::Dimension(format!(
            "beta {:?}, gamma {:?}, b {:?}, x_prev {}",
            beta.shape(),
            gamma.shape(),
            b.shape(),
            x_prev.len()
        )));
    }
    let mut mu = DVector::from_fn(k, |c, _| b[(0, c)]);
    for (l, x) in x_prev.iter().enumerate() {
        for c in 0..k {
            mu[c] += b[(l + 1, c)] * x;
        }
    }
    for j in 0..beta.nrows() {
        let angle = 2.0 * PI * t * (j + 1) as f64 / period;
        let (s, co) = angle.sin_cos();
        for c in 0..k {
            mu[c] += beta[(j, c)] * s + gamma[(j, c)] * co;
        }
    }
    Ok(mu)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log Γ_p(a)`
fn ln_multigamma(p: usize, a: f64) -> f64 {
    (p * p.saturating_sub(1)) as f64 / 4.0 * PI.ln()
        + (0..p).map(|i| ln_gamma(a - i as f64 / 2.0)).sum::<f64>()
}

/// `-(c/2) log|Σ| − ½ tr(Σ⁻¹ M)` for `Σ = LLᵀ`, with its gradient in `L`.
fn wishart_like_terms(chol: &DMatrix<f64>, m: &DMatrix<f64>, c: f64) -> (f64, DMatrix<f64>) {
    let l = chol.nrows();
    let ident = DMatrix::<f64>::identity(l, l);
    if (0..l).any(|i| !(chol[(i, i)] > 0.0 && chol[(i, i)].is_finite())) {
        return (f64::NEG_INFINITY, DMatrix::zeros(l, l));
    }
    let Some(chol_inv) = chol.solve_lower_triangular(&ident) else {
        return (f64::NEG_INFINITY, DMatrix::zeros(l, l));
    };
    let sigma_inv = chol_inv.transpose() * &chol_inv;
    let log_det: f64 = (0..l).map(|i| 2.0 * chol[(i, i)].ln()).sum();
    let value = -0.5 * c * log_det - 0.5 * (&sigma_inv * m).trace();
    let mut grad = &sigma_inv * m * &sigma_inv * chol;
    for i in 0..l {
        grad[(i, i)] -= c / chol[(i, i)];
    }
    (value, grad)
}

/// The posterior target.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    data: ModelData,
    layout: ParamLayout,
    y_cells: Vec<(usize, usize)>,
    x_cells: Vec<(usize, usize)>,
    sin_table: DMatrix<f64>,
    cos_table: DMatrix<f64>,
    log_tau0_offset: f64,
    iw_scale: DMatrix<f64>,
    iw_log_det_scale: f64,
}

impl Model {
    pub fn new(config: ModelConfig, data: ModelData) -> Result<Self> {
        let (k, l, n) = (data.k(), data.l(), data.n());
        config.validate(k, l)?;
        if n < 3 {
            return Err(Error::Domain(format!("need at least 3 time points, got {n}")));
        }
        if (0..k).any(|c| data.y_missing[(0, c)]) || (0..l).any(|c| data.x_missing[(0, c)]) {
            return Err(Error::Domain("the first row must be fully observed".into()));
        }
        let cells = |mask: &DMatrix<bool>| {
            let mut out = Vec::new();
            for t in 0..mask.nrows() {
                for c in 0..mask.ncols() {
                    if mask[(t, c)] {
                        out.push((t, c));
                    }
                }
            }
            out
        };
        let y_cells = cells(&data.y_missing);
        let x_cells = cells(&data.x_missing);
        let j = config.harmonics;
        let layout = ParamLayout::new(k, l, j, y_cells.len(), x_cells.len());
        let angle = |t: usize, h: usize| 2.0 * PI * data.time_index(t) * (h + 1) as f64 / config.period;
        let sin_table = DMatrix::from_fn(n, j, |t, h| angle(t, h).sin());
        let cos_table = DMatrix::from_fn(n, j, |t, h| angle(t, h).cos());
        let e0 = config.e0_for(k);
        let pq = (k * k) as f64;
        let log_tau0_offset = (e0 / (pq - e0)).ln() - 0.5 * (n as f64).ln();
        let iw_scale = config.scale_matrix_for(l)?;
        let iw_log_det_scale = if l > 0 {
            iw_scale.clone().cholesky().map(|c| 2.0 * c.l().diagonal().map(f64::ln).sum()).unwrap_or(0.0)
        } else {
            0.0
        };
        Ok(Self {
            config,
            data,
            layout,
            y_cells,
            x_cells,
            sin_table,
            cos_table,
            log_tau0_offset,
            iw_scale,
            iw_log_det_scale,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn data(&self) -> &ModelData {
        &self.data
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    /// Cells `(row, bin)` of `y` held as latent coordinates, in storage order.
    pub fn y_latent_cells(&self) -> &[(usize, usize)] {
        &self.y_cells
    }

    pub fn x_latent_cells(&self) -> &[(usize, usize)] {
        &self.x_cells
    }

    /// `τ₀` implied by `σ`.
    pub fn tau0(&self, sigma: f64) -> f64 {
        (self.log_tau0_offset).exp() * sigma
    }

    pub fn constrain(&self, u: &[f64]) -> Params {
        let ly = &self.layout;
        let (k, l, j) = (ly.k, ly.l, ly.harmonics);
        let mat = |off: usize, r: usize, c: usize, f: fn(f64) -> f64| {
            DMatrix::from_fn(r, c, |i, jj| f(u[off + i * c + jj]))
        };
        let id = |v: f64| v;
        let mut chol = DMatrix::<f64>::zeros(l, l);
        for i in 0..l {
            for jj in 0..=i {
                let v = u[ly.chol_index(i, jj)];
                chol[(i, jj)] = if i == jj { v.exp() } else { v };
            }
        }
        Params {
            z: mat(ly.z, k, k, id),
            lambda: mat(ly.log_lambda, k, k, f64::exp),
            tau: u[ly.log_tau].exp(),
            c2: u[ly.log_c2].exp(),
            varpi0: u[ly.log_varpi0].exp(),
            varpi1: u[ly.log_varpi1].exp(),
            sigma: u[ly.log_sigma].exp(),
            beta: mat(ly.beta, j, k, id),
            gamma: mat(ly.gamma, j, k, id),
            b: mat(ly.b, l + 1, k, id),
            mu_b: u[ly.mu_b..ly.mu_b + l + 1].to_vec(),
            sigma2_b: u[ly.log_sigma2_b..ly.log_sigma2_b + l + 1]
                .iter()
                .map(|v| v.exp())
                .collect(),
            phi_x: u[ly.logit_phi..ly.logit_phi + l].iter().map(|&v| sigmoid(v)).collect(),
            sigma_x_chol: chol,
            y_latent: u[ly.y_latent..ly.x_latent].to_vec(),
            x_latent: u[ly.x_latent..ly.dim].to_vec(),
        }
    }

    pub fn unconstrain(&self, p: &Params) -> Result<Vec<f64>> {
        let ly = &self.layout;
        let (k, l, j) = (ly.k, ly.l, ly.harmonics);
        let shape_ok = p.z.shape() == (k, k)
            && p.lambda.shape() == (k, k)
            && p.beta.shape() == (j, k)
            && p.gamma.shape() == (j, k)
            && p.b.shape() == (l + 1, k)
            && p.mu_b.len() == l + 1
            && p.sigma2_b.len() == l + 1
            && p.phi_x.len() == l
            && p.sigma_x_chol.shape() == (l, l)
            && p.y_latent.len() == self.y_cells.len()
            && p.x_latent.len() == self.x_cells.len();
        if !shape_ok {
            return Err(Error::Dimension("parameter shapes do not match the model".into()));
        }
        let mut u = vec![0.0; ly.dim];
        for i in 0..k {
            for jj in 0..k {
                u[ly.z + i * k + jj] = p.z[(i, jj)];
                u[ly.log_lambda + i * k + jj] = p.lambda[(i, jj)].ln();
            }
        }
        u[ly.log_tau] = p.tau.ln();
        u[ly.log_c2] = p.c2.ln();
        u[ly.log_varpi0] = p.varpi0.ln();
        u[ly.log_varpi1] = p.varpi1.ln();
        u[ly.log_sigma] = p.sigma.ln();
        for h in 0..j {
            for c in 0..k {
                u[ly.beta + h * k + c] = p.beta[(h, c)];
                u[ly.gamma + h * k + c] = p.gamma[(h, c)];
            }
        }
        for r in 0..=l {
            for c in 0..k {
                u[ly.b + r * k + c] = p.b[(r, c)];
            }
            u[ly.mu_b + r] = p.mu_b[r];
            u[ly.log_sigma2_b + r] = p.sigma2_b[r].ln();
        }
        for r in 0..l {
            let phi = p.phi_x[r];
            u[ly.logit_phi + r] = (phi / (1.0 - phi)).ln();
            for c in 0..=r {
                let v = p.sigma_x_chol[(r, c)];
                u[ly.chol_index(r, c)] = if r == c { v.ln() } else { v };
            }
        }
        u[ly.y_latent..ly.x_latent].copy_from_slice(&p.y_latent);
        u[ly.x_latent..].copy_from_slice(&p.x_latent);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("parameters outside their support".into()));
        }
        Ok(u)
    }

    /// `y` with latent cells filled from `u`.
    pub fn filled_y(&self, u: &[f64]) -> DMatrix<f64> {
        let mut y = self.data.y.clone();
        for (i, &(t, c)) in self.y_cells.iter().enumerate() {
            y[(t, c)] = u[self.layout.y_latent + i];
        }
        y
    }

    pub fn filled_x(&self, u: &[f64]) -> DMatrix<f64> {
        let mut x = self.data.x.clone();
        for (i, &(t, c)) in self.x_cells.iter().enumerate() {
            x[(t, c)] = u[self.layout.x_latent + i];
        }
        x
    }

    /// `N × K` matrix of `μ_t`.
    pub fn mean_matrix(&self, p: &Params, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, k, l) = (self.data.n(), self.layout.k, self.layout.l);
        let harm = &self.sin_table * &p.beta + &self.cos_table * &p.gamma;
        DMatrix::from_fn(n, k, |t, c| {
            let mut m = p.b[(0, c)] + harm[(t, c)];
            if t > 0 {
                for r in 0..l {
                    m += p.b[(r + 1, c)] * x[(t - 1, r)];
                }
            }
            m
        })
    }

    /// One-step residuals `r_t = d_t − A d_{t−1}`, `d = y − μ`, for `t = 2..N`
    /// (row `t − 2` of the result).
    pub fn residuals(&self, u: &[f64]) -> DMatrix<f64> {
        let p = self.constrain(u);
        let y = self.filled_y(u);
        let x = self.filled_x(u);
        let d = &y - self.mean_matrix(&p, &x);
        let n = d.nrows();
        d.rows(1, n - 1) - d.rows(0, n - 1) * p.a().transpose()
    }

    pub fn log_likelihood(&self, u: &[f64]) -> f64 {
        self.evaluate(u, Terms::LIKELIHOOD, None)
    }

    /// Prior densities on the constrained scale plus the log-Jacobian of the
    /// unconstrained parameterisation.
    pub fn log_prior(&self, u: &[f64]) -> f64 {
        self.evaluate(u, Terms::PRIOR, None)
    }

    pub fn log_missing_model(&self, u: &[f64]) -> f64 {
        self.evaluate(u, Terms::MISSING_MODEL, None)
    }

    pub fn log_posterior(&self, u: &[f64]) -> f64 {
        self.evaluate(u, Terms::ALL, None)
    }

    pub fn log_posterior_and_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.layout.dim];
        let v = self.evaluate(u, Terms::ALL, Some(&mut g));
        (v, g)
    }

    /// Evaluates the selected terms; when `grad` is given, their gradient is
    /// accumulated into it.
    pub fn evaluate(&self, u: &[f64], terms: Terms, grad: Option<&mut [f64]>) -> f64 {
        assert_eq!(u.len(), self.layout.dim, "state has the wrong dimension");
        let mut scratch;
        let g: &mut [f64] = match grad {
            Some(g) => g,
            None => {
                scratch = vec![0.0; self.layout.dim];
                &mut scratch
            }
        };
        let ly = &self.layout;
        let (k, l, n) = (ly.k, ly.l, self.data.n());
        let p = self.constrain(u);

        // Non-centred A and the derivatives of log λ̃ in log λ, log τ, log c².
        let log_tau = u[ly.log_tau];
        let log_c2 = u[ly.log_c2];
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut shrink = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let log_lambda = u[ly.log_lambda + i * k + j];
                let log_w = 2.0 * log_tau + 2.0 * log_lambda - log_c2;
                let log_scale = log_lambda - 0.5 * softplus(log_w);
                a[(i, j)] = (log_tau + log_scale).exp() * p.z[(i, j)];
                shrink[(i, j)] = sigmoid(-log_w);
            }
        }

        let mut value = 0.0;
        if terms.likelihood {
            value += self.likelihood_terms(u, &p, &a, &shrink, g);
        }
        if terms.missing_model && l > 0 {
            value += self.missing_model_terms(u, &p, g);
        }
        if terms.prior {
            value += self.prior_terms(u, &p, g);
        }
        debug_assert!(n >= 3);
        if value.is_nan() {
            f64::NEG_INFINITY
        } else {
            value
        }
    }

    fn likelihood_terms(
        &self,
        u: &[f64],
        p: &Params,
        a: &DMatrix<f64>,
        shrink: &DMatrix<f64>,
        g: &mut [f64],
    ) -> f64 {
        let ly = &self.layout;
        let (k, l, n) = (ly.k, ly.l, self.data.n());
        let y = self.filled_y(u);
        let x = self.filled_x(u);
        let mu = self.mean_matrix(p, &x);
        let d = &y - &mu;
        let r = d.rows(1, n - 1) - d.rows(0, n - 1) * a.transpose();

        let diag = (p.varpi0 + p.varpi1) / SQRT_2;
        let off = (p.varpi0 - p.varpi1) / (2.0 * SQRT_2);
        let eig = spectrum(diag, off, k);
        let log_det: f64 = eig.iter().map(|e| e.ln()).sum();
        let (mut sum_sq, mut sum_adj) = (0.0, 0.0);
        let mut gr = DMatrix::<f64>::zeros(n - 1, k);
        for t in 0..n - 1 {
            for c in 0..k {
                let v = r[(t, c)];
                let next = r[(t, (c + 1) % k)];
                let prev = r[(t, (c + k - 1) % k)];
                sum_sq += v * v;
                sum_adj += v * next;
                gr[(t, c)] = diag * v + off * (next + prev);
            }
        }
        let m = (n - 1) as f64;
        let value = -0.5 * m * k as f64 * LN_2PI + 0.5 * m * log_det
            - 0.5 * (diag * sum_sq + 2.0 * off * sum_adj);

        // Precision parameters.
        let inv_sum: f64 = eig.iter().map(|e| 1.0 / e).sum();
        let cos_sum: f64 = eig
            .iter()
            .enumerate()
            .map(|(i, e)| 2.0 * (2.0 * PI * i as f64 / k as f64).cos() / e)
            .sum();
        let g_diag = 0.5 * m * inv_sum - 0.5 * sum_sq;
        let g_off = 0.5 * m * cos_sum - sum_adj;
        g[ly.log_varpi0] += p.varpi0 * (g_diag / SQRT_2 + g_off / (2.0 * SQRT_2));
        g[ly.log_varpi1] += p.varpi1 * (g_diag / SQRT_2 - g_off / (2.0 * SQRT_2));

        // A: dℓ/dA = Σ_t g_t d_{t−1}ᵀ.
        let ga = gr.transpose() * d.rows(0, n - 1);
        let mut g_log_tau = 0.0;
        let mut g_log_c2 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let gij = ga[(i, j)];
                let idx = i * k + j;
                let zij = p.z[(i, j)];
                if zij != 0.0 {
                    g[ly.z + idx] += gij * a[(i, j)] / zij;
                } else {
                    let log_lambda = u[ly.log_lambda + idx];
                    let log_w = 2.0 * u[ly.log_tau] + 2.0 * log_lambda - u[ly.log_c2];
                    g[ly.z + idx] += gij * (u[ly.log_tau] + log_lambda - 0.5 * softplus(log_w)).exp();
                }
                let ga_a = gij * a[(i, j)];
                let s = shrink[(i, j)];
                g[ly.log_lambda + idx] += ga_a * s;
                g_log_tau += ga_a * s;
                g_log_c2 += ga_a * 0.5 * (1.0 - s);
            }
        }
        g[ly.log_tau] += g_log_tau;
        g[ly.log_c2] += g_log_c2;

        // dℓ/dd_t = −g_t + Aᵀ g_{t+1}.
        let mut h = DMatrix::<f64>::zeros(n, k);
        for t in 1..n {
            for c in 0..k {
                h[(t, c)] -= gr[(t - 1, c)];
            }
        }
        let back = &gr * a;
        for t in 0..n - 1 {
            for c in 0..k {
                h[(t, c)] += back[(t, c)];
            }
        }
        for (i, &(t, c)) in self.y_cells.iter().enumerate() {
            g[ly.y_latent + i] += h[(t, c)];
        }
        // μ depends on b, β, γ and x.
        for c in 0..k {
            let mut gb0 = 0.0;
            for t in 0..n {
                gb0 -= h[(t, c)];
            }
            g[ly.b + c] += gb0;
            for hh in 0..ly.harmonics {
                let (mut gs, mut gc) = (0.0, 0.0);
                for t in 0..n {
                    gs -= h[(t, c)] * self.sin_table[(t, hh)];
                    gc -= h[(t, c)] * self.cos_table[(t, hh)];
                }
                g[ly.beta + hh * k + c] += gs;
                g[ly.gamma + hh * k + c] += gc;
            }
            for rr in 0..l {
                let mut gbl = 0.0;
                for t in 1..n {
                    gbl -= h[(t, c)] * x[(t - 1, rr)];
                }
                g[ly.b + (rr + 1) * k + c] += gbl;
            }
        }
        for (i, &(t, rr)) in self.x_cells.iter().enumerate() {
            if t + 1 < n {
                let mut gx = 0.0;
                for c in 0..k {
                    gx -= h[(t + 1, c)] * p.b[(rr + 1, c)];
                }
                g[ly.x_latent + i] += gx;
            }
        }
        value
    }

    fn missing_model_terms(&self, u: &[f64], p: &Params, g: &mut [f64]) -> f64 {
        let ly = &self.layout;
        let (l, n) = (ly.l, self.data.n());
        let x = self.filled_x(u);
        let e = DMatrix::from_fn(n - 1, l, |t, r| x[(t + 1, r)] - p.phi_x[r] * x[(t, r)]);
        let scatter = e.transpose() * &e;
        let (v, gl) = wishart_like_terms(&p.sigma_x_chol, &scatter, (n - 1) as f64);
        if v == f64::NEG_INFINITY {
            return v;
        }
        let value = v - 0.5 * ((n - 1) * l) as f64 * LN_2PI;
        self.add_chol_grad(&p.sigma_x_chol, &gl, g);

        let chol = &p.sigma_x_chol;
        let ident = DMatrix::<f64>::identity(l, l);
        let Some(chol_inv) = chol.solve_lower_triangular(&ident) else {
            return f64::NEG_INFINITY;
        };
        let w = chol_inv.transpose() * chol_inv;
        let q = &e * &w;
        let mut gx = DMatrix::<f64>::zeros(n, l);
        for t in 0..n - 1 {
            for r in 0..l {
                gx[(t + 1, r)] -= q[(t, r)];
                gx[(t, r)] += p.phi_x[r] * q[(t, r)];
            }
        }
        for r in 0..l {
            let mut gphi = 0.0;
            for t in 0..n - 1 {
                gphi += q[(t, r)] * x[(t, r)];
            }
            let phi = p.phi_x[r];
            g[ly.logit_phi + r] += gphi * phi * (1.0 - phi);
        }
        for (i, &(t, r)) in self.x_cells.iter().enumerate() {
            g[ly.x_latent + i] += gx[(t, r)];
        }
        value
    }

    fn add_chol_grad(&self, chol: &DMatrix<f64>, gl: &DMatrix<f64>, g: &mut [f64]) {
        let ly = &self.layout;
        for i in 0..ly.l {
            for j in 0..=i {
                let idx = ly.chol_index(i, j);
                g[idx] += if i == j { gl[(i, i)] * chol[(i, i)] } else { gl[(i, j)] };
            }
        }
    }

    fn prior_terms(&self, u: &[f64], p: &Params, g: &mut [f64]) -> f64 {
        let ly = &self.layout;
        let cfg = &self.config;
        let (k, l) = (ly.k, ly.l);
        let ln_half_cauchy = (2.0 / PI).ln();
        let mut value = 0.0;

        // z ~ N(0, 1), λ ~ C⁺(0, 1).
        for idx in 0..k * k {
            let z = u[ly.z + idx];
            value += -0.5 * LN_2PI - 0.5 * z * z;
            g[ly.z + idx] -= z;
            let ul = u[ly.log_lambda + idx];
            value += ln_half_cauchy - softplus(2.0 * ul) + ul;
            g[ly.log_lambda + idx] += 1.0 - 2.0 * sigmoid(2.0 * ul);
        }

        // τ | σ ~ C⁺(0, τ₀(σ)).
        let log_sigma = u[ly.log_sigma];
        let log_tau0 = self.log_tau0_offset + log_sigma;
        let log_ratio = u[ly.log_tau] - log_tau0;
        value += ln_half_cauchy - log_tau0 - softplus(2.0 * log_ratio) + u[ly.log_tau];
        let dr = 1.0 - 2.0 * sigmoid(2.0 * log_ratio);
        g[ly.log_tau] += dr;
        g[ly.log_sigma] -= dr;

        // c² ~ IG(shape, scale).
        let (sa, sb) = (cfg.slab_shape, cfg.slab_scale);
        let uc = u[ly.log_c2];
        value += sa * sb.ln() - ln_gamma(sa) - sa * uc - sb * (-uc).exp();
        g[ly.log_c2] += -sa + sb * (-uc).exp();

        // ϖ_i | σ ~ Gamma(1/cv², √2σ²/cv²).
        let cv2 = cfg.precision_prior_cv * cfg.precision_prior_cv;
        let shape = 1.0 / cv2;
        let log_rate = 0.5 * 2f64.ln() + 2.0 * log_sigma - cv2.ln();
        let rate = log_rate.exp();
        for (off, varpi) in [(ly.log_varpi0, p.varpi0), (ly.log_varpi1, p.varpi1)] {
            let uv = u[off];
            value += shape * log_rate - ln_gamma(shape) + shape * uv - rate * varpi;
            g[off] += shape - rate * varpi;
            g[ly.log_sigma] += 2.0 * shape - 2.0 * rate * varpi;
        }

        // log σ ~ N(m, s²).
        let (m, s) = (cfg.sigma_log_mean, cfg.sigma_log_sd);
        value += -0.5 * LN_2PI - s.ln() - 0.5 * ((log_sigma - m) / s).powi(2);
        g[ly.log_sigma] -= (log_sigma - m) / (s * s);

        // Harmonic coefficients.
        let hv = cfg.harmonic_prior_var;
        for off in [ly.beta, ly.gamma] {
            for i in 0..ly.harmonics * k {
                let v = u[off + i];
                value += -0.5 * (LN_2PI + hv.ln()) - 0.5 * v * v / hv;
                g[off + i] -= v / hv;
            }
        }

        // Hierarchical covariate coefficients.
        let (am, asd) = (cfg.intercept_mean_mean, cfg.intercept_mean_sd);
        let (ca, da) = (cfg.intercept_var_shape, cfg.intercept_var_scale);
        for r in 0..=l {
            let mu = p.mu_b[r];
            let us = u[ly.log_sigma2_b + r];
            let var = p.sigma2_b[r];
            let mut g_mu = 0.0;
            let mut g_us = 0.0;
            for c in 0..k {
                let bv = p.b[(r, c)];
                let dv = bv - mu;
                value += -0.5 * (LN_2PI + us) - 0.5 * dv * dv / var;
                g[ly.b + r * k + c] -= dv / var;
                g_mu += dv / var;
                g_us += -0.5 + 0.5 * dv * dv / var;
            }
            value += -0.5 * LN_2PI - asd.ln() - 0.5 * ((mu - am) / asd).powi(2);
            g_mu -= (mu - am) / (asd * asd);
            value += ca * da.ln() - ln_gamma(ca) - ca * us - da * (-us).exp();
            g_us += -ca + da * (-us).exp();
            g[ly.mu_b + r] += g_mu;
            g[ly.log_sigma2_b + r] += g_us;
        }

        if l > 0 {
            // φ_ℓ ~ Beta(a, b) with logit Jacobian.
            let (ba, bb) = (cfg.ar_beta_a, cfg.ar_beta_b);
            let ln_beta_fn = ln_gamma(ba) + ln_gamma(bb) - ln_gamma(ba + bb);
            for r in 0..l {
                let v = u[ly.logit_phi + r];
                let phi = p.phi_x[r];
                // log φ = −softplus(−v), log(1 − φ) = −softplus(v)
                value += -ba * softplus(-v) - bb * softplus(v) - ln_beta_fn;
                g[ly.logit_phi + r] += ba * (1.0 - phi) - bb * phi;
            }

            // Σ_X ~ IW(S, ν) with the Cholesky/log-diagonal Jacobian.
            let nu = cfg.dof_for(l);
            let lf = l as f64;
            let (v, gl) = wishart_like_terms(&p.sigma_x_chol, &self.iw_scale, nu + lf + 1.0);
            value += v + 0.5 * nu * self.iw_log_det_scale
                - 0.5 * nu * lf * 2f64.ln()
                - ln_multigamma(l, 0.5 * nu);
            self.add_chol_grad(&p.sigma_x_chol, &gl, g);
            value += lf * 2f64.ln();
            for i in 0..l {
                let w = (l - i + 1) as f64;
                value += w * u[ly.chol_index(i, i)];
                g[ly.chol_index(i, i)] += w;
            }
        }
        value
    }

    /// Starting point near prior-plausible values, jittered uniformly by
    /// `±jitter` on the unconstrained scale.
    pub fn initial_state<R: Rng>(&self, rng: &mut R, jitter: f64) -> Vec<f64> {
        let ly = &self.layout;
        let (k, l) = (ly.k, ly.l);
        let col_mean = |m: &DMatrix<f64>, c: usize| {
            let v: Vec<f64> = m.column(c).iter().copied().filter(|v| !v.is_nan()).collect();
            if v.is_empty() {
                0.0
            } else {
                crate::stats::mean(&v)
            }
        };
        let y_means: Vec<f64> = (0..k).map(|c| col_mean(&self.data.y, c)).collect();
        let x_means: Vec<f64> = (0..l).map(|c| col_mean(&self.data.x, c)).collect();
        let mut u = vec![0.0; ly.dim];
        u[ly.log_tau] = self.tau0(1.0).ln();
        u[ly.log_c2] = 4f64.ln();
        u[ly.log_varpi0] = (SQRT_2 / 2.0).ln();
        u[ly.log_varpi1] = (SQRT_2 / 2.0).ln();
        for c in 0..k {
            u[ly.b + c] = y_means[c];
        }
        for r in 0..l {
            u[ly.chol_index(r, r)] = 0.0;
        }
        for (i, &(_, c)) in self.y_cells.iter().enumerate() {
            u[ly.y_latent + i] = y_means[c];
        }
        for (i, &(_, c)) in self.x_cells.iter().enumerate() {
            u[ly.x_latent + i] = x_means[c];
        }
        if jitter > 0.0 {
            for v in &mut u {
                *v += rng.random_range(-jitter..jitter);
            }
        }
        u
    }

    /// Names of the reported constrained quantities, aligned with
    /// [`Model::constrained_values`].
    pub fn constrained_names(&self) -> Vec<String> {
        let ly = &self.layout;
        let (k, l) = (ly.k, ly.l);
        let mut names = Vec::new();
        for i in 1..=k {
            for j in 1..=k {
                names.push(format!("a[{i},{j}]"));
            }
        }
        for i in 1..=k {
            for j in 1..=k {
                names.push(format!("lambda[{i},{j}]"));
            }
        }
        for s in ["tau", "c2", "varpi0", "varpi1", "sigma", "sigma0_inv2", "omega"] {
            names.push(s.to_string());
        }
        for lag in 1..=k / 2 {
            names.push(format!("rho[{lag}]"));
        }
        names.push("m_eff".into());
        for h in 1..=ly.harmonics {
            for c in 1..=k {
                names.push(format!("beta[{h},{c}]"));
            }
        }
        for h in 1..=ly.harmonics {
            for c in 1..=k {
                names.push(format!("gamma[{h},{c}]"));
            }
        }
        for r in 0..=l {
            for c in 1..=k {
                names.push(format!("b[{r},{c}]"));
            }
        }
        for r in 0..=l {
            names.push(format!("mu_b[{r}]"));
        }
        for r in 0..=l {
            names.push(format!("sigma2_b[{r}]"));
        }
        for r in 1..=l {
            names.push(format!("phi_x[{r}]"));
        }
        for i in 1..=l {
            for j in 1..=i {
                names.push(format!("sigma_x[{i},{j}]"));
            }
        }
        let off = self.data.row_offset + 1;
        for &(t, c) in &self.y_cells {
            names.push(format!("y_miss[{},{}]", t + off, c + 1));
        }
        for &(t, c) in &self.x_cells {
            names.push(format!("x_miss[{},{}]", t + off, c + 1));
        }
        names
    }

    pub fn constrained_values(&self, u: &[f64]) -> Vec<f64> {
        let ly = &self.layout;
        let (k, l) = (ly.k, ly.l);
        let p = self.constrain(u);
        let a = p.a();
        let mut out = Vec::with_capacity(self.layout.dim + 16);
        for i in 0..k {
            for j in 0..k {
                out.push(a[(i, j)]);
            }
        }
        for i in 0..k {
            for j in 0..k {
                out.push(p.lambda[(i, j)]);
            }
        }
        let prec = CirculantPrecision::build(p.varpi0, p.varpi1, k);
        out.extend([p.tau, p.c2, p.varpi0, p.varpi1, p.sigma]);
        match prec {
            Ok(prec) => {
                out.push(prec.diag());
                out.push(prec.offdiag());
                out.extend(prec.lag_correlations());
                out.push(self.m_eff(&p, &prec).unwrap_or(f64::NAN));
            }
            Err(_) => out.extend(std::iter::repeat_n(f64::NAN, 3 + k / 2)),
        }
        out.extend(p.beta.transpose().iter());
        out.extend(p.gamma.transpose().iter());
        out.extend(p.b.transpose().iter());
        out.extend(&p.mu_b);
        out.extend(&p.sigma2_b);
        out.extend(&p.phi_x);
        let sx = p.sigma_x();
        for i in 0..l {
            for j in 0..=i {
                out.push(sx[(i, j)]);
            }
        }
        out.extend(&p.y_latent);
        out.extend(&p.x_latent);
        out
    }

    /// Effective number of non-zero entries of `A` at a parameter value, with
    /// unit predictor variance.
    fn m_eff(&self, p: &Params, prec: &CirculantPrecision) -> Result<f64> {
        let k = self.layout.k;
        let precision = ErrorPrecision::Circulant(*prec);
        let factors = (0..k)
            .map(|j| {
                let col: Vec<f64> = (0..k)
                    .map(|i| shrinkage::regularised_local_scale(p.lambda[(i, j)], p.tau, p.c2).sqrt())
                    .collect();
                shrinkage::shrinkage_factor_matrix(&precision, &col, p.tau, self.data.n(), 1.0)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(shrinkage::m_eff(&factors))
    }
}

/// Draws `b_ℓ·` rows from the hierarchical prior: `K` coefficients sharing one
/// `μ_B` and one `σ²_B` per draw. Returns a `draws × K` matrix.
pub fn sample_coefficient_prior(
    config: &ModelConfig,
    k: usize,
    draws: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_dist = Normal::new(config.intercept_mean_mean, config.intercept_mean_sd)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let precision_dist = Gamma::new(config.intercept_var_shape, 1.0 / config.intercept_var_scale)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let mut out = DMatrix::<f64>::zeros(draws, k);
    for d in 0..draws {
        let mu = mean_dist.sample(&mut rng);
        let sd = (1.0 / precision_dist.sample(&mut rng)).sqrt();
        for c in 0..k {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            out[(d, c)] = mu + sd * z;
        }
    }
    Ok(out)
}

/// Draws `(ϖ₀, ϖ₁)` from their conditional prior given `σ`.
pub fn sample_precision_prior(
    config: &ModelConfig,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let cv2 = config.precision_prior_cv.powi(2);
    let rate = SQRT_2 * sigma * sigma / cv2;
    let dist = Gamma::new(1.0 / cv2, 1.0 / rate).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..draws)
        .map(|_| (dist.sample(&mut rng), dist.sample(&mut rng)))
        .collect())
}
