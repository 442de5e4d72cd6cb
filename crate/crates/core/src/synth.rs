//! Synthetic data with known truth, and a small generalised Lotka–Volterra
//! integrator for checking the VAR(1) linearisation.

use std::f64::consts::PI;

use chrono::{Duration, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circulant::CirculantPrecision;
use crate::data_io::SeriesTable;
use crate::error::{Error, Result};
use crate::model::mean_at;

/// Parameters of a simulated dataset. Matrices are given as lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub k: usize,
    pub l: usize,
    pub n: usize,
    /// `K × K` autoregressive matrix.
    pub a: Vec<Vec<f64>>,
    /// `J × K` sine and cosine coefficients.
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    /// `(L+1) × K`, intercept row first.
    pub b: Vec<Vec<f64>>,
    pub varpi0: f64,
    pub varpi1: f64,
    /// Diagonal of `Φ_X`.
    pub phi_x: Vec<f64>,
    /// `L × L` covariate innovation covariance.
    pub sigma_x: Vec<Vec<f64>>,
    pub seed: u64,
    #[serde(default)]
    pub missing_fraction: f64,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_period() -> f64 {
    52.0
}

fn default_burn_in() -> usize {
    200
}

fn to_matrix(rows: &[Vec<f64>], r: usize, c: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Spec(format!("{what} must be {r}x{c}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

impl TruthSpec {
    pub fn harmonics(&self) -> usize {
        self.beta.len()
    }

    pub fn a_matrix(&self) -> Result<DMatrix<f64>> {
        to_matrix(&self.a, self.k, self.k, "a")
    }

    pub fn validate(&self) -> Result<()> {
        let (k, l) = (self.k, self.l);
        let a = self.a_matrix()?;
        let j = self.harmonics();
        to_matrix(&self.beta, j, k, "beta")?;
        to_matrix(&self.gamma, j, k, "gamma")?;
        to_matrix(&self.b, l + 1, k, "b")?;
        let sx = to_matrix(&self.sigma_x, l, l, "sigma_x")?;
        if self.phi_x.len() != l {
            return Err(Error::Spec(format!("phi_x must have {l} entries")));
        }
        if self.phi_x.iter().any(|p| p.abs() >= 1.0) {
            return Err(Error::Spec("phi_x entries must lie in (-1, 1)".into()));
        }
        if l > 0 && sx.cholesky().is_none() {
            return Err(Error::Spec("sigma_x is not positive definite".into()));
        }
        CirculantPrecision::build(self.varpi0, self.varpi1, k)
            .map_err(|e| Error::Spec(e.to_string()))?;
        let rho = spectral_radius(&a);
        if rho >= 1.0 {
            return Err(Error::Spec(format!(
                "spectral radius of a is {rho:.4}; the generator needs a stationary process"
            )));
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return Err(Error::Spec("missing_fraction must be in [0, 1)".into()));
        }
        if self.n < 2 || !(self.period > 0.0) {
            return Err(Error::Spec("need n >= 2 and a positive period".into()));
        }
        Ok(())
    }

    /// Indices `(i, j)` of non-zero entries of `a`.
    pub fn nonzero_a(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.a.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Draws `N_K(0, Σ)` with `Σ⁻¹` circulant by scaling independent normals by
/// `λ_m^{-1/2}` in the real Fourier eigenbasis.
pub fn sample_circulant_noise<R: Rng>(prec: &CirculantPrecision, rng: &mut R) -> Vec<f64> {
    let k = prec.k();
    let lambda = prec.eigenvalues();
    let kf = k as f64;
    let mut out = vec![0.0; k];
    let mut add = |weight: f64, basis: &dyn Fn(usize) -> f64| {
        for (i, o) in out.iter_mut().enumerate() {
            *o += weight * basis(i);
        }
    };
    let z0: f64 = rng.sample(StandardNormal);
    add(z0 / lambda[0].sqrt(), &|_| 1.0 / kf.sqrt());
    for m in 1..k.div_ceil(2) {
        let s = 1.0 / lambda[m].sqrt();
        let zc: f64 = rng.sample(StandardNormal);
        let zs: f64 = rng.sample(StandardNormal);
        let w = 2.0 * PI * m as f64 / kf;
        add(zc * s, &|i| (2.0 / kf).sqrt() * (w * i as f64).cos());
        add(zs * s, &|i| (2.0 / kf).sqrt() * (w * i as f64).sin());
    }
    if k.is_multiple_of(2) {
        let z: f64 = rng.sample(StandardNormal);
        add(z / lambda[k / 2].sqrt(), &|i| if i % 2 == 0 { 1.0 } else { -1.0 } / kf.sqrt());
    }
    out
}

/// Output of [`simulate_var`].
#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Columns `bin_1..bin_K`.
    pub y: SeriesTable,
    /// Columns `x1..xL`.
    pub covariates: SeriesTable,
    pub truth: TruthSpec,
}

fn weekly_dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    (0..n).map(|i| start + Duration::days(7 * i as i64)).collect()
}

/// Simulates covariates from their AR(1) model and bins from the VAR(1) with
/// seasonal, covariate-driven mean. The first `burn_in` steps are discarded;
/// retained rows have time index `1..=n`. Cells other than the first row are
/// masked independently with probability `missing_fraction`.
pub fn simulate_var(spec: &TruthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let (k, l, n) = (spec.k, spec.l, spec.n);
    let a = spec.a_matrix()?;
    let j = spec.harmonics();
    let beta = to_matrix(&spec.beta, j, k, "beta")?;
    let gamma = to_matrix(&spec.gamma, j, k, "gamma")?;
    let b = to_matrix(&spec.b, l + 1, k, "b")?;
    let chol_x = if l > 0 {
        to_matrix(&spec.sigma_x, l, l, "sigma_x")?
            .cholesky()
            .expect("validated")
            .l()
    } else {
        DMatrix::zeros(0, 0)
    };
    let prec = CirculantPrecision::build(spec.varpi0, spec.varpi1, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let total = spec.burn_in + n;
    let mut x_prev = DVector::zeros(l);
    let mut d_prev = DVector::zeros(k);
    let mut y_out = DMatrix::zeros(n, k);
    let mut x_out = DMatrix::zeros(n, l);
    for s in 0..total {
        let t = s as f64 - spec.burn_in as f64 + 1.0;
        let mu = mean_at(t, spec.period, &beta, &gamma, &b, x_prev.as_slice())?;
        let eps = DVector::from_vec(sample_circulant_noise(&prec, &mut rng));
        let d = &a * &d_prev + eps;
        let y = &mu + &d;
        let z = DVector::from_fn(l, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = DVector::from_fn(l, |i, _| spec.phi_x[i] * x_prev[i]) + &chol_x * z;
        if s >= spec.burn_in {
            let row = s - spec.burn_in;
            y_out.set_row(row, &y.transpose());
            x_out.set_row(row, &x.transpose());
        }
        d_prev = d;
        x_prev = x;
    }

    let mut mask = |rows: usize, cols: usize| {
        DMatrix::from_fn(rows, cols, |t, _| {
            t > 0 && spec.missing_fraction > 0.0 && rng.random::<f64>() < spec.missing_fraction
        })
    };
    let y_mask = mask(n, k);
    let x_mask = mask(n, l);
    let dates = weekly_dates(n);
    let y = SeriesTable::new(
        dates.clone(),
        (1..=k).map(|i| format!("bin_{i}")).collect(),
        y_out,
        y_mask,
    )?;
    let covariates = SeriesTable::new(
        dates,
        (1..=l).map(|i| format!("x{i}")).collect(),
        x_out,
        x_mask,
    )?;
    Ok(SyntheticData {
        y,
        covariates,
        truth: spec.clone(),
    })
}

/// Trajectory of a gLV system sampled at every integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct GlvTrajectory {
    pub dt: f64,
    /// `steps + 1` states, the first being the initial condition.
    pub states: Vec<Vec<f64>>,
    /// `(step, species)` where a population was clamped at zero.
    pub clamp_events: Vec<(usize, usize)>,
}

fn glv_rhs(b: &[f64], a: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let inter: f64 = (0..y.len()).map(|j| a[(i, j)] * y[j]).sum();
            y[i] * (b[i] + inter)
        })
        .collect()
}

/// `dy_i/dt = b_i y_i + y_i Σ_j a_ij y_j` by classical fourth-order
/// Runge–Kutta with fixed step.
pub fn simulate_glv(
    growth: &[f64],
    interactions: &DMatrix<f64>,
    y0: &[f64],
    dt: f64,
    steps: usize,
) -> Result<GlvTrajectory> {
    let k = growth.len();
    if interactions.shape() != (k, k) || y0.len() != k {
        return Err(Error::Dimension(format!(
            "growth has {k} entries, interactions {:?}, y0 {}",
            interactions.shape(),
            y0.len()
        )));
    }
    if y0.iter().any(|v| !(*v > 0.0)) || !(dt > 0.0) {
        return Err(Error::Domain("need positive initial populations and dt > 0".into()));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut clamp_events = Vec::new();
    let mut y = y0.to_vec();
    states.push(y.clone());
    let axpy = |y: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    for step in 1..=steps {
        let k1 = glv_rhs(growth, interactions, &y);
        let k2 = glv_rhs(growth, interactions, &axpy(&y, &k1, dt / 2.0));
        let k3 = glv_rhs(growth, interactions, &axpy(&y, &k2, dt / 2.0));
        let k4 = glv_rhs(growth, interactions, &axpy(&y, &k3, dt));
        for i in 0..k {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !y[i].is_finite() {
                return Err(Error::BlowUp(step));
            }
            if y[i] < 0.0 {
                log::debug!("species {i} clamped at zero at step {step}");
                clamp_events.push((step, i));
                y[i] = 0.0;
            }
        }
        states.push(y.clone());
    }
    Ok(GlvTrajectory {
        dt,
        states,
        clamp_events,
    })
}

/// Interior fixed point `−A⁻¹ b`, when it exists and is strictly positive.
pub fn glv_equilibrium(growth: &[f64], interactions: &DMatrix<f64>) -> Option<Vec<f64>> {
    let b = DVector::from_column_slice(growth);
    let eq = interactions.clone().lu().solve(&(-b))?;
    eq.iter().all(|v| *v > 0.0).then(|| eq.iter().copied().collect())
}

/// `z_t ≈ c + A z_{t−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Var1Fit {
    pub intercept: DVector<f64>,
    pub a: DMatrix<f64>,
}

impl Var1Fit {
    pub fn predict(&self, prev: &[f64]) -> Vec<f64> {
        (&self.intercept + &self.a * DVector::from_column_slice(prev))
            .iter()
            .copied()
            .collect()
    }
}

/// A `(previous, next)` pair of consecutive states.
pub type Transition = (Vec<f64>, Vec<f64>);

/// Least-squares VAR(1) over `(previous, next)` pairs. The lag covariance is
/// inverted through its eigendecomposition, dropping directions with
/// negligible variance, so degenerate (e.g. constant) series are handled.
pub fn fit_var1_least_squares(pairs: &[Transition]) -> Result<Var1Fit> {
    let k = pairs
        .first()
        .map(|p| p.0.len())
        .ok_or_else(|| Error::Domain("no transitions to fit".into()))?;
    let m = pairs.len() as f64;
    let mean = |f: fn(&Transition) -> &Vec<f64>| {
        DVector::from_fn(k, |i, _| pairs.iter().map(|p| f(p)[i]).sum::<f64>() / m)
    };
    let prev_mean = mean(|p| &p.0);
    let next_mean = mean(|p| &p.1);
    let mut s_pp = DMatrix::<f64>::zeros(k, k);
    let mut s_np = DMatrix::<f64>::zeros(k, k);
    for (prev, next) in pairs {
        let dp = DVector::from_column_slice(prev) - &prev_mean;
        let dn = DVector::from_column_slice(next) - &next_mean;
        s_pp += &dp * dp.transpose();
        s_np += &dn * dp.transpose();
    }
    let eig = s_pp.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut pinv = DMatrix::<f64>::zeros(k, k);
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if top > 0.0 && ev > 1e-12 * top {
            let v = eig.eigenvectors.column(i);
            pinv += v * v.transpose() / ev;
        }
    }
    let a = s_np * pinv;
    let intercept = &next_mean - &a * &prev_mean;
    Ok(Var1Fit { intercept, a })
}

/// One-step prediction quality of a VAR(1) fitted to log populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearisationReport {
    pub transitions: usize,
    /// Root-mean-square one-step prediction error.
    pub rmse: f64,
    /// `rmse` divided by the root-mean-square deviation of the log populations
    /// from their mean; zero when the log populations do not move (spread below
    /// `1e-9`).
    pub relative_error: f64,
}

/// Fits a VAR(1) to the log populations of each trajectory (observed every
/// `every` integration steps) and reports pooled one-step errors.
pub fn glv_to_var_check(trajectories: &[GlvTrajectory], every: usize) -> Result<LinearisationReport> {
    let every = every.max(1);
    let mut series = Vec::new();
    for tr in trajectories {
        let obs: Vec<Vec<f64>> = tr
            .states
            .iter()
            .step_by(every)
            .map(|s| s.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect())
            .collect();
        series.push(obs);
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = series
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (w[0].clone(), w[1].clone())))
        .collect();
    let fit = fit_var1_least_squares(&pairs)?;
    let k = pairs[0].0.len();
    let mut sse = 0.0;
    let mut mean = vec![0.0; k];
    for (_, next) in &pairs {
        for i in 0..k {
            mean[i] += next[i] / pairs.len() as f64;
        }
    }
    let mut sst = 0.0;
    for (prev, next) in &pairs {
        let pred = fit.predict(prev);
        for i in 0..k {
            sse += (next[i] - pred[i]).powi(2);
            sst += (next[i] - mean[i]).powi(2);
        }
    }
    let count = (pairs.len() * k) as f64;
    let rmse = (sse / count).sqrt();
    let spread = (sst / count).sqrt();
    Ok(LinearisationReport {
        transitions: pairs.len(),
        rmse,
        relative_error: if spread < 1e-9 { 0.0 } else { rmse / spread },
    })
}

/// Settings for [`perturbed_glv_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlvCheckConfig {
    /// Initial log-scale distance from equilibrium.
    pub radius: f64,
    pub starts: usize,
    pub dt: f64,
    pub steps: usize,
    pub every: usize,
    pub seed: u64,
}

/// Starts `starts` trajectories at `equilibrium · exp(radius · u)` for random
/// unit directions `u` and runs [`glv_to_var_check`] on them.
pub fn perturbed_glv_check(
    growth: &[f64],
    interactions: &DMatrix<f64>,
    config: &GlvCheckConfig,
) -> Result<LinearisationReport> {
    let eq = glv_equilibrium(growth, interactions)
        .ok_or_else(|| Error::Domain("system has no positive interior equilibrium".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let trajectories = (0..config.starts.max(1))
        .map(|_| {
            let dir: Vec<f64> = eq.iter().map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let y0: Vec<f64> = eq
                .iter()
                .zip(&dir)
                .map(|(e, d)| e * (config.radius * d / norm).exp())
                .collect();
            simulate_glv(growth, interactions, &y0, config.dt, config.steps)
        })
        .collect::<Result<Vec<_>>>()?;
    glv_to_var_check(&trajectories, config.every)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid_spec(n: usize, seed: u64) -> TruthSpec {
        let k = 3;
        let s2 = std::f64::consts::SQRT_2 / 2.0;
        TruthSpec {
            k,
            l: 0,
            n,
            a: vec![vec![0.0; k]; k],
            beta: vec![vec![0.0; k]],
            gamma: vec![vec![0.0; k]],
            b: vec![vec![1.0, -1.0, 2.0]],
            varpi0: s2,
            varpi1: s2,
            phi_x: vec![],
            sigma_x: vec![],
            seed,
            missing_fraction: 0.0,
            period: 52.0,
            burn_in: 200,
        }
    }

    #[test]
    fn iid_case_matches_moments() {
        let data = simulate_var(&iid_spec(5000, 1)).unwrap();
        let y = data.y.values();
        for (c, want) in [1.0, -1.0, 2.0].iter().enumerate() {
            let col: Vec<f64> = y.column(c).iter().copied().collect();
            let m = crate::stats::mean(&col);
            assert!((m - want).abs() < 4.0 / 5000f64.sqrt());
            assert!((crate::stats::variance(&col, 1) - 1.0).abs() < 0.08);
        }
        let c0: Vec<f64> = y.column(0).iter().copied().collect();
        let c1: Vec<f64> = y.column(1).iter().copied().collect();
        assert!(crate::stats::pearson(&c0, &c1).abs() < 0.06);
    }

    #[test]
    fn circulant_noise_has_target_covariance() {
        let prec = CirculantPrecision::from_diag_offdiag(2.0, -0.6, 6).unwrap();
        let cov = prec.covariance_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 100_000;
        let mut acc = DMatrix::<f64>::zeros(6, 6);
        for _ in 0..draws {
            let e = DVector::from_vec(sample_circulant_noise(&prec, &mut rng));
            acc += &e * e.transpose();
        }
        acc /= draws as f64;
        assert!((acc - cov).abs().max() < 0.01);
    }

    #[test]
    fn determinism_and_rejection() {
        let a = simulate_var(&iid_spec(50, 9)).unwrap();
        let b = simulate_var(&iid_spec(50, 9)).unwrap();
        assert_eq!(a.y, b.y);
        let mut bad = iid_spec(50, 9);
        bad.a[0][0] = 1.01;
        assert!(matches!(simulate_var(&bad), Err(Error::Spec(_))));
    }

    #[test]
    fn missing_cells_spare_first_row() {
        let mut spec = iid_spec(400, 4);
        spec.missing_fraction = 0.2;
        let data = simulate_var(&spec).unwrap();
        assert!(!data.y.row_fully_missing(0));
        assert!((0..3).all(|c| !data.y.is_missing(0, c)));
        assert!((data.y.missing_fraction() - 0.2).abs() < 0.04);
    }

    #[test]
    fn exponential_growth_without_interactions() {
        let b = [0.5, -0.3];
        let tr = simulate_glv(&b, &DMatrix::zeros(2, 2), &[1.0, 2.0], 1e-3, 1000).unwrap();
        let end = tr.states.last().unwrap();
        assert!((end[0] / 0.5f64.exp() - 1.0).abs() < 1e-6);
        assert!((end[1] / (2.0 * (-0.3f64).exp()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn predator_prey_conserves_invariant() {
        let (alpha, beta, delta, gamma) = (1.0, 0.5, 0.2, 0.8);
        let growth = [alpha, -gamma];
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -beta, delta, 0.0]);
        let v = |s: &[f64]| delta * s[0] - gamma * s[0].ln() + beta * s[1] - alpha * s[1].ln();
        let period = 2.0 * PI / (alpha * gamma).sqrt();
        let dt = 1e-4;
        let tr = simulate_glv(&growth, &a, &[3.0, 1.0], dt, (period / dt) as usize).unwrap();
        let v0 = v(&tr.states[0]);
        let drift = tr.states.iter().map(|s| (v(s) - v0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-4, "drift {drift}");
    }

    #[test]
    fn equilibrium_is_stationary() {
        let growth = [1.0, 0.8, 1.2];
        let a = -DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.2, 1.0, 0.3, 0.3, 0.2, 1.0]);
        let eq = glv_equilibrium(&growth, &a).unwrap();
        let tr = simulate_glv(&growth, &a, &eq, 0.01, 500).unwrap();
        for s in &tr.states {
            for (x, e) in s.iter().zip(&eq) {
                assert!((x - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clamping_keeps_populations_non_negative() {
        // A step far too large for the self-limitation makes RK4 overshoot.
        let tr = simulate_glv(&[0.0], &DMatrix::from_element(1, 1, -10.0), &[10.0], 0.1, 20).unwrap();
        assert!(tr.states.iter().all(|s| s[0] >= 0.0));
        assert!(!tr.clamp_events.is_empty());
    }

    #[test]
    fn zero_perturbation_gives_zero_error() {
        let growth = [1.0, 0.8, 1.2];
        let a = -DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.2, 1.0, 0.3, 0.3, 0.2, 1.0]);
        let cfg = GlvCheckConfig {
            radius: 0.0,
            starts: 2,
            dt: 0.01,
            steps: 500,
            every: 10,
            seed: 1,
        };
        let r = perturbed_glv_check(&growth, &a, &cfg).unwrap();
        assert!(r.rmse < 1e-12, "{r:?}");
        assert_eq!(r.relative_error, 0.0);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&a) - 0.5).abs() < 1e-12);
    }
}
