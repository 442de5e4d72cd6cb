//! Post-fit analysis over a [`DrawTable`]: credible-interval selection,
//! stationarity audit, error correlations, residual-based covariate screening
//! and report rendering.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circulant::CirculantPrecision;
use crate::data_io::SeriesTable;
use crate::diagnostics::{self, ParameterSummary};
use crate::draws::DrawTable;
use crate::error::{Error, Result};
use crate::model::{mean_at, ModelData};
use crate::stats;
use crate::synth::spectral_radius;

/// Default `|lag-one correlation|` cutoff for covariate screening.
pub const DEFAULT_SCREEN_THRESHOLD: f64 = 0.1;

/// A coefficient with its equal-tailed credible interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub name: String,
    /// One-based row and column of the coefficient (row 0 is the intercept
    /// for `b`).
    pub row: usize,
    pub col: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// Posterior probability that the coefficient is positive.
    pub prob_positive: f64,
}

impl Selection {
    pub fn excludes_zero(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }
}

fn parse_index(name: &str, prefix: &str) -> Option<(usize, usize)> {
    let inner = name.strip_prefix(prefix)?.strip_prefix('[')?.strip_suffix(']')?;
    let (r, c) = inner.split_once(',')?;
    Some((r.trim().parse().ok()?, c.trim().parse().ok()?))
}

fn interval(values: &[f64], level: f64) -> (f64, f64) {
    let alpha = (1.0 - level) / 2.0;
    let q = stats::quantiles(values, &[alpha, 1.0 - alpha]);
    (q[0], q[1])
}

/// Interval summaries of every `prefix[i,j]` column.
pub fn coefficient_table(table: &DrawTable, prefix: &str, level: f64) -> Result<Vec<Selection>> {
    let mut out = Vec::new();
    for name in table.names_with_prefix(prefix) {
        let Some((row, col)) = parse_index(&name, prefix) else {
            continue;
        };
        let values = table.column(&name)?;
        let (lower, upper) = interval(&values, level);
        out.push(Selection {
            mean: stats::mean(&values),
            prob_positive: values.iter().filter(|v| **v > 0.0).count() as f64 / values.len() as f64,
            name,
            row,
            col,
            lower,
            upper,
        });
    }
    Ok(out)
}

/// Entries of `A`, and covariate rows of `B`, whose equal-tailed interval at
/// `level` excludes zero.
pub fn select_nonzero(table: &DrawTable, level: f64) -> Result<Vec<Selection>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must be in (0, 1), got {level}")));
    }
    let mut out: Vec<Selection> = coefficient_table(table, "a", level)?
        .into_iter()
        .filter(Selection::excludes_zero)
        .collect();
    out.extend(
        coefficient_table(table, "b", level)?
            .into_iter()
            .filter(|s| s.row > 0 && s.excludes_zero()),
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusAudit {
    pub draws: usize,
    pub fraction_stationary: f64,
    /// 2.5%, 50% and 97.5% quantiles of the spectral radius.
    pub quantiles: [f64; 3],
    pub radii: Vec<f64>,
}

/// Spectral radius of `A` in every draw.
pub fn spectral_radius_audit(table: &DrawTable) -> Result<RadiusAudit> {
    let k = table.square_size("a");
    if k == 0 {
        return Err(Error::UnknownId("a[1,1]".into()));
    }
    let radii = (0..table.n_draws())
        .map(|r| Ok(spectral_radius(&table.matrix(r, "a", k, k)?)))
        .collect::<Result<Vec<_>>>()?;
    let q = stats::quantiles(&radii, &[0.025, 0.5, 0.975]);
    Ok(RadiusAudit {
        draws: radii.len(),
        fraction_stationary: radii.iter().filter(|r| **r < 1.0).count() as f64 / radii.len() as f64,
        quantiles: [q[0], q[1], q[2]],
        radii,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCorrelation {
    pub lag: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Posterior summaries of the lag correlations `ρ_1..ρ_{⌊K/2⌋}` implied by each
/// draw's `(ϖ₀, ϖ₁)`.
pub fn error_correlation_report(table: &DrawTable, level: f64) -> Result<Vec<LagCorrelation>> {
    let k = table.square_size("a");
    if k < 3 {
        return Err(Error::Domain("need the a[i,j] block with K >= 3".into()));
    }
    let v0 = table.column("varpi0")?;
    let v1 = table.column("varpi1")?;
    let mut per_lag = vec![Vec::with_capacity(v0.len()); k / 2];
    for (a, b) in v0.iter().zip(&v1) {
        let rho = CirculantPrecision::build(*a, *b, k)?.lag_correlations();
        for (lag, r) in rho.into_iter().enumerate() {
            per_lag[lag].push(r);
        }
    }
    Ok(per_lag
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (lower, upper) = interval(v, level);
            LagCorrelation {
                lag: i + 1,
                mean: stats::mean(v),
                lower,
                upper,
            }
        })
        .collect())
}

/// Posterior mean of `y_t − [μ_t + A(y_{t−1} − μ_{t−1})]` for every row of
/// `data`. Row 0 and cells where `y` is missing are `NaN`.
pub fn residual_means(table: &DrawTable, data: &ModelData, period: f64) -> Result<DMatrix<f64>> {
    let (n, k, l) = (data.n(), data.k(), data.l());
    if table.square_size("a") != k {
        return Err(Error::Dimension(format!("draws do not hold a {k}x{k} a block")));
    }
    let harmonics = (1..)
        .take_while(|j| table.column_index(&format!("beta[{j},1]")).is_some())
        .count();
    if table.n_draws() == 0 {
        return Err(Error::Domain("no draws".into()));
    }
    let off = data.row_offset + 1;
    let mut acc = DMatrix::<f64>::zeros(n, k);
    for r in 0..table.n_draws() {
        let a = table.matrix(r, "a", k, k)?;
        let beta = if harmonics > 0 { table.matrix(r, "beta", harmonics, k)? } else { DMatrix::zeros(0, k) };
        let gamma = if harmonics > 0 { table.matrix(r, "gamma", harmonics, k)? } else { DMatrix::zeros(0, k) };
        let mut b = DMatrix::zeros(l + 1, k);
        for i in 0..=l {
            for c in 0..k {
                let name = format!("b[{i},{}]", c + 1);
                b[(i, c)] = table.get(r, &name).ok_or(Error::UnknownId(name))?;
            }
        }
        let mut y = data.y.clone();
        let mut x = data.x.clone();
        for t in 0..n {
            for c in 0..k {
                if data.y_missing[(t, c)] {
                    let name = format!("y_miss[{},{}]", t + off, c + 1);
                    y[(t, c)] = table.get(r, &name).ok_or(Error::UnknownId(name))?;
                }
            }
            for c in 0..l {
                if data.x_missing[(t, c)] {
                    let name = format!("x_miss[{},{}]", t + off, c + 1);
                    x[(t, c)] = table.get(r, &name).ok_or(Error::UnknownId(name))?;
                }
            }
        }
        let zeros = vec![0.0; l];
        let mut d_prev: Option<nalgebra::DVector<f64>> = None;
        for t in 0..n {
            let x_prev: Vec<f64> = if t == 0 { zeros.clone() } else { x.row(t - 1).iter().copied().collect() };
            let mu = mean_at(data.time_index(t), period, &beta, &gamma, &b, &x_prev)?;
            let d = y.row(t).transpose() - mu;
            if let Some(prev) = &d_prev {
                let resid = &d - &a * prev;
                for c in 0..k {
                    acc[(t, c)] += resid[c];
                }
            }
            d_prev = Some(d);
        }
    }
    let draws = table.n_draws() as f64;
    Ok(DMatrix::from_fn(n, k, |t, c| {
        if t == 0 || data.y_missing[(t, c)] {
            f64::NAN
        } else {
            acc[(t, c)] / draws
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateScreen {
    pub name: String,
    /// Correlation of `x_{t−1}` with the residual mean of each bin.
    pub correlations: Vec<f64>,
    pub max_abs_correlation: f64,
    /// One-based bin achieving the maximum.
    pub best_bin: usize,
    pub flagged: bool,
}

/// Lag-one correlation of each covariate with each bin's residual means,
/// ranked by the largest absolute correlation. Pairs with a missing value on
/// either side are skipped.
pub fn screen_covariates(
    residuals: &DMatrix<f64>,
    covariates: &SeriesTable,
    threshold: f64,
) -> Result<Vec<CovariateScreen>> {
    let n = residuals.nrows();
    if covariates.nrows() != n {
        return Err(Error::Dimension(format!(
            "{n} residual rows but {} covariate rows",
            covariates.nrows()
        )));
    }
    let mut out = Vec::new();
    for (l, name) in covariates.columns().iter().enumerate() {
        let correlations: Vec<f64> = (0..residuals.ncols())
            .map(|k| {
                let (xs, rs): (Vec<f64>, Vec<f64>) = (1..n)
                    .filter_map(|t| {
                        let x = covariates.get(t - 1, l)?;
                        let r = residuals[(t, k)];
                        (!r.is_nan()).then_some((x, r))
                    })
                    .unzip();
                if xs.len() < 3 {
                    f64::NAN
                } else {
                    stats::pearson(&xs, &rs)
                }
            })
            .collect();
        let (best, max_abs) = correlations
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_nan())
            .map(|(i, c)| (i, c.abs()))
            .fold((0, f64::NAN), |acc, (i, c)| if acc.1.is_nan() || c > acc.1 { (i, c) } else { acc });
        out.push(CovariateScreen {
            name: name.clone(),
            correlations,
            max_abs_correlation: max_abs,
            best_bin: best + 1,
            flagged: max_abs > threshold,
        });
    }
    out.sort_by(|a, b| b.max_abs_correlation.total_cmp(&a.max_abs_correlation));
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub level: f64,
    pub parameters: Vec<ParameterSummary>,
    pub selected: Vec<Selection>,
    pub spectral_radius: RadiusAudit,
    pub covariate_effects: Vec<Selection>,
    pub error_correlations: Vec<LagCorrelation>,
    pub m_eff: Option<ParameterSummary>,
    pub bin_names: Vec<String>,
    pub covariate_names: Vec<String>,
}

impl FitReport {
    pub fn build(
        table: &DrawTable,
        level: f64,
        bin_names: Vec<String>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let parameters: Vec<ParameterSummary> = diagnostics::summarize(table)?
            .into_iter()
            .filter(|p| !p.name.starts_with("y_miss") && !p.name.starts_with("x_miss"))
            .collect();
        let m_eff = parameters.iter().find(|p| p.name == "m_eff").cloned();
        Ok(Self {
            level,
            selected: select_nonzero(table, level)?,
            spectral_radius: spectral_radius_audit(table)?,
            covariate_effects: coefficient_table(table, "b", level)?
                .into_iter()
                .filter(|s| s.row > 0)
                .collect(),
            error_correlations: error_correlation_report(table, level)?,
            m_eff,
            parameters,
            bin_names,
            covariate_names,
        })
    }

    fn bin(&self, i: usize) -> String {
        self.bin_names.get(i - 1).cloned().unwrap_or_else(|| format!("bin_{i}"))
    }

    fn covariate(&self, l: usize) -> String {
        self.covariate_names.get(l - 1).cloned().unwrap_or_else(|| format!("x{l}"))
    }

    pub fn to_markdown(&self) -> String {
        let pct = self.level * 100.0;
        let mut s = String::new();
        let _ = writeln!(s, "# Fit report\n");
        let _ = writeln!(s, "## Selected autoregressive coefficients\n");
        let _ = writeln!(s, "Entries whose {pct:.0}% interval excludes zero. Row is the responding bin, column the lagged bin.\n");
        let _ = writeln!(s, "| coefficient | from | to | mean | lower | upper | P(>0) |");
        let _ = writeln!(s, "|---|---|---|---:|---:|---:|---:|");
        for sel in self.selected.iter().filter(|s| s.name.starts_with("a[")) {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.3} |",
                sel.name,
                self.bin(sel.col),
                self.bin(sel.row),
                sel.mean,
                sel.lower,
                sel.upper,
                sel.prob_positive
            );
        }
        let _ = writeln!(s, "\n## Covariate effects\n");
        let _ = writeln!(s, "| covariate | bin | mean | lower | upper | P(>0) | selected |");
        let _ = writeln!(s, "|---|---|---:|---:|---:|---:|---|");
        for c in &self.covariate_effects {
            let _ = writeln!(
                s,
                "| {} | {} | {:.4} | {:.4} | {:.4} | {:.3} | {} |",
                self.covariate(c.row),
                self.bin(c.col),
                c.mean,
                c.lower,
                c.upper,
                c.prob_positive,
                if c.excludes_zero() { "yes" } else { "" }
            );
        }
        let _ = writeln!(s, "\n## Error correlations\n");
        let _ = writeln!(s, "| lag | mean | lower | upper |");
        let _ = writeln!(s, "|---:|---:|---:|---:|");
        for r in &self.error_correlations {
            let _ = writeln!(s, "| {} | {:.4} | {:.4} | {:.4} |", r.lag, r.mean, r.lower, r.upper);
        }
        let _ = writeln!(s, "\n## Stationarity\n");
        let sr = &self.spectral_radius;
        let _ = writeln!(
            s,
            "{:.1}% of {} draws have spectral radius below one (median {:.3}, 95% interval {:.3} to {:.3}).",
            100.0 * sr.fraction_stationary,
            sr.draws,
            sr.quantiles[1],
            sr.quantiles[0],
            sr.quantiles[2]
        );
        if let Some(m) = &self.m_eff {
            let _ = writeln!(
                s,
                "\nEffective number of non-zero coefficients: mean {:.2} (95% interval {:.2} to {:.2}).",
                m.mean, m.q2_5, m.q97_5
            );
        }
        let _ = writeln!(s, "\n## Error precision\n");
        let _ = writeln!(s, "| parameter | mean | 2.5% | 97.5% |");
        let _ = writeln!(s, "|---|---:|---:|---:|");
        for p in self
            .parameters
            .iter()
            .filter(|p| ["varpi0", "varpi1", "sigma0_inv2", "omega", "tau", "sigma", "c2"].contains(&p.name.as_str()))
        {
            let _ = writeln!(s, "| {} | {:.4} | {:.4} | {:.4} |", p.name, p.mean, p.q2_5, p.q97_5);
        }
        s
    }
}
