//! Convergence diagnostics: rank-normalised split R-hat and bulk ESS.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::draws::DrawTable;
use crate::error::Result;
use crate::stats;

/// R-hat above this is flagged.
pub const RHAT_THRESHOLD: f64 = 1.01;

fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        // An odd middle draw is dropped so the halves have equal length.
        out.push(c[..half].to_vec());
        out.push(c[n - half..n].to_vec());
    }
    out
}

/// Classic potential scale reduction on the given chains (no splitting).
pub fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m < 2 || n < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = chains.iter().map(|c| stats::mean(&c[..n])).collect();
    let w = stats::mean(&chains.iter().map(|c| stats::variance(&c[..n], 1)).collect::<Vec<_>>());
    let b = n as f64 * stats::variance(&means, 1);
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

/// Split R-hat without rank normalisation.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    rhat_basic(&split(chains))
}

/// Normal scores of pooled ranks (average ties), `Φ⁻¹((r − 3/8)/(S + 1/4))`,
/// returned in the input shape.
pub fn rank_normalise(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pooled: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, c) in chains.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            pooled.push((v, ci, i));
        }
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = pooled.len() as f64;
    let normal = Normal::standard();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = normal.inverse_cdf((rank - 0.375) / (s + 0.25));
        for p in &pooled[i..=j] {
            out[p.1][p.2] = z;
        }
        i = j + 1;
    }
    out
}

/// Rank-normalised split R-hat: the larger of the bulk and folded values.
pub fn rank_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves = split(chains);
    let bulk = rhat_basic(&rank_normalise(&halves));
    let pooled: Vec<f64> = halves.iter().flatten().copied().collect();
    let med = stats::quantiles(&pooled, &[0.5])[0];
    let folded: Vec<Vec<f64>> = halves
        .iter()
        .map(|c| c.iter().map(|v| (v - med).abs()).collect())
        .collect();
    let tail = rhat_basic(&rank_normalise(&folded));
    bulk.max(tail)
}

fn autocovariance(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag)
        .map(|i| (x[i] - mean) * (x[i + lag] - mean))
        .sum::<f64>()
        / n as f64
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| stats::mean(c)).collect();
    let acov0: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| autocovariance(c, mu, 0))
        .collect();
    let nf = n as f64;
    let w = stats::mean(&acov0) * nf / (nf - 1.0);
    if w == 0.0 {
        return f64::NAN;
    }
    let var_plus = if m > 1 {
        w * (nf - 1.0) / nf + stats::variance(&means, 1)
    } else {
        w * (nf - 1.0) / nf
    };
    let rho = |lag: usize| {
        let mean_acov = stats::mean(
            &chains
                .iter()
                .zip(&means)
                .map(|(c, &mu)| autocovariance(c, mu, lag))
                .collect::<Vec<_>>(),
        );
        1.0 - (w - mean_acov) / var_plus
    };
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let total = (m * n) as f64;
    let cap = total * total.log10();
    (total / tau.max(1.0 / total.log10())).min(cap)
}

/// Bulk ESS on split, rank-normalised chains.
pub fn ess_bulk(chains: &[Vec<f64>]) -> f64 {
    ess(&rank_normalise(&split(chains)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q2_5: f64,
    pub q50: f64,
    pub q97_5: f64,
    pub rhat: f64,
    pub ess_bulk: f64,
}

impl ParameterSummary {
    pub fn from_chains(name: &str, chains: &[Vec<f64>]) -> Self {
        let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
        let q = stats::quantiles(&pooled, &[0.025, 0.5, 0.975]);
        let constant = pooled.windows(2).all(|w| w[0] == w[1]);
        let (rhat, ess) = if constant || chains.len() < 2 && pooled.len() < 8 {
            (f64::NAN, f64::NAN)
        } else {
            (rank_rhat(chains), ess_bulk(chains))
        };
        Self {
            name: name.to_string(),
            mean: stats::mean(&pooled),
            sd: stats::sample_sd(&pooled),
            q2_5: q[0],
            q50: q[1],
            q97_5: q[2],
            rhat,
            ess_bulk: ess,
        }
    }

    pub fn flagged(&self) -> bool {
        self.rhat > RHAT_THRESHOLD
    }
}

/// Summaries for every column of a draw table.
pub fn summarize(table: &DrawTable) -> Result<Vec<ParameterSummary>> {
    table
        .names()
        .iter()
        .map(|n| Ok(ParameterSummary::from_chains(n, &table.column_by_chain(n)?)))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub parameters: Vec<ParameterSummary>,
    pub max_rhat: f64,
    pub min_ess_bulk: f64,
    /// Parameters with R-hat above the threshold.
    pub flagged: Vec<String>,
    pub divergences: Option<usize>,
    pub divergence_warning: bool,
}

/// `post_warmup` is the number of post-warmup transitions across all chains,
/// used to decide whether divergences exceed 10%.
pub fn diagnose(
    table: &DrawTable,
    divergences: Option<usize>,
    post_warmup: Option<usize>,
) -> Result<DiagnosticsReport> {
    let parameters = summarize(table)?;
    let max_rhat = parameters
        .iter()
        .map(|p| p.rhat)
        .filter(|v| !v.is_nan())
        .fold(f64::NAN, f64::max);
    let min_ess_bulk = parameters
        .iter()
        .map(|p| p.ess_bulk)
        .filter(|v| !v.is_nan())
        .fold(f64::NAN, f64::min);
    let flagged = parameters
        .iter()
        .filter(|p| p.flagged())
        .map(|p| p.name.clone())
        .collect();
    let divergence_warning = match (divergences, post_warmup) {
        (Some(d), Some(t)) if t > 0 => d as f64 > 0.1 * t as f64,
        _ => false,
    };
    Ok(DiagnosticsReport {
        parameters,
        max_rhat,
        min_ess_bulk,
        flagged,
        divergences,
        divergence_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal_chains(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn copied_chains_with_equal_halves() {
        // Every half-chain is the same sequence, so the between-chain term is
        // zero and the statistic reduces to sqrt((n − 1)/n).
        let half = normal_chains(1, 50, 1).remove(0);
        let chain: Vec<f64> = half.iter().chain(&half).copied().collect();
        let chains = vec![chain.clone(), chain.clone(), chain];
        let want = (49.0f64 / 50.0).sqrt();
        assert!((split_rhat(&chains) - want).abs() < 1e-12);
        assert!((rank_rhat(&chains) - want).abs() < 1e-12);
    }

    #[test]
    fn white_noise_ess_near_draw_count() {
        let chains = normal_chains(4, 1000, 2);
        let e = ess_bulk(&chains);
        assert!((e - 4000.0).abs() < 0.2 * 4000.0, "ess {e}");
        assert!(rank_rhat(&chains) < 1.01);
    }

    #[test]
    fn stuck_chain_is_flagged() {
        let mut chains = normal_chains(3, 500, 3);
        chains.push(vec![3.0; 500]);
        let s = ParameterSummary::from_chains("x", &chains);
        assert!(s.rhat > 1.1 && s.flagged());
    }

    #[test]
    fn autocorrelated_chain_has_smaller_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..2000)
                    .map(|_| {
                        x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                        x
                    })
                    .collect()
            })
            .collect();
        // AR(1) with φ = 0.9 has ESS ≈ n (1 − φ)/(1 + φ) ≈ 421.
        let e = ess(&chains);
        assert!(e > 300.0 && e < 600.0, "ess {e}");
    }

    #[test]
    fn rank_normalisation_handles_ties() {
        let z = rank_normalise(&[vec![1.0, 1.0, 2.0]]);
        assert_eq!(z[0][0], z[0][1]);
        assert!(z[0][2] > z[0][0]);
    }
}
