//! Hamiltonian Monte Carlo with a diagonal metric.
//!
//! Each transition draws a trajectory length uniformly from
//! `1..=max_leapfrog_steps`. Warmup runs dual-averaging step-size adaptation
//! throughout and estimates the inverse metric from two windows:
//!
//! ```text
//! [0, 15%)     step size only
//! [15%, 50%)   first metric window
//! [50%, 90%)   second metric window (the final metric)
//! [90%, 100%)  step size only
//! ```
//!
//! Step-size adaptation restarts after each metric update. After warmup the
//! step size is frozen at the dual-averaging average.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;

/// Energy error beyond which a transition counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// A differentiable log density on `ℝᵈ`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Returns `log p(x)` and writes its gradient into `grad`.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl LogDensity for Model {
    fn dim(&self) -> usize {
        Model::dim(self)
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        self.evaluate(x, crate::model::Terms::ALL, Some(grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub thin: usize,
    pub target_accept: f64,
    pub max_leapfrog_steps: usize,
    pub seed: u64,
    /// Half-width of the uniform jitter applied to initial values.
    pub init_jitter: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iterations: 10_000,
            warmup: 3_000,
            thin: 7,
            target_accept: 0.8,
            max_leapfrog_steps: 64,
            seed: 0,
            init_jitter: 0.5,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Domain("need at least one chain".into()));
        }
        if self.warmup >= self.iterations {
            return Err(Error::Domain(format!(
                "warmup ({}) must be less than iterations ({})",
                self.warmup, self.iterations
            )));
        }
        if self.thin == 0 || self.max_leapfrog_steps == 0 {
            return Err(Error::Domain("thin and max_leapfrog_steps must be at least 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Domain(format!(
                "target_accept must be in (0, 1), got {}",
                self.target_accept
            )));
        }
        Ok(())
    }

    /// Number of retained draws per chain.
    pub fn retained(&self) -> usize {
        (self.iterations - self.warmup) / self.thin
    }
}

/// Runs `steps` leapfrog steps in place and returns the final log density;
/// `grad` must hold the gradient at the starting position on entry and holds
/// the gradient at the final position on return. A non-finite value is
/// returned as soon as the trajectory leaves the region where the density is
/// finite.
pub fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    position: &mut [f64],
    momentum: &mut [f64],
    grad: &mut [f64],
    inv_metric: &[f64],
    step: f64,
    steps: usize,
) -> f64 {
    let mut logp = f64::NAN;
    if steps == 0 {
        return target.log_density_and_grad(position, grad);
    }
    for _ in 0..steps {
        for (p, g) in momentum.iter_mut().zip(grad.iter()) {
            *p += 0.5 * step * g;
        }
        for ((x, p), m) in position.iter_mut().zip(momentum.iter()).zip(inv_metric) {
            *x += step * m * p;
        }
        logp = target.log_density_and_grad(position, grad);
        if !logp.is_finite() {
            return f64::NEG_INFINITY;
        }
        for (p, g) in momentum.iter_mut().zip(grad.iter()) {
            *p += 0.5 * step * g;
        }
    }
    logp
}

pub fn kinetic_energy(momentum: &[f64], inv_metric: &[f64]) -> f64 {
    0.5 * momentum
        .iter()
        .zip(inv_metric)
        .map(|(p, m)| m * p * p)
        .sum::<f64>()
}

/// Dual-averaging step-size adaptation with the usual constants.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_step_bar: f64,
    count: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
}

impl DualAveraging {
    pub fn new(initial_step: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * initial_step).ln(),
            target,
            h_bar: 0.0,
            log_step_bar: 0.0,
            count: 0.0,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
        }
    }

    /// Records an acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept: f64) -> f64 {
        self.count += 1.0;
        let eta = 1.0 / (self.count + self.t0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept);
        let log_step = self.mu - self.count.sqrt() / self.gamma * self.h_bar;
        let w = self.count.powf(-self.kappa);
        self.log_step_bar = w * log_step + (1.0 - w) * self.log_step_bar;
        log_step.exp()
    }

    pub fn final_step(&self) -> f64 {
        self.log_step_bar.exp()
    }
}

#[derive(Debug, Clone, Default)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Sample variance shrunk towards `1e-3`.
    fn regularised_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|m2| {
                let var = if self.n > 1 { m2 / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Outcome of a single transition.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub accept_prob: f64,
    pub divergent: bool,
    pub steps: usize,
}

struct ChainState {
    position: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

fn transition<T: LogDensity + ?Sized>(
    target: &T,
    state: &mut ChainState,
    inv_metric: &[f64],
    step: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Transition {
    let dim = state.position.len();
    let mut momentum: Vec<f64> = (0..dim)
        .map(|i| rng.sample::<f64, _>(StandardNormal) / inv_metric[i].sqrt())
        .collect();
    let steps = rng.random_range(1..=max_steps);
    let h0 = -state.logp + kinetic_energy(&momentum, inv_metric);
    let mut position = state.position.clone();
    let mut grad = state.grad.clone();
    let logp = leapfrog(target, &mut position, &mut momentum, &mut grad, inv_metric, step, steps);
    let h1 = -logp + kinetic_energy(&momentum, inv_metric);
    let delta = h1 - h0;
    if !delta.is_finite() || delta > DIVERGENCE_THRESHOLD {
        return Transition {
            accept_prob: 0.0,
            divergent: true,
            steps,
        };
    }
    let accept_prob = (-delta).exp().min(1.0);
    if rng.random::<f64>() < accept_prob {
        state.position = position;
        state.grad = grad;
        state.logp = logp;
    }
    Transition {
        accept_prob,
        divergent: false,
        steps,
    }
}

fn find_reasonable_step<T: LogDensity + ?Sized>(
    target: &T,
    state: &ChainState,
    inv_metric: &[f64],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let dim = state.position.len();
    let log_ratio = |step: f64, rng: &mut ChaCha8Rng| {
        let mut momentum: Vec<f64> = (0..dim)
            .map(|i| rng.sample::<f64, _>(StandardNormal) / inv_metric[i].sqrt())
            .collect();
        let h0 = -state.logp + kinetic_energy(&momentum, inv_metric);
        let mut position = state.position.clone();
        let mut grad = state.grad.clone();
        let logp = leapfrog(target, &mut position, &mut momentum, &mut grad, inv_metric, step, 1);
        let h1 = -logp + kinetic_energy(&momentum, inv_metric);
        let r = h0 - h1;
        if r.is_nan() {
            f64::NEG_INFINITY
        } else {
            r
        }
    };
    let mut step = 1.0;
    let direction = if log_ratio(step, rng) > 0.5f64.ln() { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let r = log_ratio(step, rng);
        if direction * r <= -direction * 2f64.ln() {
            break;
        }
        step *= 2f64.powf(direction);
    }
    step.clamp(1e-10, 1e3)
}

/// One chain's retained output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainDraws {
    pub chain: usize,
    /// Retained unconstrained states in sampling order.
    pub states: Vec<Vec<f64>>,
    /// Post-warmup iteration index (0-based) of each retained state.
    pub iterations: Vec<usize>,
    pub log_density: Vec<f64>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    /// Mean acceptance statistic after warmup.
    pub accept_rate: f64,
    /// Mean acceptance statistic over the terminal warmup window.
    pub adaptation_accept: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub mean_leapfrog_steps: f64,
}

/// Runs one chain from `init`.
pub fn run_chain<T: LogDensity + ?Sized>(
    config: &SamplerConfig,
    target: &T,
    init: Vec<f64>,
    chain: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ChainDraws> {
    config.validate()?;
    let dim = target.dim();
    if init.len() != dim {
        return Err(Error::Chain {
            chain,
            message: format!("initial state has length {}, target has {dim}", init.len()),
        });
    }
    let mut grad = vec![0.0; dim];
    let logp = target.log_density_and_grad(&init, &mut grad);
    if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Chain {
            chain,
            message: "log density is not finite at the initial state".into(),
        });
    }
    let mut state = ChainState {
        position: init,
        grad,
        logp,
    };
    let mut inv_metric = vec![1.0; dim];
    let mut step = find_reasonable_step(target, &state, &inv_metric, rng);
    let mut adapt = DualAveraging::new(step, config.target_accept);

    let w = config.warmup;
    let window1 = (w as f64 * 0.15) as usize;
    let window2 = (w as f64 * 0.5) as usize;
    let terminal = (w as f64 * 0.9) as usize;
    let mut welford = Welford::new(dim);
    let mut warmup_divergences = 0;
    let mut terminal_accept = Vec::new();

    for it in 0..w {
        let tr = transition(target, &mut state, &inv_metric, step, config.max_leapfrog_steps, rng);
        warmup_divergences += tr.divergent as usize;
        step = adapt.update(tr.accept_prob);
        if it >= terminal {
            terminal_accept.push(tr.accept_prob);
        }
        if it >= window1 && it < terminal {
            welford.push(&state.position);
            if it + 1 == window2 || it + 1 == terminal {
                if welford.n >= 10 {
                    inv_metric = welford.regularised_variance();
                }
                welford = Welford::new(dim);
                step = find_reasonable_step(target, &state, &inv_metric, rng);
                adapt = DualAveraging::new(step, config.target_accept);
            }
        }
    }
    if w > 0 {
        step = adapt.final_step();
    }

    let retained = config.retained();
    let mut states = Vec::with_capacity(retained);
    let mut iterations = Vec::with_capacity(retained);
    let mut log_density = Vec::with_capacity(retained);
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    let mut total_steps = 0usize;
    let sampling = config.iterations - config.warmup;
    for it in 0..sampling {
        let tr = transition(target, &mut state, &inv_metric, step, config.max_leapfrog_steps, rng);
        accept_sum += tr.accept_prob;
        divergences += tr.divergent as usize;
        total_steps += tr.steps;
        if (it + 1) % config.thin == 0 && states.len() < retained {
            states.push(state.position.clone());
            iterations.push(it);
            log_density.push(state.logp);
        }
    }
    if divergences == sampling {
        return Err(Error::Chain {
            chain,
            message: "every post-warmup transition diverged".into(),
        });
    }
    if divergences as f64 > 0.1 * sampling as f64 {
        log::warn!("chain {chain}: {divergences} of {sampling} post-warmup transitions diverged");
    }
    Ok(ChainDraws {
        chain,
        states,
        iterations,
        log_density,
        step_size: step,
        inv_metric,
        accept_rate: accept_sum / sampling as f64,
        adaptation_accept: if terminal_accept.is_empty() {
            f64::NAN
        } else {
            crate::stats::mean(&terminal_accept)
        },
        divergences,
        warmup_divergences,
        mean_leapfrog_steps: total_steps as f64 / sampling as f64,
    })
}

/// RNG for `chain` derived from the master seed.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Draws from all chains, ordered by chain index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_retained(&self) -> usize {
        self.chains.first().map_or(0, |c| c.states.len())
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences).sum()
    }

    /// Per-chain values of one unconstrained coordinate.
    pub fn coordinate(&self, i: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.states.iter().map(|s| s[i]).collect())
            .collect()
    }

    /// Sampler settings and outcomes as JSON, without the draws themselves.
    pub fn sampler_report(&self, config: &SamplerConfig) -> serde_json::Value {
        serde_json::json!({
            "config": config,
            "chains": self.chains.iter().map(|c| serde_json::json!({
                "chain": c.chain,
                "step_size": c.step_size,
                "accept_rate": c.accept_rate,
                "adaptation_accept": c.adaptation_accept,
                "divergences": c.divergences,
                "warmup_divergences": c.warmup_divergences,
                "mean_leapfrog_steps": c.mean_leapfrog_steps,
                "inv_metric": c.inv_metric,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Runs `config.chains` chains in parallel. `init` produces the starting point
/// of each chain from that chain's RNG.
pub fn run_chains<T, F>(config: &SamplerConfig, target: &T, init: F) -> Result<PosteriorDraws>
where
    T: LogDensity + ?Sized,
    F: Fn(usize, &mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    config.validate()?;
    let chains = (0..config.chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = chain_rng(config.seed, chain);
            let start = init(chain, &mut rng);
            run_chain(config, target, start, chain, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDraws { chains })
}

/// Fits a [`Model`] with jittered initial values.
pub fn sample_model(model: &Model, config: &SamplerConfig) -> Result<PosteriorDraws> {
    run_chains(config, model, |_, rng| model.initial_state(rng, config.init_jitter))
}
