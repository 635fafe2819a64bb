//! Finite-population simulation: `N` agents share a stationary policy and
//! interact through the empirical distribution of their states.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{solve_frozen_mdp, FrozenSolution};
use crate::error::{Error, Result};
use crate::inner_opt::GreedyPolicy;
use crate::measure_ot::StateMeasure;
use crate::model::{Criterion, Model};
use crate::sampling::indexed_rng;

#[derive(Debug, Clone, Serialize)]
pub struct NagentRun {
    pub n_agents: usize,
    pub horizon: usize,
    pub n_rollouts: usize,
    pub seed: u64,
    /// Mean over rollouts of the population-averaged cost.
    pub mean_cost: f64,
    /// `mean_cost` minus the frozen-measure optimum over the same horizon.
    pub gap_estimate: f64,
    pub std_error: f64,
    /// Frozen-measure benchmark the gap is measured against.
    pub benchmark: f64,
    /// Discounted: `beta^T M / (1 - beta)`, the cost beyond the horizon.
    pub tail_bound: Option<f64>,
}

/// `beta^T * M / (1 - beta)`.
pub fn tail_bound(beta: f64, horizon: usize, m: f64) -> f64 {
    beta.powi(horizon as i32) * m / (1.0 - beta)
}

fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` beyond the accumulated mass: take the last charged state.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// One rollout: returns the population average of each agent's cost.
fn rollout(model: &Model, policy: &GreedyPolicy, mu0: &StateMeasure, n_agents: usize, horizon: usize, seed: u64, index: u64) -> f64 {
    let n = model.n_states();
    let mut rng = indexed_rng(seed, "nagent-rollouts", index);
    let mut states: Vec<usize> = (0..n_agents).map(|_| sample_index(mu0.probs(), &mut rng)).collect();
    let discounted = model.criterion() == Criterion::Discounted;
    let beta = model.beta().unwrap_or(1.0);
    let mut discount = 1.0;
    let mut total = 0.0;
    let mut rows = vec![0.0; n * n];
    let mut costs = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for _ in 0..horizon {
        counts.iter_mut().for_each(|c| *c = 0);
        for &s in &states {
            counts[s] += 1;
        }
        let empirical = StateMeasure::from_raw_counts(&counts, n_agents);
        let mut step_cost = 0.0;
        for x in 0..n {
            if counts[x] == 0 {
                continue;
            }
            let a = policy.action(x);
            costs[x] = model.cost(x, a, &empirical);
            model.kernel_row_into(x, a, &empirical, &mut rows[x * n..(x + 1) * n]);
            step_cost += counts[x] as f64 * costs[x];
        }
        let weight = if discounted { discount } else { 1.0 };
        total += weight * step_cost / n_agents as f64;
        discount *= beta;
        for s in states.iter_mut() {
            *s = sample_index(&rows[*s * n..(*s + 1) * n], &mut rng);
        }
    }
    if discounted {
        total
    } else {
        total / horizon as f64
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Simulates `n_agents` agents all playing `policy`, started i.i.d. from
/// `mu_star`, and compares the average agent cost with the optimum of the
/// problem frozen at `mu_star`.
///
/// Agents are exchangeable, so the cost of a representative agent is estimated
/// by the population average within each rollout. For the discounted
/// criterion the benchmark is the frozen optimum accumulated over the same
/// horizon, `(1 - beta^T) sum_x mu*(x) J*(x)`, which is exact when `mu_star`
/// is invariant; the untruncated tail is reported separately.
pub fn nagent_gap(
    model: &Model,
    policy: &GreedyPolicy,
    mu_star: &StateMeasure,
    n_agents: usize,
    horizon: usize,
    n_rollouts: usize,
    seed: u64,
) -> Result<NagentRun> {
    if n_agents < 2 {
        return Err(Error::Parameter(format!("n_agents = {n_agents} must be at least 2")));
    }
    if horizon == 0 || n_rollouts == 0 {
        return Err(Error::Parameter("horizon and rollout count must be positive".into()));
    }
    policy.validate(model)?;
    let frozen = solve_frozen_mdp(model, mu_star)?;
    nagent_gap_with(model, policy, mu_star, &frozen, n_agents, horizon, n_rollouts, seed)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn nagent_gap_with(
    model: &Model,
    policy: &GreedyPolicy,
    mu_star: &StateMeasure,
    frozen: &FrozenSolution,
    n_agents: usize,
    horizon: usize,
    n_rollouts: usize,
    seed: u64,
) -> Result<NagentRun> {
    let values: Vec<f64> = (0..n_rollouts as u64)
        .into_par_iter()
        .map(|r| rollout(model, policy, mu_star, n_agents, horizon, seed, r))
        .collect();
    let (mean_cost, std_error) = mean_and_stderr(&values);
    let (benchmark, tail) = match model.criterion() {
        Criterion::Discounted => {
            let beta = model.xi();
            let m = cost_bound(model, mu_star);
            ((1.0 - beta.powi(horizon as i32)) * frozen.value, Some(tail_bound(beta, horizon, m)))
        }
        Criterion::Average => (frozen.value, None),
    };
    Ok(NagentRun {
        n_agents,
        horizon,
        n_rollouts,
        seed,
        mean_cost,
        gap_estimate: mean_cost - benchmark,
        std_error,
        benchmark,
        tail_bound: tail,
    })
}

/// Largest stage cost over the grid and lattice at `mu`, the empirical
/// measures being unknown in advance; Diracs bound the crowding terms.
fn cost_bound(model: &Model, mu: &StateMeasure) -> f64 {
    let n = model.n_states();
    let mut measures = vec![mu.clone()];
    if model.measure_dependent() {
        measures.extend((0..n).map(|i| StateMeasure::dirac(n, i)));
    }
    let mut m = 0.0_f64;
    for nu in &measures {
        for x in 0..n {
            for k in 0..model.n_actions() {
                m = m.max(model.cost_at(x, k, nu));
            }
        }
    }
    m
}

#[derive(Debug, Clone, Serialize)]
pub struct LongRunEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub steps: usize,
    pub n_seeds: usize,
}

/// Monte-Carlo long-run average cost of one agent playing `policy` against
/// the frozen measure `mu`, started from `mu`; one run of `steps` transitions
/// per seed.
pub fn long_run_average_cost(
    model: &Model,
    policy: &GreedyPolicy,
    mu: &StateMeasure,
    steps: usize,
    n_seeds: usize,
    seed: u64,
) -> Result<LongRunEstimate> {
    if steps == 0 || n_seeds == 0 {
        return Err(Error::Parameter("steps and seed count must be positive".into()));
    }
    let n = model.n_states();
    let mut rows = vec![0.0; n * n];
    let mut costs = vec![0.0; n];
    for x in 0..n {
        model.kernel_row_into(x, policy.action(x), mu, &mut rows[x * n..(x + 1) * n]);
        costs[x] = model.cost(x, policy.action(x), mu);
    }
    let values: Vec<f64> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = indexed_rng(seed, "long-run-average", r);
            let mut s = sample_index(mu.probs(), &mut rng);
            let mut total = 0.0;
            for _ in 0..steps {
                total += costs[s];
                s = sample_index(&rows[s * n..(s + 1) * n], &mut rng);
            }
            total / steps as f64
        })
        .collect();
    let (mean, std_error) = mean_and_stderr(&values);
    Ok(LongRunEstimate { mean, std_error, steps, n_seeds })
}
