//! Independent checks of computed equilibria and the finite-population
//! simulator.
//!
//! Nothing here calls the solver operators or the projected-gradient
//! minimizer: frozen-measure problems are solved by plain value iteration (or
//! the minorized average-cost iteration), box actions are minimized by a
//! lattice scan followed by golden-section refinement, and policies are
//! evaluated by solving linear systems.

mod nagent;

pub use nagent::{long_run_average_cost, nagent_gap, tail_bound, LongRunEstimate, NagentRun};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inner_opt::GreedyPolicy;
use crate::measure_ot::{pushforward, w1_distance, StateMeasure};
use crate::model::{Criterion, Model};
use crate::qfunction::{MfePair, QFunction};

const VI_TOL: f64 = 1e-13;
const VI_CAP: usize = 2_000_000;

/// Optimal solution of the MDP obtained by freezing the population measure.
#[derive(Debug, Clone)]
pub struct FrozenSolution {
    /// Optimal Q-function on the lattice.
    pub q: QFunction,
    /// Optimal value `J*(x)` (discounted) or relative value `h(x)` (average).
    pub values: Vec<f64>,
    pub policy: GreedyPolicy,
    /// `sum_x mu(x) J*(x)` (discounted) or the optimal gain (average).
    pub value: f64,
    pub iterations: usize,
}

/// `min_a [c(x, a, mu) + xi * sum_y v(y) (p(y | x, a, mu) - lam(y))]`.
struct FrozenStage<'a> {
    model: &'a Model,
    mu: &'a StateMeasure,
    xi: f64,
    lam: Option<&'a [f64]>,
}

impl FrozenStage<'_> {
    fn eval(&self, x: usize, a: &[f64], v: &[f64]) -> f64 {
        let row = self.model.kernel_row(x, a, self.mu);
        let mut s: f64 = row.iter().zip(v).map(|(p, h)| p * h).sum();
        if let Some(lam) = self.lam {
            s -= lam.iter().zip(v).map(|(l, h)| l * h).sum::<f64>();
        }
        self.model.cost(x, a, self.mu) + self.xi * s
    }

    fn minimize(&self, x: usize, v: &[f64]) -> (Vec<f64>, f64) {
        let actions = self.model.actions();
        let lattice = actions.lattice();
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for (k, a) in lattice.iter().enumerate() {
            let f = self.eval(x, a, v);
            if f < best_val {
                best = k;
                best_val = f;
            }
        }
        let mut a = lattice[best].clone();
        if !actions.is_box() {
            return (a, best_val);
        }
        let dim = actions.dim();
        let (lo, hi) = (actions.lower(), actions.upper());
        // Lattice spacing per coordinate brackets the minimizer of a unimodal section.
        let spacing: Vec<f64> = (0..dim)
            .map(|c| {
                let mut axis: Vec<f64> = lattice.iter().map(|p| p[c]).collect();
                axis.sort_by(f64::total_cmp);
                axis.dedup();
                if axis.len() > 1 {
                    axis[1] - axis[0]
                } else {
                    0.0
                }
            })
            .collect();
        let mut fa = best_val;
        let sweeps = if dim == 1 { 1 } else { 30 };
        for sweep in 0..sweeps {
            let before = fa;
            for c in 0..dim {
                if spacing[c] == 0.0 {
                    continue;
                }
                let reach = if sweep == 0 { spacing[c] } else { spacing[c] * 0.5f64.powi(sweep) };
                let l = (a[c] - reach).max(lo[c]);
                let h = (a[c] + reach).min(hi[c]);
                let (t, ft) = golden_section(|t| {
                    let mut p = a.clone();
                    p[c] = t;
                    self.eval(x, &p, v)
                }, l, h, 1e-11 * (hi[c] - lo[c]));
                if ft < fa {
                    a[c] = t;
                    fa = ft;
                }
            }
            if before - fa <= 1e-15 * fa.abs().max(1.0) && sweep > 0 {
                break;
            }
        }
        (a, fa)
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    // Compare the interior points with the bracket ends so boundary minima are kept.
    let mut best = (x1, f1);
    for t in [x2, lo, hi] {
        let ft = f(t);
        if ft < best.1 {
            best = (t, ft);
        }
    }
    best
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Pointwise minimum over grid states and lattice actions of `p(. | x, a, mu)`.
fn frozen_minorization(model: &Model, mu: &StateMeasure) -> Vec<f64> {
    let n = model.n_states();
    let mut lam = vec![f64::INFINITY; n];
    for x in 0..n {
        for a in model.actions().lattice() {
            for (l, p) in lam.iter_mut().zip(model.kernel_row(x, a, mu)) {
                *l = l.min(p);
            }
        }
    }
    lam
}

/// Solves the MDP with the population frozen at `mu`.
///
/// Discounted: value iteration on `J`. Average: the iteration
/// `h <- min_a [c + sum h (p - lambda_mu)]` with `lambda_mu` the pointwise
/// minimum of the kernel rows at `mu`, whose fixed point satisfies the
/// optimality equation with gain `sum h lambda_mu`; when that minimum carries
/// little mass, relative value iteration is used instead.
pub fn solve_frozen_mdp(model: &Model, mu: &StateMeasure) -> Result<FrozenSolution> {
    let n = model.n_states();
    if mu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mu.len() });
    }
    let lam_mu;
    let (xi, lam, relative) = match model.criterion() {
        Criterion::Discounted => (model.xi(), None, false),
        Criterion::Average => {
            lam_mu = frozen_minorization(model, mu);
            if lam_mu.iter().sum::<f64>() >= 1e-3 {
                (1.0, Some(lam_mu.as_slice()), false)
            } else {
                (1.0, None, true)
            }
        }
    };
    let stage = FrozenStage { model, mu, xi, lam };
    let mut v = vec![0.0; n];
    let mut iterations = 0;
    let mut offset = 0.0;
    loop {
        let mut next: Vec<f64> = (0..n).into_par_iter().map(|x| stage.minimize(x, &v).1).collect();
        if relative {
            offset = next[0];
            next.iter_mut().for_each(|h| *h -= offset);
        }
        iterations += 1;
        let change = sup_diff(&next, &v);
        v = next;
        let scale = v.iter().fold(1.0_f64, |m, h| m.max(h.abs()));
        if change <= VI_TOL * scale || iterations >= VI_CAP {
            break;
        }
    }
    let decisions: Vec<(Vec<f64>, f64)> = (0..n).into_par_iter().map(|x| stage.minimize(x, &v)).collect();
    let value = match model.criterion() {
        Criterion::Discounted => mu.expect(&v),
        Criterion::Average if relative => offset,
        Criterion::Average => v.iter().zip(lam.unwrap_or(&[])).map(|(h, l)| h * l).sum(),
    };
    let na = model.n_actions();
    let lattice = model.actions().lattice();
    let table: Vec<f64> = (0..n * na).into_par_iter().map(|c| stage.eval(c / na, &lattice[c % na], &v)).collect();
    let mins = decisions.iter().map(|d| d.1).collect();
    let policy = GreedyPolicy::new(decisions.into_iter().map(|d| d.0).collect());
    Ok(FrozenSolution { q: QFunction::from_parts(n, na, table, mins), values: v, policy, value, iterations })
}

/// Transition matrix and stage costs of a stationary policy under a frozen measure.
fn policy_chain(model: &Model, policy: &GreedyPolicy, mu: &StateMeasure) -> (Vec<f64>, Vec<f64>) {
    let n = model.n_states();
    let mut p = vec![0.0; n * n];
    let mut c = vec![0.0; n];
    for x in 0..n {
        model.kernel_row_into(x, policy.action(x), mu, &mut p[x * n..(x + 1) * n]);
        c[x] = model.cost(x, policy.action(x), mu);
    }
    (p, c)
}

/// Solves `A z = b` by Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap_or(col);
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(Error::Degenerate("singular linear system in policy evaluation".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row * n + k] * z[k]).sum();
        z[row] = (b[row] - s) / a[row * n + row];
    }
    Ok(z)
}

/// Discounted cost `J_pi(x)` of a stationary policy against a frozen measure.
pub fn evaluate_policy_discounted(model: &Model, policy: &GreedyPolicy, mu: &StateMeasure) -> Result<Vec<f64>> {
    let beta = model.beta().ok_or_else(|| Error::Parameter("discount factor required".into()))?;
    let n = model.n_states();
    let (p, c) = policy_chain(model, policy, mu);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = if i == j { 1.0 } else { 0.0 } - beta * p[i * n + j];
        }
    }
    solve_linear(a, c)
}

/// Stationary distribution of a stationary policy's chain under a frozen measure.
pub fn stationary_distribution(model: &Model, policy: &GreedyPolicy, mu: &StateMeasure) -> Result<Vec<f64>> {
    let n = model.n_states();
    let (p, _) = policy_chain(model, policy, mu);
    // pi (P - I) = 0 with the last equation replaced by sum pi = 1.
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = p[j * n + i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    b[n - 1] = 1.0;
    solve_linear(a, b)
}

/// Long-run average cost of a stationary policy against a frozen measure.
pub fn evaluate_policy_average(model: &Model, policy: &GreedyPolicy, mu: &StateMeasure) -> Result<f64> {
    let pi = stationary_distribution(model, policy, mu)?;
    let (_, c) = policy_chain(model, policy, mu);
    Ok(pi.iter().zip(&c).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumCertificate {
    pub criterion: Criterion,
    /// Discounted: `max_x (J_pi(x) - J*(x))` under the frozen measure.
    /// Average: gain of the policy minus the optimal gain.
    pub exploitability: f64,
    /// `W1(mu*, pushforward(mu*, pi*))`.
    pub invariance_residual: f64,
    /// Discounted: lattice gap `|Q - c - beta sum Q_min p|`.
    pub bellman_residual: Option<f64>,
    /// Average: half-spread of `min_a [c + sum Q_min p] - Q_min` over states.
    pub acoe_residual: Option<f64>,
    pub policy_value: f64,
    pub optimal_value: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks optimality of `policy` against the frozen `pair.mu` and invariance of
/// `pair.mu` under `policy`; passes when both residuals are within `tol`.
pub fn certify(model: &Model, pair: &MfePair, policy: &GreedyPolicy, tol: f64) -> Result<EquilibriumCertificate> {
    policy.validate(model)?;
    let mu = &pair.mu;
    if mu.len() != model.n_states() || pair.q.n_states() != model.n_states() || pair.q.n_actions() != model.n_actions() {
        return Err(Error::DimensionMismatch { expected: model.n_states(), found: mu.len() });
    }
    let frozen = solve_frozen_mdp(model, mu)?;
    let next = pushforward(mu, policy, model);
    let invariance_residual = w1_distance(mu, &next, model.states())?;
    let h = pair.q.q_min();
    let n = model.n_states();
    let lattice = model.actions().lattice();
    let (exploitability, policy_value, optimal_value, bellman_residual, acoe_residual) = match model.criterion() {
        Criterion::Discounted => {
            let j = evaluate_policy_discounted(model, policy, mu)?;
            let gap = j.iter().zip(&frozen.values).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
            let stage = FrozenStage { model, mu, xi: model.xi(), lam: None };
            let na = model.n_actions();
            let bellman = (0..n * na)
                .into_par_iter()
                .map(|c| (pair.q.get(c / na, c % na) - stage.eval(c / na, &lattice[c % na], h)).abs())
                .reduce(|| 0.0, f64::max);
            (gap, mu.expect(&j), frozen.value, Some(bellman), None)
        }
        Criterion::Average => {
            let g = evaluate_policy_average(model, policy, mu)?;
            let stage = FrozenStage { model, mu, xi: 1.0, lam: None };
            let shifts: Vec<f64> = (0..n).into_par_iter().map(|x| stage.minimize(x, h).1 - h[x]).collect();
            let hi = shifts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = shifts.iter().cloned().fold(f64::INFINITY, f64::min);
            (g - frozen.value, g, frozen.value, None, Some(0.5 * (hi - lo)))
        }
    };
    let pass = exploitability <= tol && invariance_residual <= tol;
    Ok(EquilibriumCertificate {
        criterion: model.criterion(),
        exploitability,
        invariance_residual,
        bellman_residual,
        acoe_residual,
        policy_value,
        optimal_value,
        tol,
        pass,
    })
}
