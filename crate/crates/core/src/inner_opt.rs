//! Minimization of `a -> F(x, v, mu, a) = c(x, a, mu) + xi * sum_y v(y) K(y | x, a, mu)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure_ot::{w1_distance, StateMeasure};
use crate::model::{Criterion, Model, ModelConstants};
use crate::qfunction::QFunction;

const GRAD_TOL: f64 = 1e-10;
const GRAD_FAIL: f64 = 1e-6;
const MAX_STEPS: usize = 10_000;
/// Grid values within this relative gap of the minimum count as ties.
const TIE_TOL: f64 = 1e-12;

/// Which kernel appears inside `F`.
#[derive(Debug, Clone, Copy)]
pub enum KernelMode<'a> {
    /// The transition kernel `p`.
    Full,
    /// The sub-stochastic kernel `q = p - lambda`.
    Sub(&'a [f64]),
}

/// `F(x, v, mu, .)` for a fixed value function `v` and population `mu`.
#[derive(Debug, Clone, Copy)]
pub struct FEvaluator<'a> {
    model: &'a Model,
    q_min: &'a [f64],
    mu: &'a StateMeasure,
    xi: f64,
    kernel: KernelMode<'a>,
    /// `sum_y v(y) lambda(y)`, subtracted in sub-kernel mode.
    offset: f64,
}

impl<'a> FEvaluator<'a> {
    /// Evaluator matching the model's criterion: `xi = beta` with `p`, or
    /// `xi = 1` with the sub-kernel built from `lambda`.
    pub fn for_model(model: &'a Model, q_min: &'a [f64], mu: &'a StateMeasure, lambda: Option<&'a [f64]>) -> Result<Self> {
        match model.criterion() {
            Criterion::Discounted => Self::with_parts(model, q_min, mu, model.xi(), KernelMode::Full),
            Criterion::Average => {
                let lam = lambda.ok_or_else(|| Error::Parameter("average criterion needs a minorizing measure".into()))?;
                Self::with_parts(model, q_min, mu, 1.0, KernelMode::Sub(lam))
            }
        }
    }

    pub fn with_parts(model: &'a Model, q_min: &'a [f64], mu: &'a StateMeasure, xi: f64, kernel: KernelMode<'a>) -> Result<Self> {
        let n = model.n_states();
        if q_min.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: q_min.len() });
        }
        if mu.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: mu.len() });
        }
        let offset = match kernel {
            KernelMode::Full => 0.0,
            KernelMode::Sub(lam) => {
                if lam.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: lam.len() });
                }
                q_min.iter().zip(lam).map(|(v, l)| v * l).sum()
            }
        };
        Ok(Self { model, q_min, mu, xi, kernel, offset })
    }

    pub fn model(&self) -> &'a Model {
        self.model
    }

    pub fn q_min(&self) -> &'a [f64] {
        self.q_min
    }

    pub fn mu(&self) -> &'a StateMeasure {
        self.mu
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn kernel_mode(&self) -> KernelMode<'a> {
        self.kernel
    }

    /// `F(x, a)` at an arbitrary action.
    pub fn value(&self, x: usize, a: &[f64]) -> f64 {
        let mut row = vec![0.0; self.model.n_states()];
        self.model.kernel_row_into(x, a, self.mu, &mut row);
        self.model.cost(x, a, self.mu) + self.xi * self.integral(&row)
    }

    /// `F(x, a_k)` at lattice index `k`.
    pub fn value_at(&self, x: usize, k: usize) -> f64 {
        let mut row = vec![0.0; self.model.n_states()];
        self.model.kernel_row_at(x, k, self.mu, &mut row);
        self.model.cost_at(x, k, self.mu) + self.xi * self.integral(&row)
    }

    fn integral(&self, row: &[f64]) -> f64 {
        let full: f64 = self.q_min.iter().zip(row).map(|(v, p)| v * p).sum();
        full - self.offset
    }
}

/// Deterministic stationary policy `x -> f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyPolicy {
    actions: Vec<Vec<f64>>,
}

impl GreedyPolicy {
    pub fn new(actions: Vec<Vec<f64>>) -> Self {
        Self { actions }
    }

    /// Policy taking the same action everywhere.
    pub fn constant(n_states: usize, a: &[f64]) -> Self {
        Self { actions: vec![a.to_vec(); n_states] }
    }

    pub fn action(&self, x: usize) -> &[f64] {
        &self.actions[x]
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Checks every entry against the model's action set.
    pub fn validate(&self, model: &Model) -> Result<()> {
        if self.actions.len() != model.n_states() {
            return Err(Error::DimensionMismatch { expected: model.n_states(), found: self.actions.len() });
        }
        for (x, a) in self.actions.iter().enumerate() {
            if !model.actions().contains(a) {
                return Err(Error::Schema(format!("policy action {a:?} at state {x} is outside the action set")));
            }
        }
        Ok(())
    }

    /// Largest Euclidean distance between the actions of two policies.
    pub fn max_distance(&self, other: &GreedyPolicy) -> f64 {
        self.actions.iter().zip(&other.actions).map(|(a, b)| euclid(a, b)).fold(0.0, f64::max)
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// Minimizer and minimum of `F(x, .)`.
///
/// Grid actions: exhaustive search; values within a relative `1e-12` of the
/// minimum are ties, resolved to the lowest index, so that rounding noise
/// cannot flip the choice between equally good actions.
/// Box actions: projected gradient descent from the best lattice point, with
/// central finite-difference gradients.
pub fn minimize_f(ev: &FEvaluator, x: usize) -> Result<(Vec<f64>, f64)> {
    let actions = ev.model.actions();
    let mut best = 0;
    let mut best_val = ev.value_at(x, 0);
    for k in 1..actions.len() {
        let v = ev.value_at(x, k);
        if v < best_val {
            best = k;
            best_val = v;
        }
    }
    if !actions.is_box() {
        let cutoff = best_val + TIE_TOL * best_val.abs().max(1.0);
        let first = (0..best).find(|&k| ev.value_at(x, k) <= cutoff).unwrap_or(best);
        return Ok((actions.lattice()[first].clone(), best_val));
    }
    projected_descent(ev, x, actions.lattice()[best].clone(), best_val)
}

fn projected_descent(ev: &FEvaluator, x: usize, mut a: Vec<f64>, mut fa: f64) -> Result<(Vec<f64>, f64)> {
    let actions = ev.model.actions();
    let (lo, hi) = (actions.lower(), actions.upper());
    let widths: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
    if widths.iter().all(|w| *w == 0.0) {
        return Ok((a, fa));
    }
    let f = |p: &[f64]| ev.value(x, p);
    let mut grad_norm = f64::INFINITY;
    let mut trial = a.clone();
    for _ in 0..MAX_STEPS {
        let g = fd_gradient(&f, &a, fa, lo, hi, &widths);
        grad_norm = projected_gradient_norm(&a, &g, lo, hi);
        if grad_norm <= GRAD_TOL {
            return Ok((a, fa));
        }
        let lip = fd_curvature(&f, &a, fa, lo, hi, &widths);
        let mut step = 1.0 / lip;
        let mut moved = false;
        for _ in 0..60 {
            for c in 0..a.len() {
                trial[c] = (a[c] - step * g[c]).clamp(lo[c], hi[c]);
            }
            let ft = f(&trial);
            if ft < fa {
                a.copy_from_slice(&trial);
                fa = ft;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if grad_norm > GRAD_FAIL {
        return Err(Error::NoConvergence { state: Some(x), grad_norm });
    }
    Ok((a, fa))
}

/// Central differences with step `1e-5 * width`, one-sided at the bounds.
fn fd_gradient(f: &impl Fn(&[f64]) -> f64, a: &[f64], fa: f64, lo: &[f64], hi: &[f64], widths: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; a.len()];
    let mut p = a.to_vec();
    for c in 0..a.len() {
        if widths[c] == 0.0 {
            continue;
        }
        let h = 1e-5 * widths[c];
        let up = a[c] + h <= hi[c];
        let down = a[c] - h >= lo[c];
        g[c] = if up && down {
            p[c] = a[c] + h;
            let fp = f(&p);
            p[c] = a[c] - h;
            let fm = f(&p);
            (fp - fm) / (2.0 * h)
        } else if up {
            p[c] = a[c] + h;
            (f(&p) - fa) / h
        } else {
            p[c] = a[c] - h;
            (fa - f(&p)) / h
        };
        p[c] = a[c];
    }
    g
}

/// Local smoothness estimate: largest second difference over coordinates.
fn fd_curvature(f: &impl Fn(&[f64]) -> f64, a: &[f64], fa: f64, lo: &[f64], hi: &[f64], widths: &[f64]) -> f64 {
    let mut lip = 0.0_f64;
    let mut p = a.to_vec();
    for c in 0..a.len() {
        if widths[c] == 0.0 {
            continue;
        }
        let h = 1e-3 * widths[c];
        let centre = a[c].clamp(lo[c] + h, hi[c] - h);
        p[c] = centre;
        let f0 = if centre == a[c] { fa } else { f(&p) };
        p[c] = centre + h;
        let fp = f(&p);
        p[c] = centre - h;
        let fm = f(&p);
        p[c] = a[c];
        lip = lip.max((fp - 2.0 * f0 + fm).abs() / (h * h));
    }
    lip.max(1e-8)
}

/// `|a - proj(a - g)|`, zero at a KKT point of the box.
fn projected_gradient_norm(a: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    a.iter()
        .zip(g)
        .enumerate()
        .map(|(c, (v, d))| {
            let r = v - (v - d).clamp(lo[c], hi[c]);
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Minimizer at every state, together with the minimum values.
pub fn greedy_step(ev: &FEvaluator) -> Result<(GreedyPolicy, Vec<f64>)> {
    let results: Vec<Result<(Vec<f64>, f64)>> =
        (0..ev.model.n_states()).into_par_iter().map(|x| minimize_f(ev, x)).collect();
    let mut actions = Vec::with_capacity(results.len());
    let mut mins = Vec::with_capacity(results.len());
    for r in results {
        let (a, v) = r?;
        actions.push(a);
        mins.push(v);
    }
    Ok((GreedyPolicy { actions }, mins))
}

pub fn greedy_policy(ev: &FEvaluator) -> Result<GreedyPolicy> {
    greedy_step(ev).map(|(p, _)| p)
}

/// One sample `(x, Q, mu)` versus `(y, Q_hat, mu_hat)` for the minimizer stability bound.
#[derive(Debug, Clone)]
pub struct PerturbationTuple {
    pub x: usize,
    pub q: QFunction,
    pub mu: StateMeasure,
    pub y: usize,
    pub q_hat: QFunction,
    pub mu_hat: StateMeasure,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub state_distance: f64,
    pub q_distance: f64,
    pub w1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub sensitivity: f64,
    pub checks: Vec<PerturbationCheck>,
    /// Indices into `checks` with `lhs > rhs + 1e-8`.
    pub violations: Vec<usize>,
    pub max_excess: f64,
}

impl PerturbationReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates both sides of `|f(y, Q_hat, mu_hat) - f(x, Q, mu)| <= (K_F / rho) (d(x, y) + |Q - Q_hat|_w + W1(mu, mu_hat))`.
pub fn check_perturbation_bound(
    model: &Model,
    tuples: &[PerturbationTuple],
    constants: &ModelConstants,
) -> Result<PerturbationReport> {
    let s = constants.sensitivity;
    let lam = constants.lambda.as_deref();
    let checks: Vec<Result<PerturbationCheck>> = tuples
        .par_iter()
        .map(|t| {
            let ev = FEvaluator::for_model(model, t.q.q_min(), &t.mu, lam)?;
            let ev_hat = FEvaluator::for_model(model, t.q_hat.q_min(), &t.mu_hat, lam)?;
            let (a, _) = minimize_f(&ev, t.x)?;
            let (a_hat, _) = minimize_f(&ev_hat, t.y)?;
            let state_distance = model.states().dist(t.x, t.y);
            let q_distance = t.q.w_distance(&t.q_hat, model);
            let w1 = w1_distance(&t.mu, &t.mu_hat, model.states())?;
            let total = state_distance + q_distance + w1;
            let rhs = if total == 0.0 { 0.0 } else { s * total };
            Ok(PerturbationCheck { lhs: euclid(&a, &a_hat), rhs, state_distance, q_distance, w1 })
        })
        .collect();
    let checks = checks.into_iter().collect::<Result<Vec<_>>>()?;
    let violations: Vec<usize> = checks.iter().enumerate().filter(|(_, c)| c.lhs > c.rhs + 1e-8).map(|(i, _)| i).collect();
    let max_excess = checks.iter().map(|c| c.lhs - c.rhs).fold(f64::NEG_INFINITY, f64::max);
    Ok(PerturbationReport { sensitivity: s, checks, violations, max_excess })
}
