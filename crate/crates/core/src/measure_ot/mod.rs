//! Probability measures on the state grid and exact Wasserstein-1 transport.

mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner_opt::GreedyPolicy;
use crate::model::{Model, StateSpace};

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOL: f64 = 1e-12;

/// Probability vector over the states of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateMeasure {
    probs: Vec<f64>,
}

impl StateMeasure {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Measure("measure on an empty grid".into()));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Measure(format!("entry {i} = {} is not a nonnegative number", probs[i])));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Measure(format!("entries sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Wraps a vector that is a probability vector by construction.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn dirac(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    /// Empirical measure `counts / total`.
    pub(crate) fn from_raw_counts(counts: &[usize], total: usize) -> Self {
        Self { probs: counts.iter().map(|c| *c as f64 / total as f64).collect() }
    }

    /// Normalizes nonnegative weights with positive total.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Measure("weights must be nonnegative with positive total".into()));
        }
        Ok(Self { probs: weights.iter().map(|w| w / total).collect() })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn expect(&self, f: &[f64]) -> f64 {
        self.probs.iter().zip(f).map(|(p, v)| p * v).sum()
    }
}

/// Optimal coupling between two measures.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    n: usize,
    plan: Vec<f64>,
    cost: f64,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.n + j]
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j)).sum()).collect()
    }
}

fn check_dims(mu: &[f64], nu: &[f64], space: &StateSpace) -> Result<()> {
    if mu.len() != space.len() {
        return Err(Error::DimensionMismatch { expected: space.len(), found: mu.len() });
    }
    if nu.len() != space.len() {
        return Err(Error::DimensionMismatch { expected: space.len(), found: nu.len() });
    }
    Ok(())
}

/// Exact W1 distance together with an optimal plan.
///
/// On a line with the coordinate metric the CDF formula is used and the plan
/// is the comonotone coupling; otherwise the transportation LP is solved.
pub fn w1(mu: &StateMeasure, nu: &StateMeasure, space: &StateSpace) -> Result<(f64, TransportPlan)> {
    check_dims(&mu.probs, &nu.probs, space)?;
    let n = space.len();
    match space.line_order() {
        Some(order) => {
            let value = line_w1(&mu.probs, &nu.probs, space, order);
            let plan = comonotone_plan(&mu.probs, &nu.probs, order);
            let cost = plan_cost(&plan, space);
            debug_assert!((cost - value).abs() < 1e-9);
            Ok((value, TransportPlan { n, plan, cost: value }))
        }
        None => {
            let sol = simplex::transportation_simplex(&mu.probs, &nu.probs, space.dist_matrix());
            Ok((sol.cost, TransportPlan { n, plan: sol.plan, cost: sol.cost }))
        }
    }
}

/// W1 distance only.
pub fn w1_distance(mu: &StateMeasure, nu: &StateMeasure, space: &StateSpace) -> Result<f64> {
    check_dims(&mu.probs, &nu.probs, space)?;
    Ok(w1_raw(&mu.probs, &nu.probs, space))
}

/// W1 between two nonnegative vectors of equal total mass (not necessarily 1).
pub(crate) fn w1_raw(a: &[f64], b: &[f64], space: &StateSpace) -> f64 {
    if a == b {
        return 0.0;
    }
    match space.line_order() {
        Some(order) => line_w1(a, b, space, order),
        None => simplex::transportation_simplex(a, b, space.dist_matrix()).cost,
    }
}

/// Kantorovich-Rubinstein norm of a signed vector with (near) zero total:
/// `sup { <g, d> : g 1-Lipschitz }`.
pub(crate) fn kr_norm(d: &[f64], space: &StateSpace) -> f64 {
    let pos: Vec<f64> = d.iter().map(|v| v.max(0.0)).collect();
    let neg: Vec<f64> = d.iter().map(|v| (-v).max(0.0)).collect();
    let (mp, mn): (f64, f64) = (pos.iter().sum(), neg.iter().sum());
    if mp == 0.0 && mn == 0.0 {
        return 0.0;
    }
    // Balance the tiny mass defect onto the larger side's complement.
    let mass = mp.max(mn);
    let (mut pos, mut neg) = (pos, neg);
    if mp < mass {
        let k = argmax(&neg);
        pos[k] += mass - mp;
    } else if mn < mass {
        let k = argmax(&pos);
        neg[k] += mass - mn;
    }
    w1_raw(&pos, &neg, space)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn line_w1(a: &[f64], b: &[f64], space: &StateSpace, order: &[usize]) -> f64 {
    let mut fa = 0.0;
    let mut fb = 0.0;
    let mut total = 0.0;
    for w in order.windows(2) {
        fa += a[w[0]];
        fb += b[w[0]];
        total += (fa - fb).abs() * space.dist(w[0], w[1]);
    }
    total
}

fn comonotone_plan(a: &[f64], b: &[f64], order: &[usize]) -> Vec<f64> {
    let n = a.len();
    let mut plan = vec![0.0; n * n];
    let mut ra: Vec<f64> = order.iter().map(|&i| a[i]).collect();
    let mut rb: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let (mut p, mut q) = (0, 0);
    while p < n && q < n {
        let f = ra[p].min(rb[q]);
        plan[order[p] * n + order[q]] += f;
        ra[p] -= f;
        rb[q] -= f;
        if p == n - 1 {
            q += 1;
        } else if q == n - 1 || ra[p] <= rb[q] {
            p += 1;
        } else {
            q += 1;
        }
    }
    plan
}

fn plan_cost(plan: &[f64], space: &StateSpace) -> f64 {
    plan.iter().zip(space.dist_matrix()).map(|(x, d)| x * d).sum()
}

/// Lower bound `|<g, mu - nu>|` on W1 from a 1-Lipschitz potential `g`.
pub fn w1_dual_certificate(mu: &StateMeasure, nu: &StateMeasure, space: &StateSpace, g: &[f64]) -> Result<f64> {
    check_dims(&mu.probs, &nu.probs, space)?;
    if g.len() != space.len() {
        return Err(Error::DimensionMismatch { expected: space.len(), found: g.len() });
    }
    let n = space.len();
    for i in 0..n {
        for j in 0..n {
            let gap = (g[i] - g[j]).abs();
            let d = space.dist(i, j);
            if gap > d + 1e-12 * d.max(1.0) {
                return Err(Error::NotLipschitz { i, j, gap, dist: d });
            }
        }
    }
    Ok(g.iter().zip(mu.probs.iter().zip(&nu.probs)).map(|(g, (a, b))| g * (a - b)).sum::<f64>().abs())
}

/// Distribution of the next state when the current state is drawn from `mu`
/// and every agent plays `policy` against the population `mu`.
pub fn pushforward(mu: &StateMeasure, policy: &GreedyPolicy, model: &Model) -> StateMeasure {
    let n = model.n_states();
    let mut next = vec![0.0; n];
    let mut row = vec![0.0; n];
    for (x, &mass) in mu.probs.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        model.kernel_row_into(x, policy.action(x), mu, &mut row);
        for (acc, p) in next.iter_mut().zip(&row) {
            *acc += mass * p;
        }
    }
    StateMeasure::from_raw(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> StateSpace {
        StateSpace::from_coords(vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn half_mass_moved_over_unit_distance() {
        let s = two_point();
        let mu = StateMeasure::new(vec![0.5, 0.5]).unwrap();
        let nu = StateMeasure::dirac(2, 0);
        let (d, plan) = w1(&mu, &nu, &s).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!((plan.get(1, 0) - 0.5).abs() < 1e-15);
        let (d_lp, _) = w1(&mu, &nu, &s.without_line_structure()).unwrap();
        assert!((d_lp - 0.5).abs() < 1e-15);
    }

    #[test]
    fn self_distance_is_zero_with_diagonal_plan() {
        let s = StateSpace::from_coords(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let mu = StateMeasure::new(vec![0.2, 0.3, 0.5]).unwrap();
        let (d, plan) = w1(&mu, &mu, &s).unwrap();
        assert!(d.abs() < 1e-15);
        for i in 0..3 {
            assert!((plan.get(i, i) - mu.probs()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn diracs_are_at_ground_distance() {
        let s = StateSpace::from_coords(vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 1.0]]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = w1_distance(&StateMeasure::dirac(3, i), &StateMeasure::dirac(3, j), &s).unwrap();
                assert!((d - s.dist(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dual_certificate_edge_cases() {
        let s = two_point();
        let mu = StateMeasure::dirac(2, 1);
        let nu = StateMeasure::dirac(2, 0);
        assert_eq!(w1_dual_certificate(&mu, &nu, &s, &[3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(w1_dual_certificate(&mu, &nu, &s, &[0.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(
            w1_dual_certificate(&mu, &nu, &s, &[0.0, 2.0]),
            Err(Error::NotLipschitz { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_reported() {
        let s = two_point();
        let mu = StateMeasure::uniform(3);
        assert!(matches!(w1(&mu, &mu, &s), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn measure_validation() {
        assert!(StateMeasure::new(vec![0.5, 0.4]).is_err());
        assert!(StateMeasure::new(vec![1.5, -0.5]).is_err());
        assert!(StateMeasure::new(vec![0.25; 4]).is_ok());
    }
}
