//! Q-functions over states × actions and the product-space pair `(Q, mu)`.

use crate::error::{Error, Result};
use crate::measure_ot::{w1_distance, StateMeasure};
use crate::model::{Model, StateSpace};

/// Nonnegative Q-table over states × lattice actions, together with the value
/// function `Q_min(x) = min_a Q(x, a)`.
///
/// With grid actions `Q_min` is the row minimum. With box actions the lattice
/// is a tabulation only and `Q_min` comes from continuous minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    min_values: Vec<f64>,
}

impl QFunction {
    pub fn zeros(model: &Model) -> Self {
        let (n, na) = (model.n_states(), model.n_actions());
        Self { n_states: n, n_actions: na, values: vec![0.0; n * na], min_values: vec![0.0; n] }
    }

    /// Q-table given row-major over `states × lattice`; `Q_min` is the lattice minimum.
    pub fn from_table(model: &Model, values: Vec<f64>) -> Result<Self> {
        let (n, na) = (model.n_states(), model.n_actions());
        if values.len() != n * na {
            return Err(Error::DimensionMismatch { expected: n * na, found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Schema(format!("Q entry {i} = {} is not a nonnegative number", values[i])));
        }
        let min_values = values.chunks(na).map(|r| r.iter().cloned().fold(f64::INFINITY, f64::min)).collect();
        Ok(Self { n_states: n, n_actions: na, values, min_values })
    }

    pub(crate) fn from_parts(n_states: usize, n_actions: usize, values: Vec<f64>, min_values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n_states * n_actions);
        debug_assert_eq!(min_values.len(), n_states);
        Self { n_states, n_actions, values, min_values }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, x: usize, k: usize) -> f64 {
        self.values[x * self.n_actions + k]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The value function `Q_min`.
    pub fn q_min(&self) -> &[f64] {
        &self.min_values
    }

    /// Lowest lattice index attaining the row minimum.
    pub fn lattice_argmin(&self, x: usize) -> usize {
        let row = self.row(x);
        let mut best = 0;
        for (k, v) in row.iter().enumerate() {
            if *v < row[best] {
                best = k;
            }
        }
        best
    }

    /// Weighted sup norm `sup |Q| / w`, including `|Q_min| / w_max` so that
    /// `||Q_min||_{w_max} <= ||Q||_w` holds for the tabulation.
    pub fn w_norm(&self, model: &Model) -> f64 {
        self.weighted_sup(model, |x, k| self.get(x, k), |x| self.min_values[x])
    }

    pub fn w_distance(&self, other: &QFunction, model: &Model) -> f64 {
        self.weighted_sup(
            model,
            |x, k| self.get(x, k) - other.get(x, k),
            |x| self.min_values[x] - other.min_values[x],
        )
    }

    fn weighted_sup(&self, model: &Model, cell: impl Fn(usize, usize) -> f64, min: impl Fn(usize) -> f64) -> f64 {
        let mut sup = 0.0_f64;
        for x in 0..self.n_states {
            for k in 0..self.n_actions {
                sup = sup.max(cell(x, k).abs() / model.weight_at(x, k));
            }
            sup = sup.max(min(x).abs() / model.weight_max(x));
        }
        sup
    }

    /// Lipschitz seminorm of `Q_min` over the state grid.
    pub fn min_lipschitz(&self, space: &StateSpace) -> f64 {
        lipschitz_seminorm(&self.min_values, space)
    }

    /// Membership in `{ Q >= 0, ||Q||_w <= value_bound, ||Q_min||_Lip <= lip_bound }`.
    pub fn membership(&self, model: &Model, value_bound: f64, lip_bound: f64) -> Membership {
        let w_norm = self.w_norm(model);
        let lipschitz = self.min_lipschitz(model.states());
        let nonnegative = self.values.iter().chain(&self.min_values).all(|v| *v >= -1e-12);
        Membership {
            w_norm,
            value_bound,
            lipschitz,
            lip_bound,
            nonnegative,
            inside: nonnegative && w_norm <= value_bound + 1e-9 && lipschitz <= lip_bound + 1e-9,
        }
    }
}

pub fn lipschitz_seminorm(v: &[f64], space: &StateSpace) -> f64 {
    let n = v.len();
    let mut lip = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            lip = lip.max((v[i] - v[j]).abs() / space.dist(i, j));
        }
    }
    lip
}

/// Outcome of a membership check against the bounded Lipschitz Q-class.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Membership {
    pub w_norm: f64,
    pub value_bound: f64,
    pub lipschitz: f64,
    pub lip_bound: f64,
    pub nonnegative: bool,
    pub inside: bool,
}

/// A point `(Q, mu)` of the product space on which the equilibrium operators act.
#[derive(Debug, Clone, PartialEq)]
pub struct MfePair {
    pub q: QFunction,
    pub mu: StateMeasure,
}

impl MfePair {
    pub fn new(q: QFunction, mu: StateMeasure) -> Self {
        Self { q, mu }
    }

    /// Product metric `||Q - Q'||_w + W1(mu, mu')`.
    pub fn distance(&self, other: &MfePair, model: &Model) -> Result<f64> {
        let (dq, dmu) = self.distance_parts(other, model)?;
        Ok(dq + dmu)
    }

    pub fn distance_parts(&self, other: &MfePair, model: &Model) -> Result<(f64, f64)> {
        Ok((self.q.w_distance(&other.q, model), w1_distance(&self.mu, &other.mu, model.states())?))
    }
}
