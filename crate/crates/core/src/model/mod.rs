//! Mean-field game models on finite grids: state space, action set, one-stage
//! cost, transition kernel, weight function and criterion.

mod builtin;
mod config;
pub(crate) mod constants;
mod space;

pub use builtin::{builtin_congestion_model, CongestionParams};
pub use config::{load_model, load_model_file, ModelConfig};
pub use constants::{contraction_formula, estimate_constants, probe_measures, ModelConstants, SensitivitySource};
pub use space::{ActionMode, ActionSpace, StateSpace};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure_ot::{StateMeasure, MASS_TOL};

/// Optimality criterion of the representative agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Discounted,
    Average,
}

/// Transition kernel `p(. | x, a, mu)`.
#[derive(Debug, Clone)]
pub enum Kernel {
    /// Tabulated rows `rows[x][a][y]` over grid actions, with an optional population coupling.
    Table { rows: Vec<Vec<Vec<f64>>>, coupling: KernelCoupling },
    /// `p(. | x, a, mu) = nu` for every argument.
    Fixed(Vec<f64>),
    /// Stay put: `p(. | x, a, mu) = delta_x`.
    Identity,
    /// Truncated Gaussian move on a one-dimensional grid.
    Gaussian(GaussianKernel),
}

/// Ways a tabulated kernel may depend on the population measure.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelCoupling {
    None,
    /// `(1 - weight) * base + weight * mu`: herding toward the population.
    Mix { weight: f64 },
    /// `base(y) * exp(-strength * mu(y))`, renormalized: avoid crowded states.
    CrowdAversion { strength: f64 },
}

/// Mean `x + reversion (center - x) + drift * a * (1 - attenuation * crowd(mu, x))`,
/// standard deviation `spread`, renormalized over the grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub spread: f64,
    pub reversion: f64,
    pub center: f64,
    pub drift: f64,
    pub attenuation: f64,
    pub bandwidth: f64,
}

/// One-stage cost `c(x, a, mu) >= 0`.
#[derive(Debug, Clone)]
pub enum Cost {
    /// Tabulated `values[x][a]` over grid actions, with an optional population coupling.
    Table { values: Vec<Vec<f64>>, coupling: CostCoupling },
    Constant(f64),
    /// `coef * |a - target|^2`.
    Quadratic { coef: f64, target: Vec<f64> },
    /// `c_move * |a|^2 + c_crowd * crowd(mu, x)`.
    Congestion { c_move: f64, c_crowd: f64, bandwidth: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostCoupling {
    None,
    /// Adds `weight * crowd(mu, x)`.
    Crowd { weight: f64, bandwidth: f64 },
}

/// Weight function `w(x, a) >= 1`.
#[derive(Debug, Clone)]
pub enum Weight {
    Constant(f64),
    Table(Vec<Vec<f64>>),
}

/// Raw components of a model, validated by [`Model::new`].
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub states: StateSpace,
    pub actions: ActionSpace,
    pub kernel: Kernel,
    pub cost: Cost,
    pub weight: Weight,
    pub init_measure: StateMeasure,
    pub criterion: Criterion,
    pub beta: Option<f64>,
}

/// A validated mean-field game model. Evaluation is pure and `Sync`.
#[derive(Debug, Clone)]
pub struct Model {
    states: StateSpace,
    actions: ActionSpace,
    kernel: Kernel,
    cost: Cost,
    weight: Weight,
    init_measure: StateMeasure,
    criterion: Criterion,
    beta: Option<f64>,
    weights: Vec<f64>,
    weight_max: Vec<f64>,
}

/// Smoothed population density around `x`: `sum_y exp(-d(x,y)^2 / 2h^2) mu(y)`, in `[0, 1]`.
pub fn crowd(states: &StateSpace, mu: &[f64], x: usize, bandwidth: f64) -> f64 {
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    mu.iter()
        .enumerate()
        .filter(|(_, m)| **m != 0.0)
        .map(|(y, m)| {
            let d = states.dist(x, y);
            m * (-d * d * inv).exp()
        })
        .sum()
}

impl Model {
    pub fn new(parts: ModelParts) -> Result<Self> {
        let ModelParts { states, actions, kernel, cost, weight, init_measure, criterion, beta } = parts;
        let n = states.len();
        if init_measure.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: init_measure.len() });
        }
        match criterion {
            Criterion::Discounted => match beta {
                Some(b) if b > 0.0 && b < 1.0 => {}
                Some(b) => return Err(Error::Parameter(format!("discount factor {b} not in (0,1)"))),
                None => return Err(Error::Schema("discounted criterion requires beta".into())),
            },
            Criterion::Average => {
                if let Some(b) = beta {
                    if !(b > 0.0 && b < 1.0) {
                        return Err(Error::Parameter(format!("discount factor {b} not in (0,1)")));
                    }
                }
            }
        }
        validate_families(&states, &actions, &kernel, &cost, &weight)?;
        let lattice = actions.lattice();
        let mut weights = Vec::with_capacity(n * lattice.len());
        for x in 0..n {
            for (k, a) in lattice.iter().enumerate() {
                let w = match &weight {
                    Weight::Constant(c) => *c,
                    Weight::Table(t) => t[x][k],
                };
                if !(w >= 1.0) || !w.is_finite() {
                    return Err(Error::Schema(format!("weight w({x}, {a:?}) = {w} is below 1")));
                }
                weights.push(w);
            }
        }
        let na = lattice.len();
        let weight_max = (0..n)
            .map(|x| weights[x * na..(x + 1) * na].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let model = Self { states, actions, kernel, cost, weight, init_measure, criterion, beta, weights, weight_max };
        model.check_grid_invariants()?;
        Ok(model)
    }

    /// Evaluates every kernel row and cost on the grid against a set of measures.
    fn check_grid_invariants(&self) -> Result<()> {
        let n = self.n_states();
        let mut measures = vec![self.init_measure.clone(), StateMeasure::uniform(n)];
        if self.measure_dependent() {
            measures.extend((0..n).map(|i| StateMeasure::dirac(n, i)));
        }
        let mut row = vec![0.0; n];
        for mu in &measures {
            for x in 0..n {
                for k in 0..self.n_actions() {
                    self.kernel_row_at(x, k, mu, &mut row);
                    let sum: f64 = row.iter().sum();
                    let min_entry = row.iter().cloned().fold(f64::INFINITY, f64::min);
                    if (sum - 1.0).abs() > MASS_TOL || min_entry < 0.0 || !sum.is_finite() {
                        return Err(Error::Stochasticity { state: x, action: k, sum, min_entry });
                    }
                    let c = self.cost_at(x, k, mu);
                    if !(c >= 0.0) || !c.is_finite() {
                        return Err(Error::Schema(format!("cost c({x}, action {k}) = {c} is not a nonnegative number")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Number of grid actions, or lattice points in box mode.
    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn cost_family(&self) -> &Cost {
        &self.cost
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Discount factor for the discounted criterion, 1 for the average criterion.
    pub fn xi(&self) -> f64 {
        match self.criterion {
            Criterion::Discounted => self.beta.expect("validated at construction"),
            Criterion::Average => 1.0,
        }
    }

    pub fn init_measure(&self) -> &StateMeasure {
        &self.init_measure
    }

    pub fn with_criterion(mut self, criterion: Criterion, beta: Option<f64>) -> Result<Self> {
        let parts = ModelParts {
            states: self.states,
            actions: self.actions,
            kernel: self.kernel,
            cost: self.cost,
            weight: self.weight,
            init_measure: self.init_measure,
            criterion,
            beta: beta.or(self.beta),
        };
        self = Model::new(parts)?;
        Ok(self)
    }

    pub fn with_init_measure(mut self, mu: StateMeasure) -> Result<Self> {
        if mu.len() != self.n_states() {
            return Err(Error::DimensionMismatch { expected: self.n_states(), found: mu.len() });
        }
        self.init_measure = mu;
        Ok(self)
    }

    /// Whether cost or kernel can depend on the population measure.
    pub fn measure_dependent(&self) -> bool {
        let kernel = self.kernel_measure_dependent();
        let cost = match &self.cost {
            Cost::Table { coupling, .. } => *coupling != CostCoupling::None,
            Cost::Constant(_) | Cost::Quadratic { .. } => false,
            Cost::Congestion { c_crowd, .. } => *c_crowd != 0.0,
        };
        kernel || cost
    }

    /// Whether the kernel can depend on the population measure.
    pub fn kernel_measure_dependent(&self) -> bool {
        match &self.kernel {
            Kernel::Table { coupling, .. } => *coupling != KernelCoupling::None,
            Kernel::Fixed(_) | Kernel::Identity => false,
            Kernel::Gaussian(g) => g.attenuation != 0.0,
        }
    }

    /// `w(x, a_k)` at lattice index `k`.
    #[inline]
    pub fn weight_at(&self, x: usize, k: usize) -> f64 {
        self.weights[x * self.n_actions() + k]
    }

    /// `sup_a w(x, a)` over the lattice.
    #[inline]
    pub fn weight_max(&self, x: usize) -> f64 {
        self.weight_max[x]
    }

    pub fn weight(&self, x: usize, a: &[f64]) -> f64 {
        match &self.weight {
            Weight::Constant(c) => *c,
            Weight::Table(t) => t[x][self.grid_index(a)],
        }
    }

    fn grid_index(&self, a: &[f64]) -> usize {
        self.actions
            .index_of(a)
            .unwrap_or_else(|| panic!("action {a:?} is not a member of the action grid"))
    }

    pub fn cost(&self, x: usize, a: &[f64], mu: &StateMeasure) -> f64 {
        self.cost_impl(x, None, a, mu)
    }

    pub fn cost_at(&self, x: usize, k: usize, mu: &StateMeasure) -> f64 {
        self.cost_impl(x, Some(k), &self.actions.lattice()[k], mu)
    }

    fn cost_impl(&self, x: usize, k: Option<usize>, a: &[f64], mu: &StateMeasure) -> f64 {
        match &self.cost {
            Cost::Table { values, coupling } => {
                let k = k.unwrap_or_else(|| self.grid_index(a));
                let base = values[x][k];
                match coupling {
                    CostCoupling::None => base,
                    CostCoupling::Crowd { weight, bandwidth } => {
                        base + weight * crowd(&self.states, mu.probs(), x, *bandwidth)
                    }
                }
            }
            Cost::Constant(c) => *c,
            Cost::Quadratic { coef, target } => {
                coef * a.iter().zip(target).map(|(u, t)| (u - t) * (u - t)).sum::<f64>()
            }
            Cost::Congestion { c_move, c_crowd, bandwidth } => {
                let move_cost = c_move * a.iter().map(|u| u * u).sum::<f64>();
                if *c_crowd == 0.0 {
                    move_cost
                } else {
                    move_cost + c_crowd * crowd(&self.states, mu.probs(), x, *bandwidth)
                }
            }
        }
    }

    pub fn kernel_row(&self, x: usize, a: &[f64], mu: &StateMeasure) -> Vec<f64> {
        let mut row = vec![0.0; self.n_states()];
        self.kernel_row_into(x, a, mu, &mut row);
        row
    }

    pub fn kernel_row_into(&self, x: usize, a: &[f64], mu: &StateMeasure, out: &mut [f64]) {
        self.kernel_impl(x, None, a, mu, out)
    }

    pub fn kernel_row_at(&self, x: usize, k: usize, mu: &StateMeasure, out: &mut [f64]) {
        self.kernel_impl(x, Some(k), &self.actions.lattice()[k], mu, out)
    }

    fn kernel_impl(&self, x: usize, k: Option<usize>, a: &[f64], mu: &StateMeasure, out: &mut [f64]) {
        match &self.kernel {
            Kernel::Table { rows, coupling } => {
                let k = k.unwrap_or_else(|| self.grid_index(a));
                let base = &rows[x][k];
                match coupling {
                    KernelCoupling::None => out.copy_from_slice(base),
                    KernelCoupling::Mix { weight } => {
                        for ((o, b), m) in out.iter_mut().zip(base).zip(mu.probs()) {
                            *o = (1.0 - weight) * b + weight * m;
                        }
                    }
                    KernelCoupling::CrowdAversion { strength } => {
                        for ((o, b), m) in out.iter_mut().zip(base).zip(mu.probs()) {
                            *o = b * (-strength * m).exp();
                        }
                        normalize(out);
                    }
                }
            }
            Kernel::Fixed(nu) => out.copy_from_slice(nu),
            Kernel::Identity => {
                out.iter_mut().for_each(|o| *o = 0.0);
                out[x] = 1.0;
            }
            Kernel::Gaussian(g) => {
                let here = self.states.coord(x)[0];
                let damp = if g.attenuation == 0.0 {
                    1.0
                } else {
                    1.0 - g.attenuation * crowd(&self.states, mu.probs(), x, g.bandwidth)
                };
                let mean = here + g.reversion * (g.center - here) + g.drift * a[0] * damp;
                let inv = 1.0 / (2.0 * g.spread * g.spread);
                let mut top = f64::NEG_INFINITY;
                for (y, o) in out.iter_mut().enumerate() {
                    let r = self.states.coord(y)[0] - mean;
                    *o = -r * r * inv;
                    top = top.max(*o);
                }
                out.iter_mut().for_each(|o| *o = (*o - top).exp());
                normalize(out);
            }
        }
    }
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
}

fn validate_families(
    states: &StateSpace,
    actions: &ActionSpace,
    kernel: &Kernel,
    cost: &Cost,
    weight: &Weight,
) -> Result<()> {
    let n = states.len();
    let na = actions.len();
    let dim = actions.dim();
    let grid_only = |what: &str| -> Result<()> {
        if actions.is_box() {
            Err(Error::Schema(format!("{what} tables require grid actions")))
        } else {
            Ok(())
        }
    };
    match kernel {
        Kernel::Table { rows, coupling } => {
            grid_only("kernel")?;
            if rows.len() != n || rows.iter().any(|r| r.len() != na || r.iter().any(|p| p.len() != n)) {
                return Err(Error::Schema(format!("kernel table must have shape {n} x {na} x {n}")));
            }
            for (x, per_action) in rows.iter().enumerate() {
                for (k, row) in per_action.iter().enumerate() {
                    let sum: f64 = row.iter().sum();
                    let min_entry = row.iter().cloned().fold(f64::INFINITY, f64::min);
                    if (sum - 1.0).abs() > MASS_TOL || min_entry < 0.0 || !sum.is_finite() {
                        return Err(Error::Stochasticity { state: x, action: k, sum, min_entry });
                    }
                }
            }
            match coupling {
                KernelCoupling::Mix { weight } if !(0.0..=1.0).contains(weight) => {
                    return Err(Error::Parameter(format!("mix weight {weight} not in [0,1]")))
                }
                KernelCoupling::CrowdAversion { strength } if !(*strength >= 0.0) => {
                    return Err(Error::Parameter(format!("crowd aversion strength {strength} is negative")))
                }
                _ => {}
            }
        }
        Kernel::Fixed(nu) => {
            if nu.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: nu.len() });
            }
            let sum: f64 = nu.iter().sum();
            let min_entry = nu.iter().cloned().fold(f64::INFINITY, f64::min);
            if (sum - 1.0).abs() > MASS_TOL || min_entry < 0.0 {
                return Err(Error::Stochasticity { state: 0, action: 0, sum, min_entry });
            }
        }
        Kernel::Identity => {}
        Kernel::Gaussian(g) => {
            if states.coord(0).len() != 1 || dim != 1 {
                return Err(Error::Schema("gaussian kernel needs one-dimensional states and actions".into()));
            }
            if !(g.spread > 0.0) || !(g.bandwidth > 0.0) {
                return Err(Error::Parameter("gaussian kernel spread and bandwidth must be positive".into()));
            }
            if ![g.reversion, g.center, g.drift, g.attenuation].iter().all(|v| v.is_finite()) {
                return Err(Error::Parameter("gaussian kernel parameters must be finite".into()));
            }
        }
    }
    match cost {
        Cost::Table { values, coupling } => {
            grid_only("cost")?;
            if values.len() != n || values.iter().any(|r| r.len() != na) {
                return Err(Error::Schema(format!("cost table must have shape {n} x {na}")));
            }
            if let CostCoupling::Crowd { weight, bandwidth } = coupling {
                if !(*weight >= 0.0) || !(*bandwidth > 0.0) {
                    return Err(Error::Parameter("crowd coupling needs weight >= 0 and bandwidth > 0".into()));
                }
            }
        }
        Cost::Constant(c) => {
            if !(*c >= 0.0) {
                return Err(Error::Parameter(format!("constant cost {c} is negative")));
            }
        }
        Cost::Quadratic { coef, target } => {
            if !(*coef >= 0.0) || target.len() != dim {
                return Err(Error::Parameter("quadratic cost needs coef >= 0 and a target of action dimension".into()));
            }
        }
        Cost::Congestion { c_move, c_crowd, bandwidth } => {
            if !(*c_move >= 0.0) || !(*c_crowd >= 0.0) || !(*bandwidth > 0.0) {
                return Err(Error::Parameter("congestion cost needs c_move, c_crowd >= 0 and bandwidth > 0".into()));
            }
        }
    }
    if let Weight::Table(t) = weight {
        grid_only("weight")?;
        if t.len() != n || t.iter().any(|r| r.len() != na) {
            return Err(Error::Schema(format!("weight table must have shape {n} x {na}")));
        }
    }
    Ok(())
}
