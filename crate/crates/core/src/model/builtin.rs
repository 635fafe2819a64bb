//! Built-in benchmark family: crowd-averse motion on the unit interval.
//!
//! States are evenly spaced on `[0, 1]`. An agent picks a velocity `a`; the
//! next state is a truncated Gaussian around
//! `x + reversion (center - x) + drift * a * (1 - attenuation * crowd(mu, x))`,
//! so crowding slows motion down. The one-stage cost is
//! `c_move * a^2 + c_crowd * crowd(mu, x)` where `crowd` is a Gaussian-smoothed
//! density of the population around `x`. Every term is smooth in `(x, a, mu)`.

use serde::{Deserialize, Serialize};

use super::{ActionSpace, Cost, Criterion, GaussianKernel, Kernel, Model, ModelParts, StateSpace, Weight};
use crate::error::{Error, Result};
use crate::measure_ot::StateMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CongestionParams {
    pub n_states: usize,
    /// Grid size, or lattice resolution when `box_actions` is set.
    pub n_actions: usize,
    pub box_actions: bool,
    pub max_speed: f64,
    pub spread: f64,
    pub c_move: f64,
    pub c_crowd: f64,
    pub reversion: f64,
    pub center: f64,
    pub drift: f64,
    pub attenuation: f64,
    pub bandwidth: f64,
}

impl Default for CongestionParams {
    fn default() -> Self {
        Self {
            n_states: 20,
            n_actions: 5,
            box_actions: false,
            max_speed: 1.0,
            spread: 0.1,
            c_move: 1.0,
            c_crowd: 1.0,
            reversion: 0.5,
            center: 0.5,
            drift: 0.1,
            attenuation: 0.5,
            bandwidth: 0.2,
        }
    }
}

impl CongestionParams {
    pub fn build(&self, criterion: Criterion, beta: Option<f64>) -> Result<Model> {
        if self.n_states < 2 {
            return Err(Error::Parameter(format!("n_states = {} must be at least 2", self.n_states)));
        }
        if self.n_actions < 2 {
            return Err(Error::Parameter(format!("n_actions = {} must be at least 2", self.n_actions)));
        }
        if !(self.spread > 0.0) {
            return Err(Error::Parameter(format!("spread = {} must be positive", self.spread)));
        }
        if !(self.max_speed > 0.0) {
            return Err(Error::Parameter(format!("max_speed = {} must be positive", self.max_speed)));
        }
        let states = StateSpace::uniform_line(self.n_states, 0.0, 1.0)?;
        let v = self.max_speed;
        let actions = if self.box_actions {
            ActionSpace::boxed(vec![-v], vec![v], self.n_actions)?
        } else {
            let values = (0..self.n_actions)
                .map(|i| vec![-v + 2.0 * v * i as f64 / (self.n_actions - 1) as f64])
                .collect();
            ActionSpace::grid(values, Some((vec![-v], vec![v])))?
        };
        let kernel = Kernel::Gaussian(GaussianKernel {
            spread: self.spread,
            reversion: self.reversion,
            center: self.center,
            drift: self.drift,
            attenuation: self.attenuation,
            bandwidth: self.bandwidth,
        });
        let cost = Cost::Congestion { c_move: self.c_move, c_crowd: self.c_crowd, bandwidth: self.bandwidth };
        Model::new(ModelParts {
            states,
            actions,
            kernel,
            cost,
            weight: Weight::Constant(1.0),
            init_measure: StateMeasure::uniform(self.n_states),
            criterion,
            beta,
        })
    }
}

/// Congestion model with grid actions, default dynamics and discount factor 0.9.
pub fn builtin_congestion_model(
    n_states: usize,
    n_actions: usize,
    spread: f64,
    cost_weights: (f64, f64),
) -> Result<Model> {
    let params = CongestionParams {
        n_states,
        n_actions,
        spread,
        c_move: cost_weights.0,
        c_crowd: cost_weights.1,
        ..CongestionParams::default()
    };
    params.build(Criterion::Discounted, Some(0.9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{dirichlet, stream_rng};

    #[test]
    fn two_state_rows_on_simplex() {
        let m = builtin_congestion_model(2, 2, 0.5, (1.0, 1.0)).unwrap();
        assert_eq!(m.n_states(), 2);
        for x in 0..2 {
            for k in 0..2 {
                let mut row = vec![0.0; 2];
                m.kernel_row_at(x, k, &StateMeasure::uniform(2), &mut row);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|p| *p >= 0.0));
            }
        }
    }

    #[test]
    fn no_crowd_weight_means_measure_free_cost() {
        let m = builtin_congestion_model(10, 3, 0.2, (1.0, 0.0)).unwrap();
        let mut rng = stream_rng(5, "test");
        for _ in 0..10 {
            let mu = dirichlet(10, &mut rng);
            let nu = dirichlet(10, &mut rng);
            for x in 0..10 {
                for k in 0..3 {
                    assert_eq!(m.cost_at(x, k, &mu), m.cost_at(x, k, &nu));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(builtin_congestion_model(1, 3, 0.1, (1.0, 1.0)), Err(Error::Parameter(_))));
        assert!(matches!(builtin_congestion_model(5, 1, 0.1, (1.0, 1.0)), Err(Error::Parameter(_))));
        assert!(matches!(builtin_congestion_model(5, 3, 0.0, (1.0, 1.0)), Err(Error::Parameter(_))));
    }
}
