//! JSON model documents.
//!
//! ```json
//! {
//!   "states": { "coords": [[0.0], [0.5], [1.0]] },
//!   "actions": { "mode": "grid", "values": [[-1.0], [0.0], [1.0]] },
//!   "kernel": { "table": [[[...]]], "coupling": { "family": "mix", "weight": 0.2 } },
//!   "cost": { "family": "quadratic", "params": { "coef": 1.0, "target": [0.0] } },
//!   "weight": { "const": 1.0 },
//!   "beta": 0.9,
//!   "criterion": "discounted",
//!   "init_measure": "uniform"
//! }
//! ```
//!
//! Kernel families: `gaussian`, `fixed` (`{"nu": [...]}`), `identity`, or a
//! `table` with coupling `none`, `mix` (`weight`) or `crowd_aversion`
//! (`strength`). Cost families: `constant` (`{"value": c}`), `quadratic`,
//! `congestion`, or a `table` with coupling `none` or `crowd` (`weight`,
//! `bandwidth`). A document may instead name a built-in family:
//! `{"builtin": {"name": "congestion-1d", "params": {...}}, "criterion": ..., "beta": ...}`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    ActionSpace, CongestionParams, Cost, CostCoupling, Criterion, GaussianKernel, Kernel, KernelCoupling, Model,
    ModelParts, StateSpace, Weight,
};
use crate::error::{Error, Result};
use crate::measure_ot::StateMeasure;

/// Default box-action lattice resolution per coordinate.
pub const DEFAULT_LATTICE: usize = 21;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub builtin: Option<BuiltinConfig>,
    #[serde(default)]
    pub states: Option<StatesConfig>,
    #[serde(default)]
    pub actions: Option<ActionsConfig>,
    #[serde(default)]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub cost: Option<CostConfig>,
    #[serde(default)]
    pub weight: Option<WeightConfig>,
    #[serde(default)]
    pub beta: Option<f64>,
    pub criterion: Criterion,
    #[serde(default)]
    pub init_measure: Option<InitMeasure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinConfig {
    pub name: String,
    #[serde(default)]
    pub params: CongestionParams,
}

/// A point given either as a scalar or as a coordinate vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Point::Scalar(v) => vec![v],
            Point::Vector(v) => v,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatesConfig {
    pub coords: Vec<Point>,
    #[serde(default)]
    pub dist: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub lower: Point,
    pub upper: Point,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum ActionsConfig {
    Grid {
        values: Vec<Point>,
        #[serde(default)]
        bounds: Option<BoundsConfig>,
    },
    Box {
        bounds: BoundsConfig,
        #[serde(default = "default_lattice")]
        lattice: usize,
    },
}

fn default_lattice() -> usize {
    DEFAULT_LATTICE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub params: Option<Value>,
    #[serde(default)]
    pub table: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub coupling: Option<KernelCouplingConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelCouplingConfig {
    None,
    Mix { weight: f64 },
    CrowdAversion { strength: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub params: Option<Value>,
    #[serde(default)]
    pub table: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub coupling: Option<CostCouplingConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostCouplingConfig {
    None,
    Crowd { weight: f64, bandwidth: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(default, rename = "const")]
    pub constant: Option<f64>,
    #[serde(default)]
    pub table: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitMeasure {
    Probs(Vec<f64>),
    Named(String),
    Dirac { dirac: usize },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixedParams {
    nu: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    value: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticParams {
    coef: f64,
    target: Point,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CongestionCostParams {
    c_move: f64,
    c_crowd: f64,
    bandwidth: f64,
}

fn schema(e: impl std::fmt::Display) -> Error {
    Error::Schema(e.to_string())
}

fn params<T: for<'de> Deserialize<'de>>(what: &str, p: Option<Value>) -> Result<T> {
    let p = p.ok_or_else(|| Error::Schema(format!("{what} requires params")))?;
    serde_json::from_value(p).map_err(|e| Error::Schema(format!("{what} params: {e}")))
}

/// Parses and validates a model document.
pub fn load_model(document: &str) -> Result<Model> {
    let cfg: ModelConfig = serde_json::from_str(document).map_err(schema)?;
    cfg.build()
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<Model> {
    let text = std::fs::read_to_string(path.as_ref())?;
    load_model(&text)
}

impl ModelConfig {
    pub fn build(self) -> Result<Model> {
        if let Some(builtin) = self.builtin {
            if self.states.is_some() || self.actions.is_some() || self.kernel.is_some() || self.cost.is_some() || self.weight.is_some() {
                return Err(Error::Schema("a builtin model cannot also define states, actions, kernel, cost or weight".into()));
            }
            if builtin.name != "congestion-1d" {
                return Err(Error::Schema(format!("unknown builtin model '{}'", builtin.name)));
            }
            let model = builtin.params.build(self.criterion, self.beta.or(Some(0.9)))?;
            return match self.init_measure {
                Some(init) => {
                    let mu = init_measure(init, model.n_states())?;
                    model.with_init_measure(mu)
                }
                None => Ok(model),
            };
        }
        let missing = |what: &str| Error::Schema(format!("missing field '{what}'"));
        let states_cfg = self.states.ok_or_else(|| missing("states"))?;
        let coords: Vec<Vec<f64>> = states_cfg.coords.into_iter().map(Point::into_vec).collect();
        let states = match states_cfg.dist {
            Some(rows) => {
                let n = coords.len();
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Schema(format!("dist must be a {n} x {n} matrix")));
                }
                StateSpace::with_distances(coords, rows.concat())?
            }
            None => StateSpace::from_coords(coords)?,
        };
        let n = states.len();
        let actions = match self.actions.ok_or_else(|| missing("actions"))? {
            ActionsConfig::Grid { values, bounds } => ActionSpace::grid(
                values.into_iter().map(Point::into_vec).collect(),
                bounds.map(|b| (b.lower.into_vec(), b.upper.into_vec())),
            )?,
            ActionsConfig::Box { bounds, lattice } => {
                ActionSpace::boxed(bounds.lower.into_vec(), bounds.upper.into_vec(), lattice)?
            }
        };
        let kernel = build_kernel(self.kernel.ok_or_else(|| missing("kernel"))?)?;
        let cost = build_cost(self.cost.ok_or_else(|| missing("cost"))?)?;
        let weight = match self.weight {
            None => Weight::Constant(1.0),
            Some(WeightConfig { constant: Some(c), table: None }) => Weight::Constant(c),
            Some(WeightConfig { constant: None, table: Some(t) }) => Weight::Table(t),
            Some(_) => return Err(Error::Schema("weight needs exactly one of 'const' or 'table'".into())),
        };
        let init = init_measure(self.init_measure.unwrap_or(InitMeasure::Named("uniform".into())), n)?;
        Model::new(ModelParts {
            states,
            actions,
            kernel,
            cost,
            weight,
            init_measure: init,
            criterion: self.criterion,
            beta: self.beta,
        })
    }
}

fn build_kernel(cfg: KernelConfig) -> Result<Kernel> {
    match (cfg.family.as_deref(), cfg.table) {
        (None, Some(rows)) => {
            let coupling = match cfg.coupling {
                None | Some(KernelCouplingConfig::None) => KernelCoupling::None,
                Some(KernelCouplingConfig::Mix { weight }) => KernelCoupling::Mix { weight },
                Some(KernelCouplingConfig::CrowdAversion { strength }) => KernelCoupling::CrowdAversion { strength },
            };
            Ok(Kernel::Table { rows, coupling })
        }
        (Some(family), None) => {
            if cfg.coupling.is_some() {
                return Err(Error::Schema("kernel coupling applies to tables only".into()));
            }
            match family {
                "gaussian" => Ok(Kernel::Gaussian(params::<GaussianKernel>("gaussian kernel", cfg.params)?)),
                "fixed" => Ok(Kernel::Fixed(params::<FixedParams>("fixed kernel", cfg.params)?.nu)),
                "identity" => Ok(Kernel::Identity),
                other => Err(Error::Schema(format!("unknown kernel family '{other}'"))),
            }
        }
        _ => Err(Error::Schema("kernel needs exactly one of 'family' or 'table'".into())),
    }
}

fn build_cost(cfg: CostConfig) -> Result<Cost> {
    match (cfg.family.as_deref(), cfg.table) {
        (None, Some(values)) => {
            let coupling = match cfg.coupling {
                None | Some(CostCouplingConfig::None) => CostCoupling::None,
                Some(CostCouplingConfig::Crowd { weight, bandwidth }) => CostCoupling::Crowd { weight, bandwidth },
            };
            Ok(Cost::Table { values, coupling })
        }
        (Some(family), None) => {
            if cfg.coupling.is_some() {
                return Err(Error::Schema("cost coupling applies to tables only".into()));
            }
            match family {
                "constant" => Ok(Cost::Constant(params::<ConstantParams>("constant cost", cfg.params)?.value)),
                "quadratic" => {
                    let p: QuadraticParams = params("quadratic cost", cfg.params)?;
                    Ok(Cost::Quadratic { coef: p.coef, target: p.target.into_vec() })
                }
                "congestion" => {
                    let p: CongestionCostParams = params("congestion cost", cfg.params)?;
                    Ok(Cost::Congestion { c_move: p.c_move, c_crowd: p.c_crowd, bandwidth: p.bandwidth })
                }
                other => Err(Error::Schema(format!("unknown cost family '{other}'"))),
            }
        }
        _ => Err(Error::Schema("cost needs exactly one of 'family' or 'table'".into())),
    }
}

fn init_measure(init: InitMeasure, n: usize) -> Result<StateMeasure> {
    match init {
        InitMeasure::Probs(p) => {
            if p.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.len() });
            }
            StateMeasure::new(p)
        }
        InitMeasure::Named(name) if name == "uniform" => Ok(StateMeasure::uniform(n)),
        InitMeasure::Named(name) => Err(Error::Schema(format!("unknown init_measure '{name}'"))),
        InitMeasure::Dirac { dirac } if dirac < n => Ok(StateMeasure::dirac(n, dirac)),
        InitMeasure::Dirac { dirac } => Err(Error::Schema(format!("dirac index {dirac} out of range for {n} states"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &str = r#"{
        "states": {"coords": [0.0]},
        "actions": {"mode": "box", "bounds": {"lower": -1.0, "upper": 1.0}},
        "kernel": {"family": "identity"},
        "cost": {"family": "quadratic", "params": {"coef": 1.0, "target": 0.0}},
        "beta": 0.9,
        "criterion": "discounted",
        "init_measure": {"dirac": 0}
    }"#;

    #[test]
    fn single_state_document() {
        let m = load_model(SINGLE).unwrap();
        assert_eq!(m.n_states(), 1);
        assert_eq!(m.kernel_row(0, &[0.3], m.init_measure()), vec![1.0]);
        assert_eq!(m.n_actions(), DEFAULT_LATTICE);
    }

    #[test]
    fn short_kernel_row_rejected() {
        let doc = r#"{
            "states": {"coords": [0, 1]},
            "actions": {"mode": "grid", "values": [0]},
            "kernel": {"table": [[[0.5, 0.4]], [[0.5, 0.5]]]},
            "cost": {"table": [[1.0], [2.0]]},
            "beta": 0.5, "criterion": "discounted", "init_measure": "uniform"
        }"#;
        assert!(matches!(load_model(doc), Err(Error::Stochasticity { state: 0, .. })));
    }

    #[test]
    fn missing_field_and_bad_metric() {
        assert!(matches!(load_model(r#"{"criterion": "average"}"#), Err(Error::Schema(_))));
        let doc = r#"{
            "states": {"coords": [0, 1, 2], "dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]},
            "actions": {"mode": "grid", "values": [0]},
            "kernel": {"family": "identity"},
            "cost": {"family": "constant", "params": {"value": 1}},
            "criterion": "average"
        }"#;
        assert!(matches!(load_model(doc), Err(Error::Metric(_))));
    }

    #[test]
    fn builtin_document() {
        let doc = r#"{"builtin": {"name": "congestion-1d", "params": {"n_states": 20, "n_actions": 5}},
                      "criterion": "discounted", "beta": 0.9}"#;
        let m = load_model(doc).unwrap();
        assert_eq!((m.n_states(), m.n_actions()), (20, 5));
    }
}
