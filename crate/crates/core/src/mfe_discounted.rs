//! Discounted-cost equilibria: the operator `H = (H1, H2)` and its fixed-point iteration.

use crate::error::{Error, Result};
use crate::fixed_point::{apply_operator, iterate, q_update, SolveOptions, SolveReport};
use crate::inner_opt::GreedyPolicy;
use crate::measure_ot::{pushforward, StateMeasure};
use crate::model::{estimate_constants, Criterion, Model};
use crate::qfunction::{MfePair, QFunction};

fn require_discounted(model: &Model) -> Result<()> {
    match model.criterion() {
        Criterion::Discounted => Ok(()),
        Criterion::Average => Err(Error::Parameter("model uses the average criterion".into())),
    }
}

/// `H1(Q, mu)(x, a) = c(x, a, mu) + beta * sum_y Q_min(y) p(y | x, a, mu)`.
pub fn apply_h1(q: &QFunction, mu: &StateMeasure, model: &Model) -> Result<QFunction> {
    require_discounted(model)?;
    q_update(model, q.q_min(), mu, None).map(|(q, _)| q)
}

/// `H2(Q, mu)`: `mu` pushed forward under the greedy policy of `H1(Q, mu)`.
pub fn apply_h2(q: &QFunction, mu: &StateMeasure, model: &Model) -> Result<StateMeasure> {
    require_discounted(model)?;
    let (_, policy) = q_update(model, q.q_min(), mu, None)?;
    Ok(pushforward(mu, &policy, model))
}

/// `H(Q, mu) = (H1(Q, mu), H2(Q, mu))`.
pub fn apply_h(pair: &MfePair, model: &Model) -> Result<MfePair> {
    require_discounted(model)?;
    apply_operator(model, pair, None).map(|(p, _)| p)
}

/// Iterates `H` from `(q0, mu0)`. Returns the final pair, the greedy policy at
/// that pair and the run report. A modulus `>= 1` is reported as a warning.
pub fn solve_discounted(
    model: &Model,
    q0: QFunction,
    mu0: StateMeasure,
    options: &SolveOptions,
) -> Result<(MfePair, GreedyPolicy, SolveReport)> {
    require_discounted(model)?;
    let constants = match &options.constants {
        Some(c) => c.clone(),
        None => estimate_constants(model, options.probes, options.seed)?,
    };
    let start = MfePair::new(q0, mu0);
    let out = iterate(model, start, None, constants, options.tol, options.max_iter)?;
    Ok((out.pair, out.policy, out.report))
}

/// [`solve_discounted`] from `Q = 0` and the model's initial measure.
pub fn solve_discounted_default(model: &Model, options: &SolveOptions) -> Result<(MfePair, GreedyPolicy, SolveReport)> {
    solve_discounted(model, QFunction::zeros(model), model.init_measure().clone(), options)
}
