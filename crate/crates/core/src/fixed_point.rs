//! The joint operator `(Q, mu) -> (Q', mu')` shared by both criteria, the
//! fixed-point iteration with an a-posteriori stopping rule, and empirical
//! contraction measurement.
//!
//! With `lambda = None` the Q-update is `c + beta * sum Q_min p`; with a
//! minorizing measure it is `c + sum Q_min (p - lambda)`. In both cases the
//! measure update pushes `mu` forward through the full kernel under the greedy
//! policy of the Q-update.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inner_opt::{greedy_step, FEvaluator, GreedyPolicy};
use crate::measure_ot::{pushforward, StateMeasure};
use crate::model::{Criterion, Model, ModelConstants};
use crate::qfunction::{Membership, MfePair, QFunction};
use crate::sampling::{dirichlet, indexed_rng, random_lipschitz};

/// Lower clamp on `k` and `1 - k` in the stopping threshold.
pub const EPS_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Precomputed constants; estimated from `probes` and `seed` when absent.
    pub constants: Option<ModelConstants>,
    pub probes: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 10_000, constants: None, probes: 16, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub q: f64,
    pub mu: f64,
}

impl Residual {
    pub fn total(&self) -> f64 {
        self.q + self.mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterReached,
}

/// Residuals evaluated at the returned pair `z*`.
#[derive(Debug, Clone, Serialize)]
pub struct Certificates {
    /// `D(T(z*), z*)` for the solver's operator `T`.
    pub fixed_point_residual: f64,
    /// Largest lattice gap between `Q*` and its Q-update.
    pub bellman_residual: f64,
    /// `W1(mu*, pushforward(mu*, pi*))`.
    pub invariance_residual: f64,
    /// `max_x |Q*_min(x) + rho* - min_a [c + sum Q*_min p]|` (average criterion).
    pub acoe_residual: Option<f64>,
    pub gain: Option<f64>,
    /// Membership of `Q*` in the bounded Lipschitz Q-class.
    pub membership: Membership,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub criterion: Criterion,
    pub iterations: usize,
    pub residual_history: Vec<Residual>,
    /// Contraction modulus used by the stopping rule.
    pub k_used: f64,
    pub stop_threshold: f64,
    /// `r_n k / (1 - k)`, present only when `k < 1`.
    pub certified_distance_bound: Option<f64>,
    pub status: SolveStatus,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub tol: f64,
    pub max_iter: usize,
    pub certificates: Certificates,
    pub constants: ModelConstants,
    pub wall_time_secs: f64,
}

/// Residual level below which the iteration stops:
/// `tol * max(1 - k, eps) / max(k, eps)`, with `k` clamped to 1.
pub fn stop_threshold(tol: f64, k: f64) -> f64 {
    let k = k.min(1.0);
    tol * (1.0 - k).max(EPS_FLOOR) / k.max(EPS_FLOOR)
}

/// The Q-update on the lattice together with the greedy policy that realizes `Q'_min`.
pub(crate) fn q_update(model: &Model, q_min: &[f64], mu: &StateMeasure, lambda: Option<&[f64]>) -> Result<(QFunction, GreedyPolicy)> {
    let ev = FEvaluator::for_model(model, q_min, mu, lambda)?;
    let (policy, mins) = greedy_step(&ev)?;
    let na = model.n_actions();
    let values: Vec<f64> = (0..model.n_states() * na).into_par_iter().map(|c| ev.value_at(c / na, c % na)).collect();
    Ok((QFunction::from_parts(model.n_states(), na, values, mins), policy))
}

/// One application of the joint operator. Both components read the input pair.
pub fn apply_operator(model: &Model, pair: &MfePair, lambda: Option<&[f64]>) -> Result<(MfePair, GreedyPolicy)> {
    check_pair(model, pair)?;
    let (q, policy) = q_update(model, pair.q.q_min(), &pair.mu, lambda)?;
    let mu = pushforward(&pair.mu, &policy, model);
    Ok((MfePair { q, mu }, policy))
}

fn check_pair(model: &Model, pair: &MfePair) -> Result<()> {
    if pair.q.n_states() != model.n_states() {
        return Err(Error::DimensionMismatch { expected: model.n_states(), found: pair.q.n_states() });
    }
    if pair.q.n_actions() != model.n_actions() {
        return Err(Error::DimensionMismatch { expected: model.n_actions(), found: pair.q.n_actions() });
    }
    if pair.mu.len() != model.n_states() {
        return Err(Error::DimensionMismatch { expected: model.n_states(), found: pair.mu.len() });
    }
    Ok(())
}

pub(crate) struct RunOutcome {
    pub pair: MfePair,
    pub policy: GreedyPolicy,
    pub report: SolveReport,
}

/// Iterates `z_{n+1} = T(z_n)` until the residual `D(z_n, z_{n-1})` drops below
/// [`stop_threshold`] or `max_iter` applications have been made.
pub(crate) fn iterate(
    model: &Model,
    start: MfePair,
    lambda: Option<&[f64]>,
    constants: ModelConstants,
    tol: f64,
    max_iter: usize,
) -> Result<RunOutcome> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance {tol} must be positive")));
    }
    let started = Instant::now();
    let k = constants.modulus();
    let threshold = stop_threshold(tol, k);
    let mut warnings = Vec::new();
    if !(k < 1.0) {
        warnings.push(format!(
            "not contractive: estimated modulus {k} >= 1; no distance bound is certified"
        ));
    }
    let mut current = start;
    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIterReached;
    for _ in 0..max_iter {
        let (next, _) = apply_operator(model, &current, lambda)?;
        let (dq, dmu) = next.distance_parts(&current, model)?;
        history.push(Residual { q: dq, mu: dmu });
        current = next;
        if dq + dmu <= threshold {
            status = SolveStatus::Converged;
            break;
        }
    }
    let (image, policy) = apply_operator(model, &current, lambda)?;
    let (dq, dmu) = image.distance_parts(&current, model)?;
    let bellman_residual = current
        .q
        .values()
        .iter()
        .zip(image.q.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let last = history.last().map_or(f64::INFINITY, Residual::total);
    let certified_distance_bound = (k < 1.0 && last.is_finite()).then(|| last * k / (1.0 - k));
    let membership = current.q.membership(model, constants.value_bound, constants.lip_bound);
    let report = SolveReport {
        criterion: model.criterion(),
        iterations: history.len(),
        residual_history: history,
        k_used: k,
        stop_threshold: threshold,
        certified_distance_bound,
        status,
        converged: status == SolveStatus::Converged,
        warnings,
        tol,
        max_iter,
        certificates: Certificates {
            fixed_point_residual: dq + dmu,
            bellman_residual,
            invariance_residual: dmu,
            acoe_residual: None,
            gain: None,
            membership,
        },
        constants,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome { pair: current, policy, report })
}

/// Q-function `F(., v, nu, .)` tabulated on the lattice; it lies in the Q-class
/// whenever `v` lies in the value-function class.
pub fn q_from_value(model: &Model, v: &[f64], nu: &StateMeasure, lambda: Option<&[f64]>) -> Result<QFunction> {
    q_update(model, v, nu, lambda).map(|(q, _)| q)
}

/// Radii `(value, lip)` used to sample value functions.
pub(crate) fn sampling_radii(model: &Model, constants: &ModelConstants) -> (f64, f64) {
    let value = if constants.value_bound.is_finite() && constants.value_bound > 0.0 {
        constants.value_bound
    } else {
        10.0 * constants.m.max(1.0)
    };
    let lip = if constants.lip_bound.is_finite() {
        constants.lip_bound
    } else {
        let diam = model.states().diameter();
        if diam > 0.0 {
            value / diam
        } else {
            f64::INFINITY
        }
    };
    (value, lip)
}

/// Random pair `(Q, mu)` with `Q = F(., v, nu, .)` for a random value function
/// `v` of the class and random measures.
pub fn sample_pair<R: Rng>(model: &Model, constants: &ModelConstants, rng: &mut R) -> Result<MfePair> {
    let (v, nu, mu) = sample_ingredients(model, constants, rng);
    Ok(MfePair { q: q_from_value(model, &v, &nu, constants.lambda.as_deref())?, mu })
}

fn sample_ingredients<R: Rng>(model: &Model, constants: &ModelConstants, rng: &mut R) -> (Vec<f64>, StateMeasure, StateMeasure) {
    let n = model.n_states();
    let (value, lip) = sampling_radii(model, constants);
    let v = random_lipschitz(model.states(), lip, value, rng);
    let nu = dirichlet(n, rng);
    let mu = dirichlet(n, rng);
    (v, nu, mu)
}

fn mix(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// Which components differ between the two points of a sampled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Both the Q-function and the measure.
    Joint,
    /// The Q-function only; both points share the measure.
    QOnly,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionEstimate {
    pub n_pairs: usize,
    pub seed: u64,
    pub mode: PerturbationMode,
    /// `D(T z, T z') / D(z, z')` per pair.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub modulus: f64,
    pub within_modulus: bool,
}

/// Largest observed ratio `D(T z, T z') / D(z, z')` over random pairs. Even
/// pairs are independent draws; odd pairs are convex perturbations
/// `z' = (1 - t) z + t z''` with `t` log-uniform in `[1e-4, 1]`.
pub fn estimate_contraction(
    model: &Model,
    constants: &ModelConstants,
    n_pairs: usize,
    seed: u64,
    mode: PerturbationMode,
) -> Result<ContractionEstimate> {
    if n_pairs == 0 {
        return Err(Error::Parameter("n_pairs must be at least 1".into()));
    }
    let lambda = constants.lambda.as_deref();
    let ratios: Vec<Result<Option<f64>>> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = indexed_rng(seed, "contraction-pairs", i as u64);
            let (v, nu, mu) = sample_ingredients(model, constants, &mut rng);
            let (v2, nu2, mu2) = sample_ingredients(model, constants, &mut rng);
            let t = if i % 2 == 0 { 1.0 } else { 10f64.powf(-4.0 * rng.random::<f64>()) };
            let v_b = mix(&v, &v2, t);
            let nu_b = StateMeasure::from_weights(&mix(nu.probs(), nu2.probs(), t))?;
            let mu_b = match mode {
                PerturbationMode::Joint => StateMeasure::from_weights(&mix(mu.probs(), mu2.probs(), t))?,
                PerturbationMode::QOnly => mu.clone(),
            };
            let za = MfePair { q: q_from_value(model, &v, &nu, lambda)?, mu };
            let zb = MfePair { q: q_from_value(model, &v_b, &nu_b, lambda)?, mu: mu_b };
            let d = za.distance(&zb, model)?;
            if d == 0.0 {
                return Ok(None);
            }
            let (ta, _) = apply_operator(model, &za, lambda)?;
            let (tb, _) = apply_operator(model, &zb, lambda)?;
            Ok(Some(ta.distance(&tb, model)? / d))
        })
        .collect();
    let ratios: Vec<f64> = ratios.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let modulus = constants.modulus();
    Ok(ContractionEstimate {
        n_pairs,
        seed,
        mode,
        max_ratio,
        within_modulus: max_ratio <= modulus + 1e-8,
        ratios,
        modulus,
    })
}
