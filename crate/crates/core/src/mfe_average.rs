//! Average-cost equilibria: minorizing measure, sub-stochastic kernel,
//! the operator `L = (L1, L2)`, gain and optimality-equation residuals.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::{apply_operator, iterate, q_update, SolveOptions, SolveReport};
use crate::inner_opt::{minimize_f, FEvaluator, GreedyPolicy, KernelMode};
use crate::measure_ot::StateMeasure;
use crate::model::constants::{tabulate, ProbeData};
use crate::model::{estimate_constants, probe_measures, Criterion, Model};
use crate::qfunction::{MfePair, QFunction};
use crate::sampling::{dirichlet, stream_rng};

/// Shrink factor applied to the pointwise minimum of kernel rows.
pub const MINORIZATION_SAFETY: f64 = 1.0 - 1e-9;
/// Fresh probe measures used to re-verify a minorizing measure.
pub const HOLDOUT_PROBES: usize = 1000;

/// Sub-probability measure `lambda` with `p(. | x, a, mu) >= lambda`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorizationMeasure {
    pub lam: Vec<f64>,
    pub mass: f64,
}

fn require_average(model: &Model) -> Result<()> {
    match model.criterion() {
        Criterion::Average => Ok(()),
        Criterion::Discounted => Err(Error::Parameter("model uses the discounted criterion".into())),
    }
}

/// Pointwise minimum of `p(y | x, a, mu)` over the grid, the lattice and `probes`,
/// shrunk by [`MINORIZATION_SAFETY`].
pub fn compute_minorization(model: &Model, probes: &[StateMeasure]) -> Result<MinorizationMeasure> {
    if probes.is_empty() {
        return Err(Error::Parameter("probe set is empty".into()));
    }
    let data: Vec<ProbeData> = probes.par_iter().map(|mu| tabulate(model, mu)).collect();
    let lam = pointwise_min(model, &data);
    finish(lam)
}

fn pointwise_min(model: &Model, data: &[ProbeData]) -> Vec<f64> {
    let n = model.n_states();
    let mut lam = vec![f64::INFINITY; n];
    for d in data {
        for row in d.rows.chunks(n) {
            for (l, p) in lam.iter_mut().zip(row) {
                *l = l.min(*p);
            }
        }
    }
    lam.iter().map(|l| l * MINORIZATION_SAFETY).collect()
}

fn finish(lam: Vec<f64>) -> Result<MinorizationMeasure> {
    let mass: f64 = lam.iter().sum();
    if !(mass > 1e-12) {
        return Err(Error::NoMinorization { mass });
    }
    Ok(MinorizationMeasure { lam, mass })
}

/// Counts `(probe, x, a, y)` with `p(y | x, a, mu) < lambda(y)` over `n_fresh`
/// random measures; returns the count and the largest shortfall.
pub fn verify_minorization(model: &Model, lam: &[f64], n_fresh: usize, seed: u64) -> (usize, f64) {
    let mut rng = stream_rng(seed, "minorization-holdout");
    let probes: Vec<StateMeasure> = (0..n_fresh).map(|_| dirichlet(model.n_states(), &mut rng)).collect();
    probes
        .par_iter()
        .map(|mu| {
            let d = tabulate(model, mu);
            let mut count = 0;
            let mut worst = 0.0_f64;
            for row in d.rows.chunks(model.n_states()) {
                for (p, l) in row.iter().zip(lam) {
                    if p < l {
                        count += 1;
                        worst = worst.max(l - p);
                    }
                }
            }
            (count, worst)
        })
        .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)))
}

/// Minorizing measure from tabulated probes, re-verified on held-out probes
/// and shrunk until no held-out row violates it.
pub(crate) fn minorization_from_rows(model: &Model, data: &[ProbeData], seed: u64) -> Result<Vec<f64>> {
    let n = model.n_states();
    let mut lam = pointwise_min(model, data);
    if model.kernel_measure_dependent() {
        let mut rng = stream_rng(seed, "minorization-holdout");
        let holdout: Vec<StateMeasure> = (0..HOLDOUT_PROBES).map(|_| dirichlet(n, &mut rng)).collect();
        loop {
            let mins: Vec<f64> = holdout
                .par_iter()
                .map(|mu| pointwise_min(model, std::slice::from_ref(&tabulate(model, mu))))
                .reduce(|| vec![f64::INFINITY; n], |a, b| a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect());
            let mut changed = false;
            for (l, m) in lam.iter_mut().zip(&mins) {
                if *m < *l {
                    *l = *m;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
    Ok(finish(lam)?.lam)
}

/// `q(. | x, a, mu) = p(. | x, a, mu) - lambda`.
pub fn sub_kernel_row(model: &Model, x: usize, a: &[f64], mu: &StateMeasure, lam: &[f64]) -> Vec<f64> {
    let mut row = model.kernel_row(x, a, mu);
    for (r, l) in row.iter_mut().zip(lam) {
        *r -= l;
    }
    row
}

/// `L1(Q, mu)(x, a) = c(x, a, mu) + sum_y Q_min(y) q(y | x, a, mu)`.
pub fn apply_l1(q: &QFunction, mu: &StateMeasure, model: &Model, lam: &[f64]) -> Result<QFunction> {
    require_average(model)?;
    q_update(model, q.q_min(), mu, Some(lam)).map(|(q, _)| q)
}

/// `L(Q, mu) = (L1(Q, mu), L2(Q, mu))`; `L2` pushes `mu` through the full kernel.
pub fn apply_l(pair: &MfePair, model: &Model, lam: &[f64]) -> Result<MfePair> {
    require_average(model)?;
    apply_operator(model, pair, Some(lam)).map(|(p, _)| p)
}

/// `rho = sum_y Q_min(y) lambda(y)`.
pub fn gain(q_min: &[f64], lam: &[f64]) -> f64 {
    q_min.iter().zip(lam).map(|(v, l)| v * l).sum()
}

/// `max_x |h(x) + rho - min_a [c(x, a, mu) + sum_y h(y) p(y | x, a, mu)]|`.
pub fn acoe_residual(model: &Model, h: &[f64], mu: &StateMeasure, rho: f64) -> Result<f64> {
    let ev = FEvaluator::with_parts(model, h, mu, 1.0, KernelMode::Full)?;
    let gaps: Vec<Result<f64>> = (0..model.n_states())
        .into_par_iter()
        .map(|x| minimize_f(&ev, x).map(|(_, m)| (h[x] + rho - m).abs()))
        .collect();
    gaps.into_iter().try_fold(0.0_f64, |acc, g| Ok(acc.max(g?)))
}

#[derive(Debug, Clone)]
pub struct AverageSolution {
    pub q_star: QFunction,
    pub mu_star: StateMeasure,
    pub gain: f64,
    pub policy: GreedyPolicy,
    pub lambda: Vec<f64>,
}

/// Iterates `L` from `(q0, mu0)`, then extracts the gain and the optimality
/// equation residual at the final pair.
pub fn solve_average(
    model: &Model,
    q0: QFunction,
    mu0: StateMeasure,
    options: &SolveOptions,
) -> Result<(AverageSolution, SolveReport)> {
    require_average(model)?;
    let constants = match &options.constants {
        Some(c) => c.clone(),
        None => estimate_constants(model, options.probes, options.seed)?,
    };
    let lam = match &constants.lambda {
        Some(l) => l.clone(),
        None => compute_minorization(model, &probe_measures(model.n_states(), options.probes, options.seed))?.lam,
    };
    let start = MfePair::new(q0, mu0);
    let mut out = iterate(model, start, Some(&lam), constants, options.tol, options.max_iter)?;
    let rho = gain(out.pair.q.q_min(), &lam);
    let residual = acoe_residual(model, out.pair.q.q_min(), &out.pair.mu, rho)?;
    out.report.certificates.gain = Some(rho);
    out.report.certificates.acoe_residual = Some(residual);
    let solution = AverageSolution { q_star: out.pair.q, mu_star: out.pair.mu, gain: rho, policy: out.policy, lambda: lam };
    Ok((solution, out.report))
}

/// [`solve_average`] from `Q = 0` and the model's initial measure.
pub fn solve_average_default(model: &Model, options: &SolveOptions) -> Result<(AverageSolution, SolveReport)> {
    solve_average(model, QFunction::zeros(model), model.init_measure().clone(), options)
}
