//! Sampled estimates of the Lipschitz, drift and convexity constants of a
//! model, and the contraction moduli assembled from them.
//!
//! Every Lipschitz constant is a maximum of difference quotients over grid
//! pairs and probe measures, so it is a lower bound on the true constant at
//! the sampled resolution, never a proof.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Criterion, Model};
use crate::error::{Error, Result};
use crate::inner_opt::{euclid, FEvaluator};
use crate::measure_ot::{kr_norm, w1_distance, w1_raw, StateMeasure};
use crate::mfe_average::minorization_from_rows;
use crate::sampling::{dirichlet, stream_rng};

/// Estimated model constants. `k_hat` is set for the discounted criterion and
/// `kappa_hat` for the average criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub criterion: Criterion,
    /// `beta` (discounted) or 1 (average).
    pub xi: f64,
    /// Cost Lipschitz constant in the measure, weighted by `w`.
    pub l1: f64,
    /// Cost Lipschitz constant in the state.
    pub l2: f64,
    /// Kernel Lipschitz constant in `(a, mu)`: `max(k1_action, k1_measure)`.
    pub k1: f64,
    pub k1_action: f64,
    pub k1_measure: f64,
    /// Kernel Lipschitz constant in `(x, a)`: `max(k2_state, k1_action)`.
    pub k2: f64,
    pub k2_state: f64,
    /// Lipschitz constant of the action gradient of `F` (box actions only).
    pub kf: Option<f64>,
    /// Strong convexity modulus of `F` in the action (box actions only).
    pub rho: Option<f64>,
    /// Minimizer sensitivity used in place of `K_F / rho`.
    pub sensitivity: f64,
    pub sensitivity_source: SensitivitySource,
    /// `max c / w`.
    pub m: f64,
    pub alpha: f64,
    pub b: f64,
    /// Minorizing measure (average criterion).
    pub lambda: Option<Vec<f64>>,
    pub lambda_mass: Option<f64>,
    /// `M / (1 - xi alpha)`: w-norm radius of the Q-class.
    pub value_bound: f64,
    /// `L2 / (1 - xi K2)`: Lipschitz radius of `Q_min` in the Q-class.
    pub lip_bound: f64,
    pub k_hat: Option<f64>,
    pub kappa_hat: Option<f64>,
    /// Whether the assembled modulus is below 1 at the sampled resolution.
    pub contraction_consistent: bool,
    pub n_probes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivitySource {
    /// `K_F / rho` from finite-difference gradient and curvature bounds.
    GradientBound,
    /// Largest observed minimizer displacement quotient (grid actions).
    SampledMinimizer,
}

impl ModelConstants {
    /// `k_hat` or `kappa_hat`, whichever matches the criterion.
    pub fn modulus(&self) -> f64 {
        match self.criterion {
            Criterion::Discounted => self.k_hat.expect("set for discounted criterion"),
            Criterion::Average => self.kappa_hat.expect("set for average criterion"),
        }
    }

    /// Recomputes the modulus from the stored component constants.
    pub fn recompute_modulus(&self) -> f64 {
        contraction_formula(self.xi, self.alpha, self.l1, self.l2, self.k1, self.k2, self.sensitivity)
    }
}

/// `x * y` with `0 * inf = 0`.
pub(crate) fn mul0(x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        0.0
    } else {
        x * y
    }
}

/// `num / (1 - xi q)`, infinite when the denominator is not positive, zero when `num` is.
pub(crate) fn geometric_bound(num: f64, xi: f64, q: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if xi * q < 1.0 {
        num / (1.0 - xi * q)
    } else {
        f64::INFINITY
    }
}

/// `max { xi alpha + s K1, L1 + xi L2/(1 - xi K2) K1 + (s + 1) K1 + K2 + s }`
/// with `s` the minimizer sensitivity `K_F / rho`.
pub fn contraction_formula(xi: f64, alpha: f64, l1: f64, l2: f64, k1: f64, k2: f64, s: f64) -> f64 {
    let lam = geometric_bound(l2, xi, k2);
    let first = xi * alpha + mul0(s, k1);
    let second = l1 + xi * mul0(lam, k1) + mul0(s + 1.0, k1) + k2 + s;
    first.max(second)
}

/// Uniform measure, every Dirac, then `n_random` Dirichlet(1, ..., 1) draws.
/// The Dirichlet draws come from one stream, so a larger `n_random` extends a
/// smaller one.
pub fn probe_measures(n_states: usize, n_random: usize, seed: u64) -> Vec<StateMeasure> {
    let mut probes = Vec::with_capacity(n_states + 1 + n_random);
    probes.push(StateMeasure::uniform(n_states));
    probes.extend((0..n_states).map(|i| StateMeasure::dirac(n_states, i)));
    let mut rng = stream_rng(seed, "probe-measures");
    probes.extend((0..n_random).map(|_| dirichlet(n_states, &mut rng)));
    probes
}

/// Costs and kernel rows of one probe measure over the grid.
pub(crate) struct ProbeData {
    pub mu: StateMeasure,
    /// `costs[x * na + k]`.
    pub costs: Vec<f64>,
    /// `rows[(x * na + k) * n + y]`.
    pub rows: Vec<f64>,
}

pub(crate) fn tabulate(model: &Model, mu: &StateMeasure) -> ProbeData {
    let (n, na) = (model.n_states(), model.n_actions());
    let mut costs = vec![0.0; n * na];
    let mut rows = vec![0.0; n * na * n];
    for x in 0..n {
        for k in 0..na {
            costs[x * na + k] = model.cost_at(x, k, mu);
            model.kernel_row_at(x, k, mu, &mut rows[(x * na + k) * n..(x * na + k + 1) * n]);
        }
    }
    ProbeData { mu: mu.clone(), costs, rows }
}

impl ProbeData {
    fn row(&self, n: usize, na: usize, x: usize, k: usize) -> &[f64] {
        &self.rows[(x * na + k) * n..(x * na + k + 1) * n]
    }
}

fn par_max<F: Fn(usize) -> f64 + Sync + Send>(len: usize, f: F) -> f64 {
    (0..len).into_par_iter().map(f).reduce(|| 0.0, f64::max)
}

/// Estimates the model constants from `n_probe_measures` random probes plus
/// the uniform measure and every Dirac.
pub fn estimate_constants(model: &Model, n_probe_measures: usize, seed: u64) -> Result<ModelConstants> {
    if n_probe_measures < 2 {
        return Err(Error::Parameter(format!("n_probe_measures = {n_probe_measures} must be at least 2")));
    }
    let (n, na) = (model.n_states(), model.n_actions());
    let space = model.states();
    let lattice = model.actions().lattice();
    let probes = probe_measures(n, n_probe_measures, seed);
    let data: Vec<ProbeData> = probes.par_iter().map(|mu| tabulate(model, mu)).collect();
    let np = data.len();
    let xi = model.xi();
    let w_max_vec: Vec<f64> = (0..n).map(|x| model.weight_max(x)).collect();

    let m = par_max(np, |i| {
        let d = &data[i];
        (0..n * na).map(|c| d.costs[c] / model.weight_at(c / na, c % na)).fold(0.0, f64::max)
    });

    let (lambda, alpha, b) = match model.criterion() {
        Criterion::Discounted => {
            let alpha = par_max(np, |i| drift_ratio(model, &data[i], None, &w_max_vec));
            (None, alpha, 0.0)
        }
        Criterion::Average => {
            let lam = minorization_from_rows(model, &data, seed)?;
            let alpha = par_max(np, |i| drift_ratio(model, &data[i], Some(&lam), &w_max_vec));
            let b = lam.iter().zip(&w_max_vec).map(|(l, w)| l * w).sum();
            (Some(lam), alpha, b)
        }
    };

    // Probe pairs with positive distance.
    let pairs: Vec<(usize, usize, f64)> = (0..np)
        .flat_map(|i| ((i + 1)..np).map(move |j| (i, j)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, j)| (i, j, w1_distance(&data[i].mu, &data[j].mu, space).expect("same grid")))
        .filter(|p| p.2 > 0.0)
        .collect();

    let (l1, k1_measure) = pairs
        .par_iter()
        .map(|&(i, j, d)| {
            let (a, bb) = (&data[i], &data[j]);
            let mut lc = 0.0_f64;
            let mut lk = 0.0_f64;
            for x in 0..n {
                for k in 0..na {
                    let c = x * na + k;
                    lc = lc.max((a.costs[c] - bb.costs[c]).abs() / model.weight_at(x, k) / d);
                    lk = lk.max(w1_raw(a.row(n, na, x, k), bb.row(n, na, x, k), space) / d);
                }
            }
            (lc, lk)
        })
        .reduce(|| (0.0, 0.0), |p, q| (p.0.max(q.0), p.1.max(q.1)));

    let (l2, k2_state) = (0..np)
        .into_par_iter()
        .map(|i| {
            let d = &data[i];
            let mut lc = 0.0_f64;
            let mut lk = 0.0_f64;
            for x in 0..n {
                for y in (x + 1)..n {
                    let dist = space.dist(x, y);
                    for k in 0..na {
                        lc = lc.max((d.costs[x * na + k] - d.costs[y * na + k]).abs() / dist);
                        lk = lk.max(w1_raw(d.row(n, na, x, k), d.row(n, na, y, k), space) / dist);
                    }
                }
            }
            (lc, lk)
        })
        .reduce(|| (0.0, 0.0), |p, q| (p.0.max(q.0), p.1.max(q.1)));

    let k1_action = par_max(np, |i| {
        let d = &data[i];
        let mut lk = 0.0_f64;
        for x in 0..n {
            for k in 0..na {
                for j in (k + 1)..na {
                    let gap = euclid(&lattice[k], &lattice[j]);
                    if gap > 0.0 {
                        lk = lk.max(w1_raw(d.row(n, na, x, k), d.row(n, na, x, j), space) / gap);
                    }
                }
            }
        }
        lk
    });

    let k1 = k1_action.max(k1_measure);
    let k2 = k2_state.max(k1_action);
    let value_bound = geometric_bound(m, xi, alpha);
    let lip_bound = geometric_bound(l2, xi, k2);

    let (kf, rho, sensitivity, sensitivity_source) = if model.actions().is_box() {
        let bounds = ClassBounds { value: value_bound, lip: lip_bound, w_bar: w_max_vec.iter().cloned().fold(1.0, f64::max) };
        let (kf, rho) = gradient_constants(model, &data, &pairs, lambda.as_deref(), &bounds)?;
        (Some(kf), Some(rho), kf / rho, SensitivitySource::GradientBound)
    } else {
        let s = sampled_sensitivity(model, &data, &pairs, lambda.as_deref())?;
        (None, None, s, SensitivitySource::SampledMinimizer)
    };

    let modulus = contraction_formula(xi, alpha, l1, l2, k1, k2, sensitivity);
    let (k_hat, kappa_hat) = match model.criterion() {
        Criterion::Discounted => (Some(modulus), None),
        Criterion::Average => (None, Some(modulus)),
    };
    let lambda_mass = lambda.as_ref().map(|l| l.iter().sum());
    Ok(ModelConstants {
        criterion: model.criterion(),
        xi,
        l1,
        l2,
        k1,
        k1_action,
        k1_measure,
        k2,
        k2_state,
        kf,
        rho,
        sensitivity,
        sensitivity_source,
        m,
        alpha,
        b,
        lambda,
        lambda_mass,
        value_bound,
        lip_bound,
        k_hat,
        kappa_hat,
        contraction_consistent: modulus < 1.0,
        n_probes: np,
        seed,
    })
}

/// `max_{x,a} sum_y w_max(y) K(y | x, a, mu) / w(x, a)` with `K = p` or `p - lambda`.
fn drift_ratio(model: &Model, d: &ProbeData, lam: Option<&[f64]>, w_max: &[f64]) -> f64 {
    let (n, na) = (model.n_states(), model.n_actions());
    let offset: f64 = lam.map_or(0.0, |l| l.iter().zip(w_max).map(|(a, b)| a * b).sum());
    let mut best = 0.0_f64;
    for x in 0..n {
        for k in 0..na {
            let mass: f64 = d.row(n, na, x, k).iter().zip(w_max).map(|(p, w)| p * w).sum::<f64>() - offset;
            best = best.max(mass / model.weight_at(x, k));
        }
    }
    best
}

/// Radii of the class of value functions `v` entering `F`:
/// `0 <= v <= value * w_bar` and `Lip(v) <= lip`.
struct ClassBounds {
    value: f64,
    lip: f64,
    w_bar: f64,
}

impl ClassBounds {
    /// Upper bound on `sup_v <v, d>` over the class.
    fn support(&self, d: &[f64], model: &Model) -> f64 {
        let total: f64 = d.iter().sum();
        let abs: f64 = d.iter().map(|v| v.abs()).sum();
        if abs == 0.0 {
            return 0.0;
        }
        let top = mul0(self.value, self.w_bar);
        // A nonnegative v bounded by `top` differs from its midrange by at most top/2.
        let by_range = mul0(0.5 * top, abs);
        let by_lip = if self.lip.is_finite() { mul0(self.lip, kr_norm(d, model.states())) } else { f64::INFINITY };
        by_lip.min(by_range) + mul0(top, total.abs())
    }
}

/// Finite-difference derivatives of cost and kernel row in the action at one
/// `(x, a, mu)`.
struct ActionDerivatives {
    grad_c: Vec<f64>,
    /// `grad_p[j * n + y]`.
    grad_p: Vec<f64>,
    hess_c: Vec<f64>,
    /// `hess_p[(i * d + j) * n + y]`.
    hess_p: Vec<f64>,
}

fn action_derivatives(model: &Model, x: usize, a: &[f64], mu: &StateMeasure, widths: &[f64]) -> ActionDerivatives {
    let n = model.n_states();
    let dim = a.len();
    let eval = |p: &[f64]| (model.cost(x, p, mu), model.kernel_row(x, p, mu));
    let (c0, p0) = eval(a);
    let mut grad_c = vec![0.0; dim];
    let mut grad_p = vec![0.0; dim * n];
    let mut hess_c = vec![0.0; dim * dim];
    let mut hess_p = vec![0.0; dim * dim * n];
    let mut pt = a.to_vec();
    for i in 0..dim {
        if widths[i] == 0.0 {
            continue;
        }
        let h = 1e-5 * widths[i];
        pt[i] = a[i] + h;
        let (cp, pp) = eval(&pt);
        pt[i] = a[i] - h;
        let (cm, pm) = eval(&pt);
        pt[i] = a[i];
        grad_c[i] = (cp - cm) / (2.0 * h);
        for y in 0..n {
            grad_p[i * n + y] = (pp[y] - pm[y]) / (2.0 * h);
        }
        for j in i..dim {
            if widths[j] == 0.0 {
                continue;
            }
            let hi = 1e-3 * widths[i];
            let hj = 1e-3 * widths[j];
            let (hc, hp) = if i == j {
                pt[i] = a[i] + hi;
                let (cp, pp) = eval(&pt);
                pt[i] = a[i] - hi;
                let (cm, pm) = eval(&pt);
                pt[i] = a[i];
                let hc = (cp - 2.0 * c0 + cm) / (hi * hi);
                let hp: Vec<f64> = (0..n).map(|y| (pp[y] - 2.0 * p0[y] + pm[y]) / (hi * hi)).collect();
                (hc, hp)
            } else {
                let mut corner = |si: f64, sj: f64| {
                    pt[i] = a[i] + si * hi;
                    pt[j] = a[j] + sj * hj;
                    let r = eval(&pt);
                    pt[i] = a[i];
                    pt[j] = a[j];
                    r
                };
                let (cpp, ppp) = corner(1.0, 1.0);
                let (cpm, ppm) = corner(1.0, -1.0);
                let (cmp, pmp) = corner(-1.0, 1.0);
                let (cmm, pmm) = corner(-1.0, -1.0);
                let s = 4.0 * hi * hj;
                let hc = (cpp - cpm - cmp + cmm) / s;
                let hp: Vec<f64> = (0..n).map(|y| (ppp[y] - ppm[y] - pmp[y] + pmm[y]) / s).collect();
                (hc, hp)
            };
            hess_c[i * dim + j] = hc;
            hess_c[j * dim + i] = hc;
            for y in 0..n {
                hess_p[(i * dim + j) * n + y] = hp[y];
                hess_p[(j * dim + i) * n + y] = hp[y];
            }
        }
    }
    ActionDerivatives { grad_c, grad_p, hess_c, hess_p }
}

/// `K_F` and `rho` for box actions, as suprema over the lattice, the probe
/// measures and the value-function class.
fn gradient_constants(
    model: &Model,
    data: &[ProbeData],
    pairs: &[(usize, usize, f64)],
    lam: Option<&[f64]>,
    class: &ClassBounds,
) -> Result<(f64, f64)> {
    let (n, na) = (model.n_states(), model.n_actions());
    let xi = model.xi();
    let actions = model.actions();
    let widths: Vec<f64> = actions.lower().iter().zip(actions.upper()).map(|(l, h)| h - l).collect();
    let dim = actions.dim();
    let lattice = actions.lattice();
    // The sub-kernel differs from p by a constant, so its action derivatives coincide with p's.
    let _ = lam;

    let derivs: Vec<Vec<ActionDerivatives>> = data
        .par_iter()
        .map(|d| {
            (0..n * na)
                .map(|c| action_derivatives(model, c / na, &lattice[c % na], &d.mu, &widths))
                .collect()
        })
        .collect();

    let grad_gap = |a: &ActionDerivatives, b: &ActionDerivatives| -> f64 {
        (0..dim)
            .map(|j| {
                let dp: Vec<f64> = (0..n).map(|y| a.grad_p[j * n + y] - b.grad_p[j * n + y]).collect();
                let g = (a.grad_c[j] - b.grad_c[j]).abs() + xi * class.support(&dp, model);
                g * g
            })
            .sum::<f64>()
            .sqrt()
    };

    let w_max: Vec<f64> = (0..n).map(|x| model.weight_max(x)).collect();
    let k_v = par_max(data.len(), |i| {
        let mut best = 0.0_f64;
        for dv in &derivs[i] {
            let norm = (0..dim)
                .map(|j| {
                    let s: f64 = (0..n).map(|y| w_max[y] * dv.grad_p[j * n + y].abs()).sum();
                    s * s
                })
                .sum::<f64>()
                .sqrt();
            best = best.max(xi * norm);
        }
        best
    });

    let k_x = par_max(data.len(), |i| {
        let mut best = 0.0_f64;
        for x in 0..n {
            for y in (x + 1)..n {
                let dist = model.states().dist(x, y);
                for k in 0..na {
                    best = best.max(grad_gap(&derivs[i][x * na + k], &derivs[i][y * na + k]) / dist);
                }
            }
        }
        best
    });

    let k_mu = pairs
        .par_iter()
        .map(|&(i, j, d)| {
            (0..n * na).map(|c| grad_gap(&derivs[i][c], &derivs[j][c]) / d).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);

    let rho = derivs
        .par_iter()
        .map(|per_probe| {
            per_probe
                .iter()
                .map(|dv| {
                    // Gershgorin lower bound on the smallest Hessian eigenvalue.
                    (0..dim)
                        .filter(|&i| widths[i] > 0.0)
                        .map(|i| {
                            let hp_ii = &dv.hess_p[(i * dim + i) * n..(i * dim + i + 1) * n];
                            let mut row = dv.hess_c[i * dim + i] - xi * class.support(hp_ii, model);
                            for j in (0..dim).filter(|&j| j != i && widths[j] > 0.0) {
                                let hp_ij = &dv.hess_p[(i * dim + j) * n..(i * dim + j + 1) * n];
                                row -= dv.hess_c[i * dim + j].abs() + xi * class.support(hp_ij, model);
                            }
                            row
                        })
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);

    if !(rho > 0.0) {
        return Err(Error::Degenerate(format!(
            "strong convexity estimate rho = {rho:e} is not positive for box actions"
        )));
    }
    Ok((k_x.max(k_v).max(k_mu), rho))
}

/// Fibonacci-spaced steps of frozen-measure value iteration used as sample value functions.
const SAMPLE_STEPS: [usize; 10] = [0, 1, 2, 3, 5, 8, 13, 21, 34, 55];

/// Largest minimizer displacement per unit of `d(x, y) + |v - v'|_{w_max} + W1(mu, mu')`
/// over sampled value functions and the probe measures, varying one argument at a time.
fn sampled_sensitivity(
    model: &Model,
    data: &[ProbeData],
    pairs: &[(usize, usize, f64)],
    lam: Option<&[f64]>,
) -> Result<f64> {
    let (n, na) = (model.n_states(), model.n_actions());
    let lattice = model.actions().lattice();
    let uniform = &data[0].mu;

    let mut values = Vec::with_capacity(SAMPLE_STEPS.len());
    let mut v = vec![0.0; n];
    let mut step = 0;
    for &target in &SAMPLE_STEPS {
        while step < target {
            let ev = FEvaluator::for_model(model, &v, uniform, lam)?;
            v = (0..n).map(|x| (0..na).map(|k| ev.value_at(x, k)).fold(f64::INFINITY, f64::min)).collect();
            step += 1;
        }
        values.push(v.clone());
    }

    let xi = model.xi();
    let offset = |v: &[f64]| lam.map_or(0.0, |l| v.iter().zip(l).map(|(a, b)| a * b).sum::<f64>());
    // argmin[vi][probe][x] as lattice index, lowest index on ties.
    let argmins: Vec<Vec<Vec<usize>>> = values
        .par_iter()
        .map(|v| {
            let off = offset(v);
            data.iter()
                .map(|d| {
                    (0..n)
                        .map(|x| {
                            let mut best = 0;
                            let mut best_val = f64::INFINITY;
                            for k in 0..na {
                                let row = d.row(n, na, x, k);
                                let f = d.costs[x * na + k]
                                    + xi * (row.iter().zip(v.iter()).map(|(p, q)| p * q).sum::<f64>() - off);
                                if f < best_val {
                                    best = k;
                                    best_val = f;
                                }
                            }
                            best
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let gap = |k: usize, j: usize| euclid(&lattice[k], &lattice[j]);
    let space = model.states();
    let s_x = par_max(values.len() * data.len(), |c| {
        let f = &argmins[c / data.len()][c % data.len()];
        let mut best = 0.0_f64;
        for x in 0..n {
            for y in (x + 1)..n {
                best = best.max(gap(f[x], f[y]) / space.dist(x, y));
            }
        }
        best
    });
    let s_mu = pairs
        .par_iter()
        .map(|&(i, j, d)| {
            argmins
                .iter()
                .map(|per_v| (0..n).map(|x| gap(per_v[i][x], per_v[j][x]) / d).fold(0.0, f64::max))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let w_max: Vec<f64> = (0..n).map(|x| model.weight_max(x)).collect();
    let mut s_v = 0.0_f64;
    for a in 0..values.len() {
        for b in (a + 1)..values.len() {
            let dv = values[a].iter().zip(&values[b]).zip(&w_max).map(|((p, q), w)| (p - q).abs() / w).fold(0.0, f64::max);
            if dv == 0.0 {
                continue;
            }
            for (pa, pb) in argmins[a].iter().zip(&argmins[b]) {
                for (ka, kb) in pa.iter().zip(pb) {
                    s_v = s_v.max(gap(*ka, *kb) / dv);
                }
            }
        }
    }
    Ok(s_x.max(s_mu).max(s_v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_handles_zero_times_infinity() {
        // xi K2 >= 1 makes the Lipschitz radius infinite; K1 = 0 must cancel it.
        let k = contraction_formula(0.9, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0);
        assert_eq!(k, 2.0);
        assert!(contraction_formula(0.9, 1.0, 0.0, 1.0, 0.1, 2.0, 0.0).is_infinite());
    }

    #[test]
    fn probes_are_prefix_stable() {
        let a = probe_measures(6, 3, 11);
        let b = probe_measures(6, 8, 11);
        assert_eq!(a.len(), 10);
        assert_eq!(&b[..10], &a[..]);
    }
}
