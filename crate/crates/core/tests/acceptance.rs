//! Acceptance suite. Each test prints one `PASS`/`FAIL` line with the measured
//! quantities; run with `cargo test --test acceptance -- --nocapture --test-threads 1`
//! to see them in order.

use std::path::PathBuf;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use mfe_core::fixed_point::{apply_operator, q_from_value};
use mfe_core::inner_opt::{check_perturbation_bound, PerturbationTuple};
use mfe_core::model::StateSpace;
use mfe_core::sampling::{dirichlet, random_lipschitz};
use mfe_core::verify::{certify, long_run_average_cost, nagent_gap, solve_frozen_mdp};
use mfe_core::{
    estimate_constants, estimate_contraction, load_model, load_model_file, solve_average_default,
    solve_discounted_default, w1, w1_dual_certificate, Criterion, GreedyPolicy, MfePair, Model, PerturbationMode,
    SolveOptions, SolveReport, StateMeasure,
};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn shipped(name: &str) -> Model {
    load_model_file(config(name)).unwrap()
}

fn report(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

struct Solved {
    pair: MfePair,
    policy: GreedyPolicy,
    report: SolveReport,
    gain: Option<f64>,
}

fn solve(model: &Model, tol: f64) -> Solved {
    let options = SolveOptions { tol, ..SolveOptions::default() };
    match model.criterion() {
        Criterion::Discounted => {
            let (pair, policy, report) = solve_discounted_default(model, &options).unwrap();
            Solved { pair, policy, report, gain: None }
        }
        Criterion::Average => {
            let (sol, report) = solve_average_default(model, &options).unwrap();
            Solved { pair: MfePair::new(sol.q_star, sol.mu_star), policy: sol.policy, report, gain: Some(sol.gain) }
        }
    }
}

fn random_measure(n: usize, rng: &mut ChaCha8Rng) -> StateMeasure {
    // Sparse measures exercise the degenerate pivots of the LP.
    let mut w: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random() }).collect();
    if w.iter().all(|v| *v == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    StateMeasure::from_weights(&w).unwrap()
}

#[test]
fn transport_line_formula_matches_lp_and_dual_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut max_gap = 0.0_f64;
    let mut max_dual_excess = f64::NEG_INFINITY;
    for _ in 0..200 {
        let n = rng.random_range(2..=100);
        let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-5.0..5.0)]).collect();
        let line = StateSpace::from_coords(coords).unwrap();
        assert!(line.line_order().is_some());
        let general = line.without_line_structure();
        let mu = random_measure(n, &mut rng);
        let nu = random_measure(n, &mut rng);
        let (cdf, _) = w1(&mu, &nu, &line).unwrap();
        let (lp, plan) = w1(&mu, &nu, &general).unwrap();
        max_gap = max_gap.max((cdf - lp).abs());
        for (got, want) in plan.row_sums().iter().zip(mu.probs()) {
            assert!((got - want).abs() < 1e-12);
        }
        let g = random_lipschitz(&line, 1.0, 10.0, &mut rng);
        let dual = w1_dual_certificate(&mu, &nu, &line, &g).unwrap();
        max_dual_excess = max_dual_excess.max(dual - lp);
    }
    report(
        "transport exactness",
        max_gap <= 1e-9 && max_dual_excess <= 1e-9,
        format!("200 pairs, max |cdf - lp| = {max_gap:.2e}, max dual - primal = {max_dual_excess:.2e}"),
    );
}

/// Random model whose kernel and cost ignore the population.
fn random_decoupled_model(rng: &mut ChaCha8Rng) -> Value {
    let n = rng.random_range(2..=12);
    let na = rng.random_range(1..=5);
    let coords: Vec<f64> = (0..n).map(|i| i as f64 + rng.random::<f64>() * 0.5).collect();
    let actions: Vec<f64> = (0..na).map(|k| k as f64).collect();
    let kernel: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| (0..na).map(|_| dirichlet(n, rng).probs().to_vec()).collect())
        .collect();
    let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..na).map(|_| rng.random_range(0.0..5.0)).collect()).collect();
    json!({
        "states": { "coords": coords },
        "actions": { "mode": "grid", "values": actions },
        "kernel": { "table": kernel },
        "cost": { "table": cost },
        "beta": rng.random_range(0.3..0.95),
        "criterion": "discounted"
    })
}

/// Textbook Q-value iteration on the raw tables.
fn classical_q_iteration(doc: &Value) -> Vec<f64> {
    let p: Vec<Vec<Vec<f64>>> = serde_json::from_value(doc["kernel"]["table"].clone()).unwrap();
    let c: Vec<Vec<f64>> = serde_json::from_value(doc["cost"]["table"].clone()).unwrap();
    let beta = doc["beta"].as_f64().unwrap();
    let (n, na) = (c.len(), c[0].len());
    let mut q = vec![0.0; n * na];
    loop {
        let v: Vec<f64> = (0..n).map(|y| q[y * na..(y + 1) * na].iter().cloned().fold(f64::INFINITY, f64::min)).collect();
        let mut next = vec![0.0; n * na];
        for x in 0..n {
            for a in 0..na {
                next[x * na + a] = c[x][a] + beta * (0..n).map(|y| p[x][a][y] * v[y]).sum::<f64>();
            }
        }
        let diff = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if diff < 1e-14 {
            return q;
        }
    }
}

#[test]
fn decoupled_models_reduce_to_classical_q_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut max_diff = 0.0_f64;
    let mut max_l1 = 0.0_f64;
    for _ in 0..20 {
        let doc = random_decoupled_model(&mut rng);
        let model = load_model(&doc.to_string()).unwrap();
        let oracle = classical_q_iteration(&doc);
        let solved = solve(&model, 1e-10);
        assert!(solved.report.converged);
        let diff = solved.pair.q.values().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        max_diff = max_diff.max(diff);
        max_l1 = max_l1.max(estimate_constants(&model, 16, 0).unwrap().l1);
    }
    report(
        "reduction to a Markov decision process",
        max_diff <= 1e-8 && max_l1 == 0.0,
        format!("20 models, max |Q - Q_classical| = {max_diff:.2e}, max L1 = {max_l1}"),
    );
}

#[test]
fn single_state_quadratic_closed_form() {
    let base = std::fs::read_to_string(config("single_state.json")).unwrap();
    let mut worst_q = 0.0_f64;
    let mut worst_a = 0.0_f64;
    let mut dirac = true;
    for beta in [0.5, 0.9] {
        let mut doc: Value = serde_json::from_str(&base).unwrap();
        doc["beta"] = json!(beta);
        let model = load_model(&doc.to_string()).unwrap();
        let solved = solve(&model, 1e-10);
        for (k, a) in model.actions().lattice().iter().enumerate() {
            worst_q = worst_q.max((solved.pair.q.get(0, k) - a[0] * a[0]).abs());
        }
        worst_a = worst_a.max(solved.policy.action(0)[0].abs());
        dirac &= solved.pair.mu.probs() == [1.0];
    }
    report(
        "single-state closed form",
        worst_q <= 1e-8 && worst_a <= 1e-6 && dirac,
        format!("beta in {{0.5, 0.9}}: max |Q - a^2| = {worst_q:.2e}, |pi(x0)| = {worst_a:.2e}, mu = delta: {dirac}"),
    );
}

#[test]
fn congestion_operator_contracts_at_estimated_modulus() {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["congestion.json", "congestion_avg.json"] {
        let model = shipped(name);
        let constants = estimate_constants(&model, 16, 0).unwrap();
        let k = constants.modulus();
        assert!(k < 1.0, "{name}: estimated modulus {k} is not below 1");
        let est = estimate_contraction(&model, &constants, 100, 0, PerturbationMode::Joint).unwrap();
        let solved = solve(&model, 1e-8);
        let r: Vec<f64> = solved.report.residual_history.iter().map(|r| r.total()).collect();
        let worst_step = r.windows(2).map(|w| w[1] - k * w[0]).fold(f64::NEG_INFINITY, f64::max);
        ok &= est.max_ratio <= k + 1e-8 && worst_step <= 1e-8;
        lines.push(format!(
            "{name}: modulus {k:.4}, max ratio {:.4} over {} pairs, max r[n+1] - k r[n] = {worst_step:.1e}",
            est.max_ratio,
            est.ratios.len()
        ));
    }
    report("empirical contraction", ok, lines.join("; "));
}

#[test]
fn converged_solves_carry_equilibrium_certificates() {
    let mut ok = true;
    let mut lines = Vec::new();
    for name in [
        "single_state.json",
        "congestion.json",
        "congestion_grid.json",
        "congestion_avg.json",
        "fixed_kernel_avg.json",
        "constant_cost_avg.json",
        "mu_independent.json",
    ] {
        let model = shipped(name);
        let solved = solve(&model, 1e-8);
        assert!(solved.report.converged, "{name} did not converge");
        let c = &solved.report.certificates;
        let optimality = c.acoe_residual.unwrap_or(c.bellman_residual);
        let lambda = solved.report.constants.lambda.as_deref();
        let (image, _) = apply_operator(&model, &solved.pair, lambda).unwrap();
        let moved = image.distance(&solved.pair, &model).unwrap();
        let cert = certify(&model, &solved.pair, &solved.policy, 1e-6).unwrap();
        let pass = optimality <= 1e-6 && c.invariance_residual <= 1e-6 && moved <= 1e-6 && cert.pass;
        ok &= pass;
        lines.push(format!(
            "{name}: optimality {optimality:.1e}, invariance {:.1e}, move {moved:.1e}, exploitability {:.1e}",
            c.invariance_residual, cert.exploitability
        ));
    }
    report("equilibrium certificates", ok, lines.join("; "));
}

#[test]
fn average_cost_gain_oracles() {
    let constant = solve(&shipped("constant_cost_avg.json"), 1e-8);
    let constant_err = (constant.gain.unwrap() - 1.7).abs();

    let doc: Value = serde_json::from_str(&std::fs::read_to_string(config("fixed_kernel_avg.json")).unwrap()).unwrap();
    let nu: Vec<f64> = serde_json::from_value(doc["kernel"]["params"]["nu"].clone()).unwrap();
    let table: Vec<Vec<f64>> = serde_json::from_value(doc["cost"]["table"].clone()).unwrap();
    let expected: f64 = table.iter().zip(&nu).map(|(row, p)| p * row.iter().cloned().fold(f64::INFINITY, f64::min)).sum();
    let model = shipped("fixed_kernel_avg.json");
    let fixed = solve(&model, 1e-8);
    let fixed_err = (fixed.gain.unwrap() - expected).abs();
    let mc = long_run_average_cost(&model, &fixed.policy, &fixed.pair.mu, 2000, 50, 0).unwrap();
    let mc_dev = (mc.mean - expected).abs() / mc.std_error;

    let congestion = shipped("congestion_avg.json");
    let solved = solve(&congestion, 1e-8);
    let rho = solved.gain.unwrap();
    let mc_c = long_run_average_cost(&congestion, &solved.policy, &solved.pair.mu, 2000, 50, 0).unwrap();
    let mc_c_dev = (mc_c.mean - rho).abs() / mc_c.std_error;

    report(
        "average-cost gain",
        constant_err <= 1e-10 && fixed_err <= 1e-8 && mc_dev <= 3.0 && mc_c_dev <= 3.0,
        format!(
            "constant cost |rho - c0| = {constant_err:.1e}; fixed kernel |rho - sum nu min c| = {fixed_err:.1e}, \
             Monte Carlo {:.4} vs {expected:.4} ({mc_dev:.2} s.e.); congestion Monte Carlo {:.4} vs {rho:.4} ({mc_c_dev:.2} s.e.)",
            mc.mean, mc_c.mean
        ),
    );
}

fn mix(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

#[test]
fn minimizer_perturbation_bound_holds() {
    let mut ok = true;
    let mut lines = Vec::new();
    for name in ["congestion.json", "congestion_avg.json"] {
        let model = shipped(name);
        let constants = estimate_constants(&model, 16, 0).unwrap();
        let lam = constants.lambda.as_deref();
        let n = model.n_states();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let tuples: Vec<PerturbationTuple> = (0..100)
            .map(|i| {
                let v = random_lipschitz(model.states(), constants.lip_bound, constants.value_bound, &mut rng);
                let v2 = random_lipschitz(model.states(), constants.lip_bound, constants.value_bound, &mut rng);
                let (nu, nu2) = (dirichlet(n, &mut rng), dirichlet(n, &mut rng));
                let (mu, mu2) = (dirichlet(n, &mut rng), dirichlet(n, &mut rng));
                // Half independent draws, half small convex perturbations.
                let t = if i % 2 == 0 { 1.0 } else { 10f64.powf(-4.0 * rng.random::<f64>()) };
                let x = rng.random_range(0..n);
                let y = if i % 4 == 1 { x } else { rng.random_range(0..n) };
                let nu_hat = StateMeasure::from_weights(&mix(nu.probs(), nu2.probs(), t)).unwrap();
                let mu_hat = StateMeasure::from_weights(&mix(mu.probs(), mu2.probs(), t)).unwrap();
                PerturbationTuple {
                    x,
                    q: q_from_value(&model, &v, &nu, lam).unwrap(),
                    mu,
                    y,
                    q_hat: q_from_value(&model, &mix(&v, &v2, t), &nu_hat, lam).unwrap(),
                    mu_hat,
                }
            })
            .collect();
        let r = check_perturbation_bound(&model, &tuples, &constants).unwrap();
        ok &= r.holds();
        lines.push(format!(
            "{name}: K_F/rho = {:.4}, {} violations, max lhs - rhs = {:.2e}",
            r.sensitivity,
            r.violations.len(),
            r.max_excess
        ));
    }
    report("minimizer perturbation bound", ok, lines.join("; "));
}

#[test]
fn finite_population_gap_shrinks_and_vanishes_without_coupling() {
    let model = shipped("congestion.json");
    let solved = solve(&model, 1e-8);
    let horizon = 80;
    let small = nagent_gap(&model, &solved.policy, &solved.pair.mu, 10, horizon, 200, 0).unwrap();
    let large = nagent_gap(&model, &solved.policy, &solved.pair.mu, 1000, horizon, 200, 0).unwrap();
    let trend = large.gap_estimate < small.gap_estimate;

    let decoupled = shipped("mu_independent.json");
    let d = solve(&decoupled, 1e-10);
    let frozen = solve_frozen_mdp(&decoupled, &d.pair.mu).unwrap();
    assert!(frozen.value.is_finite());
    let mut zero = true;
    let mut worst = 0.0_f64;
    for n_agents in [10, 100, 1000] {
        let run = nagent_gap(&decoupled, &d.policy, &d.pair.mu, n_agents, 300, 200, 0).unwrap();
        let dev = run.gap_estimate.abs() / run.std_error.max(f64::MIN_POSITIVE);
        worst = worst.max(dev);
        zero &= run.gap_estimate.abs() <= 3.0 * run.std_error;
    }
    report(
        "finite-population gap",
        trend && zero,
        format!(
            "congestion gap N=10 {:.2e} (s.e. {:.1e}), N=1000 {:.2e} (s.e. {:.1e}); decoupled model max |gap|/s.e. = {worst:.2}",
            small.gap_estimate, small.std_error, large.gap_estimate, large.std_error
        ),
    );
}

fn stripped_report(dir: &std::path::Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    mfe_core::cli::io::strip_wall_clock(&mut v);
    v
}

#[test]
fn repeated_runs_reproduce_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for name in ["congestion.json", "congestion_avg.json"] {
        let mut texts = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{name}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_mfe"))
                .args(["solve", "--config"])
                .arg(config(name))
                .arg("--out")
                .arg(&out)
                .args(["--seed", "5"])
                .status()
                .unwrap();
            assert_eq!(status.code(), Some(0));
            texts.push(serde_json::to_string(&stripped_report(&out)).unwrap());
        }
        let same = texts[0] == texts[1];
        ok &= same;
        lines.push(format!("{name}: identical = {same}"));
    }
    report("determinism", ok, lines.join("; "));
}
