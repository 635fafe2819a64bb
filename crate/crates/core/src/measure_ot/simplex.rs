//! Transportation simplex (MODI potentials on a spanning-tree basis).
//!
//! Solves `min Σ c_ij x_ij` subject to row sums = `supply`, column sums =
//! `demand`, `x >= 0`. Zero-mass rows and columns stay in the problem.

use std::collections::VecDeque;

pub(crate) struct TransportSolution {
    pub cost: f64,
    /// Row-major `m × n` plan.
    pub plan: Vec<f64>,
    /// Row potentials; `u_i + v_j <= c_ij` with equality on the basis.
    #[cfg_attr(not(test), allow(dead_code))]
    pub u: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub v: Vec<f64>,
}

struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Basis {
    /// Adjacency over the bipartite node set: rows `0..m`, columns `m..m+n`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (e, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, e));
            adj[self.m + j].push((i, e));
        }
        adj
    }
}

pub(crate) fn transportation_simplex(supply: &[f64], demand: &[f64], cost: &[f64]) -> TransportSolution {
    let m = supply.len();
    let n = demand.len();
    debug_assert_eq!(cost.len(), m * n);
    let mut basis = northwest_corner(supply, demand);

    let scale = cost.iter().fold(0.0_f64, |acc, c| acc.max(c.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    // Bland's rule after this many pivots guarantees termination under degeneracy.
    let bland_after = 20 * (m + n) * (m + n) + 1000;
    let hard_cap = bland_after + 200 * (m + n) * (m + n) + 10_000;

    let mut in_basis = vec![false; m * n];
    for &(i, j) in &basis.cells {
        in_basis[i * n + j] = true;
    }

    let mut pivots = 0usize;
    let (mut u, mut v);
    loop {
        let adj = basis.adjacency();
        (u, v) = potentials(&adj, cost, m, n);
        let bland = pivots >= bland_after;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -tol;
        'scan: for i in 0..m {
            for j in 0..n {
                if in_basis[i * n + j] {
                    continue;
                }
                let rc = cost[i * n + j] - u[i] - v[j];
                if rc < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = rc;
                }
            }
        }
        let Some((ei, ej)) = entering else { break };
        if pivots >= hard_cap {
            break;
        }
        pivots += 1;

        // Tree path from row ei to column ej; with the entering cell it closes the cycle.
        let path = tree_path(&adj, ei, m + ej, m + n);
        // Edges along the path from ei: odd positions (1-based) lose flow.
        let mut theta = f64::INFINITY;
        let mut leave_pos = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let f = basis.flow[e];
                let better = f < theta
                    || (f == theta && leave_pos != usize::MAX && cell_index(basis.cells[e], n) < cell_index(basis.cells[path[leave_pos]], n));
                if better {
                    theta = f;
                    leave_pos = pos;
                }
            }
        }
        let theta = theta.max(0.0);
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[e] = (basis.flow[e] - theta).max(0.0);
            } else {
                basis.flow[e] += theta;
            }
        }
        let leaving = path[leave_pos];
        let (li, lj) = basis.cells[leaving];
        in_basis[li * n + lj] = false;
        in_basis[ei * n + ej] = true;
        basis.cells[leaving] = (ei, ej);
        basis.flow[leaving] = theta;
    }

    let mut plan = vec![0.0; m * n];
    for (e, &(i, j)) in basis.cells.iter().enumerate() {
        plan[i * n + j] += basis.flow[e];
    }
    let total = plan.iter().zip(cost).map(|(x, c)| x * c).sum();
    TransportSolution { cost: total, plan, u, v }
}

fn cell_index((i, j): (usize, usize), n: usize) -> usize {
    i * n + j
}

fn northwest_corner(supply: &[f64], demand: &[f64]) -> Basis {
    let m = supply.len();
    let n = demand.len();
    let mut rs: Vec<f64> = supply.to_vec();
    let mut cd: Vec<f64> = demand.to_vec();
    let mut cells = Vec::with_capacity(m + n - 1);
    let mut flow = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let f = rs[i].min(cd[j]).max(0.0);
        cells.push((i, j));
        flow.push(f);
        rs[i] -= f;
        cd[j] -= f;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || rs[i] <= cd[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    Basis { m, n, cells, flow }
}

fn potentials(adj: &[Vec<(usize, usize)>], cost: &[f64], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut pot = vec![f64::NAN; m + n];
    let mut queue = VecDeque::new();
    pot[0] = 0.0;
    queue.push_back(0);
    while let Some(node) = queue.pop_front() {
        for &(next, _) in &adj[node] {
            if pot[next].is_nan() {
                let (i, j) = if node < m { (node, next - m) } else { (next, node - m) };
                let c = cost[i * n + j];
                pot[next] = c - pot[node];
                queue.push_back(next);
            }
        }
    }
    let v = pot.split_off(m);
    (pot, v)
}

/// Edge indices on the unique tree path from `from` to `to`, ordered from `from`.
fn tree_path(adj: &[Vec<(usize, usize)>], from: usize, to: usize, nodes: usize) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut seen = vec![false; nodes];
    let mut queue = VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(next, e) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, e));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let (prev, e) = parent[node].expect("basis must be a spanning tree");
        path.push(e);
        node = prev;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_2x2(s: &[f64], d: &[f64], c: &[f64]) -> f64 {
        // x00 = t, x01 = s0 - t, x10 = d0 - t, x11 = s1 - d0 + t; feasible t is an interval.
        let lo = 0.0_f64.max(d[0] - s[1]);
        let hi = s[0].min(d[0]);
        [lo, hi]
            .iter()
            .map(|&t| c[0] * t + c[1] * (s[0] - t) + c[2] * (d[0] - t) + c[3] * (s[1] - d[0] + t))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_enumeration_on_two_by_two() {
        let cases = [
            ([0.5, 0.5], [1.0, 0.0], [0.0, 1.0, 1.0, 0.0]),
            ([0.2, 0.8], [0.6, 0.4], [1.0, 3.0, 2.0, 0.5]),
            ([0.0, 1.0], [0.3, 0.7], [0.0, 2.0, 4.0, 1.0]),
        ];
        for (s, d, c) in cases {
            let sol = transportation_simplex(&s, &d, &c);
            assert!((sol.cost - brute_force_2x2(&s, &d, &c)).abs() < 1e-12);
        }
    }

    #[test]
    fn plan_has_requested_marginals_and_complementary_duals() {
        let s = [0.1, 0.0, 0.4, 0.5];
        let d = [0.25, 0.25, 0.0, 0.5];
        let c: Vec<f64> = (0..16).map(|k| ((k * 7 % 5) as f64) + 0.5).collect();
        let sol = transportation_simplex(&s, &d, &c);
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| sol.plan[i * 4 + j]).sum();
            let col: f64 = (0..4).map(|j| sol.plan[j * 4 + i]).sum();
            assert!((row - s[i]).abs() < 1e-12);
            assert!((col - d[i]).abs() < 1e-12);
        }
        let dual: f64 = s.iter().zip(&sol.u).map(|(a, b)| a * b).sum::<f64>()
            + d.iter().zip(&sol.v).map(|(a, b)| a * b).sum::<f64>();
        assert!((dual - sol.cost).abs() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                assert!(sol.u[i] + sol.v[j] <= c[i * 4 + j] + 1e-12);
            }
        }
    }
}
