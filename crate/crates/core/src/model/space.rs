//! Finite metric state grids and compact action sets.

use crate::error::{Error, Result};

const METRIC_TOL: f64 = 1e-12;

/// A finite metric space: labelled points with a pairwise distance matrix.
#[derive(Debug, Clone)]
pub struct StateSpace {
    coords: Vec<Vec<f64>>,
    dist: Vec<f64>,
    /// Index order along the line when the metric is the coordinate metric of
    /// one-dimensional points; enables the closed-form transport path.
    line_order: Option<Vec<usize>>,
}

impl StateSpace {
    /// Builds a space from coordinates with the Euclidean metric.
    pub fn from_coords(coords: Vec<Vec<f64>>) -> Result<Self> {
        let n = coords.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = euclidean(&coords[i], &coords[j]);
            }
        }
        Self::with_distances(coords, dist)
    }

    /// Builds a space from coordinates and an explicit row-major distance matrix.
    /// The metric axioms are checked on every pair and triple.
    pub fn with_distances(coords: Vec<Vec<f64>>, dist: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::Metric("state space must contain at least one point".into()));
        }
        if dist.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: dist.len() });
        }
        let dim = coords[0].len();
        if coords.iter().any(|c| c.len() != dim) {
            return Err(Error::Schema("state coordinates have inconsistent dimensions".into()));
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) || dist.iter().any(|v| !v.is_finite()) {
            return Err(Error::Metric("non-finite coordinate or distance".into()));
        }
        let scale = dist.iter().cloned().fold(0.0_f64, f64::max).max(1.0);
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::Metric(format!("d({i},{i}) = {} is not zero", dist[i * n + i])));
            }
            for j in 0..n {
                let dij = dist[i * n + j];
                if dij < 0.0 {
                    return Err(Error::Metric(format!("d({i},{j}) = {dij} is negative")));
                }
                if (dij - dist[j * n + i]).abs() > METRIC_TOL * scale {
                    return Err(Error::Metric(format!("distance matrix is not symmetric at ({i},{j})")));
                }
                if i != j && dij == 0.0 {
                    return Err(Error::Metric(format!("distinct states {i} and {j} are at distance zero")));
                }
            }
        }
        for i in 0..n {
            for k in 0..n {
                let dik = dist[i * n + k];
                for j in 0..n {
                    if dist[i * n + j] > dik + dist[k * n + j] + METRIC_TOL * scale {
                        return Err(Error::Metric(format!(
                            "triangle inequality violated: d({i},{j}) > d({i},{k}) + d({k},{j})"
                        )));
                    }
                }
            }
        }
        let line_order = detect_line(&coords, &dist);
        Ok(Self { coords, dist, line_order })
    }

    /// Evenly spaced points on `[lo, hi]` with the coordinate metric.
    pub fn uniform_line(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("a line grid needs at least one point".into()));
        }
        let coords = (0..n)
            .map(|i| {
                let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                vec![lo + t * (hi - lo)]
            })
            .collect();
        Self::from_coords(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.coords.len() + j]
    }

    pub fn dist_matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn line_order(&self) -> Option<&[usize]> {
        self.line_order.as_deref()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Same points with the line structure hidden, forcing general transport solves.
    pub fn without_line_structure(&self) -> Self {
        Self { line_order: None, ..self.clone() }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn detect_line(coords: &[Vec<f64>], dist: &[f64]) -> Option<Vec<usize>> {
    let n = coords.len();
    if coords[0].len() != 1 {
        return None;
    }
    for i in 0..n {
        for j in 0..n {
            let d = (coords[i][0] - coords[j][0]).abs();
            if (dist[i * n + j] - d).abs() > METRIC_TOL * d.max(1.0) {
                return None;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| coords[a][0].total_cmp(&coords[b][0]));
    Some(order)
}

/// Shape of the action set.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionMode {
    /// Finite list of action vectors.
    Grid,
    /// Compact box `[lower, upper]`; the lattice is an internal tabulation.
    Box,
}

/// Compact action set together with the finite lattice on which Q-functions are tabulated.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    mode: ActionMode,
    lower: Vec<f64>,
    upper: Vec<f64>,
    lattice: Vec<Vec<f64>>,
}

impl ActionSpace {
    /// Finite action list. `bounds`, when given, must contain every action.
    pub fn grid(values: Vec<Vec<f64>>, bounds: Option<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Schema("grid action set needs at least one action".into()));
        }
        let dim = values[0].len();
        if dim == 0 || values.iter().any(|a| a.len() != dim) {
            return Err(Error::Schema("action vectors must share a positive dimension".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite action value".into()));
        }
        let (lower, upper) = match bounds {
            Some((lo, hi)) => {
                check_box(&lo, &hi, dim)?;
                for (k, a) in values.iter().enumerate() {
                    if a.iter().enumerate().any(|(c, v)| *v < lo[c] || *v > hi[c]) {
                        return Err(Error::Schema(format!("grid action {k} lies outside the declared bounds")));
                    }
                }
                (lo, hi)
            }
            None => {
                let lo = (0..dim)
                    .map(|c| values.iter().map(|a| a[c]).fold(f64::INFINITY, f64::min))
                    .collect();
                let hi = (0..dim)
                    .map(|c| values.iter().map(|a| a[c]).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
                (lo, hi)
            }
        };
        Ok(Self { mode: ActionMode::Grid, lower, upper, lattice: values })
    }

    /// Box `[lower, upper]` tabulated on a tensor lattice with `resolution` points per coordinate.
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>, resolution: usize) -> Result<Self> {
        let dim = lower.len();
        check_box(&lower, &upper, dim)?;
        if resolution == 0 {
            return Err(Error::Schema("box lattice resolution must be positive".into()));
        }
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|c| {
                if resolution == 1 || lower[c] == upper[c] {
                    vec![0.5 * (lower[c] + upper[c])]
                } else {
                    (0..resolution)
                        .map(|i| {
                            let t = i as f64 / (resolution - 1) as f64;
                            lower[c] + t * (upper[c] - lower[c])
                        })
                        .collect()
                }
            })
            .collect();
        let mut lattice = vec![Vec::with_capacity(dim)];
        for axis in &axes {
            lattice = lattice
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        Ok(Self { mode: ActionMode::Box, lower, upper, lattice })
    }

    pub fn mode(&self) -> &ActionMode {
        &self.mode
    }

    pub fn is_box(&self) -> bool {
        self.mode == ActionMode::Box
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Grid actions, or the internal lattice in box mode.
    pub fn lattice(&self) -> &[Vec<f64>] {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Index of an exact lattice member.
    pub fn index_of(&self, a: &[f64]) -> Option<usize> {
        self.lattice.iter().position(|l| l.as_slice() == a)
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        match self.mode {
            ActionMode::Grid => self.index_of(a).is_some(),
            ActionMode::Box => {
                a.len() == self.dim()
                    && a.iter().enumerate().all(|(c, v)| *v >= self.lower[c] && *v <= self.upper[c])
            }
        }
    }

    /// Coordinatewise clamp into the bounding box.
    pub fn project(&self, a: &mut [f64]) {
        for (c, v) in a.iter_mut().enumerate() {
            *v = v.clamp(self.lower[c], self.upper[c]);
        }
    }
}

fn check_box(lo: &[f64], hi: &[f64], dim: usize) -> Result<()> {
    if lo.len() != dim || hi.len() != dim || dim == 0 {
        return Err(Error::Schema("action bounds must match the action dimension".into()));
    }
    for c in 0..dim {
        if !(lo[c].is_finite() && hi[c].is_finite()) || lo[c] > hi[c] {
            return Err(Error::Schema(format!("action bounds invalid in coordinate {c}: lower > upper")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_violation_is_rejected() {
        let coords = vec![vec![0.0], vec![1.0], vec![2.0]];
        let dist = vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0];
        assert!(matches!(StateSpace::with_distances(coords, dist), Err(Error::Metric(_))));
    }

    #[test]
    fn line_detected_for_unsorted_points() {
        let s = StateSpace::from_coords(vec![vec![0.3], vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(s.line_order(), Some(&[1usize, 0, 2][..]));
        let plane = StateSpace::from_coords(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(plane.line_order().is_none());
    }

    #[test]
    fn box_lattice_is_tensor_product() {
        let a = ActionSpace::boxed(vec![-1.0, 0.0], vec![1.0, 2.0], 3).unwrap();
        assert_eq!(a.len(), 9);
        assert_eq!(a.lattice()[0], vec![-1.0, 0.0]);
        assert_eq!(a.lattice()[8], vec![1.0, 2.0]);
        assert!(ActionSpace::boxed(vec![1.0], vec![0.0], 3).is_err());
    }

    #[test]
    fn grid_outside_bounds_rejected() {
        let r = ActionSpace::grid(vec![vec![2.0]], Some((vec![-1.0], vec![1.0])));
        assert!(r.is_err());
    }
}
