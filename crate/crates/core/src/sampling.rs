//! Seeded random streams and samplers for probe measures and Q-functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::measure_ot::StateMeasure;
use crate::model::StateSpace;

/// Independent generator for one component of a run: the run seed selects the
/// key, the component label selects the stream.
pub fn stream_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

/// Sub-stream `index` of a labelled stream.
pub fn indexed_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Draw from Dirichlet(1, ..., 1), i.e. uniform on the simplex.
pub fn dirichlet<R: Rng>(n: usize, rng: &mut R) -> StateMeasure {
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let mut probs: Vec<f64> = draws.iter().map(|d| d / total).collect();
    // Push the rounding defect onto the largest entry.
    let defect = 1.0 - probs.iter().sum::<f64>();
    let k = (0..n).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap_or(0);
    probs[k] += defect;
    StateMeasure::from_raw(probs)
}

/// Random nonnegative function with Lipschitz constant at most `lip` and values in `[0, bound]`.
pub fn random_lipschitz<R: Rng>(space: &StateSpace, lip: f64, bound: f64, rng: &mut R) -> Vec<f64> {
    let n = space.len();
    if !lip.is_finite() {
        return (0..n).map(|_| rng.random::<f64>() * bound).collect();
    }
    let anchors: Vec<(usize, f64)> = (0..3).map(|_| (rng.random_range(0..n), rng.random::<f64>() * bound)).collect();
    (0..n)
        .map(|x| {
            anchors
                .iter()
                .map(|&(z, c)| c + lip * space.dist(x, z))
                .fold(f64::INFINITY, f64::min)
                .min(bound)
        })
        .collect()
}
