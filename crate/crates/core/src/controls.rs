//! Calibration oracles for the action: an exactly balanced Metropolis matrix,
//! a uniform random matrix, and a Metropolis chain over bin centers.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{BinGrid, Distribution, MatrixKind, TransitionMatrix};
use crate::series::ReturnsSeries;

/// `W(x, y) = min(base(x) / base(y), 1)`, which satisfies
/// `W(x, y) base(y) = W(y, x) base(x)` for every pair.
pub fn metropolis_transition(base: &Distribution) -> Result<TransitionMatrix> {
    if let Some(k) = base.weights().iter().position(|&v| v <= 0.0) {
        return Err(Error::ZeroBaseWeight(k));
    }
    let w = base.weights();
    let n = w.len();
    let entries = (0..n)
        .flat_map(|x| (0..n).map(move |y| (w[x] / w[y]).min(1.0)))
        .collect();
    TransitionMatrix::from_entries(n, entries, MatrixKind::Density)
}

/// Independent `U(0, 1)` entries, diagonal included.
pub fn uniform_random_transition<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<TransitionMatrix> {
    if n < 2 {
        return Err(Error::InvalidMatrix(format!("need at least 2 bins, got {n}")));
    }
    let entries = (0..n * n)
        .map(|_| loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                break u;
            }
        })
        .collect();
    TransitionMatrix::from_entries(n, entries, MatrixKind::Density)
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Metropolis chain over bins with uniform proposals and acceptance
/// `min(base(x) / base(y), 1)`. The first state is drawn from `base`, so the
/// chain is stationary from the start. Emits the bin center at every step.
pub fn simulate_chain<R: Rng + ?Sized>(
    base: &Distribution,
    grid: &BinGrid,
    length: usize,
    rng: &mut R,
) -> Result<ReturnsSeries> {
    if base.len() != grid.bins() {
        return Err(Error::DimensionMismatch {
            expected: grid.bins(),
            got: base.len(),
        });
    }
    if !base.is_strictly_positive() {
        let k = base.weights().iter().position(|&v| v <= 0.0).unwrap_or(0);
        return Err(Error::ZeroBaseWeight(k));
    }
    if length < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: length });
    }
    let w = base.weights();
    let centers = grid.centers();
    let mut current = sample_index(w, rng);
    let mut values = Vec::with_capacity(length);
    for _ in 0..length {
        values.push(centers[current]);
        let proposal = rng.gen_range(0..w.len());
        let ratio = w[proposal] / w[current];
        if ratio >= 1.0 || rng.gen::<f64>() < ratio {
            current = proposal;
        }
    }
    ReturnsSeries::new(values)
}

/// Named base distributions on a grid.
pub mod fixtures {
    use super::*;

    pub const NAMES: [&str; 3] = ["uniform", "two_point", "fat_tail"];

    /// Discretized `exp(-(|r| / scale)^shape)` with scale 0.001 and shape 0.5:
    /// a sharp central peak with slowly decaying tails.
    pub fn fat_tail(grid: &BinGrid) -> Distribution {
        let weights = grid
            .centers()
            .into_iter()
            .map(|c| (-(c.abs() / 1e-3).sqrt()).exp())
            .collect();
        Distribution::normalized(weights).expect("positive weights")
    }

    /// A small floor everywhere with two unequal spikes, one on each side of
    /// the center.
    pub fn two_point(grid: &BinGrid) -> Distribution {
        let n = grid.bins();
        let mut weights = vec![0.01; n];
        weights[n / 5] += 0.5;
        weights[(3 * n) / 4] += 0.25;
        Distribution::normalized(weights).expect("positive weights")
    }

    pub fn by_name(name: &str, grid: &BinGrid) -> Result<Distribution> {
        match name {
            "uniform" => Ok(Distribution::uniform(grid.bins())),
            "two_point" => Ok(two_point(grid)),
            "fat_tail" => Ok(fat_tail(grid)),
            _ => Err(Error::UnknownFixture {
                name: name.to_string(),
                available: NAMES.to_vec(),
            }),
        }
    }
}
