//! Return binning and empirical transition counts.
//!
//! Bins are half-open `[lo, hi)` with the global upper edge exclusive, so a
//! return equal to `upper` is dropped. Bin indices are zero-based in code;
//! bin `k` covers `[lower + k dr, lower + (k+1) dr)`.
//!
//! Matrices use `W(x, y)` with `x` the destination (successor) bin and `y` the
//! source (current) bin, so columns are indexed by the source and column
//! normalization makes every nonempty column sum to one.

use crate::error::{Error, Result};
use crate::series::ReturnsSeries;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    lower: f64,
    upper: f64,
    bins: usize,
}

impl Default for BinGrid {
    /// 25 bins over `[-0.02, 0.02)`, bin width 0.0016.
    fn default() -> Self {
        Self {
            lower: -0.02,
            upper: 0.02,
            bins: 25,
        }
    }
}

impl BinGrid {
    pub fn new(lower: f64, upper: f64, bins: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return Err(Error::InvalidGrid(format!("need lower < upper, got [{lower}, {upper})")));
        }
        if bins < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 bins, got {bins}")));
        }
        Ok(Self { lower, upper, bins })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower) / self.bins as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lower + (k as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|k| self.center(k)).collect()
    }

    /// Zero-based bin of `r`, or `None` outside `[lower, upper)`.
    pub fn bin_index(&self, r: f64) -> Option<usize> {
        if !(r >= self.lower && r < self.upper) {
            return None;
        }
        let k = ((r - self.lower) / self.width()).floor() as usize;
        // r just below upper can round up to `bins`
        Some(k.min(self.bins - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Counts,
    Density,
}

impl MatrixKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MatrixKind::Counts => "counts",
            MatrixKind::Density => "density",
        }
    }
}

/// Square nonnegative matrix `W(x, y)`, destination `x`, source `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<f64>,
    kind: MatrixKind,
}

impl TransitionMatrix {
    pub fn zeros(n: usize, kind: MatrixKind) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
            kind,
        }
    }

    /// Builds from rows indexed by destination `x`.
    pub fn from_rows(rows: Vec<Vec<f64>>, kind: MatrixKind) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            entries.extend(row);
        }
        Self::from_entries(n, entries, kind)
    }

    /// Row-major entries, `entries[x * n + y] = W(x, y)`.
    pub fn from_entries(n: usize, entries: Vec<f64>, kind: MatrixKind) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        if let Some(v) = entries.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidMatrix(format!("entry {v} is not finite and nonnegative")));
        }
        Ok(Self { n, entries, kind })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[x * self.n + y]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.entries[x * self.n..(x + 1) * self.n]
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    fn add(&mut self, x: usize, y: usize, v: f64) {
        self.entries[x * self.n + y] += v;
    }
}

/// Nonnegative weights over bins. Not necessarily normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(v) = weights.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("weight {v} is not finite and nonnegative")));
        }
        Ok(Self { weights })
    }

    /// Scales the weights to sum one. Fails on an all-zero vector.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let mut d = Self::new(weights)?;
        d.normalize()?;
        Ok(d)
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= 1e-12
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total = self.sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("cannot normalize a zero vector".into()));
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        Ok(())
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }
}

#[derive(Debug, Clone)]
pub struct Transitions {
    pub counts: TransitionMatrix,
    /// Pairs with at least one member outside the grid.
    pub dropped_pairs: usize,
}

/// Counts each consecutive pair `(r(i), r(i+1))` into `W(x, y)` with
/// `y = bin(r(i))` and `x = bin(r(i+1))`.
pub fn build_transitions(returns: &ReturnsSeries, grid: &BinGrid) -> Result<Transitions> {
    if returns.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: returns.len(),
        });
    }
    let mut counts = TransitionMatrix::zeros(grid.bins(), MatrixKind::Counts);
    let mut dropped_pairs = 0;
    for pair in returns.values().windows(2) {
        match (grid.bin_index(pair[0]), grid.bin_index(pair[1])) {
            (Some(y), Some(x)) => counts.add(x, y, 1.0),
            _ => dropped_pairs += 1,
        }
    }
    Ok(Transitions {
        counts,
        dropped_pairs,
    })
}

#[derive(Debug, Clone)]
pub struct ColumnNormalized {
    pub matrix: TransitionMatrix,
    /// `C(y) = sum_x W(x, y)`.
    pub column_sums: Vec<f64>,
    /// Source bins with `C(y) = 0`; their columns are left all zero.
    pub empty_columns: Vec<usize>,
}

impl ColumnNormalized {
    /// Maps a distribution for the raw matrix onto the normalized one,
    /// `w_hat(y) = C(y) w(y)`.
    pub fn scale_distribution(&self, w: &Distribution) -> Result<Distribution> {
        check_len(self.column_sums.len(), w.len())?;
        Distribution::new(
            self.column_sums
                .iter()
                .zip(w.weights())
                .map(|(c, w)| c * w)
                .collect(),
        )
    }
}

pub fn column_normalize(w: &TransitionMatrix) -> ColumnNormalized {
    let n = w.size();
    let column_sums: Vec<f64> = (0..n).map(|y| (0..n).map(|x| w.get(x, y)).sum()).collect();
    let mut matrix = TransitionMatrix::zeros(n, MatrixKind::Density);
    let mut empty_columns = Vec::new();
    for (y, &c) in column_sums.iter().enumerate() {
        if c > 0.0 {
            for x in 0..n {
                matrix.entries[x * n + y] = w.get(x, y) / c;
            }
        } else {
            empty_columns.push(y);
        }
    }
    ColumnNormalized {
        matrix,
        column_sums,
        empty_columns,
    }
}

/// Normalized histogram of the in-range returns.
pub fn marginal_histogram(returns: &ReturnsSeries, grid: &BinGrid) -> Result<Distribution> {
    let mut counts = vec![0.0; grid.bins()];
    let mut total = 0usize;
    for &r in returns.values() {
        if let Some(k) = grid.bin_index(r) {
            counts[k] += 1.0;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoInRangeEvents);
    }
    counts.iter_mut().for_each(|c| *c /= total as f64);
    Ok(Distribution::from_raw(counts))
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
