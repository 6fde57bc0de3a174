//! The detailed-balance action `S[w]` and its diagnostics.
//!
//! For every pair `x < y` with `a = W(x,y) w(y)` and `b = W(y,x) w(x)`, pairs
//! with `a + b > 0` contribute `((a - b) / (a + b))^2`; the sum is divided by
//! the number `K` of contributing pairs. Diagonal entries never enter.

use crate::error::{Error, Result};
use crate::grid::{check_len, Distribution, TransitionMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionValue {
    pub s: f64,
    /// Number of contributing pairs `K`.
    pub k_terms: usize,
}

impl ActionValue {
    /// `K = 0`: no pair carries weight, `s` is reported as 0.
    pub fn is_degenerate(&self) -> bool {
        self.k_terms == 0
    }

    pub fn ln(&self) -> f64 {
        self.s.ln()
    }

    pub fn log10(&self) -> f64 {
        self.s.log10()
    }

    fn from_sum(sum: f64, k_terms: usize) -> Self {
        let s = if k_terms == 0 { 0.0 } else { sum / k_terms as f64 };
        Self { s, k_terms }
    }
}

#[inline]
fn pair_term(w: &TransitionMatrix, weights: &[f64], x: usize, y: usize) -> Option<f64> {
    let a = w.get(x, y) * weights[y];
    let b = w.get(y, x) * weights[x];
    let total = a + b;
    (total > 0.0).then(|| (a - b) / total)
}

fn check_dims(w: &TransitionMatrix, dist: &Distribution) -> Result<()> {
    check_len(w.size(), dist.len())
}

pub fn action(w: &TransitionMatrix, dist: &Distribution) -> Result<ActionValue> {
    check_dims(w, dist)?;
    let n = w.size();
    let weights = dist.weights();
    let mut sum = 0.0;
    let mut k = 0;
    for x in 0..n {
        for y in x + 1..n {
            if let Some(r) = pair_term(w, weights, x, y) {
                sum += r * r;
                k += 1;
            }
        }
    }
    Ok(ActionValue::from_sum(sum, k))
}

/// Antisymmetric `N x N` matrix of `(a - b) / (a + b)`, zero where `a + b = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceResiduals {
    n: usize,
    entries: Vec<f64>,
    contributing: usize,
}

impl BalanceResiduals {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.entries[x * self.n..(x + 1) * self.n]
    }

    pub fn contributing_pairs(&self) -> usize {
        self.contributing
    }

    pub fn is_degenerate(&self) -> bool {
        self.contributing == 0
    }
}

pub fn balance_residuals(w: &TransitionMatrix, dist: &Distribution) -> Result<BalanceResiduals> {
    check_dims(w, dist)?;
    let n = w.size();
    let mut entries = vec![0.0; n * n];
    let mut contributing = 0;
    for x in 0..n {
        for y in x + 1..n {
            if let Some(r) = pair_term(w, dist.weights(), x, y) {
                entries[x * n + y] = r;
                entries[y * n + x] = -r;
                contributing += 1;
            }
        }
    }
    Ok(BalanceResiduals {
        n,
        entries,
        contributing,
    })
}

/// `max_y |w_hat(y) - sum_x W_hat(y, x) w_hat(x)|`.
pub fn fixed_point_residual(w_hat: &TransitionMatrix, dist: &Distribution) -> Result<f64> {
    check_dims(w_hat, dist)?;
    let weights = dist.weights();
    Ok((0..w_hat.size())
        .map(|y| {
            let image: f64 = w_hat.row(y).iter().zip(weights).map(|(m, v)| m * v).sum();
            (weights[y] - image).abs()
        })
        .fold(0.0, f64::max))
}

#[inline]
fn mix(bits: u64, index: usize) -> u64 {
    // splitmix64 finalizer keyed by position
    let mut z = bits ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive sum of mixed weight bits; a single-component edit updates
/// it in O(1).
fn checksum(weights: &[f64]) -> u64 {
    weights
        .iter()
        .enumerate()
        .fold(0u64, |h, (i, w)| h.wrapping_add(mix(w.to_bits(), i)))
}

/// Per-pair terms of `S` for one configuration, allowing `O(N)` evaluation of
/// single-component edits.
///
/// The cache is bound to the configuration it was built from by a checksum of
/// the weights; using it with any other configuration fails with
/// [`Error::StaleCache`].
#[derive(Debug, Clone)]
pub struct ActionCache {
    n: usize,
    /// `(a - b) / (a + b)` for pair `(min, max)` at `min * n + max`, or `None`.
    ratios: Vec<Option<f64>>,
    sum: f64,
    k_terms: usize,
    checksum: u64,
    pending: Option<Pending>,
    scratch: Vec<(usize, Option<f64>)>,
}

#[derive(Debug, Clone)]
struct Pending {
    bin: usize,
    new_weight: f64,
    delta_sum: f64,
    k_terms: usize,
    checksum: u64,
}

/// Outcome of evaluating a single-component edit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub value: ActionValue,
    /// `S_new - S_old`, computed from the changed terms only when `K` is unchanged.
    pub delta: f64,
}

impl ActionCache {
    pub fn new(w: &TransitionMatrix, dist: &Distribution) -> Result<Self> {
        check_dims(w, dist)?;
        let n = w.size();
        let mut cache = Self {
            n,
            ratios: vec![None; n * n],
            sum: 0.0,
            k_terms: 0,
            checksum: 0,
            pending: None,
            scratch: Vec::with_capacity(n),
        };
        cache.rebuild(w, dist);
        Ok(cache)
    }

    /// Recomputes every pair term from scratch.
    pub fn rebuild(&mut self, w: &TransitionMatrix, dist: &Distribution) {
        let n = self.n;
        let weights = dist.weights();
        self.sum = 0.0;
        self.k_terms = 0;
        for x in 0..n {
            for y in x + 1..n {
                let r = pair_term(w, weights, x, y);
                if let Some(r) = r {
                    self.sum += r * r;
                    self.k_terms += 1;
                }
                self.ratios[x * n + y] = r;
            }
        }
        self.checksum = checksum(weights);
        self.pending = None;
    }

    /// Re-binds the cache after `dist` was rescaled. Pair ratios are scale
    /// invariant and kept; the running sum is re-accumulated from them.
    pub fn rescaled(&mut self, dist: &Distribution) -> Result<()> {
        check_len(self.n, dist.len())?;
        let n = self.n;
        self.sum = 0.0;
        self.k_terms = 0;
        for x in 0..n {
            for r in self.ratios[x * n + x + 1..(x + 1) * n].iter().flatten() {
                self.sum += r * r;
                self.k_terms += 1;
            }
        }
        self.checksum = checksum(dist.weights());
        self.pending = None;
        Ok(())
    }

    pub fn value(&self) -> ActionValue {
        ActionValue::from_sum(self.sum, self.k_terms)
    }

    pub fn matches(&self, dist: &Distribution) -> bool {
        dist.len() == self.n && checksum(dist.weights()) == self.checksum
    }

    /// Evaluates `S` with `w(bin)` replaced by `new_weight`, touching only the
    /// `N - 1` pairs that involve `bin`. The edit is remembered so that
    /// [`ActionCache::commit`] can apply it without recomputation.
    pub fn propose(
        &mut self,
        w: &TransitionMatrix,
        dist: &Distribution,
        bin: usize,
        new_weight: f64,
    ) -> Result<Proposal> {
        check_dims(w, dist)?;
        if !self.matches(dist) {
            return Err(Error::StaleCache);
        }
        self.propose_trusted(w, dist, bin, new_weight)
    }

    /// [`ActionCache::propose`] without the staleness check, for owners that
    /// keep cache and configuration in lockstep.
    pub(crate) fn propose_trusted(
        &mut self,
        w: &TransitionMatrix,
        dist: &Distribution,
        bin: usize,
        new_weight: f64,
    ) -> Result<Proposal> {
        if bin >= self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: bin + 1,
            });
        }
        if !(new_weight.is_finite() && new_weight >= 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {new_weight} is not finite and nonnegative")));
        }
        let n = self.n;
        let weights = dist.weights();
        self.pending = None;
        let ratios = &mut self.scratch;
        ratios.clear();
        let mut delta_sum = 0.0;
        let mut k_terms = self.k_terms;
        for other in (0..n).filter(|&o| o != bin) {
            let (lo, hi) = if bin < other { (bin, other) } else { (other, bin) };
            let (w_lo, w_hi) = if bin < other {
                (new_weight, weights[hi])
            } else {
                (weights[lo], new_weight)
            };
            let a = w.get(lo, hi) * w_hi;
            let b = w.get(hi, lo) * w_lo;
            let total = a + b;
            let new = (total > 0.0).then(|| (a - b) / total);
            let idx = lo * n + hi;
            let old = self.ratios[idx];
            if let Some(r) = old {
                delta_sum -= r * r;
                k_terms -= 1;
            }
            if let Some(r) = new {
                delta_sum += r * r;
                k_terms += 1;
            }
            ratios.push((idx, new));
        }
        let value = ActionValue::from_sum(self.sum + delta_sum, k_terms);
        let delta = if k_terms == self.k_terms {
            if k_terms == 0 {
                0.0
            } else {
                delta_sum / k_terms as f64
            }
        } else {
            value.s - self.value().s
        };
        let checksum = self
            .checksum
            .wrapping_sub(mix(weights[bin].to_bits(), bin))
            .wrapping_add(mix(new_weight.to_bits(), bin));
        self.pending = Some(Pending {
            bin,
            new_weight,
            delta_sum,
            k_terms,
            checksum,
        });
        Ok(Proposal { value, delta })
    }

    /// Applies the last proposal to both the cache and `dist`.
    pub fn commit(&mut self, dist: &mut Distribution) -> Result<()> {
        if !self.matches(dist) {
            return Err(Error::StaleCache);
        }
        self.commit_trusted(dist)
    }

    pub(crate) fn commit_trusted(&mut self, dist: &mut Distribution) -> Result<()> {
        let pending = self.pending.take().ok_or(Error::StaleCache)?;
        for &(idx, r) in &self.scratch {
            self.ratios[idx] = r;
        }
        self.sum += pending.delta_sum;
        self.k_terms = pending.k_terms;
        self.checksum = pending.checksum;
        dist.weights_mut()[pending.bin] = pending.new_weight;
        Ok(())
    }
}

/// `S` after replacing `w(bin)` by `new_weight`, from the cached pair terms.
pub fn action_delta(
    w: &TransitionMatrix,
    dist: &Distribution,
    bin: usize,
    new_weight: f64,
    cache: &mut ActionCache,
) -> Result<ActionValue> {
    cache.propose(w, dist, bin, new_weight).map(|p| p.value)
}
