//! Multi-start simulated annealing of `S[w]` over the probability simplex.
//!
//! Each chain starts from normalized uniform random weights and walks through
//! the exponential schedule `beta(j) = beta_1 exp(b j)`, `j = 0..=n`. At every
//! temperature it performs a fixed number of sweeps; a sweep visits the bins in
//! order, proposes `w'(x) = w(x) (1 + t eps)` with `t ~ U[-1, 1]` and accepts
//! by the Metropolis rule on `dS`. Because `S` is invariant under rescaling of
//! `w`, the configuration is renormalized once at the end of each sweep rather
//! than after every component; acceptance decisions are unchanged.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`). Chain `k` of a run with
//! master seed `s` uses `ChaCha8Rng::seed_from_u64(s)` switched to stream `k`,
//! so results do not depend on how chains are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::{action, ActionCache, ActionValue};
use crate::error::{Error, Result};
use crate::grid::{Distribution, TransitionMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    beta_start: f64,
    beta_end: f64,
    steps: usize,
    rate: f64,
}

impl AnnealSchedule {
    pub fn beta_start(&self) -> f64 {
        self.beta_start
    }

    pub fn beta_end(&self) -> f64 {
        self.beta_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `b = ln(beta_end / beta_start) / n`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn beta(&self, j: usize) -> f64 {
        self.beta_start * (self.rate * j as f64).exp()
    }

    /// `beta(0), ..., beta(n)`.
    pub fn betas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|j| self.beta(j))
    }

    /// 800 steps from 1e-2 to 1e10.
    pub fn paper() -> Self {
        make_schedule(1e-2, 1e10, 800).expect("valid constants")
    }

    /// 200 steps over the same range.
    pub fn desk() -> Self {
        make_schedule(1e-2, 1e10, 200).expect("valid constants")
    }
}

pub fn make_schedule(beta_start: f64, beta_end: f64, steps: usize) -> Result<AnnealSchedule> {
    if !(beta_start.is_finite() && beta_end.is_finite() && beta_start > 0.0) {
        return Err(Error::InvalidSchedule(format!(
            "inverse temperatures must be positive and finite, got {beta_start} and {beta_end}"
        )));
    }
    if beta_start >= beta_end {
        return Err(Error::InvalidSchedule(format!(
            "need beta_start < beta_end, got {beta_start} >= {beta_end}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidSchedule("need at least one step".into()));
    }
    Ok(AnnealSchedule {
        beta_start,
        beta_end,
        steps,
        rate: (beta_end / beta_start).ln() / steps as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealConfig {
    pub sweeps_per_temperature: usize,
    pub epsilon: f64,
    pub starts: usize,
    pub seed: u64,
    /// Worker threads for [`anneal_multi`]; 0 lets rayon decide.
    pub jobs: usize,
}

impl AnnealConfig {
    /// 1600 sweeps, eps = 0.001, 48 starts.
    pub fn paper() -> Self {
        Self {
            sweeps_per_temperature: 1600,
            epsilon: 1e-3,
            starts: 48,
            seed: 1,
            jobs: 0,
        }
    }

    /// 400 sweeps, eps = 0.001, 8 starts.
    pub fn desk() -> Self {
        Self {
            sweeps_per_temperature: 400,
            starts: 8,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps_per_temperature == 0 {
            return Err(Error::InvalidConfig("sweeps per temperature must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.starts == 0 {
            return Err(Error::InvalidConfig("starts must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// RNG for chain `chain` of a run seeded with `master`.
pub fn chain_rng(master: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(chain);
    rng
}

/// Strictly positive uniform weights normalized to one.
pub fn random_start<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Distribution {
    let mut weights: Vec<f64> = (0..n)
        .map(|_| loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                break u;
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Distribution::from_raw(weights)
}

/// A chain's configuration together with its pair-term cache.
#[derive(Debug, Clone)]
pub struct ChainState {
    dist: Distribution,
    cache: ActionCache,
}

impl ChainState {
    pub fn new(w: &TransitionMatrix, dist: Distribution) -> Result<Self> {
        let cache = ActionCache::new(w, &dist)?;
        Ok(Self { dist, cache })
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn cached_action(&self) -> ActionValue {
        self.cache.value()
    }
}

/// One sweep with caller-supplied draws: `draw_t(x)` gives the proposal
/// variable for bin `x`, `draw_u()` the acceptance uniform (only consumed for
/// uphill moves). Returns the number of accepted proposals.
pub fn sweep_with<T, U>(
    state: &mut ChainState,
    w: &TransitionMatrix,
    beta: f64,
    epsilon: f64,
    mut draw_t: T,
    mut draw_u: U,
) -> Result<usize>
where
    T: FnMut(usize) -> f64,
    U: FnMut() -> f64,
{
    let mut accepted = 0;
    for x in 0..state.dist.len() {
        let t = draw_t(x);
        let proposed = state.dist.weights()[x] * (1.0 + t * epsilon);
        let p = state.cache.propose_trusted(w, &state.dist, x, proposed)?;
        if p.delta <= 0.0 || draw_u() < (-beta * p.delta).exp() {
            state.cache.commit_trusted(&mut state.dist)?;
            accepted += 1;
        }
    }
    state.dist.normalize()?;
    state.cache.rescaled(&state.dist)?;
    Ok(accepted)
}

pub fn sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    w: &TransitionMatrix,
    beta: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let rng = std::cell::RefCell::new(rng);
    sweep_with(
        state,
        w,
        beta,
        epsilon,
        |_| rng.borrow_mut().gen_range(-1.0..=1.0),
        || rng.borrow_mut().gen::<f64>(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryPoint {
    pub step: usize,
    pub beta: f64,
    pub s: f64,
}

#[derive(Debug, Clone)]
pub struct AnnealResult {
    pub chain: usize,
    pub master_seed: u64,
    pub initial_s: ActionValue,
    pub final_w: Distribution,
    pub final_s: ActionValue,
    /// One point per temperature, `n + 1` in total.
    pub history: Vec<HistoryPoint>,
    pub accepted: u64,
    pub proposed: u64,
}

impl AnnealResult {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposed as f64
    }
}

fn check_matrix(w: &TransitionMatrix) -> Result<()> {
    if w.size() < 2 {
        return Err(Error::InvalidMatrix(format!("need at least 2 bins, got {}", w.size())));
    }
    Ok(())
}

/// Runs chain `chain` with the RNG derived from `config.seed`.
pub fn anneal_one(
    w: &TransitionMatrix,
    schedule: &AnnealSchedule,
    config: &AnnealConfig,
    chain: usize,
) -> Result<AnnealResult> {
    check_matrix(w)?;
    config.validate()?;
    let mut rng = chain_rng(config.seed, chain as u64);
    let start = random_start(w.size(), &mut rng);
    let mut state = ChainState::new(w, start)?;
    let initial_s = state.cached_action();
    let mut history = Vec::with_capacity(schedule.steps() + 1);
    let mut accepted = 0u64;
    for (step, beta) in schedule.betas().enumerate() {
        for _ in 0..config.sweeps_per_temperature {
            accepted += sweep(&mut state, w, beta, config.epsilon, &mut rng)? as u64;
        }
        state.cache.rebuild(w, &state.dist);
        history.push(HistoryPoint {
            step,
            beta,
            s: state.cached_action().s,
        });
    }
    let final_s = action(w, &state.dist)?;
    let proposed = (schedule.steps() as u64 + 1) * config.sweeps_per_temperature as u64 * w.size() as u64;
    Ok(AnnealResult {
        chain,
        master_seed: config.seed,
        initial_s,
        final_w: state.dist,
        final_s,
        history,
        accepted,
        proposed,
    })
}

/// Per-bin statistics of the final distributions across chains.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    /// Standard error of the mean; zero for a single chain.
    pub stderr: Vec<f64>,
    pub best_chain: usize,
    pub s_min: f64,
    pub s_max: f64,
}

impl Aggregate {
    pub fn spread(&self) -> f64 {
        self.s_max - self.s_min
    }

    pub fn from_results(results: &[AnnealResult]) -> Self {
        let n = results[0].final_w.len();
        let count = results.len() as f64;
        let mut mean = vec![0.0; n];
        for r in results {
            for (m, v) in mean.iter_mut().zip(r.final_w.weights()) {
                *m += v / count;
            }
        }
        let stderr = if results.len() < 2 {
            vec![0.0; n]
        } else {
            (0..n)
                .map(|k| {
                    let ss: f64 = results.iter().map(|r| (r.final_w.weights()[k] - mean[k]).powi(2)).sum();
                    (ss / (count - 1.0)).sqrt() / count.sqrt()
                })
                .collect()
        };
        let best = results
            .iter()
            .min_by(|a, b| a.final_s.s.total_cmp(&b.final_s.s).then(a.chain.cmp(&b.chain)))
            .expect("nonempty");
        let s_max = results.iter().map(|r| r.final_s.s).fold(f64::NEG_INFINITY, f64::max);
        Self {
            mean,
            stderr,
            best_chain: best.chain,
            s_min: best.final_s.s,
            s_max,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiResult {
    /// Sorted by chain index.
    pub results: Vec<AnnealResult>,
    pub aggregate: Aggregate,
}

impl MultiResult {
    pub fn best(&self) -> &AnnealResult {
        &self.results[self.aggregate.best_chain]
    }
}

/// Runs `config.starts` independent chains on up to `config.jobs` threads.
pub fn anneal_multi(w: &TransitionMatrix, schedule: &AnnealSchedule, config: &AnnealConfig) -> Result<MultiResult> {
    check_matrix(w)?;
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let results: Vec<AnnealResult> = pool.install(|| {
        (0..config.starts)
            .into_par_iter()
            .map(|k| anneal_one(w, schedule, config, k))
            .collect::<Result<_>>()
    })?;
    let aggregate = Aggregate::from_results(&results);
    Ok(MultiResult { results, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MatrixKind;

    fn pair(a: f64, b: f64) -> TransitionMatrix {
        TransitionMatrix::from_rows(vec![vec![0.0, a], vec![b, 0.0]], MatrixKind::Density).unwrap()
    }

    #[test]
    fn paper_rate() {
        let s = make_schedule(1e-2, 1e10, 800).unwrap();
        assert!((s.rate() - 0.0345388).abs() < 1e-6);
        assert!((s.beta(800) / 1e10 - 1.0).abs() < 1e-9);
        assert!((s.beta(0) - 1e-2).abs() < 1e-20);
    }

    #[test]
    fn unit_schedule() {
        let s = make_schedule(1.0, std::f64::consts::E, 1).unwrap();
        assert!((s.rate() - 1.0).abs() < 1e-15);
        let betas: Vec<f64> = s.betas().collect();
        assert_eq!(betas.len(), 2);
        assert_eq!(betas[0], 1.0);
        assert!((betas[1] - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn bad_schedules() {
        assert!(make_schedule(1.0, 1.0, 10).is_err());
        assert!(make_schedule(2.0, 1.0, 10).is_err());
        assert!(make_schedule(0.0, 1.0, 10).is_err());
        assert!(make_schedule(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AnnealConfig::desk().validate().is_ok());
        assert!(AnnealConfig { epsilon: 1.0, ..AnnealConfig::desk() }.validate().is_err());
        assert!(AnnealConfig { epsilon: 0.0, ..AnnealConfig::desk() }.validate().is_err());
        assert!(AnnealConfig { starts: 0, ..AnnealConfig::desk() }.validate().is_err());
        assert!(AnnealConfig { sweeps_per_temperature: 0, ..AnnealConfig::desk() }.validate().is_err());
    }

    #[test]
    fn random_start_contract() {
        let mut rng = chain_rng(9, 0);
        let d = random_start(25, &mut rng);
        assert!(d.is_strictly_positive());
        assert!((d.sum() - 1.0).abs() < 1e-12);
        assert_eq!(random_start(25, &mut chain_rng(9, 0)), d);
    }

    #[test]
    fn random_start_mean() {
        // Each normalized weight has mean 1/N; estimate it over many draws
        // and compare with 3 standard errors of the sample mean.
        let n = 10;
        let draws = 20_000;
        let mut rng = chain_rng(4, 0);
        let samples: Vec<f64> = (0..draws).map(|_| random_start(n, &mut rng).weights()[3]).collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        let se = (var / draws as f64).sqrt();
        assert!((mean - 0.1).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn zero_epsilon_accepts_everything() {
        let w = pair(2.0, 1.0);
        let mut state = ChainState::new(&w, Distribution::new(vec![0.4, 0.6]).unwrap()).unwrap();
        let before = state.cached_action().s;
        let acc = sweep_with(&mut state, &w, 1e10, 0.0, |_| 0.7, || 0.99).unwrap();
        assert_eq!(acc, 2);
        assert_eq!(state.cached_action().s, before);
    }

    #[test]
    fn infinite_beta_rejects_uphill() {
        // w = (2/3, 1/3) balances W(1,2) = 2, W(2,1) = 1 exactly; any move is uphill.
        let w = pair(2.0, 1.0);
        let start = Distribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let mut state = ChainState::new(&w, start.clone()).unwrap();
        let acc = sweep_with(&mut state, &w, f64::INFINITY, 1e-3, |x| if x == 0 { 1.0 } else { 0.0 }, || 0.0)
            .unwrap();
        assert_eq!(acc, 1); // only the t = 0 no-op on bin 2
        assert_eq!(state.distribution().weights()[0], start.weights()[0]);
    }

    #[test]
    fn zero_beta_accepts_uphill() {
        let w = pair(2.0, 1.0);
        let mut state = ChainState::new(&w, Distribution::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap()).unwrap();
        let acc = sweep_with(&mut state, &w, 0.0, 1e-3, |_| 1.0, || 0.999_999).unwrap();
        assert_eq!(acc, 2);
    }

    #[test]
    fn hand_sweep() {
        let w = pair(1.0, 1.0);
        let mut state = ChainState::new(&w, Distribution::new(vec![0.5, 0.5]).unwrap()).unwrap();
        sweep_with(&mut state, &w, 0.0, 1e-3, |x| if x == 0 { 1.0 } else { 0.0 }, || 0.0).unwrap();
        let got = state.distribution().weights();
        // (0.5005, 0.5) / 1.0005
        assert!((got[0] - 0.5005 / 1.0005).abs() < 1e-12);
        assert!((got[1] - 0.5 / 1.0005).abs() < 1e-12);
        assert!((got[0] - 0.50025).abs() < 1e-6);
    }

    #[test]
    fn single_chain_aggregate_has_zero_stderr() {
        let w = pair(1.0, 1.0);
        let cfg = AnnealConfig {
            sweeps_per_temperature: 5,
            starts: 1,
            ..AnnealConfig::desk()
        };
        let sched = make_schedule(1e-2, 1e6, 10).unwrap();
        let m = anneal_multi(&w, &sched, &cfg).unwrap();
        assert_eq!(m.results.len(), 1);
        assert_eq!(m.aggregate.stderr, vec![0.0, 0.0]);
        assert_eq!(m.aggregate.mean, m.results[0].final_w.weights().to_vec());
        assert_eq!(m.aggregate.s_min, m.results[0].final_s.s);
        assert_eq!(m.results[0].history.len(), 11);
    }

    #[test]
    fn symmetric_pair_converges_to_equal_weights() {
        let w = pair(1.0, 1.0);
        let cfg = AnnealConfig {
            starts: 3,
            ..AnnealConfig::desk()
        };
        let m = anneal_multi(&w, &AnnealSchedule::desk(), &cfg).unwrap();
        // one soft mode: the Metropolis floor at beta_2 is <S> ~ 1 / (2 beta_2) = 5e-11
        for r in &m.results {
            assert!(r.final_s.s < 1e-8, "S = {}", r.final_s.s);
            assert!((r.final_w.weights()[0] - 0.5).abs() < 1e-4);
        }
    }
}
