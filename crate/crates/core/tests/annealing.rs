use detailed_balance::action::action;
use detailed_balance::anneal::{self, chain_rng, random_start, sweep, ChainState};
use detailed_balance::controls::{fixtures, metropolis_transition, uniform_random_transition};
use detailed_balance::grid::{BinGrid, Distribution, TransitionMatrix};
use detailed_balance::{anneal_multi, AnnealConfig, AnnealSchedule};
use rand::Rng;

/// Renormalizes after every proposal and evaluates dS by full recomputation.
/// Draw order matches the production sweep: `t` per bin, `u` only uphill.
fn reference_sweep<R: Rng>(w: &TransitionMatrix, weights: &mut Vec<f64>, beta: f64, eps: f64, rng: &mut R) -> usize {
    let mut accepted = 0;
    for x in 0..weights.len() {
        let t = rng.gen_range(-1.0..=1.0);
        let mut trial = weights.clone();
        trial[x] *= 1.0 + t * eps;
        let total: f64 = trial.iter().sum();
        trial.iter_mut().for_each(|v| *v /= total);
        let now = action(w, &Distribution::new(weights.clone()).unwrap()).unwrap().s;
        let next = action(w, &Distribution::new(trial.clone()).unwrap()).unwrap().s;
        let ds = next - now;
        if ds <= 0.0 || rng.gen::<f64>() < (-beta * ds).exp() {
            *weights = trial;
            accepted += 1;
        }
    }
    accepted
}

#[test]
fn deferred_renormalization_matches_reference() {
    let n = 6;
    let matrices = [
        uniform_random_transition(n, &mut chain_rng(3, 0)).unwrap(),
        metropolis_transition(&Distribution::normalized(vec![1.0, 2.0, 4.0, 8.0, 3.0, 0.5]).unwrap()).unwrap(),
    ];
    for w in &matrices {
        for &beta in &[1.0, 1e2, 1e4, 1e6] {
            let mut fast_rng = chain_rng(77, 5);
            let mut slow_rng = chain_rng(77, 5);
            let start = random_start(n, &mut fast_rng);
            let _ = random_start(n, &mut slow_rng);
            let mut slow = start.weights().to_vec();
            let mut state = ChainState::new(w, start).unwrap();
            let mut rejections = 0;
            for _ in 0..300 {
                let a = sweep(&mut state, w, beta, 0.05, &mut fast_rng).unwrap();
                let b = reference_sweep(w, &mut slow, beta, 0.05, &mut slow_rng);
                assert_eq!(a, b, "beta {beta}");
                rejections += n - a;
                for (p, q) in state.distribution().weights().iter().zip(&slow) {
                    assert!((p - q).abs() <= 1e-12, "beta {beta}: {p} vs {q}");
                }
            }
            if beta >= 1e4 {
                assert!(rejections > 0, "reference check never exercised a rejection");
            }
        }
    }
}

#[test]
fn cache_coherent_and_simplex_preserved_every_sweep() {
    let g = BinGrid::default();
    let w = metropolis_transition(&fixtures::fat_tail(&g)).unwrap();
    let schedule = AnnealSchedule::desk();
    let mut rng = chain_rng(12, 0);
    let mut state = ChainState::new(&w, random_start(25, &mut rng)).unwrap();
    for beta in schedule.betas().step_by(4) {
        for _ in 0..20 {
            sweep(&mut state, &w, beta, 1e-3, &mut rng).unwrap();
            let d = state.distribution();
            assert!(d.is_strictly_positive());
            assert!((d.sum() - 1.0).abs() <= 1e-12);
        }
        let fresh = action(&w, state.distribution()).unwrap();
        assert!((state.cached_action().s - fresh.s).abs() <= 1e-10);
        assert_eq!(state.cached_action().k_terms, fresh.k_terms);
    }
}

#[test]
fn results_independent_of_thread_count() {
    let w = uniform_random_transition(10, &mut chain_rng(5, 99)).unwrap();
    let schedule = anneal::make_schedule(1e-2, 1e8, 40).unwrap();
    let base = AnnealConfig {
        sweeps_per_temperature: 30,
        starts: 6,
        seed: 2024,
        ..AnnealConfig::desk()
    };
    let one = anneal_multi(&w, &schedule, &AnnealConfig { jobs: 1, ..base }).unwrap();
    let many = anneal_multi(&w, &schedule, &AnnealConfig { jobs: 4, ..base }).unwrap();
    for (a, b) in one.results.iter().zip(&many.results) {
        assert_eq!(a.chain, b.chain);
        assert_eq!(a.final_w, b.final_w);
        assert_eq!(a.history, b.history);
    }
    assert_eq!(one.aggregate.mean, many.aggregate.mean);
    assert_eq!(one.aggregate.stderr, many.aggregate.stderr);
}

#[test]
fn history_shape_and_final_consistency() {
    let g = BinGrid::default();
    let w = metropolis_transition(&fixtures::two_point(&g)).unwrap();
    let schedule = AnnealSchedule::desk();
    let config = AnnealConfig::desk();
    let r = anneal::anneal_one(&w, &schedule, &config, 0).unwrap();
    assert_eq!(r.history.len(), schedule.steps() + 1);
    assert_eq!(r.history[0].beta, schedule.beta_start());
    assert!((r.history.last().unwrap().beta / schedule.beta_end() - 1.0).abs() < 1e-9);
    let fresh = action(&w, &r.final_w).unwrap();
    assert!((r.final_s.s - fresh.s).abs() <= 1e-10);
    assert!((r.history.last().unwrap().s - fresh.s).abs() <= 1e-10);
}

#[test]
fn smoothed_history_decreases_at_high_beta() {
    // Against an exactly balanced matrix the equilibrium S falls like 1/beta,
    // so 10-step window means must decrease once the chain has found the basin.
    let g = BinGrid::default();
    let w = metropolis_transition(&fixtures::fat_tail(&g)).unwrap();
    let schedule = AnnealSchedule::desk();
    let r = anneal::anneal_one(&w, &schedule, &AnnealConfig::desk(), 3).unwrap();
    let high: Vec<f64> = r.history.iter().filter(|p| p.beta >= 1e5).map(|p| p.s).collect();
    let means: Vec<f64> = high.chunks(10).filter(|c| c.len() == 10).map(|c| c.iter().sum::<f64>() / 10.0).collect();
    assert!(means.len() >= 5);
    for pair in means.windows(2) {
        assert!(pair[1] <= pair[0], "{means:?}");
    }
}

#[test]
fn exact_balance_runs_agree() {
    // Spread of final S across starts is bounded by the thermal floor at
    // beta_2: <S> ~ (N - 1) / (2 beta_2) = 1.2e-9 for N = 25.
    let g = BinGrid::default();
    let base = fixtures::fat_tail(&g);
    let w = metropolis_transition(&base).unwrap();
    let m = anneal_multi(&w, &AnnealSchedule::desk(), &AnnealConfig::desk()).unwrap();
    assert_eq!(m.results.len(), 8);
    for r in &m.results {
        assert!(r.final_s.s < 1e-8, "chain {} S {}", r.chain, r.final_s.s);
        for (got, want) in r.final_w.weights().iter().zip(base.weights()) {
            assert!(((got - want) / want).abs() <= 1e-3);
        }
    }
    assert!(m.aggregate.spread() < 1e-8);
}
