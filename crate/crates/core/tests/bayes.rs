mod common;

use common::*;
use fadegame_core::bayes::{
    best_response_to_belief, enumerate_strategies, epsilon_ne_check, interference_support,
    simulate, Belief, DiscreteStrategy, LearningParams, PowerLevels, BUDGET_SLACK,
};
use fadegame_core::{presets, ChannelModel, GainDist, Game, Variant};
use proptest::prelude::*;
use rand::Rng;

const CAP: usize = 1_000_000;

fn belief_with(support: Vec<f64>, d: f64, obs: &[usize]) -> Belief {
    let mut b = Belief::new(support, d).unwrap();
    for &k in obs {
        let v = b.support()[k];
        b.observe(0, v).unwrap();
    }
    b
}

proptest! {
    #[test]
    fn belief_is_a_smoothed_distribution(
        size in 1usize..8,
        d in 0.01f64..5.0,
        raw in prop::collection::vec(0usize..1000, 0..300),
    ) {
        let support: Vec<f64> = (0..size).map(|k| k as f64 * 0.7).collect();
        let obs: Vec<usize> = raw.iter().map(|k| k % size).collect();
        let b = belief_with(support, d, &obs);
        let m = b.masses();
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(m.iter().all(|x| *x > 0.0));
        prop_assert_eq!(b.counts().iter().sum::<u64>(), obs.len() as u64);
        prop_assert_eq!(b.total(), obs.len() as u64);
        if !obs.is_empty() {
            let t = obs.len() as f64;
            for (k, x) in m.iter().enumerate() {
                let freq = b.counts()[k] as f64 / t;
                prop_assert!((x - freq).abs() <= 2.0 * size as f64 * d / t);
            }
        }
    }

    #[test]
    fn scaling_counts_and_smoothing_keeps_the_best_response(
        raw in prop::collection::vec(0usize..1000, 1..200),
        k in 2u32..5,
    ) {
        let model = presets::example2_bayes(10.0).unwrap();
        let levels = PowerLevels::uniform(3, presets::bayes_levels()).unwrap();
        let support = interference_support(&model, &levels, 0, CAP).unwrap();
        let obs: Vec<usize> = raw.iter().map(|x| x % support.len()).collect();
        let many: Vec<usize> = obs.iter().flat_map(|&x| std::iter::repeat_n(x, k as usize)).collect();
        let a = belief_with(support.clone(), 1.0, &obs);
        let b = belief_with(support, k as f64, &many);
        let set = enumerate_strategies(0, levels.user(0), model.direct(0).probs(), 10.0, CAP).unwrap();
        let ia = best_response_to_belief(&a, &model, 0, levels.user(0), &set).unwrap();
        let ib = best_response_to_belief(&b, &model, 0, levels.user(0), &set).unwrap();
        prop_assert_eq!(ia, ib);
    }
}

#[test]
fn large_budget_admits_every_assignment() {
    let l = presets::bayes_levels();
    let n = enumerate_strategies(0, &l, &[0.2, 0.3, 0.5], 50.0, CAP)
        .unwrap()
        .len();
    assert_eq!(n, 11usize.pow(3));
}

#[test]
fn support_size_is_bounded_by_combinations() {
    let model = presets::example2_bayes(10.0).unwrap();
    let levels = PowerLevels::uniform(3, presets::bayes_levels()).unwrap();
    for i in 0..3 {
        let s = interference_support(&model, &levels, i, CAP).unwrap();
        let bound: usize = (0..3)
            .filter(|&j| j != i)
            .map(|j| model.link(i, j).len() * levels.user(j).len())
            .product();
        assert!(s.len() <= bound);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s[0], 0.0);
    }
}

#[test]
fn simulation_is_deterministic_per_seed() {
    let model = presets::example2_bayes(10.0).unwrap();
    let levels = PowerLevels::uniform(3, presets::bayes_levels()).unwrap();
    let params = LearningParams {
        max_slots: 2000,
        ..LearningParams::default()
    };
    let a = simulate(&model, &levels, &params, 5).unwrap();
    let b = simulate(&model, &levels, &params, 5).unwrap();
    assert_eq!(a, b);
    let c = simulate(&model, &levels, &params, 6).unwrap();
    assert_ne!(a.slots, c.slots);
}

#[test]
fn trace_is_consistent_with_the_model() {
    let model = presets::example2_bayes(10.0).unwrap();
    let levels = PowerLevels::uniform(3, presets::bayes_levels()).unwrap();
    let t = simulate(&model, &levels, &LearningParams::default(), 9).unwrap();
    for rec in &t.slots {
        for i in 0..3 {
            assert!(t.beliefs[i].locate(rec.interference[i]).is_some());
            assert!(levels.user(i).contains(&rec.powers[i]));
        }
    }
    for ch in &t.changes {
        let used = ch
            .strategy
            .average_power(levels.user(ch.user), model.direct(ch.user).probs());
        assert!(used <= 10.0 + BUDGET_SLACK);
    }
    for (i, b) in t.beliefs.iter().enumerate() {
        assert_eq!(b.total() as usize, t.slots_played, "user {i}");
    }
}

#[test]
fn learning_converges_to_an_epsilon_equilibrium_at_ten_decibel() {
    let model = presets::example2_bayes(presets::budget_from_snr_db(10.0)).unwrap();
    let levels = PowerLevels::uniform(3, presets::bayes_levels()).unwrap();
    for seed in 1..=3 {
        let t = simulate(
            &model,
            &levels,
            &LearningParams {
                record_slots: false,
                ..LearningParams::default()
            },
            seed,
        )
        .unwrap();
        assert!(t.converged, "seed {seed}");
        let (_, last) = t.checks.last().unwrap();
        assert!(last.passed && last.improvements.iter().all(|d| *d <= 0.05));
        assert!(t.rates.rates.iter().all(|r| *r > 0.0));
    }
}

#[test]
fn belief_matching_the_true_law_yields_an_exact_best_response() {
    let b = 10.0;
    let model = ChannelModel::symmetric(
        2,
        GainDist::uniform(vec![0.3, 1.0]).unwrap(),
        GainDist::uniform(vec![0.5, 0.1]).unwrap(),
        b,
    )
    .unwrap();
    let levels = PowerLevels::uniform(2, presets::bayes_levels()).unwrap();
    let game = Game::new(model.clone(), Variant::Direct).unwrap();
    let sets: Vec<Vec<DiscreteStrategy>> = (0..2)
        .map(|i| enumerate_strategies(i, levels.user(i), model.direct(i).probs(), b, CAP).unwrap())
        .collect();
    let mut r = rng(51);
    for _ in 0..20 {
        let other = sets[1][r.gen_range(0..sets[1].len())].clone();
        // interference h * p(s) over the equiprobable cross gain and
        // opponent state: each combination seen 1000 times
        let mut belief =
            Belief::new(interference_support(&model, &levels, 0, CAP).unwrap(), 1e-9).unwrap();
        for h in model.link(0, 1).values() {
            for p in other.powers(levels.user(1)) {
                for _ in 0..1000 {
                    belief.observe(0, h * p).unwrap();
                }
            }
        }
        let k = best_response_to_belief(&belief, &model, 0, levels.user(0), &sets[0]).unwrap();
        let rep =
            epsilon_ne_check(&game, &levels, &sets, &[sets[0][k].clone(), other], 0.0).unwrap();
        assert!(rep.improvements[0] <= 1e-6, "{}", rep.improvements[0]);
    }
}

#[test]
fn single_user_learning_reaches_the_discrete_optimum() {
    let model = ChannelModel::new(
        1,
        vec![GainDist::new(vec![0.3, 1.0, 2.0], vec![0.3, 0.3, 0.4]).unwrap()],
        vec![12.0],
        vec![1.0],
    )
    .unwrap();
    let levels = PowerLevels::uniform(1, presets::bayes_levels()).unwrap();
    let params = LearningParams {
        epsilon: 0.0,
        window: 10,
        ..LearningParams::default()
    };
    let t = simulate(&model, &levels, &params, 3).unwrap();
    assert!(t.converged);
    assert_eq!(t.checks.last().unwrap().1.improvements, vec![0.0]);
}
