mod common;

use common::*;
use fadegame_core::channel::{enumerate_states, DEFAULT_ENUMERATION_CAP};
use fadegame_core::policy::{self, expected_power, project, water_fill, ProjectionMode};
use fadegame_core::{vi, ChannelModel, GainDist, Game, Variant};
use proptest::prelude::*;

fn arb_dist(positive: bool) -> impl Strategy<Value = GainDist> {
    (1usize..4).prop_flat_map(move |k| {
        (
            proptest::collection::vec(if positive { 0.05f64..3.0 } else { 0.0f64..3.0 }, k),
            proptest::collection::vec(0.01f64..1.0, k),
        )
            .prop_map(|(v, p)| {
                let s: f64 = p.iter().sum();
                GainDist::new(v, p.iter().map(|x| x / s).collect()).unwrap()
            })
    })
}

fn arb_model() -> impl Strategy<Value = ChannelModel> {
    (1usize..4).prop_flat_map(|n| {
        let links: Vec<_> = (0..n * n)
            .map(|k| arb_dist(k / n == k % n).boxed())
            .collect();
        (links, proptest::collection::vec(0.1f64..20.0, n)).prop_map(move |(links, budgets)| {
            ChannelModel::new(n, links, budgets, vec![1.0; n]).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_probabilities_sum_to_one(m in arb_model()) {
        let sp = enumerate_states(&m, DEFAULT_ENUMERATION_CAP).unwrap();
        prop_assert!((sp.total_prob() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn marginals_are_pushforwards(m in arb_model()) {
        for v in Variant::ALL {
            let g = Game::new(m.clone(), v).unwrap();
            for i in 0..m.n_users() {
                let ix = g.indexer();
                let mut acc = vec![0.0; ix.n_states(i)];
                for (k, st) in g.space().states().iter().enumerate() {
                    acc[ix.info_state(i, k)] += st.prob;
                }
                prop_assert_eq!(&acc, &ix.marginals(i).to_vec());
            }
        }
    }

    #[test]
    fn indexers_see_exactly_their_gains(m in arb_model()) {
        let n = m.n_users();
        let gi = Game::new(m.clone(), Variant::Incident).unwrap();
        let gd = Game::new(m, Variant::Direct).unwrap();
        let states = gi.space().states();
        for i in 0..n {
            for a in 0..states.len() {
                for b in 0..states.len() {
                    let row = (0..n).all(|j| states[a].support[i * n + j] == states[b].support[i * n + j]);
                    let same_i = gi.indexer().info_state(i, a) == gi.indexer().info_state(i, b);
                    prop_assert_eq!(row, same_i);
                    let diag = states[a].support[i * n + i] == states[b].support[i * n + i];
                    let same_d = gd.indexer().info_state(i, a) == gd.indexer().info_state(i, b);
                    prop_assert_eq!(diag, same_d);
                }
            }
        }
    }

    #[test]
    fn equality_binding_meets_budget(
        x in proptest::collection::vec(-5.0f64..5.0, 1..20),
        budget in 0.01f64..10.0,
    ) {
        let m = vec![1.0 / x.len() as f64; x.len()];
        let p = project(&x, &m, budget, ProjectionMode::EqualityBinding).unwrap();
        prop_assert!((expected_power(&p.values, &m).unwrap() - budget).abs() < 1e-10);
        prop_assert!(p.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn water_level_rises_with_budget(
        base in proptest::collection::vec(-5.0f64..-0.1, 1..12),
        b in 0.1f64..10.0,
        extra in 0.01f64..5.0,
    ) {
        let m = vec![1.0 / base.len() as f64; base.len()];
        let lo = water_fill(&base, &m, b).unwrap();
        let hi = water_fill(&base, &m, b + extra).unwrap();
        // powers are max(0, base + level) with level = multiplier
        prop_assert!(hi.multiplier > lo.multiplier);
    }
}

#[test]
fn example_counts() {
    let g = game(1, 1.0, Variant::Direct);
    assert_eq!(g.space().len(), 512);
    for i in 0..3 {
        assert_eq!(g.indexer().marginals(i), &[0.5, 0.5]);
    }
    let g = game(1, 1.0, Variant::Incident);
    for i in 0..3 {
        assert_eq!(g.indexer().n_states(i), 8);
        assert!(g
            .indexer()
            .marginals(i)
            .iter()
            .all(|m| (m - 0.125).abs() < 1e-15));
    }
    let g = game(1, 1.0, Variant::Full);
    assert!((0..512).all(|k| g.indexer().info_state(2, k) == k));
    let g = game(3, 1.0, Variant::Full);
    assert_eq!(g.space().len(), 81);
    assert!((g.space().total_prob() - 1.0).abs() < 1e-12);
}

#[test]
fn expected_power_matches_monte_carlo() {
    let mut r = rng(11);
    for v in Variant::ALL {
        let g = game(1, 4.0, v);
        let p = policy::random_feasible_profile(&g, &mut r).unwrap();
        let sampler = Sampler::new(&g);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let (_, k) = sampler.draw(&mut r);
                p.get(1, g.indexer().info_state(1, k))
            })
            .collect();
        let (mean, se) = mean_and_se(&draws);
        let exact = expected_power(p.values(1), g.indexer().marginals(1)).unwrap();
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "{v}: {mean} vs {exact} (se {se})"
        );
    }
}

#[test]
fn full_best_response_beats_random_alternatives() {
    let g = game(3, 3.0, Variant::Full);
    let mut r = rng(2);
    let others = policy::uniform_profile(&g);
    for i in 0..2 {
        let br = policy::best_response_full(&g, &others, i).unwrap();
        let m = g.indexer().marginals(i);
        assert!((expected_power(&br.values, m).unwrap() - 3.0).abs() < 1e-9);
        let best =
            fadegame_core::rates::rate(&g, &others.with_user(i, br.values.clone()), i).unwrap();
        for _ in 0..50 {
            let alt = policy::random_feasible_profile(&g, &mut r).unwrap();
            let q = others.with_user(i, alt.values(i).to_vec());
            assert!(fadegame_core::rates::rate(&g, &q, i).unwrap() <= best + 1e-12);
        }
    }
}

#[test]
fn partial_information_best_response_beats_random_alternatives() {
    let mut r = rng(3);
    for v in [Variant::Incident, Variant::Direct] {
        for k in 1..=3 {
            let g = game(k, 5.0, v);
            let base = policy::random_feasible_profile(&g, &mut r).unwrap();
            for i in 0..g.n_users() {
                let br = vi::best_response(&g, &base, i).unwrap();
                let m = g.indexer().marginals(i);
                assert!((expected_power(&br.values, m).unwrap() - 5.0).abs() < 1e-9);
                let best = fadegame_core::rates::rate(&g, &base.with_user(i, br.values.clone()), i)
                    .unwrap();
                for _ in 0..50 {
                    let alt = policy::random_feasible_profile(&g, &mut r).unwrap();
                    let q = base.with_user(i, alt.values(i).to_vec());
                    assert!(
                        fadegame_core::rates::rate(&g, &q, i).unwrap() <= best + 1e-12,
                        "{v} example {k}"
                    );
                }
            }
        }
    }
}
