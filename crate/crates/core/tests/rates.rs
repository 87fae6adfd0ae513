mod common;

use common::*;
use fadegame_core::policy::{self, expected_power, zero_profile};
use fadegame_core::rates::{self, lower_bound_maximizer, lower_bound_rate};
use fadegame_core::{ChannelModel, GainDist, Game, PolicyProfile, Variant};
use rand::Rng;

fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[test]
fn rates_match_monte_carlo() {
    let mut r = rng(21);
    for v in Variant::ALL {
        let g = game(1, 3.0, v);
        let p = policy::random_feasible_profile(&g, &mut r).unwrap();
        let sampler = Sampler::new(&g);
        let mut draws: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(1_000_000)).collect();
        for _ in 0..1_000_000 {
            let (gains, k) = sampler.draw(&mut r);
            let powers = powers_in_state(&g, &p, k);
            for (i, d) in draws.iter_mut().enumerate() {
                d.push(slot_rate(g.model(), &gains, &powers, i));
            }
        }
        for (i, d) in draws.iter().enumerate() {
            let (mean, se) = mean_and_se(d);
            let exact = rates::rate(&g, &p, i).unwrap();
            assert!(
                (mean - exact).abs() <= 3.0 * se,
                "{v} user {i}: {mean} vs {exact} (se {se})"
            );
        }
    }
}

#[test]
fn partial_rates_equal_full_rates_of_lifted_profiles() {
    let mut r = rng(22);
    for k in 1..=3 {
        let full = game(k, 5.0, Variant::Full);
        for v in [Variant::Incident, Variant::Direct] {
            let g = game(k, 5.0, v);
            for _ in 0..100 {
                let p = policy::random_feasible_profile(&g, &mut r).unwrap();
                let lifted = g.lift(&p).unwrap();
                for i in 0..g.n_users() {
                    let a = rates::rate(&g, &p, i).unwrap();
                    let b = rates::rate_full(&full, &lifted, i).unwrap();
                    assert!((a - b).abs() < 1e-10, "example {k} {v}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn uncoupled_rates_reduce_to_single_user() {
    let m = decoupled(2, 4.0);
    let full = Game::new(m.clone(), Variant::Full).unwrap();
    let g = Game::new(m, Variant::Incident).unwrap();
    let mut r = rng(23);
    let p = policy::random_feasible_profile(&g, &mut r).unwrap();
    let lifted = g.lift(&p).unwrap();
    for i in 0..2 {
        let single: f64 = (0..g.indexer().n_states(i))
            .map(|s| {
                let st = &g.space().states()[g.indexer().representative(i, s)];
                g.indexer().marginals(i)[s] * (st.gain(2, i, i) * p.get(i, s)).ln_1p()
            })
            .sum();
        assert!((rates::rate(&g, &p, i).unwrap() - single).abs() < 1e-12);
        assert!((rates::rate_full(&full, &lifted, i).unwrap() - single).abs() < 1e-12);
    }
}

#[test]
fn own_gradient_matches_finite_differences() {
    let mut r = rng(24);
    for k in 1..=3 {
        for v in Variant::ALL {
            let g = game(k, 4.0, v);
            for _ in 0..100 {
                let p = policy::random_feasible_profile(&g, &mut r).unwrap();
                let i = r.gen_range(0..g.n_users());
                let grad = rates::grad_rate(&g, &p, i).unwrap();
                // a handful of entries per profile keeps the full game cheap
                for _ in 0..4 {
                    let s = r.gen_range(0..grad.len());
                    let fd = central_difference(
                        |x| {
                            let mut q = p.clone();
                            q.values_mut(i)[s] = x;
                            rates::rate(&g, &q, i).unwrap()
                        },
                        p.get(i, s),
                    );
                    assert!(grad[s] > 0.0);
                    assert!(
                        (grad[s] - fd).abs() <= 1e-5 * grad[s].abs(),
                        "example {k} {v}: {} vs {fd}",
                        grad[s]
                    );
                }
            }
        }
    }
}

#[test]
fn weighted_gradient_matches_finite_differences() {
    let mut r = rng(25);
    for v in Variant::ALL {
        let g = game(2, 10.0, v);
        let w = [0.7, 1.3, 2.0];
        let total = |q: &PolicyProfile| -> f64 {
            (0..3).map(|i| w[i] * rates::rate(&g, q, i).unwrap()).sum()
        };
        for _ in 0..20 {
            let p = policy::random_feasible_profile(&g, &mut r).unwrap();
            let grad = rates::weighted_sum_gradient(&g, &p, &w).unwrap();
            for _ in 0..4 {
                let j = r.gen_range(0..3);
                let s = r.gen_range(0..p.values(j).len());
                let fd = central_difference(
                    |x| {
                        let mut q = p.clone();
                        q.values_mut(j)[s] = x;
                        total(&q)
                    },
                    p.get(j, s),
                );
                let a = grad[g.offset(j) + s];
                assert!(
                    (a - fd).abs() <= 1e-5 * a.abs().max(1e-8),
                    "{v}: {a} vs {fd}"
                );
            }
        }
    }
}

#[test]
fn gradient_at_zero_is_gain() {
    let m = ChannelModel::new(
        1,
        vec![GainDist::constant(1.0).unwrap()],
        vec![1.0],
        vec![1.0],
    )
    .unwrap();
    let g = Game::new(m, Variant::Full).unwrap();
    assert_eq!(
        rates::grad_rate(&g, &zero_profile(&g), 0).unwrap(),
        vec![1.0]
    );
}

#[test]
fn rate_is_concave_in_own_policy() {
    let mut r = rng(26);
    for k in 1..=3 {
        for v in Variant::ALL {
            let g = game(k, 6.0, v);
            for _ in 0..20 {
                let p = policy::random_feasible_profile(&g, &mut r).unwrap();
                let q = policy::random_feasible_profile(&g, &mut r).unwrap();
                let i = r.gen_range(0..g.n_users());
                let along = |t: f64| {
                    let vals: Vec<f64> = p
                        .values(i)
                        .iter()
                        .zip(q.values(i))
                        .map(|(a, b)| a + t * (b - a))
                        .collect();
                    rates::rate(&g, &p.with_user(i, vals), i).unwrap()
                };
                let t = r.gen_range(0.01..0.99);
                let h = 1e-3;
                let second = along(t + h) - 2.0 * along(t) + along(t - h);
                assert!(second <= 1e-8, "example {k} {v}: {second}");
            }
        }
    }
}

#[test]
fn jensen_bound_holds_against_budget_meeting_opponents() {
    let mut r = rng(27);
    for k in 1..=3 {
        for v in [Variant::Incident, Variant::Direct] {
            let g = game(k, 5.0, v);
            for _ in 0..100 {
                let p = policy::random_feasible_profile(&g, &mut r).unwrap();
                for i in 0..g.n_users() {
                    let lb = lower_bound_rate(&g, i, p.values(i)).unwrap();
                    let actual = rates::rate(&g, &p, i).unwrap();
                    assert!(actual >= lb - 1e-9, "example {k} {v}: {actual} < {lb}");
                }
            }
        }
    }
}

#[test]
fn bound_maximizer_is_budget_binding_water_filling() {
    for k in 1..=3 {
        for v in [Variant::Incident, Variant::Direct] {
            let g = game(k, 10.0, v);
            for i in 0..g.n_users() {
                let p = lower_bound_maximizer(&g, i).unwrap();
                let e = expected_power(&p.values, g.indexer().marginals(i)).unwrap();
                assert!((e - 10.0).abs() < 1e-9);
            }
        }
    }
    // no cross gains: the bound is the rate and the maximizer is water-filling
    let m = ChannelModel::symmetric(
        2,
        GainDist::uniform(vec![0.5, 2.0]).unwrap(),
        GainDist::constant(0.0).unwrap(),
        1.0,
    )
    .unwrap();
    let g = Game::new(m, Variant::Direct).unwrap();
    let p = lower_bound_maximizer(&g, 0).unwrap();
    // level μ with 0.5(μ − 2)⁺ + 0.5(μ − 0.5)⁺ = 1 gives μ = 2.25
    assert!(
        (p.values[0] - 0.25).abs() < 1e-12 && (p.values[1] - 1.75).abs() < 1e-12,
        "{:?}",
        p.values
    );
}
