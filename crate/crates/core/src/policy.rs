//! Power policies, projection onto the per-user feasible set and
//! water-filling.
//!
//! A policy of user `i` assigns one power to each of its information states.
//! The feasible set is `{ P >= 0 : Σ_s m(s) P(s) <= P̄ }` where `m` are the
//! info-state marginals.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::channel::Variant;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::math;

/// Maximum bisection steps of the water-level search.
pub const LEVEL_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerPolicy {
    pub user: usize,
    pub variant: Variant,
    pub values: Vec<f64>,
}

impl PowerPolicy {
    pub fn new(user: usize, variant: Variant, values: Vec<f64>) -> Self {
        PowerPolicy {
            user,
            variant,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One policy per user, all for the same information structure.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyProfile {
    pub variant: Variant,
    pub policies: Vec<PowerPolicy>,
}

impl PolicyProfile {
    pub fn new(variant: Variant, policies: Vec<PowerPolicy>) -> Result<Self> {
        for (i, p) in policies.iter().enumerate() {
            if p.variant != variant {
                return Err(Error::VariantMismatch {
                    expected: variant,
                    got: p.variant,
                });
            }
            if p.user != i {
                return Err(Error::InvalidParam(alloc::format!(
                    "policy at position {i} belongs to user {}",
                    p.user
                )));
            }
        }
        Ok(PolicyProfile { variant, policies })
    }

    pub fn from_values(variant: Variant, values: Vec<Vec<f64>>) -> Self {
        let policies = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| PowerPolicy::new(i, variant, v))
            .collect();
        PolicyProfile { variant, policies }
    }

    pub fn n_users(&self) -> usize {
        self.policies.len()
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.policies[i].values
    }

    pub fn values_mut(&mut self, i: usize) -> &mut Vec<f64> {
        &mut self.policies[i].values
    }

    pub fn get(&self, i: usize, s: usize) -> f64 {
        self.policies[i].values[s]
    }

    /// All entries, user-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.policies
            .iter()
            .flat_map(|p| p.values.iter().copied())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.policies.iter().map(|p| p.len()).sum()
    }

    /// Euclidean distance over all entries.
    pub fn distance(&self, other: &PolicyProfile) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.policies.iter().zip(&other.policies) {
            for (x, y) in a.values.iter().zip(&b.values) {
                acc += (x - y) * (x - y);
            }
        }
        math::sqrt(acc)
    }

    /// Replaces user `i`'s values, returning a new profile.
    pub fn with_user(&self, i: usize, values: Vec<f64>) -> PolicyProfile {
        let mut p = self.clone();
        p.policies[i].values = values;
        p
    }
}

/// How the per-user projection treats the average-power constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    /// `max(0, x(s) - λ)` with λ of either sign chosen so the budget binds.
    #[default]
    EqualityBinding,
    /// Exact Euclidean projection onto the inequality set:
    /// `max(0, x(s) - λ m(s))` with `λ >= 0`.
    InequalityKkt,
}

/// A projected point together with its multiplier λ.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub values: Vec<f64>,
    pub multiplier: f64,
}

/// Expected power `Σ_s m(s) P(s)`.
pub fn expected_power(values: &[f64], marginals: &[f64]) -> Result<f64> {
    if values.len() != marginals.len() {
        return Err(Error::DimensionMismatch {
            expected: marginals.len(),
            got: values.len(),
        });
    }
    Ok(values.iter().zip(marginals).map(|(v, m)| v * m).sum())
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Solves `Σ_s w(s) max(0, x(s) - λ c(s)) = budget` for λ.
///
/// The left side is continuous and non-increasing in λ. Bisection narrows the
/// bracket until no breakpoint `x(s)/c(s)` lies strictly inside it; the active
/// set is then fixed and λ follows in closed form.
pub(crate) fn solve_level(
    x: &[f64],
    w: &[f64],
    c: impl Fn(usize) -> f64,
    budget: f64,
) -> Result<f64> {
    let n = x.len();
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for s in 0..n {
        let cs = c(s);
        hi = hi.max(x[s] / cs);
        lo = lo.min((x[s] - budget / w[s] - 1.0) / cs);
    }
    let mass = |lam: f64| -> f64 { (0..n).map(|s| w[s] * (x[s] - lam * c(s)).max(0.0)).sum() };
    let mut iter = 0;
    loop {
        let interior = (0..n).any(|s| {
            let b = x[s] / c(s);
            b > lo && b < hi
        });
        if !interior {
            break;
        }
        if iter == LEVEL_MAX_ITER {
            return Err(Error::BisectionFailed(LEVEL_MAX_ITER));
        }
        iter += 1;
        let mid = 0.5 * (lo + hi);
        let m = mass(mid);
        if m > budget {
            lo = mid;
        } else if m < budget {
            hi = mid;
        } else {
            return Ok(mid);
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for s in 0..n {
        let cs = c(s);
        if x[s] / cs >= hi {
            num += w[s] * x[s];
            den += w[s] * cs;
        }
    }
    if den <= 0.0 {
        return Err(Error::BisectionFailed(iter));
    }
    Ok(((num - budget) / den).clamp(lo, hi))
}

/// Projects `point` onto user-level feasible set with the given marginals.
pub fn project(
    point: &[f64],
    marginals: &[f64],
    budget: f64,
    mode: ProjectionMode,
) -> Result<Projected> {
    if point.len() != marginals.len() {
        return Err(Error::DimensionMismatch {
            expected: marginals.len(),
            got: point.len(),
        });
    }
    check_finite(point)?;
    match mode {
        ProjectionMode::EqualityBinding => {
            let lam = solve_level(point, marginals, |_| 1.0, budget)?;
            let values = point.iter().map(|x| (x - lam).max(0.0)).collect();
            Ok(Projected {
                values,
                multiplier: lam,
            })
        }
        ProjectionMode::InequalityKkt => {
            let clipped: Vec<f64> = point.iter().map(|x| x.max(0.0)).collect();
            if expected_power(&clipped, marginals)? <= budget {
                return Ok(Projected {
                    values: clipped,
                    multiplier: 0.0,
                });
            }
            let lam = solve_level(point, marginals, |s| marginals[s], budget)?;
            let values = point
                .iter()
                .zip(marginals)
                .map(|(x, m)| (x - lam * m).max(0.0))
                .collect();
            Ok(Projected {
                values,
                multiplier: lam,
            })
        }
    }
}

/// Water-filling on `base`: returns `max(0, λ + base(s))` with the water level
/// λ chosen so the expected power equals `budget`. `base(s)` is minus the
/// inverse effective SNR of state `s`.
pub fn water_fill(base: &[f64], marginals: &[f64], budget: f64) -> Result<Projected> {
    if base.len() != marginals.len() {
        return Err(Error::DimensionMismatch {
            expected: marginals.len(),
            got: base.len(),
        });
    }
    check_finite(base)?;
    let shift = solve_level(base, marginals, |_| 1.0, budget)?;
    let values = base.iter().map(|f| (f - shift).max(0.0)).collect();
    Ok(Projected {
        values,
        multiplier: -shift,
    })
}

/// Best response of user `i` in the full-information game: water-filling on
/// `-(1 + Σ_j |h_ij|² P_j(h)) / (α_i |h_ii|²)`.
pub fn best_response_full(game: &Game, profile: &PolicyProfile, i: usize) -> Result<PowerPolicy> {
    if game.variant() != Variant::Full || profile.variant != Variant::Full {
        return Err(Error::VariantMismatch {
            expected: Variant::Full,
            got: profile.variant,
        });
    }
    let base = full_wf_base(game, profile, i);
    let wf = water_fill(&base, game.indexer().marginals(i), game.model().budget(i))?;
    Ok(PowerPolicy::new(i, Variant::Full, wf.values))
}

pub(crate) fn full_wf_base(game: &Game, profile: &PolicyProfile, i: usize) -> Vec<f64> {
    let n = game.n_users();
    let alpha = game.model().alpha(i);
    game.space()
        .states()
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let interference: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| st.gain(n, i, j) * profile.get(j, k))
                .sum();
            -(1.0 + interference) / (alpha * st.gain(n, i, i))
        })
        .collect()
}

/// Every entry at the user's budget.
pub fn uniform_profile(game: &Game) -> PolicyProfile {
    let values = (0..game.n_users())
        .map(|i| vec![game.model().budget(i); game.indexer().n_states(i)])
        .collect();
    PolicyProfile::from_values(game.variant(), values)
}

/// Entries uniform on `[0, 2 P̄_i]`, then projected with the
/// budget-binding projection.
pub fn random_feasible_profile<R: Rng + ?Sized>(game: &Game, rng: &mut R) -> Result<PolicyProfile> {
    let mut values = Vec::with_capacity(game.n_users());
    for i in 0..game.n_users() {
        let b = game.model().budget(i);
        let raw: Vec<f64> = (0..game.indexer().n_states(i))
            .map(|_| rng.gen::<f64>() * 2.0 * b)
            .collect();
        let p = project(
            &raw,
            game.indexer().marginals(i),
            b,
            ProjectionMode::EqualityBinding,
        )?;
        values.push(p.values);
    }
    Ok(PolicyProfile::from_values(game.variant(), values))
}

/// All-zero profile.
pub fn zero_profile(game: &Game) -> PolicyProfile {
    let values = (0..game.n_users())
        .map(|i| vec![0.0; game.indexer().n_states(i)])
        .collect();
    PolicyProfile::from_values(game.variant(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn constant_policy_expected_power() {
        let m = [0.25, 0.25, 0.5];
        assert!((expected_power(&[3.0; 3], &m).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(expected_power(&[10.0, 30.0], &[0.5, 0.5]).unwrap(), 20.0);
        assert!(expected_power(&[1.0], &m).is_err());
    }

    #[test]
    fn equality_lift_to_budget() {
        let p = project(
            &[-1.0, -1.0],
            &[0.5, 0.5],
            2.0,
            ProjectionMode::EqualityBinding,
        )
        .unwrap();
        assert!((p.values[0] - 2.0).abs() < 1e-12 && (p.values[1] - 2.0).abs() < 1e-12);
        assert!((p.multiplier + 3.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_interior_point_unchanged() {
        let p = project(&[1.0, 1.0], &[0.5, 0.5], 4.0, ProjectionMode::InequalityKkt).unwrap();
        assert_eq!(p.values, vec![1.0, 1.0]);
        assert_eq!(p.multiplier, 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        let e = project(
            &[f64::NAN, 1.0],
            &[0.5, 0.5],
            1.0,
            ProjectionMode::EqualityBinding,
        );
        assert_eq!(e.unwrap_err(), Error::NonFinite);
        assert_eq!(
            water_fill(&[f64::INFINITY], &[1.0], 1.0).unwrap_err(),
            Error::NonFinite
        );
    }

    #[test]
    fn single_state_water_fill() {
        let wf = water_fill(&[-2.0], &[1.0], 5.0).unwrap();
        assert!((wf.values[0] - 5.0).abs() < 1e-12);
        assert!((wf.multiplier - 7.0).abs() < 1e-12);
    }

    // Scalar oracle: bisection on 0.5 max(0, λ-1) + 0.5 max(0, λ-3) = 1.
    #[test]
    fn two_state_water_fill_matches_scalar_oracle() {
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let v = 0.5 * (mid - 1.0).max(0.0) + 0.5 * (mid - 3.0).max(0.0);
            if v > 1.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((oracle - 3.0).abs() < 1e-12);
        let wf = water_fill(&[-1.0, -3.0], &[0.5, 0.5], 1.0).unwrap();
        assert!((wf.multiplier - oracle).abs() < 1e-10);
        assert!((wf.values[0] - 2.0).abs() < 1e-10 && wf.values[1].abs() < 1e-10);
    }

    #[test]
    fn flat_base_gives_uniform_power() {
        let wf = water_fill(&[-1.7; 4], &[0.1, 0.2, 0.3, 0.4], 2.5).unwrap();
        for v in wf.values {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn water_level_grows_with_budget() {
        let base = [-0.5, -2.0, -4.0];
        let m = [0.2, 0.3, 0.5];
        let mut prev = f64::NEG_INFINITY;
        for b in [0.1, 0.5, 1.0, 3.0, 10.0] {
            let lam = water_fill(&base, &m, b).unwrap().multiplier;
            assert!(lam > prev);
            prev = lam;
        }
    }

    #[test]
    fn best_response_without_interference_is_single_user_water_filling() {
        let model = presets::example1(2.0).unwrap();
        let game = Game::new(model, Variant::Full).unwrap();
        let prof = zero_profile(&game);
        let br = best_response_full(&game, &prof, 1).unwrap();
        let n = 3;
        let base: Vec<f64> = game
            .space()
            .states()
            .iter()
            .map(|st| -1.0 / st.gain(n, 1, 1))
            .collect();
        let wf = water_fill(&base, game.indexer().marginals(1), 2.0).unwrap();
        assert_eq!(br.values, wf.values);
        let e = expected_power(&br.values, game.indexer().marginals(1)).unwrap();
        assert!((e - 2.0).abs() < 1e-9);
    }

    // Dense QP oracle: enumerate active sets of min ||v - x||² s.t. v >= 0,
    // m·v <= b. For a candidate zero set Z and a binding flag, the KKT point
    // is closed form; keep the feasible one with the smallest objective.
    pub(crate) fn qp_oracle(x: &[f64], m: &[f64], b: f64) -> Vec<f64> {
        let n = x.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << n) {
            for binding in [false, true] {
                let free: Vec<usize> = (0..n).filter(|s| mask & (1 << s) == 0).collect();
                let mut v = vec![0.0; n];
                if binding {
                    let den: f64 = free.iter().map(|&s| m[s] * m[s]).sum();
                    if den == 0.0 {
                        continue;
                    }
                    let num: f64 = free.iter().map(|&s| m[s] * x[s]).sum::<f64>() - b;
                    let lam = num / den;
                    if lam < 0.0 {
                        continue;
                    }
                    for &s in &free {
                        v[s] = x[s] - lam * m[s];
                    }
                } else {
                    for &s in &free {
                        v[s] = x[s];
                    }
                }
                if v.iter().any(|t| *t < -1e-12) {
                    continue;
                }
                let e: f64 = v.iter().zip(m).map(|(a, c)| a * c).sum();
                if e > b + 1e-12 {
                    continue;
                }
                let obj: f64 = v.iter().zip(x).map(|(a, c)| (a - c) * (a - c)).sum();
                if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                    best = Some((obj, v));
                }
            }
        }
        best.unwrap().1
    }

    fn marginals_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.05f64..1.0, n).prop_map(|w| {
            let t: f64 = w.iter().sum();
            w.into_iter().map(|v| v / t).collect()
        })
    }

    #[test]
    fn kkt_matches_qp_oracle_on_dim10() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x: Vec<f64> = (0..10).map(|_| rng.gen::<f64>() * 10.0 - 5.0).collect();
            let raw: Vec<f64> = (0..10).map(|_| 0.1 + rng.gen::<f64>()).collect();
            let t: f64 = raw.iter().sum();
            let m: Vec<f64> = raw.iter().map(|v| v / t).collect();
            let p = project(&x, &m, 3.0, ProjectionMode::InequalityKkt).unwrap();
            let o = qp_oracle(&x, &m, 3.0);
            for (a, b) in p.values.iter().zip(&o) {
                assert!((a - b).abs() < 1e-7, "{a} vs {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn projections_are_idempotent_and_feasible(
            (x, m) in (1usize..12).prop_flat_map(|n| (proptest::collection::vec(-20.0f64..20.0, n), marginals_strategy(n))),
            b in 0.01f64..50.0,
        ) {
            for mode in [ProjectionMode::EqualityBinding, ProjectionMode::InequalityKkt] {
                let p = project(&x, &m, b, mode).unwrap();
                prop_assert!(p.values.iter().all(|v| *v >= 0.0));
                let e = expected_power(&p.values, &m).unwrap();
                prop_assert!(e <= b + 1e-9 * b.max(1.0));
                if mode == ProjectionMode::EqualityBinding {
                    prop_assert!((e - b).abs() <= 1e-10 * b.max(1.0));
                }
                let q = project(&p.values, &m, b, mode).unwrap();
                for (u, v) in p.values.iter().zip(&q.values) {
                    prop_assert!((u - v).abs() <= 1e-10 * b.max(1.0));
                }
            }
        }

        #[test]
        fn kkt_projection_variational_property(
            (x, m) in (1usize..10).prop_flat_map(|n| (proptest::collection::vec(-10.0f64..10.0, n), marginals_strategy(n))),
            b in 0.1f64..10.0,
            seeds in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 10), 20),
        ) {
            let p = project(&x, &m, b, ProjectionMode::InequalityKkt).unwrap().values;
            for raw in seeds {
                // random feasible q: nonnegative, scaled into the budget
                let q: Vec<f64> = raw.iter().take(x.len()).copied().collect();
                let e: f64 = q.iter().zip(&m).map(|(a, c)| a * c).sum();
                let scale = if e > 0.0 { b * raw[9] / e } else { 0.0 };
                let q: Vec<f64> = q.iter().map(|v| v * scale).collect();
                let ip: f64 = (0..x.len()).map(|s| (p[s] - x[s]) * (q[s] - p[s])).sum();
                prop_assert!(ip >= -1e-8);
            }
        }

        #[test]
        fn water_fill_is_equality_projection(
            (f, m) in (1usize..10).prop_flat_map(|n| (proptest::collection::vec(-30.0f64..-0.01, n), marginals_strategy(n))),
            b in 0.01f64..100.0,
        ) {
            let wf = water_fill(&f, &m, b).unwrap();
            let pr = project(&f, &m, b, ProjectionMode::EqualityBinding).unwrap();
            for (u, v) in wf.values.iter().zip(&pr.values) {
                prop_assert!((u - v).abs() < 1e-9);
            }
            prop_assert!((wf.multiplier + pr.multiplier).abs() < 1e-9 * b.max(1.0));
        }
    }
}
