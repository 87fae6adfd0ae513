//! Weighted-sum Pareto points and Nash bargaining through a distributed
//! augmented Lagrangian ascent.
//!
//! For budget gaps `e_i = P̄_i − Σ_s m_i(s) P_i(s)` the ascent maximizes
//!
//! `L(P, λ) = U(P) + Σ_i λ_i e_i − c Σ_i e_i²`
//!
//! over `P >= 0` for fixed multipliers, then updates `λ_i ← λ_i − α e_i`
//! until every `|e_i|` is below the constraint tolerance. `U` is either
//! `Σ w_i r_i` or, for bargaining, `Σ log(r_i − d_i)`.
//!
//! Each ascent round lets every user propose `Q_i = max(0, P_i + δ G_i)`
//! where `G_i(s) = (∂L/∂P_i(s)) / m_i(s)` is the gradient in the metric
//! weighted by the info-state marginals; only the proposal with the largest
//! gain in `L` is committed.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::math;
use crate::policy::{self, PolicyProfile};
use crate::rates::{self, LogBase, RateReport};

/// What the ascent maximizes.
#[derive(Debug, Clone, PartialEq)]
pub enum SocialObjective {
    /// `Σ w_i r_i` with `w_i > 0`.
    WeightedSum(Vec<f64>),
    /// `Π (r_i − d_i)` over the region `r_i >= d_i`, with disagreement
    /// point `d_i >= 0`.
    NashProduct(Vec<f64>),
}

impl SocialObjective {
    pub fn equal_weights(n: usize) -> Self {
        SocialObjective::WeightedSum(vec![1.0; n])
    }

    pub fn zero_disagreement(n: usize) -> Self {
        SocialObjective::NashProduct(vec![0.0; n])
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let (v, name) = match self {
            SocialObjective::WeightedSum(w) => (w, "weight"),
            SocialObjective::NashProduct(d) => (d, "disagreement rate"),
        };
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        for x in v {
            let ok = match self {
                SocialObjective::WeightedSum(_) => x.is_finite() && *x > 0.0,
                SocialObjective::NashProduct(_) => x.is_finite() && *x >= 0.0,
            };
            if !ok {
                return Err(Error::InvalidParam(alloc::format!("invalid {name} {x}")));
            }
        }
        Ok(())
    }

    /// Value used inside the Lagrangian: the weighted sum, or the log of the
    /// Nash product (`−∞` outside `r > d`).
    fn ascent_value(&self, r: &[f64]) -> f64 {
        match self {
            SocialObjective::WeightedSum(w) => w.iter().zip(r).map(|(a, b)| a * b).sum(),
            SocialObjective::NashProduct(d) => {
                let mut acc = 0.0;
                for (ri, di) in r.iter().zip(d) {
                    if ri <= di {
                        return f64::NEG_INFINITY;
                    }
                    acc += math::ln(ri - di);
                }
                acc
            }
        }
    }

    /// Weights `w_k` such that `∇U = Σ_k w_k ∇r_k`.
    fn rate_weights(&self, r: &[f64]) -> Vec<f64> {
        match self {
            SocialObjective::WeightedSum(w) => w.clone(),
            SocialObjective::NashProduct(d) => {
                r.iter().zip(d).map(|(ri, di)| 1.0 / (ri - di)).collect()
            }
        }
    }
}

/// `Σ w_i r_i`, or `Π (r_i − d_i)` with `−∞` when some `r_i < d_i`.
pub fn social_value(
    game: &Game,
    profile: &PolicyProfile,
    objective: &SocialObjective,
) -> Result<f64> {
    objective.validate(game.n_users())?;
    let r = rates::rates(game, profile, LogBase::E)?.rates;
    Ok(social_value_of_rates(&r, objective))
}

pub fn social_value_of_rates(r: &[f64], objective: &SocialObjective) -> f64 {
    match objective {
        SocialObjective::WeightedSum(w) => w.iter().zip(r).map(|(a, b)| a * b).sum(),
        SocialObjective::NashProduct(d) => {
            if r.iter().zip(d).any(|(ri, di)| ri < di) {
                return f64::NEG_INFINITY;
            }
            r.iter().zip(d).map(|(ri, di)| ri - di).product()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugLagParams {
    /// Penalty weight `c`.
    pub penalty: f64,
    /// Multiplier step `α`.
    pub alpha: f64,
    /// Ascent step `δ`.
    pub delta: f64,
    /// Ascent stops once every user's gradient norm is below this.
    pub eps: f64,
    /// Outer loop stops once every `|e_i|` is below this (`|e_i| / P̄_i`
    /// when normalized).
    pub constraint_tol: f64,
    pub max_outer: usize,
    /// Ascent rounds per multiplier value.
    pub max_rounds: usize,
    /// Consecutive halvings of `δ` allowed before the ascent gives up.
    pub max_halvings: usize,
    /// Measure each user's power in units of its budget inside the
    /// Lagrangian and the ascent. The penalty, multiplier step, ascent step
    /// and gradient tolerance then act on dimensionless quantities; without
    /// it the penalty dominates the curvature at high SNR.
    pub normalize: bool,
    /// After a committed step, keep doubling `δ` for the committing user
    /// while `L` keeps improving.
    pub expand_step: bool,
}

impl Default for AugLagParams {
    fn default() -> Self {
        AugLagParams {
            penalty: 1.0,
            alpha: 0.25,
            delta: 0.1,
            eps: 1e-4,
            constraint_tol: 1e-3,
            max_outer: 500,
            max_rounds: 2000,
            max_halvings: 30,
            normalize: true,
            expand_step: true,
        }
    }
}

impl AugLagParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("penalty", self.penalty),
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("eps", self.eps),
            ("constraint_tol", self.constraint_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(alloc::format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_outer == 0 || self.max_rounds == 0 {
            return Err(Error::InvalidParam(
                "iteration limits must be positive".into(),
            ));
        }
        Ok(())
    }
}

struct Evaluator<'a> {
    game: &'a Game,
    objective: &'a SocialObjective,
    multipliers: &'a [f64],
    penalty: f64,
    /// Power unit per user: `P̄_i` when normalized, else 1.
    scale: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(
        game: &'a Game,
        objective: &'a SocialObjective,
        multipliers: &'a [f64],
        params: &AugLagParams,
    ) -> Self {
        let scale = (0..game.n_users())
            .map(|i| {
                if params.normalize {
                    game.model().budget(i)
                } else {
                    1.0
                }
            })
            .collect();
        Evaluator {
            game,
            objective,
            multipliers,
            penalty: params.penalty,
            scale,
        }
    }

    /// Budget gaps in watts.
    fn gaps(&self, flat: &[f64]) -> Vec<f64> {
        (0..self.game.n_users())
            .map(|i| {
                let m = self.game.indexer().marginals(i);
                let used: f64 = flat[self.game.user_range(i)]
                    .iter()
                    .zip(m)
                    .map(|(p, q)| p * q)
                    .sum();
                self.game.model().budget(i) - used
            })
            .collect()
    }

    fn rates(&self, flat: &[f64]) -> Vec<f64> {
        (0..self.game.n_users())
            .map(|i| self.game.rate_flat(i, flat))
            .collect()
    }

    fn value(&self, flat: &[f64]) -> f64 {
        let u = self.objective.ascent_value(&self.rates(flat));
        if u == f64::NEG_INFINITY {
            return u;
        }
        let gaps = self.scaled_gaps(flat);
        u + gaps
            .iter()
            .zip(self.multipliers)
            .map(|(e, l)| l * e - self.penalty * e * e)
            .sum::<f64>()
    }

    fn scaled_gaps(&self, flat: &[f64]) -> Vec<f64> {
        self.gaps(flat)
            .iter()
            .zip(&self.scale)
            .map(|(e, s)| e / s)
            .collect()
    }

    /// Conditional gradient `(∂L/∂x_i(s)) / m_i(s)` in the scaled powers
    /// `x = P / scale`, flat layout.
    fn gradient(&self, flat: &[f64]) -> Vec<f64> {
        let r = self.rates(flat);
        let w = self.objective.rate_weights(&r);
        let mut g = rates::weighted_gradient_flat(self.game, flat, &w);
        let gaps = self.scaled_gaps(flat);
        for i in 0..self.game.n_users() {
            let m = self.game.indexer().marginals(i);
            let shift = -self.multipliers[i] + 2.0 * self.penalty * gaps[i];
            for (s, k) in self.game.user_range(i).enumerate() {
                g[k] = self.scale[i] * g[k] / m[s] + shift;
            }
        }
        g
    }

    /// Norm of the gradient after zeroing components blocked by `P >= 0`,
    /// in the `m`-weighted metric.
    fn user_norm(&self, flat: &[f64], grad: &[f64], i: usize) -> f64 {
        let m = self.game.indexer().marginals(i);
        math::sqrt(
            self.game
                .user_range(i)
                .enumerate()
                .map(|(s, k)| {
                    let d = if flat[k] <= 0.0 && grad[k] < 0.0 {
                        0.0
                    } else {
                        grad[k]
                    };
                    m[s] * d * d
                })
                .sum(),
        )
    }
}

/// Result of one ascent at fixed multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentOutcome {
    pub profile: PolicyProfile,
    pub value: f64,
    pub rounds: usize,
    /// Entries clamped at zero in committed steps.
    pub clamps: usize,
    /// Every user's gradient norm fell below `eps`.
    pub stationary: bool,
}

/// Augmented Lagrangian `L(P, λ)`; the bargaining objective enters in log
/// form.
pub fn aug_lagrangian(
    game: &Game,
    profile: &PolicyProfile,
    multipliers: &[f64],
    params: &AugLagParams,
    objective: &SocialObjective,
) -> Result<f64> {
    let flat = game.flatten(profile)?;
    objective.validate(game.n_users())?;
    if multipliers.len() != game.n_users() {
        return Err(Error::DimensionMismatch {
            expected: game.n_users(),
            got: multipliers.len(),
        });
    }
    let ev = Evaluator::new(game, objective, multipliers, params);
    Ok(ev.value(&flat))
}

/// `∂L/∂P` in the flat layout (plain partial derivatives).
pub fn aug_lagrangian_gradient(
    game: &Game,
    profile: &PolicyProfile,
    multipliers: &[f64],
    params: &AugLagParams,
    objective: &SocialObjective,
) -> Result<Vec<f64>> {
    let flat = game.flatten(profile)?;
    objective.validate(game.n_users())?;
    let ev = Evaluator::new(game, objective, multipliers, params);
    let mut g = ev.gradient(&flat);
    for i in 0..game.n_users() {
        let m = game.indexer().marginals(i);
        for (s, k) in game.user_range(i).enumerate() {
            g[k] *= m[s] / ev.scale[i];
        }
    }
    Ok(g)
}

const MAX_DOUBLINGS: usize = 60;

/// Best-improvement ascent on `L` at fixed multipliers.
pub fn steepest_ascent(
    game: &Game,
    multipliers: &[f64],
    start: &PolicyProfile,
    params: &AugLagParams,
    objective: &SocialObjective,
) -> Result<AscentOutcome> {
    params.validate()?;
    objective.validate(game.n_users())?;
    let mut flat = game.flatten(start)?;
    let ev = Evaluator::new(game, objective, multipliers, params);
    let mut value = ev.value(&flat);
    if value == f64::NEG_INFINITY {
        return Err(Error::InvalidParam(
            "start lies outside the bargaining region r > d".into(),
        ));
    }
    let n = game.n_users();
    let mut delta = params.delta;
    let (mut rounds, mut clamps, mut halvings) = (0, 0, 0);
    let mut stationary = false;
    while rounds < params.max_rounds {
        let grad = ev.gradient(&flat);
        if (0..n).all(|i| ev.user_norm(&flat, &grad, i) < params.eps) {
            stationary = true;
            break;
        }
        rounds += 1;
        let candidate = |i: usize, step: f64| {
            let mut cand = flat.clone();
            let mut clamped = 0;
            for k in game.user_range(i) {
                let v = flat[k] + step * ev.scale[i] * grad[k];
                if v < 0.0 {
                    clamped += 1;
                }
                cand[k] = v.max(0.0);
            }
            (cand, clamped)
        };
        let mut best: Option<(f64, usize, Vec<f64>, usize)> = None;
        for i in 0..n {
            let (cand, clamped) = candidate(i, delta);
            let gain = ev.value(&cand) - value;
            if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.0) {
                best = Some((gain, i, cand, clamped));
            }
        }
        match best {
            Some((mut gain, i, mut cand, mut clamped)) => {
                if params.expand_step {
                    for _ in 0..MAX_DOUBLINGS {
                        let (c2, k2) = candidate(i, 2.0 * delta);
                        let g2 = ev.value(&c2) - value;
                        if g2 <= gain {
                            break;
                        }
                        (gain, cand, clamped) = (g2, c2, k2);
                        delta *= 2.0;
                    }
                }
                flat = cand;
                value += gain;
                clamps += clamped;
                halvings = 0;
            }
            None => {
                if halvings == params.max_halvings {
                    break;
                }
                halvings += 1;
                delta *= 0.5;
            }
        }
    }
    let value = ev.value(&flat);
    Ok(AscentOutcome {
        profile: game.unflatten(&flat),
        value,
        rounds,
        clamps,
        stationary,
    })
}

/// Outcome of the multiplier loop from one start.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoRun {
    pub start: String,
    pub profile: PolicyProfile,
    pub rates: RateReport,
    /// [`social_value`] of the final profile.
    pub objective_value: f64,
    pub multipliers: Vec<f64>,
    pub outer_iterations: usize,
    pub ascent_rounds: usize,
    pub clamps: usize,
    /// The last ascent was stationary and every budget gap fell below the
    /// constraint tolerance.
    pub converged: bool,
}

/// Best run over all starts plus every individual run.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoReport {
    pub best: ParetoRun,
    pub runs: Vec<ParetoRun>,
    /// Starts rejected because the bargaining objective was `−∞` there.
    pub skipped: Vec<String>,
}

/// A labelled starting profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Start {
    pub label: String,
    pub profile: PolicyProfile,
}

/// Uniform-at-budget, the given equilibrium (if any) and `n_random` seeded
/// random feasible profiles.
pub fn default_starts<R: Rng + ?Sized>(
    game: &Game,
    ne: Option<&PolicyProfile>,
    n_random: usize,
    rng: &mut R,
) -> Result<Vec<Start>> {
    let mut v = vec![Start {
        label: "uniform".into(),
        profile: policy::uniform_profile(game),
    }];
    if let Some(p) = ne {
        game.check(p)?;
        v.push(Start {
            label: "ne".into(),
            profile: p.clone(),
        });
    }
    for k in 0..n_random {
        v.push(Start {
            label: alloc::format!("random{k}"),
            profile: policy::random_feasible_profile(game, rng)?,
        });
    }
    Ok(v)
}

fn run_from(
    game: &Game,
    start: &Start,
    params: &AugLagParams,
    objective: &SocialObjective,
) -> Result<ParetoRun> {
    let n = game.n_users();
    let mut lambda = vec![0.0; n];
    let mut profile = start.profile.clone();
    let (mut outer, mut rounds, mut clamps) = (0, 0, 0);
    let mut converged = false;
    while outer < params.max_outer {
        outer += 1;
        let a = steepest_ascent(game, &lambda, &profile, params, objective)?;
        rounds += a.rounds;
        clamps += a.clamps;
        profile = a.profile;
        let flat = profile.flatten();
        let ev = Evaluator::new(game, objective, &lambda, params);
        let scaled = ev.scaled_gaps(&flat);
        if a.stationary && scaled.iter().all(|e| e.abs() < params.constraint_tol) {
            converged = true;
            break;
        }
        for (l, e) in lambda.iter_mut().zip(scaled) {
            *l -= params.alpha * e;
        }
    }
    let report = rates::rates(game, &profile, LogBase::E)?;
    Ok(ParetoRun {
        start: start.label.clone(),
        objective_value: social_value_of_rates(&report.rates, objective),
        rates: report,
        profile,
        multipliers: lambda,
        outer_iterations: outer,
        ascent_rounds: rounds,
        clamps,
        converged,
    })
}

/// Runs the multiplier loop from every start and keeps the converged run
/// with the largest objective (the largest over all runs if none
/// converged; `best.converged` then flags the failure).
pub fn solve_pareto(
    game: &Game,
    objective: &SocialObjective,
    params: &AugLagParams,
    starts: &[Start],
) -> Result<ParetoReport> {
    params.validate()?;
    objective.validate(game.n_users())?;
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for s in starts {
        let flat = game.flatten(&s.profile)?;
        let r: Vec<f64> = (0..game.n_users())
            .map(|i| game.rate_flat(i, &flat))
            .collect();
        if objective.ascent_value(&r) == f64::NEG_INFINITY {
            skipped.push(s.label.clone());
            continue;
        }
        runs.push(run_from(game, s, params, objective)?);
    }
    let pick = |only_converged: bool| {
        runs.iter()
            .filter(|r| r.converged || !only_converged)
            .max_by(|a, b| a.objective_value.total_cmp(&b.objective_value))
            .cloned()
    };
    let best = pick(true)
        .or_else(|| pick(false))
        .ok_or_else(|| Error::InvalidParam("no usable start".into()))?;
    Ok(ParetoReport {
        best,
        runs,
        skipped,
    })
}

/// Nash bargaining: [`solve_pareto`] with the product objective.
pub fn solve_bargaining(
    game: &Game,
    disagreement: &[f64],
    params: &AugLagParams,
    starts: &[Start],
) -> Result<ParetoReport> {
    solve_pareto(
        game,
        &SocialObjective::NashProduct(disagreement.to_vec()),
        params,
        starts,
    )
}

/// Samples `samples` perturbations of `profile` of radius `radius_frac · P̄_i`
/// per entry (clamped at zero, then scaled so no user's average power
/// grows) and returns the first one whose rates weakly dominate with some
/// user ahead by more than `tol`.
pub fn find_dominating<R: Rng + ?Sized>(
    game: &Game,
    profile: &PolicyProfile,
    samples: usize,
    radius_frac: f64,
    tol: f64,
    rng: &mut R,
) -> Result<Option<PolicyProfile>> {
    let flat = game.flatten(profile)?;
    let base: Vec<f64> = (0..game.n_users())
        .map(|i| game.rate_flat(i, &flat))
        .collect();
    for _ in 0..samples {
        let mut q = flat.clone();
        for i in 0..game.n_users() {
            let m = game.indexer().marginals(i);
            let r = radius_frac * game.model().budget(i);
            let range = game.user_range(i);
            for k in range.clone() {
                q[k] = (flat[k] + r * (2.0 * rng.gen::<f64>() - 1.0)).max(0.0);
            }
            let before: f64 = flat[range.clone()].iter().zip(m).map(|(a, b)| a * b).sum();
            let after: f64 = q[range.clone()].iter().zip(m).map(|(a, b)| a * b).sum();
            if after > before && after > 0.0 {
                let scale = before / after;
                q[range].iter_mut().for_each(|v| *v *= scale);
            }
        }
        let r: Vec<f64> = (0..game.n_users()).map(|i| game.rate_flat(i, &q)).collect();
        let weakly = r.iter().zip(&base).all(|(a, b)| *a >= *b - tol);
        let strictly = r.iter().zip(&base).any(|(a, b)| *a > *b + tol);
        if weakly && strictly {
            return Ok(Some(game.unflatten(&q)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelModel, GainDist, Variant};
    use crate::presets;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn social_values() {
        assert_eq!(
            social_value_of_rates(&[1.0, 1.0, 1.0], &SocialObjective::equal_weights(3)),
            3.0
        );
        let nb = SocialObjective::zero_disagreement(2);
        assert_eq!(social_value_of_rates(&[0.0, 2.0], &nb), 0.0);
        assert_eq!(
            social_value_of_rates(&[1.0, 2.0], &SocialObjective::NashProduct(vec![1.5, 0.0])),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn lagrangian_terms_vanish_at_budget() {
        let g = Game::new(presets::example2(10.0).unwrap(), Variant::Direct).unwrap();
        let p = policy::uniform_profile(&g);
        let obj = SocialObjective::equal_weights(3);
        let l = aug_lagrangian(&g, &p, &[0.3, -0.2, 1.0], &AugLagParams::default(), &obj).unwrap();
        let s = social_value(&g, &p, &obj).unwrap();
        assert!((l - s).abs() < 1e-12);
    }

    #[test]
    fn lagrangian_of_zero_profile_is_penalty() {
        let g = Game::new(presets::example1(2.0).unwrap(), Variant::Incident).unwrap();
        let z = policy::zero_profile(&g);
        let mut params = AugLagParams {
            normalize: false,
            ..AugLagParams::default()
        };
        let obj = SocialObjective::equal_weights(3);
        let l = aug_lagrangian(&g, &z, &[0.0; 3], &params, &obj).unwrap();
        assert!((l + params.penalty * 3.0 * 4.0).abs() < 1e-12);
        params.normalize = true;
        let l = aug_lagrangian(&g, &z, &[0.0; 3], &params, &obj).unwrap();
        assert!((l + params.penalty * 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_user_ascent_reaches_water_filling() {
        let m = ChannelModel::new(
            1,
            vec![GainDist::uniform(vec![0.3, 1.0, 2.0]).unwrap()],
            vec![3.0],
            vec![1.0],
        )
        .unwrap();
        let g = Game::new(m, Variant::Direct).unwrap();
        let start = Start {
            label: "u".into(),
            profile: policy::uniform_profile(&g),
        };
        let rep = solve_pareto(
            &g,
            &SocialObjective::equal_weights(1),
            &AugLagParams::default(),
            &[start],
        )
        .unwrap();
        assert!(rep.best.converged);
        let m0 = g.indexer().marginals(0);
        let used = policy::expected_power(rep.best.profile.values(0), m0).unwrap();
        assert!((used - 3.0).abs() / 3.0 < 1e-3);
        // water-filling at the power actually spent
        let base: Vec<f64> = [0.3, 1.0, 2.0].iter().map(|h| -1.0 / h).collect();
        let wf = policy::water_fill(&base, m0, used).unwrap();
        let opt = PolicyProfile::from_values(Variant::Direct, vec![wf.values]);
        let r_opt = rates::rate(&g, &opt, 0).unwrap();
        assert!(
            (rep.best.rates.rates[0] - r_opt).abs() < 1e-6,
            "{} vs {r_opt}",
            rep.best.rates.rates[0]
        );
    }

    #[test]
    fn ascent_from_stationary_point_returns_immediately() {
        let m = ChannelModel::new(
            1,
            vec![GainDist::constant(1.0).unwrap()],
            vec![2.0],
            vec![1.0],
        )
        .unwrap();
        let g = Game::new(m, Variant::Full).unwrap();
        // d/dP log(1+P) = 1/3 at P = 2, so d/dx with x = P/2 is 2/3
        let p = policy::uniform_profile(&g);
        let a = steepest_ascent(
            &g,
            &[2.0 / 3.0],
            &p,
            &AugLagParams::default(),
            &SocialObjective::equal_weights(1),
        )
        .unwrap();
        assert_eq!(a.rounds, 0);
        assert!(a.stationary);
    }

    #[test]
    fn committed_steps_never_decrease_lagrangian() {
        let g = Game::new(presets::example3(3.0).unwrap(), Variant::Direct).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = policy::random_feasible_profile(&g, &mut rng).unwrap();
        let lam = [0.1, 0.2];
        let obj = SocialObjective::equal_weights(2);
        let params = AugLagParams {
            max_rounds: 1,
            ..AugLagParams::default()
        };
        let mut prev = aug_lagrangian(&g, &p, &lam, &params, &obj).unwrap();
        for _ in 0..50 {
            let a = steepest_ascent(&g, &lam, &p, &params, &obj).unwrap();
            assert!(a.value >= prev - 1e-12);
            prev = a.value;
            p = a.profile;
        }
    }
}
