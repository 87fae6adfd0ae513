//! Repeated direct-gain game with quantized powers and interference beliefs.
//!
//! Each user keeps a smoothed empirical distribution of the interference its
//! receiver has seen and best-responds to it over its finite set of feasible
//! level assignments.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelModel, Variant, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::math;
use crate::policy::PolicyProfile;
use crate::rates::{LogBase, RateReport};

/// Interference levels are identified after rounding to this many decimals.
pub const SUPPORT_DECIMALS: i32 = 9;

/// Nearest-point tolerance when matching an observation to the support.
pub const MATCH_TOL: f64 = 1e-6;

/// Slack on the average-power constraint of a strategy.
pub const BUDGET_SLACK: f64 = 1e-12;

fn round_support(x: f64) -> f64 {
    let k = math::powf(10.0, SUPPORT_DECIMALS as f64);
    math::round(x * k) / k
}

/// Allowed transmit powers of every user.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLevels {
    per_user: Vec<Vec<f64>>,
}

impl PowerLevels {
    /// Each list must be finite, strictly increasing and start at 0.
    pub fn new(per_user: Vec<Vec<f64>>) -> Result<Self> {
        for (i, l) in per_user.iter().enumerate() {
            if l.first() != Some(&0.0) {
                return Err(Error::InvalidParam(alloc::format!(
                    "levels of user {i} must start at 0"
                )));
            }
            if l.iter().any(|x| !x.is_finite()) || l.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParam(alloc::format!(
                    "levels of user {i} must be finite and strictly increasing"
                )));
            }
        }
        Ok(PowerLevels { per_user })
    }

    pub fn uniform(n_users: usize, levels: Vec<f64>) -> Result<Self> {
        Self::new(vec![levels; n_users])
    }

    pub fn n_users(&self) -> usize {
        self.per_user.len()
    }

    pub fn user(&self, i: usize) -> &[f64] {
        &self.per_user[i]
    }
}

/// One level index per direct-gain state of a user.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscreteStrategy {
    pub user: usize,
    pub choice: Vec<usize>,
}

impl DiscreteStrategy {
    pub fn powers(&self, levels: &[f64]) -> Vec<f64> {
        self.choice.iter().map(|&l| levels[l]).collect()
    }

    pub fn average_power(&self, levels: &[f64], marginals: &[f64]) -> f64 {
        self.choice
            .iter()
            .zip(marginals)
            .map(|(&l, m)| m * levels[l])
            .sum()
    }
}

/// Every level assignment over the states with `marginals` whose average
/// power is within the budget, in lexicographic order of `choice`.
pub fn enumerate_strategies(
    user: usize,
    levels: &[f64],
    marginals: &[f64],
    budget: f64,
    cap: usize,
) -> Result<Vec<DiscreteStrategy>> {
    let m = levels.len();
    let n = marginals.len();
    let count = (0..n)
        .try_fold(1u128, |acc, _| acc.checked_mul(m as u128))
        .unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; n];
    loop {
        let used: f64 = choice
            .iter()
            .zip(marginals)
            .map(|(&l, p)| p * levels[l])
            .sum();
        if used <= budget + BUDGET_SLACK {
            out.push(DiscreteStrategy {
                user,
                choice: choice.clone(),
            });
        }
        // odometer with the last state fastest
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < m {
                break;
            }
            choice[k] = 0;
        }
    }
}

/// Distinct values of `Σ_{j≠i} h_ij p_j` over every cross gain in the
/// support and every level of each opponent, sorted.
pub fn interference_support(
    model: &ChannelModel,
    levels: &PowerLevels,
    i: usize,
    cap: usize,
) -> Result<Vec<f64>> {
    let n = model.n_users();
    if levels.n_users() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: levels.n_users(),
        });
    }
    let mut count: u128 = 1;
    for j in (0..n).filter(|&j| j != i) {
        count = count.saturating_mul((model.link(i, j).len() * levels.user(j).len()) as u128);
    }
    if count > cap as u128 {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let mut acc = vec![0.0];
    for j in (0..n).filter(|&j| j != i) {
        let mut terms: Vec<f64> = Vec::new();
        for h in model.link(i, j).values() {
            for p in levels.user(j) {
                terms.push(h * p);
            }
        }
        acc = acc
            .iter()
            .flat_map(|a| terms.iter().map(move |t| a + t))
            .collect();
    }
    let mut support: Vec<f64> = acc.into_iter().map(round_support).collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    Ok(support)
}

/// Laplace-smoothed empirical distribution over a fixed interference support.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    support: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
    smoothing: f64,
}

impl Belief {
    pub fn new(support: Vec<f64>, smoothing: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidParam("belief support is empty".into()));
        }
        if !(smoothing.is_finite() && smoothing > 0.0) {
            return Err(Error::InvalidParam(alloc::format!(
                "smoothing must be positive, got {smoothing}"
            )));
        }
        let counts = vec![0; support.len()];
        Ok(Belief {
            support,
            counts,
            total: 0,
            smoothing,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// `(T(I) + d) / (T + |support| d)`.
    pub fn mass(&self, k: usize) -> f64 {
        (self.counts[k] as f64 + self.smoothing)
            / (self.total as f64 + self.support.len() as f64 * self.smoothing)
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.support.len()).map(|k| self.mass(k)).collect()
    }

    /// Index of the support point matching `value`.
    pub fn locate(&self, value: f64) -> Option<usize> {
        let v = round_support(value);
        let k = self.support.partition_point(|s| *s < v);
        [k.checked_sub(1), Some(k)]
            .into_iter()
            .flatten()
            .filter(|&c| c < self.support.len())
            .min_by(|&a, &b| {
                (self.support[a] - v)
                    .abs()
                    .total_cmp(&(self.support[b] - v).abs())
            })
            .filter(|&c| (self.support[c] - v).abs() <= MATCH_TOL)
    }

    /// Records one observation; the user index is only used in the error.
    pub fn observe(&mut self, user: usize, value: f64) -> Result<()> {
        let k = self
            .locate(value)
            .ok_or(Error::OutsideSupport { user, value })?;
        self.counts[k] += 1;
        self.total += 1;
        Ok(())
    }
}

/// Returns `belief` with one more observation of `value`.
pub fn update_belief(belief: &Belief, user: usize, value: f64) -> Result<Belief> {
    let mut b = belief.clone();
    b.observe(user, value)?;
    Ok(b)
}

/// Expected utility of transmitting `p` in each direct state under `belief`:
/// `table[s][l]` for level `l`.
fn utility_table(belief: &Belief, model: &ChannelModel, i: usize, levels: &[f64]) -> Vec<Vec<f64>> {
    let phi = belief.masses();
    let alpha = model.alpha(i);
    model
        .direct(i)
        .values()
        .iter()
        .map(|g| {
            levels
                .iter()
                .map(|p| {
                    belief
                        .support()
                        .iter()
                        .zip(&phi)
                        .map(|(interf, w)| w * math::ln_1p(alpha * g * p / (1.0 + interf)))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Index into `strategies` maximizing the expected rate under `belief`;
/// ties go to the lowest index.
pub fn best_response_to_belief(
    belief: &Belief,
    model: &ChannelModel,
    i: usize,
    levels: &[f64],
    strategies: &[DiscreteStrategy],
) -> Result<usize> {
    if strategies.is_empty() {
        return Err(Error::EmptyStrategySet);
    }
    let table = utility_table(belief, model, i, levels);
    let probs = model.direct(i).probs();
    let value = |st: &DiscreteStrategy| -> f64 {
        st.choice
            .iter()
            .enumerate()
            .map(|(s, &l)| probs[s] * table[s][l])
            .sum()
    };
    let mut best = (0, value(&strategies[0]));
    for (k, st) in strategies.iter().enumerate().skip(1) {
        let v = value(st);
        if v > best.1 {
            best = (k, v);
        }
    }
    Ok(best.0)
}

/// Exact per-user rates and best unilateral improvement over each user's
/// feasible strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonReport {
    pub rates: Vec<f64>,
    pub improvements: Vec<f64>,
    pub epsilon: f64,
    pub passed: bool,
}

fn profile_of(levels: &PowerLevels, strategies: &[DiscreteStrategy]) -> PolicyProfile {
    let values = strategies
        .iter()
        .enumerate()
        .map(|(i, s)| s.powers(levels.user(i)))
        .collect();
    PolicyProfile::from_values(Variant::Direct, values)
}

/// Checks whether `strategies` is an ε-equilibrium of the direct-gain game
/// restricted to the feasible strategy sets `sets`.
pub fn epsilon_ne_check(
    game: &Game,
    levels: &PowerLevels,
    sets: &[Vec<DiscreteStrategy>],
    strategies: &[DiscreteStrategy],
    epsilon: f64,
) -> Result<EpsilonReport> {
    if game.variant() != Variant::Direct {
        return Err(Error::VariantMismatch {
            expected: Variant::Direct,
            got: game.variant(),
        });
    }
    let n = game.n_users();
    if strategies.len() != n || sets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: strategies.len().min(sets.len()),
        });
    }
    let profile = profile_of(levels, strategies);
    let mut flat = game.flatten(&profile)?;
    let rates: Vec<f64> = (0..n).map(|i| game.rate_flat(i, &flat)).collect();
    let mut improvements = vec![0.0; n];
    for i in 0..n {
        let range = game.user_range(i);
        let own = flat[range.clone()].to_vec();
        let mut best = rates[i];
        for alt in &sets[i] {
            for (k, p) in range.clone().zip(alt.powers(levels.user(i))) {
                flat[k] = p;
            }
            best = best.max(game.rate_flat(i, &flat));
        }
        flat[range].copy_from_slice(&own);
        improvements[i] = best - rates[i];
    }
    let passed = improvements.iter().all(|d| *d <= epsilon);
    Ok(EpsilonReport {
        rates,
        improvements,
        epsilon,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningParams {
    /// Laplace smoothing `d`.
    pub smoothing: f64,
    pub epsilon: f64,
    pub max_slots: usize,
    /// Strategies must be unchanged for this many slots before a check.
    pub window: usize,
    /// Best responses are recomputed every `epoch` slots.
    pub epoch: usize,
    /// Keep per-slot records in the trace.
    pub record_slots: bool,
    pub cap: usize,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            smoothing: 1.0,
            epsilon: 0.05,
            max_slots: 50_000,
            window: 500,
            epoch: 1,
            record_slots: true,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing.is_finite() && self.smoothing > 0.0) {
            return Err(Error::InvalidParam("smoothing must be positive".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParam("epsilon must be nonnegative".into()));
        }
        if self.max_slots == 0 || self.window == 0 || self.epoch == 0 {
            return Err(Error::InvalidParam("slot counts must be positive".into()));
        }
        Ok(())
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    /// Direct-gain state of each user.
    pub states: Vec<usize>,
    pub powers: Vec<f64>,
    pub interference: Vec<f64>,
}

/// A user switching strategy after a belief update.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyChange {
    pub slot: usize,
    pub user: usize,
    pub strategy: DiscreteStrategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningTrace {
    pub slots: Vec<SlotRecord>,
    pub changes: Vec<StrategyChange>,
    /// Every ε check run, with the slot it ran at.
    pub checks: Vec<(usize, EpsilonReport)>,
    pub strategies: Vec<DiscreteStrategy>,
    pub beliefs: Vec<Belief>,
    pub slots_played: usize,
    pub converged: bool,
    pub rates: RateReport,
    /// Strategies whose average power meets the budget, per user.
    pub feasible_counts: Vec<usize>,
}

/// Plays the repeated game from beliefs at the prior until strategies have
/// been stable for a window and pass the ε check, or the slot cap is hit.
pub fn simulate(
    model: &ChannelModel,
    levels: &PowerLevels,
    params: &LearningParams,
    seed: u64,
) -> Result<LearningTrace> {
    params.validate()?;
    let n = model.n_users();
    if levels.n_users() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: levels.n_users(),
        });
    }
    let game = Game::with_cap(model.clone(), Variant::Direct, params.cap)?;
    let sets: Vec<Vec<DiscreteStrategy>> = (0..n)
        .map(|i| {
            enumerate_strategies(
                i,
                levels.user(i),
                model.direct(i).probs(),
                model.budget(i),
                params.cap,
            )
        })
        .collect::<Result<_>>()?;
    let mut beliefs: Vec<Belief> = (0..n)
        .map(|i| {
            Belief::new(
                interference_support(model, levels, i, params.cap)?,
                params.smoothing,
            )
        })
        .collect::<Result<_>>()?;
    let mut current: Vec<usize> = (0..n)
        .map(|i| best_response_to_belief(&beliefs[i], model, i, levels.user(i), &sets[i]))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace_slots = Vec::new();
    let mut changes = Vec::new();
    let mut checks = Vec::new();
    let mut last_change = 0;
    let mut next_check = params.window;
    let mut converged = false;
    let mut slot = 0;
    let mut link_idx = vec![0usize; n * n];
    while slot < params.max_slots {
        slot += 1;
        for (k, idx) in link_idx.iter_mut().enumerate() {
            *idx = model.links()[k].sample_index(rng.gen::<f64>());
        }
        let states: Vec<usize> = (0..n).map(|i| link_idx[i * n + i]).collect();
        let powers: Vec<f64> = (0..n)
            .map(|i| levels.user(i)[sets[i][current[i]].choice[states[i]]])
            .collect();
        let interference: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| model.link(i, j).values()[link_idx[i * n + j]] * powers[j])
                    .sum()
            })
            .collect();
        for (i, b) in beliefs.iter_mut().enumerate() {
            b.observe(i, interference[i])?;
        }
        if params.record_slots {
            trace_slots.push(SlotRecord {
                slot,
                states,
                powers,
                interference,
            });
        }
        if slot % params.epoch == 0 {
            for i in 0..n {
                let br = best_response_to_belief(&beliefs[i], model, i, levels.user(i), &sets[i])?;
                if br != current[i] {
                    current[i] = br;
                    last_change = slot;
                    next_check = slot + params.window;
                    changes.push(StrategyChange {
                        slot,
                        user: i,
                        strategy: sets[i][br].clone(),
                    });
                }
            }
        }
        if slot >= next_check && slot - last_change >= params.window {
            let strategies: Vec<DiscreteStrategy> =
                (0..n).map(|i| sets[i][current[i]].clone()).collect();
            let report = epsilon_ne_check(&game, levels, &sets, &strategies, params.epsilon)?;
            let passed = report.passed;
            checks.push((slot, report));
            if passed {
                converged = true;
                break;
            }
            next_check = slot + params.window;
        }
    }
    let strategies: Vec<DiscreteStrategy> = (0..n).map(|i| sets[i][current[i]].clone()).collect();
    let profile = profile_of(levels, &strategies);
    let flat = game.flatten(&profile)?;
    let rates = RateReport::from_nats(
        (0..n).map(|i| game.rate_flat(i, &flat)).collect(),
        LogBase::E,
    );
    Ok(LearningTrace {
        slots: trace_slots,
        changes,
        checks,
        strategies,
        beliefs,
        slots_played: slot,
        converged,
        rates,
        feasible_counts: sets.iter().map(Vec::len).collect(),
    })
}
