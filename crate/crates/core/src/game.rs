//! A channel model bound to an information structure.
//!
//! For every user `i` and every info-state `s` of `i`, the game stores the
//! list of *scenarios* that can occur: each scenario carries its probability
//! (including the marginal of `s`), the own effective gain `α_i |h_ii|²` and
//! the interference as a linear form in the opponents' policy entries. All
//! rates and gradients are sums over these tables.
//!
//! - Full: one scenario per joint state.
//! - Incident: the row of user `i` is fixed by `s`; the opponents' info-states
//!   (their own rows) are independent of it, so scenarios are the product of
//!   the opponents' info-state marginals.
//! - Direct: scenarios are products over opponents `j` of the cross gain
//!   `|h_ij|²` and the direct gain of `j`.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{
    build_indexer, enumerate_states, ChannelModel, InfoIndexer, StateSpace, Variant,
    DEFAULT_ENUMERATION_CAP,
};
use crate::error::{Error, Result};
use crate::math;
use crate::policy::PolicyProfile;

/// Probability, opponent info-state and cross-gain support index (when the
/// gain is not part of the opponent's info-state).
type OpponentCase = (f64, usize, Option<usize>);

#[derive(Debug, Clone, PartialEq)]
struct UserTable {
    /// `n_states + 1` offsets into the scenario arrays.
    state_offsets: Vec<usize>,
    prob: Vec<f64>,
    gain: Vec<f64>,
    /// `n_scenarios + 1` offsets into the term arrays.
    term_offsets: Vec<usize>,
    /// Flat profile index of the interfering entry.
    term_index: Vec<usize>,
    term_coeff: Vec<f64>,
}

impl UserTable {
    fn new(n_states: usize) -> Self {
        UserTable {
            state_offsets: Vec::with_capacity(n_states + 1),
            prob: Vec::new(),
            gain: Vec::new(),
            term_offsets: vec![0],
            term_index: Vec::new(),
            term_coeff: Vec::new(),
        }
    }

    fn push(&mut self, prob: f64, gain: f64, terms: impl IntoIterator<Item = (usize, f64)>) {
        self.prob.push(prob);
        self.gain.push(gain);
        for (idx, c) in terms {
            if c != 0.0 {
                self.term_index.push(idx);
                self.term_coeff.push(c);
            }
        }
        self.term_offsets.push(self.term_index.len());
    }

    #[inline]
    fn interference(&self, q: usize, flat: &[f64]) -> f64 {
        let (a, b) = (self.term_offsets[q], self.term_offsets[q + 1]);
        self.term_index[a..b]
            .iter()
            .zip(&self.term_coeff[a..b])
            .map(|(&k, &c)| c * flat[k])
            .sum()
    }
}

/// A channel model, its enumerated states, an information structure and the
/// derived scenario tables. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    model: ChannelModel,
    space: StateSpace,
    variant: Variant,
    indexer: InfoIndexer,
    offsets: Vec<usize>,
    tables: Vec<UserTable>,
}

impl Game {
    pub fn new(model: ChannelModel, variant: Variant) -> Result<Self> {
        Game::with_cap(model, variant, DEFAULT_ENUMERATION_CAP)
    }

    /// `cap` bounds both the joint-state enumeration and the per-user
    /// scenario count.
    pub fn with_cap(model: ChannelModel, variant: Variant, cap: usize) -> Result<Self> {
        let space = enumerate_states(&model, cap)?;
        let indexer = build_indexer(&model, &space, variant);
        let n = model.n_users();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + indexer.n_states(i));
        }
        let mut game = Game {
            model,
            space,
            variant,
            indexer,
            offsets,
            tables: Vec::new(),
        };
        game.tables = (0..n)
            .map(|i| game.build_table(i, cap))
            .collect::<Result<_>>()?;
        Ok(game)
    }

    fn build_table(&self, i: usize, cap: usize) -> Result<UserTable> {
        let n = self.n_users();
        let ns = self.indexer.n_states(i);
        let alpha = self.model.alpha(i);
        let mut t = UserTable::new(ns);
        match self.variant {
            Variant::Full => {
                for (k, st) in self.space.states().iter().enumerate() {
                    t.state_offsets.push(t.prob.len());
                    let terms = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| (self.offsets[j] + k, st.gain(n, i, j)));
                    t.push(st.prob, alpha * st.gain(n, i, i), terms);
                }
            }
            Variant::Incident | Variant::Direct => {
                // per opponent: list of (prob, info-state of j, cross-gain support index)
                let choices: Vec<(usize, Vec<OpponentCase>)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let list = match self.variant {
                            Variant::Incident => self
                                .indexer
                                .marginals(j)
                                .iter()
                                .enumerate()
                                .map(|(s, &p)| (p, s, None))
                                .collect(),
                            _ => {
                                let cross = self.model.link(i, j);
                                let mut v = Vec::new();
                                for (c, &pc) in cross.probs().iter().enumerate() {
                                    for (s, &pd) in self.indexer.marginals(j).iter().enumerate() {
                                        v.push((pc * pd, s, Some(c)));
                                    }
                                }
                                v
                            }
                        };
                        (j, list)
                    })
                    .collect();
                let per_state: u128 = choices
                    .iter()
                    .fold(1u128, |acc, (_, l)| acc.saturating_mul(l.len() as u128));
                let total = per_state.saturating_mul(ns as u128);
                if total > cap as u128 {
                    return Err(Error::EnumerationTooLarge { count: total, cap });
                }
                for s in 0..ns {
                    t.state_offsets.push(t.prob.len());
                    let rep = &self.space.states()[self.indexer.representative(i, s)];
                    let own_gain = alpha * rep.gain(n, i, i);
                    let ms = self.indexer.marginals(i)[s];
                    let mut pick = vec![0usize; choices.len()];
                    loop {
                        let mut prob = ms;
                        let mut terms = Vec::with_capacity(choices.len());
                        for ((j, list), &c) in choices.iter().zip(&pick) {
                            let (p, sj, cross) = list[c];
                            prob *= p;
                            let coeff = match cross {
                                Some(ci) => self.model.link(i, *j).values()[ci],
                                None => rep.gain(n, i, *j),
                            };
                            terms.push((self.offsets[*j] + sj, coeff));
                        }
                        t.push(prob, own_gain, terms);
                        let mut pos = choices.len();
                        let done = loop {
                            if pos == 0 {
                                break true;
                            }
                            pos -= 1;
                            pick[pos] += 1;
                            if pick[pos] < choices[pos].1.len() {
                                break false;
                            }
                            pick[pos] = 0;
                        };
                        if done {
                            break;
                        }
                    }
                }
            }
        }
        t.state_offsets.push(t.prob.len());
        Ok(t)
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn indexer(&self) -> &InfoIndexer {
        &self.indexer
    }

    pub fn n_users(&self) -> usize {
        self.model.n_users()
    }

    /// Total number of policy entries over all users.
    pub fn dim(&self) -> usize {
        self.offsets[self.n_users()]
    }

    /// Position of user `i`'s first entry in the flat layout.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn user_range(&self, i: usize) -> core::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Number of scenarios behind the rate of user `i`.
    pub fn scenario_count(&self, i: usize) -> usize {
        self.tables[i].prob.len()
    }

    /// Checks the profile against this game and returns its flat form.
    pub fn flatten(&self, profile: &PolicyProfile) -> Result<Vec<f64>> {
        self.check(profile)?;
        Ok(profile.flatten())
    }

    pub fn check(&self, profile: &PolicyProfile) -> Result<()> {
        if profile.variant != self.variant {
            return Err(Error::VariantMismatch {
                expected: self.variant,
                got: profile.variant,
            });
        }
        if profile.n_users() != self.n_users() {
            return Err(Error::DimensionMismatch {
                expected: self.n_users(),
                got: profile.n_users(),
            });
        }
        for i in 0..self.n_users() {
            let got = profile.values(i).len();
            if got != self.indexer.n_states(i) {
                return Err(Error::DimensionMismatch {
                    expected: self.indexer.n_states(i),
                    got,
                });
            }
        }
        Ok(())
    }

    pub fn unflatten(&self, flat: &[f64]) -> PolicyProfile {
        let values = (0..self.n_users())
            .map(|i| flat[self.user_range(i)].to_vec())
            .collect();
        PolicyProfile::from_values(self.variant, values)
    }

    /// Full-information profile that plays `P_i(s_i(h))` in joint state `h`.
    pub fn lift(&self, profile: &PolicyProfile) -> Result<PolicyProfile> {
        self.check(profile)?;
        let values = (0..self.n_users())
            .map(|i| {
                self.indexer
                    .map(i)
                    .iter()
                    .map(|&s| profile.get(i, s))
                    .collect()
            })
            .collect();
        Ok(PolicyProfile::from_values(Variant::Full, values))
    }

    /// Expected rate of user `i` in nats.
    pub(crate) fn rate_flat(&self, i: usize, flat: &[f64]) -> f64 {
        let t = &self.tables[i];
        let own = &flat[self.user_range(i)];
        let mut acc = 0.0;
        for (s, &p) in own.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for q in t.state_offsets[s]..t.state_offsets[s + 1] {
                let interference = t.interference(q, flat);
                acc += t.prob[q] * math::ln_1p(t.gain[q] * p / (1.0 + interference));
            }
        }
        acc
    }

    /// `∂r_i / ∂P_i(s)` for every info-state `s`.
    pub(crate) fn own_grad_flat(&self, i: usize, flat: &[f64]) -> Vec<f64> {
        let t = &self.tables[i];
        let own = &flat[self.user_range(i)];
        own.iter()
            .enumerate()
            .map(|(s, &p)| {
                (t.state_offsets[s]..t.state_offsets[s + 1])
                    .map(|q| {
                        let g = t.gain[q];
                        t.prob[q] * g / (1.0 + t.interference(q, flat) + g * p)
                    })
                    .sum()
            })
            .collect()
    }

    /// Adds `w · ∇r_i` (over all users' entries) into `out`.
    pub(crate) fn add_full_grad(&self, i: usize, w: f64, flat: &[f64], out: &mut [f64]) {
        let t = &self.tables[i];
        let base = self.offsets[i];
        let own = &flat[self.user_range(i)];
        for (s, &p) in own.iter().enumerate() {
            for q in t.state_offsets[s]..t.state_offsets[s + 1] {
                let g = t.gain[q];
                let one_i = 1.0 + t.interference(q, flat);
                let den = one_i + g * p;
                out[base + s] += w * t.prob[q] * g / den;
                if p != 0.0 {
                    // d/dI log(1 + gP/(1+I)) = -gP / ((1+I)(1+I+gP))
                    let d_i = -g * p / (one_i * den);
                    for k in t.term_offsets[q]..t.term_offsets[q + 1] {
                        out[t.term_index[k]] += w * t.prob[q] * t.term_coeff[k] * d_i;
                    }
                }
            }
        }
    }

    /// Scenario list of info-state `s` of user `i` as
    /// `(probability, own gain, interference)` under `flat`.
    pub(crate) fn scenarios(&self, i: usize, s: usize, flat: &[f64]) -> Vec<(f64, f64, f64)> {
        let t = &self.tables[i];
        (t.state_offsets[s]..t.state_offsets[s + 1])
            .map(|q| (t.prob[q], t.gain[q], t.interference(q, flat)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn scenario_probabilities_sum_to_one() {
        for v in Variant::ALL {
            for m in [
                presets::example1(1.0).unwrap(),
                presets::example3(1.0).unwrap(),
            ] {
                let g = Game::new(m, v).unwrap();
                for i in 0..g.n_users() {
                    let total: f64 = g.tables[i].prob.iter().sum();
                    assert!((total - 1.0).abs() < 1e-12, "{v} user {i}: {total}");
                }
            }
        }
    }

    #[test]
    fn scenario_counts() {
        let m = presets::example1(1.0).unwrap();
        assert_eq!(
            Game::new(m.clone(), Variant::Full)
                .unwrap()
                .scenario_count(0),
            512
        );
        assert_eq!(
            Game::new(m.clone(), Variant::Incident)
                .unwrap()
                .scenario_count(0),
            8 * 64
        );
        assert_eq!(
            Game::new(m, Variant::Direct).unwrap().scenario_count(0),
            2 * 16
        );
    }

    #[test]
    fn incident_tables_match_joint_count() {
        // the incident table is a reordering of the joint states
        let m = presets::example3(1.0).unwrap();
        let g = Game::new(m, Variant::Incident).unwrap();
        assert_eq!(g.scenario_count(0), g.space().len());
        assert_eq!(g.scenario_count(1), g.space().len());
    }

    #[test]
    fn lift_is_constant_on_fibers() {
        let m = presets::example1(1.0).unwrap();
        let g = Game::new(m, Variant::Direct).unwrap();
        let p = PolicyProfile::from_values(Variant::Direct, vec![vec![0.5, 1.5]; 3]);
        let l = g.lift(&p).unwrap();
        for (k, st) in g.space().states().iter().enumerate() {
            let expect = if st.gain(3, 1, 1) == 1.0 { 1.5 } else { 0.5 };
            assert_eq!(l.get(1, k), expect);
        }
    }
}
