//! Expected rates, their gradients and the Jensen lower bounds.
//!
//! Rates are computed in nats. [`LogBase`] only rescales reported values.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::channel::Variant;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::math;
use crate::policy::{self, PolicyProfile, PowerPolicy};

/// Logarithm base used when reporting rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    /// Nats.
    #[default]
    E,
    /// Bits.
    Two,
}

impl LogBase {
    /// Factor converting nats into this base.
    pub fn scale(self) -> f64 {
        match self {
            LogBase::E => 1.0,
            LogBase::Two => core::f64::consts::LOG2_E,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LogBase::E => "e",
            LogBase::Two => "2",
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "e" | "E" | "nat" | "nats" => Ok(LogBase::E),
            "2" | "bit" | "bits" => Ok(LogBase::Two),
            other => Err(Error::InvalidParam(alloc::format!(
                "unknown log base `{other}`"
            ))),
        }
    }
}

/// Per-user expected rates and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rates: Vec<f64>,
    pub sum: f64,
    pub base: LogBase,
}

impl RateReport {
    pub fn from_nats(nats: Vec<f64>, base: LogBase) -> Self {
        let rates: Vec<f64> = nats.into_iter().map(|r| r * base.scale()).collect();
        let sum = rates.iter().sum();
        RateReport { rates, sum, base }
    }

    pub fn in_base(&self, base: LogBase) -> RateReport {
        let nats = self.rates.iter().map(|r| r / self.base.scale()).collect();
        RateReport::from_nats(nats, base)
    }

    pub fn spread(&self) -> f64 {
        let max = self.rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.rates.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

fn expect_variant(game: &Game, profile: &PolicyProfile, v: Variant) -> Result<()> {
    if game.variant() != v {
        return Err(Error::VariantMismatch {
            expected: v,
            got: game.variant(),
        });
    }
    game.check(profile)
}

/// Expected rate of user `i` in nats under the game's information structure.
pub fn rate(game: &Game, profile: &PolicyProfile, i: usize) -> Result<f64> {
    let flat = game.flatten(profile)?;
    Ok(game.rate_flat(i, &flat))
}

pub fn rate_full(game: &Game, profile: &PolicyProfile, i: usize) -> Result<f64> {
    expect_variant(game, profile, Variant::Full)?;
    rate(game, profile, i)
}

pub fn rate_incident(game: &Game, profile: &PolicyProfile, i: usize) -> Result<f64> {
    expect_variant(game, profile, Variant::Incident)?;
    rate(game, profile, i)
}

pub fn rate_direct(game: &Game, profile: &PolicyProfile, i: usize) -> Result<f64> {
    expect_variant(game, profile, Variant::Direct)?;
    rate(game, profile, i)
}

/// Rates of all users.
pub fn rates(game: &Game, profile: &PolicyProfile, base: LogBase) -> Result<RateReport> {
    let flat = game.flatten(profile)?;
    let nats = (0..game.n_users())
        .map(|i| game.rate_flat(i, &flat))
        .collect();
    Ok(RateReport::from_nats(nats, base))
}

/// `∂r_i / ∂P_i(s)` over user `i`'s info-states.
pub fn grad_rate(game: &Game, profile: &PolicyProfile, i: usize) -> Result<Vec<f64>> {
    let flat = game.flatten(profile)?;
    Ok(game.own_grad_flat(i, &flat))
}

/// Gradient of `Σ_i w_i r_i` with respect to every policy entry, in the
/// flat user-major layout.
pub fn weighted_sum_gradient(
    game: &Game,
    profile: &PolicyProfile,
    weights: &[f64],
) -> Result<Vec<f64>> {
    let flat = game.flatten(profile)?;
    Ok(weighted_gradient_flat(game, &flat, weights))
}

pub(crate) fn weighted_gradient_flat(game: &Game, flat: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; game.dim()];
    for (i, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            game.add_full_grad(i, w, flat, &mut out);
        }
    }
    out
}

/// Interference each info-state of user `i` sees when every opponent
/// transmits at its budget (mean cross gain for the direct game).
fn bound_interference(game: &Game, i: usize) -> Result<Vec<f64>> {
    let model = game.model();
    let n = model.n_users();
    let ix = game.indexer();
    match game.variant() {
        Variant::Full => Err(Error::NoLowerBound),
        Variant::Incident => Ok((0..ix.n_states(i))
            .map(|s| {
                let st = &game.space().states()[ix.representative(i, s)];
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| st.gain(n, i, j) * model.budget(j))
                    .sum()
            })
            .collect()),
        Variant::Direct => {
            let eff: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| model.link(i, j).mean() * model.budget(j))
                .sum();
            Ok(vec![eff; ix.n_states(i)])
        }
    }
}

fn own_gains(game: &Game, i: usize) -> Vec<f64> {
    let n = game.n_users();
    let ix = game.indexer();
    (0..ix.n_states(i))
        .map(|s| {
            game.model().alpha(i) * game.space().states()[ix.representative(i, s)].gain(n, i, i)
        })
        .collect()
}

/// Jensen lower bound on user `i`'s rate for `values`, valid whenever every
/// opponent meets its budget. Defined for the incident and direct games.
pub fn lower_bound_rate(game: &Game, i: usize, values: &[f64]) -> Result<f64> {
    let interference = bound_interference(game, i)?;
    let m = game.indexer().marginals(i);
    if values.len() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: m.len(),
            got: values.len(),
        });
    }
    let gains = own_gains(game, i);
    Ok((0..m.len())
        .map(|s| m[s] * math::ln_1p(gains[s] * values[s] / (1.0 + interference[s])))
        .sum())
}

/// Water-filling policy maximizing [`lower_bound_rate`].
pub fn lower_bound_maximizer(game: &Game, i: usize) -> Result<PowerPolicy> {
    let interference = bound_interference(game, i)?;
    let gains = own_gains(game, i);
    let base: Vec<f64> = gains
        .iter()
        .zip(&interference)
        .map(|(g, e)| -(1.0 + e) / g)
        .collect();
    let wf = policy::water_fill(&base, game.indexer().marginals(i), game.model().budget(i))?;
    Ok(PowerPolicy::new(i, game.variant(), wf.values))
}
