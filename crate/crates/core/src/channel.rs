//! Finite-state fading interference channel.
//!
//! Gains are stored as power gains `|h_ij|^2`. Link `(i, j)` carries the gain
//! from transmitter `j` into receiver `i`; `(i, i)` is the direct link of user
//! `i`. Every link has its own finite distribution and links are independent.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Default cap on the number of enumerated joint states (and on any other
/// exhaustive enumeration in the crate).
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

const PROB_TOL: f64 = 1e-12;

/// Information structure of the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Every transmitter knows the whole gain matrix.
    Full,
    /// Transmitter `i` knows the row of gains incident on receiver `i`.
    Incident,
    /// Transmitter `i` knows only its direct gain.
    Direct,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::Incident, Variant::Direct];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Incident => "incident",
            Variant::Direct => "direct",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" | "a" | "g_a" => Ok(Variant::Full),
            "incident" | "i" | "g_i" => Ok(Variant::Incident),
            "direct" | "d" | "g_d" => Ok(Variant::Direct),
            other => Err(Error::UnknownVariant(other.to_string())),
        }
    }
}

/// A finite distribution of power gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDist {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl GainDist {
    /// Support points with zero probability are dropped.
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidModel(format!(
                "gain distribution needs matching non-empty supports, got {} values and {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if values.iter().chain(&probs).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidModel(format!("negative gain {v}")));
        }
        if let Some(p) = probs.iter().find(|p| **p < 0.0) {
            return Err(Error::InvalidModel(format!("negative probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidModel(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let (values, probs) = values
            .into_iter()
            .zip(probs)
            .filter(|(_, p)| *p > 0.0)
            .unzip();
        Ok(GainDist { values, probs })
    }

    /// Equiprobable support.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len().max(1);
        let probs = vec![1.0 / n as f64; values.len()];
        GainDist::new(values, probs)
    }

    pub fn constant(value: f64) -> Result<Self> {
        GainDist::new(vec![value], vec![1.0])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }

    /// Index of the support point whose cumulative probability first
    /// exceeds `u` (inverse-CDF sampling for `u` in `[0, 1)`).
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.probs.len() - 1
    }
}

/// N transmitter-receiver pairs with independent finite link distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    n_users: usize,
    links: Vec<GainDist>,
    budgets: Vec<f64>,
    alpha: Vec<f64>,
}

impl ChannelModel {
    /// `links` is the row-major `n × n` array of link distributions; entry
    /// `i * n + j` is the gain from transmitter `j` into receiver `i`.
    pub fn new(
        n_users: usize,
        links: Vec<GainDist>,
        budgets: Vec<f64>,
        alpha: Vec<f64>,
    ) -> Result<Self> {
        if n_users == 0 {
            return Err(Error::InvalidModel(
                "model needs at least one user".to_string(),
            ));
        }
        if links.len() != n_users * n_users {
            return Err(Error::DimensionMismatch {
                expected: n_users * n_users,
                got: links.len(),
            });
        }
        if budgets.len() != n_users {
            return Err(Error::DimensionMismatch {
                expected: n_users,
                got: budgets.len(),
            });
        }
        if alpha.len() != n_users {
            return Err(Error::DimensionMismatch {
                expected: n_users,
                got: alpha.len(),
            });
        }
        for (i, b) in budgets.iter().enumerate() {
            if !(b.is_finite() && *b > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "budget of user {i} must be positive, got {b}"
                )));
            }
        }
        for (i, a) in alpha.iter().enumerate() {
            if !(a.is_finite() && *a > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "alpha of user {i} must be positive, got {a}"
                )));
            }
        }
        for i in 0..n_users {
            let d = &links[i * n_users + i];
            if d.values().iter().any(|g| *g <= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "direct gains of user {i} must be strictly positive"
                )));
            }
        }
        Ok(ChannelModel {
            n_users,
            links,
            budgets,
            alpha,
        })
    }

    /// Same direct distribution for every user and same cross distribution
    /// for every interfering link.
    pub fn symmetric(
        n_users: usize,
        direct: GainDist,
        cross: GainDist,
        budget: f64,
    ) -> Result<Self> {
        let links = (0..n_users * n_users)
            .map(|k| {
                if k / n_users == k % n_users {
                    direct.clone()
                } else {
                    cross.clone()
                }
            })
            .collect();
        ChannelModel::new(n_users, links, vec![budget; n_users], vec![1.0; n_users])
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn link(&self, i: usize, j: usize) -> &GainDist {
        &self.links[i * self.n_users + j]
    }

    pub fn direct(&self, i: usize) -> &GainDist {
        self.link(i, i)
    }

    pub fn links(&self) -> &[GainDist] {
        &self.links
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn budget(&self, i: usize) -> f64 {
        self.budgets[i]
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alpha[i]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn with_budgets(&self, budgets: Vec<f64>) -> Result<Self> {
        ChannelModel::new(
            self.n_users,
            self.links.clone(),
            budgets,
            self.alpha.clone(),
        )
    }

    pub fn with_uniform_budget(&self, budget: f64) -> Result<Self> {
        self.with_budgets(vec![budget; self.n_users])
    }

    /// Number of joint channel states, saturating.
    pub fn state_count(&self) -> u128 {
        self.links
            .iter()
            .fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128))
    }
}

/// One realization of the full gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    /// Row-major `n × n` power gains.
    pub gains: Vec<f64>,
    pub prob: f64,
    /// Support index of every link, row-major.
    pub support: Vec<usize>,
}

impl JointState {
    pub fn gain(&self, n: usize, i: usize, j: usize) -> f64 {
        self.gains[i * n + j]
    }
}

/// The materialized list of joint states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    n_users: usize,
    states: Vec<JointState>,
}

impl StateSpace {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn states(&self) -> &[JointState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_prob(&self) -> f64 {
        self.states.iter().map(|s| s.prob).sum()
    }
}

/// Cartesian product over all link supports, last link varying fastest.
pub fn enumerate_states(model: &ChannelModel, cap: usize) -> Result<StateSpace> {
    let count = model.state_count();
    if count > cap as u128 {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let n = model.n_users();
    let links = model.links();
    let mut states = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; links.len()];
    loop {
        let mut prob = 1.0;
        let mut gains = Vec::with_capacity(links.len());
        for (d, &k) in links.iter().zip(&idx) {
            prob *= d.probs()[k];
            gains.push(d.values()[k]);
        }
        states.push(JointState {
            gains,
            prob,
            support: idx.clone(),
        });

        // odometer increment
        let mut pos = links.len();
        loop {
            if pos == 0 {
                return Ok(StateSpace { n_users: n, states });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < links[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Maps joint states to each user's information state.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoIndexer {
    variant: Variant,
    maps: Vec<Vec<usize>>,
    marginals: Vec<Vec<f64>>,
    representatives: Vec<Vec<usize>>,
}

impl InfoIndexer {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n_users(&self) -> usize {
        self.maps.len()
    }

    /// Info-state of user `i` in joint state `k`.
    pub fn info_state(&self, i: usize, k: usize) -> usize {
        self.maps[i][k]
    }

    pub fn map(&self, i: usize) -> &[usize] {
        &self.maps[i]
    }

    pub fn marginals(&self, i: usize) -> &[f64] {
        &self.marginals[i]
    }

    pub fn n_states(&self, i: usize) -> usize {
        self.marginals[i].len()
    }

    /// A joint state index belonging to info-state `s` of user `i`. All joint
    /// states of the fiber agree on the gains user `i` observes.
    pub fn representative(&self, i: usize, s: usize) -> usize {
        self.representatives[i][s]
    }
}

/// Builds the joint-to-info map for `variant`; marginals are pushed forward
/// from the joint distribution.
pub fn build_indexer(model: &ChannelModel, space: &StateSpace, variant: Variant) -> InfoIndexer {
    let n = model.n_users();
    let mut maps = Vec::with_capacity(n);
    let mut marginals = Vec::with_capacity(n);
    let mut representatives = Vec::with_capacity(n);
    for i in 0..n {
        let (count, map): (usize, Vec<usize>) = match variant {
            Variant::Full => (space.len(), (0..space.len()).collect()),
            Variant::Incident => {
                let radix: Vec<usize> = (0..n).map(|j| model.link(i, j).len()).collect();
                let count = radix.iter().product();
                let map = space
                    .states()
                    .iter()
                    .map(|st| (0..n).fold(0, |acc, j| acc * radix[j] + st.support[i * n + j]))
                    .collect();
                (count, map)
            }
            Variant::Direct => (
                model.direct(i).len(),
                space
                    .states()
                    .iter()
                    .map(|st| st.support[i * n + i])
                    .collect(),
            ),
        };
        let mut marg = vec![0.0; count];
        let mut rep = vec![usize::MAX; count];
        for (k, &s) in map.iter().enumerate() {
            marg[s] += space.states()[k].prob;
            if rep[s] == usize::MAX {
                rep[s] = k;
            }
        }
        maps.push(map);
        marginals.push(marg);
        representatives.push(rep);
    }
    InfoIndexer {
        variant,
        maps,
        marginals,
        representatives,
    }
}
