//! Channel models of the three reference experiments.
//!
//! Budgets come from the transmit SNR with unit noise power:
//! `P̄ = 10^(snr_db / 10)`, identical for all users.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{ChannelModel, GainDist};
use crate::error::Result;
use crate::math;

pub const SNR_GRID_DB: [f64; 6] = [0.0, 1.0, 5.0, 10.0, 15.0, 20.0];

pub fn budget_from_snr_db(snr_db: f64) -> f64 {
    math::powf(10.0, snr_db / 10.0)
}

/// Three users, direct gains {0.3, 1}, cross gains {0.2, 0.1}, all
/// equiprobable.
pub fn example1(budget: f64) -> Result<ChannelModel> {
    ChannelModel::symmetric(
        3,
        GainDist::uniform(vec![0.3, 1.0])?,
        GainDist::uniform(vec![0.2, 0.1])?,
        budget,
    )
}

/// Three users, direct gains {0.3, 1}, cross gains {0.1, 0.5}, all
/// equiprobable.
pub fn example2(budget: f64) -> Result<ChannelModel> {
    ChannelModel::symmetric(
        3,
        GainDist::uniform(vec![0.3, 1.0])?,
        GainDist::uniform(vec![0.1, 0.5])?,
        budget,
    )
}

/// Two users, direct gains {0.1, 0.5, 1}, cross gains {0.25, 0.5, 0.75}.
/// User 1's links are equiprobable; the links into receiver 2 use the
/// distribution {0.1, 0.4, 0.5}.
pub fn example3(budget: f64) -> Result<ChannelModel> {
    let direct = vec![0.1, 0.5, 1.0];
    let cross = vec![0.25, 0.5, 0.75];
    let skew = vec![0.1, 0.4, 0.5];
    let links = vec![
        GainDist::uniform(direct.clone())?,
        GainDist::uniform(cross.clone())?,
        GainDist::new(cross, skew.clone())?,
        GainDist::new(direct, skew)?,
    ];
    ChannelModel::new(2, links, vec![budget; 2], vec![1.0; 2])
}

/// Symmetric three-user model used for Bayesian learning: direct gains
/// {0.3, 1}, cross gains {0.5, 0.1}, all equiprobable.
pub fn example2_bayes(budget: f64) -> Result<ChannelModel> {
    ChannelModel::symmetric(
        3,
        GainDist::uniform(vec![0.3, 1.0])?,
        GainDist::uniform(vec![0.5, 0.1])?,
        budget,
    )
}

/// Power levels 0, 5, ..., 50 used with [`example2_bayes`].
pub fn bayes_levels() -> Vec<f64> {
    (0..=10).map(|k| 5.0 * k as f64).collect()
}
