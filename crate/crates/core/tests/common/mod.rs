#![allow(dead_code)]

use std::collections::HashMap;

use fadegame_core::{presets, ChannelModel, GainDist, Game, PolicyProfile, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn example(k: usize, budget: f64) -> ChannelModel {
    match k {
        1 => presets::example1(budget),
        2 => presets::example2(budget),
        3 => presets::example3(budget),
        _ => panic!("no example {k}"),
    }
    .unwrap()
}

pub fn game(k: usize, budget: f64, v: Variant) -> Game {
    Game::new(example(k, budget), v).unwrap()
}

/// Users that do not interfere at all.
pub fn decoupled(n: usize, budget: f64) -> ChannelModel {
    ChannelModel::symmetric(
        n,
        GainDist::new(vec![0.3, 1.0, 2.5], vec![0.2, 0.5, 0.3]).unwrap(),
        GainDist::constant(0.0).unwrap(),
        budget,
    )
    .unwrap()
}

/// Draws joint states link by link, independently of the enumeration.
pub struct Sampler {
    index: HashMap<Vec<usize>, usize>,
    links: Vec<GainDist>,
}

impl Sampler {
    pub fn new(game: &Game) -> Self {
        let index = game
            .space()
            .states()
            .iter()
            .enumerate()
            .map(|(k, st)| (st.support.clone(), k))
            .collect();
        Sampler {
            index,
            links: game.model().links().to_vec(),
        }
    }

    /// Gains (row-major) and the matching joint-state index.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, usize) {
        let support: Vec<usize> = self
            .links
            .iter()
            .map(|l| l.sample_index(rng.gen::<f64>()))
            .collect();
        let gains = support
            .iter()
            .zip(&self.links)
            .map(|(&s, l)| l.values()[s])
            .collect();
        (gains, self.index[&support])
    }
}

/// Power every user transmits in joint state `k`.
pub fn powers_in_state(game: &Game, profile: &PolicyProfile, k: usize) -> Vec<f64> {
    (0..game.n_users())
        .map(|i| profile.get(i, game.indexer().info_state(i, k)))
        .collect()
}

/// Instantaneous rate of user `i` for the given gains and powers.
pub fn slot_rate(model: &ChannelModel, gains: &[f64], powers: &[f64], i: usize) -> f64 {
    let n = model.n_users();
    let interference: f64 = (0..n)
        .filter(|&j| j != i)
        .map(|j| gains[i * n + j] * powers[j])
        .sum();
    (model.alpha(i) * gains[i * n + i] * powers[i] / (1.0 + interference)).ln_1p()
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
