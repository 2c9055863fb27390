//! Firefly search for the entropy-maximizing cuts.
//!
//! Each firefly carries a real-valued cut vector. Every iteration, firefly
//! `i` moves toward each firefly `j` that was brighter at the start of the
//! iteration:
//!
//! ```text
//! F_i <- F_i + beta0 * exp(-gamma * |F_i - F_j|^2) * (F_j - F_i) + alpha_t * N(0, 1)
//! ```
//!
//! with the Gaussian (Brownian) step drawn per coordinate and
//! `alpha_t = alpha0 * alpha_decay^t`. Positions are clamped to `[1, 254]`
//! and sorted after moving; brightness is the entropy of the rounded,
//! de-duplicated cuts. The best cuts ever seen are kept, so the per-iteration
//! trace never decreases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ShannonObjective, ThresholdSet, MAX_CUT, MIN_CUT};
use crate::error::{Error, Result};
use crate::image::Histogram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireflyParams {
    pub population: usize,
    pub iterations: usize,
    /// Attraction at zero distance.
    pub beta0: f64,
    /// Light absorption; the default `1/255^2` keeps attraction O(1) across
    /// the whole intensity range.
    pub gamma: f64,
    /// Initial random step, in intensity levels.
    pub alpha0: f64,
    pub alpha_decay: f64,
    pub seed: u64,
}

impl Default for FireflyParams {
    fn default() -> Self {
        Self {
            population: 20,
            iterations: 100,
            beta0: 1.0,
            gamma: 1.0 / 65025.0,
            alpha0: 10.0,
            alpha_decay: 0.97,
            seed: 0,
        }
    }
}

impl FireflyParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.population < 2 {
            return bad("fa.population must be at least 2");
        }
        if self.iterations < 1 {
            return bad("fa.iterations must be at least 1");
        }
        if !(self.beta0.is_finite() && self.beta0 > 0.0) {
            return bad("fa.beta0 must be positive");
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad("fa.gamma must be positive");
        }
        if !(self.alpha0.is_finite() && self.alpha0 >= 0.0) {
            return bad("fa.alpha0 must be non-negative");
        }
        if !(self.alpha_decay > 0.0 && self.alpha_decay <= 1.0) {
            return bad("fa.alpha_decay must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Firefly {
    pub position: Vec<f64>,
    pub brightness: f64,
}

impl Firefly {
    fn evaluated(position: Vec<f64>, objective: &ShannonObjective) -> Self {
        let brightness = objective.score(&ThresholdSet::from_position(&position));
        Self {
            position,
            brightness,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaOutcome {
    pub thresholds: ThresholdSet,
    pub score: f64,
    /// Best score after each iteration.
    pub trace: Vec<f64>,
}

fn settle(position: &mut [f64]) {
    for v in position.iter_mut() {
        *v = v.clamp(MIN_CUT as f64, MAX_CUT as f64);
    }
    position.sort_by(f64::total_cmp);
}

/// Maximizes the Shannon objective over `k` cuts with a seeded firefly swarm.
pub fn fa_optimize(hist: &Histogram, k: usize, params: &FireflyParams) -> Result<FaOutcome> {
    params.validate()?;
    if k == 0 || k > (MAX_CUT - MIN_CUT + 1) as usize {
        return Err(Error::InvalidThresholds(format!("cannot place {k} cuts")));
    }
    let objective = ShannonObjective::new(hist);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut swarm: Vec<Firefly> = (0..params.population)
        .map(|_| {
            let mut pos: Vec<f64> = (0..k)
                .map(|_| rng.random_range(MIN_CUT as f64..=MAX_CUT as f64))
                .collect();
            settle(&mut pos);
            Firefly::evaluated(pos, &objective)
        })
        .collect();

    let mut best = brightest(&swarm).clone();
    let mut trace = Vec::with_capacity(params.iterations);
    let mut alpha = params.alpha0;
    for _ in 0..params.iterations {
        let snapshot = swarm.clone();
        for (i, fly) in swarm.iter_mut().enumerate() {
            let mut pos = snapshot[i].position.clone();
            let mut moved = false;
            for (j, other) in snapshot.iter().enumerate() {
                if j == i || other.brightness <= snapshot[i].brightness {
                    continue;
                }
                let d2: f64 = pos
                    .iter()
                    .zip(&other.position)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let beta = params.beta0 * (-params.gamma * d2).exp();
                for (p, &target) in pos.iter_mut().zip(&other.position) {
                    let step: f64 = rng.sample(StandardNormal);
                    *p += beta * (target - *p) + alpha * step;
                }
                moved = true;
            }
            if moved {
                settle(&mut pos);
                *fly = Firefly::evaluated(pos, &objective);
            }
        }
        let candidate = brightest(&swarm);
        if candidate.brightness > best.brightness {
            best = candidate.clone();
        }
        trace.push(best.brightness);
        alpha *= params.alpha_decay;
    }

    let thresholds = ThresholdSet::from_position(&best.position);
    let score = objective.score(&thresholds);
    Ok(FaOutcome {
        thresholds,
        score,
        trace,
    })
}

fn brightest(swarm: &[Firefly]) -> &Firefly {
    swarm
        .iter()
        .reduce(|a, b| if b.brightness > a.brightness { b } else { a })
        .expect("population is at least 2")
}
