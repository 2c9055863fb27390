//! Multilevel Shannon-entropy (Kapur) thresholding.
//!
//! A set of `k` cuts `t1 < ... < tk` splits the gray levels into `k + 1`
//! classes `[0, t1]`, `[t1 + 1, t2]`, ..., `[tk + 1, 255]`. The objective is
//! the sum of the Shannon entropies of the per-class normalized
//! distributions; an empty class contributes nothing.

mod firefly;

pub use firefly::{fa_optimize, FaOutcome, Firefly, FireflyParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_dims, compute_histogram, BinaryMask, GrayImage, Histogram, LEVELS};

/// Smallest and largest admissible cut.
pub const MIN_CUT: u8 = 1;
pub const MAX_CUT: u8 = 254;

/// Strictly increasing cut points, each in `[1, 254]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct ThresholdSet(Vec<u8>);

impl ThresholdSet {
    pub fn new(cuts: Vec<u8>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::InvalidThresholds("at least one cut is required".into()));
        }
        if let Some(&c) = cuts.iter().find(|&&c| !(MIN_CUT..=MAX_CUT).contains(&c)) {
            return Err(Error::InvalidThresholds(format!(
                "cut {c} outside [{MIN_CUT}, {MAX_CUT}]"
            )));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidThresholds(format!(
                "cuts must be strictly increasing, got {cuts:?}"
            )));
        }
        Ok(Self(cuts))
    }

    /// Rounds, clamps, sorts and spreads real-valued positions into a valid set.
    /// Coincident cuts are pushed apart by one level, downwards when they would
    /// run past the upper bound.
    pub fn from_position(position: &[f64]) -> Self {
        let k = position.len();
        assert!(
            (1..=(MAX_CUT - MIN_CUT + 1) as usize).contains(&k),
            "cut count {k} out of range"
        );
        let mut cuts: Vec<i32> = position
            .iter()
            .map(|&v| {
                let v = if v.is_nan() { MIN_CUT as f64 } else { v };
                v.round().clamp(MIN_CUT as f64, MAX_CUT as f64) as i32
            })
            .collect();
        cuts.sort_unstable();
        for i in 1..k {
            if cuts[i] <= cuts[i - 1] {
                cuts[i] = cuts[i - 1] + 1;
            }
        }
        cuts[k - 1] = cuts[k - 1].min(MAX_CUT as i32);
        for i in (0..k - 1).rev() {
            cuts[i] = cuts[i].min(cuts[i + 1] - 1);
        }
        Self(cuts.into_iter().map(|c| c as u8).collect())
    }

    pub fn cuts(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Class index of intensity `v`: the number of cuts strictly below it.
    pub fn class_of(&self, v: u8) -> usize {
        self.0.partition_point(|&c| c < v)
    }

    /// Inclusive intensity band of class `c`.
    pub fn band(&self, c: usize) -> (u8, u8) {
        let lo = if c == 0 { 0 } else { self.0[c - 1] + 1 };
        let hi = if c == self.0.len() { u8::MAX } else { self.0[c] };
        (lo, hi)
    }
}

impl TryFrom<Vec<u8>> for ThresholdSet {
    type Error = Error;
    fn try_from(v: Vec<u8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThresholdSet> for Vec<u8> {
    fn from(t: ThresholdSet) -> Self {
        t.0
    }
}

/// Prefix tables that make each objective evaluation O(k).
#[derive(Debug, Clone)]
pub struct ShannonObjective {
    // cumulative counts and cumulative p*ln(p), index i covers bins [0, i)
    count_prefix: [u64; LEVELS + 1],
    plogp_prefix: [f64; LEVELS + 1],
    total: u64,
}

impl ShannonObjective {
    pub fn new(hist: &Histogram) -> Self {
        let mut count_prefix = [0u64; LEVELS + 1];
        let mut plogp_prefix = [0.0; LEVELS + 1];
        for i in 0..LEVELS {
            let p = hist.probabilities()[i];
            count_prefix[i + 1] = count_prefix[i] + hist.counts()[i];
            plogp_prefix[i + 1] = plogp_prefix[i] + if p > 0.0 { p * p.ln() } else { 0.0 };
        }
        Self {
            count_prefix,
            plogp_prefix,
            total: hist.total(),
        }
    }

    /// Entropy of the normalized distribution over bins `lo..=hi`.
    ///
    /// With class mass w and S = sum p ln p over the class,
    /// H = -sum (p/w) ln(p/w) = ln w - S / w.
    fn class_entropy(&self, lo: usize, hi: usize) -> f64 {
        let n = self.count_prefix[hi + 1] - self.count_prefix[lo];
        if n == 0 {
            return 0.0;
        }
        let w = n as f64 / self.total as f64;
        let s = self.plogp_prefix[hi + 1] - self.plogp_prefix[lo];
        (w.ln() - s / w).max(0.0)
    }

    pub fn score_cuts(&self, cuts: &[u8]) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let mut lo = 0usize;
        let mut score = 0.0;
        for &c in cuts {
            score += self.class_entropy(lo, c as usize);
            lo = c as usize + 1;
        }
        score + self.class_entropy(lo, LEVELS - 1)
    }

    pub fn score(&self, t: &ThresholdSet) -> f64 {
        self.score_cuts(t.cuts())
    }
}

/// Sum of within-class Shannon entropies for the classes induced by `t`.
pub fn shannon_objective(hist: &Histogram, t: &ThresholdSet) -> f64 {
    ShannonObjective::new(hist).score(t)
}

/// Globally optimal cuts by enumerating every strictly increasing `k`-vector
/// in `[1, 254]`. Ties go to the lexicographically smallest vector. `k` is
/// limited to 3 (about 2.7 million candidates).
pub fn exhaustive_optimal(hist: &Histogram, k: usize) -> Result<(ThresholdSet, f64)> {
    if k == 0 {
        return Err(Error::InvalidThresholds("at least one cut is required".into()));
    }
    if k > 3 {
        return Err(Error::OracleScope(k));
    }
    let objective = ShannonObjective::new(hist);
    let mut cuts = vec![0u8; k];
    let mut best: Option<(Vec<u8>, f64)> = None;
    enumerate(&objective, &mut cuts, 0, MIN_CUT, &mut best);
    let (cuts, score) = best.expect("search space is non-empty for k <= 3");
    Ok((ThresholdSet::new(cuts)?, score))
}

// Lexicographic enumeration, so replacing only on strict improvement keeps
// the smallest maximizer.
fn enumerate(
    objective: &ShannonObjective,
    cuts: &mut [u8],
    depth: usize,
    start: u8,
    best: &mut Option<(Vec<u8>, f64)>,
) {
    let k = cuts.len();
    let remaining = (k - depth - 1) as u8;
    for c in start..=MAX_CUT - remaining {
        cuts[depth] = c;
        if depth + 1 == k {
            let s = objective.score_cuts(cuts);
            if best.as_ref().is_none_or(|(_, b)| s > *b) {
                *best = Some((cuts.to_vec(), s));
            }
        } else {
            enumerate(objective, cuts, depth + 1, c + 1, best);
        }
    }
}

/// Replaces each `roi` pixel by the (rounded) mean intensity of its class,
/// computed over the `roi` histogram, and zeroes everything else. Classes
/// with no `roi` pixels are represented by their lower bound.
pub fn apply_thresholds(img: &GrayImage, t: &ThresholdSet, roi: &BinaryMask) -> Result<GrayImage> {
    check_dims(img.dims(), roi.dims())?;
    let representatives = class_representatives(img, t, roi)?;
    let mut lut = [0u8; LEVELS];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = representatives[t.class_of(v as u8)];
    }
    let (w, h) = img.dims();
    let pixels = img
        .pixels()
        .iter()
        .zip(roi.bits())
        .map(|(&p, &m)| if m { lut[p as usize] } else { 0 })
        .collect();
    GrayImage::new(w, h, pixels)
}

fn class_representatives(img: &GrayImage, t: &ThresholdSet, roi: &BinaryMask) -> Result<Vec<u8>> {
    if roi.is_empty() {
        return Ok((0..=t.len()).map(|c| t.band(c).0).collect());
    }
    let hist = compute_histogram(img, Some(roi))?;
    Ok((0..=t.len())
        .map(|c| {
            let (lo, hi) = t.band(c);
            let (mut n, mut s) = (0u64, 0u64);
            for v in lo as usize..=hi as usize {
                n += hist.counts()[v];
                s += v as u64 * hist.counts()[v];
            }
            if n == 0 {
                lo
            } else {
                (s as f64 / n as f64).round() as u8
            }
        })
        .collect())
}
