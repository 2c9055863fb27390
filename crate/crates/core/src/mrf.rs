//! Three-class MRF-EM segmentation.
//!
//! Each class has a Gaussian intensity model; labels are coupled by a Potts
//! prior on the 4-neighbourhood. The energy of a labelling is
//!
//! ```text
//! U = sum_p [ (I_p - mu_l)^2 / (2 var_l) + ln(2 pi var_l) / 2 ]
//!   + beta * #{ unordered 4-neighbour pairs with different labels }
//! ```
//!
//! summed over region-of-interest pixels and pairs. [`segment`] alternates a
//! closed-form M-step (per-class sample mean and floored variance) with
//! raster-order ICM sweeps; both steps never raise `U`.

use serde::{Deserialize, Serialize};

use crate::entropy::ThresholdSet;
use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryMask, GrayImage, LEVELS};

pub const CLASSES: usize = 3;

/// Weight given to a class with no pixels before renormalizing.
const EMPTY_CLASS_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelField {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelField {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Size {
                expected: width * height,
                actual: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= CLASSES) {
            return Err(Error::InvalidParameter(format!("label {l} outside the class set")));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn uniform(width: usize, height: usize, label: u8) -> Result<Self> {
        Self::new(width, height, vec![label; width * height])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Mask of the pixels carrying `label`.
    pub fn mask_of(&self, label: u8) -> BinaryMask {
        BinaryMask::new(
            self.width,
            self.height,
            self.labels.iter().map(|&l| l == label).collect(),
        )
        .expect("dimensions preserved")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub mean: f64,
    pub variance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassParams(pub [ClassStats; CLASSES]);

impl ClassParams {
    pub fn classes(&self) -> &[ClassStats; CLASSES] {
        &self.0
    }

    /// Negative log-likelihood of every intensity under every class.
    fn data_table(&self) -> [[f64; LEVELS]; CLASSES] {
        let mut table = [[0.0; LEVELS]; CLASSES];
        for (row, c) in table.iter_mut().zip(&self.0) {
            let norm = 0.5 * (2.0 * std::f64::consts::PI * c.variance).ln();
            for (v, slot) in row.iter_mut().enumerate() {
                let d = v as f64 - c.mean;
                *slot = d * d / (2.0 * c.variance) + norm;
            }
        }
        table
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrfConfig {
    /// Potts penalty per disagreeing neighbour pair.
    pub beta: f64,
    pub em_iterations: usize,
    pub icm_sweeps_per_em: usize,
    /// Stop once |dU| / |U| falls below this.
    pub rel_tolerance: f64,
    pub variance_floor: f64,
}

impl Default for MrfConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            em_iterations: 10,
            icm_sweeps_per_em: 5,
            rel_tolerance: 1e-4,
            variance_floor: 1.0,
        }
    }
}

impl MrfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad("mrf.beta must be finite and non-negative");
        }
        if self.em_iterations < 1 {
            return bad("mrf.em_iterations must be at least 1");
        }
        if self.icm_sweeps_per_em < 1 {
            return bad("mrf.icm_sweeps must be at least 1");
        }
        if !(self.rel_tolerance.is_finite() && self.rel_tolerance > 0.0) {
            return bad("mrf.rel_tolerance must be positive");
        }
        if !(self.variance_floor.is_finite() && self.variance_floor > 0.0) {
            return bad("mrf.variance_floor must be positive");
        }
        Ok(())
    }
}

/// Tri-level initial labelling: `I <= t1` is class 0, `t1 < I <= t2` class 1,
/// the rest class 2. Pixels outside `roi` get class 0.
pub fn initialize_labels(img: &GrayImage, t: &ThresholdSet, roi: &BinaryMask) -> Result<LabelField> {
    if t.len() != CLASSES - 1 {
        return Err(Error::InvalidThresholds(format!(
            "three-class labelling needs exactly 2 cuts, got {}",
            t.len()
        )));
    }
    check_dims(img.dims(), roi.dims())?;
    let (w, h) = img.dims();
    let labels = img
        .pixels()
        .iter()
        .zip(roi.bits())
        .map(|(&p, &m)| if m { t.class_of(p) as u8 } else { 0 })
        .collect();
    LabelField::new(w, h, labels)
}

/// Where to take parameters for a class that has no pixels.
#[derive(Debug, Clone, Copy)]
pub enum EmptyClassFallback<'a> {
    /// Use the previous estimate for that class.
    Previous(&'a ClassParams),
    /// Mean at the midpoint of the class's intensity band, variance at the floor.
    Bands(&'a ThresholdSet),
}

fn check_field(img: &GrayImage, lf: &LabelField, roi: &BinaryMask) -> Result<()> {
    check_dims(img.dims(), lf.dims())?;
    check_dims(img.dims(), roi.dims())
}

/// Per-class intensity histograms over `roi`.
fn class_histograms(img: &GrayImage, lf: &LabelField, roi: &BinaryMask) -> [[u64; LEVELS]; CLASSES] {
    let mut counts = [[0u64; LEVELS]; CLASSES];
    for ((&p, &l), &m) in img.pixels().iter().zip(lf.labels()).zip(roi.bits()) {
        if m {
            counts[l as usize][p as usize] += 1;
        }
    }
    counts
}

/// M-step: sample mean, floored sample variance and roi fraction per class.
pub fn estimate_class_params(
    img: &GrayImage,
    lf: &LabelField,
    roi: &BinaryMask,
    variance_floor: f64,
    fallback: EmptyClassFallback<'_>,
) -> Result<ClassParams> {
    check_field(img, lf, roi)?;
    let hists = class_histograms(img, lf, roi);
    let total: u64 = hists.iter().flatten().sum();
    if total == 0 {
        return Err(Error::EmptyRegion("region of interest is empty"));
    }
    let mut stats = [ClassStats {
        mean: 0.0,
        variance: variance_floor,
        weight: 0.0,
    }; CLASSES];
    for (c, (hist, out)) in hists.iter().zip(stats.iter_mut()).enumerate() {
        let (mut n, mut s, mut ss) = (0u128, 0u128, 0u128);
        for (v, &count) in hist.iter().enumerate() {
            let (v, count) = (v as u128, count as u128);
            n += count;
            s += v * count;
            ss += v * v * count;
        }
        if n == 0 {
            *out = match fallback {
                EmptyClassFallback::Previous(prev) => ClassStats {
                    weight: EMPTY_CLASS_WEIGHT,
                    ..prev.0[c]
                },
                EmptyClassFallback::Bands(t) => {
                    let (lo, hi) = t.band(c.min(t.len()));
                    ClassStats {
                        mean: (lo as f64 + hi as f64) / 2.0,
                        variance: variance_floor,
                        weight: EMPTY_CLASS_WEIGHT,
                    }
                }
            };
            continue;
        }
        let nf = n as f64;
        // n^2 * var = n * sum(v^2) - (sum v)^2, exact in integers.
        let var = (n * ss - s * s) as f64 / (nf * nf);
        *out = ClassStats {
            mean: s as f64 / nf,
            variance: var.max(variance_floor),
            weight: nf / total as f64,
        };
    }
    let norm: f64 = stats.iter().map(|c| c.weight).sum();
    for c in &mut stats {
        c.weight /= norm;
    }
    Ok(ClassParams(stats))
}

fn roi_pair_disagreements(lf: &LabelField, roi: &BinaryMask) -> u64 {
    let (w, h) = lf.dims();
    let (labels, bits) = (lf.labels(), roi.bits());
    let mut n = 0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            if x + 1 < w && bits[i + 1] && labels[i] != labels[i + 1] {
                n += 1;
            }
            if y + 1 < h && bits[i + w] && labels[i] != labels[i + w] {
                n += 1;
            }
        }
    }
    n
}

/// Energy of a labelling; see the module docs. Each unordered neighbour pair
/// is counted once.
pub fn total_energy(
    img: &GrayImage,
    lf: &LabelField,
    params: &ClassParams,
    beta: f64,
    roi: &BinaryMask,
) -> Result<f64> {
    check_field(img, lf, roi)?;
    Ok(energy_with_table(img, lf, &params.data_table(), beta, roi))
}

fn energy_with_table(
    img: &GrayImage,
    lf: &LabelField,
    table: &[[f64; LEVELS]; CLASSES],
    beta: f64,
    roi: &BinaryMask,
) -> f64 {
    // Summing count * term per (class, intensity) keeps round-off small and
    // independent of pixel order.
    let hists = class_histograms(img, lf, roi);
    let mut data = 0.0;
    for (hist, row) in hists.iter().zip(table) {
        for (&count, &term) in hist.iter().zip(row) {
            if count > 0 {
                data += count as f64 * term;
            }
        }
    }
    data + beta * roi_pair_disagreements(lf, roi) as f64
}

/// One raster-order ICM pass. Each roi pixel takes the label minimizing its
/// data term plus `beta` times the number of disagreeing roi 4-neighbours,
/// using labels already updated earlier in the pass. Ties go to the lower
/// class index.
pub fn icm_sweep(
    img: &GrayImage,
    lf: &LabelField,
    params: &ClassParams,
    beta: f64,
    roi: &BinaryMask,
) -> Result<LabelField> {
    check_field(img, lf, roi)?;
    let mut out = lf.clone();
    sweep_in_place(img, &mut out, &params.data_table(), beta, roi);
    Ok(out)
}

fn sweep_in_place(
    img: &GrayImage,
    lf: &mut LabelField,
    table: &[[f64; LEVELS]; CLASSES],
    beta: f64,
    roi: &BinaryMask,
) -> bool {
    let (w, h) = lf.dims();
    let bits = roi.bits();
    let pixels = img.pixels();
    let labels = &mut lf.labels;
    let mut changed = false;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            let mut neighbours = [0u8; CLASSES];
            let mut degree = 0u8;
            let mut visit = |j: usize| {
                if bits[j] {
                    neighbours[labels[j] as usize] += 1;
                    degree += 1;
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
            let v = pixels[i] as usize;
            let mut best = 0usize;
            let mut best_e = f64::INFINITY;
            for c in 0..CLASSES {
                let e = table[c][v] + beta * (degree - neighbours[c]) as f64;
                if e < best_e {
                    best_e = e;
                    best = c;
                }
            }
            if labels[i] != best as u8 {
                labels[i] = best as u8;
                changed = true;
            }
        }
    }
    changed
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub labels: LabelField,
    /// Parameters the final labels were computed with.
    pub params: ClassParams,
    /// Energy after each EM iteration.
    pub trace: Vec<f64>,
    /// Energy after every individual ICM sweep.
    pub sweep_trace: Vec<f64>,
}

/// MRF-EM: re-estimate class parameters from the current labels, then run
/// up to `icm_sweeps_per_em` ICM sweeps with them; repeat until the relative
/// energy change drops below `rel_tolerance` or `em_iterations` is reached.
///
/// `bands` supplies fallback parameters for classes that start out empty;
/// equal thirds of the intensity range are used when absent.
pub fn segment(
    img: &GrayImage,
    init: &LabelField,
    cfg: &MrfConfig,
    roi: &BinaryMask,
    bands: Option<&ThresholdSet>,
) -> Result<Segmentation> {
    cfg.validate()?;
    check_field(img, init, roi)?;
    if roi.is_empty() {
        return Err(Error::EmptyRegion("region of interest is empty"));
    }
    let thirds;
    let bands = match bands {
        Some(b) => b,
        None => {
            thirds = ThresholdSet::new(vec![85, 170])?;
            &thirds
        }
    };

    let mut labels = init.clone();
    let mut params = estimate_class_params(
        img,
        &labels,
        roi,
        cfg.variance_floor,
        EmptyClassFallback::Bands(bands),
    )?;
    let mut previous = energy_with_table(img, &labels, &params.data_table(), cfg.beta, roi);
    let mut trace = Vec::new();
    let mut sweep_trace = Vec::new();
    for iteration in 0..cfg.em_iterations {
        if iteration > 0 {
            params = estimate_class_params(
                img,
                &labels,
                roi,
                cfg.variance_floor,
                EmptyClassFallback::Previous(&params),
            )?;
        }
        let table = params.data_table();
        for _ in 0..cfg.icm_sweeps_per_em {
            let changed = sweep_in_place(img, &mut labels, &table, cfg.beta, roi);
            sweep_trace.push(energy_with_table(img, &labels, &table, cfg.beta, roi));
            if !changed {
                break;
            }
        }
        let energy = *sweep_trace.last().expect("at least one sweep per iteration");
        trace.push(energy);
        if (previous - energy).abs() <= cfg.rel_tolerance * energy.abs() {
            break;
        }
        previous = energy;
    }
    Ok(Segmentation {
        labels,
        params,
        trace,
        sweep_trace,
    })
}
