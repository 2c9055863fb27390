//! Artifact removal: isolate the lung fields from body wall, bone and
//! ambient air with a bi-level threshold and connected-component filtering.

use crate::components::{self, Connectivity};
use crate::error::{Error, Result};
use crate::image::{compute_histogram, BinaryMask, GrayImage, Histogram, LEVELS};

/// Result of an Otsu scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuSplit {
    /// Last intensity of the lower class.
    pub threshold: u8,
    /// Between-class variance over total variance, in `[0, 1]`.
    pub separability: f64,
}

/// Otsu's bi-level threshold: the `t` maximizing between-class variance of
/// `[0, t]` against `[t + 1, 255]`, smallest `t` on ties.
pub fn otsu_bilevel(hist: &Histogram) -> Result<u8> {
    otsu_split(hist).map(|s| s.threshold)
}

pub fn otsu_split(hist: &Histogram) -> Result<OtsuSplit> {
    if hist.occupied_bins() < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let counts = hist.counts();
    let n = hist.total() as u128;
    let sum: u128 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| i as u128 * c as u128)
        .sum();

    // Between-class variance of split t is (N*s0 - S*n0)^2 / (N^2 * n0 * n1);
    // compare the N-free part as an exact fraction.
    let mut best: Option<(usize, u128, u128)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for t in 0..LEVELS - 1 {
        n0 += counts[t] as u128;
        s0 += t as u128 * counts[t] as u128;
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (n * s0).abs_diff(sum * n0);
        let num = diff * diff;
        let den = n0 * n1;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => fraction_gt(num, den, bn, bd),
        };
        if better {
            best = Some((t, num, den));
        }
    }
    let (t, num, den) = best.expect("two occupied bins give at least one valid split");

    let nf = n as f64;
    let mean = sum as f64 / nf;
    let total_var = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 * (i as f64 - mean).powi(2))
        .sum::<f64>()
        / nf;
    let between = num as f64 / den as f64 / (nf * nf);
    Ok(OtsuSplit {
        threshold: t as u8,
        separability: (between / total_var).clamp(0.0, 1.0),
    })
}

/// `a/b > c/d` for non-negative fractions, exact unless the cross products overflow.
fn fraction_gt(a: u128, b: u128, c: u128, d: u128) -> bool {
    match (a.checked_mul(d), c.checked_mul(b)) {
        (Some(l), Some(r)) => l > r,
        _ => a as f64 / b as f64 > c as f64 / d as f64,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripConfig {
    /// Dark components smaller than this fraction of the image are discarded.
    pub min_lung_area_frac: f64,
    /// Enclosed holes with area below this are filled; `None` fills every
    /// enclosed hole.
    pub hole_fill_area: Option<usize>,
    /// Below this Otsu separability the nonzero histogram is treated as a
    /// single population and every nonzero pixel becomes a lung candidate.
    pub min_separability: f64,
}

impl Default for StripConfig {
    fn default() -> Self {
        Self {
            min_lung_area_frac: 0.005,
            hole_fill_area: None,
            min_separability: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stripped {
    /// Input with everything outside `roi` set to 0.
    pub lung: GrayImage,
    pub roi: BinaryMask,
}

/// Removes everything except the lung fields.
///
/// Zero-valued pixels are treated as already-removed background, so
/// stripping an already stripped image returns it unchanged. Procedure:
///
/// 1. Otsu split of the histogram of nonzero pixels (body vs. air/lung).
/// 2. Lung candidates are nonzero pixels at or below the split.
/// 3. 8-connected candidate components touching the image border (ambient
///    air) or smaller than `min_lung_area_frac` of the image are dropped.
/// 4. Enclosed holes in the survivors (lesions, vessels) are filled.
pub fn strip_artifacts(img: &GrayImage, cfg: &StripConfig) -> Result<Stripped> {
    let nonzero = BinaryMask::nonzero(img);
    if nonzero.is_empty() {
        return Err(Error::EmptyRegion("image has no nonzero pixels"));
    }
    let hist = compute_histogram(img, Some(&nonzero))?;
    let threshold = match otsu_split(&hist) {
        Ok(split) if split.separability >= cfg.min_separability => split.threshold,
        Ok(_) | Err(Error::DegenerateHistogram) => u8::MAX,
        Err(e) => return Err(e),
    };

    let (w, h) = img.dims();
    let candidates = BinaryMask::new(
        w,
        h,
        img.pixels()
            .iter()
            .map(|&p| p != 0 && p <= threshold)
            .collect(),
    )?;
    let min_area = cfg.min_lung_area_frac * (w * h) as f64;
    let lungs = components::retain_components(&candidates, Connectivity::Eight, |c| {
        !c.touches_border && c.area as f64 >= min_area
    });
    if lungs.is_empty() {
        return Err(Error::EmptyRegion("no lung-candidate component found"));
    }
    let roi = components::fill_holes(&lungs, cfg.hole_fill_area);
    let lung = img.masked(&roi)?;
    Ok(Stripped { lung, roi })
}
