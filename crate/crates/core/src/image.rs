//! Pixel containers and histogramming.
//!
//! Everything here is 8-bit single channel: intensities live in `0..=255`
//! and rasters are stored row-major.

use crate::error::{Error, Result};

/// Number of gray levels.
pub const LEVELS: usize = 256;

/// A 2-D 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidParameter("image dimensions overflow".into()))?;
        if pixels.len() != expected {
            return Err(Error::Size {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image filled with a single intensity.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Applies `f` to every pixel, producing a new image of the same size.
    pub fn map(&self, f: impl Fn(u8) -> u8) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Keeps pixels where `mask` is set and zeroes the rest.
    pub fn masked(&self, mask: &BinaryMask) -> Result<GrayImage> {
        check_dims(self.dims(), mask.dims())?;
        Ok(GrayImage {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .zip(mask.bits())
                .map(|(&p, &m)| if m { p } else { 0 })
                .collect(),
        })
    }
}

/// One boolean per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::Size {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Nonzero pixels of `img`.
    pub fn nonzero(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            bits: img.pixels.iter().map(|&p| p != 0).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn not(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        check_dims(self.dims(), other.dims())?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// 0/255 rendering, the on-disk mask convention.
    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

pub(crate) fn check_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(Error::Dimension { left, right });
    }
    Ok(())
}

/// Intensity distribution over the 256 gray levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    counts: [u64; LEVELS],
    total: u64,
    probabilities: [f64; LEVELS],
}

impl Histogram {
    /// Builds a histogram from raw counts. Probabilities are all zero when
    /// the counts are.
    pub fn from_counts(counts: [u64; LEVELS]) -> Self {
        let total: u64 = counts.iter().sum();
        let mut probabilities = [0.0; LEVELS];
        if total > 0 {
            let n = total as f64;
            for (p, &c) in probabilities.iter_mut().zip(&counts) {
                *p = c as f64 / n;
            }
        }
        Self {
            counts,
            total,
            probabilities,
        }
    }

    pub fn counts(&self) -> &[u64; LEVELS] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probabilities(&self) -> &[f64; LEVELS] {
        &self.probabilities
    }

    /// Number of bins with a nonzero count.
    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Tallies intensities of `img`, restricted to `roi` when one is given.
pub fn compute_histogram(img: &GrayImage, roi: Option<&BinaryMask>) -> Result<Histogram> {
    let mut counts = [0u64; LEVELS];
    match roi {
        None => {
            for &p in img.pixels() {
                counts[p as usize] += 1;
            }
        }
        Some(roi) => {
            check_dims(img.dims(), roi.dims())?;
            for (&p, &m) in img.pixels().iter().zip(roi.bits()) {
                if m {
                    counts[p as usize] += 1;
                }
            }
        }
    }
    let hist = Histogram::from_counts(counts);
    if hist.total() == 0 {
        return Err(Error::EmptyRegion("histogram region contains no pixels"));
    }
    Ok(hist)
}
