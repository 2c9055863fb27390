//! Seeded synthetic axial slices with known lung and lesion geometry.
//!
//! A phantom is a body disc (bright wall ring around soft tissue) holding two
//! dark elliptical lung fields, with hyperintense disc lesions inside the
//! lungs. Pixel `(x, y)` has its center at `(x, y)`; a pixel belongs to a
//! shape when its center lies inside or on the analytic boundary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyRing {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub intensity: u8,
    pub sigma: f64,
    /// Fill between the ring and the lungs.
    pub tissue_intensity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let u = (x - self.cx) / self.rx;
        let v = (y - self.cy) / self.ry;
        u * u + v * v <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LungFields {
    pub left: Ellipse,
    pub right: Ellipse,
    pub intensity: u8,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lesion {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub intensity: u8,
    pub sigma: f64,
}

impl Lesion {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub body: BodyRing,
    pub lung: LungFields,
    pub lesions: Vec<Lesion>,
    pub seed: u64,
}

impl Default for PhantomSpec {
    /// 256x256 validation phantom: lungs at 40 (sigma 8), lesions at 160
    /// (sigma 12), body ring at 230 (sigma 5).
    fn default() -> Self {
        Self::scaled(256, 256)
    }
}

impl PhantomSpec {
    /// The default layout stretched to `width` x `height`.
    pub fn scaled(width: usize, height: usize) -> Self {
        let (w, h) = (width as f64, height as f64);
        let m = w.min(h);
        Self {
            width,
            height,
            body: BodyRing {
                inner_radius: 0.42 * m,
                outer_radius: 0.47 * m,
                intensity: 230,
                sigma: 5.0,
                tissue_intensity: 200,
            },
            lung: LungFields {
                left: Ellipse {
                    cx: 0.34 * w,
                    cy: 0.5 * h,
                    rx: 0.12 * w,
                    ry: 0.24 * h,
                },
                right: Ellipse {
                    cx: 0.66 * w,
                    cy: 0.5 * h,
                    rx: 0.12 * w,
                    ry: 0.24 * h,
                },
                intensity: 40,
                sigma: 8.0,
            },
            lesions: vec![
                Lesion {
                    cx: 0.31 * w,
                    cy: 0.43 * h,
                    radius: 0.047 * m,
                    intensity: 160,
                    sigma: 12.0,
                },
                Lesion {
                    cx: 0.68 * w,
                    cy: 0.59 * h,
                    radius: 0.04 * m,
                    intensity: 160,
                    sigma: 12.0,
                },
            ],
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Default geometry with one to three lesions of random size, position
    /// and contrast, all drawn from `seed`.
    pub fn random_layout(width: usize, height: usize, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut spec = Self::scaled(width, height).with_seed(seed);
        let m = width.min(height) as f64;
        let count = rng.random_range(1..=3);
        spec.lesions.clear();
        for i in 0..count {
            let lung = if i % 2 == 0 { spec.lung.left } else { spec.lung.right };
            let radius = rng.random_range(0.025..0.05) * m;
            // Keep the disc comfortably inside the ellipse.
            let (sx, sy) = ((lung.rx - radius) * 0.6, (lung.ry - radius) * 0.6);
            spec.lesions.push(Lesion {
                cx: lung.cx + rng.random_range(-1.0..1.0) * sx,
                cy: lung.cy + rng.random_range(-1.0..1.0) * sy,
                radius,
                intensity: rng.random_range(130..=190),
                sigma: rng.random_range(6.0..14.0),
            });
        }
        spec
    }

    fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    fn in_lung(&self, x: f64, y: f64) -> bool {
        self.lung.left.contains(x, y) || self.lung.right.contains(x, y)
    }

    fn in_lesion(&self, x: f64, y: f64) -> Option<&Lesion> {
        self.lesions.iter().find(|l| l.contains(x, y))
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Spec("dimensions must be positive".into()));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let sigma_ok = |v: f64| v.is_finite() && v >= 0.0;
        let b = &self.body;
        if !positive(b.inner_radius) || !positive(b.outer_radius) || b.inner_radius >= b.outer_radius
        {
            return Err(Error::Spec(format!(
                "ring radii must satisfy 0 < inner < outer, got {} / {}",
                b.inner_radius, b.outer_radius
            )));
        }
        for e in [&self.lung.left, &self.lung.right] {
            if !positive(e.rx) || !positive(e.ry) {
                return Err(Error::Spec("lung ellipse radii must be positive".into()));
            }
        }
        if !sigma_ok(b.sigma) || !sigma_ok(self.lung.sigma) {
            return Err(Error::Spec("noise sigma must be finite and non-negative".into()));
        }
        for (i, l) in self.lesions.iter().enumerate() {
            if !positive(l.radius) {
                return Err(Error::Spec(format!("lesion {i} radius must be positive")));
            }
            if !sigma_ok(l.sigma) {
                return Err(Error::Spec(format!("lesion {i} sigma must be finite and non-negative")));
            }
        }
        let (cx, cy) = self.center();
        let r_in = b.inner_radius * b.inner_radius;
        for y in 0..self.height {
            for x in 0..self.width {
                let (fx, fy) = (x as f64, y as f64);
                let in_lung = self.in_lung(fx, fy);
                if in_lung && (fx - cx).powi(2) + (fy - cy).powi(2) > r_in {
                    return Err(Error::Spec(format!(
                        "lung field reaches the body ring at ({x}, {y})"
                    )));
                }
                if !in_lung {
                    if let Some(i) = self.lesions.iter().position(|l| l.contains(fx, fy)) {
                        return Err(Error::Spec(format!(
                            "lesion {i} leaves the lung fields at ({x}, {y})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: GrayImage,
    pub lung_truth: BinaryMask,
    pub lesion_truth: BinaryMask,
}

/// Renders `spec`. One standard normal draw is consumed per pixel in raster
/// order, so the output depends only on the spec and its seed.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let (cx, cy) = spec.center();
    let r_in2 = spec.body.inner_radius.powi(2);
    let r_out2 = spec.body.outer_radius.powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut pixels = Vec::with_capacity(w * h);
    let mut lung_bits = Vec::with_capacity(w * h);
    let mut lesion_bits = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let z: f64 = StandardNormal.sample(&mut rng);
            let d2 = (fx - cx).powi(2) + (fy - cy).powi(2);
            let lesion = spec.in_lesion(fx, fy);
            let lung = spec.in_lung(fx, fy);
            let (base, sigma) = if let Some(l) = lesion {
                (l.intensity, l.sigma)
            } else if lung {
                (spec.lung.intensity, spec.lung.sigma)
            } else if d2 <= r_in2 {
                (spec.body.tissue_intensity, spec.body.sigma)
            } else if d2 <= r_out2 {
                (spec.body.intensity, spec.body.sigma)
            } else {
                (0, 0.0)
            };
            let v = (base as f64 + sigma * z).round().clamp(0.0, 255.0);
            pixels.push(v as u8);
            lung_bits.push(lung);
            lesion_bits.push(lesion.is_some());
        }
    }
    Ok(Phantom {
        image: GrayImage::new(w, h, pixels)?,
        lung_truth: BinaryMask::new(w, h, lung_bits)?,
        lesion_truth: BinaryMask::new(w, h, lesion_bits)?,
    })
}
