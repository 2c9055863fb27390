//! Lesion extraction from axial lung CT slices.
//!
//! The pipeline strips everything outside the lung fields, picks two
//! intensity cuts that maximize the summed Shannon entropy of the three
//! resulting classes (found with a seeded firefly search), refines the
//! three-class labelling with MRF-EM, keeps the brightest class as the lesion
//! mask and scores it against ground truth.
//!
//! ```
//! use ctlesion::{generate_phantom, run_pipeline, PhantomSpec, PipelineConfig};
//!
//! let phantom = generate_phantom(&PhantomSpec::scaled(128, 128).with_seed(3))?;
//! let result = run_pipeline("demo", &phantom.image, Some(&phantom.lesion_truth), &PipelineConfig::default())?;
//! let dice = result.metrics.unwrap().dice.unwrap();
//! assert!(dice > 0.8, "dice {dice}");
//! # Ok::<(), ctlesion::Error>(())
//! ```

pub mod components;
pub mod entropy;
pub mod error;
pub mod image;
pub mod metrics;
pub mod mrf;
pub mod phantom;
pub mod pipeline;
pub mod pnm;
pub mod postprocess;
pub mod preprocess;

pub use entropy::{
    apply_thresholds, exhaustive_optimal, fa_optimize, shannon_objective, FaOutcome, FireflyParams, ThresholdSet,
};
pub use error::{Error, Result, Stage};
pub use image::{compute_histogram, BinaryMask, GrayImage, Histogram};
pub use metrics::{compute_metrics, confusion, ConfusionMatrix, MetricsReport};
pub use mrf::{initialize_labels, segment, ClassParams, LabelField, MrfConfig, Segmentation};
pub use phantom::{generate_phantom, Phantom, PhantomSpec};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineResult, Status};
pub use postprocess::{extract_lesion_mask, morphological_smooth, remove_small_components};
pub use preprocess::{otsu_bilevel, strip_artifacts, StripConfig, Stripped};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub mod intro {}
    #[doc = include_str!("../../../book/src/stripping.md")]
    pub mod stripping {}
    #[doc = include_str!("../../../book/src/thresholding.md")]
    pub mod thresholding {}
    #[doc = include_str!("../../../book/src/mrf.md")]
    pub mod mrf {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    pub mod scoring {}
    #[doc = include_str!("../../../book/src/phantoms.md")]
    pub mod phantoms {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
