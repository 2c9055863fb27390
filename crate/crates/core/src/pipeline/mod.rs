//! End-to-end runs, reports and corpus batches.

mod batch;
mod config;
mod report;

pub use batch::{derive_seed, run_batch, write_image_outputs, BatchOptions, BatchOutcome};
pub use config::{IoConfig, PipelineConfig, PostConfig, Scope, ThresholdConfig};
pub use report::{
    aggregate_report, corpus_csv, energy_trace_csv, fa_trace_csv, image_report, overlay, CorpusSummary, ImageReport,
    MetricSummary, CORPUS_CSV_HEADER,
};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::entropy::{apply_thresholds, fa_optimize, ThresholdSet};
use crate::error::{Error, Result, Stage};
use crate::image::{check_dims, compute_histogram, BinaryMask, GrayImage};
use crate::metrics::{compute_metrics, confusion, ConfusionMatrix, MetricsReport};
use crate::mrf::{initialize_labels, segment, ClassParams};
use crate::postprocess::{extract_lesion_mask, morphological_smooth, remove_small_components};
use crate::preprocess::strip_artifacts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// Artifact removal found no lung field; the lesion mask is empty.
    NoLung,
}

/// Everything one run produced. `metrics` and `confusion` are present
/// exactly when ground truth was supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub image_id: String,
    pub status: Status,
    pub thresholds: Option<ThresholdSet>,
    pub fa_score: Option<f64>,
    pub fa_trace: Vec<f64>,
    pub energy_trace: Vec<f64>,
    pub class_params: Option<ClassParams>,
    pub lung_roi: BinaryMask,
    /// Slice with every pixel replaced by its class mean.
    pub thresholded: Option<GrayImage>,
    pub lesion_mask: BinaryMask,
    pub elapsed_s: f64,
    pub confusion: Option<ConfusionMatrix>,
    pub metrics: Option<MetricsReport>,
}

/// Runs every stage on one slice. The firefly search uses `cfg.fa.seed` as
/// given; batch runs substitute a per-image seed first.
pub fn run_pipeline(
    image_id: &str,
    img: &GrayImage,
    gt: Option<&BinaryMask>,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    let start = Instant::now();
    cfg.validate()?;
    if let Some(gt) = gt {
        check_dims(img.dims(), gt.dims()).map_err(|e| e.at(Stage::Score))?;
    }
    let (w, h) = img.dims();
    let mut result = PipelineResult {
        image_id: image_id.to_string(),
        status: Status::NoLung,
        thresholds: None,
        fa_score: None,
        fa_trace: Vec::new(),
        energy_trace: Vec::new(),
        class_params: None,
        lung_roi: BinaryMask::empty(w, h),
        thresholded: None,
        lesion_mask: BinaryMask::empty(w, h),
        elapsed_s: 0.0,
        confusion: None,
        metrics: None,
    };

    match strip_artifacts(img, &cfg.strip) {
        Err(Error::EmptyRegion(_)) => {}
        Err(e) => return Err(e.at(Stage::Strip)),
        Ok(stripped) => {
            let region = match cfg.threshold.scope {
                Scope::Lung => stripped.roi.clone(),
                Scope::Image => BinaryMask::full(w, h),
            };
            let hist = compute_histogram(&stripped.lung, Some(&region)).map_err(|e| e.at(Stage::Histogram))?;
            let fa = fa_optimize(&hist, cfg.threshold.k, &cfg.fa).map_err(|e| e.at(Stage::Threshold))?;
            let thresholded =
                apply_thresholds(&stripped.lung, &fa.thresholds, &region).map_err(|e| e.at(Stage::Threshold))?;
            let init = initialize_labels(&stripped.lung, &fa.thresholds, &region).map_err(|e| e.at(Stage::Segment))?;
            let seg = segment(&stripped.lung, &init, &cfg.mrf, &region, Some(&fa.thresholds))
                .map_err(|e| e.at(Stage::Segment))?;
            let mut lesion =
                extract_lesion_mask(&seg.labels, &seg.params, &stripped.roi).map_err(|e| e.at(Stage::Extract))?;
            if cfg.post.smooth {
                lesion = morphological_smooth(&lesion);
            }
            lesion = remove_small_components(&lesion, cfg.post.min_component_area);

            result.status = Status::Ok;
            result.thresholds = Some(fa.thresholds);
            result.fa_score = Some(fa.score);
            result.fa_trace = fa.trace;
            result.energy_trace = seg.trace;
            result.class_params = Some(seg.params);
            result.lung_roi = stripped.roi;
            result.thresholded = Some(thresholded);
            result.lesion_mask = lesion;
        }
    }

    if let Some(gt) = gt {
        let scope = match cfg.metrics_scope {
            Scope::Image => None,
            Scope::Lung => Some(&result.lung_roi),
        };
        let cm = confusion(&result.lesion_mask, gt, scope).map_err(|e| e.at(Stage::Score))?;
        // An empty lung scope has nothing to score; leave every ratio undefined.
        result.metrics = Some(match compute_metrics(&cm) {
            Ok(m) => m,
            Err(Error::EmptyScope) => MetricsReport {
                jaccard: None,
                dice: None,
                accuracy: None,
                precision: None,
                sensitivity: None,
                specificity: None,
                npv: None,
            },
            Err(e) => return Err(e.at(Stage::Score)),
        });
        result.confusion = Some(cm);
    }
    result.elapsed_s = start.elapsed().as_secs_f64();
    Ok(result)
}
