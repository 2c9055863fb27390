//! Per-image JSON, corpus CSV and summary, trace CSVs and overlays.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{PipelineResult, Status};
use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryMask, GrayImage};
use crate::metrics::{ConfusionMatrix, MetricsReport, METRIC_NAMES};
use crate::pnm::save_ppm;

pub const CORPUS_CSV_HEADER: &str = "image,jaccard,dice,accuracy,precision,sensitivity,specificity,npv,elapsed_s";

/// Serialized form of one [`PipelineResult`]. Undefined metrics are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image: String,
    pub status: Status,
    pub thresholds: Option<Vec<u8>>,
    pub fa_score: Option<f64>,
    pub energy_trace: Vec<f64>,
    pub class_means: Option<Vec<f64>>,
    pub lesion_pixels: usize,
    pub elapsed_s: Option<f64>,
    pub confusion: Option<ConfusionMatrix>,
    pub metrics: Option<MetricsReport>,
}

/// `with_elapsed = false` writes `elapsed_s` as null so the report depends
/// only on the inputs and the config.
pub fn image_report(r: &PipelineResult, with_elapsed: bool) -> ImageReport {
    ImageReport {
        image: r.image_id.clone(),
        status: r.status,
        thresholds: r.thresholds.as_ref().map(|t| t.cuts().to_vec()),
        fa_score: r.fa_score,
        energy_trace: r.energy_trace.clone(),
        class_means: r
            .class_params
            .as_ref()
            .map(|p| p.classes().iter().map(|c| c.mean).collect()),
        lesion_pixels: r.lesion_mask.count(),
        elapsed_s: with_elapsed.then_some(r.elapsed_s),
        confusion: r.confusion,
        metrics: r.metrics,
    }
}

impl ImageReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report fields are serializable");
        s.push('\n');
        s
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// One row per result in the given order; undefined or unscored metrics and
/// suppressed timings are empty cells.
pub fn corpus_csv(results: &[PipelineResult], with_elapsed: bool) -> String {
    let mut out = String::from(CORPUS_CSV_HEADER);
    out.push('\n');
    for r in results {
        let values = r.metrics.map_or([None; 7], |m| m.values());
        let _ = write!(out, "{}", r.image_id);
        for v in values {
            let _ = write!(out, ",{}", cell(v));
        }
        let _ = writeln!(out, ",{}", cell(with_elapsed.then_some(r.elapsed_s)));
    }
    out
}

fn trace_csv(header: &str, values: &[f64]) -> String {
    let mut out = format!("{header}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, v);
    }
    out
}

pub fn fa_trace_csv(trace: &[f64]) -> String {
    trace_csv("iteration,best_score", trace)
}

pub fn energy_trace_csv(trace: &[f64]) -> String {
    trace_csv("iteration,energy", trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    /// `None` when no image has this metric defined.
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub defined: usize,
    /// Scored images whose value was 0/0.
    pub undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub images: usize,
    pub scored: usize,
    /// Images without ground truth.
    pub skipped: usize,
    pub no_lung: usize,
    pub metrics: Vec<MetricSummary>,
}

/// Mean, min and max of every metric over the images where it is defined.
pub fn aggregate_report(results: &[PipelineResult]) -> Result<CorpusSummary> {
    if results.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let scored: Vec<&MetricsReport> = results.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let metrics = METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let vals: Vec<f64> = scored.iter().filter_map(|m| m.values()[i]).collect();
            let n = vals.len();
            MetricSummary {
                name: name.to_string(),
                mean: (n > 0).then(|| vals.iter().sum::<f64>() / n as f64),
                min: vals.iter().copied().reduce(f64::min),
                max: vals.iter().copied().reduce(f64::max),
                defined: n,
                undefined: scored.len() - n,
            }
        })
        .collect();
    Ok(CorpusSummary {
        images: results.len(),
        scored: scored.len(),
        skipped: results.len() - scored.len(),
        no_lung: results.iter().filter(|r| r.status == Status::NoLung).count(),
        metrics,
    })
}

/// The slice as RGB with the lesion boundary (mask pixels with a
/// 4-neighbour outside the mask or the image) in pure red, encoded as P6.
pub fn overlay(img: &GrayImage, mask: &BinaryMask) -> Result<Vec<u8>> {
    check_dims(img.dims(), mask.dims())?;
    let (w, h) = img.dims();
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize)
    };
    let mut rgb = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let edge = mask.get(x, y)
                && !(inside(xi - 1, yi) && inside(xi + 1, yi) && inside(xi, yi - 1) && inside(xi, yi + 1));
            let v = img.get(x, y);
            rgb.push(if edge { [255, 0, 0] } else { [v, v, v] });
        }
    }
    Ok(save_ppm(w, h, &rgb))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(id: &str, metrics: Option<MetricsReport>) -> PipelineResult {
        PipelineResult {
            image_id: id.into(),
            status: Status::Ok,
            thresholds: None,
            fa_score: None,
            fa_trace: vec![],
            energy_trace: vec![],
            class_params: None,
            lung_roi: BinaryMask::empty(2, 2),
            thresholded: None,
            lesion_mask: BinaryMask::empty(2, 2),
            elapsed_s: 0.5,
            confusion: None,
            metrics,
        }
    }

    fn with_accuracy(a: f64, dice: Option<f64>) -> Option<MetricsReport> {
        Some(MetricsReport {
            jaccard: None,
            dice,
            accuracy: Some(a),
            precision: None,
            sensitivity: None,
            specificity: None,
            npv: None,
        })
    }

    #[test]
    fn aggregate_examples() {
        assert!(matches!(aggregate_report(&[]), Err(Error::EmptyCorpus)));
        let one = aggregate_report(&[result("a", with_accuracy(0.9, Some(0.5)))]).unwrap();
        assert_eq!(one.metrics[2].mean, Some(0.9));
        assert_eq!(one.metrics[1].mean, Some(0.5));

        let rs = [
            result("a", with_accuracy(0.90, Some(0.8))),
            result("b", with_accuracy(0.94, None)),
            result("c", None),
        ];
        let s = aggregate_report(&rs).unwrap();
        assert!((s.metrics[2].mean.unwrap() - 0.92).abs() < 1e-15);
        assert_eq!((s.metrics[2].min, s.metrics[2].max), (Some(0.90), Some(0.94)));
        assert_eq!((s.metrics[1].defined, s.metrics[1].undefined), (1, 1));
        assert_eq!(s.metrics[0].mean, None);
        assert_eq!((s.images, s.scored, s.skipped), (3, 2, 1));
    }

    #[test]
    fn csv_layout() {
        let rs = [result("a", with_accuracy(0.9, None)), result("b", None)];
        let csv = corpus_csv(&rs, true);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CORPUS_CSV_HEADER);
        assert_eq!(lines[1], "a,,,0.9,,,,,0.5");
        assert_eq!(lines[2], "b,,,,,,,,0.5");
        assert_eq!(corpus_csv(&rs, false).lines().nth(2), Some("b,,,,,,,,"));
        assert_eq!(fa_trace_csv(&[1.5, 2.0]), "iteration,best_score\n1,1.5\n2,2\n");
    }

    #[test]
    fn json_nulls_undefined() {
        let r = result("a", with_accuracy(0.9, None));
        let json = image_report(&r, false).to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["metrics"]["dice"].is_null());
        assert_eq!(v["metrics"]["accuracy"], 0.9);
        assert!(v["elapsed_s"].is_null());
        assert_eq!(v["status"], "ok");
    }

    #[test]
    fn overlay_marks_boundary_red() {
        let img = GrayImage::filled(5, 5, 7).unwrap();
        let mask = BinaryMask::from_fn(5, 5, |x, y| (1..4).contains(&x) && (1..4).contains(&y));
        let ppm = overlay(&img, &mask).unwrap();
        let header = b"P6\n5 5\n255\n";
        assert_eq!(&ppm[..header.len()], header);
        let px = |x: usize, y: usize| {
            let o = header.len() + 3 * (y * 5 + x);
            [ppm[o], ppm[o + 1], ppm[o + 2]]
        };
        assert_eq!(px(1, 1), [255, 0, 0]);
        assert_eq!(px(2, 2), [7, 7, 7]);
        assert_eq!(px(0, 0), [7, 7, 7]);
    }
}
