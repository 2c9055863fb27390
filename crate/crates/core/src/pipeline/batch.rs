//! Corpus runs over a directory of PGM slices.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::report::{aggregate_report, corpus_csv, energy_trace_csv, fa_trace_csv, image_report, overlay};
use super::{run_pipeline, CorpusSummary, IoConfig, PipelineConfig, PipelineResult};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::pnm::{read_mask_file, read_pgm_file, save_mask, save_pgm, write_file};

/// Firefly seed for one image: the first 8 bytes (little endian) of
/// SHA-256 over the global seed's little-endian bytes followed by the id.
/// Independent of scheduling and of the other images in the corpus.
pub fn derive_seed(global: u64, image_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update(image_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub input_dir: PathBuf,
    /// Directory holding `<name>_gt.pgm` masks.
    pub gt_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Worker threads; all available CPUs when absent.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    /// Sorted by image id.
    pub results: Vec<PipelineResult>,
    pub summary: CorpusSummary,
}

/// Suffixes of truth masks, which are never treated as inputs.
const TRUTH_SUFFIXES: [&str; 2] = ["_gt", "_lung"];

fn list_inputs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() || path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if TRUTH_SUFFIXES.iter().any(|s| id.ends_with(s)) {
            continue;
        }
        out.push((id.to_string(), path));
    }
    out.sort();
    Ok(out)
}

/// Writes `<id>_mask.pgm`, `<id>_overlay.ppm`, `<id>.json`,
/// `<id>_fa_trace.csv`, `<id>_energy.csv` and, when thresholding ran,
/// `<id>_threshold.pgm`.
pub fn write_image_outputs(out_dir: &Path, img: &GrayImage, r: &PipelineResult, with_elapsed: bool) -> Result<()> {
    let id = &r.image_id;
    let path = |suffix: &str| out_dir.join(format!("{id}{suffix}"));
    write_file(path("_mask.pgm"), &save_mask(&r.lesion_mask))?;
    write_file(path("_overlay.ppm"), &overlay(img, &r.lesion_mask)?)?;
    write_file(path(".json"), image_report(r, with_elapsed).to_json().as_bytes())?;
    write_file(path("_fa_trace.csv"), fa_trace_csv(&r.fa_trace).as_bytes())?;
    write_file(path("_energy.csv"), energy_trace_csv(&r.energy_trace).as_bytes())?;
    if let Some(t) = &r.thresholded {
        write_file(path("_threshold.pgm"), &save_pgm(t))?;
    }
    Ok(())
}

fn process(id: &str, input: &Path, gt_dir: Option<&Path>, out_dir: &Path, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let img = read_pgm_file(input)?;
    let gt = match gt_dir.map(|d| d.join(format!("{id}_gt.pgm"))) {
        Some(p) if p.is_file() => Some(read_mask_file(&p)?),
        _ => None,
    };
    let mut cfg = cfg.clone();
    cfg.fa.seed = derive_seed(cfg.fa.seed, id);
    let result = run_pipeline(id, &img, gt.as_ref(), &cfg)?;
    write_image_outputs(out_dir, &img, &result, cfg.report_elapsed)?;
    Ok(result)
}

/// Segments every `*.pgm` in the input directory (truth masks excluded) on
/// a bounded worker pool, then writes `corpus.csv`, `summary.json` and the
/// resolved config (`resolved.conf`, paths omitted) to the output directory.
/// The first failing image aborts the run.
pub fn run_batch(cfg: &PipelineConfig, opts: &BatchOptions) -> Result<BatchOutcome> {
    cfg.validate()?;
    let inputs = list_inputs(&opts.input_dir)?;
    if inputs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let gt_dir = opts.gt_dir.as_deref();
    let results: Vec<PipelineResult> = pool.install(|| {
        inputs
            .par_iter()
            .map(|(id, path)| process(id, path, gt_dir, &opts.out_dir, cfg))
            .collect::<Result<_>>()
    })?;

    let summary = aggregate_report(&results)?;
    let out = |name: &str| opts.out_dir.join(name);
    write_file(out("corpus.csv"), corpus_csv(&results, cfg.report_elapsed).as_bytes())?;
    let mut json = serde_json::to_string_pretty(&summary).expect("summary is serializable");
    json.push('\n');
    write_file(out("summary.json"), json.as_bytes())?;
    let mut resolved = cfg.clone();
    resolved.io = IoConfig::default();
    write_file(out("resolved.conf"), resolved.to_kv_string().as_bytes())?;
    Ok(BatchOutcome { results, summary })
}
