use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctlesion::pipeline::{derive_seed, run_batch, write_image_outputs, BatchOptions};
use ctlesion::pnm::{read_mask_file, read_pgm_file, save_mask, save_pgm, write_file};
use ctlesion::{compute_metrics, confusion, generate_phantom, run_pipeline, Error, PipelineConfig, Status};

/// Lesion extraction for lung CT slices (8-bit binary PGM).
///
/// Settings come from the built-in defaults, then the `--config` file, then
/// `--set key=value` overrides in order, then explicit path flags.
#[derive(Parser)]
#[command(name = "ctlesion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one slice.
    Segment {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Ground-truth lesion mask; enables metrics.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Segment every slice in a directory.
    Batch {
        #[arg(long)]
        input_dir: Option<PathBuf>,
        /// Directory of `<name>_gt.pgm` masks.
        #[arg(long)]
        gt_dir: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads (default: all CPUs).
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Compare a predicted mask with ground truth and print the metrics as JSON.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Only count pixels inside this mask.
        #[arg(long)]
        scope: Option<PathBuf>,
    },
    /// Synthetic phantoms.
    #[command(subcommand)]
    Phantom(PhantomCommand),
}

#[derive(Subcommand)]
enum PhantomCommand {
    /// Write `<name>.pgm` with its `<name>_gt.pgm` lesion and `<name>_lung.pgm` lung masks.
    Generate {
        /// Config file whose `phantom.*` keys describe the phantom.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "phantom")]
        name: String,
        /// Number of phantoms; seeds increase from `phantom.seed`.
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Args)]
struct Settings {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig, Error> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            PipelineConfig::parse(&text)?
        }
        None => PipelineConfig::default(),
    };
    cfg.apply_overrides(overrides)?;
    Ok(cfg)
}

fn required(flag: Option<PathBuf>, key: Option<&String>, name: &str) -> Result<PathBuf, Error> {
    flag.or_else(|| key.map(PathBuf::from))
        .ok_or_else(|| Error::Config(format!("--{name} is required (or set io.{})", name.replace('-', "_"))))
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.4}"))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Segment {
            input,
            gt,
            out_dir,
            settings,
        } => {
            let mut cfg = load_config(settings.config.as_deref(), &settings.overrides)?;
            let input = required(input, cfg.io.input.as_ref(), "input")?;
            let gt = gt.or_else(|| cfg.io.gt.as_ref().map(PathBuf::from));
            let out_dir = required(out_dir, cfg.io.out_dir.as_ref(), "out-dir")?;
            let id = input
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Config(format!("cannot derive an image id from {}", input.display())))?
                .to_string();
            let img = read_pgm_file(&input)?;
            let gt = gt.map(read_mask_file).transpose()?;
            cfg.fa.seed = derive_seed(cfg.fa.seed, &id);
            let result = run_pipeline(&id, &img, gt.as_ref(), &cfg)?;
            create_dir(&out_dir)?;
            write_image_outputs(&out_dir, &img, &result, cfg.report_elapsed)?;
            let status = match result.status {
                Status::Ok => "ok",
                Status::NoLung => "no-lung",
            };
            print!("{id}: {status}, {} lesion pixels", result.lesion_mask.count());
            if let Some(m) = result.metrics {
                print!(", dice {}, jaccard {}", fmt_opt(m.dice), fmt_opt(m.jaccard));
            }
            println!();
        }
        Command::Batch {
            input_dir,
            gt_dir,
            out_dir,
            jobs,
            settings,
        } => {
            let cfg = load_config(settings.config.as_deref(), &settings.overrides)?;
            let opts = BatchOptions {
                input_dir: required(input_dir, cfg.io.input_dir.as_ref(), "input-dir")?,
                gt_dir: gt_dir.or_else(|| cfg.io.gt_dir.as_ref().map(PathBuf::from)),
                out_dir: required(out_dir, cfg.io.out_dir.as_ref(), "out-dir")?,
                jobs: jobs.or(cfg.io.jobs),
            };
            if opts.jobs == Some(0) {
                return Err(Error::Config("--jobs must be at least 1".into()));
            }
            let outcome = run_batch(&cfg, &opts)?;
            let s = &outcome.summary;
            println!(
                "{} images, {} scored, {} without ground truth, {} without lungs",
                s.images, s.scored, s.skipped, s.no_lung
            );
            for m in &s.metrics {
                println!("{:<12} mean {}", m.name, fmt_opt(m.mean));
            }
        }
        Command::Score { pred, gt, scope } => {
            let pred = read_mask_file(&pred)?;
            let gt = read_mask_file(&gt)?;
            let scope = scope.map(read_mask_file).transpose()?;
            let cm = confusion(&pred, &gt, scope.as_ref())?;
            let metrics = compute_metrics(&cm)?;
            let out = serde_json::json!({ "confusion": cm, "metrics": metrics });
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
        }
        Command::Phantom(PhantomCommand::Generate {
            spec,
            out_dir,
            name,
            count,
            overrides,
        }) => {
            let cfg = load_config(spec.as_deref(), &overrides)?;
            let base = cfg.phantom_spec()?;
            create_dir(&out_dir)?;
            for i in 0..count {
                let spec = base.clone().with_seed(base.seed.wrapping_add(i));
                let p = generate_phantom(&spec)?;
                let stem = if count == 1 { name.clone() } else { format!("{name}_{i:03}") };
                write_file(out_dir.join(format!("{stem}.pgm")), &save_pgm(&p.image))?;
                write_file(out_dir.join(format!("{stem}_gt.pgm")), &save_mask(&p.lesion_truth))?;
                write_file(out_dir.join(format!("{stem}_lung.pgm")), &save_mask(&p.lung_truth))?;
            }
            println!("wrote {count} phantom(s) to {}", out_dir.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        Error::Io { .. } | Error::Format(_) | Error::UnsupportedDepth(_) | Error::Size { .. } | Error::EmptyCorpus => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Format("x".into())), 3);
        assert_eq!(exit_code(&Error::EmptyScope), 4);
        let wrapped = Error::Stage {
            stage: ctlesion::Stage::Segment,
            source: Box::new(Error::InvalidParameter("x".into())),
        };
        assert_eq!(exit_code(&wrapped), 2);
    }
}
