//! Flat `key = value` configuration.
//!
//! One setting per line; blank lines and lines starting with `#` are
//! ignored. Every key has a default, unknown keys are rejected, and a key
//! may appear at most once per file. Overrides applied afterwards with
//! [`PipelineConfig::set`] (the CLI's `--set` and path flags) win over file
//! values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entropy::FireflyParams;
use crate::error::{Error, Result};
use crate::mrf::MrfConfig;
use crate::phantom::{Ellipse, Lesion, PhantomSpec};
use crate::preprocess::StripConfig;

/// Pixels a stage looks at: the whole stripped slice or only the lung mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Image,
    Lung,
}

impl FromStr for Scope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Scope::Image),
            "lung" => Ok(Scope::Lung),
            _ => Err(Error::Config(format!("expected `image` or `lung`, got `{s}`"))),
        }
    }
}

impl Scope {
    fn as_str(self) -> &'static str {
        match self {
            Scope::Image => "image",
            Scope::Lung => "lung",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdConfig {
    pub k: usize,
    /// Pixels whose histogram drives the cut search and the MRF.
    pub scope: Scope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostConfig {
    pub smooth: bool,
    pub min_component_area: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IoConfig {
    pub input: Option<String>,
    pub gt: Option<String>,
    pub input_dir: Option<String>,
    pub gt_dir: Option<String>,
    pub out_dir: Option<String>,
    /// Worker count for batch runs; all available CPUs when absent.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub strip: StripConfig,
    /// `fa.seed` doubles as the global seed from which batch runs derive
    /// per-image seeds.
    pub fa: FireflyParams,
    pub threshold: ThresholdConfig,
    pub mrf: MrfConfig,
    pub post: PostConfig,
    pub metrics_scope: Scope,
    /// Record wall time in reports. Off makes reports byte-reproducible.
    pub report_elapsed: bool,
    pub io: IoConfig,
    phantom: BTreeMap<String, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            strip: StripConfig::default(),
            fa: FireflyParams::default(),
            threshold: ThresholdConfig {
                k: 2,
                scope: Scope::Lung,
            },
            mrf: MrfConfig::default(),
            post: PostConfig {
                smooth: true,
                min_component_area: 16,
            },
            metrics_scope: Scope::Image,
            report_elapsed: true,
            io: IoConfig::default(),
            phantom: BTreeMap::new(),
        }
    }
}

/// Configs are equal when every setting resolves to the same value; the
/// phantom is compared as the spec it describes.
impl PartialEq for PipelineConfig {
    fn eq(&self, other: &Self) -> bool {
        self.strip == other.strip
            && self.fa == other.fa
            && self.threshold == other.threshold
            && self.mrf == other.mrf
            && self.post == other.post
            && self.metrics_scope == other.metrics_scope
            && self.report_elapsed == other.report_elapsed
            && self.io == other.io
            && self.phantom_spec().ok() == other.phantom_spec().ok()
    }
}

const PHANTOM_KEYS: [&str; 13] = [
    "phantom.width",
    "phantom.height",
    "phantom.seed",
    "phantom.ring_inner",
    "phantom.ring_outer",
    "phantom.ring_intensity",
    "phantom.ring_sigma",
    "phantom.tissue_intensity",
    "phantom.lung_left",
    "phantom.lung_right",
    "phantom.lung_intensity",
    "phantom.lung_sigma",
    "phantom.lesions",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected on/off, got `{value}`"))),
    }
}

fn switch(v: bool) -> &'static str {
    if v {
        "on"
    } else {
        "off"
    }
}

fn floats(key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = value
        .split_whitespace()
        .map(|t| parse(key, t))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(Error::Config(format!("{key}: expected {n} numbers, got `{value}`")));
    }
    Ok(v)
}

fn ellipse(key: &str, value: &str) -> Result<Ellipse> {
    let v = floats(key, value, 4)?;
    Ok(Ellipse {
        cx: v[0],
        cy: v[1],
        rx: v[2],
        ry: v[3],
    })
}

fn intensity(key: &str, v: f64) -> Result<u8> {
    if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
        return Err(Error::Config(format!("{key}: intensity {v} is not an integer in [0, 255]")));
    }
    Ok(v as u8)
}

impl PipelineConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), n + 1) {
                return Err(Error::Config(format!(
                    "line {}: `{key}` already set on line {prev}",
                    n + 1
                )));
            }
            cfg.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(&e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "strip.min_lung_area_frac" => self.strip.min_lung_area_frac = parse(key, value)?,
            "strip.hole_fill_area" => {
                self.strip.hole_fill_area = match value {
                    "all" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "strip.min_separability" => self.strip.min_separability = parse(key, value)?,
            "fa.population" => self.fa.population = parse(key, value)?,
            "fa.iterations" => self.fa.iterations = parse(key, value)?,
            "fa.beta0" => self.fa.beta0 = parse(key, value)?,
            "fa.gamma" => self.fa.gamma = parse(key, value)?,
            "fa.alpha0" => self.fa.alpha0 = parse(key, value)?,
            "fa.alpha_decay" => self.fa.alpha_decay = parse(key, value)?,
            "fa.seed" => self.fa.seed = parse(key, value)?,
            "threshold.k" => self.threshold.k = parse(key, value)?,
            "threshold.scope" => self.threshold.scope = value.parse()?,
            "mrf.beta" => self.mrf.beta = parse(key, value)?,
            "mrf.em_iterations" => self.mrf.em_iterations = parse(key, value)?,
            "mrf.icm_sweeps" => self.mrf.icm_sweeps_per_em = parse(key, value)?,
            "mrf.rel_tolerance" => self.mrf.rel_tolerance = parse(key, value)?,
            "mrf.variance_floor" => self.mrf.variance_floor = parse(key, value)?,
            "post.smooth" => self.post.smooth = parse_switch(key, value)?,
            "post.min_component_area" => self.post.min_component_area = parse(key, value)?,
            "metrics.scope" => self.metrics_scope = value.parse()?,
            "report.elapsed" => self.report_elapsed = parse_switch(key, value)?,
            "io.input" => self.io.input = Some(value.to_string()),
            "io.gt" => self.io.gt = Some(value.to_string()),
            "io.input_dir" => self.io.input_dir = Some(value.to_string()),
            "io.gt_dir" => self.io.gt_dir = Some(value.to_string()),
            "io.out_dir" => self.io.out_dir = Some(value.to_string()),
            "io.jobs" => self.io.jobs = Some(parse(key, value)?),
            // Checked as a whole by `validate`, since width and height
            // only make sense together.
            k if PHANTOM_KEYS.contains(&k) => {
                self.phantom.insert(k.to_string(), value.to_string());
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` strings in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{}` is not `key=value`", o.as_ref())))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    /// Checks cross-field constraints and every stage's parameters.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(strip_prefix(&e));
        if self.threshold.k != 2 {
            return Err(Error::Config(format!(
                "threshold.k = {}: the three-class segmentation needs exactly 2 cuts",
                self.threshold.k
            )));
        }
        if !(self.strip.min_lung_area_frac >= 0.0 && self.strip.min_lung_area_frac <= 1.0) {
            return Err(Error::Config("strip.min_lung_area_frac must lie in [0, 1]".into()));
        }
        if !self.strip.min_separability.is_finite() {
            return Err(Error::Config("strip.min_separability must be finite".into()));
        }
        if self.io.jobs == Some(0) {
            return Err(Error::Config("io.jobs must be at least 1".into()));
        }
        self.fa.validate().map_err(wrap)?;
        self.mrf.validate().map_err(wrap)?;
        self.phantom_spec().map(|_| ())
    }

    /// The phantom described by the `phantom.*` keys: the default layout
    /// scaled to `phantom.width` x `phantom.height`, with any geometry keys
    /// replacing the scaled values.
    pub fn phantom_spec(&self) -> Result<PhantomSpec> {
        phantom_from(&self.phantom)
    }

    /// Fixes every `phantom.*` key to the values of `spec`.
    pub fn set_phantom(&mut self, spec: &PhantomSpec) -> Result<()> {
        spec.validate().map_err(|e| Error::Config(strip_prefix(&e)))?;
        self.phantom = phantom_keys(spec);
        Ok(())
    }

    /// Every key with its resolved value, in a form [`PipelineConfig::parse`]
    /// reads back to an equal config.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("strip.min_lung_area_frac", self.strip.min_lung_area_frac.to_string());
        put(
            "strip.hole_fill_area",
            self.strip.hole_fill_area.map_or("all".into(), |a| a.to_string()),
        );
        put("strip.min_separability", self.strip.min_separability.to_string());
        put("fa.population", self.fa.population.to_string());
        put("fa.iterations", self.fa.iterations.to_string());
        put("fa.beta0", self.fa.beta0.to_string());
        put("fa.gamma", self.fa.gamma.to_string());
        put("fa.alpha0", self.fa.alpha0.to_string());
        put("fa.alpha_decay", self.fa.alpha_decay.to_string());
        put("fa.seed", self.fa.seed.to_string());
        put("threshold.k", self.threshold.k.to_string());
        put("threshold.scope", self.threshold.scope.as_str().into());
        put("mrf.beta", self.mrf.beta.to_string());
        put("mrf.em_iterations", self.mrf.em_iterations.to_string());
        put("mrf.icm_sweeps", self.mrf.icm_sweeps_per_em.to_string());
        put("mrf.rel_tolerance", self.mrf.rel_tolerance.to_string());
        put("mrf.variance_floor", self.mrf.variance_floor.to_string());
        put("post.smooth", switch(self.post.smooth).into());
        put("post.min_component_area", self.post.min_component_area.to_string());
        put("metrics.scope", self.metrics_scope.as_str().into());
        put("report.elapsed", switch(self.report_elapsed).into());
        let io = [
            ("io.input", &self.io.input),
            ("io.gt", &self.io.gt),
            ("io.input_dir", &self.io.input_dir),
            ("io.gt_dir", &self.io.gt_dir),
            ("io.out_dir", &self.io.out_dir),
        ];
        for (k, v) in io {
            if let Some(v) = v {
                put(k, v.clone());
            }
        }
        if let Some(j) = self.io.jobs {
            put("io.jobs", j.to_string());
        }
        if let Ok(spec) = self.phantom_spec() {
            for k in PHANTOM_KEYS {
                put(k, phantom_keys(&spec).remove(k).expect("all keys emitted"));
            }
        }
        out
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

fn phantom_keys(spec: &PhantomSpec) -> BTreeMap<String, String> {
    let e = |l: &Ellipse| format!("{} {} {} {}", l.cx, l.cy, l.rx, l.ry);
    let lesions = if spec.lesions.is_empty() {
        "none".to_string()
    } else {
        spec.lesions
            .iter()
            .map(|l| format!("{} {} {} {} {}", l.cx, l.cy, l.radius, l.intensity, l.sigma))
            .collect::<Vec<_>>()
            .join("; ")
    };
    [
        ("phantom.width", spec.width.to_string()),
        ("phantom.height", spec.height.to_string()),
        ("phantom.seed", spec.seed.to_string()),
        ("phantom.ring_inner", spec.body.inner_radius.to_string()),
        ("phantom.ring_outer", spec.body.outer_radius.to_string()),
        ("phantom.ring_intensity", spec.body.intensity.to_string()),
        ("phantom.ring_sigma", spec.body.sigma.to_string()),
        ("phantom.tissue_intensity", spec.body.tissue_intensity.to_string()),
        ("phantom.lung_left", e(&spec.lung.left)),
        ("phantom.lung_right", e(&spec.lung.right)),
        ("phantom.lung_intensity", spec.lung.intensity.to_string()),
        ("phantom.lung_sigma", spec.lung.sigma.to_string()),
        ("phantom.lesions", lesions),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn phantom_from(keys: &BTreeMap<String, String>) -> Result<PhantomSpec> {
    let get = |k: &str| keys.get(k).map(String::as_str);
    let width = get("phantom.width").map_or(Ok(256), |v| parse("phantom.width", v))?;
    let height = get("phantom.height").map_or(Ok(256), |v| parse("phantom.height", v))?;
    let mut spec = PhantomSpec::scaled(width, height);
    for (k, v) in keys {
        let k = k.as_str();
        match k {
            "phantom.width" | "phantom.height" => {}
            "phantom.seed" => spec.seed = parse(k, v)?,
            "phantom.ring_inner" => spec.body.inner_radius = parse(k, v)?,
            "phantom.ring_outer" => spec.body.outer_radius = parse(k, v)?,
            "phantom.ring_intensity" => spec.body.intensity = parse(k, v)?,
            "phantom.ring_sigma" => spec.body.sigma = parse(k, v)?,
            "phantom.tissue_intensity" => spec.body.tissue_intensity = parse(k, v)?,
            "phantom.lung_left" => spec.lung.left = ellipse(k, v)?,
            "phantom.lung_right" => spec.lung.right = ellipse(k, v)?,
            "phantom.lung_intensity" => spec.lung.intensity = parse(k, v)?,
            "phantom.lung_sigma" => spec.lung.sigma = parse(k, v)?,
            "phantom.lesions" => {
                spec.lesions = if v.trim() == "none" {
                    Vec::new()
                } else {
                    v.split(';')
                        .map(|item| {
                            let f = floats(k, item, 5)?;
                            Ok(Lesion {
                                cx: f[0],
                                cy: f[1],
                                radius: f[2],
                                intensity: intensity(k, f[3])?,
                                sigma: f[4],
                            })
                        })
                        .collect::<Result<_>>()?
                }
            }
            _ => unreachable!("phantom keys are checked before insertion"),
        }
    }
    spec.validate().map_err(|e| Error::Config(strip_prefix(&e)))?;
    Ok(spec)
}
