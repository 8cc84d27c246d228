//! Plain-text `key = value` configuration and run manifests.
//!
//! One assignment per line, `#` starts a comment line. Relative paths are
//! resolved against the directory of the file they appear in. Manifests use
//! the same format with keys sorted, so a manifest can be fed back as a config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::attention::{AttentionMode, DEFAULT_ALPHA_INIT};
use crate::compose::{DEFAULT_ENCODE_FACTOR, DEFAULT_RESIZE_THRESHOLD};
use crate::diffusion::{
    make_linear_schedule, NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START,
    DEFAULT_SAMPLING_STEPS, DEFAULT_TRAIN_STEPS,
};
use crate::error::{Error, Result};
use crate::preprocess::PreprocessConfig;
use crate::raster::{LabelSet, DEFAULT_NUM_LABELS};

#[derive(Clone, Debug, PartialEq)]
pub struct ComposeConfig {
    pub encode_factor: usize,
    pub resize_threshold: f64,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self {
            encode_factor: DEFAULT_ENCODE_FACTOR,
            resize_threshold: DEFAULT_RESIZE_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionConfig {
    pub train_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub steps: usize,
    /// Fraction of the schedule to noise the guide latent to; 1 starts from
    /// (almost) pure noise.
    pub strength: f64,
    pub seed: u64,
    pub trajectories: usize,
    /// Latent shape used by `demo-sample` when no input image is given.
    pub latent_channels: usize,
    pub latent_height: usize,
    pub latent_width: usize,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            train_steps: DEFAULT_TRAIN_STEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
            steps: DEFAULT_SAMPLING_STEPS,
            strength: 1.0,
            seed: 0,
            trajectories: 10_000,
            latent_channels: 4,
            latent_height: 8,
            latent_width: 8,
        }
    }
}

impl DiffusionConfig {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        make_linear_schedule(self.train_steps, self.beta_start, self.beta_end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionConfig {
    pub mode: AttentionMode,
    pub alpha_init: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            mode: AttentionMode::Full,
            alpha_init: DEFAULT_ALPHA_INIT,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Paths {
    pub garment: Option<PathBuf>,
    pub garment_mask: Option<PathBuf>,
    pub segmentation: Option<PathBuf>,
    pub agnostic: Option<PathBuf>,
    pub agnostic_mask: Option<PathBuf>,
    pub warped_garment: Option<PathBuf>,
    pub warped_mask: Option<PathBuf>,
    pub input_image: Option<PathBuf>,
    pub golden_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preprocess: PreprocessConfig,
    pub mask_threshold: f64,
    pub num_labels: usize,
    pub compose: ComposeConfig,
    pub diffusion: DiffusionConfig,
    pub attention: AttentionConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            mask_threshold: 0.5,
            num_labels: DEFAULT_NUM_LABELS,
            compose: ComposeConfig::default(),
            diffusion: DiffusionConfig::default(),
            attention: AttentionConfig::default(),
            paths: Paths::default(),
        }
    }
}

/// Keys that only appear in manifests. `sigma_r` is checked against the mode.
const DERIVED_KEYS: [&str; 2] = ["command", "sigma_r"];

/// Parses `key = value` lines, rejecting duplicates and malformed lines.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config {
                line: line_no,
                reason: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Config {
                line: line_no,
                reason: "empty key".into(),
            });
        }
        if map
            .insert(key.to_owned(), (line_no, v.trim().to_owned()))
            .is_some()
        {
            return Err(Error::Config {
                line: line_no,
                reason: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(map)
}

fn parse_value<V: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<V>
where
    V::Err: std::fmt::Display,
{
    value.parse().map_err(|e: V::Err| Error::Config {
        line,
        reason: format!("`{key}`: cannot parse `{value}`: {e}"),
    })
}

fn parse_labels(line: usize, value: &str) -> Result<LabelSet> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value::<u8>(line, "torso_labels", s))
        .collect()
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let map = parse_key_values(text)?;
        let mut cfg = RunConfig::default();
        let mut declared_sigma_r = None;
        for (key, (line, value)) in &map {
            let (line, v) = (*line, value.as_str());
            let p = &mut cfg.preprocess;
            let d = &mut cfg.diffusion;
            match key.as_str() {
                "mode" => p.mode = parse_value(line, key, v)?,
                "torso_labels" => p.torso_labels = parse_labels(line, v)?,
                "erosion_kernel" => p.erosion_kernel = parse_value(line, key, v)?,
                "bilateral_kernel" => p.bilateral_kernel = parse_value(line, key, v)?,
                "sigma_d" => p.sigma_d = parse_value(line, key, v)?,
                "sigma_r_train" => p.sigma_r_train = parse_value(line, key, v)?,
                "sigma_r_infer" => p.sigma_r_infer = parse_value(line, key, v)?,
                "mask_threshold" => cfg.mask_threshold = parse_value(line, key, v)?,
                "num_labels" => cfg.num_labels = parse_value(line, key, v)?,
                "encode_factor" => cfg.compose.encode_factor = parse_value(line, key, v)?,
                "resize_threshold" => cfg.compose.resize_threshold = parse_value(line, key, v)?,
                "diffusion_steps" => d.train_steps = parse_value(line, key, v)?,
                "beta_start" => d.beta_start = parse_value(line, key, v)?,
                "beta_end" => d.beta_end = parse_value(line, key, v)?,
                "steps" => d.steps = parse_value(line, key, v)?,
                "strength" => d.strength = parse_value(line, key, v)?,
                "seed" => d.seed = parse_value(line, key, v)?,
                "trajectories" => d.trajectories = parse_value(line, key, v)?,
                "latent_channels" => d.latent_channels = parse_value(line, key, v)?,
                "latent_height" => d.latent_height = parse_value(line, key, v)?,
                "latent_width" => d.latent_width = parse_value(line, key, v)?,
                "attention_mode" => cfg.attention.mode = parse_value(line, key, v)?,
                "alpha_init" => cfg.attention.alpha_init = parse_value(line, key, v)?,
                "garment" => cfg.paths.garment = Some(resolve(base, v)),
                "garment_mask" => cfg.paths.garment_mask = Some(resolve(base, v)),
                "segmentation" => cfg.paths.segmentation = Some(resolve(base, v)),
                "agnostic" => cfg.paths.agnostic = Some(resolve(base, v)),
                "agnostic_mask" => cfg.paths.agnostic_mask = Some(resolve(base, v)),
                "warped_garment" => cfg.paths.warped_garment = Some(resolve(base, v)),
                "warped_mask" => cfg.paths.warped_mask = Some(resolve(base, v)),
                "input_image" => cfg.paths.input_image = Some(resolve(base, v)),
                "golden_dir" => cfg.paths.golden_dir = Some(resolve(base, v)),
                "out" => cfg.paths.out = Some(resolve(base, v)),
                "sigma_r" => declared_sigma_r = Some((line, parse_value::<f64>(line, key, v)?)),
                k if DERIVED_KEYS.contains(&k) => {}
                other => {
                    return Err(Error::Config {
                        line,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        if let Some((line, s)) = declared_sigma_r {
            if s != cfg.preprocess.sigma_r() {
                return Err(Error::Config {
                    line,
                    reason: format!(
                        "sigma_r = {s} disagrees with mode {} (expects {})",
                        cfg.preprocess.mode,
                        cfg.preprocess.sigma_r()
                    ),
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        if !(self.mask_threshold > 0.0 && self.mask_threshold < 1.0) {
            return Err(Error::param("mask_threshold", "must be in (0, 1)"));
        }
        if !(1..=256).contains(&self.num_labels) {
            return Err(Error::param("num_labels", "must be in 1..=256"));
        }
        if let Some(&l) = self
            .preprocess
            .torso_labels
            .iter()
            .find(|&&l| l as usize >= self.num_labels)
        {
            return Err(Error::param(
                "torso_labels",
                format!("label {l} >= num_labels"),
            ));
        }
        if self.compose.encode_factor == 0 {
            return Err(Error::param("encode_factor", "must be >= 1"));
        }
        if !(self.compose.resize_threshold > 0.0 && self.compose.resize_threshold <= 1.0) {
            return Err(Error::param("resize_threshold", "must be in (0, 1]"));
        }
        let d = &self.diffusion;
        d.schedule()?;
        if d.steps == 0 {
            return Err(Error::param("steps", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&d.strength) {
            return Err(Error::param("strength", "must be in [0, 1]"));
        }
        if d.trajectories == 0
            || d.latent_channels == 0
            || d.latent_height == 0
            || d.latent_width == 0
        {
            return Err(Error::param(
                "demo sampling",
                "counts and latent sizes must be >= 1",
            ));
        }
        if !self.attention.alpha_init.is_finite() {
            return Err(Error::param("alpha_init", "must be finite"));
        }
        Ok(())
    }

    /// Every parameter as `key -> value`, including the mode-selected `sigma_r`.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let p = &self.preprocess;
        let d = &self.diffusion;
        let labels = p
            .torso_labels
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let mut m = BTreeMap::from([
            ("mode", p.mode.to_string()),
            ("torso_labels", labels),
            ("erosion_kernel", p.erosion_kernel.to_string()),
            ("bilateral_kernel", p.bilateral_kernel.to_string()),
            ("sigma_d", p.sigma_d.to_string()),
            ("sigma_r_train", p.sigma_r_train.to_string()),
            ("sigma_r_infer", p.sigma_r_infer.to_string()),
            ("sigma_r", p.sigma_r().to_string()),
            ("mask_threshold", self.mask_threshold.to_string()),
            ("num_labels", self.num_labels.to_string()),
            ("encode_factor", self.compose.encode_factor.to_string()),
            (
                "resize_threshold",
                self.compose.resize_threshold.to_string(),
            ),
            ("diffusion_steps", d.train_steps.to_string()),
            ("beta_start", d.beta_start.to_string()),
            ("beta_end", d.beta_end.to_string()),
            ("steps", d.steps.to_string()),
            ("strength", d.strength.to_string()),
            ("seed", d.seed.to_string()),
            ("trajectories", d.trajectories.to_string()),
            ("latent_channels", d.latent_channels.to_string()),
            ("latent_height", d.latent_height.to_string()),
            ("latent_width", d.latent_width.to_string()),
            ("attention_mode", self.attention.mode.to_string()),
            ("alpha_init", self.attention.alpha_init.to_string()),
        ]);
        let paths = &self.paths;
        for (key, path) in [
            ("garment", &paths.garment),
            ("garment_mask", &paths.garment_mask),
            ("segmentation", &paths.segmentation),
            ("agnostic", &paths.agnostic),
            ("agnostic_mask", &paths.agnostic_mask),
            ("warped_garment", &paths.warped_garment),
            ("warped_mask", &paths.warped_mask),
            ("input_image", &paths.input_image),
            ("golden_dir", &paths.golden_dir),
            ("out", &paths.out),
        ] {
            if let Some(p) = path {
                m.insert(key, p.display().to_string());
            }
        }
        m
    }

    /// Manifest text: `command` plus every parameter, one sorted `key = value` per line.
    pub fn manifest(&self, command: &str) -> String {
        let mut entries = self.entries();
        entries.insert("command", command.to_owned());
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
