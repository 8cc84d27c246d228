//! Command implementations behind the `tryon` binary.
//!
//! Every command computes all of its outputs before writing any of them, and
//! each file is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use crate::attention::{adjust_attention, AttentionLayerState};
use crate::compose::{
    compose_input, encode_stub, pad_to_multiple, resize_mask_with_threshold, AgnosticPerson,
    ComposedInput,
};
use crate::config::RunConfig;
use crate::diffusion::{
    forward_diffuse, plms_sample, seeded_rng, standard_normal, start_timestep, GaussianDenoiser,
};
use crate::metrics::{ssim, SsimParams};
use crate::preprocess::{preprocess_warped_garment, Mode};
use crate::raster::{
    image_bytes, load_image, load_mask, load_segmentation, mask_bytes, requantize, save_image,
    save_mask, BinaryMask, RasterImage,
};
use crate::tensor::{Latent, Tensor3};

pub const PREPROCESSED_GARMENT: &str = "garment_preprocessed.png";
pub const PREPROCESSED_MASK: &str = "garment_mask_preprocessed.png";
pub const INPUT_IMAGE: &str = "input_image.png";
pub const INPUT_MASK: &str = "input_mask.png";
pub const INPUT_MASK_RESIZED: &str = "input_mask_resized.png";
pub const WARPED_MASK_RESIZED: &str = "warped_mask_resized.png";
pub const MANIFEST: &str = "manifest.txt";
pub const LATENT_STATS: &str = "latent_stats.csv";
pub const DEMO_STATS: &str = "stats.txt";
pub const DEMO_RENDER: &str = "demo_render.png";

/// Allowed deviation of per-coordinate sample means from the analytic target.
pub const DEMO_MEAN_TOLERANCE: f64 = 0.05;
/// Allowed relative deviation of per-coordinate sample variances.
pub const DEMO_VARIANCE_TOLERANCE: f64 = 0.05;

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| anyhow!("configuration is missing `{key}`"))
}

fn existing<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let p = required(path, key)?;
    if !p.exists() {
        bail!("`{key}` points to missing file {}", p.display());
    }
    Ok(p)
}

fn write_text_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    std::io::Write::write_all(&mut tmp, text.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let out = required(&cfg.paths.out, "out")?.to_owned();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

/// Loads the garment inputs and runs the three preprocessing steps.
pub fn run_preprocess(cfg: &RunConfig) -> Result<(RasterImage<f64>, BinaryMask)> {
    let p = &cfg.paths;
    let garment: RasterImage<f64> = load_image(existing(&p.garment, "garment")?)?;
    let mask = load_mask(
        existing(&p.garment_mask, "garment_mask")?,
        cfg.mask_threshold,
    )?;
    let seg = load_segmentation(existing(&p.segmentation, "segmentation")?, cfg.num_labels)?;
    Ok(preprocess_warped_garment(
        &garment,
        &mask,
        &seg,
        &cfg.preprocess,
    )?)
}

/// Composed input plus the masks resized to latent resolution.
#[derive(Clone, Debug)]
pub struct ComposeArtifacts {
    pub composed: ComposedInput<f64>,
    pub resized_input_mask: BinaryMask,
    pub resized_warped_mask: BinaryMask,
}

/// Latent grid for an `h x w` image: padded to the encode factor, then reduced.
pub fn latent_dims(cfg: &RunConfig, dims: (usize, usize)) -> (usize, usize) {
    let f = cfg.compose.encode_factor;
    (dims.0.div_ceil(f), dims.1.div_ceil(f))
}

/// Composes with an explicit preprocessed garment.
pub fn compose_with(
    cfg: &RunConfig,
    warped: &RasterImage<f64>,
    warped_mask: &BinaryMask,
) -> Result<ComposeArtifacts> {
    let p = &cfg.paths;
    let agnostic_img: RasterImage<f64> = load_image(existing(&p.agnostic, "agnostic")?)?;
    let keep = load_mask(
        existing(&p.agnostic_mask, "agnostic_mask")?,
        cfg.mask_threshold,
    )?;
    let agnostic = AgnosticPerson::from_filled(&agnostic_img, keep)?;
    let composed = compose_input(&agnostic, warped, warped_mask)?;
    let (lh, lw) = latent_dims(cfg, composed.image.dims());
    let t = cfg.compose.resize_threshold;
    Ok(ComposeArtifacts {
        resized_input_mask: resize_mask_with_threshold(&composed.mask, lh, lw, t)?,
        resized_warped_mask: resize_mask_with_threshold(&composed.warped_mask, lh, lw, t)?,
        composed,
    })
}

/// Composes using the preprocessed garment files named in the config.
pub fn run_compose(cfg: &RunConfig) -> Result<ComposeArtifacts> {
    let p = &cfg.paths;
    let warped: RasterImage<f64> = load_image(existing(&p.warped_garment, "warped_garment")?)?;
    let warped_mask = load_mask(existing(&p.warped_mask, "warped_mask")?, cfg.mask_threshold)?;
    compose_with(cfg, &warped, &warped_mask)
}

pub fn cmd_preprocess(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (garment, mask) = run_preprocess(cfg)?;
    let out = output_dir(cfg)?;
    let files = [
        out.join(PREPROCESSED_GARMENT),
        out.join(PREPROCESSED_MASK),
        out.join(MANIFEST),
    ];
    save_image(&garment, &files[0])?;
    save_mask(&mask, &files[1])?;
    write_text_atomic(&files[2], &cfg.manifest("preprocess"))?;
    Ok(files.to_vec())
}

pub fn cmd_compose(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let art = run_compose(cfg)?;
    let out = output_dir(cfg)?;
    let files = [
        out.join(INPUT_IMAGE),
        out.join(INPUT_MASK),
        out.join(INPUT_MASK_RESIZED),
        out.join(WARPED_MASK_RESIZED),
        out.join(MANIFEST),
    ];
    save_image(&art.composed.image, &files[0])?;
    save_mask(&art.composed.mask, &files[1])?;
    save_mask(&art.resized_input_mask, &files[2])?;
    save_mask(&art.resized_warped_mask, &files[3])?;
    write_text_atomic(&files[4], &cfg.manifest("compose"))?;
    Ok(files.to_vec())
}

pub fn cmd_ssim(a: &Path, b: &Path) -> Result<f64> {
    let a: RasterImage<f64> = load_image(a)?;
    let b: RasterImage<f64> = load_image(b)?;
    Ok(ssim(&a, &b, &SsimParams::default())?)
}

/// Summary of a demo sampling run.
#[derive(Clone, Debug)]
pub struct DemoReport {
    pub t_start: usize,
    pub trajectories: usize,
    pub mean: Latent<f64>,
    pub variance: Latent<f64>,
    pub target_mean: Latent<f64>,
    pub target_variance: f64,
    pub max_abs_mean_error: f64,
    pub max_rel_variance_error: f64,
    pub within_tolerance: bool,
    /// First trajectory after the attention-scaling transform, before rendering.
    pub adjusted: Latent<f64>,
    pub resized_warped_mask: BinaryMask,
    pub render: RasterImage<f64>,
}

/// Maps latent values `[-1, 1] -> [0, 1]` on the first three channels and
/// upsamples each latent cell to a `factor x factor` block.
pub fn render_latent(latent: &Latent<f64>, factor: usize) -> RasterImage<f64> {
    let (c, h, w) = latent.shape();
    RasterImage::from_fn(h * factor, w * factor, |i, j, ch| {
        let v = latent.get(ch.min(c - 1), i / factor, j / factor);
        ((v + 1.0) * 0.5).clamp(0.0, 1.0)
    })
    .expect("clamped samples are in range")
}

/// Samples the analytic Gaussian model from SDEdit-style starts and compares
/// the empirical latent moments with their closed form.
///
/// With unit-variance Gaussian data the probability-flow trajectory keeps the
/// latent fixed, so the sampled output has mean `sqrt(ab) * guide` and
/// variance `1 - ab` at the start timestep.
pub fn run_demo_sample(cfg: &RunConfig) -> Result<DemoReport> {
    let d = &cfg.diffusion;
    let schedule = d.schedule()?;
    let factor = cfg.compose.encode_factor;
    let guide: Latent<f64> = match &cfg.paths.input_image {
        Some(p) => {
            let img: RasterImage<f64> = load_image(p)?;
            encode_image_padded(&img, factor)?
        }
        None => Tensor3::zeros(d.latent_channels, d.latent_height, d.latent_width),
    };
    let shape = guide.shape();
    let t_start = start_timestep(d.strength, &schedule)?;
    let unperturbed = d.strength == 0.0;
    let ab = if unperturbed {
        1.0
    } else {
        schedule.alpha_bar(t_start)
    };

    let mut rng = seeded_rng(d.seed);
    let starts: Vec<Latent<f64>> = (0..d.trajectories)
        .map(|_| {
            if unperturbed {
                Ok(guide.clone())
            } else {
                let noise = standard_normal(&mut rng, shape);
                forward_diffuse(&guide, t_start, &noise, &schedule)
            }
        })
        .collect::<Result<_, _>>()?;
    let finals: Vec<Latent<f64>> = starts
        .par_iter()
        .enumerate()
        .map(|(k, z)| {
            let mut denoiser = GaussianDenoiser::standard(&schedule);
            plms_sample(&mut denoiser, z, t_start, &schedule, d.steps)
                .with_context(|| format!("trajectory {k} diverged"))
        })
        .collect::<Result<_>>()?;

    let n = finals.len() as f64;
    let len = guide.len();
    let mut mean = vec![0.0; len];
    for z in &finals {
        for (m, v) in mean.iter_mut().zip(z.data()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for z in &finals {
        for ((s, v), m) in var.iter_mut().zip(z.data()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);

    let target_mean = guide.scale(ab.sqrt());
    let target_variance = 1.0 - ab;
    let max_abs_mean_error = mean
        .iter()
        .zip(target_mean.data())
        .map(|(m, t)| (m - t).abs())
        .fold(0.0, f64::max);
    let max_rel_variance_error = var
        .iter()
        .map(|v| {
            if target_variance > 0.0 {
                (v - target_variance).abs() / target_variance
            } else {
                v.abs()
            }
        })
        .fold(0.0, f64::max);

    let (c, h, w) = shape;
    let resized_warped_mask = match &cfg.paths.warped_mask {
        Some(p) => {
            let m = load_mask(p, cfg.mask_threshold)?;
            resize_mask_with_threshold(&m, h, w, cfg.compose.resize_threshold)?
        }
        None => BinaryMask::zeros(h, w),
    };
    let state = AttentionLayerState::new(c, h, w, cfg.attention.mode, cfg.attention.alpha_init)?;
    let adjusted = adjust_attention(&finals[0], &resized_warped_mask, &state)?;
    let render = render_latent(&adjusted, factor);

    Ok(DemoReport {
        t_start,
        trajectories: d.trajectories,
        mean: Tensor3::new(c, h, w, mean)?,
        variance: Tensor3::new(c, h, w, var)?,
        target_mean,
        target_variance,
        max_abs_mean_error,
        max_rel_variance_error,
        within_tolerance: max_abs_mean_error <= DEMO_MEAN_TOLERANCE
            && max_rel_variance_error <= DEMO_VARIANCE_TOLERANCE,
        adjusted,
        resized_warped_mask,
        render,
    })
}

fn encode_image_padded(img: &RasterImage<f64>, factor: usize) -> Result<Latent<f64>> {
    Ok(encode_stub(
        &pad_to_multiple(&img.to_planar(), factor)?,
        factor,
    )?)
}

pub fn cmd_demo_sample(cfg: &RunConfig) -> Result<(DemoReport, Vec<PathBuf>)> {
    let report = run_demo_sample(cfg)?;
    let out = output_dir(cfg)?;

    let mut csv = String::from("channel,row,col,mean,variance,target_mean,target_variance\n");
    let (c, h, w) = report.mean.shape();
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let _ = writeln!(
                    csv,
                    "{ch},{i},{j},{},{},{},{}",
                    report.mean.get(ch, i, j),
                    report.variance.get(ch, i, j),
                    report.target_mean.get(ch, i, j),
                    report.target_variance
                );
            }
        }
    }
    let stats = format!(
        "max_abs_mean_error = {}\nmax_rel_variance_error = {}\nmean_tolerance = {}\nt_start = {}\ntarget_variance = {}\ntrajectories = {}\nvariance_tolerance = {}\nwithin_tolerance = {}\n",
        report.max_abs_mean_error,
        report.max_rel_variance_error,
        DEMO_MEAN_TOLERANCE,
        report.t_start,
        report.target_variance,
        report.trajectories,
        DEMO_VARIANCE_TOLERANCE,
        report.within_tolerance,
    );

    let files = [
        out.join(LATENT_STATS),
        out.join(DEMO_STATS),
        out.join(DEMO_RENDER),
        out.join(MANIFEST),
    ];
    write_text_atomic(&files[0], &csv)?;
    write_text_atomic(&files[1], &stats)?;
    save_image(&report.render, &files[2])?;
    write_text_atomic(&files[3], &cfg.manifest("demo-sample"))?;
    Ok((report, files.to_vec()))
}

/// One output of the preprocess + compose pipeline as it would land on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: &'static str,
    pub height: usize,
    pub width: usize,
    pub rgb: bool,
    pub bytes: Vec<u8>,
}

/// Preprocess followed by compose, with the preprocessed garment passed
/// through 8-bit quantization exactly as the file-based flow does.
pub fn pipeline_artifacts(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let (garment, mask) = run_preprocess(cfg)?;
    let garment = requantize(&garment);
    let art = compose_with(cfg, &garment, &mask)?;
    let img = |name, im: &RasterImage<f64>| Artifact {
        name,
        height: im.height(),
        width: im.width(),
        rgb: true,
        bytes: image_bytes(im),
    };
    let msk = |name, m: &BinaryMask| Artifact {
        name,
        height: m.height(),
        width: m.width(),
        rgb: false,
        bytes: mask_bytes(m),
    };
    Ok(vec![
        img(PREPROCESSED_GARMENT, &garment),
        msk(PREPROCESSED_MASK, &mask),
        img(INPUT_IMAGE, &art.composed.image),
        msk(INPUT_MASK, &art.composed.mask),
        msk(INPUT_MASK_RESIZED, &art.resized_input_mask),
        msk(WARPED_MASK_RESIZED, &art.resized_warped_mask),
    ])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoldenOutcome {
    Pass { checked: usize },
    Blessed { written: usize },
    Mismatch { artifact: PathBuf, detail: String },
}

/// Modes covered by the golden suite; each gets its own subdirectory.
pub const GOLDEN_MODES: [Mode; 2] = [Mode::Train, Mode::Infer];

fn read_artifact(path: &Path) -> Result<(usize, usize, bool, Vec<u8>)> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageRgb8(b) => Ok((h, w, true, b.into_raw())),
        image::DynamicImage::ImageLuma8(b) => Ok((h, w, false, b.into_raw())),
        other => bail!(
            "{}: unexpected color type {:?}",
            path.display(),
            other.color()
        ),
    }
}

/// Runs the pipeline on the configured fixtures in both modes and compares
/// decoded 8-bit samples against the stored goldens. With `bless`, the
/// goldens are (re)written instead.
pub fn cmd_golden(cfg: &RunConfig, bless: bool) -> Result<GoldenOutcome> {
    let root = required(&cfg.paths.golden_dir, "golden_dir")?.to_owned();
    let mut runs = Vec::new();
    for mode in GOLDEN_MODES {
        let mut c = cfg.clone();
        c.preprocess.mode = mode;
        runs.push((mode, pipeline_artifacts(&c)?));
    }

    let mut count = 0;
    for (mode, artifacts) in &runs {
        let dir = root.join(mode.to_string());
        if bless {
            std::fs::create_dir_all(&dir)?;
        }
        for a in artifacts {
            let path = dir.join(a.name);
            count += 1;
            if bless {
                write_artifact(a, &path)?;
                continue;
            }
            if !path.exists() {
                return Ok(GoldenOutcome::Mismatch {
                    artifact: path,
                    detail: "golden file missing".into(),
                });
            }
            let (h, w, rgb, bytes) = read_artifact(&path)?;
            let detail = if (h, w, rgb) != (a.height, a.width, a.rgb) {
                Some(format!(
                    "expected {}x{} {}, golden is {h}x{w} {}",
                    a.height,
                    a.width,
                    if a.rgb { "rgb" } else { "gray" },
                    if rgb { "rgb" } else { "gray" }
                ))
            } else {
                bytes
                    .iter()
                    .zip(&a.bytes)
                    .position(|(x, y)| x != y)
                    .map(|idx| {
                        let ch = if a.rgb { 3 } else { 1 };
                        let px = idx / ch;
                        format!(
                            "first difference at row {}, col {}: golden {} vs produced {}",
                            px / a.width,
                            px % a.width,
                            bytes[idx],
                            a.bytes[idx]
                        )
                    })
            };
            if let Some(detail) = detail {
                return Ok(GoldenOutcome::Mismatch {
                    artifact: path,
                    detail,
                });
            }
        }
    }
    Ok(if bless {
        GoldenOutcome::Blessed { written: count }
    } else {
        GoldenOutcome::Pass { checked: count }
    })
}

fn write_artifact(a: &Artifact, path: &Path) -> Result<()> {
    if a.rgb {
        let data = a.bytes.iter().map(|&b| b as f64 / 255.0).collect();
        save_image(&RasterImage::new(a.height, a.width, data)?, path)?;
    } else {
        let data = a.bytes.iter().map(|&b| b != 0).collect();
        save_mask(&BinaryMask::new(a.height, a.width, data)?, path)?;
    }
    Ok(())
}
