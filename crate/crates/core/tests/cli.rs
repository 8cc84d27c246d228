mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use tryon_core::commands::{self, run_demo_sample};
use tryon_core::fixtures::{self, synthetic_fixture, write_fixture_set};
use tryon_core::raster::load_mask;
use tryon_core::*;

fn tryon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tryon"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthetic inputs plus a config naming them, in a fresh directory.
struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let set =
            synthetic_fixture(fixtures::FIXTURE_HEIGHT, fixtures::FIXTURE_WIDTH, seed).unwrap();
        write_fixture_set(&set, &dir.path().join("in")).unwrap();
        let ws = Self { dir };
        ws.write_config("run.conf", "");
        ws
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn write_config(&self, name: &str, extra: &str) -> PathBuf {
        let text = format!(
            "garment = in/{}\ngarment_mask = in/{}\nsegmentation = in/{}\nagnostic = in/{}\nagnostic_mask = in/{}\n{extra}",
            fixtures::GARMENT_FILE,
            fixtures::GARMENT_MASK_FILE,
            fixtures::SEGMENTATION_FILE,
            fixtures::AGNOSTIC_FILE,
            fixtures::AGNOSTIC_MASK_FILE,
        );
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        let out = tryon(args);
        assert!(
            out.status.success(),
            "tryon {args:?} failed: {}",
            stderr(&out)
        );
        out
    }

    fn preprocess(&self, mode: &str, out: &str) -> PathBuf {
        let conf = self.path("run.conf");
        self.run(&[
            "preprocess",
            "--config",
            conf.to_str().unwrap(),
            "--mode",
            mode,
            "--out",
            self.path(out).to_str().unwrap(),
        ]);
        self.path(out)
    }
}

fn manifest_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join(commands::MANIFEST)).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_owned))
        .unwrap_or_else(|| panic!("no `{key}` in manifest"))
}

fn read(path: PathBuf) -> Vec<u8> {
    fs::read(path).unwrap()
}

#[test]
fn preprocess_manifest_records_mode_sigma() {
    let ws = Workspace::new(1);
    let train = ws.preprocess("train", "train");
    let infer = ws.preprocess("infer", "infer");
    assert_eq!(manifest_value(&train, "sigma_r"), "0.06");
    assert_eq!(manifest_value(&infer, "sigma_r"), "0.01");
    assert_eq!(manifest_value(&train, "mode"), "train");
    assert_eq!(manifest_value(&train, "command"), "preprocess");
    assert_ne!(
        read(train.join(commands::PREPROCESSED_GARMENT)),
        read(infer.join(commands::PREPROCESSED_GARMENT))
    );
}

#[test]
fn preprocess_is_deterministic() {
    let ws = Workspace::new(2);
    let a = ws.preprocess("infer", "a");
    let b = ws.preprocess("infer", "b");
    for f in [commands::PREPROCESSED_GARMENT, commands::PREPROCESSED_MASK] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let strip_out = |d: &Path| {
        fs::read_to_string(d.join(commands::MANIFEST))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("out = "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip_out(&a), strip_out(&b));
}

#[test]
fn compose_outputs_match_reloaded_oracle() {
    let ws = Workspace::new(3);
    let pre = ws.preprocess("infer", "pre");
    let conf = ws.write_config(
        "compose.conf",
        "warped_garment = pre/garment_preprocessed.png\nwarped_mask = pre/garment_mask_preprocessed.png\n",
    );
    let out = ws.path("composed");
    ws.run(&[
        "compose",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);

    let ia: Image = load_image(ws.path("in/agnostic.png")).unwrap();
    let keep = load_mask(ws.path("in/agnostic_mask.png"), 0.5).unwrap();
    let ia = ia.masked(&keep).unwrap();
    let cw: Image = load_image(pre.join(commands::PREPROCESSED_GARMENT)).unwrap();
    let mw = load_mask(pre.join(commands::PREPROCESSED_MASK), 0.5).unwrap();
    let (img, mask) = compose_oracle(&ia, &keep, &cw, &mw);

    let got: Image = load_image(out.join(commands::INPUT_IMAGE)).unwrap();
    let got_mask = load_mask(out.join(commands::INPUT_MASK), 0.5).unwrap();
    assert_eq!(got.data(), img.as_slice());
    let got_mask: Vec<f64> = got_mask.data().iter().map(|&b| b as u8 as f64).collect();
    assert_eq!(got_mask, mask);
    let (h, w) = got.dims();
    let resized = load_mask(out.join(commands::WARPED_MASK_RESIZED), 0.5).unwrap();
    assert_eq!(
        resized,
        resize_mask(&mw, h.div_ceil(8), w.div_ceil(8)).unwrap()
    );
    assert_eq!(manifest_value(&out, "command"), "compose");
}

#[test]
fn compose_with_empty_warped_mask_reproduces_agnostic() {
    let ws = Workspace::new(4);
    let (h, w) = (fixtures::FIXTURE_HEIGHT, fixtures::FIXTURE_WIDTH);
    save_image(&Image::zeros(h, w), ws.path("blank.png")).unwrap();
    tryon_core::raster::save_mask(&BinaryMask::zeros(h, w), ws.path("blank_mask.png")).unwrap();
    let conf = ws.write_config(
        "c.conf",
        "warped_garment = blank.png\nwarped_mask = blank_mask.png\n",
    );
    let out = ws.path("o");
    ws.run(&[
        "compose",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let ia: Image = load_image(ws.path("in/agnostic.png")).unwrap();
    let keep = load_mask(ws.path("in/agnostic_mask.png"), 0.5).unwrap();
    let got: Image = load_image(out.join(commands::INPUT_IMAGE)).unwrap();
    assert_eq!(got, ia.masked(&keep).unwrap());
    assert_eq!(
        load_mask(out.join(commands::INPUT_MASK), 0.5).unwrap(),
        keep
    );
}

#[test]
fn compose_rejects_mismatched_dimensions_without_writing() {
    let ws = Workspace::new(5);
    save_image(&Image::zeros(10, 10), ws.path("small.png")).unwrap();
    tryon_core::raster::save_mask(&BinaryMask::zeros(10, 10), ws.path("small_mask.png")).unwrap();
    let conf = ws.write_config(
        "c.conf",
        "warped_garment = small.png\nwarped_mask = small_mask.png\n",
    );
    let out = ws.path("never");
    let o = tryon(&[
        "compose",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("expected 64x48, got 10x10"),
        "{}",
        stderr(&o)
    );
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn compose_reports_offending_pixel() {
    let ws = Workspace::new(6);
    let (h, w) = (fixtures::FIXTURE_HEIGHT, fixtures::FIXTURE_WIDTH);
    save_image(&Image::filled(h, w, 0.5).unwrap(), ws.path("dirty.png")).unwrap();
    tryon_core::raster::save_mask(&BinaryMask::zeros(h, w), ws.path("m.png")).unwrap();
    let conf = ws.write_config(
        "c.conf",
        "warped_garment = dirty.png\nwarped_mask = m.png\n",
    );
    let o = tryon(&[
        "compose",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        ws.path("x").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("(0, 0)") || stderr(&o).contains("row 0"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn manifest_replays_to_identical_outputs() {
    let ws = Workspace::new(7);
    let first = ws.preprocess("train", "first");
    let manifest = first.join(commands::MANIFEST);
    let replay = ws.path("replay");
    ws.run(&[
        "preprocess",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        replay.to_str().unwrap(),
    ]);
    for f in [commands::PREPROCESSED_GARMENT, commands::PREPROCESSED_MASK] {
        assert_eq!(read(first.join(f)), read(replay.join(f)), "{f}");
    }
    assert_eq!(manifest_value(&replay, "sigma_r"), "0.06");
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    let ws = Workspace::new(8);
    for (name, extra) in [
        ("a.conf", "bogus = 1\n"),
        ("b.conf", "erosion_kernel = 20\n"),
        ("c.conf", "mode = infer\nsigma_r = 0.06\n"),
        ("d.conf", "strength = 1.5\n"),
    ] {
        let conf = ws.write_config(name, extra);
        let o = tryon(&[
            "preprocess",
            "--config",
            conf.to_str().unwrap(),
            "--out",
            ws.path("z").to_str().unwrap(),
        ]);
        assert!(!o.status.success(), "{extra} accepted");
    }
}

fn demo_config(ws: &Workspace, mode: &str) -> RunConfig {
    let conf = ws.write_config(
        &format!("demo_{mode}.conf"),
        &format!(
            "warped_mask = in/{}\ntrajectories = 400\nattention_mode = {mode}\nstrength = 0.7\nseed = 11\n",
            fixtures::GARMENT_MASK_FILE
        ),
    );
    let mut cfg = RunConfig::load(conf).unwrap();
    cfg.paths.input_image = Some(ws.path("in").join(fixtures::AGNOSTIC_FILE));
    cfg
}

#[test]
fn demo_statistics_are_reproducible() {
    let ws = Workspace::new(9);
    let conf = ws.write_config("demo.conf", "trajectories = 300\nseed = 5\n");
    let (a, b) = (ws.path("a"), ws.path("b"));
    for out in [&a, &b] {
        let o = ws.run(&[
            "demo-sample",
            "--config",
            conf.to_str().unwrap(),
            "--steps",
            "50",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(String::from_utf8_lossy(&o.stdout).contains("within tolerance"));
    }
    for f in [
        commands::LATENT_STATS,
        commands::DEMO_STATS,
        commands::DEMO_RENDER,
    ] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let other = ws.path("c");
    ws.run(&[
        "demo-sample",
        "--config",
        conf.to_str().unwrap(),
        "--seed",
        "6",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_ne!(
        read(a.join(commands::LATENT_STATS)),
        read(other.join(commands::LATENT_STATS))
    );
}

#[test]
fn demo_mean_tracks_analytic_target() {
    let ws = Workspace::new(10);
    let mut cfg = demo_config(&ws, "full");
    cfg.diffusion.trajectories = 10_000;
    let report = run_demo_sample(&cfg).unwrap();
    assert!(
        report.max_abs_mean_error <= 0.05,
        "{}",
        report.max_abs_mean_error
    );
    assert!(
        report.max_rel_variance_error <= 0.05,
        "{}",
        report.max_rel_variance_error
    );
    assert!(report.within_tolerance);
}

#[test]
fn attention_modes_differ_only_inside_warped_region() {
    let ws = Workspace::new(11);
    let full = run_demo_sample(&demo_config(&ws, "full")).unwrap();
    let fixed = run_demo_sample(&demo_config(&ws, "alpha_fixed_one")).unwrap();
    let off = run_demo_sample(&demo_config(&ws, "no_adjustment")).unwrap();
    let m = &full.resized_warped_mask;
    assert!(!m.is_empty(), "fixture garment should survive resizing");
    assert_eq!(m, &fixed.resized_warped_mask);
    let (c, h, w) = full.adjusted.shape();
    let mut differs_inside = false;
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let (a, b) = (full.adjusted.get(ch, i, j), fixed.adjusted.get(ch, i, j));
                if m.get(i, j) {
                    differs_inside |= a != b;
                    assert_eq!(b, 0.0);
                } else {
                    assert_eq!(a, b);
                    assert_eq!(a, off.adjusted.get(ch, i, j));
                }
            }
        }
    }
    assert!(differs_inside);

    // the rendered rasters inherit the same confinement
    let f = 8;
    let (rh, rw) = full.render.dims();
    for i in 0..rh {
        for j in 0..rw {
            if !m.get(i / f, j / f) {
                assert_eq!(full.render.pixel(i, j), fixed.render.pixel(i, j));
            }
        }
    }
    assert_ne!(full.render, fixed.render);
}

#[test]
fn ssim_subcommand_prints_score() {
    let dir = tempfile::tempdir().unwrap();
    let a = random_image(&mut rng(12), 16, 16);
    save_image(&a, dir.path().join("a.png")).unwrap();
    save_image(
        &Image::filled(16, 16, 0.5).unwrap(),
        dir.path().join("b.png"),
    )
    .unwrap();
    let o = tryon(&[
        "ssim",
        dir.path().join("a.png").to_str().unwrap(),
        dir.path().join("a.png").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "1.000000");
    let o = tryon(&[
        "ssim",
        dir.path().join("a.png").to_str().unwrap(),
        dir.path().join("b.png").to_str().unwrap(),
    ]);
    let v: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!(v < 0.5);
    let o = tryon(&[
        "ssim",
        dir.path().join("a.png").to_str().unwrap(),
        dir.path().join("missing.png").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}

#[test]
fn golden_cli_passes_and_detects_perturbation() {
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden/golden.conf");
    let o = tryon(&["golden", "--config", conf.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("12 artifacts match"));

    // a perturbed copy of the config must fail without touching the goldens
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(&conf).unwrap();
    let base = conf.parent().unwrap();
    let text = text
        .replace("inputs/", &format!("{}/inputs/", base.display()))
        .replace(
            "golden_dir = expected",
            &format!("golden_dir = {}/expected", base.display()),
        );
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, format!("{text}erosion_kernel = 19\n")).unwrap();
    let o = tryon(&["golden", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("golden mismatch"), "{}", stderr(&o));
}
