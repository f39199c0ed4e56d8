mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use ndarray::Array2;

use curvisynth::imageio::{self, GrayMode};

const BETA: f64 = 0.3;
const KSIZE: usize = 13;
const SIGMA: f64 = 2.0;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn fractal() -> Array2<u8> {
    let strokes: Vec<common::Stroke> = vec![
        ((32.0, 60.0), (32.0, 30.0), 6.0, 200),
        ((32.0, 30.0), (14.0, 10.0), 4.0, 150),
        ((32.0, 30.0), (52.0, 12.0), 4.0, 120),
        ((44.0, 20.0), (60.0, 24.0), 2.0, 90),
    ];
    common::capsule_raster(&strokes, 64, 64).0
}

fn target() -> Array2<u8> {
    Array2::from_shape_fn((64, 64), |(r, c)| {
        let v = 128.0 + 60.0 * (r as f64 / 5.0).sin() * (c as f64 / 7.0).cos() + 30.0 * ((r + 2 * c) as f64 / 11.0).sin();
        v.round() as u8
    })
}

#[test]
#[ignore = "rewrites the committed fixtures"]
fn regenerate_golden() {
    let (frac, tgt) = (fractal(), target());
    imageio::write_gray(&fixture("fractal.png"), &frac).unwrap();
    imageio::write_gray(&fixture("target.png"), &tgt).unwrap();
    let golden = common::synthesize_oracle(&frac, &tgt, BETA, KSIZE, SIGMA);
    imageio::write_gray(&fixture("synthesized.png"), &golden).unwrap();
}

#[test]
fn fixtures_match_generators() {
    assert_eq!(imageio::read_gray(&fixture("fractal.png"), GrayMode::Luminance).unwrap(), fractal());
    assert_eq!(imageio::read_gray(&fixture("target.png"), GrayMode::Luminance).unwrap(), target());
}

#[test]
fn synthesize_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.png");
    let status = Command::new(env!("CARGO_BIN_EXE_curvisynth"))
        .args(["synthesize", "--fractal"])
        .arg(fixture("fractal.png"))
        .arg("--target")
        .arg(fixture("target.png"))
        .args(["--beta", &BETA.to_string(), "--ksize", &KSIZE.to_string(), "--sigma", &SIGMA.to_string(), "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let got = imageio::read_gray(&out, GrayMode::Luminance).unwrap();
    let golden = imageio::read_gray(&fixture("synthesized.png"), GrayMode::Luminance).unwrap();
    assert_eq!(got.dim(), golden.dim());
    let worst = got.iter().zip(golden.iter()).map(|(&a, &b)| a.abs_diff(b)).max().unwrap();
    let off = got.iter().zip(golden.iter()).filter(|(a, b)| a != b).count();
    assert!(worst <= 1, "max difference {worst}");
    assert!(off * 100 <= got.len(), "{off} pixels differ");
}
