//! Independent reference implementations for integration tests.
//!
//! Nothing here calls into the library's numerical code; each function is a
//! direct transcription of a definition, written for clarity over speed.

#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::Path;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rewrites every `F` of `axiom` with `rhs`, `iterations - 1` times.
pub fn rewrite(axiom: &str, rhs: &str, iterations: u32) -> String {
    let mut s = axiom.to_string();
    for _ in 1..iterations {
        s = s.chars().map(|c| if c == 'F' { rhs.to_string() } else { c.to_string() }).collect();
    }
    s
}

/// `(start, end, width, intensity)` with points as `(x, y)`.
pub type Stroke = ((f64, f64), (f64, f64), f64, u8);

fn dist_sq_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let len_sq = abx * abx + aby * aby;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        ((apx * abx + apy * aby) / len_sq).clamp(0.0, 1.0)
    };
    let (dx, dy) = (a.0 + t * abx - p.0, a.1 + t * aby - p.1);
    dx * dx + dy * dy
}

/// Every pixel center tested against every stroke.
pub fn capsule_raster(strokes: &[Stroke], h: usize, w: usize) -> (Array2<u8>, Array2<bool>) {
    let mut pixels = Array2::<u8>::zeros((h, w));
    let mut mask = Array2::from_elem((h, w), false);
    for r in 0..h {
        for c in 0..w {
            let p = (c as f64 + 0.5, r as f64 + 0.5);
            for &(a, b, width, value) in strokes {
                if dist_sq_to_segment(p, a, b) <= (width / 2.0) * (width / 2.0) {
                    mask[[r, c]] = true;
                    pixels[[r, c]] = pixels[[r, c]].max(value);
                }
            }
        }
    }
    (pixels, mask)
}

pub fn dft2(x: &Array2<f64>) -> Array2<Complex64> {
    let (h, w) = x.dim();
    Array2::from_shape_fn((h, w), |(u, v)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..h {
            for c in 0..w {
                let ang = -TAU * ((u * r) as f64 / h as f64 + (v * c) as f64 / w as f64);
                acc += x[[r, c]] * Complex64::from_polar(1.0, ang);
            }
        }
        acc
    })
}

pub fn idft2(x: &Array2<Complex64>) -> Array2<Complex64> {
    let (h, w) = x.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for u in 0..h {
            for v in 0..w {
                let ang = TAU * ((u * r) as f64 / h as f64 + (v * c) as f64 / w as f64);
                acc += x[[u, v]] * Complex64::from_polar(1.0, ang);
            }
        }
        acc / (h * w) as f64
    })
}

/// Whether DFT index `(u, v)` lies in the centered low-frequency square of
/// nominal side `floor(beta * min(h, w))`, reduced to the largest odd side
/// so that the square is symmetric about DC.
pub fn in_window(u: usize, v: usize, h: usize, w: usize, beta: f64) -> bool {
    let side = (beta * h.min(w) as f64).floor() as i64;
    if side < 1 {
        return false;
    }
    let radius = (side - 1) / 2;
    let signed = |k: usize, n: usize| if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
    let (fy, fx) = (signed(u, h), signed(v, w));
    fy.abs() <= radius && fx.abs() <= radius
}

/// Target amplitude with source phase inside the window, source elsewhere.
pub fn swapped_spectrum(src: &Array2<f64>, tgt: &Array2<f64>, beta: f64) -> Array2<Complex64> {
    let (h, w) = src.dim();
    let s = dft2(src);
    let t = dft2(tgt);
    Array2::from_shape_fn((h, w), |(u, v)| {
        if in_window(u, v, h, w, beta) {
            Complex64::from_polar(t[[u, v]].norm(), s[[u, v]].arg())
        } else {
            s[[u, v]]
        }
    })
}

/// `ksize` taps of `exp(-x^2 / 2 sigma^2)`, normalized.
pub fn gaussian_taps(ksize: usize, sigma: f64) -> Vec<f64> {
    let half = (ksize / 2) as f64;
    let raw: Vec<f64> = (0..ksize)
        .map(|i| {
            let x = i as f64 - half;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|v| v / sum).collect()
}

/// Mirror without repeating the edge: `-1 -> 1`, `n -> n - 2`.
pub fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - k;
    }
    k as usize
}

/// Dense 2-D convolution with the outer-product kernel.
pub fn dense_blur(x: &Array2<f64>, ksize: usize, sigma: f64) -> Array2<f64> {
    let taps = gaussian_taps(ksize, sigma);
    let half = (ksize / 2) as i64;
    let (h, w) = x.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        let mut acc = 0.0;
        for (i, ky) in taps.iter().enumerate() {
            for (j, kx) in taps.iter().enumerate() {
                let rr = reflect(r as i64 + i as i64 - half, h);
                let cc = reflect(c as i64 + j as i64 - half, w);
                acc += ky * kx * x[[rr, cc]];
            }
        }
        acc
    })
}

pub fn quantize(x: &Array2<f64>) -> Array2<u8> {
    x.mapv(|v| v.round().clamp(0.0, 255.0) as u8)
}

/// Amplitude swap, blur and quantization, all by direct evaluation.
pub fn synthesize_oracle(frac: &Array2<u8>, tgt: &Array2<u8>, beta: f64, ksize: usize, sigma: f64) -> Array2<u8> {
    let spec = swapped_spectrum(&frac.mapv(f64::from), &tgt.mapv(f64::from), beta);
    let fused = idft2(&spec).mapv(|c| c.re);
    quantize(&dense_blur(&fused, ksize, sigma))
}

/// Per-pixel strict comparisons against 8 replicated-border neighbors along
/// left, right, top, bottom.
pub fn liot<T: PartialOrd + Copy>(x: &Array2<T>) -> Array3<u8> {
    let (h, w) = x.dim();
    let at = |r: i64, c: i64| x[[r.clamp(0, h as i64 - 1) as usize, c.clamp(0, w as i64 - 1) as usize]];
    Array3::from_shape_fn((4, h, w), |(d, r, c)| {
        let (r, c) = (r as i64, c as i64);
        let mut code = 0u32;
        for m in 1..=8i64 {
            let n = match d {
                0 => at(r, c - m),
                1 => at(r, c + m),
                2 => at(r - m, c),
                _ => at(r + m, c),
            };
            if at(r, c) > n {
                code += 1 << (m - 1);
            }
        }
        code as u8
    })
}

pub const EPS: f64 = 1e-7;

fn clampp(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

pub fn discriminator_loss(d_syn: &Array2<f64>, d_tgt: &Array2<f64>) -> f64 {
    let mut a = 0.0;
    for &p in d_syn.iter() {
        a += clampp(p).ln();
    }
    let mut b = 0.0;
    for &p in d_tgt.iter() {
        b += (1.0 - clampp(p)).ln();
    }
    -(a / d_syn.len() as f64 + b / d_tgt.len() as f64)
}

pub fn psal(d_tgt: &Array2<f64>) -> f64 {
    let mut a = 0.0;
    for &p in d_tgt.iter() {
        a += clampp(p).ln();
    }
    -a / d_tgt.len() as f64
}

pub fn seg_loss(g: &Array2<bool>, y: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    for (&gi, &yi) in g.iter().zip(y.iter()) {
        let p = clampp(yi);
        total += if gi { p.ln() } else { (1.0 - p).ln() };
    }
    -total / g.len() as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Plain softmax without stabilization. Rows are already unit vectors.
pub fn cmcl(queries: &[Vec<f64>], positives: &[Vec<f64>], negatives: &[Vec<f64>], tau: f64) -> f64 {
    let c = positives[0].len();
    let mut mean = vec![0.0; c];
    for p in positives {
        for j in 0..c {
            mean[j] += p[j];
        }
    }
    let norm = dot(&mean, &mean).sqrt();
    let anchor: Vec<f64> = mean.iter().map(|v| v / norm).collect();
    let mut total = 0.0;
    for q in queries {
        let pos = (dot(q, &anchor) / tau).exp();
        let neg: f64 = negatives.iter().map(|n| (dot(q, n) / tau).exp()).sum();
        total += -(pos / (pos + neg)).ln();
    }
    total / queries.len() as f64
}

pub fn unit_vectors(n: usize, c: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dot(&v, &v).sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// `(tp, fp, tn, fn)`
pub fn count_confusion(pred: &Array2<bool>, gt: &Array2<bool>) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
    let (h, w) = pred.dim();
    for r in 0..h {
        for c in 0..w {
            match (pred[[r, c]], gt[[r, c]]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fneg += 1,
            }
        }
    }
    (tp, fp, tn, fneg)
}

/// Smooth textured stand-ins for unlabeled target images.
pub fn write_targets(dir: &Path, n: usize, (h, w): (usize, usize)) {
    std::fs::create_dir_all(dir).unwrap();
    for k in 0..n {
        let kf = k as f64;
        let img = Array2::from_shape_fn((h, w), |(r, c)| {
            let (y, x) = (r as f64, c as f64);
            let v = 120.0
                + 40.0 * ((x / (37.0 + kf * 11.0)).sin() * (y / 53.0).cos())
                + 25.0 * ((x * 0.9 + y * 1.3 + kf * 7.0) * 0.21).sin();
            v as u8
        });
        let (w32, h32) = (w as u32, h as u32);
        let buf = image::GrayImage::from_raw(w32, h32, img.iter().copied().collect()).unwrap();
        buf.save(dir.join(format!("target_{k}.png"))).unwrap();
    }
}

/// Every file below `root`, relative path and contents, sorted by path.
pub fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
