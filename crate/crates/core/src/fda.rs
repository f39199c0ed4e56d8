//! Fourier-domain appearance transfer and the post-fusion blur.
//!
//! The fractal image keeps its phase (and so its geometry) while the
//! low-frequency amplitudes, which carry global brightness and texture, are
//! taken from an unlabeled target image.

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fft::{fft2_complex, transform_in_place};
use crate::raster::FractalImage;

/// Square low-frequency window centered on DC.
///
/// The nominal side is `floor(beta * min(H, W))`. Frequencies `(ky, kx)` in
/// signed form are swapped when `|ky| <= r` and `|kx| <= r` with
/// `r = floor((side - 1) / 2)`, so the window is symmetric under
/// `k -> -k` and the fused spectrum stays Hermitian (real output). A side of
/// 0 swaps nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapWindow {
    radius: Option<usize>,
}

impl SwapWindow {
    pub fn new(height: usize, width: usize, beta: f64) -> Self {
        let side = (beta * height.min(width) as f64).floor() as usize;
        SwapWindow {
            radius: side.checked_sub(1).map(|s| s / 2),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.radius.is_none()
    }

    /// Actual side length in coefficients.
    pub fn side(&self) -> usize {
        self.radius.map_or(0, |r| 2 * r + 1)
    }

    /// Whether natural-order coefficient `(u, v)` of an `h x w` spectrum is swapped.
    pub fn contains(&self, (u, v): (usize, usize), (h, w): (usize, usize)) -> bool {
        match self.radius {
            None => false,
            Some(r) => signed_freq(u, h).unsigned_abs() <= r && signed_freq(v, w).unsigned_abs() <= r,
        }
    }
}

/// Natural index `k` of an `n`-point DFT as a signed frequency in `[-n/2, n/2)`.
fn signed_freq(k: usize, n: usize) -> isize {
    if 2 * k < n {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Source coefficients with their amplitude replaced by the target's inside
/// `window`. Phase is always the source's.
pub fn swap_spectrum(
    src: &Array2<Complex64>,
    tgt: &Array2<Complex64>,
    window: SwapWindow,
) -> Array2<Complex64> {
    let dim = src.dim();
    let mut out = src.clone();
    if window.is_empty() {
        return out;
    }
    Zip::indexed(&mut out).and(tgt).for_each(|idx, o, t| {
        if window.contains(idx, dim) {
            *o = Complex64::from_polar(t.norm(), o.arg());
        }
    });
    out
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::param("beta", format!("{beta} not in [0, 1)")));
    }
    Ok(())
}

/// Amplitude transfer without clamping; the real part of the inverse
/// transform of [`swap_spectrum`].
pub fn amplitude_swap_raw(
    src: &Array2<f64>,
    tgt: &Array2<f64>,
    beta: f64,
    exec: Execution,
) -> Result<Array2<f64>> {
    check_beta(beta)?;
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch {
            expected: src.dim(),
            actual: tgt.dim(),
        });
    }
    let (h, w) = src.dim();
    let window = SwapWindow::new(h, w, beta);
    if window.is_empty() {
        return Ok(src.clone());
    }
    let s = fft2_complex(src, exec);
    let t = fft2_complex(tgt, exec);
    let mut fused = swap_spectrum(&s, &t, window);
    transform_in_place(&mut fused, true, exec);
    Ok(fused.mapv(|c| c.re))
}

/// [`amplitude_swap_raw`] clamped to `[0, 255]`.
pub fn amplitude_swap(src: &Array2<f64>, tgt: &Array2<f64>, beta: f64) -> Result<Array2<f64>> {
    let mut out = amplitude_swap_raw(src, tgt, beta, Execution::default())?;
    out.mapv_inplace(|v| v.clamp(0.0, 255.0));
    Ok(out)
}

/// Sampled 1-D Gaussian normalized to sum 1.
pub fn gaussian_kernel(ksize: usize, sigma: f64) -> Result<Vec<f64>> {
    if ksize == 0 || ksize.is_multiple_of(2) {
        return Err(Error::param("ksize", format!("{ksize} is not a positive odd number")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("{sigma} is not positive")));
    }
    let half = (ksize / 2) as f64;
    let mut k: Vec<f64> = (0..ksize)
        .map(|i| {
            let x = i as f64 - half;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

/// Mirror index into `0..n` without repeating the edge sample
/// (`dcb|abcd|cba`).
pub(crate) fn reflect_101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// Separable Gaussian blur with mirrored borders.
pub fn gaussian_blur(image: &Array2<f64>, ksize: usize, sigma: f64) -> Result<Array2<f64>> {
    let kernel = gaussian_kernel(ksize, sigma)?;
    if ksize == 1 {
        return Ok(image.clone());
    }
    let half = (ksize / 2) as isize;
    let (h, w) = image.dim();
    let horizontal = Array2::from_shape_fn((h, w), |(r, c)| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &wt)| wt * image[[r, reflect_101(c as isize + k as isize - half, w)]])
            .sum::<f64>()
    });
    Ok(Array2::from_shape_fn((h, w), |(r, c)| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &wt)| wt * horizontal[[reflect_101(r as isize + k as isize - half, h), c]])
            .sum::<f64>()
    }))
}

pub fn to_f64(image: &Array2<u8>) -> Array2<f64> {
    image.mapv(f64::from)
}

/// Round to nearest and clamp into 8 bits.
pub fn quantize(image: &Array2<f64>) -> Array2<u8> {
    image.mapv(|v| v.round().clamp(0.0, 255.0) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdaParams {
    pub beta: f64,
    pub ksize: usize,
    pub sigma: f64,
}

impl Default for FdaParams {
    fn default() -> Self {
        FdaParams {
            beta: 0.3,
            ksize: 13,
            sigma: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthMeta {
    pub target_id: String,
    pub seed: u64,
}

/// Fused training image and its (untouched) label.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub image: Array2<u8>,
    pub mask: Array2<bool>,
    pub meta: SynthMeta,
}

/// Intermediate products of [`synthesize_staged`].
#[derive(Debug, Clone)]
pub struct SynthStages {
    /// Amplitude-swapped image before blur, unclamped.
    pub fused: Array2<f64>,
    /// Blurred image before quantization.
    pub blurred: Array2<f64>,
}

/// Amplitude swap then blur, clamping and quantizing once at the end.
pub fn synthesize(
    frac: &FractalImage,
    target: &Array2<u8>,
    params: &FdaParams,
    meta: SynthMeta,
) -> Result<SynthPair> {
    synthesize_staged(frac, target, params, meta, Execution::default()).map(|(pair, _)| pair)
}

pub fn synthesize_staged(
    frac: &FractalImage,
    target: &Array2<u8>,
    params: &FdaParams,
    meta: SynthMeta,
    exec: Execution,
) -> Result<(SynthPair, SynthStages)> {
    let fused = amplitude_swap_raw(&to_f64(&frac.pixels), &to_f64(target), params.beta, exec)?;
    let blurred = gaussian_blur(&fused, params.ksize, params.sigma)?;
    let pair = SynthPair {
        image: quantize(&blurred),
        mask: frac.mask.clone(),
        meta,
    };
    Ok((pair, SynthStages { fused, blurred }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{rasterize, Segment, TurtleProgram};
    use crate::rng::seeded;
    use crate::testutil::dft2;
    use proptest::prelude::*;
    use rand::Rng;

    fn random(h: usize, w: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded(seed);
        Array2::from_shape_fn((h, w), |_| rng.random_range(0.0..255.0))
    }

    fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn window_geometry() {
        assert!(SwapWindow::new(16, 16, 0.0).is_empty());
        assert!(SwapWindow::new(16, 16, 0.05).is_empty());
        assert_eq!(SwapWindow::new(16, 16, 0.5).side(), 7);
        assert_eq!(SwapWindow::new(512, 512, 0.3).side(), 153);
        let win = SwapWindow::new(16, 16, 0.5);
        assert!(win.contains((0, 0), (16, 16)));
        assert!(win.contains((3, 13), (16, 16)));
        assert!(!win.contains((4, 0), (16, 16)));
        assert!(!win.contains((0, 12), (16, 16)));
        assert_eq!(signed_freq(8, 16), -8);
        assert_eq!(signed_freq(7, 15), 7);
        assert_eq!(signed_freq(8, 15), -7);
    }

    #[test]
    fn empty_window_is_identity() {
        let src = random(16, 16, 1);
        let tgt = random(16, 16, 2);
        assert_eq!(amplitude_swap_raw(&src, &tgt, 0.0, Execution::Sequential).unwrap(), src);
    }

    #[test]
    fn self_swap_is_noop() {
        let src = random(16, 16, 3);
        let out = amplitude_swap_raw(&src, &src, 0.5, Execution::Sequential).unwrap();
        assert!(max_abs(&out, &src) <= 1e-6);
    }

    #[test]
    fn output_spectrum_is_piecewise() {
        let src = random(16, 16, 4);
        let tgt = random(16, 16, 5);
        let out = amplitude_swap_raw(&src, &tgt, 0.5, Execution::Sequential).unwrap();
        let (fs, ft, fo) = (dft2(&src), dft2(&tgt), dft2(&out));
        let win = SwapWindow::new(16, 16, 0.5);
        for ((idx, o), (s, t)) in fo.indexed_iter().zip(fs.iter().zip(&ft)) {
            let amp = if win.contains(idx, (16, 16)) { t.norm() } else { s.norm() };
            let expected = Complex64::from_polar(amp, s.arg());
            assert!((o - expected).norm() <= 1e-6, "{idx:?}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = random(16, 16, 0);
        let b = random(16, 8, 0);
        assert!(matches!(
            amplitude_swap(&a, &b, 0.3),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(amplitude_swap(&a, &a, 1.0).is_err());
        assert!(amplitude_swap(&a, &a, -0.1).is_err());
    }

    #[test]
    fn swap_clamps() {
        let src = random(16, 16, 6);
        let tgt = random(16, 16, 7).mapv(|v| v * 4.0);
        let out = amplitude_swap(&src, &tgt, 0.6).unwrap();
        assert!(out.iter().all(|&v| (0.0..=255.0).contains(&v)));
    }

    #[test]
    fn blur_identity_and_constant() {
        let img = random(9, 11, 8);
        assert_eq!(gaussian_blur(&img, 1, 2.0).unwrap(), img);
        let flat = Array2::from_elem((9, 11), 42.0);
        assert!(max_abs(&gaussian_blur(&flat, 13, 2.0).unwrap(), &flat) < 1e-12);
        assert!(gaussian_blur(&img, 4, 2.0).is_err());
        assert!(gaussian_blur(&img, 3, 0.0).is_err());
    }

    #[test]
    fn blur_impulse_is_kernel() {
        let mut img = Array2::zeros((31, 31));
        img[[15, 15]] = 1.0;
        let out = gaussian_blur(&img, 13, 2.0).unwrap();
        // dense 2-D kernel sampled independently
        let mut dense = Array2::<f64>::zeros((13, 13));
        for ((y, x), v) in dense.indexed_iter_mut() {
            let (dy, dx) = (y as f64 - 6.0, x as f64 - 6.0);
            *v = (-(dx * dx + dy * dy) / 8.0).exp();
        }
        let total = dense.sum();
        for r in 0..31 {
            for c in 0..31 {
                let (dr, dc) = (r as isize - 15, c as isize - 15);
                let expected = if dr.abs() <= 6 && dc.abs() <= 6 {
                    dense[[(dr + 6) as usize, (dc + 6) as usize]] / total
                } else {
                    0.0
                };
                assert!((out[[r, c]] - expected).abs() < 1e-15, "({r},{c})");
            }
        }
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect_101(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
        assert_eq!(reflect_101(-5, 1), 0);
        assert_eq!(reflect_101(9, 2), 1);
    }

    fn fixture_fractal() -> FractalImage {
        let p = TurtleProgram {
            segments: vec![
                Segment::new([4.0, 30.0], [60.0, 10.0], 5.0, 180),
                Segment::new([30.0, 20.0], [40.0, 60.0], 3.0, 90),
            ],
        };
        rasterize(&p, 64, 64).unwrap()
    }

    #[test]
    fn stages_compose() {
        let frac = fixture_fractal();
        let tgt = quantize(&random(64, 64, 9));
        let meta = SynthMeta { target_id: "t".into(), seed: 1 };
        let id = synthesize(&frac, &tgt, &FdaParams { beta: 0.0, ksize: 1, sigma: 1.0 }, meta.clone()).unwrap();
        assert_eq!(id.image, frac.pixels);
        assert_eq!(id.mask, frac.mask);
        let out = synthesize(&frac, &tgt, &FdaParams::default(), meta).unwrap();
        assert_eq!(out.mask, frac.mask);
        assert_ne!(out.image, frac.pixels);
    }

    proptest! {
        #[test]
        fn windows_nest(h in 2usize..64, w in 2usize..64, b1 in 0.0f64..0.99, b2 in 0.0f64..0.99) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let (a, b) = (SwapWindow::new(h, w, lo), SwapWindow::new(h, w, hi));
            for u in 0..h {
                for v in 0..w {
                    prop_assert!(!a.contains((u, v), (h, w)) || b.contains((u, v), (h, w)));
                }
            }
        }

        #[test]
        fn window_is_conjugate_symmetric(h in 2usize..40, w in 2usize..40, beta in 0.0f64..0.99) {
            let win = SwapWindow::new(h, w, beta);
            for u in 0..h {
                for v in 0..w {
                    let mirror = ((h - u) % h, (w - v) % w);
                    prop_assert_eq!(win.contains((u, v), (h, w)), win.contains(mirror, (h, w)));
                }
            }
        }

        #[test]
        fn labels_survive_synthesis(seed in any::<u64>(), beta in 0.0f64..0.9) {
            let mut rng = seeded(seed);
            let segs = (0..4).map(|_| Segment::new(
                [rng.random_range(0.0..32.0), rng.random_range(0.0..32.0)],
                [rng.random_range(0.0..32.0), rng.random_range(0.0..32.0)],
                rng.random_range(1.0..6.0),
                rng.random_range(1..=255),
            )).collect();
            let frac = rasterize(&TurtleProgram { segments: segs }, 32, 32).unwrap();
            let tgt = quantize(&random(32, 32, seed ^ 1));
            let params = FdaParams { beta, ..FdaParams::default() };
            let out = synthesize(&frac, &tgt, &params, SynthMeta { target_id: String::new(), seed }).unwrap();
            prop_assert_eq!(out.mask, frac.mask);
        }
    }
}
