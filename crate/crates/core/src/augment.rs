//! Paired geometric and photometric augmentation.
//!
//! Geometric ops (horizontal flip, quarter-turn rotation, crop) move image
//! and mask together. Photometric ops (brightness/contrast, saturation,
//! additive Gaussian noise) touch the image only. Every decision is drawn
//! from the rng in a fixed order whether or not the op fires, so the same
//! seed always yields the same [`AugmentRecord`].

use ndarray::{Array, Array2, Array3, ArrayView, ArrayView3, Axis, Dimension, Slice};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub hflip_prob: f64,
    /// Probability of a rotation; 90, 180 and 270 degrees are equally likely.
    pub rotation_prob: f64,
    pub brightness_contrast_prob: f64,
    pub brightness_contrast_range: (f64, f64),
    /// Only applies to 3-channel images.
    pub saturation_prob: f64,
    pub saturation_range: (f64, f64),
    pub noise_prob: f64,
    /// Range of the noise standard deviation, in intensity units.
    pub noise_amplitude_range: (f64, f64),
    /// `(height, width)`; `None` keeps the full image.
    pub crop: Option<(usize, usize)>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            hflip_prob: 0.5,
            rotation_prob: 0.5,
            brightness_contrast_prob: 0.5,
            brightness_contrast_range: (1.0, 2.1),
            saturation_prob: 0.5,
            saturation_range: (0.5, 1.5),
            noise_prob: 0.5,
            noise_amplitude_range: (0.0, 5.0),
            crop: Some((256, 256)),
        }
    }
}

impl AugmentConfig {
    /// No-op configuration.
    pub fn identity() -> Self {
        AugmentConfig {
            hflip_prob: 0.0,
            rotation_prob: 0.0,
            brightness_contrast_prob: 0.0,
            saturation_prob: 0.0,
            noise_prob: 0.0,
            crop: None,
            ..AugmentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("hflip_prob", self.hflip_prob),
            ("rotation_prob", self.rotation_prob),
            ("brightness_contrast_prob", self.brightness_contrast_prob),
            ("saturation_prob", self.saturation_prob),
            ("noise_prob", self.noise_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, format!("probability {p} not in [0, 1]")));
            }
        }
        for (name, (lo, hi)) in [
            ("brightness_contrast_range", self.brightness_contrast_range),
            ("saturation_range", self.saturation_range),
            ("noise_amplitude_range", self.noise_amplitude_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) {
                return Err(Error::param(name, format!("({lo}, {hi}) is not a valid range")));
            }
        }
        if let Some((h, w)) = self.crop {
            if h == 0 || w == 0 {
                return Err(Error::param("crop", "must be non-empty"));
            }
        }
        Ok(())
    }
}

/// What [`apply`] actually did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentRecord {
    pub hflip: bool,
    /// Clockwise quarter turns, 0..=3.
    pub quarter_turns: u8,
    /// Top-left corner of the crop in the rotated frame.
    pub crop_origin: (usize, usize),
    pub crop_size: (usize, usize),
    pub brightness: Option<f64>,
    pub contrast: Option<f64>,
    pub saturation: Option<f64>,
    pub noise_std: Option<f64>,
}

impl AugmentRecord {
    /// Input pixel that output pixel `(row, col)` was taken from, given the
    /// input's `(height, width)`.
    pub fn preimage(&self, (row, col): (usize, usize), (h, w): (usize, usize)) -> (usize, usize) {
        let (mut r, mut c) = (row + self.crop_origin.0, col + self.crop_origin.1);
        // undo the clockwise turns one at a time; frame dims alternate
        let (mut fh, mut fw) = if self.quarter_turns % 2 == 1 { (w, h) } else { (h, w) };
        for _ in 0..self.quarter_turns {
            // out[r][c] = in[fw - 1 - c][r] where the input frame is (fw, fh)
            (r, c) = (fw - 1 - c, r);
            (fh, fw) = (fw, fh);
        }
        debug_assert_eq!((fh, fw), (h, w));
        if self.hflip {
            c = w - 1 - c;
        }
        (r, c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    /// `(H, W, C)`
    pub image: Array3<u8>,
    pub mask: Option<Array2<bool>>,
    pub record: AugmentRecord,
}

/// Rotates `(H, W, ...)` data by `k` clockwise quarter turns.
fn rotate_cw<T: Clone, D: Dimension>(a: ArrayView<'_, T, D>, k: u8) -> Array<T, D> {
    let mut v = a;
    for _ in 0..k % 4 {
        v.swap_axes(0, 1);
        v.invert_axis(Axis(1));
    }
    v.to_owned()
}

/// Flip, rotate, crop; axes 0 and 1 are rows and columns.
fn geometric<T: Clone, D: Dimension>(a: ArrayView<'_, T, D>, rec: &AugmentRecord) -> Array<T, D> {
    let mut v = a;
    if rec.hflip {
        v.invert_axis(Axis(1));
    }
    let rotated = rotate_cw(v, rec.quarter_turns);
    let (o, sz) = (rec.crop_origin, rec.crop_size);
    rotated
        .slice_axis(Axis(0), Slice::from(o.0..o.0 + sz.0))
        .slice_axis(Axis(1), Slice::from(o.1..o.1 + sz.1))
        .to_owned()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Augments an `(H, W, C)` image (`C` = 1 or 3) and optional mask.
pub fn apply<R: Rng + ?Sized>(
    image: ArrayView3<'_, u8>,
    mask: Option<&Array2<bool>>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Augmented> {
    cfg.validate()?;
    let (h, w, channels) = image.dim();
    if let Some(m) = mask {
        if m.dim() != (h, w) {
            return Err(Error::DimensionMismatch {
                expected: (h, w),
                actual: m.dim(),
            });
        }
    }

    // decisions, always drawn in this order
    let hflip = rng.random_bool(cfg.hflip_prob);
    let rotate = rng.random_bool(cfg.rotation_prob);
    let turns: u8 = rng.random_range(1..=3);
    let quarter_turns = if rotate { turns } else { 0 };
    let (rh, rw) = if quarter_turns % 2 == 1 { (w, h) } else { (h, w) };
    let crop_size = cfg.crop.unwrap_or((rh, rw));
    if crop_size.0 > rh || crop_size.1 > rw {
        return Err(Error::CropTooLarge {
            crop: crop_size,
            image: (rh, rw),
        });
    }
    let crop_origin = (
        rng.random_range(0..=rh - crop_size.0),
        rng.random_range(0..=rw - crop_size.1),
    );
    let bc = rng.random_bool(cfg.brightness_contrast_prob);
    let brightness = uniform(rng, cfg.brightness_contrast_range);
    let contrast = uniform(rng, cfg.brightness_contrast_range);
    let sat = rng.random_bool(cfg.saturation_prob);
    let saturation = uniform(rng, cfg.saturation_range);
    let noisy = rng.random_bool(cfg.noise_prob);
    let noise_std = uniform(rng, cfg.noise_amplitude_range);

    let record = AugmentRecord {
        hflip,
        quarter_turns,
        crop_origin,
        crop_size,
        brightness: bc.then_some(brightness),
        contrast: bc.then_some(contrast),
        saturation: (sat && channels == 3).then_some(saturation),
        noise_std: (noisy && noise_std > 0.0).then_some(noise_std),
    };

    let image = geometric(image, &record);
    let mask = mask.map(|m| geometric(m.view(), &record));

    let image = photometric(image, &record, rng);
    Ok(Augmented { image, mask, record })
}

fn photometric<R: Rng + ?Sized>(img: Array3<u8>, rec: &AugmentRecord, rng: &mut R) -> Array3<u8> {
    if rec.brightness.is_none() && rec.saturation.is_none() && rec.noise_std.is_none() {
        return img;
    }
    let mut f = img.mapv(f64::from);
    if let (Some(b), Some(c)) = (rec.brightness, rec.contrast) {
        let mean = f.mean().unwrap_or(0.0);
        f.mapv_inplace(|v| b * (c * (v - mean) + mean));
    }
    if let Some(s) = rec.saturation {
        for mut px in f.lanes_mut(Axis(2)) {
            let gray = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
            px.mapv_inplace(|v| gray + s * (v - gray));
        }
    }
    if let Some(std) = rec.noise_std {
        let normal = Normal::new(0.0, std).expect("positive std");
        f.mapv_inplace(|v| v + normal.sample(rng));
    }
    f.mapv(|v| v.round().clamp(0.0, 255.0) as u8)
}

/// [`apply`] for single-channel images.
pub fn apply_gray<R: Rng + ?Sized>(
    image: &Array2<u8>,
    mask: Option<&Array2<bool>>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(Array2<u8>, Option<Array2<bool>>, AugmentRecord)> {
    let view = image.view().insert_axis(Axis(2));
    let out = apply(view, mask, cfg, rng)?;
    Ok((out.image.index_axis_move(Axis(2), 0), out.mask, out.record))
}
