//! PNG input and output for grayscale images and binary masks.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How color inputs are reduced to one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GrayMode {
    /// Rec. 601 luma, `0.299 R + 0.587 G + 0.114 B`.
    #[default]
    Luminance,
    /// The green channel alone.
    Green,
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn rgb_to_gray(rgb: &Array3<u8>, mode: GrayMode) -> Array2<u8> {
    let (h, w, _) = rgb.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        let (red, green, blue) = (rgb[[r, c, 0]], rgb[[r, c, 1]], rgb[[r, c, 2]]);
        match mode {
            GrayMode::Luminance => {
                let y = 0.299 * f64::from(red) + 0.587 * f64::from(green) + 0.114 * f64::from(blue);
                y.round().clamp(0.0, 255.0) as u8
            }
            GrayMode::Green => green,
        }
    })
}

/// Reads any supported image as 8-bit grayscale.
pub fn read_gray(path: &Path, mode: GrayMode) -> Result<Array2<u8>> {
    let img = open(path)?;
    if img.color().has_color() {
        Ok(rgb_to_gray(&dynamic_to_rgb(img), mode))
    } else {
        let luma = img.into_luma8();
        let (w, h) = luma.dimensions();
        Ok(Array2::from_shape_vec((h as usize, w as usize), luma.into_raw()).expect("buffer size"))
    }
}

fn dynamic_to_rgb(img: DynamicImage) -> Array3<u8> {
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    Array3::from_shape_vec((h as usize, w as usize, 3), rgb.into_raw()).expect("buffer size")
}

/// Reads an image as `(H, W, C)` with `C = 1` for grayscale inputs and
/// `C = 3` otherwise.
pub fn read_any(path: &Path) -> Result<Array3<u8>> {
    let img = open(path)?;
    if img.color().has_color() {
        Ok(dynamic_to_rgb(img))
    } else {
        let g = read_gray(path, GrayMode::Luminance)?;
        Ok(g.insert_axis(ndarray::Axis(2)))
    }
}

/// Nonzero pixels are foreground.
pub fn read_mask(path: &Path) -> Result<Array2<bool>> {
    Ok(read_gray(path, GrayMode::Luminance)?.mapv(|v| v > 0))
}

fn encode_png(data: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(data, w as u32, h as u32, color)
        .expect("in-memory png encoding");
    out
}

pub fn encode_gray(image: &Array2<u8>) -> Vec<u8> {
    let (h, w) = image.dim();
    let data: Vec<u8> = image.iter().copied().collect();
    encode_png(&data, w, h, ExtendedColorType::L8)
}

/// `(H, W, 1)` or `(H, W, 3)`.
pub fn encode_image(image: &Array3<u8>) -> Result<Vec<u8>> {
    let (h, w, c) = image.dim();
    let color = match c {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        _ => return Err(Error::param("image", format!("{c} channels cannot be written as png"))),
    };
    let data: Vec<u8> = image.iter().copied().collect();
    Ok(encode_png(&data, w, h, color))
}

/// Foreground 255, background 0.
pub fn encode_mask(mask: &Array2<bool>) -> Vec<u8> {
    encode_gray(&mask.mapv(|m| if m { 255 } else { 0 }))
}

/// Writes through a temporary sibling file and renames it into place, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::param("path", "no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_gray(path: &Path, image: &Array2<u8>) -> Result<()> {
    write_atomic(path, &encode_gray(image))
}

pub fn write_mask(path: &Path, mask: &Array2<bool>) -> Result<()> {
    write_atomic(path, &encode_mask(mask))
}
