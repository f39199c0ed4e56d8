//! Hard-edged capsule rasterization of turtle strokes.
//!
//! Pixel `(row, col)` is sampled at its center `(col + 0.5, row + 0.5)` and
//! belongs to a stroke when that center lies within `width / 2` of the
//! stroke's center line. There is no anti-aliasing, so the mask is exact.

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MIN_CANVAS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// `[x, y]` in pixels.
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub width: f64,
    pub intensity: u8,
    /// Branch index the stroke was drawn at (1 = trunk).
    pub depth: u32,
}

impl Segment {
    pub fn new(start: [f64; 2], end: [f64; 2], width: f64, intensity: u8) -> Self {
        Segment {
            start,
            end,
            width,
            intensity,
            depth: 1,
        }
    }

    /// Squared distance from `p` to the closed segment.
    pub fn distance_sq(&self, p: [f64; 2]) -> f64 {
        let [ax, ay] = self.start;
        let (dx, dy) = (self.end[0] - ax, self.end[1] - ay);
        let (px, py) = (p[0] - ax, p[1] - ay);
        let len_sq = dx * dx + dy * dy;
        let t = if len_sq > 0.0 {
            ((px * dx + py * dy) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (ex, ey) = (px - t * dx, py - t * dy);
        ex * ex + ey * ey
    }

    pub fn covers(&self, p: [f64; 2]) -> bool {
        let r = self.width * 0.5;
        self.distance_sq(p) <= r * r
    }

    fn validate(&self, index: usize) -> Result<()> {
        let finite = self.start.iter().chain(&self.end).all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("segment", format!("segment {index} has a non-finite endpoint")));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::param("segment", format!("segment {index} has width {}", self.width)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TurtleProgram {
    pub segments: Vec<Segment>,
}

impl TurtleProgram {
    pub fn extend(&mut self, other: TurtleProgram) {
        self.segments.extend(other.segments);
    }
}

/// Rendered strokes and their label.
#[derive(Debug, Clone, PartialEq)]
pub struct FractalImage {
    pub pixels: Array2<u8>,
    pub mask: Array2<bool>,
}

impl FractalImage {
    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn foreground_fraction(&self) -> f64 {
        let n = self.mask.len().max(1);
        self.mask.iter().filter(|&&m| m).count() as f64 / n as f64
    }
}

/// Draws each segment as a capsule, resolving overlaps with `max`.
pub fn rasterize(program: &TurtleProgram, height: usize, width: usize) -> Result<FractalImage> {
    if height < MIN_CANVAS || width < MIN_CANVAS {
        return Err(Error::param(
            "canvas",
            format!("{height}x{width} is smaller than {MIN_CANVAS}x{MIN_CANVAS}"),
        ));
    }
    let mut pixels = Array2::<u8>::zeros((height, width));
    let mut mask = Array2::<bool>::from_elem((height, width), false);

    for (i, seg) in program.segments.iter().enumerate() {
        seg.validate(i)?;
        let r = seg.width * 0.5;
        let (x0, x1) = (seg.start[0].min(seg.end[0]) - r, seg.start[0].max(seg.end[0]) + r);
        let (y0, y1) = (seg.start[1].min(seg.end[1]) - r, seg.start[1].max(seg.end[1]) + r);
        // centers c + 0.5 inside [x0, x1]
        let Some(cols) = pixel_span(x0, x1, width) else { continue };
        let Some(rows) = pixel_span(y0, y1, height) else { continue };
        for row in rows {
            let cy = row as f64 + 0.5;
            for col in cols.clone() {
                if seg.covers([col as f64 + 0.5, cy]) {
                    mask[[row, col]] = true;
                    let px = &mut pixels[[row, col]];
                    *px = (*px).max(seg.intensity);
                }
            }
        }
    }
    Ok(FractalImage { pixels, mask })
}

/// Pixel indices whose centers can fall in `[lo, hi]`, clipped to `0..n`.
fn pixel_span(lo: f64, hi: f64, n: usize) -> Option<std::ops::Range<usize>> {
    let first = (lo - 0.5).floor().max(0.0);
    let last = (hi - 0.5).ceil().min(n as f64 - 1.0);
    if first > last {
        return None;
    }
    Some(first as usize..last as usize + 1)
}
