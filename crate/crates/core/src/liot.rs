//! Local intensity-order transform.
//!
//! Each pixel is compared against the 8 pixels at distances 1..=8 along each
//! axis direction. Bit `m - 1` of a direction's byte is set when the pixel is
//! strictly brighter than its neighbor at distance `m`. Only the ordering of
//! intensities matters, so any strictly increasing remapping of the input
//! leaves the output unchanged.

use ndarray::{Array2, Array3, ArrayView2};

use crate::exec::Execution;

pub const NEIGHBORS: usize = 8;

/// Channel order of [`LiotImage::channels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
    Top,
    Bottom,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Left, Direction::Right, Direction::Top, Direction::Bottom];

    /// `(d_row, d_col)` per unit step.
    pub fn step(self) -> (isize, isize) {
        match self {
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
            Direction::Top => (-1, 0),
            Direction::Bottom => (1, 0),
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Top => "top",
            Direction::Bottom => "bottom",
        }
    }
}

/// Four direction-encoded channels, shape `(4, H, W)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiotImage {
    pub channels: Array3<u8>,
}

impl LiotImage {
    pub fn channel(&self, d: Direction) -> ArrayView2<'_, u8> {
        self.channels.index_axis(ndarray::Axis(0), d as usize)
    }

    pub fn dims(&self) -> (usize, usize) {
        let (_, h, w) = self.channels.dim();
        (h, w)
    }
}

pub fn transform(image: &Array2<u8>) -> LiotImage {
    transform_with(image.view(), Execution::default())
}

/// Works on any totally ordered pixel type; out-of-bounds neighbors
/// replicate the nearest edge pixel.
pub fn transform_with<T>(image: ArrayView2<'_, T>, exec: Execution) -> LiotImage
where
    T: PartialOrd + Copy + Sync,
{
    let (h, w) = image.dim();
    let mut channels = Array3::<u8>::zeros((4, h, w));
    if h == 0 || w == 0 {
        return LiotImage { channels };
    }
    let src = image.as_standard_layout();
    let src = src.as_slice().expect("standard layout");

    // rows of the output are (channel, row) pairs, so one task owns one line
    let out = channels.as_slice_mut().expect("fresh array");
    exec.for_each_row(out, w, |line, dst| {
        let (d, r) = (Direction::ALL[line / h], line % h);
        let (dr, dc) = d.step();
        let row = &src[r * w..(r + 1) * w];
        for (c, out) in dst.iter_mut().enumerate() {
            let centre = row[c];
            let mut code = 0u8;
            for m in 1..=NEIGHBORS as isize {
                let nr = (r as isize + dr * m).clamp(0, h as isize - 1) as usize;
                let nc = (c as isize + dc * m).clamp(0, w as isize - 1) as usize;
                if centre > src[nr * w + nc] {
                    code |= 1 << (m - 1);
                }
            }
            *out = code;
        }
    });
    LiotImage { channels }
}
