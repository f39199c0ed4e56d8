//! Reference implementations shared by unit tests.

use std::f64::consts::TAU;

use ndarray::Array2;
use rustfft::num_complex::Complex64;

/// Direct O(N^2) forward DFT.
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
