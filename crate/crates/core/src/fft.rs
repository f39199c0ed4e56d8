//! Two-dimensional DFT built from row and column passes of `rustfft`.
//!
//! Forward transforms are unnormalized; the inverse carries the `1 / (H W)`
//! factor, so `ifft2(fft2(x)) == x` up to rounding.

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::exec::Execution;

/// Polar form of a 2-D spectrum, in natural (DC at `[0, 0]`) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub amplitude: Array2<f64>,
    pub phase: Array2<f64>,
}

impl Spectrum {
    pub fn from_complex(coeffs: &Array2<Complex64>) -> Self {
        Spectrum {
            amplitude: coeffs.mapv(|c| c.norm()),
            phase: coeffs.mapv(|c| c.arg()),
        }
    }

    pub fn to_complex(&self) -> Array2<Complex64> {
        let mut out = Array2::zeros(self.amplitude.dim());
        ndarray::Zip::from(&mut out)
            .and(&self.amplitude)
            .and(&self.phase)
            .for_each(|o, &a, &p| *o = Complex64::from_polar(a, p));
        out
    }

    pub fn dim(&self) -> (usize, usize) {
        self.amplitude.dim()
    }
}

pub fn fft2(image: &Array2<f64>) -> Spectrum {
    Spectrum::from_complex(&fft2_complex(image, Execution::default()))
}

/// Real part of the inverse transform.
pub fn ifft2(spectrum: &Spectrum) -> Array2<f64> {
    let mut coeffs = spectrum.to_complex();
    transform_in_place(&mut coeffs, true, Execution::default());
    coeffs.mapv(|c| c.re)
}

pub fn fft2_complex(image: &Array2<f64>, exec: Execution) -> Array2<Complex64> {
    let mut coeffs = image.mapv(|v| Complex64::new(v, 0.0));
    transform_in_place(&mut coeffs, false, exec);
    coeffs
}

pub fn ifft2_complex(coeffs: &Array2<Complex64>, exec: Execution) -> Array2<Complex64> {
    let mut out = coeffs.clone();
    transform_in_place(&mut out, true, exec);
    out
}

/// In-place 2-D transform; `inverse` includes the normalization.
pub fn transform_in_place(data: &mut Array2<Complex64>, inverse: bool, exec: Execution) {
    let (h, w) = data.dim();
    if h == 0 || w == 0 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };

    let mut rows = std::mem::take(data).as_standard_layout().into_owned();
    exec.for_each_row(rows.as_slice_mut().expect("standard layout"), w, |_, row| {
        row_fft.process(row)
    });
    let mut cols = rows.reversed_axes().as_standard_layout().into_owned();
    exec.for_each_row(cols.as_slice_mut().expect("standard layout"), h, |_, col| {
        col_fft.process(col)
    });
    let mut out = cols.reversed_axes().as_standard_layout().into_owned();
    if inverse {
        let scale = 1.0 / (h * w) as f64;
        out.mapv_inplace(|c| c * scale);
    }
    *data = out;
}
