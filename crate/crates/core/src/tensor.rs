//! Packed tensor files.
//!
//! ```text
//! magic   4 bytes   "LIO1" (u8 payload) or "LIOF" (f32 payload)
//! height  u32 LE
//! width   u32 LE
//! chans   u32 LE
//! payload chans * height * width elements, channel-major, rows row-major
//!         (f32 payload little-endian)
//! ```
//!
//! Transform outputs are always `LIO1` with 4 channels in the order left,
//! right, top, bottom. `LIOF` carries real-valued arrays such as
//! probability maps and feature maps.

use std::path::Path;

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};

pub const MAGIC_U8: &[u8; 4] = b"LIO1";
pub const MAGIC_F32: &[u8; 4] = b"LIOF";
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    U8(Array3<u8>),
    F32(Array3<f32>),
}

impl Tensor {
    /// `(channels, height, width)`
    pub fn dim(&self) -> (usize, usize, usize) {
        match self {
            Tensor::U8(a) => a.dim(),
            Tensor::F32(a) => a.dim(),
        }
    }

    /// Values as `f64`; `u8` payloads are scaled by `1/255` when `normalize`.
    pub fn to_f64(&self, normalize: bool) -> Array3<f64> {
        match self {
            Tensor::U8(a) if normalize => a.mapv(|v| f64::from(v) / 255.0),
            Tensor::U8(a) => a.mapv(f64::from),
            Tensor::F32(a) => a.mapv(f64::from),
        }
    }

    /// The single channel of a `C = 1` tensor.
    pub fn single_channel(&self, normalize: bool) -> Result<Array2<f64>> {
        let (c, _, _) = self.dim();
        if c != 1 {
            return Err(Error::Format(format!("expected 1 channel, found {c}")));
        }
        Ok(self.to_f64(normalize).index_axis_move(Axis(0), 0))
    }

    pub fn encode(&self) -> Vec<u8> {
        let (c, h, w) = self.dim();
        let (magic, elem) = match self {
            Tensor::U8(_) => (MAGIC_U8, 1),
            Tensor::F32(_) => (MAGIC_F32, 4),
        };
        let mut out = Vec::with_capacity(HEADER_LEN + c * h * w * elem);
        out.extend_from_slice(magic);
        for n in [h, w, c] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        match self {
            Tensor::U8(a) => out.extend(a.iter()),
            Tensor::F32(a) => a.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Tensor> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
        }
        let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (h, w, c) = (field(0), field(1), field(2));
        let count = c
            .checked_mul(h)
            .and_then(|n| n.checked_mul(w))
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let payload = &bytes[HEADER_LEN..];
        let magic = &bytes[..4];
        let expect_len = |elem: usize| -> Result<()> {
            if payload.len() != count * elem {
                return Err(Error::Format(format!(
                    "payload is {} bytes, header implies {}",
                    payload.len(),
                    count * elem
                )));
            }
            Ok(())
        };
        if magic == MAGIC_U8 {
            expect_len(1)?;
            Ok(Tensor::U8(Array3::from_shape_vec((c, h, w), payload.to_vec()).unwrap()))
        } else if magic == MAGIC_F32 {
            expect_len(4)?;
            let vals = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            Ok(Tensor::F32(Array3::from_shape_vec((c, h, w), vals).unwrap()))
        } else {
            Err(Error::Format(format!("unknown magic {:?}", String::from_utf8_lossy(magic))))
        }
    }

    pub fn read(path: &Path) -> Result<Tensor> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Tensor::decode(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

impl From<crate::liot::LiotImage> for Tensor {
    fn from(img: crate::liot::LiotImage) -> Self {
        Tensor::U8(img.channels)
    }
}
