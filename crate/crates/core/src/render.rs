//! Greyscale overlay of the predicted fracture region on a sagittal slice.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::SagittalBox;
use crate::representation::SagittalVolume;

/// 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Gray8 {
    /// Binary PGM (`P5`).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Sagittal slice `x` as an image with rows along the spine and columns
/// along AP, with a 1-pixel white rectangle for `bbox` when given.
pub fn render_overlay(sag: &SagittalVolume, x: usize, bbox: Option<&SagittalBox>) -> Result<Gray8> {
    let [nx, rows, ny] = sag.grid.dims;
    if x >= nx {
        return Err(Error::Invalid(format!("sagittal slice {x} out of range 0..{nx}")));
    }
    let slice = sag.slice(x);
    let mut data: Vec<u8> = slice.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    if let Some(b) = bbox {
        let r0 = b.row0.min(rows - 1);
        let r1 = b.row1.saturating_sub(1).clamp(r0, rows - 1);
        let c0 = b.col0.min(ny - 1);
        let c1 = b.col1.saturating_sub(1).clamp(c0, ny - 1);
        for r in r0..=r1 {
            data[r * ny + c0] = 255;
            data[r * ny + c1] = 255;
        }
        for c in c0..=c1 {
            data[r0 * ny + c] = 255;
            data[r1 * ny + c] = 255;
        }
    }
    Ok(Gray8 {
        width: ny,
        height: rows,
        data,
    })
}
