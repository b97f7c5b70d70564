//! Volume container, HU windowing, and a small real-valued grid type.
//!
//! File layout (`.vsq`): UTF-8 header of `key=value` lines
//! (`magic=VSQ1`, `nz`, `ny`, `nx`, `sz_mm`, `sy_mm`, `sx_mm`, in that order),
//! a blank line, then `nz·ny·nx` little-endian `i16` voxels, z-major then y
//! then x.

use std::fs;
use std::path::Path;

use crate::error::{io_err, Error, Result};

pub const HU_MIN: i16 = -1024;
pub const HU_MAX: i16 = 3071;
const MAGIC: &str = "VSQ1";

/// Axis-aligned CT-like volume in Hounsfield units.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    /// `(nz, ny, nx)`
    shape: [usize; 3],
    /// `(sz, sy, sx)` in millimetres.
    spacing: [f64; 3],
    data: Vec<i16>,
}

impl Volume {
    pub fn new(shape: [usize; 3], spacing: [f64; 3], data: Vec<i16>) -> Result<Self> {
        let n = shape.iter().product::<usize>();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidVolume(format!("zero extent in shape {shape:?}")));
        }
        if data.len() != n {
            return Err(Error::DataLength {
                expected_bytes: 2 * n,
                found_bytes: 2 * data.len(),
            });
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, &v)| !(HU_MIN..=HU_MAX).contains(&v))
        {
            return Err(Error::HuOutOfRange { value, index });
        }
        Ok(Self {
            shape,
            spacing,
            data,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.shape[1] + y) * self.shape[2] + x
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> i16 {
        self.data[self.index(z, y, x)]
    }

    /// Axial slice `z` as a row-major `(ny, nx)` buffer.
    pub fn axial_slice(&self, z: usize) -> &[i16] {
        let n = self.shape[1] * self.shape[2];
        &self.data[z * n..(z + 1) * n]
    }

    pub fn max_hu(&self) -> i16 {
        self.data.iter().copied().max().expect("volume is non-empty")
    }

    fn header(&self) -> String {
        let [nz, ny, nx] = self.shape;
        let [sz, sy, sx] = self.spacing;
        format!("magic={MAGIC}\nnz={nz}\nny={ny}\nnx={nx}\nsz_mm={sz}\nsy_mm={sy}\nsx_mm={sx}\n\n")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = self.header();
        let mut out = Vec::with_capacity(header.len() + 2 * self.data.len());
        out.extend_from_slice(header.as_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let end = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| Error::MalformedHeader("missing blank-line terminator".into()))?;
        let header = std::str::from_utf8(&bytes[..end])
            .map_err(|_| Error::MalformedHeader("header is not UTF-8".into()))?;
        let payload = &bytes[end + 2..];

        let keys = ["magic", "nz", "ny", "nx", "sz_mm", "sy_mm", "sx_mm"];
        let mut values = Vec::with_capacity(keys.len());
        let lines: Vec<&str> = header.split('\n').collect();
        if lines.len() != keys.len() {
            return Err(Error::MalformedHeader(format!(
                "expected {} header lines, found {}",
                keys.len(),
                lines.len()
            )));
        }
        for (line, key) in lines.iter().zip(keys) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedHeader(format!("not a key=value line: {line:?}")))?;
            if k != key {
                return Err(Error::MalformedHeader(format!("expected key `{key}`, found `{k}`")));
            }
            values.push(v);
        }
        if values[0] != MAGIC {
            return Err(Error::MalformedHeader(format!("bad magic {:?}", values[0])));
        }
        let dim = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::MalformedHeader(format!("bad extent {s:?}")))
        };
        let mm = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| Error::MalformedHeader(format!("bad spacing {s:?}")))
        };
        let shape = [dim(values[1])?, dim(values[2])?, dim(values[3])?];
        let spacing = [mm(values[4])?, mm(values[5])?, mm(values[6])?];
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::MalformedHeader("shape overflows".into()))?;
        if payload.len() != 2 * n {
            return Err(Error::DataLength {
                expected_bytes: 2 * n,
                found_bytes: payload.len(),
            });
        }
        let data = payload
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]))
            .collect();
        Self::new(shape, spacing, data)
    }
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    Volume::from_bytes(&bytes)
}

pub fn save_volume(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, volume.to_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Display window over HU values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub center: f64,
    pub width: f64,
}

impl Default for WindowSpec {
    /// Bone-oriented window used for the spine representation.
    fn default() -> Self {
        Self {
            center: 370.0,
            width: 840.0,
        }
    }
}

impl WindowSpec {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0 && center.is_finite()) {
            return Err(Error::Invalid(format!("window width must be positive, got {width}")));
        }
        Ok(Self { center, width })
    }

    pub fn lower(&self) -> f64 {
        self.center - self.width / 2.0
    }

    /// `(hu − lower) / width`, clamped to `[0, 1]`.
    #[inline]
    pub fn apply(&self, hu: f64) -> f64 {
        ((hu - self.lower()) / self.width).clamp(0.0, 1.0)
    }
}

/// Dense real-valued 3D grid, row-major over `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl Grid3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dims[1] + b) * self.dims[2] + c
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[self.index(a, b, c)]
    }

    /// Trilinear sample at continuous index coordinates (voxel centres at
    /// integers); coordinates outside the grid clamp to the border.
    pub fn sample_trilinear(&self, p: [f64; 3]) -> f64 {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut t = [0.0; 3];
        for ax in 0..3 {
            let max = (self.dims[ax] - 1) as f64;
            let c = p[ax].clamp(0.0, max);
            let f = c.floor();
            lo[ax] = f as usize;
            hi[ax] = (lo[ax] + 1).min(self.dims[ax] - 1);
            t[ax] = c - f;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let pick = |ax: usize| corner >> (2 - ax) & 1 == 1;
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for ax in 0..3 {
                if pick(ax) {
                    w *= t[ax];
                    idx[ax] = hi[ax];
                } else {
                    w *= 1.0 - t[ax];
                    idx[ax] = lo[ax];
                }
            }
            if w != 0.0 {
                acc += w * self.get(idx[0], idx[1], idx[2]);
            }
        }
        acc
    }
}

/// Windows every voxel into `[0, 1]`; the grid keeps the `(nz, ny, nx)` layout.
pub fn apply_window(volume: &Volume, window: &WindowSpec) -> Grid3 {
    Grid3 {
        dims: volume.shape(),
        data: volume.data().iter().map(|&v| window.apply(f64::from(v))).collect(),
    }
}
