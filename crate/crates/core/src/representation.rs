//! Sagittal reslicing and the patch-sequence representation.
//!
//! A [`SagittalVolume`] stores sagittal slices `(x, z', y)` with the axial
//! axis resampled so its pixel size matches `sy`. The column around the canal
//! is cut into `k` tiles along `z'` which are resized into `(pH, pW, pZ)`
//! patches: `pH` runs along the spine, `pW` along the anterior-posterior axis
//! and `pZ` across the body (left to right).

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use vertseq_nn::Tensor32;

use crate::cord::CordTrack;
use crate::error::{io_err, Error, Result};
use crate::resample::{resampled_len, FourierResampler};
use crate::volume::{Grid3, Volume, WindowSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SagittalVolume {
    /// Dimensions `(nx, rows, ny)`.
    pub grid: Grid3,
    /// Pixel size in mm along `(x, z', y)`.
    pub pixel_mm: [f64; 3],
    pub source_shape: [usize; 3],
    pub source_spacing: [f64; 3],
}

impl SagittalVolume {
    pub fn rows(&self) -> usize {
        self.grid.dims[1]
    }

    /// Sagittal slice `x` as `rows × ny`, row-major.
    pub fn slice(&self, x: usize) -> &[f64] {
        let n = self.grid.dims[1] * self.grid.dims[2];
        &self.grid.data[x * n..(x + 1) * n]
    }

    /// Axial slice index (continuous) at the centre of resampled row `row`.
    pub fn row_to_axial(&self, row: f64) -> f64 {
        (row + 0.5) * self.pixel_mm[1] / self.source_spacing[0] - 0.5
    }
}

/// Reslices sagittally, resamples every axial column to `round(nz·sz/sy)`
/// samples and windows the result into `[0, 1]`.
pub fn reconstruct_sagittal(volume: &Volume, window: &WindowSpec) -> Result<SagittalVolume> {
    let [nz, ny, nx] = volume.shape();
    let [sz, sy, sx] = volume.spacing();
    if nz < 2 {
        return Err(Error::InvalidVolume("sagittal reconstruction needs at least 2 slices".into()));
    }
    let rows = resampled_len(nz, sz / sy);
    let resampler = FourierResampler::new(nz, rows)?;
    let mut grid = Grid3::zeros([nx, rows, ny]);
    let data = volume.data();
    grid.data.par_chunks_mut(rows * ny).enumerate().for_each(|(x, plane)| {
        let mut column = vec![0.0; nz];
        let mut out = vec![0.0; rows];
        for y in 0..ny {
            for (z, c) in column.iter_mut().enumerate() {
                *c = f64::from(data[(z * ny + y) * nx + x]);
            }
            resampler.apply(&column, &mut out);
            for (r, v) in out.iter().enumerate() {
                plane[r * ny + y] = window.apply(*v);
            }
        }
    });
    Ok(SagittalVolume {
        grid,
        pixel_mm: [sx, nz as f64 * sz / rows as f64, sy],
        source_shape: volume.shape(),
        source_spacing: volume.spacing(),
    })
}

/// Physical extent of each tile. `spine_mm` is converted to a whole number of
/// resampled rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSpec {
    pub spine_mm: f64,
    pub ap_mm: f64,
    pub lateral_mm: f64,
    /// Shift of the crop centre towards anterior (smaller `y`).
    pub anterior_bias_mm: f64,
}

impl Default for CropSpec {
    fn default() -> Self {
        Self {
            spine_mm: 60.0,
            ap_mm: 60.0,
            lateral_mm: 60.0,
            anterior_bias_mm: 20.0,
        }
    }
}

/// Start offsets of `ceil(len / tile)` tiles spread evenly over `[0, len)`:
/// `round(i·(len − tile)/(k − 1))`, rounding half up.
pub fn tile_starts(len: usize, tile: usize) -> Result<Vec<usize>> {
    if len == 0 || tile == 0 {
        return Err(Error::Invalid(format!("zero-extent tiling (len = {len}, tile = {tile})")));
    }
    let k = len.div_ceil(tile);
    if k == 1 {
        return Ok(vec![0]);
    }
    let span = len - tile;
    Ok((0..k).map(|i| (2 * i * span + (k - 1)) / (2 * (k - 1))).collect())
}

/// Relative position of tile `i` of `k` in a VOI of length `len`, from the
/// centre of its source interval.
pub fn location_feature(i: usize, k: usize, len: usize, tile: usize) -> Result<f64> {
    let starts = tile_starts(len, tile)?;
    if starts.len() != k || i >= k {
        return Err(Error::Invalid(format!(
            "tile {i} of {k} does not match a tiling of {len} by {tile}"
        )));
    }
    let end = (starts[i] + tile).min(len);
    Ok((starts[i] + end) as f64 / 2.0 / len as f64)
}

/// Where a patch was cut from, in sagittal index coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSource {
    /// Covered rows `[row_start, row_end)`, clipped to the VOI.
    pub row_start: usize,
    pub row_end: usize,
    /// Tile length in rows before clipping.
    pub tile_rows: usize,
    /// Crop centre and extent along `(x, y)`.
    pub center_xy: (f64, f64),
    pub extent_xy: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSequence {
    /// `k` tensors of shape `(pH, pW, pZ)`, values in `[0, 1]`.
    pub patches: Vec<Tensor32>,
    pub locations: Vec<f64>,
    pub sources: Vec<PatchSource>,
    pub patch_size: [usize; 3],
    /// VOI length along the spine in rows, and mm per row.
    pub voi_rows: usize,
    pub row_mm: f64,
    /// Dimensions `(nx, rows, ny)` of the sagittal volume the patches came from.
    pub sagittal_dims: [usize; 3],
}

impl PatchSequence {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// Cuts the full-height VOI around `track` into a [`PatchSequence`].
pub fn tile_patches(
    sag: &SagittalVolume,
    track: &CordTrack,
    patch_size: [usize; 3],
    crop: &CropSpec,
) -> Result<PatchSequence> {
    let [ph, pw, pz] = patch_size;
    if ph == 0 || pw == 0 || pz == 0 {
        return Err(Error::Invalid(format!("patch size {patch_size:?} has a zero axis")));
    }
    if !(crop.spine_mm > 0.0 && crop.ap_mm > 0.0 && crop.lateral_mm > 0.0) {
        return Err(Error::Invalid("crop extents must be positive".into()));
    }
    if track.len() != sag.source_shape[0] {
        return Err(Error::Invalid(format!(
            "cord track covers {} slices, volume has {}",
            track.len(),
            sag.source_shape[0]
        )));
    }
    let rows = sag.rows();
    let [sx, row_mm, sy] = sag.pixel_mm;
    let tile = ((crop.spine_mm / row_mm).round() as usize).max(1);
    let starts = tile_starts(rows, tile)?;
    let k = starts.len();
    let extent_x = crop.lateral_mm / sx;
    let extent_y = crop.ap_mm / sy;
    let bias_y = crop.anterior_bias_mm / sy;

    let mut patches = Vec::with_capacity(k);
    let mut locations = Vec::with_capacity(k);
    let mut sources = Vec::with_capacity(k);
    for (i, &start) in starts.iter().enumerate() {
        let end = (start + tile).min(rows);
        let mid_row = (start + end) as f64 / 2.0 - 0.5;
        let (cx, cy) = track.at(sag.row_to_axial(mid_row));
        let cy = cy - bias_y;
        let mut data = Vec::with_capacity(ph * pw * pz);
        for a in 0..ph {
            let r = start as f64 - 0.5 + (a as f64 + 0.5) * tile as f64 / ph as f64;
            for b in 0..pw {
                let y = cy - extent_y / 2.0 + (b as f64 + 0.5) * extent_y / pw as f64;
                for c in 0..pz {
                    let x = cx - extent_x / 2.0 + (c as f64 + 0.5) * extent_x / pz as f64;
                    data.push(sag.grid.sample_trilinear([x, r, y]).clamp(0.0, 1.0) as f32);
                }
            }
        }
        patches.push(Tensor32::from_vec(&patch_size, data)?);
        locations.push(location_feature(i, k, rows, tile)?);
        sources.push(PatchSource {
            row_start: start,
            row_end: end,
            tile_rows: tile,
            center_xy: (cx, cy),
            extent_xy: (extent_x, extent_y),
        });
    }
    Ok(PatchSequence {
        patches,
        locations,
        sources,
        patch_size,
        voi_rows: rows,
        row_mm,
        sagittal_dims: sag.grid.dims,
    })
}

const DUMP_MAGIC: &str = "VSQPATCH1";

/// Patch dump: text header `VSQPATCH1`, `k=`, `pH=`, `pW=`, `pZ=` lines and a
/// blank line, then `k` little-endian f32 patches and `k` little-endian f64
/// locations.
pub fn write_patch_dump(seq: &PatchSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let [ph, pw, pz] = seq.patch_size;
    let mut bytes = format!("{DUMP_MAGIC}\nk={}\npH={ph}\npW={pw}\npZ={pz}\n\n", seq.len()).into_bytes();
    for p in &seq.patches {
        for v in p.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    for l in &seq.locations {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a patch dump back as `(patches, locations)`.
pub fn read_patch_dump(path: impl AsRef<Path>) -> Result<(Vec<Tensor32>, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::MalformedHeader("patch dump header is not terminated".into()))?;
    let header = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::MalformedHeader("patch dump header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some(DUMP_MAGIC) {
        return Err(Error::MalformedHeader("missing VSQPATCH1 magic".into()));
    }
    let mut vals = [0usize; 4];
    for (slot, key) in vals.iter_mut().zip(["k", "pH", "pW", "pZ"]) {
        let line = lines.next().unwrap_or("");
        *slot = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("expected `{key}=` in patch dump, found `{line}`")))?;
    }
    let [k, ph, pw, pz] = vals;
    let per = ph * pw * pz;
    let payload = &bytes[split + 2..];
    let expected = k * per * 4 + k * 8;
    if payload.len() != expected {
        return Err(Error::DataLength {
            expected_bytes: expected,
            found_bytes: payload.len(),
        });
    }
    let mut patches = Vec::with_capacity(k);
    for i in 0..k {
        let chunk = &payload[i * per * 4..(i + 1) * per * 4];
        let data = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        patches.push(Tensor32::from_vec(&[ph, pw, pz], data)?);
    }
    let locations = payload[k * per * 4..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    Ok((patches, locations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_tiling() {
        assert_eq!(tile_starts(100, 25).unwrap(), vec![0, 25, 50, 75]);
        let locs: Vec<f64> = (0..4).map(|i| location_feature(i, 4, 100, 25).unwrap()).collect();
        assert_eq!(locs, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn spread_tiling() {
        assert_eq!(tile_starts(100, 30).unwrap(), vec![0, 23, 47, 70]);
    }

    #[test]
    fn short_voi_gives_one_tile() {
        assert_eq!(tile_starts(10, 25).unwrap(), vec![0]);
        assert_eq!(location_feature(0, 1, 10, 25).unwrap(), 0.5);
        assert!(tile_starts(0, 25).is_err());
    }

    fn volume(nz: usize, sz: f64, f: impl Fn(usize, usize, usize) -> i16) -> Volume {
        let (ny, nx) = (6, 5);
        let mut data = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(f(z, y, x));
                }
            }
        }
        Volume::new([nz, ny, nx], [sz, 1.0, 1.0], data).unwrap()
    }

    #[test]
    fn isotropic_reslice_is_a_permutation() {
        let v = volume(7, 1.0, |z, y, x| (z * 31 + y * 7 + x * 3) as i16 * 5 - 100);
        let w = WindowSpec::default();
        let s = reconstruct_sagittal(&v, &w).unwrap();
        assert_eq!(s.grid.dims, [5, 7, 6]);
        for x in 0..5 {
            for z in 0..7 {
                for y in 0..6 {
                    let want = w.apply(f64::from(v.get(z, y, x)));
                    assert!((s.grid.get(x, z, y) - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn anisotropic_reslice_doubles_rows() {
        let v = volume(9, 2.0, |_, _, _| 160);
        let s = reconstruct_sagittal(&v, &WindowSpec::default()).unwrap();
        assert_eq!(s.rows(), 18);
        assert!((s.pixel_mm[1] - 1.0).abs() < 1e-12);
        assert!(s.grid.data.iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn single_slice_is_rejected() {
        let v = volume(1, 1.0, |_, _, _| 0);
        assert!(reconstruct_sagittal(&v, &WindowSpec::default()).is_err());
    }

    #[test]
    fn patches_have_declared_shape_and_range() {
        let v = volume(40, 2.0, |z, y, x| ((z * 37 + y * 11 + x * 5) % 900) as i16 - 100);
        let s = reconstruct_sagittal(&v, &WindowSpec::default()).unwrap();
        let track = CordTrack::constant(40, (2.0, 3.0));
        let crop = CropSpec {
            spine_mm: 15.0,
            ap_mm: 6.0,
            lateral_mm: 5.0,
            anterior_bias_mm: 1.0,
        };
        let seq = tile_patches(&s, &track, [4, 3, 2], &crop).unwrap();
        assert_eq!(seq.len(), 6);
        assert!(seq.locations.windows(2).all(|w| w[0] < w[1]));
        for p in &seq.patches {
            assert_eq!(p.shape(), &[4, 3, 2]);
            assert!(p.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert_eq!(seq.sources.last().unwrap().row_end, 80);
    }
}
