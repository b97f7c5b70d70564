//! Series-consistent training augmentation in the sagittal patch plane.
//!
//! The horizontal flip mirrors the anterior-posterior axis (`pW`), the
//! vertical flip mirrors the spine axis (`pH`) and rotation turns each
//! `pH × pW` plane about its centre. One draw is shared by every patch of a
//! series; locations are never changed.

use rand::Rng;
use vertseq_nn::Tensor32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub hflip: bool,
    pub vflip: bool,
    /// Rotation is uniform in `[-max_rotation_deg, max_rotation_deg]`.
    pub max_rotation_deg: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            hflip: true,
            vflip: true,
            max_rotation_deg: 20.0,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self {
            hflip: false,
            vflip: false,
            max_rotation_deg: 0.0,
        }
    }
}

/// One augmentation draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub hflip: bool,
    pub vflip: bool,
    pub angle_deg: f64,
}

impl AugmentDraw {
    pub fn identity() -> Self {
        Self {
            hflip: false,
            vflip: false,
            angle_deg: 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> Self {
        let hflip = rng.gen_bool(0.5) && cfg.hflip;
        let vflip = rng.gen_bool(0.5) && cfg.vflip;
        let u: f64 = rng.gen_range(-1.0..=1.0);
        Self {
            hflip,
            vflip,
            angle_deg: u * cfg.max_rotation_deg,
        }
    }

    pub fn apply(&self, patch: &Tensor32) -> Tensor32 {
        let mut p = if self.angle_deg != 0.0 {
            rotate(patch, self.angle_deg)
        } else {
            patch.clone()
        };
        if self.hflip {
            p = flip_w(&p);
        }
        if self.vflip {
            p = flip_h(&p);
        }
        p
    }

    pub fn apply_all(&self, patches: &[Tensor32]) -> Vec<Tensor32> {
        patches.iter().map(|p| self.apply(p)).collect()
    }
}

fn dims(p: &Tensor32) -> [usize; 3] {
    let s = p.shape();
    assert_eq!(s.len(), 3, "patches are (pH, pW, pZ)");
    [s[0], s[1], s[2]]
}

/// Mirrors the `pW` axis.
pub fn flip_w(p: &Tensor32) -> Tensor32 {
    let [h, w, z] = dims(p);
    let src = p.data();
    let mut out = Vec::with_capacity(src.len());
    for a in 0..h {
        for b in (0..w).rev() {
            out.extend_from_slice(&src[(a * w + b) * z..(a * w + b + 1) * z]);
        }
    }
    Tensor32::from_vec(&[h, w, z], out).expect("same shape")
}

/// Mirrors the `pH` axis.
pub fn flip_h(p: &Tensor32) -> Tensor32 {
    let [h, w, z] = dims(p);
    let src = p.data();
    let plane = w * z;
    let mut out = Vec::with_capacity(src.len());
    for a in (0..h).rev() {
        out.extend_from_slice(&src[a * plane..(a + 1) * plane]);
    }
    Tensor32::from_vec(&[h, w, z], out).expect("same shape")
}

/// Rotates every `pH × pW` plane by `deg` about its centre with bilinear
/// sampling; samples falling outside replicate the nearest edge.
pub fn rotate(p: &Tensor32, deg: f64) -> Tensor32 {
    let [h, w, z] = dims(p);
    let src = p.data();
    let (s, c) = deg.to_radians().sin_cos();
    let (ca, cb) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut out = vec![0f32; src.len()];
    for a in 0..h {
        for b in 0..w {
            let (da, db) = (a as f64 - ca, b as f64 - cb);
            let sa = (c * da + s * db + ca).clamp(0.0, (h - 1) as f64);
            let sb = (-s * da + c * db + cb).clamp(0.0, (w - 1) as f64);
            let (a0, b0) = (sa.floor() as usize, sb.floor() as usize);
            let (a1, b1) = ((a0 + 1).min(h - 1), (b0 + 1).min(w - 1));
            let (ta, tb) = ((sa - a0 as f64) as f32, (sb - b0 as f64) as f32);
            let at = |i: usize, j: usize, k: usize| src[(i * w + j) * z + k];
            for k in 0..z {
                let top = at(a0, b0, k) * (1.0 - tb) + at(a0, b1, k) * tb;
                let bot = at(a1, b0, k) * (1.0 - tb) + at(a1, b1, k) * tb;
                out[(a * w + b) * z + k] = (top * (1.0 - ta) + bot * ta).clamp(0.0, 1.0);
            }
        }
    }
    Tensor32::from_vec(&[h, w, z], out).expect("same shape")
}
