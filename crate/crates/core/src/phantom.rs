//! Synthetic spine phantoms with exact fracture ground truth.
//!
//! A phantom is a stack of box-shaped vertebral bodies separated by
//! soft-tissue discs, with a dark spinal canal ringed by bone running
//! posterior to them along a sinusoidally curved centreline. Anterior is
//! towards smaller `y`. Fractured bodies lose height from the superior
//! endplate; endplates are rendered with partial-volume weighting along `z`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{io_err, Error, Result};
use crate::volume::{save_volume, Volume, HU_MAX, HU_MIN};

/// Genant semi-quantitative grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Grade {
    None,
    Mild,
    Moderate,
    Severe,
}

impl Grade {
    /// Height-loss band `[lo, hi]` for fractured grades.
    pub fn band(self) -> Option<(f64, f64)> {
        match self {
            Grade::None => None,
            Grade::Mild => Some((0.20, 0.25)),
            Grade::Moderate => Some((0.25, 0.40)),
            Grade::Severe => Some((0.40, 0.90)),
        }
    }

    pub fn from_height_loss(fraction: f64) -> Grade {
        if fraction < 0.20 {
            Grade::None
        } else if fraction < 0.25 {
            Grade::Mild
        } else if fraction <= 0.40 {
            Grade::Moderate
        } else {
            Grade::Severe
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::None => "none",
            Grade::Mild => "mild",
            Grade::Moderate => "moderate",
            Grade::Severe => "severe",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Grade {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Grade::None),
            "mild" => Ok(Grade::Mild),
            "moderate" => Ok(Grade::Moderate),
            "severe" => Ok(Grade::Severe),
            _ => Err(Error::Phantom(format!("unknown grade `{s}`"))),
        }
    }
}

/// Geometry, intensities and seed of one phantom series.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub n_vertebrae: usize,
    pub vertebra_height_mm: f64,
    /// Lateral extent of a vertebral body.
    pub vertebra_width_mm: f64,
    /// Anterior-posterior extent of a vertebral body.
    pub vertebra_depth_mm: f64,
    pub disc_height_mm: f64,
    /// Soft tissue above the first and below the last vertebra.
    pub margin_mm: f64,
    pub canal_radius_mm: f64,
    /// Thickness of the bony ring around the canal.
    pub arch_thickness_mm: f64,
    pub bone_hu: i16,
    pub soft_tissue_hu: i16,
    pub canal_hu: i16,
    pub curvature_amplitude_mm: f64,
    /// Uniform per-series shift of the whole spine in the axial plane.
    pub position_jitter_mm: f64,
    pub noise_sigma_hu: f64,
    /// `(sz, sy, sx)`
    pub spacing_mm: [f64; 3],
    /// `(ny, nx)`
    pub in_plane: [usize; 2],
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            n_vertebrae: 17,
            vertebra_height_mm: 20.0,
            vertebra_width_mm: 40.0,
            vertebra_depth_mm: 30.0,
            disc_height_mm: 5.0,
            margin_mm: 10.0,
            canal_radius_mm: 8.0,
            arch_thickness_mm: 4.0,
            bone_hu: 700,
            soft_tissue_hu: 40,
            canal_hu: -10,
            curvature_amplitude_mm: 5.0,
            position_jitter_mm: 6.0,
            noise_sigma_hu: 20.0,
            spacing_mm: [2.5, 1.25, 1.25],
            in_plane: [64, 64],
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn spine_length_mm(&self) -> f64 {
        self.n_vertebrae as f64 * self.vertebra_height_mm
            + (self.n_vertebrae.saturating_sub(1)) as f64 * self.disc_height_mm
            + 2.0 * self.margin_mm
    }

    pub fn nz(&self) -> usize {
        (self.spine_length_mm() / self.spacing_mm[0]).round().max(1.0) as usize
    }

    /// Nominal `[top, bottom)` of vertebra `i` in mm from the top of slice 0.
    pub fn vertebra_extent_mm(&self, i: usize) -> (f64, f64) {
        let top = self.margin_mm + i as f64 * (self.vertebra_height_mm + self.disc_height_mm);
        (top, top + self.vertebra_height_mm)
    }

    /// Canal centre at the default (unjittered, uncurved) position, in mm.
    fn canal_origin_mm(&self) -> (f64, f64) {
        let fov_y = self.in_plane[0] as f64 * self.spacing_mm[1];
        let fov_x = self.in_plane[1] as f64 * self.spacing_mm[2];
        let anterior = self.canal_radius_mm + self.arch_thickness_mm + self.vertebra_depth_mm;
        let posterior = self.canal_radius_mm + self.arch_thickness_mm;
        // Centre the whole cross-section (body + canal + ring) in y.
        let cy = (fov_y - anterior - posterior) / 2.0 + anterior;
        (fov_x / 2.0, cy)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Phantom(m));
        if self.n_vertebrae == 0 {
            return bad("n_vertebrae must be at least 1".into());
        }
        if self.bone_hu <= self.soft_tissue_hu {
            return bad("bone_hu must exceed soft_tissue_hu".into());
        }
        if !(self.noise_sigma_hu >= 0.0 && self.noise_sigma_hu.is_finite()) {
            return bad("noise_sigma_hu must be non-negative".into());
        }
        for hu in [self.bone_hu, self.soft_tissue_hu, self.canal_hu] {
            if !(HU_MIN..=HU_MAX).contains(&hu) {
                return bad(format!("HU level {hu} outside the valid range"));
            }
        }
        let lengths = [
            self.vertebra_height_mm,
            self.vertebra_width_mm,
            self.vertebra_depth_mm,
            self.canal_radius_mm,
        ];
        if lengths.iter().any(|&v| !(v > 0.0)) || self.spacing_mm.iter().any(|&s| !(s > 0.0)) {
            return bad("sizes and spacings must be positive".into());
        }
        if [self.disc_height_mm, self.margin_mm, self.arch_thickness_mm]
            .iter()
            .chain([&self.curvature_amplitude_mm, &self.position_jitter_mm])
            .any(|&v| !(v >= 0.0))
        {
            return bad("disc, margin, arch, curvature and jitter must be non-negative".into());
        }
        if self.in_plane.iter().any(|&n| n < 2) {
            return bad("in-plane size must be at least 2x2".into());
        }
        let fov_y = self.in_plane[0] as f64 * self.spacing_mm[1];
        let fov_x = self.in_plane[1] as f64 * self.spacing_mm[2];
        let (cx, cy) = self.canal_origin_mm();
        let slack_y = self.position_jitter_mm + self.curvature_amplitude_mm / 2.0;
        let slack_x = self.position_jitter_mm + self.curvature_amplitude_mm;
        let front = cy - self.canal_radius_mm - self.arch_thickness_mm - self.vertebra_depth_mm;
        let back = cy + self.canal_radius_mm + self.arch_thickness_mm;
        let half_w = (self.vertebra_width_mm / 2.0).max(self.canal_radius_mm + self.arch_thickness_mm);
        if front - slack_y < 0.0 || back + slack_y > fov_y || cx - half_w - slack_x < 0.0 || cx + half_w + slack_x > fov_x {
            return bad("anatomy does not fit inside the field of view".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertebraLabel {
    pub index: usize,
    pub fractured: bool,
    /// Fraction of nominal height lost, in `[0, 0.9]`.
    pub height_loss: f64,
    pub grade: Grade,
    /// Rendered body extent along the axial axis, mm from the top of slice 0.
    pub top_mm: f64,
    pub bottom_mm: f64,
}

/// Ground truth for one phantom series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesLabel {
    pub per_vertebra: Vec<VertebraLabel>,
    pub series_positive: bool,
    /// Canal centre `(cx, cy)` per axial slice, in voxel index coordinates.
    pub canal_centerline: Vec<(f64, f64)>,
    /// Side of the square box that encloses the canal, in voxels `(w, h)`.
    pub canal_box: (f64, f64),
}

/// Renders one phantom. `fracture_plan` lists `(vertebra index, grade)`
/// pairs; each fractured body loses a height fraction drawn uniformly from
/// its grade band using the spec seed.
pub fn generate_series(spec: &PhantomSpec, fracture_plan: &[(usize, Grade)]) -> Result<(Volume, SeriesLabel)> {
    spec.validate()?;
    let mut losses = vec![None; spec.n_vertebrae];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for &(idx, grade) in fracture_plan {
        if idx >= spec.n_vertebrae {
            return Err(Error::Phantom(format!(
                "vertebra index {idx} out of range (n = {})",
                spec.n_vertebrae
            )));
        }
        if losses[idx].is_some() {
            return Err(Error::Phantom(format!("vertebra {idx} planned twice")));
        }
        let (lo, hi) = grade
            .band()
            .ok_or_else(|| Error::Phantom(format!("grade `none` in fracture plan for vertebra {idx}")))?;
        losses[idx] = Some((grade, lo, hi));
    }

    let jitter_y = rng.gen_range(-1.0..=1.0) * spec.position_jitter_mm;
    let jitter_x = rng.gen_range(-1.0..=1.0) * spec.position_jitter_mm;
    let phase_x = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase_y = rng.gen_range(0.0..std::f64::consts::TAU);

    let mut per_vertebra = Vec::with_capacity(spec.n_vertebrae);
    for (i, plan) in losses.iter().enumerate() {
        let (top, bottom) = spec.vertebra_extent_mm(i);
        let (fractured, loss, grade) = match *plan {
            Some((g, lo, hi)) => {
                let u: f64 = rng.gen();
                let loss = if g == Grade::Severe {
                    // Severe band is open at its lower end.
                    hi - (hi - lo) * u
                } else {
                    lo + (hi - lo) * u
                };
                (true, loss, g)
            }
            None => (false, 0.0, Grade::None),
        };
        per_vertebra.push(VertebraLabel {
            index: i,
            fractured,
            height_loss: loss,
            grade,
            top_mm: top + loss * spec.vertebra_height_mm,
            bottom_mm: bottom,
        });
    }

    let [sz, sy, sx] = spec.spacing_mm;
    let [ny, nx] = spec.in_plane;
    let nz = spec.nz();
    let length = spec.spine_length_mm();
    let (cx0, cy0) = spec.canal_origin_mm();
    let amp = spec.curvature_amplitude_mm;
    let body_offset = spec.canal_radius_mm + spec.arch_thickness_mm + spec.vertebra_depth_mm / 2.0;
    let ring_outer = spec.canal_radius_mm + spec.arch_thickness_mm;

    let mut centerline_mm = Vec::with_capacity(nz);
    for iz in 0..nz {
        let z = (iz as f64 + 0.5) * sz;
        let arg = std::f64::consts::TAU * z / length;
        let cx = cx0 + jitter_x + amp * (arg + phase_x).sin();
        let cy = cy0 + jitter_y + 0.5 * amp * (arg + phase_y).sin();
        centerline_mm.push((cx, cy));
    }

    let soft = f64::from(spec.soft_tissue_hu);
    let bone = f64::from(spec.bone_hu);
    let mut clean = vec![0f64; nz * ny * nx];
    for iz in 0..nz {
        let (z0, z1) = (iz as f64 * sz, (iz + 1) as f64 * sz);
        // Body coverage of this slab; bodies never overlap along z.
        let coverage: f64 = per_vertebra
            .iter()
            .map(|v| ((z1.min(v.bottom_mm) - z0.max(v.top_mm)) / sz).max(0.0))
            .sum::<f64>()
            .min(1.0);
        let (cx, cy) = centerline_mm[iz];
        let body_cy = cy - body_offset;
        for iy in 0..ny {
            let y = (iy as f64 + 0.5) * sy;
            for ix in 0..nx {
                let x = (ix as f64 + 0.5) * sx;
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                let hu = if d < spec.canal_radius_mm {
                    f64::from(spec.canal_hu)
                } else if d < ring_outer {
                    bone
                } else if (x - cx).abs() <= spec.vertebra_width_mm / 2.0
                    && (y - body_cy).abs() <= spec.vertebra_depth_mm / 2.0
                {
                    soft + coverage * (bone - soft)
                } else {
                    soft
                };
                clean[(iz * ny + iy) * nx + ix] = hu;
            }
        }
    }

    let noise = if spec.noise_sigma_hu > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma_hu).expect("sigma is finite and positive"))
    } else {
        None
    };
    let data = clean
        .into_iter()
        .map(|v| {
            let v = match &noise {
                Some(n) => v + n.sample(&mut rng),
                None => v,
            };
            v.round().clamp(f64::from(HU_MIN), f64::from(HU_MAX)) as i16
        })
        .collect();
    let volume = Volume::new([nz, ny, nx], spec.spacing_mm, data)?;

    let canal_centerline = centerline_mm
        .iter()
        .map(|&(cx, cy)| (cx / sx - 0.5, cy / sy - 0.5))
        .collect();
    let series_positive = per_vertebra.iter().any(|v| v.fractured);
    let side = 2.0 * spec.canal_radius_mm;
    Ok((
        volume,
        SeriesLabel {
            per_vertebra,
            series_positive,
            canal_centerline,
            canal_box: (side / sx, side / sy),
        },
    ))
}

/// SplitMix64 step: advances `state` and returns the next output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First `n` SplitMix64 outputs from `master`; the seed of series `i` is element `i`.
pub fn derive_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut state = master;
    (0..n).map(|_| splitmix64(&mut state)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Tune,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Tune => "tune",
            Partition::Test => "test",
        }
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "tune" => Ok(Partition::Tune),
            "test" => Ok(Partition::Test),
            _ => Err(Error::Manifest(format!("unknown partition `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: usize,
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub partition: Partition,
    pub positive: bool,
    pub vertebrae: Vec<VertebraLabel>,
}

/// Dataset index: one record per series.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
    /// Directory holding the manifest; entry paths resolve against it.
    pub root: PathBuf,
}

pub const MANIFEST_FILE: &str = "manifest.txt";
const MANIFEST_MAGIC: &str = "vsq-manifest 1";

impl Manifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn partition(&self, p: Partition) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.partition == p)
    }

    /// Line-oriented text form:
    ///
    /// ```text
    /// vsq-manifest 1
    /// seed=42 n=10
    /// series id=0 path=series_0000.vsq partition=train positive=0 vertebrae=0:0:0:none:10:30;1:...
    /// ```
    ///
    /// Each vertebra is `index:fractured:height_loss:grade:top_mm:bottom_mm`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{MANIFEST_MAGIC}\nseed={} n={}\n", self.seed, self.entries.len());
        for e in &self.entries {
            let verts: Vec<String> = e
                .vertebrae
                .iter()
                .map(|v| {
                    format!(
                        "{}:{}:{}:{}:{}:{}",
                        v.index, v.fractured as u8, v.height_loss, v.grade, v.top_mm, v.bottom_mm
                    )
                })
                .collect();
            s.push_str(&format!(
                "series id={} path={} partition={} positive={} vertebrae={}\n",
                e.id,
                e.path.display(),
                e.partition.as_str(),
                e.positive as u8,
                verts.join(";")
            ));
        }
        s
    }

    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let bad = |m: String| Error::Manifest(m);
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_MAGIC) {
            return Err(bad("missing `vsq-manifest 1` header".into()));
        }
        let meta = lines.next().ok_or_else(|| bad("missing seed line".into()))?;
        let mut seed = None;
        let mut count = None;
        for kv in meta.split_whitespace() {
            match kv.split_once('=') {
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                Some(("n", v)) => count = v.parse::<usize>().ok(),
                _ => return Err(bad(format!("unexpected field `{kv}`"))),
            }
        }
        let seed = seed.ok_or_else(|| bad("bad seed".into()))?;
        let count = count.ok_or_else(|| bad("bad series count".into()))?;
        let mut entries = Vec::with_capacity(count);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut parts = line.split_whitespace();
            if parts.next() != Some("series") {
                return Err(bad(format!("unexpected line `{line}`")));
            }
            let mut id = None;
            let mut path = None;
            let mut partition = None;
            let mut positive = None;
            let mut vertebrae = None;
            for kv in parts {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad field `{kv}`")))?;
                match k {
                    "id" => id = v.parse::<usize>().ok(),
                    "path" => path = Some(PathBuf::from(v)),
                    "partition" => partition = Some(v.parse::<Partition>()?),
                    "positive" => positive = parse_flag(v),
                    "vertebrae" => vertebrae = Some(parse_vertebrae(v)?),
                    _ => return Err(bad(format!("unknown field `{k}`"))),
                }
            }
            let entry = ManifestEntry {
                id: id.ok_or_else(|| bad(format!("missing id in `{line}`")))?,
                path: path.ok_or_else(|| bad(format!("missing path in `{line}`")))?,
                partition: partition.ok_or_else(|| bad(format!("missing partition in `{line}`")))?,
                positive: positive.ok_or_else(|| bad(format!("missing label in `{line}`")))?,
                vertebrae: vertebrae.ok_or_else(|| bad(format!("missing vertebrae in `{line}`")))?,
            };
            if entry.positive != entry.vertebrae.iter().any(|v| v.fractured) {
                return Err(bad(format!("series {} label disagrees with its vertebrae", entry.id)));
            }
            entries.push(entry);
        }
        if entries.len() != count {
            return Err(bad(format!("header declares {count} series, found {}", entries.len())));
        }
        Ok(Self {
            seed,
            entries,
            root: root.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn parse_flag(v: &str) -> Option<bool> {
    match v {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

fn parse_vertebrae(v: &str) -> Result<Vec<VertebraLabel>> {
    v.split(';')
        .map(|item| {
            let f: Vec<&str> = item.split(':').collect();
            let bad = || Error::Manifest(format!("bad vertebra record `{item}`"));
            if f.len() != 6 {
                return Err(bad());
            }
            Ok(VertebraLabel {
                index: f[0].parse().map_err(|_| bad())?,
                fractured: parse_flag(f[1]).ok_or_else(bad)?,
                height_loss: f[2].parse().map_err(|_| bad())?,
                grade: f[3].parse()?,
                top_mm: f[4].parse().map_err(|_| bad())?,
                bottom_mm: f[5].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Parameters of [`make_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRequest {
    pub n_series: usize,
    pub positive_fraction: f64,
    pub phantom: PhantomSpec,
    pub seed: u64,
    /// Relative frequency of mild, moderate and severe fractures.
    pub grade_weights: [f64; 3],
    /// Positive series carry between 1 and this many fractures.
    pub max_fractures: usize,
}

impl Default for DatasetRequest {
    fn default() -> Self {
        Self {
            n_series: 100,
            positive_fraction: 0.33,
            phantom: PhantomSpec::default(),
            seed: 42,
            grade_weights: [0.2, 0.4, 0.4],
            max_fractures: 2,
        }
    }
}

/// Fracture plan and partition for every series, without rendering volumes.
pub fn plan_dataset(req: &DatasetRequest) -> Result<Vec<(Vec<(usize, Grade)>, Partition)>> {
    if req.n_series < 10 {
        return Err(Error::Phantom(format!("need at least 10 series, got {}", req.n_series)));
    }
    if !(0.0..=1.0).contains(&req.positive_fraction) {
        return Err(Error::Phantom("positive_fraction must lie in [0, 1]".into()));
    }
    if req.max_fractures == 0 || req.max_fractures > req.phantom.n_vertebrae {
        return Err(Error::Phantom("max_fractures must be in 1..=n_vertebrae".into()));
    }
    if req.grade_weights.iter().any(|&w| !(w >= 0.0)) || req.grade_weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Phantom("grade weights must be non-negative and not all zero".into()));
    }
    let n = req.n_series;
    let n_pos = (req.positive_fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut positive = vec![false; n];
    for &i in &order[..n_pos] {
        positive[i] = true;
    }

    // Split 80/10/10 overall, stratified so each class is spread the same way.
    let n_train = (0.8 * n as f64).round() as usize;
    let n_tune = (0.1 * n as f64).round() as usize;
    let pos_train = ((0.8 * n_pos as f64).round() as usize).min(n_train);
    let pos_tune = ((0.1 * n_pos as f64).round() as usize).min(n_tune).min(n_pos - pos_train);
    let mut pos_ids: Vec<usize> = (0..n).filter(|&i| positive[i]).collect();
    let mut neg_ids: Vec<usize> = (0..n).filter(|&i| !positive[i]).collect();
    pos_ids.shuffle(&mut rng);
    neg_ids.shuffle(&mut rng);
    let neg_train = n_train - pos_train;
    let neg_tune = n_tune - pos_tune;
    if neg_train + neg_tune > neg_ids.len() {
        return Err(Error::Phantom("class balance leaves no room for a stratified split".into()));
    }
    let mut partition = vec![Partition::Test; n];
    for &i in &pos_ids[..pos_train] {
        partition[i] = Partition::Train;
    }
    for &i in &pos_ids[pos_train..pos_train + pos_tune] {
        partition[i] = Partition::Tune;
    }
    for &i in &neg_ids[..neg_train] {
        partition[i] = Partition::Train;
    }
    for &i in &neg_ids[neg_train..neg_train + neg_tune] {
        partition[i] = Partition::Tune;
    }

    let total_w: f64 = req.grade_weights.iter().sum();
    let grades = [Grade::Mild, Grade::Moderate, Grade::Severe];
    let mut plans = Vec::with_capacity(n);
    for i in 0..n {
        let mut plan = Vec::new();
        if positive[i] {
            let count = rng.gen_range(1..=req.max_fractures);
            let mut idx: Vec<usize> = (0..req.phantom.n_vertebrae).collect();
            idx.shuffle(&mut rng);
            for &v in &idx[..count] {
                let mut u = rng.gen::<f64>() * total_w;
                let mut g = Grade::Severe;
                for (w, gr) in req.grade_weights.iter().zip(grades) {
                    if u < *w {
                        g = gr;
                        break;
                    }
                    u -= w;
                }
                plan.push((v, g));
            }
            plan.sort_by_key(|p| p.0);
        }
        plans.push((plan, partition[i]));
    }
    Ok(plans)
}

/// Renders `req.n_series` phantoms into `out_dir` and writes `manifest.txt`.
/// Series `i` uses the `i`-th SplitMix64 output of the master seed.
pub fn make_dataset(req: &DatasetRequest, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let plans = plan_dataset(req)?;
    req.phantom.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let seeds = derive_seeds(req.seed, req.n_series);
    let entries = plans
        .par_iter()
        .zip(seeds.par_iter())
        .enumerate()
        .map(|(i, ((plan, partition), &seed))| {
            let (volume, label) = generate_series(&req.phantom.with_seed(seed), plan)?;
            let rel = PathBuf::from(format!("series_{i:04}.vsq"));
            save_volume(&volume, out_dir.join(&rel))?;
            Ok(ManifestEntry {
                id: i,
                path: rel,
                partition: *partition,
                positive: label.series_positive,
                vertebrae: label.per_vertebra,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        seed: req.seed,
        entries,
        root: out_dir.to_path_buf(),
    };
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
