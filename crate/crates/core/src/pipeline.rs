//! Volume → cord track → sagittal volume → patch sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cord::{
    prepare_detector_slice, voxels_to_input_box, BoxDetection, CordTrack, Detector32, DetectorConfig, DetectorSample,
};
use crate::error::Result;
use crate::phantom::{derive_seeds, generate_series, Grade, Manifest, Partition, PhantomSpec, VertebraLabel};
use crate::representation::{reconstruct_sagittal, tile_patches, CropSpec, PatchSequence, SagittalVolume};
use crate::volume::{load_volume, Volume, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub window: WindowSpec,
    pub crop: CropSpec,
    pub patch: [usize; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec::default(),
            crop: CropSpec::default(),
            patch: [32, 32, 16],
        }
    }
}

/// Sagittal reconstruction and tiling along a known track.
pub fn build_sequence(volume: &Volume, track: &CordTrack, cfg: &PipelineConfig) -> Result<(SagittalVolume, PatchSequence)> {
    let sag = reconstruct_sagittal(volume, &cfg.window)?;
    let seq = tile_patches(&sag, track, cfg.patch, &cfg.crop)?;
    Ok((sag, seq))
}

/// Detector track, sagittal reconstruction and tiling.
pub fn prepare_series(
    volume: &Volume,
    detector: &Detector32,
    cfg: &PipelineConfig,
) -> Result<(CordTrack, SagittalVolume, PatchSequence)> {
    let track = detector.track(volume, &cfg.window)?;
    let (sag, seq) = build_sequence(volume, &track, cfg)?;
    Ok((track, sag, seq))
}

/// Per-patch targets: a patch is positive when it covers at least half of
/// the axial extent of some fractured vertebra.
pub fn patch_labels(seq: &PatchSequence, vertebrae: &[VertebraLabel]) -> Vec<f64> {
    seq.sources
        .iter()
        .map(|s| {
            let (a, b) = (s.row_start as f64 * seq.row_mm, s.row_end as f64 * seq.row_mm);
            let hit = vertebrae.iter().filter(|v| v.fractured).any(|v| {
                let overlap = (b.min(v.bottom_mm) - a.max(v.top_mm)).max(0.0);
                overlap >= 0.5 * (v.bottom_mm - v.top_mm)
            });
            f64::from(u8::from(hit))
        })
        .collect()
}

/// A prepared series ready for training or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesExample {
    pub id: usize,
    pub label: bool,
    pub seq: PatchSequence,
    pub patch_labels: Vec<f64>,
}

/// Loads and prepares every series of `partition`, in manifest order.
pub fn load_examples(
    manifest: &Manifest,
    partition: Partition,
    detector: &Detector32,
    cfg: &PipelineConfig,
) -> Result<Vec<SeriesExample>> {
    let entries: Vec<_> = manifest.partition(partition).collect();
    entries
        .par_iter()
        .map(|e| {
            let volume = load_volume(manifest.resolve(e))?;
            let (_, _, seq) = prepare_series(&volume, detector, cfg)?;
            let labels = patch_labels(&seq, &e.vertebrae);
            Ok(SeriesExample {
                id: e.id,
                label: e.positive,
                seq,
                patch_labels: labels,
            })
        })
        .collect()
}

/// Random axial slices from freshly generated phantoms, each paired with its
/// input-space target and the true canal box in voxels.
pub fn phantom_detector_samples(
    spec: &PhantomSpec,
    detector: &DetectorConfig,
    window: &WindowSpec,
    n_series: usize,
    per_series: usize,
    seed: u64,
) -> Result<Vec<(DetectorSample, BoxDetection)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = derive_seeds(seed, n_series);
    let n_vert = spec.n_vertebrae;
    let mut out = Vec::with_capacity(n_series * per_series);
    for s in seeds {
        let plan = if rng.gen_bool(0.5) {
            vec![(rng.gen_range(0..n_vert), Grade::Severe)]
        } else {
            Vec::new()
        };
        let (vol, lab) = generate_series(&spec.with_seed(s), &plan)?;
        let [nz, ny, nx] = vol.shape();
        for _ in 0..per_series {
            let z = rng.gen_range(0..nz);
            let c = lab.canal_centerline[z];
            let target = voxels_to_input_box(detector, c, lab.canal_box, ny, nx);
            let truth = BoxDetection {
                center: c,
                size: lab.canal_box,
                confidence: 1.0,
                slice_index: z,
            };
            out.push((
                DetectorSample {
                    image: prepare_detector_slice(detector, &vol, z, window),
                    target,
                },
                truth,
            ));
        }
    }
    Ok(out)
}
