//! Builders for the artefacts pinned under `tests/golden`.
#![allow(dead_code)]

use vertseq::cord::CordTrack;
use vertseq::model::{Model32, ModelConfig, SeqVariant};
use vertseq::phantom::{derive_seeds, generate_series, make_dataset, plan_dataset, DatasetRequest};
use vertseq::pipeline::{build_sequence, PipelineConfig};
use vertseq::render::{render_overlay, Gray8};
use vertseq::volume::Volume;

pub fn golden_volume() -> Volume {
    let data: Vec<i16> = (0..2 * 3 * 4).map(|i| (i as i16 - 12) * 85).collect();
    Volume::new([2, 3, 4], [2.5, 0.75, 0.75], data).unwrap()
}

/// Manifest text of the 10-series, seed-42 dataset.
pub fn golden_manifest_text() -> String {
    let req = DatasetRequest {
        n_series: 10,
        ..DatasetRequest::default()
    };
    let dir = tempfile::tempdir().unwrap();
    make_dataset(&req, dir.path()).unwrap().to_text()
}

pub fn tiny_model() -> Model32 {
    let cfg = ModelConfig {
        patch: [16, 16, 8],
        feature_dim: 8,
        base_filters: 2,
        lstm_hidden: 4,
        ..ModelConfig::for_variant(SeqVariant::BiLstm)
    };
    Model32::init(cfg, 0).unwrap()
}

/// Overlay of the zero-seed tiny model on series 0 of the default dataset,
/// tiled along the true canal track.
pub fn golden_overlay() -> Gray8 {
    let req = DatasetRequest::default();
    let plan = plan_dataset(&req).unwrap();
    let seed = derive_seeds(req.seed, 1)[0];
    let (vol, label) = generate_series(&req.phantom.with_seed(seed), &plan[0].0).unwrap();
    let track = CordTrack::from_centers(label.canal_centerline.clone());
    let model = tiny_model();
    let cfg = PipelineConfig {
        patch: model.config.patch,
        ..PipelineConfig::default()
    };
    let (sag, seq) = build_sequence(&vol, &track, &cfg).unwrap();
    let pred = model.predict(&seq).unwrap();
    let x = track.mean_x().round() as usize;
    render_overlay(&sag, x, Some(&pred.bbox)).unwrap()
}
