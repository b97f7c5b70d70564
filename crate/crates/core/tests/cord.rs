use proptest::prelude::*;
use std::sync::OnceLock;
use vertseq::cord::*;
use vertseq::phantom::PhantomSpec;
use vertseq::pipeline::phantom_detector_samples;
use vertseq::volume::WindowSpec;

fn det_at(z: usize, c: (f64, f64)) -> BoxDetection {
    BoxDetection {
        center: c,
        size: (10.0, 10.0),
        confidence: 0.9,
        slice_index: z,
    }
}

proptest! {
    #[test]
    fn interpolation_stays_between_neighbours(
        raw in prop::collection::vec((0.0f64..64.0, 0.0f64..64.0), 1..8),
        stride in 1usize..20,
        tail in 0usize..20,
    ) {
        let dets: Vec<_> = raw.iter().enumerate().map(|(i, &c)| det_at(i * stride, c)).collect();
        let nz = (raw.len() - 1) * stride + 1 + tail;
        let t = interpolate_track(&dets, nz).unwrap();
        prop_assert_eq!(t.len(), nz);
        for z in 0..nz {
            let i = (z / stride).min(raw.len() - 1);
            let j = (i + 1).min(raw.len() - 1);
            let (a, b) = (raw[i], raw[j]);
            let c = t.centers[z];
            prop_assert!(c.0 >= a.0.min(b.0) - 1e-12 && c.0 <= a.0.max(b.0) + 1e-12);
            prop_assert!(c.1 >= a.1.min(b.1) - 1e-12 && c.1 <= a.1.max(b.1) + 1e-12);
        }
    }

    #[test]
    fn encode_decode_round_trip(row in 0usize..7, col in 0usize..7, tx in -4.0f64..4.0, ty in -4.0f64..4.0, tw in -1.0f64..1.0, th in -1.0f64..1.0) {
        let cfg = DetectorConfig::default();
        let raw = CellRaw { tx, ty, tw, th, conf: 0.0 };
        let b = decode_cell(&cfg, row, col, &raw);
        let (r, c, back) = encode_box(&cfg, &b);
        prop_assert_eq!((r, c), (row, col));
        for (x, y) in [(back.tx, tx), (back.ty, ty), (back.tw, tw), (back.th, th)] {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn empty_detection_list_is_an_error() {
    assert!(interpolate_track(&[], 10).is_err());
    assert!(train_detector(&[], DetectorConfig::default(), &DetectorTrainConfig::default()).is_err());
}

fn samples(n_series: usize, per: usize, seed: u64) -> Vec<(DetectorSample, BoxDetection)> {
    phantom_detector_samples(&PhantomSpec::default(), &DetectorConfig::default(), &WindowSpec::default(), n_series, per, seed).unwrap()
}

#[test]
fn one_slice_is_memorized() {
    let s: Vec<_> = samples(1, 1, 3).into_iter().map(|x| x.0).collect();
    let cfg = DetectorTrainConfig { epochs: 150, batch: 1, lr: 3e-3, seed: 1 };
    let (_, hist) = train_detector(&s, DetectorConfig::default(), &cfg).unwrap();
    assert!(hist[hist.len() - 1] < 0.1 * hist[0], "{hist:?}");
}

#[test]
fn fixed_seed_gives_identical_detectors() {
    let s: Vec<_> = samples(2, 4, 5).into_iter().map(|x| x.0).collect();
    let cfg = DetectorTrainConfig { epochs: 2, batch: 4, lr: 2e-3, seed: 7 };
    let (a, ha) = train_detector(&s, DetectorConfig::default(), &cfg).unwrap();
    let (b, hb) = train_detector(&s, DetectorConfig::default(), &cfg).unwrap();
    assert_eq!(a.to_checkpoint().to_bytes(), b.to_checkpoint().to_bytes());
    assert_eq!(ha, hb);
}

fn trained() -> &'static Detector32 {
    static DET: OnceLock<Detector32> = OnceLock::new();
    DET.get_or_init(|| {
        let s: Vec<_> = samples(30, 10, 11).into_iter().map(|x| x.0).collect();
        train_detector(&s, DetectorConfig::default(), &DetectorTrainConfig::default()).unwrap().0
    })
}

#[test]
fn trained_detector_finds_the_canal() {
    let det = trained();
    let test = samples(10, 5, 12);
    let [ny, nx] = PhantomSpec::default().in_plane;
    for (s, truth) in &test {
        let (_, b, conf) = det.detect_input(&s.image).unwrap();
        let d = input_box_to_voxels(&det.config, &b, ny, nx, truth.slice_index, conf);
        let err = ((d.center.0 - truth.center.0).powi(2) + (d.center.1 - truth.center.1).powi(2)).sqrt();
        assert!(err < 5.0, "slice {}: {err}", truth.slice_index);
    }
}

/// Shifts an `n × n` image right by `dx` pixels, replicating the left edge.
fn shift_right(img: &[f32], n: usize, dx: usize) -> Vec<f32> {
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = img[r * n + c.saturating_sub(dx)];
        }
    }
    out
}

#[test]
fn one_cell_shift_moves_the_argmax_cell() {
    let det = trained();
    let cfg = det.config;
    let n = cfg.input_size();
    let cell = cfg.cell() as usize;
    let test = samples(10, 5, 13);
    let mut ok = 0;
    let mut total = 0;
    for (s, _) in &test {
        let (c0, _, _) = det.detect_input(&s.image).unwrap();
        if c0 % cfg.grid == cfg.grid - 1 {
            continue;
        }
        total += 1;
        let (c1, _, _) = det.detect_input(&shift_right(&s.image, n, cell)).unwrap();
        if c1 == c0 + 1 {
            ok += 1;
        }
    }
    assert!(total > 0 && ok as f64 >= 0.9 * total as f64, "{ok}/{total}");
}
