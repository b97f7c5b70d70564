//! Spinal canal localization: a grid detector on sampled axial slices plus
//! linear interpolation in between.
//!
//! The detector resizes a windowed slice to `8·S × 8·S`, runs three
//! conv/ReLU/pool stages and a 3×3 head that emits `(tx, ty, tw, th, conf)`
//! per grid cell. Centres decode as `(j + σ(tx))·cell`, sizes as
//! `anchor·exp(tw)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use vertseq_nn::{
    bce, conv3d, conv3d_backward, he_uniform, maxpool3d, maxpool3d_backward, sigmoid, AdamConfig, AdamState,
    Conv3dSpec, ParamSet, Pooled, Scalar, Tensor,
};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::layers::{conv_relu, conv_relu_backward, resize_bilinear};
use crate::volume::{Volume, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDetection {
    /// Centre `(cx, cy)` in voxel index coordinates of the slice.
    pub center: (f64, f64),
    /// `(w, h)` in voxels.
    pub size: (f64, f64),
    pub confidence: f64,
    pub slice_index: usize,
}

impl BoxDetection {
    pub fn iou(&self, other: &BoxDetection) -> f64 {
        iou(self.center, self.size, other.center, other.size)
    }
}

/// Intersection over union of two centre/size boxes.
pub fn iou(ca: (f64, f64), sa: (f64, f64), cb: (f64, f64), sb: (f64, f64)) -> f64 {
    let overlap = |c1: f64, s1: f64, c2: f64, s2: f64| {
        ((c1 + s1 / 2.0).min(c2 + s2 / 2.0) - (c1 - s1 / 2.0).max(c2 - s2 / 2.0)).max(0.0)
    };
    let inter = overlap(ca.0, sa.0, cb.0, sb.0) * overlap(ca.1, sa.1, cb.1, sb.1);
    let union = sa.0 * sa.1 + sb.0 * sb.1 - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Canal centre for every axial slice.
#[derive(Debug, Clone, PartialEq)]
pub struct CordTrack {
    pub centers: Vec<(f64, f64)>,
    /// `true` where the centre came from a detection.
    pub detected: Vec<bool>,
}

impl CordTrack {
    pub fn constant(nz: usize, center: (f64, f64)) -> Self {
        Self {
            centers: vec![center; nz],
            detected: vec![false; nz],
        }
    }

    /// Track from known centres, every slice marked as detected.
    pub fn from_centers(centers: Vec<(f64, f64)>) -> Self {
        let n = centers.len();
        Self {
            centers,
            detected: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Centre at a continuous slice coordinate, linear between slices and
    /// clamped at the ends.
    pub fn at(&self, z: f64) -> (f64, f64) {
        let last = self.centers.len() - 1;
        let z = z.clamp(0.0, last as f64);
        let i = (z.floor() as usize).min(last);
        let j = (i + 1).min(last);
        let t = z - i as f64;
        let (a, b) = (self.centers[i], self.centers[j]);
        (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
    }

    pub fn mean_x(&self) -> f64 {
        self.centers.iter().map(|c| c.0).sum::<f64>() / self.centers.len() as f64
    }
}

/// Fills every slice from detections sorted by slice: linear between
/// neighbours, constant beyond the first and last.
pub fn interpolate_track(detections: &[BoxDetection], nz: usize) -> Result<CordTrack> {
    let first = detections
        .first()
        .ok_or_else(|| Error::Invalid("cannot interpolate an empty detection list".into()))?;
    if detections.windows(2).any(|w| w[0].slice_index >= w[1].slice_index) {
        return Err(Error::Invalid("detections must be strictly increasing in slice".into()));
    }
    if detections.last().map_or(false, |d| d.slice_index >= nz) {
        return Err(Error::Invalid(format!("detection beyond the last slice (nz = {nz})")));
    }
    let mut centers = vec![first.center; nz];
    let mut detected = vec![false; nz];
    for d in detections {
        detected[d.slice_index] = true;
    }
    let last = detections[detections.len() - 1];
    for (z, c) in centers.iter_mut().enumerate() {
        if z >= last.slice_index {
            *c = last.center;
            continue;
        }
        if z <= first.slice_index {
            continue;
        }
        let k = detections.partition_point(|d| d.slice_index <= z);
        let (a, b) = (detections[k - 1], detections[k]);
        let t = (z - a.slice_index) as f64 / (b.slice_index - a.slice_index) as f64;
        *c = (
            a.center.0 + (b.center.0 - a.center.0) * t,
            a.center.1 + (b.center.1 - a.center.1) * t,
        );
    }
    Ok(CordTrack { centers, detected })
}

/// Detection stride in slices for a 30 mm sampling interval.
pub fn detection_stride(sz: f64) -> usize {
    ((30.0 / sz).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub grid: usize,
    pub channels: [usize; 3],
    /// Anchor `(w, h)` in detector input pixels.
    pub anchor: (f64, f64),
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            grid: 7,
            channels: [8, 16, 32],
            anchor: (12.0, 12.0),
        }
    }
}

impl DetectorConfig {
    pub fn input_size(&self) -> usize {
        self.grid * 8
    }

    pub fn cell(&self) -> f64 {
        8.0
    }
}

const LAYERS: [&str; 4] = ["conv1", "conv2", "conv3", "head"];

#[derive(Debug, Clone, PartialEq)]
pub struct Detector<T> {
    pub config: DetectorConfig,
    pub params: ParamSet<T>,
}

pub type Detector32 = Detector<f32>;

/// Raw head outputs for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRaw {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
    pub conf: f64,
}

/// Decoded box in detector input pixels, edge coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

pub fn decode_cell(cfg: &DetectorConfig, row: usize, col: usize, raw: &CellRaw) -> InputBox {
    let cell = cfg.cell();
    InputBox {
        cx: (col as f64 + sigmoid(raw.tx)) * cell,
        cy: (row as f64 + sigmoid(raw.ty)) * cell,
        w: cfg.anchor.0 * raw.tw.exp(),
        h: cfg.anchor.1 * raw.th.exp(),
    }
}

/// Inverse of [`decode_cell`]: the responsible cell `(row, col)` and raw
/// offsets. Centres exactly on a cell edge give infinite offsets.
pub fn encode_box(cfg: &DetectorConfig, b: &InputBox) -> (usize, usize, CellRaw) {
    let cell = cfg.cell();
    let s = cfg.grid;
    let fx = b.cx / cell;
    let fy = b.cy / cell;
    let col = (fx.floor().max(0.0) as usize).min(s - 1);
    let row = (fy.floor().max(0.0) as usize).min(s - 1);
    let logit = |p: f64| (p / (1.0 - p)).ln();
    (
        row,
        col,
        CellRaw {
            tx: logit(fx - col as f64),
            ty: logit(fy - row as f64),
            tw: (b.w / cfg.anchor.0).ln(),
            th: (b.h / cfg.anchor.1).ln(),
            conf: 0.0,
        },
    )
}

struct Trace<T> {
    inputs: [Tensor<T>; 4],
    acts: [Tensor<T>; 3],
    pools: [Pooled<T>; 3],
    head: Tensor<T>,
}

fn spec_2d() -> Conv3dSpec {
    Conv3dSpec::new([1, 1, 1], [1, 1, 0])
}

impl<T: Scalar> Detector<T> {
    pub fn zeros(config: DetectorConfig) -> Self {
        let mut params = ParamSet::new();
        let mut cin = 1;
        for (name, cout) in LAYERS.iter().zip(config.channels.iter().copied().chain([5])) {
            params.push(format!("{name}.w"), Tensor::zeros(&[cout, cin, 3, 3, 1]));
            params.push(format!("{name}.b"), Tensor::zeros(&[cout]));
            cin = cout;
        }
        Self { config, params }
    }

    pub fn init(config: DetectorConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut det = Self::zeros(config);
        let mut cin = 1;
        for (name, cout) in LAYERS.iter().zip(config.channels.iter().copied().chain([5])) {
            *det.params.get_mut(&format!("{name}.w")).expect("declared") =
                he_uniform(&[cout, cin, 3, 3, 1], cin * 9, &mut rng);
            cin = cout;
        }
        det
    }

    fn w(&self, layer: &str) -> &Tensor<T> {
        self.params.get(&format!("{layer}.w")).expect("declared")
    }

    fn b(&self, layer: &str) -> &Tensor<T> {
        self.params.get(&format!("{layer}.b")).expect("declared")
    }

    fn forward_trace(&self, image: &[T]) -> Result<Trace<T>> {
        let n = self.config.input_size();
        let x0 = Tensor::from_vec(&[1, n, n, 1], image.to_vec())?;
        let spec = spec_2d();
        let mut inputs = Vec::with_capacity(4);
        let mut acts = Vec::with_capacity(3);
        let mut pools = Vec::with_capacity(3);
        let mut x = x0;
        for layer in &LAYERS[..3] {
            let a = conv_relu(&x, self.w(layer), self.b(layer), &spec)?;
            let p = maxpool3d(&a, [2, 2, 1], [2, 2, 1])?;
            inputs.push(x);
            x = p.output.clone();
            acts.push(a);
            pools.push(p);
        }
        let head = conv3d(&x, self.w("head"), self.b("head"), &spec)?;
        inputs.push(x);
        Ok(Trace {
            inputs: inputs.try_into().map_err(|_| Error::Invalid("detector trace".into()))?,
            acts: acts.try_into().map_err(|_| Error::Invalid("detector trace".into()))?,
            pools: pools.try_into().map_err(|_| Error::Invalid("detector trace".into()))?,
            head,
        })
    }

    /// Raw head outputs, one per cell in row-major order.
    pub fn raw_cells(&self, image: &[T]) -> Result<Vec<CellRaw>> {
        let head = self.forward_trace(image)?.head;
        Ok(cells_of(&head, self.config.grid))
    }

    /// Highest-confidence box on a detector-sized image; ties go to the
    /// first cell in row-major order.
    pub fn detect_input(&self, image: &[T]) -> Result<(usize, InputBox, f64)> {
        let cells = self.raw_cells(image)?;
        let mut best = 0;
        for (i, c) in cells.iter().enumerate() {
            if c.conf > cells[best].conf {
                best = i;
            }
        }
        let s = self.config.grid;
        let b = decode_cell(&self.config, best / s, best % s, &cells[best]);
        Ok((best, b, sigmoid(cells[best].conf)))
    }

    /// Loss and parameter gradients for one image with its target box.
    pub fn loss_and_grad(&self, image: &[T], target: &InputBox) -> Result<(f64, ParamSet<T>)> {
        let trace = self.forward_trace(image)?;
        let s = self.config.grid;
        let (row, col, t) = encode_box(&self.config, target);
        let resp = row * s + col;
        let plane = s * s;
        let h = trace.head.data();
        let mut g = vec![T::zero(); h.len()];
        let mut loss = 0.0;
        for cell in 0..plane {
            let conf = h[4 * plane + cell].as_f64();
            let p = sigmoid(conf);
            let (y, weight) = if cell == resp { (1.0, 1.0) } else { (0.0, NOOBJ_WEIGHT) };
            loss += weight * bce(p, y);
            g[4 * plane + cell] = T::from_f64_lossy(weight * (p - y));
        }
        let fx = t.tx.is_finite().then(|| sigmoid(t.tx)).unwrap_or_else(|| if t.tx > 0.0 { 1.0 } else { 0.0 });
        let fy = t.ty.is_finite().then(|| sigmoid(t.ty)).unwrap_or_else(|| if t.ty > 0.0 { 1.0 } else { 0.0 });
        for (ch, target, squash) in [(0, fx, true), (1, fy, true), (2, t.tw, false), (3, t.th, false)] {
            let raw = h[ch * plane + resp].as_f64();
            let (v, dv) = if squash {
                let s = sigmoid(raw);
                (s, s * (1.0 - s))
            } else {
                (raw, 1.0)
            };
            loss += COORD_WEIGHT * (v - target).powi(2);
            g[ch * plane + resp] = T::from_f64_lossy(COORD_WEIGHT * 2.0 * (v - target) * dv);
        }
        let grads = self.backward(&trace, Tensor::from_vec(trace.head.shape(), g)?)?;
        Ok((loss, grads))
    }

    fn backward(&self, trace: &Trace<T>, grad_head: Tensor<T>) -> Result<ParamSet<T>> {
        let spec = spec_2d();
        let mut grads = self.params.zeros_like();
        let gh = conv3d_backward(&trace.inputs[3], self.w("head"), &grad_head, &spec)?;
        *grads.get_mut("head.w")? = gh.weight;
        *grads.get_mut("head.b")? = gh.bias;
        let mut g = gh.input;
        for i in (0..3).rev() {
            let layer = LAYERS[i];
            let ga = maxpool3d_backward(&g, &trace.pools[i].argmax, trace.acts[i].shape())?;
            let gc = conv_relu_backward(&trace.inputs[i], &trace.acts[i], self.w(layer), ga, &spec)?;
            *grads.get_mut(&format!("{layer}.w"))? = gc.weight;
            *grads.get_mut(&format!("{layer}.b"))? = gc.bias;
            g = gc.input;
        }
        Ok(grads)
    }
}

const COORD_WEIGHT: f64 = 5.0;
const NOOBJ_WEIGHT: f64 = 0.5;

fn cells_of<T: Scalar>(head: &Tensor<T>, s: usize) -> Vec<CellRaw> {
    let h = head.data();
    let plane = s * s;
    (0..plane)
        .map(|c| CellRaw {
            tx: h[c].as_f64(),
            ty: h[plane + c].as_f64(),
            tw: h[2 * plane + c].as_f64(),
            th: h[3 * plane + c].as_f64(),
            conf: h[4 * plane + c].as_f64(),
        })
        .collect()
}

impl Detector<f32> {
    pub fn to_checkpoint(&self) -> Checkpoint<f32> {
        let mut c = Checkpoint::new(self.params.clone());
        c.set("kind", "detector");
        c.set("grid", self.config.grid);
        c.set(
            "channels",
            self.config.channels.map(|v| v.to_string()).join(","),
        );
        c.set("anchor_w", self.config.anchor.0);
        c.set("anchor_h", self.config.anchor.1);
        c
    }

    pub fn from_checkpoint(c: &Checkpoint<f32>) -> Result<Self> {
        if c.get("kind") != Some("detector") {
            return Err(Error::Checkpoint("not a detector checkpoint".into()));
        }
        let channels: Vec<usize> = c
            .get("channels")
            .unwrap_or("")
            .split(',')
            .map(|v| v.parse().map_err(|_| Error::Checkpoint(format!("bad channels `{v}`"))))
            .collect::<Result<_>>()?;
        let channels: [usize; 3] = channels
            .try_into()
            .map_err(|_| Error::Checkpoint("detector needs three channel counts".into()))?;
        let config = DetectorConfig {
            grid: c.require("grid")?,
            channels,
            anchor: (c.require("anchor_w")?, c.require("anchor_h")?),
        };
        if config.grid == 0 {
            return Err(Error::Checkpoint("grid must be positive".into()));
        }
        let det = Self::zeros(config);
        c.check_layout(&det.params)?;
        Ok(Self {
            config,
            params: c.params.clone(),
        })
    }

    /// Windowed axial slice resized to the detector input.
    pub fn prepare_slice(&self, volume: &Volume, z: usize, window: &WindowSpec) -> Vec<f32> {
        prepare_detector_slice(&self.config, volume, z, window)
    }

    /// Best box on axial slice `z`, in voxel coordinates of that slice.
    pub fn detect_slice(&self, volume: &Volume, z: usize, window: &WindowSpec) -> Result<BoxDetection> {
        let img = self.prepare_slice(volume, z, window);
        let (_, b, conf) = self.detect_input(&img)?;
        let [_, ny, nx] = volume.shape();
        Ok(input_box_to_voxels(&self.config, &b, ny, nx, z, conf))
    }

    /// Detects every `ceil(30 mm / sz)` slices from slice 0 and interpolates.
    pub fn track(&self, volume: &Volume, window: &WindowSpec) -> Result<CordTrack> {
        let [nz, _, _] = volume.shape();
        let stride = detection_stride(volume.spacing()[0]);
        let dets = (0..nz)
            .step_by(stride)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&z| self.detect_slice(volume, z, window))
            .collect::<Result<Vec<_>>>()?;
        interpolate_track(&dets, nz)
    }
}

/// Windowed axial slice `z` resized to the detector input.
pub fn prepare_detector_slice(cfg: &DetectorConfig, volume: &Volume, z: usize, window: &WindowSpec) -> Vec<f32> {
    let [_, ny, nx] = volume.shape();
    let src: Vec<f64> = volume.axial_slice(z).iter().map(|&v| window.apply(f64::from(v))).collect();
    let n = cfg.input_size();
    resize_bilinear(&src, ny, nx, n, n).into_iter().map(|v| v as f32).collect()
}

/// Maps a detector-input box to slice voxel coordinates.
pub fn input_box_to_voxels(cfg: &DetectorConfig, b: &InputBox, ny: usize, nx: usize, z: usize, conf: f64) -> BoxDetection {
    let n = cfg.input_size() as f64;
    let (kx, ky) = (nx as f64 / n, ny as f64 / n);
    BoxDetection {
        center: (
            (b.cx * kx - 0.5).clamp(0.0, (nx - 1) as f64),
            (b.cy * ky - 0.5).clamp(0.0, (ny - 1) as f64),
        ),
        size: (b.w * kx, b.h * ky),
        confidence: conf,
        slice_index: z,
    }
}

/// Maps a voxel-space box to detector input pixels.
pub fn voxels_to_input_box(cfg: &DetectorConfig, center: (f64, f64), size: (f64, f64), ny: usize, nx: usize) -> InputBox {
    let n = cfg.input_size() as f64;
    let (kx, ky) = (n / nx as f64, n / ny as f64);
    InputBox {
        cx: (center.0 + 0.5) * kx,
        cy: (center.1 + 0.5) * ky,
        w: size.0 * kx,
        h: size.1 * ky,
    }
}

/// One training image at detector resolution and its target box.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSample {
    pub image: Vec<f32>,
    pub target: InputBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 12,
            batch: 8,
            lr: 2e-3,
            seed: 0,
        }
    }
}

/// Mean per-sample loss over `samples`.
pub fn detector_loss(det: &Detector32, samples: &[DetectorSample]) -> Result<f64> {
    let losses = samples
        .par_iter()
        .map(|s| det.loss_and_grad(&s.image, &s.target).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

/// Adam on shuffled mini-batches. Returns the detector and the training-set
/// loss before the first epoch and after every epoch.
pub fn train_detector(
    samples: &[DetectorSample],
    config: DetectorConfig,
    train: &DetectorTrainConfig,
) -> Result<(Detector32, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::Invalid("detector training needs at least one slice".into()));
    }
    if train.batch == 0 || !(train.lr > 0.0) {
        return Err(Error::Invalid("batch must be positive and lr > 0".into()));
    }
    let n = config.input_size();
    if samples.iter().any(|s| s.image.len() != n * n) {
        return Err(Error::Invalid(format!("detector samples must be {n}x{n}")));
    }
    let mut det = Detector32::init(config, train.seed);
    let mut adam = AdamState::new(AdamConfig::with_lr(train.lr), &det.params);
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ 0x5EED);
    let mut history = vec![detector_loss(&det, samples)?];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..train.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(train.batch) {
            let parts = batch
                .par_iter()
                .map(|&i| det.loss_and_grad(&samples[i].image, &samples[i].target).map(|r| r.1))
                .collect::<Result<Vec<_>>>()?;
            let mut grads = det.params.zeros_like();
            for g in &parts {
                grads.add_assign(g)?;
            }
            grads.scale(1.0 / batch.len() as f32);
            adam.step(&mut det.params, &grads)?;
        }
        history.push(detector_loss(&det, samples)?);
    }
    Ok((det, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(z: usize, cx: f64) -> BoxDetection {
        BoxDetection {
            center: (cx, 2.0 * cx),
            size: (1.0, 1.0),
            confidence: 1.0,
            slice_index: z,
        }
    }

    #[test]
    fn midpoint_and_affine_interpolation() {
        let t = interpolate_track(&[det(0, 10.0), det(30, 20.0)], 31).unwrap();
        assert_eq!(t.centers[15], (15.0, 30.0));
        let t = interpolate_track(&[det(0, 0.0), det(10, 10.0)], 11).unwrap();
        assert_eq!(t.centers[3].0, 3.0);
        assert!(t.detected[0] && t.detected[10] && !t.detected[3]);
    }

    #[test]
    fn single_detection_extends_everywhere() {
        let t = interpolate_track(&[det(4, 7.0)], 9).unwrap();
        assert!(t.centers.iter().all(|&c| c == (7.0, 14.0)));
        assert!(interpolate_track(&[], 9).is_err());
        assert!(interpolate_track(&[det(4, 1.0), det(2, 1.0)], 9).is_err());
    }

    #[test]
    fn zero_detector_prefers_first_cell() {
        let cfg = DetectorConfig::default();
        let d = Detector32::zeros(cfg);
        let img = vec![0.3f32; cfg.input_size().pow(2)];
        let cells = d.raw_cells(&img).unwrap();
        assert!(cells.iter().all(|c| sigmoid(c.conf) == 0.5));
        let (cell, b, conf) = d.detect_input(&img).unwrap();
        assert_eq!((cell, conf), (0, 0.5));
        assert_eq!((b.cx, b.cy), (4.0, 4.0));
        assert_eq!((b.w, b.h), cfg.anchor);
    }

    #[test]
    fn encode_inverts_decode() {
        let cfg = DetectorConfig::default();
        let raw = CellRaw {
            tx: 0.7,
            ty: -1.2,
            tw: 0.3,
            th: -0.4,
            conf: 0.0,
        };
        let b = decode_cell(&cfg, 3, 5, &raw);
        let (r, c, back) = encode_box(&cfg, &b);
        assert_eq!((r, c), (3, 5));
        for (a, e) in [(back.tx, raw.tx), (back.ty, raw.ty), (back.tw, raw.tw), (back.th, raw.th)] {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn voxel_mapping_round_trips() {
        let cfg = DetectorConfig::default();
        let b = voxels_to_input_box(&cfg, (20.3, 41.0), (12.8, 12.8), 64, 64);
        let back = input_box_to_voxels(&cfg, &b, 64, 64, 0, 1.0);
        assert!((back.center.0 - 20.3).abs() < 1e-12 && (back.center.1 - 41.0).abs() < 1e-12);
        assert!((back.size.0 - 12.8).abs() < 1e-12);
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou((0.0, 0.0), (2.0, 2.0), (0.0, 0.0), (2.0, 2.0)), 1.0);
        assert_eq!(iou((0.0, 0.0), (2.0, 2.0), (5.0, 0.0), (2.0, 2.0)), 0.0);
        assert!((iou((0.0, 0.0), (2.0, 2.0), (1.0, 0.0), (2.0, 2.0)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let d = Detector32::init(DetectorConfig::default(), 3);
        let back = Detector32::from_checkpoint(&d.to_checkpoint()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn stride_rounds_up() {
        assert_eq!(detection_stride(2.5), 12);
        assert_eq!(detection_stride(7.0), 5);
        assert_eq!(detection_stride(1.0), 30);
    }
}
