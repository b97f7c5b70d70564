//! Patch-sequence classifier.
//!
//! Each patch goes through a shared 3D CNN (`rep`) to a feature vector,
//! optionally extended with the patch location. A sequence stage turns the
//! features into per-patch probabilities: either a per-item head followed by
//! a sliding max, or a (Bi)LSTM with a per-step head. The series score is the
//! maximum of the moving-average smoothed probabilities.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vertseq_nn::{
    bce, bce_grad, dense, dense_backward, he_uniform, lstm_backward, lstm_forward, maxpool3d, maxpool3d_backward,
    relu_backward_inplace, relu_inplace, sigmoid, Conv3dSpec, LstmTrace, LstmWeights, ParamSet, Pooled, Scalar,
    Tensor,
};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::layers::{conv_relu, conv_relu_backward};
use crate::representation::PatchSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeqVariant {
    MaxProb,
    MaxProbWithLocation,
    Lstm,
    BiLstm,
}

impl SeqVariant {
    pub const ALL: [SeqVariant; 4] = [Self::MaxProb, Self::MaxProbWithLocation, Self::Lstm, Self::BiLstm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MaxProb => "max",
            Self::MaxProbWithLocation => "maxloc",
            Self::Lstm => "lstm",
            Self::BiLstm => "bilstm",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, Self::Lstm | Self::BiLstm)
    }
}

impl fmt::Display for SeqVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeqVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown variant `{s}` (expected max, maxloc, lstm or bilstm)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggVariant {
    SmoothedMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// `(pH, pW, pZ)`
    pub patch: [usize; 3],
    pub feature_dim: usize,
    pub base_filters: usize,
    pub seq: SeqVariant,
    pub agg: AggVariant,
    pub smooth_width: usize,
    /// Sliding-max window of the max variants.
    pub max_window: usize,
    pub lambda: f64,
    pub use_location: bool,
    pub lstm_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            patch: [32, 32, 16],
            feature_dim: 64,
            base_filters: 8,
            seq: SeqVariant::MaxProb,
            agg: AggVariant::SmoothedMax,
            smooth_width: 3,
            max_window: 3,
            lambda: 1.0,
            use_location: false,
            lstm_hidden: 32,
        }
    }
}

impl ModelConfig {
    /// Default configuration for `seq`; location input is on for every
    /// variant except plain max.
    pub fn for_variant(seq: SeqVariant) -> Self {
        Self {
            seq,
            use_location: seq != SeqVariant::MaxProb,
            ..Self::default()
        }
    }

    pub fn channels(&self) -> [usize; 3] {
        [self.base_filters, 2 * self.base_filters, 4 * self.base_filters]
    }

    /// Spatial shape after the three pooling stages.
    pub fn pooled_shape(&self) -> [usize; 3] {
        self.patch.map(|d| d / 2 / 2 / 2)
    }

    /// Width of the per-patch feature fed to the sequence stage.
    pub fn item_dim(&self) -> usize {
        self.feature_dim + usize::from(self.use_location)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("model config: {m}")));
        if self.patch.iter().any(|&d| d < 8) {
            return bad("every patch axis must be at least 8");
        }
        if self.feature_dim == 0 || self.base_filters == 0 || self.lstm_hidden == 0 {
            return bad("feature_dim, base_filters and lstm_hidden must be positive");
        }
        if self.smooth_width % 2 == 0 || self.max_window % 2 == 0 {
            return bad("smoothing and max-filter widths must be odd");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        match (self.seq, self.use_location) {
            (SeqVariant::MaxProb, true) => bad("variant `max` takes no location input"),
            (SeqVariant::MaxProbWithLocation, false) => bad("variant `maxloc` needs the location input"),
            _ => Ok(()),
        }
    }
}

/// Sliding maximum with an edge-clipped odd window. Returns the filtered
/// values and, per output, the index of the winning input (first on ties).
pub fn max_filter<T: Scalar>(s: &[T], window: usize) -> (Vec<T>, Vec<usize>) {
    let r = window / 2;
    let k = s.len();
    let mut out = Vec::with_capacity(k);
    let mut arg = Vec::with_capacity(k);
    for i in 0..k {
        let lo = i.saturating_sub(r);
        let hi = (i + r).min(k - 1);
        let mut best = lo;
        for j in lo..=hi {
            if s[j] > s[best] {
                best = j;
            }
        }
        out.push(s[best]);
        arg.push(best);
    }
    (out, arg)
}

/// Centred moving average with an edge-clipped odd window, renormalized by
/// the number of samples actually covered.
pub fn smooth<T: Scalar>(p: &[T], width: usize) -> Vec<T> {
    let r = width / 2;
    let k = p.len();
    (0..k)
        .map(|i| {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(k - 1);
            let n = T::from_usize(hi - lo + 1).expect("window size");
            // Offsets from the centre keep constant runs exact.
            p[i] + p[lo..=hi].iter().map(|&v| v - p[i]).sum::<T>() / n
        })
        .collect()
}

/// Series score: maximum of the smoothed sequence. Returns `(score, argmax,
/// smoothed)`; ties go to the first index.
pub fn f_agg<T: Scalar>(p: &[T], width: usize) -> (T, usize, Vec<T>) {
    let m = smooth(p, width);
    let mut best = 0;
    for (i, v) in m.iter().enumerate() {
        if *v > m[best] {
            best = i;
        }
    }
    (m[best], best, m)
}

const REP_LAYERS: [&str; 6] = ["rep.b1.c1", "rep.b1.c2", "rep.b2.c1", "rep.b2.c2", "rep.b3.c1", "rep.b3.c2"];

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamSet<T>,
}

pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;

struct RepTrace<T> {
    conv_in: Vec<Tensor<T>>,
    acts: Vec<Tensor<T>>,
    pools: Vec<Pooled<T>>,
    flat: Vec<T>,
    z: Vec<T>,
}

enum SeqTrace<T> {
    Max { items: Vec<T>, arg: Vec<usize> },
    Recurrent { hidden: Tensor<T>, fwd: LstmTrace<T>, bwd: Option<LstmTrace<T>> },
}

/// Everything the backward pass needs from one series forward pass.
pub struct SeriesForward<T> {
    reps: Vec<RepTrace<T>>,
    feats: Tensor<T>,
    seq: SeqTrace<T>,
    pub probs: Vec<T>,
    pub smoothed: Vec<T>,
    pub argmax: usize,
    pub score: T,
}

fn conv_spec() -> Conv3dSpec {
    Conv3dSpec::same(1)
}

impl<T: Scalar> Model<T> {
    /// Parameter layout with every tensor zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut p = ParamSet::new();
        let ch = config.channels();
        let mut cin = 1;
        for (i, name) in REP_LAYERS.iter().enumerate() {
            let cout = ch[i / 2];
            p.push(format!("{name}.w"), Tensor::zeros(&[cout, cin, 3, 3, 3]));
            p.push(format!("{name}.b"), Tensor::zeros(&[cout]));
            cin = cout;
        }
        let flat = ch[2] * config.pooled_shape().iter().product::<usize>();
        p.push("rep.dense.w", Tensor::zeros(&[config.feature_dim, flat]));
        p.push("rep.dense.b", Tensor::zeros(&[config.feature_dim]));
        let f = config.item_dim();
        let h = config.lstm_hidden;
        let head_in = match config.seq {
            SeqVariant::MaxProb | SeqVariant::MaxProbWithLocation => f,
            SeqVariant::Lstm => h,
            SeqVariant::BiLstm => 2 * h,
        };
        let dirs: &[&str] = match config.seq {
            SeqVariant::Lstm => &["fwd"],
            SeqVariant::BiLstm => &["fwd", "bwd"],
            _ => &[],
        };
        for d in dirs {
            p.push(format!("lstm.{d}.w_ih"), Tensor::zeros(&[4 * h, f]));
            p.push(format!("lstm.{d}.w_hh"), Tensor::zeros(&[4 * h, h]));
            p.push(format!("lstm.{d}.bias"), Tensor::zeros(&[4 * h]));
        }
        p.push("head.w", Tensor::zeros(&[1, head_in]));
        p.push("head.b", Tensor::zeros(&[1]));
        Ok(Self { config, params: p })
    }

    /// He-uniform weights from `seed`, zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names: Vec<(String, Vec<usize>)> = m
            .params
            .iter()
            .filter(|(n, _)| n.ends_with(".w") || n.ends_with(".w_ih") || n.ends_with(".w_hh"))
            .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
            .collect();
        for (name, shape) in names {
            let fan_in: usize = shape[1..].iter().product();
            *m.params.get_mut(&name)? = he_uniform(&shape, fan_in, &mut rng);
        }
        Ok(m)
    }

    fn p(&self, name: &str) -> &Tensor<T> {
        self.params.get(name).expect("parameter declared by Model::zeros")
    }

    fn rep_forward(&self, patch: Tensor<T>) -> Result<RepTrace<T>> {
        let spec = conv_spec();
        let mut x = patch;
        let mut conv_in = Vec::with_capacity(6);
        let mut acts = Vec::with_capacity(6);
        let mut pools = Vec::with_capacity(3);
        for (i, name) in REP_LAYERS.iter().enumerate() {
            let a = conv_relu(&x, self.p(&format!("{name}.w")), self.p(&format!("{name}.b")), &spec)?;
            conv_in.push(x);
            if i % 2 == 1 {
                let pooled = maxpool3d(&a, [2, 2, 2], [2, 2, 2])?;
                x = pooled.output.clone();
                pools.push(pooled);
            } else {
                x = a.clone();
            }
            acts.push(a);
        }
        let flat = x.into_data();
        let mut z = dense(&flat, self.p("rep.dense.w"), self.p("rep.dense.b"))?;
        relu_inplace(&mut z);
        Ok(RepTrace {
            conv_in,
            acts,
            pools,
            flat,
            z,
        })
    }

    fn rep_backward(&self, t: &RepTrace<T>, dz: &[T], grads: &mut ParamSet<T>) -> Result<()> {
        let spec = conv_spec();
        let mut dz = dz.to_vec();
        relu_backward_inplace(&t.z, &mut dz);
        let dg = dense_backward(&t.flat, self.p("rep.dense.w"), &dz)?;
        grads.accumulate("rep.dense.w", &dg.weight)?;
        grads.accumulate("rep.dense.b", &dg.bias)?;
        let pooled_shape = t.pools[2].output.shape().to_vec();
        let mut g = Tensor::from_vec(&pooled_shape, dg.input)?;
        for i in (0..6).rev() {
            let name = REP_LAYERS[i];
            if i % 2 == 1 {
                g = maxpool3d_backward(&g, &t.pools[i / 2].argmax, t.acts[i].shape())?;
            }
            let w = self.p(&format!("{name}.w"));
            let cg = conv_relu_backward(&t.conv_in[i], &t.acts[i], w, g, &spec)?;
            grads.accumulate(&format!("{name}.w"), &cg.weight)?;
            grads.accumulate(&format!("{name}.b"), &cg.bias)?;
            g = cg.input;
        }
        Ok(())
    }

    fn lstm_weights(&self, dir: &str) -> LstmWeights<'_, T> {
        LstmWeights {
            w_ih: self.p(&format!("lstm.{dir}.w_ih")),
            w_hh: self.p(&format!("lstm.{dir}.w_hh")),
            bias: self.p(&format!("lstm.{dir}.bias")),
        }
    }

    /// Full forward pass over one series. Patches may be any precision and
    /// must have shape `(pH, pW, pZ)`.
    pub fn forward<P: Scalar>(&self, patches: &[Tensor<P>], locations: &[f64]) -> Result<SeriesForward<T>> {
        let cfg = &self.config;
        let k = patches.len();
        if k == 0 || locations.len() != k {
            return Err(Error::Invalid(format!(
                "series needs k >= 1 patches with one location each (got {k} and {})",
                locations.len()
            )));
        }
        let [ph, pw, pz] = cfg.patch;
        let mut reps = Vec::with_capacity(k);
        for p in patches {
            if p.shape() != cfg.patch {
                return Err(Error::Invalid(format!(
                    "patch shape {:?} does not match model {:?}",
                    p.shape(),
                    cfg.patch
                )));
            }
            reps.push(self.rep_forward(p.cast::<T>().reshape(&[1, ph, pw, pz])?)?);
        }
        let f = cfg.item_dim();
        let mut feats = Vec::with_capacity(k * f);
        for (r, &l) in reps.iter().zip(locations) {
            feats.extend_from_slice(&r.z);
            if cfg.use_location {
                feats.push(T::from_f64_lossy(l));
            }
        }
        let feats = Tensor::from_vec(&[k, f], feats)?;
        let (hw, hb) = (self.p("head.w"), self.p("head.b"));
        let (seq, probs) = if cfg.seq.is_recurrent() {
            let (hf, tf) = lstm_forward(&feats, self.lstm_weights("fwd"), false)?;
            let (hidden, bwd) = if cfg.seq == SeqVariant::BiLstm {
                let (hb_, tb) = lstm_forward(&feats, self.lstm_weights("bwd"), true)?;
                (vertseq_nn::concat_rows(&hf, &hb_)?, Some(tb))
            } else {
                (hf, None)
            };
            let width = hidden.shape()[1];
            let mut probs = Vec::with_capacity(k);
            for t in 0..k {
                let a = dense(&hidden.data()[t * width..(t + 1) * width], hw, hb)?[0];
                probs.push(sigmoid(a));
            }
            (SeqTrace::Recurrent { hidden, fwd: tf, bwd }, probs)
        } else {
            let mut items = Vec::with_capacity(k);
            for t in 0..k {
                let a = dense(&feats.data()[t * f..(t + 1) * f], hw, hb)?[0];
                items.push(sigmoid(a));
            }
            let (probs, arg) = max_filter(&items, cfg.max_window);
            (SeqTrace::Max { items, arg }, probs)
        };
        let (score, argmax, smoothed) = f_agg(&probs, cfg.smooth_width);
        Ok(SeriesForward {
            reps,
            feats,
            seq,
            probs,
            smoothed,
            argmax,
            score,
        })
    }

    /// `BCE(y_series, score) + λ · mean_i BCE(y_seq_i, P_i)`.
    pub fn loss_of(&self, fwd: &SeriesForward<T>, y_series: f64, y_seq: &[f64]) -> Result<f64> {
        let k = fwd.probs.len();
        if y_seq.len() != k {
            return Err(Error::Invalid(format!("{} patch labels for {k} patches", y_seq.len())));
        }
        let series = bce(fwd.score, T::from_f64_lossy(y_series)).as_f64();
        let seq: f64 = fwd
            .probs
            .iter()
            .zip(y_seq)
            .map(|(&p, &y)| bce(p, T::from_f64_lossy(y)).as_f64())
            .sum::<f64>()
            / k as f64;
        Ok(series + self.config.lambda * seq)
    }

    pub fn loss<P: Scalar>(&self, patches: &[Tensor<P>], locations: &[f64], y_series: f64, y_seq: &[f64]) -> Result<f64> {
        let fwd = self.forward(patches, locations)?;
        self.loss_of(&fwd, y_series, y_seq)
    }

    /// Loss and gradients with respect to every parameter tensor.
    pub fn loss_and_grad<P: Scalar>(
        &self,
        patches: &[Tensor<P>],
        locations: &[f64],
        y_series: f64,
        y_seq: &[f64],
    ) -> Result<(f64, ParamSet<T>)> {
        let fwd = self.forward(patches, locations)?;
        let loss = self.loss_of(&fwd, y_series, y_seq)?;
        let cfg = &self.config;
        let k = fwd.probs.len();
        let mut grads = self.params.zeros_like();

        let mut dp = vec![T::zero(); k];
        let ds = bce_grad(fwd.score, T::from_f64_lossy(y_series));
        let r = cfg.smooth_width / 2;
        let (lo, hi) = (fwd.argmax.saturating_sub(r), (fwd.argmax + r).min(k - 1));
        let share = ds / T::from_usize(hi - lo + 1).expect("window size");
        for d in &mut dp[lo..=hi] {
            *d += share;
        }
        let lam = T::from_f64_lossy(cfg.lambda / k as f64);
        for ((d, &p), &y) in dp.iter_mut().zip(&fwd.probs).zip(y_seq) {
            *d += lam * bce_grad(p, T::from_f64_lossy(y));
        }

        let f = cfg.item_dim();
        let hw = self.p("head.w");
        let mut dfeats = vec![T::zero(); k * f];
        match &fwd.seq {
            SeqTrace::Max { items, arg } => {
                let mut di = vec![T::zero(); k];
                for (i, &j) in arg.iter().enumerate() {
                    di[j] += dp[i];
                }
                for t in 0..k {
                    let da = di[t] * items[t] * (T::one() - items[t]);
                    let x = &fwd.feats.data()[t * f..(t + 1) * f];
                    let g = dense_backward(x, hw, &[da])?;
                    grads.accumulate("head.w", &g.weight)?;
                    grads.accumulate("head.b", &g.bias)?;
                    dfeats[t * f..(t + 1) * f].copy_from_slice(&g.input);
                }
            }
            SeqTrace::Recurrent { hidden, fwd: tf, bwd } => {
                let width = hidden.shape()[1];
                let mut dh = vec![T::zero(); k * width];
                for t in 0..k {
                    let p = fwd.probs[t];
                    let da = dp[t] * p * (T::one() - p);
                    let x = &hidden.data()[t * width..(t + 1) * width];
                    let g = dense_backward(x, hw, &[da])?;
                    grads.accumulate("head.w", &g.weight)?;
                    grads.accumulate("head.b", &g.bias)?;
                    dh[t * width..(t + 1) * width].copy_from_slice(&g.input);
                }
                let h = cfg.lstm_hidden;
                let split = |offset: usize| -> Result<Tensor<T>> {
                    let mut v = Vec::with_capacity(k * h);
                    for t in 0..k {
                        v.extend_from_slice(&dh[t * width + offset..t * width + offset + h]);
                    }
                    Ok(Tensor::from_vec(&[k, h], v)?)
                };
                let mut traces = vec![("fwd", tf, split(0)?)];
                if let Some(tb) = bwd {
                    traces.push(("bwd", tb, split(h)?));
                }
                for (dir, trace, g) in traces {
                    let (gx, lg) = lstm_backward(trace, self.lstm_weights(dir), &g)?;
                    grads.accumulate(&format!("lstm.{dir}.w_ih"), &lg.w_ih)?;
                    grads.accumulate(&format!("lstm.{dir}.w_hh"), &lg.w_hh)?;
                    grads.accumulate(&format!("lstm.{dir}.bias"), &lg.bias)?;
                    for (d, v) in dfeats.iter_mut().zip(gx.data()) {
                        *d += *v;
                    }
                }
            }
        }
        let d = cfg.feature_dim;
        for (t, rep) in fwd.reps.iter().enumerate() {
            self.rep_backward(rep, &dfeats[t * f..t * f + d], &mut grads)?;
        }
        Ok((loss, grads))
    }
}

/// Localization box on the mid-sagittal slice: rows `[row0, row1)` along the
/// spine and columns `[col0, col1)` along `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SagittalBox {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPrediction {
    pub per_patch: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub score: f64,
    pub argmax: usize,
    pub bbox: SagittalBox,
}

/// Test-time augmentation applied to every patch before prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tta {
    Identity,
    FlipLr,
}

impl Tta {
    pub fn as_str(self) -> &'static str {
        match self {
            Tta::Identity => "id",
            Tta::FlipLr => "flip",
        }
    }
}

impl FromStr for Tta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id" | "identity" => Ok(Tta::Identity),
            "flip" | "flip_lr" => Ok(Tta::FlipLr),
            _ => Err(Error::Invalid(format!("unknown TTA `{s}` (expected id or flip)"))),
        }
    }
}

/// Mirrors a `(pH, pW, pZ)` patch across the lateral (`pZ`) axis.
pub fn flip_lr(patch: &Tensor<f32>) -> Tensor<f32> {
    let s = patch.shape();
    let z = s[s.len() - 1];
    let mut out = patch.clone();
    for row in out.data_mut().chunks_exact_mut(z) {
        row.reverse();
    }
    out
}

impl Model<f32> {
    pub fn predict(&self, seq: &PatchSequence) -> Result<SeriesPrediction> {
        self.predict_tta(seq, Tta::Identity)
    }

    pub fn predict_tta(&self, seq: &PatchSequence, tta: Tta) -> Result<SeriesPrediction> {
        let flipped;
        let patches = match tta {
            Tta::Identity => &seq.patches,
            Tta::FlipLr => {
                flipped = seq.patches.iter().map(flip_lr).collect::<Vec<_>>();
                &flipped
            }
        };
        let fwd = self.forward(patches, &seq.locations)?;
        let src = seq
            .sources
            .get(fwd.argmax)
            .ok_or_else(|| Error::Invalid("patch sequence lacks source coordinates".into()))?;
        let [_, rows, ny] = seq.sagittal_dims;
        let (cy, ey) = (src.center_xy.1, src.extent_xy.1);
        let col0 = (cy - ey / 2.0 + 0.5).floor().clamp(0.0, (ny - 1) as f64) as usize;
        let col1 = ((cy + ey / 2.0 + 0.5).floor().clamp(0.0, ny as f64) as usize).max(col0 + 1);
        let row1 = src.row_end.min(rows).max(src.row_start + 1);
        Ok(SeriesPrediction {
            per_patch: fwd.probs.iter().map(|v| f64::from(*v)).collect(),
            smoothed: fwd.smoothed.iter().map(|v| f64::from(*v)).collect(),
            score: f64::from(fwd.score),
            argmax: fwd.argmax,
            bbox: SagittalBox {
                row0: src.row_start,
                row1,
                col0,
                col1,
            },
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint<f32> {
        let c = &self.config;
        let mut ck = Checkpoint::new(self.params.clone());
        ck.set("kind", "model");
        ck.set("patch", c.patch.map(|v| v.to_string()).join(","));
        ck.set("feature_dim", c.feature_dim);
        ck.set("base_filters", c.base_filters);
        ck.set("seq_variant", c.seq);
        ck.set("agg_variant", "smoothed_max");
        ck.set("smooth_width", c.smooth_width);
        ck.set("max_window", c.max_window);
        ck.set("lambda", c.lambda);
        ck.set("use_location", u8::from(c.use_location));
        ck.set("lstm_hidden", c.lstm_hidden);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint<f32>) -> Result<Self> {
        if ck.get("kind") != Some("model") {
            return Err(Error::Checkpoint("not a model checkpoint".into()));
        }
        if ck.get("agg_variant") != Some("smoothed_max") {
            return Err(Error::Checkpoint("unknown aggregation variant".into()));
        }
        let patch: Vec<usize> = ck
            .get("patch")
            .unwrap_or("")
            .split(',')
            .map(|v| v.parse().map_err(|_| Error::Checkpoint(format!("bad patch size `{v}`"))))
            .collect::<Result<_>>()?;
        let patch: [usize; 3] = patch
            .try_into()
            .map_err(|_| Error::Checkpoint("patch size needs three axes".into()))?;
        let use_location = match ck.get("use_location") {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(Error::Checkpoint("bad use_location".into())),
        };
        let seq: SeqVariant = ck
            .get("seq_variant")
            .unwrap_or("")
            .parse()
            .map_err(|e: Error| Error::Checkpoint(e.to_string()))?;
        let config = ModelConfig {
            patch,
            feature_dim: ck.require("feature_dim")?,
            base_filters: ck.require("base_filters")?,
            seq,
            agg: AggVariant::SmoothedMax,
            smooth_width: ck.require("smooth_width")?,
            max_window: ck.require("max_window")?,
            lambda: ck.require("lambda")?,
            use_location,
            lstm_hidden: ck.require("lstm_hidden")?,
        };
        let layout = Self::zeros(config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ck.check_layout(&layout.params)?;
        Ok(Self {
            config,
            params: ck.params.clone(),
        })
    }
}

/// Mean series score over `(model, tta)` members, summed in member order.
pub fn ensemble_predict(seq: &PatchSequence, members: &[(&Model32, Tta)]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::Invalid("ensemble needs at least one member".into()));
    }
    let mut total = 0.0;
    for (m, tta) in members {
        total += m.predict_tta(seq, *tta)?.score;
    }
    Ok(total / members.len() as f64)
}
