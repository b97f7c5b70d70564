//! Class-balanced mini-batch training, model selection by tuning AUC, the
//! aggregation-variant comparison and ensemble selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use vertseq_nn::{AdamConfig, AdamState, ParamSet};

use crate::augment::{AugmentConfig, AugmentDraw};
use crate::checkpoint::Checkpoint;
use crate::cord::Detector32;
use crate::error::{Error, Result};
use crate::metrics::{roc_auc, Metrics};
use crate::model::{ensemble_predict, Model32, ModelConfig, SeqVariant, Tta};
use crate::phantom::{Manifest, Partition};
use crate::pipeline::{prepare_series, PipelineConfig, SeriesExample};
use crate::volume::load_volume;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    /// Even; half of every batch is positive.
    pub batch: usize,
    pub epochs: usize,
    pub iters: usize,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl TrainConfig {
    /// The full clinical schedule.
    pub fn paper() -> Self {
        Self {
            lr: 1e-5,
            batch: 16,
            epochs: 2000,
            iters: 150,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }

    /// Schedule sized for a single workstation run on phantoms.
    pub fn desk() -> Self {
        Self {
            lr: 1e-3,
            batch: 16,
            epochs: 8,
            iters: 20,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.batch % 2 != 0 {
            return Err(Error::Invalid(format!("batch must be even and positive (got {})", self.batch)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Invalid("lr must be positive".into()));
        }
        if self.epochs == 0 || self.iters == 0 {
            return Err(Error::Invalid("epochs and iters must be positive".into()));
        }
        Ok(())
    }
}

/// Draws batches with exactly half positives, with replacement within class.
#[derive(Debug, Clone)]
pub struct BalancedSampler {
    positives: Vec<usize>,
    negatives: Vec<usize>,
}

impl BalancedSampler {
    pub fn new(labels: &[bool]) -> Result<Self> {
        let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
        let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::SingleClass(format!(
                "training set has {} positive and {} negative series",
                positives.len(),
                negatives.len()
            )));
        }
        Ok(Self { positives, negatives })
    }

    /// `batch / 2` positives followed by `batch / 2` negatives.
    pub fn draw<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        let half = batch / 2;
        let mut out = Vec::with_capacity(2 * half);
        for _ in 0..half {
            out.push(self.positives[rng.gen_range(0..self.positives.len())]);
        }
        for _ in 0..half {
            out.push(self.negatives[rng.gen_range(0..self.negatives.len())]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub tune_auc: f64,
    pub tune_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Model32,
    /// Parameters after the last iteration.
    pub last: Model32,
    pub best_auc: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

impl TrainOutcome {
    pub fn checkpoint(&self, train: &TrainConfig) -> Checkpoint<f32> {
        let mut c = self.best.to_checkpoint();
        c.set("seed", train.seed);
        c.set("epochs", self.history.len());
        c.set("best_epoch", self.best_epoch);
        c.set("best_tuning_auc", self.best_auc);
        c
    }
}

/// Series scores of `model` with `tta` over `examples`, in order.
pub fn score_examples(model: &Model32, examples: &[SeriesExample], tta: Tta) -> Result<Vec<f64>> {
    examples
        .par_iter()
        .map(|e| model.predict_tta(&e.seq, tta).map(|p| p.score))
        .collect()
}

pub fn labels_of(examples: &[SeriesExample]) -> Vec<bool> {
    examples.iter().map(|e| e.label).collect()
}

/// Mean loss over one batch and its averaged gradient.
fn batch_step(
    model: &Model32,
    examples: &[SeriesExample],
    batch: &[(usize, AugmentDraw)],
) -> Result<(f64, ParamSet<f32>)> {
    let parts = batch
        .par_iter()
        .map(|&(i, draw)| {
            let e = &examples[i];
            let patches = draw.apply_all(&e.seq.patches);
            model.loss_and_grad(&patches, &e.seq.locations, f64::from(u8::from(e.label)), &e.patch_labels)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grads = model.params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        grads.add_assign(g)?;
    }
    let n = batch.len() as f64;
    grads.scale((1.0 / n) as f32);
    Ok((loss / n, grads))
}

/// Trains from a seeded initialization and keeps the parameters with the
/// best tuning AUC seen at the end of any epoch. Equal AUCs go to the lower
/// tuning loss.
pub fn train(
    model_cfg: &ModelConfig,
    train_set: &[SeriesExample],
    tune_set: &[SeriesExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let sampler = BalancedSampler::new(&labels_of(train_set))?;
    let tune_labels = labels_of(tune_set);
    if !tune_labels.iter().any(|&l| l) || tune_labels.iter().all(|&l| l) {
        return Err(Error::SingleClass("tuning set needs both classes".into()));
    }
    let mut model = Model32::init(*model_cfg, cfg.seed)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x7A11));
    let mut best: Option<(Model32, EpochStats, usize)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for _ in 0..cfg.iters {
            let batch: Vec<(usize, AugmentDraw)> = sampler
                .draw(cfg.batch, &mut rng)
                .into_iter()
                .map(|i| (i, AugmentDraw::sample(&cfg.augment, &mut rng)))
                .collect();
            let (loss, grads) = batch_step(&model, train_set, &batch)?;
            adam.step(&mut model.params, &grads)?;
            total += loss;
        }
        let stats = EpochStats {
            mean_loss: total / cfg.iters as f64,
            tune_auc: roc_auc(&score_examples(&model, tune_set, Tta::Identity)?, &tune_labels)?.auc,
            tune_loss: dataset_loss(&model, tune_set)?,
        };
        history.push(stats);
        let better = best.as_ref().map_or(true, |(_, b, _)| {
            stats.tune_auc > b.tune_auc || (stats.tune_auc == b.tune_auc && stats.tune_loss < b.tune_loss)
        });
        if better {
            best = Some((model.clone(), stats, epoch));
        }
    }
    let (best, stats, best_epoch) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best,
        last: model,
        best_auc: stats.tune_auc,
        best_epoch,
        history,
    })
}

/// Mean training loss over `examples` without augmentation.
pub fn dataset_loss(model: &Model32, examples: &[SeriesExample]) -> Result<f64> {
    let losses = examples
        .par_iter()
        .map(|e| model.loss(&e.seq.patches, &e.seq.locations, f64::from(u8::from(e.label)), &e.patch_labels))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / examples.len() as f64)
}

/// The three aggregation strategies compared by the experiment.
pub const EXPERIMENT_VARIANTS: [SeqVariant; 3] = [SeqVariant::MaxProb, SeqVariant::MaxProbWithLocation, SeqVariant::BiLstm];

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: SeqVariant,
    pub outcome: TrainOutcome,
    pub tune: Metrics,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub variants: Vec<VariantResult>,
}

/// Reference tuning AUC reported for the clinical model.
pub const CLINICAL_REFERENCE_TUNE_AUC: f64 = 0.961;

impl ExperimentReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("# aggregation comparison (clinical reference tuning auc={CLINICAL_REFERENCE_TUNE_AUC})\n");
        for v in &self.variants {
            s.push_str(&format!(
                "variant={} auc={:.6} sens@0.5={:.6} spec@0.5={:.6} best_epoch={}\n",
                v.variant, v.tune.auc, v.tune.sensitivity, v.tune.specificity, v.outcome.best_epoch
            ));
            let pts: Vec<String> = v.tune.roc.iter().map(|(x, y)| format!("{x:.6},{y:.6}")).collect();
            s.push_str(&format!("roc variant={} points={}\n", v.variant, pts.join(" ")));
        }
        s
    }
}

/// Trains each experiment variant under the same data and seed and scores
/// it on the tuning set.
pub fn run_aggregation_experiment(
    base: &ModelConfig,
    train_set: &[SeriesExample],
    tune_set: &[SeriesExample],
    cfg: &TrainConfig,
) -> Result<ExperimentReport> {
    let mut variants = Vec::with_capacity(EXPERIMENT_VARIANTS.len());
    for variant in EXPERIMENT_VARIANTS {
        let model_cfg = ModelConfig {
            seq: variant,
            use_location: variant != SeqVariant::MaxProb,
            ..*base
        };
        let outcome = train(&model_cfg, train_set, tune_set, cfg)?;
        let tune = roc_auc(
            &score_examples(&outcome.best, tune_set, Tta::Identity)?,
            &labels_of(tune_set),
        )?;
        variants.push(VariantResult {
            variant,
            outcome,
            tune,
        });
    }
    Ok(ExperimentReport { variants })
}

/// Picks one TTA per member by exhaustive search over every assignment,
/// maximizing tuning AUC of the averaged score. Ties keep the earliest
/// assignment, enumerated with identity first.
pub fn select_ensemble_tta(models: &[&Model32], tune_set: &[SeriesExample]) -> Result<(Vec<Tta>, f64)> {
    if models.is_empty() {
        return Err(Error::Invalid("ensemble needs at least one member".into()));
    }
    if models.len() > 3 {
        return Err(Error::Invalid("ensemble search is capped at 8 configurations (3 members)".into()));
    }
    let options = [Tta::Identity, Tta::FlipLr];
    let mut table = Vec::with_capacity(models.len());
    for m in models {
        let mut per = Vec::with_capacity(2);
        for t in options {
            per.push(score_examples(m, tune_set, t)?);
        }
        table.push(per);
    }
    let labels = labels_of(tune_set);
    let mut best: Option<(Vec<Tta>, f64)> = None;
    for mask in 0..(1usize << models.len()) {
        let choice: Vec<usize> = (0..models.len()).map(|m| (mask >> m) & 1).collect();
        let scores: Vec<f64> = (0..tune_set.len())
            .map(|i| choice.iter().enumerate().map(|(m, &c)| table[m][c][i]).sum::<f64>() / models.len() as f64)
            .collect();
        let auc = roc_auc(&scores, &labels)?.auc;
        if best.as_ref().map_or(true, |b| auc > b.1) {
            best = Some((choice.iter().map(|&c| options[c]).collect(), auc));
        }
    }
    Ok(best.expect("non-empty search"))
}

/// Averaged ensemble scores over `examples`.
pub fn ensemble_scores(members: &[(&Model32, Tta)], examples: &[SeriesExample]) -> Result<Vec<f64>> {
    examples
        .par_iter()
        .map(|e| ensemble_predict(&e.seq, members))
        .collect()
}

/// Held-out metrics plus mean wall-clock seconds per series for the whole
/// pipeline (load, track, reslice, tile, ensemble).
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub mean_infer_s: f64,
    pub ids: Vec<usize>,
}

/// Reference mean processing time per clinical case, in seconds.
pub const CLINICAL_REFERENCE_INFER_S: f64 = 61.36;

impl Evaluation {
    pub fn to_text(&self) -> String {
        let m = &self.metrics;
        let mut s = format!(
            "auc={:.6}\nsens@0.5={:.6}\nspec@0.5={:.6}\nmean_infer_s={:.6}\nreference_clinical_s={CLINICAL_REFERENCE_INFER_S}\n",
            m.auc, m.sensitivity, m.specificity, self.mean_infer_s
        );
        for (id, score) in self.ids.iter().zip(&m.scores) {
            s.push_str(&format!("series={id} score={score:.6}\n"));
        }
        s
    }
}

/// Runs the full pipeline series by series so each timing is uncontended.
pub fn evaluate(
    manifest: &Manifest,
    partition: Partition,
    detector: &Detector32,
    members: &[(&Model32, Tta)],
    cfg: &PipelineConfig,
) -> Result<Evaluation> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let mut elapsed = 0.0;
    for e in manifest.partition(partition) {
        let t = std::time::Instant::now();
        let volume = load_volume(manifest.resolve(e))?;
        let (_, _, seq) = prepare_series(&volume, detector, cfg)?;
        let score = ensemble_predict(&seq, members)?;
        elapsed += t.elapsed().as_secs_f64();
        scores.push(score);
        labels.push(e.positive);
        ids.push(e.id);
    }
    if ids.is_empty() {
        return Err(Error::Invalid(format!("partition {} is empty", partition.as_str())));
    }
    let metrics = roc_auc(&scores, &labels)?;
    Ok(Evaluation {
        metrics,
        mean_infer_s: elapsed / ids.len() as f64,
        ids,
    })
}
