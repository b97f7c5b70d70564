use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vertseq::checkpoint::Checkpoint;
use vertseq::cord::{train_detector, Detector32, DetectorConfig, DetectorTrainConfig};
use vertseq::model::{ensemble_predict, Model32, ModelConfig, SeqVariant, Tta};
use vertseq::phantom::{make_dataset, DatasetRequest, Manifest, Partition, PhantomSpec, MANIFEST_FILE};
use vertseq::pipeline::{load_examples, phantom_detector_samples, prepare_series, PipelineConfig};
use vertseq::render::render_overlay;
use vertseq::train::{evaluate, run_aggregation_experiment, train, TrainConfig};
use vertseq::volume::{load_volume, WindowSpec};

#[derive(Parser)]
#[command(name = "vertseq", version, about = "Vertebral compression fracture detection on CT-like volumes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a phantom dataset and its manifest.
    Gen(GenArgs),
    /// Train the spinal canal detector on phantom axial slices.
    TrainDetector(DetectorArgs),
    /// Train one classifier.
    Train(TrainArgs),
    /// Evaluate a model or ensemble on a manifest partition.
    Eval(EvalArgs),
    /// Score a single volume.
    Predict(PredictArgs),
    /// Compare the max, maxloc and bilstm aggregation variants.
    Experiment(TrainArgs),
    /// Write the mid-sagittal overlay of a prediction as PGM.
    Render(RenderArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Fraction of positive series.
    #[arg(long, default_value_t = 0.33)]
    pos: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectorArgs {
    #[arg(long, default_value_t = 300)]
    slices: usize,
    #[arg(long, default_value_t = 10)]
    per_series: usize,
    #[arg(long, default_value_t = 12)]
    epochs: usize,
    #[arg(long, default_value_t = 2e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct WindowArgs {
    #[arg(long, default_value_t = 370.0)]
    window_center: f64,
    #[arg(long, default_value_t = 840.0)]
    window_width: f64,
}

impl WindowArgs {
    fn spec(&self) -> Result<WindowSpec> {
        Ok(WindowSpec::new(self.window_center, self.window_width)?)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory holding the manifest.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    detector: PathBuf,
    /// Checkpoint path for `train`. For `experiment`, the report path; one
    /// `<variant>.ckpt` per variant is written beside it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "bilstm")]
    variant: SeqVariant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the full clinical schedule instead of the desk schedule.
    #[arg(long)]
    paper_schedule: bool,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 3)]
    smooth_width: usize,
    #[arg(long, value_parser = parse_patch, default_value = "16,16,8")]
    patch: [usize; 3],
    #[command(flatten)]
    window: WindowArgs,
}

impl TrainArgs {
    fn schedule(&self) -> TrainConfig {
        let base = if self.paper_schedule { TrainConfig::paper() } else { TrainConfig::desk() };
        TrainConfig {
            lr: self.lr.unwrap_or(base.lr),
            batch: self.batch.unwrap_or(base.batch),
            epochs: self.epochs.unwrap_or(base.epochs),
            iters: self.iters.unwrap_or(base.iters),
            seed: self.seed,
            ..base
        }
    }

    fn model(&self) -> ModelConfig {
        ModelConfig {
            patch: self.patch,
            lambda: self.lambda,
            smooth_width: self.smooth_width,
            ..ModelConfig::for_variant(self.variant)
        }
    }

    fn pipeline(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            window: self.window.spec()?,
            patch: self.patch,
            ..PipelineConfig::default()
        })
    }
}

#[derive(Args)]
struct MemberArgs {
    /// Comma-separated model checkpoints.
    #[arg(long, value_delimiter = ',', required = true)]
    ensemble: Vec<PathBuf>,
    /// One of `id` or `flip` per member; identity when omitted.
    #[arg(long, value_delimiter = ',')]
    tta: Vec<Tta>,
    /// Defaults to `detector.ckpt` next to the first model.
    #[arg(long)]
    detector: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    partition: Partition,
    #[command(flatten)]
    members: MemberArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    volume: PathBuf,
    #[command(flatten)]
    members: MemberArgs,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    volume: PathBuf,
    #[command(flatten)]
    members: MemberArgs,
    #[arg(long)]
    out: PathBuf,
}

fn parse_patch(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad patch axis `{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|_| "patch needs three comma-separated sizes H,W,Z".to_string())
}

/// Loaded ensemble members and the pipeline settings they were trained with.
struct Loaded {
    models: Vec<Model32>,
    ttas: Vec<Tta>,
    detector: Detector32,
    pipeline: PipelineConfig,
}

impl Loaded {
    fn members(&self) -> Vec<(&Model32, Tta)> {
        self.models.iter().zip(self.ttas.iter().copied()).collect()
    }
}

fn load_members(args: &MemberArgs) -> Result<Loaded> {
    let ttas = match args.tta.len() {
        0 => vec![Tta::Identity; args.ensemble.len()],
        n if n == args.ensemble.len() => args.tta.clone(),
        n => bail!("{n} TTA entries for {} ensemble members", args.ensemble.len()),
    };
    let mut models = Vec::new();
    let mut window = None;
    for p in &args.ensemble {
        let ck = Checkpoint::<f32>::load(p).with_context(|| format!("loading {}", p.display()))?;
        let w = match (ck.get("window_center"), ck.get("window_width")) {
            (Some(_), Some(_)) => WindowSpec::new(ck.require("window_center")?, ck.require("window_width")?)?,
            _ => WindowSpec::default(),
        };
        if window.is_some_and(|prev| prev != w) {
            bail!("ensemble members were trained with different windows");
        }
        window = Some(w);
        models.push(Model32::from_checkpoint(&ck).with_context(|| format!("reading {}", p.display()))?);
    }
    let patch = models[0].config.patch;
    if models.iter().any(|m| m.config.patch != patch) {
        bail!("ensemble members must share one patch size");
    }
    let det_path = match &args.detector {
        Some(p) => p.clone(),
        None => args.ensemble[0].with_file_name("detector.ckpt"),
    };
    let detector = load_detector(&det_path)?;
    Ok(Loaded {
        models,
        ttas,
        detector,
        pipeline: PipelineConfig {
            window: window.unwrap_or_default(),
            patch,
            ..PipelineConfig::default()
        },
    })
}

fn load_detector(path: &Path) -> Result<Detector32> {
    let ck = Checkpoint::<f32>::load(path).with_context(|| format!("loading detector {}", path.display()))?;
    Ok(Detector32::from_checkpoint(&ck)?)
}

fn load_manifest(dir: &Path) -> Result<Manifest> {
    Manifest::load(dir.join(MANIFEST_FILE)).with_context(|| format!("reading dataset {}", dir.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Gen(a) => {
            let req = DatasetRequest {
                n_series: a.n,
                positive_fraction: a.pos,
                seed: a.seed,
                ..DatasetRequest::default()
            };
            let m = make_dataset(&req, &a.out)?;
            let pos = m.entries.iter().filter(|e| e.positive).count();
            println!("series={} positive={pos} out={}", m.entries.len(), a.out.display());
        }
        Cmd::TrainDetector(a) => {
            let cfg = DetectorConfig::default();
            let series = a.slices.div_ceil(a.per_series.max(1));
            let mut samples = phantom_detector_samples(
                &PhantomSpec::default(),
                &cfg,
                &a.window.spec()?,
                series,
                a.per_series,
                a.seed,
            )?;
            samples.truncate(a.slices);
            let train: Vec<_> = samples.into_iter().map(|(s, _)| s).collect();
            let tc = DetectorTrainConfig {
                epochs: a.epochs,
                lr: a.lr,
                seed: a.seed,
                ..DetectorTrainConfig::default()
            };
            let (det, hist) = train_detector(&train, cfg, &tc)?;
            det.to_checkpoint().save(&a.out)?;
            println!(
                "slices={} loss_initial={:.6} loss_final={:.6} out={}",
                train.len(),
                hist[0],
                hist[hist.len() - 1],
                a.out.display()
            );
        }
        Cmd::Train(a) => {
            let manifest = load_manifest(&a.data)?;
            let detector = load_detector(&a.detector)?;
            let pcfg = a.pipeline()?;
            let train_set = load_examples(&manifest, Partition::Train, &detector, &pcfg)?;
            let tune_set = load_examples(&manifest, Partition::Tune, &detector, &pcfg)?;
            let schedule = a.schedule();
            let out = train(&a.model(), &train_set, &tune_set, &schedule)?;
            for (i, h) in out.history.iter().enumerate() {
                println!("epoch={i} loss={:.6} tune_auc={:.6}", h.mean_loss, h.tune_auc);
            }
            let mut ck = out.checkpoint(&schedule);
            ck.set("window_center", pcfg.window.center);
            ck.set("window_width", pcfg.window.width);
            ck.save(&a.out)?;
            println!("best_epoch={} best_tuning_auc={:.6} out={}", out.best_epoch, out.best_auc, a.out.display());
        }
        Cmd::Experiment(a) => {
            let manifest = load_manifest(&a.data)?;
            let detector = load_detector(&a.detector)?;
            let pcfg = a.pipeline()?;
            let train_set = load_examples(&manifest, Partition::Train, &detector, &pcfg)?;
            let tune_set = load_examples(&manifest, Partition::Tune, &detector, &pcfg)?;
            let schedule = a.schedule();
            let report = run_aggregation_experiment(&a.model(), &train_set, &tune_set, &schedule)?;
            let text = report.to_text();
            std::fs::write(&a.out, &text).with_context(|| format!("writing {}", a.out.display()))?;
            let dir = a.out.parent().unwrap_or(Path::new("."));
            for v in &report.variants {
                let mut ck = v.outcome.checkpoint(&schedule);
                ck.set("window_center", pcfg.window.center);
                ck.set("window_width", pcfg.window.width);
                ck.save(dir.join(format!("{}.ckpt", v.variant)))?;
            }
            print!("{text}");
        }
        Cmd::Eval(a) => {
            let manifest = load_manifest(&a.data)?;
            let l = load_members(&a.members)?;
            let ev = evaluate(&manifest, a.partition, &l.detector, &l.members(), &l.pipeline)?;
            print!("{}", ev.to_text());
        }
        Cmd::Predict(a) => {
            let l = load_members(&a.members)?;
            let t = Instant::now();
            let volume = load_volume(&a.volume)?;
            let (_, _, seq) = prepare_series(&volume, &l.detector, &l.pipeline)?;
            let score = ensemble_predict(&seq, &l.members())?;
            println!("score={score:.6} infer_s={:.6}", t.elapsed().as_secs_f64());
        }
        Cmd::Render(a) => {
            let l = load_members(&a.members)?;
            let volume = load_volume(&a.volume)?;
            let (track, sag, seq) = prepare_series(&volume, &l.detector, &l.pipeline)?;
            let (model, tta) = l.members()[0];
            let pred = model.predict_tta(&seq, tta)?;
            let x = track.mean_x().round().max(0.0) as usize;
            let x = x.min(sag.grid.dims[0].saturating_sub(1));
            render_overlay(&sag, x, Some(&pred.bbox))?.save_pgm(&a.out)?;
            println!("slice={x} score={:.6} out={}", pred.score, a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
