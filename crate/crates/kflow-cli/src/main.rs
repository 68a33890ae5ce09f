//! `kflow`: reproducible scale-banded flow matching experiments.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors. Every
//! run writes a `manifest.json` recording the resolved configuration,
//! seeds, inputs, and hashed outputs.

mod config;
mod datafile;
mod manifest;
mod render;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use kflow::data::{gen_toy, DatasetKind, DatasetSpec};
use kflow::interpolant::NoiseDraw;
use kflow::io::{atomic_write, tensor_write};
use kflow::metrics::{
    cdr, fid, recall, trajectory_projection_ratio, FeatureMap, MetricReport, Provenance,
};
use kflow::numeric::Tensor;
use kflow::sampling::{
    edit_generate, integrate, integrate_trajectory, EditSpec, Integrator, SamplerConfig,
};
use kflow::training::{
    fit_system, load_checkpoint, save_checkpoint, save_system, train_with_callback, Checkpoint,
};

use config::{resolve_seed, FileConfig};
use manifest::ManifestBuilder;

#[derive(Parser)]
#[command(
    name = "kflow",
    version,
    about = "Scale-banded flow matching: data, training, sampling, editing, and evaluation",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for sample generation (results are identical for any
    /// value; 1 is fully sequential).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a toy dataset container.
    GenData(GenDataArgs),
    /// Fit a transform and partition on a dataset and save the artifact.
    FitTransform(FitTransformArgs),
    /// Train a velocity model with conditional flow matching.
    Train(TrainArgs),
    /// Draw samples from a trained checkpoint.
    Sample(SampleArgs),
    /// Generate sample groups sharing noise on selected bands.
    Edit(EditArgs),
    /// Per-band amplitude statistics of a dataset.
    AnalyzeSpectrum(AnalyzeSpectrumArgs),
    /// Projection-ratio curve of a sampling trajectory.
    AnalyzeTrajectory(AnalyzeTrajectoryArgs),
    /// Frechet distance between real and generated samples.
    EvalFid(EvalFidArgs),
    /// Class-dropping ratio of a conditional checkpoint.
    EvalCdr(EvalCdrArgs),
    /// k-NN recall of real samples under the generated manifold.
    EvalRecall(EvalRecallArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Dataset kind: two-gaussians, two-moons, labeled-mixture, or
    /// spectral-texture.
    #[arg(long)]
    kind: String,
    /// Classes for labeled-mixture.
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Dimension for labeled-mixture.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Side length for spectral-texture (power of two).
    #[arg(long, default_value_t = 16)]
    size: usize,
    /// Spectral exponent for spectral-texture.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Number of samples.
    #[arg(long)]
    count: usize,
    /// Seed (falls back to KFLOW_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output dataset container (.kfc).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitTransformArgs {
    /// Dataset container the transform is fitted on.
    #[arg(long)]
    data: PathBuf,
    /// TOML configuration with [transform] and [partition].
    #[arg(long)]
    config: PathBuf,
    /// Output transform artifact (.kfc).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset container.
    #[arg(long)]
    data: PathBuf,
    /// TOML configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for checkpoint.kfc, loss.csv, and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Seed override (flag > config > KFLOW_SEED > 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Step-count override.
    #[arg(long)]
    steps: Option<u64>,
    /// Batch-size override.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Learning-rate override.
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct SampleArgs {
    /// Trained checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Number of samples to draw.
    #[arg(long)]
    num: usize,
    /// Optional TOML configuration supplying [sample] defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Integration steps (default 250).
    #[arg(long)]
    steps: Option<usize>,
    /// Integrator: euler or heun (default heun).
    #[arg(long)]
    integrator: Option<String>,
    /// Seed for the noise draws.
    #[arg(long)]
    seed: Option<u64>,
    /// Class label for conditional sampling.
    #[arg(long)]
    label: Option<usize>,
    /// Classifier-free guidance scale (default 1).
    #[arg(long)]
    guidance_scale: Option<f64>,
    /// Keep the class condition for k <= rho (default 1).
    #[arg(long)]
    rho: Option<f64>,
    /// Also render 2-D samples as PGM images.
    #[arg(long)]
    images: bool,
    /// Output directory.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EditArgs {
    /// Trained checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Bands that share one noise draw: "low", "high", or a comma list of
    /// band ids (e.g. "0,2").
    #[arg(long)]
    shared_bands: String,
    /// Samples in the edit group.
    #[arg(long)]
    num: usize,
    /// Base seed for the noise draws.
    #[arg(long)]
    seed: Option<u64>,
    /// Integration steps (default 250).
    #[arg(long)]
    steps: Option<usize>,
    /// Integrator: euler or heun (default heun).
    #[arg(long)]
    integrator: Option<String>,
    /// Output directory.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AnalyzeSpectrumArgs {
    /// Dataset container.
    #[arg(long)]
    data: PathBuf,
    /// TOML configuration with [transform] and [partition].
    #[arg(long)]
    config: PathBuf,
    /// Output directory for spectrum.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AnalyzeTrajectoryArgs {
    /// Trained checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Seed for the noise draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Integration steps (default 250).
    #[arg(long)]
    steps: Option<usize>,
    /// Class label for conditional sampling.
    #[arg(long)]
    label: Option<usize>,
    /// Output directory for trajectory.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalFidArgs {
    /// Real dataset container.
    #[arg(long)]
    real: PathBuf,
    /// Generated samples: a dataset container or a directory of .kft files.
    #[arg(long)]
    gen: PathBuf,
    /// Feature map: identity, pca:<dim>, or proj:<dim>.
    #[arg(long, default_value = "identity")]
    feature: String,
    /// Seed for the random-projection feature map.
    #[arg(long, default_value_t = 0)]
    feature_seed: u64,
    /// Output directory for fid_report.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalCdrArgs {
    /// Conditional checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Real labeled dataset container.
    #[arg(long)]
    real: PathBuf,
    /// Condition-keep fraction for the dropped run (default 0.3).
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    /// Guidance scale for both runs (default 1).
    #[arg(long, default_value_t = 1.0)]
    guidance_scale: f64,
    /// Generated samples per class (default 128).
    #[arg(long, default_value_t = 128)]
    samples_per_class: usize,
    /// Integration steps (default 250).
    #[arg(long)]
    steps: Option<usize>,
    /// Evaluate only this many classes, drawn uniformly.
    #[arg(long)]
    num_classes: Option<usize>,
    /// Seed for paired noise draws and class subsetting.
    #[arg(long)]
    seed: Option<u64>,
    /// Feature map: identity, pca:<dim>, or proj:<dim>.
    #[arg(long, default_value = "identity")]
    feature: String,
    /// Seed for the random-projection feature map.
    #[arg(long, default_value_t = 0)]
    feature_seed: u64,
    /// Output directory for cdr_report.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalRecallArgs {
    /// Real dataset container.
    #[arg(long)]
    real: PathBuf,
    /// Generated samples: a dataset container or a directory of .kft files.
    #[arg(long)]
    gen: PathBuf,
    /// Neighborhood size (default 3).
    #[arg(long, default_value_t = 3)]
    k_nn: usize,
    /// Feature map: identity, pca:<dim>, or proj:<dim>.
    #[arg(long, default_value = "identity")]
    feature: String,
    /// Seed for the random-projection feature map.
    #[arg(long, default_value_t = 0)]
    feature_seed: u64,
    /// Output directory for recall_report.json.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::FitTransform(args) => cmd_fit_transform(args),
        Command::Train(args) => cmd_train(args),
        Command::Sample(args) => cmd_sample(args, cli.threads),
        Command::Edit(args) => cmd_edit(args),
        Command::AnalyzeSpectrum(args) => cmd_analyze_spectrum(args),
        Command::AnalyzeTrajectory(args) => cmd_analyze_trajectory(args),
        Command::EvalFid(args) => cmd_eval_fid(args),
        Command::EvalCdr(args) => cmd_eval_cdr(args),
        Command::EvalRecall(args) => cmd_eval_recall(args),
    }
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn parse_integrator(name: Option<&str>) -> anyhow::Result<Integrator> {
    match name {
        None => Ok(Integrator::Heun),
        Some("euler") => Ok(Integrator::Euler),
        Some("heun") => Ok(Integrator::Heun),
        Some(other) => anyhow::bail!("unknown integrator {other:?}; use euler or heun"),
    }
}

fn parse_feature_map(
    spec: &str,
    seed: u64,
    real: &[Tensor],
) -> anyhow::Result<FeatureMap> {
    if spec == "identity" {
        return Ok(FeatureMap::IdentityFlatten);
    }
    if let Some(dim) = spec.strip_prefix("pca:") {
        let dim: usize = dim.parse().context("pca:<dim> needs an integer dimension")?;
        return Ok(FeatureMap::pca_from(real, dim)?);
    }
    if let Some(dim) = spec.strip_prefix("proj:") {
        let dim: usize = dim.parse().context("proj:<dim> needs an integer dimension")?;
        let input_dim = real
            .first()
            .map(|t| t.len())
            .ok_or_else(|| anyhow::anyhow!("empty real set"))?;
        return Ok(FeatureMap::random_projection(input_dim, dim, seed));
    }
    anyhow::bail!("unknown feature map {spec:?}; use identity, pca:<dim>, or proj:<dim>")
}

fn sampler_from_checkpoint(
    checkpoint: &Checkpoint,
    steps: Option<usize>,
    integrator: Option<&str>,
    guidance_scale: Option<f64>,
    rho: Option<f64>,
    seed: u64,
) -> anyhow::Result<SamplerConfig> {
    Ok(SamplerConfig {
        steps: steps.unwrap_or(250),
        integrator: parse_integrator(integrator)?,
        direction: checkpoint.config.direction,
        guidance_scale: guidance_scale.unwrap_or(1.0),
        rho: rho.unwrap_or(1.0),
        seed,
    })
}

fn cmd_gen_data(args: GenDataArgs) -> anyhow::Result<()> {
    let seed = resolve_seed(args.seed, None);
    let kind = match args.kind.as_str() {
        "two-gaussians" => DatasetKind::TwoGaussians,
        "two-moons" => DatasetKind::TwoMoons,
        "labeled-mixture" => DatasetKind::LabeledMixture {
            classes: args.classes,
            dim: args.dim,
        },
        "spectral-texture" => DatasetKind::SpectralTexture {
            size: args.size,
            beta: args.beta,
        },
        other => anyhow::bail!(
            "unknown dataset kind {other:?}; use two-gaussians, two-moons, \
             labeled-mixture, or spectral-texture"
        ),
    };
    let spec = DatasetSpec {
        kind,
        count: args.count,
        seed,
    };
    let batch = gen_toy(&spec)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    datafile::write_dataset(&args.out, &batch, Some(&spec))?;

    let mut m = ManifestBuilder::new("gen-data");
    m.config(&spec)?;
    m.seed("data", seed);
    m.output(&args.out);
    let dir = args.out.parent().map(Path::to_path_buf).unwrap_or_else(|| ".".into());
    m.write(&dir)?;
    println!("wrote {} samples to {}", batch.len(), args.out.display());
    Ok(())
}

fn cmd_fit_transform(args: FitTransformArgs) -> anyhow::Result<()> {
    let file_cfg = FileConfig::load(&args.config)?;
    let batch = datafile::read_dataset(&args.data)?;
    let seed = resolve_seed(None, file_cfg.train.seed);
    let train_cfg = file_cfg.train_config(seed)?;
    let system = fit_system(&batch.samples, &train_cfg)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    save_system(&system, &args.out)?;

    let mut m = ManifestBuilder::new("fit-transform");
    m.config(&train_cfg)?;
    m.input(&args.data);
    m.input(&args.config);
    m.output(&args.out);
    let dir = args.out.parent().map(Path::to_path_buf).unwrap_or_else(|| ".".into());
    m.write(&dir)?;
    println!(
        "fitted {} with {} bands into {}",
        system.banded().transform().id(),
        system.partition().band_count(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let file_cfg = FileConfig::load(&args.config)?;
    let seed = resolve_seed(args.seed, file_cfg.train.seed);
    let mut cfg = file_cfg.train_config(seed)?;
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    if let Some(batch_size) = args.batch_size {
        cfg.batch_size = batch_size;
    }
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    let batch = datafile::read_dataset(&args.data)?;
    ensure_dir(&args.out_dir)?;

    let ckpt_dir = args.out_dir.clone();
    let result = train_with_callback(
        &batch.samples,
        batch.labels.as_deref(),
        &cfg,
        |step, snapshot| {
            let path = ckpt_dir.join(format!("checkpoint_{step:08}.kfc"));
            save_checkpoint(snapshot, &path)
        },
    )?;

    let ckpt_path = args.out_dir.join("checkpoint.kfc");
    save_checkpoint(&result.checkpoint, &ckpt_path)?;

    let loss_path = args.out_dir.join("loss.csv");
    let mut csv = String::from("step,loss,wall_ms\n");
    for r in &result.loss_log {
        csv.push_str(&format!("{},{},{}\n", r.step, r.loss, r.wall_ms));
    }
    atomic_write(&loss_path, csv.as_bytes())?;

    let mut m = ManifestBuilder::new("train");
    m.config(&cfg)?;
    m.seed("train", seed);
    m.input(&args.data);
    m.input(&args.config);
    m.output(&ckpt_path);
    m.output(&loss_path);
    m.write(&args.out_dir)?;

    let final_loss = result.loss_log.last().map(|r| r.loss);
    println!(
        "trained {} steps ({} parameters); final loss {:?}; checkpoint at {}",
        result.checkpoint.steps_completed,
        result.checkpoint.model.param_count(),
        final_loss,
        ckpt_path.display()
    );
    Ok(())
}

/// Runs `f(i)` for every index in [0, n), spread over `threads` workers.
/// Each index is independent, so the artifacts are identical for any
/// thread count.
fn parallel_indices(
    n: usize,
    threads: usize,
    f: impl Fn(usize) -> anyhow::Result<()> + Sync,
) -> anyhow::Result<()> {
    let threads = threads.max(1).min(n.max(1));
    if threads <= 1 {
        for i in 0..n {
            f(i)?;
        }
        return Ok(());
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let failure = std::sync::Mutex::new(None::<anyhow::Error>);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n || failure.lock().unwrap().is_some() {
                    break;
                }
                if let Err(e) = f(i) {
                    *failure.lock().unwrap() = Some(e);
                    break;
                }
            });
        }
    });
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_sample(args: SampleArgs, threads: usize) -> anyhow::Result<()> {
    anyhow::ensure!(args.num > 0, "--num must be at least 1");
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let seed = resolve_seed(args.seed, None);
    // Flags override [sample] settings from the config file, which override
    // the built-in defaults.
    let defaults = match &args.config {
        Some(path) => FileConfig::load(path)?.sample,
        None => Default::default(),
    };
    let cfg = SamplerConfig {
        steps: args.steps.unwrap_or(defaults.steps),
        integrator: match args.integrator.as_deref() {
            Some(name) => parse_integrator(Some(name))?,
            None => defaults.integrator,
        },
        direction: checkpoint.config.direction,
        guidance_scale: args.guidance_scale.unwrap_or(defaults.guidance_scale),
        rho: args.rho.unwrap_or(defaults.rho),
        seed,
    };
    ensure_dir(&args.out_dir)?;

    let n = checkpoint.system.coeff_len();
    let out_dir = &args.out_dir;
    let checkpoint_ref = &checkpoint;
    let cfg_ref = &cfg;
    parallel_indices(args.num, threads, |i| {
        let eps = NoiseDraw::standard_normal(seed, i as u64, n);
        let sample = integrate(checkpoint_ref, &eps, cfg_ref, args.label)?;
        let path = out_dir.join(format!("sample_{i:04}.kft"));
        tensor_write(&path, &sample)?;
        if args.images {
            render::render_image(&sample, &out_dir.join(format!("sample_{i:04}.pgm")))?;
        }
        Ok(())
    })?;

    let mut m = ManifestBuilder::new("sample");
    m.config(&cfg)?;
    m.seed("noise", seed);
    m.input(&args.checkpoint);
    for i in 0..args.num {
        m.output(&args.out_dir.join(format!("sample_{i:04}.kft")));
        if args.images {
            m.output(&args.out_dir.join(format!("sample_{i:04}.pgm")));
        }
    }
    m.write(&args.out_dir)?;
    println!("wrote {} samples to {}", args.num, args.out_dir.display());
    Ok(())
}

fn parse_band_set(spec: &str, bands: usize) -> anyhow::Result<Vec<usize>> {
    let set: Vec<usize> = match spec {
        "low" => (0..bands / 2).collect(),
        "high" => (bands / 2..bands).collect(),
        list => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .with_context(|| format!("bad band id {s:?}"))
            })
            .collect::<anyhow::Result<_>>()?,
    };
    anyhow::ensure!(!set.is_empty(), "shared band set is empty");
    Ok(set)
}

fn cmd_edit(args: EditArgs) -> anyhow::Result<()> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let bands = checkpoint.system.partition().band_count();
    let shared = parse_band_set(&args.shared_bands, bands)?;
    let resampled: Vec<usize> = (0..bands).filter(|b| !shared.contains(b)).collect();
    let seed = resolve_seed(args.seed, None);
    let cfg = sampler_from_checkpoint(
        &checkpoint,
        args.steps,
        args.integrator.as_deref(),
        None,
        None,
        seed,
    )?;
    let spec = EditSpec {
        shared_bands: shared,
        resampled_bands: resampled,
        count: args.num,
        base_seed: seed,
    };
    ensure_dir(&args.out_dir)?;
    let outputs = edit_generate(&checkpoint, &spec, &cfg)?;
    for (i, sample) in outputs.iter().enumerate() {
        tensor_write(&args.out_dir.join(format!("edit_{i:04}.kft")), sample)?;
    }

    let mut m = ManifestBuilder::new("edit");
    m.config(&spec)?;
    m.seed("noise", seed);
    m.input(&args.checkpoint);
    for i in 0..outputs.len() {
        m.output(&args.out_dir.join(format!("edit_{i:04}.kft")));
    }
    m.write(&args.out_dir)?;
    println!(
        "wrote {} edit-group samples to {}",
        outputs.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_analyze_spectrum(args: AnalyzeSpectrumArgs) -> anyhow::Result<()> {
    let file_cfg = FileConfig::load(&args.config)?;
    let seed = resolve_seed(None, file_cfg.train.seed);
    let cfg = file_cfg.train_config(seed)?;
    let batch = datafile::read_dataset(&args.data)?;
    let system = fit_system(&batch.samples, &cfg)?;
    let spectrum = system.banded().amplitude_spectrum(&batch.samples)?;
    let sizes = system.partition().band_sizes();
    let boundaries = system.partition().boundaries();

    ensure_dir(&args.out_dir)?;
    let mut csv = String::from(
        "band,boundary_lo,boundary_hi,band_size,mean_amplitude,per_coefficient_amplitude\n",
    );
    for (b, (amp, &size)) in spectrum.iter().zip(&sizes).enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            b,
            boundaries[b],
            boundaries[b + 1],
            size,
            amp,
            amp / (size as f64).sqrt()
        ));
    }
    let csv_path = args.out_dir.join("spectrum.csv");
    atomic_write(&csv_path, csv.as_bytes())?;

    let mut m = ManifestBuilder::new("analyze-spectrum");
    m.config(&cfg)?;
    m.input(&args.data);
    m.input(&args.config);
    m.output(&csv_path);
    m.write(&args.out_dir)?;
    println!("wrote band spectrum to {}", csv_path.display());
    Ok(())
}

fn cmd_analyze_trajectory(args: AnalyzeTrajectoryArgs) -> anyhow::Result<()> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let seed = resolve_seed(args.seed, None);
    let cfg = sampler_from_checkpoint(&checkpoint, args.steps, None, None, None, seed)?;
    let eps = NoiseDraw::standard_normal(seed, 0, checkpoint.system.coeff_len());
    let (_, trajectory) = integrate_trajectory(&checkpoint, &eps, &cfg, args.label)?;
    let curve = trajectory_projection_ratio(&trajectory)?;

    ensure_dir(&args.out_dir)?;
    let mut csv = String::from("k,ratio\n");
    for (k, ratio) in &curve.points {
        csv.push_str(&format!("{k},{ratio}\n"));
    }
    let csv_path = args.out_dir.join("trajectory.csv");
    atomic_write(&csv_path, csv.as_bytes())?;
    for flag in &curve.flags {
        eprintln!("note: {flag}");
    }

    let mut m = ManifestBuilder::new("analyze-trajectory");
    m.config(&cfg)?;
    m.seed("noise", seed);
    m.input(&args.checkpoint);
    m.output(&csv_path);
    m.write(&args.out_dir)?;
    println!("wrote projection curve to {}", csv_path.display());
    Ok(())
}

fn write_report(dir: &Path, name: &str, report: &MetricReport) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    atomic_write(&path, &bytes)?;
    Ok(path)
}

fn cmd_eval_fid(args: EvalFidArgs) -> anyhow::Result<()> {
    let real = datafile::read_dataset(&args.real)?.samples;
    let gen = datafile::read_samples(&args.gen)?;
    let map = parse_feature_map(&args.feature, args.feature_seed, &real)?;
    let value = fid(&real, &gen, &map)?;

    let mut metrics = BTreeMap::new();
    metrics.insert("fid".to_string(), value.value);
    let mut counts = BTreeMap::new();
    counts.insert("real".to_string(), real.len());
    counts.insert("generated".to_string(), gen.len());
    let report = MetricReport {
        metrics,
        per_class: BTreeMap::new(),
        feature_map: map.id(),
        provenance: Provenance {
            seeds: vec![args.feature_seed],
            sample_counts: counts,
        },
        notes: vec![],
        warnings: value.warnings,
    };
    ensure_dir(&args.out_dir)?;
    let path = write_report(&args.out_dir, "fid_report.json", &report)?;

    let mut m = ManifestBuilder::new("eval-fid");
    m.config(&report)?;
    m.input(&args.real);
    m.input(&args.gen);
    m.output(&path);
    m.write(&args.out_dir)?;
    println!("fid = {}", value.value);
    Ok(())
}

fn cmd_eval_cdr(args: EvalCdrArgs) -> anyhow::Result<()> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let batch = datafile::read_dataset(&args.real)?;
    let labels = batch
        .labels
        .clone()
        .ok_or_else(|| anyhow::anyhow!("CDR needs a labeled real dataset"))?;
    let seed = resolve_seed(args.seed, None);

    let mut by_class: BTreeMap<usize, Vec<Tensor>> = BTreeMap::new();
    for (sample, &label) in batch.samples.iter().zip(&labels) {
        by_class.entry(label).or_default().push(sample.clone());
    }
    if let Some(count) = args.num_classes {
        if count < by_class.len() {
            // Uniform class subset, mirroring the class-aware FID protocol.
            let mut rng = kflow::numeric::SeededRng::new(seed, 10_000);
            let mut pool: Vec<usize> = by_class.keys().copied().collect();
            let mut keep = Vec::new();
            for _ in 0..count {
                keep.push(pool.remove(rng.index(pool.len())));
            }
            by_class.retain(|c, _| keep.contains(c));
        }
    }

    let map = parse_feature_map(&args.feature, args.feature_seed, &batch.samples)?;
    let sampler = SamplerConfig {
        steps: args.steps.unwrap_or(250),
        integrator: Integrator::Heun,
        direction: checkpoint.config.direction,
        guidance_scale: args.guidance_scale,
        rho: 1.0,
        seed,
    };
    let report_data = cdr(
        &checkpoint,
        &by_class,
        args.rho,
        &sampler,
        &map,
        args.samples_per_class,
    )?;

    let mut metrics = BTreeMap::new();
    metrics.insert("cdr".to_string(), report_data.value);
    metrics.insert("rho".to_string(), args.rho);
    metrics.insert("guidance_scale".to_string(), args.guidance_scale);
    let mut per_class = BTreeMap::new();
    for c in &report_data.per_class {
        per_class.insert(format!("fid_kept_class_{}", c.class), c.fid_kept);
        per_class.insert(format!("fid_dropped_class_{}", c.class), c.fid_dropped);
        if let Some(r) = c.ratio {
            per_class.insert(format!("cdr_class_{}", c.class), r);
        }
    }
    let mut counts = BTreeMap::new();
    counts.insert("classes".to_string(), by_class.len());
    counts.insert("samples_per_class".to_string(), args.samples_per_class);
    let report = MetricReport {
        metrics,
        per_class,
        feature_map: map.id(),
        provenance: Provenance {
            seeds: vec![seed, args.feature_seed],
            sample_counts: counts,
        },
        notes: report_data.notes,
        warnings: report_data.warnings,
    };
    ensure_dir(&args.out_dir)?;
    let path = write_report(&args.out_dir, "cdr_report.json", &report)?;

    let mut m = ManifestBuilder::new("eval-cdr");
    m.config(&report)?;
    m.seed("noise", seed);
    m.input(&args.checkpoint);
    m.input(&args.real);
    m.output(&path);
    m.write(&args.out_dir)?;
    println!("cdr = {}", report_data.value);
    Ok(())
}

fn cmd_eval_recall(args: EvalRecallArgs) -> anyhow::Result<()> {
    let real = datafile::read_dataset(&args.real)?.samples;
    let gen = datafile::read_samples(&args.gen)?;
    let map = parse_feature_map(&args.feature, args.feature_seed, &real)?;
    let value = recall(&real, &gen, &map, args.k_nn)?;

    let mut metrics = BTreeMap::new();
    metrics.insert("recall".to_string(), value);
    metrics.insert("k_nn".to_string(), args.k_nn as f64);
    let mut counts = BTreeMap::new();
    counts.insert("real".to_string(), real.len());
    counts.insert("generated".to_string(), gen.len());
    let report = MetricReport {
        metrics,
        per_class: BTreeMap::new(),
        feature_map: map.id(),
        provenance: Provenance {
            seeds: vec![args.feature_seed],
            sample_counts: counts,
        },
        notes: vec![],
        warnings: vec![],
    };
    ensure_dir(&args.out_dir)?;
    let path = write_report(&args.out_dir, "recall_report.json", &report)?;

    let mut m = ManifestBuilder::new("eval-recall");
    m.config(&report)?;
    m.input(&args.real);
    m.input(&args.gen);
    m.output(&path);
    m.write(&args.out_dir)?;
    println!("recall = {value}");
    Ok(())
}
