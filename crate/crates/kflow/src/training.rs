//! Conditional flow matching over scale time, with checkpointing.
//!
//! Each step draws a scale time uniformly, builds the banded interpolant
//! state for a fresh noise draw, regresses the model onto the analytic
//! conditional velocity, and applies one optimizer update. All randomness
//! flows through fixed streams of the run seed, so identical configurations
//! produce bit-identical checkpoints.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolant::{BumpFunction, FlowDirection, FlowSystem};
use crate::io::{Container, ContainerWriter};
use crate::kamp::{
    make_partition, pca_fit, BandedTransform, PartitionStrategy, PcaBasis, ScalePartition,
    Transform, WaveletFamily,
};
use crate::model::{
    optimizer_step, Activation, AdamParams, AdamState, GradientSet, ModelConfig, VectorFieldModel,
};
use crate::numeric::{SeededRng, Tensor};

/// RNG stream assignments within a run seed.
pub const STREAM_INIT: u64 = 0;
pub const STREAM_BATCH: u64 = 1;
pub const STREAM_CFM: u64 = 2;

/// Local times this close to a band edge are resampled during training; the
/// smooth bumps have vanishing derivatives there, which makes the targets
/// uninformative.
const T_RESAMPLE_MARGIN: f64 = 0.01;

const CHECKPOINT_VERSION: u32 = 1;

/// Which transform to fit, by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TransformSpec {
    Fourier,
    Wavelet {
        #[serde(default = "default_wavelet_family")]
        family: WaveletFamily,
        /// Decomposition depth; omitted means the maximum the shape allows.
        levels: Option<usize>,
    },
    Pca,
}

fn default_wavelet_family() -> WaveletFamily {
    WaveletFamily::Db6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub bands: usize,
    pub strategy: PartitionStrategy,
}

/// Model hyperparameters exposed to configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelHyper {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub scale_embed_dim: usize,
    pub label_embed_dim: usize,
    pub activation: Activation,
}

impl Default for ModelHyper {
    fn default() -> Self {
        ModelHyper {
            hidden_width: 256,
            hidden_layers: 3,
            scale_embed_dim: 16,
            label_embed_dim: 8,
            activation: Activation::Tanh,
        }
    }
}

/// Full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub transform: TransformSpec,
    pub partition: PartitionSpec,
    #[serde(default)]
    pub bump: BumpFunction,
    #[serde(default)]
    pub direction: FlowDirection,
    #[serde(default)]
    pub model: ModelHyper,
    pub batch_size: usize,
    pub steps: u64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub eps: f64,
    pub seed: u64,
    #[serde(default)]
    pub label_conditioning: bool,
    /// Probability of replacing a sample's label with the null label
    /// (classifier-free guidance training).
    #[serde(default = "default_label_drop")]
    pub label_drop_prob: f64,
    /// Emit an intermediate checkpoint every this many steps; 0 disables.
    #[serde(default)]
    pub checkpoint_every: u64,
}

fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}
fn default_label_drop() -> f64 {
    0.1
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if self.partition.bands == 0 {
            return Err(Error::invalid("band count must be positive"));
        }
        if !(0.0..=1.0).contains(&self.label_drop_prob) {
            return Err(Error::invalid(format!(
                "label drop probability {} outside [0, 1]",
                self.label_drop_prob
            )));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(Error::invalid(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Fits the configured transform and partition on a dataset and wires them
/// into a [`FlowSystem`].
pub fn fit_system(samples: &[Tensor], cfg: &TrainConfig) -> Result<FlowSystem> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot fit a transform on an empty dataset"));
    }
    let shape = samples[0].shape().to_vec();
    for s in samples {
        if s.shape() != shape.as_slice() {
            return Err(Error::shape("dataset samples have mixed shapes"));
        }
    }
    let transform = match &cfg.transform {
        TransformSpec::Fourier => Transform::fourier(shape)?,
        TransformSpec::Wavelet { family, levels } => {
            let min_axis = *shape.iter().min().unwrap();
            let max_levels = (min_axis.max(2)).trailing_zeros() as usize;
            let levels = levels.unwrap_or(max_levels);
            Transform::wavelet(shape, *family, levels)?
        }
        TransformSpec::Pca => {
            if shape.len() != 1 {
                return Err(Error::shape(
                    "PCA transform expects 1-D samples; flatten the dataset first",
                ));
            }
            let dim = shape[0];
            let basis = pca_fit(samples, dim)?;
            Transform::pca(basis)?
        }
    };
    let partition = make_partition(
        &transform,
        cfg.partition.bands,
        cfg.partition.strategy,
        Some(samples),
    )?;
    Ok(FlowSystem::new(
        BandedTransform::new(transform, partition)?,
        cfg.bump,
        cfg.direction,
    ))
}

/// One conditional flow matching example: data-space coefficients plus an
/// optional class label.
#[derive(Debug, Clone, Copy)]
pub struct CfmExample<'a> {
    pub coeffs: &'a [f64],
    pub label: Option<usize>,
}

/// The conditional flow matching objective on one batch.
///
/// Per example: draw a scale time uniformly (resampling while the local time
/// falls within the uninformative margin of a band edge), draw coefficient
/// noise, build the interpolant state, and regress the model on the analytic
/// conditional velocity. Returns the mean squared error and its exact
/// gradient.
pub fn cfm_loss_batch(
    model: &VectorFieldModel,
    system: &FlowSystem,
    batch: &[CfmExample<'_>],
    label_drop_prob: f64,
    rng: &mut SeededRng,
) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty training batch"));
    }
    let n = system.coeff_len();
    let mut samples = Vec::with_capacity(batch.len());
    for example in batch {
        if example.coeffs.len() != n {
            return Err(Error::shape(format!(
                "example coefficient length {} does not match system ({n})",
                example.coeffs.len()
            )));
        }
        let k_norm = loop {
            let k = rng.uniform();
            let t = system.coordinate(k)?.t;
            if t > T_RESAMPLE_MARGIN && t < 1.0 - T_RESAMPLE_MARGIN {
                break k;
            }
        };
        let eps = rng.normal_vec(n);
        let label = if model.is_conditional() {
            let keep = rng.uniform() >= label_drop_prob;
            if keep {
                example.label
            } else {
                None
            }
        } else {
            None
        };
        let psi = system.interpolate_coeffs(example.coeffs, &eps, k_norm)?;
        let target = system.conditional_velocity_coeffs(example.coeffs, &eps, k_norm)?;
        samples.push(crate::model::VfSample {
            psi,
            k_norm,
            target,
            label,
        });
    }
    model.loss_and_grad(&samples)
}

/// A self-contained training artifact: everything sampling needs.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub system: FlowSystem,
    pub model: VectorFieldModel,
    pub steps_completed: u64,
    /// Trailing (step, loss) records.
    pub loss_tail: Vec<(u64, f64)>,
}

/// One training-log row. Wall time is informational and excluded from the
/// checkpoint so artifacts stay reproducible.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossRecord {
    pub step: u64,
    pub loss: f64,
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub checkpoint: Checkpoint,
    pub loss_log: Vec<LossRecord>,
}

/// Runs the training loop; see [`train_with_callback`] for cadence hooks.
pub fn train(samples: &[Tensor], labels: Option<&[usize]>, cfg: &TrainConfig) -> Result<TrainResult> {
    train_with_callback(samples, labels, cfg, |_, _| Ok(()))
}

/// Runs the training loop, invoking `on_checkpoint(step, checkpoint)` every
/// `checkpoint_every` steps when that cadence is nonzero.
pub fn train_with_callback(
    samples: &[Tensor],
    labels: Option<&[usize]>,
    cfg: &TrainConfig,
    mut on_checkpoint: impl FnMut(u64, &Checkpoint) -> Result<()>,
) -> Result<TrainResult> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    let system = fit_system(samples, cfg)?;
    let n = system.coeff_len();

    let label_vocab = if cfg.label_conditioning {
        let labels = labels.ok_or_else(|| {
            Error::label("label conditioning requested but the dataset has no labels".to_string())
        })?;
        if labels.len() != samples.len() {
            return Err(Error::shape("label count does not match sample count"));
        }
        Some(labels.iter().max().map(|&m| m + 1).unwrap_or(0))
    } else {
        None
    };

    // Transform every sample once.
    let coeff_cache: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| system.banded().transform().forward_coeffs(s))
        .collect::<Result<_>>()?;

    let model_cfg = ModelConfig {
        coeff_len: n,
        hidden_width: cfg.model.hidden_width,
        hidden_layers: cfg.model.hidden_layers,
        scale_embed_dim: cfg.model.scale_embed_dim,
        label_vocab,
        label_embed_dim: cfg.model.label_embed_dim,
        activation: cfg.model.activation,
    };
    let mut init_rng = SeededRng::new(cfg.seed, STREAM_INIT);
    let mut model = VectorFieldModel::init(model_cfg, &mut init_rng)?;
    let mut adam = AdamState::new(&model);
    let adam_hp = cfg.adam();

    let mut batch_rng = SeededRng::new(cfg.seed, STREAM_BATCH);
    let mut cfm_rng = SeededRng::new(cfg.seed, STREAM_CFM);

    let started = Instant::now();
    let mut loss_log = Vec::new();
    let mut loss_tail: Vec<(u64, f64)> = Vec::new();
    for step in 0..cfg.steps {
        let batch: Vec<CfmExample<'_>> = (0..cfg.batch_size)
            .map(|_| {
                let idx = batch_rng.index(samples.len());
                CfmExample {
                    coeffs: &coeff_cache[idx],
                    label: labels.map(|l| l[idx]),
                }
            })
            .collect();
        let (loss, grads) =
            cfm_loss_batch(&model, &system, &batch, cfg.label_drop_prob, &mut cfm_rng)?;
        if !loss.is_finite() {
            return Err(Error::numeric(format!(
                "training diverged at step {step}: loss = {loss}; \
                 lower the learning rate or check the data scale"
            )));
        }
        optimizer_step(&mut adam, &mut model, &grads, &adam_hp)?;

        loss_log.push(LossRecord {
            step,
            loss,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        loss_tail.push((step, loss));
        if loss_tail.len() > 64 {
            loss_tail.remove(0);
        }

        if cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 {
            let snapshot = Checkpoint {
                config: cfg.clone(),
                system: system.clone(),
                model: model.clone(),
                steps_completed: step + 1,
                loss_tail: loss_tail.clone(),
            };
            on_checkpoint(step + 1, &snapshot)?;
        }
    }

    Ok(TrainResult {
        checkpoint: Checkpoint {
            config: cfg.clone(),
            system,
            model,
            steps_completed: cfg.steps,
            loss_tail,
        },
        loss_log,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    kind: String,
    version: u32,
    steps_completed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum TransformGeometry {
    Fourier {
        shape: Vec<usize>,
    },
    Wavelet {
        shape: Vec<usize>,
        family: WaveletFamily,
        levels: usize,
    },
    Pca {
        dim: usize,
    },
}

/// Writes the transform geometry, fitted PCA arrays, and partition entries.
fn put_system_entries(w: &mut ContainerWriter, system: &FlowSystem) -> Result<()> {
    let transform = system.banded().transform();
    let geometry = match transform {
        Transform::Fourier(f) => TransformGeometry::Fourier {
            shape: f.shape().to_vec(),
        },
        Transform::Wavelet(wv) => TransformGeometry::Wavelet {
            shape: wv.shape().to_vec(),
            family: wv.family(),
            levels: wv.levels(),
        },
        Transform::Pca(p) => TransformGeometry::Pca { dim: p.dim() },
    };
    w.put_json("transform/geometry", &geometry)?;
    if let Transform::Pca(p) = transform {
        let basis = p.basis();
        let d = basis.dim;
        w.put_f64("transform/pca/mean", vec![d], &basis.mean)?;
        w.put_f64("transform/pca/components", vec![d, d], &basis.components)?;
        w.put_f64("transform/pca/variances", vec![d], &basis.variances)?;
    }

    let partition = system.partition();
    w.put_f64(
        "partition/boundaries",
        vec![partition.boundaries().len()],
        partition.boundaries(),
    )?;
    let assignment: Vec<f64> = partition.assignment().iter().map(|&b| b as f64).collect();
    w.put_f64("partition/assignment", vec![assignment.len()], &assignment)?;
    Ok(())
}

/// Reads back what [`put_system_entries`] wrote.
fn get_system_entries(container: &Container) -> Result<BandedTransform> {
    let geometry: TransformGeometry = container.json("transform/geometry")?;
    let mut transform = match geometry {
        TransformGeometry::Fourier { shape } => Transform::fourier(shape)?,
        TransformGeometry::Wavelet { shape, family, levels } => {
            Transform::wavelet(shape, family, levels)?
        }
        TransformGeometry::Pca { dim } => {
            let (_, mean) = container.floats("transform/pca/mean")?;
            let (cshape, components) = container.floats("transform/pca/components")?;
            let (_, variances) = container.floats("transform/pca/variances")?;
            if cshape != vec![dim, dim] {
                return Err(Error::format("PCA component matrix has the wrong shape"));
            }
            Transform::pca(PcaBasis {
                mean,
                components,
                variances,
                dim,
            })?
        }
    };
    transform.rebuild_caches();

    let (_, boundaries) = container.floats("partition/boundaries")?;
    let (_, assignment) = container.floats("partition/assignment")?;
    let partition = ScalePartition::new(
        boundaries,
        assignment.iter().map(|&v| v as usize).collect(),
    )?;
    BandedTransform::new(transform, partition)
}

#[derive(Debug, Serialize, Deserialize)]
struct FlowMeta {
    bump: BumpFunction,
    direction: FlowDirection,
}

/// Writes a standalone fitted transform artifact (no model).
pub fn save_system(system: &FlowSystem, path: &Path) -> Result<()> {
    let mut w = ContainerWriter::new();
    w.put_json(
        "meta/format",
        &serde_json::json!({"kind": "kflow-transform", "version": CHECKPOINT_VERSION}),
    )?;
    w.put_json(
        "meta/flow",
        &FlowMeta {
            bump: system.bump(),
            direction: system.direction(),
        },
    )?;
    put_system_entries(&mut w, system)?;
    w.write(path)
}

/// Restores a transform artifact written by [`save_system`].
pub fn load_system(path: &Path) -> Result<FlowSystem> {
    let container = Container::read(path)?;
    let meta: serde_json::Value = container.json("meta/format")?;
    if meta["kind"] != "kflow-transform" {
        return Err(Error::format(format!(
            "{} is not a transform artifact (kind {})",
            path.display(),
            meta["kind"]
        )));
    }
    let flow: FlowMeta = container.json("meta/flow")?;
    let banded = get_system_entries(&container)?;
    Ok(FlowSystem::new(banded, flow.bump, flow.direction))
}

/// Serializes a checkpoint into a `KFC1` container.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let mut w = ContainerWriter::new();
    w.put_json(
        "meta/format",
        &CheckpointMeta {
            kind: "kflow-checkpoint".to_string(),
            version: CHECKPOINT_VERSION,
            steps_completed: checkpoint.steps_completed,
        },
    )?;
    w.put_json("meta/config", &checkpoint.config)?;
    put_system_entries(&mut w, &checkpoint.system)?;

    w.put_json("model/spec", checkpoint.model.config())?;
    for (name, shape, values) in checkpoint.model.named_params() {
        w.put_f64(&format!("model/{name}"), shape, values)?;
    }

    let tail: Vec<f64> = checkpoint
        .loss_tail
        .iter()
        .flat_map(|&(s, l)| [s as f64, l])
        .collect();
    if !tail.is_empty() {
        w.put_f64("log/loss_tail", vec![checkpoint.loss_tail.len(), 2], &tail)?;
    }
    w.write(path)
}

/// Restores a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let container = Container::read(path)?;
    let meta: CheckpointMeta = container.json("meta/format")?;
    if meta.kind != "kflow-checkpoint" {
        return Err(Error::format(format!(
            "{} is not a checkpoint container (kind {:?})",
            path.display(),
            meta.kind
        )));
    }
    if meta.version != CHECKPOINT_VERSION {
        return Err(Error::format(format!(
            "checkpoint version {} unsupported; this build reads version {CHECKPOINT_VERSION}",
            meta.version
        )));
    }
    let config: TrainConfig = container.json("meta/config")?;
    let banded = get_system_entries(&container)?;

    let model_cfg: ModelConfig = container.json("model/spec")?;
    let mut throwaway = SeededRng::new(0, 0);
    let mut model = VectorFieldModel::init(model_cfg, &mut throwaway)?;
    let values: Vec<Vec<f64>> = model
        .named_params()
        .iter()
        .map(|(name, _, _)| container.floats(&format!("model/{name}")).map(|(_, v)| v))
        .collect::<Result<_>>()?;
    model.load_flat_params(&values)?;

    let loss_tail = if container.contains("log/loss_tail") {
        let (shape, tail) = container.floats("log/loss_tail")?;
        tail.chunks_exact(2)
            .take(shape[0])
            .map(|c| (c[0] as u64, c[1]))
            .collect()
    } else {
        Vec::new()
    };

    let system = FlowSystem::new(banded, config.bump, config.direction);
    Ok(Checkpoint {
        config,
        system,
        model,
        steps_completed: meta.steps_completed,
        loss_tail,
    })
}
