//! Desk-scale dataset generation: 2-D toy distributions, labeled mixtures,
//! and spectral (1/f) textures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kamp::FourierTransform;
use crate::numeric::{SeededRng, Tensor};

/// What to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Two isotropic Gaussians at (+/-2, 0) with sigma 0.3.
    TwoGaussians,
    /// Two interleaved crescent moons with Gaussian jitter.
    TwoMoons,
    /// C labeled Gaussian blobs in `dim` dimensions with per-axis variances
    /// decaying geometrically, class means on the unit circle of the first
    /// two axes.
    LabeledMixture { classes: usize, dim: usize },
    /// size x size fields with amplitude ~ max(r, 1)^(-beta) and random
    /// phases.
    SpectralTexture { size: usize, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub kind: DatasetKind,
    pub count: usize,
    pub seed: u64,
}

/// Samples plus optional per-sample class labels.
#[derive(Debug, Clone)]
pub struct LabeledBatch {
    pub samples: Vec<Tensor>,
    pub labels: Option<Vec<usize>>,
}

impl LabeledBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Deterministic toy data per (spec, seed).
pub fn gen_toy(spec: &DatasetSpec) -> Result<LabeledBatch> {
    if spec.count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = SeededRng::new(spec.seed, 0);
    match &spec.kind {
        DatasetKind::TwoGaussians => {
            let mut samples = Vec::with_capacity(spec.count);
            for _ in 0..spec.count {
                let cx = if rng.uniform() < 0.5 { -2.0 } else { 2.0 };
                let x = cx + 0.3 * rng.standard_normal();
                let y = 0.3 * rng.standard_normal();
                samples.push(Tensor::from_vec(vec![x, y])?);
            }
            Ok(LabeledBatch {
                samples,
                labels: None,
            })
        }
        DatasetKind::TwoMoons => {
            let mut samples = Vec::with_capacity(spec.count);
            for _ in 0..spec.count {
                let theta = std::f64::consts::PI * rng.uniform();
                let upper = rng.uniform() < 0.5;
                let (mut x, mut y) = if upper {
                    (theta.cos(), theta.sin())
                } else {
                    (1.0 - theta.cos(), 0.5 - theta.sin())
                };
                x += 0.1 * rng.standard_normal();
                y += 0.1 * rng.standard_normal();
                samples.push(Tensor::from_vec(vec![x, y])?);
            }
            Ok(LabeledBatch {
                samples,
                labels: None,
            })
        }
        DatasetKind::LabeledMixture { classes, dim } => {
            if *classes == 0 || *dim < 2 {
                return Err(Error::invalid(
                    "labeled mixture needs at least 1 class and dimension 2",
                ));
            }
            let mut samples = Vec::with_capacity(spec.count);
            let mut labels = Vec::with_capacity(spec.count);
            for _ in 0..spec.count {
                let c = rng.index(*classes);
                let theta = std::f64::consts::TAU * c as f64 / *classes as f64;
                let mut x = vec![0.0; *dim];
                x[0] = 2.0 * theta.cos();
                x[1] = 2.0 * theta.sin();
                for (j, v) in x.iter_mut().enumerate() {
                    let sigma = 0.7 * 0.8f64.powi(j as i32);
                    *v += sigma * rng.standard_normal();
                }
                samples.push(Tensor::from_vec(x)?);
                labels.push(c);
            }
            Ok(LabeledBatch {
                samples,
                labels: Some(labels),
            })
        }
        DatasetKind::SpectralTexture { size, beta } => {
            if *beta < 0.0 {
                return Err(Error::invalid("spectral exponent must be nonnegative"));
            }
            let mut samples = Vec::with_capacity(spec.count);
            for _ in 0..spec.count {
                samples.push(gen_spectral_texture(*size, *beta, &mut rng)?);
            }
            Ok(LabeledBatch {
                samples,
                labels: None,
            })
        }
    }
}

/// One random field with per-shell amplitude `max(r, 1)^(-beta)`, uniformly
/// random phases, a zeroed DC coefficient, and unit pixel variance.
pub fn gen_spectral_texture(size: usize, beta: f64, rng: &mut SeededRng) -> Result<Tensor> {
    let transform = FourierTransform::new(vec![size, size])?;
    let radii = transform.slot_radii();
    let mut coeffs = vec![0.0; transform.coeff_len()];
    // The canonical layout interleaves (Re, Im) pairs; walking it in order
    // and drawing one phase per pair keeps draws reproducible.
    let mut i = 0;
    while i < coeffs.len() {
        let r = radii[i];
        let amplitude = if r == 0.0 { 0.0 } else { r.max(1.0).powf(-beta) };
        if transform.slot_is_pair_start(i) {
            let phase = std::f64::consts::TAU * rng.uniform();
            coeffs[i] = std::f64::consts::SQRT_2 * amplitude * phase.cos();
            coeffs[i + 1] = std::f64::consts::SQRT_2 * amplitude * phase.sin();
            i += 2;
        } else {
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            coeffs[i] = sign * amplitude;
            i += 1;
        }
    }
    let field = transform.inverse(&coeffs)?;
    // Zero DC means zero mean; normalize the pixel variance to one.
    let n = field.len() as f64;
    let var = field.data().iter().map(|v| v * v).sum::<f64>() / n;
    let scale = 1.0 / var.sqrt().max(1e-300);
    Tensor::new(
        field.shape().to_vec(),
        field.data().iter().map(|v| v * scale).collect(),
    )
}
