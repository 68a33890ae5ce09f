//! ODE sampling of the learned field, classifier-free guidance with
//! condition dropping, band-wise noise editing, and the conditional-path
//! oracle used for verification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolant::{FlowDirection, FlowSystem, NoiseDraw};
use crate::model::VectorFieldModel;
use crate::numeric::Tensor;
use crate::training::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Euler,
    #[default]
    Heun,
}

/// Fixed-step sampler settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub steps: usize,
    pub integrator: Integrator,
    pub direction: FlowDirection,
    /// Guidance extrapolation weight; 0 is unconditional, 1 is plain
    /// conditional.
    pub guidance_scale: f64,
    /// Keep the class condition for scale times k <= rho; beyond it the
    /// null label replaces the class.
    pub rho: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            steps: 250,
            integrator: Integrator::Heun,
            direction: FlowDirection::LowToHigh,
            guidance_scale: 1.0,
            rho: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("sampler needs at least one step"));
        }
        if self.guidance_scale < 0.0 || !self.guidance_scale.is_finite() {
            return Err(Error::invalid(format!(
                "guidance scale {} must be nonnegative",
                self.guidance_scale
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid(format!(
                "condition-keep fraction {} outside [0, 1]",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Integrates `dx/dk = field(x, k)` from k = 0 to 1 in fixed steps.
pub fn integrate_field<F>(
    field: &mut F,
    init: &[f64],
    steps: usize,
    integrator: Integrator,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    integrate_field_visit(field, init, steps, integrator, |_, _| {})
}

/// Like [`integrate_field`], invoking `visit(k, state)` at every node
/// including both endpoints.
pub fn integrate_field_visit<F, V>(
    field: &mut F,
    init: &[f64],
    steps: usize,
    integrator: Integrator,
    mut visit: V,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
    V: FnMut(f64, &[f64]),
{
    if steps == 0 {
        return Err(Error::invalid("sampler needs at least one step"));
    }
    let n = init.len();
    let mut x = init.to_vec();
    visit(0.0, &x);
    for i in 0..steps {
        let k0 = i as f64 / steps as f64;
        let k1 = (i + 1) as f64 / steps as f64;
        let h = k1 - k0;
        let v1 = field(&x, k0)?;
        if v1.len() != n {
            return Err(Error::shape("field output length changed mid-integration"));
        }
        match integrator {
            Integrator::Euler => {
                for (xi, vi) in x.iter_mut().zip(&v1) {
                    *xi += h * vi;
                }
            }
            Integrator::Heun => {
                let pred: Vec<f64> = x.iter().zip(&v1).map(|(&xi, &vi)| xi + h * vi).collect();
                let v2 = field(&pred, k1)?;
                for ((xi, &a), &b) in x.iter_mut().zip(&v1).zip(&v2) {
                    *xi += 0.5 * h * (a + b);
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "integration state became non-finite at step {i} (k = {k1:.6})"
            )));
        }
        visit(k1, &x);
    }
    Ok(x)
}

/// Classifier-free guided velocity with condition dropping.
///
/// For k > rho the class is dropped and the null-label velocity is returned.
/// Otherwise the guided velocity is `v_null + s * (v_label - v_null)`; the
/// endpoint scales 0 and 1 return the unconditional and conditional
/// velocities bit-exactly.
pub fn guided_velocity(
    model: &VectorFieldModel,
    psi: &[f64],
    k_norm: f64,
    label: usize,
    guidance_scale: f64,
    rho: f64,
) -> Result<Vec<f64>> {
    if !model.is_conditional() {
        return Err(Error::label(
            "guided sampling needs a model trained with label conditioning".to_string(),
        ));
    }
    if k_norm > rho || guidance_scale == 0.0 {
        return model.eval(psi, k_norm, None);
    }
    if guidance_scale == 1.0 {
        return model.eval(psi, k_norm, Some(label));
    }
    let v_null = model.eval(psi, k_norm, None)?;
    let v_label = model.eval(psi, k_norm, Some(label))?;
    Ok(v_null
        .iter()
        .zip(&v_label)
        .map(|(&n, &l)| n + guidance_scale * (l - n))
        .collect())
}

fn check_compat(checkpoint: &Checkpoint, eps0: &NoiseDraw, cfg: &SamplerConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.direction != checkpoint.config.direction {
        return Err(Error::invalid(format!(
            "sampler direction {:?} does not match the checkpoint's training direction {:?}; \
             the learned field is direction-specific",
            cfg.direction, checkpoint.config.direction
        )));
    }
    if eps0.len() != checkpoint.system.coeff_len() {
        return Err(Error::shape(format!(
            "noise length {} does not match the checkpoint's coefficient length {}",
            eps0.len(),
            checkpoint.system.coeff_len()
        )));
    }
    Ok(())
}

fn model_field<'a>(
    checkpoint: &'a Checkpoint,
    cfg: &'a SamplerConfig,
    label: Option<usize>,
) -> impl FnMut(&[f64], f64) -> Result<Vec<f64>> + 'a {
    move |x: &[f64], k: f64| match label {
        Some(c) => guided_velocity(
            &checkpoint.model,
            x,
            k,
            c,
            cfg.guidance_scale,
            cfg.rho,
        ),
        None => checkpoint.model.eval(x, k, None),
    }
}

/// Integrates the learned field from a noise draw and maps the result back
/// to signal space.
pub fn integrate(
    checkpoint: &Checkpoint,
    eps0: &NoiseDraw,
    cfg: &SamplerConfig,
    label: Option<usize>,
) -> Result<Tensor> {
    check_compat(checkpoint, eps0, cfg)?;
    let mut field = model_field(checkpoint, cfg, label);
    let final_coeffs =
        integrate_field(&mut field, &eps0.coeffs, cfg.steps, cfg.integrator)?;
    checkpoint
        .system
        .banded()
        .transform()
        .inverse_coeffs(&final_coeffs)
}

/// Like [`integrate`], also returning the coefficient state at every node.
pub fn integrate_trajectory(
    checkpoint: &Checkpoint,
    eps0: &NoiseDraw,
    cfg: &SamplerConfig,
    label: Option<usize>,
) -> Result<(Tensor, Vec<(f64, Vec<f64>)>)> {
    check_compat(checkpoint, eps0, cfg)?;
    let mut trajectory = Vec::with_capacity(cfg.steps + 1);
    let mut field = model_field(checkpoint, cfg, label);
    let final_coeffs = integrate_field_visit(
        &mut field,
        &eps0.coeffs,
        cfg.steps,
        cfg.integrator,
        |k, state| trajectory.push((k, state.to_vec())),
    )?;
    let signal = checkpoint
        .system
        .banded()
        .transform()
        .inverse_coeffs(&final_coeffs)?;
    Ok((signal, trajectory))
}

/// Band-wise noise sharing for scaling-controllable editing.
///
/// The shared band set receives one common noise draw; the resampled set
/// gets an independent draw per output. The two sets must partition the
/// checkpoint's bands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EditSpec {
    pub shared_bands: Vec<usize>,
    pub resampled_bands: Vec<usize>,
    pub count: usize,
    pub base_seed: u64,
}

impl EditSpec {
    fn validate(&self, bands: usize) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("edit count must be at least 1"));
        }
        let mut seen = vec![false; bands];
        for &b in self.shared_bands.iter().chain(&self.resampled_bands) {
            if b >= bands {
                return Err(Error::invalid(format!(
                    "band id {b} out of range (bands: {bands})"
                )));
            }
            if seen[b] {
                return Err(Error::invalid(format!(
                    "band {b} appears in both the shared and resampled sets"
                )));
            }
            seen[b] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::invalid(format!(
                "band {missing} belongs to neither set; shared and resampled bands must \
                 partition all bands"
            )));
        }
        Ok(())
    }
}

/// The initial noise draws of an edit group: stream 0 of the base seed on
/// the shared bands, stream 1 + i elsewhere.
pub fn edit_initial_noise(
    spec: &EditSpec,
    partition: &crate::kamp::ScalePartition,
) -> Result<Vec<NoiseDraw>> {
    spec.validate(partition.band_count())?;
    let n = partition.coeff_len();
    let shared = NoiseDraw::standard_normal(spec.base_seed, 0, n);
    Ok((0..spec.count)
        .map(|i| {
            let own = NoiseDraw::standard_normal(spec.base_seed, 1 + i as u64, n);
            let coeffs: Vec<f64> = (0..n)
                .map(|slot| {
                    let band = partition.band_of_slot(slot);
                    if spec.shared_bands.contains(&band) {
                        shared.coeffs[slot]
                    } else {
                        own.coeffs[slot]
                    }
                })
                .collect();
            NoiseDraw {
                coeffs,
                seed: spec.base_seed,
                stream: 1 + i as u64,
            }
        })
        .collect())
}

/// Generates `count` samples whose initial noise agrees bitwise on the
/// shared bands.
pub fn edit_generate(
    checkpoint: &Checkpoint,
    spec: &EditSpec,
    cfg: &SamplerConfig,
) -> Result<Vec<Tensor>> {
    let draws = edit_initial_noise(spec, checkpoint.system.partition())?;
    draws
        .iter()
        .map(|eps| integrate(checkpoint, eps, cfg, None))
        .collect()
}

/// Euler integration of the analytic conditional velocity from the noise
/// endpoint; converges to the data signal as the step count grows. Band
/// starts use the right-sided derivative, which makes the piecewise-linear
/// path (linear bump, band-aligned steps) exact.
pub fn conditional_oracle_integrate(
    system: &FlowSystem,
    signal: &Tensor,
    eps: &NoiseDraw,
    steps: usize,
) -> Result<Tensor> {
    let data = system.banded().transform().forward_coeffs(signal)?;
    if eps.len() != data.len() {
        return Err(Error::shape(format!(
            "noise length {} does not match coefficient length {}",
            eps.len(),
            data.len()
        )));
    }
    let mut field =
        |_: &[f64], k: f64| system.conditional_velocity_right(&data, &eps.coeffs, k);
    let final_coeffs = integrate_field(&mut field, &eps.coeffs, steps, Integrator::Euler)?;
    system.banded().transform().inverse_coeffs(&final_coeffs)
}
