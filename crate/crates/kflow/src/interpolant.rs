//! The banded stochastic interpolant and its analytic conditional velocity.
//!
//! The flow's time variable is the normalized scale coordinate `k` in
//! [0, 1]. Walking `k` across the partition boundaries reveals one band
//! after another: bands already passed carry the data coefficients, bands
//! not yet reached still carry the frozen noise draw, and the single active
//! band mixes the two through a bump function of the local time `t`. The
//! derivative of that construction with respect to `k` is supported on the
//! active band only, which is what makes the conditional target localized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kamp::{BandedTransform, ScalePartition};
use crate::numeric::{SeededRng, Tensor};

/// Within-band schedule mixing data and noise.
///
/// Every kind satisfies mu(0) = 0 and mu(1) = 1 so the interpolant agrees
/// with the discrete band-reveal flow at band boundaries; the smooth kinds
/// additionally have mu'(0) = mu'(1) = 0, which makes the interpolant C^1
/// across boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BumpFunction {
    #[default]
    CubicSmoothstep,
    QuinticSmoothstep,
    Linear,
}

impl BumpFunction {
    /// Value and derivative at local time `t` in [0, 1].
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("bump argument t = {t} outside [0, 1]")));
        }
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: f64) -> (f64, f64) {
        match self {
            BumpFunction::CubicSmoothstep => {
                (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
            }
            BumpFunction::QuinticSmoothstep => {
                let t2 = t * t;
                (
                    t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
                    30.0 * t2 * (1.0 - t) * (1.0 - t),
                )
            }
            BumpFunction::Linear => (t, 1.0),
        }
    }

    /// Smooth kinds have vanishing endpoint derivatives.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, BumpFunction::Linear)
    }
}

/// Which end of the scale axis the flow reveals first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FlowDirection {
    /// Coarse bands first (the default).
    #[default]
    LowToHigh,
    /// Fine bands first (the reversed flow used for high-scale editing).
    HighToLow,
}

/// Position of a flow time `k` within the band schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleCoordinate {
    pub k_norm: f64,
    /// The active band of the partition.
    pub band: usize,
    /// Local time within the active flow interval, in [0, 1].
    pub t: f64,
    /// Width of the active flow interval.
    pub width: f64,
    /// Position of the active interval in flow order.
    pub flow_index: usize,
}

/// A frozen coefficient-space noise draw with its provenance.
#[derive(Debug, Clone)]
pub struct NoiseDraw {
    pub coeffs: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl NoiseDraw {
    /// i.i.d. standard normal noise in the canonical coefficient layout.
    pub fn standard_normal(seed: u64, stream: u64, len: usize) -> Self {
        let mut rng = SeededRng::new(seed, stream);
        NoiseDraw {
            coeffs: rng.normal_vec(len),
            seed,
            stream,
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// The interpolant value at one scale time.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub coeffs: Vec<f64>,
    pub coord: ScaleCoordinate,
    pub direction: FlowDirection,
}

/// How velocity evaluation treats exact band boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoundaryRule {
    /// Reject non-smooth bumps at t = 0 or 1 (the derivative does not exist
    /// there); smooth bumps return the zero velocity.
    Strict,
    /// Take the right-sided derivative, which is what a left-endpoint Euler
    /// rule needs at band starts.
    RightLimit,
}

/// A fitted transform, a partition, a bump, and a direction: everything the
/// interpolant needs.
#[derive(Debug, Clone)]
pub struct FlowSystem {
    banded: BandedTransform,
    bump: BumpFunction,
    direction: FlowDirection,
    /// Flow-interval boundaries (the partition boundaries, mirrored for the
    /// reversed direction).
    flow_boundaries: Vec<f64>,
    /// Per coefficient slot: position of its band in flow order.
    flow_pos: Vec<usize>,
    /// Flow interval -> partition band.
    band_of_flow: Vec<usize>,
}

impl FlowSystem {
    pub fn new(banded: BandedTransform, bump: BumpFunction, direction: FlowDirection) -> Self {
        let partition = banded.partition();
        let bands = partition.band_count();
        let (flow_boundaries, band_of_flow): (Vec<f64>, Vec<usize>) = match direction {
            FlowDirection::LowToHigh => {
                (partition.boundaries().to_vec(), (0..bands).collect())
            }
            FlowDirection::HighToLow => {
                // Mirrored exactly as in ScalePartition::reversed, so the
                // direction-symmetry identity holds bitwise.
                let mut b: Vec<f64> = partition.boundaries().iter().map(|&x| 1.0 - x).collect();
                b.reverse();
                b[0] = 0.0;
                *b.last_mut().unwrap() = 1.0;
                (b, (0..bands).rev().collect())
            }
        };
        let mut flow_of_band = vec![0usize; bands];
        for (f, &band) in band_of_flow.iter().enumerate() {
            flow_of_band[band] = f;
        }
        let flow_pos = partition
            .assignment()
            .iter()
            .map(|&band| flow_of_band[band])
            .collect();
        FlowSystem {
            banded,
            bump,
            direction,
            flow_boundaries,
            flow_pos,
            band_of_flow,
        }
    }

    pub fn banded(&self) -> &BandedTransform {
        &self.banded
    }

    pub fn partition(&self) -> &ScalePartition {
        self.banded.partition()
    }

    pub fn bump(&self) -> BumpFunction {
        self.bump
    }

    pub fn direction(&self) -> FlowDirection {
        self.direction
    }

    pub fn coeff_len(&self) -> usize {
        self.banded.coeff_len()
    }

    /// Flow-interval boundaries in flow order.
    pub fn flow_boundaries(&self) -> &[f64] {
        &self.flow_boundaries
    }

    /// Locates `k` in the band schedule. Bands are half-open in flow time;
    /// `k = 1` clamps to the final band with t = 1.
    pub fn coordinate(&self, k_norm: f64) -> Result<ScaleCoordinate> {
        if !(0.0..=1.0).contains(&k_norm) {
            return Err(Error::invalid(format!(
                "scale coordinate k = {k_norm} outside [0, 1]"
            )));
        }
        let bands = self.band_of_flow.len();
        let flow_index = if k_norm >= 1.0 {
            bands - 1
        } else {
            // Last interval whose start is <= k.
            let mut f = 0;
            while f + 1 < bands && k_norm >= self.flow_boundaries[f + 1] {
                f += 1;
            }
            f
        };
        let lo = self.flow_boundaries[flow_index];
        let width = self.flow_boundaries[flow_index + 1] - lo;
        let t = if k_norm >= 1.0 { 1.0 } else { (k_norm - lo) / width };
        Ok(ScaleCoordinate {
            k_norm,
            band: self.band_of_flow[flow_index],
            t,
            width,
            flow_index,
        })
    }

    /// Fresh noise in the coefficient layout.
    pub fn draw_noise(&self, seed: u64, stream: u64) -> NoiseDraw {
        NoiseDraw::standard_normal(seed, stream, self.coeff_len())
    }

    /// The discrete band-reveal flow: the first `revealed` flow intervals
    /// carry data coefficients, the rest carry noise, and the mix is mapped
    /// back to signal space.
    pub fn discrete_flow(&self, signal: &Tensor, eps: &NoiseDraw, revealed: usize) -> Result<Tensor> {
        let bands = self.band_of_flow.len();
        if revealed > bands {
            return Err(Error::invalid(format!(
                "revealed band count {revealed} exceeds {bands}"
            )));
        }
        let data = self.banded.transform().forward_coeffs(signal)?;
        self.check_noise(eps)?;
        let coeffs: Vec<f64> = data
            .iter()
            .zip(&eps.coeffs)
            .enumerate()
            .map(|(i, (&d, &e))| if self.flow_pos[i] < revealed { d } else { e })
            .collect();
        self.banded.transform().inverse_coeffs(&coeffs)
    }

    /// Interpolant coefficients at scale time `k` for a known
    /// (data, noise) pair already in coefficient space.
    pub fn interpolate_coeffs(&self, data: &[f64], eps: &[f64], k_norm: f64) -> Result<Vec<f64>> {
        let coord = self.coordinate(k_norm)?;
        let (mu, _) = self.bump.eval(coord.t)?;
        Ok(data
            .iter()
            .zip(eps)
            .enumerate()
            .map(|(i, (&d, &e))| match self.flow_pos[i].cmp(&coord.flow_index) {
                std::cmp::Ordering::Less => d,
                std::cmp::Ordering::Greater => e,
                std::cmp::Ordering::Equal => mu * d + (1.0 - mu) * e,
            })
            .collect())
    }

    /// The interpolant state at scale time `k`.
    pub fn interpolate(&self, signal: &Tensor, eps: &NoiseDraw, k_norm: f64) -> Result<FlowState> {
        let data = self.banded.transform().forward_coeffs(signal)?;
        self.check_noise(eps)?;
        let coeffs = self.interpolate_coeffs(&data, &eps.coeffs, k_norm)?;
        Ok(FlowState {
            coeffs,
            coord: self.coordinate(k_norm)?,
            direction: self.direction,
        })
    }

    fn velocity_impl(
        &self,
        data: &[f64],
        eps: &[f64],
        k_norm: f64,
        rule: BoundaryRule,
    ) -> Result<Vec<f64>> {
        let coord = self.coordinate(k_norm)?;
        let at_boundary = coord.t == 0.0 || coord.t == 1.0;
        if at_boundary && rule == BoundaryRule::Strict && !self.bump.is_smooth() {
            return Err(Error::invalid(format!(
                "conditional velocity of a linear bump is undefined at the band boundary \
                 k = {k_norm}; evaluate at an interior scale time"
            )));
        }
        let (_, dmu) = self.bump.eval(coord.t)?;
        let gain = dmu / coord.width;
        // Exactly zero outside the active band, by construction.
        let mut v = vec![0.0; data.len()];
        for (i, value) in v.iter_mut().enumerate() {
            if self.flow_pos[i] == coord.flow_index {
                *value = gain * (data[i] - eps[i]);
            }
        }
        Ok(v)
    }

    /// Analytic conditional velocity in coefficient space: `mu'(t)/w` times
    /// (data - noise) on the active band, exactly zero elsewhere.
    pub fn conditional_velocity_coeffs(
        &self,
        data: &[f64],
        eps: &[f64],
        k_norm: f64,
    ) -> Result<Vec<f64>> {
        self.velocity_impl(data, eps, k_norm, BoundaryRule::Strict)
    }

    /// Right-continuous velocity for left-endpoint quadrature; at an exact
    /// band start it uses the incoming band's derivative.
    pub(crate) fn conditional_velocity_right(
        &self,
        data: &[f64],
        eps: &[f64],
        k_norm: f64,
    ) -> Result<Vec<f64>> {
        self.velocity_impl(data, eps, k_norm, BoundaryRule::RightLimit)
    }

    /// Conditional velocity from a signal-space sample, as a 1-D tensor.
    pub fn conditional_velocity(
        &self,
        signal: &Tensor,
        eps: &NoiseDraw,
        k_norm: f64,
    ) -> Result<Tensor> {
        let data = self.banded.transform().forward_coeffs(signal)?;
        self.check_noise(eps)?;
        let v = self.conditional_velocity_coeffs(&data, &eps.coeffs, k_norm)?;
        Tensor::from_vec(v)
    }

    fn check_noise(&self, eps: &NoiseDraw) -> Result<()> {
        if eps.len() != self.coeff_len() {
            return Err(Error::shape(format!(
                "noise length {} does not match coefficient length {}",
                eps.len(),
                self.coeff_len()
            )));
        }
        Ok(())
    }
}
