//! Radial-shell Fourier transform with a real canonical coefficient layout.
//!
//! The DFT of a real signal is Hermitian-symmetric, so only half the
//! spectrum is free. The canonical layout walks the frequency lattice in
//! row-major order and emits, per lattice point:
//!
//! - one slot holding `Re X` for self-conjugate points (DC and Nyquist
//!   corners, where the spectrum is real), and
//! - two slots holding `sqrt(2) * Re X` and `sqrt(2) * Im X` for the first
//!   point of every conjugate pair (the partner is skipped).
//!
//! The sqrt(2) weight makes the layout an isometry of R^N: the squared norm
//! of the coefficient vector equals the squared norm of the signal, and
//! i.i.d. noise drawn per slot maps back to a real Gaussian field.
//!
//! Each slot carries the radius `r = sqrt(sum f_i^2)` of its lattice point,
//! with signed frequencies and the Nyquist line counted as `+N/2` so that
//! conjugate pairs share a radius.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dft_forward, dft_inverse_complex, ComplexTensor, Tensor};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotKind {
    SelfConjugate,
    PairRe,
    PairIm,
}

#[derive(Debug, Clone)]
struct Slot {
    /// Flat index of the representative lattice point.
    lattice: usize,
    kind: SlotKind,
    /// Squared radius as an exact integer, for shell identity.
    radius_sq: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierTransform {
    shape: Vec<usize>,
    #[serde(skip)]
    slots: Vec<Slot>,
    #[serde(skip)]
    /// For each lattice point: position of its (Re) slot, or the partner's.
    conj_of: Vec<usize>,
}

impl FourierTransform {
    pub fn new(shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::shape(format!(
                "Fourier transform supports 1-D and 2-D shapes, got {shape:?}"
            )));
        }
        for &n in &shape {
            if !n.is_power_of_two() {
                return Err(Error::shape(format!(
                    "axis length {n} is not a power of two"
                )));
            }
        }
        let mut t = FourierTransform {
            shape,
            slots: Vec::new(),
            conj_of: Vec::new(),
        };
        t.rebuild_layout();
        Ok(t)
    }

    /// Recomputes the derived slot layout (also used after deserialization).
    pub(crate) fn rebuild_layout(&mut self) {
        let n_total: usize = self.shape.iter().product();
        let mut conj_of = vec![0usize; n_total];
        let mut slots = Vec::with_capacity(n_total);
        for flat in 0..n_total {
            let idx = self.unflatten(flat);
            let conj: usize = self.flatten_conjugate(&idx);
            conj_of[flat] = conj;
            if conj == flat {
                slots.push(Slot {
                    lattice: flat,
                    kind: SlotKind::SelfConjugate,
                    radius_sq: self.radius_sq(&idx),
                });
            } else if flat < conj {
                let r = self.radius_sq(&idx);
                slots.push(Slot {
                    lattice: flat,
                    kind: SlotKind::PairRe,
                    radius_sq: r,
                });
                slots.push(Slot {
                    lattice: flat,
                    kind: SlotKind::PairIm,
                    radius_sq: r,
                });
            }
        }
        debug_assert_eq!(slots.len(), n_total);
        self.slots = slots;
        self.conj_of = conj_of;
    }

    fn unflatten(&self, flat: usize) -> Vec<usize> {
        match self.shape.as_slice() {
            [_] => vec![flat],
            [_, c] => vec![flat / c, flat % c],
            _ => unreachable!(),
        }
    }

    fn flatten_conjugate(&self, idx: &[usize]) -> usize {
        let conj: Vec<usize> = idx
            .iter()
            .zip(&self.shape)
            .map(|(&i, &n)| (n - i) % n)
            .collect();
        match self.shape.as_slice() {
            [_] => conj[0],
            [_, c] => conj[0] * c + conj[1],
            _ => unreachable!(),
        }
    }

    /// Squared shell radius with signed frequencies; the Nyquist index maps
    /// to +N/2.
    fn radius_sq(&self, idx: &[usize]) -> u64 {
        idx.iter()
            .zip(&self.shape)
            .map(|(&i, &n)| {
                let f = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
                (f * f) as u64
            })
            .sum()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn coeff_len(&self) -> usize {
        self.slots.len()
    }

    /// Largest representable shell radius of the grid (the Nyquist corner).
    pub fn max_radius(&self) -> f64 {
        let r2: u64 = self.shape.iter().map(|&n| ((n / 2) * (n / 2)) as u64).sum();
        (r2 as f64).sqrt()
    }

    /// Shell radius of every canonical slot.
    pub fn slot_radii(&self) -> Vec<f64> {
        self.slots.iter().map(|s| (s.radius_sq as f64).sqrt()).collect()
    }

    /// Whether `slot` is the real half of a conjugate pair (its imaginary
    /// partner is the next slot); self-conjugate slots return false.
    pub fn slot_is_pair_start(&self, slot: usize) -> bool {
        matches!(self.slots[slot].kind, SlotKind::PairRe)
    }

    /// Distinct-shell rank of every canonical slot (0 = DC shell).
    pub fn native_scale_ids(&self) -> Vec<usize> {
        let mut distinct: Vec<u64> = self.slots.iter().map(|s| s.radius_sq).collect();
        distinct.sort_unstable();
        distinct.dedup();
        self.slots
            .iter()
            .map(|s| distinct.binary_search(&s.radius_sq).unwrap())
            .collect()
    }

    pub fn n_native_scales(&self) -> usize {
        let mut distinct: Vec<u64> = self.slots.iter().map(|s| s.radius_sq).collect();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.len()
    }

    pub fn forward(&self, signal: &Tensor) -> Result<Vec<f64>> {
        if signal.shape() != self.shape.as_slice() {
            return Err(Error::shape(format!(
                "signal shape {:?} does not match transform shape {:?}",
                signal.shape(),
                self.shape
            )));
        }
        let spectrum = dft_forward(signal)?;
        let data = spectrum.data();
        Ok(self
            .slots
            .iter()
            .map(|slot| match slot.kind {
                SlotKind::SelfConjugate => data[slot.lattice].re,
                SlotKind::PairRe => SQRT2 * data[slot.lattice].re,
                SlotKind::PairIm => SQRT2 * data[slot.lattice].im,
            })
            .collect())
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Result<Tensor> {
        if coeffs.len() != self.slots.len() {
            return Err(Error::shape(format!(
                "coefficient length {} does not match transform ({})",
                coeffs.len(),
                self.slots.len()
            )));
        }
        let n_total: usize = self.shape.iter().product();
        let mut spectrum = vec![Complex64::default(); n_total];
        let mut i = 0;
        while i < self.slots.len() {
            let slot = &self.slots[i];
            match slot.kind {
                SlotKind::SelfConjugate => {
                    spectrum[slot.lattice] = Complex64::new(coeffs[i], 0.0);
                    i += 1;
                }
                SlotKind::PairRe => {
                    let re = coeffs[i] / SQRT2;
                    let im = coeffs[i + 1] / SQRT2;
                    let x = Complex64::new(re, im);
                    spectrum[slot.lattice] = x;
                    spectrum[self.conj_of[slot.lattice]] = x.conj();
                    i += 2;
                }
                SlotKind::PairIm => unreachable!("Im slot always follows its Re slot"),
            }
        }
        let spectrum = ComplexTensor::new(self.shape.clone(), spectrum)?;
        let complex = dft_inverse_complex(&spectrum);
        Tensor::new(
            self.shape.clone(),
            complex.data().iter().map(|c| c.re).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    #[test]
    fn layout_has_signal_length_and_isometry() {
        let mut rng = SeededRng::new(9, 0);
        for shape in [vec![16], vec![8, 8], vec![4, 16]] {
            let t = FourierTransform::new(shape.clone()).unwrap();
            assert_eq!(t.coeff_len(), shape.iter().product::<usize>());
            let x = rng.randn(&shape).unwrap();
            let c = t.forward(&x).unwrap();
            let coeff_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(
                (coeff_norm - x.norm()).abs() < 1e-10 * x.norm(),
                "canonical layout must be an isometry"
            );
            let back = t.inverse(&c).unwrap();
            assert!(back.rel_dist(&x) < 1e-10);
        }
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let t = FourierTransform::new(vec![4]).unwrap();
        let x = Tensor::from_vec(vec![1.0; 4]).unwrap();
        let c = t.forward(&x).unwrap();
        let radii = t.slot_radii();
        for (v, r) in c.iter().zip(&radii) {
            if *r == 0.0 {
                assert!((v - 2.0).abs() < 1e-12);
            } else {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shell_counts_on_4x4_grid() {
        // Signed frequencies per axis are {0, 1, 2, -1}; shells with r < sqrt(2)
        // are r = 0 (1 point) and r = 1 (4 points).
        let t = FourierTransform::new(vec![4, 4]).unwrap();
        let radii = t.slot_radii();
        let below: usize = radii.iter().filter(|&&r| r < SQRT2).count();
        assert_eq!(below, 5);
        assert_eq!(radii.len() - below, 11);
        assert!((t.max_radius() - (8.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn noise_in_layout_inverts_to_real_field_of_same_norm() {
        let t = FourierTransform::new(vec![8, 8]).unwrap();
        let mut rng = SeededRng::new(4, 4);
        let eps = rng.normal_vec(t.coeff_len());
        let field = t.inverse(&eps).unwrap();
        let n1 = eps.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((field.norm() - n1).abs() < 1e-10 * n1);
        let round = t.forward(&field).unwrap();
        for (a, b) in round.iter().zip(&eps) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
