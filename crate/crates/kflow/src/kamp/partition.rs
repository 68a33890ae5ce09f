//! Grouping of transform coefficients into ordered scale bands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How band boundaries are placed over the native scales of a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionStrategy {
    /// Boundaries uniform in the normalized scale position (Fourier radius
    /// fraction, or scale index midpoint for discrete scales).
    UniformRadius,
    /// Native scales split into contiguous groups of near-equal count.
    UniformLevel,
    /// Band edges placed so each band carries roughly equal mean energy on a
    /// reference dataset.
    EnergyProportional,
}

/// An ordered partition of coefficient slots into scale bands.
///
/// Boundaries live on the normalized scale axis: `0 = b_0 < b_1 < ... < b_S = 1`.
/// Every slot belongs to exactly one band and every band is nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePartition {
    boundaries: Vec<f64>,
    assignment: Vec<usize>,
    band_slots: Vec<Vec<usize>>,
}

impl ScalePartition {
    pub fn new(boundaries: Vec<f64>, assignment: Vec<usize>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::invalid("partition needs at least one band"));
        }
        if boundaries[0] != 0.0 || *boundaries.last().unwrap() != 1.0 {
            return Err(Error::invalid(format!(
                "boundaries must run from 0 to 1, got {boundaries:?}"
            )));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "boundaries must be strictly increasing, got {boundaries:?}"
            )));
        }
        let bands = boundaries.len() - 1;
        let mut band_slots = vec![Vec::new(); bands];
        for (slot, &b) in assignment.iter().enumerate() {
            if b >= bands {
                return Err(Error::invalid(format!(
                    "slot {slot} assigned to band {b}, but only {bands} bands exist"
                )));
            }
            band_slots[b].push(slot);
        }
        if let Some(empty) = band_slots.iter().position(|s| s.is_empty()) {
            return Err(Error::invalid(format!(
                "band {empty} holds no coefficients; use fewer bands"
            )));
        }
        Ok(ScalePartition {
            boundaries,
            assignment,
            band_slots,
        })
    }

    pub fn band_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn coeff_len(&self) -> usize {
        self.assignment.len()
    }

    pub fn band_of_slot(&self, slot: usize) -> usize {
        self.assignment[slot]
    }

    pub fn band_slots(&self, band: usize) -> Result<&[usize]> {
        self.band_slots
            .get(band)
            .map(|v| v.as_slice())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "band id {band} out of range (bands: {})",
                    self.band_count()
                ))
            })
    }

    pub fn band_sizes(&self) -> Vec<usize> {
        self.band_slots.iter().map(|s| s.len()).collect()
    }

    pub fn band_width(&self, band: usize) -> f64 {
        self.boundaries[band + 1] - self.boundaries[band]
    }

    /// The same slots with the band order reversed: band `s` becomes
    /// `S-1-s` and the boundary spacing is mirrored.
    pub fn reversed(&self) -> ScalePartition {
        let bands = self.band_count();
        let boundaries: Vec<f64> = {
            let mut b: Vec<f64> = self.boundaries.iter().map(|&x| 1.0 - x).collect();
            b.reverse();
            b[0] = 0.0;
            *b.last_mut().unwrap() = 1.0;
            b
        };
        let assignment = self.assignment.iter().map(|&s| bands - 1 - s).collect();
        ScalePartition::new(boundaries, assignment).expect("reversal preserves validity")
    }
}

/// Builds an assignment from per-slot scale groups that are unions of
/// consecutive native scales. `scale_of_band[i]` is the first native scale of
/// band i; boundaries are the matching scale-index fractions.
pub(crate) fn partition_from_scale_groups(
    native_scale_ids: &[usize],
    n_native: usize,
    group_starts: &[usize],
) -> Result<ScalePartition> {
    let bands = group_starts.len();
    let mut boundaries = Vec::with_capacity(bands + 1);
    for &g in group_starts {
        boundaries.push(g as f64 / n_native as f64);
    }
    boundaries.push(1.0);
    let band_of_scale = |scale: usize| -> usize {
        // Last group whose start is <= scale; group_starts begins at 0.
        match group_starts.binary_search(&scale) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    };
    let assignment: Vec<usize> = native_scale_ids.iter().map(|&s| band_of_scale(s)).collect();
    ScalePartition::new(boundaries, assignment)
}

/// Contiguous near-equal split of `n_native` scales into `bands` groups.
pub(crate) fn uniform_level_starts(n_native: usize, bands: usize) -> Vec<usize> {
    (0..bands).map(|b| b * n_native / bands).collect()
}

/// Greedy equal-energy split: a band keeps absorbing scales while its
/// cumulative energy stays at or below the proportional target, and every
/// band retains at least one scale.
pub(crate) fn energy_proportional_starts(scale_energy: &[f64], bands: usize) -> Vec<usize> {
    let n = scale_energy.len();
    let total: f64 = scale_energy.iter().sum();
    let mut starts = vec![0usize];
    let mut cum = 0.0;
    let mut scale = 0usize;
    for b in 1..bands {
        let target = total * b as f64 / bands as f64;
        while scale < n - (bands - b) && cum + scale_energy[scale] <= target {
            cum += scale_energy[scale];
            scale += 1;
        }
        if scale == starts[b - 1] {
            cum += scale_energy[scale];
            scale += 1;
        }
        starts.push(scale);
    }
    starts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_boundaries_and_assignment() {
        assert!(ScalePartition::new(vec![0.0, 1.0], vec![0, 0]).is_ok());
        assert!(ScalePartition::new(vec![0.0, 0.5, 1.0], vec![0, 0]).is_err(), "empty band");
        assert!(ScalePartition::new(vec![0.1, 1.0], vec![0]).is_err(), "must start at 0");
        assert!(ScalePartition::new(vec![0.0, 0.5, 0.5, 1.0], vec![0, 1, 2]).is_err());
        assert!(ScalePartition::new(vec![0.0, 1.0], vec![1]).is_err(), "band id range");
    }

    #[test]
    fn reversed_mirrors_bands_and_boundaries() {
        let p = ScalePartition::new(vec![0.0, 0.25, 1.0], vec![0, 1, 1, 1]).unwrap();
        let r = p.reversed();
        assert_eq!(r.boundaries(), &[0.0, 0.75, 1.0]);
        assert_eq!(r.assignment(), &[1, 0, 0, 0]);
        assert_eq!(r.reversed(), p);
    }

    #[test]
    fn uniform_level_split_covers_all_bands() {
        assert_eq!(uniform_level_starts(2, 2), vec![0, 1]);
        assert_eq!(uniform_level_starts(5, 2), vec![0, 2]);
        assert_eq!(uniform_level_starts(7, 3), vec![0, 2, 4]);
    }

    #[test]
    fn energy_split_tracks_mass() {
        // Heavy first scale: the first band should stay small.
        let starts = energy_proportional_starts(&[8.0, 1.0, 1.0, 1.0], 2);
        assert_eq!(starts, vec![0, 1]);
        // Flat energies reduce to near-uniform.
        let starts = energy_proportional_starts(&[1.0; 6], 3);
        assert_eq!(starts, vec![0, 2, 4]);
    }
}
