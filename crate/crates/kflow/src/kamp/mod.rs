//! K-amplitude transforms and scale-band bookkeeping.
//!
//! A transform maps a signal to a flat real coefficient vector in a fixed
//! canonical order and back; a [`ScalePartition`] groups the coefficient
//! slots into ordered scale bands. [`BandedTransform`] bundles the two and
//! provides band projections and band amplitude statistics.

mod fourier;
mod partition;
mod pca;
mod wavelet;

pub use fourier::FourierTransform;
pub use partition::{PartitionStrategy, ScalePartition};
pub use pca::{pca_fit, PcaBasis, PcaTransform};
pub use wavelet::{WaveletFamily, WaveletTransform};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// One of the supported invertible coefficient transforms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transform {
    Fourier(FourierTransform),
    Wavelet(WaveletTransform),
    Pca(PcaTransform),
}

impl Transform {
    pub fn fourier(shape: Vec<usize>) -> Result<Self> {
        Ok(Transform::Fourier(FourierTransform::new(shape)?))
    }

    pub fn wavelet(shape: Vec<usize>, family: WaveletFamily, levels: usize) -> Result<Self> {
        Ok(Transform::Wavelet(WaveletTransform::new(shape, family, levels)?))
    }

    pub fn pca(basis: PcaBasis) -> Result<Self> {
        Ok(Transform::Pca(PcaTransform::new(basis)?))
    }

    /// Restores derived layout caches after deserialization.
    pub fn rebuild_caches(&mut self) {
        if let Transform::Fourier(f) = self {
            f.rebuild_layout();
        }
    }

    /// Stable identifier naming the transform and its geometry.
    pub fn id(&self) -> String {
        match self {
            Transform::Fourier(f) => format!("fourier{:?}", f.shape()),
            Transform::Wavelet(w) => {
                format!("wavelet-{:?}-L{}{:?}", w.family(), w.levels(), w.shape())
            }
            Transform::Pca(p) => format!("pca[{}]", p.dim()),
        }
    }

    pub fn signal_shape(&self) -> Vec<usize> {
        match self {
            Transform::Fourier(f) => f.shape().to_vec(),
            Transform::Wavelet(w) => w.shape().to_vec(),
            Transform::Pca(p) => vec![p.dim()],
        }
    }

    pub fn coeff_len(&self) -> usize {
        match self {
            Transform::Fourier(f) => f.coeff_len(),
            Transform::Wavelet(w) => w.coeff_len(),
            Transform::Pca(p) => p.coeff_len(),
        }
    }

    /// Canonical coefficients of a signal.
    pub fn forward_coeffs(&self, signal: &Tensor) -> Result<Vec<f64>> {
        match self {
            Transform::Fourier(f) => f.forward(signal),
            Transform::Wavelet(w) => w.forward(signal),
            Transform::Pca(p) => p.forward(signal),
        }
    }

    /// Signal reconstructed from canonical coefficients.
    pub fn inverse_coeffs(&self, coeffs: &[f64]) -> Result<Tensor> {
        match self {
            Transform::Fourier(f) => f.inverse(coeffs),
            Transform::Wavelet(w) => w.inverse(coeffs),
            Transform::Pca(p) => p.inverse(coeffs),
        }
    }

    /// Number of distinct native scales (Fourier shells, wavelet levels, or
    /// PCA component ranks).
    pub fn n_native_scales(&self) -> usize {
        match self {
            Transform::Fourier(f) => f.n_native_scales(),
            Transform::Wavelet(w) => w.n_native_scales(),
            Transform::Pca(p) => p.coeff_len(),
        }
    }

    /// Per-slot native scale rank, ascending from the coarsest scale.
    pub fn native_scale_ids(&self) -> Vec<usize> {
        match self {
            Transform::Fourier(f) => f.native_scale_ids(),
            Transform::Wavelet(w) => w.native_scale_ids(),
            Transform::Pca(p) => (0..p.coeff_len()).collect(),
        }
    }

    /// Per-slot normalized scale position in [0, 1]. Fourier slots use their
    /// true radius fraction; discrete scales use the midpoint of their rank.
    pub fn scale_positions(&self) -> Vec<f64> {
        match self {
            Transform::Fourier(f) => {
                let rmax = f.max_radius();
                f.slot_radii().iter().map(|r| r / rmax).collect()
            }
            _ => {
                let n = self.n_native_scales() as f64;
                self.native_scale_ids()
                    .iter()
                    .map(|&s| (s as f64 + 0.5) / n)
                    .collect()
            }
        }
    }
}

/// The coefficient view of one signal: canonical coefficients plus the
/// partition and transform that produced them.
#[derive(Debug, Clone)]
pub struct KAmplitudeRepresentation {
    pub coefficients: Vec<f64>,
    pub partition: ScalePartition,
    pub transform_id: String,
    /// Which bands carry valid data; inversion requires all of them.
    present_bands: Vec<bool>,
}

impl KAmplitudeRepresentation {
    pub fn is_complete(&self) -> bool {
        self.present_bands.iter().all(|&p| p)
    }

    /// A copy with all coefficients outside `keep` zeroed and marked absent.
    pub fn restricted_to_bands(&self, keep: &[usize]) -> Result<KAmplitudeRepresentation> {
        let bands = self.partition.band_count();
        let mut present = vec![false; bands];
        for &b in keep {
            if b >= bands {
                return Err(Error::invalid(format!("band id {b} out of range")));
            }
            present[b] = true;
        }
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, &v)| if present[self.partition.band_of_slot(i)] { v } else { 0.0 })
            .collect();
        Ok(KAmplitudeRepresentation {
            coefficients,
            partition: self.partition.clone(),
            transform_id: self.transform_id.clone(),
            present_bands: present,
        })
    }
}

/// A fitted transform together with its scale partition.
#[derive(Debug, Clone)]
pub struct BandedTransform {
    transform: Transform,
    partition: ScalePartition,
}

/// Builds a [`ScalePartition`] for a transform.
///
/// The `uniform-radius` strategy uses the half-open convention: a slot with
/// normalized scale position rho joins band s iff rho lies in
/// [b_s, b_{s+1}), with the final band closed at 1. The `uniform-level` and
/// `energy-proportional` strategies group whole native scales; the energy
/// strategy needs a reference dataset.
pub fn make_partition(
    transform: &Transform,
    n_bands: usize,
    strategy: PartitionStrategy,
    dataset: Option<&[Tensor]>,
) -> Result<ScalePartition> {
    let native = transform.n_native_scales();
    if n_bands == 0 {
        return Err(Error::invalid("band count must be at least 1"));
    }
    if n_bands > native {
        return Err(Error::invalid(format!(
            "{n_bands} bands exceed the {native} native scales of {}",
            transform.id()
        )));
    }
    match strategy {
        PartitionStrategy::UniformRadius => {
            let boundaries: Vec<f64> = (0..=n_bands).map(|s| s as f64 / n_bands as f64).collect();
            let positions = transform.scale_positions();
            let assignment: Vec<usize> = positions
                .iter()
                .map(|&rho| {
                    let band = (rho * n_bands as f64).floor() as usize;
                    band.min(n_bands - 1)
                })
                .collect();
            ScalePartition::new(boundaries, assignment)
        }
        PartitionStrategy::UniformLevel => {
            let starts = partition::uniform_level_starts(native, n_bands);
            partition::partition_from_scale_groups(&transform.native_scale_ids(), native, &starts)
        }
        PartitionStrategy::EnergyProportional => {
            let dataset = dataset.ok_or_else(|| {
                Error::invalid("energy-proportional partitioning needs a dataset")
            })?;
            if dataset.is_empty() {
                return Err(Error::invalid("energy-proportional dataset is empty"));
            }
            let ids = transform.native_scale_ids();
            let mut energy = vec![0.0; native];
            for sample in dataset {
                let coeffs = transform.forward_coeffs(sample)?;
                for (&scale, &c) in ids.iter().zip(&coeffs) {
                    energy[scale] += c * c;
                }
            }
            let starts = partition::energy_proportional_starts(&energy, n_bands);
            partition::partition_from_scale_groups(&ids, native, &starts)
        }
    }
}

impl BandedTransform {
    pub fn new(transform: Transform, partition: ScalePartition) -> Result<Self> {
        if partition.coeff_len() != transform.coeff_len() {
            return Err(Error::shape(format!(
                "partition covers {} slots but transform {} has {}",
                partition.coeff_len(),
                transform.id(),
                transform.coeff_len()
            )));
        }
        Ok(BandedTransform { transform, partition })
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn partition(&self) -> &ScalePartition {
        &self.partition
    }

    pub fn coeff_len(&self) -> usize {
        self.transform.coeff_len()
    }

    pub fn forward(&self, signal: &Tensor) -> Result<KAmplitudeRepresentation> {
        let coefficients = self.transform.forward_coeffs(signal)?;
        Ok(KAmplitudeRepresentation {
            coefficients,
            partition: self.partition.clone(),
            transform_id: self.transform.id(),
            present_bands: vec![true; self.partition.band_count()],
        })
    }

    pub fn inverse(&self, repr: &KAmplitudeRepresentation) -> Result<Tensor> {
        if repr.transform_id != self.transform.id() {
            return Err(Error::invalid(format!(
                "representation was produced by {}, not {}",
                repr.transform_id,
                self.transform.id()
            )));
        }
        if !repr.is_complete() {
            return Err(Error::invalid(
                "partial representation cannot be inverted; use interpolant masking instead",
            ));
        }
        self.transform.inverse_coeffs(&repr.coefficients)
    }

    /// The component of the signal carried by band `s`.
    ///
    /// Band projections sum to the identity. For the affine PCA transform
    /// the fitted mean (the DC analogue) is attached to band 0 so the sum
    /// property holds.
    pub fn band_project(&self, signal: &Tensor, band: usize) -> Result<Tensor> {
        let bands = self.partition.band_count();
        if band >= bands {
            return Err(Error::invalid(format!(
                "band id {band} out of range (bands: {bands})"
            )));
        }
        let coeffs = self.transform.forward_coeffs(signal)?;
        let masked: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.partition.band_of_slot(i) == band { v } else { 0.0 })
            .collect();
        match &self.transform {
            Transform::Pca(p) => {
                let mut data = p.inverse_linear(&masked)?;
                if band == 0 {
                    for (d, &m) in data.iter_mut().zip(&p.basis().mean) {
                        *d += m;
                    }
                }
                Tensor::new(vec![p.dim()], data)
            }
            _ => self.transform.inverse_coeffs(&masked),
        }
    }

    /// Mean L2 amplitude of each band over a dataset.
    pub fn amplitude_spectrum(&self, dataset: &[Tensor]) -> Result<Vec<f64>> {
        if dataset.is_empty() {
            return Err(Error::invalid("amplitude spectrum of an empty dataset"));
        }
        let bands = self.partition.band_count();
        let mut sums = vec![0.0; bands];
        for sample in dataset {
            let coeffs = self.transform.forward_coeffs(sample)?;
            let mut sq = vec![0.0; bands];
            for (i, &c) in coeffs.iter().enumerate() {
                sq[self.partition.band_of_slot(i)] += c * c;
            }
            for (s, q) in sums.iter_mut().zip(&sq) {
                *s += q.sqrt();
            }
        }
        let n = dataset.len() as f64;
        Ok(sums.into_iter().map(|s| s / n).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    fn haar_2band(len: usize) -> BandedTransform {
        let t = Transform::wavelet(vec![len], WaveletFamily::Haar, 1).unwrap();
        let p = make_partition(&t, 2, PartitionStrategy::UniformLevel, None).unwrap();
        BandedTransform::new(t, p).unwrap()
    }

    #[test]
    fn uniform_radius_partition_on_4x4_grid() {
        let t = Transform::fourier(vec![4, 4]).unwrap();
        let p = make_partition(&t, 2, PartitionStrategy::UniformRadius, None).unwrap();
        assert_eq!(p.boundaries(), &[0.0, 0.5, 1.0]);
        let sizes = p.band_sizes();
        assert_eq!(sizes, vec![5, 11], "shells {{0, 1}} below r = sqrt(2)");
    }

    #[test]
    fn one_level_wavelet_two_bands() {
        let banded = haar_2band(4);
        assert_eq!(banded.partition().band_sizes(), vec![2, 2]);
        assert_eq!(banded.partition().assignment(), &[0, 0, 1, 1]);
    }

    #[test]
    fn single_band_partition_is_degenerate() {
        let t = Transform::fourier(vec![8]).unwrap();
        let p = make_partition(&t, 1, PartitionStrategy::UniformRadius, None).unwrap();
        assert_eq!(p.band_count(), 1);
        assert!(p.assignment().iter().all(|&b| b == 0));
    }

    #[test]
    fn too_many_bands_rejected() {
        let t = Transform::wavelet(vec![4], WaveletFamily::Haar, 1).unwrap();
        assert!(make_partition(&t, 3, PartitionStrategy::UniformLevel, None).is_err());
    }

    #[test]
    fn band_projections_sum_to_identity() {
        let mut rng = SeededRng::new(31, 0);
        let banded = haar_2band(8);
        let x = rng.randn(&[8]).unwrap();
        let mut sum = vec![0.0; 8];
        for band in 0..2 {
            let p = banded.band_project(&x, band).unwrap();
            for (s, &v) in sum.iter_mut().zip(p.data()) {
                *s += v;
            }
        }
        let sum = Tensor::from_vec(sum).unwrap();
        assert!(sum.rel_dist(&x) < 1e-10);
    }

    #[test]
    fn constant_signal_projects_onto_dc_band() {
        let t = Transform::fourier(vec![8]).unwrap();
        let p = make_partition(&t, 2, PartitionStrategy::UniformRadius, None).unwrap();
        let banded = BandedTransform::new(t, p).unwrap();
        let x = Tensor::from_vec(vec![3.0; 8]).unwrap();
        let low = banded.band_project(&x, 0).unwrap();
        let high = banded.band_project(&x, 1).unwrap();
        assert!(low.rel_dist(&x) < 1e-12);
        assert!(high.norm() < 1e-12);
    }

    #[test]
    fn band_projections_mutually_orthogonal() {
        let mut rng = SeededRng::new(8, 3);
        let t = Transform::fourier(vec![8, 8]).unwrap();
        let p = make_partition(&t, 3, PartitionStrategy::UniformRadius, None).unwrap();
        let banded = BandedTransform::new(t, p).unwrap();
        let x = rng.randn(&[8, 8]).unwrap();
        let projections: Vec<Tensor> =
            (0..3).map(|s| banded.band_project(&x, s).unwrap()).collect();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let dot: f64 = projections[i]
                    .data()
                    .iter()
                    .zip(projections[j].data())
                    .map(|(a, b)| a * b)
                    .sum();
                assert!(dot.abs() < 1e-8 * x.norm() * x.norm(), "bands {i},{j}: {dot}");
            }
        }
    }

    #[test]
    fn invalid_band_id_rejected() {
        let banded = haar_2band(4);
        let x = Tensor::from_vec(vec![1.0; 4]).unwrap();
        assert!(banded.band_project(&x, 2).is_err());
    }

    #[test]
    fn partial_representation_cannot_invert() {
        let banded = haar_2band(4);
        let x = Tensor::from_vec(vec![4.0, 2.0, 6.0, 2.0]).unwrap();
        let repr = banded.forward(&x).unwrap();
        let restricted = repr.restricted_to_bands(&[0]).unwrap();
        assert!(!restricted.is_complete());
        assert!(banded.inverse(&restricted).is_err());
        assert!(banded.inverse(&repr).is_ok());
    }

    #[test]
    fn amplitude_spectrum_of_zero_tensor_is_zero() {
        let banded = haar_2band(4);
        let z = Tensor::zeros(vec![4]).unwrap();
        let spec = banded.amplitude_spectrum(&[z]).unwrap();
        assert_eq!(spec, vec![0.0, 0.0]);
        assert!(banded.amplitude_spectrum(&[]).is_err());
    }

    #[test]
    fn round_trips_for_all_transforms() {
        let mut rng = SeededRng::new(500, 0);
        let x2d = rng.randn(&[8, 8]).unwrap();
        for t in [
            Transform::fourier(vec![8, 8]).unwrap(),
            Transform::wavelet(vec![8, 8], WaveletFamily::Db6, 2).unwrap(),
        ] {
            let c = t.forward_coeffs(&x2d).unwrap();
            let back = t.inverse_coeffs(&c).unwrap();
            assert!(back.rel_dist(&x2d) < 1e-8, "{}", t.id());
        }
        let samples: Vec<Tensor> = (0..12).map(|_| rng.randn(&[6]).unwrap()).collect();
        let basis = pca_fit(&samples, 6).unwrap();
        let t = Transform::pca(basis).unwrap();
        let x = rng.randn(&[6]).unwrap();
        let back = t.inverse_coeffs(&t.forward_coeffs(&x).unwrap()).unwrap();
        assert!(back.rel_dist(&x) < 1e-8);
    }
}
