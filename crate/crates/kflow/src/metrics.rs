//! Quantitative evaluation: Frechet distances over pluggable feature maps,
//! class-conditional FID and the class-dropping ratio, k-NN recall, energy
//! distance, and trajectory projection ratios.
//!
//! Feature maps stand in for large pretrained feature extractors at desk
//! scale; every report names the map in use, and the resulting numbers are
//! comparable only within one map.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolant::NoiseDraw;
use crate::kamp::{pca_fit, PcaBasis};
use crate::numeric::{eigh_symmetric, SeededRng, Tensor};
use crate::sampling::{integrate, SamplerConfig};
use crate::training::Checkpoint;

/// Deterministic feature extractor applied before distribution metrics.
#[derive(Debug, Clone)]
pub enum FeatureMap {
    /// Flatten the raw tensor.
    IdentityFlatten,
    /// Project onto a PCA basis fitted on real data.
    Pca { basis: PcaBasis },
    /// Fixed random projection to `dim` features.
    RandomProjection {
        matrix: Vec<f64>,
        input_dim: usize,
        dim: usize,
        seed: u64,
    },
}

impl FeatureMap {
    pub fn pca_from(real: &[Tensor], dim: usize) -> Result<Self> {
        Ok(FeatureMap::Pca {
            basis: pca_fit(real, dim)?,
        })
    }

    pub fn random_projection(input_dim: usize, dim: usize, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed, 0);
        let scale = 1.0 / (dim as f64).sqrt();
        FeatureMap::RandomProjection {
            matrix: (0..dim * input_dim)
                .map(|_| scale * rng.standard_normal())
                .collect(),
            input_dim,
            dim,
            seed,
        }
    }

    /// Stable identifier recorded in reports.
    pub fn id(&self) -> String {
        match self {
            FeatureMap::IdentityFlatten => "identity-flatten".to_string(),
            FeatureMap::Pca { basis } => format!("pca-{}", basis.n_components()),
            FeatureMap::RandomProjection { dim, seed, .. } => {
                format!("random-projection-{dim}-seed{seed}")
            }
        }
    }

    pub fn apply(&self, sample: &Tensor) -> Result<Vec<f64>> {
        match self {
            FeatureMap::IdentityFlatten => Ok(sample.data().to_vec()),
            FeatureMap::Pca { basis } => {
                if sample.len() != basis.dim {
                    return Err(Error::shape(format!(
                        "sample length {} does not match PCA feature map ({})",
                        sample.len(),
                        basis.dim
                    )));
                }
                Ok((0..basis.n_components())
                    .map(|j| {
                        basis
                            .component(j)
                            .iter()
                            .zip(sample.data().iter().zip(&basis.mean))
                            .map(|(&c, (&v, &m))| c * (v - m))
                            .sum()
                    })
                    .collect())
            }
            FeatureMap::RandomProjection {
                matrix,
                input_dim,
                dim,
                ..
            } => {
                if sample.len() != *input_dim {
                    return Err(Error::shape(format!(
                        "sample length {} does not match projection input ({input_dim})",
                        sample.len()
                    )));
                }
                Ok((0..*dim)
                    .map(|r| {
                        matrix[r * input_dim..(r + 1) * input_dim]
                            .iter()
                            .zip(sample.data())
                            .map(|(&w, &v)| w * v)
                            .sum()
                    })
                    .collect())
            }
        }
    }

    pub fn features(&self, samples: &[Tensor]) -> Result<Vec<Vec<f64>>> {
        samples.iter().map(|s| self.apply(s)).collect()
    }
}

/// Fitted Gaussian moments of a feature set.
#[derive(Debug, Clone)]
pub struct FidStats {
    pub mean: Vec<f64>,
    /// d x d covariance, 1/(n-1) convention, row-major.
    pub cov: Vec<f64>,
    pub dim: usize,
}

/// Moments of a feature matrix; needs at least dim + 1 samples.
pub fn fit_stats(features: &[Vec<f64>]) -> Result<FidStats> {
    if features.is_empty() {
        return Err(Error::invalid("cannot fit moments of an empty feature set"));
    }
    let dim = features[0].len();
    if features.len() < dim + 1 {
        return Err(Error::invalid(format!(
            "need at least {} samples to fit {dim}-dimensional moments, got {}",
            dim + 1,
            features.len()
        )));
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        for (m, &v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = vec![0.0; dim * dim];
    for f in features {
        for i in 0..dim {
            let ci = f[i] - mean[i];
            for j in i..dim {
                cov[i * dim + j] += ci * (f[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / (n - 1.0);
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    Ok(FidStats { mean, cov, dim })
}

fn mat_mul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

/// Symmetric PSD square root by eigendecomposition; negative eigenvalues are
/// clamped at zero and reported when they exceed the tolerance.
fn sqrt_psd(sym: &[f64], d: usize, label: &str, warnings: &mut Vec<String>) -> Result<Vec<f64>> {
    let m = Tensor::new(vec![d, d], sym.to_vec())?;
    let (vals, vecs) = eigh_symmetric(&m)?;
    let max = vals.iter().cloned().fold(0.0f64, f64::max);
    let floor = -1e-8 * max.max(1.0);
    if let Some(bad) = vals.iter().find(|&&v| v < floor) {
        warnings.push(format!(
            "{label}: eigenvalue {bad:.3e} clamped to zero (rank deficiency beyond tolerance)"
        ));
    }
    let mut out = vec![0.0; d * d];
    for c in 0..d {
        let s = vals[c].max(0.0).sqrt();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] += s * vecs.at2(i, c) * vecs.at2(j, c);
            }
        }
    }
    Ok(out)
}

/// A metric value plus any numerical warnings gathered on the way.
#[derive(Debug, Clone)]
pub struct FidValue {
    pub value: f64,
    pub warnings: Vec<String>,
}

/// Frechet distance between the fitted Gaussians of two feature sets.
pub fn frechet_distance(a: &FidStats, b: &FidStats) -> Result<FidValue> {
    if a.dim != b.dim {
        return Err(Error::shape("feature dimensions differ between sides"));
    }
    let d = a.dim;
    let mut warnings = Vec::new();
    let mean_sq: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let tr_a: f64 = (0..d).map(|i| a.cov[i * d + i]).sum();
    let tr_b: f64 = (0..d).map(|i| b.cov[i * d + i]).sum();
    // tr sqrt(Sa Sb) through the symmetric product sqrt(Sa)^T Sb sqrt(Sa).
    let sqrt_a = sqrt_psd(&a.cov, d, "first covariance", &mut warnings)?;
    let inner = mat_mul(&sqrt_a, &mat_mul(&b.cov, &sqrt_a, d), d);
    // Symmetrize away the multiplication roundoff.
    let mut sym = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            sym[i * d + j] = 0.5 * (inner[i * d + j] + inner[j * d + i]);
        }
    }
    let m = Tensor::new(vec![d, d], sym)?;
    let (vals, _) = eigh_symmetric(&m)?;
    let max = vals.iter().cloned().fold(0.0f64, f64::max);
    let floor = -1e-8 * max.max(1.0);
    if let Some(bad) = vals.iter().find(|&&v| v < floor) {
        warnings.push(format!(
            "cross covariance: eigenvalue {bad:.3e} clamped to zero"
        ));
    }
    let tr_cross: f64 = vals.iter().map(|&v| v.max(0.0).sqrt()).sum();
    let raw = mean_sq + tr_a + tr_b - 2.0 * tr_cross;
    let value = if raw < 0.0 {
        if raw < -1e-6 {
            warnings.push(format!("Frechet distance {raw:.3e} clamped to zero"));
        }
        0.0
    } else {
        raw
    };
    Ok(FidValue { value, warnings })
}

/// FID between two sample sets under a feature map.
pub fn fid(real: &[Tensor], generated: &[Tensor], map: &FeatureMap) -> Result<FidValue> {
    let fr = fit_stats(&map.features(real)?)?;
    let fg = fit_stats(&map.features(generated)?)?;
    frechet_distance(&fr, &fg)
}

/// Unweighted mean of per-class FIDs. Every requested class must be present
/// on both sides; classes are drawn uniformly without replacement when a
/// subset size is given.
pub fn class_conditional_fid(
    real_by_class: &BTreeMap<usize, Vec<Tensor>>,
    gen_by_class: &BTreeMap<usize, Vec<Tensor>>,
    map: &FeatureMap,
    subset: Option<(usize, u64)>,
) -> Result<FidValue> {
    let mut classes: Vec<usize> = real_by_class.keys().copied().collect();
    if classes.is_empty() {
        return Err(Error::invalid("no classes to evaluate"));
    }
    if let Some((count, seed)) = subset {
        if count < classes.len() {
            let mut rng = SeededRng::new(seed, 0);
            let mut pool = classes;
            let mut picked = Vec::with_capacity(count);
            for _ in 0..count {
                picked.push(pool.remove(rng.index(pool.len())));
            }
            picked.sort_unstable();
            classes = picked;
        }
    }
    let mut total = 0.0;
    let mut warnings = Vec::new();
    for &c in &classes {
        let real = real_by_class
            .get(&c)
            .ok_or_else(|| Error::label(format!("class {c} missing from the real set")))?;
        let gen = gen_by_class
            .get(&c)
            .ok_or_else(|| Error::label(format!("class {c} missing from the generated set")))?;
        let v = fid(real, gen, map)?;
        total += v.value;
        warnings.extend(v.warnings.into_iter().map(|w| format!("class {c}: {w}")));
    }
    Ok(FidValue {
        value: total / classes.len() as f64,
        warnings,
    })
}

/// Per-class outcome of the class-dropping study.
#[derive(Debug, Clone, Serialize)]
pub struct ClassCdr {
    pub class: usize,
    pub fid_kept: f64,
    pub fid_dropped: f64,
    /// kept / dropped; absent when the dropped-condition FID is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CdrReport {
    pub value: f64,
    pub per_class: Vec<ClassCdr>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

/// Class-dropping ratio: the expectation over classes of the FID with the
/// condition kept throughout divided by the FID with the condition dropped
/// after the initial `rho` fraction of scale time. Both runs share noise
/// draws so the ratio isolates the dropping effect.
pub fn cdr(
    checkpoint: &Checkpoint,
    real_by_class: &BTreeMap<usize, Vec<Tensor>>,
    rho: f64,
    sampler: &SamplerConfig,
    map: &FeatureMap,
    samples_per_class: usize,
) -> Result<CdrReport> {
    if !checkpoint.model.is_conditional() {
        return Err(Error::label(
            "class-dropping ratio needs a conditional checkpoint".to_string(),
        ));
    }
    if real_by_class.is_empty() {
        return Err(Error::invalid("no classes to evaluate"));
    }
    let n = checkpoint.system.coeff_len();
    let kept_cfg = SamplerConfig { rho: 1.0, ..*sampler };
    let dropped_cfg = SamplerConfig { rho, ..*sampler };

    let mut per_class = Vec::new();
    let mut notes = Vec::new();
    let mut warnings = Vec::new();
    let mut total = 0.0;
    let mut counted = 0usize;
    for (&class, real) in real_by_class {
        let mut kept = Vec::with_capacity(samples_per_class);
        let mut dropped = Vec::with_capacity(samples_per_class);
        for i in 0..samples_per_class {
            // Paired noise: the same draw feeds both runs.
            let stream = (class as u64) * samples_per_class as u64 + i as u64;
            let eps = NoiseDraw::standard_normal(sampler.seed, stream, n);
            kept.push(integrate(checkpoint, &eps, &kept_cfg, Some(class))?);
            dropped.push(integrate(checkpoint, &eps, &dropped_cfg, Some(class))?);
        }
        let fid_kept = fid(real, &kept, map)?;
        let fid_dropped = fid(real, &dropped, map)?;
        warnings.extend(fid_kept.warnings.iter().map(|w| format!("class {class}: {w}")));
        warnings.extend(fid_dropped.warnings.iter().map(|w| format!("class {class}: {w}")));
        let ratio = if fid_dropped.value == 0.0 {
            notes.push(format!(
                "class {class}: dropped-condition FID is zero; class skipped"
            ));
            None
        } else {
            let r = fid_kept.value / fid_dropped.value;
            total += r;
            counted += 1;
            Some(r)
        };
        per_class.push(ClassCdr {
            class,
            fid_kept: fid_kept.value,
            fid_dropped: fid_dropped.value,
            ratio,
        });
    }
    if counted == 0 {
        return Err(Error::numeric(
            "every class was skipped (zero dropped-condition FID)".to_string(),
        ));
    }
    Ok(CdrReport {
        value: total / counted as f64,
        per_class,
        notes,
        warnings,
    })
}

/// Fraction of real samples inside the k-NN manifold of the generated set.
/// Zero-radius spheres (duplicate generated points) cover nothing.
pub fn recall(real: &[Tensor], generated: &[Tensor], map: &FeatureMap, k_nn: usize) -> Result<f64> {
    if k_nn == 0 {
        return Err(Error::invalid("neighborhood size must be at least 1"));
    }
    if real.len() < k_nn + 1 || generated.len() < k_nn + 1 {
        return Err(Error::invalid(format!(
            "recall needs at least {} samples on each side",
            k_nn + 1
        )));
    }
    let fr = map.features(real)?;
    let fg = map.features(generated)?;
    let m = fg.len();
    // k-NN radius of each generated point among the other generated points.
    let mut radii = vec![0.0; m];
    for i in 0..m {
        let mut dists: Vec<f64> = (0..m)
            .filter(|&j| j != i)
            .map(|j| euclid(&fg[i], &fg[j]))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii[i] = dists[k_nn - 1];
    }
    let covered = fr
        .iter()
        .filter(|x| {
            fg.iter()
                .zip(&radii)
                .any(|(g, &r)| r > 0.0 && euclid(x, g) <= r)
        })
        .count();
    Ok(covered as f64 / fr.len() as f64)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Energy distance between two sample sets (all-pairs V-statistic):
/// `2 E|X-Y| - E|X-X'| - E|Y-Y'|`.
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("energy distance of an empty set"));
    }
    let cross: f64 = a
        .iter()
        .map(|x| b.iter().map(|y| euclid(x, y)).sum::<f64>())
        .sum::<f64>()
        / (a.len() * b.len()) as f64;
    let within_a: f64 = a
        .iter()
        .map(|x| a.iter().map(|y| euclid(x, y)).sum::<f64>())
        .sum::<f64>()
        / (a.len() * a.len()) as f64;
    let within_b: f64 = b
        .iter()
        .map(|x| b.iter().map(|y| euclid(x, y)).sum::<f64>())
        .sum::<f64>()
        / (b.len() * b.len()) as f64;
    Ok(2.0 * cross - within_a - within_b)
}

/// Projection curve of a trajectory: per state, one minus the relative
/// reconstruction error of the 2-component PCA fitted on the trajectory
/// itself.
#[derive(Debug, Clone)]
pub struct ProjectionCurve {
    /// (scale time, reconstruction ratio) per trajectory state.
    pub points: Vec<(f64, f64)>,
    pub flags: Vec<String>,
}

pub fn trajectory_projection_ratio(trajectory: &[(f64, Vec<f64>)]) -> Result<ProjectionCurve> {
    if trajectory.len() < 3 {
        return Err(Error::invalid(format!(
            "projection ratio needs at least 3 trajectory states, got {}",
            trajectory.len()
        )));
    }
    let states: Vec<Tensor> = trajectory
        .iter()
        .map(|(_, coeffs)| Tensor::from_vec(coeffs.clone()))
        .collect::<Result<_>>()?;
    let dim = states[0].len();
    if dim < 2 {
        return Err(Error::invalid("trajectory states must have dimension >= 2"));
    }
    let basis = pca_fit(&states, 2)?;
    let mut points = Vec::with_capacity(trajectory.len());
    let mut flags = Vec::new();
    for ((k, coeffs), state) in trajectory.iter().zip(&states) {
        let norm = state.norm();
        if norm == 0.0 {
            flags.push(format!("state at k = {k} has zero norm; ratio set to 1"));
            points.push((*k, 1.0));
            continue;
        }
        let centered: Vec<f64> = coeffs.iter().zip(&basis.mean).map(|(&v, &m)| v - m).collect();
        let mut recon = vec![0.0; dim];
        for j in 0..2 {
            let comp = basis.component(j);
            let c: f64 = centered.iter().zip(comp).map(|(&v, &w)| v * w).sum();
            for (r, &w) in recon.iter_mut().zip(comp) {
                *r += c * w;
            }
        }
        let err: f64 = centered
            .iter()
            .zip(&recon)
            .map(|(&v, &r)| (v - r) * (v - r))
            .sum::<f64>()
            .sqrt();
        points.push((*k, 1.0 - err / norm));
    }
    Ok(ProjectionCurve { points, flags })
}

/// Serializable evaluation report (the JSON external interface).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_class: BTreeMap<String, f64>,
    pub feature_map: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seeds: Vec<u64>,
    pub sample_counts: BTreeMap<String, usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec()).unwrap()
    }

    fn cluster(center: &[f64], n: usize, seed: u64) -> Vec<Tensor> {
        let mut rng = SeededRng::new(seed, 0);
        (0..n)
            .map(|_| {
                t(&center
                    .iter()
                    .map(|&c| c + 0.1 * rng.standard_normal())
                    .collect::<Vec<_>>())
            })
            .collect()
    }

    #[test]
    fn fid_zero_on_identical_sets() {
        let a = cluster(&[1.0, -2.0], 32, 1);
        let v = fid(&a, &a, &FeatureMap::IdentityFlatten).unwrap();
        assert!(v.value.abs() <= 1e-8, "{}", v.value);
    }

    #[test]
    fn fid_one_dimensional_formula() {
        // Exact sample moments: mean 0 var 1 vs mean 1 var 1.
        let real = vec![t(&[-1.0]), t(&[0.0]), t(&[1.0])];
        let gen = vec![t(&[0.0]), t(&[1.0]), t(&[2.0])];
        let v = fid(&real, &gen, &FeatureMap::IdentityFlatten).unwrap();
        assert!((v.value - 1.0).abs() < 1e-10, "{}", v.value);
    }

    #[test]
    fn fid_mean_shift_two_dimensional() {
        // Identical covariance, mean shift (1, 0): FID = 1. Constructed
        // points realize covariance I exactly.
        let s = (1.5f64).sqrt();
        let base = vec![t(&[s, 0.0]), t(&[-s, 0.0]), t(&[0.0, s]), t(&[0.0, -s])];
        let shifted: Vec<Tensor> = base
            .iter()
            .map(|x| t(&[x.data()[0] + 1.0, x.data()[1]]))
            .collect();
        let v = fid(&base, &shifted, &FeatureMap::IdentityFlatten).unwrap();
        assert!((v.value - 1.0).abs() < 1e-8, "{}", v.value);
    }

    #[test]
    fn fid_is_symmetric_and_nonnegative() {
        let a = cluster(&[0.0, 0.0, 1.0], 24, 2);
        let b = cluster(&[0.5, -0.5, 1.5], 24, 3);
        let ab = fid(&a, &b, &FeatureMap::IdentityFlatten).unwrap().value;
        let ba = fid(&b, &a, &FeatureMap::IdentityFlatten).unwrap().value;
        assert!(ab >= 0.0);
        assert!((ab - ba).abs() <= 1e-8 * ab.max(1.0));
    }

    #[test]
    fn fid_needs_enough_samples() {
        let a = cluster(&[0.0, 0.0], 2, 4);
        assert!(fid(&a, &a, &FeatureMap::IdentityFlatten).is_err());
    }

    #[test]
    fn class_fid_mean_and_missing_class() {
        let mut real = BTreeMap::new();
        let mut gen = BTreeMap::new();
        real.insert(0, cluster(&[0.0], 8, 5));
        real.insert(1, cluster(&[4.0], 8, 6));
        gen.insert(0, cluster(&[0.0], 8, 7));
        gen.insert(1, cluster(&[4.0], 8, 8));
        let both = class_conditional_fid(&real, &gen, &FeatureMap::IdentityFlatten, None).unwrap();
        let f0 = fid(&real[&0], &gen[&0], &FeatureMap::IdentityFlatten).unwrap().value;
        let f1 = fid(&real[&1], &gen[&1], &FeatureMap::IdentityFlatten).unwrap().value;
        assert!((both.value - 0.5 * (f0 + f1)).abs() <= 1e-12);

        gen.remove(&1);
        assert!(class_conditional_fid(&real, &gen, &FeatureMap::IdentityFlatten, None).is_err());
    }

    #[test]
    fn single_class_equals_plain_fid() {
        let mut real = BTreeMap::new();
        let mut gen = BTreeMap::new();
        real.insert(3, cluster(&[1.0, 1.0], 16, 9));
        gen.insert(3, cluster(&[1.2, 0.9], 16, 10));
        let cc = class_conditional_fid(&real, &gen, &FeatureMap::IdentityFlatten, None).unwrap();
        let plain = fid(&real[&3], &gen[&3], &FeatureMap::IdentityFlatten).unwrap();
        assert!((cc.value - plain.value).abs() <= 1e-12);
    }

    #[test]
    fn recall_identity_and_disjoint() {
        let a = cluster(&[0.0, 0.0], 16, 11);
        assert_eq!(recall(&a, &a, &FeatureMap::IdentityFlatten, 3).unwrap(), 1.0);
        let far = cluster(&[100.0, 100.0], 16, 12);
        assert_eq!(recall(&a, &far, &FeatureMap::IdentityFlatten, 3).unwrap(), 0.0);
    }

    #[test]
    fn recall_superset_coverage_and_monotonicity() {
        let real = cluster(&[0.0, 0.0], 24, 13);
        let mut gen = real.clone();
        gen.extend(cluster(&[50.0, 50.0], 8, 14));
        let r = recall(&real, &gen, &FeatureMap::IdentityFlatten, 3).unwrap();
        assert_eq!(r, 1.0, "superset of the real points still covers them");

        let gen2 = cluster(&[0.3, 0.0], 24, 15);
        let mut last = 0.0;
        for k in 1..=5 {
            let r = recall(&real, &gen2, &FeatureMap::IdentityFlatten, k).unwrap();
            assert!(r >= last, "recall must not decrease in k");
            last = r;
        }
    }

    #[test]
    fn recall_degenerate_duplicates_cover_nothing() {
        let real = cluster(&[0.0, 0.0], 8, 16);
        let gen: Vec<Tensor> = (0..8).map(|_| t(&[0.0, 0.0])).collect();
        let r = recall(&real, &gen, &FeatureMap::IdentityFlatten, 3).unwrap();
        assert_eq!(r, 0.0, "zero radii mean an empty manifold");
    }

    #[test]
    fn projection_ratio_planar_trajectory_is_one() {
        let traj: Vec<(f64, Vec<f64>)> = (0..8)
            .map(|i| {
                let a = i as f64;
                (a / 7.0, vec![a.cos() * 3.0, a.sin() * 2.0, 0.0])
            })
            .collect();
        let curve = trajectory_projection_ratio(&traj).unwrap();
        for (k, r) in curve.points {
            assert!((r - 1.0).abs() <= 1e-8, "k = {k}: ratio {r}");
        }
    }

    #[test]
    fn projection_ratio_orthogonal_excursion() {
        // In-plane anchors plus four symmetric excursions (3, 4, +/-5): the
        // fitted plane stays z = 0, each excursion state has in-plane norm 5
        // and out-of-plane error 5, so its ratio is 1 - 1/sqrt(2).
        let mut traj: Vec<(f64, Vec<f64>)> = vec![
            vec![10.0, 0.0, 0.0],
            vec![-10.0, 0.0, 0.0],
            vec![0.0, 10.0, 0.0],
            vec![0.0, -10.0, 0.0],
            vec![3.0, 4.0, 5.0],
            vec![-3.0, -4.0, 5.0],
            vec![3.0, 4.0, -5.0],
            vec![-3.0, -4.0, -5.0],
        ]
        .into_iter()
        .enumerate()
        .map(|(i, v)| (i as f64 / 7.0, v))
        .collect();
        traj.rotate_left(1);
        let curve = trajectory_projection_ratio(&traj).unwrap();
        let expect = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let mut excursions = 0;
        for (_, r) in curve.points.iter() {
            if (r - expect).abs() <= 1e-8 {
                excursions += 1;
            } else {
                assert!((r - 1.0).abs() <= 1e-8, "in-plane state ratio {r}");
            }
        }
        assert_eq!(excursions, 4);
    }

    #[test]
    fn projection_ratio_zero_state_flagged() {
        let traj = vec![
            (0.0, vec![0.0, 0.0]),
            (0.5, vec![1.0, 0.0]),
            (1.0, vec![0.0, 1.0]),
        ];
        let curve = trajectory_projection_ratio(&traj).unwrap();
        assert_eq!(curve.points[0].1, 1.0);
        assert_eq!(curve.flags.len(), 1);
    }

    #[test]
    fn energy_distance_properties() {
        let a: Vec<Vec<f64>> = (0..32).map(|i| vec![(i % 7) as f64 * 0.1, 0.0]).collect();
        assert!(energy_distance(&a, &a).unwrap().abs() <= 1e-12);
        let b: Vec<Vec<f64>> = a.iter().map(|v| vec![v[0] + 3.0, v[1]]).collect();
        assert!(energy_distance(&a, &b).unwrap() > 1.0);
    }
}
