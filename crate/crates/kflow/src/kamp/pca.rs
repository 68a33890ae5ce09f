//! Data-fitted PCA basis and the PCA K-amplitude transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{eigh_symmetric, Tensor};

/// An orthonormal principal component basis with its fitted mean.
///
/// Components are stored row-major (row j = component j), sorted by
/// non-increasing explained variance, each sign-fixed so its
/// largest-magnitude entry is positive. Exactly tied variances keep the
/// deterministic eigensolver output order; the basis of a degenerate
/// eigenspace is arbitrary but reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// n_components x dim, row-major.
    pub components: Vec<f64>,
    pub variances: Vec<f64>,
    pub dim: usize,
}

impl PcaBasis {
    pub fn n_components(&self) -> usize {
        self.variances.len()
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j * self.dim..(j + 1) * self.dim]
    }
}

/// Fits a PCA basis on a dataset: sample covariance with the 1/(n-1)
/// convention, eigenvectors sorted by descending eigenvalue.
pub fn pca_fit(dataset: &[Tensor], n_components: usize) -> Result<PcaBasis> {
    if dataset.len() < 2 {
        return Err(Error::invalid(format!(
            "PCA fit needs at least 2 samples, got {}",
            dataset.len()
        )));
    }
    let dim = dataset[0].len();
    if n_components == 0 || n_components > dim {
        return Err(Error::invalid(format!(
            "n_components {n_components} out of range for dimension {dim}"
        )));
    }
    for t in dataset {
        if t.len() != dim {
            return Err(Error::shape("dataset samples have mixed lengths"));
        }
    }
    let n = dataset.len() as f64;
    let mut mean = vec![0.0; dim];
    for t in dataset {
        for (m, &v) in mean.iter_mut().zip(t.data()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for t in dataset {
        for (c, (&v, &m)) in centered.iter_mut().zip(t.data().iter().zip(&mean)) {
            *c = v - m;
        }
        for i in 0..dim {
            for j in i..dim {
                cov[i * dim + j] += centered[i] * centered[j];
            }
        }
    }
    let denom = n - 1.0;
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / denom;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    let cov = Tensor::new(vec![dim, dim], cov)?;
    let (eigenvalues, vectors) = eigh_symmetric(&cov)?;

    let mut components = vec![0.0; n_components * dim];
    let mut variances = Vec::with_capacity(n_components);
    for j in 0..n_components {
        let mut comp: Vec<f64> = (0..dim).map(|i| vectors.at2(i, j)).collect();
        // Sign convention: largest-magnitude entry positive.
        let lead = comp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if comp[lead] < 0.0 {
            for v in &mut comp {
                *v = -*v;
            }
        }
        components[j * dim..(j + 1) * dim].copy_from_slice(&comp);
        // Covariance eigenvalues below roundoff are clamped to zero.
        variances.push(eigenvalues[j].max(0.0));
    }
    Ok(PcaBasis {
        mean,
        components,
        variances,
        dim,
    })
}

/// PCA as an invertible K-amplitude transform. Requires a complete basis
/// (as many components as dimensions); partial bases are only used as
/// feature maps for metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaTransform {
    basis: PcaBasis,
}

impl PcaTransform {
    pub fn new(basis: PcaBasis) -> Result<Self> {
        if basis.n_components() != basis.dim {
            return Err(Error::invalid(format!(
                "invertible PCA transform needs a complete basis ({} components for dimension {})",
                basis.n_components(),
                basis.dim
            )));
        }
        Ok(PcaTransform { basis })
    }

    pub fn basis(&self) -> &PcaBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn coeff_len(&self) -> usize {
        self.basis.dim
    }

    /// Coefficients of the centered signal on each component.
    pub fn forward(&self, signal: &Tensor) -> Result<Vec<f64>> {
        if signal.len() != self.basis.dim {
            return Err(Error::shape(format!(
                "signal length {} does not match PCA dimension {}",
                signal.len(),
                self.basis.dim
            )));
        }
        let x = signal.data();
        Ok((0..self.basis.dim)
            .map(|j| {
                self.basis
                    .component(j)
                    .iter()
                    .zip(x.iter().zip(&self.basis.mean))
                    .map(|(&c, (&v, &m))| c * (v - m))
                    .sum()
            })
            .collect())
    }

    /// mean + sum_j c_j v_j, returned as a 1-D tensor.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Tensor> {
        let lin = self.inverse_linear(coeffs)?;
        let data = lin
            .into_iter()
            .zip(&self.basis.mean)
            .map(|(v, &m)| v + m)
            .collect();
        Tensor::new(vec![self.basis.dim], data)
    }

    /// The linear part sum_j c_j v_j without the mean offset.
    pub fn inverse_linear(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.basis.dim {
            return Err(Error::shape(format!(
                "coefficient length {} does not match PCA dimension {}",
                coeffs.len(),
                self.basis.dim
            )));
        }
        let mut out = vec![0.0; self.basis.dim];
        for (j, &c) in coeffs.iter().enumerate() {
            for (o, &v) in out.iter_mut().zip(self.basis.component(j)) {
                *o += c * v;
            }
        }
        Ok(out)
    }
}
