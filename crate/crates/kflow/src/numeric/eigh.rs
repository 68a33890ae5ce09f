//! Symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! The sweep order is fixed (row-major over the upper triangle), so results
//! are reproducible bit-for-bit across runs. For degenerate eigenvalues the
//! returned basis of the eigenspace is whatever the rotation sequence
//! produces; it is deterministic but otherwise arbitrary.

use crate::error::{Error, Result};
use crate::numeric::Tensor;

const SYMMETRY_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues sorted descending and the matching orthonormal
/// eigenvectors as the columns of an n-by-n tensor.
pub fn eigh_symmetric(a: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let n = check_square_symmetric(a)?;
    let mut m: Vec<f64> = a.data().to_vec();
    // Symmetrize exactly so the iteration sees one consistent matrix.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = avg;
            m[j * n + i] = avg;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let stop = 1e-14 * frob.max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = off_diagonal_norm(&m, n);
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut m, &mut v, n, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the deterministic Jacobi output order among ties.
    order.sort_by(|&i, &j| m[j * n + j].partial_cmp(&m[i * n + i]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    Ok((eigenvalues, Tensor::new(vec![n, n], vectors)?))
}

fn check_square_symmetric(a: &Tensor) -> Result<usize> {
    if a.ndim() != 2 || a.shape()[0] != a.shape()[1] {
        return Err(Error::shape(format!(
            "expected a square matrix, got shape {:?}",
            a.shape()
        )));
    }
    let n = a.shape()[0];
    let scale = a.data().iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (a.at2(i, j) - a.at2(j, i)).abs();
            if d > SYMMETRY_TOL * scale.max(1.0) {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric: |A[{i},{j}] - A[{j},{i}]| = {d:.3e}"
                )));
            }
        }
    }
    Ok(n)
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * m[i * n + j] * m[i * n + j];
        }
    }
    s.sqrt()
}

fn jacobi_rotate(m: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    let tau = (aqq - app) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    for k in 0..n {
        let mkp = m[k * n + p];
        let mkq = m[k * n + q];
        m[k * n + p] = c * mkp - s * mkq;
        m[k * n + q] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[p * n + k];
        let mqk = m[q * n + k];
        m[p * n + k] = c * mpk - s * mqk;
        m[q * n + k] = s * mpk + c * mqk;
    }
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    fn matvec_col(a: &Tensor, v: &Tensor, col: usize) -> Vec<f64> {
        let n = a.shape()[0];
        (0..n)
            .map(|i| (0..n).map(|j| a.at2(i, j) * v.at2(j, col)).sum())
            .collect()
    }

    #[test]
    fn diagonal_matrix() {
        let a = Tensor::new(vec![2, 2], vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let (vals, vecs) = eigh_symmetric(&a).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs.at2(0, 0).abs() - 1.0).abs() < 1e-12);
        assert!(vecs.at2(1, 0).abs() < 1e-12);
        assert!((vecs.at2(1, 1).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_symmetric() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let (vals, vecs) = eigh_symmetric(&a).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-12);
        assert!(vals[1].abs() < 1e-12);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs.at2(0, 0).abs() - inv_sqrt2).abs() < 1e-12);
        assert!((vecs.at2(0, 0) - vecs.at2(1, 0)).abs() < 1e-12, "same sign");
    }

    #[test]
    fn random_reconstruction_oracle() {
        let mut rng = SeededRng::new(42, 0);
        let raw = rng.randn(&[8, 8]).unwrap();
        let n = 8;
        let mut sym = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                sym[i * n + j] = 0.5 * (raw.at2(i, j) + raw.at2(j, i));
            }
        }
        let a = Tensor::new(vec![n, n], sym).unwrap();
        let (vals, vecs) = eigh_symmetric(&a).unwrap();

        // Av = λv for each pair.
        for c in 0..n {
            let av = matvec_col(&a, &vecs, c);
            for (i, aval) in av.iter().enumerate() {
                assert!(
                    (aval - vals[c] * vecs.at2(i, c)).abs() < 1e-8 * a.norm().max(1.0),
                    "eigenpair {c} violates A v = lambda v"
                );
            }
        }
        // V Lambda V^T = A.
        let mut recon = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                recon[i * n + j] = (0..n).map(|c| vecs.at2(i, c) * vals[c] * vecs.at2(j, c)).sum();
            }
        }
        let recon = Tensor::new(vec![n, n], recon).unwrap();
        assert!(recon.rel_dist(&a) < 1e-8);
        // Descending eigenvalues and orthonormal columns.
        for w in vals.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        for c1 in 0..n {
            for c2 in 0..n {
                let dot: f64 = (0..n).map(|i| vecs.at2(i, c1) * vecs.at2(i, c2)).sum();
                let want = if c1 == c2 { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(eigh_symmetric(&a).is_err());
    }
}
