//! Unitary radix-2 DFT for 1-D and 2-D real signals.
//!
//! Normalization is 1/sqrt(N) in each direction so that the transform is an
//! isometry (Parseval holds exactly) and band energies read directly as
//! energy contributions. Axis lengths must be powers of two; anything else is
//! rejected rather than padded.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{ComplexTensor, Tensor};

/// Relative imaginary residual above which an inverse input is declared
/// non-Hermitian.
const HERMITIAN_TOL: f64 = 1e-8;

/// Forward unitary DFT of a 1-D or 2-D real tensor.
pub fn dft_forward(x: &Tensor) -> Result<ComplexTensor> {
    check_axes(x.shape())?;
    let mut buf: Vec<Complex64> = x.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_all_axes(&mut buf, x.shape(), false);
    ComplexTensor::new(x.shape().to_vec(), buf)
}

/// Inverse unitary DFT. The input must be Hermitian-symmetric so the result
/// is real; a complex residual above tolerance is reported as an error.
pub fn dft_inverse(x: &ComplexTensor) -> Result<Tensor> {
    check_axes(x.shape())?;
    let mut buf = x.data().to_vec();
    transform_all_axes(&mut buf, x.shape(), true);
    let real_norm: f64 = buf.iter().map(|c| c.re * c.re).sum::<f64>().sqrt();
    let imag_norm: f64 = buf.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
    if imag_norm > HERMITIAN_TOL * real_norm.max(1e-300) {
        return Err(Error::numeric(format!(
            "inverse DFT input is not Hermitian: complex residual {imag_norm:.3e} \
             exceeds tolerance {HERMITIAN_TOL:.1e} (relative to {real_norm:.3e})"
        )));
    }
    Tensor::new(x.shape().to_vec(), buf.iter().map(|c| c.re).collect())
}

/// Unitary inverse without the Hermitian check; used where the spectrum is
/// symmetric by construction and the residual check is redundant.
pub(crate) fn dft_inverse_complex(x: &ComplexTensor) -> ComplexTensor {
    let mut buf = x.data().to_vec();
    transform_all_axes(&mut buf, x.shape(), true);
    ComplexTensor::new(x.shape().to_vec(), buf).expect("shape preserved")
}

fn check_axes(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > 2 {
        return Err(Error::shape(format!(
            "DFT supports 1-D and 2-D tensors, got shape {shape:?}"
        )));
    }
    for &n in shape {
        if !n.is_power_of_two() {
            return Err(Error::shape(format!(
                "axis length {n} is not a power of two (shape {shape:?})"
            )));
        }
    }
    Ok(())
}

fn transform_all_axes(buf: &mut [Complex64], shape: &[usize], inverse: bool) {
    match shape {
        [n] => {
            fft_radix2(&mut buf[..*n], inverse);
            unitary_scale(buf, *n);
        }
        [rows, cols] => {
            for r in 0..*rows {
                fft_radix2(&mut buf[r * cols..(r + 1) * cols], inverse);
            }
            let mut col = vec![Complex64::default(); *rows];
            for c in 0..*cols {
                for r in 0..*rows {
                    col[r] = buf[r * cols + c];
                }
                fft_radix2(&mut col, inverse);
                for r in 0..*rows {
                    buf[r * cols + c] = col[r];
                }
            }
            unitary_scale(buf, rows * cols);
        }
        _ => unreachable!("check_axes admits only 1-D/2-D"),
    }
}

fn unitary_scale(buf: &mut [Complex64], n_total: usize) {
    let s = 1.0 / (n_total as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// In-place iterative Cooley-Tukey, length a power of two, no normalization.
fn fft_radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * std::f64::consts::TAU / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = buf[i + k];
                let v = buf[i + k + len / 2] * w;
                buf[i + k] = u + v;
                buf[i + k + len / 2] = u - v;
                w *= wlen;
            }
            i += len;
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    /// Direct O(N^2) unitary DFT, the independent oracle.
    fn naive_dft_1d(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        let mut out = vec![Complex64::default(); n];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for (m, &v) in x.iter().enumerate() {
                let ang = -std::f64::consts::TAU * (k * m) as f64 / n as f64;
                acc += Complex64::new(ang.cos(), ang.sin()) * v;
            }
            *o = acc / (n as f64).sqrt();
        }
        out
    }

    #[test]
    fn constant_signal_concentrates_at_dc() {
        let x = Tensor::from_vec(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let f = dft_forward(&x).unwrap();
        assert!((f.data()[0] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        for k in 1..4 {
            assert!(f.data()[k].norm() < 1e-12);
        }
    }

    #[test]
    fn pure_cosine_splits_between_conjugate_bins() {
        let x = Tensor::from_vec(vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        let f = dft_forward(&x).unwrap();
        let expect = [0.0, 1.0, 0.0, 1.0];
        for (got, want) in f.data().iter().zip(expect) {
            assert!((got - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_dft_oracle() {
        let mut rng = SeededRng::new(11, 0);
        let x = rng.randn(&[16]).unwrap();
        let fast = dft_forward(&x).unwrap();
        let slow = naive_dft_1d(x.data());
        for (a, b) in fast.data().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10, "fast {a} vs naive {b}");
        }
    }

    #[test]
    fn inverse_of_constant_spectrum() {
        let f = ComplexTensor::new(
            vec![4],
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::default(),
                Complex64::default(),
                Complex64::default(),
            ],
        )
        .unwrap();
        let x = dft_inverse(&f).unwrap();
        for &v in x.data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_2d_is_identity() {
        let mut rng = SeededRng::new(3, 1);
        let x = rng.randn(&[8, 8]).unwrap();
        let back = dft_inverse(&dft_forward(&x).unwrap()).unwrap();
        assert!(back.rel_dist(&x) < 1e-10);
    }

    #[test]
    fn broken_hermitian_symmetry_is_rejected() {
        // X[1] = i with X[3] = 0 cannot come from a real signal.
        let f = ComplexTensor::new(
            vec![4],
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::default(),
                Complex64::default(),
            ],
        )
        .unwrap();
        let err = dft_inverse(&f).unwrap_err();
        assert!(err.to_string().contains("not Hermitian"), "{err}");
    }

    #[test]
    fn non_power_of_two_rejected() {
        let x = Tensor::from_vec(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(dft_forward(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn parseval_unitarity() {
        let mut rng = SeededRng::new(5, 2);
        for shape in [vec![32], vec![4, 16]] {
            let x = rng.randn(&shape).unwrap();
            let f = dft_forward(&x).unwrap();
            assert!((f.norm() - x.norm()).abs() <= 1e-10 * x.norm());
        }
    }
}
