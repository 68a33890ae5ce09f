//! Multilevel discrete wavelet transform with periodic extension.
//!
//! Periodic (circular) filtering keeps the analysis matrix exactly
//! orthonormal on power-of-two lengths, which gives perfect reconstruction
//! and makes band energies additive. Supported filters are Haar and the
//! 12-tap Daubechies wavelet with six vanishing moments.
//!
//! Canonical coefficient order is coarsest first: the level-J approximation
//! block, then detail levels J down to 1. In 2-D each detail level stores its
//! three subbands in the order (row-low/col-high, row-high/col-low,
//! row-high/col-high), each row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Daubechies-6 decomposition low-pass filter (12 taps), from the minimal
/// phase spectral factorization of the order-6 binomial half-band polynomial.
#[allow(clippy::excessive_precision)]
const DB6_LO: [f64; 12] = [
    -0.00107730108530846,
    0.00477725751094545,
    0.00055384220116137,
    -0.03158203931748612,
    0.02752286553030399,
    0.09750160558731796,
    -0.12976686756726558,
    -0.22626469396543633,
    0.31525035170920357,
    0.75113390802109770,
    0.49462389039845273,
    0.11154074335010920,
];

const HAAR_LO: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveletFamily {
    Haar,
    Db6,
}

impl WaveletFamily {
    pub fn low_pass(&self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR_LO,
            WaveletFamily::Db6 => &DB6_LO,
        }
    }

    /// Quadrature mirror high-pass: g[m] = (-1)^m h[L-1-m].
    pub fn high_pass(&self) -> Vec<f64> {
        let lo = self.low_pass();
        let l = lo.len();
        (0..l)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign * lo[l - 1 - m]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveletTransform {
    shape: Vec<usize>,
    family: WaveletFamily,
    levels: usize,
}

impl WaveletTransform {
    pub fn new(shape: Vec<usize>, family: WaveletFamily, levels: usize) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::shape(format!(
                "wavelet transform supports 1-D and 2-D shapes, got {shape:?}"
            )));
        }
        for &n in &shape {
            if !n.is_power_of_two() {
                return Err(Error::shape(format!(
                    "axis length {n} is not a power of two"
                )));
            }
        }
        if levels == 0 {
            return Err(Error::invalid("wavelet level count must be at least 1"));
        }
        let min_axis = *shape.iter().min().unwrap();
        let max_levels = min_axis.trailing_zeros() as usize;
        if levels > max_levels {
            return Err(Error::invalid(format!(
                "{levels} levels exceed the {max_levels} supported by shape {shape:?}"
            )));
        }
        Ok(WaveletTransform { shape, family, levels })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn family(&self) -> WaveletFamily {
        self.family
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn coeff_len(&self) -> usize {
        self.shape.iter().product()
    }

    /// Native scales: approximation first, then detail levels coarse to fine.
    pub fn n_native_scales(&self) -> usize {
        self.levels + 1
    }

    /// Per-slot native scale id in canonical order.
    pub fn native_scale_ids(&self) -> Vec<usize> {
        let mut ids = Vec::with_capacity(self.coeff_len());
        match self.shape.as_slice() {
            [n] => {
                let coarse = n >> self.levels;
                ids.extend(std::iter::repeat_n(0, coarse));
                for level in (1..=self.levels).rev() {
                    let len = n >> level;
                    let scale = self.levels - level + 1;
                    ids.extend(std::iter::repeat_n(scale, len));
                }
            }
            [r, c] => {
                let coarse = (r >> self.levels) * (c >> self.levels);
                ids.extend(std::iter::repeat_n(0, coarse));
                for level in (1..=self.levels).rev() {
                    let len = (r >> level) * (c >> level);
                    let scale = self.levels - level + 1;
                    ids.extend(std::iter::repeat_n(scale, 3 * len));
                }
            }
            _ => unreachable!(),
        }
        debug_assert_eq!(ids.len(), self.coeff_len());
        ids
    }

    pub fn forward(&self, signal: &Tensor) -> Result<Vec<f64>> {
        if signal.shape() != self.shape.as_slice() {
            return Err(Error::shape(format!(
                "signal shape {:?} does not match transform shape {:?}",
                signal.shape(),
                self.shape
            )));
        }
        match self.shape.as_slice() {
            [_] => Ok(self.forward_1d(signal.data())),
            [r, c] => Ok(self.forward_2d(signal.data(), *r, *c)),
            _ => unreachable!(),
        }
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Result<Tensor> {
        if coeffs.len() != self.coeff_len() {
            return Err(Error::shape(format!(
                "coefficient length {} does not match transform ({})",
                coeffs.len(),
                self.coeff_len()
            )));
        }
        let data = match self.shape.as_slice() {
            [_] => self.inverse_1d(coeffs),
            [r, c] => self.inverse_2d(coeffs, *r, *c),
            _ => unreachable!(),
        };
        Tensor::new(self.shape.clone(), data)
    }

    fn forward_1d(&self, signal: &[f64]) -> Vec<f64> {
        let lo = self.family.low_pass();
        let hi = self.family.high_pass();
        let mut cur = signal.to_vec();
        let mut details: Vec<Vec<f64>> = Vec::with_capacity(self.levels);
        for _ in 0..self.levels {
            let (a, d) = dwt_step(&cur, lo, &hi);
            details.push(d);
            cur = a;
        }
        let mut out = cur;
        for d in details.into_iter().rev() {
            out.extend(d);
        }
        out
    }

    fn inverse_1d(&self, coeffs: &[f64]) -> Vec<f64> {
        let lo = self.family.low_pass();
        let hi = self.family.high_pass();
        let n = self.shape[0];
        let coarse = n >> self.levels;
        let mut cur = coeffs[..coarse].to_vec();
        let mut offset = coarse;
        for level in (1..=self.levels).rev() {
            let len = n >> level;
            let d = &coeffs[offset..offset + len];
            cur = idwt_step(&cur, d, lo, &hi);
            offset += len;
        }
        cur
    }

    fn forward_2d(&self, signal: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let lo = self.family.low_pass();
        let hi = self.family.high_pass();
        let mut ll = signal.to_vec();
        let mut r = rows;
        let mut c = cols;
        // details[level-1] = (lh, hl, hh) at that level's resolution.
        let mut details: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::with_capacity(self.levels);
        for _ in 0..self.levels {
            let (next_ll, lh, hl, hh) = dwt2_step(&ll, r, c, lo, &hi);
            details.push((lh, hl, hh));
            ll = next_ll;
            r /= 2;
            c /= 2;
        }
        let mut out = ll;
        for (lh, hl, hh) in details.into_iter().rev() {
            out.extend(lh);
            out.extend(hl);
            out.extend(hh);
        }
        out
    }

    fn inverse_2d(&self, coeffs: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let lo = self.family.low_pass();
        let hi = self.family.high_pass();
        let coarse_r = rows >> self.levels;
        let coarse_c = cols >> self.levels;
        let mut ll = coeffs[..coarse_r * coarse_c].to_vec();
        let mut offset = coarse_r * coarse_c;
        let mut r = coarse_r;
        let mut c = coarse_c;
        for _ in 0..self.levels {
            let block = r * c;
            let lh = &coeffs[offset..offset + block];
            let hl = &coeffs[offset + block..offset + 2 * block];
            let hh = &coeffs[offset + 2 * block..offset + 3 * block];
            ll = idwt2_step(&ll, lh, hl, hh, r, c, lo, &hi);
            offset += 3 * block;
            r *= 2;
            c *= 2;
        }
        ll
    }
}

/// One periodic analysis step: a[i] = sum_m lo[m] x[(2i+m) mod n], same for d.
fn dwt_step(x: &[f64], lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for i in 0..half {
        let mut sa = 0.0;
        let mut sd = 0.0;
        for (m, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            let v = x[(2 * i + m) % n];
            sa += l * v;
            sd += h * v;
        }
        a[i] = sa;
        d[i] = sd;
    }
    (a, d)
}

/// Transpose of the orthonormal analysis step, which is its exact inverse.
fn idwt_step(a: &[f64], d: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let half = a.len();
    let n = half * 2;
    let mut x = vec![0.0; n];
    for i in 0..half {
        for (m, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            x[(2 * i + m) % n] += l * a[i] + h * d[i];
        }
    }
    x
}

fn dwt2_step(
    x: &[f64],
    rows: usize,
    cols: usize,
    lo: &[f64],
    hi: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let hc = cols / 2;
    let hr = rows / 2;
    // Row pass: per row, low half then high half.
    let mut row_lo = vec![0.0; rows * hc];
    let mut row_hi = vec![0.0; rows * hc];
    for r in 0..rows {
        let (a, d) = dwt_step(&x[r * cols..(r + 1) * cols], lo, hi);
        row_lo[r * hc..(r + 1) * hc].copy_from_slice(&a);
        row_hi[r * hc..(r + 1) * hc].copy_from_slice(&d);
    }
    // Column pass on each half.
    let mut ll = vec![0.0; hr * hc];
    let mut lh = vec![0.0; hr * hc];
    let mut hl = vec![0.0; hr * hc];
    let mut hh = vec![0.0; hr * hc];
    let mut col = vec![0.0; rows];
    for c in 0..hc {
        for r in 0..rows {
            col[r] = row_lo[r * hc + c];
        }
        let (a, d) = dwt_step(&col, lo, hi);
        for r in 0..hr {
            ll[r * hc + c] = a[r];
            lh[r * hc + c] = d[r];
        }
        for r in 0..rows {
            col[r] = row_hi[r * hc + c];
        }
        let (a, d) = dwt_step(&col, lo, hi);
        for r in 0..hr {
            hl[r * hc + c] = a[r];
            hh[r * hc + c] = d[r];
        }
    }
    (ll, lh, hl, hh)
}

#[allow(clippy::too_many_arguments)]
fn idwt2_step(
    ll: &[f64],
    lh: &[f64],
    hl: &[f64],
    hh: &[f64],
    hr: usize,
    hc: usize,
    lo: &[f64],
    hi: &[f64],
) -> Vec<f64> {
    let rows = hr * 2;
    // Undo the column pass.
    let mut row_lo = vec![0.0; rows * hc];
    let mut row_hi = vec![0.0; rows * hc];
    let mut a = vec![0.0; hr];
    let mut d = vec![0.0; hr];
    for c in 0..hc {
        for r in 0..hr {
            a[r] = ll[r * hc + c];
            d[r] = lh[r * hc + c];
        }
        let col = idwt_step(&a, &d, lo, hi);
        for r in 0..rows {
            row_lo[r * hc + c] = col[r];
        }
        for r in 0..hr {
            a[r] = hl[r * hc + c];
            d[r] = hh[r * hc + c];
        }
        let col = idwt_step(&a, &d, lo, hi);
        for r in 0..rows {
            row_hi[r * hc + c] = col[r];
        }
    }
    // Undo the row pass.
    let cols = hc * 2;
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        let x = idwt_step(
            &row_lo[r * hc..(r + 1) * hc],
            &row_hi[r * hc..(r + 1) * hc],
            lo,
            hi,
        );
        out[r * cols..(r + 1) * cols].copy_from_slice(&x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    #[test]
    fn filters_are_orthonormal() {
        for family in [WaveletFamily::Haar, WaveletFamily::Db6] {
            let lo = family.low_pass();
            let hi = family.high_pass();
            let sum: f64 = lo.iter().sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12);
            let unit: f64 = lo.iter().map(|v| v * v).sum();
            assert!((unit - 1.0).abs() < 1e-12);
            for shift in (2..lo.len()).step_by(2) {
                let dot: f64 = (0..lo.len() - shift).map(|m| lo[m] * lo[m + shift]).sum();
                assert!(dot.abs() < 1e-12, "{family:?} shift {shift}: {dot}");
            }
            let cross: f64 = lo.iter().zip(&hi).map(|(a, b)| a * b).sum();
            assert!(cross.abs() < 1e-12);
        }
    }

    #[test]
    fn haar_forward_matches_hand_values() {
        let t = WaveletTransform::new(vec![4], WaveletFamily::Haar, 1).unwrap();
        let x = Tensor::from_vec(vec![4.0, 2.0, 6.0, 2.0]).unwrap();
        let c = t.forward(&x).unwrap();
        let expect = [
            6.0 / std::f64::consts::SQRT_2,
            8.0 / std::f64::consts::SQRT_2,
            2.0 / std::f64::consts::SQRT_2,
            4.0 / std::f64::consts::SQRT_2,
        ];
        for (got, want) in c.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let back = t.inverse(&c).unwrap();
        assert!(back.rel_dist(&x) < 1e-12);
    }

    #[test]
    fn perfect_reconstruction_all_level_counts() {
        let mut rng = SeededRng::new(77, 0);
        for family in [WaveletFamily::Haar, WaveletFamily::Db6] {
            for levels in 1..=4 {
                let t = WaveletTransform::new(vec![32], family, levels).unwrap();
                let x = rng.randn(&[32]).unwrap();
                let c = t.forward(&x).unwrap();
                let back = t.inverse(&c).unwrap();
                assert!(back.rel_dist(&x) < 1e-10, "{family:?} {levels} levels");
                let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((cn - x.norm()).abs() < 1e-10 * x.norm(), "energy");
            }
            for levels in 1..=3 {
                let t = WaveletTransform::new(vec![16, 8], family, levels).unwrap();
                let x = rng.randn(&[16, 8]).unwrap();
                let c = t.forward(&x).unwrap();
                let back = t.inverse(&c).unwrap();
                assert!(back.rel_dist(&x) < 1e-10, "2-D {family:?} {levels} levels");
            }
        }
    }

    #[test]
    fn scale_ids_are_coarsest_first() {
        let t = WaveletTransform::new(vec![8], WaveletFamily::Haar, 2).unwrap();
        assert_eq!(t.native_scale_ids(), vec![0, 0, 1, 1, 2, 2, 2, 2]);
        let t2 = WaveletTransform::new(vec![4, 4], WaveletFamily::Haar, 1).unwrap();
        let ids = t2.native_scale_ids();
        assert_eq!(&ids[..4], &[0, 0, 0, 0]);
        assert_eq!(&ids[4..], &[1; 12]);
    }

    #[test]
    fn level_count_validation() {
        assert!(WaveletTransform::new(vec![8], WaveletFamily::Haar, 3).is_ok());
        assert!(WaveletTransform::new(vec![8], WaveletFamily::Haar, 4).is_err());
        assert!(WaveletTransform::new(vec![8], WaveletFamily::Haar, 0).is_err());
        assert!(WaveletTransform::new(vec![6], WaveletFamily::Haar, 1).is_err());
    }
}
