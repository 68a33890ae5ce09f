//! Property tests for the transform and interpolant invariants.

use proptest::prelude::*;

use kflow::interpolant::{BumpFunction, FlowDirection, FlowSystem, NoiseDraw};
use kflow::kamp::{
    make_partition, pca_fit, BandedTransform, PartitionStrategy, Transform, WaveletFamily,
};
use kflow::numeric::{SeededRng, Tensor};

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-100.0f64..100.0, len..=len)
}

fn transforms_for_len16() -> Vec<Transform> {
    let mut rng = SeededRng::new(424242, 0);
    let fit: Vec<Tensor> = (0..40).map(|_| rng.randn(&[16]).unwrap()).collect();
    vec![
        Transform::fourier(vec![16]).unwrap(),
        Transform::wavelet(vec![16], WaveletFamily::Haar, 2).unwrap(),
        Transform::wavelet(vec![16], WaveletFamily::Db6, 1).unwrap(),
        Transform::pca(pca_fit(&fit, 16).unwrap()).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// inverse(forward(x)) = x for every transform, on arbitrary signals.
    #[test]
    fn round_trip_is_identity(data in finite_vec(16)) {
        let x = Tensor::from_vec(data).unwrap();
        for t in transforms_for_len16() {
            let back = t.inverse_coeffs(&t.forward_coeffs(&x).unwrap()).unwrap();
            prop_assert!(back.rel_dist(&x) <= 1e-8, "{} round trip", t.id());
        }
    }

    /// The coefficient map of each linear transform is linear; PCA is
    /// affine, so linearity holds for the centered map.
    #[test]
    fn forward_is_linear(
        xa in finite_vec(16),
        xb in finite_vec(16),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let ta = Tensor::from_vec(xa.clone()).unwrap();
        let tb = Tensor::from_vec(xb.clone()).unwrap();
        let mixed: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| a * p + b * q).collect();
        let tm = Tensor::from_vec(mixed).unwrap();
        for t in transforms_for_len16() {
            if matches!(t, Transform::Pca(_)) {
                continue;
            }
            let fa = t.forward_coeffs(&ta).unwrap();
            let fb = t.forward_coeffs(&tb).unwrap();
            let fm = t.forward_coeffs(&tm).unwrap();
            let expect: Vec<f64> = fa.iter().zip(&fb).map(|(p, q)| a * p + b * q).collect();
            let scale = expect.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            for (got, want) in fm.iter().zip(&expect) {
                prop_assert!((got - want).abs() <= 1e-9 * scale, "{} linearity", t.id());
            }
        }
    }

    /// Parseval: coefficient energy equals signal energy for the
    /// orthonormal transforms, and centered-signal energy for PCA.
    #[test]
    fn energy_is_preserved(data in finite_vec(16)) {
        let x = Tensor::from_vec(data).unwrap();
        for t in transforms_for_len16() {
            let coeffs = t.forward_coeffs(&x).unwrap();
            let coeff_energy: f64 = coeffs.iter().map(|v| v * v).sum();
            let reference = match &t {
                Transform::Pca(p) => x
                    .data()
                    .iter()
                    .zip(&p.basis().mean)
                    .map(|(v, m)| (v - m) * (v - m))
                    .sum::<f64>(),
                _ => x.norm() * x.norm(),
            };
            prop_assert!(
                (coeff_energy - reference).abs() <= 1e-8 * reference.max(1.0),
                "{} energy {coeff_energy} vs {reference}",
                t.id()
            );
        }
    }

    /// Band projections sum to the original signal.
    #[test]
    fn band_projections_are_complete(data in finite_vec(16), bands in 1usize..4) {
        let x = Tensor::from_vec(data).unwrap();
        for t in transforms_for_len16() {
            let n_bands = bands.min(t.n_native_scales());
            let p = make_partition(&t, n_bands, PartitionStrategy::UniformLevel, None).unwrap();
            let banded = BandedTransform::new(t, p).unwrap();
            let mut sum = vec![0.0; 16];
            for band in 0..n_bands {
                let proj = banded.band_project(&x, band).unwrap();
                for (s, v) in sum.iter_mut().zip(proj.data()) {
                    *s += v;
                }
            }
            let sum = Tensor::from_vec(sum).unwrap();
            prop_assert!(sum.rel_dist(&x) <= 1e-8);
        }
    }

    /// Noise splitting: inside band s, earlier bands carry data exactly and
    /// later bands still carry the noise draw exactly.
    #[test]
    fn interpolant_splits_noise(
        data in finite_vec(16),
        noise in finite_vec(16),
        k in 0.0f64..1.0,
    ) {
        let t = Transform::wavelet(vec![16], WaveletFamily::Haar, 3).unwrap();
        let p = make_partition(&t, 4, PartitionStrategy::UniformLevel, None).unwrap();
        let sys = FlowSystem::new(
            BandedTransform::new(t, p).unwrap(),
            BumpFunction::CubicSmoothstep,
            FlowDirection::LowToHigh,
        );
        let state = sys.interpolate_coeffs(&data, &noise, k).unwrap();
        let coord = sys.coordinate(k).unwrap();
        for slot in 0..16 {
            let band = sys.partition().band_of_slot(slot);
            if band < coord.band {
                prop_assert_eq!(state[slot], data[slot], "revealed band carries data");
            } else if band > coord.band {
                prop_assert_eq!(state[slot], noise[slot], "future band carries noise");
            }
        }
    }

    /// The reversed flow direction equals the forward flow on the
    /// band-reversed partition, bitwise.
    #[test]
    fn direction_symmetry(data in finite_vec(16), noise in finite_vec(16), k in 0.0f64..=1.0) {
        let t = Transform::wavelet(vec![16], WaveletFamily::Haar, 3).unwrap();
        let p = make_partition(&t, 3, PartitionStrategy::UniformLevel, None).unwrap();
        let reversed = FlowSystem::new(
            BandedTransform::new(t.clone(), p.clone()).unwrap(),
            BumpFunction::CubicSmoothstep,
            FlowDirection::HighToLow,
        );
        let mirrored = FlowSystem::new(
            BandedTransform::new(t, p.reversed()).unwrap(),
            BumpFunction::CubicSmoothstep,
            FlowDirection::LowToHigh,
        );
        let a = reversed.interpolate_coeffs(&data, &noise, k).unwrap();
        let b = mirrored.interpolate_coeffs(&data, &noise, k).unwrap();
        prop_assert_eq!(a, b);
    }

    /// Noise draws are a pure function of their provenance.
    #[test]
    fn noise_draw_reproducible(seed in any::<u64>(), stream in any::<u64>()) {
        let a = NoiseDraw::standard_normal(seed, stream, 32);
        let b = NoiseDraw::standard_normal(seed, stream, 32);
        prop_assert_eq!(a.coeffs, b.coeffs);
    }
}
