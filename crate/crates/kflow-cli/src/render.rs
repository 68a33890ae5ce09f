//! Grayscale PGM (P5) and RGB PPM (P6) rendering of tensors.

use std::path::Path;

use kflow::io::atomic_write;
use kflow::numeric::Tensor;

/// Writes a 2-D tensor as binary PGM, or a [3, H, W] tensor as binary PPM.
/// Values are min-max scaled to 0..=255; a constant tensor maps to the
/// midpoint 128.
pub fn render_image(tensor: &Tensor, path: &Path) -> anyhow::Result<()> {
    match tensor.shape() {
        [h, w] => {
            let pixels = scale_to_bytes(tensor.data());
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend_from_slice(&pixels);
            atomic_write(path, &out)?;
            Ok(())
        }
        [3, h, w] => {
            let pixels = scale_to_bytes(tensor.data());
            let plane = h * w;
            let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
            for i in 0..plane {
                out.push(pixels[i]);
                out.push(pixels[plane + i]);
                out.push(pixels[2 * plane + i]);
            }
            atomic_write(path, &out)?;
            Ok(())
        }
        other => anyhow::bail!(
            "cannot render shape {other:?}: expected [H, W] for PGM or [3, H, W] for PPM"
        ),
    }
}

fn scale_to_bytes(data: &[f64]) -> Vec<u8> {
    let min = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return vec![128; data.len()];
    }
    let scale = 255.0 / (max - min);
    data.iter()
        .map(|&v| ((v - min) * scale).round().clamp(0.0, 255.0) as u8)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal P5 reader used as the round-trip oracle.
    fn read_pgm(path: &Path) -> (usize, usize, Vec<u8>) {
        let bytes = std::fs::read(path).unwrap();
        let head_len = bytes.len().min(32);
        let header = String::from_utf8_lossy(&bytes[..head_len]).to_string();
        let mut parts = header.split_ascii_whitespace();
        assert_eq!(parts.next(), Some("P5"));
        let w: usize = parts.next().unwrap().parse().unwrap();
        let h: usize = parts.next().unwrap().parse().unwrap();
        let pixels = bytes[bytes.len() - w * h..].to_vec();
        (w, h, pixels)
    }

    #[test]
    fn constant_tensor_renders_midpoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        let t = Tensor::new(vec![2, 2], vec![3.0; 4]).unwrap();
        render_image(&t, &path).unwrap();
        let (_, _, pixels) = read_pgm(&path);
        assert_eq!(pixels, vec![128; 4]);
    }

    #[test]
    fn checkerboard_maps_to_extremes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let t = Tensor::new(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        render_image(&t, &path).unwrap();
        let (_, _, pixels) = read_pgm(&path);
        assert_eq!(pixels, vec![0, 255, 255, 0]);
    }

    #[test]
    fn values_survive_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.pgm");
        let data: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let t = Tensor::new(vec![4, 4], data.clone()).unwrap();
        render_image(&t, &path).unwrap();
        let (w, h, pixels) = read_pgm(&path);
        assert_eq!((w, h), (4, 4));
        let min = data.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (&p, &v) in pixels.iter().zip(&data) {
            let back = min + (p as f64 / 255.0) * (max - min);
            assert!((back - v).abs() <= (max - min) / 255.0, "{back} vs {v}");
        }
    }

    #[test]
    fn three_channel_tensor_renders_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ppm");
        // Channel-first [3, 1, 2]: red gradient, others constant.
        let t = Tensor::new(vec![3, 1, 2], vec![0.0, 1.0, 0.5, 0.5, 0.25, 0.75]).unwrap();
        render_image(&t, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        let pixels = &bytes[bytes.len() - 6..];
        assert_eq!(pixels[0], 0, "first pixel red channel");
        assert_eq!(pixels[3], 255, "second pixel red channel");
    }

    #[test]
    fn bad_shapes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::from_vec(vec![1.0, 2.0]).unwrap();
        assert!(render_image(&t, &dir.path().join("b.pgm")).is_err());
        let t3 = Tensor::new(vec![2, 2, 2], vec![0.0; 8]).unwrap();
        assert!(render_image(&t3, &dir.path().join("b3.pgm")).is_err());
    }
}
