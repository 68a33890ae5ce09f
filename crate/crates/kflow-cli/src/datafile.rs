//! Dataset container helpers: `KFC1` files with a `samples` entry (f32,
//! shape [n, dims...]), an optional `labels` entry, and the generating spec.

use std::path::Path;

use kflow::data::{DatasetSpec, LabeledBatch};
use kflow::io::{Container, ContainerWriter};
use kflow::numeric::Tensor;

pub fn write_dataset(
    path: &Path,
    batch: &LabeledBatch,
    spec: Option<&DatasetSpec>,
) -> anyhow::Result<()> {
    anyhow::ensure!(!batch.is_empty(), "refusing to write an empty dataset");
    let sample_shape = batch.samples[0].shape().to_vec();
    let mut shape = vec![batch.len()];
    shape.extend_from_slice(&sample_shape);
    let mut flat = Vec::with_capacity(shape.iter().product());
    for s in &batch.samples {
        anyhow::ensure!(
            s.shape() == sample_shape.as_slice(),
            "dataset samples have mixed shapes"
        );
        flat.extend_from_slice(s.data());
    }
    let mut w = ContainerWriter::new();
    w.put_f32("samples", shape, &flat)?;
    if let Some(labels) = &batch.labels {
        let as_f: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        w.put_f32("labels", vec![labels.len()], &as_f)?;
    }
    if let Some(spec) = spec {
        w.put_json("meta/spec", spec)?;
    }
    w.write(path)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> anyhow::Result<LabeledBatch> {
    let container = Container::read(path)?;
    let (shape, flat) = container.floats("samples")?;
    anyhow::ensure!(
        shape.len() >= 2,
        "{}: samples entry must be [n, dims...]",
        path.display()
    );
    let n = shape[0];
    let sample_shape = shape[1..].to_vec();
    let stride: usize = sample_shape.iter().product();
    let samples: Vec<Tensor> = (0..n)
        .map(|i| Tensor::new(sample_shape.clone(), flat[i * stride..(i + 1) * stride].to_vec()))
        .collect::<kflow::Result<_>>()?;
    let labels = if container.contains("labels") {
        let (_, raw) = container.floats("labels")?;
        anyhow::ensure!(raw.len() == n, "label count does not match sample count");
        Some(raw.iter().map(|&v| v as usize).collect())
    } else {
        None
    };
    Ok(LabeledBatch { samples, labels })
}

/// Loads generated samples from either a dataset container or a directory
/// of `.kft` tensor files (sorted by file name).
pub fn read_samples(path: &Path) -> anyhow::Result<Vec<Tensor>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|x| x == "kft").unwrap_or(false))
            .collect();
        anyhow::ensure!(
            !files.is_empty(),
            "{}: no .kft tensor files found",
            path.display()
        );
        files.sort();
        files
            .iter()
            .map(|p| kflow::io::tensor_read(p).map_err(Into::into))
            .collect()
    } else {
        Ok(read_dataset(path)?.samples)
    }
}
