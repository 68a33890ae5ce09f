//! The learned velocity field: a scale-embedded MLP with exact reverse-mode
//! gradients and an adaptive-moment optimizer.
//!
//! The scale coordinate enters twice: sinusoidal features are concatenated
//! to the input, and each hidden layer receives an additive projection of
//! the same features (a minimal analogue of the conditioning blocks that
//! replace time embeddings in larger architectures). Class labels, when
//! enabled, come from a learned embedding table with a distinguished null
//! row used for unconditional evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::SeededRng;

/// Smooth activation for the hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Tanh,
    Silu,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Silu => z / (1.0 + (-z).exp()),
        }
    }

    /// Derivative at pre-activation `z`.
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
        }
    }
}

/// Architecture of the velocity model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Coefficient vector length (input and output width).
    pub coeff_len: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Sinusoidal scale-embedding width (even).
    pub scale_embed_dim: usize,
    /// Number of real classes; the table holds one extra null row.
    pub label_vocab: Option<usize>,
    pub label_embed_dim: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            coeff_len: 0,
            hidden_width: 256,
            hidden_layers: 3,
            scale_embed_dim: 16,
            label_vocab: None,
            label_embed_dim: 8,
            activation: Activation::Tanh,
        }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<()> {
        if self.coeff_len == 0 || self.hidden_width == 0 || self.hidden_layers == 0 {
            return Err(Error::invalid("model sizes must be positive"));
        }
        if self.scale_embed_dim == 0 || !self.scale_embed_dim.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "scale embedding dimension must be even and positive, got {}",
                self.scale_embed_dim
            )));
        }
        if self.label_vocab.is_some() && self.label_embed_dim == 0 {
            return Err(Error::invalid("label embedding dimension must be positive"));
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        self.coeff_len
            + self.scale_embed_dim
            + if self.label_vocab.is_some() {
                self.label_embed_dim
            } else {
                0
            }
    }
}

/// Sinusoidal scale features: `[sin(w_j k) .., cos(w_j k) ..]` with
/// geometric frequencies `w_j = 10000^(2j/dim)`.
pub fn embed_scale(k_norm: f64, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "scale embedding dimension must be even and positive, got {dim}"
        )));
    }
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for j in 0..half {
        let omega = 10000f64.powf(j as f64 / half as f64);
        out[j] = (omega * k_norm).sin();
        out[half + j] = (omega * k_norm).cos();
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Dense {
    /// out x in, row-major.
    w: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Dense {
    fn zeros(rows: usize, cols: usize) -> Self {
        Dense {
            w: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    fn scaled_normal(rows: usize, cols: usize, rng: &mut SeededRng) -> Self {
        let scale = 1.0 / (cols as f64).sqrt();
        Dense {
            w: (0..rows * cols).map(|_| scale * rng.standard_normal()).collect(),
            rows,
            cols,
        }
    }

    /// Adds `W x` into `out`.
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            *o += row.iter().zip(x).map(|(&w, &v)| w * v).sum::<f64>();
        }
    }

    /// Accumulates the outer product `delta x^T` into `grad`.
    fn grad_accumulate(&self, grad: &mut [f64], delta: &[f64], x: &[f64]) {
        for (r, &d) in delta.iter().enumerate() {
            let row = &mut grad[r * self.cols..(r + 1) * self.cols];
            for (g, &v) in row.iter_mut().zip(x) {
                *g += d * v;
            }
        }
    }

    /// Adds `W^T delta` into `out`.
    fn backward_input(&self, delta: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cols);
        for (r, &d) in delta.iter().enumerate() {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += d * w;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HiddenLayer {
    w: Dense,
    b: Vec<f64>,
    /// Additive modulation from the scale embedding.
    u: Dense,
}

/// The parameterized velocity field v(psi, k, label).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorFieldModel {
    cfg: ModelConfig,
    layers: Vec<HiddenLayer>,
    w_out: Dense,
    b_out: Vec<f64>,
    /// (vocab + 1) x label_embed_dim; the last row is the null label.
    label_table: Option<Dense>,
}

/// One gradient vector per parameter tensor, in the model's canonical
/// parameter order.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub tensors: Vec<Vec<f64>>,
}

/// A training example for the velocity regression.
#[derive(Debug, Clone)]
pub struct VfSample {
    pub psi: Vec<f64>,
    pub k_norm: f64,
    pub target: Vec<f64>,
    pub label: Option<usize>,
}

impl VectorFieldModel {
    /// Initializes hidden layers with scaled normal draws and the output
    /// head with zeros, so the initial field is identically zero.
    pub fn init(cfg: ModelConfig, rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.hidden_layers);
        let mut in_dim = cfg.input_dim();
        for _ in 0..cfg.hidden_layers {
            layers.push(HiddenLayer {
                w: Dense::scaled_normal(cfg.hidden_width, in_dim, rng),
                b: vec![0.0; cfg.hidden_width],
                u: Dense::scaled_normal(cfg.hidden_width, cfg.scale_embed_dim, rng),
            });
            in_dim = cfg.hidden_width;
        }
        let label_table = cfg.label_vocab.map(|vocab| {
            let mut t = Dense::scaled_normal(vocab + 1, cfg.label_embed_dim, rng);
            for v in &mut t.w {
                *v *= 0.1;
            }
            t
        });
        Ok(VectorFieldModel {
            w_out: Dense::zeros(cfg.coeff_len, cfg.hidden_width),
            b_out: vec![0.0; cfg.coeff_len],
            cfg,
            layers,
            label_table,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn is_conditional(&self) -> bool {
        self.cfg.label_vocab.is_some()
    }

    /// Index of the distinguished null label.
    pub fn null_label(&self) -> Option<usize> {
        self.cfg.label_vocab
    }

    pub fn param_count(&self) -> usize {
        self.flat_params().iter().map(|p| p.len()).sum()
    }

    fn resolve_label(&self, label: Option<usize>) -> Result<Option<usize>> {
        match (self.cfg.label_vocab, label) {
            (None, None) => Ok(None),
            (None, Some(_)) => Err(Error::label(
                "label passed to an unconditional model".to_string(),
            )),
            (Some(vocab), None) => Ok(Some(vocab)),
            (Some(vocab), Some(l)) => {
                if l > vocab {
                    Err(Error::label(format!(
                        "unknown label id {l} (vocabulary {vocab} plus null id {vocab})"
                    )))
                } else {
                    Ok(Some(l))
                }
            }
        }
    }

    fn check_input(&self, psi: &[f64]) -> Result<()> {
        if psi.len() != self.cfg.coeff_len {
            return Err(Error::shape(format!(
                "input length {} does not match model coefficient length {}",
                psi.len(),
                self.cfg.coeff_len
            )));
        }
        Ok(())
    }

    fn assemble_input(&self, psi: &[f64], embed: &[f64], label_row: Option<usize>) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.cfg.input_dim());
        x.extend_from_slice(psi);
        x.extend_from_slice(embed);
        if let (Some(table), Some(row)) = (&self.label_table, label_row) {
            x.extend_from_slice(&table.w[row * table.cols..(row + 1) * table.cols]);
        }
        x
    }

    /// Velocity at one state. A missing label on a conditional model uses
    /// the null row.
    pub fn eval(&self, psi: &[f64], k_norm: f64, label: Option<usize>) -> Result<Vec<f64>> {
        self.check_input(psi)?;
        let row = self.resolve_label(label)?;
        let embed = embed_scale(k_norm, self.cfg.scale_embed_dim)?;
        let x = self.assemble_input(psi, &embed, row);
        let mut h = x;
        for layer in &self.layers {
            let mut z = layer.b.clone();
            layer.w.matvec(&h, &mut z);
            layer.u.matvec(&embed, &mut z);
            for v in &mut z {
                *v = self.cfg.activation.apply(*v);
            }
            h = z;
        }
        let mut out = self.b_out.clone();
        self.w_out.matvec(&h, &mut out);
        Ok(out)
    }

    /// Batched evaluation; identical to per-sample evaluation by
    /// construction.
    pub fn eval_batch(&self, batch: &[(Vec<f64>, f64, Option<usize>)]) -> Result<Vec<Vec<f64>>> {
        batch
            .iter()
            .map(|(psi, k, label)| self.eval(psi, *k, *label))
            .collect()
    }

    /// Mean squared velocity regression loss over a batch and its exact
    /// gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[VfSample]) -> Result<(f64, GradientSet)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty training batch"));
        }
        let mut grads = GradientSet {
            tensors: self.flat_params().iter().map(|p| vec![0.0; p.len()]).collect(),
        };
        let inv_b = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let n_layers = self.layers.len();

        for sample in batch {
            self.check_input(&sample.psi)?;
            if sample.target.len() != self.cfg.coeff_len {
                return Err(Error::shape(format!(
                    "target length {} does not match coefficient length {}",
                    sample.target.len(),
                    self.cfg.coeff_len
                )));
            }
            let row = self.resolve_label(sample.label)?;
            let embed = embed_scale(sample.k_norm, self.cfg.scale_embed_dim)?;
            let x0 = self.assemble_input(&sample.psi, &embed, row);

            // Forward with caches.
            let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
            let mut post: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
            let mut h = x0.clone();
            for layer in &self.layers {
                let mut z = layer.b.clone();
                layer.w.matvec(&h, &mut z);
                layer.u.matvec(&embed, &mut z);
                let a: Vec<f64> = z.iter().map(|&v| self.cfg.activation.apply(v)).collect();
                pre.push(z);
                h = a.clone();
                post.push(a);
            }
            let mut out = self.b_out.clone();
            self.w_out.matvec(&h, &mut out);

            // Loss and output delta.
            let mut delta: Vec<f64> = Vec::with_capacity(out.len());
            for (o, t) in out.iter().zip(&sample.target) {
                let d = o - t;
                loss += d * d * inv_b;
                delta.push(2.0 * d * inv_b);
            }

            // Output head: parameter order is layer_i (w, b, u), then
            // out/w, out/b, then the label table.
            let last_h = &post[n_layers - 1];
            self.w_out
                .grad_accumulate(&mut grads.tensors[3 * n_layers], &delta, last_h);
            for (g, &d) in grads.tensors[3 * n_layers + 1].iter_mut().zip(&delta) {
                *g += d;
            }

            // Backward through hidden layers.
            let mut upstream = vec![0.0; self.cfg.hidden_width];
            self.w_out.backward_input(&delta, &mut upstream);
            for l in (0..n_layers).rev() {
                let act_delta: Vec<f64> = upstream
                    .iter()
                    .zip(&pre[l])
                    .map(|(&u, &z)| u * self.cfg.activation.derivative(z))
                    .collect();
                let input: &[f64] = if l == 0 { &x0 } else { &post[l - 1] };
                self.layers[l]
                    .w
                    .grad_accumulate(&mut grads.tensors[3 * l], &act_delta, input);
                for (g, &d) in grads.tensors[3 * l + 1].iter_mut().zip(&act_delta) {
                    *g += d;
                }
                self.layers[l]
                    .u
                    .grad_accumulate(&mut grads.tensors[3 * l + 2], &act_delta, &embed);

                upstream = vec![0.0; input.len()];
                self.layers[l].w.backward_input(&act_delta, &mut upstream);
            }

            // The label table row gradient arrives through the input slice.
            if let (Some(table), Some(row)) = (&self.label_table, row) {
                let offset = self.cfg.coeff_len + self.cfg.scale_embed_dim;
                let gt = grads.tensors.last_mut().expect("label table gradient");
                for j in 0..table.cols {
                    gt[row * table.cols + j] += upstream[offset + j];
                }
            }
        }
        Ok((loss, grads))
    }

    /// Canonical flat parameter views, in the documented order.
    pub fn flat_params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            out.push(&layer.w.w);
            out.push(&layer.b);
            out.push(&layer.u.w);
        }
        out.push(&self.w_out.w);
        out.push(&self.b_out);
        if let Some(table) = &self.label_table {
            out.push(&table.w);
        }
        out
    }

    pub fn flat_params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.w.w);
            out.push(&mut layer.b);
            out.push(&mut layer.u.w);
        }
        out.push(&mut self.w_out.w);
        out.push(&mut self.b_out);
        if let Some(table) = &mut self.label_table {
            out.push(&mut table.w);
        }
        out
    }

    /// Named parameter tensors for serialization, shapes included.
    pub fn named_params(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            out.push((
                format!("layer{i}/w"),
                vec![layer.w.rows, layer.w.cols],
                layer.w.w.as_slice(),
            ));
            out.push((format!("layer{i}/b"), vec![layer.b.len()], layer.b.as_slice()));
            out.push((
                format!("layer{i}/u"),
                vec![layer.u.rows, layer.u.cols],
                layer.u.w.as_slice(),
            ));
        }
        out.push((
            "out/w".to_string(),
            vec![self.w_out.rows, self.w_out.cols],
            self.w_out.w.as_slice(),
        ));
        out.push(("out/b".to_string(), vec![self.b_out.len()], self.b_out.as_slice()));
        if let Some(table) = &self.label_table {
            out.push((
                "label_table".to_string(),
                vec![table.rows, table.cols],
                table.w.as_slice(),
            ));
        }
        out
    }

    /// Overwrites parameters from vectors in the canonical flat order.
    pub fn load_flat_params(&mut self, values: &[Vec<f64>]) -> Result<()> {
        let mut params = self.flat_params_mut();
        if params.len() != values.len() {
            return Err(Error::format(format!(
                "checkpoint holds {} parameter tensors, model expects {}",
                values.len(),
                params.len()
            )));
        }
        for (p, v) in params.iter_mut().zip(values) {
            if p.len() != v.len() {
                return Err(Error::format(format!(
                    "parameter length {} does not match checkpoint entry {}",
                    p.len(),
                    v.len()
                )));
            }
            p.copy_from_slice(v);
        }
        Ok(())
    }

    /// Zeroes the label embedding table (the conditioning identity hook).
    pub fn zero_label_table(&mut self) {
        if let Some(table) = &mut self.label_table {
            for v in &mut table.w {
                *v = 0.0;
            }
        }
    }

    /// Fills every parameter with scaled normal draws; gradient oracles use
    /// this so no gradient is structurally zero.
    pub fn randomize_all(&mut self, rng: &mut SeededRng) {
        let widths: Vec<usize> = self
            .layers
            .iter()
            .map(|l| l.w.cols)
            .chain(std::iter::once(self.w_out.cols))
            .collect();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let s = 1.0 / (widths[i] as f64).sqrt();
            for v in &mut layer.w.w {
                *v = s * rng.standard_normal();
            }
            for v in &mut layer.b {
                *v = 0.1 * rng.standard_normal();
            }
            for v in &mut layer.u.w {
                *v = s * rng.standard_normal();
            }
        }
        let s = 1.0 / (self.w_out.cols as f64).sqrt();
        for v in &mut self.w_out.w {
            *v = s * rng.standard_normal();
        }
        for v in &mut self.b_out {
            *v = 0.1 * rng.standard_normal();
        }
        if let Some(table) = &mut self.label_table {
            for v in &mut table.w {
                *v = 0.3 * rng.standard_normal();
            }
        }
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators, congruent with the model's flat
/// parameter order.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(model: &VectorFieldModel) -> Self {
        let shapes: Vec<usize> = model.flat_params().iter().map(|p| p.len()).collect();
        AdamState {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected adaptive-moment update.
pub fn optimizer_step(
    state: &mut AdamState,
    model: &mut VectorFieldModel,
    grads: &GradientSet,
    hp: &AdamParams,
) -> Result<()> {
    let mut params = model.flat_params_mut();
    if params.len() != grads.tensors.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "optimizer state, gradients, and parameters are not congruent".to_string(),
        ));
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - hp.beta1.powf(t);
    let bc2 = 1.0 - hp.beta2.powf(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(&grads.tensors)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.len() != g.len() {
            return Err(Error::shape("gradient shape mismatch".to_string()));
        }
        for i in 0..p.len() {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] -= hp.lr * mhat / (vhat.sqrt() + hp.eps);
        }
    }
    Ok(())
}
