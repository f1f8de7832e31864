//! Layered feed-forward encoder with a split forward pass.
//!
//! The trunk is `depth` dense layers. Everything that mixes hidden states runs
//! the trunk up to the mix layer, interpolates, and resumes from there; the
//! split and unsplit passes perform identical arithmetic, so resuming from an
//! unmodified hidden state reproduces the full pass bit for bit.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{relu, softmax_stable, Bindings, Graph, Matrix, ParameterSet, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => relu(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    /// Number of hidden layers.
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    /// Layer whose output gets interpolated, `1..=depth`.
    pub mix_layer: usize,
    pub class_count: usize,
}

/// `ceil(0.75 * depth)`: the same relative position as layer 9 of 12.
pub fn default_mix_layer(depth: usize) -> usize {
    (3 * depth).div_ceil(4).max(1)
}

impl EncoderConfig {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            depth: 6,
            width: 32,
            activation: Activation::Tanh,
            mix_layer: default_mix_layer(6),
            class_count: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 {
            return Err(Error::Config("input_dim must be >= 1".into()));
        }
        if self.width < 2 {
            return Err(Error::Config("width must be >= 2".into()));
        }
        if self.class_count < 2 {
            return Err(Error::Config("class_count must be >= 2".into()));
        }
        if self.mix_layer < 1 || self.mix_layer > self.depth {
            return Err(Error::Config(format!(
                "mix layer {} outside 1..={}",
                self.mix_layer, self.depth
            )));
        }
        Ok(())
    }

    fn layer_shapes(&self) -> Vec<(String, usize, usize)> {
        let mut shapes = Vec::new();
        for i in 1..=self.depth {
            let fan_in = if i == 1 { self.input_dim } else { self.width };
            shapes.push((weight_name(i), fan_in, self.width));
            shapes.push((bias_name(i), 1, self.width));
        }
        shapes.push((CLASS_W.into(), self.width, self.class_count));
        shapes.push((CLASS_B.into(), 1, self.class_count));
        shapes.push((RECON_W.into(), self.width, self.input_dim));
        shapes.push((RECON_B.into(), 1, self.input_dim));
        shapes
    }
}

pub const CLASS_W: &str = "class_head.weight";
pub const CLASS_B: &str = "class_head.bias";
pub const RECON_W: &str = "recon_head.weight";
pub const RECON_B: &str = "recon_head.bias";

fn weight_name(i: usize) -> String {
    format!("layer{i}.weight")
}

fn bias_name(i: usize) -> String {
    format!("layer{i}.bias")
}

/// True for parameters belonging to the classification head.
pub fn is_class_head(name: &str) -> bool {
    name.starts_with("class_head.")
}

/// True for parameters belonging to the reconstruction head.
pub fn is_recon_head(name: &str) -> bool {
    name.starts_with("recon_head.")
}

/// Length-C probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let sum: f64 = entries.iter().sum();
        if entries.is_empty() || entries.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::Contract(format!("not a probability vector: {entries:?}")));
        }
        Ok(Self(entries))
    }

    pub fn one_hot(class: usize, class_count: usize) -> Result<Self> {
        if class >= class_count {
            return Err(Error::Contract(format!("class {class} >= class count {class_count}")));
        }
        let mut v = alloc::vec![0.0; class_count];
        v[class] = 1.0;
        Ok(Self(v))
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest entry; ties go to the lower class index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, p) in self.0.iter().enumerate().skip(1) {
            if *p > self.0[best] {
                best = j;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }
}

/// Model prediction for an unlabeled row, with its confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabel {
    pub probs: ProbVector,
    /// Max entry of `probs`.
    pub confidence: f64,
}

impl PseudoLabel {
    pub fn from_probs(probs: ProbVector) -> Self {
        let confidence = probs.max();
        Self { probs, confidence }
    }

    pub fn class(&self) -> usize {
        self.probs.argmax()
    }
}

/// Activations after layer `layer_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub layer_index: usize,
    pub activations: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    params: ParameterSet,
}

impl Encoder {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut params = ParameterSet::new();
        for (name, rows, cols) in config.layer_shapes() {
            let m = if name.ends_with(".bias") {
                Matrix::zeros(1, cols)
            } else {
                glorot(rows, cols, rng)
            };
            params.insert(name, m)?;
        }
        Ok(Self { config, params })
    }

    /// All parameters zero.
    pub fn zeros(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParameterSet::new();
        for (name, rows, cols) in config.layer_shapes() {
            params.insert(name, Matrix::zeros(rows, cols))?;
        }
        Ok(Self { config, params })
    }

    /// Rebuilds an encoder from stored parameters, checking names and shapes.
    pub fn from_parameters(config: EncoderConfig, params: ParameterSet) -> Result<Self> {
        config.validate()?;
        let shapes = config.layer_shapes();
        if shapes.len() != params.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for ((name, rows, cols), (got_name, m)) in shapes.iter().zip(params.iter()) {
            if name != got_name || m.shape() != (*rows, *cols) {
                return Err(Error::Config(format!(
                    "parameter `{got_name}` {:?} does not match expected `{name}` ({rows}, {cols})",
                    m.shape()
                )));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    fn p(&self, name: &str) -> &Matrix {
        // names are fixed by layer_shapes
        self.params.get(name).expect("encoder parameter present")
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.config.input_dim {
            return Err(Error::Dimension {
                op: "encoder input (expected d columns)",
                left: (batch.rows(), self.config.input_dim),
                right: batch.shape(),
            });
        }
        Ok(())
    }

    fn dense(&self, x: &Matrix, layer: usize) -> Result<Matrix> {
        let z = x.matmul(self.p(&weight_name(layer)))?.add_row(self.p(&bias_name(layer)))?;
        let act = self.config.activation;
        Ok(z.map(|v| act.apply(v)))
    }

    pub fn forward_to_layer(&self, batch: &Matrix, layer: usize) -> Result<HiddenState> {
        self.check_input(batch)?;
        if layer < 1 || layer > self.config.depth {
            return Err(Error::Config(format!(
                "layer {layer} outside 1..={}",
                self.config.depth
            )));
        }
        let mut h = self.dense(batch, 1)?;
        for l in 2..=layer {
            h = self.dense(&h, l)?;
        }
        Ok(HiddenState {
            layer_index: layer,
            activations: h,
        })
    }

    fn trunk_from(&self, h: &HiddenState) -> Result<Matrix> {
        let depth = self.config.depth;
        if h.layer_index < 1 || h.layer_index > depth {
            return Err(Error::Config(format!(
                "hidden state layer {} outside 1..={depth}",
                h.layer_index
            )));
        }
        if h.activations.cols() != self.config.width {
            return Err(Error::dim("forward_from_layer", h.activations.shape(), (h.activations.rows(), self.config.width)));
        }
        let mut x = h.activations.clone();
        for l in h.layer_index + 1..=depth {
            x = self.dense(&x, l)?;
        }
        Ok(x)
    }

    /// Applies layers after `h.layer_index`, then the class head.
    pub fn forward_from_layer(&self, h: &HiddenState) -> Result<Matrix> {
        let top = self.trunk_from(h)?;
        top.matmul(self.p(CLASS_W))?.add_row(self.p(CLASS_B))
    }

    pub fn forward_full(&self, batch: &Matrix) -> Result<Matrix> {
        let h = self.forward_to_layer(batch, self.config.depth)?;
        self.forward_from_layer(&h)
    }

    /// Class probabilities, one row per input row.
    pub fn predict_proba(&self, batch: &Matrix) -> Result<Matrix> {
        softmax_stable(&self.forward_full(batch)?)
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(batch)?.row_argmax())
    }

    pub fn pseudo_label(&self, batch: &Matrix) -> Result<Vec<PseudoLabel>> {
        let probs = self.predict_proba(batch)?;
        (0..probs.rows())
            .map(|r| Ok(PseudoLabel::from_probs(ProbVector::new(probs.row(r).to_vec())?)))
            .collect()
    }

    pub fn reconstruct(&self, masked: &Matrix) -> Result<Matrix> {
        let h = self.forward_to_layer(masked, self.config.depth)?;
        h.activations.matmul(self.p(RECON_W))?.add_row(self.p(RECON_B))
    }

    /// Records the encoder's parameters on `graph`.
    pub fn bind(&self, graph: &mut Graph) -> (Bindings, EncoderVars) {
        let b = self.params.bind(graph);
        let vars = EncoderVars::new(&self.config, &b).expect("bindings come from this encoder");
        (b, vars)
    }
}

pub(crate) fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let limit = libm::sqrt(6.0 / (rows + cols) as f64);
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
    Matrix::new(rows, cols, data).expect("finite init")
}

/// Graph handles for an encoder's parameters.
#[derive(Debug, Clone)]
pub struct EncoderVars {
    config: EncoderConfig,
    layers: Vec<(Var, Var)>,
    class_head: (Var, Var),
    recon_head: (Var, Var),
}

impl EncoderVars {
    /// Looks up encoder parameter handles by name, so any binding of an
    /// encoder-shaped [`ParameterSet`] works (including perturbed copies).
    pub fn new(config: &EncoderConfig, b: &Bindings) -> Result<Self> {
        let layers = (1..=config.depth)
            .map(|i| Ok((b.get(&weight_name(i))?, b.get(&bias_name(i))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: *config,
            layers,
            class_head: (b.get(CLASS_W)?, b.get(CLASS_B)?),
            recon_head: (b.get(RECON_W)?, b.get(RECON_B)?),
        })
    }

    fn dense(&self, g: &mut Graph, x: Var, layer: usize) -> Result<Var> {
        let (w, b) = self.layers[layer - 1];
        let z = g.matmul(x, w)?;
        let z = g.add_row(z, b)?;
        match self.config.activation {
            Activation::Tanh => g.tanh(z),
            Activation::Relu => g.relu(z),
        }
    }

    /// Trunk output after `layer`.
    pub fn to_layer(&self, g: &mut Graph, x: Var, layer: usize) -> Result<Var> {
        if g.value(x).cols() != self.config.input_dim {
            return Err(Error::dim("encoder input", g.value(x).shape(), (g.value(x).rows(), self.config.input_dim)));
        }
        if layer < 1 || layer > self.config.depth {
            return Err(Error::Config(format!("layer {layer} outside 1..={}", self.config.depth)));
        }
        let mut h = self.dense(g, x, 1)?;
        for l in 2..=layer {
            h = self.dense(g, h, l)?;
        }
        Ok(h)
    }

    /// Class logits from a hidden state at `layer`.
    pub fn from_layer(&self, g: &mut Graph, h: Var, layer: usize) -> Result<Var> {
        if layer < 1 || layer > self.config.depth {
            return Err(Error::Config(format!("layer {layer} outside 1..={}", self.config.depth)));
        }
        let mut x = h;
        for l in layer + 1..=self.config.depth {
            x = self.dense(g, x, l)?;
        }
        let z = g.matmul(x, self.class_head.0)?;
        g.add_row(z, self.class_head.1)
    }

    pub fn logits(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let h = self.to_layer(g, x, self.config.depth)?;
        self.from_layer(g, h, self.config.depth)
    }

    pub fn reconstruct(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let h = self.to_layer(g, x, self.config.depth)?;
        let z = g.matmul(h, self.recon_head.0)?;
        g.add_row(z, self.recon_head.1)
    }
}
