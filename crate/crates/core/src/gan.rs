//! Per-class generative adversarial networks used to balance and expand a
//! dataset before it is split.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, Label, Sample};
use crate::encoder::{glorot, Activation};
use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Bindings, Graph, Matrix, ParameterSet, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub gen_widths: Vec<usize>,
    pub disc_widths: Vec<usize>,
    pub steps: usize,
    pub batch: usize,
    /// Adam step size for both players.
    pub lr: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            gen_widths: vec![32, 32],
            disc_widths: vec![32, 16],
            steps: 1000,
            batch: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 1 {
            return Err(Error::Config("gan latent_dim must be >= 1".into()));
        }
        if self.steps < 1 {
            return Err(Error::Config("gan steps must be >= 1".into()));
        }
        if self.batch < 1 {
            return Err(Error::Config("gan batch must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("gan lr must be > 0, got {}", self.lr)));
        }
        if self.gen_widths.contains(&0) || self.disc_widths.contains(&0) {
            return Err(Error::Config("gan layer widths must be >= 1".into()));
        }
        Ok(())
    }
}

/// A dense stack: `hidden` activation between layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    prefix: &'static str,
    dims: Vec<usize>,
    hidden: Activation,
}

impl Mlp {
    pub fn new(prefix: &'static str, input: usize, widths: &[usize], output: usize, hidden: Activation) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(widths);
        dims.push(output);
        Self { prefix, dims, hidden }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty dims")
    }

    fn names(&self, i: usize) -> (alloc::string::String, alloc::string::String) {
        (
            format!("{}{}.weight", self.prefix, i + 1),
            format!("{}{}.bias", self.prefix, i + 1),
        )
    }

    fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn init<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<ParameterSet> {
        let mut p = ParameterSet::new();
        for i in 0..self.layers() {
            let (w, b) = self.names(i);
            p.insert(w, glorot(self.dims[i], self.dims[i + 1], rng))?;
            p.insert(b, Matrix::zeros(1, self.dims[i + 1]))?;
        }
        Ok(p)
    }

    pub fn forward(&self, params: &ParameterSet, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for i in 0..self.layers() {
            let (w, b) = self.names(i);
            let w = params.get(&w).ok_or_else(|| Error::Config(format!("missing `{w}`")))?;
            let b = params.get(&b).ok_or_else(|| Error::Config(format!("missing `{b}`")))?;
            h = h.matmul(w)?.add_row(b)?;
            if i + 1 < self.layers() {
                let act = self.hidden;
                h = h.map(|v| act.apply(v));
            }
        }
        Ok(h)
    }

    /// Graph forward using `vars(name)` for each parameter.
    fn forward_graph(&self, g: &mut Graph, x: Var, mut vars: impl FnMut(&mut Graph, &str) -> Result<Var>) -> Result<Var> {
        let mut h = x;
        for i in 0..self.layers() {
            let (wn, bn) = self.names(i);
            let w = vars(g, &wn)?;
            let b = vars(g, &bn)?;
            let z = g.matmul(h, w)?;
            h = g.add_row(z, b)?;
            if i + 1 < self.layers() {
                h = match self.hidden {
                    Activation::Tanh => g.tanh(h)?,
                    Activation::Relu => g.relu(h)?,
                };
            }
        }
        Ok(h)
    }

    /// Forward with trainable parameters taken from `bindings`.
    pub fn forward_bound(&self, g: &mut Graph, bindings: &Bindings, x: Var) -> Result<Var> {
        self.forward_graph(g, x, |_, n| bindings.get(n))
    }

    /// Forward with `params` recorded as constants (no gradient reaches them).
    pub fn forward_frozen(&self, g: &mut Graph, params: &ParameterSet, x: Var) -> Result<Var> {
        self.forward_graph(g, x, |g, n| {
            let m = params.get(n).ok_or_else(|| Error::Config(format!("missing `{n}`")))?;
            Ok(g.constant(m.clone()))
        })
    }
}

pub fn generator_net(latent_dim: usize, widths: &[usize], d: usize) -> Mlp {
    Mlp::new("gen", latent_dim, widths, d, Activation::Tanh)
}

pub fn discriminator_net(d: usize, widths: &[usize]) -> Mlp {
    Mlp::new("disc", d, widths, 1, Activation::Relu)
}

/// Discriminator loss to minimize:
/// `mean softplus(-D(real)) + mean softplus(D(fake))`, which is the negated
/// `mean log sigmoid(D(real)) + mean log(1 - sigmoid(D(fake)))`.
/// The generator is frozen.
pub fn discriminator_objective(
    g: &mut Graph,
    disc: &Mlp,
    disc_bindings: &Bindings,
    gen: &Mlp,
    gen_params: &ParameterSet,
    real: &Matrix,
    z: &Matrix,
) -> Result<Var> {
    let zv = g.constant(z.clone());
    let fake = gen.forward_frozen(g, gen_params, zv)?;
    let fake = g.detach(fake);
    let real = g.constant(real.clone());
    let real_logit = disc.forward_bound(g, disc_bindings, real)?;
    let fake_logit = disc.forward_bound(g, disc_bindings, fake)?;
    let neg = g.scale(real_logit, -1.0)?;
    let a = g.softplus(neg)?;
    let a = g.mean(a)?;
    let b = g.softplus(fake_logit)?;
    let b = g.mean(b)?;
    g.add(a, b)
}

/// Non-saturating generator loss `mean softplus(-D(G(z)))`, i.e.
/// `-mean log sigmoid(D(G(z)))`. The discriminator is frozen.
pub fn generator_objective(
    g: &mut Graph,
    gen: &Mlp,
    gen_bindings: &Bindings,
    disc: &Mlp,
    disc_params: &ParameterSet,
    z: &Matrix,
) -> Result<Var> {
    let zv = g.constant(z.clone());
    let fake = gen.forward_bound(g, gen_bindings, zv)?;
    let logit = disc.forward_frozen(g, disc_params, fake)?;
    let neg = g.scale(logit, -1.0)?;
    let l = g.softplus(neg)?;
    g.mean(l)
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    lr: f64,
}

const BETA1: f64 = 0.5;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const EMA_DECAY: f64 = 0.99;

impl Adam {
    fn new(params: &ParameterSet, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, m)| vec![0.0; m.data().len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut ParameterSet, g: &Graph, b: &Bindings) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(BETA2, self.t as f64);
        for (k, ((_, value), (_, var))) in params.iter_mut().zip(b.iter()).enumerate() {
            let grad = g.gradient(var).data();
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, p) in value.data_mut().iter_mut().enumerate() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
                *p -= self.lr * (m[i] / c1) / (libm::sqrt(v[i] / c2) + ADAM_EPS);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: ParameterSet,
    pub discriminator: ParameterSet,
    pub class_id: usize,
    /// Per-feature `(min, max)` of the training rows.
    pub feature_bounds: Vec<(f64, f64)>,
    pub gen_net: Mlp,
    pub disc_net: Mlp,
}

impl GanModel {
    pub fn dim(&self) -> usize {
        self.feature_bounds.len()
    }

    pub fn discriminate(&self, x: &Matrix) -> Result<Vec<f64>> {
        let logits = self.disc_net.forward(&self.discriminator, x)?;
        Ok(logits.data().iter().map(|l| sigmoid(*l)).collect())
    }
}

/// Alternating trainer for one class. Exposes single steps so callers can
/// probe either player at a frozen point.
#[derive(Debug, Clone)]
pub struct GanTrainer {
    config: GanConfig,
    real: Matrix,
    gen_net: Mlp,
    disc_net: Mlp,
    generator: ParameterSet,
    /// Exponential moving average of the generator weights; this is what
    /// `into_model` returns because it damps the adversarial oscillation.
    gen_average: ParameterSet,
    discriminator: ParameterSet,
    gen_opt: Adam,
    disc_opt: Adam,
    rng: ChaCha8Rng,
    step: usize,
}

impl GanTrainer {
    pub fn new(real: Matrix, config: GanConfig) -> Result<Self> {
        config.validate()?;
        if real.rows() < 2 * config.batch {
            return Err(Error::Data(format!(
                "gan needs at least {} real rows, got {}",
                2 * config.batch,
                real.rows()
            )));
        }
        let d = real.cols();
        let gen_net = generator_net(config.latent_dim, &config.gen_widths, d);
        let disc_net = discriminator_net(d, &config.disc_widths);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let generator = gen_net.init(&mut rng)?;
        let discriminator = disc_net.init(&mut rng)?;
        Ok(Self {
            gen_opt: Adam::new(&generator, config.lr),
            disc_opt: Adam::new(&discriminator, config.lr),
            config,
            real,
            gen_net,
            disc_net,
            gen_average: generator.clone(),
            generator,
            discriminator,
            rng,
            step: 0,
        })
    }

    pub fn generator(&self) -> &ParameterSet {
        &self.generator
    }

    pub fn discriminator(&self) -> &ParameterSet {
        &self.discriminator
    }

    pub fn gen_net(&self) -> &Mlp {
        &self.gen_net
    }

    pub fn disc_net(&self) -> &Mlp {
        &self.disc_net
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn sample_latent(&mut self, n: usize) -> Matrix {
        latent(n, self.config.latent_dim, &mut self.rng)
    }

    pub fn sample_real(&mut self) -> Matrix {
        let rows: Vec<usize> = (0..self.real.rows()).collect();
        let pick: Vec<usize> = (0..self.config.batch)
            .map(|_| *rows.choose(&mut self.rng).expect("non-empty"))
            .collect();
        self.real.select_rows(&pick).expect("indices in range")
    }

    fn diverged(&self, who: &str, loss: f64) -> Error {
        Error::Training {
            stage: "gan",
            step: self.step,
            detail: format!("{who} loss is {loss}"),
        }
    }

    /// One discriminator update against the current generator; returns the loss.
    pub fn step_discriminator(&mut self) -> Result<f64> {
        let real = self.sample_real();
        let z = self.sample_latent(self.config.batch);
        let mut g = Graph::new();
        let b = self.discriminator.bind(&mut g);
        let loss = discriminator_objective(&mut g, &self.disc_net, &b, &self.gen_net, &self.generator, &real, &z)
            .map_err(|_| self.diverged("discriminator", f64::NAN))?;
        let value = g.value(loss).value();
        if !value.is_finite() {
            return Err(self.diverged("discriminator", value));
        }
        g.backward(loss)?;
        self.disc_opt.step(&mut self.discriminator, &g, &b);
        Ok(value)
    }

    /// One generator update against the current discriminator; returns the loss.
    pub fn step_generator(&mut self) -> Result<f64> {
        let z = self.sample_latent(self.config.batch);
        let mut g = Graph::new();
        let b = self.generator.bind(&mut g);
        let loss = generator_objective(&mut g, &self.gen_net, &b, &self.disc_net, &self.discriminator, &z)
            .map_err(|_| self.diverged("generator", f64::NAN))?;
        let value = g.value(loss).value();
        if !value.is_finite() {
            return Err(self.diverged("generator", value));
        }
        g.backward(loss)?;
        self.gen_opt.step(&mut self.generator, &g, &b);
        for ((_, avg), (_, cur)) in self.gen_average.iter_mut().zip(self.generator.iter()) {
            for (a, c) in avg.data_mut().iter_mut().zip(cur.data()) {
                *a = EMA_DECAY * *a + (1.0 - EMA_DECAY) * c;
            }
        }
        Ok(value)
    }

    /// Runs the configured number of alternating steps.
    pub fn train(mut self, class_id: usize) -> Result<GanModel> {
        while self.step < self.config.steps {
            self.step_discriminator()?;
            self.step_generator()?;
            self.step += 1;
        }
        Ok(self.into_model(class_id))
    }

    pub fn into_model(self, class_id: usize) -> GanModel {
        let d = self.real.cols();
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for r in 0..self.real.rows() {
            for (j, v) in self.real.row(r).iter().enumerate() {
                bounds[j].0 = bounds[j].0.min(*v);
                bounds[j].1 = bounds[j].1.max(*v);
            }
        }
        GanModel {
            generator: self.gen_average,
            discriminator: self.discriminator,
            class_id,
            feature_bounds: bounds,
            gen_net: self.gen_net,
            disc_net: self.disc_net,
        }
    }
}

fn latent<R: rand::Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Matrix {
    let data = (0..n * k).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::new(n, k, data).expect("finite normals")
}

pub fn train_gan(real: &Matrix, class_id: usize, config: &GanConfig) -> Result<GanModel> {
    GanTrainer::new(real.clone(), config.clone())?.train(class_id)
}

/// `n` generated rows, clamped to the model's feature bounds.
pub fn generate<R: rand::Rng + ?Sized>(model: &GanModel, n: usize, rng: &mut R) -> Result<Matrix> {
    if n < 1 {
        return Err(Error::Config("generate needs n >= 1".into()));
    }
    let z = latent(n, model.gen_net.input_dim(), rng);
    let out = model.gen_net.forward(&model.generator, &z)?;
    let bounds = &model.feature_bounds;
    let d = bounds.len();
    let mut data = out.data().to_vec();
    for (i, v) in data.iter_mut().enumerate() {
        let (lo, hi) = bounds[i % d];
        *v = v.clamp(lo, hi);
    }
    Matrix::new(n, d, data)
}

/// Per-class z-scoring used around GAN training so raw and standardized
/// inputs behave alike.
fn class_scaling(m: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows() as f64;
    let mean: Vec<f64> = m.col_sums().iter().map(|s| s / n).collect();
    let mut var = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (j, v) in m.row(r).iter().enumerate() {
            var[j] += (v - mean[j]) * (v - mean[j]);
        }
    }
    let std = var
        .iter()
        .map(|v| {
            let s = libm::sqrt(v / n);
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Raises every labeled class to `target` rows by appending generated rows
/// flagged as synthetic. Existing rows are kept untouched and in order.
/// Classes already at `target` are left alone, so the operation is idempotent.
pub fn balance_and_expand(dataset: &Dataset, target: usize, config: &GanConfig) -> Result<Dataset> {
    let counts = dataset.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} has no rows to learn from")));
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    if target < max {
        return Err(Error::Config(format!("target {target} is below the largest class count {max}")));
    }
    let mut out = dataset.clone();
    for (class, &have) in counts.iter().enumerate() {
        if have >= target {
            continue;
        }
        let rows = dataset.indices_of_class(class);
        let real_rows: Vec<usize> = rows.iter().copied().filter(|&i| !dataset.samples()[i].synthetic).collect();
        let source = if real_rows.len() >= 2 { real_rows } else { rows };
        let raw = dataset.features_of(&source);
        let (mean, std) = class_scaling(&raw);
        let d = raw.cols();
        let scaled_data = raw.data().iter().enumerate().map(|(i, v)| (v - mean[i % d]) / std[i % d]).collect();
        let scaled = Matrix::new(raw.rows(), d, scaled_data)?;
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(class as u64 + 1);
        // Tiny classes get a smaller batch so training still has two batches of data.
        cfg.batch = cfg.batch.min(scaled.rows() / 2).max(1);
        if scaled.rows() < 2 {
            return Err(Error::Data(format!("class {class} needs at least 2 rows for gan training")));
        }
        log::info!("class {class}: training gan on {} rows, generating {}", scaled.rows(), target - have);
        let model = train_gan(&scaled, class, &cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(7);
        let synth = generate(&model, target - have, &mut rng)?;
        let label = Label::from_class(class)?;
        for r in 0..synth.rows() {
            let features = synth.row(r).iter().enumerate().map(|(j, v)| v * std[j] + mean[j]).collect();
            out.push(Sample {
                features,
                label,
                synthetic: true,
            })?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{grad_check, GradCheckOptions};

    fn blob(n: usize, mean: [f64; 2], std: [f64; 2], seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        for _ in 0..n {
            for j in 0..2 {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(mean[j] + std[j] * z);
            }
        }
        Matrix::new(n, 2, data).unwrap()
    }

    fn small() -> GanConfig {
        GanConfig {
            steps: 5,
            batch: 16,
            ..GanConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(GanConfig { latent_dim: 0, ..small() }.validate().is_err());
        assert!(GanConfig { steps: 0, ..small() }.validate().is_err());
        assert!(small().validate().is_ok());
    }

    #[test]
    fn too_few_rows_is_a_data_error() {
        let real = blob(20, [0.0, 0.0], [1.0, 1.0], 1);
        assert!(matches!(train_gan(&real, 0, &small()), Err(Error::Data(_))));
    }

    #[test]
    fn same_seed_same_generator() {
        let real = blob(64, [0.0, 0.0], [1.0, 1.0], 1);
        let a = train_gan(&real, 0, &small()).unwrap();
        let b = train_gan(&real, 0, &small()).unwrap();
        assert!(a.generator.bit_eq(&b.generator));
        let c = train_gan(&real, 0, &GanConfig { seed: 9, ..small() }).unwrap();
        assert!(!a.generator.bit_eq(&c.generator));
    }

    #[test]
    fn generate_is_clamped_and_repeatable() {
        let real = blob(64, [1.0, -1.0], [0.2, 0.2], 2);
        let model = train_gan(&real, 1, &small()).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = generate(&model, 200, &mut r1).unwrap();
        let b = generate(&model, 200, &mut r2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (200, 2));
        for r in 0..200 {
            for (j, v) in a.row(r).iter().enumerate() {
                let (lo, hi) = model.feature_bounds[j];
                assert!(*v >= lo && *v <= hi);
            }
        }
        assert!(generate(&model, 0, &mut r1).is_err());
    }

    #[test]
    fn both_players_pass_grad_check_at_a_frozen_step() {
        let real = blob(64, [0.5, -0.5], [1.0, 1.0], 4);
        let mut t = GanTrainer::new(real, small()).unwrap();
        for _ in 0..3 {
            t.step_discriminator().unwrap();
            t.step_generator().unwrap();
        }
        let x = t.sample_real();
        let z = t.sample_latent(16);
        let opts = GradCheckOptions::default();
        let (gen, disc) = (t.gen_net().clone(), t.disc_net().clone());
        let gen_params = t.generator().clone();
        let disc_params = t.discriminator().clone();
        let d = grad_check(
            &disc_params,
            |g, b| discriminator_objective(g, &disc, b, &gen, &gen_params, &x, &z),
            opts,
        )
        .unwrap();
        assert!(d.passed, "{d:?}");
        let gr = grad_check(&gen_params, |g, b| generator_objective(g, &gen, b, &disc, &disc_params, &z), opts).unwrap();
        assert!(gr.passed, "{gr:?}");
    }

    #[test]
    fn balance_counts_and_preserves_real_rows() {
        let mut samples = Vec::new();
        let a = blob(90, [0.0, 0.0], [1.0, 1.0], 5);
        let b = blob(10, [3.0, 3.0], [0.5, 0.5], 6);
        for r in 0..90 {
            samples.push(Sample::new(a.row(r).to_vec(), Label::Normal));
        }
        for r in 0..10 {
            samples.push(Sample::new(b.row(r).to_vec(), Label::Incident));
        }
        let ds = Dataset::new(2, samples).unwrap();
        let out = balance_and_expand(&ds, 100, &small()).unwrap();
        assert_eq!(out.class_counts(), [100, 100]);
        assert_eq!(out.synthetic_count(), 100);
        assert_eq!(&out.samples()[..100], ds.samples());
        let again = balance_and_expand(&out, 100, &small()).unwrap();
        assert_eq!(again, out);
        assert!(balance_and_expand(&ds, 50, &small()).is_err());
    }
}
