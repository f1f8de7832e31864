//! Three-stage trainer: masked-reconstruction pretraining, supervised
//! fine-tuning on the labeled split, then semi-supervised fine-tuning with
//! hidden-space mixing over labeled and pseudo-labeled rows.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{self, Dataset, NormStats};
use crate::encoder::{is_class_head, Activation, Encoder, EncoderConfig, PseudoLabel};
use crate::error::{Error, Result};
use crate::gan::{balance_and_expand, GanConfig};
use crate::losses::{combine, cross_entropy_logits, masked_recon_graph, route_losses_graph, KlDirection, LossBreakdown};
use crate::metrics::{compute_metrics, Metrics};
use crate::mixing::{assign_lambdas, mix_pair_targets, mixed_logits, pair_batch, MixPolicy};
use crate::numcore::{Graph, Matrix};

/// Training recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Pretraining and supervised fine-tuning only.
    Supervised,
    /// Hidden-space mixup with Beta-drawn ratios, no augmentation.
    Mt,
    /// Confidence-ratio mixing, no augmentation.
    Pmt,
    /// Confidence-ratio mixing on a GAN-balanced pool.
    Fpmt,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Supervised, Variant::Mt, Variant::Pmt, Variant::Fpmt];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Supervised => "supervised",
            Variant::Mt => "mt",
            Variant::Pmt => "pmt",
            Variant::Fpmt => "fpmt",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Supervised => "Supervised",
            Variant::Mt => "MT",
            Variant::Pmt => "PMT",
            Variant::Fpmt => "FPMT",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "supervised" | "sup" => Ok(Variant::Supervised),
            "mt" => Ok(Variant::Mt),
            "pmt" => Ok(Variant::Pmt),
            "fpmt" => Ok(Variant::Fpmt),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

/// Beta parameter used by the MT variant; concentrates ratios near 0.5.
pub const MT_ALPHA: f64 = 16.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub stage3_epochs: usize,
    pub batch_size: usize,
    /// Trunk learning rate before scaling.
    pub lr_encoder: f64,
    /// Classification-head learning rate before scaling.
    pub lr_head: f64,
    pub lr_scale: f64,
    pub mix_policy: MixPolicy,
    pub mix_layer: usize,
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub w_max: f64,
    pub w_ramp_fraction: f64,
    pub mask_rate: f64,
    pub seed: u64,
    pub gan_enabled: bool,
    pub variant: Variant,
    pub kl_direction: KlDirection,
    pub labeled_per_class: usize,
    pub unlabeled_per_class: usize,
    pub test_per_class: usize,
    pub gan: GanConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::for_variant(Variant::Fpmt)
    }
}

impl PipelineConfig {
    /// Defaults with the variant's augmentation flag and mixing policy.
    pub fn for_variant(variant: Variant) -> Self {
        let mut c = Self {
            stage1_epochs: 20,
            stage2_epochs: 30,
            stage3_epochs: 50,
            batch_size: 64,
            lr_encoder: 1e-5,
            lr_head: 1e-3,
            lr_scale: 100.0,
            mix_policy: MixPolicy::ConfidenceRatio,
            mix_layer: crate::encoder::default_mix_layer(6),
            depth: 6,
            width: 32,
            activation: Activation::Tanh,
            w_max: 1.0,
            w_ramp_fraction: 0.2,
            mask_rate: 0.15,
            seed: 0,
            gan_enabled: true,
            variant,
            kl_direction: KlDirection::default(),
            labeled_per_class: 50,
            unlabeled_per_class: 5000,
            test_per_class: 500,
            gan: GanConfig::default(),
        };
        c.set_variant(variant);
        c
    }

    /// Switches variant, updating the flags it implies.
    pub fn set_variant(&mut self, variant: Variant) {
        self.variant = variant;
        match variant {
            Variant::Fpmt => {
                self.gan_enabled = true;
                self.mix_policy = MixPolicy::ConfidenceRatio;
            }
            Variant::Pmt => {
                self.gan_enabled = false;
                self.mix_policy = MixPolicy::ConfidenceRatio;
            }
            Variant::Mt => {
                self.gan_enabled = false;
                self.mix_policy = MixPolicy::beta(MT_ALPHA);
            }
            Variant::Supervised => {
                self.gan_enabled = false;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        for (name, v) in [
            ("lr_encoder", self.lr_encoder),
            ("lr_head", self.lr_head),
            ("lr_scale", self.lr_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.w_max >= 0.0 && self.w_max.is_finite()) {
            return Err(Error::Config(format!("w_max must be >= 0, got {}", self.w_max)));
        }
        if !(0.0..=1.0).contains(&self.w_ramp_fraction) {
            return Err(Error::Config(format!("w_ramp_fraction must lie in [0, 1], got {}", self.w_ramp_fraction)));
        }
        if !(self.mask_rate > 0.0 && self.mask_rate <= 1.0) {
            return Err(Error::Config(format!("mask_rate must lie in (0, 1], got {}", self.mask_rate)));
        }
        if self.labeled_per_class < 1 || self.unlabeled_per_class < 1 || self.test_per_class < 1 {
            return Err(Error::Config("split counts must be >= 1".into()));
        }
        self.mix_policy.validate()?;
        if self.gan_enabled {
            self.gan.validate()?;
        }
        self.encoder_config(1).validate()
    }

    pub fn encoder_config(&self, input_dim: usize) -> EncoderConfig {
        EncoderConfig {
            input_dim,
            depth: self.depth,
            width: self.width,
            activation: self.activation,
            mix_layer: self.mix_layer,
            class_count: 2,
        }
    }

    fn trunk_rate(&self) -> f64 {
        self.lr_encoder * self.lr_scale
    }

    fn head_rate(&self) -> f64 {
        self.lr_head * self.lr_scale
    }

    /// Consistency weight at stage-3 step `step` of `total`.
    pub fn consistency_weight(&self, step: usize, total: usize) -> f64 {
        let ramp = self.w_ramp_fraction * total as f64;
        if ramp <= 0.0 {
            return self.w_max;
        }
        self.w_max * (step as f64 / ramp).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Pretrain,
    Supervised,
    SemiSupervised,
}

impl Stage {
    pub fn number(self) -> u8 {
        match self {
            Stage::Pretrain => 1,
            Stage::Supervised => 2,
            Stage::SemiSupervised => 3,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Stage::Pretrain => "stage1",
            Stage::Supervised => "stage2",
            Stage::SemiSupervised => "stage3",
        }
    }
}

/// Mean losses over one epoch. For stage 1 the supervised slot holds the
/// reconstruction loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub stage: Stage,
    /// 1-based within its stage.
    pub epoch: usize,
    pub loss: LossBreakdown,
}

/// Hooks into the training loop. Every method has a no-op default.
pub trait TrainObserver {
    fn stage_started(&mut self, _stage: Stage) {}
    fn stage_finished(&mut self, _stage: Stage) {}
    fn epoch_finished(&mut self, _record: &EpochRecord) {}
    /// Called once per stage-3 batch with the encoder state that produced the labels.
    fn pseudo_labeled(&mut self, _step: usize, _encoder: &Encoder, _rows: &Matrix, _labels: &[PseudoLabel]) {}
    /// Milliseconds from some fixed origin, if a clock is available.
    fn clock_ms(&mut self) -> Option<u64> {
        None
    }
}

/// Observer that ignores everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct Silent;

impl TrainObserver for Silent {}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Index into `history` where each stage starts.
    pub stage_starts: [usize; 3],
    pub metrics: Option<Metrics>,
    /// Wall-clock milliseconds per stage, when the observer has a clock.
    pub stage_ms: [Option<u64>; 3],
    pub seed: u64,
}

impl TrainReport {
    fn new(seed: u64) -> Self {
        Self {
            history: Vec::new(),
            stage_starts: [0; 3],
            metrics: None,
            stage_ms: [None; 3],
            seed,
        }
    }

    pub fn stage_history(&self, stage: Stage) -> impl Iterator<Item = &EpochRecord> {
        self.history.iter().filter(move |r| r.stage == stage)
    }
}

fn training_error(stage: Stage, step: usize, err: Error) -> Error {
    match err {
        Error::NonFinite { op } => Error::Training {
            stage: stage.tag(),
            step,
            detail: format!("{op} produced a non-finite value"),
        },
        other => other,
    }
}

fn check_finite(stage: Stage, step: usize, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Training {
            stage: stage.tag(),
            step,
            detail: format!("loss is {value}"),
        })
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn shuffled_batches(n: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch).map(<[usize]>::to_vec).collect()
}

fn one_hot_targets(ds: &Dataset, rows: &[usize]) -> Result<Matrix> {
    let mut t = Matrix::zeros(rows.len(), ds.class_count);
    for (i, &r) in rows.iter().enumerate() {
        let c = ds.samples()[r]
            .label
            .class()
            .ok_or_else(|| Error::Contract("labeled split holds an unlabeled row".into()))?;
        t.set(i, c, 1.0);
    }
    Ok(t)
}

/// Masked-feature reconstruction: masked entries are set to 0 and the
/// reconstruction head must recover them. Every parameter moves at the trunk rate.
pub fn stage1_pretrain(
    encoder: &mut Encoder,
    features: &Matrix,
    config: &PipelineConfig,
    observer: &mut dyn TrainObserver,
    history: &mut Vec<EpochRecord>,
) -> Result<()> {
    let stage = Stage::Pretrain;
    let mut rng = rng_for(config.seed, 11);
    let rate = config.trunk_rate();
    let mut step = 0;
    for epoch in 1..=config.stage1_epochs {
        if features.rows() == 0 {
            return Err(Error::Data("no rows to pretrain on".into()));
        }
        let mut total = 0.0;
        let batches = shuffled_batches(features.rows(), config.batch_size, &mut rng);
        for rows in &batches {
            let x = features.select_rows(rows)?;
            let mut mask = Matrix::zeros(x.rows(), x.cols());
            let mut any = false;
            for i in 0..x.rows() {
                for j in 0..x.cols() {
                    if rng.random::<f64>() < config.mask_rate {
                        mask.set(i, j, 1.0);
                        any = true;
                    }
                }
            }
            if !any {
                let i = rng.random_range(0..x.rows());
                let j = rng.random_range(0..x.cols());
                mask.set(i, j, 1.0);
            }
            let masked = x.zip_map(&mask, "mask", |v, m| if m == 1.0 { 0.0 } else { v })?;
            let mut g = Graph::new();
            let (b, vars) = encoder.bind(&mut g);
            let loss = (|| {
                let input = g.constant(masked);
                let recon = vars.reconstruct(&mut g, input)?;
                masked_recon_graph(&mut g, &x, &mask, recon)
            })()
            .map_err(|e| training_error(stage, step, e))?;
            let value = g.value(loss).value();
            check_finite(stage, step, value)?;
            g.backward(loss).map_err(|e| training_error(stage, step, e))?;
            encoder.params_mut().sgd_step(&g, &b, |_| rate);
            total += value;
            step += 1;
        }
        let record = EpochRecord {
            stage,
            epoch,
            loss: combine(total / batches.len() as f64, 0.0, 0.0),
        };
        observer.epoch_finished(&record);
        history.push(record);
    }
    Ok(())
}

/// Cross-entropy fine-tuning on the labeled split with two-tier rates.
pub fn stage2_supervised(
    encoder: &mut Encoder,
    labeled: &Dataset,
    config: &PipelineConfig,
    observer: &mut dyn TrainObserver,
    history: &mut Vec<EpochRecord>,
) -> Result<()> {
    let stage = Stage::Supervised;
    if config.stage2_epochs > 0 && labeled.is_empty() {
        return Err(Error::Data("labeled split is empty".into()));
    }
    let mut rng = rng_for(config.seed, 12);
    let (trunk, head) = (config.trunk_rate(), config.head_rate());
    let mut step = 0;
    for epoch in 1..=config.stage2_epochs {
        let mut total = 0.0;
        let batches = shuffled_batches(labeled.len(), config.batch_size, &mut rng);
        for rows in &batches {
            let x = labeled.features_of(rows);
            let t = one_hot_targets(labeled, rows)?;
            let mut g = Graph::new();
            let (b, vars) = encoder.bind(&mut g);
            let loss = (|| {
                let input = g.constant(x);
                let logits = vars.logits(&mut g, input)?;
                cross_entropy_logits(&mut g, logits, &t)
            })()
            .map_err(|e| training_error(stage, step, e))?;
            let value = g.value(loss).value();
            check_finite(stage, step, value)?;
            g.backward(loss).map_err(|e| training_error(stage, step, e))?;
            encoder
                .params_mut()
                .sgd_step(&g, &b, |n| if is_class_head(n) { head } else { trunk });
            total += value;
            step += 1;
        }
        let record = EpochRecord {
            stage,
            epoch,
            loss: combine(total / batches.len() as f64, 0.0, 0.0),
        };
        observer.epoch_finished(&record);
        history.push(record);
    }
    Ok(())
}

/// Endless reshuffled walk over `0..n`.
struct Cycler {
    order: Vec<usize>,
    pos: usize,
}

impl Cycler {
    fn new(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self { order, pos: 0 }
    }

    fn take(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Semi-supervised fine-tuning. Each batch holds equal numbers of labeled
/// and unlabeled rows; unlabeled rows are pseudo-labeled by the current
/// encoder, every row is paired with a random partner, hidden states are
/// mixed at the configured layer, and the routed loss takes one step.
pub fn stage3_semisupervised(
    encoder: &mut Encoder,
    labeled: &Dataset,
    unlabeled: &Dataset,
    config: &PipelineConfig,
    observer: &mut dyn TrainObserver,
    history: &mut Vec<EpochRecord>,
) -> Result<()> {
    let stage = Stage::SemiSupervised;
    if config.stage3_epochs == 0 {
        return Ok(());
    }
    if labeled.is_empty() {
        return Err(Error::Data("labeled split is empty".into()));
    }
    let mut rng = rng_for(config.seed, 13);
    let (trunk, head) = (config.trunk_rate(), config.head_rate());
    let per_side = (config.batch_size / 2).max(1);
    let layer = config.mix_layer;
    let class_count = labeled.class_count;
    let unlabeled_x = unlabeled.features();

    let batches_per_epoch = if unlabeled.is_empty() {
        log::warn!("unlabeled split is empty; stage 3 falls back to supervised batches");
        labeled.len().div_ceil(per_side)
    } else {
        unlabeled.len().div_ceil(per_side)
    };
    let total_steps = batches_per_epoch * config.stage3_epochs;
    let mut cycler = Cycler::new(labeled.len(), &mut rng);
    let mut step = 0;

    for epoch in 1..=config.stage3_epochs {
        let unl_batches = if unlabeled.is_empty() {
            vec![Vec::new(); batches_per_epoch]
        } else {
            shuffled_batches(unlabeled.len(), per_side, &mut rng)
        };
        let (mut sum_x, mut sum_u) = (0.0, 0.0);
        let mut w = 0.0;
        for urows in &unl_batches {
            w = config.consistency_weight(step, total_steps);
            let n_l = if urows.is_empty() { per_side } else { urows.len() };
            let lrows = cycler.take(n_l, &mut rng);
            let xl = labeled.features_of(&lrows);
            let xu = unlabeled_x.select_rows(urows)?;

            // Fresh pseudo-labels from the encoder as it enters this batch.
            let pseudo = if urows.is_empty() {
                Vec::new()
            } else {
                encoder.pseudo_label(&xu).map_err(|e| training_error(stage, step, e))?
            };
            observer.pseudo_labeled(step, encoder, &xu, &pseudo);

            let mut targets = Matrix::zeros(n_l + urows.len(), class_count);
            let mut confidences = vec![1.0; n_l];
            for (i, &r) in lrows.iter().enumerate() {
                let c = labeled.samples()[r]
                    .label
                    .class()
                    .ok_or_else(|| Error::Contract("labeled split holds an unlabeled row".into()))?;
                targets.set(i, c, 1.0);
            }
            for (k, pl) in pseudo.iter().enumerate() {
                for (j, p) in pl.probs.entries().iter().enumerate() {
                    targets.set(n_l + k, j, *p);
                }
                confidences.push(pl.confidence);
            }

            let mut pairs = pair_batch(n_l, urows.len(), &mut rng)?;
            assign_lambdas(&mut pairs, &config.mix_policy, &confidences, &mut rng)?;
            let mixed_targets = mix_pair_targets(&pairs, &targets)?;
            let x = if urows.is_empty() { xl } else { xl.vstack(&xu)? };

            let mut g = Graph::new();
            let (b, vars) = encoder.bind(&mut g);
            let routed = (|| {
                let input = g.constant(x);
                let logits = mixed_logits(&mut g, &vars, input, &pairs, layer)?;
                route_losses_graph(&mut g, &pairs, logits, &mixed_targets, w, config.kl_direction)
            })()
            .map_err(|e| training_error(stage, step, e))?;
            check_finite(stage, step, routed.breakdown.total)?;
            g.backward(routed.total).map_err(|e| training_error(stage, step, e))?;
            encoder
                .params_mut()
                .sgd_step(&g, &b, |n| if is_class_head(n) { head } else { trunk });
            sum_x += routed.breakdown.supervised;
            sum_u += routed.breakdown.consistency;
            step += 1;
        }
        let n = unl_batches.len() as f64;
        let record = EpochRecord {
            stage,
            epoch,
            loss: combine(sum_x / n, sum_u / n, w),
        };
        observer.epoch_finished(&record);
        history.push(record);
    }
    Ok(())
}

/// Class predictions of `encoder` on `ds`, scored against its labels.
pub fn evaluate(encoder: &Encoder, ds: &Dataset) -> Result<Metrics> {
    let truths: Vec<usize> = ds
        .samples()
        .iter()
        .map(|s| {
            s.label
                .class()
                .ok_or_else(|| Error::Protocol("evaluation rows must be labeled".into()))
        })
        .collect::<Result<_>>()?;
    let preds = encoder.predict(&ds.features())?;
    compute_metrics(&preds, &truths)
}

/// Sizes of the data that went into a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSummary {
    pub labeled: usize,
    pub unlabeled: usize,
    pub test: usize,
    pub synthetic_added: usize,
    pub dropped_features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub encoder: Encoder,
    pub norm_stats: NormStats,
    pub report: TrainReport,
    pub split: SplitSummary,
}

fn timed<T>(
    stage: Stage,
    report: &mut TrainReport,
    observer: &mut dyn TrainObserver,
    f: impl FnOnce(&mut dyn TrainObserver, &mut Vec<EpochRecord>) -> Result<T>,
) -> Result<T> {
    let i = (stage.number() - 1) as usize;
    report.stage_starts[i] = report.history.len();
    observer.stage_started(stage);
    let start = observer.clock_ms();
    let out = f(observer, &mut report.history).map_err(|e| e.in_stage(stage.tag()))?;
    let end = observer.clock_ms();
    report.stage_ms[i] = match (start, end) {
        (Some(a), Some(b)) => Some(b.saturating_sub(a)),
        _ => None,
    };
    observer.stage_finished(stage);
    Ok(out)
}

/// Full run: standardize, hold out the test split, optionally balance the
/// rest with GANs, split labeled/unlabeled, train the three stages, and
/// score the test split. Stage order is fixed.
pub fn run_fpmt(dataset: &Dataset, config: &PipelineConfig, observer: &mut dyn TrainObserver) -> Result<RunOutput> {
    config.validate()?;
    let (std_ds, norm_stats, dropped) = data::standardize(dataset).map_err(|e| e.in_stage("standardize"))?;
    let (rest, test, _, _) =
        data::take_test(&std_ds, config.test_per_class, config.seed).map_err(|e| e.in_stage("split"))?;

    let before = rest.len();
    let pool = if config.gan_enabled {
        let counts = rest.class_counts();
        let target = counts
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(config.labeled_per_class + config.unlabeled_per_class);
        let mut gan = config.gan.clone();
        gan.seed = config.seed ^ gan.seed;
        balance_and_expand(&rest, target, &gan).map_err(|e| e.in_stage("augment"))?
    } else {
        rest
    };
    let synthetic_added = pool.len() - before;

    let (labeled, unlabeled, _sealed, _, _) = data::split_train(
        &pool,
        config.labeled_per_class,
        config.unlabeled_per_class,
        config.seed,
        !config.gan_enabled,
    )
    .map_err(|e| e.in_stage("split"))?;

    let mut init_rng = rng_for(config.seed, 10);
    let mut encoder = Encoder::new(config.encoder_config(std_ds.dim()), &mut init_rng)?;
    let mut report = TrainReport::new(config.seed);

    let pool_x = pool.features();
    timed(Stage::Pretrain, &mut report, observer, |o, h| {
        stage1_pretrain(&mut encoder, &pool_x, config, o, h)
    })?;
    timed(Stage::Supervised, &mut report, observer, |o, h| {
        stage2_supervised(&mut encoder, &labeled, config, o, h)
    })?;
    if config.variant != Variant::Supervised {
        timed(Stage::SemiSupervised, &mut report, observer, |o, h| {
            stage3_semisupervised(&mut encoder, &labeled, &unlabeled, config, o, h)
        })?;
    } else {
        report.stage_starts[2] = report.history.len();
    }

    let metrics = evaluate(&encoder, &test).map_err(|e| e.in_stage("evaluate"))?;
    report.metrics = Some(metrics);
    Ok(RunOutput {
        encoder,
        norm_stats,
        report,
        split: SplitSummary {
            labeled: labeled.len(),
            unlabeled: unlabeled.len(),
            test: test.len(),
            synthetic_added,
            dropped_features: dropped,
        },
    })
}

/// Human-readable one-line description of a config, for logs.
pub fn describe(config: &PipelineConfig) -> String {
    format!(
        "{} seed={} epochs={}/{}/{} batch={} labels={} unlabeled={} gan={}",
        config.variant.label(),
        config.seed,
        config.stage1_epochs,
        config.stage2_epochs,
        config.stage3_epochs,
        config.batch_size,
        config.labeled_per_class,
        config.unlabeled_per_class,
        config.gan_enabled
    )
}
