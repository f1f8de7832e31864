//! Samples, datasets, the synthetic detector-data generator, standardization
//! and stratified splitting.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result, Shortfall};
use crate::numcore::Matrix;

pub const NORMAL: usize = 0;
pub const INCIDENT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Incident,
    Unlabeled,
}

impl Label {
    pub fn class(self) -> Option<usize> {
        match self {
            Label::Normal => Some(NORMAL),
            Label::Incident => Some(INCIDENT),
            Label::Unlabeled => None,
        }
    }

    pub fn from_class(class: usize) -> Result<Self> {
        match class {
            NORMAL => Ok(Label::Normal),
            INCIDENT => Ok(Label::Incident),
            other => Err(Error::Data(format!("class {other} is not binary"))),
        }
    }

    /// CSV encoding: 0, 1, or −1 for unlabeled.
    pub fn code(self) -> i8 {
        match self {
            Label::Normal => 0,
            Label::Incident => 1,
            Label::Unlabeled => -1,
        }
    }

    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            0 => Ok(Label::Normal),
            1 => Ok(Label::Incident),
            -1 => Ok(Label::Unlabeled),
            other => Err(Error::Data(format!("unknown label value {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
    /// Produced by a generative model rather than observed.
    pub synthetic: bool,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        Self {
            features,
            label,
            synthetic: false,
        }
    }
}

/// Per-feature statistics fitted on real rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features that survive standardization; constant ones are dropped.
    pub keep: Vec<bool>,
}

impl NormStats {
    pub fn raw_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn kept_dim(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.raw_dim() {
            return Err(Error::dim("standardize", (1, self.raw_dim()), (1, row.len())));
        }
        Ok(row
            .iter()
            .enumerate()
            .filter(|(j, _)| self.keep[*j])
            .map(|(j, v)| (v - self.mean[j]) / self.std[j])
            .collect())
    }

    /// Standardizes another dataset with these statistics.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        let samples = dataset
            .samples()
            .iter()
            .map(|s| {
                Ok(Sample {
                    features: self.apply_row(&s.features)?,
                    label: s.label,
                    synthetic: s.synthetic,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Dataset::new(self.kept_dim(), samples)?;
        out.norm_stats = Some(self.clone());
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
    pub norm_stats: Option<NormStats>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(dim: usize, samples: Vec<Sample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::Data(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.features.len()
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("sample {i} has a non-finite feature")));
            }
        }
        Ok(Self {
            samples,
            dim,
            norm_stats: None,
            class_count: 2,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if sample.features.len() != self.dim || sample.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("pushed sample does not match dataset".into()));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            dim: self.dim,
            norm_stats: self.norm_stats.clone(),
            class_count: self.class_count,
        }
    }

    pub fn features(&self) -> Matrix {
        let data = self.samples.iter().flat_map(|s| s.features.iter().copied()).collect();
        Matrix::new(self.samples.len(), self.dim, data).expect("validated samples")
    }

    pub fn features_of(&self, indices: &[usize]) -> Matrix {
        let data = indices
            .iter()
            .flat_map(|&i| self.samples[i].features.iter().copied())
            .collect();
        Matrix::new(indices.len(), self.dim, data).expect("validated samples")
    }

    /// Labeled rows per class (index = class).
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for s in &self.samples {
            if let Some(c) = s.label.class() {
                counts[c] += 1;
            }
        }
        counts
    }

    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label.class() == Some(class))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn synthetic_count(&self) -> usize {
        self.samples.iter().filter(|s| s.synthetic).count()
    }
}

/// Fits mean and population standard deviation on the real (non-synthetic)
/// rows and rescales every row. Constant features are dropped; their indices
/// are returned.
pub fn standardize(dataset: &Dataset) -> Result<(Dataset, NormStats, Vec<usize>)> {
    let real: Vec<&Sample> = dataset.samples.iter().filter(|s| !s.synthetic).collect();
    if real.len() < 2 {
        return Err(Error::Data("standardize needs at least 2 real samples".into()));
    }
    let n = real.len() as f64;
    let d = dataset.dim;
    let mut mean = vec![0.0; d];
    for s in &real {
        for (m, v) in mean.iter_mut().zip(&s.features) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; d];
    for s in &real {
        for ((acc, v), m) in var.iter_mut().zip(&s.features).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| libm::sqrt(v / n)).collect();
    let mut keep = vec![true; d];
    let mut dropped = Vec::new();
    for j in 0..d {
        let scale = mean[j].abs().max(1.0);
        if !(std[j] > 1e-12 * scale) {
            keep[j] = false;
            dropped.push(j);
            log::warn!("feature f{j} is constant ({}) and was dropped", mean[j]);
        }
    }
    if dropped.len() == d {
        return Err(Error::Data("every feature is constant".into()));
    }
    let stats = NormStats { mean, std, keep };
    let out = stats.apply(dataset)?;
    Ok((out, stats, dropped))
}

/// Parameters for [`generate_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_normal: usize,
    pub n_incident: usize,
    pub dim: usize,
    /// Incident shift in units of per-feature noise standard deviation.
    pub delta: f64,
    pub seed: u64,
}

/// Separation at which a logistic probe scores roughly 90%.
pub const DEFAULT_DELTA: f64 = 1.6;

impl SynthConfig {
    pub fn new(n_normal: usize, n_incident: usize, seed: u64) -> Self {
        Self {
            n_normal,
            n_incident,
            dim: 8,
            delta: DEFAULT_DELTA,
            seed,
        }
    }
}

/// Noise standard deviation per base feature:
/// upstream occupancy, speed, flow; downstream occupancy, speed, flow;
/// rate of change of the occupancy difference; rate of change of downstream speed.
const NOISE: [f64; 8] = [3.0, 5.0, 120.0, 3.0, 5.0, 120.0, 2.0, 3.0];

/// Incident signature direction (multiplied by `delta * NOISE * severity`).
const SIGNATURE: [f64; 8] = [1.0, -0.3, -0.3, -0.3, -1.0, -1.0, 1.0, -1.0];

/// Detector-pair readings over one window. Normal rows follow a random
/// congestion level shared by both stations; incident rows push upstream
/// occupancy up and downstream speed and flow down. Features beyond the first
/// eight are weakly informative lagged copies with extra noise.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n_normal < 1 || cfg.n_incident < 1 {
        return Err(Error::Data("synthetic generator needs at least one row per class".into()));
    }
    if cfg.dim < 6 {
        return Err(Error::Data(format!("synthetic generator needs dim >= 6, got {}", cfg.dim)));
    }
    if !cfg.delta.is_finite() || cfg.delta < 0.0 {
        return Err(Error::Data(format!("delta must be finite and >= 0, got {}", cfg.delta)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let total = cfg.n_normal + cfg.n_incident;
    let mut labels: Vec<Label> = (0..total)
        .map(|i| if i < cfg.n_normal { Label::Normal } else { Label::Incident })
        .collect();
    labels.shuffle(&mut rng);

    let mut samples = Vec::with_capacity(total);
    for label in labels {
        let congestion: f64 = rng.random();
        let base = [
            10.0 + 25.0 * congestion,
            100.0 - 50.0 * congestion,
            1800.0 - 600.0 * congestion,
            10.0 + 22.0 * congestion,
            100.0 - 45.0 * congestion,
            1750.0 - 550.0 * congestion,
            0.0,
            0.0,
        ];
        let severity = if label == Label::Incident {
            rng.random_range(0.5..1.5)
        } else {
            0.0
        };
        let mut row = Vec::with_capacity(cfg.dim);
        for j in 0..8.min(cfg.dim) {
            let noise: f64 = unit.sample(&mut rng);
            let shift = cfg.delta * severity * SIGNATURE[j] * NOISE[j];
            row.push(base[j] + NOISE[j] * noise + shift);
        }
        for j in 8..cfg.dim {
            let src = row[j % 8];
            let noise: f64 = unit.sample(&mut rng);
            row.push(src + 2.0 * NOISE[j % 8] * noise);
        }
        samples.push(Sample::new(row, label));
    }
    Dataset::new(cfg.dim, samples)
}

/// Stratified split sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub labeled_per_class: usize,
    pub unlabeled_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
    /// Take as many unlabeled rows as remain when a class has fewer than
    /// `unlabeled_per_class`, instead of failing.
    pub allow_short_unlabeled: bool,
}

impl SplitSpec {
    pub fn new(labeled: usize, unlabeled: usize, test: usize, seed: u64) -> Self {
        Self {
            labeled_per_class: labeled,
            unlabeled_per_class: unlabeled,
            test_per_class: test,
            seed,
            allow_short_unlabeled: false,
        }
    }
}

/// True labels of the unlabeled split, kept apart from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct SealedLabels(Vec<Option<usize>>);

impl SealedLabels {
    /// For evaluation diagnostics only; training code never calls this.
    pub fn reveal_for_diagnostics(&self) -> &[Option<usize>] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub labeled: Dataset,
    pub unlabeled: Dataset,
    pub test: Dataset,
    pub sealed: SealedLabels,
    /// Source row indices of each split.
    pub labeled_idx: Vec<usize>,
    pub unlabeled_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

fn shuffled(mut v: Vec<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    v.shuffle(rng);
    v
}

/// Draws `per_class` real rows of each class as the test split.
/// Returns `(rest, test, rest_indices, test_indices)`.
pub fn take_test(dataset: &Dataset, per_class: usize, seed: u64) -> Result<(Dataset, Dataset, Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut test_idx = Vec::new();
    let mut shortfalls = Vec::new();
    for c in 0..dataset.class_count {
        let real: Vec<usize> = dataset
            .indices_of_class(c)
            .into_iter()
            .filter(|&i| !dataset.samples[i].synthetic)
            .collect();
        if real.len() < per_class {
            shortfalls.push(Shortfall {
                class: c,
                required: per_class,
                available: real.len(),
            });
            continue;
        }
        test_idx.extend(shuffled(real, &mut rng).into_iter().take(per_class));
    }
    if !shortfalls.is_empty() {
        return Err(Error::InfeasibleSplit(shortfalls));
    }
    let mut in_test = vec![false; dataset.len()];
    for &i in &test_idx {
        in_test[i] = true;
    }
    let rest_idx: Vec<usize> = (0..dataset.len()).filter(|&i| !in_test[i]).collect();
    let test = dataset.subset(&test_idx);
    if test.synthetic_count() != 0 {
        return Err(Error::Contract("synthetic rows reached the test split".into()));
    }
    Ok((dataset.subset(&rest_idx), test, rest_idx, test_idx))
}

/// Splits a training pool into labeled and unlabeled parts. Labeled rows are
/// drawn from real rows first. Rows that arrive unlabeled always join the
/// unlabeled split.
pub fn split_train(pool: &Dataset, labeled: usize, unlabeled: usize, seed: u64, allow_short: bool) -> Result<(Dataset, Dataset, SealedLabels, Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut lab_idx = Vec::new();
    let mut unl_idx = Vec::new();
    let mut shortfalls = Vec::new();
    for c in 0..pool.class_count {
        let all = pool.indices_of_class(c);
        let (real, synth): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| !pool.samples[i].synthetic);
        let required = labeled + if allow_short { 0 } else { unlabeled };
        if all.len() < required {
            shortfalls.push(Shortfall {
                class: c,
                required,
                available: all.len(),
            });
            continue;
        }
        let mut ordered = shuffled(real, &mut rng);
        ordered.extend(shuffled(synth, &mut rng));
        lab_idx.extend_from_slice(&ordered[..labeled]);
        let rest = shuffled(ordered[labeled..].to_vec(), &mut rng);
        let take = unlabeled.min(rest.len());
        if take < unlabeled {
            log::info!("class {c}: only {take} unlabeled rows available (asked for {unlabeled})");
        }
        unl_idx.extend_from_slice(&rest[..take]);
    }
    if !shortfalls.is_empty() {
        return Err(Error::InfeasibleSplit(shortfalls));
    }
    unl_idx.extend(
        pool.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == Label::Unlabeled)
            .map(|(i, _)| i),
    );
    let labeled_ds = pool.subset(&lab_idx);
    let mut unlabeled_ds = pool.subset(&unl_idx);
    let sealed = SealedLabels(unlabeled_ds.samples.iter().map(|s| s.label.class()).collect());
    for s in &mut unlabeled_ds.samples {
        s.label = Label::Unlabeled;
    }
    Ok((labeled_ds, unlabeled_ds, sealed, lab_idx, unl_idx))
}

/// Stratified three-way split. The test split holds only real rows; the
/// three splits are disjoint.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    if spec.labeled_per_class < 1 || spec.unlabeled_per_class < 1 || spec.test_per_class < 1 {
        return Err(Error::Config("split counts must all be >= 1".into()));
    }
    // Check every class up front so the error lists all shortfalls.
    let mut shortfalls = Vec::new();
    for c in 0..dataset.class_count {
        let all = dataset.indices_of_class(c);
        let real = all.iter().filter(|&&i| !dataset.samples[i].synthetic).count();
        let need = spec.test_per_class
            + spec.labeled_per_class
            + if spec.allow_short_unlabeled { 0 } else { spec.unlabeled_per_class };
        if real < spec.test_per_class || all.len() < need {
            shortfalls.push(Shortfall {
                class: c,
                required: need,
                available: all.len().min(real.max(all.len())),
            });
        }
    }
    if !shortfalls.is_empty() {
        return Err(Error::InfeasibleSplit(shortfalls));
    }
    let (rest, test, rest_idx, test_idx) = take_test(dataset, spec.test_per_class, spec.seed)?;
    let (labeled, unlabeled, sealed, l, u) = split_train(
        &rest,
        spec.labeled_per_class,
        spec.unlabeled_per_class,
        spec.seed,
        spec.allow_short_unlabeled,
    )?;
    Ok(Split {
        labeled,
        unlabeled,
        test,
        sealed,
        labeled_idx: l.into_iter().map(|i| rest_idx[i]).collect(),
        unlabeled_idx: u.into_iter().map(|i| rest_idx[i]).collect(),
        test_idx,
    })
}

/// Short human-readable class count summary, e.g. `0:900 1:100`.
pub fn describe_counts(counts: &[usize]) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    for (c, n) in counts.iter().enumerate() {
        if c > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{c}:{n}");
    }
    s
}
