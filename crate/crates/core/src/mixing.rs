//! Input-space mixup, hidden-space mixup and confidence-weighted mixup.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::encoder::{Encoder, EncoderVars, HiddenState, ProbVector, PseudoLabel};
use crate::error::{Error, Result};
use crate::numcore::{Graph, Matrix, Var};

/// Where the mixing ratio comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixPolicy {
    /// One `Beta(alpha, alpha)` draw per batch. With `keep_larger` the draw is
    /// replaced by `max(λ, 1 − λ)`.
    BetaRandom { alpha: f64, keep_larger: bool },
    /// `λ = o / (o + o′)` per pair.
    ConfidenceRatio,
}

impl MixPolicy {
    pub fn beta(alpha: f64) -> Self {
        MixPolicy::BetaRandom {
            alpha,
            keep_larger: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MixPolicy::BetaRandom { alpha, .. } if !(*alpha > 0.0) || !alpha.is_finite() => {
                Err(Error::Config(format!("beta alpha must be > 0, got {alpha}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Labeled,
    Unlabeled,
}

/// Which loss terms a mixed row feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    BothLabeled,
    BothUnlabeled,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixPair {
    pub index_q: usize,
    pub index_p: usize,
    /// Weight on sample `q`; sample `p` gets `1 − lambda`.
    pub lambda: f64,
    pub origin_q: Origin,
    pub origin_p: Origin,
}

impl MixPair {
    pub fn kind(&self) -> PairKind {
        match (self.origin_q, self.origin_p) {
            (Origin::Labeled, Origin::Labeled) => PairKind::BothLabeled,
            (Origin::Unlabeled, Origin::Unlabeled) => PairKind::BothUnlabeled,
            _ => PairKind::Mixed,
        }
    }

    pub fn feeds_supervised(&self) -> bool {
        self.kind() != PairKind::BothUnlabeled
    }

    pub fn feeds_consistency(&self) -> bool {
        self.kind() != PairKind::BothLabeled
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Contract(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// `λ x_q + (1 − λ) x_p`.
pub fn mixup_inputs(x_q: &[f64], x_p: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if x_q.len() != x_p.len() {
        return Err(Error::dim("mixup_inputs", (1, x_q.len()), (1, x_p.len())));
    }
    Ok(x_q.iter().zip(x_p).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect())
}

/// `λ y_q + (1 − λ) y_p`.
pub fn mixup_labels(y_q: &ProbVector, y_p: &ProbVector, lambda: f64) -> Result<ProbVector> {
    ProbVector::new(mixup_inputs(y_q.entries(), y_p.entries(), lambda)?)
}

pub fn sample_lambda_beta<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("beta alpha must be > 0, got {alpha}")));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::Config(format!("{e}")))?;
    Ok(beta.sample(rng).clamp(0.0, 1.0))
}

/// `o / (o + o′)`.
pub fn confidence_lambda(o: f64, o_prime: f64) -> Result<f64> {
    if !(o >= 0.0) || !(o_prime >= 0.0) {
        return Err(Error::Contract(format!("confidences must be >= 0, got {o}, {o_prime}")));
    }
    let total = o + o_prime;
    if total <= 0.0 {
        return Err(Error::DegenerateConfidence);
    }
    Ok(o / total)
}

/// Row-wise `λ_i h_i + (1 − λ_i) h′_i`.
pub fn interpolate_hidden(h: &Matrix, h_prime: &Matrix, lambdas: &[f64]) -> Result<Matrix> {
    for l in lambdas {
        check_lambda(*l)?;
    }
    let partner: Vec<f64> = lambdas.iter().map(|l| 1.0 - l).collect();
    h.scale_rows(lambdas)?.add(&h_prime.scale_rows(&partner)?)
}

fn mix_rows(y: &Matrix, y_prime: &Matrix, lambdas: &[f64]) -> Result<Matrix> {
    interpolate_hidden(y, y_prime, lambdas)
}

/// Mixes two row-aligned batches at the encoder's hidden layer `layer` with a
/// single ratio and resumes the forward pass.
///
/// Returns the logits of the mixed states and the mixed targets.
pub fn tmix_forward(
    encoder: &Encoder,
    x: &Matrix,
    x_prime: &Matrix,
    y: &Matrix,
    y_prime: &Matrix,
    lambda: f64,
    layer: usize,
) -> Result<(Matrix, Matrix)> {
    check_lambda(lambda)?;
    let lambdas = alloc::vec![lambda; x.rows()];
    mix_forward(encoder, x, x_prime, y, y_prime, &lambdas, layer)
}

fn mix_forward(
    encoder: &Encoder,
    x: &Matrix,
    x_prime: &Matrix,
    y: &Matrix,
    y_prime: &Matrix,
    lambdas: &[f64],
    layer: usize,
) -> Result<(Matrix, Matrix)> {
    if x.shape() != x_prime.shape() {
        return Err(Error::dim("tmix_forward", x.shape(), x_prime.shape()));
    }
    if y.shape() != y_prime.shape() || y.rows() != x.rows() {
        return Err(Error::dim("tmix_forward targets", y.shape(), y_prime.shape()));
    }
    let h = encoder.forward_to_layer(x, layer)?;
    let h_prime = encoder.forward_to_layer(x_prime, layer)?;
    let mixed = HiddenState {
        layer_index: layer,
        activations: interpolate_hidden(&h.activations, &h_prime.activations, lambdas)?,
    };
    let logits = encoder.forward_from_layer(&mixed)?;
    Ok((logits, mix_rows(y, y_prime, lambdas)?))
}

/// Per-row target handed to confidence-weighted mixing.
#[derive(Debug, Clone, PartialEq)]
pub enum MixTarget {
    /// Ground truth; confidence 1.
    Label(ProbVector),
    Pseudo(PseudoLabel),
    /// Unlabeled row whose pseudo-label has not been computed.
    Missing,
}

impl MixTarget {
    pub fn confidence(&self) -> Result<f64> {
        match self {
            MixTarget::Label(_) => Ok(1.0),
            MixTarget::Pseudo(p) => Ok(p.confidence),
            MixTarget::Missing => Err(Error::Contract("unlabeled input has no pseudo-label".into())),
        }
    }

    pub fn probs(&self) -> Result<&ProbVector> {
        match self {
            MixTarget::Label(p) => Ok(p),
            MixTarget::Pseudo(p) => Ok(&p.probs),
            MixTarget::Missing => Err(Error::Contract("unlabeled input has no pseudo-label".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtmixOutput {
    pub logits: Matrix,
    pub mixed_targets: Matrix,
    pub lambdas: Vec<f64>,
}

fn targets_matrix(t: &[MixTarget]) -> Result<Matrix> {
    let rows = t.iter().map(|m| m.probs().map(|p| p.entries().to_vec())).collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

/// Confidence-weighted hidden-space mixup of two row-aligned batches.
pub fn ptmix_forward(
    encoder: &Encoder,
    x: &Matrix,
    x_prime: &Matrix,
    targets: &[MixTarget],
    targets_prime: &[MixTarget],
    layer: usize,
) -> Result<PtmixOutput> {
    if targets.len() != x.rows() || targets_prime.len() != x_prime.rows() {
        return Err(Error::dim("ptmix_forward targets", (targets.len(), 1), (x.rows(), 1)));
    }
    let lambdas = targets
        .iter()
        .zip(targets_prime)
        .map(|(a, b)| confidence_lambda(a.confidence()?, b.confidence()?))
        .collect::<Result<Vec<_>>>()?;
    let y = targets_matrix(targets)?;
    let y_prime = targets_matrix(targets_prime)?;
    let (logits, mixed_targets) = mix_forward(encoder, x, x_prime, &y, &y_prime, &lambdas, layer)?;
    Ok(PtmixOutput {
        logits,
        mixed_targets,
        lambdas,
    })
}

/// Concatenates `n_labeled` labeled rows with `n_unlabeled` unlabeled rows
/// (labeled first) and pairs row `i` with row `π(i)` for a uniformly random
/// permutation `π`. Ratios start at 1 until [`assign_lambdas`] runs.
pub fn pair_batch<R: Rng + ?Sized>(n_labeled: usize, n_unlabeled: usize, rng: &mut R) -> Result<Vec<MixPair>> {
    let n = n_labeled + n_unlabeled;
    if n == 0 {
        return Err(Error::Data("cannot pair an empty batch".into()));
    }
    let origin = |i: usize| {
        if i < n_labeled {
            Origin::Labeled
        } else {
            Origin::Unlabeled
        }
    };
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    Ok(perm
        .into_iter()
        .enumerate()
        .map(|(q, p)| MixPair {
            index_q: q,
            index_p: p,
            lambda: 1.0,
            origin_q: origin(q),
            origin_p: origin(p),
        })
        .collect())
}

/// Fills each pair's ratio according to `policy`. `confidences` is indexed
/// like the concatenated batch.
pub fn assign_lambdas<R: Rng + ?Sized>(
    pairs: &mut [MixPair],
    policy: &MixPolicy,
    confidences: &[f64],
    rng: &mut R,
) -> Result<()> {
    match *policy {
        MixPolicy::BetaRandom { alpha, keep_larger } => {
            let mut lambda = sample_lambda_beta(alpha, rng)?;
            if keep_larger {
                lambda = lambda.max(1.0 - lambda);
            }
            for p in pairs.iter_mut() {
                p.lambda = lambda;
            }
        }
        MixPolicy::ConfidenceRatio => {
            for p in pairs.iter_mut() {
                let (Some(&o), Some(&o_prime)) = (confidences.get(p.index_q), confidences.get(p.index_p)) else {
                    return Err(Error::Contract("missing confidence for paired row".into()));
                };
                p.lambda = confidence_lambda(o, o_prime)?;
            }
        }
    }
    Ok(())
}

/// Mixed target rows `ỹ_i = λ_i y_q + (1 − λ_i) y_p`.
pub fn mix_pair_targets(pairs: &[MixPair], targets: &Matrix) -> Result<Matrix> {
    let q: Vec<usize> = pairs.iter().map(|p| p.index_q).collect();
    let p: Vec<usize> = pairs.iter().map(|p| p.index_p).collect();
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
    mix_rows(&targets.select_rows(&q)?, &targets.select_rows(&p)?, &lambdas)
}

/// Graph version of the paired hidden-space mix: runs the trunk once over
/// the whole batch `x`, interpolates each pair at `layer`, and resumes.
/// Ratios are constants; gradients reach both members of every pair.
pub fn mixed_logits(g: &mut Graph, vars: &EncoderVars, x: Var, pairs: &[MixPair], layer: usize) -> Result<Var> {
    let h = vars.to_layer(g, x, layer)?;
    let q: Vec<usize> = pairs.iter().map(|p| p.index_q).collect();
    let p: Vec<usize> = pairs.iter().map(|p| p.index_p).collect();
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
    for l in &lambdas {
        check_lambda(*l)?;
    }
    let partner: Vec<f64> = lambdas.iter().map(|l| 1.0 - l).collect();
    let hq = g.select_rows(h, &q)?;
    let hp = g.select_rows(h, &p)?;
    let a = g.scale_rows(hq, &lambdas)?;
    let b = g.scale_rows(hp, &partner)?;
    let mixed = g.add(a, b)?;
    vars.from_layer(g, mixed, layer)
}
