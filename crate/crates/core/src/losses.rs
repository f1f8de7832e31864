//! Supervised, consistency and reconstruction losses, and the routing of
//! mixed pairs onto them.
//!
//! Every loss has a graph builder used for training; the plain-value
//! functions evaluate the same builder on constant inputs.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mixing::MixPair;
use crate::numcore::{Graph, Matrix, Var, EPS};

/// Argument order of the consistency divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KlDirection {
    /// `KL(model ∥ targets)`.
    #[default]
    ModelFirst,
    /// `KL(targets ∥ model)`.
    TargetFirst,
}

impl KlDirection {
    pub fn name(self) -> &'static str {
        match self {
            KlDirection::ModelFirst => "model_first",
            KlDirection::TargetFirst => "target_first",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "model_first" => Ok(KlDirection::ModelFirst),
            "target_first" | "reverse" => Ok(KlDirection::TargetFirst),
            other => Err(Error::Config(format!("unknown kl_direction `{other}`"))),
        }
    }
}

/// Supervised term, consistency term, their weight and `L_x + w·L_u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub supervised: f64,
    pub consistency: f64,
    pub weight: f64,
    pub total: f64,
}

pub fn combine(supervised: f64, consistency: f64, weight: f64) -> LossBreakdown {
    LossBreakdown {
        supervised,
        consistency,
        weight,
        total: supervised + weight * consistency,
    }
}

fn check_shapes(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, a.shape(), b.shape()));
    }
    Ok(())
}

/// `Σ_j y_ij log max(p_ij, EPS)` per row, `n x 1`.
fn ce_rows(g: &mut Graph, probs: Var, targets: Var) -> Result<Var> {
    let clamped = g.clamp_min(probs, EPS)?;
    let logp = g.log(clamped)?;
    let weighted = g.mul(logp, targets)?;
    g.row_sum(weighted)
}

/// `Σ_j a_ij (log a_ij − log b_ij)` per row with both sides clamped.
fn kl_rows(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    let ac = g.clamp_min(a, EPS)?;
    let bc = g.clamp_min(b, EPS)?;
    let la = g.log(ac)?;
    let lb = g.log(bc)?;
    let diff = g.sub(la, lb)?;
    let weighted = g.mul(ac, diff)?;
    g.row_sum(weighted)
}

fn consistency_rows(g: &mut Graph, model: Var, targets: Var, direction: KlDirection) -> Result<Var> {
    match direction {
        KlDirection::ModelFirst => kl_rows(g, model, targets),
        KlDirection::TargetFirst => kl_rows(g, targets, model),
    }
}

/// Weighted sum of a column of per-row losses.
fn weighted_total(g: &mut Graph, rows: Var, weights: &[f64]) -> Result<Var> {
    let w = g.scale_rows(rows, weights)?;
    g.sum(w)
}

/// Graph: mean soft-target cross-entropy of `softmax(logits)` against `targets`.
pub fn cross_entropy_logits(g: &mut Graph, logits: Var, targets: &Matrix) -> Result<Var> {
    check_shapes("cross_entropy", g.value(logits), targets)?;
    let n = targets.rows();
    let probs = g.softmax(logits)?;
    let t = g.constant(targets.clone());
    let rows = ce_rows(g, probs, t)?;
    weighted_total(g, rows, &alloc::vec![-1.0 / n as f64; n])
}

/// Graph: mean consistency divergence between `softmax(logits)` and `targets`.
pub fn kl_consistency_logits(g: &mut Graph, logits: Var, targets: &Matrix, direction: KlDirection) -> Result<Var> {
    check_shapes("kl_consistency", g.value(logits), targets)?;
    let n = targets.rows();
    let probs = g.softmax(logits)?;
    let t = g.constant(targets.clone());
    let rows = consistency_rows(g, probs, t, direction)?;
    weighted_total(g, rows, &alloc::vec![1.0 / n as f64; n])
}

/// `−(1/N) Σ_i Σ_j y_ij log p_ij`; soft targets allowed.
pub fn cross_entropy(targets: &Matrix, probs: &Matrix) -> Result<f64> {
    check_shapes("cross_entropy", targets, probs)?;
    if targets.rows() == 0 {
        return Err(Error::dim("cross_entropy", targets.shape(), (1, 1)));
    }
    let mut g = Graph::new();
    let p = g.constant(probs.clone());
    let t = g.constant(targets.clone());
    let rows = ce_rows(&mut g, p, t)?;
    let n = targets.rows();
    let total = weighted_total(&mut g, rows, &alloc::vec![-1.0 / n as f64; n])?;
    Ok(g.value(total).value())
}

/// Batch mean of `Σ_j p_j log(p_j / q_j)` with `p` the model distribution.
pub fn kl_consistency(model_probs: &Matrix, targets: &Matrix) -> Result<f64> {
    kl_consistency_directed(model_probs, targets, KlDirection::ModelFirst)
}

pub fn kl_consistency_directed(model_probs: &Matrix, targets: &Matrix, direction: KlDirection) -> Result<f64> {
    check_shapes("kl_consistency", model_probs, targets)?;
    if targets.rows() == 0 {
        return Err(Error::dim("kl_consistency", targets.shape(), (1, 1)));
    }
    let mut g = Graph::new();
    let p = g.constant(model_probs.clone());
    let q = g.constant(targets.clone());
    let rows = consistency_rows(&mut g, p, q, direction)?;
    let n = targets.rows();
    let total = weighted_total(&mut g, rows, &alloc::vec![1.0 / n as f64; n])?;
    Ok(g.value(total).value())
}

/// Shannon entropy of each row, averaged.
pub fn mean_entropy(probs: &Matrix) -> f64 {
    let n = probs.rows().max(1) as f64;
    probs
        .data()
        .iter()
        .map(|p| if *p > 0.0 { -p * libm::log(*p) } else { 0.0 })
        .sum::<f64>()
        / n
}

/// Routed loss over a batch of mixed rows.
#[derive(Debug, Clone, Copy)]
pub struct RoutedLoss {
    pub total: Var,
    pub breakdown: LossBreakdown,
}

/// Graph: routes each mixed row onto the supervised and/or consistency term
/// by the origins of its pair, and combines them with `weight`.
///
/// Row `i` of `mixed_logits`/`mixed_targets` belongs to `pairs[i]`.
/// Labeled×labeled rows feed only the cross-entropy, unlabeled×unlabeled rows
/// only the divergence, and mixed-origin rows feed both; each term is the mean
/// over the rows that feed it.
pub fn route_losses_graph(
    g: &mut Graph,
    pairs: &[MixPair],
    mixed_logits: Var,
    mixed_targets: &Matrix,
    weight: f64,
    direction: KlDirection,
) -> Result<RoutedLoss> {
    check_shapes("route_losses", g.value(mixed_logits), mixed_targets)?;
    if pairs.len() != mixed_targets.rows() {
        return Err(Error::Contract(format!(
            "{} pairs but {} mixed targets",
            pairs.len(),
            mixed_targets.rows()
        )));
    }
    if !(weight >= 0.0) {
        return Err(Error::Config(format!("loss weight must be >= 0, got {weight}")));
    }
    let sup: Vec<bool> = pairs.iter().map(MixPair::feeds_supervised).collect();
    let con: Vec<bool> = pairs.iter().map(MixPair::feeds_consistency).collect();
    let n_sup = sup.iter().filter(|b| **b).count();
    let n_con = con.iter().filter(|b| **b).count();

    let probs = g.softmax(mixed_logits)?;
    let t = g.constant(mixed_targets.clone());

    let mut parts: Vec<Var> = Vec::new();
    let mut supervised = 0.0;
    if n_sup > 0 {
        let rows = ce_rows(g, probs, t)?;
        let w: Vec<f64> = sup.iter().map(|b| if *b { -1.0 / n_sup as f64 } else { 0.0 }).collect();
        let lx = weighted_total(g, rows, &w)?;
        supervised = g.value(lx).value();
        parts.push(lx);
    }
    let mut consistency = 0.0;
    if n_con > 0 {
        let rows = consistency_rows(g, probs, t, direction)?;
        let w: Vec<f64> = con.iter().map(|b| if *b { 1.0 / n_con as f64 } else { 0.0 }).collect();
        let lu = weighted_total(g, rows, &w)?;
        consistency = g.value(lu).value();
        let scaled = g.scale(lu, weight)?;
        parts.push(scaled);
    }
    let total = match parts.as_slice() {
        [one] => *one,
        [a, b] => g.add(*a, *b)?,
        _ => return Err(Error::Contract("no pairs to route".into())),
    };
    Ok(RoutedLoss {
        total,
        breakdown: combine(supervised, consistency, weight),
    })
}

/// Plain-value routing; see [`route_losses_graph`].
pub fn route_losses(
    pairs: &[MixPair],
    mixed_logits: &Matrix,
    mixed_targets: &Matrix,
    weight: f64,
    direction: KlDirection,
) -> Result<LossBreakdown> {
    let mut g = Graph::new();
    let logits = g.constant(mixed_logits.clone());
    Ok(route_losses_graph(&mut g, pairs, logits, mixed_targets, weight, direction)?.breakdown)
}

/// Graph: mean squared error over positions where `mask` is 1.
pub fn masked_recon_graph(g: &mut Graph, original: &Matrix, mask: &Matrix, reconstruction: Var) -> Result<Var> {
    check_shapes("masked_recon_loss", original, mask)?;
    check_shapes("masked_recon_loss", original, g.value(reconstruction))?;
    let count = mask.data().iter().filter(|m| **m != 0.0).count();
    if count == 0 {
        return Err(Error::Data("reconstruction mask selects no positions".into()));
    }
    if mask.data().iter().any(|m| *m != 0.0 && *m != 1.0) {
        return Err(Error::Data("reconstruction mask must be 0/1".into()));
    }
    let o = g.constant(original.clone());
    let m = g.constant(mask.clone());
    let diff = g.sub(reconstruction, o)?;
    let masked = g.mul(diff, m)?;
    let sq = g.mul(masked, masked)?;
    let s = g.sum(sq)?;
    g.scale(s, 1.0 / count as f64)
}

pub fn masked_recon_loss(original: &Matrix, mask: &Matrix, reconstruction: &Matrix) -> Result<f64> {
    let mut g = Graph::new();
    let r = g.constant(reconstruction.clone());
    let l = masked_recon_graph(&mut g, original, mask, r)?;
    Ok(g.value(l).value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::Origin;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn cross_entropy_cases() {
        let perfect = cross_entropy(&m(&[&[1.0, 0.0]]), &m(&[&[1.0 - EPS, EPS]])).unwrap();
        assert!(perfect.abs() < 1e-11);
        let half = cross_entropy(&m(&[&[1.0, 0.0]]), &m(&[&[0.5, 0.5]])).unwrap();
        assert!((half - core::f64::consts::LN_2).abs() < 1e-9);
        // (ln 2 + ln(4/3)) / 2
        let batch = cross_entropy(&m(&[&[1.0, 0.0], &[0.0, 1.0]]), &m(&[&[0.5, 0.5], &[0.25, 0.75]])).unwrap();
        assert!((batch - 0.490_414_626_505_863_1).abs() < 1e-12);
        assert!(cross_entropy(&m(&[&[1.0, 0.0]]), &m(&[&[1.0, 0.0, 0.0]])).is_err());
    }

    #[test]
    fn kl_cases() {
        let p = m(&[&[0.3, 0.7]]);
        assert_eq!(kl_consistency(&p, &p).unwrap(), 0.0);
        // 0.5 ln 2 + 0.5 ln(2/3)
        let v = kl_consistency(&m(&[&[0.5, 0.5]]), &m(&[&[0.25, 0.75]])).unwrap();
        assert!((v - 0.143_841_036_225_890_4).abs() < 1e-12);
        let r = kl_consistency_directed(&m(&[&[0.5, 0.5]]), &m(&[&[0.25, 0.75]]), KlDirection::TargetFirst).unwrap();
        // 0.25 ln(0.5) + 0.75 ln(1.5)
        assert!((r - 0.130_812_035_941_137_0).abs() < 1e-12);
    }

    #[test]
    fn combine_cases() {
        assert_eq!(combine(1.0, 0.5, 1.0).total, 1.5);
        assert_eq!(combine(0.3, 123.0, 0.0).total, 0.3);
        assert!((combine(0.49, 0.144, 2.0).total - 0.778).abs() < 1e-12);
    }

    #[test]
    fn recon_cases() {
        let o = m(&[&[1.0, 2.0]]);
        assert_eq!(masked_recon_loss(&o, &m(&[&[1.0, 1.0]]), &o).unwrap(), 0.0);
        let z = m(&[&[0.0, 0.0]]);
        assert_eq!(masked_recon_loss(&o, &m(&[&[1.0, 0.0]]), &z).unwrap(), 1.0);
        assert_eq!(masked_recon_loss(&o, &m(&[&[1.0, 1.0]]), &z).unwrap(), 2.5);
        assert!(masked_recon_loss(&o, &z, &z).is_err());
    }

    fn pair(q: Origin, p: Origin) -> MixPair {
        MixPair {
            index_q: 0,
            index_p: 0,
            lambda: 0.5,
            origin_q: q,
            origin_p: p,
        }
    }

    #[test]
    fn routing_by_origin() {
        use Origin::*;
        let logits = m(&[&[1.0, -1.0], &[0.2, 0.4], &[-0.5, 0.5]]);
        let targets = m(&[&[0.9, 0.1], &[0.5, 0.5], &[0.2, 0.8]]);
        let all_l = [pair(Labeled, Labeled); 3];
        let b = route_losses(&all_l, &logits, &targets, 1.0, KlDirection::ModelFirst).unwrap();
        assert_eq!(b.consistency, 0.0);
        assert!(b.supervised > 0.0);
        let all_u = [pair(Unlabeled, Unlabeled); 3];
        let b = route_losses(&all_u, &logits, &targets, 1.0, KlDirection::ModelFirst).unwrap();
        assert_eq!(b.supervised, 0.0);
        assert!(b.consistency > 0.0);
    }

    #[test]
    fn routing_matches_hand_sums() {
        use Origin::*;
        let logits = m(&[&[1.0, -1.0], &[0.2, 0.4], &[-0.5, 0.5]]);
        let targets = m(&[&[0.9, 0.1], &[0.5, 0.5], &[0.2, 0.8]]);
        let pairs = [pair(Labeled, Labeled), pair(Unlabeled, Unlabeled), pair(Labeled, Unlabeled)];
        let w = 0.7;
        let b = route_losses(&pairs, &logits, &targets, w, KlDirection::ModelFirst).unwrap();

        let softmax = |z: &[f64]| {
            let e0 = libm::exp(z[0]);
            let e1 = libm::exp(z[1]);
            [e0 / (e0 + e1), e1 / (e0 + e1)]
        };
        let ce = |r: usize| {
            let p = softmax(logits.row(r));
            -(targets.get(r, 0) * libm::log(p[0]) + targets.get(r, 1) * libm::log(p[1]))
        };
        let kl = |r: usize| {
            let p = softmax(logits.row(r));
            p[0] * libm::log(p[0] / targets.get(r, 0)) + p[1] * libm::log(p[1] / targets.get(r, 1))
        };
        let lx = (ce(0) + ce(2)) / 2.0;
        let lu = (kl(1) + kl(2)) / 2.0;
        assert!((b.supervised - lx).abs() < 1e-12);
        assert!((b.consistency - lu).abs() < 1e-12);
        assert!((b.total - (lx + w * lu)).abs() < 1e-12);
        assert_eq!(b.total, b.supervised + w * b.consistency);
    }
}
