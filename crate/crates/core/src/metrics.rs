//! Incident-detection metrics and seed aggregation.
//!
//! Incident (class 1) is the positive class. CR is accuracy, DR is recall on
//! incidents, F1 uses precision and DR. All reported in percent.

use alloc::format;
use alloc::vec::Vec;

use crate::data::INCIDENT;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tally(predictions: &[usize], truths: &[usize]) -> Result<Self> {
        if predictions.len() != truths.len() || predictions.is_empty() {
            return Err(Error::Protocol(format!(
                "need equal non-empty lengths, got {} predictions and {} truths",
                predictions.len(),
                truths.len()
            )));
        }
        let mut c = Self::default();
        for (&p, &t) in predictions.iter().zip(truths) {
            if p > 1 || t > 1 {
                return Err(Error::Protocol(format!("labels must be binary, got {p}/{t}")));
            }
            match (p == INCIDENT, t == INCIDENT) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub cr: f64,
    pub dr: f64,
    pub f1: f64,
    pub precision: f64,
    pub counts: ConfusionCounts,
}

impl Metrics {
    pub fn from_counts(c: ConfusionCounts) -> Result<Self> {
        if c.tp + c.fn_ == 0 {
            return Err(Error::Protocol("test set contains no incident rows".into()));
        }
        let total = c.total() as f64;
        let cr = (c.tp + c.tn) as f64 / total;
        let dr = c.tp as f64 / (c.tp + c.fn_) as f64;
        let precision = if c.tp + c.fp == 0 {
            0.0
        } else {
            c.tp as f64 / (c.tp + c.fp) as f64
        };
        let f1 = if precision + dr == 0.0 {
            0.0
        } else {
            2.0 * precision * dr / (precision + dr)
        };
        Ok(Self {
            cr: 100.0 * cr,
            dr: 100.0 * dr,
            f1: 100.0 * f1,
            precision: 100.0 * precision,
            counts: c,
        })
    }

    /// `CR/DR/F1` with one decimal, e.g. `93.7/86.3/91.7`.
    pub fn cell(&self) -> alloc::string::String {
        format!("{:.1}/{:.1}/{:.1}", self.cr, self.dr, self.f1)
    }
}

pub fn compute_metrics(predictions: &[usize], truths: &[usize]) -> Result<Metrics> {
    Metrics::from_counts(ConfusionCounts::tally(predictions, truths)?)
}

/// Population mean and standard deviation; `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, libm::sqrt(var)))
}

/// Outcome of a paired one-sided sign test of `a >= b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// P(X >= wins) for X ~ Binomial(wins + losses, 1/2); 1 when every pair ties.
    pub p_value: f64,
}

/// Ties are dropped before testing.
pub fn sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    if a.len() != b.len() {
        return Err(Error::Protocol("sign test needs paired samples".into()));
    }
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        if x > y {
            wins += 1;
        } else if x < y {
            losses += 1;
        } else {
            ties += 1;
        }
    }
    let n = wins + losses;
    let p_value = if n == 0 {
        1.0
    } else {
        // sum_{k >= wins} C(n, k) / 2^n, built up exactly in f64 for small n
        let mut coeff = 1.0f64;
        let mut tail = 0.0;
        for k in 0..=n {
            if k >= wins {
                tail += coeff;
            }
            coeff = coeff * (n - k) as f64 / (k + 1) as f64;
        }
        tail / libm::pow(2.0, n as f64)
    };
    Ok(SignTest {
        wins,
        losses,
        ties,
        p_value,
    })
}

/// Helper for callers that hold metric rows: mean of each metric.
pub fn mean_metrics(rows: &[Metrics]) -> Option<(f64, f64, f64)> {
    let pick = |f: fn(&Metrics) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let cr = mean_std(&pick(|m| m.cr))?.0;
    let dr = mean_std(&pick(|m| m.dr))?.0;
    let f1 = mean_std(&pick(|m| m.f1))?.0;
    Some((cr, dr, f1))
}
