//! Central finite-difference verification of analytic gradients.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::params::{Bindings, ParameterSet};
use crate::error::{Error, Result};

/// Relative errors are measured against `max(|analytic|, |numeric|, ABS_FLOOR)`
/// so that near-zero gradient entries are compared in absolute terms.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    pub tol: f64,
    /// Check only this many randomly chosen entries (all when `None`).
    pub sample: Option<usize>,
    pub sample_seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            tol: 1e-4,
            sample: None,
            sample_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryError {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries_checked: usize,
    pub max_rel_error: f64,
    /// Entry with the largest relative error.
    pub worst: Option<EntryError>,
    pub tol: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(ABS_FLOOR);
    (analytic - numeric).abs() / denom
}

fn eval<F>(params: &ParameterSet, loss_fn: &mut F) -> Result<f64>
where
    F: FnMut(&mut Graph, &Bindings) -> Result<Var>,
{
    let mut g = Graph::new();
    let b = params.bind(&mut g);
    let loss = loss_fn(&mut g, &b)?;
    let value = g.value(loss);
    if value.shape() != (1, 1) {
        return Err(Error::NotScalar {
            rows: value.rows(),
            cols: value.cols(),
        });
    }
    Ok(value.value())
}

/// Compares backward-pass gradients with `(f(θ+ε) − f(θ−ε)) / 2ε` for
/// every (or a sampled subset of) parameter entries.
pub fn grad_check<F>(params: &ParameterSet, mut loss_fn: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph, &Bindings) -> Result<Var>,
{
    if !(1e-6..=1e-3).contains(&opts.epsilon) {
        return Err(Error::Config(alloc::format!(
            "grad_check epsilon {} outside [1e-6, 1e-3]",
            opts.epsilon
        )));
    }

    let mut g = Graph::new();
    let bindings = params.bind(&mut g);
    let loss = loss_fn(&mut g, &bindings)?;
    g.backward(loss)?;
    let first = g.value(loss).value();
    let second = eval(params, &mut loss_fn)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::Determinism { first, second });
    }

    // (param index, entry index)
    let mut targets: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, (_, m))| (0..m.data().len()).map(move |e| (p, e)))
        .collect();
    if let Some(n) = opts.sample {
        if n < targets.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.sample_seed);
            let mut picked = index::sample(&mut rng, targets.len(), n).into_vec();
            picked.sort_unstable();
            targets = picked.into_iter().map(|i| targets[i]).collect();
        }
    }

    let names: Vec<String> = params.iter().map(|(n, _)| n.into()).collect();
    let vars: Vec<Var> = bindings.iter().map(|(_, v)| v).collect();
    let mut work = params.clone();
    let mut report = GradCheckReport {
        entries_checked: 0,
        max_rel_error: 0.0,
        worst: None,
        tol: opts.tol,
        passed: true,
    };

    for (p, e) in targets {
        let analytic = g.gradient(vars[p]).data()[e];
        let original = work.entry_mut(p).data()[e];
        work.entry_mut(p).data_mut()[e] = original + opts.epsilon;
        let plus = eval(&work, &mut loss_fn)?;
        work.entry_mut(p).data_mut()[e] = original - opts.epsilon;
        let minus = eval(&work, &mut loss_fn)?;
        work.entry_mut(p).data_mut()[e] = original;

        let numeric = (plus - minus) / (2.0 * opts.epsilon);
        let rel = relative_error(analytic, numeric);
        report.entries_checked += 1;
        if report.worst.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = Some(EntryError {
                param: names[p].clone(),
                index: e,
                analytic,
                numeric,
                rel_error: rel,
            });
        }
    }
    report.passed = report.max_rel_error < opts.tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Matrix;
    use core::cell::Cell;

    fn set(entries: &[(&str, Matrix)]) -> ParameterSet {
        let mut p = ParameterSet::new();
        for (n, m) in entries {
            p.insert(*n, m.clone()).unwrap();
        }
        p
    }

    #[test]
    fn linear_regression_matches_closed_form() {
        // y = x w + b on four points, loss = mean squared residual.
        let xs = [[1.0, 0.5], [-0.3, 2.0], [0.7, -1.1], [1.5, 0.2]];
        let ys = [1.0, -0.5, 0.25, 2.0];
        let params = set(&[
            ("w", Matrix::from_rows(&[[0.2], [-0.4]]).unwrap()),
            ("b", Matrix::from_rows(&[[0.1]]).unwrap()),
        ]);
        let x = Matrix::from_rows(&xs).unwrap();
        let y = Matrix::new(4, 1, ys.to_vec()).unwrap();
        let loss_fn = |g: &mut Graph, b: &Bindings| {
            let xv = g.constant(x.clone());
            let yv = g.constant(y.clone());
            let p = g.matmul(xv, b.get("w")?)?;
            let p = g.add_row(p, b.get("b")?)?;
            let r = g.sub(p, yv)?;
            let sq = g.mul(r, r)?;
            g.mean(sq)
        };

        // closed form: dL/dw = 2/n Σ r_i x_i, dL/db = 2/n Σ r_i
        let (w, b0) = ([0.2, -0.4], 0.1);
        let mut dw = [0.0; 2];
        let mut db = 0.0;
        for (xi, yi) in xs.iter().zip(ys) {
            let r = xi[0] * w[0] + xi[1] * w[1] + b0 - yi;
            dw[0] += 2.0 * r * xi[0] / 4.0;
            dw[1] += 2.0 * r * xi[1] / 4.0;
            db += 2.0 * r / 4.0;
        }
        let mut g = Graph::new();
        let bind = params.bind(&mut g);
        let l = loss_fn(&mut g, &bind).unwrap();
        g.backward(l).unwrap();
        let gw = g.gradient(bind.get("w").unwrap()).data().to_vec();
        assert!((gw[0] - dw[0]).abs() < 1e-14 && (gw[1] - dw[1]).abs() < 1e-14);
        assert!((g.gradient(bind.get("b").unwrap()).value() - db).abs() < 1e-14);

        let opts = GradCheckOptions {
            tol: 1e-6,
            ..Default::default()
        };
        let report = grad_check(&params, loss_fn, opts).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.entries_checked, 3);
    }

    fn three_layer_tanh(g: &mut Graph, b: &Bindings, x: &Matrix) -> Result<Var> {
        let mut h = g.constant(x.clone());
        for i in 0..3 {
            let w = b.get(&alloc::format!("w{i}"))?;
            let bias = b.get(&alloc::format!("b{i}"))?;
            let z = g.matmul(h, w)?;
            let z = g.add_row(z, bias)?;
            h = g.tanh(z)?;
        }
        let sq = g.mul(h, h)?;
        g.mean(sq)
    }

    fn tanh_net() -> (ParameterSet, Matrix) {
        let dims = [3, 4, 4, 2];
        let mut p = ParameterSet::new();
        let mut k = 0.0;
        for i in 0..3 {
            let n = dims[i] * dims[i + 1];
            let data = (0..n)
                .map(|_| {
                    k += 1.0;
                    libm::sin(k * 1.7) * 0.8
                })
                .collect();
            p.insert(alloc::format!("w{i}"), Matrix::new(dims[i], dims[i + 1], data).unwrap())
                .unwrap();
            let bias = (0..dims[i + 1]).map(|j| 0.1 * j as f64 - 0.1).collect();
            p.insert(alloc::format!("b{i}"), Matrix::new(1, dims[i + 1], bias).unwrap())
                .unwrap();
        }
        let x = Matrix::from_rows(&[[0.5, -1.0, 1.5], [1.2, 0.3, -0.7]]).unwrap();
        (p, x)
    }

    #[test]
    fn sampled_tanh_net_passes() {
        let (p, x) = tanh_net();
        let opts = GradCheckOptions {
            sample: Some(10),
            sample_seed: 3,
            ..Default::default()
        };
        let report = grad_check(&p, |g, b| three_layer_tanh(g, b, &x), opts).unwrap();
        assert_eq!(report.entries_checked, 10);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn corrupted_rule_fails_and_names_parameter() {
        let (p, x) = tanh_net();
        let report = grad_check(
            &p,
            |g, b| {
                g.corrupt_tanh_rule = true;
                three_layer_tanh(g, b, &x)
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(!report.passed);
        let worst = report.worst.unwrap();
        assert!(worst.param.starts_with('w') || worst.param.starts_with('b'));
        assert!(worst.rel_error > 1e-2);
    }

    #[test]
    fn detects_nondeterminism() {
        let p = set(&[("w", Matrix::scalar(1.0))]);
        let calls = Cell::new(0.0);
        let err = grad_check(
            &p,
            |g, b| {
                calls.set(calls.get() + 1.0);
                let c = g.constant(Matrix::scalar(calls.get()));
                let w = b.get("w")?;
                g.mul(w, c)
            },
            GradCheckOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Determinism { .. }));
    }

    #[test]
    fn epsilon_range_enforced() {
        let p = set(&[("w", Matrix::scalar(1.0))]);
        let opts = GradCheckOptions {
            epsilon: 1e-2,
            ..Default::default()
        };
        assert!(grad_check(&p, |g, b| g.sum(b.get("w")?), opts).is_err());
    }
}
