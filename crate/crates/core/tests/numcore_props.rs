use fpmt_core::numcore::{grad_check, softmax_stable, Bindings, GradCheckOptions, Graph, Matrix, ParameterSet, Var};
use fpmt_core::Result;
use proptest::prelude::*;

#[derive(Debug, Clone, Copy)]
enum Prim {
    MatMul,
    Add,
    AddRow,
    Sub,
    Mul,
    Scale,
    ScaleRows,
    Tanh,
    Relu,
    Sigmoid,
    Softplus,
    Log,
    Softmax,
    RowMean,
    RowSum,
    SelectRows,
}

const ALL: [Prim; 16] = [
    Prim::MatMul,
    Prim::Add,
    Prim::AddRow,
    Prim::Sub,
    Prim::Mul,
    Prim::Scale,
    Prim::ScaleRows,
    Prim::Tanh,
    Prim::Relu,
    Prim::Sigmoid,
    Prim::Softplus,
    Prim::Log,
    Prim::Softmax,
    Prim::RowMean,
    Prim::RowSum,
    Prim::SelectRows,
];

fn matrix(rows: usize, cols: usize, vals: &[f64]) -> Matrix {
    Matrix::new(rows, cols, vals[..rows * cols].to_vec()).unwrap()
}

/// loss = sum(op(a, b) ∘ r), with `r` a fixed random weighting so that every
/// output entry contributes a different amount.
fn loss(prim: Prim, g: &mut Graph, p: &Bindings, r: &[f64]) -> Result<Var> {
    let a = p.get("a")?;
    let b = p.get("b")?;
    let bias = p.get("bias")?;
    let out = match prim {
        Prim::MatMul => g.matmul(a, b)?,
        Prim::Add => g.add(a, a)?,
        Prim::AddRow => g.add_row(a, bias)?,
        Prim::Sub => {
            let t = g.tanh(a)?;
            g.sub(a, t)?
        }
        Prim::Mul => {
            let t = g.tanh(a)?;
            g.mul(a, t)?
        }
        Prim::Scale => g.scale(a, -1.7)?,
        Prim::ScaleRows => g.scale_rows(a, &[0.3, -1.2, 2.0])?,
        Prim::Tanh => g.tanh(a)?,
        Prim::Relu => g.relu(a)?,
        Prim::Sigmoid => g.sigmoid(a)?,
        Prim::Softplus => g.softplus(a)?,
        Prim::Log => {
            let sq = g.mul(a, a)?;
            let c = g.constant(Matrix::filled(3, 4, 0.1));
            let pos = g.add(sq, c)?;
            g.log(pos)?
        }
        Prim::Softmax => g.softmax(a)?,
        Prim::RowMean => g.row_mean(a)?,
        Prim::RowSum => g.row_sum(a)?,
        Prim::SelectRows => g.select_rows(a, &[2, 0, 2, 1])?,
    };
    let (rows, cols) = g.value(out).shape();
    let w = g.constant(matrix(rows, cols, r));
    let weighted = g.mul(out, w)?;
    g.sum(weighted)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn every_primitive_matches_central_differences(
        a in prop::collection::vec(-2.0f64..2.0, 12),
        b in prop::collection::vec(-2.0f64..2.0, 8),
        bias in prop::collection::vec(-2.0f64..2.0, 4),
        r in prop::collection::vec(-2.0f64..2.0, 16),
    ) {
        let mut params = ParameterSet::new();
        params.insert("a", matrix(3, 4, &a)).unwrap();
        params.insert("b", matrix(4, 2, &b)).unwrap();
        params.insert("bias", matrix(1, 4, &bias)).unwrap();
        for prim in ALL {
            // Skip draws that land within epsilon of the relu kink.
            if matches!(prim, Prim::Relu) && a.iter().any(|v| v.abs() < 1e-4) {
                continue;
            }
            let report = grad_check(&params, |g, p| loss(prim, g, p, &r), GradCheckOptions::default()).unwrap();
            prop_assert!(report.passed, "{prim:?}: {report:?}");
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(logits in prop::collection::vec(-1000.0f64..1000.0, 2..40)) {
        let n = logits.len() / 2;
        let m = Matrix::new(n, 2, logits[..2 * n].to_vec()).unwrap();
        let p = softmax_stable(&m).unwrap();
        for row in 0..n {
            let s: f64 = p.row(row).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(p.row(row).iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn backward_is_deterministic(a in prop::collection::vec(-2.0f64..2.0, 12)) {
        let mut params = ParameterSet::new();
        params.insert("a", matrix(3, 4, &a)).unwrap();
        let mut g = Graph::new();
        let bind = params.bind(&mut g);
        let x = bind.get("a").unwrap();
        let t = g.tanh(x).unwrap();
        let s = g.softmax(t).unwrap();
        let l = g.sum(s).unwrap();
        let sq = g.mul(t, t).unwrap();
        let l2 = g.sum(sq).unwrap();
        let total = g.add(l, l2).unwrap();
        g.backward(total).unwrap();
        let first = g.gradient(x).clone();
        g.zero_grad();
        g.backward(total).unwrap();
        prop_assert_eq!(first, g.gradient(x).clone());
    }
}
