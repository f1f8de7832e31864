//! Acceptance criteria 1-8. Each test prints one `ACCEPTANCE Cn PASS|FAIL`
//! line before asserting, so `cargo test --test acceptance -- --nocapture`
//! gives a one-screen summary.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use fpmt::ablation::{aggregate, run_ablation, DataSource, Grid};
use fpmt_core::data::{generate_synthetic, Dataset, Label, Sample, SynthConfig};
use fpmt_core::encoder::{Encoder, EncoderConfig, ProbVector, PseudoLabel};
use fpmt_core::gan::{
    balance_and_expand, discriminator_objective, generate, generator_objective, train_gan, GanConfig, GanTrainer,
};
use fpmt_core::losses::{
    cross_entropy, cross_entropy_logits, kl_consistency, kl_consistency_logits, route_losses, route_losses_graph,
    KlDirection,
};
use fpmt_core::metrics::{compute_metrics, sign_test};
use fpmt_core::mixing::{confidence_lambda, mixed_logits, ptmix_forward, tmix_forward, MixPair, MixTarget, Origin};
use fpmt_core::numcore::{grad_check, softmax_stable, GradCheckOptions, Graph, Matrix};
use fpmt_core::pipeline::{run_fpmt, PipelineConfig, Silent, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u8, pass: bool, detail: &str) {
    println!("ACCEPTANCE C{id} {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn one_hot_rows(classes: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(classes.len(), 2);
    for (i, c) in classes.iter().enumerate() {
        m.set(i, *c, 1.0);
    }
    m
}

#[test]
fn c1_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let encoder = Encoder::new(EncoderConfig::new(8), &mut rng).unwrap();
    let x = random_matrix(6, 8, &mut rng);
    let targets = one_hot_rows(&[0, 1, 1, 0, 1, 0]);
    let opts = GradCheckOptions::default();
    let config = *encoder.config();
    let mut worst: f64 = 0.0;
    let mut ok = true;

    // (a) encoder with cross-entropy
    let r = grad_check(
        encoder.params(),
        |g, b| {
            let vars = fpmt_core::encoder::EncoderVars::new(&config, b)?;
            let input = g.constant(x.clone());
            let logits = vars.logits(g, input)?;
            cross_entropy_logits(g, logits, &targets)
        },
        opts,
    )
    .unwrap();
    ok &= r.passed;
    worst = worst.max(r.max_rel_error);

    // (b) hidden-space mixing at three ratios
    let xp = random_matrix(6, 8, &mut rng);
    let both = x.vstack(&xp).unwrap();
    let tp = one_hot_rows(&[1, 1, 0, 0, 1, 0]);
    for lambda in [0.0, 0.5, 1.0] {
        let pairs: Vec<MixPair> = (0..6)
            .map(|i| MixPair {
                index_q: i,
                index_p: 6 + i,
                lambda,
                origin_q: Origin::Labeled,
                origin_p: Origin::Labeled,
            })
            .collect();
        let mixed_t = {
            let a = targets.scale(lambda);
            a.add(&tp.scale(1.0 - lambda)).unwrap()
        };
        // graph path agrees with the direct forward
        let (direct, _) = tmix_forward(&encoder, &x, &xp, &targets, &tp, lambda, config.mix_layer).unwrap();
        let mut g = Graph::new();
        let (_, vars) = encoder.bind(&mut g);
        let input = g.constant(both.clone());
        let via_graph = mixed_logits(&mut g, &vars, input, &pairs, config.mix_layer).unwrap();
        ok &= g.value(via_graph).data() == direct.data();
        let r = grad_check(
            encoder.params(),
            |g, b| {
                let vars = fpmt_core::encoder::EncoderVars::new(&config, b)?;
                let input = g.constant(both.clone());
                let logits = mixed_logits(g, &vars, input, &pairs, config.mix_layer)?;
                cross_entropy_logits(g, logits, &mixed_t)
            },
            opts,
        )
        .unwrap();
        ok &= r.passed;
        worst = worst.max(r.max_rel_error);
    }

    // (c) consistency divergence, both directions
    let soft = softmax_stable(&random_matrix(6, 2, &mut rng)).unwrap();
    for dir in [KlDirection::ModelFirst, KlDirection::TargetFirst] {
        let r = grad_check(
            encoder.params(),
            |g, b| {
                let vars = fpmt_core::encoder::EncoderVars::new(&config, b)?;
                let input = g.constant(x.clone());
                let logits = vars.logits(g, input)?;
                kl_consistency_logits(g, logits, &soft, dir)
            },
            opts,
        )
        .unwrap();
        ok &= r.passed;
        worst = worst.max(r.max_rel_error);
    }

    // (d) both GAN players at a frozen step
    let real = random_matrix(64, 4, &mut rng);
    let mut trainer = GanTrainer::new(real, GanConfig { batch: 16, ..GanConfig::default() }).unwrap();
    for _ in 0..5 {
        trainer.step_discriminator().unwrap();
        trainer.step_generator().unwrap();
    }
    let xr = trainer.sample_real();
    let z = trainer.sample_latent(16);
    let (gn, dn) = (trainer.gen_net().clone(), trainer.disc_net().clone());
    let (gp, dp) = (trainer.generator().clone(), trainer.discriminator().clone());
    let r = grad_check(&dp, |g, b| discriminator_objective(g, &dn, b, &gn, &gp, &xr, &z), opts).unwrap();
    ok &= r.passed;
    worst = worst.max(r.max_rel_error);
    let r = grad_check(&gp, |g, b| generator_objective(g, &gn, b, &dn, &dp, &z), opts).unwrap();
    ok &= r.passed;
    worst = worst.max(r.max_rel_error);

    let secs = start.elapsed().as_secs_f64();
    let pass = ok && worst < 1e-4 && secs < 60.0;
    report(1, pass, &format!("max relative error {worst:.2e}, {secs:.1}s"));
    assert!(pass);
}

#[test]
fn c2_mixing_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let encoder = Encoder::new(EncoderConfig::new(5), &mut rng).unwrap();
    let x = random_matrix(7, 5, &mut rng);
    let xp = random_matrix(7, 5, &mut rng);
    let y = one_hot_rows(&[0, 1, 0, 1, 0, 1, 1]);
    let full = encoder.forward_full(&x).unwrap();
    let mut identity = true;
    for layer in 1..=encoder.config().depth {
        let (logits, _) = tmix_forward(&encoder, &x, &xp, &y, &y, 1.0, layer).unwrap();
        identity &= logits.data().iter().zip(full.data()).all(|(a, b)| a.to_bits() == b.to_bits());
    }

    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let o: f64 = rng.random_range(1e-6..1.0);
        let op: f64 = rng.random_range(1e-6..1.0);
        let a = confidence_lambda(o, op).unwrap();
        let b = confidence_lambda(op, o).unwrap();
        worst = worst.max((a - (1.0 - b)).abs());
    }
    let antisymmetric = worst <= 1e-15;

    let label = |c| MixTarget::Label(ProbVector::one_hot(c, 2).unwrap());
    let out = ptmix_forward(&encoder, &x.select_rows(&[0]).unwrap(), &xp.select_rows(&[0]).unwrap(), &[label(0)], &[label(1)], 3).unwrap();
    let half = out.lambdas == [0.5];
    // a confident pseudo-label against a labeled row: 0.9 / 1.9
    let pseudo = MixTarget::Pseudo(PseudoLabel::from_probs(ProbVector::new(vec![0.1, 0.9]).unwrap()));
    let out2 = ptmix_forward(&encoder, &x.select_rows(&[0]).unwrap(), &xp.select_rows(&[0]).unwrap(), &[pseudo], &[label(1)], 3).unwrap();
    let ratio = (out2.lambdas[0] - 0.9 / 1.9).abs() < 1e-15;

    let pass = identity && antisymmetric && half && ratio;
    report(
        2,
        pass,
        &format!("identity={identity} antisymmetry max dev {worst:.1e} labeled pair lambda={:?}", out.lambdas),
    );
    assert!(pass);
}

#[test]
fn c3_loss_oracles() {
    let m = |rows: &[&[f64]]| Matrix::from_rows(rows).unwrap();
    let ce = cross_entropy(&m(&[&[1.0, 0.0]]), &m(&[&[0.5, 0.5]])).unwrap();
    let ce_ok = (ce - std::f64::consts::LN_2).abs() < 1e-9;
    let kl = kl_consistency(&m(&[&[0.5, 0.5]]), &m(&[&[0.25, 0.75]])).unwrap();
    let kl_ok = (kl - 0.143841).abs() < 1e-6;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let logits = random_matrix(8, 2, &mut rng);
    let targets = softmax_stable(&random_matrix(8, 2, &mut rng)).unwrap();
    let pairs = |oq: Origin, op: Origin| -> Vec<MixPair> {
        (0..8)
            .map(|i| MixPair {
                index_q: i,
                index_p: (i + 3) % 8,
                lambda: 0.6,
                origin_q: oq,
                origin_p: op,
            })
            .collect()
    };
    let all_l = route_losses(&pairs(Origin::Labeled, Origin::Labeled), &logits, &targets, 0.7, KlDirection::ModelFirst).unwrap();
    let all_u = route_losses(&pairs(Origin::Unlabeled, Origin::Unlabeled), &logits, &targets, 0.7, KlDirection::ModelFirst).unwrap();
    let routing = all_l.consistency == 0.0 && all_l.supervised > 0.0 && all_u.supervised == 0.0 && all_u.consistency > 0.0;

    let mut mixed = pairs(Origin::Labeled, Origin::Unlabeled);
    for (i, p) in mixed.iter_mut().enumerate() {
        if i % 3 == 0 {
            p.origin_p = Origin::Labeled;
        }
        if i % 4 == 1 {
            p.origin_q = Origin::Unlabeled;
        }
    }
    let mut worst: f64 = 0.0;
    for w in [0.0, 0.3, 1.0, 2.5] {
        let mut g = Graph::new();
        let l = g.constant(logits.clone());
        let routed = route_losses_graph(&mut g, &mixed, l, &targets, w, KlDirection::ModelFirst).unwrap();
        let b = routed.breakdown;
        worst = worst.max((g.value(routed.total).value() - (b.supervised + w * b.consistency)).abs());
        worst = worst.max((b.total - (b.supervised + w * b.consistency)).abs());
    }
    let combined = worst <= 1e-12;

    let pass = ce_ok && kl_ok && routing && combined;
    report(3, pass, &format!("CE={ce:.12} KL={kl:.9} routing={routing} combine dev {worst:.1e}"));
    assert!(pass);
}

#[test]
fn c4_metric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let preds: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
    let truths: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
    let m = compute_metrics(&preds, &truths).unwrap();
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for i in 0..preds.len() {
        for (p, t, slot) in [(1, 1, &mut tp), (1, 0, &mut fp), (0, 0, &mut tn), (0, 1, &mut fn_)] {
            if preds[i] == p && truths[i] == t {
                *slot += 1;
            }
        }
    }
    let counts = (m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn_) == (tp, fp, tn, fn_);
    let cr = 100.0 * (tp + tn) as f64 / 1e4;
    let dr = 100.0 * tp as f64 / (tp + fn_) as f64;
    let p = tp as f64 / (tp + fp) as f64;
    let f1 = 100.0 * 2.0 * p * (dr / 100.0) / (p + dr / 100.0);
    let values = (m.cr - cr).abs() < 1e-9 && (m.dr - dr).abs() < 1e-9 && (m.f1 - f1).abs() < 1e-9;

    let truths: Vec<usize> = (0..100).map(|i| usize::from(i < 10)).collect();
    let d = compute_metrics(&[0; 100], &truths).unwrap();
    let degenerate = d.cr == 90.0 && d.dr == 0.0 && d.f1 == 0.0;

    let pass = counts && values && degenerate;
    report(4, pass, &format!("random {} degenerate {}", m.cell(), d.cell()));
    assert!(pass);
}

fn blob(n: usize, mean: [f64; 2], std: [f64; 2], rng: &mut ChaCha8Rng) -> Matrix {
    use rand_distr::{Distribution, StandardNormal};
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        for j in 0..2 {
            let z: f64 = StandardNormal.sample(rng);
            data.push(mean[j] + std[j] * z);
        }
    }
    Matrix::new(n, 2, data).unwrap()
}

#[test]
fn c5_augmentation_contract() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = blob(900, [0.0, 0.0], [1.0, 1.0], &mut rng);
    let b = blob(100, [2.0, -1.0], [0.5, 0.8], &mut rng);
    let mut samples = Vec::new();
    for r in 0..900 {
        samples.push(Sample::new(a.row(r).to_vec(), Label::Normal));
    }
    for r in 0..100 {
        samples.push(Sample::new(b.row(r).to_vec(), Label::Incident));
    }
    let ds = Dataset::new(2, samples).unwrap();
    let out = balance_and_expand(&ds, 1000, &GanConfig::default()).unwrap();
    let counts_ok = out.class_counts() == [1000, 1000] && out.synthetic_count() == 1000;
    let preserved = out.samples()[..1000] == *ds.samples()
        && out.samples()[1000..].iter().all(|s| s.synthetic)
        && out.samples()[1000..100 + 1000].iter().all(|s| s.label == Label::Normal || s.label == Label::Incident);

    let mut worst: f64 = 0.0;
    for seed in 0..3u64 {
        let mut r = ChaCha8Rng::seed_from_u64(50 + seed);
        let real = blob(600, [1.5, -0.8], [0.6, 1.2], &mut r);
        let model = train_gan(&real, 0, &GanConfig { seed, ..GanConfig::default() }).unwrap();
        let fake = generate(&model, 4000, &mut r).unwrap();
        for j in 0..2 {
            let col = |m: &Matrix| (0..m.rows()).map(|i| m.get(i, j)).collect::<Vec<_>>();
            let (rm, rs) = fpmt_core::metrics::mean_std(&col(&real)).unwrap();
            let (fm, _) = fpmt_core::metrics::mean_std(&col(&fake)).unwrap();
            worst = worst.max((fm - rm).abs() / rs);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = counts_ok && preserved && worst < 0.5 && secs < 300.0;
    report(5, pass, &format!("counts {:?}, worst mean gap {worst:.3} sigma, {secs:.1}s", out.class_counts()));
    assert!(pass);
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Imbalanced detector data: incidents are about one row in seven.
fn directional_dataset() -> Dataset {
    generate_synthetic(&SynthConfig::new(6000, 1000, 2024)).unwrap()
}

#[test]
fn c6_directional_reproduction() {
    let start = Instant::now();
    let ds = directional_dataset();
    let seeds: Vec<u64> = (0..8).collect();
    let mut dr = std::collections::BTreeMap::<Variant, Vec<f64>>::new();
    for &seed in &seeds {
        for v in [Variant::Supervised, Variant::Mt, Variant::Fpmt] {
            let mut c = PipelineConfig::for_variant(v);
            c.seed = seed;
            c.labeled_per_class = 50;
            c.unlabeled_per_class = 5000;
            let out = run_fpmt(&ds, &c, &mut Silent).unwrap();
            let m = out.report.metrics.unwrap();
            println!("c6 seed {seed} {:<10} CR/DR/F1 {}", v.label(), m.cell());
            dr.entry(v).or_default().push(m.dr);
        }
    }
    let f = &dr[&Variant::Fpmt];
    let vs_sup = sign_test(f, &dr[&Variant::Supervised]).unwrap();
    let vs_mt = sign_test(f, &dr[&Variant::Mt]).unwrap();
    let (mf, ms, mm) = (mean(f), mean(&dr[&Variant::Supervised]), mean(&dr[&Variant::Mt]));
    let secs = start.elapsed().as_secs_f64();
    let pass = mf >= ms && mf >= mm && vs_sup.p_value < 0.05 && vs_mt.p_value < 0.05 && secs < 900.0;
    report(
        6,
        pass,
        &format!(
            "mean DR FPMT {mf:.2} vs supervised {ms:.2} (wins {}/{} p={:.3}) vs MT {mm:.2} (wins {}/{} p={:.3}), {} seeds, {secs:.0}s",
            vs_sup.wins,
            vs_sup.wins + vs_sup.losses,
            vs_sup.p_value,
            vs_mt.wins,
            vs_mt.wins + vs_mt.losses,
            vs_mt.p_value,
            seeds.len()
        ),
    );
    assert!(pass);
}

#[test]
fn c7_ablation_ladder() {
    let start = Instant::now();
    let synth = SynthConfig::new(8000, 3000, 77);
    let mut base = PipelineConfig::default();
    // Lighter budget than the defaults: 45 cells must fit a desk-scale run.
    base.unlabeled_per_class = 2000;
    base.stage3_epochs = 10;
    let grid = Grid {
        variants: vec![Variant::Mt, Variant::Pmt, Variant::Fpmt],
        labels: vec![50, 100, 1500],
        seeds: (0..5).collect(),
        base,
        data: DataSource::Generated(synth),
    };
    let ds = grid.data.load().unwrap();
    let table = run_ablation(&ds, &grid, |_| {});
    let cells = aggregate(&table);
    let complete = table.failures() == 0 && table.rows.len() == 45 && cells.len() == 9;
    let mut inversions = Vec::new();
    for v in &grid.variants {
        let row: Vec<_> = grid
            .labels
            .iter()
            .map(|l| cells.iter().find(|c| c.variant == *v && c.labels_per_class == *l).unwrap())
            .collect();
        println!("c7 {:<5} {}", v.label(), row.iter().map(|c| c.cell()).collect::<Vec<_>>().join("  "));
        for w in row.windows(2) {
            for (name, a, b) in [
                ("CR", w[0].cr, w[1].cr),
                ("DR", w[0].dr, w[1].dr),
                ("F1", w[0].f1, w[1].f1),
            ] {
                let (a, b) = (a.map_or(f64::NAN, |m| m.0), b.map_or(f64::NAN, |m| m.0));
                if !(b >= a) {
                    inversions.push(format!("{} {name} {}->{}: {:.2}", v.label(), w[0].labels_per_class, w[1].labels_per_class, a - b));
                }
            }
        }
    }
    let drops: Vec<f64> = inversions
        .iter()
        .map(|s| s.rsplit(' ').next().unwrap().parse::<f64>().unwrap_or(f64::INFINITY))
        .collect();
    let shape_ok = drops.is_empty() || (drops.len() == 1 && drops[0] <= 1.0);
    let secs = start.elapsed().as_secs_f64();
    let pass = complete && shape_ok;
    report(7, pass, &format!("{} cells, inversions {inversions:?}, {secs:.0}s", table.rows.len()));
    assert!(pass);
}

fn fpmt(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_fpmt")).args(args).status().unwrap();
    assert!(status.success(), "fpmt {args:?} failed");
}

#[test]
fn c8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    fpmt(&["generate-data", "--normal", "1500", "--incident", "400", "--seed", "8", "--out", &p("data.csv")]);
    std::fs::write(
        p("run.cfg"),
        "stage1_epochs = 3\nstage2_epochs = 5\nstage3_epochs = 3\ntest_per_class = 100\ngan_steps = 100\n",
    )
    .unwrap();
    for run in ["a", "b"] {
        fpmt(&[
            "train",
            "--data",
            &p("data.csv"),
            "--config",
            &p("run.cfg"),
            "--variant",
            "fpmt",
            "--labels-per-class",
            "50",
            "--unlabeled-per-class",
            "1000",
            "--seed",
            "3",
            "--out-ckpt",
            &p(&format!("{run}.ckpt")),
            "--report",
            &p(&format!("{run}.csv")),
        ]);
    }
    let read = |n: &str| std::fs::read(Path::new(&p(n))).unwrap();
    let ckpt = read("a.ckpt") == read("b.ckpt");
    let rep = read("a.csv") == read("b.csv");
    let nonempty = read("a.ckpt").len() > 1000 && read("a.csv").len() > 30;
    let pass = ckpt && rep && nonempty;
    report(8, pass, &format!("checkpoint identical={ckpt} report identical={rep}"));
    assert!(pass);
}
