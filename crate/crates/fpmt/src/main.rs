use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use fpmt::ablation::{aggregate, parse_grid, render_aggregate_csv, render_long_csv, render_markdown, run_ablation};
use fpmt::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use fpmt::config::parse_pipeline_config;
use fpmt::csvio::{load_csv, save_csv};
use fpmt::report::render_train_report;
use fpmt_core::data::{generate_synthetic, SynthConfig, DEFAULT_DELTA};
use fpmt_core::gan::{balance_and_expand, GanConfig};
use fpmt_core::metrics::compute_metrics;
use fpmt_core::pipeline::{run_fpmt, PipelineConfig, Stage, TrainObserver, Variant};

#[derive(Parser)]
#[command(name = "fpmt", version, about = "Semi-supervised traffic incident detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic detector dataset.
    GenerateData {
        #[arg(long)]
        normal: usize,
        #[arg(long)]
        incident: usize,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Balance every class to a target count with per-class GANs.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        target_per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        gan_steps: Option<usize>,
    },
    /// Run the three training stages and write a checkpoint and loss report.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// `key = value` file; command-line flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        labels_per_class: Option<usize>,
        #[arg(long)]
        unlabeled_per_class: Option<usize>,
        #[arg(long)]
        test_per_class: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_ckpt: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Score a checkpoint on the labeled rows of a CSV.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a variant × label budget × seed grid.
    Ablate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Logs stage timings to stderr.
struct Progress {
    start: Instant,
}

impl TrainObserver for Progress {
    fn stage_started(&mut self, stage: Stage) {
        log::info!("{} started", stage.tag());
    }

    fn stage_finished(&mut self, stage: Stage) {
        log::info!("{} finished at {:.1}s", stage.tag(), self.start.elapsed().as_secs_f64());
    }

    fn epoch_finished(&mut self, r: &fpmt_core::pipeline::EpochRecord) {
        log::debug!("{} epoch {}: total {:.6}", r.stage.tag(), r.epoch, r.loss.total);
    }

    fn clock_ms(&mut self) -> Option<u64> {
        Some(self.start.elapsed().as_millis() as u64)
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenerateData {
            normal,
            incident,
            delta,
            seed,
            dim,
            out,
        } => {
            let ds = generate_synthetic(&SynthConfig {
                n_normal: normal,
                n_incident: incident,
                dim,
                delta,
                seed,
            })?;
            save_csv(&ds, &out)?;
            println!("wrote {} rows to {}", ds.len(), out.display());
        }
        Command::Augment {
            input,
            out,
            target_per_class,
            seed,
            gan_steps,
        } => {
            let ds = load_csv(&input)?;
            let mut cfg = GanConfig {
                seed,
                ..GanConfig::default()
            };
            if let Some(s) = gan_steps {
                cfg.steps = s;
            }
            let expanded = balance_and_expand(&ds, target_per_class, &cfg)?;
            save_csv(&expanded, &out)?;
            println!(
                "class counts {:?}, {} synthetic rows, wrote {}",
                expanded.class_counts(),
                expanded.synthetic_count(),
                out.display()
            );
        }
        Command::Train {
            data,
            config,
            variant,
            labels_per_class,
            unlabeled_per_class,
            test_per_class,
            seed,
            out_ckpt,
            report,
        } => {
            let mut cfg = match &config {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    parse_pipeline_config(&text, p)?
                }
                None => PipelineConfig::default(),
            };
            if let Some(v) = variant {
                cfg.set_variant(Variant::parse(&v)?);
            }
            if let Some(v) = labels_per_class {
                cfg.labeled_per_class = v;
            }
            if let Some(v) = unlabeled_per_class {
                cfg.unlabeled_per_class = v;
            }
            if let Some(v) = test_per_class {
                cfg.test_per_class = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            let ds = load_csv(&data)?;
            log::info!("{}", fpmt_core::pipeline::describe(&cfg));
            let mut progress = Progress { start: Instant::now() };
            let out = run_fpmt(&ds, &cfg, &mut progress)?;
            save_checkpoint(
                &Checkpoint {
                    encoder: out.encoder,
                    norm_stats: out.norm_stats,
                },
                &out_ckpt,
            )?;
            write(&report, &render_train_report(&out.report))?;
            let m = out.report.metrics.expect("evaluated");
            println!(
                "{} test CR/DR/F1 = {} (labeled {}, unlabeled {}, test {}, synthetic {})",
                cfg.variant.label(),
                m.cell(),
                out.split.labeled,
                out.split.unlabeled,
                out.split.test,
                out.split.synthetic_added
            );
        }
        Command::Evaluate { ckpt, data } => {
            let ck = load_checkpoint(&ckpt)?;
            let ds = load_csv(&data)?;
            let labeled: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples()[i].label.class().is_some()).collect();
            if labeled.is_empty() {
                bail!("{} has no labeled rows", data.display());
            }
            let std_ds = ck.norm_stats.apply(&ds.subset(&labeled))?;
            let truths: Vec<usize> = std_ds.samples().iter().map(|s| s.label.class().expect("labeled")).collect();
            let preds = ck.encoder.predict(&std_ds.features())?;
            let m = compute_metrics(&preds, &truths)?;
            println!("CR/DR/F1 = {}", m.cell());
            println!(
                "TP={} FP={} TN={} FN={}",
                m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn_
            );
        }
        Command::Ablate { grid, out } => {
            let text = fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let g = parse_grid(&text, &grid)?;
            let ds = g.data.load()?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let total = g.cell_count();
            let mut done = 0;
            let table = run_ablation(&ds, &g, |row| {
                done += 1;
                match &row.outcome {
                    Ok((cr, dr, f1)) => eprintln!(
                        "[{done}/{total}] {} labels={} seed={}: {cr:.1}/{dr:.1}/{f1:.1}",
                        row.variant.label(),
                        row.labels_per_class,
                        row.seed
                    ),
                    Err(e) => eprintln!(
                        "[{done}/{total}] {} labels={} seed={}: FAILED {e}",
                        row.variant.label(),
                        row.labels_per_class,
                        row.seed
                    ),
                }
            });
            let cells = aggregate(&table);
            write(&out.join("metrics.csv"), &render_long_csv(&table))?;
            write(&out.join("aggregate.csv"), &render_aggregate_csv(&cells))?;
            let md = render_markdown(&cells);
            write(&out.join("aggregate.md"), &md)?;
            print!("{md}");
            if table.failures() > 0 {
                eprintln!("{} of {total} cells failed", table.failures());
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
