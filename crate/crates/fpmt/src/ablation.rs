//! Variant × label-budget × seed experiment grids and their reports.

use std::path::{Path, PathBuf};

use fpmt_core::data::{generate_synthetic, Dataset, SynthConfig};
use fpmt_core::metrics::mean_std;
use fpmt_core::pipeline::{run_fpmt, PipelineConfig, Silent, Variant};

use crate::config::{apply_entries, parse_entries, Entry};
use crate::csvio::load_csv;
use crate::error::{FormatError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Generated(SynthConfig),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::File(p) => load_csv(p),
            DataSource::Generated(cfg) => Ok(generate_synthetic(cfg)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub variants: Vec<Variant>,
    pub labels: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Settings shared by every cell; variant, label count and seed are overridden.
    pub base: PipelineConfig,
    pub data: DataSource,
}

impl Grid {
    pub fn cell_count(&self) -> usize {
        self.variants.len() * self.labels.len() * self.seeds.len()
    }

    pub fn cell_config(&self, variant: Variant, labels: usize, seed: u64) -> PipelineConfig {
        let mut c = self.base.clone();
        c.set_variant(variant);
        c.labeled_per_class = labels;
        c.seed = seed;
        c
    }
}

fn list<T: std::str::FromStr>(e: &Entry, origin: &Path) -> Result<Vec<T>> {
    e.value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| FormatError::parse(origin, e.line, format!("`{}`: bad item `{s}`", e.key)))
        })
        .collect()
}

/// Grid file: `variants`, `labels`, `seeds` (comma lists), a data source
/// (`data = path.csv`, or `normal`/`incident`/`delta`/`data_seed`/`dim` for
/// generated data), plus any pipeline key as a shared setting.
/// A relative `data` path resolves against the grid file's directory.
pub fn parse_grid(text: &str, origin: &Path) -> Result<Grid> {
    let entries = parse_entries(text, origin)?;
    let mut base = PipelineConfig::default();
    let rest = apply_entries(&mut base, &entries, origin)?;
    let mut variants = vec![Variant::Mt, Variant::Pmt, Variant::Fpmt];
    let mut labels = vec![50, 100, 1500];
    let mut seeds: Vec<u64> = (0..5).collect();
    let mut file: Option<PathBuf> = None;
    let mut synth = SynthConfig::new(6000, 6000, 0);
    for e in &rest {
        match e.key.as_str() {
            "variants" => {
                variants = e
                    .value
                    .split(',')
                    .map(|s| Variant::parse(s).map_err(|err| FormatError::parse(origin, e.line, err.to_string())))
                    .collect::<Result<_>>()?
            }
            "labels" => labels = list(e, origin)?,
            "seeds" => seeds = list(e, origin)?,
            "data" => {
                let p = PathBuf::from(&e.value);
                file = Some(if p.is_relative() {
                    origin.parent().unwrap_or(Path::new(".")).join(p)
                } else {
                    p
                });
            }
            "normal" => synth.n_normal = list::<usize>(e, origin)?.first().copied().unwrap_or(0),
            "incident" => synth.n_incident = list::<usize>(e, origin)?.first().copied().unwrap_or(0),
            "delta" => {
                synth.delta = e
                    .value
                    .parse()
                    .map_err(|_| FormatError::parse(origin, e.line, "delta must be a number"))?
            }
            "data_seed" => synth.seed = list::<u64>(e, origin)?.first().copied().unwrap_or(0),
            "dim" => synth.dim = list::<usize>(e, origin)?.first().copied().unwrap_or(0),
            other => return Err(FormatError::parse(origin, e.line, format!("unknown key `{other}`"))),
        }
    }
    if variants.is_empty() || labels.is_empty() || seeds.is_empty() {
        return Err(FormatError::parse(origin, 0, "grid must have at least one variant, label count and seed"));
    }
    base.validate()?;
    Ok(Grid {
        variants,
        labels,
        seeds,
        base,
        data: file.map(DataSource::File).unwrap_or(DataSource::Generated(synth)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub variant: Variant,
    pub labels_per_class: usize,
    pub seed: u64,
    /// `(CR, DR, F1)` in percent, or the error that stopped the cell.
    pub outcome: std::result::Result<(f64, f64, f64), String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationTable {
    pub rows: Vec<MetricRow>,
}

impl AblationTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Runs every cell in grid order (variant, then label count, then seed).
/// Failed cells are recorded and the run continues.
pub fn run_ablation(dataset: &Dataset, grid: &Grid, mut progress: impl FnMut(&MetricRow)) -> AblationTable {
    let mut table = AblationTable::default();
    for &variant in &grid.variants {
        for &labels in &grid.labels {
            for &seed in &grid.seeds {
                let config = grid.cell_config(variant, labels, seed);
                let outcome = run_fpmt(dataset, &config, &mut Silent)
                    .map(|out| {
                        let m = out.report.metrics.expect("run_fpmt always evaluates");
                        (m.cr, m.dr, m.f1)
                    })
                    .map_err(|e| e.to_string());
                let row = MetricRow {
                    variant,
                    labels_per_class: labels,
                    seed,
                    outcome,
                };
                progress(&row);
                table.rows.push(row);
            }
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCell {
    pub variant: Variant,
    pub labels_per_class: usize,
    pub seeds: usize,
    /// `(mean, std)` of CR, DR and F1 over successful seeds; `None` when none succeeded.
    pub cr: Option<(f64, f64)>,
    pub dr: Option<(f64, f64)>,
    pub f1: Option<(f64, f64)>,
}

impl AggregateCell {
    /// `CR/DR/F1` means with one decimal, or `—` for an empty cell.
    pub fn cell(&self) -> String {
        match (self.cr, self.dr, self.f1) {
            (Some(c), Some(d), Some(f)) => format!("{:.1}/{:.1}/{:.1}", c.0, d.0, f.0),
            _ => "—".to_string(),
        }
    }
}

fn ordered<T: PartialEq + Copy>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// Mean over seeds per (variant, label count), in first-seen order.
pub fn aggregate(table: &AblationTable) -> Vec<AggregateCell> {
    let variants = ordered(table.rows.iter().map(|r| r.variant));
    let labels = ordered(table.rows.iter().map(|r| r.labels_per_class));
    let mut cells = Vec::new();
    for &v in &variants {
        for &l in &labels {
            let ok: Vec<(f64, f64, f64)> = table
                .rows
                .iter()
                .filter(|r| r.variant == v && r.labels_per_class == l)
                .filter_map(|r| r.outcome.clone().ok())
                .collect();
            let pick = |f: fn(&(f64, f64, f64)) -> f64| mean_std(&ok.iter().map(f).collect::<Vec<_>>());
            cells.push(AggregateCell {
                variant: v,
                labels_per_class: l,
                seeds: ok.len(),
                cr: pick(|m| m.0),
                dr: pick(|m| m.1),
                f1: pick(|m| m.2),
            });
        }
    }
    cells
}

pub const LONG_HEADER: [&str; 7] = ["variant", "labels_per_class", "seed", "CR", "DR", "F1", "error"];

pub fn render_long_csv(table: &AblationTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LONG_HEADER).expect("in-memory write");
    for r in &table.rows {
        let (cr, dr, f1, err) = match &r.outcome {
            Ok((c, d, f)) => (c.to_string(), d.to_string(), f.to_string(), String::new()),
            Err(e) => (String::new(), String::new(), String::new(), e.clone()),
        };
        w.write_record([
            r.variant.name().to_string(),
            r.labels_per_class.to_string(),
            r.seed.to_string(),
            cr,
            dr,
            f1,
            err,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

pub fn parse_long_csv(text: &str, origin: &Path) -> Result<AblationTable> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| FormatError::parse(origin, e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| FormatError::parse(origin, line, format!("bad {what}"));
        if rec.len() != LONG_HEADER.len() {
            return Err(bad("field count"));
        }
        let variant = Variant::parse(&rec[0]).map_err(|_| bad("variant"))?;
        let labels_per_class = rec[1].parse().map_err(|_| bad("labels_per_class"))?;
        let seed = rec[2].parse().map_err(|_| bad("seed"))?;
        let outcome = if rec[6].is_empty() {
            let f = |i: usize, n: &str| rec[i].parse::<f64>().map_err(|_| bad(n));
            Ok((f(3, "CR")?, f(4, "DR")?, f(5, "F1")?))
        } else {
            Err(rec[6].to_string())
        };
        rows.push(MetricRow {
            variant,
            labels_per_class,
            seed,
            outcome,
        });
    }
    Ok(AblationTable { rows })
}

pub fn render_aggregate_csv(cells: &[AggregateCell]) -> String {
    let mut out = String::from("variant,labels_per_class,seeds,CR_mean,CR_std,DR_mean,DR_std,F1_mean,F1_std\n");
    let fmt = |m: Option<(f64, f64)>| match m {
        Some((a, b)) => format!("{a},{b}"),
        None => ",".to_string(),
    };
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.variant.name(),
            c.labels_per_class,
            c.seeds,
            fmt(c.cr),
            fmt(c.dr),
            fmt(c.f1)
        ));
    }
    out
}

/// Rows are variants, columns label budgets, cells `CR/DR/F1`.
pub fn render_markdown(cells: &[AggregateCell]) -> String {
    let variants = ordered(cells.iter().map(|c| c.variant));
    let labels = ordered(cells.iter().map(|c| c.labels_per_class));
    let mut out = String::from("| Variant |");
    for l in &labels {
        out.push_str(&format!(" {l} labels/class |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(labels.len()));
    out.push('\n');
    for v in &variants {
        out.push_str(&format!("| {} |", v.label()));
        for l in &labels {
            let text = cells
                .iter()
                .find(|c| c.variant == *v && c.labels_per_class == *l)
                .map(AggregateCell::cell)
                .unwrap_or_else(|| "—".to_string());
            out.push_str(&format!(" {text} |"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// Writes the aggregate table in the chosen format.
pub fn emit_report(table: &AblationTable, path: &Path, format: ReportFormat) -> Result<()> {
    if table.rows.is_empty() {
        return Err(FormatError::parse(path, 0, "nothing to report"));
    }
    let cells = aggregate(table);
    let text = match format {
        ReportFormat::Csv => render_aggregate_csv(&cells),
        ReportFormat::Markdown => render_markdown(&cells),
    };
    std::fs::write(path, text).map_err(|e| FormatError::io(path, e))
}
