//! Plain-text checkpoints.
//!
//! ```text
//! FPMT-CKPT v1
//! d=8 depth=6 width=32 activation=tanh mix_layer=5 classes=2
//! layer1.weight 8 32 <values...>
//! ...
//! norm.mean 1 8 <values...>
//! norm.std 1 8 <values...>
//! norm.keep 1 8 <0/1...>
//! ```
//!
//! Values use 17 significant digits, so loading restores every bit.

use std::fs;
use std::path::Path;

use fpmt_core::data::NormStats;
use fpmt_core::encoder::{Activation, Encoder, EncoderConfig};
use fpmt_core::numcore::{Matrix, ParameterSet};

use crate::error::{FormatError, Result};

pub const MAGIC: &str = "FPMT-CKPT v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: Encoder,
    pub norm_stats: NormStats,
}

fn push_row(out: &mut String, name: &str, rows: usize, cols: usize, values: impl Iterator<Item = String>) {
    out.push_str(&format!("{name} {rows} {cols}"));
    for v in values {
        out.push(' ');
        out.push_str(&v);
    }
    out.push('\n');
}

pub fn render_checkpoint(ck: &Checkpoint) -> String {
    let c = ck.encoder.config();
    let mut out = format!(
        "{MAGIC}\nd={} depth={} width={} activation={} mix_layer={} classes={}\n",
        c.input_dim,
        c.depth,
        c.width,
        c.activation.name(),
        c.mix_layer,
        c.class_count
    );
    for (name, m) in ck.encoder.params().iter() {
        push_row(&mut out, name, m.rows(), m.cols(), m.data().iter().map(|v| format!("{v:.16e}")));
    }
    let ns = &ck.norm_stats;
    let raw = ns.raw_dim();
    push_row(&mut out, "norm.mean", 1, raw, ns.mean.iter().map(|v| format!("{v:.16e}")));
    push_row(&mut out, "norm.std", 1, raw, ns.std.iter().map(|v| format!("{v:.16e}")));
    push_row(&mut out, "norm.keep", 1, raw, ns.keep.iter().map(|k| if *k { "1".into() } else { "0".into() }));
    out
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, render_checkpoint(ck)).map_err(|e| FormatError::io(path, e))
}

pub fn parse_checkpoint(text: &str, origin: &Path) -> Result<Checkpoint> {
    let err = |line: usize, msg: String| FormatError::parse(origin, line as u64, msg);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(err(1, format!("missing `{MAGIC}` header"))),
    }
    let (hline, header) = lines.next().ok_or_else(|| err(2, "missing architecture line".into()))?;
    let mut fields = std::collections::BTreeMap::new();
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| err(hline, format!("`{tok}` is not key=value")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| -> Result<usize> {
        fields
            .get(k)
            .ok_or_else(|| err(hline, format!("missing `{k}`")))?
            .parse()
            .map_err(|_| err(hline, format!("`{k}` is not a count")))
    };
    let activation = Activation::parse(fields.get("activation").ok_or_else(|| err(hline, "missing `activation`".into()))?)
        .map_err(|e| err(hline, e.to_string()))?;
    let config = EncoderConfig {
        input_dim: get("d")?,
        depth: get("depth")?,
        width: get("width")?,
        activation,
        mix_layer: get("mix_layer")?,
        class_count: get("classes")?,
    };

    let mut params = ParameterSet::new();
    let mut norm: [Option<Vec<f64>>; 3] = [None, None, None];
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let name = toks.next().expect("non-empty line");
        let rows: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(n, "bad row count".into()))?;
        let cols: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(n, "bad column count".into()))?;
        let values = toks
            .map(|t| t.parse::<f64>().map_err(|_| err(n, format!("`{t}` is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != rows * cols {
            return Err(err(n, format!("{name}: expected {} values, found {}", rows * cols, values.len())));
        }
        match name {
            "norm.mean" => norm[0] = Some(values),
            "norm.std" => norm[1] = Some(values),
            "norm.keep" => norm[2] = Some(values),
            _ => {
                let m = Matrix::new(rows, cols, values).map_err(|e| err(n, e.to_string()))?;
                params.insert(name, m).map_err(|e| err(n, e.to_string()))?;
            }
        }
    }
    let [Some(mean), Some(std), Some(keep)] = norm else {
        return Err(err(0, "normalization statistics missing".into()));
    };
    if mean.len() != std.len() || mean.len() != keep.len() {
        return Err(err(0, "normalization statistics have different lengths".into()));
    }
    let norm_stats = NormStats {
        mean,
        std,
        keep: keep.iter().map(|k| *k != 0.0).collect(),
    };
    if norm_stats.kept_dim() != config.input_dim {
        return Err(err(0, "normalization keeps a different number of features than d".into()));
    }
    let encoder = Encoder::from_parameters(config, params)?;
    Ok(Checkpoint { encoder, norm_stats })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_checkpoint(&text, path)
}
