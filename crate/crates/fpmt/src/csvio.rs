//! Dataset CSV files.
//!
//! Header `f0,...,f{d-1},label` with an optional trailing `synthetic` column.
//! Labels are `0`, `1`, or `-1` for unlabeled. Features are written with 17
//! significant digits so that a save/load cycle is exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use fpmt_core::data::{Dataset, Label, Sample};

use crate::error::{FormatError, Result};

/// Parses CSV text. `origin` names the source in error messages.
pub fn parse_csv(text: &str, origin: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| FormatError::parse(origin, 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let has_synth = names.last() == Some(&"synthetic");
    let label_col = if has_synth { names.len().wrapping_sub(2) } else { names.len().wrapping_sub(1) };
    if names.len() < 2 || label_col >= names.len() || names[label_col] != "label" {
        return Err(FormatError::parse(origin, 1, "header must be f0..f{d-1},label[,synthetic]"));
    }
    let d = label_col;
    for (j, n) in names[..d].iter().enumerate() {
        if *n != format!("f{j}") {
            return Err(FormatError::parse(origin, 1, format!("expected column `f{j}`, found `{n}`")));
        }
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            FormatError::parse(origin, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != names.len() {
            return Err(FormatError::parse(
                origin,
                line,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
        let mut features = Vec::with_capacity(d);
        for (j, cell) in record.iter().take(d).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| FormatError::parse(origin, line, format!("f{j}: `{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(FormatError::parse(origin, line, format!("f{j}: `{cell}` is not finite")));
            }
            features.push(v);
        }
        let raw = &record[d];
        let code: i64 = raw
            .parse()
            .map_err(|_| FormatError::parse(origin, line, format!("label `{raw}` is not an integer")))?;
        let label = Label::from_code(code).map_err(|e| FormatError::parse(origin, line, e.to_string()))?;
        let synthetic = if has_synth {
            match &record[d + 1] {
                "0" => false,
                "1" => true,
                other => return Err(FormatError::parse(origin, line, format!("synthetic flag `{other}` is not 0/1"))),
            }
        } else {
            false
        };
        samples.push(Sample {
            features,
            label,
            synthetic,
        });
    }
    Ok(Dataset::new(d, samples)?)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_csv(&text, path)
}

/// Renders a dataset. The `synthetic` column is present when any row is synthetic.
pub fn render_csv(ds: &Dataset) -> String {
    let with_synth = ds.synthetic_count() > 0;
    let mut out = String::new();
    for j in 0..ds.dim() {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label");
    if with_synth {
        out.push_str(",synthetic");
    }
    out.push('\n');
    for s in ds.samples() {
        for v in &s.features {
            out.push_str(&format!("{v:.16e},"));
        }
        out.push_str(&s.label.code().to_string());
        if with_synth {
            out.push_str(if s.synthetic { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| FormatError::io(path, e))?;
    f.write_all(render_csv(ds).as_bytes()).map_err(|e| FormatError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_csv(text, Path::new("mem.csv"))
    }

    #[test]
    fn minimal_file() {
        let ds = parse("f0,f1,label\n0.1,0.2,1\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.samples()[0].label, Label::Incident);
        assert_eq!(ds.samples()[0].features, [0.1, 0.2]);
    }

    #[test]
    fn unlabeled_sentinel() {
        let ds = parse("f0,label\n3,-1\n").unwrap();
        assert_eq!(ds.samples()[0].label, Label::Unlabeled);
    }

    #[test]
    fn errors_name_the_line() {
        for (text, line) in [
            ("f0,f1,label\n0.1,0.2,1\n0.1,1\n", 3),
            ("f0,f1,label\n0.1,abc,1\n", 2),
            ("f0,f1,label\n0.1,0.2,1\n0.1,0.2,7\n", 3),
            ("f0,f1,label\n0.1,NaN,1\n", 2),
        ] {
            match parse(text).unwrap_err() {
                FormatError::Parse { line: l, .. } => assert_eq!(l, line, "{text}"),
                other => panic!("{other}"),
            }
        }
        assert!(parse("a,b\n1,2\n").is_err());
        assert!(parse("f1,f0,label\n1,2,0\n").is_err());
    }

    #[test]
    fn synthetic_column_round_trips() {
        let mut ds = parse("f0,label\n1.5,0\n").unwrap();
        ds.push(Sample {
            features: vec![0.1 + 0.2],
            label: Label::Incident,
            synthetic: true,
        })
        .unwrap();
        let text = render_csv(&ds);
        assert!(text.starts_with("f0,label,synthetic\n"));
        assert_eq!(parse(&text).unwrap(), ds);
    }
}
