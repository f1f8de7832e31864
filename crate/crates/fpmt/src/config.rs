//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys mirror the
//! pipeline configuration fields. `variant` is applied before every other key,
//! so a file may override the mixing policy or augmentation flag it implies.

use std::path::Path;

use fpmt_core::encoder::Activation;
use fpmt_core::losses::KlDirection;
use fpmt_core::mixing::MixPolicy;
use fpmt_core::pipeline::{PipelineConfig, Variant, MT_ALPHA};

use crate::error::{FormatError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: u64,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str, origin: &Path) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| FormatError::parse(origin, line, format!("expected `key = value`, found `{t}`")))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(FormatError::parse(origin, line, "empty key"));
        }
        if out.iter().any(|e| e.key == key) {
            return Err(FormatError::parse(origin, line, format!("`{key}` set twice")));
        }
        out.push(Entry {
            line,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(e: &Entry, origin: &Path) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| FormatError::parse(origin, e.line, format!("`{}` has an invalid value `{}`", e.key, e.value)))
}

fn flag(e: &Entry, origin: &Path) -> Result<bool> {
    match e.value.as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(FormatError::parse(origin, e.line, format!("`{}` expects true/false", e.key))),
    }
}

/// Applies pipeline keys onto `config`; returns entries it did not recognise.
pub fn apply_entries(config: &mut PipelineConfig, entries: &[Entry], origin: &Path) -> Result<Vec<Entry>> {
    let wrap = |e: &Entry, err: fpmt_core::Error| FormatError::parse(origin, e.line, err.to_string());
    if let Some(e) = entries.iter().find(|e| e.key == "variant") {
        config.set_variant(Variant::parse(&e.value).map_err(|err| wrap(e, err))?);
    }
    let mut alpha: Option<f64> = None;
    let mut keep_larger: Option<bool> = None;
    let mut rest = Vec::new();
    for e in entries {
        match e.key.as_str() {
            "variant" => {}
            "stage1_epochs" => config.stage1_epochs = num(e, origin)?,
            "stage2_epochs" => config.stage2_epochs = num(e, origin)?,
            "stage3_epochs" => config.stage3_epochs = num(e, origin)?,
            "batch_size" => config.batch_size = num(e, origin)?,
            "lr_encoder" => config.lr_encoder = num(e, origin)?,
            "lr_head" => config.lr_head = num(e, origin)?,
            "lr_scale" => config.lr_scale = num(e, origin)?,
            "mix_policy" => {
                config.mix_policy = match e.value.as_str() {
                    "confidence" | "confidence_ratio" => MixPolicy::ConfidenceRatio,
                    "beta" | "beta_random" => MixPolicy::beta(MT_ALPHA),
                    other => return Err(FormatError::parse(origin, e.line, format!("unknown mix_policy `{other}`"))),
                }
            }
            "beta_alpha" => alpha = Some(num(e, origin)?),
            "keep_larger" => keep_larger = Some(flag(e, origin)?),
            "E" | "mix_layer" => config.mix_layer = num(e, origin)?,
            "depth" => config.depth = num(e, origin)?,
            "width" => config.width = num(e, origin)?,
            "activation" => config.activation = Activation::parse(&e.value).map_err(|err| wrap(e, err))?,
            "w_max" => config.w_max = num(e, origin)?,
            "w_ramp_fraction" => config.w_ramp_fraction = num(e, origin)?,
            "mask_rate" => config.mask_rate = num(e, origin)?,
            "seed" => config.seed = num(e, origin)?,
            "gan_enabled" => config.gan_enabled = flag(e, origin)?,
            "kl_direction" => config.kl_direction = KlDirection::parse(&e.value).map_err(|err| wrap(e, err))?,
            "labeled_per_class" => config.labeled_per_class = num(e, origin)?,
            "unlabeled_per_class" => config.unlabeled_per_class = num(e, origin)?,
            "test_per_class" => config.test_per_class = num(e, origin)?,
            "gan_steps" => config.gan.steps = num(e, origin)?,
            "gan_batch" => config.gan.batch = num(e, origin)?,
            "gan_lr" => config.gan.lr = num(e, origin)?,
            "gan_latent_dim" => config.gan.latent_dim = num(e, origin)?,
            _ => rest.push(e.clone()),
        }
    }
    if alpha.is_some() || keep_larger.is_some() {
        match &mut config.mix_policy {
            MixPolicy::BetaRandom { alpha: a, keep_larger: k } => {
                if let Some(v) = alpha {
                    *a = v;
                }
                if let Some(v) = keep_larger {
                    *k = v;
                }
            }
            MixPolicy::ConfidenceRatio => log::warn!("beta_alpha/keep_larger ignored: mix policy is confidence ratio"),
        }
    }
    Ok(rest)
}

/// Parses a full pipeline config, rejecting unknown keys.
pub fn parse_pipeline_config(text: &str, origin: &Path) -> Result<PipelineConfig> {
    let entries = parse_entries(text, origin)?;
    let mut config = PipelineConfig::default();
    let rest = apply_entries(&mut config, &entries, origin)?;
    if let Some(e) = rest.first() {
        return Err(FormatError::parse(origin, e.line, format!("unknown key `{}`", e.key)));
    }
    config.validate()?;
    Ok(config)
}

/// Renders every recognised key, one per line.
pub fn render_pipeline_config(c: &PipelineConfig) -> String {
    let (policy, alpha, keep) = match c.mix_policy {
        MixPolicy::ConfidenceRatio => ("confidence", None, None),
        MixPolicy::BetaRandom { alpha, keep_larger } => ("beta", Some(alpha), Some(keep_larger)),
    };
    let mut s = format!(
        "variant = {}\nstage1_epochs = {}\nstage2_epochs = {}\nstage3_epochs = {}\nbatch_size = {}\n\
         lr_encoder = {:e}\nlr_head = {:e}\nlr_scale = {}\nmix_policy = {policy}\n",
        c.variant.name(),
        c.stage1_epochs,
        c.stage2_epochs,
        c.stage3_epochs,
        c.batch_size,
        c.lr_encoder,
        c.lr_head,
        c.lr_scale
    );
    if let (Some(a), Some(k)) = (alpha, keep) {
        s += &format!("beta_alpha = {a}\nkeep_larger = {k}\n");
    }
    s += &format!(
        "mix_layer = {}\ndepth = {}\nwidth = {}\nactivation = {}\nw_max = {}\nw_ramp_fraction = {}\n\
         mask_rate = {}\nseed = {}\ngan_enabled = {}\nkl_direction = {}\nlabeled_per_class = {}\n\
         unlabeled_per_class = {}\ntest_per_class = {}\ngan_steps = {}\ngan_batch = {}\ngan_lr = {}\n\
         gan_latent_dim = {}\n",
        c.mix_layer,
        c.depth,
        c.width,
        c.activation.name(),
        c.w_max,
        c.w_ramp_fraction,
        c.mask_rate,
        c.seed,
        c.gan_enabled,
        c.kl_direction.name(),
        c.labeled_per_class,
        c.unlabeled_per_class,
        c.test_per_class,
        c.gan.steps,
        c.gan.batch,
        c.gan.lr,
        c.gan.latent_dim
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Result<PipelineConfig> {
        parse_pipeline_config(text, Path::new("cfg"))
    }

    #[test]
    fn variant_first_then_overrides() {
        let c = p("mix_policy = confidence\n# comment\n\nvariant = mt\nseed = 7\n").unwrap();
        assert_eq!(c.variant, Variant::Mt);
        assert_eq!(c.mix_policy, MixPolicy::ConfidenceRatio);
        assert_eq!(c.seed, 7);
        let c = p("variant = mt\nbeta_alpha = 0.4\nkeep_larger = true\n").unwrap();
        assert_eq!(
            c.mix_policy,
            MixPolicy::BetaRandom {
                alpha: 0.4,
                keep_larger: true
            }
        );
    }

    #[test]
    fn errors_point_at_lines() {
        for (text, line) in [
            ("seed = 1\nbogus = 2\n", 2),
            ("seed = x\n", 1),
            ("seed = 1\nseed = 2\n", 2),
            ("\nno equals sign\n", 2),
            ("variant = bert\n", 1),
        ] {
            match p(text).unwrap_err() {
                FormatError::Parse { line: l, .. } => assert_eq!(l, line, "{text}"),
                other => panic!("{other}"),
            }
        }
        assert!(p("batch_size = 0\n").is_err());
    }

    #[test]
    fn render_parses_back() {
        for v in Variant::ALL {
            let mut c = PipelineConfig::for_variant(v);
            c.seed = 42;
            c.lr_head = 0.002;
            let back = p(&render_pipeline_config(&c)).unwrap();
            assert_eq!(back, c);
        }
    }
}
