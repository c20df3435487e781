//! Optional TOML run configuration, merged underneath command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use crate::error::{CliError, Result};
use erasim::params::RamanKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Xb,
    XaCurrent,
    XaOptimal,
}

impl From<Preset> for RamanKind {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Xb => RamanKind::Xb,
            Preset::XaCurrent => RamanKind::XaCurrent,
            Preset::XaOptimal => RamanKind::XaOptimal,
        }
    }
}

/// On-disk configuration. Every field is optional; flags override it.
///
/// `[set]` holds dotted keys (`"images.error.threshold" = 5.0`) and
/// `[params]` holds the same values as nested tables; both flatten to
/// dotted overrides, `[params]` first.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub script: Option<PathBuf>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub preset: Option<Preset>,
    #[serde(default)]
    pub set: toml::Table,
    #[serde(default)]
    pub params: toml::Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Args(format!("{}: {e}", path.display())))?;
        let mut cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| CliError::Args(format!("{}: {e}", path.display())))?;
        // Relative paths are taken from the config file's directory.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.script, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        flatten(&self.params, "", &mut out)?;
        for (key, value) in &self.set {
            out.push((key.clone(), json_text(value)?));
        }
        Ok(out)
    }
}

fn json_text(value: &toml::Value) -> Result<String> {
    serde_json::to_string(value).map_err(|e| CliError::Args(format!("config value: {e}")))
}

fn flatten(table: &toml::Table, prefix: &str, out: &mut Vec<(String, String)>) -> Result<()> {
    for (key, value) in table {
        let dotted = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match value {
            toml::Value::Table(inner) => flatten(inner, &dotted, out)?,
            leaf => out.push((dotted, json_text(leaf)?)),
        }
    }
    Ok(())
}

/// Split a `KEY=VALUE` flag.
pub fn parse_assignment(raw: &str) -> Result<(String, String)> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(CliError::Args(format!("expected KEY=VALUE, got `{raw}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_params_flatten_to_dotted_keys() {
        let cfg: ConfigFile = toml::from_str(
            r#"
            seed = 3
            format = "jsonl"
            preset = "xa-current"
            [set]
            "images.error.threshold" = 5.5
            [params.raman.xb]
            q_pi = 40.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.format, Some(Format::Jsonl));
        assert_eq!(cfg.preset, Some(Preset::XaCurrent));
        let o = cfg.overrides().unwrap();
        assert_eq!(o[0], ("raman.xb.q_pi".into(), "40.0".into()));
        assert_eq!(o[1], ("images.error.threshold".into(), "5.5".into()));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("sead = 3").is_err());
    }

    #[test]
    fn assignments() {
        assert_eq!(parse_assignment("a.b=1").unwrap(), ("a.b".into(), "1".into()));
        assert!(parse_assignment("a.b").is_err());
        assert!(parse_assignment("=1").is_err());
    }
}
