//! JSON configuration tree with dot-path overrides.
//!
//! A config file is a JSON object with sections `corpus`, `bm25`, `chunk`,
//! `fusion`, `scorer`, `selflabel`, `eval`; every field has a default, so
//! the empty object is a valid config. `--set a.b=value` overrides apply
//! on top of the file, and the `LEXENT_SCORER` environment variable
//! overrides `scorer.external` last.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{Aggregation, DecideStrategy};

/// Environment variable overriding `scorer.external`.
pub const SCORER_ENV_VAR: &str = "LEXENT_SCORER";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {msg}")]
    Json { path: PathBuf, msg: String },
    #[error("bad --set override `{0}`: expected key.path=value")]
    BadOverride(String),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// Drop non-English paragraphs at ingest.
    pub filter_language: bool,
    /// Extra abbreviation guard list (one entry per line).
    pub abbreviations: Option<PathBuf>,
    pub stopwords_en: Option<PathBuf>,
    pub stopwords_fr: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Config {
    pub k1: f64,
    pub b: f64,
    /// Candidate cut-off for `retrieve`.
    pub k: usize,
}

impl Default for Bm25Config {
    fn default() -> Self {
        Self {
            k1: 1.5,
            b: 0.75,
            k: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkConfig {
    pub window: usize,
    pub stride: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            window: 150,
            stride: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionSection {
    /// Weight of the semantic score in the union.
    pub w_sem: f64,
    /// `max` or `mean_row_max`.
    pub aggregation: String,
    pub normalize_lex: bool,
    /// `top1`, `topk`, or `relative_threshold`.
    pub decide: String,
    /// Relative-threshold factor.
    pub beta: f64,
    /// k for the `topk` strategy.
    pub top_k: usize,
}

impl Default for FusionSection {
    fn default() -> Self {
        Self {
            w_sem: 0.3,
            aggregation: "mean_row_max".into(),
            normalize_lex: true,
            decide: "relative_threshold".into(),
            beta: 0.9,
            top_k: 1,
        }
    }
}

impl FusionSection {
    pub fn aggregation(&self) -> Result<Aggregation, ConfigError> {
        match self.aggregation.as_str() {
            "max" => Ok(Aggregation::Max),
            "mean_row_max" => Ok(Aggregation::MeanRowMax),
            other => Err(ConfigError::Invalid(format!(
                "unknown aggregation `{other}` (use max or mean_row_max)"
            ))),
        }
    }

    pub fn decide_strategy(&self) -> Result<DecideStrategy, ConfigError> {
        parse_decide_strategy(&self.decide, self.beta, self.top_k)
    }

    pub fn fusion_config(&self) -> Result<crate::fusion::FusionConfig, ConfigError> {
        Ok(crate::fusion::FusionConfig {
            w_sem: self.w_sem,
            aggregation: self.aggregation()?,
            normalize_lex: self.normalize_lex,
        })
    }
}

/// Parse a decision strategy: `top1`, `topk[:k]`, `relative[:beta]`,
/// `relative_threshold[:beta]`.
pub fn parse_decide_strategy(
    name: &str,
    default_beta: f64,
    default_k: usize,
) -> Result<DecideStrategy, ConfigError> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    match head {
        "top1" => Ok(DecideStrategy::Top1),
        "topk" => {
            let k = match arg {
                Some(a) => a
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("bad topk value `{a}`")))?,
                None => default_k,
            };
            Ok(DecideStrategy::TopK(k))
        }
        "relative" | "relative_threshold" => {
            let beta = match arg {
                Some(a) => a
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("bad threshold `{a}`")))?,
                None => default_beta,
            };
            Ok(DecideStrategy::RelativeThreshold(beta))
        }
        other => Err(ConfigError::Invalid(format!(
            "unknown decide strategy `{other}` (use top1, topk[:k], relative[:beta])"
        ))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    /// Feature space size (power of two).
    pub dim: usize,
    pub learning_rate: f64,
    /// External scorer endpoint descriptor; absent means built-in.
    pub external: Option<String>,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            dim: crate::scorer::DEFAULT_DIM,
            learning_rate: crate::scorer::DEFAULT_LEARNING_RATE,
            external: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfLabelSection {
    pub e1: usize,
    pub e2: usize,
    pub threshold: f64,
    pub rounds: usize,
}

impl Default for SelfLabelSection {
    fn default() -> Self {
        Self {
            e1: 2,
            e2: 2,
            threshold: 0.5,
            rounds: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// F-beta weight for reports and ensembling.
    pub beta: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { beta: 2.0 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub corpus: CorpusConfig,
    pub bm25: Bm25Config,
    pub chunk: ChunkConfig,
    pub fusion: FusionSection,
    pub scorer: ScorerConfig,
    pub selflabel: SelfLabelSection,
    pub eval: EvalConfig,
}

fn apply_override(tree: &mut serde_json::Value, spec: &str) -> Result<(), ConfigError> {
    let (path, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
    if path.is_empty() {
        return Err(ConfigError::BadOverride(spec.to_string()));
    }
    // bare words become strings, anything json-parsable stays typed
    let value: serde_json::Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
    let mut node = tree;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(ConfigError::BadOverride(spec.to_string()));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
        if i == segments.len() - 1 {
            obj.insert(seg.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(seg.to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    unreachable!("segments is non-empty");
}

/// Load the configuration: file (or empty), then `--set` overrides, then
/// the scorer environment variable.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<Config, ConfigError> {
    let mut tree: serde_json::Value = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| ConfigError::Json {
                path: p.to_path_buf(),
                msg: e.to_string(),
            })?
        }
        None => serde_json::json!({}),
    };
    for spec in overrides {
        apply_override(&mut tree, spec)?;
    }
    let mut config: Config = serde_json::from_value(tree).map_err(|e| ConfigError::Json {
        path: path.map(Path::to_path_buf).unwrap_or_default(),
        msg: e.to_string(),
    })?;
    if let Ok(endpoint) = std::env::var(SCORER_ENV_VAR) {
        if !endpoint.is_empty() {
            config.scorer.external = Some(endpoint);
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = load_config(None, &[]).unwrap();
        assert_eq!(cfg.bm25.k1, 1.5);
        assert_eq!(cfg.bm25.k, 100);
        assert_eq!(cfg.chunk.window, 150);
        assert_eq!(cfg.chunk.stride, 50);
        assert_eq!(cfg.fusion.w_sem, 0.3);
        assert_eq!(cfg.eval.beta, 2.0);
    }

    #[test]
    fn file_and_overrides_compose() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, r#"{"bm25": {"k1": 1.2}, "chunk": {"window": 200}}"#).unwrap();
        let cfg = load_config(
            Some(&path),
            &["bm25.b=0.6".to_string(), "chunk.stride=40".to_string()],
        )
        .unwrap();
        assert_eq!(cfg.bm25.k1, 1.2);
        assert_eq!(cfg.bm25.b, 0.6);
        assert_eq!(cfg.chunk.window, 200);
        assert_eq!(cfg.chunk.stride, 40);
    }

    #[test]
    fn string_overrides_do_not_need_quotes() {
        let cfg = load_config(None, &["fusion.aggregation=max".to_string()]).unwrap();
        assert!(matches!(cfg.fusion.aggregation().unwrap(), Aggregation::Max));
    }

    #[test]
    fn bad_override_reported() {
        assert!(matches!(
            load_config(None, &["no-equals-sign".to_string()]),
            Err(ConfigError::BadOverride(_))
        ));
    }

    #[test]
    fn decide_strategy_parsing() {
        assert!(matches!(
            parse_decide_strategy("top1", 0.9, 1).unwrap(),
            DecideStrategy::Top1
        ));
        assert!(matches!(
            parse_decide_strategy("topk:3", 0.9, 1).unwrap(),
            DecideStrategy::TopK(3)
        ));
        assert!(matches!(
            parse_decide_strategy("relative:0.8", 0.9, 1).unwrap(),
            DecideStrategy::RelativeThreshold(b) if (b - 0.8).abs() < 1e-12
        ));
        assert!(parse_decide_strategy("nonsense", 0.9, 1).is_err());
    }
}
