use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kinds of artifact a pipeline passes between stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArtifactKind {
    SparseVectors,
    Embeddings,
    TokenCounts,
    Run,
    RerankScores,
    Qrels,
    CollectionIds,
    Index,
    Report,
}

impl ArtifactKind {
    pub const DECLARABLE: [ArtifactKind; 7] = [
        Self::SparseVectors,
        Self::Embeddings,
        Self::TokenCounts,
        Self::Run,
        Self::RerankScores,
        Self::Qrels,
        Self::CollectionIds,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SparseVectors => "sparse-vectors",
            Self::Embeddings => "embeddings",
            Self::TokenCounts => "token-counts",
            Self::Run => "run",
            Self::RerankScores => "rerank-scores",
            Self::Qrels => "qrels",
            Self::CollectionIds => "collection-ids",
            Self::Index => "index",
            Self::Report => "report",
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArtifactKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::DECLARABLE
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown input kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub op: String,
    pub output_tag: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

/// A pipeline document: named inputs and the stages that consume them.
///
/// Output tags and artifact references may contain `{language}`, which is
/// replaced by [`PipelineConfig::language`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub language: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, InputSpec>,
    pub stages: Vec<StageSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl PipelineConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::with_path(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn expand(&self, template: &str) -> String {
        template.replace("{language}", &self.language)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }
}
