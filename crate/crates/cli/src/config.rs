//! Pipeline configuration: a TOML file with one table per stage, overridden
//! by command-line flags. Relative paths resolve against the file's directory.

use crate::error::CliError;
use kgcot_core::cot_pipeline::DecodeOptions;
use kgcot_core::digest::sha256_hex;
use kgcot_core::reward_grpo::AnswerMode;
use kgcot_core::{GrpoConfig, InverseMode};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub graph: GraphSection,
    pub paths: PathsSection,
    pub qa: QaSection,
    pub cot: CotSection,
    pub score: ScoreSection,
    pub grpo: GrpoConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            out: PathBuf::from("out"),
            graph: GraphSection::default(),
            paths: PathsSection::default(),
            qa: QaSection::default(),
            cot: CotSection::default(),
            score: ScoreSection::default(),
            grpo: GrpoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub path: Option<PathBuf>,
    pub inverse: InverseMode,
    /// Single-character field separator of the edge table.
    pub delimiter: String,
    pub aliases: Option<PathBuf>,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self { path: None, inverse: InverseMode::Virtual, delimiter: ",".into(), aliases: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Template registry file; the standard registry when absent.
    pub templates: Option<PathBuf>,
    pub max_d: usize,
    /// Longest divergent side branch in the standard registry.
    pub max_side: usize,
    pub max_branch_len: usize,
    pub max_results: usize,
    pub prune_k: usize,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self { templates: None, max_d: 8, max_side: 2, max_branch_len: 8, max_results: 100_000, prune_k: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaSection {
    /// Category spec file; the bundled seven categories when absent.
    pub categories: Option<PathBuf>,
    pub count_per_category: usize,
    /// sft / rl / test fractions by item count.
    pub ratios: [f64; 3],
    /// Largest tolerated fraction of eligible triples dropped for lack of distractors.
    pub shortfall_tolerance: f64,
    pub exclude_direct_edge: bool,
}

impl Default for QaSection {
    fn default() -> Self {
        Self {
            categories: None,
            count_per_category: 1000,
            ratios: [3500.0 / 6710.0, 1500.0 / 6710.0, 1710.0 / 6710.0],
            shortfall_tolerance: 0.5,
            exclude_direct_edge: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CotSection {
    pub client: ClientKind,
    pub endpoint: Option<String>,
    /// Environment variable holding the bearer token, if any.
    pub token_env: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub generation_template: Option<PathBuf>,
    pub pruning_template: Option<PathBuf>,
    pub decode: DecodeOptions,
    /// Append finished records to `<out>/cot/checkpoint.jsonl` and skip them on rerun.
    pub checkpoint: bool,
}

impl Default for CotSection {
    fn default() -> Self {
        Self {
            client: ClientKind::Mock,
            endpoint: None,
            token_env: "KGCOT_API_TOKEN".into(),
            timeout_secs: 120,
            retries: 3,
            generation_template: None,
            pruning_template: None,
            decode: DecodeOptions::default(),
            checkpoint: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    /// `letter` or `name`.
    pub answer_mode: String,
}

impl Default for ScoreSection {
    fn default() -> Self {
        Self { answer_mode: "letter".into() }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub max_d: Option<usize>,
    pub client: Option<ClientKind>,
    pub out: Option<PathBuf>,
    pub graph: Option<PathBuf>,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

fn must_exist(what: &str, p: &Option<PathBuf>) -> Result<(), CliError> {
    match p {
        Some(path) if !path.exists() => Err(CliError::schema(format!("{what}: {} does not exist", path.display()))),
        _ => Ok(()),
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::schema(format!("{origin}: {e}")))
    }

    /// Reads `path` (or starts from defaults), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::schema(format!("{}: {e}", p.display())))?;
                let mut cfg = Self::parse(&text, &p.display().to_string())?;
                let base = p.parent().unwrap_or(Path::new("."));
                cfg.resolve_paths(base);
                if cfg.out.is_relative() {
                    cfg.out = base.join(&cfg.out);
                }
                cfg
            }
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.graph.path);
        resolve(base, &mut self.graph.aliases);
        resolve(base, &mut self.paths.templates);
        resolve(base, &mut self.qa.categories);
        resolve(base, &mut self.cot.generation_template);
        resolve(base, &mut self.cot.pruning_template);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if let Some(d) = o.max_d {
            self.paths.max_d = d;
        }
        if let Some(c) = o.client {
            self.cot.client = c;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(g) = &o.graph {
            self.graph.path = Some(g.clone());
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        must_exist("graph.path", &self.graph.path)?;
        must_exist("graph.aliases", &self.graph.aliases)?;
        must_exist("paths.templates", &self.paths.templates)?;
        must_exist("qa.categories", &self.qa.categories)?;
        must_exist("cot.generation_template", &self.cot.generation_template)?;
        must_exist("cot.pruning_template", &self.cot.pruning_template)?;
        if self.jobs == 0 {
            return Err(CliError::schema("jobs must be at least 1"));
        }
        if self.paths.max_d == 0 {
            return Err(CliError::schema("paths.max_d must be at least 1"));
        }
        if self.graph.delimiter.len() != 1 {
            return Err(CliError::schema("graph.delimiter must be a single byte"));
        }
        let r = self.qa.ratios;
        if r.iter().any(|x| !(*x >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CliError::schema(format!("qa.ratios must be non-negative and sum to 1, got {r:?}")));
        }
        if !(0.0..=1.0).contains(&self.qa.shortfall_tolerance) {
            return Err(CliError::schema("qa.shortfall_tolerance must lie in [0, 1]"));
        }
        if self.cot.client == ClientKind::Http && self.cot.endpoint.is_none() {
            return Err(CliError::schema("cot.client = \"http\" needs cot.endpoint"));
        }
        self.answer_mode()?;
        self.grpo.validate().map_err(CliError::schema)?;
        Ok(())
    }

    pub fn answer_mode(&self) -> Result<AnswerMode, CliError> {
        self.score.answer_mode.parse().map_err(CliError::schema)
    }

    pub fn graph_path(&self) -> Result<&Path, CliError> {
        self.graph.path.as_deref().ok_or_else(|| CliError::schema("no graph given (set graph.path or pass --graph)"))
    }

    /// Digest of the effective configuration, flags included.
    /// Digest of every setting that can change results; the output directory is left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("config is an object").remove("out");
        sha256_hex(serde_json::to_vec(&v).expect("config serializes"))
    }
}
