//! Benchmark configuration (TOML).
//!
//! ```toml
//! schema_version = 1
//! name = "copy-mix-sam"
//!
//! [method]
//! id = "sam"          # none | sps | eagle | pld | rest | lookahead | pia | sam | recycling | hybrid
//! budget = 40         # method-specific parameters, all optional
//!
//! [oracle]
//! kind = "copy-mix"   # cyclic | hashed-markov | copy-mix
//! vocab_size = 64
//! order = 2
//! seed = 1
//! copy_prob = 0.5
//!
//! [draft_oracle]      # small model for sps / eagle / hybrid fallback
//! source = "target"   # target | markov
//! perturb_rate = 0.1
//!
//! [policy]
//! temperature = 0.0
//! seed = 0
//!
//! [framework]
//! kind = "multi_round"  # single | multi_round | bon
//! rounds = 2
//!
//! [dataset]
//! path = "problems.jsonl"   # relative to the config file
//!
//! [output]
//! dir = "results/copy-mix-sam"
//! ```
//!
//! Other optional tables: `[datastore]` (`path`, needed by `rest`),
//! `[engine]` (`max_tokens`, `stop_token`, `warmup_steps`, `budget`,
//! `max_context`, `parallel`, `[engine.latency]`), `[prompt]`
//! (`assistant_header`, `answer_marker`, `answer_tail`) and `[baseline]`
//! (`repetitions`).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use specbench_core::engine::SimulatedLatency;
use specbench_core::oracle::{OracleSpecError, PerturbedOracle, DEFAULT_MAX_CONTEXT};
use specbench_core::{
    ConfigError, DecodePolicy, EngineOptions, Method, MethodSpec, SharedOracle, StopCondition,
    SyntheticOracleSpec, Token,
};

use crate::prompt::{AnswerExtractor, PromptTemplate};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ROUNDS: usize = 2;
pub const DEFAULT_BON_N: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Capability(#[from] ConfigError),
    #[error("best-of-n needs temperature > 0")]
    BonNeedsSampling,
    #[error("{0} must be >= 1")]
    ZeroCount(&'static str),
    #[error("temperature must be finite and >= 0, got {0}")]
    BadTemperature(f64),
    #[error("rest needs a [datastore] table")]
    MissingDatastore,
    #[error("{what} token {token} is outside the vocabulary of {vocab}")]
    TokenOutOfVocab {
        what: &'static str,
        token: u32,
        vocab: usize,
    },
    #[error("hybrid fallback must be sps or eagle")]
    BadFallback,
    #[error(transparent)]
    Oracle(#[from] OracleSpecError),
}

// ---------------------------------------------------------------------------
// Sections
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DraftSource {
    /// Perturbation of the full target.
    #[default]
    Target,
    /// Perturbation of the target's Markov component only (no copying).
    Markov,
}

fn default_perturb_rate() -> f64 {
    0.1
}

fn default_one() -> usize {
    1
}

/// Small draft model: the target (or its Markov part) with the top two
/// tokens swapped on a seeded fraction of states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DraftOracleConfig {
    #[serde(default)]
    pub source: DraftSource,
    #[serde(default = "default_perturb_rate")]
    pub perturb_rate: f64,
    /// Tokens of context hashed to decide whether a state is perturbed.
    #[serde(default = "default_one")]
    pub perturb_order: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DraftOracleConfig {
    fn default() -> Self {
        Self {
            source: DraftSource::Target,
            perturb_rate: default_perturb_rate(),
            perturb_order: 1,
            seed: 0,
        }
    }
}

impl DraftOracleConfig {
    pub fn build(
        &self,
        target: &SyntheticOracleSpec,
        max_context: usize,
    ) -> Result<SharedOracle, OracleSpecError> {
        let base = match self.source {
            DraftSource::Target => target.build(max_context)?,
            DraftSource::Markov => target.markov_component().build(max_context)?,
        };
        Ok(Arc::new(PerturbedOracle::new(
            base,
            self.perturb_rate,
            self.perturb_order,
            self.seed,
        )?))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    /// Most frequent extracted answer; ties go to the smallest answer.
    #[default]
    Majority,
}

fn default_rounds() -> usize {
    DEFAULT_ROUNDS
}

fn default_bon_n() -> usize {
    DEFAULT_BON_N
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Framework {
    /// One trajectory per problem.
    Single,
    MultiRound {
        #[serde(default = "default_rounds")]
        rounds: usize,
    },
    Bon {
        #[serde(default = "default_bon_n")]
        n: usize,
        #[serde(default)]
        scorer: ScorerKind,
    },
}

impl Default for Framework {
    fn default() -> Self {
        Self::MultiRound {
            rounds: DEFAULT_ROUNDS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatastoreConfig {
    /// Text or binary datastore file.
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub max_tokens: usize,
    pub stop_token: Option<u32>,
    pub warmup_steps: usize,
    /// Overrides the method's default draft budget.
    pub budget: Option<usize>,
    pub max_context: usize,
    /// Run problems on a worker pool (timings then share the CPU).
    pub parallel: bool,
    pub latency: Option<SimulatedLatency>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            stop_token: None,
            warmup_steps: specbench_core::engine::DEFAULT_WARMUP_STEPS,
            budget: None,
            max_context: DEFAULT_MAX_CONTEXT,
            parallel: false,
            latency: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    /// Tokens appended after every round prompt (chat-template header).
    pub assistant_header: Vec<u32>,
    pub answer_marker: Option<u32>,
    /// Trailing tokens taken as the answer when no marker is found.
    pub answer_tail: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            assistant_header: Vec::new(),
            answer_marker: None,
            answer_tail: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Paired method/AR repetitions; the median wall time is reported.
    pub repetitions: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { repetitions: 3 }
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub method: MethodSpec,
    pub oracle: SyntheticOracleSpec,
    #[serde(default)]
    pub draft_oracle: Option<DraftOracleConfig>,
    #[serde(default)]
    pub datastore: Option<DatastoreConfig>,
    #[serde(default)]
    pub policy: DecodePolicy,
    #[serde(default)]
    pub framework: Framework,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub prompt: PromptConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub method: Option<Method>,
    pub temperature: Option<f64>,
    pub rounds: Option<usize>,
    pub bon_n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.path);
        fix(&mut self.output.dir);
        if let Some(ds) = &mut self.datastore {
            fix(&mut ds.path);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.method {
            if m != self.method.method() {
                self.method = MethodSpec::default_for(m);
            }
        }
        if let Some(t) = o.temperature {
            self.policy.temperature = t;
        }
        if let Some(s) = o.seed {
            self.policy.seed = s;
        }
        if let Some(r) = o.rounds {
            self.framework = Framework::MultiRound { rounds: r };
        }
        if let Some(n) = o.bon_n {
            let scorer = match self.framework {
                Framework::Bon { scorer, .. } => scorer,
                _ => ScorerKind::default(),
            };
            self.framework = Framework::Bon { n, scorer };
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
    }

    /// Checks everything that can be checked without touching the disk,
    /// including the method's capability row against the policy.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ValidationError::SchemaVersion {
                found: self.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        let t = self.policy.temperature;
        if !t.is_finite() || t < 0.0 {
            return Err(ValidationError::BadTemperature(t));
        }
        self.method.validate_policy(&self.policy)?;
        match self.framework {
            Framework::Single => {}
            Framework::MultiRound { rounds } => {
                if rounds == 0 {
                    return Err(ValidationError::ZeroCount("rounds"));
                }
            }
            Framework::Bon { n, .. } => {
                if n == 0 {
                    return Err(ValidationError::ZeroCount("n"));
                }
                if self.policy.is_greedy() {
                    return Err(ValidationError::BonNeedsSampling);
                }
            }
        }
        if let MethodSpec::Hybrid(h) = &self.method {
            if !matches!(h.fallback.method(), Method::Sps | Method::Eagle) {
                return Err(ValidationError::BadFallback);
            }
        }
        if self.method.needs_datastore() && self.datastore.is_none() {
            return Err(ValidationError::MissingDatastore);
        }
        if self.engine.max_tokens == 0 {
            return Err(ValidationError::ZeroCount("max_tokens"));
        }
        if self.baseline.repetitions == 0 {
            return Err(ValidationError::ZeroCount("repetitions"));
        }
        let vocab = self.oracle.vocab_size();
        let check = |what, token: u32| {
            if token as usize >= vocab {
                Err(ValidationError::TokenOutOfVocab { what, token, vocab })
            } else {
                Ok(())
            }
        };
        if let Some(t) = self.engine.stop_token {
            check("stop", t)?;
        }
        if let Some(t) = self.prompt.answer_marker {
            check("answer marker", t)?;
        }
        for &t in &self.prompt.assistant_header {
            check("assistant header", t)?;
        }
        // Surfaces bad oracle parameters early.
        self.oracle.build(1)?;
        if let Some(d) = &self.draft_oracle {
            d.build(&self.oracle, 1)?;
        }
        Ok(())
    }

    pub fn stop_condition(&self) -> StopCondition {
        StopCondition {
            max_tokens: self.engine.max_tokens,
            stop_token: self.engine.stop_token.map(Token),
        }
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            budget: self.engine.budget,
            warmup_steps: self.engine.warmup_steps,
            latency: self.engine.latency,
            check_drafts: true,
        }
    }

    pub fn template(&self) -> PromptTemplate {
        PromptTemplate::new(
            self.oracle.vocab_size(),
            self.prompt.assistant_header.iter().copied().map(Token).collect(),
        )
    }

    pub fn extractor(&self) -> AnswerExtractor {
        AnswerExtractor {
            marker: self.prompt.answer_marker.map(Token),
            tail: self.prompt.answer_tail,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
[method]
id = "sam"
[oracle]
kind = "hashed-markov"
vocab_size = 32
order = 2
seed = 3
[dataset]
path = "p.jsonl"
"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = BenchmarkConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.framework, Framework::MultiRound { rounds: 2 });
        assert_eq!(cfg.policy, DecodePolicy::greedy());
        assert_eq!(cfg.engine.max_tokens, 256);
        assert_eq!(cfg.engine.warmup_steps, 3);
        assert_eq!(cfg.baseline.repetitions, 3);
        assert_eq!(cfg.method, MethodSpec::default_for(Method::Sam));
        cfg.validate().unwrap();
    }

    #[test]
    fn bon_defaults_to_four() {
        let text = format!("{MINIMAL}\n[framework]\nkind = \"bon\"\n");
        let text = text.replace("[method]", "[policy]\ntemperature = 0.6\n[method]");
        let cfg = BenchmarkConfig::from_toml(&text).unwrap();
        assert_eq!(
            cfg.framework,
            Framework::Bon {
                n: 4,
                scorer: ScorerKind::Majority
            }
        );
        cfg.validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_combinations() {
        let base = BenchmarkConfig::from_toml(MINIMAL).unwrap();

        let mut c = base.clone();
        c.apply(&Overrides {
            method: Some(Method::Pld),
            temperature: Some(0.6),
            ..Default::default()
        });
        assert_eq!(
            c.validate(),
            Err(ValidationError::Capability(ConfigError::UnsupportedSamplingMode {
                method: Method::Pld
            }))
        );

        let mut c = base.clone();
        c.apply(&Overrides {
            bon_n: Some(4),
            ..Default::default()
        });
        assert_eq!(c.validate(), Err(ValidationError::BonNeedsSampling));

        let mut c = base.clone();
        c.apply(&Overrides {
            rounds: Some(0),
            ..Default::default()
        });
        assert_eq!(c.validate(), Err(ValidationError::ZeroCount("rounds")));

        let mut c = base.clone();
        c.apply(&Overrides {
            method: Some(Method::Rest),
            ..Default::default()
        });
        assert_eq!(c.validate(), Err(ValidationError::MissingDatastore));

        let mut c = base.clone();
        c.engine.stop_token = Some(32);
        assert!(matches!(c.validate(), Err(ValidationError::TokenOutOfVocab { .. })));

        let mut c = base;
        c.schema_version = 2;
        assert!(matches!(c.validate(), Err(ValidationError::SchemaVersion { .. })));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("[dataset]", "[dataset]\npaht = 1");
        assert!(BenchmarkConfig::from_toml(&text).is_err());
    }

    #[test]
    fn overrides_and_paths() {
        let mut cfg = BenchmarkConfig::from_toml(MINIMAL).unwrap();
        cfg.resolve_paths(Path::new("/data/cfg"));
        assert_eq!(cfg.dataset.path, PathBuf::from("/data/cfg/p.jsonl"));
        cfg.apply(&Overrides {
            method: Some(Method::Pia),
            seed: Some(9),
            out: Some(PathBuf::from("/tmp/x")),
            ..Default::default()
        });
        assert_eq!(cfg.method.method(), Method::Pia);
        assert_eq!(cfg.policy.seed, 9);
        assert_eq!(cfg.output.dir, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = BenchmarkConfig::from_toml(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(BenchmarkConfig::from_toml(&text).unwrap(), cfg);
    }
}
