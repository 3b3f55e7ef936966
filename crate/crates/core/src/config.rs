//! Run configuration: strict JSON schema, defaults materialized at parse
//! time, and a stable fingerprint for result provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{Backend, HttpBackend, ScriptedBackend, SyntheticBackend, SyntheticParams};
use crate::budget::SeqPolicy;
use crate::error::{Error, Result};
use crate::operators::{validate_schedule, SrVariant};
use crate::prompting::{GradeRubric, TemplateSet};
use crate::runtime::GenSettings;
use crate::types::{DistillMode, RoundSchedule};

/// Fully-specified run configuration. Parsing is strict (unknown keys are
/// rejected) and total: every accepted config has all defaults filled in
/// and is echoed verbatim into report.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub gen: GenConfig,
    pub eval: EvalConfig,
    #[serde(default)]
    pub prompting: PromptingConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Http {
        base_url: String,
        model: String,
        api_key_env: Option<String>,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
    Scripted {
        script_path: PathBuf,
    },
    Synthetic {
        #[serde(default)]
        params: SyntheticParams,
    },
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    LongCot,
    Sr {
        rounds: u32,
        #[serde(default)]
        variant: SrVariant,
    },
    Pdr {
        g: Vec<u32>,
        k: u32,
        #[serde(default)]
        distill: DistillMode,
        #[serde(default = "default_kappa")]
        kappa: u64,
        #[serde(default)]
        seq_policy: SeqPolicy,
        #[serde(default)]
        grade_rubric: GradeRubric,
    },
}

fn default_kappa() -> u64 {
    2048
}

impl OperatorConfig {
    pub fn operator_name(&self) -> &'static str {
        match self {
            OperatorConfig::LongCot => "long_cot",
            OperatorConfig::Sr { .. } => "sr",
            OperatorConfig::Pdr { .. } => "pdr",
        }
    }

    pub fn schedule_string(&self) -> String {
        match self {
            OperatorConfig::LongCot => "1".to_string(),
            OperatorConfig::Sr { rounds, .. } => rounds.to_string(),
            OperatorConfig::Pdr { g, .. } => g
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("-"),
        }
    }

    pub fn distill_string(&self) -> String {
        match self {
            OperatorConfig::Pdr { distill, .. } => distill.as_str().to_string(),
            _ => "-".to_string(),
        }
    }

    pub fn seq_policy(&self) -> SeqPolicy {
        match self {
            OperatorConfig::Pdr { seq_policy, .. } => *seq_policy,
            _ => SeqPolicy::Max,
        }
    }

    pub fn grade_rubric(&self) -> GradeRubric {
        match self {
            OperatorConfig::Pdr { grade_rubric, .. } => *grade_rubric,
            _ => GradeRubric::PerInstance,
        }
    }

    /// The PDR schedule, when this is a PDR operator.
    pub fn schedule(&self) -> Option<RoundSchedule> {
        match self {
            OperatorConfig::Pdr { g, k, distill, .. } => {
                Some(RoundSchedule::new(g.clone(), *k, *distill))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub thinking_budget: u64,
    pub solution_reserve: u64,
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            thinking_budget: 24_576,
            solution_reserve: 2_048,
            temperature: 1.0,
            top_p: 1.0,
        }
    }
}

impl GenConfig {
    pub fn settings(&self) -> GenSettings {
        GenSettings {
            thinking_budget: self.thinking_budget,
            solution_reserve: self.solution_reserve,
            temperature: self.temperature,
            top_p: self.top_p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// A failed cell counts as an incorrect answer.
    #[default]
    Incorrect,
    /// A failed cell is excluded from the mean (transport-flake studies).
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: u32,
    #[serde(default)]
    pub run_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub failure_policy: FailurePolicy,
}

fn default_n_seeds() -> u32 {
    16
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptingConfig {
    /// Directory of template overrides; built-in templates otherwise.
    pub templates_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// External verifier command; the normalized-answer checker otherwise.
    pub plugin: Option<Vec<String>>,
}

impl RunConfig {
    /// Normalizes and validates a parsed config. Paper-style PDR fan-outs
    /// whose last entry is not 1 get the final single-generation round
    /// appended before schedule validation.
    pub fn finalize(mut self) -> Result<Self> {
        if let OperatorConfig::Pdr {
            g,
            k,
            distill,
            kappa,
            ..
        } = &mut self.operator
        {
            if g.is_empty() {
                return Err(Error::Config("operator.g must not be empty".into()));
            }
            if *g.last().unwrap() != 1 {
                g.push(1);
            }
            let schedule = RoundSchedule::new(g.clone(), *k, *distill);
            validate_schedule(&schedule)?;
            if *kappa == 0 {
                return Err(Error::Config("operator.kappa must be positive".into()));
            }
        }
        if let OperatorConfig::Sr { rounds, .. } = &self.operator {
            if *rounds == 0 {
                return Err(Error::Config("operator.rounds must be at least 1".into()));
            }
        }
        if let BackendConfig::Synthetic { params } = &self.backend {
            params.validate().map_err(Error::Config)?;
        }
        if let BackendConfig::Http {
            base_url, model, ..
        } = &self.backend
        {
            if base_url.is_empty() || model.is_empty() {
                return Err(Error::Config(
                    "backend.base_url and backend.model must be set".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.gen.top_p) {
            return Err(Error::Config(format!(
                "gen.top_p {} outside [0, 1]",
                self.gen.top_p
            )));
        }
        if self.gen.settings().allowance() == 0 {
            return Err(Error::Config(
                "gen.thinking_budget + gen.solution_reserve must be positive".into(),
            ));
        }
        if self.eval.n_seeds == 0 {
            return Err(Error::Config("eval.n_seeds must be at least 1".into()));
        }
        Ok(self)
    }

    /// sha-256 over the canonical JSON form of the materialized config.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Short id used in file layouts and CSV rows.
    pub fn config_id(&self) -> String {
        self.fingerprint()[..12].to_string()
    }

    /// Instantiates the configured backend. For HTTP backends the API key
    /// environment variable is resolved here, so a missing variable fails
    /// fast with its name.
    pub fn build_backend(&self) -> Result<Box<dyn Backend>> {
        match &self.backend {
            BackendConfig::Http {
                base_url,
                model,
                api_key_env,
                max_in_flight,
            } => Ok(Box::new(HttpBackend::new(
                base_url.clone(),
                model.clone(),
                api_key_env.as_deref(),
                *max_in_flight,
            )?)),
            BackendConfig::Scripted { script_path } => {
                Ok(Box::new(ScriptedBackend::from_jsonl_file(script_path)?))
            }
            BackendConfig::Synthetic { params } => {
                Ok(Box::new(SyntheticBackend::new(params.clone())))
            }
        }
    }

    pub fn build_templates(&self) -> Result<TemplateSet> {
        let rubric = self.operator.grade_rubric();
        match &self.prompting.templates_dir {
            Some(dir) => TemplateSet::from_dir(dir, rubric),
            None => Ok(TemplateSet::builtin(rubric)),
        }
    }
}

/// Reads, parses, normalizes, and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.finalize()
}
