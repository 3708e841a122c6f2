use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::SynthConfig;
use crate::llmgate::LlmConfig;
use crate::par::Execution;
use crate::qagen::GenConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverMode {
    /// Cosine ranking over the TF-IDF index.
    Tfidf,
    /// Bypass: the gold document is the only candidate.
    Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticMode {
    /// Use the retriever's first document.
    None,
    Lexical,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasonerMode {
    Oracle,
    Remote,
}

/// One pipeline configuration, read from TOML.
///
/// The corpus is either a directory with a manifest (`corpus`) or
/// synthesized (`[synth]`, the default). Questions come from `dataset`
/// when given and are otherwise generated and split from the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// Top-level seed; every random stage derives its own stream from it.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
    pub dataset: Option<PathBuf>,
    pub generation: GenConfig,
    /// Share of documents assigned to the train split.
    pub split_ratio: f64,
    pub retriever: RetrieverMode,
    /// Candidates shown to the critic.
    pub k: usize,
    pub critic: CriticMode,
    pub reasoner: ReasonerMode,
    /// Probability of moving a first-ranked gold document to a random
    /// position in 2..=k, to simulate retrieval noise.
    pub demote_probability: f64,
    /// Cutoffs reported as hit@k.
    pub hit_ks: Vec<usize>,
    pub execution: Execution,
    pub llm: LlmConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "run".into(),
            seed: 0,
            out: None,
            corpus: None,
            synth: None,
            dataset: None,
            generation: GenConfig::default(),
            split_ratio: 0.8,
            retriever: RetrieverMode::Tfidf,
            k: crate::critic::DEFAULT_CRITIC_K,
            critic: CriticMode::Lexical,
            reasoner: ReasonerMode::Oracle,
            demote_probability: 0.0,
            hit_ks: vec![1, 3, 5, 10],
            execution: Execution::default(),
            llm: LlmConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a TOML file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.out, &mut config.corpus, &mut config.dataset]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn uses_llm(&self) -> bool {
        self.critic == CriticMode::Remote || self.reasoner == ReasonerMode::Remote
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.demote_probability) {
            return bad(format!(
                "demote_probability must lie in [0, 1], got {}",
                self.demote_probability
            ));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!(
                "split_ratio must lie strictly between 0 and 1, got {}",
                self.split_ratio
            ));
        }
        if self.hit_ks.contains(&0) {
            return bad("hit_ks entries must be at least 1".into());
        }
        if self.corpus.is_some() && self.synth.is_some() {
            return bad("give either `corpus` or `[synth]`, not both".into());
        }
        if let Some(synth) = &self.synth {
            synth
                .validate()
                .map_err(|e| PipelineError::Config(format!("synth: {e}")))?;
        }
        if self.uses_llm() {
            self.llm.clone().with_env().validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides_parse() {
        let config = RunConfig::from_toml_str(
            r#"
name = "lexical"
seed = 7
critic = "none"
k = 3
demote_probability = 0.2

[synth]
documents = 20
"#,
        )
        .unwrap();
        assert_eq!(config.critic, CriticMode::None);
        assert_eq!(config.k, 3);
        assert_eq!(config.synth.as_ref().unwrap().documents, 20);
        assert_eq!(config.reasoner, ReasonerMode::Oracle);
        config.validate().unwrap();
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        for text in [
            "k = 0",
            "demote_probability = 1.5",
            "critic = \"psychic\"",
            "unknown_key = 1",
            "split_ratio = 1.0",
            "corpus = \"x\"\n[synth]\ndocuments = 3",
            "reasoner = \"remote\"",
        ] {
            let result = RunConfig::from_toml_str(text).and_then(|c| c.validate());
            assert!(
                matches!(
                    result,
                    Err(PipelineError::Config(_)) | Err(PipelineError::Llm(_))
                ),
                "{text}"
            );
        }
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("run.toml");
        std::fs::write(&path, "corpus = \"data\"\nout = \"/abs/out\"\n").unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.corpus.unwrap(), tmp.path().join("data"));
        assert_eq!(config.out.unwrap(), PathBuf::from("/abs/out"));
    }

    #[test]
    fn round_trips_through_toml() {
        let config = RunConfig {
            synth: Some(SynthConfig::default()),
            ..RunConfig::default()
        };
        let back = RunConfig::from_toml_str(&config.to_toml_string()).unwrap();
        assert_eq!(back, config);
    }
}
