//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use opframe::annotation::{AggregationConfig, HumanPerfConfig, OrdinalConfig};
use opframe::extraction::ExtractionConfig;
use opframe::faithfulness::{HypocrisyConfig, MatchConfig};
use opframe::framing::FramingConfig;
use opframe::stance::LinearConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, UserContext};

/// Input locations. Relative paths resolve against the config file's
/// directory; unset optional paths fall back to shipped data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub articles: Option<PathBuf>,
    pub outlets: Option<PathBuf>,
    pub url_tags: Option<PathBuf>,
    pub parses: Option<PathBuf>,
    pub lexicon_dir: Option<PathBuf>,
    pub deprels: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    /// Tab-separated stance dataset used by `train-stance` and `eval`.
    pub stance_data: Option<PathBuf>,
    pub external_labels: Option<PathBuf>,
    pub framing_lexicon: Option<PathBuf>,
    pub roster: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub dedup_title_threshold: f64,
    pub block_by_outlet: bool,
    pub filter_urls: bool,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            dedup_title_threshold: 0.2,
            block_by_outlet: true,
            filter_urls: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemographicsSection {
    /// Profile columns to use; empty means all.
    pub columns: Vec<String>,
    #[serde(flatten)]
    pub model: OrdinalConfig,
}

impl Default for DemographicsSection {
    fn default() -> Self {
        DemographicsSection {
            columns: Vec::new(),
            model: OrdinalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StanceSection {
    pub test_size: usize,
    /// Cross-validation folds run by `train-stance`; 0 skips it.
    pub cv_folds: usize,
    #[serde(flatten)]
    pub model: LinearConfig,
}

impl Default for StanceSection {
    fn default() -> Self {
        StanceSection {
            test_size: 200,
            cv_folds: 0,
            model: LinearConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FramingSection {
    pub exclude_wire: bool,
    pub exclude_top_outlets: usize,
    /// Outlets dropped for the top-outlet robustness check.
    pub robustness_top_outlets: usize,
    #[serde(flatten)]
    pub stats: FramingConfig,
}

impl Default for FramingSection {
    fn default() -> Self {
        FramingSection {
            exclude_wire: false,
            exclude_top_outlets: 0,
            robustness_top_outlets: 5,
            stats: FramingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaithfulnessSection {
    pub matching: MatchConfig,
    pub hypocrisy: HypocrisyConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; each module draws its own seed from it.
    pub seed: u64,
    pub paths: Paths,
    pub corpus: CorpusSection,
    pub extraction: ExtractionConfig,
    pub aggregation: AggregationConfig,
    pub demographics: DemographicsSection,
    pub human_perf: HumanPerfConfig,
    pub stance: StanceSection,
    pub framing: FramingSection,
    pub faithfulness: FaithfulnessSection,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        toml::from_str(text).user_ctx("invalid configuration")
    }

    /// Reads a config file. Paths stay as written until
    /// [`PipelineConfig::resolve_paths`].
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).user_ctx(format_args!("cannot read config {}", path.display()))?;
        Self::from_toml_str(&text)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        self.paths.resolve(base);
    }

    /// Every path that is set must exist.
    pub fn validate(&self) -> CliResult<()> {
        for (name, p) in self.paths.entries() {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(CliError::user(format!("paths.{name}: {} does not exist", p.display())));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.corpus.dedup_title_threshold) {
            return Err(CliError::user("corpus.dedup_title_threshold must lie in [0, 1]"));
        }
        if !(self.framing.stats.fdr > 0.0 && self.framing.stats.fdr <= 1.0) {
            return Err(CliError::user("framing.fdr must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form. Taken before path resolution
    /// so the hash does not depend on where the config file lives.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(&canonical))
    }
}

impl Paths {
    fn entries(&self) -> [(&'static str, &Option<PathBuf>); 12] {
        [
            ("articles", &self.articles),
            ("outlets", &self.outlets),
            ("url_tags", &self.url_tags),
            ("parses", &self.parses),
            ("lexicon_dir", &self.lexicon_dir),
            ("deprels", &self.deprels),
            ("annotations", &self.annotations),
            ("profiles", &self.profiles),
            ("stance_data", &self.stance_data),
            ("external_labels", &self.external_labels),
            ("framing_lexicon", &self.framing_lexicon),
            ("roster", &self.roster),
        ]
    }

    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.articles,
            &mut self.outlets,
            &mut self.url_tags,
            &mut self.parses,
            &mut self.lexicon_dir,
            &mut self.deprels,
            &mut self.annotations,
            &mut self.profiles,
            &mut self.stance_data,
            &mut self.external_labels,
            &mut self.framing_lexicon,
            &mut self.roster,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

}

/// A configured path, or an error naming the config key to set.
pub fn require<'a>(value: &'a Option<PathBuf>, key: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::user(format!("paths.{key} is not set in the configuration")))
}

/// Module seed derived from the root seed and the module name.
pub fn module_seed(root: u64, module: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(module.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
        seed = 11

        [paths]
        articles = "articles.jsonl"
        parses = "parses.conllu"

        [corpus]
        dedup_title_threshold = 0.25

        [extraction]
        drop_modal = false

        [aggregation]
        initial_vigilance = 0.6

        [demographics]
        columns = ["republican"]
        beta_prior_sd = 3.0

        [stance]
        test_size = 50
        c = 0.5
        penalty = "l1"

        [framing]
        min_freq = 5
        exclude_wire = true

        [faithfulness.matching]
        threshold = 85.0
    "#;

    #[test]
    fn example_parses_into_sections() {
        let c = PipelineConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(c.seed, 11);
        assert_eq!(c.paths.articles.as_deref(), Some(Path::new("articles.jsonl")));
        assert_eq!(c.corpus.dedup_title_threshold, 0.25);
        assert!(!c.extraction.drop_modal && c.extraction.drop_negated);
        assert_eq!(c.aggregation.initial_vigilance, 0.6);
        assert_eq!(c.demographics.columns, vec!["republican".to_string()]);
        assert_eq!(c.demographics.model.beta_prior_sd, 3.0);
        assert_eq!(c.stance.test_size, 50);
        assert_eq!(c.stance.model.c, 0.5);
        assert_eq!(c.framing.stats.min_freq, 5);
        assert!(c.framing.exclude_wire);
        assert_eq!(c.framing.robustness_top_outlets, 5);
        assert_eq!(c.faithfulness.matching.threshold, 85.0);
        assert_eq!(c.faithfulness.matching.review_floor, 60.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("sed = 3").is_err());
        assert!(PipelineConfig::from_toml_str("[paths]\narticle = \"a\"").is_err());
        assert!(PipelineConfig::from_toml_str("[corpus]\nthreshold = 0.1").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::from_toml_str(EXAMPLE).unwrap();
        let b = PipelineConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = a.clone();
        c.seed += 1;
        assert_ne!(a.hash(), c.hash());
        let mut d = a.clone();
        d.framing.stats.fdr = 0.05;
        assert_ne!(a.hash(), d.hash());
    }

    #[test]
    fn paths_resolve_and_validate() {
        let dir = std::env::temp_dir().join(format!("opframe-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("articles.jsonl"), "").unwrap();
        let mut c = PipelineConfig::from_toml_str("[paths]\narticles = \"articles.jsonl\"").unwrap();
        c.resolve_paths(&dir);
        assert_eq!(c.paths.articles.as_deref(), Some(dir.join("articles.jsonl").as_path()));
        c.validate().unwrap();
        c.paths.parses = Some(dir.join("missing.conllu"));
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("paths.parses"));
        assert_eq!(err.exit_code(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn module_seeds_differ_and_repeat() {
        assert_eq!(module_seed(1, "aggregate"), module_seed(1, "aggregate"));
        assert_ne!(module_seed(1, "aggregate"), module_seed(1, "demographics"));
        assert_ne!(module_seed(1, "aggregate"), module_seed(2, "aggregate"));
    }
}
