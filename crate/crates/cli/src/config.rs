//! The TOML run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use moralvis::regression::DEFAULT_ALPHA_GRID;
use moralvis::{CvConfig, FeatureSpaceId, CANONICAL_TARGETS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_fraction")]
    pub split_fraction: f64,
    /// Feature spaces as `kind:label`, e.g. `joint:clip`.
    pub spaces: Vec<String>,
    #[serde(default = "default_targets")]
    pub targets: Vec<String>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub ratings: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    /// Embedding file per input space (`image_embedding:clip` etc.).
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
    /// News corpus metadata (`id,caption,category,date,url`).
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub corpus_embeddings: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSection {
    pub k: usize,
    pub rounds: usize,
    pub alpha_grid: Vec<f64>,
    pub fit_intercept: bool,
}

impl Default for CvSection {
    fn default() -> Self {
        Self {
            k: 10,
            rounds: 3,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            fit_intercept: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    pub min_count: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self { min_count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Space whose models score the corpus; defaults to the first of `spaces`.
    pub space: Option<String>,
    /// Categories compared by `analyze` and `bootstrap`.
    pub categories: Vec<String>,
    /// Groups of the group × year table.
    pub year_groups: Vec<String>,
    pub first_year: i32,
    pub last_year: i32,
    pub partial_years: Vec<i32>,
    pub bootstrap_candidate: Option<String>,
    pub bootstrap_target: String,
    pub bootstrap_resamples: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        use moralvis::analysis::{GOODNEWS_PARTIAL_YEARS, REGION_CATEGORIES, TOPIC_CATEGORIES};
        Self {
            space: None,
            categories: TOPIC_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            year_groups: REGION_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            first_year: 2010,
            last_year: 2018,
            partial_years: GOODNEWS_PARTIAL_YEARS.to_vec(),
            bootstrap_candidate: None,
            bootstrap_target: "morality".into(),
            bootstrap_resamples: moralvis::analysis::DEFAULT_RESAMPLES,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_fraction() -> f64 {
    0.8
}

fn default_targets() -> Vec<String> {
    CANONICAL_TARGETS.iter().map(|s| s.to_string()).collect()
}

impl RunConfig {
    /// Reads a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        let paths = &mut self.paths;
        for p in [&mut paths.ratings, &mut paths.captions, &mut paths.corpus]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        paths
            .embeddings
            .values_mut()
            .chain(paths.corpus_embeddings.values_mut())
            .for_each(fix);
    }

    /// SHA-256 of the resolved TOML text.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            k: self.cv.k,
            rounds: self.cv.rounds,
            seed: self.seed,
            alpha_grid: self.cv.alpha_grid.clone(),
            fit_intercept: self.cv.fit_intercept,
        }
    }

    pub fn feature_spaces(&self) -> Result<Vec<FeatureSpaceId>> {
        parse_spaces(&self.spaces)
    }

    pub fn analysis_space(&self) -> Result<FeatureSpaceId> {
        match &self.analysis.space {
            Some(s) => s.parse().map_err(|e| anyhow::anyhow!("analysis.space: {e}")),
            None => self
                .feature_spaces()?
                .into_iter()
                .next()
                .context("no feature space configured"),
        }
    }

    /// Checks values and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        if self.spaces.is_empty() {
            bail!("`spaces` is empty");
        }
        self.feature_spaces()?;
        parse_spaces(self.paths.embeddings.keys())?;
        parse_spaces(self.paths.corpus_embeddings.keys())?;
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            bail!("split_fraction must lie in (0, 1), got {}", self.split_fraction);
        }
        self.cv_config().validate()?;
        if self.analysis.first_year > self.analysis.last_year {
            bail!("analysis.first_year exceeds analysis.last_year");
        }
        let p = &self.paths;
        let inputs = [&p.ratings, &p.captions, &p.corpus]
            .into_iter()
            .flatten()
            .chain(p.embeddings.values())
            .chain(p.corpus_embeddings.values());
        for path in inputs {
            if !path.exists() {
                bail!("input {} does not exist", path.display());
            }
        }
        Ok(())
    }
}

fn parse_spaces<S: AsRef<str>>(spaces: impl IntoIterator<Item = S>) -> Result<Vec<FeatureSpaceId>> {
    spaces
        .into_iter()
        .map(|s| {
            s.as_ref()
                .parse::<FeatureSpaceId>()
                .map_err(|e| anyhow::anyhow!("feature space `{}`: {e}", s.as_ref()))
        })
        .collect()
}
