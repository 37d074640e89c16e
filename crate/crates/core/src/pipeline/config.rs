use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{IngestConfig, MaskTable, SplitFractions, TargetPair, DEFAULT_MAX_WORDS, DEFAULT_MIN_WORDS};
use crate::econometrics::{CalendarIndex, EstimateOptions, FeMethod, Outcome, Series, SpecDef, VcovChoice};
use crate::embeddings::SgnsConfig;
use crate::error::{Error, Result};
use crate::evaluation::{DiffParams, Objective};
use crate::models::{ModelSpec, TrainConfig};

fn yes() -> bool {
    true
}

fn default_out() -> PathBuf {
    PathBuf::from("run")
}

/// Input files. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Messages split into train / validation / test.
    pub training: PathBuf,
    /// Further messages that are only scored (other periods, other years).
    #[serde(default)]
    pub evaluation: Vec<PathBuf>,
    #[serde(default)]
    pub mask_dir: Option<PathBuf>,
    /// One hashtag per line; tagged messages are dropped.
    #[serde(default)]
    pub drop_hashtags: Option<PathBuf>,
    /// Pretrained vectors in word2vec text format, used instead of the
    /// embedding stage.
    #[serde(default)]
    pub vectors: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    /// `wordA,wordB`, majority class first.
    pub pair: String,
    pub min_words: usize,
    pub max_words: usize,
    /// Percentages `train,validation,test`.
    pub split: String,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            pair: "han,hon".into(),
            min_words: DEFAULT_MIN_WORDS,
            max_words: DEFAULT_MAX_WORDS,
            split: "64,16,20".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub nodes: Vec<usize>,
    pub dropouts: Vec<f64>,
    #[serde(default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateSection {
    pub objective: Objective,
    /// Also report metrics on a class-balanced subsample of the test set.
    pub balanced_sample: bool,
    pub diff: DiffParams,
    /// Tokens listed at each end of the Word Color ranking in the report.
    pub top_words: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            objective: Objective::Accuracy,
            balanced_sample: true,
            diff: DiffParams::default(),
            top_words: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSection {
    /// Preset name or `time_trends:` expression.
    pub spec: String,
    #[serde(default)]
    pub outcome: Outcome,
    #[serde(default = "default_vcov")]
    pub vcov: String,
    #[serde(default = "unit")]
    pub scale: f64,
    #[serde(default)]
    pub aggregate: bool,
    #[serde(default)]
    pub subset: Option<u8>,
    /// Year-1 inclusion probability for inverse-probability weights.
    #[serde(default)]
    pub sample_weight: Option<f64>,
    #[serde(default)]
    pub fe_method: FeMethod,
}

fn default_vcov() -> String {
    "cluster:day".into()
}

fn unit() -> f64 {
    1.0
}

impl EstimateSection {
    pub fn new(spec: &str) -> Self {
        EstimateSection {
            spec: spec.into(),
            outcome: Outcome::FollowNorms,
            vcov: default_vcov(),
            scale: 1.0,
            aggregate: false,
            subset: None,
            sample_weight: None,
            fe_method: FeMethod::Within,
        }
    }

    pub fn resolve(&self) -> Result<(SpecDef, EstimateOptions)> {
        let spec = SpecDef::parse(&self.spec)?;
        let vcov: VcovChoice = self.vcov.parse()?;
        Ok((
            spec,
            EstimateOptions {
                outcome: self.outcome,
                vcov,
                scale: self.scale,
                subset: self.subset,
                year1_inclusion: self.sample_weight,
                fe_method: self.fe_method,
                aggregate: self.aggregate,
            },
        ))
    }
}

/// A full pipeline run. Stage seeds are derived from `seed`; the seed
/// fields inside the embedding and training sections are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Single-threaded embeddings and no wall-clock times in the manifest.
    #[serde(default = "yes")]
    pub deterministic: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Label of the classifier's series in the panel.
    #[serde(default = "default_series")]
    pub series: Series,
    pub data: DataConfig,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub embeddings: Option<SgnsConfig>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub calendar: CalendarIndex,
    #[serde(default)]
    pub estimate: Vec<EstimateSection>,
    /// Directory relative paths resolve against. Not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_series() -> Series {
    Series::HeShe
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }

    /// All input files, in a fixed order, as written in the config.
    pub fn input_files(&self) -> Result<Vec<PathBuf>> {
        let mut v = vec![self.data.training.clone()];
        v.extend(self.data.evaluation.iter().cloned());
        if let Some(d) = &self.data.mask_dir {
            let dir = self.resolve(d);
            let mut files: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| Error::io(&dir, e))?
                .filter_map(|e| e.ok())
                .filter(|e| e.path().is_file())
                .map(|e| d.join(e.file_name()))
                .collect();
            files.sort();
            v.extend(files);
        }
        v.extend(self.data.drop_hashtags.iter().cloned());
        if let Some(p) = &self.data.vectors {
            v.push(p.clone());
            v.push(crate::embeddings::counts_path(p));
        }
        Ok(v)
    }

    pub fn uses_embeddings(&self) -> bool {
        self.model.kind.needs_embeddings()
    }

    /// Checks everything that can fail before any stage runs.
    pub fn validate(&self) -> Result<()> {
        let must_exist = |p: &Path, what: &str| -> Result<()> {
            let r = self.resolve(p);
            if r.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} `{}` does not exist", r.display())))
            }
        };
        must_exist(&self.data.training, "training corpus")?;
        for p in &self.data.evaluation {
            must_exist(p, "evaluation corpus")?;
        }
        if let Some(p) = &self.data.mask_dir {
            must_exist(p, "mask directory")?;
        }
        if let Some(p) = &self.data.drop_hashtags {
            must_exist(p, "hashtag list")?;
        }
        if let Some(p) = &self.data.vectors {
            must_exist(p, "vector file")?;
        }
        TargetPair::parse(&self.ingest.pair)?;
        SplitFractions::parse(&self.ingest.split)?;
        if self.ingest.min_words > self.ingest.max_words {
            return Err(Error::Config("min_words exceeds max_words".into()));
        }
        if self.uses_embeddings() && self.embeddings.is_none() && self.data.vectors.is_none() {
            return Err(Error::Config(format!(
                "model `{}` needs word vectors: add an [embeddings] section or data.vectors",
                self.model.kind
            )));
        }
        if let Some(e) = &self.embeddings {
            e.validate()?;
        }
        self.train.validate()?;
        if let Some(g) = &self.grid {
            if g.nodes.is_empty() || g.dropouts.is_empty() {
                return Err(Error::Config("grid needs at least one node count and one dropout".into()));
            }
        }
        for e in &self.estimate {
            let (_, opts) = e.resolve()?;
            if matches!(opts.vcov, VcovChoice::NeweyWest(_)) && !opts.aggregate {
                return Err(Error::Config(format!(
                    "estimate `{}`: Newey-West needs aggregate = true",
                    e.spec
                )));
            }
        }
        Ok(())
    }

    pub fn ingest_config(&self, seed: u64, evaluation: bool) -> Result<IngestConfig> {
        let mut c = IngestConfig::new(TargetPair::parse(&self.ingest.pair)?, seed);
        c.min_words = self.ingest.min_words;
        c.max_words = self.ingest.max_words;
        c.split = SplitFractions::parse(&self.ingest.split)?;
        c.evaluation = evaluation;
        if let Some(d) = &self.data.mask_dir {
            c.mask = Some(MaskTable::from_dir(&self.resolve(d))?);
        }
        if let Some(p) = &self.data.drop_hashtags {
            let r = self.resolve(p);
            let text = fs::read_to_string(&r).map_err(|e| Error::io(&r, e))?;
            c.drop_hashtags = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            seed: 11,
            deterministic: true,
            out: "run".into(),
            series: Series::HeShe,
            data: DataConfig {
                training: "data/train.jsonl".into(),
                evaluation: vec!["data/y1.jsonl".into()],
                mask_dir: Some("masks".into()),
                drop_hashtags: None,
                vectors: None,
            },
            ingest: IngestSection::default(),
            embeddings: Some(SgnsConfig {
                dim: 16,
                subsample: Some(1e-3),
                ..Default::default()
            }),
            model: ModelSpec::default(),
            train: TrainConfig {
                learning_rate: 0.1,
                ..Default::default()
            },
            grid: Some(GridSection {
                nodes: vec![8, 16],
                dropouts: vec![0.0, 0.25],
                jobs: 2,
            }),
            evaluate: EvaluateSection::default(),
            calendar: CalendarIndex::default(),
            estimate: vec![
                EstimateSection::new("baseline"),
                EstimateSection {
                    vcov: "newey-west:4".into(),
                    aggregate: true,
                    subset: Some(1),
                    ..EstimateSection::new("day_fe")
                },
            ],
            base_dir: PathBuf::new(),
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = sample();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text, Path::new("")).unwrap(), c);
    }

    #[test]
    fn seed_is_mandatory() {
        let e = RunConfig::from_toml("[data]\ntraining = \"x\"\n", Path::new("")).unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_toml("seed = 1\n[data]\ntraining = \"x.jsonl\"\n", Path::new("/tmp")).unwrap();
        assert_eq!(c.model.nodes, 125);
        assert_eq!(c.train.batch_size, 100);
        assert_eq!(c.ingest.split, "64,16,20");
        assert!(c.deterministic);
        assert_eq!(c.resolve(Path::new("x.jsonl")), PathBuf::from("/tmp/x.jsonl"));
    }

    #[test]
    fn lstm_without_vectors_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t.jsonl"), "").unwrap();
        let mut c = sample();
        c.base_dir = dir.path().to_path_buf();
        c.data = DataConfig {
            training: "t.jsonl".into(),
            evaluation: vec![],
            mask_dir: None,
            drop_hashtags: None,
            vectors: None,
        };
        c.embeddings = None;
        let e = c.validate().unwrap_err();
        assert!(matches!(e, Error::Config(_)) && e.to_string().contains("vectors"), "{e}");
        c.model.kind = crate::models::ModelKind::Nb;
        c.validate().unwrap();
    }

    #[test]
    fn missing_input_fails_validation() {
        let mut c = sample();
        c.base_dir = PathBuf::from("/nonexistent");
        assert!(c.validate().unwrap_err().to_string().contains("training corpus"));
    }
}
