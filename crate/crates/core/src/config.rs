//! TOML experiment configuration. Relative paths resolve against the
//! directory holding the config file.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cv::{CvProtocol, DEFAULT_FOLDS, DEFAULT_SEEDS};
use crate::error::{Error, Result};
use crate::experiment::ExperimentPlan;
use crate::features::{extract_features_with, FeatureMatrix, FeatureSidecar};
use crate::models::{Family, HyperGrid};
use crate::selection::{Method, DEFAULT_TOLERANCE};
use crate::taxonomy::{Taxonomy, TaxonomyLeaf};
use crate::trajectory::{parse_trajectory_csv, resample_set, ColumnMapping, ParseReport, ResampleOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// Trajectory point CSV.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Previously extracted feature CSV; used instead of `path` when set.
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub columns: ColumnMapping,
    #[serde(default)]
    pub resample: Option<ResampleOptions>,
}

/// Leaves from a separate TOML file or inline `[[taxonomy.leaf]]` tables;
/// the built-in taxonomy when neither is given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomySource {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub leaf: Vec<TaxonomyLeaf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub methods: Vec<Method>,
    pub families: Vec<Family>,
    pub tuned: Vec<bool>,
    pub seeds: Vec<u64>,
    pub folds: usize,
    pub tolerance: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            families: Family::ALL.to_vec(),
            tuned: vec![false, true],
            seeds: DEFAULT_SEEDS.to_vec(),
            folds: DEFAULT_FOLDS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub taxonomy: TaxonomySource,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub grid: HyperGrid,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

/// Loaded feature matrix and, when parsed from raw trajectories, the parse diagnostics.
pub struct LoadedData {
    pub matrix: FeatureMatrix,
    pub parse_report: Option<ParseReport>,
}

/// Sidecar path written next to a feature CSV.
pub fn sidecar_path(features_csv: &Path) -> PathBuf {
    let mut name = features_csv.file_stem().unwrap_or_default().to_os_string();
    name.push(".sidecar.json");
    features_csv.with_file_name(name)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(doc: &str) -> Result<Self> {
        toml::from_str(doc).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, resolves relative paths and validates.
    pub fn from_path(path: &Path) -> Result<Self> {
        let doc = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&doc).map_err(|e| e.context(path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset.path = cfg.dataset.path.map(|p| resolve(base, &p));
        cfg.dataset.features = cfg.dataset.features.map(|p| resolve(base, &p));
        cfg.taxonomy.path = cfg.taxonomy.path.map(|p| resolve(base, &p));
        cfg.output_dir = resolve(base, &cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match (&d.path, &d.features) {
            (None, None) => return Err(Error::Config("dataset needs `path` or `features`".into())),
            (_, Some(p)) | (Some(p), None) if !p.is_file() => {
                return Err(Error::Config(format!("dataset file {} does not exist", p.display())))
            }
            _ => {}
        }
        if let Some(p) = &self.taxonomy.path {
            if !self.taxonomy.leaf.is_empty() {
                return Err(Error::Config("taxonomy takes either `path` or inline leaves, not both".into()));
            }
            if !p.is_file() {
                return Err(Error::Config(format!("taxonomy file {} does not exist", p.display())));
            }
        }
        self.plan()?.validate()
    }

    pub fn taxonomy(&self) -> Result<Taxonomy> {
        if let Some(p) = &self.taxonomy.path {
            let doc = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            return Taxonomy::from_toml_str(&doc).map_err(|e| e.context(p.display().to_string()));
        }
        if self.taxonomy.leaf.is_empty() {
            Ok(Taxonomy::builtin())
        } else {
            Taxonomy::new(self.taxonomy.leaf.clone())
        }
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        let e = &self.experiment;
        Ok(ExperimentPlan {
            dataset: self.dataset.name.clone(),
            methods: e.methods.clone(),
            families: e.families.clone(),
            tuned: e.tuned.clone(),
            protocol: CvProtocol {
                seeds: e.seeds.clone(),
                folds: e.folds,
                tuned: false,
            },
            tolerance: e.tolerance,
            grid: self.grid.clone(),
            taxonomy: self.taxonomy()?,
        })
    }

    /// Reads the feature CSV when configured, otherwise parses, optionally
    /// resamples and extracts the trajectory CSV. Columns are tagged with the
    /// configured taxonomy.
    pub fn load_data(&self) -> Result<LoadedData> {
        let taxonomy = self.taxonomy()?;
        if let Some(p) = &self.dataset.features {
            let file = File::open(p).map_err(|e| Error::io(p, e))?;
            let side = sidecar_path(p);
            let sidecar: Option<FeatureSidecar> = if side.is_file() {
                let f = File::open(&side).map_err(|e| Error::io(&side, e))?;
                Some(serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::from(e).context(side.display().to_string()))?)
            } else {
                None
            };
            let mut matrix =
                FeatureMatrix::read_csv(BufReader::new(file), sidecar.as_ref()).map_err(|e| e.context(p.display().to_string()))?;
            taxonomy.tag_columns(&mut matrix);
            return Ok(LoadedData {
                matrix,
                parse_report: None,
            });
        }
        let p = self.dataset.path.as_ref().ok_or_else(|| Error::Config("dataset has no path".into()))?;
        let file = File::open(p).map_err(|e| Error::io(p, e))?;
        let (set, report) =
            parse_trajectory_csv(BufReader::new(file), &self.dataset.columns).map_err(|e| e.context(p.display().to_string()))?;
        let set = match &self.dataset.resample {
            Some(opts) => resample_set(&set, opts)?,
            None => set,
        };
        Ok(LoadedData {
            matrix: extract_features_with(&set, &taxonomy)?,
            parse_report: Some(report),
        })
    }
}
