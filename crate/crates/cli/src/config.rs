//! Experiment configuration: a TOML file of flat sections, every key
//! optional. Omitted keys take the desk-scale benchmark defaults.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sample_regularity::dataset::{load_csv, split, synth_mixture, LabeledDataset, Split};
use sample_regularity::trainer::{Activation, ModelSpec, Optimizer, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: Vec<ModelConfig>,
    pub train: TrainSection,
    pub experiment: ExperimentSection,
    pub analysis: AnalysisConfig,
    pub prune: PruneConfig,
    pub compress: CompressConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub classes: usize,
    pub n_per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub noise_frac: f64,
    pub train_frac: f64,
    pub seed: u64,
    /// Load `label,f1,...,fd[,split]` from this file instead of synthesizing.
    /// Rows without a split column are split with `train_frac`.
    pub csv: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            n_per_class: 300,
            dim: 20,
            separation: 4.0,
            noise_frac: 0.0,
            train_frac: 0.5,
            seed: 7,
            csv: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub hidden_widths: Vec<usize>,
    pub activation: String,
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "mlp32".into(),
            hidden_widths: vec![32],
            activation: "relu".into(),
            init_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    /// `sgd`, `adagrad` or `adamax`.
    pub optimizer: String,
    pub lr: f64,
    pub momentum: f64,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// `[[epoch, multiplier], ...]`
    pub schedule: Vec<(usize, f64)>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            optimizer: "sgd".into(),
            lr: 0.1,
            momentum: 0.9,
            epsilon: 1e-8,
            beta1: 0.9,
            beta2: 0.999,
            schedule: vec![(25, 0.1), (37, 0.1)],
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub repetitions: usize,
    /// Repetition `i` trains with seed `base_seed + i`.
    pub base_seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub output: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            repetitions: 5,
            base_seed: 0,
            workers: 0,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Density radius; when absent it is derived from the axis ranges.
    pub radius: Option<f64>,
    pub loss_bin_width: usize,
    pub event_bin_width: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            radius: None,
            loss_bin_width: 1,
            event_bin_width: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    pub fractions: Vec<f64>,
    pub radius: f64,
    /// Training seeds; every table cell is averaged over them.
    pub seeds: Vec<u64>,
    pub radii: Vec<f64>,
    /// `desc` removes the most often correct (easiest) samples first, `asc`
    /// the least often correct.
    pub cbtl_direction: String,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            radius: 1.0,
            seeds: (0..5).collect(),
            radii: vec![0.5, 1.0, 2.0, 4.0],
            cbtl_direction: "desc".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CompressConfig {
    pub sector_deg: f64,
    pub n_per_bin: Vec<usize>,
    /// Bins kept whole regardless of `n_per_bin`.
    pub take_all: Vec<usize>,
    pub knn_k: usize,
    pub seeds: Vec<u64>,
}

impl Default for CompressConfig {
    fn default() -> Self {
        Self {
            sector_deg: 18.0,
            n_per_bin: vec![1, 2, 5, 10, 20, 50, 100, 200],
            take_all: vec![0],
            knn_k: 5,
            seeds: (0..5).collect(),
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.csv.is_none() {
            synth_mixture(d.classes, 1, d.dim, d.separation, d.noise_frac, 0)
                .map_err(|e| invalid("dataset", core_msg(e)))?;
            if d.n_per_class < 2 {
                return Err(invalid("dataset.n_per_class", "must be >= 2 so both splits are populated"));
            }
        }
        if !(d.train_frac > 0.0 && d.train_frac < 1.0) {
            return Err(invalid("dataset.train_frac", "must lie in (0, 1)"));
        }
        let mut names = BTreeSet::new();
        for (i, m) in self.model.iter().enumerate() {
            let field = format!("model[{i}]");
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(invalid(&format!("{field}.name"), "use letters, digits, `_` or `-`"));
            }
            if !names.insert(m.name.as_str()) {
                return Err(invalid(&format!("{field}.name"), format!("duplicate model name `{}`", m.name)));
            }
            self.model_spec(m).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{field}.{msg}")),
                other => other,
            })?;
        }
        self.train_config(0)?;
        if self.experiment.repetitions == 0 {
            return Err(invalid("experiment.repetitions", "must be >= 1"));
        }
        let a = &self.analysis;
        if let Some(r) = a.radius {
            if !r.is_finite() || r <= 0.0 {
                return Err(invalid("analysis.radius", "must be > 0"));
            }
        }
        if a.loss_bin_width == 0 {
            return Err(invalid("analysis.loss_bin_width", "must be >= 1"));
        }
        if a.event_bin_width == 0 {
            return Err(invalid("analysis.event_bin_width", "must be >= 1"));
        }
        let p = &self.prune;
        if let Some(f) = p.fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return Err(invalid("prune.fractions", format!("{f} outside [0, 1)")));
        }
        if !p.radius.is_finite() || p.radius <= 0.0 {
            return Err(invalid("prune.radius", "must be > 0"));
        }
        if !matches!(p.cbtl_direction.as_str(), "desc" | "asc") {
            return Err(invalid("prune.cbtl_direction", format!("{:?} is not desc or asc", p.cbtl_direction)));
        }
        if p.seeds.is_empty() {
            return Err(invalid("prune.seeds", "need at least one seed"));
        }
        if let Some(r) = p.radii.iter().find(|r| !r.is_finite() || **r <= 0.0) {
            return Err(invalid("prune.radii", format!("radius {r} must be > 0")));
        }
        let c = &self.compress;
        let sectors = 180.0 / c.sector_deg;
        if c.sector_deg.is_nan() || c.sector_deg <= 0.0 || c.sector_deg > 180.0 || (sectors - sectors.round()).abs() > 1e-9 {
            return Err(invalid("compress.sector_deg", "must divide 180"));
        }
        if c.n_per_bin.contains(&0) {
            return Err(invalid("compress.n_per_bin", "entries must be >= 1"));
        }
        let n_bins = sectors.round() as usize + 2;
        if let Some(b) = c.take_all.iter().find(|&&b| b >= n_bins) {
            return Err(invalid("compress.take_all", format!("bin {b} does not exist (there are {n_bins})")));
        }
        if c.knn_k == 0 {
            return Err(invalid("compress.knn_k", "must be >= 1"));
        }
        if c.seeds.is_empty() {
            return Err(invalid("compress.seeds", "need at least one seed"));
        }
        Ok(())
    }

    /// Configured models, or the default one when none is listed.
    pub fn models(&self) -> Vec<ModelConfig> {
        if self.model.is_empty() {
            vec![ModelConfig::default()]
        } else {
            self.model.clone()
        }
    }

    pub fn model_spec(&self, m: &ModelConfig) -> Result<ModelSpec> {
        let activation: Activation = m
            .activation
            .parse()
            .map_err(|e| invalid("activation", core_msg(e)))?;
        let spec = ModelSpec {
            hidden_widths: m.hidden_widths.clone(),
            activation,
            init_scale: m.init_scale,
        };
        spec.validate().map_err(|e| invalid("hidden_widths/init_scale", core_msg(e)))?;
        Ok(spec)
    }

    /// The first configured model, used by the pruning and compression
    /// experiments.
    pub fn primary_model(&self) -> Result<(ModelConfig, ModelSpec)> {
        let m = self.models().remove(0);
        let spec = self.model_spec(&m)?;
        Ok((m, spec))
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let t = &self.train;
        let optimizer = match t.optimizer.as_str() {
            "sgd" => Optimizer::Sgd { lr: t.lr, momentum: t.momentum },
            "adagrad" => Optimizer::AdaGrad { lr: t.lr, epsilon: t.epsilon },
            "adamax" => Optimizer::AdaMax {
                lr: t.lr,
                beta1: t.beta1,
                beta2: t.beta2,
                epsilon: t.epsilon,
            },
            other => return Err(invalid("train.optimizer", format!("unknown optimizer `{other}`"))),
        };
        let cfg = TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            optimizer,
            lr_schedule: t.schedule.clone(),
            seed,
        };
        cfg.validate().map_err(|e| invalid("train", core_msg(e)))?;
        Ok(cfg)
    }

    /// Builds the dataset: loaded from CSV when configured, otherwise
    /// synthesized, then split unless the file already carries test rows.
    pub fn dataset(&self) -> Result<LabeledDataset> {
        let d = &self.dataset;
        match &d.csv {
            Some(path) => {
                let ds = load_csv(path).map_err(crate::error::at(path))?;
                if ds.indices_of(Split::Test).is_empty() {
                    Ok(split(&ds, d.train_frac, d.seed)?)
                } else {
                    Ok(ds)
                }
            }
            None => {
                let ds = synth_mixture(d.classes, d.n_per_class, d.dim, d.separation, d.noise_frac, d.seed)?;
                Ok(split(&ds, d.train_frac, d.seed)?)
            }
        }
    }
}

fn core_msg(e: sample_regularity::Error) -> String {
    match e {
        sample_regularity::Error::Argument(m) => m,
        other => other.to_string(),
    }
}
