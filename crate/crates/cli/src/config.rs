//! Experiment configuration: one JSON document per experiment.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Seeds inside the nested sections are ignored; every stream derives
//! from the top-level `seed` (see [`ExperimentConfig::effective`]).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use spoofwatch::augment::AugmentPolicy;
use spoofwatch::continual::ContinualConfig;
use spoofwatch::corpus::{Manifest, Split};
use spoofwatch::frontend::FrontendConfig;
use spoofwatch::metrics::Label;
use spoofwatch::model::{ModelConfig, TrainHyper};
use spoofwatch::rng::derive_seed;

/// Invalid invocation or configuration; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub Vec<String>);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        writeln!(f, "{} configuration problems:", self.0.len())?;
        for p in &self.0 {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(vec![msg.into()]).into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifests {
    pub train: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub eval: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub manifests: Manifests,
    #[serde(default)]
    pub frontend: FrontendConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "AugmentPolicy::none")]
    pub augment: AugmentPolicy,
    #[serde(default)]
    pub train: TrainHyper,
    #[serde(default)]
    pub continual: ContinualConfig,
}

/// Which manifests a command needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Train,
    Continual,
}

impl ExperimentConfig {
    /// Parse, resolve paths and validate everything a command needs, without
    /// touching the filesystem beyond reads.
    pub fn load(path: &Path, needs: Needs) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        cfg.validate(needs)
            .map_err(|problems| UsageError(problems).into())
            .map(|()| cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        for p in [
            &mut self.manifests.train,
            &mut self.manifests.pool,
            &mut self.manifests.eval,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
    }

    pub fn validate(&self, needs: Needs) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        let mut check = |what: &str, r: spoofwatch::Result<()>| {
            if let Err(e) = r {
                problems.push(format!("{what}: {e}"));
            }
        };
        check("frontend", self.frontend.validate(16_000));
        check("model", self.model.validate());
        check("augment", self.augment.validate());
        check("train", self.train.validate());
        check("continual", self.continual.validate());
        if self.frontend.n_mels != self.model.n_mels {
            problems.push(format!(
                "model.n_mels {} differs from frontend.n_mels {}",
                self.model.n_mels, self.frontend.n_mels
            ));
        }
        if let Some(p) = nearest_existing(&self.output_dir) {
            if !p.is_dir() {
                problems.push(format!("output_dir: {} is not a directory", p.display()));
            }
        }
        let required: &[(&str, &Option<PathBuf>, Split)] = match needs {
            Needs::Train => &[("manifests.train", &self.manifests.train, Split::Train)],
            Needs::Continual => &[
                ("manifests.pool", &self.manifests.pool, Split::Pool),
                ("manifests.eval", &self.manifests.eval, Split::Eval),
            ],
        };
        for (field, path, split) in required {
            match path {
                None => problems.push(format!("{field} is required")),
                Some(p) => {
                    if let Err(e) = check_split(p, *split) {
                        problems.push(format!("{field}: {e}"));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    /// Sections with every seed derived from the top-level one.
    pub fn effective(&self) -> Effective {
        let s = self.seed;
        let mut train = self.train.clone();
        train.seed = derive_seed(s, "train", 0);
        let mut augment = self.augment.clone();
        augment.rng_seed = derive_seed(s, "augment", 0);
        let mut continual = self.continual.clone();
        continual.seed = derive_seed(s, "continual", 0);
        continual.finetune_hyper.seed = derive_seed(s, "finetune", 0);
        continual.finetune_augment.rng_seed = derive_seed(s, "finetune-augment", 0);
        Effective {
            train,
            augment,
            continual,
        }
    }
}

pub struct Effective {
    pub train: TrainHyper,
    pub augment: AugmentPolicy,
    pub continual: ContinualConfig,
}

fn nearest_existing(path: &Path) -> Option<&Path> {
    path.ancestors()
        .find(|p| !p.as_os_str().is_empty() && p.exists())
}

/// The manifest exists, parses, and its `split` holds both classes.
pub fn check_split(path: &Path, split: Split) -> anyhow::Result<()> {
    let m = Manifest::read(path)?;
    let entries = m.split(split);
    if entries.is_empty() {
        anyhow::bail!("{} has no {} entries", path.display(), split.as_str());
    }
    for label in [Label::Bonafide, Label::Fake] {
        if !entries.iter().any(|e| e.label == label) {
            anyhow::bail!(
                "{} split `{}` has no {label} clips",
                path.display(),
                split.as_str()
            );
        }
    }
    Ok(())
}
