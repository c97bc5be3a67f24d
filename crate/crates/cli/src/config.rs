//! Flat `key = value` run configuration.
//!
//! Every key has a default and unknown keys are rejected. The resolved
//! configuration has a canonical text form whose hash is stamped on every
//! output file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use grv_core::downstream::ProbeOptions;
use grv_core::io::config_hash;
use grv_core::pipeline::AttackKind;
use grv_core::theory::ModelKind;
use grv_core::toy::PlantedPartition;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    NodeClassification,
    LinkPrediction,
    CommunityDetection,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NodeClassification => "nodecls",
            Self::LinkPrediction => "link",
            Self::CommunityDetection => "community",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nodecls" => Ok(Self::NodeClassification),
            "link" => Ok(Self::LinkPrediction),
            "community" => Ok(Self::CommunityDetection),
            other => Err(format!("unknown task {other:?} (expected nodecls, link or community)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Toy { spec: PlantedPartition, seed: u64 },
    Files {
        edges: PathBuf,
        attributes: Option<PathBuf>,
        featureless: bool,
        labels: Option<PathBuf>,
        split_train: Option<PathBuf>,
        split_test: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    pub hidden: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub budget_frac: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    pub attack: AttackKind,
    pub budget_frac: f64,
    pub epsilon: f64,
    pub tasks: Vec<Task>,
    pub trials: u64,
    pub probe: ProbeOptions,
    pub train_frac: f64,
    pub test_frac: f64,
    pub link_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheorySection {
    pub models: Vec<ModelKind>,
    pub n: usize,
    pub c: usize,
    pub p: f64,
    pub sigma: f64,
    pub mu_norm: f64,
    /// Count parameter of the simple attribute-aware model.
    pub simple_count: usize,
    pub ball_norm: f64,
    pub samples: usize,
    pub targets: Vec<f64>,
    pub rhos: Vec<f64>,
    pub bound_fracs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_name: String,
    pub dataset: DatasetSource,
    pub seed: u64,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub theory: TheorySection,
}

/// Values given on the command line, applied over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget_frac: Option<f64>,
    pub epsilon: Option<f64>,
    pub tasks: Option<Vec<Task>>,
    pub attack: Option<AttackKind>,
}

/// Which budget the `--budget-frac` and `--epsilon` flags refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Evaluate,
}

struct Raw {
    entries: BTreeMap<String, (usize, String)>,
    origin: String,
}

impl Raw {
    fn parse(origin: &str, text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected key = value", i + 1)))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Config(format!("{origin}:{}: empty key", i + 1)));
            }
            if let Some((prev, _)) = entries.insert(key.clone(), (i + 1, value.trim().to_string())) {
                return Err(CliError::Config(format!(
                    "{origin}:{}: key {key:?} already set on line {prev}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            entries,
            origin: origin.to_string(),
        })
    }

    fn take<T: FromStr>(&mut self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse()
                .map_err(|e| CliError::Config(format!("{}:{line}: bad value for {key}: {e}", self.origin))),
        }
    }

    fn take_opt(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v).filter(|v| !v.is_empty())
    }

    fn take_list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> CliResult<Vec<T>>
    where
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(default),
            Some((_, v)) if v.is_empty() => Ok(Vec::new()),
            Some((line, v)) => v
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|e| CliError::Config(format!("{}:{line}: bad item in {key}: {e}", self.origin)))
                })
                .collect(),
        }
    }

    fn finish(self) -> CliResult<()> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(CliError::Config(format!("{}:{line}: unknown key {key:?}", self.origin))),
        }
    }
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Self::parse("<defaults>", "", Path::new(".")),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new("."));
                Self::parse(&p.display().to_string(), &text, base)
            }
        }
    }

    pub fn parse(origin: &str, text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut raw = Raw::parse(origin, text)?;
        let default_toy = PlantedPartition::default();
        let kind: String = raw.take("dataset", "toy".to_string())?;
        let resolve = |p: String| base_dir.join(p);
        let dataset = match kind.as_str() {
            "toy" => DatasetSource::Toy {
                spec: PlantedPartition {
                    nodes: raw.take("toy_nodes", default_toy.nodes)?,
                    communities: raw.take("toy_communities", default_toy.communities)?,
                    attributes: raw.take("toy_attributes", default_toy.attributes)?,
                    p_in: raw.take("toy_p_in", default_toy.p_in)?,
                    p_out: raw.take("toy_p_out", default_toy.p_out)?,
                    mean_shift: raw.take("toy_mean_shift", default_toy.mean_shift)?,
                    sigma: raw.take("toy_sigma", default_toy.sigma)?,
                },
                seed: raw.take("toy_seed", 0)?,
            },
            "files" => DatasetSource::Files {
                edges: resolve(raw.take_opt("edges").ok_or_else(|| config_err("dataset = files needs edges"))?),
                attributes: raw.take_opt("attributes").map(resolve),
                featureless: raw.take("featureless", false)?,
                labels: raw.take_opt("labels").map(resolve),
                split_train: raw.take_opt("split_train").map(resolve),
                split_test: raw.take_opt("split_test").map(resolve),
            },
            other => return Err(config_err(format!("dataset must be toy or files, got {other:?}"))),
        };
        let dataset_name = raw.take("dataset_name", kind.clone())?;
        let seed = raw.take("seed", 0u64)?;

        let train = TrainSection {
            hidden: raw.take("hidden", 512)?,
            gamma: raw.take("gamma", 5e-3)?,
            learning_rate: raw.take("learning_rate", 1e-3)?,
            patience: raw.take("patience", 20)?,
            max_epochs: raw.take("max_epochs", 1000)?,
            budget_frac: raw.take("train_budget_frac", 0.4)?,
            epsilon: raw.take("train_epsilon", 0.1)?,
        };
        let probe_default = ProbeOptions::default();
        let eval = EvalSection {
            attack: raw.take("attack", AttackKind::MiPgd)?,
            budget_frac: raw.take("eval_budget_frac", 0.2)?,
            epsilon: raw.take("eval_epsilon", 0.1)?,
            tasks: raw.take_list(
                "tasks",
                vec![Task::NodeClassification, Task::LinkPrediction, Task::CommunityDetection],
            )?,
            trials: raw.take("trials", grv_core::downstream::NUM_TRIALS)?,
            probe: ProbeOptions {
                lr: raw.take("probe_lr", probe_default.lr)?,
                epochs: raw.take("probe_epochs", probe_default.epochs)?,
                standardize: raw.take("probe_standardize", probe_default.standardize)?,
            },
            train_frac: raw.take("train_frac", 0.1)?,
            test_frac: raw.take("test_frac", 0.8)?,
            link_fraction: raw.take("link_fraction", 0.1)?,
        };
        let n = raw.take("theory_n", 1000usize)?;
        let theory = TheorySection {
            models: raw.take_list("theory_models", vec![ModelKind::TopologyAware, ModelKind::AttributeAware])?,
            n,
            c: raw.take("theory_c", 4)?,
            p: raw.take("theory_p", 0.7)?,
            sigma: raw.take("theory_sigma", 1.0)?,
            mu_norm: raw.take("theory_mu_norm", 1.0)?,
            simple_count: raw.take("theory_simple_count", 3 * n / 10)?,
            ball_norm: raw.take("theory_ball_norm", 2.0)?,
            samples: raw.take("theory_samples", 100_000)?,
            targets: raw.take_list("theory_targets", vec![0.06, 0.1, 0.14])?,
            rhos: raw.take_list("theory_rhos", vec![0.0])?,
            bound_fracs: raw.take_list("theory_bound_fracs", vec![0.1, 0.2, 0.4])?,
        };
        raw.finish()?;
        let config = Self {
            dataset_name,
            dataset,
            seed,
            train,
            eval,
            theory,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides, phase: Phase) -> CliResult<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        let (frac, eps) = match phase {
            Phase::Train => (&mut self.train.budget_frac, &mut self.train.epsilon),
            Phase::Evaluate => (&mut self.eval.budget_frac, &mut self.eval.epsilon),
        };
        if let Some(f) = o.budget_frac {
            *frac = f;
        }
        if let Some(e) = o.epsilon {
            *eps = e;
        }
        if let Some(t) = &o.tasks {
            self.eval.tasks = t.clone();
        }
        if let Some(a) = o.attack {
            self.eval.attack = a;
        }
        self.validate()
    }

    fn validate(&self) -> CliResult<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        let unit_open = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(config_err(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        nonneg("train_budget_frac", self.train.budget_frac)?;
        nonneg("train_epsilon", self.train.epsilon)?;
        nonneg("eval_budget_frac", self.eval.budget_frac)?;
        nonneg("eval_epsilon", self.eval.epsilon)?;
        nonneg("gamma", self.train.gamma)?;
        if !(self.train.learning_rate > 0.0) {
            return Err(config_err("learning_rate must be > 0"));
        }
        if self.train.hidden == 0 || self.train.patience == 0 {
            return Err(config_err("hidden and patience must be >= 1"));
        }
        if self.eval.trials == 0 {
            return Err(config_err("trials must be >= 1"));
        }
        if !(self.eval.probe.lr > 0.0) || self.eval.probe.epochs == 0 {
            return Err(config_err("probe_lr must be > 0 and probe_epochs >= 1"));
        }
        unit_open("train_frac", self.eval.train_frac)?;
        unit_open("test_frac", self.eval.test_frac)?;
        unit_open("link_fraction", self.eval.link_fraction)?;
        if self.eval.train_frac + self.eval.test_frac > 1.0 + 1e-12 {
            return Err(config_err("train_frac + test_frac must not exceed 1"));
        }
        let t = &self.theory;
        if t.samples == 0 || t.n == 0 || t.c == 0 {
            return Err(config_err("theory_samples, theory_n and theory_c must be >= 1"));
        }
        for &target in &t.targets {
            if !(target > 0.0 && target < 0.5) {
                return Err(config_err(format!("theory_targets must lie in (0, 0.5), got {target}")));
            }
        }
        for &rho in &t.rhos {
            nonneg("theory_rhos", rho)?;
        }
        for &f in &t.bound_fracs {
            nonneg("theory_bound_fracs", f)?;
        }
        for kind in &t.models {
            self.synthetic_model(*kind).validate().map_err(|e| config_err(e.to_string()))?;
        }
        Ok(())
    }

    /// The synthetic model of `kind` described by the theory keys. The class
    /// mean points along the all-ones direction with norm `theory_mu_norm`.
    pub fn synthetic_model(&self, kind: ModelKind) -> grv_core::theory::SyntheticModel {
        let t = &self.theory;
        let along = t.mu_norm / (t.c as f64).sqrt();
        let (p, mu) = match kind {
            ModelKind::TopologyAware | ModelKind::TopologyAwareSimple => (t.p, vec![0.0; t.c]),
            ModelKind::AttributeAware => (0.5, vec![along; t.c]),
            ModelKind::AttributeAwareSimple => (t.simple_count as f64, vec![along; t.c]),
        };
        grv_core::theory::SyntheticModel {
            kind,
            n: t.n,
            c: t.c,
            p,
            sigma: t.sigma,
            mu,
            ball_norm: t.ball_norm,
        }
    }

    /// Sorted `key=value` lines of every resolved setting except the seed.
    pub fn canonical(&self) -> String {
        let mut kv: Vec<(&str, String)> = vec![("dataset_name", self.dataset_name.clone())];
        match &self.dataset {
            DatasetSource::Toy { spec, seed } => {
                kv.extend([
                    ("dataset", "toy".to_string()),
                    ("toy_nodes", spec.nodes.to_string()),
                    ("toy_communities", spec.communities.to_string()),
                    ("toy_attributes", spec.attributes.to_string()),
                    ("toy_p_in", format!("{:?}", spec.p_in)),
                    ("toy_p_out", format!("{:?}", spec.p_out)),
                    ("toy_mean_shift", format!("{:?}", spec.mean_shift)),
                    ("toy_sigma", format!("{:?}", spec.sigma)),
                    ("toy_seed", seed.to_string()),
                ]);
            }
            DatasetSource::Files {
                edges,
                attributes,
                featureless,
                labels,
                split_train,
                split_test,
            } => {
                let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
                kv.extend([
                    ("dataset", "files".to_string()),
                    ("edges", edges.display().to_string()),
                    ("attributes", show(attributes)),
                    ("featureless", featureless.to_string()),
                    ("labels", show(labels)),
                    ("split_train", show(split_train)),
                    ("split_test", show(split_test)),
                ]);
            }
        }
        let (tr, ev, th) = (&self.train, &self.eval, &self.theory);
        kv.extend([
            ("hidden", tr.hidden.to_string()),
            ("gamma", format!("{:?}", tr.gamma)),
            ("learning_rate", format!("{:?}", tr.learning_rate)),
            ("patience", tr.patience.to_string()),
            ("max_epochs", tr.max_epochs.to_string()),
            ("train_budget_frac", format!("{:?}", tr.budget_frac)),
            ("train_epsilon", format!("{:?}", tr.epsilon)),
            ("attack", ev.attack.to_string()),
            ("eval_budget_frac", format!("{:?}", ev.budget_frac)),
            ("eval_epsilon", format!("{:?}", ev.epsilon)),
            ("tasks", join(&ev.tasks.iter().map(|t| t.as_str()).collect::<Vec<_>>())),
            ("trials", ev.trials.to_string()),
            ("probe_lr", format!("{:?}", ev.probe.lr)),
            ("probe_epochs", ev.probe.epochs.to_string()),
            ("probe_standardize", ev.probe.standardize.to_string()),
            ("train_frac", format!("{:?}", ev.train_frac)),
            ("test_frac", format!("{:?}", ev.test_frac)),
            ("link_fraction", format!("{:?}", ev.link_fraction)),
            ("theory_models", join(&th.models)),
            ("theory_n", th.n.to_string()),
            ("theory_c", th.c.to_string()),
            ("theory_p", format!("{:?}", th.p)),
            ("theory_sigma", format!("{:?}", th.sigma)),
            ("theory_mu_norm", format!("{:?}", th.mu_norm)),
            ("theory_simple_count", th.simple_count.to_string()),
            ("theory_ball_norm", format!("{:?}", th.ball_norm)),
            ("theory_samples", th.samples.to_string()),
            ("theory_targets", join(&th.targets.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>())),
            ("theory_rhos", join(&th.rhos.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>())),
            ("theory_bound_fracs", join(&th.bound_fracs.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>())),
        ]);
        kv.sort();
        kv.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        config_hash(&self.canonical())
    }
}
