use std::fs;
use std::path::{Path, PathBuf};

use grv_core::attack::{budget_from_fraction, AttackBudget};
use grv_core::downstream::{Metrics, SplitSpec};
use grv_core::io::{
    format_attributes, format_checkpoint, format_edge_list, load_checkpoint, load_graph, load_labels, load_split,
    metrics_csv, metrics_json, Checkpoint, DatasetBundle,
};
use grv_core::pipeline::{
    eval_community_detection, eval_link_prediction, eval_node_classification, perturb, risk_bound_row, AttackKind,
    EvalProtocol, SplitPolicy,
};
use grv_core::rng::substream;
use grv_core::theory::{check_theorem_relation, tune_rho, LinearEncoderHypothesis, TheoryReport};
use grv_core::trainer::{train, Branch, TrainConfig};
use grv_core::{EncoderParams, Graph};
use serde::Serialize;
use serde_json::json;

use crate::config::{DatasetSource, RunConfig, Task};
use crate::error::{CliError, CliResult};

pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const TRAIN_SUMMARY_FILE: &str = "train_summary.json";
pub const PERTURBED_EDGES_FILE: &str = "perturbed_edges.txt";
pub const PERTURBED_ATTRIBUTES_FILE: &str = "perturbed_attributes.csv";
pub const ATTACK_REPORT_FILE: &str = "attack_report.json";
pub const METRICS_JSON_FILE: &str = "metrics.json";
pub const METRICS_CSV_FILE: &str = "metrics.csv";
pub const THEORY_REPORT_FILE: &str = "theory_report.json";

/// Resolved configuration plus its hash, shared by every command.
pub struct Run {
    pub config: RunConfig,
    pub hash: String,
    pub out: PathBuf,
}

impl Run {
    pub fn new(config: RunConfig, out: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&out)
            .map_err(|e| CliError::Data(format!("cannot create output directory {}: {e}", out.display())))?;
        Ok(Self {
            hash: config.hash(),
            config,
            out,
        })
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn stamp(&self) -> String {
        format!("# config_hash={}\n# seed={}\n", self.hash, self.config.seed)
    }

    fn json(&self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numerical(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }
}

pub fn load_dataset(config: &RunConfig) -> CliResult<DatasetBundle> {
    let bundle = match &config.dataset {
        DatasetSource::Toy { spec, seed } => {
            let (graph, labels) = spec.generate(*seed).map_err(|e| CliError::Config(e.to_string()))?;
            DatasetBundle::new(&config.dataset_name, graph, Some(labels), None)?
        }
        DatasetSource::Files {
            edges,
            attributes,
            featureless,
            labels,
            split_train,
            split_test,
        } => {
            let graph = load_graph(edges, attributes.as_deref(), *featureless)?;
            let n = graph.num_nodes();
            let labels = labels.as_deref().map(|p| load_labels(p, n)).transpose()?;
            let split = match (split_train, split_test) {
                (Some(tr), Some(te)) => Some(SplitSpec::new(load_split(tr, n)?, load_split(te, n)?, n)?),
                (None, None) => None,
                _ => return Err(CliError::Config("split_train and split_test must be given together".into())),
            };
            DatasetBundle::new(&config.dataset_name, graph, labels, split)?
        }
    };
    if bundle.graph.num_edges() == 0 {
        return Err(CliError::Data("the graph has no edges".into()));
    }
    Ok(bundle)
}

fn load_encoder(path: &Path, graph: &Graph) -> CliResult<EncoderParams> {
    let ckpt = load_checkpoint(path)?;
    ckpt.params.check_input(graph).map_err(|e| {
        CliError::Data(format!("checkpoint {} does not match the dataset: {e}", path.display()))
    })?;
    Ok(ckpt.params)
}

#[derive(Serialize)]
struct BudgetEcho {
    fraction: f64,
    delta: usize,
    epsilon: f64,
}

fn resolve_budget(graph: &Graph, fraction: f64, epsilon: f64) -> CliResult<BudgetEcho> {
    Ok(BudgetEcho {
        fraction,
        delta: budget_from_fraction(graph.num_edges(), fraction)?,
        epsilon,
    })
}

pub fn cmd_train(run: &Run) -> CliResult<()> {
    let cfg = &run.config;
    let bundle = load_dataset(cfg)?;
    let graph = &bundle.graph;
    let echo = resolve_budget(graph, cfg.train.budget_frac, cfg.train.epsilon)?;
    let train_cfg = TrainConfig {
        hidden: cfg.train.hidden,
        gamma: cfg.train.gamma,
        beta: 1.0,
        budget: AttackBudget::training(echo.delta, echo.epsilon),
        learning_rate: cfg.train.learning_rate,
        patience: cfg.train.patience,
        max_epochs: cfg.train.max_epochs,
        seed: cfg.seed,
    };
    let (params, log) = train(graph, &train_cfg)?;

    let ckpt = Checkpoint {
        params,
        seed: cfg.seed,
        config_hash: run.hash.clone(),
    };
    run.write(CHECKPOINT_FILE, &format_checkpoint(&ckpt))?;
    let comments = [("config_hash", run.hash.clone()), ("seed", cfg.seed.to_string())];
    run.write(TRAIN_LOG_FILE, &log.to_csv(&comments))?;

    let last = log.records.last();
    let summary = json!({
        "config_hash": run.hash,
        "seed": cfg.seed,
        "dataset": bundle.name,
        "nodes": graph.num_nodes(),
        "edges": graph.num_edges(),
        "hidden": cfg.train.hidden,
        "budget": echo,
        "epochs": log.records.len(),
        "adversarial_epochs": log.records.iter().filter(|r| r.branch == Branch::Adversarial).count(),
        "stopped_early": log.stopped_early,
        "final_l_benign": last.map(|r| r.l_benign),
        "final_grv": last.map(|r| r.grv),
    });
    run.json(TRAIN_SUMMARY_FILE, &summary)?;
    println!(
        "trained {} epochs on {} ({} nodes, {} edges), flip budget {}; wrote {}",
        log.records.len(),
        bundle.name,
        graph.num_nodes(),
        graph.num_edges(),
        echo.delta,
        run.out.display()
    );
    Ok(())
}

pub fn cmd_attack(run: &Run, checkpoint: &Path) -> CliResult<()> {
    let cfg = &run.config;
    let bundle = load_dataset(cfg)?;
    let graph = &bundle.graph;
    let params = load_encoder(checkpoint, graph)?;
    let echo = resolve_budget(graph, cfg.eval.budget_frac, cfg.eval.epsilon)?;
    let budget = AttackBudget::evaluation(echo.delta, echo.epsilon);
    let result = perturb(graph, &params, cfg.eval.attack, &budget, substream(cfg.seed, "attack"))?;

    let stamp = run.stamp();
    run.write(PERTURBED_EDGES_FILE, &(stamp.clone() + &format_edge_list(result.graph.adjacency())))?;
    if result.feat_linf_used > 0.0 {
        run.write(PERTURBED_ATTRIBUTES_FILE, &(stamp + &format_attributes(result.graph.attributes())))?;
    }
    let report = json!({
        "config_hash": run.hash,
        "seed": cfg.seed,
        "dataset": bundle.name,
        "attack": cfg.eval.attack.to_string(),
        "budget": echo,
        "flips_used": result.flips_used,
        "feat_linf_used": result.feat_linf_used,
        "grv": result.grv,
    });
    run.json(ATTACK_REPORT_FILE, &report)?;
    println!(
        "{} attack used {} of {} flips, L-inf {:.4}; wrote {}",
        cfg.eval.attack,
        result.flips_used,
        echo.delta,
        result.feat_linf_used,
        run.out.display()
    );
    Ok(())
}

/// A graph attacked beforehand, given as an edge list and optional attributes.
pub struct Precomputed<'a> {
    pub edges: &'a Path,
    pub attributes: Option<&'a Path>,
}

pub fn cmd_eval(run: &Run, checkpoint: &Path, perturbed: Option<Precomputed<'_>>) -> CliResult<()> {
    let cfg = &run.config;
    let bundle = load_dataset(cfg)?;
    let (graph, attack, attack_label) = match perturbed {
        None => (bundle.graph.clone(), cfg.eval.attack, cfg.eval.attack.to_string()),
        Some(p) => {
            let g = match p.attributes {
                Some(a) => load_graph(p.edges, Some(a), false)?,
                None => load_graph(p.edges, None, true)?.with_attributes(bundle.graph.attributes().clone())?,
            };
            if g.num_nodes() != bundle.graph.num_nodes() {
                return Err(CliError::Data(format!(
                    "perturbed graph has {} nodes, dataset has {}",
                    g.num_nodes(),
                    bundle.graph.num_nodes()
                )));
            }
            // the graph is already attacked; encode it as given
            (g, AttackKind::None, "precomputed".to_string())
        }
    };
    let params = load_encoder(checkpoint, &graph)?;
    let echo = resolve_budget(&graph, cfg.eval.budget_frac, cfg.eval.epsilon)?;
    let split = match &bundle.split {
        Some(s) => SplitPolicy::Fixed(s.clone()),
        None => SplitPolicy::Stratified {
            train_frac: cfg.eval.train_frac,
            test_frac: cfg.eval.test_frac,
        },
    };
    let protocol = EvalProtocol {
        attack,
        budget: AttackBudget::evaluation(echo.delta, echo.epsilon),
        probe: cfg.eval.probe.clone(),
        split,
        link_fraction: cfg.eval.link_fraction,
        root_seed: cfg.seed,
        seeds: (0..cfg.eval.trials).collect(),
    };
    let needs_labels = |task: Task| {
        bundle
            .labels
            .as_deref()
            .ok_or_else(|| CliError::Data(format!("task {} needs node labels", task.as_str())))
    };

    let mut metrics = Vec::new();
    for &task in &cfg.eval.tasks {
        let per_seed = match task {
            Task::NodeClassification => eval_node_classification(&graph, needs_labels(task)?, &params, &protocol)?,
            Task::LinkPrediction => eval_link_prediction(&graph, &params, &protocol)?,
            Task::CommunityDetection => eval_community_detection(&graph, needs_labels(task)?, &params, &protocol)?,
        };
        let m = Metrics::from_trials(task.as_str(), &bundle.name, &attack_label, per_seed)?;
        println!("{:<10} {:<10} {:.4} ± {:.4}", m.task, m.attack, m.mean, m.std);
        metrics.push(m);
    }
    run.write(METRICS_JSON_FILE, &metrics_json(&metrics, &run.hash, cfg.seed)?)?;
    run.write(METRICS_CSV_FILE, &metrics_csv(&metrics, &run.hash, cfg.seed))?;
    Ok(())
}

pub fn cmd_theory(run: &Run, checkpoint: Option<&Path>) -> CliResult<bool> {
    let cfg = &run.config;
    let t = &cfg.theory;
    let hypothesis = LinearEncoderHypothesis::from_direction(&vec![1.0; t.c])?;
    let mut relations = Vec::new();
    for &kind in &t.models {
        let model = cfg.synthetic_model(kind);
        let mut rhos: Vec<f64> = t.rhos.clone();
        for (k, &target) in t.targets.iter().enumerate() {
            rhos.push(tune_rho(&model, &hypothesis, target, t.samples, substream(cfg.seed, &format!("theory:{kind}:tune:{k}")))?);
        }
        for (k, &rho) in rhos.iter().enumerate() {
            let seed = substream(cfg.seed, &format!("theory:{kind}:{k}"));
            let r = check_theorem_relation(&model, &hypothesis, rho, t.samples, seed)?;
            println!(
                "{:<24} rho {:>10.4} AG {:.4} GRV {:.4} predicted {:.4} gap {:.4} {}",
                kind.as_str(),
                rho,
                r.ag_mc,
                r.grv_mc,
                r.predicted_grv,
                r.abs_gap,
                if r.pass { "ok" } else { "FAIL" }
            );
            relations.push(r);
        }
    }

    let mut bounds = Vec::new();
    if let Some(path) = checkpoint {
        let bundle = load_dataset(cfg)?;
        let labels = bundle
            .labels
            .as_deref()
            .ok_or_else(|| CliError::Data("the risk bound needs node labels".into()))?;
        let params = load_encoder(path, &bundle.graph)?;
        let split = match &bundle.split {
            Some(s) => s.clone(),
            None => SplitSpec::stratified(labels, cfg.eval.train_frac, cfg.eval.test_frac, substream(cfg.seed, "theory:split"))?,
        };
        for &frac in &t.bound_fracs {
            let echo = resolve_budget(&bundle.graph, frac, cfg.eval.epsilon)?;
            let budget = AttackBudget::evaluation(echo.delta, echo.epsilon);
            let (row, _) = risk_bound_row(
                &format!("{}:budget={frac:?}", bundle.name),
                &bundle.graph,
                labels,
                &split,
                &params,
                &budget,
                &cfg.eval.probe,
                substream(cfg.seed, &format!("theory:bound:{frac:?}")),
            )?;
            println!(
                "bound {:<24} mi {:.4} grv {:.4} bound {:.4} measured {:.4} {}",
                row.label,
                row.mi_estimate,
                row.grv,
                row.bound.value,
                row.measured_adv_risk.unwrap_or(f64::NAN),
                if row.pass { "ok" } else { "FAIL" }
            );
            bounds.push(row);
        }
    }

    let report = TheoryReport::new(run.hash.clone(), cfg.seed, relations, bounds);
    run.write(THEORY_REPORT_FILE, &report.to_json()?)?;
    Ok(report.pass)
}
