//! Evaluation protocol glue: perturb a graph with a chosen attack, encode it
//! with a frozen encoder and score the downstream tasks over seeded trials.
//!
//! Trial `s` draws all of its randomness from substreams
//! `eval:<task>:<s>:*` of the root seed, so trials are independent and can
//! run in parallel.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};

use crate::attack::{worst_case_attack, AttackBudget};
use crate::downstream::{
    centrality_attack, community_detection, link_prediction, logistic_regression_fit, node_classification,
    run_trials, CentralityKind, ProbeOptions, SplitSpec,
};
use crate::encoder::{encode, EncoderParams};
use crate::error::{Error, Result};
use crate::graph::{flip_distance, Graph};
use crate::io::link_split;
use crate::objective::negative_sample;
use crate::rng::substream;
use crate::theory::BoundRow;

/// Perturbation applied before encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    None,
    /// Worst-case mutual-information attack (topology then attributes).
    MiPgd,
    Centrality(CentralityKind),
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "mi-pgd" => Ok(Self::MiPgd),
            other => other.parse().map(Self::Centrality).map_err(|_| {
                Error::invalid(format!(
                    "unknown attack {other:?} (expected none, mi-pgd, degree, betw or eigen)"
                ))
            }),
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::MiPgd => f.write_str("mi-pgd"),
            Self::Centrality(kind) => write!(f, "{kind}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub graph: Graph,
    pub flips_used: usize,
    pub feat_linf_used: f64,
    /// Vulnerability achieved by the MI attack (absent for other attacks).
    pub grv: Option<f64>,
}

/// Applies `kind` to `graph`. Centrality attacks only use `budget.delta`.
pub fn perturb(
    graph: &Graph,
    params: &EncoderParams,
    kind: AttackKind,
    budget: &AttackBudget,
    seed: u64,
) -> Result<Perturbation> {
    match kind {
        AttackKind::None => Ok(Perturbation {
            graph: graph.clone(),
            flips_used: 0,
            feat_linf_used: 0.0,
            grv: None,
        }),
        AttackKind::MiPgd => {
            let neg = negative_sample(graph, substream(seed, "negative"))?;
            let result = worst_case_attack(graph, params, &neg, budget, substream(seed, "pgd"))?;
            Ok(Perturbation {
                grv: Some(result.grv()),
                flips_used: result.flips_used,
                feat_linf_used: result.feat_linf_used,
                graph: result.perturbed,
            })
        }
        AttackKind::Centrality(c) => {
            let attacked = centrality_attack(graph, budget.delta, c)?;
            Ok(Perturbation {
                flips_used: flip_distance(graph.adjacency(), attacked.adjacency())?,
                feat_linf_used: 0.0,
                grv: None,
                graph: attacked,
            })
        }
    }
}

pub fn embed(graph: &Graph, params: &EncoderParams) -> Result<Array2<f64>> {
    Ok(encode(graph, params)?.z)
}

/// How classification splits are chosen per trial.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitPolicy {
    /// The same split in every trial.
    Fixed(SplitSpec),
    /// A fresh class-stratified split per trial.
    Stratified { train_frac: f64, test_frac: f64 },
}

impl SplitPolicy {
    fn for_trial(&self, labels: &[usize], seed: u64) -> Result<SplitSpec> {
        match self {
            Self::Fixed(s) => Ok(s.clone()),
            Self::Stratified {
                train_frac,
                test_frac,
            } => SplitSpec::stratified(labels, *train_frac, *test_frac, seed),
        }
    }
}

/// Everything a task evaluation needs besides the graph and encoder.
#[derive(Debug, Clone)]
pub struct EvalProtocol {
    pub attack: AttackKind,
    pub budget: AttackBudget,
    pub probe: ProbeOptions,
    pub split: SplitPolicy,
    /// Fraction of edges held out for link prediction.
    pub link_fraction: f64,
    pub root_seed: u64,
    pub seeds: Vec<u64>,
}

fn trial_seed(root: u64, task: &str, trial: u64, part: &str) -> u64 {
    substream(root, &format!("eval:{task}:{trial}:{part}"))
}

/// Post-attack node-classification accuracy per trial.
pub fn eval_node_classification(
    graph: &Graph,
    labels: &[usize],
    params: &EncoderParams,
    protocol: &EvalProtocol,
) -> Result<Vec<f64>> {
    let root = protocol.root_seed;
    run_trials(&protocol.seeds, |s| {
        let attacked = perturb(graph, params, protocol.attack, &protocol.budget, trial_seed(root, "nodecls", s, "attack"))?;
        let z = embed(&attacked.graph, params)?;
        let split = protocol.split.for_trial(labels, trial_seed(root, "nodecls", s, "split"))?;
        node_classification(&z, labels, &split, &protocol.probe, trial_seed(root, "nodecls", s, "probe"))
    })
}

/// Link-prediction AUC per trial. Links are held out first; the attack then
/// acts on the training graph.
pub fn eval_link_prediction(graph: &Graph, params: &EncoderParams, protocol: &EvalProtocol) -> Result<Vec<f64>> {
    let root = protocol.root_seed;
    run_trials(&protocol.seeds, |s| {
        let mut split = link_split(graph, protocol.link_fraction, trial_seed(root, "link", s, "split"))?;
        let attacked = perturb(
            &split.train_graph,
            params,
            protocol.attack,
            &protocol.budget,
            trial_seed(root, "link", s, "attack"),
        )?;
        let z = embed(&attacked.graph, params)?;
        split.train_graph = attacked.graph;
        link_prediction(&z, &split, &protocol.probe, trial_seed(root, "link", s, "probe"))
    })
}

/// Community-detection NMI per trial with `k` equal to the number of classes.
pub fn eval_community_detection(
    graph: &Graph,
    labels: &[usize],
    params: &EncoderParams,
    protocol: &EvalProtocol,
) -> Result<Vec<f64>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let root = protocol.root_seed;
    run_trials(&protocol.seeds, |s| {
        let attacked = perturb(graph, params, protocol.attack, &protocol.budget, trial_seed(root, "community", s, "attack"))?;
        let z = embed(&attacked.graph, params)?;
        community_detection(&z, labels, k, trial_seed(root, "community", s, "kmeans"))
    })
}

/// Clean and adversarial risk of a probe fitted on clean embeddings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    /// Test error on clean embeddings.
    pub clean: f64,
    /// Fraction of test nodes misclassified on the clean or the attacked
    /// embeddings (the clean input is inside every perturbation ball).
    pub adversarial: f64,
}

/// Empirical adversarial risk of `probe ∘ encoder` under one attack.
///
/// The attack only certifies a lower estimate of the true worst case.
pub fn adversarial_risk(
    graph: &Graph,
    attacked: &Graph,
    labels: &[usize],
    split: &SplitSpec,
    params: &EncoderParams,
    probe: &ProbeOptions,
    seed: u64,
) -> Result<RiskEstimate> {
    let clean_z = embed(graph, params)?;
    let attacked_z = embed(attacked, params)?;
    let (clean_z, attacked_z) = if probe.standardize {
        let sub = clean_z.select(Axis(0), &split.train);
        let mean = sub.mean_axis(Axis(0)).expect("non-empty split");
        let std = sub.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        ((&clean_z - &mean) / &std, (&attacked_z - &mean) / &std)
    } else {
        (clean_z, attacked_z)
    };
    let train_labels: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    let model = logistic_regression_fit(
        clean_z.select(Axis(0), &split.train).view(),
        &train_labels,
        probe.lr,
        probe.epochs,
        seed,
    )?;
    let clean_pred = model.predict(clean_z.select(Axis(0), &split.test).view())?;
    let adv_pred = model.predict(attacked_z.select(Axis(0), &split.test).view())?;
    let mut clean_wrong = 0;
    let mut any_wrong = 0;
    for (k, &i) in split.test.iter().enumerate() {
        let c = clean_pred[k] != labels[i];
        clean_wrong += usize::from(c);
        any_wrong += usize::from(c || adv_pred[k] != labels[i]);
    }
    let t = split.test.len() as f64;
    Ok(RiskEstimate {
        clean: clean_wrong as f64 / t,
        adversarial: any_wrong as f64 / t,
    })
}

/// The mutual-information proxy `l_enc + ln 4`, floored at zero.
///
/// `l_enc + ln 4` vanishes for an uninformative critic and an attack can push
/// it below zero, which no mutual information can reach, so the estimate is
/// projected back onto `[0, ln 4]`.
pub fn mi_proxy(l_enc: f64) -> f64 {
    (l_enc + 4f64.ln()).max(0.0)
}

/// Measures the adversarial risk of a trained encoder under the MI attack and
/// sets it beside the information-theoretic lower bound computed from the
/// same attack's MI proxy and vulnerability.
#[allow(clippy::too_many_arguments)]
pub fn risk_bound_row(
    label: &str,
    graph: &Graph,
    labels: &[usize],
    split: &SplitSpec,
    params: &EncoderParams,
    budget: &AttackBudget,
    probe: &ProbeOptions,
    seed: u64,
) -> Result<(BoundRow, RiskEstimate)> {
    let neg = negative_sample(graph, substream(seed, "bound:negative"))?;
    let attack = worst_case_attack(graph, params, &neg, budget, substream(seed, "bound:attack"))?;
    let risk = adversarial_risk(graph, &attack.perturbed, labels, split, params, probe, substream(seed, "bound:probe"))?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mi = mi_proxy(attack.benign_objective);
    let grv = mi - mi_proxy(attack.objective);
    let row = BoundRow::new(label, mi, grv, classes, Some(risk.adversarial))?;
    Ok((row, risk))
}
