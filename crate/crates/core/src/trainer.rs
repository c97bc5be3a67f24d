//! Soft-margin robust training.
//!
//! Each epoch finds the worst-case perturbation, measures the vulnerability
//! `grv = l_enc(benign) - l_enc(attacked)`, and then takes one Adam ascent
//! step on `l_enc` of the attacked graph when `grv > gamma`, or of the benign
//! graph otherwise.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::attack::{worst_case_attack, AttackBudget};
use crate::encoder::{init_params, EncoderParams, DEFAULT_HIDDEN};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::objective::{mi_estimate, mi_gradients, negative_sample};
use crate::rng::substream;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    /// Soft margin on the vulnerability.
    pub gamma: f64,
    /// Trade-off weight. Only `1.0` is supported; kept for reporting.
    pub beta: f64,
    pub budget: AttackBudget,
    pub learning_rate: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            gamma: 5e-3,
            beta: 1.0,
            budget: AttackBudget::zero(),
            learning_rate: 1e-3,
            patience: 20,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.beta != 1.0 {
            return Err(Error::invalid("only beta = 1 is supported"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden dimension must be >= 1"));
        }
        if graph.num_nodes() < 2 {
            return Err(Error::invalid("training needs at least two nodes"));
        }
        self.budget.validate(graph.num_nodes())
    }
}

/// Adam moments for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub first: Array2<f64>,
    pub second: Array2<f64>,
}

impl Moments {
    pub fn zeros(shape: (usize, usize)) -> Self {
        Self {
            first: Array2::zeros(shape),
            second: Array2::zeros(shape),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub theta: Moments,
    pub phi: Moments,
    pub timestep: u64,
}

impl AdamState {
    pub fn new(params: &EncoderParams) -> Self {
        Self {
            theta: Moments::zeros(params.theta.dim()),
            phi: Moments::zeros(params.phi.dim()),
            timestep: 0,
        }
    }
}

/// One bias-corrected Adam update of a single tensor at timestep `t` (1-based).
pub fn adam_update(param: &mut Array2<f64>, grad: &Array2<f64>, moments: &mut Moments, t: u64, lr: f64) {
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    ndarray::Zip::from(param)
        .and(grad)
        .and(&mut moments.first)
        .and(&mut moments.second)
        .for_each(|p, &g, m, v| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        });
}

/// Descends `grad_theta`/`grad_phi` (pass negated gradients to ascend).
pub fn adam_step(
    params: &mut EncoderParams,
    grad_theta: &Array2<f64>,
    grad_phi: &Array2<f64>,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if grad_theta.dim() != params.theta.dim() || grad_phi.dim() != params.phi.dim() {
        return Err(Error::shape("gradient shapes differ from parameters"));
    }
    state.timestep += 1;
    let t = state.timestep;
    adam_update(&mut params.theta, grad_theta, &mut state.theta, t, lr);
    adam_update(&mut params.phi, grad_phi, &mut state.phi, t, lr);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Benign,
    Adversarial,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Benign => "benign",
            Branch::Adversarial => "adversarial",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_benign: f64,
    pub l_adv: f64,
    pub grv: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl TrainLog {
    /// `epoch,l_benign,l_adv,grv,branch`, preceded by `# key=value` comment lines.
    pub fn to_csv(&self, comments: &[(&str, String)]) -> String {
        let mut out = String::new();
        for (k, v) in comments {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("epoch,l_benign,l_adv,grv,branch\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch,
                r.l_benign,
                r.l_adv,
                r.grv,
                r.branch.as_str()
            );
        }
        out
    }
}

/// Trains from a fresh Xavier initialization derived from `config.seed`.
pub fn train(graph: &Graph, config: &TrainConfig) -> Result<(EncoderParams, TrainLog)> {
    config.validate(graph)?;
    let params = init_params(graph.num_attributes(), config.hidden, substream(config.seed, "train:init"))?;
    train_from(graph, config, params)
}

/// Trains starting from the given parameters.
pub fn train_from(
    graph: &Graph,
    config: &TrainConfig,
    mut params: EncoderParams,
) -> Result<(EncoderParams, TrainLog)> {
    config.validate(graph)?;
    params.check_input(graph)?;
    let mut adam = AdamState::new(&params);
    let mut log = TrainLog::default();
    let mut best = f64::NEG_INFINITY;
    let mut since_best = 0;

    for epoch in 0..config.max_epochs {
        let neg = negative_sample(graph, substream(config.seed, &format!("train:negative:{epoch}")))?;
        let attack = worst_case_attack(
            graph,
            &params,
            &neg,
            &config.budget,
            substream(config.seed, &format!("train:attack:{epoch}")),
        )?;
        let grv = attack.grv();
        let branch = if grv > config.gamma {
            Branch::Adversarial
        } else {
            Branch::Benign
        };
        let target = match branch {
            Branch::Adversarial => &attack.perturbed,
            Branch::Benign => graph,
        };
        let (value, tape) = mi_estimate(target, &params, &neg)?;
        if !value.is_finite() || !attack.benign_objective.is_finite() {
            return Err(Error::numerical(format!("non-finite objective at epoch {epoch}")));
        }
        let grads = mi_gradients(&params, &neg, &tape)?;
        // ascend l_enc
        adam_step(&mut params, &(-&grads.theta), &(-&grads.phi), &mut adam, config.learning_rate)?;
        if params.theta.iter().chain(params.phi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("parameters diverged at epoch {epoch}")));
        }

        log.records.push(EpochRecord {
            epoch,
            l_benign: attack.benign_objective,
            l_adv: attack.objective,
            grv,
            branch,
        });

        if attack.benign_objective > best {
            best = attack.benign_objective;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((params, log))
}
