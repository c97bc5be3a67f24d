//! Monte-Carlo checks of the relation between representation vulnerability
//! and adversarial gap for the linear sign encoder, plus the information
//! theoretic lower bound on downstream adversarial risk.
//!
//! Entropies in the relation checks are in bits. The lower bound uses
//! natural logarithms throughout.

mod closed;
mod model;
mod risk;

pub use closed::{closed_form, conditional_tail, ClosedForm};
pub use model::{
    aggregate, generate, project, sample_projected, Draws, LinearEncoderHypothesis, ModelKind, Sample,
    SyntheticModel, CHUNK,
};
pub use risk::{
    adv_risk, adversarial_gap, best_classifier, binary_entropy, empirical_grv_linear, Classifier, GapEstimate,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::substream;
use risk::hb;

/// Tolerance on `|GRV - prediction|` for the non-simple kinds.
pub const RELATION_TOL: f64 = 0.05;
/// Slack on each side of the sandwich for the simple kinds, covering the
/// Monte-Carlo error of an entropy difference at about 10^5 samples.
pub const SANDWICH_SLACK: f64 = 0.01;

/// Outcome of one relation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationReport {
    pub kind: ModelKind,
    pub n: usize,
    pub p: f64,
    pub sigma: f64,
    pub rho: f64,
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    pub classifier: Classifier,
    pub risk_clean: f64,
    pub risk_adv: f64,
    pub ag_mc: f64,
    pub grv_mc: f64,
    /// `1 - H_b(0.5 + AG)` for topology kinds, `1 - H_b(0.5 - AG)` otherwise.
    pub predicted_grv: f64,
    /// The other sign convention; equal to `predicted_grv` by symmetry.
    pub predicted_grv_alt: f64,
    /// `1 - H_b(0.5 - AG/2)`, the lower end of the sandwich.
    pub sandwich_lower: f64,
    /// Distance from the prediction, or from the sandwich for simple kinds.
    pub abs_gap: f64,
    pub tolerance: f64,
    pub closed: ClosedForm,
    pub pass: bool,
}

/// Compares the Monte-Carlo GRV with its prediction from the Monte-Carlo AG.
pub fn check_theorem_relation(
    model: &SyntheticModel,
    hypothesis: &LinearEncoderHypothesis,
    rho: f64,
    samples: usize,
    seed: u64,
) -> Result<RelationReport> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho must be finite and >= 0, got {rho}")));
    }
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let radius = hypothesis.radius(rho, model.ball_norm);
    let draws = sample_projected(model, hypothesis, samples, seed)?;
    let gap = adversarial_gap(&draws, radius)?;
    let ag = gap.gap;
    let grv_mc = empirical_grv_linear(&draws, radius)?;
    let plus = 1.0 - hb(0.5 + ag);
    let minus = 1.0 - hb(0.5 - ag);
    if (plus - minus).abs() > 1e-12 {
        return Err(Error::numerical(format!("entropy sign forms disagree: {plus} vs {minus}")));
    }
    let (predicted_grv, predicted_grv_alt) = if model.kind.is_topology() { (plus, minus) } else { (minus, plus) };
    let sandwich_lower = 1.0 - hb(0.5 - 0.5 * ag);
    let (abs_gap, tolerance) = if model.kind.is_simple() {
        let below = (sandwich_lower - grv_mc).max(0.0);
        let above = (grv_mc - predicted_grv).max(0.0);
        (below.max(above), SANDWICH_SLACK)
    } else {
        ((grv_mc - predicted_grv).abs(), RELATION_TOL)
    };
    Ok(RelationReport {
        kind: model.kind,
        n: model.n,
        p: model.p,
        sigma: model.sigma,
        rho,
        radius,
        samples,
        seed,
        classifier: gap.classifier,
        risk_clean: gap.risk_clean,
        risk_adv: gap.risk_adv,
        ag_mc: ag,
        grv_mc,
        predicted_grv,
        predicted_grv_alt,
        sandwich_lower,
        abs_gap,
        tolerance,
        closed: closed_form(model, hypothesis, radius)?,
        pass: abs_gap <= tolerance,
    })
}

/// Finds `rho` with Monte-Carlo `AG` close to `target` by bisection on draws
/// from an independent `"tune"` substream, so the reported check does not
/// reuse the samples it was tuned on.
pub fn tune_rho(
    model: &SyntheticModel,
    hypothesis: &LinearEncoderHypothesis,
    target: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(target > 0.0 && target < 0.5) {
        return Err(Error::invalid(format!("target gap must lie in (0, 0.5), got {target}")));
    }
    let draws = sample_projected(model, hypothesis, samples, substream(seed, "tune"))?;
    let scale = hypothesis.radius(1.0, model.ball_norm);
    let ag = |rho: f64| adversarial_gap(&draws, rho * scale).map(|g| g.gap);
    let mut hi = 1.0;
    while ag(hi)? < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::numerical("adversarial gap never reaches the target"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ag(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBound {
    /// `1 - (mi - grv + ln 2) / ln |Y|` before clamping.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub value: f64,
    /// Set when `raw > 1`, i.e. the premise exceeded what the bound can express.
    pub exceeds_one: bool,
}

/// Lower bound on the adversarial risk of every downstream classifier.
/// With two classes and `grv = 0` it is vacuous for any `mi >= 0`.
pub fn theorem3_bound(mi_estimate: f64, grv: f64, num_classes: usize) -> Result<LowerBound> {
    if num_classes < 2 {
        return Err(Error::invalid(format!("need at least two classes, got {num_classes}")));
    }
    if !mi_estimate.is_finite() || !grv.is_finite() {
        return Err(Error::numerical("bound inputs must be finite"));
    }
    let raw = 1.0 - (mi_estimate - grv + std::f64::consts::LN_2) / (num_classes as f64).ln();
    Ok(LowerBound {
        raw,
        value: raw.clamp(0.0, 1.0),
        exceeds_one: raw > 1.0,
    })
}

/// A set of relation checks serialized as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub config_hash: String,
    pub seed: u64,
    pub relations: Vec<RelationReport>,
    pub bounds: Vec<BoundRow>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub label: String,
    pub mi_estimate: f64,
    pub grv: f64,
    pub num_classes: usize,
    pub bound: LowerBound,
    pub measured_adv_risk: Option<f64>,
    pub pass: bool,
}

impl TheoryReport {
    pub fn new(config_hash: impl Into<String>, seed: u64, relations: Vec<RelationReport>, bounds: Vec<BoundRow>) -> Self {
        let pass = relations.iter().all(|r| r.pass) && bounds.iter().all(|b| b.pass);
        Self {
            config_hash: config_hash.into(),
            seed,
            relations,
            bounds,
            pass,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::invalid(format!("cannot serialize theory report: {e}")))
    }
}

impl BoundRow {
    pub fn new(
        label: impl Into<String>,
        mi_estimate: f64,
        grv: f64,
        num_classes: usize,
        measured_adv_risk: Option<f64>,
    ) -> Result<Self> {
        let bound = theorem3_bound(mi_estimate, grv, num_classes)?;
        let pass = measured_adv_risk.is_none_or(|m| m >= bound.value);
        Ok(Self {
            label: label.into(),
            mi_estimate,
            grv,
            num_classes,
            bound,
            measured_adv_risk,
            pass,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(c: usize) -> LinearEncoderHypothesis {
        let mut d = vec![0.0; c];
        d[0] = 1.0;
        LinearEncoderHypothesis::new(d).unwrap()
    }

    #[test]
    fn zero_radius_is_exact() {
        let model = SyntheticModel::topology_aware(200, 2, 0.7, 1.0);
        let r = check_theorem_relation(&model, &unit(2), 0.0, 10_000, 1).unwrap();
        assert_eq!((r.ag_mc, r.grv_mc, r.predicted_grv, r.abs_gap), (0.0, 0.0, 0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn bound_cases() {
        let b = theorem3_bound(4f64.ln() - 2f64.ln(), 0.0, 4).unwrap();
        assert!(b.value.abs() < 1e-15 && !b.exceeds_one);
        let b = theorem3_bound(0.1, 2.0, 4).unwrap();
        assert!(b.exceeds_one && b.value == 1.0);
        for mi in [0.0, 0.3, 5.0] {
            assert_eq!(theorem3_bound(mi, 0.0, 2).unwrap().value, 0.0);
        }
        assert!(theorem3_bound(0.0, 0.0, 1).is_err());
        assert!(theorem3_bound(f64::NAN, 0.0, 3).is_err());
    }

    #[test]
    fn tuned_rho_hits_the_target() {
        let model = SyntheticModel::topology_aware(1000, 2, 0.7, 1.0);
        let hyp = unit(2);
        let rho = tune_rho(&model, &hyp, 0.1, 50_000, 3).unwrap();
        let r = check_theorem_relation(&model, &hyp, rho, 50_000, 4).unwrap();
        assert!((r.ag_mc - 0.1).abs() < 0.02, "{}", r.ag_mc);
    }

    fn relation_cases() -> Vec<(SyntheticModel, f64)> {
        let topo = |p: f64, sigma: f64| SyntheticModel::topology_aware(1000, 2, p, sigma);
        let attr = |mu: Vec<f64>| SyntheticModel::attribute_aware(1000, mu, 1.0);
        let simple_topo = |p: f64| SyntheticModel {
            kind: ModelKind::TopologyAwareSimple,
            ..topo(p, 1.0)
        };
        let simple_attr = |p: f64, mu: f64| SyntheticModel {
            kind: ModelKind::AttributeAwareSimple,
            p,
            ..attr(vec![mu, 0.0])
        };
        vec![
            (topo(0.7, 1.0), 0.1),
            (topo(0.7, 1.0), 0.06),
            (topo(0.6, 2.0), 0.14),
            (attr(vec![1.0, 0.0]), 0.1),
            (attr(vec![1.0, 0.0]), 0.06),
            (attr(vec![0.05, 0.05]), 0.14),
            (simple_topo(0.7), 0.1),
            (simple_topo(0.55), 0.06),
            (simple_topo(0.6), 0.14),
            (simple_attr(300.0, 0.01), 0.1),
            (simple_attr(260.0, 0.02), 0.06),
            (simple_attr(350.0, 0.005), 0.14),
        ]
    }

    #[test]
    fn relations_hold_across_settings() {
        let hyp = LinearEncoderHypothesis::from_direction(&[1.0, 1.0]).unwrap();
        for (i, (model, target)) in relation_cases().into_iter().enumerate() {
            let rho = tune_rho(&model, &hyp, target, 100_000, i as u64).unwrap();
            let r = check_theorem_relation(&model, &hyp, rho, 100_000, 100 + i as u64).unwrap();
            assert!(
                r.pass,
                "{} target {target}: ag {} grv {} predicted {} lower {}",
                model.kind, r.ag_mc, r.grv_mc, r.predicted_grv, r.sandwich_lower
            );
        }
    }

    /// Each fourfold increase in samples halves the spread of `grv_mc` across
    /// independent replicates, up to the sampling error of the spread itself.
    #[test]
    fn monte_carlo_error_shrinks_with_samples() {
        let model = SyntheticModel::topology_aware(200, 2, 0.7, 1.0);
        let hyp = unit(2);
        let radius = 1.5;
        let spread = |samples: usize| {
            let v: Vec<f64> = (0..40)
                .map(|k| {
                    let d = sample_projected(&model, &hyp, samples, 1000 + k).unwrap();
                    empirical_grv_linear(&d, radius).unwrap()
                })
                .collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        let (small, large) = (spread(2_000), spread(8_000));
        let ratio = small / large;
        assert!((1.4..=2.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn report_serializes_every_estimate() {
        let model = SyntheticModel::topology_aware(100, 2, 0.7, 1.0);
        let r = check_theorem_relation(&model, &unit(2), 0.5, 1000, 9).unwrap();
        let b = BoundRow::new("toy", 0.2, 0.01, 4, Some(0.4)).unwrap();
        let json = TheoryReport::new("abc", 9, vec![r], vec![b]).to_json().unwrap();
        for key in ["\"grv_mc\"", "\"ag_mc\"", "\"predicted_grv\"", "\"samples\"", "\"seed\"", "\"closed\"", "\"config_hash\""] {
            assert!(json.contains(key), "{key}");
        }
    }
}
