//! Empirical adversarial risk, adversarial gap and representation
//! vulnerability of the linear sign encoder.
//!
//! All functions work on projected draws `u = h Theta` and a radius
//! `R = rho ||Theta||_q`. By Hölder, the worst perturbation of `h` inside the
//! ball shifts `u` by at most `R`, and that shift is attained, so every
//! quantity reduces to counting thresholds on `u`.

use serde::Serialize;

use super::model::Draws;
use crate::error::{Error, Result};

/// `H_b(theta)` in bits with `0 log 0 = 0`.
pub fn binary_entropy(theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("entropy argument must lie in [0, 1], got {theta}")));
    }
    let term = |t: f64| if t > 0.0 { -t * t.log2() } else { 0.0 };
    Ok(term(theta) + term(1.0 - theta))
}

/// Probabilities produced by counting are always in range.
pub(crate) fn hb(theta: f64) -> f64 {
    binary_entropy(theta.clamp(0.0, 1.0)).expect("clamped")
}

/// The two downstream classifiers `f1(z) = z` and `f2(z) = -z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Identity,
    Negation,
}

impl Classifier {
    fn sign(self) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Negation => -1.0,
        }
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius >= 0.0) {
        return Err(Error::invalid(format!("radius must be >= 0, got {radius}")));
    }
    Ok(())
}

/// Fraction of draws whose label can be flipped: `s y u <= R` for the
/// classifier with sign `s`. At `R = 0` this is the plain error rate with
/// ties counted as errors.
pub fn adv_risk(draws: &Draws, classifier: Classifier, radius: f64) -> Result<f64> {
    check_radius(radius)?;
    if draws.is_empty() {
        return Err(Error::invalid("no draws"));
    }
    let s = classifier.sign();
    let hits = draws
        .u
        .iter()
        .zip(&draws.y)
        .filter(|(&u, &y)| s * f64::from(y) * u <= radius)
        .count();
    Ok(hits as f64 / draws.len() as f64)
}

/// The classifier minimizing `AdvRisk_R`, ties to the identity.
pub fn best_classifier(draws: &Draws, radius: f64) -> Result<(Classifier, f64)> {
    let r1 = adv_risk(draws, Classifier::Identity, radius)?;
    let r2 = adv_risk(draws, Classifier::Negation, radius)?;
    Ok(if r2 < r1 {
        (Classifier::Negation, r2)
    } else {
        (Classifier::Identity, r1)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEstimate {
    pub classifier: Classifier,
    pub risk_clean: f64,
    pub risk_adv: f64,
    pub gap: f64,
}

/// `AG = AdvRisk_R(f*) - AdvRisk_0(f*)` with `f*` chosen at radius `R`.
pub fn adversarial_gap(draws: &Draws, radius: f64) -> Result<GapEstimate> {
    let (classifier, risk_adv) = best_classifier(draws, radius)?;
    let risk_clean = adv_risk(draws, classifier, 0.0)?;
    Ok(GapEstimate {
        classifier,
        risk_clean,
        risk_adv,
        gap: risk_adv - risk_clean,
    })
}

fn fraction_at_least(draws: &Draws, t: f64) -> f64 {
    draws.u.iter().filter(|&&u| u >= t).count() as f64 / draws.len() as f64
}

/// `H_b(P[u >= 0]) - min(H_b(P[u >= R]), H_b(P[u >= -R]))`, in bits.
///
/// The adversary biases the sign output as far as it can in one direction;
/// the two extreme shifts bracket every intermediate one, so the smaller of
/// their entropies is the infimum over the ball.
pub fn empirical_grv_linear(draws: &Draws, radius: f64) -> Result<f64> {
    check_radius(radius)?;
    if draws.is_empty() {
        return Err(Error::invalid("no draws"));
    }
    let benign = hb(fraction_at_least(draws, 0.0));
    let up = hb(fraction_at_least(draws, radius));
    let down = hb(fraction_at_least(draws, -radius));
    Ok(benign - up.min(down))
}
