//! Normal-approximation predictions for the projected aggregate.
//!
//! The number of selected neighbours `r ~ B(n, pi)` is replaced by its
//! De Moivre–Laplace normal limit and the conditional Gaussian tail of `u`
//! is integrated against it with Simpson's rule.

use statrs::function::erf::erfc;

use super::model::{LinearEncoderHypothesis, ModelKind, SyntheticModel};
use super::risk::hb;
use crate::error::Result;

/// Odd number of Simpson nodes.
const NODES: usize = 4001;
/// Integration window in standard deviations of `r`.
const WINDOW: f64 = 10.0;

fn normal_sf(t: f64, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return if mean >= t { 1.0 } else { 0.0 };
    }
    0.5 * erfc((t - mean) / (sd * std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// `E_r[g(r)]` for `r ~ N(n pi, n pi (1 - pi))` truncated to `r > 0` and
/// renormalized.
fn expect_over_count(n: f64, pi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mean = n * pi;
    let sd = (n * pi * (1.0 - pi)).sqrt();
    let lo = (mean - WINDOW * sd).max(0.0);
    let hi = mean + WINDOW * sd;
    let h = (hi - lo) / (NODES - 1) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..NODES {
        let w = if k == 0 || k == NODES - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let r = lo + h * k as f64;
        let density = normal_pdf(r, mean, sd);
        num += w * density * g(r);
        den += w * density;
    }
    num / den
}

/// `P[u >= t | y]` under the normal approximation.
pub fn conditional_tail(model: &SyntheticModel, hypothesis: &LinearEncoderHypothesis, y: i8, t: f64) -> f64 {
    let n = model.n as f64;
    let yf = f64::from(y);
    let theta = hypothesis.theta();
    let m: f64 = theta.iter().zip(&model.mu).map(|(a, b)| a * b).sum();
    let sigma = model.sigma;
    match model.kind {
        ModelKind::TopologyAware => {
            let pi = 0.5 + yf * (model.p - 0.5);
            expect_over_count(n, pi, |r| normal_sf(t, 0.0, sigma * r.sqrt()))
        }
        ModelKind::AttributeAware => expect_over_count(n, 0.5, |r| normal_sf(t, yf * r * m, sigma * r.sqrt())),
        ModelKind::TopologyAwareSimple => {
            // u = (r - n/2) s, with a half-unit continuity correction on r
            let s: f64 = theta.iter().sum();
            let pi = 0.5 + yf * (model.p - 0.5);
            let (mean, sd) = (n * pi, (n * pi * (1.0 - pi)).sqrt());
            if s == 0.0 {
                return if t <= 0.0 { 1.0 } else { 0.0 };
            }
            let cut = 0.5 * n + t / s;
            let above = normal_sf(cut.ceil() - 0.5, mean, sd);
            if s > 0.0 {
                above
            } else {
                // u >= t  <=>  r <= cut
                1.0 - normal_sf(cut.floor() + 0.5, mean, sd)
            }
        }
        ModelKind::AttributeAwareSimple => {
            let (n0, n1) = model.simple_counts(y);
            normal_sf(t, (n0 as f64 - n1 as f64) * m, sigma * ((n0 + n1) as f64).sqrt())
        }
    }
}

/// Closed-form counterparts of the Monte-Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ClosedForm {
    /// `P[u >= R]` and `P[u >= -R]` with labels marginalized.
    pub tail_up: f64,
    pub tail_down: f64,
    pub risk_identity: f64,
    pub risk_negation: f64,
    pub gap: f64,
    pub grv: f64,
}

pub fn closed_form(model: &SyntheticModel, hypothesis: &LinearEncoderHypothesis, radius: f64) -> Result<ClosedForm> {
    model.validate()?;
    let tail = |y: i8, t: f64| conditional_tail(model, hypothesis, y, t);
    let marginal = |t: f64| 0.5 * (tail(1, t) + tail(-1, t));
    let risks = |r: f64| {
        // f1 fails when y u <= r, f2 when -y u <= r
        let f1 = 0.5 * (1.0 - tail(1, r)) + 0.5 * tail(-1, -r);
        let f2 = 0.5 * tail(1, -r) + 0.5 * (1.0 - tail(-1, r));
        (f1, f2)
    };
    let (risk_identity, risk_negation) = risks(radius);
    let (clean1, clean2) = risks(0.0);
    let gap = if risk_negation < risk_identity {
        risk_negation - clean2
    } else {
        risk_identity - clean1
    };
    let (tail_up, tail_down) = (marginal(radius), marginal(-radius));
    let grv = hb(marginal(0.0)) - hb(tail_up).min(hb(tail_down));
    Ok(ClosedForm {
        tail_up,
        tail_down,
        risk_identity,
        risk_negation,
        gap,
        grv,
    })
}
