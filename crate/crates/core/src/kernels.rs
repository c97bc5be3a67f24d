//! Forward/backward kernels and the central-difference gradient checker.
//!
//! The model is a fixed shallow composition, so each piece gets a hand-written
//! backward pass instead of a general autodiff graph. Every backward kernel
//! here is verified against [`central_difference`].

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::graph::NormalizedPropagator;

pub fn relu_forward(pre: &Array2<f64>) -> Array2<f64> {
    pre.mapv(|v| v.max(0.0))
}

/// Subgradient at exactly zero is taken as zero.
pub fn relu_backward(pre: &Array2<f64>, upstream: &Array2<f64>) -> Result<Array2<f64>> {
    if pre.dim() != upstream.dim() {
        return Err(Error::shape("relu_backward operand shapes differ"));
    }
    let mut out = upstream.clone();
    ndarray::Zip::from(&mut out).and(pre).for_each(|g, &m| {
        if m <= 0.0 {
            *g = 0.0;
        }
    });
    Ok(out)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_forward(x: &Array1<f64>) -> Array1<f64> {
    x.mapv(sigmoid)
}

/// Gradient through a sigmoid given its *output* `y`.
pub fn sigmoid_backward(output: &Array1<f64>, upstream: &Array1<f64>) -> Result<Array1<f64>> {
    if output.len() != upstream.len() {
        return Err(Error::shape("sigmoid_backward operand lengths differ"));
    }
    Ok(output
        .iter()
        .zip(upstream)
        .map(|(&y, &g)| g * y * (1.0 - y))
        .collect())
}

pub fn matmul_forward(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.ncols() != b.nrows() {
        return Err(Error::shape(format!(
            "cannot multiply {:?} by {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.dot(b))
}

/// Returns `(dL/dA, dL/dB)` for `C = A B` given `dL/dC`.
pub fn matmul_backward(
    a: &Array2<f64>,
    b: &Array2<f64>,
    upstream: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if a.ncols() != b.nrows() || upstream.dim() != (a.nrows(), b.ncols()) {
        return Err(Error::shape("matmul_backward operand shapes are inconsistent"));
    }
    Ok((upstream.dot(&b.t()), a.t().dot(upstream)))
}

/// Gradient of a scalar loss w.r.t. every entry of the (relaxed) adjacency `A`
/// given the gradient w.r.t. `P = D^{-1/2}(A+I)D^{-1/2}`.
///
/// Entries of `A` are treated as independent variables; callers that tie
/// `(i, j)` and `(j, i)` together sum the two.
pub fn normalization_backward(
    adjacency: &Array2<f64>,
    propagator: &NormalizedPropagator,
    upstream: &Array2<f64>,
) -> Result<Array2<f64>> {
    let n = adjacency.nrows();
    if upstream.dim() != (n, n) || propagator.matrix.dim() != (n, n) {
        return Err(Error::shape("normalization_backward operand shapes differ"));
    }
    let s = &propagator.inv_sqrt_degree;
    // dL/ds_i = sum_j (G_ij + G_ji) Ahat_ij s_j, then through s = d^{-1/2}.
    let mut d_degree = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            let a_hat = adjacency[[i, j]] + if i == j { 1.0 } else { 0.0 };
            acc += (upstream[[i, j]] + upstream[[j, i]]) * a_hat * s[j];
        }
        d_degree[i] = acc * (-0.5) * s[i].powi(3);
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = upstream[[i, j]] * s[i] * s[j] + d_degree[i];
        }
    }
    Ok(out)
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference<F>(mut f: F, point: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    let mut x = point.to_vec();
    let mut out = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + step;
        let plus = f(&x);
        x[i] = orig - step;
        let minus = f(&x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite function value around coordinate {i}"
            )));
        }
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// Max over coordinates of `|analytic - numeric| / (|numeric| + 1e-8)`.
pub fn grad_check<F>(f: F, analytic: &[f64], point: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if analytic.len() != point.len() {
        return Err(Error::shape("analytic gradient length differs from point"));
    }
    let numeric = central_difference(f, point, step)?;
    Ok(max_relative_error(analytic, &numeric))
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &c)| (a - c).abs() / (c.abs() + 1e-8))
        .fold(0.0, f64::max)
}
