//! Loss functions with exact value/gradient oracles and declared constants.
//!
//! Every objective is the mean of per-point losses over its dataset (or a
//! purely analytic function when `n_points() == 0`), is deterministic, and
//! declares the `(L, mu, C, sigma_sq, F*)` constants the convergence theory
//! consumes. Gradients are hand-derived per objective and verified against
//! finite differences in the tests.

mod ensemble;
mod estimate;
mod logistic;
mod pl_sine;
mod quadratic;

pub use ensemble::EnsembleObjective;
pub use estimate::estimate_constants;
pub use logistic::LogisticObjective;
pub use pl_sine::PlSineObjective;
pub use quadratic::QuadraticObjective;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Declared smoothness / PL / gradient-noise constants.
///
/// `L` is the smoothness constant, `mu` the PL constant, and `(c, sigma_sq)`
/// the relative and additive gradient-variance coefficients of
/// `E||g~ - g||^2 <= C ||g||^2 + sigma^2 / B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    pub l: f64,
    pub mu: f64,
    pub c: f64,
    pub sigma_sq: f64,
    pub f_star: Option<f64>,
}

impl SmoothnessConstants {
    pub fn new(l: f64, mu: f64, c: f64, sigma_sq: f64, f_star: Option<f64>) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::invalid("mu must be positive"));
        }
        if l < mu {
            return Err(Error::invalid(format!(
                "L = {l} must be at least mu = {mu} (condition number >= 1)"
            )));
        }
        if c < 0.0 || sigma_sq < 0.0 {
            return Err(Error::invalid("C and sigma_sq must be nonnegative"));
        }
        Ok(SmoothnessConstants {
            l,
            mu,
            c,
            sigma_sq,
            f_star,
        })
    }

    /// Condition number `kappa = L / mu`.
    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }
}

/// An evaluable loss with exact value and gradient oracles.
///
/// All methods are pure with respect to the objective (read-only after
/// construction), so concurrent evaluation from multiple workers is safe.
pub trait Objective: Send + Sync {
    /// Parameter dimension `d`.
    fn dim(&self) -> usize;

    /// Number of data points backing the objective; 0 for purely analytic
    /// objectives (whose stochastic gradient coincides with the full one).
    fn n_points(&self) -> usize;

    fn constants(&self) -> &SmoothnessConstants;

    /// `F(x)`: mean loss over all data points, or the analytic value.
    /// The slice length is validated by the caller ([`value`]).
    fn value_unchecked(&self, x: &[f64]) -> f64;

    /// Writes the full gradient into `out`.
    fn full_gradient_into(&self, x: &[f64], out: &mut [f64]);

    /// Adds the gradient of the `i`-th per-point loss to `acc`.
    /// Unused (and unimplemented) for analytic objectives.
    fn accumulate_point_gradient(&self, i: usize, x: &[f64], acc: &mut [f64]);
}

fn check_dim(obj: &dyn Objective, x: &[f64]) -> Result<()> {
    if x.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `F(x)`.
pub fn value(obj: &dyn Objective, x: &[f64]) -> Result<f64> {
    check_dim(obj, x)?;
    Ok(obj.value_unchecked(x))
}

/// `F(x) - F*` when `F*` is declared, else `F(x)`.
pub fn gap(obj: &dyn Objective, x: &[f64]) -> Result<f64> {
    let v = value(obj, x)?;
    Ok(match obj.constants().f_star {
        Some(fs) => v - fs,
        None => v,
    })
}

/// Full gradient of `F` at `x`.
pub fn full_gradient(obj: &dyn Objective, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(obj, x)?;
    let mut out = vec![0.0; obj.dim()];
    obj.full_gradient_into(x, &mut out);
    Ok(out)
}

/// Mini-batch stochastic gradient `(1/B) sum_{i in batch} grad f_i(x)`.
///
/// Per-point gradients accumulate in ascending index order regardless of the
/// order the batch was drawn in, so the result is bit-reproducible.
pub fn stochastic_gradient(obj: &dyn Objective, x: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
    check_dim(obj, x)?;
    let mut out = vec![0.0; obj.dim()];
    stochastic_gradient_into(obj, x, batch, &mut out)?;
    Ok(out)
}

pub fn stochastic_gradient_into(
    obj: &dyn Objective,
    x: &[f64],
    batch: &[usize],
    out: &mut [f64],
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if obj.n_points() == 0 {
        // Analytic objective: every "sample" is the exact gradient.
        obj.full_gradient_into(x, out);
        return Ok(());
    }
    for &i in batch {
        if i >= obj.n_points() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: obj.n_points(),
            });
        }
    }
    let mut sorted: Vec<usize> = batch.to_vec();
    sorted.sort_unstable();
    out.fill(0.0);
    for &i in &sorted {
        obj.accumulate_point_gradient(i, x, out);
    }
    let inv_b = 1.0 / batch.len() as f64;
    for v in out.iter_mut() {
        *v *= inv_b;
    }
    Ok(())
}
