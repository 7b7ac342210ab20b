//! Strongly convex quadratic `F(x) = 1/2 x^T A x - b^T x` with a diagonal,
//! configurable spectrum. Everything about it is analytic: `L = max eig`,
//! `mu = min eig`, `x* = A^{-1} b`, `F* = -1/2 b^T A^{-1} b`.

use super::{Objective, SmoothnessConstants};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    eigs: Vec<f64>,
    b: Vec<f64>,
    constants: SmoothnessConstants,
    x_star: Vec<f64>,
}

impl QuadraticObjective {
    /// `eigs` is the diagonal of `A`; `b` defaults to zero.
    pub fn new(eigs: Vec<f64>, b: Option<Vec<f64>>) -> Result<Self> {
        if eigs.is_empty() {
            return Err(Error::invalid("quadratic needs at least one eigenvalue"));
        }
        if eigs.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid("all eigenvalues must be positive"));
        }
        let b = b.unwrap_or_else(|| vec![0.0; eigs.len()]);
        if b.len() != eigs.len() {
            return Err(Error::DimensionMismatch {
                expected: eigs.len(),
                got: b.len(),
            });
        }
        let l = eigs.iter().cloned().fold(f64::MIN, f64::max);
        let mu = eigs.iter().cloned().fold(f64::MAX, f64::min);
        let x_star: Vec<f64> = b.iter().zip(&eigs).map(|(bi, li)| bi / li).collect();
        let f_star = -0.5
            * b.iter()
                .zip(&eigs)
                .map(|(bi, li)| bi * bi / li)
                .sum::<f64>();
        let constants = SmoothnessConstants::new(l, mu, 0.0, 0.0, Some(f_star))?;
        Ok(QuadraticObjective {
            eigs,
            b,
            constants,
            x_star,
        })
    }

    /// The isotropic unit quadratic `1/2 ||x||^2` in `dim` dimensions.
    pub fn unit(dim: usize) -> Self {
        QuadraticObjective::new(vec![1.0; dim], None).expect("unit quadratic is valid")
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.x_star
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.eigs.len()
    }

    fn n_points(&self) -> usize {
        0
    }

    fn constants(&self) -> &SmoothnessConstants {
        &self.constants
    }

    fn value_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&xi, &li), &bi) in x.iter().zip(&self.eigs).zip(&self.b) {
            acc += 0.5 * li * xi * xi - bi * xi;
        }
        acc
    }

    fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.eigs[k] * x[k] - self.b[k];
        }
    }

    fn accumulate_point_gradient(&self, _i: usize, _x: &[f64], _acc: &mut [f64]) {
        unreachable!("analytic objective has no per-point losses")
    }
}
