//! Per-point quadratic ensemble: `f_i(x) = 1/2 ||x - c_i||^2`.
//!
//! This is the clean Assumption-2 instance: `L = mu = 1`, `C = 0`, and the
//! additive noise constant is exactly the trace population variance of the
//! centers, `sigma^2 = (1/n) sum ||c_i - c_bar||^2`. The optimum is the
//! center mean with `F* = sigma^2 / 2`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Objective, SmoothnessConstants};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct EnsembleObjective {
    centers: Vec<Vec<f64>>,
    center_mean: Vec<f64>,
    constants: SmoothnessConstants,
    dim: usize,
}

impl EnsembleObjective {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("ensemble needs at least one center"));
        }
        let dim = centers[0].len();
        if dim == 0 {
            return Err(Error::invalid("center dimension must be at least 1"));
        }
        for c in &centers {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
        }
        let n = centers.len() as f64;
        let mut center_mean = vec![0.0; dim];
        for c in &centers {
            crate::vecmath::axpy(1.0, c, &mut center_mean);
        }
        for v in center_mean.iter_mut() {
            *v /= n;
        }
        let sigma_sq = centers
            .iter()
            .map(|c| crate::vecmath::dist_sq(c, &center_mean))
            .sum::<f64>()
            / n;
        let f_star = 0.5 * sigma_sq;
        let constants = SmoothnessConstants::new(1.0, 1.0, 0.0, sigma_sq, Some(f_star))?;
        Ok(EnsembleObjective {
            centers,
            center_mean,
            constants,
            dim,
        })
    }

    /// Centers drawn i.i.d. from `N(0, scale^2 I)`, deterministic per seed.
    pub fn seeded(n: usize, dim: usize, scale: f64, seed: u64) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::invalid("n and dim must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(crate::data::stream_key(seed, 0, 0, 0));
        let centers = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                    .collect()
            })
            .collect();
        EnsembleObjective::new(centers)
    }

    /// The optimum `x* = c_bar`.
    pub fn minimizer(&self) -> &[f64] {
        &self.center_mean
    }
}

impl Objective for EnsembleObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_points(&self) -> usize {
        self.centers.len()
    }

    fn constants(&self) -> &SmoothnessConstants {
        &self.constants
    }

    fn value_unchecked(&self, x: &[f64]) -> f64 {
        // mean over points in ascending index order
        let mut acc = 0.0;
        for c in &self.centers {
            acc += 0.5 * crate::vecmath::dist_sq(x, c);
        }
        acc / self.centers.len() as f64
    }

    fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, (xi, mi)) in out.iter_mut().zip(x.iter().zip(&self.center_mean)) {
            *o = xi - mi;
        }
    }

    fn accumulate_point_gradient(&self, i: usize, x: &[f64], acc: &mut [f64]) {
        let c = &self.centers[i];
        for (a, (xi, ci)) in acc.iter_mut().zip(x.iter().zip(c)) {
            *a += xi - ci;
        }
    }
}
