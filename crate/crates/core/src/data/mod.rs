//! Datasets and deterministic mini-batch sampling.

mod libsvm;
mod sampler;
mod synthetic;

pub use libsvm::{load_libsvm, save_libsvm};
pub use sampler::{stream_key, SamplerStream};
pub use synthetic::generate_synthetic_logistic;

use crate::{Error, Result};

/// Feature storage. Synthetic data is dense; LIBSVM data stays sparse.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    /// Row-major `n x dim`.
    Dense(Vec<Vec<f64>>),
    /// Per-row `(index, value)` pairs, 0-based, strictly increasing index.
    Sparse(Vec<Vec<(u32, f64)>>),
}

/// An in-memory dataset: `n` examples of dimension `dim` with labels in
/// {-1, +1} (or arbitrary reals).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    dim: usize,
    features: Features,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, features: Features, labels: Vec<f64>) -> Result<Self> {
        let n = match &features {
            Features::Dense(rows) => rows.len(),
            Features::Sparse(rows) => rows.len(),
        };
        if n == 0 {
            return Err(Error::invalid("dataset must contain at least one example"));
        }
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        match &features {
            Features::Dense(rows) => {
                for row in rows {
                    if row.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: row.len(),
                        });
                    }
                }
            }
            Features::Sparse(rows) => {
                for row in rows {
                    for &(idx, _) in row {
                        if idx as usize >= dim {
                            return Err(Error::IndexOutOfRange {
                                index: idx as usize,
                                len: dim,
                            });
                        }
                    }
                }
            }
        }
        Ok(Dataset {
            n,
            dim,
            features,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    /// Inner product of example `i` with `x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match &self.features {
            Features::Dense(rows) => crate::vecmath::dot(&rows[i], x),
            Features::Sparse(rows) => {
                let mut acc = 0.0;
                for &(idx, v) in &rows[i] {
                    acc += v * x[idx as usize];
                }
                acc
            }
        }
    }

    /// `out += alpha * row_i`
    pub fn row_axpy(&self, i: usize, alpha: f64, out: &mut [f64]) {
        match &self.features {
            Features::Dense(rows) => crate::vecmath::axpy(alpha, &rows[i], out),
            Features::Sparse(rows) => {
                for &(idx, v) in &rows[i] {
                    out[idx as usize] += alpha * v;
                }
            }
        }
    }

    /// Squared Euclidean norm of example `i`.
    pub fn row_norm_sq(&self, i: usize) -> f64 {
        match &self.features {
            Features::Dense(rows) => crate::vecmath::norm_sq(&rows[i]),
            Features::Sparse(rows) => rows[i].iter().map(|&(_, v)| v * v).sum(),
        }
    }

    /// Contiguous shard bounds for worker `worker_id` of `p`: the shards are
    /// disjoint and their union is `[0, n)`. Sharded sampling sits outside the
    /// i.i.d. assumptions of the convergence analysis; global sampling is the
    /// default.
    pub fn shard_range(&self, worker_id: usize, p: usize) -> (usize, usize) {
        assert!(p >= 1 && worker_id < p);
        let base = self.n / p;
        let rem = self.n % p;
        // first `rem` shards get one extra example
        let start = worker_id * base + worker_id.min(rem);
        let len = base + usize::from(worker_id < rem);
        (start, start + len)
    }
}
