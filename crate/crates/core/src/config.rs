//! Serializable run descriptions. Objectives and datasets are selected by
//! name + parameter map; unknown keys are rejected so config files round-trip
//! exactly.

use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic_logistic, load_libsvm};
use crate::objectives::{
    EnsembleObjective, LogisticObjective, Objective, PlSineObjective, QuadraticObjective,
};
use crate::schedules::{LrSchedule, SyncSchedule};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic {
        n: usize,
        dim: usize,
        seed: u64,
        #[serde(default)]
        label_noise: f64,
    },
    Libsvm { path: String },
}

impl DatasetSpec {
    pub fn build(&self) -> Result<crate::data::Dataset> {
        match self {
            DatasetSpec::Synthetic {
                n,
                dim,
                seed,
                label_noise,
            } => generate_synthetic_logistic(*n, *dim, *seed, *label_noise),
            DatasetSpec::Libsvm { path } => load_libsvm(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// `1/2 x^T diag(eigs) x - b^T x`
    Quadratic {
        eigs: Vec<f64>,
        #[serde(default)]
        b: Option<Vec<f64>>,
    },
    /// `1/4 x^2 + sin^2(2x)` in one dimension
    PlSine,
    /// per-point quadratics `1/2 ||x - c_i||^2` with seeded Gaussian centers
    Ensemble {
        n: usize,
        dim: usize,
        scale: f64,
        seed: u64,
    },
    /// L2-regularized logistic regression over a dataset
    Logistic { data: DatasetSpec, reg: f64 },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Box<dyn Objective>> {
        Ok(match self {
            ObjectiveSpec::Quadratic { eigs, b } => {
                Box::new(QuadraticObjective::new(eigs.clone(), b.clone())?)
            }
            ObjectiveSpec::PlSine => Box::new(PlSineObjective::new()),
            ObjectiveSpec::Ensemble { n, dim, scale, seed } => {
                Box::new(EnsembleObjective::seeded(*n, *dim, *scale, *seed)?)
            }
            ObjectiveSpec::Logistic { data, reg } => {
                Box::new(LogisticObjective::new(data.build()?, *reg)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum X0Spec {
    Zeros,
    Vector { values: Vec<f64> },
    /// i.i.d. `N(0, scale^2)` coordinates, deterministic per seed
    Gaussian { seed: u64, scale: f64 },
}

impl X0Spec {
    pub fn resolve(&self, dim: usize) -> Result<Vec<f64>> {
        match self {
            X0Spec::Zeros => Ok(vec![0.0; dim]),
            X0Spec::Vector { values } => {
                if values.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: values.len(),
                    });
                }
                Ok(values.clone())
            }
            X0Spec::Gaussian { seed, scale } => {
                use rand::Rng;
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::data::stream_key(
                    *seed, 3, 0, 0,
                ));
                Ok((0..dim)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * scale)
                    .collect())
            }
        }
    }
}

/// A complete experiment description: the run is a pure function of this
/// value (bit-exact across repeats and across parallel/sequential execution).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub objective: ObjectiveSpec,
    /// number of workers
    pub p: u64,
    /// mini-batch size
    #[serde(rename = "B")]
    pub batch: u64,
    /// total local iterations per worker
    #[serde(rename = "T")]
    pub total_steps: u64,
    pub lr: LrSchedule,
    pub sync: SyncSchedule,
    pub master_seed: u64,
    pub x0: X0Spec,
    /// metric evaluation stride; omitted = sync boundaries only
    #[serde(default)]
    pub eval_every: Option<u64>,
    /// worker j samples only from its own contiguous shard of the data.
    /// This sits outside the i.i.d. sampling the convergence analysis
    /// assumes; the default (global sampling) matches the analysis.
    #[serde(default)]
    pub sharded: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::invalid("p must be at least 1"));
        }
        if self.batch < 1 {
            return Err(Error::invalid("B must be at least 1"));
        }
        if self.total_steps < 1 {
            return Err(Error::invalid("T must be at least 1"));
        }
        if let Some(e) = self.eval_every {
            if e < 1 || e > self.total_steps {
                return Err(Error::invalid("eval_every must lie in [1, T]"));
            }
        }
        self.lr.validate()?;
        self.sync.validate()?;
        Ok(())
    }
}
