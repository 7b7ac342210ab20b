//! The declarative experiment file: one TOML document selecting an
//! experiment kind plus its run configuration. Unknown keys are rejected and
//! every file round-trips parse -> serialize -> parse identically.

use serde::{Deserialize, Serialize};

use lupa_core::config::RunConfig;
use lupa_core::schedules::SyncSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentFile {
    /// One run, one trace.
    Single { run: RunConfig },
    /// Matched runs across several synchronization schedules; emits one
    /// trace set (the fixed-vs-square-root-vs-one-shot comparison).
    Sweep {
        run: RunConfig,
        schedules: Vec<SyncSchedule>,
    },
    /// Iterations/communication to reach a target gap as p varies, with
    /// `tau = tau*(T, p, B)` per worker count.
    Speedup {
        run: RunConfig,
        p_values: Vec<u64>,
        target_gap: f64,
        #[serde(default = "default_seeds")]
        n_seeds: u64,
    },
    /// Seed-averaged (comm_rounds, final gap) rows across schedules at
    /// matched T (fixed vs adaptive comparisons).
    AdaptiveCompare {
        run: RunConfig,
        schedules: Vec<SyncSchedule>,
        #[serde(default = "default_seeds")]
        n_seeds: u64,
    },
    /// Fully synchronous runs over a list of batch sizes at a fixed learning
    /// rate; divergence is a reported outcome, not a failure.
    MinibatchDivergence {
        run: RunConfig,
        batch_sizes: Vec<u64>,
    },
    /// Dispatches the analysis checks (gradient second moment, worker
    /// divergence, closed-form bound) on the given run.
    TheoryCheck {
        run: RunConfig,
        #[serde(default = "default_seeds")]
        n_seeds: u64,
        /// Monte-Carlo trials for the second-moment check
        #[serde(default = "default_trials")]
        lemma1_trials: u64,
        /// override the alpha solver (requires `d`)
        #[serde(default)]
        alpha: Option<f64>,
        /// pin the free constant D of the alpha condition
        #[serde(default)]
        d: Option<f64>,
        /// run the shrunken-bound suite that must fail
        #[serde(default)]
        negative_control: bool,
    },
}

fn default_seeds() -> u64 {
    20
}

fn default_trials() -> u64 {
    20_000
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    // backs the parse -> serialize -> parse round-trip contract
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string_pretty(self).map_err(|e| format!("config serialize error: {e}"))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lupa_core::config::{ObjectiveSpec, X0Spec};
    use lupa_core::schedules::LrSchedule;

    fn sample() -> ExperimentFile {
        ExperimentFile::AdaptiveCompare {
            run: RunConfig {
                objective: ObjectiveSpec::Logistic {
                    data: lupa_core::config::DatasetSpec::Synthetic {
                        n: 64,
                        dim: 4,
                        seed: 3,
                        label_noise: 0.1,
                    },
                    reg: 1e-3,
                },
                p: 4,
                batch: 8,
                total_steps: 200,
                lr: LrSchedule::Constant { eta: 0.1 },
                sync: SyncSchedule::Fixed { tau: 20 },
                master_seed: 7,
                x0: X0Spec::Zeros,
                eval_every: None,
                sharded: false,
            },
            schedules: vec![
                SyncSchedule::Fixed { tau: 20 },
                SyncSchedule::LinearGrowth {
                    tau0: 20,
                    alpha_growth: 1.09,
                },
                SyncSchedule::AdaOracle { tau0: 20 },
            ],
            n_seeds: 10,
        }
    }

    #[test]
    fn toml_roundtrip_is_identical() {
        let exp = sample();
        let text = exp.to_toml().unwrap();
        let back = ExperimentFile::parse(&text).unwrap();
        assert_eq!(exp, back);
        // and a second serialize/parse cycle stays fixed
        let again = ExperimentFile::parse(&back.to_toml().unwrap()).unwrap();
        assert_eq!(back, again);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = sample().to_toml().unwrap();
        text.push_str("\nmystery_key = 3\n");
        assert!(ExperimentFile::parse(&text).is_err());
    }
}
