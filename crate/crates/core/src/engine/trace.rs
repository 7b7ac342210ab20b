//! Per-iteration metric records and their CSV/JSON serializations.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::Result;

/// Metrics at one recorded iterate `x_bar^{(t)}` (the average of the worker
/// models, virtual at non-boundary steps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    /// synchronizations performed so far (non-decreasing in t)
    pub comm_rounds: u64,
    /// `F(x_bar) - F*` when `F*` is declared, else `F(x_bar)`
    pub f_gap: f64,
    /// `||grad F(x_bar)||^2`
    pub grad_norm_sq: f64,
    /// `sum_j ||x_bar - x_j||^2`; exactly 0 at sync boundaries
    pub divergence: f64,
    /// `||grad F(x_bar) - (1/p) sum_j g~_j||^2`; absent on the final record
    /// (no step follows it)
    pub deviation_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// `x_bar^{(T)}`, the averaged output model
    pub final_x: Vec<f64>,
    /// number of synchronizations = number of periods
    pub total_comm_rounds: u64,
    /// set when the run aborted (non-finite values or objective blow-up);
    /// the records then form the partial trace up to the abort step
    pub diverged_at: Option<u64>,
    /// realized synchronization periods (they sum to T for completed runs)
    pub periods: Vec<u64>,
    /// true when the adaptive rule hit a non-positive objective value and
    /// fell back to its base period
    pub ada_fallback: bool,
}

pub const CSV_HEADER: &str = "t,comm_rounds,F_gap,grad_norm_sq,divergence,deviation_sq";

impl Trace {
    pub fn final_record(&self) -> &TraceRecord {
        self.records.last().expect("trace has at least one record")
    }

    pub fn final_gap(&self) -> f64 {
        self.final_record().f_gap
    }

    /// Fixed column set and order; floats print in shortest round-trip form
    /// so identical runs emit identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let dev = match r.deviation_sq {
                Some(v) => v.to_string(),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.t, r.comm_rounds, r.f_gap, r.grad_norm_sq, r.divergence, dev
            ));
        }
        out
    }

    /// JSON document with the full resolved config embedded for provenance.
    pub fn to_json(&self, config: &RunConfig) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            config: &'a RunConfig,
            trace: &'a Trace,
        }
        serde_json::to_string_pretty(&Doc {
            config,
            trace: self,
        })
        .map_err(|e| crate::Error::invalid(format!("trace serialization failed: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_fixed_columns_and_blank_missing_deviation() {
        let tr = Trace {
            records: vec![
                TraceRecord {
                    t: 0,
                    comm_rounds: 0,
                    f_gap: 0.5,
                    grad_norm_sq: 1.0,
                    divergence: 0.0,
                    deviation_sq: Some(0.25),
                },
                TraceRecord {
                    t: 1,
                    comm_rounds: 1,
                    f_gap: 0.125,
                    grad_norm_sq: 0.25,
                    divergence: 0.0,
                    deviation_sq: None,
                },
            ],
            final_x: vec![0.5],
            total_comm_rounds: 1,
            diverged_at: None,
            periods: vec![1],
            ada_fallback: false,
        };
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "0,0,0.5,1,0,0.25");
        assert_eq!(lines.next().unwrap(), "1,1,0.125,0.25,0,");
    }

    #[test]
    fn json_embeds_the_full_config() {
        use crate::config::{ObjectiveSpec, RunConfig, X0Spec};
        use crate::schedules::{LrSchedule, SyncSchedule};
        let cfg = RunConfig {
            objective: ObjectiveSpec::PlSine,
            p: 2,
            batch: 1,
            total_steps: 4,
            lr: LrSchedule::Constant { eta: 0.1 },
            sync: SyncSchedule::FullySync,
            master_seed: 9,
            x0: X0Spec::Zeros,
            eval_every: None,
            sharded: false,
        };
        let tr = Trace {
            records: vec![TraceRecord {
                t: 0,
                comm_rounds: 0,
                f_gap: 1.0,
                grad_norm_sq: 2.0,
                divergence: 0.0,
                deviation_sq: None,
            }],
            final_x: vec![0.0],
            total_comm_rounds: 4,
            diverged_at: None,
            periods: vec![1, 1, 1, 1],
            ada_fallback: false,
        };
        let doc = tr.to_json(&cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["config"]["master_seed"], 9);
        assert_eq!(v["config"]["T"], 4);
        assert_eq!(v["trace"]["total_comm_rounds"], 4);
        let back: RunConfig = serde_json::from_value(v["config"].clone()).unwrap();
        assert_eq!(back, cfg);
    }
}
