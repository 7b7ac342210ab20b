//! The multi-worker local-SGD simulator.
//!
//! `p` workers take local steps `x_j <- x_j - eta_t g~_j` between
//! synchronization barriers, where the models are averaged and reassigned.
//! The whole run is a pure function of its configuration: every batch is
//! derived from `(master_seed, worker_id, round_index, step_in_round)`,
//! model averaging sums in ascending worker order, and per-point gradients
//! accumulate in ascending index order — so parallel and sequential execution
//! produce byte-identical traces.

mod trace;

pub use trace::{Trace, TraceRecord};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::data::SamplerStream;
use crate::objectives::{self, Objective};
use crate::schedules::{appendix_d_params, Feasibility, LrSchedule, PeriodGenerator};
use crate::vecmath;
use crate::{Error, Result};

/// One worker's local model.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerState {
    pub worker_id: u32,
    pub x: Vec<f64>,
}

/// A single local update `x <- x - eta * g~(x, batch)`.
pub fn local_step(
    w: &mut WorkerState,
    obj: &dyn Objective,
    batch: &[usize],
    eta: f64,
) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::invalid("eta must be positive"));
    }
    let g = objectives::stochastic_gradient(obj, &w.x, batch)?;
    if !vecmath::all_finite(&g) {
        return Err(Error::invalid("non-finite gradient"));
    }
    vecmath::axpy(-eta, &g, &mut w.x);
    Ok(())
}

/// Coordinate-wise mean of equal-length vectors: ascending-order sequential
/// sum, then one division. When every input is bitwise identical the common
/// vector is returned unchanged (the mean of equals is exactly that vector;
/// summing p > 2 copies and dividing would round).
pub fn mean_vectors(vectors: &[&[f64]]) -> Vec<f64> {
    assert!(!vectors.is_empty());
    let first = vectors[0];
    if vectors[1..].iter().all(|v| *v == first) {
        return first.to_vec();
    }
    let mut acc = first.to_vec();
    for v in &vectors[1..] {
        debug_assert_eq!(v.len(), first.len());
        vecmath::axpy(1.0, v, &mut acc);
    }
    let inv = 1.0 / vectors.len() as f64;
    for a in acc.iter_mut() {
        *a *= inv;
    }
    acc
}

/// Averages worker models: `x_j <- (1/p) sum_j x_j` for every j.
pub fn average_models(workers: &[WorkerState]) -> Result<Vec<f64>> {
    if workers.is_empty() {
        return Err(Error::invalid("no workers to average"));
    }
    let dim = workers[0].x.len();
    if workers.iter().any(|w| w.x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: workers.iter().map(|w| w.x.len()).find(|&l| l != dim).unwrap(),
        });
    }
    let refs: Vec<&[f64]> = workers.iter().map(|w| w.x.as_slice()).collect();
    Ok(mean_vectors(&refs))
}

/// Execution options. Neither may change any output byte; `force_sequential`
/// only affects scheduling and `instrument` only adds per-step probe data.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub force_sequential: bool,
    pub instrument: bool,
}

/// Per-step quantities recorded when instrumentation is on. Entry `t` is
/// taken at the pre-step state `x^{(t)}`.
#[derive(Debug, Clone, Default)]
pub struct ProbeData {
    /// learning rate used at step t
    pub eta: Vec<f64>,
    /// `sum_j ||grad F(x_j^{(t)})||^2`
    pub grad_norm_sq_sum: Vec<f64>,
    /// `sum_j ||x_bar^{(t)} - x_j^{(t)}||^2`
    pub divergence: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub probe: Option<ProbeData>,
}

/// Runs the full simulation described by `config` (building the objective
/// from its spec).
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let obj = config.objective.build()?;
    run_with_objective(obj.as_ref(), config, RunOptions::default())
}

struct StepResult {
    grad: Vec<f64>,
    /// `||grad F(x_j)||^2` (instrumentation only)
    full_grad_norm_sq: f64,
}

/// Runs with an already-built objective (callers doing multi-seed replication
/// build the objective once).
pub fn run_with_objective(
    obj: &dyn Objective,
    config: &RunConfig,
    opts: RunOptions,
) -> Result<RunOutput> {
    config.validate()?;
    let dim = obj.dim();
    let n = obj.n_points();
    let p = config.p as usize;
    let total = config.total_steps;
    let x0 = config.x0.resolve(dim)?;

    let mut workers: Vec<WorkerState> = (0..p)
        .map(|j| WorkerState {
            worker_id: j as u32,
            x: x0.clone(),
        })
        .collect();

    let f0_gap = objectives::gap(obj, &x0)?;
    if !f0_gap.is_finite() {
        return Err(Error::invalid("objective is not finite at x0"));
    }
    let abort_threshold = 1e6 * f0_gap.abs().max(1.0);

    let mut gen = PeriodGenerator::new(&config.sync, total)?;
    let mut periods: Vec<u64> = Vec::new();
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut probe = opts.instrument.then(ProbeData::default);
    let mut comm_rounds: u64 = 0;
    let mut t: u64 = 0;
    let mut diverged_at: Option<u64> = None;

    let shard_ranges: Option<Vec<std::ops::Range<usize>>> = if config.sharded && n > 0 {
        Some(
            (0..p)
                .map(|j| {
                    let base = n / p;
                    let rem = n % p;
                    let start = j * base + j.min(rem);
                    start..start + base + usize::from(j < rem)
                })
                .collect(),
        )
    } else {
        None
    };

    'outer: loop {
        let consensus = workers[0].x.clone();
        let next = gen.next_period(|_iter| obj.value_unchecked(&consensus));
        let Some(tau) = next else { break };
        let round = periods.len() as u64;
        periods.push(tau);

        for s in 0..tau {
            let eta = config.lr.at(t);
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::invalid(format!("eta_{t} = {eta} is not positive")));
            }

            let compute = |w: &WorkerState| -> Result<StepResult> {
                let mut grad = vec![0.0; dim];
                if n == 0 {
                    obj.full_gradient_into(&w.x, &mut grad);
                } else {
                    let stream = SamplerStream::new(config.master_seed, w.worker_id, round);
                    let batch = match &shard_ranges {
                        Some(ranges) => stream.draw_batch_from(
                            s,
                            ranges[w.worker_id as usize].clone(),
                            config.batch as usize,
                        )?,
                        None => stream.draw_batch(s, n, config.batch as usize)?,
                    };
                    objectives::stochastic_gradient_into(obj, &w.x, &batch, &mut grad)?;
                }
                let full_grad_norm_sq = if opts.instrument {
                    let mut fg = vec![0.0; dim];
                    obj.full_gradient_into(&w.x, &mut fg);
                    vecmath::norm_sq(&fg)
                } else {
                    0.0
                };
                Ok(StepResult {
                    grad,
                    full_grad_norm_sq,
                })
            };

            let results: Vec<StepResult> = if opts.force_sequential || p == 1 {
                workers.iter().map(compute).collect::<Result<_>>()?
            } else {
                workers
                    .par_iter()
                    .map(compute)
                    .collect::<Result<Vec<_>>>()?
            };

            // Metrics at the pre-step iterate x^{(t)}. Period starts are sync
            // boundaries (workers in consensus after averaging), recorded
            // unconditionally.
            let is_eval_point = config.eval_every.is_some_and(|e| t.is_multiple_of(e));
            if s == 0 || is_eval_point {
                let xs: Vec<&[f64]> = workers.iter().map(|w| w.x.as_slice()).collect();
                let x_bar = mean_vectors(&xs);
                let divergence: f64 = xs.iter().map(|x| vecmath::dist_sq(&x_bar, x)).sum();
                let grads: Vec<&[f64]> = results.iter().map(|r| r.grad.as_slice()).collect();
                let g_bar = mean_vectors(&grads);
                let full_g = objectives::full_gradient(obj, &x_bar)?;
                let f_gap = objectives::gap(obj, &x_bar)?;
                let rec = TraceRecord {
                    t,
                    comm_rounds,
                    f_gap,
                    grad_norm_sq: vecmath::norm_sq(&full_g),
                    divergence,
                    deviation_sq: Some(vecmath::dist_sq(&full_g, &g_bar)),
                };
                if !f_gap.is_finite() {
                    diverged_at = Some(t);
                    break 'outer;
                }
                records.push(rec);
                if f_gap > abort_threshold {
                    diverged_at = Some(t);
                    break 'outer;
                }
            }

            if let Some(pr) = probe.as_mut() {
                let xs: Vec<&[f64]> = workers.iter().map(|w| w.x.as_slice()).collect();
                let x_bar = mean_vectors(&xs);
                pr.eta.push(eta);
                pr.grad_norm_sq_sum
                    .push(results.iter().map(|r| r.full_grad_norm_sq).sum());
                pr.divergence
                    .push(xs.iter().map(|x| vecmath::dist_sq(&x_bar, x)).sum());
            }

            if results.iter().any(|r| !vecmath::all_finite(&r.grad)) {
                diverged_at = Some(t);
                break 'outer;
            }

            for (w, r) in workers.iter_mut().zip(&results) {
                vecmath::axpy(-eta, &r.grad, &mut w.x);
            }
            t += 1;
        }

        // synchronization barrier: average in ascending worker order and
        // reassign, so consensus afterwards is bitwise
        let avg = average_models(&workers)?;
        for w in workers.iter_mut() {
            w.x.clone_from(&avg);
        }
        comm_rounds += 1;
    }

    let final_x = workers[0].x.clone();
    if diverged_at.is_none() {
        debug_assert_eq!(t, total);
        let f_gap = objectives::gap(obj, &final_x)?;
        let full_g = objectives::full_gradient(obj, &final_x)?;
        records.push(TraceRecord {
            t,
            comm_rounds,
            f_gap,
            grad_norm_sq: vecmath::norm_sq(&full_g),
            divergence: 0.0,
            deviation_sq: None,
        });
    }

    Ok(RunOutput {
        trace: Trace {
            records,
            final_x,
            total_comm_rounds: comm_rounds,
            diverged_at,
            periods,
            ada_fallback: gen.fallback_occurred,
        },
        probe,
    })
}

/// Deterministic single-node gradient descent with the given schedule,
/// recording the same metrics as [`run`]. When the schedule is `AppendixD`
/// its `(a, b)` parameters must be admissible for the objective's constants.
pub fn run_gd(
    obj: &dyn Objective,
    x0: &[f64],
    lr: &LrSchedule,
    total_steps: u64,
    eval_every: u64,
) -> Result<Trace> {
    lr.validate()?;
    if total_steps < 1 || eval_every < 1 {
        return Err(Error::invalid("need T >= 1 and eval_every >= 1"));
    }
    if x0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: x0.len(),
        });
    }
    if let LrSchedule::AppendixD { a, b, .. } = *lr {
        match appendix_d_params(a, obj.constants().l, obj.constants().mu)? {
            Feasibility::Infeasible => {
                return Err(Error::invalid(format!(
                    "AppendixD schedule with a = {a} is infeasible (needs 2a > 3)"
                )))
            }
            Feasibility::Feasible(min_b) => {
                if b <= min_b {
                    return Err(Error::invalid(format!(
                        "AppendixD schedule needs b > {min_b}, got {b}"
                    )));
                }
            }
        }
    }

    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    let mut records = Vec::new();
    let mut diverged_at = None;
    let f0_gap = objectives::gap(obj, &x)?;
    let abort_threshold = 1e6 * f0_gap.abs().max(1.0);

    let record =
        |t: u64, x: &[f64], g_opt: Option<&[f64]>, records: &mut Vec<TraceRecord>| -> Result<f64> {
            let f_gap = objectives::gap(obj, x)?;
            let gn = match g_opt {
                Some(g) => vecmath::norm_sq(g),
                None => vecmath::norm_sq(&objectives::full_gradient(obj, x)?),
            };
            records.push(TraceRecord {
                t,
                comm_rounds: 0,
                f_gap,
                grad_norm_sq: gn,
                divergence: 0.0,
                deviation_sq: None,
            });
            Ok(f_gap)
        };

    for t in 0..total_steps {
        obj.full_gradient_into(&x, &mut g);
        if t % eval_every == 0 {
            let f_gap = record(t, &x, Some(&g), &mut records)?;
            if !f_gap.is_finite() || f_gap > abort_threshold {
                diverged_at = Some(t);
                break;
            }
        }
        if !vecmath::all_finite(&g) {
            diverged_at = Some(t);
            break;
        }
        vecmath::axpy(-lr.at(t), &g, &mut x);
    }
    if diverged_at.is_none() {
        record(total_steps, &x, None, &mut records)?;
    }

    Ok(Trace {
        records,
        final_x: x,
        total_comm_rounds: 0,
        diverged_at,
        periods: Vec::new(),
        ada_fallback: false,
    })
}
