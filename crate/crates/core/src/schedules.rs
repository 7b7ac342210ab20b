//! Learning-rate schedules, synchronization schedules, the alpha feasibility
//! solver, and the closed-form tau selection rules.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Learning-rate sequence generators.
///
/// `Theorem1`/`Theorem2` are `eta_t = 4 / (mu (t + a))` (the offset is called
/// `c` in the adaptive setting); `AppendixD` is the full-batch GD schedule
/// `eta_t = a / (mu (t + b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum LrSchedule {
    Constant { eta: f64 },
    Theorem1 { mu: f64, a: f64 },
    Theorem2 { mu: f64, c: f64 },
    AppendixD { a: f64, b: f64, mu: f64 },
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LrSchedule::Constant { eta } => eta > 0.0 && eta.is_finite(),
            LrSchedule::Theorem1 { mu, a } => mu > 0.0 && a > 0.0,
            LrSchedule::Theorem2 { mu, c } => mu > 0.0 && c > 0.0,
            LrSchedule::AppendixD { a, b, mu } => mu > 0.0 && a > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid learning-rate schedule {self:?}")))
        }
    }

    /// `eta_t`.
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            LrSchedule::Constant { eta } => eta,
            LrSchedule::Theorem1 { mu, a } => 4.0 / (mu * (t as f64 + a)),
            LrSchedule::Theorem2 { mu, c } => 4.0 / (mu * (t as f64 + c)),
            LrSchedule::AppendixD { a, b, mu } => a / (mu * (t as f64 + b)),
        }
    }
}

/// Synchronization-period sequence generators.
///
/// The generated periods partition `[1, T]`: their sum is exactly `T`, with
/// the last period truncated to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SyncSchedule {
    Fixed { tau: u64 },
    OneShot,
    FullySync,
    AdaOracle { tau0: u64 },
    LinearGrowth { tau0: u64, alpha_growth: f64 },
}

impl SyncSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SyncSchedule::Fixed { tau } => tau >= 1,
            SyncSchedule::OneShot | SyncSchedule::FullySync => true,
            SyncSchedule::AdaOracle { tau0 } => tau0 >= 1,
            SyncSchedule::LinearGrowth { tau0, alpha_growth } => {
                tau0 >= 1 && alpha_growth >= 0.0 && alpha_growth.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid sync schedule {self:?}")))
        }
    }

    /// Materializes the full period list. `AdaOracle` requires the callback,
    /// which receives the iteration index of each sync point and returns the
    /// current averaged objective value there.
    pub fn periods(
        &self,
        total_steps: u64,
        mut objective_gap_oracle: Option<&mut dyn FnMut(u64) -> f64>,
    ) -> Result<Vec<u64>> {
        if objective_gap_oracle.is_none() && matches!(self, SyncSchedule::AdaOracle { .. }) {
            return Err(Error::invalid(
                "AdaOracle schedule requires the objective callback",
            ));
        }
        let mut gen = PeriodGenerator::new(self, total_steps)?;
        let mut out = Vec::new();
        loop {
            let next = match objective_gap_oracle.as_mut() {
                Some(cb) => gen.next_period(&mut **cb),
                None => gen.next_period(|_| unreachable!("callback only used by AdaOracle")),
            };
            match next {
                Some(tau) => out.push(tau),
                None => break,
            }
        }
        Ok(out)
    }
}

/// Incremental period generation, used by the engine so that the adaptive
/// rule can consult the objective lazily at each sync point.
pub struct PeriodGenerator {
    schedule: SyncSchedule,
    total_steps: u64,
    elapsed: u64,
    period_index: u64,
    initial_value: Option<f64>,
    /// Set when the adaptive callback returned a non-positive value and the
    /// rule fell back to `tau0`.
    pub fallback_occurred: bool,
}

impl PeriodGenerator {
    pub fn new(schedule: &SyncSchedule, total_steps: u64) -> Result<Self> {
        if total_steps < 1 {
            return Err(Error::invalid("total_steps must be at least 1"));
        }
        schedule.validate()?;
        Ok(PeriodGenerator {
            schedule: schedule.clone(),
            total_steps,
            elapsed: 0,
            period_index: 0,
            initial_value: None,
            fallback_occurred: false,
        })
    }

    /// Returns the next period length (truncated so the sum never exceeds
    /// `T`), or `None` once the horizon is reached. The callback is invoked
    /// only for `AdaOracle`, with the iteration index of the sync point.
    pub fn next_period(&mut self, objective_at: impl FnOnce(u64) -> f64) -> Option<u64> {
        if self.elapsed >= self.total_steps {
            return None;
        }
        let i = self.period_index;
        let raw = match self.schedule {
            SyncSchedule::Fixed { tau } => tau,
            SyncSchedule::OneShot => self.total_steps,
            SyncSchedule::FullySync => 1,
            SyncSchedule::LinearGrowth { tau0, alpha_growth } => {
                let t = ((1.0 + i as f64 * alpha_growth) * tau0 as f64).round();
                (t as u64).max(1)
            }
            SyncSchedule::AdaOracle { tau0 } => {
                let current = objective_at(self.elapsed);
                let initial = *self.initial_value.get_or_insert(current);
                if current <= 0.0 || initial <= 0.0 {
                    // the objective must be positive once F* is dropped;
                    // signal and fall back to tau0
                    self.fallback_occurred = true;
                    tau0
                } else {
                    let ratio = (initial / current).cbrt().ceil();
                    ((ratio * tau0 as f64) as u64).max(1)
                }
            }
        };
        let period = raw.min(self.total_steps - self.elapsed);
        self.elapsed += period;
        self.period_index += 1;
        Some(period)
    }
}

/// Feasibility-aware scalar result. Infeasible is a value, not an error:
/// exploring the infeasible regime is a first-class use case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Feasibility {
    Feasible(f64),
    Infeasible,
}

impl Feasibility {
    pub fn feasible(self) -> Option<f64> {
        match self {
            Feasibility::Feasible(v) => Some(v),
            Feasibility::Infeasible => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Smallest admissible `alpha` for the `eta_t = 4/(mu (t + alpha tau + 4))`
/// schedule, at a given free constant `D > 0`:
///
/// with `B0 = 4 (L (C/p + 1) - mu) / (mu tau)` and
/// `Q = p tau / (32 (p+1) kappa^2 (C + tau))`, the bound is
/// `max(4 / ln[Q D (B0 + D)], B0 + D)`, and it is infeasible whenever the
/// logarithm's argument is at most 1 (no positive alpha exists on that
/// branch).
#[allow(clippy::too_many_arguments)]
pub fn alpha_lower_bound(
    kappa: f64,
    c: f64,
    l: f64,
    mu: f64,
    p: u64,
    tau: u64,
    d: f64,
) -> Result<Feasibility> {
    if !(kappa >= 1.0) || c < 0.0 || !(mu > 0.0) || l < mu {
        return Err(Error::invalid("need kappa >= 1, C >= 0, L >= mu > 0"));
    }
    if p < 1 || tau < 1 {
        return Err(Error::invalid("need p >= 1 and tau >= 1"));
    }
    if !(d > 0.0) {
        return Err(Error::invalid("D must be positive"));
    }
    let p = p as f64;
    let tau = tau as f64;
    let b0 = 4.0 * (l * (c / p + 1.0) - mu) / (mu * tau);
    let q = p * tau / (32.0 * (p + 1.0) * kappa * kappa * (c + tau));
    let log_arg = q * d * (b0 + d);
    if log_arg <= 1.0 {
        return Ok(Feasibility::Infeasible);
    }
    Ok(Feasibility::Feasible((4.0 / log_arg.ln()).max(b0 + d)))
}

/// The alpha solver's result: the minimizing `(alpha, D)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaChoice {
    pub alpha: f64,
    pub d: f64,
}

/// Minimizes [`alpha_lower_bound`] over the free constant `D` with a
/// log-spaced grid refined by golden-section search. Always feasible: for
/// large `D` the logarithm branch is satisfied while the linear branch grows,
/// so a minimizer exists.
pub fn choose_alpha(kappa: f64, c: f64, l: f64, mu: f64, p: u64, tau: u64) -> Result<AlphaChoice> {
    let alpha_at = |d: f64| -> Result<Option<f64>> {
        Ok(alpha_lower_bound(kappa, c, l, mu, p, tau, d)?.feasible())
    };

    // coarse pass over D in [1e-3, 1e9]
    let mut best: Option<(f64, f64)> = None; // (alpha, d)
    let grid_points = 400;
    let (lo_exp, hi_exp) = (-3.0f64, 9.0f64);
    let mut best_idx = None;
    let d_at = |k: usize| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / grid_points as f64);
    for k in 0..=grid_points {
        let d = d_at(k);
        if let Some(alpha) = alpha_at(d)? {
            if best.is_none_or(|(a, _)| alpha < a) {
                best = Some((alpha, d));
                best_idx = Some(k);
            }
        }
    }
    let (mut alpha, mut d) = best.expect("large D is always feasible");

    // golden-section refinement on log10(D) around the coarse minimizer;
    // infeasible evaluations count as +inf
    if let Some(k) = best_idx {
        let mut lo = if k == 0 { lo_exp } else { d_at(k - 1).log10() };
        let mut hi = if k == grid_points {
            hi_exp
        } else {
            d_at(k + 1).log10()
        };
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let eval = |e: f64| -> Result<f64> {
            Ok(alpha_at(10f64.powf(e))?.unwrap_or(f64::INFINITY))
        };
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        for _ in 0..200 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = eval(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = eval(x2)?;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        let e = if f1 <= f2 { x1 } else { x2 };
        let cand_d = 10f64.powf(e);
        if let Some(cand_alpha) = alpha_at(cand_d)? {
            if cand_alpha < alpha {
                alpha = cand_alpha;
                d = cand_d;
            }
        }
    }
    Ok(AlphaChoice { alpha, d })
}

/// `tau* = max(1, round_half_up(T^{2/3} / (p B)^{1/3}))`, the period with the
/// `O(1/(pBT))` error guarantee.
///
/// Computed in exact integer arithmetic: `round_half_up(x) = k` for the real
/// ratio `x = (T^2/(pB))^{1/3}` iff `(2k-1)^3 p B <= 8 T^2 < (2k+1)^3 p B`,
/// so the half-way boundary never depends on floating-point rounding.
pub fn tau_star(total_steps: u64, p: u64, batch: u64) -> u64 {
    assert!(total_steps >= 1 && p >= 1 && batch >= 1);
    let lhs = 8 * (total_steps as u128) * (total_steps as u128);
    let pb = p as u128 * batch as u128;
    // largest k with (2k-1)^3 pB <= 8 T^2
    let cube_ok = |k: u128| (2 * k - 1).pow(3).saturating_mul(pb) <= lhs;
    if !cube_ok(1) {
        return 1; // ratio below one half rounds to zero; clamp
    }
    let mut lo = 1u128;
    let mut hi = 2u128;
    while cube_ok(hi) {
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if cube_ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo as u64).max(1)
}

/// `max(1, trunc(sqrt(T / (p B))))`, the comparison setting from the
/// square-root communication regime. Exact: `trunc = k` iff
/// `k^2 p B <= T < (k+1)^2 p B`.
pub fn tau_stich(total_steps: u64, p: u64, batch: u64) -> u64 {
    assert!(total_steps >= 1 && p >= 1 && batch >= 1);
    let t = total_steps as u128;
    let pb = p as u128 * batch as u128;
    let sq_ok = |k: u128| k.saturating_mul(k).saturating_mul(pb) <= t;
    if !sq_ok(1) {
        return 1;
    }
    let mut lo = 1u128;
    let mut hi = 2u128;
    while sq_ok(hi) {
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if sq_ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo as u64
}

/// Verdict of the three linear-speedup conditions for a period sequence:
/// (i) `sum tau_i = T` exactly, (ii) `sum tau_i (tau_i - 1) <= c T^2`,
/// (iii) `(max tau_i)^3 <= c T^2 / (p B)`. The constant `c` makes the big-O
/// statements concrete (integer parts are computed exactly in `u128`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeedupVerdict {
    pub holds_i: bool,
    pub holds_ii: bool,
    pub holds_iii: bool,
}

impl SpeedupVerdict {
    pub fn all(&self) -> bool {
        self.holds_i && self.holds_ii && self.holds_iii
    }
}

pub fn check_speedup_conditions(
    taus: &[u64],
    total_steps: u64,
    p: u64,
    batch: u64,
    c: f64,
) -> Result<SpeedupVerdict> {
    if taus.is_empty() {
        return Err(Error::invalid("period list must be non-empty"));
    }
    if !(c > 0.0) {
        return Err(Error::invalid("c must be positive"));
    }
    let sum: u128 = taus.iter().map(|&t| t as u128).sum();
    let sum_tau_tau1: u128 = taus.iter().map(|&t| t as u128 * (t as u128 - 1)).sum();
    let max_tau = *taus.iter().max().expect("non-empty") as u128;
    let t_sq = (total_steps as f64) * (total_steps as f64);
    Ok(SpeedupVerdict {
        holds_i: sum == total_steps as u128,
        holds_ii: (sum_tau_tau1 as f64) <= c * t_sq,
        holds_iii: (max_tau.pow(3) as f64) <= c * t_sq / (p as f64 * batch as f64),
    })
}

/// Minimum admissible `b` for the full-batch GD schedule
/// `eta_t = a / (mu (t + b))` (the caller must choose `b` strictly greater):
/// requires `2a > 3`; with `X = a^2 L^2 / mu` the bound is
/// `max([-(3 - X) + |3 - X|] / (2 (2a - 3)) + 1 / sqrt(2a - 3), 1)`.
pub fn appendix_d_params(a: f64, l: f64, mu: f64) -> Result<Feasibility> {
    if !(l > 0.0) || !(mu > 0.0) || !(a > 0.0) {
        return Err(Error::invalid("need a, L, mu > 0"));
    }
    if 2.0 * a <= 3.0 {
        return Ok(Feasibility::Infeasible);
    }
    let x = a * a * l * l / mu;
    let bracket = (-(3.0 - x) + (3.0 - x).abs()) / (2.0 * (2.0 * a - 3.0));
    let bound = bracket + 1.0 / (2.0 * a - 3.0).sqrt();
    Ok(Feasibility::Feasible(bound.max(1.0)))
}
