//! Run-directory layout: one directory per run with `config.json`,
//! `trace.csv`, and `summary.json`.

use std::fs;
use std::path::Path;

use lupa_core::config::RunConfig;
use lupa_core::engine::Trace;

pub fn write_text(path: &Path, text: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
    }
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub fn write_run_dir(dir: &Path, config: &RunConfig, trace: &Trace) -> Result<(), String> {
    let config_json = serde_json::to_string_pretty(config)
        .map_err(|e| format!("config serialization failed: {e}"))?;
    write_text(&dir.join("config.json"), &config_json)?;
    write_text(&dir.join("trace.csv"), &trace.to_csv())?;
    let summary = summary_json(config, trace, None);
    write_text(&dir.join("summary.json"), &summary)
}

pub fn summary_json(config: &RunConfig, trace: &Trace, resolved_tau: Option<u64>) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "final_f_gap": trace.final_gap(),
        "total_comm_rounds": trace.total_comm_rounds,
        "diverged_at": trace.diverged_at,
        "periods": trace.periods,
        "resolved_tau": resolved_tau,
        "ada_fallback": trace.ada_fallback,
        "p": config.p,
        "B": config.batch,
        "T": config.total_steps,
    }))
    .expect("summary serialization")
}

/// Filesystem-friendly label for a schedule (used for per-schedule subdirs
/// and CSV rows).
pub fn schedule_label(s: &lupa_core::schedules::SyncSchedule) -> String {
    use lupa_core::schedules::SyncSchedule::*;
    match s {
        Fixed { tau } => format!("fixed-{tau}"),
        OneShot => "one-shot".into(),
        FullySync => "fully-sync".into(),
        AdaOracle { tau0 } => format!("ada-oracle-{tau0}"),
        LinearGrowth { tau0, alpha_growth } => format!("linear-growth-{tau0}-{alpha_growth}"),
    }
}
