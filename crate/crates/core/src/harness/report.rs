//! Artifact emission and plain-text summaries for finished runs.
//!
//! Every emitter writes through an in-memory buffer and then persists the file in
//! one `fs::write` call, so a crash mid-run never leaves a half-written artifact
//! next to a complete one.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::density1d;
use crate::error::Result;
use crate::transport;

use super::config::{ExperimentConfig, ReferenceMode};
use super::record::{RateTable, TrajectoryRecord};
use super::{ReferenceTrajectory, RunOutput};

/// Environment variable consulted for the output directory when neither the
/// caller nor the config names one.
pub const OUT_DIR_ENV: &str = "SVGD_OUT_DIR";

/// Pick the directory run artifacts land in. Precedence: explicit caller choice
/// (e.g. a command-line flag), then `output.dir` from the config, then the
/// `SVGD_OUT_DIR` environment variable, then the current directory.
pub fn resolve_out_dir(explicit: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &config.output.dir {
        return p.clone();
    }
    if let Ok(p) = std::env::var(OUT_DIR_ENV) {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    PathBuf::from(".")
}

/// Write every artifact of a finished run into `dir` and return the paths
/// written: `{prefix}_record.json` (the full record), `{prefix}_rounds.csv`
/// (per-round observables and bounds), `{prefix}_particles.csv` (the finite
/// trajectory), plus `{prefix}_reference.csv` or `{prefix}_density.csv` for the
/// reference trajectory depending on its mode.
pub fn emit_run(out: &RunOutput, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join(format!("{prefix}_record.json"));
    fs::write(&path, out.record.to_json_pretty()?)?;
    written.push(path);

    let path = dir.join(format!("{prefix}_rounds.csv"));
    let mut buf = Vec::new();
    out.record.write_rounds_csv(&mut buf)?;
    fs::write(&path, buf)?;
    written.push(path);

    let path = dir.join(format!("{prefix}_particles.csv"));
    let mut buf = Vec::new();
    transport::write_checkpoint_csv(&out.finite, &mut buf)?;
    fs::write(&path, buf)?;
    written.push(path);

    match &out.reference {
        ReferenceTrajectory::Ensemble(traj) => {
            let path = dir.join(format!("{prefix}_reference.csv"));
            let mut buf = Vec::new();
            transport::write_checkpoint_csv(traj, &mut buf)?;
            fs::write(&path, buf)?;
            written.push(path);
        }
        ReferenceTrajectory::Quadrature(measures) => {
            let path = dir.join(format!("{prefix}_density.csv"));
            let mut buf = Vec::new();
            density1d::write_density_csv(&mut buf, measures)?;
            fs::write(&path, buf)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Write the sweep table as `{prefix}_rate.csv` and `{prefix}_rate.json`.
pub fn emit_sweep(table: &RateTable, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join(format!("{prefix}_rate.csv"));
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    fs::write(&path, buf)?;
    written.push(path);

    let path = dir.join(format!("{prefix}_rate.json"));
    fs::write(&path, table.to_json_pretty()?)?;
    written.push(path);

    Ok(written)
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "-".into(),
    }
}

/// Render a run record as plain text: configuration, the derived constants, the
/// step schedule, and one verdict line per check family.
pub fn render_summary(record: &TrajectoryRecord) -> String {
    let mut s = String::new();
    let cfg = &record.config;
    let c = &record.constants;
    let steps = record.schedule.steps();
    let last = record.rounds.last().expect("a record always holds the initial round");

    let _ = writeln!(s, "configuration");
    let _ = writeln!(
        s,
        "  target        {}",
        serde_json::to_string(&cfg.target).unwrap_or_default()
    );
    let _ = writeln!(
        s,
        "  kernel        {}",
        serde_json::to_string(&cfg.kernel).unwrap_or_default()
    );
    let _ = writeln!(s, "  particles     n = {} (seed {})", cfg.init.n, cfg.init.seed);
    match &cfg.reference {
        ReferenceMode::Ensemble { n_ref, seed } => {
            let _ = writeln!(s, "  reference     ensemble, n_ref = {n_ref} (seed {seed})");
        }
        ReferenceMode::Quadrature { nodes, lo, hi } => {
            let _ = writeln!(
                s,
                "  reference     quadrature, {nodes} nodes on [{}, {}]",
                fmt_opt(*lo),
                fmt_opt(*hi)
            );
        }
    }
    let _ = writeln!(s, "  alpha         {}", cfg.alpha);
    let _ = writeln!(
        s,
        "  schedule      {} steps, total {}",
        steps.len(),
        record.schedule.total()
    );

    let _ = writeln!(s, "constants");
    let _ = writeln!(s, "  kappa              {}", c.kappa);
    let _ = writeln!(s, "  gamma              {}", c.gamma);
    let _ = writeln!(s, "  lipschitz          {}", c.lipschitz);
    let _ = writeln!(s, "  lambda             {}", c.lambda);
    let _ = writeln!(s, "  c1, c2             {}, {}", c.c1, c.c2);
    let _ = writeln!(s, "  A, B, C            {}, {}, {}", c.a, c.b, c.c);
    let _ = writeln!(s, "  m0 coupled (n)     {}", c.m0p_n);
    let _ = writeln!(s, "  M0 coupled (n)     {}", c.big_m0p_n);
    let _ = writeln!(s, "  m0 coupled (ref)   {}", c.m0p_inf);
    let _ = writeln!(s, "  M0 coupled (ref)   {}", c.big_m0p_inf);
    let _ = writeln!(s, "  KL0                {}", c.kl0);
    let _ = writeln!(s, "  step cap (p = 1)   {}", record.r_alpha1.r);
    let _ = writeln!(s, "  step cap (p = 2)   {}", record.r_alpha2.r);
    let _ = writeln!(s, "  initial KSD gap    {}", record.w0n);
    if let (Some(w), Some(b)) = (record.w_bar, &record.budget) {
        let _ = writeln!(s, "  iid deviation      {w}");
        let _ = writeln!(
            s,
            "  step budget        {} (branches {}, {})",
            b.b, b.branch1, b.branch2
        );
    }

    let _ = writeln!(s, "results");
    let _ = writeln!(
        s,
        "  final round        ksd_n = {}, ksd_ref = {}, gap = {}, w1 = {}",
        last.ksd_n, last.ksd_ref, last.ksd_between, last.w1
    );
    let _ = writeln!(s, "  min KSD (finite)   {}", record.min_ksd_n);
    let avg = &record.averaged_ksd;
    if avg.applicable {
        let _ = writeln!(
            s,
            "  averaged KSD       {} <= {} (slack {})",
            fmt_opt(avg.weighted_ksd),
            avg.bound.csv(),
            fmt_opt(avg.slack)
        );
    } else {
        let _ = writeln!(s, "  averaged KSD       skipped (a step exceeds the cap)");
    }
    if let Some(desc) = &record.descent {
        let _ = writeln!(
            s,
            "  descent            aggregate {} <= {} (min per-round slack {})",
            fmt_opt(desc.aggregate_lhs),
            fmt_opt(desc.aggregate_rhs),
            desc.min_slack
        );
        let _ = writeln!(
            s,
            "  normalization      max drift {}",
            desc.max_normalization_drift
        );
    }

    let _ = writeln!(s, "verdicts");
    if record.hard_violations.is_empty() {
        let _ = writeln!(s, "  hard checks        PASS");
    } else {
        let _ = writeln!(
            s,
            "  hard checks        FAIL ({} violations)",
            record.hard_violations.len()
        );
        for v in &record.hard_violations {
            let _ = writeln!(s, "    - {v}");
        }
    }
    if record.soft_violations.is_empty() {
        let _ = writeln!(s, "  soft checks        PASS");
    } else {
        let _ = writeln!(
            s,
            "  soft checks        WARN ({} flags)",
            record.soft_violations.len()
        );
        for v in &record.soft_violations {
            let _ = writeln!(s, "    - {v}");
        }
    }
    s
}

/// Render a sweep table as plain text, one line per cell plus a verdict.
pub fn render_rate_table(table: &RateTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "rate sweep (delta = {})", table.delta);
    let _ = writeln!(s, "  {:>8} {:>7} {:>22} {:>22} {:>6}", "n", "repeat", "min_ksd", "rate_rhs", "pass");
    for row in &table.rows {
        let _ = writeln!(
            s,
            "  {:>8} {:>7} {:>22} {:>22} {:>6}",
            row.n,
            row.repeat,
            format!("{:.12e}", row.min_ksd),
            format!("{:.12e}", row.rate_rhs),
            row.pass
        );
    }
    let _ = writeln!(
        s,
        "  verdict: {}",
        if table.all_pass() { "PASS" } else { "FAIL" }
    );
    s
}
