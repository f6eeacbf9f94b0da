//! Run records: everything measured and every bound evaluated, per round and
//! per run, in a form that survives a JSON round trip.
//!
//! Bounds that saturated the double exponential are stored with an explicit
//! `overflow` flag and no value (JSON has no +inf), so a record can be re-read
//! and re-checked without loss.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::theory::{
    self, BoundConstants, BoundValue, MaxStep, StepBudget, StepSchedule,
};

/// Relative tolerance for the record-reproducibility check: bounds recomputed from
/// the constants ledger must match the stored ones to this precision.
pub const REPRODUCIBILITY_TOL: f64 = 1e-9;

/// JSON-safe mirror of [`BoundValue`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    /// Finite bound value; absent when the evaluation overflowed.
    pub value: Option<f64>,
    pub overflow: bool,
}

impl From<BoundValue> for BoundEntry {
    fn from(b: BoundValue) -> Self {
        if b.overflow {
            Self { value: None, overflow: true }
        } else {
            Self { value: Some(b.value), overflow: false }
        }
    }
}

impl From<f64> for BoundEntry {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Self { value: Some(v), overflow: false }
        } else {
            Self { value: None, overflow: true }
        }
    }
}

impl BoundEntry {
    pub fn to_bound(self) -> BoundValue {
        match self.value {
            Some(v) if !self.overflow => BoundValue::finite(v),
            _ => BoundValue::saturated(),
        }
    }

    /// `bound - observed`; `None` for a saturated (vacuously satisfied) bound.
    pub fn slack(self, observed: f64) -> Option<f64> {
        self.value.filter(|_| !self.overflow).map(|v| v - observed)
    }

    pub(crate) fn csv(self) -> String {
        match self.value {
            Some(v) if !self.overflow => format!("{v}"),
            _ => "inf".into(),
        }
    }

    fn matches(self, other: Self) -> bool {
        match (self.value, other.value) {
            (None, None) => self.overflow == other.overflow,
            (Some(a), Some(b)) => {
                let scale = a.abs().max(b.abs()).max(1.0);
                (a - b).abs() <= REPRODUCIBILITY_TOL * scale
            }
            _ => false,
        }
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// One round of the paired evolution: measured diagnostics, every bound, and slacks.
/// `_n` marks the finite ensemble, `_ref` the reference trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Step leaving this round; absent on the final round.
    pub eps: Option<f64>,
    /// Step budget consumed before this round.
    pub b: f64,
    pub ksd_n: f64,
    pub ksd_ref: f64,
    pub ksd_between: f64,
    pub w1: f64,
    /// Reference KL to target (quadrature mode only).
    pub kl_ref: Option<f64>,
    pub m_mu_n: f64,
    pub m_mu_p_n: f64,
    pub big_m_mu_p_n: f64,
    pub m_mu_ref: f64,
    pub m_mu_p_ref: f64,
    pub big_m_mu_p_ref: f64,
    pub wass_bound: BoundEntry,
    pub wass_bound_tight: BoundEntry,
    pub wass_slack: Option<f64>,
    pub ksd_gap_bound: BoundEntry,
    pub ksd_gap_slack: Option<f64>,
    /// KSD-vs-Wasserstein comparison evaluated with this round's measured
    /// Wasserstein distance and reference moment.
    pub ksd_from_w1_rhs: f64,
    pub ksd_from_w1_slack: f64,
    pub m_bound_prod_n: BoundEntry,
    pub m_bound_exp_n: BoundEntry,
    pub big_m_bound_prod_n: BoundEntry,
    pub big_m_bound_exp_n: BoundEntry,
    /// Product-form first-moment slack against max(m_mu, m_mu_p).
    pub m_slack_n: Option<f64>,
    pub big_m_slack_n: Option<f64>,
    pub m_bound_prod_ref: BoundEntry,
    pub m_bound_exp_ref: BoundEntry,
    pub big_m_bound_prod_ref: BoundEntry,
    pub big_m_bound_exp_ref: BoundEntry,
    pub m_slack_ref: Option<f64>,
    pub big_m_slack_ref: Option<f64>,
    /// Largest particle move leaving this round; absent on the final round.
    pub displacement_n: Option<f64>,
    pub displacement_bound_n: Option<f64>,
    pub displacement_ref: Option<f64>,
    pub displacement_bound_ref: Option<f64>,
    /// Per-step KL descent slack (quadrature mode only; absent on the final round).
    pub descent_slack: Option<f64>,
}

pub const ROUND_CSV_HEADER: &str = "round,eps,b,ksd_n,ksd_ref,ksd_between,w1,kl_ref,\
m_mu_n,m_mu_p_n,big_m_mu_p_n,m_mu_ref,m_mu_p_ref,big_m_mu_p_ref,\
wass_bound,wass_bound_tight,wass_slack,ksd_gap_bound,ksd_gap_slack,\
ksd_from_w1_rhs,ksd_from_w1_slack,\
m_bound_prod_n,m_bound_exp_n,big_m_bound_prod_n,big_m_bound_exp_n,m_slack_n,big_m_slack_n,\
m_bound_prod_ref,m_bound_exp_ref,big_m_bound_prod_ref,big_m_bound_exp_ref,m_slack_ref,big_m_slack_ref,\
displacement_n,displacement_bound_n,displacement_ref,displacement_bound_ref,descent_slack";

impl RoundRecord {
    fn write_csv_row(&self, out: &mut impl Write) -> Result<()> {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.round,
            csv_opt(self.eps),
            self.b,
            self.ksd_n,
            self.ksd_ref,
            self.ksd_between,
            self.w1,
            csv_opt(self.kl_ref),
            self.m_mu_n,
            self.m_mu_p_n,
            self.big_m_mu_p_n,
            self.m_mu_ref,
            self.m_mu_p_ref,
            self.big_m_mu_p_ref,
            self.wass_bound.csv(),
            self.wass_bound_tight.csv(),
            csv_opt(self.wass_slack),
            self.ksd_gap_bound.csv(),
            csv_opt(self.ksd_gap_slack),
            self.ksd_from_w1_rhs,
            self.ksd_from_w1_slack,
            self.m_bound_prod_n.csv(),
            self.m_bound_exp_n.csv(),
            self.big_m_bound_prod_n.csv(),
            self.big_m_bound_exp_n.csv(),
            csv_opt(self.m_slack_n),
            csv_opt(self.big_m_slack_n),
            self.m_bound_prod_ref.csv(),
            self.m_bound_exp_ref.csv(),
            self.big_m_bound_prod_ref.csv(),
            self.big_m_bound_exp_ref.csv(),
            csv_opt(self.m_slack_ref),
            csv_opt(self.big_m_slack_ref),
            csv_opt(self.displacement_n),
            csv_opt(self.displacement_bound_n),
            csv_opt(self.displacement_ref),
            csv_opt(self.displacement_bound_ref),
            csv_opt(self.descent_slack),
        )?;
        Ok(())
    }
}

/// Unified finite-particle check: the step-weighted KSD average against the
/// terminal-gap-plus-descent bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AveragedKsdCheck {
    /// False when some step exceeded the order-1 cap (the bound's hypothesis fails;
    /// values are still recorded).
    pub applicable: bool,
    /// Averaging weights over rounds 0..=t, with the final round's step taken to be
    /// the order-1 cap by convention; empty when a step exceeds the weight cap.
    pub pi: Vec<f64>,
    /// Step-weighted KSD average; absent when the weights are undefined.
    pub weighted_ksd: Option<f64>,
    pub min_ksd: f64,
    /// Initial KL used in the bound (quadrature measurement when available,
    /// closed form otherwise).
    pub kl0_used: f64,
    pub bound: BoundEntry,
    pub slack: Option<f64>,
}

/// Quadrature-mode descent summary across the reference trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DescentSummary {
    pub kl0_quadrature: f64,
    /// Exact initialization KL where a closed form exists.
    pub kl0_closed_form: Option<f64>,
    pub min_slack: f64,
    pub aggregate_lhs: Option<f64>,
    pub aggregate_rhs: Option<f64>,
    pub violations: Vec<usize>,
    /// Worst density-normalization drift over all rounds.
    pub max_normalization_drift: f64,
}

/// Full record of one paired run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub config: ExperimentConfig,
    pub constants: BoundConstants,
    pub r_alpha1: MaxStep,
    pub r_alpha2: MaxStep,
    /// Initial Wasserstein distance between the ensembles (the measured stand-in
    /// for the initialization gap).
    pub w0n: f64,
    pub schedule: StepSchedule,
    /// Present under the budget policy.
    pub w_bar: Option<f64>,
    pub budget: Option<StepBudget>,
    pub rounds: Vec<RoundRecord>,
    pub averaged_ksd: AveragedKsdCheck,
    pub descent: Option<DescentSummary>,
    pub min_ksd_n: f64,
    pub hard_violations: Vec<String>,
    pub soft_violations: Vec<String>,
}

impl TrajectoryRecord {
    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_rounds_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{ROUND_CSV_HEADER}")?;
        for r in &self.rounds {
            r.write_csv_row(out)?;
        }
        Ok(())
    }

    /// Re-derive every bound column from the constants ledger and schedule alone and
    /// compare against the stored values. Catches a hand-edited or stale record.
    pub fn verify_reproducible(&self) -> Result<()> {
        self.constants.validate_consistency()?;
        let k = &self.constants;
        if self.rounds.len() != self.schedule.rounds() {
            return Err(Error::DimensionMismatch {
                left: self.rounds.len(),
                right: self.schedule.rounds(),
            });
        }
        let wass = theory::wass_discretization_bound(self.w0n, k.a, k.b, k.c, &self.schedule);
        let tight =
            theory::wass_discretization_bound_tight(self.w0n, k.a, k.b, k.c, &self.schedule);
        let ksd_gap = theory::ksd_discretization_bound(
            self.w0n,
            k.a,
            k.b,
            k.c,
            k.kappa,
            k.lipschitz,
            k.dim,
            k.big_m0p_inf,
            &self.schedule,
        );
        let mom_n = theory::moment_bounds(k.m0p_n, k.big_m0p_n, k.m_p, k.c, &self.schedule);
        let mom_ref =
            theory::moment_bounds(k.m0p_inf, k.big_m0p_inf, k.m_p, k.c, &self.schedule);
        for (r, rec) in self.rounds.iter().enumerate() {
            let checks: [(&str, BoundEntry, BoundEntry); 11] = [
                ("wass_bound", rec.wass_bound, wass[r].into()),
                ("wass_bound_tight", rec.wass_bound_tight, tight[r].into()),
                ("ksd_gap_bound", rec.ksd_gap_bound, ksd_gap[r].into()),
                ("m_bound_prod_n", rec.m_bound_prod_n, mom_n.first_product[r].into()),
                ("m_bound_exp_n", rec.m_bound_exp_n, mom_n.first_exp[r].into()),
                ("big_m_bound_prod_n", rec.big_m_bound_prod_n, mom_n.second_product[r].into()),
                ("big_m_bound_exp_n", rec.big_m_bound_exp_n, mom_n.second_exp[r].into()),
                ("m_bound_prod_ref", rec.m_bound_prod_ref, mom_ref.first_product[r].into()),
                ("m_bound_exp_ref", rec.m_bound_exp_ref, mom_ref.first_exp[r].into()),
                (
                    "big_m_bound_prod_ref",
                    rec.big_m_bound_prod_ref,
                    mom_ref.second_product[r].into(),
                ),
                ("big_m_bound_exp_ref", rec.big_m_bound_exp_ref, mom_ref.second_exp[r].into()),
            ];
            for (name, stored, fresh) in checks {
                if !stored.matches(fresh) {
                    return Err(Error::ConstantViolation {
                        what: name,
                        at: vec![r as f64],
                        value: stored.value.unwrap_or(f64::INFINITY),
                        limit: fresh.value.unwrap_or(f64::INFINITY),
                    });
                }
            }
            let expected_b = self.schedule.prefix()[r];
            if (rec.b - expected_b).abs() > REPRODUCIBILITY_TOL * expected_b.max(1.0) {
                return Err(Error::ConstantViolation {
                    what: "stored budget prefix disagrees with the schedule",
                    at: vec![r as f64],
                    value: rec.b,
                    limit: expected_b,
                });
            }
        }
        Ok(())
    }
}

/// One cell of the particle-count sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub repeat: usize,
    pub seed: u64,
    pub w_bar: f64,
    pub budget_b: f64,
    pub steps: usize,
    pub min_ksd: f64,
    pub rate_rhs: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Sweep result: the scheduled convergence rate checked across particle counts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateTable {
    pub delta: f64,
    pub rows: Vec<RateRow>,
}

pub const RATE_CSV_HEADER: &str =
    "n,repeat,seed,w_bar,budget_b,steps,min_ksd,rate_rhs,pass";

impl RateTable {
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{RATE_CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.n,
                row.repeat,
                row.seed,
                row.w_bar,
                row.budget_b,
                row.steps,
                row.min_ksd,
                row.rate_rhs,
                row.pass,
            )?;
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}
