//! Named self-check battery for a configuration.
//!
//! `verify_suite` re-establishes, on the configured kernel/target pair, every
//! property the bound ledger takes for granted, and reports one item per check.
//! Three kinds of evidence go in: closed-form constants re-checked by dense grid
//! search, pointwise identities evaluated on sampled point pairs, and a full
//! paired run whose recorded violations fold into the verdict. A report that
//! passes means the constants, the kernel calculus, the discrepancy estimators,
//! and the run-level inequalities all agree on this configuration.

use serde::Serialize;

use crate::density1d::QuadratureMeasure;
use crate::discrepancy::{self, MomentMethod, SteinContext};
use crate::error::Result;
use crate::kernels::GridCheck;
use crate::numeric::central_diff;
use crate::transport::ParticleEnsemble;
use crate::{density1d, theory};

use super::config::ExperimentConfig;
use super::{prepare, run_experiment};

/// Tolerance for identities that hold in exact arithmetic (symmetry).
const TOL_EXACT: f64 = 1e-12;
/// Tolerance for analytic derivatives against central differences.
const TOL_GRAD_FD: f64 = 1e-6;
/// Looser variant for the second-derivative trace, which differences a gradient.
const TOL_HESS_FD: f64 = 1e-5;
/// Relative slack granted to inequalities that hold exactly in theory.
const TOL_SLACK: f64 = 1e-9;
/// Quadrature residual caps for integrals that vanish in exact arithmetic.
const TOL_SCORE_MEAN: f64 = 1e-8;
const TOL_STEIN_MEAN: f64 = 1e-6;
/// Relative floor on Gram eigenvalues (scaled by the largest diagonal entry).
const PSD_FLOOR: f64 = 1e-8;
const FD_STEP: f64 = 1e-5;
const PAIR_POINTS: usize = 12;
const ENSEMBLE_N: usize = 24;
const GRAM_N: usize = 48;

/// One named check with a human-readable margin.
#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckItem {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub items: Vec<CheckItem>,
    pub passed_all: bool,
}

impl VerifyReport {
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        for item in &self.items {
            let verdict = if item.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{verdict}  {:<24} {}", item.name, item.detail);
        }
        let _ = writeln!(
            s,
            "verdict: {}",
            if self.passed_all { "PASS" } else { "FAIL" }
        );
        s
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn weighted_mean(ens: &ParticleEnsemble) -> Vec<f64> {
    let d = ens.dim();
    let mut mean = vec![0.0; d];
    for (x, &w) in ens.iter_positions().zip(ens.weights()) {
        for j in 0..d {
            mean[j] += w * x[j];
        }
    }
    mean
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Run every check the configuration supports and collect the named outcomes.
/// Checks that only make sense in one dimension are skipped silently for
/// multivariate targets; everything else always appears.
pub fn verify_suite(config: &ExperimentConfig) -> Result<VerifyReport> {
    let p = prepare(config)?;
    let target = &p.target;
    let kernel = &p.kernel;
    let init = config.init.dist.build()?;
    let dim = target.dim();
    let d = dim as f64;
    let seed = config.init.seed;
    let mut items = Vec::new();

    // Constants: dense-grid re-verification of the kernel ledger, then internal
    // consistency of the assembled constants.
    let grid = GridCheck::new(-5.0, 5.0, 10_001);
    match kernel.kernel_constants(Some(&grid)) {
        Ok(kc) => items.push(CheckItem::new(
            "kernel-constants-grid",
            true,
            format!("kappa_sq = {}, gamma = {} confirmed on {} points", kc.kappa_sq, kc.gamma, grid.points),
        )),
        Err(e) => items.push(CheckItem::new("kernel-constants-grid", false, e.to_string())),
    }
    match p.constants.validate_consistency() {
        Ok(()) => items.push(CheckItem::new(
            "constants-consistency",
            true,
            format!("A = {}, B = {}, C = {}", p.constants.a, p.constants.b, p.constants.c),
        )),
        Err(e) => items.push(CheckItem::new("constants-consistency", false, e.to_string())),
    }

    // Sampled point clouds for the pointwise checks, drawn from both measures so
    // the pairs cover typical and cross-measure separations.
    let cloud_a = init.sample(PAIR_POINTS, seed.wrapping_add(101))?;
    let cloud_b = target.sample(PAIR_POINTS, seed.wrapping_add(102))?;
    let points: Vec<&[f64]> = cloud_a.iter_positions().chain(cloud_b.iter_positions()).collect();

    // Kernel symmetry: k(x, y) = k(y, x) and grad_x k(x, y) = grad_y k(y, x).
    let mut worst_sym: f64 = 0.0;
    for x in &points {
        for y in &points {
            let fwd = kernel.k_eval(x, y)?;
            let rev = kernel.k_eval(y, x)?;
            worst_sym = worst_sym.max((fwd - rev).abs());
            let gx = kernel.k_grad_x(x, y)?;
            let gy = kernel.k_grad_y(y, x)?;
            for j in 0..dim {
                worst_sym = worst_sym.max((gx[j] - gy[j]).abs());
            }
        }
    }
    items.push(CheckItem::new(
        "kernel-symmetry",
        worst_sym <= TOL_EXACT,
        format!("max asymmetry {worst_sym:e}"),
    ));

    // Analytic kernel derivatives against central differences.
    let mut worst_grad: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for x in points.iter().take(PAIR_POINTS) {
        for y in points.iter().skip(PAIR_POINTS) {
            let gx = kernel.k_grad_x(x, y)?;
            for j in 0..dim {
                let fd = central_diff(
                    |t| {
                        let mut xt = x.to_vec();
                        xt[j] = t;
                        kernel.k_eval(&xt, y).expect("kernel evaluation on finite inputs")
                    },
                    x[j],
                    FD_STEP,
                );
                worst_grad = worst_grad.max((gx[j] - fd).abs());
            }
            let trace = kernel.k_cross_hess_trace(x, y)?;
            let mut fd_trace = 0.0;
            for j in 0..dim {
                fd_trace += central_diff(
                    |t| {
                        let mut yt = y.to_vec();
                        yt[j] = t;
                        kernel.k_grad_x(x, &yt).expect("kernel evaluation on finite inputs")[j]
                    },
                    y[j],
                    FD_STEP,
                );
            }
            worst_trace = worst_trace.max((trace - fd_trace).abs());
        }
    }
    items.push(CheckItem::new(
        "kernel-gradient-fd",
        worst_grad <= TOL_GRAD_FD,
        format!("max gradient error {worst_grad:e}"),
    ));
    items.push(CheckItem::new(
        "kernel-hessian-trace-fd",
        worst_trace <= TOL_HESS_FD,
        format!("max trace error {worst_trace:e}"),
    ));

    // Score field: Lipschitz bound on sampled pairs.
    let lip = p.tc.lipschitz;
    let mut worst_lip_excess: f64 = f64::NEG_INFINITY;
    for x in &points {
        for y in &points {
            let sx = target.score(x)?;
            let sy = target.score(y)?;
            let diff: Vec<f64> = sx.iter().zip(&sy).map(|(a, b)| a - b).collect();
            let sep: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
            let allowed = lip * norm(&sep);
            worst_lip_excess = worst_lip_excess.max(norm(&diff) - allowed);
        }
    }
    items.push(CheckItem::new(
        "score-lipschitz",
        worst_lip_excess <= TOL_SLACK,
        format!("max excess over L * separation: {worst_lip_excess:e}"),
    ));

    // Stein kernel magnitude: |k_p(x, y)| is dominated by the kappa_sq ledger via
    // Cauchy-Schwarz on the diagonal derivative bounds.
    let ctx = SteinContext::new(target, kernel);
    let kappa_sq = p.kc.kappa_sq;
    let mut worst_mag_excess: f64 = f64::NEG_INFINITY;
    for x in &points {
        for y in &points {
            let kp = ctx.stein_kernel(x, y)?;
            let sx = norm(&target.score(x)?);
            let sy = norm(&target.score(y)?);
            let cap = kappa_sq * (sx * sy + d.sqrt() * (sx + sy) + d);
            worst_mag_excess = worst_mag_excess.max(kp.abs() - cap * (1.0 + TOL_SLACK));
        }
    }
    items.push(CheckItem::new(
        "stein-kernel-magnitude",
        worst_mag_excess <= 0.0,
        format!("max excess over the kappa_sq cap: {worst_mag_excess:e}"),
    ));

    // One-dimensional integral identities: the score integrates to zero against
    // the target, and so does the Stein kernel in either argument.
    if dim == 1 {
        let (lo, hi) = QuadratureMeasure::default_grid(target, target)?;
        let score_residual = target.score_mean_residual(lo, hi, density1d::DEFAULT_NODES)?;
        items.push(CheckItem::new(
            "score-zero-mean",
            score_residual.abs() <= TOL_SCORE_MEAN,
            format!("quadrature residual {score_residual:e}"),
        ));

        let mut worst_stein_mean: f64 = 0.0;
        for x in cloud_a.iter_positions().take(5) {
            let r = ctx.zero_mean_residual(x[0], lo, hi, density1d::DEFAULT_NODES)?;
            worst_stein_mean = worst_stein_mean.max(r.abs());
        }
        items.push(CheckItem::new(
            "stein-zero-mean",
            worst_stein_mean <= TOL_STEIN_MEAN,
            format!("max quadrature residual {worst_stein_mean:e}"),
        ));
    }

    // Positive semidefiniteness of the Stein Gram matrix.
    let gram_ens = init.sample(GRAM_N.min(super::config::MAX_N_1D), seed.wrapping_add(103))?;
    let gram = ctx.stein_gram(&gram_ens)?;
    let scale = gram.diagonal().amax().max(1.0);
    let min_eig = gram.symmetric_eigen().eigenvalues.min();
    items.push(CheckItem::new(
        "stein-gram-psd",
        min_eig >= -PSD_FLOOR * scale,
        format!("min eigenvalue {min_eig:e} at diagonal scale {scale:e}"),
    ));

    // Discrepancy estimators: KSD symmetry and triangle inequality, the
    // Wasserstein metric axioms, and the KSD-from-W1 transfer inequality with
    // every quantity measured rather than bounded.
    let ens_a = init.sample(ENSEMBLE_N, seed.wrapping_add(104))?;
    let ens_b = target.sample(ENSEMBLE_N, seed.wrapping_add(105))?;
    let ens_c = init.sample(ENSEMBLE_N, seed.wrapping_add(106))?;

    let ab = ctx.ksd_between(&ens_a, &ens_b)?;
    let ba = ctx.ksd_between(&ens_b, &ens_a)?;
    let bc = ctx.ksd_between(&ens_b, &ens_c)?;
    let ac = ctx.ksd_between(&ens_a, &ens_c)?;
    let ksd_sym = (ab - ba).abs();
    let ksd_tri = ac - (ab + bc);
    items.push(CheckItem::new(
        "ksd-symmetry",
        ksd_sym <= TOL_EXACT,
        format!("|ksd(a,b) - ksd(b,a)| = {ksd_sym:e}"),
    ));
    items.push(CheckItem::new(
        "ksd-triangle",
        ksd_tri <= TOL_SLACK * ac.abs().max(1.0),
        format!("ksd(a,c) - ksd(a,b) - ksd(b,c) = {ksd_tri:e}"),
    ));

    let w_ab = discrepancy::wasserstein1(&ens_a, &ens_b)?;
    let w_ba = discrepancy::wasserstein1(&ens_b, &ens_a)?;
    let w_bc = discrepancy::wasserstein1(&ens_b, &ens_c)?;
    let w_ac = discrepancy::wasserstein1(&ens_a, &ens_c)?;
    let w_aa = discrepancy::wasserstein1(&ens_a, &ens_a)?;
    let mean_a = weighted_mean(&ens_a);
    let mean_b = weighted_mean(&ens_b);
    let mean_gap: Vec<f64> = mean_a.iter().zip(&mean_b).map(|(x, y)| x - y).collect();
    let w1_ok = w_aa <= TOL_EXACT
        && (w_ab - w_ba).abs() <= TOL_EXACT
        && w_ac - (w_ab + w_bc) <= TOL_SLACK * w_ac.max(1.0)
        && norm(&mean_gap) <= w_ab * (1.0 + TOL_SLACK);
    items.push(CheckItem::new(
        "w1-metric-axioms",
        w1_ok,
        format!(
            "identity {w_aa:e}, symmetry {:e}, triangle slack {:e}, mean gap {:e} <= {w_ab:e}",
            (w_ab - w_ba).abs(),
            (w_ab + w_bc) - w_ac,
            norm(&mean_gap)
        ),
    ));

    let mut worst_transfer: f64 = f64::INFINITY;
    for (x, y, w1) in [(&ens_a, &ens_b, w_ab), (&ens_a, &ens_c, w_ac), (&ens_b, &ens_c, w_bc)] {
        let ksd = ctx.ksd_between(x, y)?;
        let mom = discrepancy::moments(y, target, MomentMethod::Auto)?;
        let rhs = p.kc.kappa * (d + lip) * w1
            + d.powf(0.25) * p.kc.kappa * lip * (2.0 * mom.big_m_mu_p * w1).sqrt();
        worst_transfer = worst_transfer.min(rhs - ksd + TOL_SLACK * rhs.abs().max(1.0));
    }
    items.push(CheckItem::new(
        "ksd-from-w1-transfer",
        worst_transfer >= 0.0,
        format!("min slack {worst_transfer:e}"),
    ));

    // Schedule admissibility and, under the budget policy, the fixed-point
    // property of the chosen step-size sum.
    let max_step = p.schedule.steps().iter().fold(0.0f64, |m, &e| m.max(e));
    let cap_ok = p.schedule.check_cap(p.r1.r).is_ok();
    items.push(CheckItem::new(
        "step-cap",
        cap_ok,
        format!("max step {max_step} against cap {}", p.r1.r),
    ));
    if let (Some(w_bar), Some(budget)) = (p.w_bar, &p.budget) {
        let (s1, s2) = theory::step_budget_fixed_point_slacks(
            w_bar,
            p.constants.a,
            p.constants.b,
            p.constants.c,
            budget,
        )?;
        items.push(CheckItem::new(
            "budget-fixed-point",
            s1 >= -TOL_SLACK && s2 >= -TOL_SLACK,
            format!("branch slacks {s1:e}, {s2:e} at b = {}", budget.b),
        ));
    }

    // Full paired run: fold the recorded hard and soft violations into the
    // verdict, then re-derive every bound column from the constants alone and
    // compare against a byte-identical repeat run.
    let out = run_experiment(config)?;
    let rec = &out.record;
    items.push(CheckItem::new(
        "run-hard-bounds",
        rec.hard_violations.is_empty(),
        match rec.hard_violations.first() {
            None => format!("all hard inequalities hold over {} rounds", rec.rounds.len()),
            Some(first) => format!("{} violations; first: {first}", rec.hard_violations.len()),
        },
    ));
    items.push(CheckItem::new(
        "run-soft-checks",
        rec.soft_violations.is_empty(),
        match rec.soft_violations.first() {
            None => "no estimator-tolerance flags".into(),
            Some(first) => format!("{} flags; first: {first}", rec.soft_violations.len()),
        },
    ));
    items.push(CheckItem::new(
        "record-reproducible",
        rec.verify_reproducible().is_ok(),
        "bound columns re-derived from the constants ledger".into(),
    ));

    let again = run_experiment(config)?;
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    rec.write_rounds_csv(&mut csv_a)?;
    again.record.write_rounds_csv(&mut csv_b)?;
    let deterministic = rec.to_json_pretty()? == again.record.to_json_pretty()? && csv_a == csv_b;
    items.push(CheckItem::new(
        "determinism",
        deterministic,
        "repeat run compared byte-for-byte on JSON and CSV".into(),
    ));

    let passed_all = items.iter().all(|i| i.passed);
    Ok(VerifyReport { items, passed_all })
}
