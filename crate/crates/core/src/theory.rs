//! The constant ledger and every explicit bound the verification harness checks.
//!
//! Everything here is plain arithmetic on constants produced by [`crate::kernels`] and
//! [`crate::targets`]: the pseudo-Lipschitz constants of the one-step pushforward, the
//! moment-growth and Wasserstein/KSD discretization bounds (double exponentials in the
//! step-size sum), the descent step cap and averaging weights for continuous-time
//! comparison, the unified finite-particle KSD bound, and the step-budget schedule with
//! its `1/sqrt(log log)` rate expression.
//!
//! Two conventions used throughout:
//!
//! * Step prefix sums are carried as `b[r] = eps[0] + ... + eps[r-1]`, so `b[0] = 0` and
//!   the bound for round `r` reads its step budget from `b[r]`.
//! * The double exponentials overflow f64 for modest budgets. All such bounds are
//!   evaluated in log space and saturate to a flagged `+inf` ([`BoundValue`]) instead of
//!   producing NaN; a saturated bound is still a valid (vacuous) upper bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelConstants;
use crate::numeric::KahanSum;
use crate::targets::TargetConstants;

/// Exponents above this are treated as overflowing `exp` (`f64::MAX.ln()` is ~709.78).
const LOG_MAX: f64 = 709.0;

/// A bound evaluation that may have saturated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    /// True when the double exponential exceeded f64 range; `value` is then `+inf`.
    pub overflow: bool,
}

impl BoundValue {
    pub fn finite(value: f64) -> Self {
        Self { value, overflow: false }
    }

    pub fn saturated() -> Self {
        Self { value: f64::INFINITY, overflow: true }
    }

    /// True when `observed <= value + slack` (a saturated bound holds vacuously).
    pub fn admits(&self, observed: f64, slack: f64) -> bool {
        self.overflow || observed <= self.value + slack
    }
}

/// `coefficient * exp(exponent)` in log space, saturating instead of overflowing.
fn scaled_exp(coefficient: f64, exponent: f64) -> BoundValue {
    if coefficient == 0.0 {
        return BoundValue::finite(0.0);
    }
    if exponent == 0.0 {
        // Keep zero-budget bounds exact: exp(ln(c)) can lose an ulp.
        return BoundValue::finite(coefficient);
    }
    if exponent.is_infinite() && exponent > 0.0 {
        return BoundValue::saturated();
    }
    let log_total = coefficient.ln() + exponent;
    if log_total > LOG_MAX {
        BoundValue::saturated()
    } else {
        BoundValue::finite(log_total.exp())
    }
}

/// `b_outer * (a + b_coef * exp(c * b_inner))`, returning `+inf` when the inner
/// exponential alone exceeds f64 range.
fn growth_exponent(a: f64, b_coef: f64, c: f64, b_outer: f64, b_inner: f64) -> f64 {
    if b_outer == 0.0 {
        return 0.0;
    }
    let inner = c * b_inner;
    if b_coef > 0.0 && inner > LOG_MAX {
        return f64::INFINITY;
    }
    let rate = if b_coef == 0.0 { a } else { a + b_coef * inner.exp() };
    b_outer * rate
}

/// Pseudo-Lipschitz constants (c1, c2) of the one-step update direction:
/// `c1` bounds the z-gradient by `c1 (1 + |x|)`, `c2` the x-gradient by `c2 (1 + |z|)`.
pub fn pseudo_lipschitz_constants(
    kernel: &KernelConstants,
    target: &TargetConstants,
    dim: usize,
) -> (f64, f64) {
    let d = dim as f64;
    let k2 = kernel.kappa_sq;
    let l = target.lipschitz;
    let xs = norm(&target.x_star);
    let c1 = (d.sqrt() * k2 * l).max(d.sqrt() * k2 * l * xs + d * k2);
    let c2 = k2 * l + d * k2 + l * (kernel.gamma + d.sqrt() * k2) * (1.0 + xs);
    (c1, c2)
}

/// The (A, B, C) growth constants of the discretization bounds:
/// A = (c1 + c2)(1 + m_P), B = c1 m_{Q0n,P} + c2 m_{Q0inf,P}, C = kappa^2 (3L + d).
#[allow(clippy::too_many_arguments)]
pub fn abc_constants(
    c1: f64,
    c2: f64,
    m_p: f64,
    m0p_n: f64,
    m0p_inf: f64,
    kappa_sq: f64,
    lipschitz: f64,
    dim: usize,
) -> (f64, f64, f64) {
    let a = (c1 + c2) * (1.0 + m_p);
    let b = c1 * m0p_n + c2 * m0p_inf;
    let c = kappa_sq * (3.0 * lipschitz + dim as f64);
    (a, b, c)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Every constant the bounds consume, assembled once per experiment and then treated
/// as read-only. `validate_consistency` recomputes the derived entries from the raw
/// ones so a hand-edited ledger cannot silently drift.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundConstants {
    pub kappa: f64,
    pub gamma: f64,
    pub lipschitz: f64,
    pub dim: usize,
    pub x_star_norm: f64,
    pub lambda: f64,
    pub m_p: f64,
    pub c1: f64,
    pub c2: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Initial coupling moments of the discrete ensemble: E||X - Z|| and E||X - Z||^2.
    pub m0p_n: f64,
    pub big_m0p_n: f64,
    /// Initial coupling moments of the reference (continuum-stand-in) measure.
    pub m0p_inf: f64,
    pub big_m0p_inf: f64,
    /// KL divergence of the reference initialization from the target.
    pub kl0: f64,
    pub alpha: f64,
}

impl BoundConstants {
    /// Assemble the ledger from kernel/target constants and measured initial moments.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        kernel: &KernelConstants,
        target: &TargetConstants,
        dim: usize,
        m0p_n: f64,
        big_m0p_n: f64,
        m0p_inf: f64,
        big_m0p_inf: f64,
        kl0: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::Precondition(format!(
                "descent parameter alpha must exceed 1, got {alpha}"
            )));
        }
        if !kl0.is_finite() || kl0 < 0.0 {
            return Err(Error::Precondition(format!(
                "initial KL divergence must be finite and nonnegative, got {kl0}"
            )));
        }
        for (name, v) in [
            ("m0p_n", m0p_n),
            ("big_m0p_n", big_m0p_n),
            ("m0p_inf", m0p_inf),
            ("big_m0p_inf", big_m0p_inf),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Precondition(format!(
                    "moment {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        let (c1, c2) = pseudo_lipschitz_constants(kernel, target, dim);
        let (a, b, c) = abc_constants(
            c1,
            c2,
            target.m_p,
            m0p_n,
            m0p_inf,
            kernel.kappa_sq,
            target.lipschitz,
            dim,
        );
        Ok(Self {
            kappa: kernel.kappa,
            gamma: kernel.gamma,
            lipschitz: target.lipschitz,
            dim,
            x_star_norm: norm(&target.x_star),
            lambda: target.lambda,
            m_p: target.m_p,
            c1,
            c2,
            a,
            b,
            c,
            m0p_n,
            big_m0p_n,
            m0p_inf,
            big_m0p_inf,
            kl0,
            alpha,
        })
    }

    /// Recompute every derived constant from the raw entries; error when any stored
    /// value disagrees beyond a 1e-12 relative tolerance.
    pub fn validate_consistency(&self) -> Result<()> {
        let d = self.dim as f64;
        let k2 = self.kappa * self.kappa;
        let c1 = (d.sqrt() * k2 * self.lipschitz)
            .max(d.sqrt() * k2 * self.lipschitz * self.x_star_norm + d * k2);
        let c2 = k2 * self.lipschitz
            + d * k2
            + self.lipschitz * (self.gamma + d.sqrt() * k2) * (1.0 + self.x_star_norm);
        let (a, b, c) = abc_constants(
            c1,
            c2,
            self.m_p,
            self.m0p_n,
            self.m0p_inf,
            k2,
            self.lipschitz,
            self.dim,
        );
        for (name, stored, fresh) in [
            ("c1", self.c1, c1),
            ("c2", self.c2, c2),
            ("a", self.a, a),
            ("b", self.b, b),
            ("c", self.c, c),
        ] {
            let scale = stored.abs().max(fresh.abs()).max(1.0);
            if (stored - fresh).abs() > 1e-12 * scale {
                return Err(Error::ConstantViolation {
                    what: name,
                    at: vec![],
                    value: stored,
                    limit: fresh,
                });
            }
        }
        Ok(())
    }
}

/// A step-size sequence with its prefix sums.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepSchedule {
    eps: Vec<f64>,
    /// `b[r] = sum of the first r steps`; length `eps.len() + 1`, `b[0] = 0`.
    b: Vec<f64>,
}

impl StepSchedule {
    pub fn from_steps(eps: Vec<f64>) -> Result<Self> {
        for (r, &e) in eps.iter().enumerate() {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::Precondition(format!(
                    "step size at round {r} must be finite and nonnegative, got {e}"
                )));
            }
        }
        let mut b = Vec::with_capacity(eps.len() + 1);
        let mut acc = KahanSum::new();
        b.push(0.0);
        for &e in &eps {
            acc.add(e);
            b.push(acc.value());
        }
        Ok(Self { eps, b })
    }

    pub fn constant(eps: f64, steps: usize) -> Result<Self> {
        Self::from_steps(vec![eps; steps])
    }

    /// Greedy schedule for a total budget under a per-step cap: full steps of `cap`
    /// followed by one remainder step. A zero budget yields an empty schedule.
    pub fn from_budget(budget: f64, cap: f64) -> Result<Self> {
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::Precondition(format!("step cap must be positive, got {cap}")));
        }
        if !budget.is_finite() || budget < 0.0 {
            return Err(Error::Precondition(format!(
                "step budget must be finite and nonnegative, got {budget}"
            )));
        }
        let mut eps = Vec::new();
        let mut remaining = budget;
        while remaining > cap {
            eps.push(cap);
            remaining -= cap;
        }
        if remaining > 0.0 {
            eps.push(remaining);
        }
        Self::from_steps(eps)
    }

    pub fn steps(&self) -> &[f64] {
        &self.eps
    }

    /// Prefix sums, one per round: `prefix()[r]` is the budget consumed before round r.
    pub fn prefix(&self) -> &[f64] {
        &self.b
    }

    /// Number of rounds (one more than the number of steps).
    pub fn rounds(&self) -> usize {
        self.b.len()
    }

    pub fn total(&self) -> f64 {
        *self.b.last().expect("prefix never empty")
    }

    /// Error when any step exceeds `cap` (beyond roundoff).
    pub fn check_cap(&self, cap: f64) -> Result<()> {
        for (r, &e) in self.eps.iter().enumerate() {
            if e > cap * (1.0 + 1e-12) {
                return Err(Error::ConstantViolation {
                    what: "step size exceeds the descent cap",
                    at: vec![r as f64],
                    value: e,
                    limit: cap,
                });
            }
        }
        Ok(())
    }
}

/// Moment growth bounds along a schedule, in both the sharper product form
/// `prod (1 + eps_s C)` and the looser exponential form `exp(C b)`.
#[derive(Clone, Debug, Serialize)]
pub struct MomentBounds {
    /// Bound on the mean norm (and a fortiori the coupled first moment):
    /// `m0P * exp(C b[r]) + m_P`.
    pub first_exp: Vec<f64>,
    /// `m0P * prod_{s<r} (1 + eps_s C) + m_P`.
    pub first_product: Vec<f64>,
    /// Bound on the coupled second moment: `M0P * exp(2 C b[r])`.
    pub second_exp: Vec<f64>,
    /// `M0P * prod_{s<r} (1 + eps_s C)^2`.
    pub second_product: Vec<f64>,
}

pub fn moment_bounds(m0p: f64, big_m0p: f64, m_p: f64, c: f64, schedule: &StepSchedule) -> MomentBounds {
    let rounds = schedule.rounds();
    let mut first_exp = Vec::with_capacity(rounds);
    let mut first_product = Vec::with_capacity(rounds);
    let mut second_exp = Vec::with_capacity(rounds);
    let mut second_product = Vec::with_capacity(rounds);
    let mut product = 1.0_f64;
    for r in 0..rounds {
        if r > 0 {
            product *= 1.0 + schedule.steps()[r - 1] * c;
        }
        let b = schedule.prefix()[r];
        first_exp.push(m0p * (c * b).exp() + m_p);
        first_product.push(m0p * product + m_p);
        second_exp.push(big_m0p * (2.0 * c * b).exp());
        second_product.push(big_m0p * product * product);
    }
    MomentBounds { first_exp, first_product, second_exp, second_product }
}

/// Uniform bound on how far one update of step `eps` moves any point:
/// `eps * C * m_{mu,P}` for the current coupled first moment.
pub fn one_step_displacement_bound(eps: f64, c: f64, m_mu_p: f64) -> f64 {
    eps * c * m_mu_p
}

/// Wasserstein discretization bound per round, statement form:
/// `w0n * exp(b[r] (A + B exp(C b[r])))`.
pub fn wass_discretization_bound(
    w0n: f64,
    a: f64,
    b: f64,
    c: f64,
    schedule: &StepSchedule,
) -> Vec<BoundValue> {
    schedule
        .prefix()
        .iter()
        .map(|&bp| scaled_exp(w0n, growth_exponent(a, b, c, bp, bp)))
        .collect()
}

/// Sharper per-round variant with the inner exponential lagged one round:
/// `w0n * exp(b[r] (A + B exp(C b[r-1])))`. Never exceeds the statement form.
pub fn wass_discretization_bound_tight(
    w0n: f64,
    a: f64,
    b: f64,
    c: f64,
    schedule: &StepSchedule,
) -> Vec<BoundValue> {
    (0..schedule.rounds())
        .map(|r| {
            let outer = schedule.prefix()[r];
            let inner = schedule.prefix()[r.saturating_sub(1)];
            scaled_exp(w0n, growth_exponent(a, b, c, outer, inner))
        })
        .collect()
}

/// KSD discretization bound per round: the Wasserstein bound pushed through the
/// KSD-vs-Wasserstein comparison, giving
/// `kappa (d + L) w0n exp(E_r) + d^{1/4} kappa L sqrt(2 M0P_inf w0n) exp((2C b[r] + E_r)/2)`
/// with `E_r = b[r] (A + B exp(C b[r]))`.
#[allow(clippy::too_many_arguments)]
pub fn ksd_discretization_bound(
    w0n: f64,
    a: f64,
    b: f64,
    c: f64,
    kappa: f64,
    lipschitz: f64,
    dim: usize,
    big_m0p_inf: f64,
    schedule: &StepSchedule,
) -> Vec<BoundValue> {
    schedule
        .prefix()
        .iter()
        .map(|&bp| ksd_gap_bound(w0n, a, b, c, kappa, lipschitz, dim, big_m0p_inf, bp, bp))
        .collect()
}

/// Shared two-term expression behind the per-round KSD bound and the terminal
/// error term; `b_outer`/`b_inner` are the prefix sums fed to the two exponentials
/// of the first term (`b_inner = b_outer` in the per-round form).
#[allow(clippy::too_many_arguments)]
fn ksd_gap_bound(
    w0n: f64,
    a: f64,
    b: f64,
    c: f64,
    kappa: f64,
    lipschitz: f64,
    dim: usize,
    big_m0p_inf: f64,
    b_outer: f64,
    b_inner: f64,
) -> BoundValue {
    let d = dim as f64;
    let coef1 = kappa * (d + lipschitz) * w0n;
    let coef2 = d.powf(0.25) * kappa * lipschitz * (2.0 * big_m0p_inf * w0n).sqrt();
    let t1 = scaled_exp(coef1, growth_exponent(a, b, c, b_outer, b_inner));
    let t2 = scaled_exp(
        coef2,
        growth_exponent(2.0 * c + a, b, c, b_outer, b_outer) / 2.0,
    );
    if t1.overflow || t2.overflow {
        BoundValue::saturated()
    } else {
        BoundValue::finite(t1.value + t2.value)
    }
}

/// Terminal KSD gap term for the unified finite-particle bound. Its first term reads
/// the inner exponential one step ahead, so the prefix sum is extended by
/// `final_eps` (the step cap, by convention) past `b_tm1`.
#[allow(clippy::too_many_arguments)]
pub fn terminal_ksd_gap(
    w0n: f64,
    a: f64,
    b: f64,
    c: f64,
    kappa: f64,
    lipschitz: f64,
    dim: usize,
    big_m0p_inf: f64,
    b_tm1: f64,
    final_eps: f64,
) -> BoundValue {
    let d = dim as f64;
    let coef1 = kappa * (d + lipschitz) * w0n;
    let coef2 = d.powf(0.25) * kappa * lipschitz * (2.0 * big_m0p_inf * w0n).sqrt();
    let t1 = scaled_exp(coef1, growth_exponent(a, b, c, b_tm1, b_tm1 + final_eps));
    let t2 = scaled_exp(coef2, growth_exponent(2.0 * c + a, b, c, b_tm1, b_tm1) / 2.0);
    if t1.overflow || t2.overflow {
        BoundValue::saturated()
    } else {
        BoundValue::finite(t1.value + t2.value)
    }
}

/// The two branch values and minimum of the descent step cap.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MaxStep {
    pub r: f64,
    /// `p / (kappa^2 (L + alpha^2))`.
    pub branch_step: f64,
    /// `(alpha - 1)(1 + L E||X - x*|| + 2 L sqrt(2 KL0 / lambda))`.
    pub branch_init: f64,
}

/// Largest admissible step size for the continuous-time descent comparison, order
/// `p` in {1, 2}. `e_dist_x_star` is the reference initialization's mean distance
/// from the score root (use an exact value: the cap must not be over-estimated).
pub fn max_step(
    alpha: f64,
    kappa_sq: f64,
    lipschitz: f64,
    lambda: f64,
    e_dist_x_star: f64,
    kl0: f64,
    p: u8,
) -> Result<MaxStep> {
    if !(alpha > 1.0) {
        return Err(Error::Precondition(format!(
            "descent parameter alpha must exceed 1, got {alpha}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::Precondition(format!(
            "log-Sobolev constant must be positive, got {lambda}"
        )));
    }
    if !kl0.is_finite() {
        return Err(Error::Precondition(
            "initial KL divergence must be finite (initialization must be absolutely continuous)"
                .into(),
        ));
    }
    if !matches!(p, 1 | 2) {
        return Err(Error::Precondition(format!("moment order p must be 1 or 2, got {p}")));
    }
    let branch_step = f64::from(p) / (kappa_sq * (lipschitz + alpha * alpha));
    let branch_init = (alpha - 1.0)
        * (1.0 + lipschitz * e_dist_x_star + 2.0 * lipschitz * (2.0 * kl0 / lambda).sqrt());
    Ok(MaxStep { r: branch_step.min(branch_init), branch_step, branch_init })
}

/// Descent-weighted averaging weights over rounds: `pi_r = c(eps_r) / sum c(eps_s)`
/// for `c(eps) = eps (1 - kappa^2 (L + alpha^2) eps / 2)`.
///
/// `eps` must hold one entry per round (the final round's entry is the step cap by
/// convention), each at most `1 / (kappa^2 (L + alpha^2))` so that
/// `eps/2 <= c(eps) < eps`.
pub fn step_weights(
    eps: &[f64],
    kappa_sq: f64,
    lipschitz: f64,
    alpha: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if eps.is_empty() {
        return Err(Error::Precondition("weights need at least one round".into()));
    }
    let rate = kappa_sq * (lipschitz + alpha * alpha);
    let cap = 1.0 / rate;
    let mut c_vals = Vec::with_capacity(eps.len());
    let mut total = KahanSum::new();
    for (r, &e) in eps.iter().enumerate() {
        if !e.is_finite() || e < 0.0 {
            return Err(Error::Precondition(format!(
                "step size at round {r} must be finite and nonnegative, got {e}"
            )));
        }
        if e > cap * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "step size {e} at round {r} exceeds the weight cap {cap}"
            )));
        }
        let cv = e * (1.0 - 0.5 * rate * e);
        if e > 0.0 && !(cv >= 0.5 * e - 1e-15 && cv < e) {
            return Err(Error::ConstantViolation {
                what: "descent weight left its guaranteed window [eps/2, eps)",
                at: vec![r as f64],
                value: cv,
                limit: e,
            });
        }
        c_vals.push(cv);
        total.add(cv);
    }
    let total = total.value();
    if total <= 0.0 {
        return Err(Error::Precondition(
            "all step sizes are zero; averaging weights are undefined".into(),
        ));
    }
    let pi = c_vals.iter().map(|cv| cv / total).collect();
    Ok((c_vals, pi))
}

/// Unified finite-particle KSD bound: terminal gap term plus the continuous-descent
/// term `sqrt(2 KL0 / (R + b_{t-1}))`.
pub fn finite_particle_bound(
    terminal_gap: BoundValue,
    kl0: f64,
    r_alpha1: f64,
    b_tm1: f64,
) -> BoundValue {
    if terminal_gap.overflow {
        return BoundValue::saturated();
    }
    BoundValue::finite(terminal_gap.value + (2.0 * kl0 / (r_alpha1 + b_tm1)).sqrt())
}

/// Growth function `phi(w) = log log(e^e + 1/w)`; at least 1 for every `w > 0`.
pub fn growth_phi(w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::Precondition(format!("phi needs a positive argument, got {w}")));
    }
    Ok((std::f64::consts::E.exp() + 1.0 / w).ln().ln())
}

/// Growth function `psi_{B,C}(x, y, beta) = (1/C) log((1/B) max(B, (1/beta) log(1/x) - y))`;
/// the clamp keeps it nonnegative.
pub fn growth_psi(b_bar: f64, c_bar: f64, x: f64, y: f64, beta: f64) -> Result<f64> {
    if !(b_bar > 0.0) || !(c_bar > 0.0) {
        return Err(Error::Precondition(format!(
            "psi needs positive scale constants, got B={b_bar}, C={c_bar}"
        )));
    }
    if !(x > 0.0) {
        return Err(Error::Precondition(format!("psi needs a positive argument, got x={x}")));
    }
    if !(beta > 0.0) {
        return Err(Error::Precondition(format!("psi needs a positive beta, got {beta}")));
    }
    Ok(((x.recip().ln() / beta - y).max(b_bar) / b_bar).ln() / c_bar)
}

/// Output of the step-budget selection: the budget, both branch values, and the
/// self-referential betas.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StepBudget {
    pub b: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub branch1: f64,
    pub branch2: f64,
}

/// Step-size sum chosen to balance the gap and descent terms:
/// `b = min(psi(w sqrt(phi(w)), A, beta1), psi(w phi(w), A + 2C, beta2))` with
/// `beta_i = max(1, psi(..., ..., 1))`.
pub fn step_budget(w_bar: f64, a_bar: f64, b_bar: f64, c_bar: f64) -> Result<StepBudget> {
    let phi = growth_phi(w_bar)?;
    let x1 = w_bar * phi.sqrt();
    let x2 = w_bar * phi;
    let beta1 = growth_psi(b_bar, c_bar, x1, a_bar, 1.0)?.max(1.0);
    let beta2 = growth_psi(b_bar, c_bar, x2, a_bar + 2.0 * c_bar, 1.0)?.max(1.0);
    let branch1 = growth_psi(b_bar, c_bar, x1, a_bar, beta1)?;
    let branch2 = growth_psi(b_bar, c_bar, x2, a_bar + 2.0 * c_bar, beta2)?;
    Ok(StepBudget { b: branch1.min(branch2), beta1, beta2, branch1, branch2 })
}

/// Slack of the budget's fixed-point property on each branch:
/// `psi(..., ..., b) - b`, which must be nonnegative whenever `b > 0`.
pub fn step_budget_fixed_point_slacks(
    w_bar: f64,
    a_bar: f64,
    b_bar: f64,
    c_bar: f64,
    budget: &StepBudget,
) -> Result<(f64, f64)> {
    if budget.b <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let phi = growth_phi(w_bar)?;
    let s1 = growth_psi(b_bar, c_bar, w_bar * phi.sqrt(), a_bar, budget.b)? - budget.b;
    let s2 =
        growth_psi(b_bar, c_bar, w_bar * phi, a_bar + 2.0 * c_bar, budget.b)? - budget.b;
    Ok((s1, s2))
}

/// Inputs of the closed-form rate expression.
#[derive(Clone, Copy, Debug)]
pub struct RateInputs {
    pub kappa: f64,
    pub lipschitz: f64,
    pub dim: usize,
    pub big_m0p_inf: f64,
    pub kl0: f64,
    pub r_alpha1: f64,
    pub w_bar: f64,
    pub a_bar: f64,
    pub b_bar: f64,
    pub c_bar: f64,
    /// The scheduled budget `b_{t-1}`; selects which branch applies.
    pub budget_b: f64,
}

/// Right-hand side of the scheduled convergence rate. With a zero budget the gap
/// terms enter at full strength; otherwise both shrink like `1/sqrt(phi(w))` and the
/// descent term gains the budget in its denominator.
pub fn rate_rhs(inputs: &RateInputs) -> Result<f64> {
    let d = inputs.dim as f64;
    let gap_coef = inputs.kappa * (d + inputs.lipschitz);
    if inputs.budget_b == 0.0 {
        let t1 = gap_coef * inputs.w_bar;
        let t2 = d.powf(0.25)
            * inputs.kappa
            * inputs.lipschitz
            * (2.0 * inputs.big_m0p_inf * inputs.w_bar).sqrt();
        return Ok(t1 + t2 + (2.0 * inputs.kl0 / inputs.r_alpha1).sqrt());
    }
    let phi = growth_phi(inputs.w_bar)?;
    let numer = gap_coef
        + d.powf(0.25) * inputs.kappa * inputs.lipschitz * (2.0 * inputs.big_m0p_inf).sqrt();
    let psi_floor = growth_psi(inputs.b_bar, inputs.c_bar, inputs.w_bar, 0.0, 1.0)?.max(1.0);
    let raw = (inputs.w_bar * phi).recip().ln() / psi_floor
        - inputs.a_bar
        - 2.0 * inputs.c_bar;
    // The printed expression omits the clamp, but the quantity it lower-bounds is the
    // budget, which is nonnegative by construction; clamp so the log stays defined.
    let budget_term = (raw.max(inputs.b_bar) / inputs.b_bar).ln() / inputs.c_bar;
    Ok(numer / phi.sqrt()
        + (2.0 * inputs.kl0 / (inputs.r_alpha1 + budget_term)).sqrt())
}

/// High-probability bound on the initial discretization error of an i.i.d.
/// initialization: `M log(n)^{1{d=2}} / (delta n^{1/(2 v d)})`.
pub fn iid_init_bound(big_m_q0inf: f64, n: f64, dim: usize, delta: f64) -> Result<f64> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::Precondition(format!("sample count must be at least 1, got {n}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Precondition(format!(
            "failure probability delta must lie in (0, 1], got {delta}"
        )));
    }
    if !big_m_q0inf.is_finite() || big_m_q0inf < 0.0 {
        return Err(Error::Precondition(format!(
            "second moment must be finite and nonnegative, got {big_m_q0inf}"
        )));
    }
    let log_factor = if dim == 2 { n.ln() } else { 1.0 };
    let exponent = 1.0 / 2.0f64.max(dim as f64);
    Ok(big_m_q0inf * log_factor / (delta * n.powf(exponent)))
}
