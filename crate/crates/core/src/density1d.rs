//! Continuous-measure surrogate on the line: a quadrature representation of a density
//! that is pushed through the exact transport map with change-of-variables density
//! tracking. This is what makes KL divergence to the target computable, which in turn
//! lets the harness check the descent inequality and its summed consequence.
//!
//! Only 1-D is supported: the scalar Jacobian `1 + eps * d(direction)/dx` is available
//! in closed form from the kernel derivatives, whereas a faithful multi-dimensional
//! density update would need the log-determinant of an n-body map.
//!
//! The surrogate is deliberately strict about step sizes. A nonpositive Jacobian or a
//! node-ordering violation raises [`Error::StepTooLarge`] rather than clamping: the
//! theory's step caps are supposed to make that impossible, so hitting it is signal.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::numeric::{kahan_sum, trapezoid_cells, KahanSum};
use crate::targets::Target;
use crate::theory;
use crate::transport::ParticleEnsemble;

/// Default node count for quadrature grids.
pub const DEFAULT_NODES: usize = 2001;
/// Half-width of the default grid in standard deviations of the wider measure.
const GRID_SIGMAS: f64 = 12.0;
/// Coverage required of the non-defining measure, in its own standard deviations.
const COVER_SIGMAS: f64 = 8.0;
/// Tolerance for KL estimates going negative (discretization floor).
pub const TOL_DISC: f64 = 1e-4;
/// Allowed drift of the trapezoid density integral away from 1.
const NORMALIZATION_TOL: f64 = 1e-3;

/// A continuous measure represented by weighted nodes with tracked log density.
///
/// Weights are the measure of each node's cell (they sum to one and never change);
/// log densities are d(mu)/dx at the nodes and are updated by the change of variables
/// when the measure is pushed through a transport map.
#[derive(Clone, Debug)]
pub struct QuadratureMeasure {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_density: Vec<f64>,
}

impl QuadratureMeasure {
    /// Discretize a 1-D target on a uniform grid over `[lo, hi]` with trapezoid-cell
    /// weights, normalized to unit total mass.
    pub fn from_target(target: &Target, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if target.dim() != 1 {
            return Err(Error::InvalidSpec(
                "quadrature measures are 1-D; higher-dimensional density tracking is unsupported"
                    .into(),
            ));
        }
        if points < 3 {
            return Err(Error::InvalidSpec(format!(
                "quadrature grid needs at least 3 nodes, got {points}"
            )));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "quadrature interval [{lo}, {hi}] is not a finite nonempty range"
            )));
        }
        let nodes: Vec<f64> = (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let log_density: Vec<f64> = nodes
            .iter()
            .map(|&x| target.log_density(&[x]))
            .collect::<Result<_>>()?;
        let cells = trapezoid_cells(&nodes);
        let mut weights: Vec<f64> =
            cells.iter().zip(&log_density).map(|(c, lq)| c * lq.exp()).collect();
        normalize_weights(&mut weights)?;
        Ok(Self { nodes, weights, log_density })
    }

    /// Default grid for a pair of 1-D measures: the wider one's mean plus/minus 12 of
    /// its standard deviations, checked to also cover the narrower one's mean
    /// plus/minus 8 of *its* standard deviations.
    pub fn default_grid(init: &Target, target: &Target) -> Result<(f64, f64)> {
        let a = init.scalar_moments()?;
        let b = target.scalar_moments()?;
        let (wide, narrow) = if a.1 >= b.1 { (a, b) } else { (b, a) };
        let (lo, hi) = (wide.0 - GRID_SIGMAS * wide.1, wide.0 + GRID_SIGMAS * wide.1);
        let need = (narrow.0 - COVER_SIGMAS * narrow.1, narrow.0 + COVER_SIGMAS * narrow.1);
        if need.0 < lo || need.1 > hi {
            return Err(Error::Config(format!(
                "default grid [{lo}, {hi}] does not cover the companion measure's core [{}, {}]; \
                 pass an explicit interval",
                need.0, need.1
            )));
        }
        Ok((lo, hi))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// View as a weighted particle ensemble (for KSD, Wasserstein, and moments).
    pub fn to_ensemble(&self) -> Result<ParticleEnsemble> {
        ParticleEnsemble::new(self.nodes.clone(), 1, self.weights.clone())
    }

    /// Derivative of the transport map `x + eps * direction(x)` at `x`, using the
    /// closed-form kernel derivatives.
    pub fn transport_jacobian(
        &self,
        x: f64,
        eps: f64,
        target: &Target,
        kernel: &KernelSpec,
    ) -> Result<f64> {
        Ok(1.0 + eps * self.direction_derivative(x, target, kernel)?)
    }

    /// d/dx of `sum_i w_i [s(n_i) k(n_i, x) + d_1 k(n_i, x)]`.
    fn direction_derivative(&self, x: f64, target: &Target, kernel: &KernelSpec) -> Result<f64> {
        let pt = [x];
        let mut acc = KahanSum::new();
        for (node, &w) in self.nodes.iter().zip(&self.weights) {
            let xi = [*node];
            let s = target.score(&xi)?[0];
            let dk_dx = kernel.k_grad_y(&xi, &pt)?[0];
            let cross = kernel.k_cross_hess_trace(&xi, &pt)?;
            acc.add(w * (s * dk_dx + cross));
        }
        Ok(acc.value())
    }

    /// Push through one transport step: nodes move simultaneously, log densities pick
    /// up `-ln J`, weights are untouched. The field and its derivative share one
    /// radial-profile evaluation per node pair, with scores hoisted out of the loop.
    pub fn push(&self, eps: f64, target: &Target, kernel: &KernelSpec) -> Result<Self> {
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::Precondition(format!(
                "step size must be finite and nonnegative, got {eps}"
            )));
        }
        let scores: Vec<f64> = self
            .nodes
            .iter()
            .map(|&x| Ok(target.score(&[x])?[0]))
            .collect::<Result<_>>()?;
        let moved: Vec<(f64, f64)> = (0..self.nodes.len())
            .into_par_iter()
            .map(|i| {
                let x = self.nodes[i];
                let mut dir = KahanSum::new();
                let mut ddx = KahanSum::new();
                for ((&node, &w), &s) in self.nodes.iter().zip(&self.weights).zip(&scores) {
                    let diff = node - x;
                    let u = diff * diff;
                    let (f0, f1, f2) = kernel.profile_parts(u);
                    dir.add(w * (s * f0 + 2.0 * f1 * diff));
                    ddx.add(w * (s * (-2.0 * f1 * diff) + (-2.0 * f1 - 4.0 * u * f2)));
                }
                let (dir, ddx) = (dir.value(), ddx.value());
                if !dir.is_finite() || !ddx.is_finite() {
                    return Err(Error::NumericOverflow {
                        context: format!("transport field at node {i}"),
                    });
                }
                Ok((x + eps * dir, 1.0 + eps * ddx))
            })
            .collect::<Result<_>>()?;
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut log_density = Vec::with_capacity(self.nodes.len());
        for (i, &(x_new, jac)) in moved.iter().enumerate() {
            if !(jac > 0.0) {
                return Err(Error::StepTooLarge { node: i, jacobian: jac });
            }
            nodes.push(x_new);
            log_density.push(self.log_density[i] - jac.ln());
        }
        for i in 1..nodes.len() {
            if nodes[i] <= nodes[i - 1] {
                return Err(Error::StepTooLarge {
                    node: i,
                    jacobian: nodes[i] - nodes[i - 1],
                });
            }
        }
        Ok(Self { nodes, weights: self.weights.clone(), log_density })
    }

    /// KL divergence to a 1-D target: `sum_i w_i (log q_i - log p(node_i))`.
    /// Values below the discretization floor `-1e-4` indicate a grid too coarse for
    /// the measure it carries and are an error.
    pub fn kl_to_target(&self, target: &Target) -> Result<f64> {
        let mut acc = KahanSum::new();
        for (i, (&x, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let lq = self.log_density[i];
            if !lq.is_finite() {
                return Err(Error::NonFinite("log density at a quadrature node"));
            }
            acc.add(w * (lq - target.log_density(&[x])?));
        }
        let kl = acc.value();
        if kl < -TOL_DISC {
            return Err(Error::Discretization(format!(
                "KL estimate {kl} fell below the -{TOL_DISC} floor; quadrature grid too coarse"
            )));
        }
        Ok(kl)
    }

    /// Trapezoid integral of the tracked density over the current nodes; should stay
    /// within `1e-3` of 1 along any trajectory the step caps admit.
    pub fn total_density_integral(&self) -> f64 {
        let density: Vec<f64> = self.log_density.iter().map(|lq| lq.exp()).collect();
        let cells = trapezoid_cells(&self.nodes);
        kahan_sum(cells.iter().zip(&density).map(|(c, q)| c * q))
    }

    /// Largest relative disagreement between a node's weight and density x cell size.
    /// Stays at discretization scale as long as the tracked density is consistent.
    pub fn weight_density_consistency(&self) -> f64 {
        let cells = trapezoid_cells(&self.nodes);
        let mut worst: f64 = 0.0;
        for i in 0..self.nodes.len() {
            let implied = cells[i] * self.log_density[i].exp();
            let scale = self.weights[i].max(1e-300);
            worst = worst.max((implied - self.weights[i]).abs() / scale);
        }
        worst
    }

    /// Drift of the density normalization away from unit mass.
    pub fn normalization_drift(&self) -> f64 {
        (self.total_density_integral() - 1.0).abs()
    }

    pub fn check_normalization(&self) -> Result<()> {
        let drift = self.normalization_drift();
        if drift > NORMALIZATION_TOL {
            return Err(Error::Discretization(format!(
                "density normalization drifted by {drift}, beyond {NORMALIZATION_TOL}"
            )));
        }
        Ok(())
    }
}

/// Scale weights to unit total and absorb the Kahan residual into the last entry so
/// the compensated sum is exactly 1.
fn normalize_weights(weights: &mut [f64]) -> Result<()> {
    let total = kahan_sum(weights.iter().copied());
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "quadrature weights must have positive finite mass, got {total}"
        )));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    let residual = 1.0 - kahan_sum(weights.iter().copied());
    if let Some(last) = weights.last_mut() {
        *last += residual;
    }
    for (i, w) in weights.iter().enumerate() {
        if !(*w > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "quadrature weight at node {i} must be positive, got {w}"
            )));
        }
    }
    Ok(())
}

/// Evolve a quadrature measure through the given step sequence, returning every
/// intermediate measure (length `eps.len() + 1`).
pub fn run_quadrature(
    init: QuadratureMeasure,
    eps: &[f64],
    target: &Target,
    kernel: &KernelSpec,
) -> Result<Vec<QuadratureMeasure>> {
    let mut measures = Vec::with_capacity(eps.len() + 1);
    measures.push(init);
    for &e in eps {
        let next = measures.last().expect("nonempty").push(e, target, kernel)?;
        measures.push(next);
    }
    Ok(measures)
}

/// Inputs of the descent verification.
pub struct DescentCheck<'a> {
    pub target: &'a Target,
    pub kernel: &'a KernelSpec,
    pub kappa_sq: f64,
    pub lipschitz: f64,
    pub alpha: f64,
    /// Order-2 step cap; when set, every step is validated against it first.
    pub step_cap_p2: Option<f64>,
    /// Slack tolerance for the quadrature-based inequalities.
    pub tol_disc: f64,
}

/// Per-round and aggregate results of the descent verification.
#[derive(Clone, Debug)]
pub struct DescentReport {
    pub kl: Vec<f64>,
    pub ksd: Vec<f64>,
    /// Per-step slack: descent-bound RHS minus the realized KL decrement.
    pub slack: Vec<f64>,
    pub min_slack: f64,
    /// Weighted KSD-squared average over all steps (when the weights are defined).
    pub aggregate_lhs: Option<f64>,
    /// `2 KL_0 / (total step budget)`.
    pub aggregate_rhs: Option<f64>,
    /// Steps whose slack fell below the tolerance.
    pub violations: Vec<usize>,
}

/// Check the per-step KL descent inequality
/// `KL_{r+1} - KL_r <= -eps_r (1 - kappa^2 (L + alpha^2) eps_r / 2) KSD_r^2`
/// along a quadrature trajectory, plus its summed consequence
/// `sum_r pi_r KSD_r^2 <= 2 KL_0 / sum_r eps_r`.
pub fn verify_descent(
    measures: &[QuadratureMeasure],
    eps: &[f64],
    check: &DescentCheck<'_>,
) -> Result<DescentReport> {
    if measures.len() != eps.len() + 1 {
        return Err(Error::DimensionMismatch { left: measures.len(), right: eps.len() + 1 });
    }
    if let Some(cap) = check.step_cap_p2 {
        for (r, &e) in eps.iter().enumerate() {
            if e > cap * (1.0 + 1e-12) {
                return Err(Error::Precondition(format!(
                    "step {e} at round {r} exceeds the order-2 cap {cap}"
                )));
            }
        }
    }
    let ctx = crate::discrepancy::SteinContext::new(check.target, check.kernel);
    let mut kl = Vec::with_capacity(measures.len());
    let mut ksd = Vec::with_capacity(measures.len());
    for m in measures {
        kl.push(m.kl_to_target(check.target)?);
        ksd.push(ctx.ksd_to_target(&m.to_ensemble()?)?);
    }
    let rate = check.kappa_sq * (check.lipschitz + check.alpha * check.alpha);
    let mut slack = Vec::with_capacity(eps.len());
    let mut violations = Vec::new();
    for r in 0..eps.len() {
        let rhs = -eps[r] * (1.0 - 0.5 * rate * eps[r]) * ksd[r] * ksd[r];
        let s = rhs - (kl[r + 1] - kl[r]);
        if s < -check.tol_disc {
            violations.push(r);
        }
        slack.push(s);
    }
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    let (aggregate_lhs, aggregate_rhs) = if eps.is_empty() {
        (None, None)
    } else {
        match theory::step_weights(eps, check.kappa_sq, check.lipschitz, check.alpha) {
            Ok((_, pi)) => {
                let lhs =
                    kahan_sum(pi.iter().zip(&ksd).map(|(&p, &k)| p * k * k));
                let total_eps = kahan_sum(eps.iter().copied());
                (Some(lhs), Some(2.0 * kl[0] / total_eps))
            }
            Err(_) => (None, None),
        }
    };
    Ok(DescentReport { kl, ksd, slack, min_slack, aggregate_lhs, aggregate_rhs, violations })
}

/// Dump a quadrature trajectory as CSV with columns `round,node,weight,log_density`.
pub fn write_density_csv<W: Write>(out: &mut W, measures: &[QuadratureMeasure]) -> Result<()> {
    writeln!(out, "round,node,weight,log_density")?;
    for (round, m) in measures.iter().enumerate() {
        for i in 0..m.len() {
            writeln!(out, "{round},{},{},{}", m.nodes[i], m.weights[i], m.log_density[i])?;
        }
    }
    Ok(())
}
