//! Small numeric building blocks shared across modules: compensated summation,
//! finite differences, trapezoid quadrature, and closed-form absolute moments.
//!
//! Every routine here is deterministic: summation order is fixed by the caller's index
//! order, so repeated runs produce bit-identical results.

use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;

/// Compensated (Kahan–Babuška–Neumaier) accumulator.
///
/// The correction term also captures the case where the incoming term is larger than the
/// running sum, so the result is exact to within one final rounding for well-scaled inputs.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    correction: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.correction += (self.sum - t) + term;
        } else {
            self.correction += (term - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.correction
    }
}

/// Compensated sum of an iterator in its native order.
pub fn kahan_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// Central difference (f(x+h) - f(x-h)) / 2h.
pub fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// log(sum(exp(v))) without overflow; returns -inf for an empty slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s = kahan_sum(values.iter().map(|&v| (v - m).exp()));
    m + s.ln()
}

/// Trapezoid cell sizes for a sorted node vector: half the span of each node's
/// neighboring gaps, so that sum_i cell_i * f(x_i) is the composite trapezoid rule.
pub fn trapezoid_cells(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    assert!(n >= 2, "trapezoid rule needs at least two nodes");
    let mut cells = vec![0.0; n];
    cells[0] = 0.5 * (nodes[1] - nodes[0]);
    cells[n - 1] = 0.5 * (nodes[n - 1] - nodes[n - 2]);
    for i in 1..n - 1 {
        cells[i] = 0.5 * (nodes[i + 1] - nodes[i - 1]);
    }
    cells
}

/// Composite trapezoid integral of sampled values over sorted nodes.
pub fn trapezoid_integral(nodes: &[f64], values: &[f64]) -> f64 {
    assert_eq!(nodes.len(), values.len());
    let cells = trapezoid_cells(nodes);
    kahan_sum(cells.iter().zip(values).map(|(c, v)| c * v))
}

/// E|Z| for Z ~ N(mu, sigma^2) (folded normal mean):
/// sigma sqrt(2/pi) exp(-mu^2 / 2 sigma^2) + mu erf(mu / (sigma sqrt(2))).
pub fn folded_normal_mean(mu: f64, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let z = mu / sigma;
    sigma * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp()
        + mu * erf(z / std::f64::consts::SQRT_2)
}

/// E||Z|| for Z ~ N(0, I_d): sqrt(2) Gamma((d+1)/2) / Gamma(d/2).
pub fn chi_mean(d: usize) -> f64 {
    debug_assert!(d >= 1);
    let d = d as f64;
    (0.5 * std::f64::consts::LN_2 + ln_gamma(0.5 * (d + 1.0)) - ln_gamma(0.5 * d)).exp()
}
