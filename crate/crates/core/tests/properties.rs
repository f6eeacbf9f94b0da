//! Randomized searches for counterexamples to the "for all" claims the library makes:
//! kernel regularity, Stein-kernel identities, metric axioms of the exact Wasserstein
//! distance, and the displacement / contraction / moment-growth guarantees of the
//! transport map. Closed-form spot values live in the unit suites; the acceptance
//! suite exercises full runs. Every inequality asserted here is checked in the exact
//! form the bound modules emit, with roundoff slack only.

use proptest::prelude::*;
use svgd_core::discrepancy::{moments, wasserstein1, MomentMethod, SteinContext};
use svgd_core::kernels::{GridCheck, KernelSpec};
use svgd_core::numeric::central_diff;
use svgd_core::targets::{Target, TargetSpec};
use svgd_core::theory;
use svgd_core::transport::{max_displacement, svgd_step, ParticleEnsemble};

const FD_STEP: f64 = 1e-5;

// ---------------------------------------------------------------------------
// Strategies. Parameters are generated raw and built inside the test body so a
// failing case shrinks to readable numbers.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum KernelParams {
    Rbf { bandwidth: f64 },
    Imq { bandwidth: f64, exponent: f64 },
}

impl KernelParams {
    fn build(&self) -> KernelSpec {
        match *self {
            KernelParams::Rbf { bandwidth } => KernelSpec::gaussian_rbf(bandwidth).unwrap(),
            KernelParams::Imq { bandwidth, exponent } => {
                KernelSpec::imq(bandwidth, exponent).unwrap()
            }
        }
    }
}

fn kernel_params() -> impl Strategy<Value = KernelParams> {
    prop_oneof![
        (0.5..2.5f64).prop_map(|bandwidth| KernelParams::Rbf { bandwidth }),
        (0.5..2.5f64, 0.15..0.85f64)
            .prop_map(|(bandwidth, exponent)| KernelParams::Imq { bandwidth, exponent }),
    ]
}

#[derive(Clone, Debug)]
enum TargetParams {
    Gaussian { mean: f64, variance: f64 },
    Mixture { separation: f64, weight: f64, sigma2: f64 },
}

impl TargetParams {
    fn build(&self) -> Target {
        match *self {
            TargetParams::Gaussian { mean, variance } => {
                TargetSpec::gaussian_1d(mean, variance).build().unwrap()
            }
            // The transport-inequality constant is irrelevant to every property in
            // this file; a nominal override just satisfies the build contract.
            TargetParams::Mixture { separation, weight, sigma2 } => TargetSpec::GaussianMixture {
                mean: vec![-separation, separation],
                weights: vec![weight, 1.0 - weight],
                sigma2,
                lambda_override: Some(0.1),
            }
            .build()
            .unwrap(),
        }
    }
}

fn gaussian_params() -> impl Strategy<Value = TargetParams> {
    (-2.0..2.0f64, 0.4..3.0f64).prop_map(|(mean, variance)| TargetParams::Gaussian { mean, variance })
}

fn target_params() -> impl Strategy<Value = TargetParams> {
    prop_oneof![
        gaussian_params(),
        (0.2..1.5f64, 0.2..0.8f64, 0.5..2.0f64).prop_map(|(separation, weight, sigma2)| {
            TargetParams::Mixture { separation, weight, sigma2 }
        }),
    ]
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, dim)
}

/// Equal-weight 1-D ensemble with 1..=max_n particles in [-4, 4].
fn ensemble_1d(max_n: usize) -> impl Strategy<Value = ParticleEnsemble> {
    prop::collection::vec(-4.0..4.0f64, 1..=max_n)
        .prop_map(|positions| ParticleEnsemble::equal_weights(positions, 1).unwrap())
}

/// Weighted 1-D ensemble; raw weights are normalized to total mass one.
fn weighted_ensemble_1d(max_n: usize) -> impl Strategy<Value = ParticleEnsemble> {
    prop::collection::vec((-4.0..4.0f64, 0.05..1.0f64), 1..=max_n).prop_map(|pairs| {
        let positions: Vec<f64> = pairs.iter().map(|(x, _)| *x).collect();
        let total: f64 = pairs.iter().map(|(_, w)| *w).sum();
        let weights: Vec<f64> = pairs.iter().map(|(_, w)| w / total).collect();
        ParticleEnsemble::new(positions, 1, weights).unwrap()
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `lhs <= rhs` up to relative roundoff slack.
fn leq(lhs: f64, rhs: f64, tol: f64) -> bool {
    lhs <= rhs + tol * rhs.abs().max(1.0)
}

// ---------------------------------------------------------------------------
// Kernel regularity.
// ---------------------------------------------------------------------------

mod kernel_props {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        /// k is symmetric; for translation-invariant kernels the two gradients are
        /// negatives of each other and swapping arguments swaps gradient roles.
        #[test]
        fn kernel_is_symmetric_and_stationary(
            params in kernel_params(),
            (dim, x, y) in (1..=3usize).prop_flat_map(|d| (Just(d), point(d), point(d))),
        ) {
            let kernel = params.build();

            let kxy = kernel.k_eval(&x, &y).unwrap();
            let kyx = kernel.k_eval(&y, &x).unwrap();
            prop_assert!((kxy - kyx).abs() <= 1e-14);

            let gx = kernel.k_grad_x(&x, &y).unwrap();
            let gy = kernel.k_grad_y(&x, &y).unwrap();
            let gx_swapped = kernel.k_grad_y(&y, &x).unwrap();
            for j in 0..dim {
                prop_assert!((gx[j] + gy[j]).abs() <= 1e-12, "stationarity at coordinate {j}");
                prop_assert!((gx[j] - gx_swapped[j]).abs() <= 1e-12, "swap symmetry at {j}");
            }

            let hxy = kernel.k_cross_hess_trace(&x, &y).unwrap();
            let hyx = kernel.k_cross_hess_trace(&y, &x).unwrap();
            prop_assert!((hxy - hyx).abs() <= 1e-12 * hxy.abs().max(1.0));
        }

        /// Closed-form derivatives match central finite differences.
        #[test]
        fn kernel_derivatives_match_finite_differences(
            params in kernel_params(),
            x in point(2),
            y in point(2),
        ) {
            let kernel = params.build();
            let gx = kernel.k_grad_x(&x, &y).unwrap();
            for j in 0..2 {
                let fd = central_diff(
                    |t| {
                        let mut xt = x.clone();
                        xt[j] = t;
                        kernel.k_eval(&xt, &y).unwrap()
                    },
                    x[j],
                    FD_STEP,
                );
                prop_assert!((gx[j] - fd).abs() <= 1e-6, "grad_x[{j}] {} vs fd {fd}", gx[j]);
            }

            let trace = kernel.k_cross_hess_trace(&x, &y).unwrap();
            let mut fd_trace = 0.0;
            for j in 0..2 {
                fd_trace += central_diff(
                    |t| {
                        let mut xt = x.clone();
                        xt[j] = t;
                        kernel.k_grad_y(&xt, &y).unwrap()[j]
                    },
                    x[j],
                    FD_STEP,
                );
            }
            prop_assert!((trace - fd_trace).abs() <= 1e-5, "trace {trace} vs fd {fd_trace}");
        }

        /// The certified constants pass their own grid audit at any admissible
        /// bandwidth, and the pointwise bounds they promise hold off the grid too.
        #[test]
        fn certified_constants_hold_pointwise(
            params in kernel_params(),
            x in point(3),
            y in point(3),
        ) {
            let kernel = params.build();
            let constants = kernel
                .kernel_constants(Some(&GridCheck::new(-5.0, 5.0, 2_001)))
                .unwrap();

            let k = kernel.k_eval(&x, &y).unwrap();
            prop_assert!(k.abs() <= constants.kappa_sq + 1e-9);
            prop_assert!(k > 0.0, "both families are strictly positive");

            let g = norm(&kernel.k_grad_x(&x, &y).unwrap());
            let r = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
            prop_assert!(g * r <= constants.gamma + 1e-9, "gradient decay: {} vs {}", g * r, constants.gamma);

            for v in kernel.diagonal_derivative_values() {
                prop_assert!(v <= constants.kappa_sq + 1e-12);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Stein kernel and KSD.
// ---------------------------------------------------------------------------

mod stein_props {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        /// k_p inherits symmetry from k, and the score-based magnitude bound
        /// kappa^2 (|s(x)||s(y)| + sqrt(d)(|s(x)| + |s(y)|) + d) holds everywhere.
        #[test]
        fn stein_kernel_is_symmetric_and_bounded(
            kp in kernel_params(),
            tp in target_params(),
            x in -5.0..5.0f64,
            y in -5.0..5.0f64,
        ) {
            let kernel = kp.build();
            let target = tp.build();
            let ctx = SteinContext::new(&target, &kernel);
            let constants = kernel.kernel_constants(None).unwrap();

            let kxy = ctx.stein_kernel(&[x], &[y]).unwrap();
            let kyx = ctx.stein_kernel(&[y], &[x]).unwrap();
            prop_assert!((kxy - kyx).abs() <= 1e-12 * kxy.abs().max(1.0));

            let sx = norm(&target.score(&[x]).unwrap());
            let sy = norm(&target.score(&[y]).unwrap());
            let cap = constants.kappa_sq * (sx * sy + sx + sy + 1.0);
            prop_assert!(kxy.abs() <= cap + 1e-9, "|k_p| = {} over cap {cap}", kxy.abs());
        }

        /// Diagonal values k_p(x, x) are nonnegative (they are squared RKHS norms).
        #[test]
        fn stein_kernel_diagonal_is_nonnegative(
            kp in kernel_params(),
            tp in target_params(),
            x in -5.0..5.0f64,
        ) {
            let kernel = kp.build();
            let target = tp.build();
            let ctx = SteinContext::new(&target, &kernel);
            let kxx = ctx.stein_kernel(&[x], &[x]).unwrap();
            prop_assert!(kxx >= -1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Stein Gram matrices of weighted ensembles stay positive semidefinite.
        #[test]
        fn stein_gram_is_positive_semidefinite(
            kp in kernel_params(),
            tp in target_params(),
            ensemble in weighted_ensemble_1d(14),
        ) {
            let kernel = kp.build();
            let target = tp.build();
            let ctx = SteinContext::new(&target, &kernel);
            let gram = ctx.stein_gram(&ensemble).unwrap();
            let scale = gram.diagonal().amax().max(1.0);
            let min_eig = gram
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            prop_assert!(min_eig >= -1e-8 * scale, "min eigenvalue {min_eig} at scale {scale}");
        }

        /// The discrepancy between ensembles is an RKHS embedding distance, so it
        /// vanishes on the diagonal and satisfies symmetry and the triangle
        /// inequality.
        #[test]
        fn ksd_between_ensembles_is_a_metric(
            kp in kernel_params(),
            tp in target_params(),
            a in weighted_ensemble_1d(10),
            b in weighted_ensemble_1d(10),
            c in weighted_ensemble_1d(10),
        ) {
            let kernel = kp.build();
            let target = tp.build();
            let ctx = SteinContext::new(&target, &kernel);

            let self_dist = ctx.ksd_between(&a, &a).unwrap();
            prop_assert!(self_dist <= 1e-7, "self distance {self_dist}");

            let ab = ctx.ksd_between(&a, &b).unwrap();
            let ba = ctx.ksd_between(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-10 * ab.max(1.0));

            let bc = ctx.ksd_between(&b, &c).unwrap();
            let ac = ctx.ksd_between(&a, &c).unwrap();
            prop_assert!(leq(ac, ab + bc, 1e-9), "triangle: {ac} vs {} + {}", ab, bc);
        }

        /// KSD to the target is dominated by the Wasserstein comparison
        /// kappa (d + L) W1 + d^{1/4} kappa L sqrt(2 M_{nu,P} W1) between any
        /// two ensembles, with the coupled second moment taken on the second
        /// argument.
        #[test]
        fn ksd_is_dominated_by_the_wasserstein_comparison(
            kp in kernel_params(),
            tp in target_params(),
            a in weighted_ensemble_1d(12),
            b in weighted_ensemble_1d(12),
        ) {
            let kernel = kp.build();
            let target = tp.build();
            let ctx = SteinContext::new(&target, &kernel);
            let kc = kernel.kernel_constants(None).unwrap();
            let tc = target.target_constants().unwrap();

            let w1 = wasserstein1(&a, &b).unwrap();
            let big_m = moments(&b, &target, MomentMethod::Auto).unwrap().big_m_mu_p;
            let rhs = kc.kappa * (1.0 + tc.lipschitz) * w1
                + kc.kappa * tc.lipschitz * (2.0 * big_m * w1).sqrt();
            let lhs = ctx.ksd_between(&a, &b).unwrap();
            prop_assert!(leq(lhs, rhs, 1e-9), "ksd {lhs} exceeds comparison {rhs}");
        }
    }
}

// ---------------------------------------------------------------------------
// Exact Wasserstein distance.
// ---------------------------------------------------------------------------

mod metric_props {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn wasserstein_satisfies_the_metric_axioms(
            a in weighted_ensemble_1d(16),
            b in weighted_ensemble_1d(16),
            c in weighted_ensemble_1d(16),
        ) {
            let aa = wasserstein1(&a, &a).unwrap();
            prop_assert!(aa.abs() <= 1e-12);

            let ab = wasserstein1(&a, &b).unwrap();
            let ba = wasserstein1(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));

            let bc = wasserstein1(&b, &c).unwrap();
            let ac = wasserstein1(&a, &c).unwrap();
            prop_assert!(leq(ac, ab + bc, 1e-12), "triangle: {ac} vs {ab} + {bc}");

            // Mean displacement lower-bounds any coupling cost.
            let mean = |e: &ParticleEnsemble| -> f64 {
                e.positions().iter().zip(e.weights()).map(|(x, w)| x * w).sum()
            };
            let gap = (mean(&a) - mean(&b)).abs();
            prop_assert!(leq(gap, ab, 1e-12), "mean gap {gap} over distance {ab}");
        }

        /// Translating both marginals leaves the distance unchanged.
        #[test]
        fn wasserstein_is_translation_invariant(
            a in weighted_ensemble_1d(12),
            b in weighted_ensemble_1d(12),
            shift in -3.0..3.0f64,
        ) {
            let translate = |e: &ParticleEnsemble| {
                let moved: Vec<f64> = e.positions().iter().map(|x| x + shift).collect();
                ParticleEnsemble::new(moved, 1, e.weights().to_vec()).unwrap()
            };
            let base = wasserstein1(&a, &b).unwrap();
            let moved = wasserstein1(&translate(&a), &translate(&b)).unwrap();
            prop_assert!((base - moved).abs() <= 1e-10 * base.max(1.0));
        }

        /// With equal counts and uniform weights the optimal coupling is the
        /// sorted pairing; the flow solver must agree with it exactly.
        #[test]
        fn sorted_pairing_matches_the_flow_solver(
            xs in prop::collection::vec(-4.0..4.0f64, 1..=24),
            ys_seed in prop::collection::vec(-4.0..4.0f64, 1..=24),
        ) {
            let n = xs.len().min(ys_seed.len());
            let xs = xs[..n].to_vec();
            let ys = ys_seed[..n].to_vec();
            let a = ParticleEnsemble::equal_weights(xs.clone(), 1).unwrap();
            let b = ParticleEnsemble::equal_weights(ys.clone(), 1).unwrap();

            let mut sx = xs;
            let mut sy = ys;
            sx.sort_by(f64::total_cmp);
            sy.sort_by(f64::total_cmp);
            let sorted: f64 = sx
                .iter()
                .zip(&sy)
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / n as f64;

            let solved = wasserstein1(&a, &b).unwrap();
            prop_assert!((solved - sorted).abs() <= 1e-12 * sorted.max(1.0));
        }
    }
}

// ---------------------------------------------------------------------------
// Transport map guarantees.
// ---------------------------------------------------------------------------

mod transport_props {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// No particle moves farther than eps C m_{mu,P} in one round, for any
        /// step size (the bound does not require the descent cap).
        #[test]
        fn one_step_displacement_is_bounded(
            kp in kernel_params(),
            tp in gaussian_params(),
            ensemble in weighted_ensemble_1d(12),
            eps in 0.0..0.5f64,
        ) {
            let kernel = kp.build();
            let target = tp.build();
            let kc = kernel.kernel_constants(None).unwrap();
            let tc = target.target_constants().unwrap();
            let c = kc.kappa_sq * (3.0 * tc.lipschitz + 1.0);
            let m_mu_p = moments(&ensemble, &target, MomentMethod::Exact).unwrap().m_mu_p;

            let next = svgd_step(&ensemble, &target, &kernel, eps).unwrap();
            let moved = max_displacement(&ensemble, &next).unwrap();
            let cap = theory::one_step_displacement_bound(eps, c, m_mu_p);
            prop_assert!(leq(moved, cap, 1e-12), "displacement {moved} over cap {cap}");
        }

        /// One round is pseudo-Lipschitz in W1: pushing two ensembles through
        /// their own fields expands the distance by at most
        /// 1 + eps (c1 (1 + m_mu) + c2 (1 + m_nu)).
        #[test]
        fn one_step_is_pseudo_lipschitz_in_wasserstein(
            kp in kernel_params(),
            tp in target_params(),
            a in weighted_ensemble_1d(10),
            b in weighted_ensemble_1d(10),
            eps in 0.0..0.3f64,
        ) {
            let kernel = kp.build();
            let target = tp.build();
            let kc = kernel.kernel_constants(None).unwrap();
            let tc = target.target_constants().unwrap();
            let (c1, c2) = theory::pseudo_lipschitz_constants(&kc, &tc, 1);

            let before = wasserstein1(&a, &b).unwrap();
            let a_next = svgd_step(&a, &target, &kernel, eps).unwrap();
            let b_next = svgd_step(&b, &target, &kernel, eps).unwrap();
            let after = wasserstein1(&a_next, &b_next).unwrap();

            let m_a = moments(&a, &target, MomentMethod::Auto).unwrap().m_mu;
            let m_b = moments(&b, &target, MomentMethod::Auto).unwrap().m_mu;
            let factor = 1.0 + eps * (c1 * (1.0 + m_a) + c2 * (1.0 + m_b));
            prop_assert!(
                leq(after, factor * before, 1e-9),
                "distance grew from {before} to {after}, allowed factor {factor}"
            );
        }

        /// Coupled moments along a short run stay below the product-form bounds,
        /// which in turn stay below the exponential ones.
        #[test]
        fn moment_growth_bounds_hold_along_runs(
            kp in kernel_params(),
            tp in gaussian_params(),
            init in weighted_ensemble_1d(10),
            steps in prop::collection::vec(0.0..0.3f64, 1..=4),
        ) {
            let kernel = kp.build();
            let target = tp.build();
            let kc = kernel.kernel_constants(None).unwrap();
            let tc = target.target_constants().unwrap();
            let c = kc.kappa_sq * (3.0 * tc.lipschitz + 1.0);

            let m0 = moments(&init, &target, MomentMethod::Exact).unwrap();
            let schedule = theory::StepSchedule::from_steps(steps.clone()).unwrap();
            let bounds = theory::moment_bounds(m0.m_mu_p, m0.big_m_mu_p, tc.m_p, c, &schedule);

            // One record per round, including the final ensemble no step leaves.
            let mut current = init;
            for r in 0..schedule.rounds() {
                let m = moments(&current, &target, MomentMethod::Exact).unwrap();
                let first = m.m_mu.max(m.m_mu_p);
                prop_assert!(leq(first, bounds.first_product[r], 1e-12));
                prop_assert!(leq(bounds.first_product[r], bounds.first_exp[r], 1e-12));
                prop_assert!(leq(m.big_m_mu_p, bounds.second_product[r], 1e-12));
                prop_assert!(leq(bounds.second_product[r], bounds.second_exp[r], 1e-12));
                if let Some(&eps) = schedule.steps().get(r) {
                    current = svgd_step(&current, &target, &kernel, eps).unwrap();
                }
            }
        }

        /// For an even target, mirroring the ensemble commutes with the update.
        #[test]
        fn mirrored_ensembles_evolve_mirrored(
            kp in kernel_params(),
            variance in 0.4..3.0f64,
            ensemble in weighted_ensemble_1d(10),
            eps in 0.0..0.3f64,
        ) {
            let kernel = kp.build();
            let target = TargetSpec::gaussian_1d(0.0, variance).build().unwrap();
            let mirror = |e: &ParticleEnsemble| {
                let flipped: Vec<f64> = e.positions().iter().map(|x| -x).collect();
                ParticleEnsemble::new(flipped, 1, e.weights().to_vec()).unwrap()
            };

            let stepped = svgd_step(&ensemble, &target, &kernel, eps).unwrap();
            let mirrored_then_stepped = svgd_step(&mirror(&ensemble), &target, &kernel, eps).unwrap();
            let stepped_then_mirrored = mirror(&stepped);
            for (u, v) in mirrored_then_stepped
                .positions()
                .iter()
                .zip(stepped_then_mirrored.positions())
            {
                prop_assert!((u - v).abs() <= 1e-12, "mirror symmetry broke: {u} vs {v}");
            }
        }

        /// The update is a pure function of its inputs: repeating it bitwise
        /// reproduces the positions.
        #[test]
        fn steps_are_deterministic(
            kp in kernel_params(),
            tp in target_params(),
            ensemble in weighted_ensemble_1d(10),
            eps in 0.0..0.3f64,
        ) {
            let kernel = kp.build();
            let target = tp.build();
            let first = svgd_step(&ensemble, &target, &kernel, eps).unwrap();
            let second = svgd_step(&ensemble, &target, &kernel, eps).unwrap();
            prop_assert!(first.positions() == second.positions());
        }
    }
}

// ---------------------------------------------------------------------------
// Schedules, budgets, and growth functions.
// ---------------------------------------------------------------------------

mod theory_props {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// Budgeted schedules spend exactly the budget without exceeding the cap.
        #[test]
        fn budgeted_schedules_spend_the_budget(
            budget in 1e-6..5.0f64,
            cap in 1e-3..0.3f64,
        ) {
            let schedule = theory::StepSchedule::from_budget(budget, cap).unwrap();
            prop_assert!((schedule.total() - budget).abs() <= 1e-12 * budget.max(1.0));
            for &eps in schedule.steps() {
                prop_assert!(eps <= cap * (1.0 + 1e-15));
                prop_assert!(eps > 0.0);
            }
            prop_assert!(schedule.check_cap(cap * (1.0 + 1e-12)).is_ok());
        }

        /// Averaging weights are a probability vector and each unnormalized weight
        /// sits in its guaranteed window [eps/2, eps).
        #[test]
        fn step_weights_form_a_distribution(
            steps in prop::collection::vec(1e-5..0.019f64, 1..=20),
            alpha in 1.1..2.0f64,
        ) {
            let (c_vals, pi) = theory::step_weights(&steps, 3.0, 1.0, alpha).unwrap();
            let total: f64 = pi.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(pi.iter().all(|w| *w >= 0.0));
            for (cv, &eps) in c_vals.iter().zip(&steps) {
                prop_assert!(*cv >= 0.5 * eps - 1e-15 && *cv < eps);
            }
        }

        /// phi is nonincreasing in the initialization gap.
        #[test]
        fn growth_phi_is_nonincreasing(
            w_small in 1e-12..1.0f64,
            factor in 1.0..100.0f64,
        ) {
            let lo = theory::growth_phi(w_small).unwrap();
            let hi = theory::growth_phi(w_small * factor).unwrap();
            prop_assert!(hi <= lo + 1e-12);
        }

        /// Whenever the budget solver returns a positive budget, the budget is a
        /// subsolution of both fixed-point inequalities it was solved from.
        #[test]
        fn step_budget_satisfies_its_fixed_point(
            log_w in -200.0..-1.0f64,
            a_bar in 0.0..30.0f64,
            b_bar in 0.1..20.0f64,
            c_bar in 0.1..20.0f64,
        ) {
            let w_bar = log_w.exp();
            let budget = theory::step_budget(w_bar, a_bar, b_bar, c_bar).unwrap();
            prop_assert!(budget.b >= 0.0);
            if budget.b > 0.0 {
                let (s1, s2) =
                    theory::step_budget_fixed_point_slacks(w_bar, a_bar, b_bar, c_bar, &budget).unwrap();
                prop_assert!(s1 >= -1e-9, "first fixed-point slack {s1}");
                prop_assert!(s2 >= -1e-9, "second fixed-point slack {s2}");
            }
        }
    }
}
