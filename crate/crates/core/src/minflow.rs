//! Exact solver for the bipartite transportation problem, used for Wasserstein-1 between
//! weighted atom sets in dimension >= 2.
//!
//! Successive shortest paths with node potentials: reduced costs stay nonnegative, so each
//! augmentation is a plain Dijkstra over the residual graph. Supplies and demands are real
//! masses; every augmentation saturates a source, a sink, or zeroes a residual back-arc,
//! and the optimum is reached when all supply is routed. The returned value is the exact
//! LP optimum (up to floating-point roundoff), which for equal masses coincides with the
//! optimal-assignment cost.

use crate::error::{Error, Result};

/// Remaining-mass threshold treated as fully routed; inputs are probability masses.
const MASS_TOL: f64 = 1e-12;

/// Reduced costs below this (scaled) level indicate an internal inconsistency.
const NEGATIVE_RC_TOL: f64 = 1e-7;

/// Minimum cost to route `supply` onto `demand` with dense `cost` (row-major, m x n).
/// Total supply and demand must agree within 1e-9.
pub(crate) fn min_cost_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<f64> {
    let m = supply.len();
    let n = demand.len();
    if cost.len() != m * n {
        return Err(Error::DimensionMismatch {
            left: cost.len(),
            right: m * n,
        });
    }
    let total_supply: f64 = crate::numeric::kahan_sum(supply.iter().copied());
    let total_demand: f64 = crate::numeric::kahan_sum(demand.iter().copied());
    if (total_supply - total_demand).abs() > 1e-9 {
        return Err(Error::MassMismatch(total_supply, total_demand));
    }
    if supply.iter().chain(demand.iter()).any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::SolverFailure("negative or non-finite mass".into()));
    }
    if cost.iter().any(|&c| c < 0.0 || !c.is_finite()) {
        return Err(Error::SolverFailure("negative or non-finite cost".into()));
    }
    let cost_scale = cost.iter().copied().fold(1.0_f64, f64::max);

    let mut rem_supply = supply.to_vec();
    let mut rem_demand = demand.to_vec();
    let mut flow = vec![0.0_f64; m * n];
    // Node order: sources 0..m, sinks m..m+n.
    let mut potential = vec![0.0_f64; m + n];

    let max_iterations = m * n + m + n + 16;
    let mut iterations = 0;
    loop {
        let remaining: f64 = crate::numeric::kahan_sum(rem_supply.iter().copied());
        if remaining <= MASS_TOL {
            break;
        }
        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::SolverFailure(format!(
                "no convergence after {max_iterations} augmentations"
            )));
        }

        // Dijkstra from all sources with remaining supply (array-based; the graph is dense).
        let nodes = m + n;
        let mut dist = vec![f64::INFINITY; nodes];
        let mut parent: Vec<Option<usize>> = vec![None; nodes];
        let mut done = vec![false; nodes];
        for i in 0..m {
            if rem_supply[i] > MASS_TOL {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < m {
                // Forward arcs source u -> every sink.
                for j in 0..n {
                    let rc = reduced_cost(cost[u * n + j], potential[u], potential[m + j], cost_scale)?;
                    let v = m + j;
                    if !done[v] && dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        parent[v] = Some(u);
                    }
                }
            } else {
                // Backward arcs sink -> source exist where flow is positive.
                let j = u - m;
                for i in 0..m {
                    if flow[i * n + j] > 0.0 {
                        let rc =
                            reduced_cost(-cost[i * n + j], potential[u], potential[i], cost_scale)?;
                        if !done[i] && dist[u] + rc < dist[i] {
                            dist[i] = dist[u] + rc;
                            parent[i] = Some(u);
                        }
                    }
                }
            }
        }

        // Nearest sink with unmet demand.
        let mut target = None;
        let mut best = f64::INFINITY;
        for j in 0..n {
            if rem_demand[j] > MASS_TOL && dist[m + j] < best {
                best = dist[m + j];
                target = Some(m + j);
            }
        }
        let target = target.ok_or_else(|| {
            Error::SolverFailure("residual demand unreachable from residual supply".into())
        })?;

        // Walk the path back to a source, collecting the bottleneck.
        let mut path = Vec::new();
        let mut v = target;
        while let Some(u) = parent[v] {
            path.push((u, v));
            v = u;
        }
        let origin = v;
        debug_assert!(origin < m && rem_supply[origin] > MASS_TOL);
        let mut bottleneck = rem_supply[origin].min(rem_demand[target - m]);
        for &(u, v) in &path {
            if u >= m {
                // Backward arc sink u -> source v limited by existing flow.
                bottleneck = bottleneck.min(flow[v * n + (u - m)]);
            }
        }
        if !(bottleneck > 0.0) {
            return Err(Error::SolverFailure("zero augmentation bottleneck".into()));
        }
        for &(u, v) in &path {
            if u < m {
                flow[u * n + (v - m)] += bottleneck;
            } else {
                let cell = &mut flow[v * n + (u - m)];
                *cell -= bottleneck;
                if *cell < 0.0 {
                    *cell = 0.0;
                }
            }
        }
        rem_supply[origin] -= bottleneck;
        rem_demand[target - m] -= bottleneck;

        // Potential update keeps all reduced costs nonnegative for the next round.
        for v in 0..nodes {
            if dist[v].is_finite() {
                potential[v] += dist[v].min(best);
            } else {
                potential[v] += best;
            }
        }
    }

    let mut total = crate::numeric::KahanSum::new();
    for i in 0..m {
        for j in 0..n {
            let f = flow[i * n + j];
            if f > 0.0 {
                total.add(f * cost[i * n + j]);
            }
        }
    }
    Ok(total.value())
}

fn reduced_cost(cost: f64, pot_from: f64, pot_to: f64, scale: f64) -> Result<f64> {
    let rc = cost + pot_from - pot_to;
    if rc >= 0.0 {
        Ok(rc)
    } else if rc >= -NEGATIVE_RC_TOL * scale {
        Ok(0.0)
    } else {
        Err(Error::SolverFailure(format!(
            "reduced cost {rc} strongly negative (scale {scale})"
        )))
    }
}
