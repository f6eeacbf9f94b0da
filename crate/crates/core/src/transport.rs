//! SVGD transport: pushing a weighted particle ensemble through one update map.
//!
//! For a discrete measure mu = sum_i w_i delta_{x_i}, the update map is exact:
//!
//!   T(x) = x + eps * sum_i w_i [ s_p(x_i) k(x_i, x) + grad_{x_i} k(x_i, x) ]
//!
//! and one round replaces every particle by its image under the map built from the
//! *current* ensemble (all particles move simultaneously). Weights never change; the
//! pushforward of a discrete measure is the discrete measure of the images.
//!
//! Determinism: the direction sum runs over particles in index order with compensated
//! accumulation, and rounds parallelize only across target particles (each output is an
//! independent pure function of the frozen ensemble), so results are bit-reproducible
//! regardless of thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::numeric::KahanSum;
use crate::targets::Target;

/// Weighted particle ensemble in R^d, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
    generation: u32,
}

impl ParticleEnsemble {
    /// Ensemble from flat row-major positions (length n * dim) and per-particle weights.
    pub fn new(positions: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("ensemble dimension must be >= 1".into()));
        }
        if positions.is_empty() || positions.len() % dim != 0 {
            return Err(Error::InvalidSpec(format!(
                "positions length {} is not a positive multiple of dim {dim}",
                positions.len()
            )));
        }
        let n = positions.len() / dim;
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                left: weights.len(),
                right: n,
            });
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("particle positions"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSpec(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total = crate::numeric::kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::MassMismatch(total, 1.0));
        }
        Ok(Self {
            positions,
            weights,
            dim,
            generation: 0,
        })
    }

    /// Equal-weight ensemble.
    pub fn equal_weights(positions: Vec<f64>, dim: usize) -> Result<Self> {
        let n = if dim == 0 { 0 } else { positions.len() / dim };
        if n == 0 {
            return Err(Error::InvalidSpec("ensemble must be non-empty".into()));
        }
        // 1/n summed n times can miss 1.0 by > 1e-12 for awkward n; build exact weights.
        let w = 1.0 / n as f64;
        let mut weights = vec![w; n];
        let correction = 1.0 - crate::numeric::kahan_sum(weights.iter().copied());
        weights[n - 1] += correction;
        Self::new(positions, dim, weights)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter_positions(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    /// sum_i w_i ||x_i||.
    pub fn mean_norm(&self) -> f64 {
        let mut acc = KahanSum::new();
        for (x, &w) in self.iter_positions().zip(&self.weights) {
            acc.add(w * x.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        acc.value()
    }
}

/// SVGD vector field of `ensemble` evaluated at `x`.
pub fn svgd_direction(
    ensemble: &ParticleEnsemble,
    x: &[f64],
    target: &Target,
    kernel: &KernelSpec,
) -> Result<Vec<f64>> {
    let scores = ensemble_scores(ensemble, target)?;
    direction_from(ensemble, &scores, x, kernel)
}

/// Scores of every particle, computed once per round and shared across all
/// evaluation points of the field.
pub(crate) fn ensemble_scores(ensemble: &ParticleEnsemble, target: &Target) -> Result<Vec<Vec<f64>>> {
    ensemble
        .iter_positions()
        .map(|xi| target.score(xi))
        .collect()
}

/// The field with precomputed scores; one radial-profile evaluation per particle.
pub(crate) fn direction_from(
    ensemble: &ParticleEnsemble,
    scores: &[Vec<f64>],
    x: &[f64],
    kernel: &KernelSpec,
) -> Result<Vec<f64>> {
    if x.len() != ensemble.dim() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: ensemble.dim(),
        });
    }
    let d = ensemble.dim();
    let mut acc: Vec<KahanSum> = vec![KahanSum::new(); d];
    for ((xi, &w), score) in ensemble.iter_positions().zip(ensemble.weights()).zip(scores) {
        let u = crate::kernels::squared_distance(xi, x)?;
        let (k, f1, _) = kernel.profile_parts(u);
        let scale = 2.0 * f1;
        for j in 0..d {
            acc[j].add(w * (score[j] * k + scale * (xi[j] - x[j])));
        }
    }
    let v: Vec<f64> = acc.iter().map(KahanSum::value).collect();
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::NumericOverflow {
            context: format!("svgd direction at x = {x:?}"),
        });
    }
    Ok(v)
}

/// One SVGD round: every particle moves by eps times the field of the frozen ensemble.
pub fn svgd_step(
    ensemble: &ParticleEnsemble,
    target: &Target,
    kernel: &KernelSpec,
    eps: f64,
) -> Result<ParticleEnsemble> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::Precondition(format!(
            "step size must be finite and nonnegative, got {eps}"
        )));
    }
    if target.dim() != ensemble.dim() {
        return Err(Error::DimensionMismatch {
            left: target.dim(),
            right: ensemble.dim(),
        });
    }
    let d = ensemble.dim();
    let scores = ensemble_scores(ensemble, target)?;
    let directions: Vec<Result<Vec<f64>>> = (0..ensemble.n())
        .into_par_iter()
        .map(|i| direction_from(ensemble, &scores, ensemble.position(i), kernel))
        .collect();
    let mut positions = Vec::with_capacity(ensemble.n() * d);
    for (i, dir) in directions.into_iter().enumerate() {
        let dir = dir.map_err(|e| match e {
            Error::NumericOverflow { context } => Error::NumericOverflow {
                context: format!("{context} (particle {i}, generation {})", ensemble.generation()),
            },
            other => other,
        })?;
        let xi = ensemble.position(i);
        for j in 0..d {
            positions.push(xi[j] + eps * dir[j]);
        }
    }
    if positions.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow {
            context: format!("svgd step at generation {}", ensemble.generation()),
        });
    }
    Ok(ParticleEnsemble {
        positions,
        weights: ensemble.weights.clone(),
        dim: d,
        generation: ensemble.generation + 1,
    })
}

/// A full run: the initial ensemble plus one ensemble per round.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub ensembles: Vec<ParticleEnsemble>,
    pub steps: Vec<f64>,
}

impl Trajectory {
    /// Number of rounds (ensembles.len() - 1).
    pub fn rounds(&self) -> usize {
        self.steps.len()
    }

    pub fn last(&self) -> &ParticleEnsemble {
        self.ensembles.last().expect("trajectory holds the initial ensemble")
    }
}

/// Run SVGD for the given step sequence, invoking the observer on the initial ensemble
/// (round 0) and after every round.
pub fn run_svgd(
    init: ParticleEnsemble,
    target: &Target,
    kernel: &KernelSpec,
    steps: &[f64],
    mut observer: impl FnMut(usize, &ParticleEnsemble) -> Result<()>,
) -> Result<Trajectory> {
    observer(0, &init)?;
    let mut ensembles = Vec::with_capacity(steps.len() + 1);
    ensembles.push(init);
    for (r, &eps) in steps.iter().enumerate() {
        let next = svgd_step(ensembles.last().expect("non-empty"), target, kernel, eps)?;
        observer(r + 1, &next)?;
        ensembles.push(next);
    }
    Ok(Trajectory {
        ensembles,
        steps: steps.to_vec(),
    })
}

/// Largest particle displacement between two same-shape ensembles.
pub fn max_displacement(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<f64> {
    if a.n() != b.n() || a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.n() * a.dim(),
            right: b.n() * b.dim(),
        });
    }
    let mut worst = 0.0f64;
    for (xa, xb) in a.iter_positions().zip(b.iter_positions()) {
        let d = xa
            .iter()
            .zip(xb)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Write a trajectory as CSV: round, particle_index, x_0..x_{d-1}, weight.
pub fn write_checkpoint_csv(trajectory: &Trajectory, out: &mut impl std::io::Write) -> Result<()> {
    let d = trajectory.ensembles[0].dim();
    write!(out, "round,particle_index")?;
    for j in 0..d {
        write!(out, ",x_{j}")?;
    }
    writeln!(out, ",weight")?;
    for (round, ens) in trajectory.ensembles.iter().enumerate() {
        for i in 0..ens.n() {
            write!(out, "{round},{i}")?;
            for v in ens.position(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", ens.weights()[i])?;
        }
    }
    Ok(())
}
