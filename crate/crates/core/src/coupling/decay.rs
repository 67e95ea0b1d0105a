use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{derive_seeds, run_coupling_ensemble, CouplingOptions};
use crate::error::Result;
use crate::function_space::{CovarianceModel, Field};
use crate::sampler::Phmc;

/// Law of a starting state.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDistribution {
    PointMass(Field),
    /// `shift + ξ` with `ξ` drawn from the prior.
    ShiftedPrior(Field),
}

impl InitialDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, prior: &CovarianceModel, rng: &mut R) -> Result<Field> {
        match self {
            InitialDistribution::PointMass(f) => {
                prior.check_field(f)?;
                Ok(f.clone())
            }
            InitialDistribution::ShiftedPrior(shift) => {
                prior.check_field(shift)?;
                shift.add(&prior.sample_prior(rng))
            }
        }
    }
}

/// Coupled distances of independent runs, padded with zeros after coalescence.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub per_run: Vec<Vec<f64>>,
    /// Mean over runs; an upper bound on `W¹(μPⁿ, νPⁿ)` up to Monte Carlo error.
    pub mean: Vec<f64>,
}

impl DecayCurve {
    /// Whether every run satisfies `d_n ≤ rateⁿ·d_0` up to relative rounding slack.
    pub fn every_run_dominated_by(&self, rate: f64, rel_tol: f64) -> bool {
        self.per_run.iter().all(|run| dominated(run, rate, rel_tol))
    }

    pub fn mean_dominated_by(&self, rate: f64, rel_tol: f64) -> bool {
        dominated(&self.mean, rate, rel_tol)
    }
}

fn dominated(curve: &[f64], rate: f64, rel_tol: f64) -> bool {
    let d0 = curve.first().copied().unwrap_or(0.0);
    curve
        .iter()
        .enumerate()
        .all(|(n, &d)| d <= rate.powi(n as i32) * d0 * (1.0 + rel_tol))
}

/// Runs `n_chains` couplings started from `(μ0, ν0)` draws for `n_iters`
/// iterations each. When `μ0 == ν0` both chains start from the same draw.
pub fn wasserstein_decay_experiment(
    kernel: &Phmc<'_>,
    mu0: &InitialDistribution,
    nu0: &InitialDistribution,
    n_chains: usize,
    n_iters: usize,
    seed: u64,
) -> Result<DecayCurve> {
    let prior = kernel.prior();
    let same = mu0 == nu0;
    let init = |rng: &mut ChaCha8Rng| -> Result<(Field, Field)> {
        let x = mu0.sample(prior, rng)?;
        let y = if same { x.clone() } else { nu0.sample(prior, rng)? };
        Ok((x, y))
    };
    let traces = run_coupling_ensemble(
        kernel,
        &derive_seeds(seed, n_chains),
        n_iters,
        init,
        &CouplingOptions::default(),
    )?;
    let per_run: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| {
            (0..=n_iters)
                .map(|i| t.distance_at(i).unwrap_or(0.0))
                .collect()
        })
        .collect();
    let mean = (0..=n_iters)
        .map(|i| per_run.iter().map(|r| r[i]).sum::<f64>() / n_chains.max(1) as f64)
        .collect();
    Ok(DecayCurve { per_run, mean })
}
