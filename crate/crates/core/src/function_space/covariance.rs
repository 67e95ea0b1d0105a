use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{grid_points, grid_weight, Field, Representation};
use crate::error::{PhmcError, Result};

/// Karhunen–Loève standard deviations `λ_j = 1/(jπ)` of the Brownian bridge
/// on `[0, 1]`, `j = 1..n`.
pub fn bridge_eigenvalues(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(PhmcError::invalid("n", "need at least one mode"));
    }
    Ok((1..=n).map(|j| 1.0 / (j as f64 * PI)).collect())
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Spectral { lambdas: Vec<f64> },
    BridgeGrid { n_points: usize },
}

/// Trace-class prior covariance `C` of the centred Gaussian `π₀`.
///
/// * spectral form: `C φ_j = λ_j² φ_j` with user-supplied standard deviations;
/// * bridge-grid form: the Brownian-bridge kernel `min(s,t) − st` on the
///   interior grid, acting on grid values through the quadrature weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    model: Model,
}

impl CovarianceModel {
    pub fn spectral(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(PhmcError::invalid("lambdas", "empty spectrum"));
        }
        if let Some((j, l)) = lambdas
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(PhmcError::invalid(
                "lambdas",
                format!("λ_{} = {l} is not a positive finite number", j + 1),
            ));
        }
        Ok(CovarianceModel {
            model: Model::Spectral { lambdas },
        })
    }

    /// Brownian bridge in its Karhunen–Loève basis.
    pub fn bridge_spectral(n: usize) -> Result<Self> {
        Self::spectral(bridge_eigenvalues(n)?)
    }

    /// Brownian bridge on `n` interior grid points.
    pub fn bridge_grid(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(PhmcError::invalid("n_points", "need at least one grid point"));
        }
        Ok(CovarianceModel {
            model: Model::BridgeGrid { n_points },
        })
    }

    /// Brownian bridge prior in the requested representation.
    pub fn bridge(repr: Representation, n: usize) -> Result<Self> {
        match repr {
            Representation::Spectral => Self::bridge_spectral(n),
            Representation::Grid => Self::bridge_grid(n),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.model {
            Model::Spectral { lambdas } => lambdas.len(),
            Model::BridgeGrid { n_points } => *n_points,
        }
    }

    pub fn representation(&self) -> Representation {
        match self.model {
            Model::Spectral { .. } => Representation::Spectral,
            Model::BridgeGrid { .. } => Representation::Grid,
        }
    }

    /// Standard deviations of the spectral form.
    pub fn lambdas(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Spectral { lambdas } => Some(lambdas),
            Model::BridgeGrid { .. } => None,
        }
    }

    /// Eigenvalues of `C` in sine-basis order. For the grid form these are the
    /// exact eigenvalues of the discrete operator, `1/(4(N+1)² sin²(jπ/(2(N+1))))`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match &self.model {
            Model::Spectral { lambdas } => lambdas.iter().map(|l| l * l).collect(),
            Model::BridgeGrid { n_points } => {
                let m = *n_points as f64 + 1.0;
                (1..=*n_points)
                    .map(|j| {
                        let s = (j as f64 * PI / (2.0 * m)).sin();
                        1.0 / (4.0 * m * m * s * s)
                    })
                    .collect()
            }
        }
    }

    /// Whether the second half of the spectrum is non-increasing.
    pub fn tail_is_nonincreasing(&self) -> bool {
        let ev = self.eigenvalues();
        ev[ev.len() / 2..].windows(2).all(|w| w[1] <= w[0])
    }

    /// Kernel entry `min(x_i, x_j) − x_i x_j` (0-based indices) of the grid form.
    pub fn kernel(&self, i: usize, j: usize) -> Option<f64> {
        match self.model {
            Model::BridgeGrid { n_points } if i < n_points && j < n_points => {
                let w = grid_weight(n_points);
                let (xi, xj) = ((i + 1) as f64 * w, (j + 1) as f64 * w);
                Some(xi.min(xj) - xi * xj)
            }
            _ => None,
        }
    }

    pub fn check_field(&self, w: &Field) -> Result<()> {
        if w.dim() != self.dim() {
            return Err(PhmcError::DimensionMismatch {
                left: self.dim(),
                right: w.dim(),
            });
        }
        if w.repr() != self.representation() {
            return Err(PhmcError::RepresentationMismatch {
                expected: self.representation(),
                found: w.repr(),
            });
        }
        Ok(())
    }

    /// `C w`.
    ///
    /// On the grid the bridge kernel is the Green's function of `−d²/ds²` with
    /// Dirichlet conditions, and `(K)⁻¹ = (N+1)·tridiag(−1, 2, −1)` holds exactly
    /// for the sampled kernel matrix `K`. Hence `C w = h K w` is a single
    /// tridiagonal solve scaled by `1/(N+1)²`.
    pub fn apply_covariance(&self, w: &Field) -> Result<Field> {
        self.check_field(w)?;
        match &self.model {
            Model::Spectral { lambdas } => Ok(Field::spectral(
                w.as_slice()
                    .iter()
                    .zip(lambdas)
                    .map(|(x, l)| l * l * x)
                    .collect(),
            )),
            Model::BridgeGrid { n_points } => {
                let m = *n_points as f64 + 1.0;
                let mut z = solve_second_difference(w.as_slice());
                z.iter_mut().for_each(|x| *x /= m * m);
                Ok(Field::grid(z))
            }
        }
    }

    /// One draw from `N(0, C)`.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Field {
        match &self.model {
            Model::Spectral { lambdas } => Field::spectral(
                lambdas
                    .iter()
                    .map(|l| l * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            ),
            Model::BridgeGrid { n_points } => {
                // Brownian motion on x_1..x_{N+1} = 1, then pin the endpoint.
                let n = *n_points;
                let sd = grid_weight(n).sqrt();
                let mut walk = Vec::with_capacity(n + 1);
                let mut w = 0.0;
                for _ in 0..=n {
                    w += sd * rng.sample::<f64, _>(StandardNormal);
                    walk.push(w);
                }
                let end = walk[n];
                let xs = grid_points(n);
                Field::grid(
                    walk[..n]
                        .iter()
                        .zip(&xs)
                        .map(|(wi, xi)| wi - xi * end)
                        .collect(),
                )
            }
        }
    }
}

/// Solves `tridiag(−1, 2, −1) z = w`. The elimination pivots are `(i+2)/(i+1)`.
fn solve_second_difference(w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let mut d = vec![0.0; n];
    let mut prev = 0.0;
    for i in 0..n {
        let inv_pivot = (i + 1) as f64 / (i + 2) as f64;
        prev = (w[i] + prev) * inv_pivot;
        d[i] = prev;
    }
    // Super-diagonal after elimination: c'_i = −(i+1)/(i+2).
    for i in (0..n.saturating_sub(1)).rev() {
        let c = (i + 1) as f64 / (i + 2) as f64;
        d[i] += c * d[i + 1];
    }
    d
}
