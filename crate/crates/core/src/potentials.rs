//! Potentials `Φ` and their `L²` gradients.
//!
//! Gradients are Riesz representatives with respect to the `L²` pairing of the
//! active representation (see [`Field::l2_inner`]), returned in the same
//! representation as the input. The preconditioned force `C·DΦ(q)` is always
//! formed by [`CovarianceModel::apply_covariance`].
//!
//! Potentials that are defined pointwise are evaluated on grid values; a
//! spectral input is transformed, evaluated, and its gradient transformed back.
//! Because the sine transform is an isometry this is the exact gradient of the
//! composed map, so grid and spectral chains see the same `Φ`.

use std::fmt;

use crate::error::{PhmcError, Result};
use crate::function_space::{grid_weight, CovarianceModel, Field, Representation};

/// Analytic constants of the convergence theory, when available.
///
/// `lipschitz` is `L` (for `C·DΦ` in `L²`), `growth` is `L′ = ‖C·DΦ(0)‖`,
/// `convexity` is `ζ`, `hessian_lipschitz` is `M` and `fourth_derivative` is
/// the bound on `D⁴Φ` (called `M4` here to keep `N` for the dimension).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownConstants {
    pub lipschitz: f64,
    pub growth: f64,
    pub convexity: f64,
    pub hessian_lipschitz: f64,
    pub fourth_derivative: f64,
}

pub trait Potential: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn evaluate(&self, q: &Field) -> f64;

    fn gradient(&self, q: &Field) -> Field;

    /// `Some(b)` when `DΦ ≡ b` does not depend on the position.
    fn constant_gradient(&self, _repr: Representation, _dim: usize) -> Option<Field> {
        None
    }

    fn known_constants(&self, _prior: &CovarianceModel) -> Option<KnownConstants> {
        None
    }
}

/// Names accepted by [`from_spec`].
pub const REGISTERED: [&str; 5] = ["linear", "quartic-norm", "double-well", "zero", "quadratic"];

/// Construction parameters for registry lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub name: String,
    /// Double-well stiffness.
    pub gamma: f64,
    /// Sine-basis diagonal of the quadratic potential; a single entry is
    /// broadcast to every mode.
    pub quadratic: Vec<f64>,
}

impl PotentialSpec {
    pub fn named(name: &str) -> Self {
        PotentialSpec {
            name: name.to_string(),
            gamma: 20.0,
            quadratic: vec![1.0],
        }
    }
}

/// Registry lookup by name.
pub fn from_spec(spec: &PotentialSpec) -> Result<Box<dyn Potential>> {
    Ok(match spec.name.as_str() {
        "linear" => Box::new(linear_potential()),
        "quartic-norm" => Box::new(quartic_norm_potential()),
        "double-well" => Box::new(double_well_potential(spec.gamma)?),
        "zero" => Box::new(zero_potential()),
        "quadratic" => Box::new(QuadraticPotential::broadcast(&spec.quadratic)?),
        other => {
            return Err(PhmcError::invalid(
                "potential",
                format!("unknown potential `{other}` (known: {})", REGISTERED.join(", ")),
            ))
        }
    })
}

/// `Φ(q) = ∫₀¹ q(s) ds`.
pub fn linear_potential() -> LinearPotential {
    LinearPotential
}

/// `Φ(q) = (∫₀¹ q(s)² ds − 1)²`.
pub fn quartic_norm_potential() -> QuarticNormPotential {
    QuarticNormPotential
}

/// `Φ(q) = (γ/2) ∫₀¹ (q(s)² − ¼)² ds`, wells at `q ≡ ±½`.
pub fn double_well_potential(gamma: f64) -> Result<DoubleWellPotential> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(PhmcError::invalid("gamma", format!("must be positive, got {gamma}")));
    }
    Ok(DoubleWellPotential { gamma })
}

pub fn zero_potential() -> ZeroPotential {
    ZeroPotential
}

/// `Φ(q) = ½ Σ_j a_j c_j²` over sine coefficients `c_j`.
pub fn gaussian_potential(diag: Vec<f64>) -> Result<QuadraticPotential> {
    QuadraticPotential::new(diag)
}

fn expect_dim(diag_len: usize, q: &Field) {
    assert_eq!(
        diag_len,
        q.dim(),
        "quadratic potential built for dimension {diag_len}, applied to {}",
        q.dim()
    );
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
pub struct LinearPotential;

/// Sine coefficients of the constant function 1 under the grid quadrature:
/// `(√2/(N+1)) cot(jπ/(2(N+1)))` for odd `j`, zero for even `j`.
pub fn unit_function_coefficients(n: usize) -> Vec<f64> {
    let m = n as f64 + 1.0;
    (1..=n)
        .map(|j| {
            if j % 2 == 1 {
                let theta = j as f64 * std::f64::consts::PI / (2.0 * m);
                std::f64::consts::SQRT_2 / m * theta.cos() / theta.sin()
            } else {
                0.0
            }
        })
        .collect()
}

impl LinearPotential {
    fn unit(repr: Representation, n: usize) -> Field {
        match repr {
            Representation::Grid => Field::grid(vec![1.0; n]),
            Representation::Spectral => Field::spectral(unit_function_coefficients(n)),
        }
    }
}

impl Potential for LinearPotential {
    fn name(&self) -> &str {
        "linear"
    }

    fn evaluate(&self, q: &Field) -> f64 {
        match q.repr() {
            Representation::Grid => grid_weight(q.dim()) * q.as_slice().iter().sum::<f64>(),
            Representation::Spectral => unit_function_coefficients(q.dim())
                .iter()
                .zip(q.as_slice())
                .map(|(a, b)| a * b)
                .sum(),
        }
    }

    fn gradient(&self, q: &Field) -> Field {
        Self::unit(q.repr(), q.dim())
    }

    fn constant_gradient(&self, repr: Representation, dim: usize) -> Option<Field> {
        Some(Self::unit(repr, dim))
    }

    fn known_constants(&self, prior: &CovarianceModel) -> Option<KnownConstants> {
        let unit = Self::unit(prior.representation(), prior.dim());
        let growth = prior.apply_covariance(&unit).ok()?.l2_norm();
        Some(KnownConstants {
            lipschitz: 0.0,
            growth,
            convexity: 1.0,
            hessian_lipschitz: 0.0,
            fourth_derivative: 0.0,
        })
    }
}

// ---------------------------------------------------------------------------
// Quartic norm
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
pub struct QuarticNormPotential;

impl Potential for QuarticNormPotential {
    fn name(&self) -> &str {
        "quartic-norm"
    }

    fn evaluate(&self, q: &Field) -> f64 {
        let n2 = q.l2_norm().powi(2);
        (n2 - 1.0) * (n2 - 1.0)
    }

    fn gradient(&self, q: &Field) -> Field {
        let n2 = q.l2_norm().powi(2);
        q.scaled(4.0 * (n2 - 1.0))
    }
}

// ---------------------------------------------------------------------------
// Double well
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct DoubleWellPotential {
    gamma: f64,
}

impl DoubleWellPotential {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Potential for DoubleWellPotential {
    fn name(&self) -> &str {
        "double-well"
    }

    fn evaluate(&self, q: &Field) -> f64 {
        let g = q.to_grid();
        let sum: f64 = g
            .as_slice()
            .iter()
            .map(|x| {
                let d = x * x - 0.25;
                d * d
            })
            .sum();
        0.5 * self.gamma * grid_weight(q.dim()) * sum
    }

    fn gradient(&self, q: &Field) -> Field {
        let g = q.to_grid();
        let grad = g.map(|x| 2.0 * self.gamma * (x * x - 0.25) * x);
        grad.to_repr(q.repr())
    }
}

// ---------------------------------------------------------------------------
// Zero and quadratic fixtures
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn name(&self) -> &str {
        "zero"
    }

    fn evaluate(&self, _q: &Field) -> f64 {
        0.0
    }

    fn gradient(&self, q: &Field) -> Field {
        Field::zeros(q.repr(), q.dim())
    }

    fn constant_gradient(&self, repr: Representation, dim: usize) -> Option<Field> {
        Some(Field::zeros(repr, dim))
    }

    fn known_constants(&self, _prior: &CovarianceModel) -> Option<KnownConstants> {
        Some(KnownConstants {
            lipschitz: 0.0,
            growth: 0.0,
            convexity: 1.0,
            hessian_lipschitz: 0.0,
            fourth_derivative: 0.0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    diag: Diagonal,
}

#[derive(Debug, Clone)]
enum Diagonal {
    Uniform(f64),
    PerMode(Vec<f64>),
}

impl QuadraticPotential {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        check_nonnegative(&diag)?;
        Ok(QuadraticPotential {
            diag: Diagonal::PerMode(diag),
        })
    }

    /// A one-element diagonal is applied to every mode regardless of dimension.
    pub fn broadcast(diag: &[f64]) -> Result<Self> {
        check_nonnegative(diag)?;
        match diag {
            [] => Err(PhmcError::invalid("quadratic", "empty diagonal")),
            [a] => Ok(QuadraticPotential {
                diag: Diagonal::Uniform(*a),
            }),
            _ => Self::new(diag.to_vec()),
        }
    }

    pub fn coefficient(&self, j: usize) -> f64 {
        match &self.diag {
            Diagonal::Uniform(a) => *a,
            Diagonal::PerMode(d) => d[j],
        }
    }

    fn scaled_coefficients(&self, c: &[f64]) -> Vec<f64> {
        c.iter()
            .enumerate()
            .map(|(j, x)| self.coefficient(j) * x)
            .collect()
    }

    fn check(&self, q: &Field) {
        if let Diagonal::PerMode(d) = &self.diag {
            expect_dim(d.len(), q);
        }
    }
}

fn check_nonnegative(diag: &[f64]) -> Result<()> {
    if let Some((j, a)) = diag
        .iter()
        .enumerate()
        .find(|(_, a)| !(a.is_finite() && **a >= 0.0))
    {
        return Err(PhmcError::invalid(
            "quadratic",
            format!("diagonal entry {j} = {a} must be non-negative"),
        ));
    }
    Ok(())
}

impl Potential for QuadraticPotential {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn evaluate(&self, q: &Field) -> f64 {
        self.check(q);
        let c = q.to_spectral();
        0.5 * c
            .as_slice()
            .iter()
            .enumerate()
            .map(|(j, x)| self.coefficient(j) * x * x)
            .sum::<f64>()
    }

    fn gradient(&self, q: &Field) -> Field {
        self.check(q);
        let c = q.to_spectral();
        Field::spectral(self.scaled_coefficients(c.as_slice())).to_repr(q.repr())
    }

    /// `C·A` is diagonal in the sine basis with entries `μ_j a_j`, so
    /// `L = max μ_j a_j` and `ζ = 1 + min μ_j a_j`.
    fn known_constants(&self, prior: &CovarianceModel) -> Option<KnownConstants> {
        let products: Vec<f64> = prior
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(j, mu)| mu * self.coefficient(j))
            .collect();
        let max = products.iter().cloned().fold(0.0, f64::max);
        let min = products.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(KnownConstants {
            lipschitz: max,
            growth: 0.0,
            convexity: 1.0 + min,
            hessian_lipschitz: 0.0,
            fourth_derivative: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, SQRT_2};

    /// Central differences of `Φ` along each coordinate, divided by the
    /// quadrature weight to obtain the Riesz representative.
    fn fd_gradient(p: &dyn Potential, q: &Field) -> Vec<f64> {
        let eps = 1e-6;
        let w = q.weight();
        (0..q.dim())
            .map(|i| {
                let mut plus = q.clone();
                plus.as_mut_slice()[i] += eps;
                let mut minus = q.clone();
                minus.as_mut_slice()[i] -= eps;
                (p.evaluate(&plus) - p.evaluate(&minus)) / (2.0 * eps) / w
            })
            .collect()
    }

    fn all_potentials(n: usize) -> Vec<Box<dyn Potential>> {
        vec![
            Box::new(linear_potential()),
            Box::new(quartic_norm_potential()),
            Box::new(double_well_potential(20.0).unwrap()),
            Box::new(zero_potential()),
            Box::new(gaussian_potential((0..n).map(|j| 1.0 + j as f64).collect()).unwrap()),
        ]
    }

    #[test]
    fn gradients_match_finite_differences() {
        let n = 32;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for repr in [Representation::Spectral, Representation::Grid] {
            let prior = CovarianceModel::bridge(repr, n).unwrap();
            for p in all_potentials(n) {
                for _ in 0..50 {
                    let q = prior.sample_prior(&mut rng).scaled(2.0);
                    let g = p.gradient(&q);
                    let fd = fd_gradient(p.as_ref(), &q);
                    let scale = g.max_abs().max(1e-3);
                    for (a, b) in g.as_slice().iter().zip(&fd) {
                        assert!(
                            (a - b).abs() <= 1e-5 * scale,
                            "{} ({repr}): {a} vs {b}",
                            p.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn linear_integrates_constants_and_basis() {
        let n = 1000;
        let one = Field::grid(vec![1.0; n]);
        let phi = linear_potential().evaluate(&one);
        assert!((phi - 1.0).abs() <= 1.0 / (n as f64 + 1.0) + 1e-12);

        let basis = Field::from_fn_on_grid(n, |x| SQRT_2 * (PI * x).sin());
        let expected = 2.0 * SQRT_2 / PI;
        assert!((linear_potential().evaluate(&basis) - expected).abs() < 1e-3);
        assert!((linear_potential().evaluate(&Field::basis(n, 1)) - expected).abs() < 1e-3);
    }

    #[test]
    fn unit_coefficients_match_transform_of_ones() {
        for n in [1usize, 8, 33, 200] {
            let via_dst = Field::grid(vec![1.0; n]).to_spectral();
            for (a, b) in unit_function_coefficients(n).iter().zip(via_dst.as_slice()) {
                assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn linear_gradient_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prior = CovarianceModel::bridge_spectral(16).unwrap();
        let (x, y) = (prior.sample_prior(&mut rng), prior.sample_prior(&mut rng));
        let p = linear_potential();
        assert_eq!(p.gradient(&x), p.gradient(&y));
    }

    #[test]
    fn quartic_stationary_points() {
        let n = 50;
        let p = quartic_norm_potential();
        let unit = Field::basis(n, 3);
        assert!(p.evaluate(&unit).abs() < 1e-15);
        assert!(p.gradient(&unit).max_abs() < 1e-15);
        let zero = Field::zeros(Representation::Grid, n);
        assert_eq!(p.evaluate(&zero), 1.0);
        assert_eq!(p.gradient(&zero).max_abs(), 0.0);
    }

    #[test]
    fn double_well_minima_and_origin() {
        let gamma = 7.0;
        let p = double_well_potential(gamma).unwrap();
        let half = Field::grid(vec![0.5; 20]);
        assert_eq!(p.evaluate(&half), 0.0);
        assert_eq!(p.gradient(&half).max_abs(), 0.0);
        let zero = Field::grid(vec![0.0; 20]);
        let expected = gamma / 32.0 * 20.0 / 21.0;
        assert!((p.evaluate(&zero) - expected).abs() < 1e-15);
        assert!(double_well_potential(0.0).is_err());
        assert!(double_well_potential(-1.0).is_err());
    }

    #[test]
    fn odd_potentials_have_odd_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prior = CovarianceModel::bridge_grid(24).unwrap();
        let pots: [Box<dyn Potential>; 2] = [
            Box::new(quartic_norm_potential()),
            Box::new(double_well_potential(20.0).unwrap()),
        ];
        for p in pots {
            let q = prior.sample_prior(&mut rng);
            let lhs = p.gradient(&q.scaled(-1.0));
            let rhs = p.gradient(&q).scaled(-1.0);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn zero_and_quadratic_fixtures() {
        let q = Field::spectral(vec![1.0, -2.0, 3.0]);
        assert_eq!(zero_potential().evaluate(&q), 0.0);
        assert_eq!(zero_potential().gradient(&q).max_abs(), 0.0);

        let a = vec![0.5, 2.0, 3.0];
        let p = gaussian_potential(a.clone()).unwrap();
        for j in 1..=3 {
            let g = p.gradient(&Field::basis(3, j));
            let mut expected = vec![0.0; 3];
            expected[j - 1] = a[j - 1];
            assert_eq!(g.as_slice(), expected.as_slice());
        }
        assert!(gaussian_potential(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn quadratic_lipschitz_is_max_over_basis_directions() {
        let n = 16;
        let prior = CovarianceModel::bridge_spectral(n).unwrap();
        let a: Vec<f64> = (0..n).map(|j| ((j * 7) % 5) as f64 + 0.5).collect();
        let p = gaussian_potential(a).unwrap();
        let brute = (1..=n)
            .map(|j| {
                let e = Field::basis(n, j);
                prior.apply_covariance(&p.gradient(&e)).unwrap().l2_norm()
            })
            .fold(0.0, f64::max);
        let known = p.known_constants(&prior).unwrap();
        assert!((known.lipschitz - brute).abs() < 1e-15);
    }

    #[test]
    fn registry_resolves_every_name() {
        for name in REGISTERED {
            let p = from_spec(&PotentialSpec::named(name)).unwrap();
            assert_eq!(p.name(), name);
        }
        assert!(from_spec(&PotentialSpec::named("cubic")).is_err());
        let mut bad = PotentialSpec::named("double-well");
        bad.gamma = 0.0;
        assert!(from_spec(&bad).is_err());
    }
}
