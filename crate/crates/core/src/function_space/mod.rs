//! Discretized Hilbert-space arithmetic.
//!
//! A [`Field`] is an element of the `N`-dimensional space `H_N`, stored either
//! as coefficients in the sine basis `φ_j(x) = √2 sin(jπx)` or as values on the
//! interior grid `x_i = i/(N+1)`. Grid quantities integrate with the uniform
//! weight `1/(N+1)`; under that weight the sine transform is an isometry, so
//! both representations see the same `L²` geometry.

mod covariance;
pub mod sine;

pub use covariance::{bridge_eigenvalues, CovarianceModel};

use crate::error::{PhmcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    /// Coefficients of `φ_1..φ_N`.
    Spectral,
    /// Point values at `x_1..x_N`.
    Grid,
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Representation::Spectral => f.write_str("spectral"),
            Representation::Grid => f.write_str("grid"),
        }
    }
}

impl std::str::FromStr for Representation {
    type Err = PhmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Representation::Spectral),
            "grid" => Ok(Representation::Grid),
            other => Err(PhmcError::invalid(
                "repr",
                format!("unknown representation `{other}` (expected spectral|grid)"),
            )),
        }
    }
}

/// Exponent `s` of the weight `j^{2s}` in the Sobolev-like inner product.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SobolevIndex(pub f64);

impl SobolevIndex {
    pub const L2: SobolevIndex = SobolevIndex(0.0);
}

impl Default for SobolevIndex {
    fn default() -> Self {
        SobolevIndex::L2
    }
}

/// Interior grid nodes `i/(N+1)`, `i = 1..N`.
pub fn grid_points(n: usize) -> Vec<f64> {
    let denom = n as f64 + 1.0;
    (1..=n).map(|i| i as f64 / denom).collect()
}

/// Quadrature weight of the interior grid.
pub fn grid_weight(n: usize) -> f64 {
    1.0 / (n as f64 + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    repr: Representation,
    data: Vec<f64>,
}

impl Field {
    pub fn new(repr: Representation, data: Vec<f64>) -> Self {
        Field { repr, data }
    }

    pub fn spectral(data: Vec<f64>) -> Self {
        Field::new(Representation::Spectral, data)
    }

    pub fn grid(data: Vec<f64>) -> Self {
        Field::new(Representation::Grid, data)
    }

    pub fn zeros(repr: Representation, n: usize) -> Self {
        Field::new(repr, vec![0.0; n])
    }

    /// Grid field holding `f(x_i)`.
    pub fn from_fn_on_grid(n: usize, f: impl Fn(f64) -> f64) -> Self {
        Field::grid(grid_points(n).into_iter().map(f).collect())
    }

    /// The basis function `φ_j` (1-based) in spectral form.
    pub fn basis(n: usize, j: usize) -> Self {
        assert!((1..=n).contains(&j), "basis index {j} outside 1..={n}");
        let mut data = vec![0.0; n];
        data[j - 1] = 1.0;
        Field::spectral(data)
    }

    pub fn repr(&self) -> Representation {
        self.repr
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Same representation and dimension.
    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(PhmcError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        if self.repr != other.repr {
            return Err(PhmcError::RepresentationMismatch {
                expected: self.repr,
                found: other.repr,
            });
        }
        Ok(())
    }

    /// Sine-basis coefficients. Identity on spectral input.
    pub fn to_spectral(&self) -> Field {
        match self.repr {
            Representation::Spectral => self.clone(),
            Representation::Grid => Field::spectral(sine::values_to_coefficients(&self.data)),
        }
    }

    /// Interior grid values. Identity on grid input.
    pub fn to_grid(&self) -> Field {
        match self.repr {
            Representation::Grid => self.clone(),
            Representation::Spectral => Field::grid(sine::coefficients_to_values(&self.data)),
        }
    }

    pub fn to_repr(&self, repr: Representation) -> Field {
        match repr {
            Representation::Spectral => self.to_spectral(),
            Representation::Grid => self.to_grid(),
        }
    }

    /// Quadrature weight attached to each coordinate in the `L²` pairing.
    pub fn weight(&self) -> f64 {
        match self.repr {
            Representation::Spectral => 1.0,
            Representation::Grid => grid_weight(self.dim()),
        }
    }

    /// `L²` pairing. Mixed representations are compared in spectral form.
    pub fn l2_inner(&self, other: &Field) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(PhmcError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        if self.repr != other.repr {
            return Ok(dot(&self.to_spectral().data, &other.to_spectral().data));
        }
        Ok(self.weight() * dot(&self.data, &other.data))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.weight() * dot(&self.data, &self.data)).sqrt()
    }

    pub fn sobolev_norm(&self, s: SobolevIndex) -> f64 {
        if s.0 == 0.0 {
            return self.l2_norm();
        }
        let c = self.to_spectral();
        weighted_sum(&c.data, &c.data, s).max(0.0).sqrt()
    }

    /// `L²` distance; fields must share dimension and representation.
    pub fn l2_distance(&self, other: &Field) -> Result<f64> {
        self.check_compatible(other)?;
        let sq: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((self.weight() * sq).sqrt())
    }

    pub fn sobolev_distance(&self, other: &Field, s: SobolevIndex) -> Result<f64> {
        Ok(self.sub(other)?.sobolev_norm(s))
    }

    /// Coordinatewise equality of the stored numbers.
    pub fn same_numbers(&self, other: &Field) -> bool {
        self.repr == other.repr && self.data == other.data
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        self.map(|x| alpha * x)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        Ok(self.zip_map(other, |a, b| a + alpha * b))
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::new(self.repr, self.data.iter().map(|&x| f(x)).collect())
    }

    pub(crate) fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.dim(), other.dim());
        Field::new(
            self.repr,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted_sum(f: &[f64], g: &[f64], s: SobolevIndex) -> f64 {
    f.iter()
        .zip(g)
        .enumerate()
        .map(|(idx, (a, b))| ((idx + 1) as f64).powf(2.0 * s.0) * a * b)
        .sum()
}

/// `⟨f, g⟩_s = Σ_j j^{2s} f_j g_j` over sine coefficients. Grid inputs are
/// transformed first.
pub fn sobolev_inner(f: &Field, g: &Field, s: SobolevIndex) -> Result<f64> {
    if f.dim() != g.dim() {
        return Err(PhmcError::DimensionMismatch {
            left: f.dim(),
            right: g.dim(),
        });
    }
    let (fc, gc) = (f.to_spectral(), g.to_spectral());
    Ok(weighted_sum(fc.as_slice(), gc.as_slice(), s))
}
