//! Discrete sine transform (type I) on the interior grid `x_i = i/(N+1)`.
//!
//! The sine basis `φ_j(x) = √2 sin(jπx)` is orthonormal both in `L²(0,1)` and,
//! restricted to the interior grid, in the discrete inner product with weight
//! `1/(N+1)`. The two maps below are therefore mutually inverse isometries.

use std::cell::RefCell;
use std::f64::consts::SQRT_2;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized DST-I: `X_j = Σ_{k=1}^{N} x_k sin(π j k / (N+1))`.
pub fn dst1(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let m = 2 * (n + 1);
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    for (k, &xk) in x.iter().enumerate() {
        buf[k + 1].re = xk;
        buf[m - k - 1].re = -xk;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m));
    fft.process(&mut buf);
    // The odd extension makes the spectrum purely imaginary: Y_j = -2i X_j.
    buf[1..=n].iter().map(|c| -0.5 * c.im).collect()
}

/// Grid values of `Σ_j c_j φ_j` at the interior nodes.
pub fn coefficients_to_values(coeffs: &[f64]) -> Vec<f64> {
    let mut out = dst1(coeffs);
    out.iter_mut().for_each(|v| *v *= SQRT_2);
    out
}

/// Coefficients `c_j = (1/(N+1)) Σ_i f(x_i) φ_j(x_i)`.
pub fn values_to_coefficients(values: &[f64]) -> Vec<f64> {
    let scale = SQRT_2 / (values.len() as f64 + 1.0);
    let mut out = dst1(values);
    out.iter_mut().for_each(|c| *c *= scale);
    out
}
