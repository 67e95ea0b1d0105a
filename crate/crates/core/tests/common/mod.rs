#![allow(dead_code)]

use std::f64::consts::PI;

use phmc_core::{Field, PhaseState, Potential, Representation};

/// Kolmogorov tail `Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let q: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            2.0 * sign * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    q.clamp(0.0, 1.0)
}

fn effective(n: f64, d: f64) -> f64 {
    let sn = n.sqrt();
    (sn + 0.12 + 0.11 / sn) * d
}

/// One-sample KS p-value against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    kolmogorov_tail(effective(n, d))
}

/// Two-sample KS p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n = (na * nb) as f64 / (na + nb) as f64;
    kolmogorov_tail(effective(n, d))
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `H_N(end) − H_N(start)` under the Brownian-bridge prior, with the precision
/// operator written out per representation. Quadratic forms use
/// `(a − b)ᵀP(a + b)` to avoid cancellation.
pub fn energy_difference(start: &PhaseState, end: &PhaseState, pot: &dyn Potential) -> f64 {
    let form = |a: &Field, b: &Field| -> f64 {
        let n = a.dim();
        let d: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x - y).collect();
        let s: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect();
        match a.repr() {
            Representation::Spectral => (0..n)
                .map(|j| {
                    let k = (j + 1) as f64 * PI;
                    k * k * d[j] * s[j]
                })
                .sum(),
            Representation::Grid => {
                let at = |v: &[f64], i: isize| {
                    if i < 0 || i as usize >= n {
                        0.0
                    } else {
                        v[i as usize]
                    }
                };
                let ts: f64 = (0..n as isize)
                    .map(|i| d[i as usize] * (2.0 * s[i as usize] - at(&s, i - 1) - at(&s, i + 1)))
                    .sum();
                (n + 1) as f64 * ts
            }
        }
    };
    pot.evaluate(&end.q) - pot.evaluate(&start.q)
        + 0.5 * form(&end.q, &start.q)
        + 0.5 * form(&end.v, &start.v)
}
