//! Empirical estimates of the contraction constants and direct checks of the
//! trajectory inequalities they feed into.
//!
//! All suprema and infima are taken over prior samples, so `L̂`, `L̂′`, `M̂` are
//! lower bounds of the true constants and `ζ̂` is an upper bound.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{PhmcError, Result};
use crate::function_space::{sobolev_inner, CovarianceModel, Field, SobolevIndex};
use crate::integrator::{integrate, preconditioned_gradient, IntegratorParams, PhaseState};
use crate::potentials::Potential;

/// Default number of prior velocity draws behind the radius `R`.
pub const DEFAULT_VELOCITY_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    /// Norm index `l` used for every distance in the audit.
    pub sobolev: SobolevIndex,
    /// Draws for the velocity-radius quantile; 0 skips it.
    pub velocity_draws: usize,
    /// Offset of the local pairs `y = x + δ·w`.
    pub local_offset: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            sobolev: SobolevIndex::L2,
            velocity_draws: DEFAULT_VELOCITY_DRAWS,
            local_offset: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub pairs_used: usize,
    /// Lower bound of the Lipschitz constant of `C·DΦ`.
    pub lipschitz: f64,
    /// Lower bound of the affine growth constant `L′`.
    pub growth: f64,
    /// Upper bound of the convexity constant `ζ`.
    pub convexity: f64,
    /// Lower bound of the Lipschitz constant of `C·D²Φ`.
    pub hessian_lipschitz: f64,
    pub trajectory_length: f64,
    pub step_size: f64,
    /// `T² + L̂(T² + 2hT)`.
    pub step_condition: f64,
    /// `ζ̂ / (1 + L̂)`.
    pub contraction_threshold: f64,
    pub lipschitz_ok: bool,
    pub convexity_ok: bool,
    pub step_condition_ok: bool,
    pub contraction_condition_ok: bool,
    /// `1 − ζ̂T²/27`.
    pub theorem_rate: f64,
    /// Empirical quantile of `‖v‖` at level `1 − ζ̂/(2000(L̂+1))`.
    pub velocity_radius: Option<f64>,
}

impl AssumptionReport {
    /// `key=value` lines, one per quantity, with PASS/FAIL flags.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let flag = |ok: bool| if ok { "PASS" } else { "FAIL" }.to_string();
        vec![
            ("pairs_used".into(), self.pairs_used.to_string()),
            ("lipschitz_lower_bound".into(), self.lipschitz.to_string()),
            ("growth_lower_bound".into(), self.growth.to_string()),
            ("convexity_upper_bound".into(), self.convexity.to_string()),
            (
                "hessian_lipschitz_lower_bound".into(),
                self.hessian_lipschitz.to_string(),
            ),
            ("trajectory_length".into(), self.trajectory_length.to_string()),
            ("step_size".into(), self.step_size.to_string()),
            ("step_condition".into(), self.step_condition.to_string()),
            (
                "contraction_threshold".into(),
                self.contraction_threshold.to_string(),
            ),
            ("theorem_rate".into(), self.theorem_rate.to_string()),
            (
                "velocity_radius".into(),
                self.velocity_radius
                    .map_or_else(|| "none".to_string(), |r| r.to_string()),
            ),
            ("assumption_lipschitz".into(), flag(self.lipschitz_ok)),
            ("assumption_convexity".into(), flag(self.convexity_ok)),
            ("assumption_step".into(), flag(self.step_condition_ok)),
            ("assumption_contraction".into(), flag(self.contraction_condition_ok)),
        ]
    }
}

fn isotropic<R: Rng + ?Sized>(like: &Field, rng: &mut R) -> Field {
    let data = (0..like.dim()).map(|_| rng.sample(StandardNormal)).collect();
    Field::new(like.repr(), data)
}

/// Estimates `L`, `L′`, `ζ` and `M` from `n_pairs` prior-sampled pairs and
/// evaluates the step-size conditions for `p`.
///
/// Pairs cycle through three kinds: independent prior draws `(x, y)`, and
/// local pairs `y = x + δ·w` with `w` either a prior draw or white noise in the
/// stored coordinates. The local pairs probe the Hessian at typical points.
pub fn audit_assumptions<R: Rng + ?Sized>(
    potential: &dyn Potential,
    prior: &CovarianceModel,
    p: &IntegratorParams,
    n_pairs: usize,
    rng: &mut R,
    opts: &AuditOptions,
) -> Result<AssumptionReport> {
    if n_pairs < 100 {
        return Err(PhmcError::invalid(
            "n_pairs",
            format!("need at least 100 pairs, got {n_pairs}"),
        ));
    }
    if !(opts.local_offset > 0.0) {
        return Err(PhmcError::invalid("local_offset", "must be positive"));
    }
    let s = opts.sobolev;
    let force = |q: &Field| preconditioned_gradient(q, potential, prior);

    let zero = Field::zeros(prior.representation(), prior.dim());
    let force_at_zero = force(&zero)?.sobolev_norm(s);

    let mut lipschitz: f64 = 0.0;
    let mut convexity = f64::INFINITY;
    let mut hessian_lipschitz: f64 = 0.0;
    let mut growth_samples = Vec::with_capacity(2 * n_pairs);
    let mut used = 0;

    for k in 0..n_pairs {
        let x = prior.sample_prior(rng);
        let y = match k % 3 {
            0 => prior.sample_prior(rng),
            1 => x.axpy(opts.local_offset, &prior.sample_prior(rng))?,
            _ => x.axpy(opts.local_offset, &isotropic(&x, rng))?,
        };
        let d = x.sub(&y)?;
        let nd = d.sobolev_norm(s);
        if nd == 0.0 {
            continue;
        }
        let (fx, fy) = (force(&x)?, force(&y)?);
        let df = fx.sub(&fy)?;
        used += 1;
        lipschitz = lipschitz.max(df.sobolev_norm(s) / nd);
        convexity = convexity.min((nd * nd + sobolev_inner(&df, &d, s)?) / (nd * nd));
        growth_samples.push((fx.sobolev_norm(s), x.sobolev_norm(s)));
        growth_samples.push((fy.sobolev_norm(s), y.sobolev_norm(s)));

        if k % 3 == 0 {
            let u = prior.sample_prior(rng);
            let nu = u.sobolev_norm(s);
            if nu > 0.0 {
                let eps = 1e-4 / nu;
                let hess = |q: &Field| -> Result<Field> {
                    let plus = force(&q.axpy(eps, &u)?)?;
                    let minus = force(&q.axpy(-eps, &u)?)?;
                    Ok(plus.sub(&minus)?.scaled(0.5 / eps))
                };
                let dh = hess(&x)?.sub(&hess(&y)?)?;
                hessian_lipschitz = hessian_lipschitz.max(dh.sobolev_norm(s) / (nd * nu));
            }
        }
    }
    if used == 0 {
        return Err(PhmcError::DegeneratePairs);
    }

    let growth = growth_samples
        .iter()
        .map(|(f, x)| f - lipschitz * x)
        .fold(force_at_zero, f64::max)
        .max(0.0);

    let t = p.trajectory_length();
    let h = p.step_size();
    let step_condition = t * t + lipschitz * (t * t + 2.0 * h * t);
    let contraction_threshold = convexity / (1.0 + lipschitz);
    let convexity_ok = convexity > 0.0 && convexity <= lipschitz + 1.0;

    let velocity_radius = if convexity > 0.0 && opts.velocity_draws > 0 {
        let level = 1.0 - convexity / (2000.0 * (lipschitz + 1.0));
        let mut norms: Vec<f64> = (0..opts.velocity_draws)
            .map(|_| prior.sample_prior(rng).sobolev_norm(s))
            .collect();
        norms.sort_by(f64::total_cmp);
        let idx = ((level * norms.len() as f64).ceil() as usize).clamp(1, norms.len()) - 1;
        Some(norms[idx])
    } else {
        None
    };

    Ok(AssumptionReport {
        pairs_used: used,
        lipschitz,
        growth,
        convexity,
        hessian_lipschitz,
        trajectory_length: t,
        step_size: h,
        step_condition,
        contraction_threshold,
        lipschitz_ok: lipschitz.is_finite() && growth.is_finite(),
        convexity_ok,
        step_condition_ok: step_condition <= 1.0,
        contraction_condition_ok: convexity_ok && step_condition <= contraction_threshold,
        theorem_rate: 1.0 - convexity * t * t / 27.0,
        velocity_radius,
    })
}

/// `max_{0≤r≤t} ‖cos r·a + sin r·b‖_s`: the largest position norm along the
/// rotation inside one Strang step.
fn arc_max_norm(a: &Field, b: &Field, t: f64, s: SobolevIndex) -> Result<f64> {
    let aa = sobolev_inner(a, a, s)?;
    let bb = sobolev_inner(b, b, s)?;
    let ab = sobolev_inner(a, b, s)?;
    // ‖·‖² = (aa + bb)/2 + (aa − bb)/2·cos 2r + ab·sin 2r
    let f = |r: f64| {
        let (s2, c2) = (2.0 * r).sin_cos();
        0.5 * (aa + bb) + 0.5 * (aa - bb) * c2 + ab * s2
    };
    let mut best = f(0.0).max(f(t));
    let phase = ab.atan2(0.5 * (aa - bb));
    for k in -1..=2 {
        let r = 0.5 * (phase + k as f64 * 2.0 * std::f64::consts::PI);
        if r > 0.0 && r < t {
            best = best.max(f(r));
        }
    }
    Ok(best.max(0.0).sqrt())
}

/// Constants plugged into the trajectory inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConstants {
    pub lipschitz: f64,
    pub growth: f64,
    pub convexity: f64,
}

impl From<&AssumptionReport> for AuditConstants {
    fn from(r: &AssumptionReport) -> Self {
        AuditConstants {
            lipschitz: r.lipschitz,
            growth: r.growth,
            convexity: r.convexity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundAuditOptions {
    pub sobolev: SobolevIndex,
    /// `K` in the small-step gate `(1 + ‖x‖ + ‖v‖)h ≤ ζ/K`.
    pub gate_constant: f64,
    /// Relative slack for floating-point rounding.
    pub rel_tolerance: f64,
}

impl Default for BoundAuditOptions {
    fn default() -> Self {
        BoundAuditOptions {
            sobolev: SobolevIndex::L2,
            gate_constant: 1.0,
            rel_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundCheck {
    pub checked: usize,
    /// Runs outside the inequality's hypotheses.
    pub out_of_scope: usize,
    pub violations: Vec<String>,
}

impl BoundCheck {
    fn check(&mut self, label: &str, run: usize, step: usize, lhs: f64, rhs: f64, tol: f64) {
        if !(lhs <= rhs + tol * rhs.abs().max(1e-300)) || !lhs.is_finite() {
            self.violations
                .push(format!("{label}: run {run} step {step}: {lhs:e} > {rhs:e}"));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundAuditReport {
    pub constants: AuditConstants,
    /// `T² + L(T² + 2hT) ≤ 1`; when false nothing is checked.
    pub step_condition_holds: bool,
    /// `T² + L(T² + 2hT) ≤ ζ/(1+L)`; when false the contraction check is skipped.
    pub contraction_condition_holds: bool,
    pub growth: BoundCheck,
    pub difference: BoundCheck,
    pub contraction: BoundCheck,
}

impl BoundAuditReport {
    pub fn passed(&self) -> bool {
        self.growth.violations.is_empty()
            && self.difference.violations.is_empty()
            && self.contraction.violations.is_empty()
    }

    pub fn violation_count(&self) -> usize {
        self.growth.violations.len()
            + self.difference.violations.len()
            + self.contraction.violations.len()
    }
}

/// Checks on `n_runs` prior-sampled `(x, y, v)`:
///
/// - growth: `‖q_s − (x + s v)‖ ≤ c(s)·max(‖x‖, ‖x + s v‖) + L′(s² + 2sh)` and
///   `‖v_s − v‖ ≤ (1+L)s·max_{r≤s}‖q_r‖ + L′s`, with `c(s) = s² + L(s² + 2sh)`;
/// - difference, same velocity: `‖z_s − (x − y)‖ ≤ c(s)‖x − y‖` and
///   `‖w_s‖ ≤ s(1+L)(1 + c(s))‖x − y‖`;
/// - contraction: `‖z_s‖² ≤ (1 − ζs²/12)‖x − y‖²` for runs passing the gate.
///
/// Every grid time `s = ih` along the discrete trajectory is checked.
pub fn audit_trajectory_bounds<R: Rng + ?Sized>(
    potential: &dyn Potential,
    prior: &CovarianceModel,
    p: &IntegratorParams,
    constants: AuditConstants,
    n_runs: usize,
    rng: &mut R,
    opts: &BoundAuditOptions,
) -> Result<BoundAuditReport> {
    let s = opts.sobolev;
    let tol = opts.rel_tolerance;
    let (l, lp, zeta) = (constants.lipschitz, constants.growth, constants.convexity);
    let h = p.step_size();
    let t = p.trajectory_length();
    let c = |r: f64| r * r + l * (r * r + 2.0 * r * h);

    let mut report = BoundAuditReport {
        constants,
        step_condition_holds: c(t) <= 1.0,
        contraction_condition_holds: zeta > 0.0 && c(t) <= zeta / (1.0 + l),
        growth: BoundCheck::default(),
        difference: BoundCheck::default(),
        contraction: BoundCheck::default(),
    };
    if !report.step_condition_holds {
        report.growth.out_of_scope = n_runs;
        report.difference.out_of_scope = n_runs;
        report.contraction.out_of_scope = n_runs;
        return Ok(report);
    }

    for run in 0..n_runs {
        let x = prior.sample_prior(rng);
        let y = prior.sample_prior(rng);
        let v = prior.sample_prior(rng);
        let tx = integrate(&PhaseState::new(x.clone(), v.clone())?, p, potential, prior)?;
        let ty = integrate(&PhaseState::new(y.clone(), v.clone())?, p, potential, prior)?;
        let d0 = x.sub(&y)?;
        let nd0 = d0.sobolev_norm(s);
        let nx = x.sobolev_norm(s);

        report.growth.checked += 1;
        report.difference.checked += 1;
        let mut max_q: f64 = 0.0;
        for (i, (sx, sy)) in tx.states.iter().zip(&ty.states).enumerate().skip(1) {
            let r = i as f64 * h;
            let free = x.axpy(r, &v)?;
            let prev = &tx.states[i - 1];
            let kicked = prev.v.axpy(-0.5 * h, &tx.forces[i - 1])?;
            max_q = max_q.max(arc_max_norm(&prev.q, &kicked, h, s)?);

            let lhs = sx.q.sub(&free)?.sobolev_norm(s);
            let rhs = c(r) * nx.max(free.sobolev_norm(s)) + lp * (r * r + 2.0 * r * h);
            report.growth.check("position growth", run, i, lhs, rhs, tol);
            let lhs = sx.v.sub(&v)?.sobolev_norm(s);
            let rhs = (1.0 + l) * r * max_q + lp * r;
            report.growth.check("velocity growth", run, i, lhs, rhs, tol);

            let z = sx.q.sub(&sy.q)?;
            let lhs = z.sub(&d0)?.sobolev_norm(s);
            report
                .difference
                .check("position difference", run, i, lhs, c(r) * nd0, tol);
            let lhs = sx.v.sub(&sy.v)?.sobolev_norm(s);
            let rhs = r * (1.0 + l) * (1.0 + c(r)) * nd0;
            report.difference.check("velocity difference", run, i, lhs, rhs, tol);
        }

        let gate = |q: &Field| (1.0 + q.sobolev_norm(s) + v.sobolev_norm(s)) * h;
        let limit = zeta / opts.gate_constant;
        if !report.contraction_condition_holds || gate(&x) > limit || gate(&y) > limit {
            report.contraction.out_of_scope += 1;
            continue;
        }
        report.contraction.checked += 1;
        for (i, (sx, sy)) in tx.states.iter().zip(&ty.states).enumerate().skip(1) {
            let r = i as f64 * h;
            let z = sx.q.sub(&sy.q)?.sobolev_norm(s);
            let rhs = (1.0 - zeta * r * r / 12.0) * nd0 * nd0;
            report.contraction.check("contraction", run, i, z * z, rhs, tol);
        }
    }
    Ok(report)
}
