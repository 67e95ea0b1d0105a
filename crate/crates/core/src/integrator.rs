//! Split Hamiltonian flows for the preconditioned system
//! `q' = v`, `v' = −q − C·DΦ(q)`.
//!
//! The harmonic part is an exact rotation; the force part is an exact kick.
//! Their Strang composition `kick(h/2) ∘ rotate(h) ∘ kick(h/2)` is the step
//! used by the adjusted sampler.

use crate::error::{PhmcError, Result};
use crate::function_space::{CovarianceModel, Field};
use crate::potentials::Potential;

/// Coordinates beyond this magnitude count as a blow-up.
pub const DIVERGENCE_THRESHOLD: f64 = 1e100;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Field,
    pub v: Field,
}

impl PhaseState {
    pub fn new(q: Field, v: Field) -> Result<Self> {
        q.check_compatible(&v)?;
        Ok(PhaseState { q, v })
    }

    /// `S(q, v) = (q, −v)`.
    pub fn flip_velocity(&self) -> PhaseState {
        PhaseState {
            q: self.q.clone(),
            v: self.v.scaled(-1.0),
        }
    }

    pub fn is_diverged(&self) -> bool {
        let bad = |f: &Field| {
            f.as_slice()
                .iter()
                .any(|x| !x.is_finite() || x.abs() > DIVERGENCE_THRESHOLD)
        };
        bad(&self.q) || bad(&self.v)
    }
}

/// Step size `h` and step count `I`; the trajectory length `T = I·h` is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorParams {
    step_size: f64,
    steps: usize,
}

impl IntegratorParams {
    pub fn new(step_size: f64, steps: usize) -> Result<Self> {
        if !(step_size.is_finite() && step_size > 0.0) {
            return Err(PhmcError::invalid(
                "h",
                format!("step size must be positive, got {step_size}"),
            ));
        }
        if steps == 0 {
            return Err(PhmcError::invalid("steps", "need at least one step"));
        }
        Ok(IntegratorParams { step_size, steps })
    }

    /// Splits `T` into `steps` equal pieces.
    pub fn from_length(trajectory_length: f64, steps: usize) -> Result<Self> {
        Self::new(trajectory_length / steps as f64, steps)
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn trajectory_length(&self) -> f64 {
        self.steps as f64 * self.step_size
    }

    /// Same `T` with each step subdivided `factor` times.
    pub fn refined(&self, factor: u32) -> Result<Self> {
        if factor == 0 {
            return Err(PhmcError::invalid("refinement", "factor must be positive"));
        }
        Self::new(
            self.step_size / factor as f64,
            self.steps * factor as usize,
        )
    }
}

/// Flow of the harmonic part: rotation by angle `t` in each `(q, v)` plane.
pub fn rotate_flow(x: &PhaseState, t: f64) -> PhaseState {
    let (s, c) = t.sin_cos();
    rotate_with(x, c, s)
}

fn rotate_with(x: &PhaseState, c: f64, s: f64) -> PhaseState {
    PhaseState {
        q: x.q.zip_map(&x.v, |q, v| c * q + s * v),
        v: x.q.zip_map(&x.v, |q, v| -s * q + c * v),
    }
}

/// `C·DΦ(q)`.
pub fn preconditioned_gradient(
    q: &Field,
    potential: &dyn Potential,
    prior: &CovarianceModel,
) -> Result<Field> {
    prior.apply_covariance(&potential.gradient(q))
}

/// Flow of the force part: `v ← v − t·C·DΦ(q)` with `q` frozen.
pub fn kick_flow(
    x: &PhaseState,
    t: f64,
    potential: &dyn Potential,
    prior: &CovarianceModel,
) -> Result<PhaseState> {
    let force = preconditioned_gradient(&x.q, potential, prior)?;
    Ok(PhaseState {
        q: x.q.clone(),
        v: x.v.axpy(-t, &force)?,
    })
}

/// One Strang step `ψ_h = kick(h/2) ∘ rotate(h) ∘ kick(h/2)`.
pub fn strang_step(
    x: &PhaseState,
    h: f64,
    potential: &dyn Potential,
    prior: &CovarianceModel,
) -> Result<PhaseState> {
    let half = kick_flow(x, 0.5 * h, potential, prior)?;
    let rotated = rotate_flow(&half, h);
    kick_flow(&rotated, 0.5 * h, potential, prior)
}

/// A trajectory together with the forces evaluated along it.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<PhaseState>,
    /// `DΦ(q_i)`.
    pub gradients: Vec<Field>,
    /// `C·DΦ(q_i)`.
    pub forces: Vec<Field>,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Runs `I` Strang steps, keeping every intermediate state and force.
/// Each step reuses the force at its starting point.
pub fn integrate(
    x: &PhaseState,
    p: &IntegratorParams,
    potential: &dyn Potential,
    prior: &CovarianceModel,
) -> Result<Trajectory> {
    x.q.check_compatible(&x.v)?;
    prior.check_field(&x.q)?;
    let h = p.step_size();
    let (s, c) = h.sin_cos();
    let n = p.steps();

    let g0 = potential.gradient(&x.q);
    let f0 = prior.apply_covariance(&g0)?;
    let mut traj = Trajectory {
        states: Vec::with_capacity(n + 1),
        gradients: Vec::with_capacity(n + 1),
        forces: Vec::with_capacity(n + 1),
    };
    traj.states.push(x.clone());
    traj.gradients.push(g0);
    traj.forces.push(f0);

    for step in 1..=n {
        let (cur, force) = (&traj.states[step - 1], &traj.forces[step - 1]);
        let half = cur.v.axpy(-0.5 * h, force)?;
        let rotated = rotate_with(
            &PhaseState {
                q: cur.q.clone(),
                v: half,
            },
            c,
            s,
        );
        let g = potential.gradient(&rotated.q);
        let f = prior.apply_covariance(&g)?;
        let next = PhaseState {
            v: rotated.v.axpy(-0.5 * h, &f)?,
            q: rotated.q,
        };
        if next.is_diverged() {
            return Err(PhmcError::Divergence { step });
        }
        traj.states.push(next);
        traj.gradients.push(g);
        traj.forces.push(f);
    }
    Ok(traj)
}

/// `ψ_h` iterated `I` times; `output[0] = x`, length `I + 1`.
pub fn trajectory(
    x: &PhaseState,
    p: &IntegratorParams,
    potential: &dyn Potential,
    prior: &CovarianceModel,
) -> Result<Vec<PhaseState>> {
    integrate(x, p, potential, prior).map(|t| t.states)
}

/// Final state of `I` Strang steps without storing the path.
pub fn integrate_endpoint(
    x: &PhaseState,
    p: &IntegratorParams,
    potential: &dyn Potential,
    prior: &CovarianceModel,
) -> Result<PhaseState> {
    prior.check_field(&x.q)?;
    let h = p.step_size();
    let (s, c) = h.sin_cos();
    let mut state = x.clone();
    let mut force = preconditioned_gradient(&state.q, potential, prior)?;
    for step in 1..=p.steps() {
        state.v = state.v.axpy(-0.5 * h, &force)?;
        state = rotate_with(&state, c, s);
        force = preconditioned_gradient(&state.q, potential, prior)?;
        state.v = state.v.axpy(-0.5 * h, &force)?;
        if state.is_diverged() {
            return Err(PhmcError::Divergence { step });
        }
    }
    Ok(state)
}

/// Exact flow at time `T` when `DΦ ≡ b`: with `m = C·b`,
/// `q(T) = cos T (q₀ + m) + sin T v₀ − m`, `v(T) = −sin T (q₀ + m) + cos T v₀`.
pub fn exact_flow_affine(
    x: &PhaseState,
    t: f64,
    b: &Field,
    prior: &CovarianceModel,
) -> Result<PhaseState> {
    let m = prior.apply_covariance(b)?;
    let shifted = PhaseState {
        q: x.q.add(&m)?,
        v: x.v.clone(),
    };
    let mut out = rotate_flow(&shifted, t);
    out.q = out.q.sub(&m)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::Representation;
    use crate::potentials::{
        double_well_potential, gaussian_potential, linear_potential, quartic_norm_potential,
        zero_potential,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_state(prior: &CovarianceModel, rng: &mut ChaCha8Rng) -> PhaseState {
        PhaseState::new(prior.sample_prior(rng), prior.sample_prior(rng)).unwrap()
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    /// Closed-form single step written out coordinatewise.
    fn closed_form_step(
        x: &PhaseState,
        h: f64,
        p: &dyn Potential,
        c: &CovarianceModel,
    ) -> PhaseState {
        let f0 = preconditioned_gradient(&x.q, p, c).unwrap();
        let (s, co) = (h.sin(), h.cos());
        let q1: Vec<f64> = (0..x.q.dim())
            .map(|i| {
                co * x.q.as_slice()[i] + s * x.v.as_slice()[i] - 0.5 * h * s * f0.as_slice()[i]
            })
            .collect();
        let q1 = Field::new(x.q.repr(), q1);
        let f1 = preconditioned_gradient(&q1, p, c).unwrap();
        let v1: Vec<f64> = (0..x.q.dim())
            .map(|i| {
                -s * x.q.as_slice()[i] + co * x.v.as_slice()[i]
                    - 0.5 * h * co * f0.as_slice()[i]
                    - 0.5 * h * f1.as_slice()[i]
            })
            .collect();
        PhaseState {
            q: q1,
            v: Field::new(x.q.repr(), v1),
        }
    }

    #[test]
    fn params_validate() {
        assert!(IntegratorParams::new(0.0, 3).is_err());
        assert!(IntegratorParams::new(-0.1, 3).is_err());
        assert!(IntegratorParams::new(0.1, 0).is_err());
        let p = IntegratorParams::new(0.2, 12).unwrap();
        assert!((p.trajectory_length() - 2.4).abs() < 1e-15);
        let r = p.refined(64).unwrap();
        assert_eq!(r.steps(), 768);
        assert!((r.trajectory_length() - 2.4).abs() < 1e-13);
    }

    #[test]
    fn rotation_special_angles() {
        let x = PhaseState::new(Field::spectral(vec![1.0, 2.0]), Field::spectral(vec![3.0, -4.0]))
            .unwrap();
        assert_eq!(rotate_flow(&x, 0.0), x);
        let quarter = rotate_flow(&x, PI / 2.0);
        assert!(max_diff(&quarter.q, &x.v) < 1e-15);
        assert!(max_diff(&quarter.v, &x.q.scaled(-1.0)) < 1e-15);
    }

    #[test]
    fn rotation_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = CovarianceModel::bridge_grid(40).unwrap();
        for _ in 0..20 {
            let x = random_state(&c, &mut rng);
            let y = rotate_flow(&x, 1.234);
            let before = x.q.l2_norm().powi(2) + x.v.l2_norm().powi(2);
            let after = y.q.l2_norm().powi(2) + y.v.l2_norm().powi(2);
            assert!((before - after).abs() < 1e-12);
        }
    }

    #[test]
    fn kick_properties() {
        let c = CovarianceModel::bridge_spectral(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_state(&c, &mut rng);
        assert_eq!(kick_flow(&x, 0.7, &zero_potential(), &c).unwrap(), x);

        let lin = linear_potential();
        let kicked = kick_flow(&x, 1.0, &lin, &c).unwrap();
        let shift = c
            .apply_covariance(&lin.gradient(&x.q))
            .unwrap();
        assert_eq!(kicked.q, x.q);
        assert!(max_diff(&kicked.v, &x.v.sub(&shift).unwrap()) < 1e-15);

        let dw = double_well_potential(20.0).unwrap();
        let there = kick_flow(&x, 0.3, &dw, &c).unwrap();
        let back = kick_flow(&there, -0.3, &dw, &c).unwrap();
        assert!(max_diff(&back.v, &x.v) < 1e-12);
    }

    #[test]
    fn strang_with_zero_potential_is_rotation() {
        let c = CovarianceModel::bridge_spectral(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_state(&c, &mut rng);
        let a = strang_step(&x, 0.37, &zero_potential(), &c).unwrap();
        let b = rotate_flow(&x, 0.37);
        assert!(max_diff(&a.q, &b.q) < 1e-15 && max_diff(&a.v, &b.v) < 1e-15);
    }

    #[test]
    fn composition_matches_closed_form() {
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for repr in [Representation::Spectral, Representation::Grid] {
            let c = CovarianceModel::bridge(repr, n).unwrap();
            let pots: Vec<Box<dyn Potential>> = vec![
                Box::new(gaussian_potential((0..n).map(|j| 2.0 + j as f64).collect()).unwrap()),
                Box::new(quartic_norm_potential()),
                Box::new(double_well_potential(20.0).unwrap()),
            ];
            for p in &pots {
                for _ in 0..10 {
                    let x = random_state(&c, &mut rng);
                    let h = 0.05 + 0.3 * rand::Rng::random::<f64>(&mut rng);
                    let a = strang_step(&x, h, p.as_ref(), &c).unwrap();
                    let b = closed_form_step(&x, h, p.as_ref(), &c);
                    assert!(max_diff(&a.q, &b.q) < 1e-12, "{}", p.name());
                    assert!(max_diff(&a.v, &b.v) < 1e-12, "{}", p.name());
                    // integrate() shares forces between steps; must agree too.
                    let t = integrate(&x, &IntegratorParams::new(h, 1).unwrap(), p.as_ref(), &c)
                        .unwrap();
                    assert!(max_diff(&t.last().q, &a.q) < 1e-15);
                    assert!(max_diff(&t.last().v, &a.v) < 1e-15);
                }
            }
        }
    }

    #[test]
    fn step_is_consistent_with_the_vector_field() {
        let c = CovarianceModel::bridge_spectral(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_state(&c, &mut rng);
        let p = quartic_norm_potential();
        let force = preconditioned_gradient(&x.q, &p, &c).unwrap();
        let target_v = x.q.scaled(-1.0).sub(&force).unwrap();
        let mut errs = Vec::new();
        for h in [1e-2, 1e-3, 1e-4] {
            let y = strang_step(&x, h, &p, &c).unwrap();
            let dq = y.q.sub(&x.q).unwrap().scaled(1.0 / h);
            let dv = y.v.sub(&x.v).unwrap().scaled(1.0 / h);
            let e = max_diff(&dq, &x.v).max(max_diff(&dv, &target_v));
            errs.push(e);
        }
        // First-order consistency: error shrinks in proportion to h.
        assert!(errs[1] < 0.2 * errs[0] && errs[2] < 0.2 * errs[1], "{errs:?}");
        assert!(errs[2] < 1e-3);
    }

    #[test]
    fn trajectory_shape_and_full_turn() {
        let c = CovarianceModel::bridge_grid(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_state(&c, &mut rng);
        let one = trajectory(&x, &IntegratorParams::new(0.3, 1).unwrap(), &zero_potential(), &c)
            .unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(one[0], x);

        let p = IntegratorParams::from_length(2.0 * PI, 100).unwrap();
        let full = trajectory(&x, &p, &zero_potential(), &c).unwrap();
        assert_eq!(full.len(), 101);
        assert!(max_diff(&full[100].q, &x.q) < 1e-10);
        assert!(max_diff(&full[100].v, &x.v) < 1e-10);
    }

    #[test]
    fn divergence_reports_step() {
        let c = CovarianceModel::bridge_spectral(4).unwrap();
        let x = PhaseState::new(Field::spectral(vec![5.0; 4]), Field::spectral(vec![0.0; 4]))
            .unwrap();
        // Strongly repulsive quartic blow-up with a huge step.
        let p = gaussian_potential(vec![0.0; 4]).unwrap();
        assert!(integrate(&x, &IntegratorParams::new(0.1, 3).unwrap(), &p, &c).is_ok());
        let steep = double_well_potential(1e12).unwrap();
        let err = integrate(&x, &IntegratorParams::new(1.0, 10).unwrap(), &steep, &c).unwrap_err();
        assert!(matches!(err, PhmcError::Divergence { step } if step >= 1));
    }

    #[test]
    fn affine_flow_special_cases() {
        let c = CovarianceModel::bridge_spectral(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = random_state(&c, &mut rng);
        let zero = Field::zeros(Representation::Spectral, 8);
        let a = exact_flow_affine(&x, 0.9, &zero, &c).unwrap();
        let b = rotate_flow(&x, 0.9);
        assert!(max_diff(&a.q, &b.q) < 1e-15);
        let b1 = linear_potential().gradient(&x.q);
        let full = exact_flow_affine(&x, 2.0 * PI, &b1, &c).unwrap();
        assert!(max_diff(&full.q, &x.q) < 1e-13 && max_diff(&full.v, &x.v) < 1e-13);
    }

    #[test]
    fn strang_converges_to_affine_flow_at_second_order() {
        let c = CovarianceModel::bridge_spectral(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = random_state(&c, &mut rng);
        let lin = linear_potential();
        let b = lin.gradient(&x.q);
        let t = 1.0;
        let exact = exact_flow_affine(&x, t, &b, &c).unwrap();
        let errs: Vec<f64> = (3..=6)
            .map(|k| {
                let p = IntegratorParams::from_length(t, 1 << k).unwrap();
                let y = integrate_endpoint(&x, &p, &lin, &c).unwrap();
                y.q.sub(&exact.q).unwrap().l2_norm() + y.v.sub(&exact.v).unwrap().l2_norm()
            })
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.1, "{errs:?}");
        }
    }

    #[test]
    fn reversible_under_velocity_flip() {
        let n = 32;
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for repr in [Representation::Spectral, Representation::Grid] {
            let c = CovarianceModel::bridge(repr, n).unwrap();
            let pots: Vec<Box<dyn Potential>> = vec![
                Box::new(linear_potential()),
                Box::new(quartic_norm_potential()),
                Box::new(double_well_potential(20.0).unwrap()),
                Box::new(zero_potential()),
                Box::new(gaussian_potential(vec![3.0; n]).unwrap()),
            ];
            for p in &pots {
                let x = random_state(&c, &mut rng);
                let y = strang_step(&x, 0.2, p.as_ref(), &c).unwrap();
                let back = strang_step(&y.flip_velocity(), 0.2, p.as_ref(), &c)
                    .unwrap()
                    .flip_velocity();
                assert!(max_diff(&back.q, &x.q) < 1e-10, "{}", p.name());
                assert!(max_diff(&back.v, &x.v) < 1e-10, "{}", p.name());
            }
        }
    }

    #[test]
    fn inputs_are_not_mutated() {
        let c = CovarianceModel::bridge_spectral(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = random_state(&c, &mut rng);
        let copy = x.clone();
        let _ = trajectory(&x, &IntegratorParams::new(0.2, 4).unwrap(), &quartic_norm_potential(), &c);
        assert_eq!(x, copy);
    }
}
