//! Exact and adjusted pHMC transition kernels.

use rand::Rng;

use crate::error::{PhmcError, Result};
use crate::function_space::{CovarianceModel, Field};
use crate::integrator::{
    exact_flow_affine, integrate, integrate_endpoint, IntegratorParams, PhaseState, Trajectory,
};
use crate::potentials::Potential;

/// Refinement used by the exact-mode surrogate when the flow has no closed form.
pub const DEFAULT_EXACT_REFINEMENT: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Follow the Hamiltonian flow for time `T`; every move is accepted.
    Exact,
    /// Strang trajectory followed by a Metropolis test on `ΔH`.
    Adjusted,
}

impl std::str::FromStr for Mode {
    type Err = PhmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "adjusted" => Ok(Mode::Adjusted),
            other => Err(PhmcError::invalid(
                "mode",
                format!("unknown mode `{other}` (expected exact|adjusted)"),
            )),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Adjusted => "adjusted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcConfig {
    pub integrator: IntegratorParams,
    pub mode: Mode,
    /// Record `−ṽ` as the chain velocity after a rejection.
    pub flip_on_reject: bool,
    /// Exact mode for non-affine potentials: integrate with `h / factor` and
    /// accept unconditionally.
    pub exact_refinement: Option<u32>,
}

impl HmcConfig {
    pub fn adjusted(integrator: IntegratorParams) -> Self {
        HmcConfig {
            integrator,
            mode: Mode::Adjusted,
            flip_on_reject: false,
            exact_refinement: None,
        }
    }

    /// Exact mode; only affine-gradient potentials until a surrogate is declared.
    pub fn exact(integrator: IntegratorParams) -> Self {
        HmcConfig {
            mode: Mode::Exact,
            ..Self::adjusted(integrator)
        }
    }

    pub fn with_exact_surrogate(mut self, factor: u32) -> Self {
        self.exact_refinement = Some(factor);
        self
    }

    pub fn with_flip_on_reject(mut self, flip: bool) -> Self {
        self.flip_on_reject = flip;
        self
    }
}

/// Randomness consumed by one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Refresh {
    pub velocity: Field,
    /// Acceptance uniform in `(0, 1]`; absent in exact mode.
    pub uniform: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Position after the step.
    pub next: Field,
    pub accepted: bool,
    /// Energy error; `+∞` for a diverged trajectory, `0` in exact mode.
    pub delta_h: f64,
    /// End point of the trajectory, `None` if it diverged.
    pub proposal: Option<PhaseState>,
    /// Velocity carried out of the step.
    pub velocity: Field,
}

/// Energy error of a Strang trajectory:
///
/// `ΔH = Φ(q_I) − Φ(q₀) + (h²/8)(‖C^{1/2}DΦ(q₀)‖² − ‖C^{1/2}DΦ(q_I)‖²)
///       − h Σ_{i=1}^{I−1} ⟨DΦ(q_i), v_i⟩ − (h/2)(⟨DΦ(q₀), v₀⟩ + ⟨DΦ(q_I), v_I⟩)`.
///
/// Non-finite results are reported as `+∞`.
pub fn delta_h(
    states: &[PhaseState],
    p: &IntegratorParams,
    potential: &dyn Potential,
    prior: &CovarianceModel,
) -> Result<f64> {
    if states.len() != p.steps() + 1 {
        return Err(PhmcError::TrajectoryLength {
            expected: p.steps() + 1,
            found: states.len(),
        });
    }
    let gradients: Vec<Field> = states.iter().map(|s| potential.gradient(&s.q)).collect();
    let forces = gradients
        .iter()
        .map(|g| prior.apply_covariance(g))
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory {
        states: states.to_vec(),
        gradients,
        forces,
    };
    energy_error(&traj, p.step_size(), potential)
}

pub(crate) fn energy_error(traj: &Trajectory, h: f64, potential: &dyn Potential) -> Result<f64> {
    let last = traj.states.len() - 1;
    let (first_state, last_state) = (&traj.states[0], &traj.states[last]);
    let pair = |i: usize| traj.gradients[i].l2_inner(&traj.states[i].v);
    let cm0 = traj.gradients[0].l2_inner(&traj.forces[0])?;
    let cm_last = traj.gradients[last].l2_inner(&traj.forces[last])?;

    let mut interior = 0.0;
    for i in 1..last {
        interior += pair(i)?;
    }
    let dh = potential.evaluate(&last_state.q) - potential.evaluate(&first_state.q)
        + h * h / 8.0 * (cm0 - cm_last)
        - h * interior
        - 0.5 * h * (pair(0)? + pair(last)?);
    Ok(if dh.is_finite() { dh } else { f64::INFINITY })
}

/// A pHMC kernel bound to a potential and a prior.
#[derive(Debug, Clone, Copy)]
pub struct Phmc<'a> {
    potential: &'a dyn Potential,
    prior: &'a CovarianceModel,
    config: HmcConfig,
}

impl<'a> Phmc<'a> {
    pub fn new(
        potential: &'a dyn Potential,
        prior: &'a CovarianceModel,
        config: HmcConfig,
    ) -> Result<Self> {
        if config.mode == Mode::Exact
            && config.exact_refinement.is_none()
            && potential
                .constant_gradient(prior.representation(), prior.dim())
                .is_none()
        {
            return Err(PhmcError::ExactFlowUnavailable {
                potential: potential.name().to_string(),
            });
        }
        if config.exact_refinement == Some(0) {
            return Err(PhmcError::invalid("exact_refinement", "factor must be positive"));
        }
        Ok(Phmc {
            potential,
            prior,
            config,
        })
    }

    pub fn potential(&self) -> &'a dyn Potential {
        self.potential
    }

    pub fn prior(&self) -> &'a CovarianceModel {
        self.prior
    }

    pub fn config(&self) -> &HmcConfig {
        &self.config
    }

    /// Draws `ṽ ~ N(0, C)` and, in adjusted mode, `u ~ U(0, 1]` (in that order).
    pub fn draw_refresh<R: Rng + ?Sized>(&self, rng: &mut R) -> Refresh {
        let velocity = self.prior.sample_prior(rng);
        let uniform = match self.config.mode {
            Mode::Exact => None,
            Mode::Adjusted => Some(1.0 - rng.random::<f64>()),
        };
        Refresh { velocity, uniform }
    }

    /// Deterministic transition from `q` under the given randomness.
    pub fn transition(&self, q: &Field, refresh: &Refresh) -> Result<StepOutcome> {
        self.prior.check_field(q)?;
        let start = PhaseState::new(q.clone(), refresh.velocity.clone())?;
        match self.config.mode {
            Mode::Exact => self.exact_transition(start),
            Mode::Adjusted => {
                let u = refresh.uniform.ok_or_else(|| {
                    PhmcError::invalid("uniform", "adjusted mode needs an acceptance uniform")
                })?;
                self.adjusted_transition(start, u)
            }
        }
    }

    fn exact_transition(&self, start: PhaseState) -> Result<StepOutcome> {
        let p = &self.config.integrator;
        let end = match self
            .potential
            .constant_gradient(self.prior.representation(), self.prior.dim())
        {
            Some(b) => exact_flow_affine(&start, p.trajectory_length(), &b, self.prior)?,
            None => {
                let factor = self.config.exact_refinement.ok_or_else(|| {
                    PhmcError::ExactFlowUnavailable {
                        potential: self.potential.name().to_string(),
                    }
                })?;
                integrate_endpoint(&start, &p.refined(factor)?, self.potential, self.prior)?
            }
        };
        Ok(StepOutcome {
            next: end.q.clone(),
            accepted: true,
            delta_h: 0.0,
            velocity: end.v.clone(),
            proposal: Some(end),
        })
    }

    fn adjusted_transition(&self, start: PhaseState, u: f64) -> Result<StepOutcome> {
        let p = &self.config.integrator;
        let (proposal, dh) = match integrate(&start, p, self.potential, self.prior) {
            Ok(traj) => {
                let dh = energy_error(&traj, p.step_size(), self.potential)?;
                (Some(traj.states.into_iter().last().expect("non-empty")), dh)
            }
            Err(e) if e.is_divergence() => (None, f64::INFINITY),
            Err(e) => return Err(e),
        };
        // NaN compares false, so it rejects.
        let accepted = proposal.is_some() && u <= (-dh).exp();
        match (accepted, proposal) {
            (true, Some(end)) => Ok(StepOutcome {
                next: end.q.clone(),
                accepted: true,
                delta_h: dh,
                velocity: end.v.clone(),
                proposal: Some(end),
            }),
            (_, proposal) => {
                let velocity = if self.config.flip_on_reject {
                    start.v.scaled(-1.0)
                } else {
                    start.v
                };
                Ok(StepOutcome {
                    next: start.q,
                    accepted: false,
                    delta_h: dh,
                    proposal,
                    velocity,
                })
            }
        }
    }

    /// One exact-mode step (velocity refresh + flow).
    pub fn exact_step<R: Rng + ?Sized>(&self, q: &Field, rng: &mut R) -> Result<StepOutcome> {
        if self.config.mode != Mode::Exact {
            return Err(PhmcError::invalid("mode", "exact_step on an adjusted kernel"));
        }
        self.step(q, rng)
    }

    /// One adjusted-mode step (refresh, trajectory, Metropolis test).
    pub fn adjusted_step<R: Rng + ?Sized>(&self, q: &Field, rng: &mut R) -> Result<StepOutcome> {
        if self.config.mode != Mode::Adjusted {
            return Err(PhmcError::invalid("mode", "adjusted_step on an exact kernel"));
        }
        self.step(q, rng)
    }

    /// One step in the configured mode.
    pub fn step<R: Rng + ?Sized>(&self, q: &Field, rng: &mut R) -> Result<StepOutcome> {
        let refresh = self.draw_refresh(rng);
        self.transition(q, &refresh)
    }

    pub fn run_chain<R: Rng + ?Sized>(
        &self,
        q0: &Field,
        n_iters: usize,
        rng: &mut R,
    ) -> Result<Vec<StepOutcome>> {
        if n_iters == 0 {
            return Err(PhmcError::invalid("n_iters", "need at least one iteration"));
        }
        let mut out: Vec<StepOutcome> = Vec::with_capacity(n_iters);
        let mut q = q0.clone();
        for iter in 0..n_iters {
            let outcome = self.step(&q, rng).map_err(|e| e.at_iteration(iter))?;
            q = outcome.next.clone();
            out.push(outcome);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::Representation;
    use crate::potentials::{
        double_well_potential, linear_potential, quartic_norm_potential, zero_potential,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params() -> IntegratorParams {
        IntegratorParams::new(0.2, 12).unwrap()
    }

    #[test]
    fn zero_potential_has_zero_energy_error() {
        let c = CovarianceModel::bridge_spectral(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = PhaseState::new(c.sample_prior(&mut rng), c.sample_prior(&mut rng)).unwrap();
        let states = crate::integrator::trajectory(&x, &params(), &zero_potential(), &c).unwrap();
        assert_eq!(delta_h(&states, &params(), &zero_potential(), &c).unwrap(), 0.0);
    }

    #[test]
    fn delta_h_checks_trajectory_length() {
        let c = CovarianceModel::bridge_spectral(4).unwrap();
        let x = PhaseState::new(Field::spectral(vec![0.0; 4]), Field::spectral(vec![0.0; 4]))
            .unwrap();
        let err = delta_h(&[x], &params(), &zero_potential(), &c).unwrap_err();
        assert_eq!(err, PhmcError::TrajectoryLength { expected: 13, found: 1 });
    }

    #[test]
    fn exact_mode_requires_closed_form_or_surrogate() {
        let c = CovarianceModel::bridge_spectral(8).unwrap();
        let quartic = quartic_norm_potential();
        let err = Phmc::new(&quartic, &c, HmcConfig::exact(params())).unwrap_err();
        assert!(matches!(err, PhmcError::ExactFlowUnavailable { .. }));
        assert!(Phmc::new(&quartic, &c, HmcConfig::exact(params()).with_exact_surrogate(64)).is_ok());
        assert!(Phmc::new(&linear_potential(), &c, HmcConfig::exact(params())).is_ok());
    }

    #[test]
    fn exact_step_with_zero_potential_and_full_turn_is_identity() {
        let c = CovarianceModel::bridge_spectral(8).unwrap();
        let zero = zero_potential();
        let cfg = HmcConfig::exact(IntegratorParams::from_length(2.0 * PI, 10).unwrap());
        let k = Phmc::new(&zero, &c, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = c.sample_prior(&mut rng);
        let out = k.exact_step(&q, &mut rng).unwrap();
        assert!(out.accepted && out.delta_h == 0.0);
        assert!(out.next.sub(&q).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn exact_step_preserves_prior_quadratic_form_for_zero_potential() {
        let c = CovarianceModel::bridge_grid(12).unwrap();
        let zero = zero_potential();
        let k = Phmc::new(&zero, &c, HmcConfig::exact(params())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = c.sample_prior(&mut rng);
        let refresh = k.draw_refresh(&mut rng);
        let out = k.transition(&q, &refresh).unwrap();
        let before = q.l2_norm().powi(2) + refresh.velocity.l2_norm().powi(2);
        let after = out.next.l2_norm().powi(2) + out.velocity.l2_norm().powi(2);
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn adjusted_zero_potential_always_accepts() {
        let c = CovarianceModel::bridge_spectral(10).unwrap();
        let zero = zero_potential();
        let k = Phmc::new(&zero, &c, HmcConfig::adjusted(params())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trace = k.run_chain(&c.sample_prior(&mut rng), 50, &mut rng).unwrap();
        assert!(trace.iter().all(|o| o.accepted && o.delta_h == 0.0));
    }

    #[test]
    fn run_chain_is_deterministic_and_matches_single_step() {
        let c = CovarianceModel::bridge_grid(20).unwrap();
        let pot = double_well_potential(20.0).unwrap();
        let k = Phmc::new(&pot, &c, HmcConfig::adjusted(params())).unwrap();
        let q0 = Field::grid(vec![0.5; 20]);
        let a = k.run_chain(&q0, 30, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = k.run_chain(&q0, 30, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        let one = k.run_chain(&q0, 1, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let step = k.adjusted_step(&q0, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(one, vec![step]);
        assert!(k.run_chain(&q0, 0, &mut ChaCha8Rng::seed_from_u64(7)).is_err());
    }

    #[test]
    fn acceptance_is_a_function_of_the_randomness() {
        let c = CovarianceModel::bridge_spectral(32).unwrap();
        let pot = quartic_norm_potential();
        let k = Phmc::new(&pot, &c, HmcConfig::adjusted(IntegratorParams::new(0.8, 4).unwrap()))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut q = c.sample_prior(&mut rng);
        for _ in 0..100 {
            let r = k.draw_refresh(&mut rng);
            let a = k.transition(&q, &r).unwrap();
            let b = k.transition(&q, &r).unwrap();
            assert_eq!(a, b);
            let u = r.uniform.unwrap();
            assert!(u > 0.0 && u <= 1.0);
            assert_eq!(a.accepted, u <= (-a.delta_h).exp());
            q = a.next;
        }
    }

    #[test]
    fn divergence_is_a_rejection() {
        let c = CovarianceModel::bridge_spectral(4).unwrap();
        let pot = double_well_potential(1e12).unwrap();
        let cfg = HmcConfig::adjusted(IntegratorParams::new(1.0, 10).unwrap())
            .with_flip_on_reject(true);
        let k = Phmc::new(&pot, &c, cfg).unwrap();
        let q = Field::spectral(vec![5.0; 4]);
        let refresh = Refresh {
            velocity: Field::spectral(vec![0.1, 0.0, 0.0, 0.0]),
            uniform: Some(1e-300),
        };
        let out = k.transition(&q, &refresh).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.delta_h, f64::INFINITY);
        assert!(out.proposal.is_none());
        assert_eq!(out.next, q);
        assert_eq!(out.velocity, refresh.velocity.scaled(-1.0));
    }

    #[test]
    fn mode_specific_entry_points() {
        let c = CovarianceModel::bridge_spectral(4).unwrap();
        let lin = linear_potential();
        let k = Phmc::new(&lin, &c, HmcConfig::exact(params())).unwrap();
        let q = Field::zeros(Representation::Spectral, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(k.adjusted_step(&q, &mut rng).is_err());
        assert!(k.exact_step(&q, &mut rng).is_ok());
    }
}
