//! Synchronous coupling of two pHMC chains.
//!
//! Both chains consume one shared velocity `ṽ ~ N(0, C)` and, in adjusted
//! mode, one shared acceptance uniform per iteration. Under convexity-type
//! conditions the distance between them contracts geometrically until the two
//! states round to the same floating-point numbers (coalescence).

mod audit;
mod decay;

pub use audit::{
    audit_assumptions, audit_trajectory_bounds, AssumptionReport, AuditConstants, AuditOptions,
    BoundAuditOptions, BoundAuditReport, BoundCheck,
};
pub use decay::{wasserstein_decay_experiment, DecayCurve, InitialDistribution};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{PhmcError, Result};
use crate::function_space::{Field, SobolevIndex};
use crate::sampler::Phmc;

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub x: Field,
    pub y: Field,
}

impl CoupledState {
    pub fn new(x: Field, y: Field) -> Result<Self> {
        x.check_compatible(&y)?;
        Ok(CoupledState { x, y })
    }

    pub fn swapped(&self) -> CoupledState {
        CoupledState {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingRecord {
    pub iter: usize,
    pub distance_l2: f64,
    /// Distance in the optional extra Sobolev norm.
    pub distance_s: Option<f64>,
    pub accepted_x: bool,
    pub accepted_y: bool,
    pub delta_h_x: f64,
    pub delta_h_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingOptions {
    /// Extra Sobolev index to record alongside the `L²` distance.
    pub sobolev: Option<SobolevIndex>,
    /// `0` declares coalescence on identical numbers; a positive value on
    /// `L²` distance at or below it.
    pub coalescence_tolerance: f64,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        CouplingOptions {
            sobolev: None,
            coalescence_tolerance: 0.0,
        }
    }
}

impl CouplingOptions {
    fn coalesced(&self, s: &CoupledState, distance: f64) -> bool {
        if self.coalescence_tolerance > 0.0 {
            distance <= self.coalescence_tolerance
        } else {
            s.x.same_numbers(&s.y)
        }
    }

    fn record(&self, s: &CoupledState, iter: usize) -> Result<CouplingRecord> {
        Ok(CouplingRecord {
            iter,
            distance_l2: s.x.l2_distance(&s.y)?,
            distance_s: match self.sobolev {
                Some(idx) => Some(s.x.sobolev_distance(&s.y, idx)?),
                None => None,
            },
            accepted_x: true,
            accepted_y: true,
            delta_h_x: 0.0,
            delta_h_y: 0.0,
        })
    }
}

/// Record 0 holds the initial pair; record `k` the pair after `k` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTrace {
    pub records: Vec<CouplingRecord>,
    pub coalesced_at: Option<usize>,
    pub sobolev: Option<SobolevIndex>,
}

impl CouplingTrace {
    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.distance_l2).collect()
    }

    /// Distance after `iter` iterations; zero after coalescence.
    pub fn distance_at(&self, iter: usize) -> Option<f64> {
        match self.records.get(iter) {
            Some(r) => Some(r.distance_l2),
            None if self.coalesced_at.is_some() => Some(0.0),
            None => None,
        }
    }

    /// Synthetic trace from a distance sequence (all moves accepted).
    pub fn from_distances(distances: &[f64]) -> Self {
        CouplingTrace {
            records: distances
                .iter()
                .enumerate()
                .map(|(iter, &d)| CouplingRecord {
                    iter,
                    distance_l2: d,
                    distance_s: None,
                    accepted_x: true,
                    accepted_y: true,
                    delta_h_x: 0.0,
                    delta_h_y: 0.0,
                })
                .collect(),
            coalesced_at: None,
            sobolev: None,
        }
    }
}

/// One coupled iteration with a single shared refresh.
pub fn coupled_step<R: Rng + ?Sized>(
    kernel: &Phmc<'_>,
    state: &CoupledState,
    iter: usize,
    rng: &mut R,
    opts: &CouplingOptions,
) -> Result<(CoupledState, CouplingRecord)> {
    let refresh = kernel.draw_refresh(rng);
    let ox = kernel.transition(&state.x, &refresh)?;
    let oy = kernel.transition(&state.y, &refresh)?;
    let next = CoupledState {
        x: ox.next,
        y: oy.next,
    };
    let mut record = opts.record(&next, iter)?;
    record.accepted_x = ox.accepted;
    record.accepted_y = oy.accepted;
    record.delta_h_x = ox.delta_h;
    record.delta_h_y = oy.delta_h;
    Ok((next, record))
}

/// Iterates [`coupled_step`] up to `n_iters` times, stopping at coalescence.
pub fn run_coupling<R: Rng + ?Sized>(
    kernel: &Phmc<'_>,
    x0: &Field,
    y0: &Field,
    n_iters: usize,
    rng: &mut R,
    opts: &CouplingOptions,
) -> Result<CouplingTrace> {
    if n_iters == 0 {
        return Err(PhmcError::invalid("n_iters", "need at least one iteration"));
    }
    let mut state = CoupledState::new(x0.clone(), y0.clone())?;
    let first = opts.record(&state, 0)?;
    let mut trace = CouplingTrace {
        coalesced_at: opts.coalesced(&state, first.distance_l2).then_some(0),
        records: vec![first],
        sobolev: opts.sobolev,
    };
    if trace.coalesced_at.is_some() {
        return Ok(trace);
    }
    for iter in 1..=n_iters {
        let (next, record) =
            coupled_step(kernel, &state, iter, rng, opts).map_err(|e| e.at_iteration(iter))?;
        let done = opts.coalesced(&next, record.distance_l2);
        trace.records.push(record);
        state = next;
        if done {
            trace.coalesced_at = Some(iter);
            break;
        }
    }
    Ok(trace)
}

/// Least-squares line through `(x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn log_linear_fit(points: &[(f64, f64)]) -> Result<LogLinearFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > 0.0 && y.is_finite())
        .map(|&(x, y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(PhmcError::InsufficientData {
            needed: 2,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: pts.len(),
    })
}

/// Minimum number of positive pre-coalescence distances for a rate estimate.
pub const MIN_RATE_POINTS: usize = 10;

/// Per-iteration contraction factor `exp(slope)` of the log-distance fit over
/// every positive pre-coalescence record.
pub fn estimate_contraction_rate(trace: &CouplingTrace) -> Result<f64> {
    estimate_contraction_rate_in(trace, 0, usize::MAX)
}

/// As [`estimate_contraction_rate`], restricted to iterations `first..=last`.
pub fn estimate_contraction_rate_in(
    trace: &CouplingTrace,
    first: usize,
    last: usize,
) -> Result<f64> {
    let pts = window_points(trace, first, last);
    if pts.len() < MIN_RATE_POINTS {
        return Err(PhmcError::InsufficientData {
            needed: MIN_RATE_POINTS,
            found: pts.len(),
        });
    }
    Ok(log_linear_fit(&pts)?.slope.exp())
}

/// Log-linear fit over iterations `first..=last`.
pub fn fit_log_distance(trace: &CouplingTrace, first: usize, last: usize) -> Result<LogLinearFit> {
    log_linear_fit(&window_points(trace, first, last))
}

fn window_points(trace: &CouplingTrace, first: usize, last: usize) -> Vec<(f64, f64)> {
    trace
        .records
        .iter()
        .filter(|r| r.iter >= first && r.iter <= last && r.distance_l2 > 0.0)
        .map(|r| (r.iter as f64, r.distance_l2))
        .collect()
}

/// Independent per-run seeds derived from a master seed.
pub fn derive_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Runs one coupling per seed in parallel. `init` draws the starting pair
/// from the run's generator before the chains start.
pub fn run_coupling_ensemble<F>(
    kernel: &Phmc<'_>,
    seeds: &[u64],
    n_iters: usize,
    init: F,
    opts: &CouplingOptions,
) -> Result<Vec<CouplingTrace>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(Field, Field)> + Sync,
{
    seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x0, y0) = init(&mut rng)?;
            run_coupling(kernel, &x0, &y0, n_iters, &mut rng, opts)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleRow {
    pub iter: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Runs that have not coalesced by this iteration.
    pub alive: usize,
}

/// Per-iteration mean/min/max distance over runs; coalesced runs contribute 0.
pub fn summarize_ensemble(traces: &[CouplingTrace], n_iters: usize) -> Vec<EnsembleRow> {
    (0..=n_iters)
        .map(|iter| {
            let ds: Vec<f64> = traces
                .iter()
                .map(|t| t.distance_at(iter).unwrap_or(f64::NAN))
                .collect();
            let alive = traces
                .iter()
                .filter(|t| t.coalesced_at.map_or(true, |c| c > iter))
                .count();
            EnsembleRow {
                iter,
                mean: ds.iter().sum::<f64>() / ds.len().max(1) as f64,
                min: ds.iter().cloned().fold(f64::INFINITY, f64::min),
                max: ds.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                alive,
            }
        })
        .collect()
}
