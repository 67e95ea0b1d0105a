use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use phmc_core::coupling::{
    audit_assumptions, derive_seeds, estimate_contraction_rate, run_coupling, run_coupling_ensemble,
    summarize_ensemble, AuditOptions, CouplingOptions, CouplingTrace,
};
use phmc_core::potentials::{from_spec, PotentialSpec};
use phmc_core::sampler::DEFAULT_EXACT_REFINEMENT;
use phmc_core::{
    CovarianceModel, Field, HmcConfig, IntegratorParams, Mode, Phmc, Potential, Representation,
};

use crate::config::{ExperimentConfig, InitPreset};
use crate::error::CliError;

/// A finished command: the main output plus any side files.
#[derive(Debug, Default)]
pub struct Output {
    pub main: String,
    pub extra: Vec<(PathBuf, String)>,
}

fn potential(c: &ExperimentConfig) -> Result<Box<dyn Potential>, CliError> {
    let spec = PotentialSpec {
        gamma: c.gamma,
        ..PotentialSpec::named(&c.potential)
    };
    Ok(from_spec(&spec)?)
}

fn hmc_config(c: &ExperimentConfig, pot: &dyn Potential, prior: &CovarianceModel) -> Result<HmcConfig, CliError> {
    let p = IntegratorParams::new(c.h, c.steps)?;
    Ok(match c.mode {
        Mode::Adjusted => HmcConfig::adjusted(p),
        Mode::Exact => {
            let base = HmcConfig::exact(p);
            if pot.constant_gradient(prior.representation(), prior.dim()).is_some() {
                base
            } else {
                base.with_exact_surrogate(DEFAULT_EXACT_REFINEMENT)
            }
        }
    })
}

fn initial_pair(
    c: &ExperimentConfig,
    prior: &CovarianceModel,
    rng: &mut ChaCha8Rng,
) -> (Field, Field) {
    match c.init {
        InitPreset::Fig1Pair => (prior.sample_prior(rng), prior.sample_prior(rng)),
        InitPreset::DoubleWellPair => {
            let repr = prior.representation();
            (
                Field::from_fn_on_grid(c.dim, |_| 0.5).to_repr(repr),
                Field::from_fn_on_grid(c.dim, |_| -0.5).to_repr(repr),
            )
        }
    }
}

fn coupling_options(c: &ExperimentConfig) -> CouplingOptions {
    CouplingOptions {
        coalescence_tolerance: c.tolerance,
        ..CouplingOptions::default()
    }
}

fn rate_text(trace: &CouplingTrace) -> String {
    estimate_contraction_rate(trace).map_or_else(|_| "none".to_string(), |r| r.to_string())
}

fn coalescence_text(trace: &CouplingTrace) -> String {
    trace
        .coalesced_at
        .map_or_else(|| "none".to_string(), |k| k.to_string())
}

fn trace_table(c: &ExperimentConfig, trace: &CouplingTrace) -> String {
    let mut s = c.header();
    s.push_str("iter,distance_l2,accepted_x,accepted_y,delta_h_x,delta_h_y\n");
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{:e},{},{},{:e},{:e}",
            r.iter,
            r.distance_l2,
            u8::from(r.accepted_x),
            u8::from(r.accepted_y),
            r.delta_h_x,
            r.delta_h_y
        );
    }
    let _ = writeln!(
        s,
        "# coalescence: {}, rate: {}",
        coalescence_text(trace),
        rate_text(trace)
    );
    s
}

pub fn run_coupling_cmd(c: &ExperimentConfig) -> Result<Output, CliError> {
    let prior = CovarianceModel::bridge(c.repr, c.dim)?;
    let pot = potential(c)?;
    let kernel = Phmc::new(pot.as_ref(), &prior, hmc_config(c, pot.as_ref(), &prior)?)?;
    let traces = run_coupling_ensemble(
        &kernel,
        &[c.seed],
        c.iters,
        |rng| Ok(initial_pair(c, &prior, rng)),
        &coupling_options(c),
    )?;
    Ok(Output {
        main: trace_table(c, &traces[0]),
        extra: Vec::new(),
    })
}

pub fn average_cmd(c: &ExperimentConfig) -> Result<Output, CliError> {
    if c.runs < 2 {
        return Err(CliError::config("runs", format!("averaging needs at least 2 runs, got {}", c.runs)));
    }
    let prior = CovarianceModel::bridge(c.repr, c.dim)?;
    let pot = potential(c)?;
    let kernel = Phmc::new(pot.as_ref(), &prior, hmc_config(c, pot.as_ref(), &prior)?)?;
    let seeds = derive_seeds(c.seed, c.runs);
    let traces = run_coupling_ensemble(
        &kernel,
        &seeds,
        c.iters,
        |rng| Ok(initial_pair(c, &prior, rng)),
        &coupling_options(c),
    )?;
    let mut s = c.header();
    s.push_str("iter,mean_distance,min,max,n_alive\n");
    for row in summarize_ensemble(&traces, c.iters) {
        let _ = writeln!(s, "{},{:e},{:e},{:e},{}", row.iter, row.mean, row.min, row.max, row.alive);
    }
    let coalesced = traces.iter().filter(|t| t.coalesced_at.is_some()).count();
    let _ = writeln!(s, "# coalesced runs: {coalesced}/{}", c.runs);
    Ok(Output {
        main: s,
        extra: Vec::new(),
    })
}

pub fn audit_cmd(c: &ExperimentConfig) -> Result<Output, CliError> {
    let prior = CovarianceModel::bridge(c.repr, c.dim)?;
    let pot = potential(c)?;
    let p = IntegratorParams::new(c.h, c.steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let report = audit_assumptions(pot.as_ref(), &prior, &p, c.pairs, &mut rng, &AuditOptions::default())?;
    let mut s = c.header();
    for (k, v) in report.to_key_values() {
        let _ = writeln!(s, "{k}={v}");
    }
    Ok(Output {
        main: s,
        extra: Vec::new(),
    })
}

/// `dir/name.ext` → `dir/name-{tag}.ext`.
fn tagged_path(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned());
    let name = match out.extension() {
        Some(ext) => format!("{stem}-{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{tag}"),
    };
    out.with_file_name(name)
}

pub fn compare_representations_cmd(c: &ExperimentConfig) -> Result<Output, CliError> {
    let out = c.out.as_deref().ok_or_else(|| {
        CliError::config("out", "compare-representations writes two trace files and needs an output path")
    })?;
    let pot = potential(c)?;
    let spectral_prior = CovarianceModel::bridge(Representation::Spectral, c.dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let (x0, y0) = initial_pair(c, &spectral_prior, &mut rng);

    let mut s = c.header();
    let mut extra = Vec::new();
    let mut rates = Vec::new();
    for repr in [Representation::Spectral, Representation::Grid] {
        let prior = CovarianceModel::bridge(repr, c.dim)?;
        let kernel = Phmc::new(pot.as_ref(), &prior, hmc_config(c, pot.as_ref(), &prior)?)?;
        let run_config = ExperimentConfig {
            repr,
            ..c.clone()
        };
        let trace = run_coupling(
            &kernel,
            &x0.to_repr(repr),
            &y0.to_repr(repr),
            c.iters,
            &mut rng.clone(),
            &coupling_options(c),
        )?;
        let path = tagged_path(out, &repr.to_string());
        let _ = writeln!(s, "{repr}_trace={}", path.display());
        let _ = writeln!(s, "{repr}_coalescence={}", coalescence_text(&trace));
        let _ = writeln!(s, "{repr}_rate={}", rate_text(&trace));
        rates.push(estimate_contraction_rate(&trace).ok());
        extra.push((path, trace_table(&run_config, &trace)));
    }
    let rel = match (rates[0], rates[1]) {
        (Some(a), Some(b)) => ((a - b).abs() / a.abs()).to_string(),
        _ => "none".to_string(),
    };
    let _ = writeln!(s, "relative_difference={rel}");
    Ok(Output { main: s, extra })
}
