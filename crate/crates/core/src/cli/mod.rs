//! Experiment harness behind the `dkg` binary.
//!
//! Every experiment writes `summary.json` (with `"schema_version": 1`) and one
//! or more CSV files into the output directory. Exit status: 0 on pass, 1 on a
//! failed check or numerical blow-up, 2 on a configuration error.

pub mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{generate_data, random_field};
use crate::error::{Error, Result};
use crate::fourier::SpectralField;
use crate::gn::{adequate_transform, check_gn};
use crate::groups::ModeSet;
use crate::linear::{fmt17, verify_decay, DecayOptions, EvolutionState, NormKind};
use crate::propagator::{damped_multipliers, decay_function, g0, g1, EvolutionParams};
use crate::semilinear::{decay_inheritance, estimate_epsilon0, SemilinearConfig, SemilinearProblem};

pub use config::{ConfigError, Experiment, ExperimentConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    Fail = 1,
    ConfigError = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Result of a completed experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub summary_path: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Everything `run` needs beyond the parsed file.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub experiment: Experiment,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Parses `path`, applies overrides and runs the experiment.
/// Returns the exit status and a message for stderr or stdout.
pub fn run_from_file(path: &Path, opts: &RunOptions) -> (ExitStatus, String) {
    let (mut cfg, _) = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => return (ExitStatus::ConfigError, format!("{}: {e}", path.display())),
    };
    if let Some(declared) = cfg.experiment {
        if declared != opts.experiment {
            return (
                ExitStatus::ConfigError,
                format!(
                    "{}: config declares experiment `{declared}` but subcommand is `{}`",
                    path.display(),
                    opts.experiment
                ),
            );
        }
    }
    cfg.experiment = Some(opts.experiment);
    if let Some(seed) = opts.seed {
        cfg.data.seed = seed;
    }
    let out = opts
        .output
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("dkg-output"));
    match run(&cfg, &out) {
        Ok(o) => {
            let status = if o.pass { ExitStatus::Pass } else { ExitStatus::Fail };
            let verdict = if o.pass { "pass" } else { "FAIL" };
            (status, format!("{}: {verdict} (summary: {})", opts.experiment, o.summary_path.display()))
        }
        Err(e @ (Error::InvalidParameter { .. } | Error::Config(_))) => {
            (ExitStatus::ConfigError, format!("{}: {e}", path.display()))
        }
        Err(e) => (ExitStatus::Fail, format!("{}: {e}", opts.experiment)),
    }
}

/// Runs the experiment named in `cfg.experiment`, writing into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let experiment = cfg
        .experiment
        .ok_or_else(|| Error::Config("no experiment selected".into()))?;
    fs::create_dir_all(out)?;
    let mut writer = Writer {
        dir: out.to_path_buf(),
        files: Vec::new(),
    };
    let (pass, body) = match experiment {
        Experiment::LinearDecay => linear_decay(cfg, &mut writer)?,
        Experiment::RegimeSweep => regime_sweep(cfg, &mut writer)?,
        Experiment::SemilinearExistence => semilinear_existence(cfg, &mut writer)?,
        Experiment::EpsilonThreshold => epsilon_threshold(cfg, &mut writer)?,
        Experiment::GNProbe => gn_probe(cfg, &mut writer)?,
        Experiment::PropagatorTable => propagator_table(cfg, &mut writer)?,
    };
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment.name(),
        "pass": pass,
        "config": cfg,
        "result": body,
    });
    let summary_path = out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(Outcome {
        pass,
        summary_path,
        files: writer.files,
    })
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(f))
    }
}

fn to_value<S: Serialize>(s: &S) -> Result<Value> {
    Ok(serde_json::to_value(s)?)
}

fn mode_set(cfg: &ExperimentConfig) -> Arc<ModeSet<f64>> {
    Arc::new(ModeSet::new(cfg.group_spec(), cfg.truncation))
}

fn data(cfg: &ExperimentConfig, modes: &Arc<ModeSet<f64>>) -> Result<(SpectralField<f64>, SpectralField<f64>)> {
    let spec = cfg.data_spec().map_err(|(key, reason)| Error::Config(format!("[data] {key}: {reason}")))?;
    generate_data(&spec, modes)
}

fn decay_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let n = cfg.decay.samples;
    (1..=n).map(|j| cfg.horizon * j as f64 / n as f64).collect()
}

fn decay_options(cfg: &ExperimentConfig) -> DecayOptions {
    DecayOptions {
        window: (cfg.decay.window[0], cfg.decay.window[1]),
        rate_tol: cfg.tolerances.rate,
        ratio_factor: cfg.tolerances.ratio_factor,
    }
}

fn linear_decay(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Value)> {
    let modes = mode_set(cfg);
    let (u0, u1) = data(cfg, &modes)?;
    let params = EvolutionParams::new(cfg.b, cfg.m_sq)?;
    let initial = EvolutionState::initial(u0, u1, params)?;
    let report = verify_decay(&initial, &decay_times(cfg), decay_options(cfg))?;
    report.write_csv(w.create("norms.csv")?)?;
    let body = json!({
        "regime": report.regime,
        "regime_rate": report.regime_rate,
        "fitted_rate": report.fit(NormKind::L2U).fitted_rate,
        "constant_c": report.constant_c,
        "fits": to_value(&report.fits)?,
    });
    Ok((report.pass, body))
}

fn regime_sweep(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Value)> {
    let modes = mode_set(cfg);
    let (u0, u1) = data(cfg, &modes)?;
    let times = decay_times(cfg);
    let mut csv = csv::Writer::from_writer(w.create("sweep.csv")?);
    csv.write_record([
        "b",
        "m_sq",
        "regime",
        "regime_rate",
        "l2_u_rate",
        "h1dot_u_rate",
        "l2_ut_rate",
        "constant_c",
        "pass",
    ])?;
    let mut runs = Vec::new();
    let mut all = true;
    for (&b, &m_sq) in cfg.sweep.b.iter().zip(&cfg.sweep.m_sq) {
        let params = EvolutionParams::new(b, m_sq)?;
        let initial = EvolutionState::initial(u0.clone(), u1.clone(), params)?;
        let r = verify_decay(&initial, &times, decay_options(cfg))?;
        all &= r.pass;
        let regime = serde_json::to_value(r.regime)?.as_str().unwrap_or_default().to_string();
        csv.write_record([
            fmt17(b),
            fmt17(m_sq),
            regime,
            fmt17(r.regime_rate),
            fmt17(r.fit(NormKind::L2U).fitted_rate),
            fmt17(r.fit(NormKind::H1dotU).fitted_rate),
            fmt17(r.fit(NormKind::L2Ut).fitted_rate),
            fmt17(r.constant_c),
            r.pass.to_string(),
        ])?;
        runs.push(json!({
            "b": b,
            "m_sq": m_sq,
            "regime": r.regime,
            "regime_rate": r.regime_rate,
            "constant_c": r.constant_c,
            "fits": to_value(&r.fits)?,
            "pass": r.pass,
        }));
    }
    csv.flush()?;
    Ok((all, json!({ "runs": runs })))
}

fn semilinear_problem(cfg: &ExperimentConfig) -> Result<SemilinearProblem<f64>> {
    let modes = mode_set(cfg);
    let (u0, u1) = data(cfg, &modes)?;
    let params = EvolutionParams::new(cfg.b, cfg.m_sq)?;
    let mut sc = SemilinearConfig::new(cfg.p, cfg.horizon);
    sc.steps = cfg.steps();
    sc.picard_tol = cfg.tolerances.picard;
    sc.picard_max_iter = cfg.tolerances.picard_max_iter;
    SemilinearProblem::new(u0, u1, params, sc)
}

fn semilinear_existence(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Value)> {
    let problem = semilinear_problem(cfg)?;
    let report = problem.picard_iterate()?;
    report.write_iterations_csv(w.create("iterations.csv")?)?;
    report.trajectory.write_norms_csv(w.create("norms.csv")?)?;
    let window = (cfg.decay.window[0], cfg.decay.window[1]);
    let inheritance = decay_inheritance(&report.trajectory, problem.data_norm(), window);
    let body = json!({
        "warnings": problem.warnings(),
        "data_norm": problem.data_norm(),
        "dt": problem.config().dt(),
        "dealias_oversample": problem.config().dealias_oversample,
        "picard": to_value(&report.summary())?,
        "decay": to_value(&inheritance)?,
    });
    Ok((report.converged, body))
}

fn epsilon_threshold(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Value)> {
    let problem = semilinear_problem(cfg)?;
    let report = match estimate_epsilon0(&problem, cfg.epsilon.into()) {
        Ok(r) => r,
        Err(e @ (Error::ZeroData | Error::Config(_))) => {
            return Ok((false, json!({ "error": e.to_string() })));
        }
        Err(e) => return Err(e),
    };
    let mut csv = csv::Writer::from_writer(w.create("probes.csv")?);
    csv.write_record(["amplitude", "converged", "iterations", "max_contraction"])?;
    for p in &report.probes {
        csv.write_record([
            fmt17(p.amplitude),
            p.converged.to_string(),
            p.iterations.to_string(),
            fmt17(p.max_contraction),
        ])?;
    }
    csv.flush()?;
    Ok((true, json!({ "warnings": problem.warnings(), "search": to_value(&report)? })))
}

fn gn_probe(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Value)> {
    let modes = mode_set(cfg);
    let n = cfg.group_spec().topological_dimension();
    let q = cfg.gn.q;
    crate::gn::theta(n, q)?;
    let total = 2 * cfg.gn.fields;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data.seed);
    let fields: Vec<_> = (0..total)
        .map(|i| {
            let r = cfg.gn.decay_exponents[i % cfg.gn.decay_exponents.len()];
            random_field(&modes, r, &mut rng)
        })
        .collect();
    let probe_count = fields.len().min(8);
    let start = (q / 2.0).ceil().max(1.0) as u32;
    let (transform, refinement_change) =
        adequate_transform(&modes, &fields[..probe_count], q, start, cfg.tolerances.gn_refinement, 32)?;
    let half = check_gn(&fields[..cfg.gn.fields], n, q, &transform)?;
    let full = check_gn(&fields, n, q, &transform)?;
    full.write_csv(w.create("gn_samples.csv")?)?;
    let stability = (full.max_ratio - half.max_ratio).abs() / half.max_ratio;
    let pass = full.max_ratio.is_finite()
        && refinement_change < cfg.tolerances.gn_refinement
        && stability <= cfg.tolerances.gn_stability;
    let body = json!({
        "n": n,
        "q": q,
        "theta": full.theta,
        "oversample": transform.grid().oversample(),
        "refinement_change": refinement_change,
        "max_ratio": half.max_ratio,
        "max_ratio_doubled": full.max_ratio,
        "relative_change": stability,
        "skipped": full.skipped,
    });
    Ok((pass, body))
}

fn propagator_table(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, Value)> {
    let params = EvolutionParams::new(cfg.b, cfg.m_sq)?;
    let lambdas: Vec<f64> = if cfg.propagator.lambda_sq.is_empty() {
        let mut v: Vec<f64> = mode_set(cfg).modes().iter().map(|m| m.eigenvalue_sq).collect();
        v.dedup();
        v
    } else {
        cfg.propagator.lambda_sq.clone()
    };
    let times: Vec<f64> = if cfg.propagator.times.is_empty() {
        (0..=10).map(|j| cfg.horizon * j as f64 / 10.0).collect()
    } else {
        cfg.propagator.times.clone()
    };
    let mut csv = csv::Writer::from_writer(w.create("propagator.csv")?);
    csv.write_record(["lambda_sq", "t", "mode_regime", "g0", "g1", "damped_g0", "damped_g1", "decay_function"])?;
    let mut finite = true;
    for &l in &lambdas {
        let regime = serde_json::to_value(params.mode_regime(l))?.as_str().unwrap_or_default().to_string();
        for &t in &times {
            let dm = damped_multipliers(t, &params, l);
            finite &= dm.g0.is_finite() && dm.g1.is_finite();
            csv.write_record([
                fmt17(l),
                fmt17(t),
                regime.clone(),
                fmt17(g0(t, &params, l)),
                fmt17(g1(t, &params, l)),
                fmt17(dm.g0),
                fmt17(dm.g1),
                fmt17(decay_function(t, &params)),
            ])?;
        }
    }
    csv.flush()?;
    let body = json!({
        "regime": params.regime(),
        "regime_rate": params.decay_rate(),
        "rows": lambdas.len() * times.len(),
    });
    Ok((finite, body))
}
