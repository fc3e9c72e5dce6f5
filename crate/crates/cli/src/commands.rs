use std::fs;
use std::path::{Path, PathBuf};

use ne_lab::analysis::{estimate_linear_rate, lyapunov_audit, safe_step_size, AnalysisError, AuditViolation, CertificateSet, RateFit, ViolationCounts};
use ne_lab::exec::Execution;
use ne_lab::oracle::{solve_ne, verify_ne, EquilibriumResult, NeReport};
use ne_lab::seeker::{run, Reference, SeekerError, StepSize};
use ne_lab::trajectory::{Divergence, ErrorNorms, TrajectoryLog, Verdict};
use serde::Serialize;

use crate::config::Scenario;
use crate::error::{CliError, ErrorKind};
use crate::output::{self, RunMetadata};

/// Rows kept in a trajectory file before decimation kicks in.
pub const MAX_ROWS: usize = 100_000;
/// Consensus tolerance of the steady-state check.
pub const KKT_SPREAD_TOL: f64 = 1e-6;
/// Aggregated first-order residual tolerance of the steady-state check.
pub const KKT_RESIDUAL_TOL: f64 = 1e-4;
/// Distances below `RATE_FLOOR_REL · max(1, ‖x*‖∞)` are treated as converged.
pub const RATE_FLOOR_REL: f64 = 1e-12;

/// Reads and validates a scenario; returns the printable report.
pub fn validate(spec: &str) -> Result<String, CliError> {
    let s = Scenario::load(spec)?;
    let layout = s.instance.layout();
    let certified = s.instance.game().estimate_monotonicity(&Default::default()).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(format!(
        "ok: {} ({} coalitions, {} agents, {} edges; graph and every coalition subgraph strongly connected; \
         weights stochastic; monotonicity constant {:.6})",
        s.name,
        layout.num_coalitions(),
        layout.total(),
        s.instance.graph().edges().len(),
        certified.value
    ))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub alpha: Option<StepSize>,
    pub iterations: Option<usize>,
    pub oracle: Option<bool>,
    pub audit: bool,
    pub out_dir: Option<PathBuf>,
    pub record_every: Option<usize>,
    pub execution: Option<Execution>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditSummary {
    pub passes: bool,
    pub epsilon: f64,
    pub steps_checked: usize,
    pub floor_reached_at: Option<usize>,
    pub violations: ViolationCounts,
    pub first_violation: Option<AuditViolation>,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadyStateCheck {
    pub spread_tol: f64,
    pub residual_tol: f64,
    pub max_spread: f64,
    pub max_residual: f64,
    pub passes: bool,
    pub report: NeReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    #[serde(flatten)]
    pub metadata: RunMetadata,
    pub certified_alpha: Option<f64>,
    pub exit_code: i32,
    pub divergence: Option<Divergence>,
    pub rows: usize,
    pub final_x: Vec<f64>,
    pub oracle: Option<EquilibriumResult>,
    /// `‖x(final) − x*‖∞`.
    pub final_distance: Option<f64>,
    pub final_errors: Option<ErrorNorms>,
    pub steady_state: SteadyStateCheck,
    pub rate: Option<RateFit>,
    pub rate_note: Option<String>,
    pub audit: Option<AuditSummary>,
    pub outputs: OutputPaths,
}

fn certificate_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::NotSchur { .. } | AnalysisError::LyapunovResidual { .. } | AnalysisError::NotPositiveDefinite { .. } => {
            CliError::Certificate(e.to_string())
        }
        other => CliError::Invalid { kind: ErrorKind::Game, field: "certificates".into(), message: other.to_string() },
    }
}

fn seeker_error(e: SeekerError) -> CliError {
    match e {
        SeekerError::Analysis(a) => certificate_error(a),
        SeekerError::InvalidAlpha(_) | SeekerError::InvalidConfig(_) | SeekerError::Mode { .. } | SeekerError::Dimension { .. } => {
            CliError::Invalid { kind: ErrorKind::Config, field: "run".into(), message: e.to_string() }
        }
        other => CliError::Runtime(other.to_string()),
    }
}

/// Creates the output directory and the three files up front so an
/// unwritable destination fails before any work is done.
fn prepare_outputs(dir: &Path, s: &Scenario) -> Result<OutputPaths, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let outputs = &s.config.outputs;
    let paths = OutputPaths { csv: dir.join(&outputs.csv), json: dir.join(&outputs.json), svg: dir.join(&outputs.svg) };
    for p in [&paths.csv, &paths.json, &paths.svg] {
        fs::File::create(p).map_err(|e| CliError::io(p, e))?;
    }
    Ok(paths)
}

pub fn default_out_dir(name: &str) -> PathBuf {
    Path::new("ne-lab-out").join(name)
}

/// Keeps every `stride`-th row plus the last so at most `max_rows` remain.
pub fn thin_rows(log: &mut TrajectoryLog, max_rows: usize) {
    let len = log.rows.len();
    if len <= max_rows || max_rows < 2 {
        return;
    }
    let stride = (len - 1).div_ceil(max_rows - 1);
    let last = log.rows.pop().expect("non-empty");
    log.rows = log.rows.drain(..).step_by(stride).collect();
    log.rows.push(last);
    log.record_every *= stride;
}

/// Runs one scenario end to end and writes its artifacts.
pub fn run_scenario(spec: &str, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let mut s = Scenario::load(spec)?;
    if let Some(alpha) = opts.alpha {
        s.seeker.alpha = alpha;
    }
    if let Some(iters) = opts.iterations {
        s.seeker.max_iterations = iters;
    }
    if let Some(every) = opts.record_every {
        s.seeker.record_every = every;
    }
    if let Some(exec) = opts.execution {
        s.seeker.execution = exec;
    }
    s.seeker.validate().map_err(seeker_error)?;
    let use_oracle = opts.oracle.unwrap_or(s.config.run.oracle);
    if opts.audit && !use_oracle {
        return Err(CliError::Invalid { kind: ErrorKind::Config, field: "--audit".into(), message: "the audit needs the oracle".into() });
    }
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| default_out_dir(&s.name));
    let paths = prepare_outputs(&out_dir, &s)?;

    // bound memory up front; thin_rows enforces the exact cap afterwards
    s.seeker.record_every = s.seeker.record_every.max(s.seeker.max_iterations / MAX_ROWS);
    s.seeker.keep_snapshots = opts.audit;

    let inst = &s.instance;
    let oracle = if use_oracle {
        Some(solve_ne(inst.game()).map_err(|e| CliError::Invalid { kind: ErrorKind::Game, field: "costs".into(), message: e.to_string() })?)
    } else {
        None
    };
    let needs_certs = opts.audit || s.config.run.lyapunov || s.seeker.alpha == StepSize::Auto;
    let certs: Option<CertificateSet> = if needs_certs { Some(safe_step_size(inst).map_err(certificate_error)?) } else { None };
    let mut seeker_cfg = s.seeker.clone();
    let alpha_source = match (s.seeker.alpha, &certs) {
        (StepSize::Auto, Some(c)) => {
            seeker_cfg.alpha = StepSize::Fixed(c.alpha);
            "auto"
        }
        _ if opts.alpha.is_some() => "override",
        _ => "config",
    };
    if oracle.is_none() {
        seeker_cfg.oracle_tolerance = None;
    }
    let reference = Reference {
        y_star: oracle.as_ref().map(|o| o.y_star.as_slice()),
        certificates: if s.config.run.lyapunov || opts.audit { certs.as_ref() } else { None },
    };
    let mut log = run(inst, &seeker_cfg, &s.x0, &s.xi0, reference).map_err(seeker_error)?;
    thin_rows(&mut log, MAX_ROWS);

    let audit = match (&certs, &oracle) {
        (Some(c), Some(o)) if opts.audit => {
            let report = lyapunov_audit(inst, c, &o.y_star, &log);
            match report {
                Ok(r) => Some(AuditSummary {
                    passes: r.passes(),
                    epsilon: r.epsilon,
                    steps_checked: r.steps_checked,
                    floor_reached_at: r.floor_reached_at,
                    violations: r.violations,
                    first_violation: r.first_violation,
                    max_ratio: r.max_ratio,
                }),
                Err(AnalysisError::MissingSnapshots) => None,
                Err(e) => return Err(certificate_error(e)),
            }
        }
        _ => None,
    };

    let (rate, rate_note, final_distance) = match &oracle {
        Some(o) => {
            let scale = o.x_star.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let fit = estimate_linear_rate(&log.distances_to(&o.x_star), RATE_FLOOR_REL * scale);
            let dist = log.final_x().iter().zip(&o.x_star).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            match fit {
                Ok(f) => (Some(f), None, Some(dist)),
                Err(e) => (None, Some(e.to_string()), Some(dist)),
            }
        }
        None => (None, Some("oracle disabled".into()), None),
    };

    let report = verify_ne(inst.game(), log.final_x(), KKT_RESIDUAL_TOL).map_err(|e| CliError::Runtime(e.to_string()))?;
    let max_spread = report.spreads.iter().copied().fold(0.0, f64::max);
    let max_residual = report.residuals.iter().copied().fold(0.0, f64::max);
    let steady_state = SteadyStateCheck {
        spread_tol: KKT_SPREAD_TOL,
        residual_tol: KKT_RESIDUAL_TOL,
        max_spread,
        max_residual,
        passes: max_spread <= KKT_SPREAD_TOL && max_residual <= KKT_RESIDUAL_TOL,
        report,
    };

    let verdict_name = match log.verdict {
        Verdict::Converged => "converged",
        Verdict::MaxIterations => "max-iterations",
        Verdict::Diverged => "diverged",
    };
    let metadata = RunMetadata {
        scenario: s.name.clone(),
        config_hash: s.config.hash(),
        alpha: log.alpha,
        alpha_source: alpha_source.into(),
        verdict: verdict_name.into(),
        iterations: log.iterations(),
        record_every: log.record_every,
        y_star: oracle.as_ref().map(|o| o.y_star.clone()),
    };
    let layout = inst.layout();
    output::write_csv(&paths.csv, layout, &log, &metadata)?;
    output::write_svg(&paths.svg, layout, &log, &metadata)?;
    let summary = RunSummary {
        metadata,
        certified_alpha: certs.as_ref().map(|c| c.alpha),
        exit_code: log.verdict.exit_code(),
        divergence: log.divergence.clone(),
        rows: log.rows.len(),
        final_x: log.final_x().to_vec(),
        oracle,
        final_distance,
        final_errors: log.rows.last().and_then(|r| r.errors),
        steady_state,
        rate,
        rate_note,
        audit,
        outputs: paths.clone(),
    };
    output::write_json(&paths.json, &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusEntry {
    pub matrix: String,
    pub spectral_radius: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifyReport {
    pub scenario: String,
    pub config_hash: String,
    pub safe_alpha: f64,
    pub epsilon: f64,
    /// The step configured in the scenario, if fixed, and whether it is covered.
    pub configured_alpha: Option<f64>,
    pub configured_alpha_certified: Option<bool>,
    pub spectral_radii: Vec<RadiusEntry>,
    pub max_lyapunov_residual: f64,
    pub certificates: CertificateSet,
}

/// Computes every certificate; weight and Schur failures exit with 5.
pub fn certify(spec: &str) -> Result<CertifyReport, CliError> {
    let s = Scenario::load(spec).map_err(|e| match e {
        CliError::Invalid { kind: ErrorKind::Weights, field, message } => CliError::Certificate(format!("{field}: {message}")),
        other => other,
    })?;
    let certs = safe_step_size(&s.instance).map_err(certificate_error)?;
    let configured = match s.seeker.alpha {
        StepSize::Fixed(a) => Some(a),
        StepSize::Auto => None,
    };
    Ok(CertifyReport {
        scenario: s.name.clone(),
        config_hash: s.config.hash(),
        safe_alpha: certs.alpha,
        epsilon: certs.epsilon,
        configured_alpha: configured,
        configured_alpha_certified: configured.map(|a| a <= certs.alpha),
        spectral_radii: certs.radii().into_iter().map(|(matrix, spectral_radius)| RadiusEntry { matrix, spectral_radius }).collect(),
        max_lyapunov_residual: certs.max_lyapunov_residual(),
        certificates: certs,
    })
}

/// One scenario's result in a batch.
#[derive(Debug)]
pub struct BatchItem {
    pub scenario: PathBuf,
    pub result: Result<RunSummary, CliError>,
}

impl BatchItem {
    pub fn exit_code(&self) -> i32 {
        match &self.result {
            Ok(s) => s.exit_code,
            Err(e) => e.exit_code(),
        }
    }
}

/// Thread cap from `NE_LAB_THREADS`; unset or invalid means no cap.
pub fn batch_threads() -> Option<usize> {
    std::env::var("NE_LAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0)
}

/// Every `*.toml` in `dir`, sorted by name.
pub fn batch_scenarios(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every scenario in `dir` concurrently, each into `out_dir/<file stem>`.
pub fn batch(dir: &Path, out_dir: &Path, opts: &RunOptions) -> Result<Vec<BatchItem>, CliError> {
    let files = batch_scenarios(dir)?;
    let job = |path: &PathBuf| {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        // scenarios run concurrently, so each keeps its round engine sequential
        let opts = RunOptions {
            out_dir: Some(out_dir.join(stem)),
            execution: Some(opts.execution.unwrap_or(Execution::Sequential)),
            ..opts.clone()
        };
        BatchItem { scenario: path.clone(), result: run_scenario(&path.to_string_lossy(), &opts) }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = batch_threads() {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(pool.install(|| files.par_iter().map(job).collect()))
    }
    #[cfg(not(feature = "parallel"))]
    Ok(files.iter().map(job).collect())
}

/// Exit code of a whole batch: the largest per-scenario code.
pub fn batch_exit_code(items: &[BatchItem]) -> i32 {
    items.iter().map(BatchItem::exit_code).max().unwrap_or(0)
}
