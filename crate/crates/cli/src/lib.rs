//! File formats and command implementations behind the `seqsign` binary.
//!
//! A single JSON run config drives all three subcommands. `solve` writes
//! the boundary curve as CSV next to a JSON summary; `evaluate` replays a
//! curve under simulation and writes a risk report, comparing against an
//! adjacent summary when one exists; `probe` reports the long-horizon
//! band limits and, optionally, a simulated look at how concentrated the
//! posterior gets. All outputs are deterministic for a fixed config, byte
//! for byte, so runs can be diffed.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use seqsign_core::filter::pi_posterior;
use seqsign_core::mc::{
    evaluate_policy, terminal_distribution_probe, RiskEstimate, SimConfig, TerminalProbe,
};
use seqsign_core::prior::Prior;
use seqsign_core::solver::{
    asymptote, solve_finite, solve_perpetual, value_at, BoundaryCurve, HorizonKind, SolverConfig,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Terminal closeness to 1/2 below which a CSV curve counts as finite.
const FINITE_TERMINAL_TOL: f64 = 1e-9;
/// Evaluation horizon for perpetual curves without an explicit one, as a
/// multiple of the trusted window.
const PERPETUAL_EVAL_FACTOR: f64 = 8.0;

#[derive(Debug)]
pub enum CliError {
    Io { path: String, err: std::io::Error },
    Json { path: String, err: serde_json::Error },
    Config(String),
    Curve(String),
    Compute(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, err } => write!(f, "{path}: {err}"),
            CliError::Json { path, err } => write!(f, "{path}: {err}"),
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Curve(msg) => write!(f, "curve: {msg}"),
            CliError::Compute(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Top-level run configuration shared by every subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub prior: PriorSpec,
    /// Sampling cost per unit time.
    pub cost: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSection>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Finite,
    Perpetual,
}

/// Drift prior on the wire.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriorSpec {
    /// `atoms`: `[location, weight]` pairs.
    Discrete { atoms: Vec<(f64, f64)> },
    Gaussian { m: f64, gamma: f64 },
    /// `components`: `[weight, m, gamma]` triples.
    Mixture { components: Vec<(f64, f64, f64)> },
}

impl PriorSpec {
    pub fn build(&self) -> Result<Prior, CliError> {
        let r = match self {
            PriorSpec::Discrete { atoms } => Prior::discrete(atoms.clone()),
            PriorSpec::Gaussian { m, gamma } => Prior::gaussian(*m, *gamma),
            PriorSpec::Mixture { components } => Prior::mixture(components.clone()),
        };
        r.map_err(|e| CliError::Config(format!("prior rejected: {e}")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub horizon: f64,
    pub n_time: usize,
    pub quad_order: usize,
    pub root_tol: f64,
    pub fixed_point_tol: f64,
    pub max_sweeps: usize,
    pub perpetual_tol: f64,
    pub perpetual_t_cap: f64,
    pub tail_cluster: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            horizon: d.horizon,
            n_time: d.n_time,
            quad_order: d.quad_order,
            root_tol: d.root_tol,
            fixed_point_tol: d.fixed_point_tol,
            max_sweeps: d.max_sweeps,
            perpetual_tol: d.perpetual_tol,
            perpetual_t_cap: d.perpetual_t_cap,
            tail_cluster: d.tail_cluster,
        }
    }
}

impl SolverSection {
    fn to_config(&self) -> SolverConfig {
        SolverConfig {
            horizon: self.horizon,
            n_time: self.n_time,
            quad_order: self.quad_order,
            root_tol: self.root_tol,
            fixed_point_tol: self.fixed_point_tol,
            max_sweeps: self.max_sweeps,
            perpetual_tol: self.perpetual_tol,
            perpetual_t_cap: self.perpetual_t_cap,
            tail_cluster: self.tail_cluster,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_paths: usize,
    pub dt: f64,
    /// Censoring horizon; when absent it is taken from the curve (its end
    /// time for finite curves, eight trusted windows for perpetual ones).
    pub horizon: Option<f64>,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            n_paths: 100_000,
            dt: 1e-3,
            horizon: None,
            seed: 0,
            antithetic: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Time at which the terminal distribution is sampled.
    pub t: f64,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|err| CliError::Io {
        path: path.display().to_string(),
        err,
    })?;
    let cfg: RunConfig = serde_json::from_str(&text).map_err(|err| CliError::Json {
        path: path.display().to_string(),
        err,
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|err| CliError::Io {
        path: path.display().to_string(),
        err,
    })?;
    f.write_all(bytes).map_err(|err| CliError::Io {
        path: path.display().to_string(),
        err,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|err| CliError::Json {
        path: path.display().to_string(),
        err,
    })?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn curve_to_csv(curve: &BoundaryCurve) -> String {
    let mut out = String::from("t,b1,b2\n");
    for i in 0..curve.times.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            curve.times[i], curve.b1[i], curve.b2[i]
        ));
    }
    out
}

/// Parse a `t,b1,b2` CSV into a validated curve. The horizon kind is
/// inferred: a curve ending at 1/2 on both sides is finite, anything else
/// is treated as a stationary (perpetual) band.
pub fn curve_from_csv(text: &str) -> Result<BoundaryCurve, CliError> {
    let mut times = Vec::new();
    let mut b1 = Vec::new();
    let mut b2 = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.starts_with(|ch: char| ch.is_alphabetic()) {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CliError::Curve(format!(
                "row {row}: expected 3 comma-separated values, found {}",
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 3];
        for (v, field) in vals.iter_mut().zip(&fields) {
            *v = field.parse().map_err(|_| {
                CliError::Curve(format!("row {row}: cannot parse '{field}' as a number"))
            })?;
        }
        times.push(vals[0]);
        b1.push(vals[1]);
        b2.push(vals[2]);
    }
    if times.is_empty() {
        return Err(CliError::Curve("no data rows".into()));
    }
    let finite = (b1[b1.len() - 1] - 0.5).abs() <= FINITE_TERMINAL_TOL
        && (b2[b2.len() - 1] - 0.5).abs() <= FINITE_TERMINAL_TOL;
    let end = times[times.len() - 1];
    let kind = if finite {
        HorizonKind::Finite { horizon: end }
    } else {
        HorizonKind::PerpetualApprox { t_effective: end }
    };
    let curve = BoundaryCurve {
        times,
        b1,
        b2,
        kind,
    };
    curve.validate().map_err(|e| {
        CliError::Curve(format!(
            "{e} (node indices are zero-based data rows, after any header)"
        ))
    })?;
    Ok(curve)
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    mode: Mode,
    cost: f64,
    prior: &'a PriorSpec,
    solver: &'a SolverSection,
    /// Last time node of the written curve.
    curve_end: f64,
    /// For perpetual runs: the window on which the band is trusted.
    #[serde(skip_serializing_if = "Option::is_none")]
    t_effective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    achieved_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    pi_start: f64,
    b1_start: f64,
    b2_start: f64,
    n_nodes: usize,
    /// Model value `V(0, pi_start)`: the Bayes risk of the solved rule.
    value_at_start: f64,
}

#[derive(Debug)]
pub struct SolveOutputs {
    pub boundaries_path: std::path::PathBuf,
    pub summary_path: std::path::PathBuf,
    pub value_at_start: f64,
    pub b1_start: f64,
    pub b2_start: f64,
}

pub fn cmd_solve(config_path: &Path, out_dir: &Path) -> Result<SolveOutputs, CliError> {
    let cfg = load_config(config_path)?;
    let prior = cfg.prior.build()?;
    let solver_cfg = cfg.solver.to_config();
    let (written_curve, value_curve, t_effective, achieved_tol, converged) = match cfg.mode {
        Mode::Finite => {
            let curve = solve_finite(&prior, cfg.cost, &solver_cfg)
                .map_err(|e| CliError::Compute(format!("solve failed: {e}")))?;
            (curve.clone(), curve, None, None, None)
        }
        Mode::Perpetual => {
            let sol = solve_perpetual(&prior, cfg.cost, &solver_cfg)
                .map_err(|e| CliError::Compute(format!("solve failed: {e}")))?;
            let t_eff = match sol.curve.kind {
                HorizonKind::PerpetualApprox { t_effective } => t_effective,
                HorizonKind::Finite { horizon } => horizon,
            };
            (
                sol.curve,
                sol.full_curve,
                Some(t_eff),
                Some(sol.achieved_tol),
                Some(sol.converged),
            )
        }
    };

    let pi_start = pi_posterior(&prior, 0.0, 0.0);
    let value_at_start = value_at(
        &prior,
        cfg.cost,
        &value_curve,
        0,
        pi_start,
        cfg.solver.quad_order,
    )
    .map_err(|e| CliError::Compute(format!("value query failed: {e}")))?;

    fs::create_dir_all(out_dir).map_err(|err| CliError::Io {
        path: out_dir.display().to_string(),
        err,
    })?;
    let boundaries_path = out_dir.join("boundaries.csv");
    write_file(&boundaries_path, curve_to_csv(&written_curve).as_bytes())?;

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        mode: cfg.mode,
        cost: cfg.cost,
        prior: &cfg.prior,
        solver: &cfg.solver,
        curve_end: *written_curve.times.last().unwrap(),
        t_effective,
        achieved_tol,
        converged,
        pi_start,
        b1_start: written_curve.b1[0],
        b2_start: written_curve.b2[0],
        n_nodes: written_curve.times.len(),
        value_at_start,
    };
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(SolveOutputs {
        boundaries_path,
        summary_path,
        value_at_start,
        b1_start: written_curve.b1[0],
        b2_start: written_curve.b2[0],
    })
}

#[derive(Serialize)]
struct ResolvedSim {
    n_paths: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
    antithetic: bool,
}

#[derive(Serialize)]
struct EstimateReport {
    risk_mean: f64,
    risk_stderr: Option<f64>,
    error_prob: f64,
    expected_tau: f64,
    censored_frac: f64,
    n_paths: usize,
    censoring_warning: bool,
}

impl From<&RiskEstimate> for EstimateReport {
    fn from(e: &RiskEstimate) -> Self {
        EstimateReport {
            risk_mean: e.risk_mean,
            risk_stderr: e.risk_stderr,
            error_prob: e.error_prob,
            expected_tau: e.expected_tau,
            censored_frac: e.censored_frac,
            n_paths: e.n_paths,
            censoring_warning: e.censoring_warning,
        }
    }
}

#[derive(Serialize)]
struct Comparison {
    /// `value_at_start` from the summary next to the curve.
    value_at_start: f64,
    mc_minus_value: f64,
    /// `None` when the run produced no standard error.
    within_three_sigma: Option<bool>,
}

#[derive(Serialize)]
struct RiskReport<'a> {
    schema_version: u32,
    cost: f64,
    prior: &'a PriorSpec,
    curve_kind: &'static str,
    curve_end: f64,
    sim: ResolvedSim,
    estimate: EstimateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

#[derive(Debug)]
pub struct EvaluateOutputs {
    pub risk_path: std::path::PathBuf,
    pub risk_mean: f64,
    pub censoring_warning: bool,
}

pub fn cmd_evaluate(
    config_path: &Path,
    curve_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<EvaluateOutputs, CliError> {
    let cfg = load_config(config_path)?;
    let prior = cfg.prior.build()?;
    let text = fs::read_to_string(curve_path).map_err(|err| CliError::Io {
        path: curve_path.display().to_string(),
        err,
    })?;
    let curve = curve_from_csv(&text)?;
    let (curve_kind, curve_end) = match curve.kind {
        HorizonKind::Finite { horizon } => ("finite", horizon),
        HorizonKind::PerpetualApprox { t_effective } => ("perpetual", t_effective),
    };
    let horizon = cfg.sim.horizon.unwrap_or(match curve.kind {
        HorizonKind::Finite { horizon } => horizon,
        HorizonKind::PerpetualApprox { t_effective } => PERPETUAL_EVAL_FACTOR * t_effective,
    });
    let sim = SimConfig {
        n_paths: cfg.sim.n_paths,
        dt: cfg.sim.dt,
        horizon,
        seed: seed_override.unwrap_or(cfg.sim.seed),
        antithetic: cfg.sim.antithetic,
    };
    let est = evaluate_policy(&prior, cfg.cost, &curve, &sim)
        .map_err(|e| CliError::Compute(format!("evaluation failed: {e}")))?;

    // compare against a solve summary sitting next to the curve, if any
    let comparison = curve_path
        .parent()
        .map(|d| d.join("summary.json"))
        .filter(|p| p.is_file())
        .and_then(|p| fs::read_to_string(p).ok())
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .and_then(|v| v.get("value_at_start").and_then(|x| x.as_f64()))
        .map(|value| {
            let diff = est.risk_mean - value;
            Comparison {
                value_at_start: value,
                mc_minus_value: diff,
                within_three_sigma: est.risk_stderr.map(|se| diff.abs() <= 3.0 * se),
            }
        });

    fs::create_dir_all(out_dir).map_err(|err| CliError::Io {
        path: out_dir.display().to_string(),
        err,
    })?;
    let report = RiskReport {
        schema_version: SCHEMA_VERSION,
        cost: cfg.cost,
        prior: &cfg.prior,
        curve_kind,
        curve_end,
        sim: ResolvedSim {
            n_paths: sim.n_paths,
            dt: sim.dt,
            horizon: sim.horizon,
            seed: sim.seed,
            antithetic: sim.antithetic,
        },
        estimate: EstimateReport::from(&est),
        comparison,
    };
    let risk_path = out_dir.join("risk.json");
    write_json(&risk_path, &report)?;
    Ok(EvaluateOutputs {
        risk_path,
        risk_mean: est.risk_mean,
        censoring_warning: est.censoring_warning,
    })
}

#[derive(Serialize)]
struct ProbeReport<'a> {
    schema_version: u32,
    cost: f64,
    prior: &'a PriorSpec,
    /// Support gap around zero: largest negative and smallest nonnegative
    /// support points (both zero when the support touches zero from both
    /// sides, as for full-support priors).
    support_gap_left: f64,
    support_gap_right: f64,
    /// Long-horizon limits of the band.
    b1_inf: f64,
    b2_inf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    terminal_probe: Option<TerminalProbeReport>,
}

#[derive(Serialize)]
struct TerminalProbeReport {
    t: f64,
    min_mean: f64,
    min_stderr: Option<f64>,
    frac_above_half: f64,
    n_paths: usize,
    seed: u64,
}

impl TerminalProbeReport {
    fn new(t: f64, p: &TerminalProbe, seed: u64) -> Self {
        TerminalProbeReport {
            t,
            min_mean: p.min_mean,
            min_stderr: p.min_stderr,
            frac_above_half: p.frac_above_half,
            n_paths: p.n_paths,
            seed,
        }
    }
}

#[derive(Debug)]
pub struct ProbeOutputs {
    pub asymptote_path: std::path::PathBuf,
    pub b1_inf: f64,
    pub b2_inf: f64,
}

pub fn cmd_probe(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<ProbeOutputs, CliError> {
    let cfg = load_config(config_path)?;
    let prior = cfg.prior.build()?;
    if !(cfg.cost.is_finite() && cfg.cost > 0.0) {
        return Err(CliError::Config(format!(
            "cost must be positive and finite, got {}",
            cfg.cost
        )));
    }
    let (l, r) = prior.support_gap();
    let (b1_inf, b2_inf) = asymptote(&prior, cfg.cost);

    let terminal_probe = match &cfg.probe {
        None => None,
        Some(section) => {
            let seed = seed_override.unwrap_or(cfg.sim.seed);
            let sim = SimConfig {
                n_paths: cfg.sim.n_paths,
                dt: cfg.sim.dt,
                horizon: section.t,
                seed,
                antithetic: false,
            };
            let p = terminal_distribution_probe(&prior, section.t, &sim)
                .map_err(|e| CliError::Compute(format!("probe failed: {e}")))?;
            Some(TerminalProbeReport::new(section.t, &p, seed))
        }
    };

    fs::create_dir_all(out_dir).map_err(|err| CliError::Io {
        path: out_dir.display().to_string(),
        err,
    })?;
    let report = ProbeReport {
        schema_version: SCHEMA_VERSION,
        cost: cfg.cost,
        prior: &cfg.prior,
        support_gap_left: l,
        support_gap_right: r,
        b1_inf,
        b2_inf,
        terminal_probe,
    };
    let asymptote_path = out_dir.join("asymptote.json");
    write_json(&asymptote_path, &report)?;
    Ok(ProbeOutputs {
        asymptote_path,
        b1_inf,
        b2_inf,
    })
}
