//! Scenario configuration and the command implementations behind the `sirs`
//! binary. Commands return rendered text so they can be tested without a
//! process boundary.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! seed = 7                                 # optional, default 0
//! initial_points = [{ S = 90.0, Ia = 5.0, Is = 5.0 }]   # optional
//!
//! [params]
//! d = 0.02
//! alpha = 0.3
//! sigma = 0.05
//! mu = 0.4
//! r_a = 0.1
//! r_s = 0.2
//! beta1 = 0.004
//! beta2 = 0.004
//! theta = 0.5
//! omega = 1.0
//! N = 100.0
//!
//! [flow_settings]                          # optional
//! abs_tol = 1e-10
//! rel_tol = 1e-10
//! max_step = 0.02                          # optional, default omega / 50
//!
//! [output]                                 # optional
//! format = "text"                          # "csv" or "text"
//! path = "out.csv"                         # optional, default stdout
//! ```
//!
//! Unknown keys anywhere are errors.

use crate::analysis::{
    check_endemic_stability, check_extinction, check_near_equal_rates, check_persistence, long_run_settings,
    threshold_sweep, AnalysisError, InitialPoints, Outcome, SweepAxis, VerdictReport, CHECK_IDS,
};
use crate::equilibria::{find_equilibria, EquilibriumError};
use crate::flow::{solve, solve_with_stride, FlowError, FlowSettings};
use crate::model::{ModelParams, State, Violation};
use crate::reproduction::{monodromy_report, OperatorGrid, ReproductionError, ThresholdVerdict};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(format!("unknown format {other:?}; expected csv or text")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_points: Vec<State>,
    #[serde(default)]
    pub flow_settings: FlowSettings,
    /// Must fit in a TOML integer, i.e. be below `2^63`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ScenarioConfig {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            initial_points: Vec::new(),
            flow_settings: FlowSettings::default(),
            seed: 0,
            output: OutputSpec::default(),
        }
    }

    /// Non-fatal remarks about the parameters.
    pub fn warnings(&self) -> Vec<String> {
        self.params.validate().warnings
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid parameters: {}", list_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid initial point {index}: {message}")]
    InitialPoint { index: usize, message: String },
    #[error("invalid flow settings: {0}")]
    Settings(String),
}

fn list_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("{} ({})", x.field, x.message))
        .collect::<Vec<_>>()
        .join(", ")
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a scenario. Parameter warnings are allowed.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let check = config.params.validate();
    if !check.is_ok() {
        return Err(ConfigError::Invalid(check.violations));
    }
    config
        .flow_settings
        .check()
        .map_err(|e| ConfigError::Settings(e.to_string()))?;
    for (index, p) in config.initial_points.iter().enumerate() {
        if !p.in_domain(&config.params, 0.0) {
            return Err(ConfigError::InitialPoint {
                index,
                message: format!("{p:?} is outside {{S, Ia, Is >= 0, S + Ia + Is <= N}}"),
            });
        }
    }
    Ok(config)
}

/// The scenario as a TOML document accepted by [`parse_config`].
pub fn render(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("scenario configs always serialise")
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ReproductionError> for CliError {
    fn from(e: ReproductionError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<EquilibriumError> for CliError {
    fn from(e: EquilibriumError) -> Self {
        match e {
            EquilibriumError::Seasonal { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

/// Shortest decimal that reads back as the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn verdict_name(v: ThresholdVerdict) -> &'static str {
    match v {
        ThresholdVerdict::Subcritical => "subcritical",
        ThresholdVerdict::Critical => "critical",
        ThresholdVerdict::Supercritical => "supercritical",
    }
}

/// Threshold report: `rho(Phi)`, `R0` by bisection, the closed form when
/// transmission is constant and, on request, the operator estimate.
pub fn cmd_r0(config: &ScenarioConfig, operator: Option<OperatorGrid>, format: Format) -> Result<String, CliError> {
    let rep = monodromy_report(&config.params, operator)?;
    let note = rep.blocks.has_no_infection_path().then_some("no transmission");
    let mut fields: Vec<(&str, String)> = vec![
        ("rho", num(rep.rho)),
        ("verdict", verdict_name(rep.verdict).into()),
        ("r0", num(rep.r0_bisection)),
    ];
    if let Some(c) = rep.r0_closed_form {
        fields.push(("r0_closed_form", num(c)));
    }
    if let Some(o) = rep.r0_operator {
        fields.push(("r0_operator", num(o)));
    }
    if let Some(n) = note {
        fields.push(("note", n.into()));
    }
    let phi = rep.phi.0;
    Ok(match format {
        Format::Csv => {
            let (keys, vals): (Vec<&str>, Vec<String>) = fields.into_iter().unzip();
            format!("{}\n{}\n", keys.join(","), vals.join(","))
        }
        Format::Text => {
            let mut out = String::new();
            for (k, v) in fields {
                let quoted = matches!(k, "verdict" | "note");
                if quoted {
                    let _ = writeln!(out, "{k} = {v:?}");
                } else {
                    let _ = writeln!(out, "{k} = {v}");
                }
            }
            let _ = writeln!(
                out,
                "phi = [[{}, {}], [{}, {}]]",
                num(phi[0][0]),
                num(phi[0][1]),
                num(phi[1][0]),
                num(phi[1][1])
            );
            out
        }
    })
}

pub const CSV_HEADER: &str = "t,S,Ia,Is,R,season";

/// Trajectory CSV from the initial point with index `point`.
pub fn cmd_simulate(config: &ScenarioConfig, t_end: f64, stride: Option<f64>, point: usize) -> Result<String, CliError> {
    let p0 = config.initial_points.get(point).ok_or_else(|| {
        CliError::Usage(format!(
            "simulate needs initial_points[{point}] in the config ({} given)",
            config.initial_points.len()
        ))
    })?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(CliError::Usage(format!("--t-end must be positive, got {t_end}")));
    }
    let p = &config.params;
    let traj = match stride {
        Some(s) => solve_with_stride(p, p0, t_end, s, &config.flow_settings)?,
        None => solve(p, p0, t_end, &config.flow_settings)?,
    };
    let mut out = String::with_capacity(64 * traj.samples.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(s.t),
            num(s.state.s),
            num(s.state.i_a),
            num(s.state.i_s),
            num(s.state.recovered(p)),
            s.season.which
        );
    }
    Ok(out)
}

fn stability_name(s: crate::equilibria::Stability) -> &'static str {
    use crate::equilibria::Stability::*;
    match s {
        Stable => "stable",
        Unstable => "unstable",
        SaddleNode => "saddle-node",
        Saddle => "saddle",
    }
}

/// Equilibria of the constant-transmission system with their stability.
pub fn cmd_equilibria(config: &ScenarioConfig, format: Format) -> Result<String, CliError> {
    let reports = find_equilibria(&config.params)?;
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("kind,S,Ia,Is,stability,max_real_eigenvalue\n");
            for e in &reports {
                let max_re = e.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    e.kind.label(),
                    num(e.state.s),
                    num(e.state.i_a),
                    num(e.state.i_s),
                    stability_name(e.stability),
                    num(max_re)
                );
            }
        }
        Format::Text => {
            for e in &reports {
                let _ = writeln!(out, "[[equilibrium]]");
                let _ = writeln!(out, "kind = {:?}", e.kind.label());
                let _ = writeln!(
                    out,
                    "state = {{ S = {}, Ia = {}, Is = {} }}",
                    num(e.state.s),
                    num(e.state.i_a),
                    num(e.state.i_s)
                );
                let _ = writeln!(out, "stability = {:?}", stability_name(e.stability));
                let eig: Vec<String> = e
                    .eigenvalues
                    .iter()
                    .map(|z| format!("[{}, {}]", num(z.re), num(z.im)))
                    .collect();
                let _ = writeln!(out, "eigenvalues = [{}]", eig.join(", "));
                if let Some(c) = &e.rh_certificate {
                    let _ = writeln!(
                        out,
                        "certificate = {{ xi0 = {}, xi1 = {}, xi2 = {}, hurwitz = {}, verdict = {:?} }}",
                        num(c.xi0),
                        num(c.xi1),
                        num(c.xi2),
                        num(c.hurwitz),
                        format!("{:?}", c.verdict)
                    );
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Options for [`cmd_verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub checks: Vec<String>,
    pub samples: usize,
    pub seed: u64,
    /// `r_s - r_a` for the near-equal-rates check.
    pub delta_r: f64,
    /// Fixed horizon for the extinction and persistence checks instead of
    /// the adaptive one.
    pub horizon: Option<f64>,
}

/// Outcome of [`cmd_verify`]: the rendered reports and whether anything was violated.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutput {
    pub text: String,
    pub violated: bool,
}

fn render_report(out: &mut String, r: &VerdictReport, format: Format) {
    match format {
        Format::Csv => {
            let evidence: Vec<String> = r.evidence.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.theorem_id,
                r.outcome,
                num(r.hypothesis_values.r0),
                r.samples,
                r.seed.map_or(String::new(), |s| s.to_string()),
                evidence.join(";")
            );
        }
        Format::Text => {
            let h = &r.hypothesis_values;
            let _ = writeln!(out, "[[verdict]]");
            let _ = writeln!(out, "check = {:?}", r.theorem_id);
            let _ = writeln!(out, "outcome = {:?}", r.outcome.to_string());
            let _ = writeln!(
                out,
                "hypotheses = {{ r0 = {}, rho = {}, mu_interior = {}, alpha_beta1_positive = {}, rate_gap = {}, autonomous = {} }}",
                num(h.r0),
                num(h.rho),
                h.mu_interior,
                h.alpha_beta1_positive,
                num(h.rate_gap),
                h.autonomous
            );
            let ev: Vec<String> = r.evidence.iter().map(|(k, v)| format!("{k} = {}", num(*v))).collect();
            let _ = writeln!(out, "evidence = {{ {} }}", ev.join(", "));
            let _ = writeln!(out, "samples = {}", r.samples);
            if let Some(s) = r.seed {
                let _ = writeln!(out, "seed = {s}");
            }
            if let Some(w) = &r.witness {
                let _ = writeln!(
                    out,
                    "witness = {{ t = {}, S = {}, Ia = {}, Is = {} }}",
                    num(w.t),
                    num(w.p0.s),
                    num(w.p0.i_a),
                    num(w.p0.i_s)
                );
            }
            out.push('\n');
        }
    }
}

/// Runs the requested checks. Checks whose hypotheses do not hold are listed
/// as skipped and do not count as violations.
pub fn cmd_verify(config: &ScenarioConfig, opts: &VerifyOptions, format: Format) -> Result<VerifyOutput, CliError> {
    for id in &opts.checks {
        if !CHECK_IDS.contains(&id.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown check {id:?}; expected one of {}",
                CHECK_IDS.join(", ")
            )));
        }
    }
    let p = &config.params;
    let points = if config.initial_points.is_empty() {
        InitialPoints::Random {
            count: opts.samples,
            seed: opts.seed,
        }
    } else {
        InitialPoints::Given(config.initial_points.clone())
    };
    let settings = FlowSettings {
        max_step: config.flow_settings.max_step.or(long_run_settings(p).max_step),
        ..config.flow_settings
    };
    let mut out = String::new();
    if format == Format::Csv {
        out.push_str("check,outcome,r0,samples,seed,evidence\n");
    }
    let mut violated = false;
    for id in &opts.checks {
        let result = match id.as_str() {
            "extinction" => check_extinction(p, &points, opts.horizon, &settings),
            "persistence" => check_persistence(p, &points, opts.horizon, &settings),
            "endemic-stability" => check_endemic_stability(p),
            _ => check_near_equal_rates(p, opts.delta_r, None, &points, &settings),
        };
        match result {
            Ok(r) => {
                violated |= r.outcome == Outcome::Violated;
                render_report(&mut out, &r, format);
            }
            Err(AnalysisError::Precondition(why)) => match format {
                Format::Csv => {
                    let _ = writeln!(out, "{id},skipped,,,,{why}");
                }
                Format::Text => {
                    let _ = writeln!(out, "[[verdict]]\ncheck = {id:?}\noutcome = \"skipped\"\nreason = {why:?}\n");
                }
            },
            Err(e) => return Err(CliError::Numeric(e.to_string())),
        }
    }
    Ok(VerifyOutput { text: out, violated })
}

/// Threshold sweep as CSV (`<axis>,rho,r0`) or text; rejected grid values are
/// reported after the table.
pub fn cmd_sweep(config: &ScenarioConfig, axis: SweepAxis, grid: &[f64], format: Format) -> Result<String, CliError> {
    let table = threshold_sweep(&config.params, axis, grid);
    let mut out = String::new();
    match format {
        Format::Csv => {
            let _ = writeln!(out, "{},rho,r0", axis.name());
            for r in &table.rows {
                let _ = writeln!(out, "{},{},{}", num(r.value), num(r.rho), num(r.r0));
            }
            for (v, why) in &table.skipped {
                let _ = writeln!(out, "# skipped {}: {why}", num(*v));
            }
        }
        Format::Text => {
            let _ = writeln!(out, "axis = {:?}", axis.name());
            let _ = writeln!(out, "r0_nondecreasing = {}", table.r0_nondecreasing());
            for r in &table.rows {
                let _ = writeln!(
                    out,
                    "[[row]]\nvalue = {}\nrho = {}\nr0 = {}",
                    num(r.value),
                    num(r.rho),
                    num(r.r0)
                );
            }
            for (v, why) in &table.skipped {
                let _ = writeln!(out, "[[skipped]]\nvalue = {}\nreason = {why:?}", num(*v));
            }
        }
    }
    Ok(out)
}
