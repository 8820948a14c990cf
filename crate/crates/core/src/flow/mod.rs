//! Season-by-season integration of the reduced system.
//!
//! Within a season the vector field is smooth, so the integrator is restarted
//! exactly at every switch instant and never steps across a discontinuity.
//! Every full season is integrated over its exact length in local time, which
//! makes `solve` to `m * omega` reproduce `m` applications of the period map
//! bit for bit.

mod dopri;

use crate::model::{self, beta_for, season_at, ModelParams, Season, SeasonLabel, State};
use crate::reproduction::LinearizationBlocks;
use dopri::Tolerances;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step limit exceeded at t = {t}")]
    TooManySteps { t: f64 },
    #[error("initial state {0:?} is outside the domain")]
    OutsideDomain(State),
    #[error("end time must be positive and finite, got {0}")]
    BadEndTime(f64),
    #[error("invalid flow settings: {0}")]
    BadSettings(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Method {
    /// Dormand-Prince 5(4).
    #[default]
    #[serde(rename = "dopri5")]
    DormandPrince54,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Largest step; `None` means `omega / 50`. Always capped by both season lengths.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    pub method: Method,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_step: None,
            method: Method::DormandPrince54,
        }
    }
}

impl FlowSettings {
    pub fn check(&self) -> Result<(), FlowError> {
        for (name, v) in [("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(FlowError::BadSettings(format!("{name} must lie in (0, 1e-2]")));
            }
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(FlowError::BadSettings("max_step must be positive".into()));
            }
        }
        Ok(())
    }

    /// The step cap actually used for `params`.
    pub fn effective_max_step(&self, params: &ModelParams) -> f64 {
        self.max_step
            .unwrap_or(params.omega / 50.0)
            .min(params.low_season_len())
            .min(params.high_season_len())
    }

    fn tolerances(&self, params: &ModelParams) -> Tolerances {
        Tolerances {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_step: self.effective_max_step(params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    pub season: SeasonLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub settings: FlowSettings,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory always holds its initial sample")
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }
}

/// One season-long piece of the time axis.
#[derive(Debug, Clone, Copy)]
struct Segment {
    label: SeasonLabel,
    /// Integration length; shorter than the season only for the last piece.
    span: f64,
}

/// Seasons covering `[0, t_end]`, each starting at its exact switch time.
fn segments(params: &ModelParams, t_end: f64) -> Vec<Segment> {
    let low = params.low_season_len();
    let high = params.high_season_len();
    let mut out = Vec::new();
    let mut period = 0u64;
    loop {
        let base = period as f64 * params.omega;
        for (which, start, len, end) in [
            (Season::Low, base, low, base + low),
            (Season::High, base + low, high, (period + 1) as f64 * params.omega),
        ] {
            if start >= t_end {
                return out;
            }
            let span = if end >= t_end { t_end - start } else { len };
            out.push(Segment {
                label: SeasonLabel { which, start, end },
                span,
            });
        }
        period += 1;
    }
}

fn field(params: &ModelParams, beta: f64) -> impl Fn(&[f64; 3]) -> [f64; 3] + '_ {
    move |y| model::rhs(params, &State::from_array(*y), beta)
}

fn check_start(params: &ModelParams, p0: &State) -> Result<(), FlowError> {
    if p0.in_domain(params, 1e-12 * params.n) {
        Ok(())
    } else {
        Err(FlowError::OutsideDomain(*p0))
    }
}

/// Which points a driven integration reports.
#[derive(Debug, Clone, Copy)]
enum Sampling {
    EveryStep,
    Stride(f64),
}

/// Drives the integration over `[0, t_end]`, calling `visit` at `t = 0`, at
/// every season start, at every reported interior point and at `t_end`.
fn drive<V>(
    params: &ModelParams,
    p0: &State,
    t_end: f64,
    sampling: Sampling,
    settings: &FlowSettings,
    mut visit: V,
) -> Result<State, FlowError>
where
    V: FnMut(f64, &State, &SeasonLabel),
{
    settings.check()?;
    check_start(params, p0)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(FlowError::BadEndTime(t_end));
    }
    let tol = settings.tolerances(params);
    let mut y = p0.to_array();
    let mut stops = Vec::new();

    for seg in segments(params, t_end) {
        let start = seg.label.start;
        visit(start, &State::from_array(y), &seg.label);

        stops.clear();
        if let Sampling::Stride(stride) = sampling {
            // stride points strictly inside the segment
            let eps = 1e-12 * params.omega;
            let mut k = (start / stride).floor() as u64;
            loop {
                let t = k as f64 * stride;
                if t >= start + seg.span - eps {
                    break;
                }
                if t > start + eps {
                    stops.push(t - start);
                }
                k += 1;
            }
        }

        let f = field(params, beta_for(params, seg.label.which));
        let label = seg.label;
        let every = matches!(sampling, Sampling::EveryStep);
        let span = seg.span;
        let stride_times: Vec<f64> = stops.iter().map(|tau| tau + start).collect();
        let mut stop_idx = 0;
        y = dopri::integrate(&f, y, span, &stops, &tol, start, |tau, state, is_stop| {
            if tau >= span {
                return;
            }
            if is_stop {
                // report the exact grid time rather than start + tau
                visit(stride_times[stop_idx], &State::from_array(*state), &label);
                stop_idx += 1;
            } else if every {
                visit(start + tau, &State::from_array(*state), &label);
            }
        })?;
    }

    let end_state = State::from_array(y);
    let end_label = season_at(params, t_end).expect("t_end is positive");
    visit(t_end, &end_state, &end_label);
    Ok(end_state)
}

fn record(params: &ModelParams, settings: &FlowSettings, p0: &State, t_end: f64, sampling: Sampling) -> Result<Trajectory, FlowError> {
    let mut samples: Vec<Sample> = Vec::new();
    drive(params, p0, t_end, sampling, settings, |t, state, label| {
        if samples.last().is_some_and(|s| s.t >= t) {
            return;
        }
        samples.push(Sample {
            t,
            state: state.clamped(params),
            season: *label,
        });
    })?;
    Ok(Trajectory {
        samples,
        settings: *settings,
    })
}

/// Solution over `[0, t_end]` with a sample after every accepted step and at
/// every switch instant.
pub fn solve(
    params: &ModelParams,
    p0: &State,
    t_end: f64,
    settings: &FlowSettings,
) -> Result<Trajectory, FlowError> {
    record(params, settings, p0, t_end, Sampling::EveryStep)
}

/// Solution sampled on the grid `k * stride` plus every switch instant and `t_end`.
pub fn solve_with_stride(
    params: &ModelParams,
    p0: &State,
    t_end: f64,
    stride: f64,
    settings: &FlowSettings,
) -> Result<Trajectory, FlowError> {
    if !(stride > 0.0 && stride.is_finite()) {
        return Err(FlowError::BadSettings("stride must be positive".into()));
    }
    record(params, settings, p0, t_end, Sampling::Stride(stride))
}

/// State at `t_end` without recording a trajectory.
pub fn state_at(
    params: &ModelParams,
    p0: &State,
    t_end: f64,
    settings: &FlowSettings,
) -> Result<State, FlowError> {
    drive(params, p0, t_end, Sampling::EveryStep, settings, |_, _, _| {}).map(|s| s.clamped(params))
}

/// Streams every accepted step of the solution on `[0, t_end]` to `visit`.
pub fn for_each_step<V>(
    params: &ModelParams,
    p0: &State,
    t_end: f64,
    settings: &FlowSettings,
    mut visit: V,
) -> Result<State, FlowError>
where
    V: FnMut(f64, &State),
{
    drive(params, p0, t_end, Sampling::EveryStep, settings, |t, s, _| visit(t, &s.clamped(params)))
        .map(|s| s.clamped(params))
}

/// Flow of the constant-transmission system for `duration`, ignoring seasons.
pub fn flow_autonomous(
    params: &ModelParams,
    beta: f64,
    p0: &State,
    duration: f64,
    settings: &FlowSettings,
) -> Result<State, FlowError> {
    settings.check()?;
    check_start(params, p0)?;
    let tol = Tolerances {
        abs_tol: settings.abs_tol,
        rel_tol: settings.rel_tol,
        max_step: settings.max_step.unwrap_or(params.omega / 50.0),
    };
    let f = field(params, beta);
    dopri::integrate(&f, p0.to_array(), duration, &[], &tol, 0.0, |_, _, _| {}).map(State::from_array)
}

/// The period map: the state after one full period started at `p0` at time 0.
pub fn period_map(params: &ModelParams, p0: &State, settings: &FlowSettings) -> Result<State, FlowError> {
    settings.check()?;
    check_start(params, p0)?;
    let tol = settings.tolerances(params);
    let low = field(params, params.beta1);
    let high = field(params, params.beta2);
    let mid = dopri::integrate(&low, p0.to_array(), params.low_season_len(), &[], &tol, 0.0, |_, _, _| {})?;
    let end = dopri::integrate(
        &high,
        mid,
        params.high_season_len(),
        &[],
        &tol,
        params.low_season_len(),
        |_, _, _| {},
    )?;
    Ok(State::from_array(end))
}

/// The orbit `P(p0), P^2(p0), ..., P^k(p0)`.
pub fn iterate_period_map(
    params: &ModelParams,
    p0: &State,
    k: usize,
    settings: &FlowSettings,
) -> Result<Vec<State>, FlowError> {
    let mut out = Vec::with_capacity(k);
    let mut p = *p0;
    for _ in 0..k {
        // rounding can leave the orbit a hair outside the domain
        p = period_map(params, &p.clamped(params), settings)?;
        out.push(p);
    }
    Ok(out)
}

/// A sample of the nonlinear solution next to its linear majorant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorantSample {
    pub t: f64,
    pub state: State,
    /// Solution of `I' = (F(t) - V) I` started from the initial infectives.
    pub linear: [f64; 2],
}

/// Integrates the nonlinear system together with the linearisation of its
/// infective block at the disease-free state, with one shared step sequence.
pub fn solve_with_majorant(
    params: &ModelParams,
    p0: &State,
    t_end: f64,
    settings: &FlowSettings,
) -> Result<Vec<MajorantSample>, FlowError> {
    settings.check()?;
    check_start(params, p0)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(FlowError::BadEndTime(t_end));
    }
    let tol = settings.tolerances(params);
    let blocks = LinearizationBlocks::new(params);
    let mut y = [p0.s, p0.i_a, p0.i_s, p0.i_a, p0.i_s];
    let mut out = vec![MajorantSample {
        t: 0.0,
        state: *p0,
        linear: [p0.i_a, p0.i_s],
    }];

    for seg in segments(params, t_end) {
        let beta = beta_for(params, seg.label.which);
        let a = blocks.season_matrix(seg.label.which, 1.0);
        let f = move |y: &[f64; 5]| {
            let [ds, da, dsym] = model::rhs(params, &State::new(y[0], y[1], y[2]), beta);
            let lin = a.mul_vec([y[3], y[4]]);
            [ds, da, dsym, lin[0], lin[1]]
        };
        let start = seg.label.start;
        y = dopri::integrate(&f, y, seg.span, &[], &tol, start, |tau, y, _| {
            out.push(MajorantSample {
                t: start + tau,
                state: State::new(y[0], y[1], y[2]).clamped(params),
                linear: [y[3], y[4]],
            });
        })?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
