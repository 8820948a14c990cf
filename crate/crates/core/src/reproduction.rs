//! Linearisation at the disease-free state and the basic reproduction number.
//!
//! Three independent routes are provided:
//!
//! - the threshold quantity `rho(Phi)`, the spectral radius of the monodromy
//!   matrix of the infective block over one period;
//! - `R0` as the root of `rho(W_lambda(omega, 0)) = 1`, found by bracketing
//!   and bisection;
//! - `R0` as the spectral radius of a discretised next-infection operator.
//!
//! With constant transmission there is also a closed form.

use crate::model::{ModelParams, Season};
use crate::smallmat::{expm, spectral_radius2, Mat2, Mat3, MatError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReproductionError {
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("closed form needs beta1 == beta2 (got {beta1} and {beta2})")]
    Seasonal { beta1: f64, beta2: f64 },
    #[error("could not bracket the root of rho(W_lambda) = 1 within [1e-30, 1e30]")]
    BracketFailed,
    #[error("operator grid needs at least 64 points, got {0}")]
    GridTooCoarse(usize),
    #[error("truncation {given} is shorter than 40 / kappa = {required}")]
    TruncationTooShort { given: f64, required: f64 },
    #[error("power iteration did not converge after {iterations} iterations (relative gap {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// New-infection and transition blocks of the linearisation at `(N, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationBlocks {
    pub f1: Mat2,
    pub f2: Mat2,
    pub v: Mat2,
    /// `(beta_i N + sigma, alpha beta_i N + sigma)`: coupling of the
    /// infectives into the susceptible equation.
    pub b1: [f64; 2],
    pub b2: [f64; 2],
    /// `d + sigma`.
    pub susceptible_decay: f64,
}

fn new_infections(params: &ModelParams, beta: f64) -> Mat2 {
    let ModelParams { alpha, mu, n, .. } = *params;
    let bn = beta * n;
    Mat2([
        [mu * bn, alpha * mu * bn],
        [(1.0 - mu) * bn, alpha * (1.0 - mu) * bn],
    ])
}

impl LinearizationBlocks {
    pub fn new(params: &ModelParams) -> Self {
        let ModelParams {
            d,
            alpha,
            sigma,
            r_a,
            r_s,
            n,
            ..
        } = *params;
        Self {
            f1: new_infections(params, params.beta1),
            f2: new_infections(params, params.beta2),
            v: Mat2::diag([d + r_a, d + r_s]),
            b1: [params.beta1 * n + sigma, alpha * params.beta1 * n + sigma],
            b2: [params.beta2 * n + sigma, alpha * params.beta2 * n + sigma],
            susceptible_decay: d + sigma,
        }
    }

    pub fn f(&self, season: Season) -> Mat2 {
        match season {
            Season::Low => self.f1,
            Season::High => self.f2,
        }
    }

    /// `F_i / lambda - V` for the given season.
    pub fn season_matrix(&self, season: Season, lambda: f64) -> Mat2 {
        self.f(season).scale(1.0 / lambda) - self.v
    }

    /// Whether the infective blocks admit no infection cycle at all, in which
    /// case every `W_lambda` is triangular with diagonal `e^{-V omega}` and R0 = 0.
    pub fn has_no_infection_path(&self) -> bool {
        self.f1.trace() == 0.0 && self.f2.trace() == 0.0
    }

    /// The 3x3 new-infection matrix acting on `(S, I_a, I_s)`.
    pub fn full_f(&self, season: Season) -> Mat3 {
        let f = self.f(season).0;
        Mat3([[0.0; 3], [0.0, f[0][0], f[0][1]], [0.0, f[1][0], f[1][1]]])
    }

    /// The 3x3 transition matrix acting on `(S, I_a, I_s)`.
    pub fn full_v(&self, season: Season) -> Mat3 {
        let b = match season {
            Season::Low => self.b1,
            Season::High => self.b2,
        };
        let v = self.v.0;
        Mat3([
            [self.susceptible_decay, b[0], b[1]],
            [0.0, v[0][0], 0.0],
            [0.0, 0.0, v[1][1]],
        ])
    }
}

pub fn linearize(params: &ModelParams) -> LinearizationBlocks {
    LinearizationBlocks::new(params)
}

fn monodromy_with(blocks: &LinearizationBlocks, params: &ModelParams, lambda: f64) -> Result<Mat2, ReproductionError> {
    if !(lambda > 0.0) {
        return Err(ReproductionError::NonPositiveLambda(lambda));
    }
    // low season first: time runs over [0, (1-theta) omega) then [(1-theta) omega, omega)
    let low = expm(&blocks.season_matrix(Season::Low, lambda), params.low_season_len())?;
    let high = expm(&blocks.season_matrix(Season::High, lambda), params.high_season_len())?;
    let w = high * low;
    if !w.is_finite() {
        return Err(MatError::Overflow { norm: f64::INFINITY }.into());
    }
    Ok(w)
}

/// `W_lambda(omega, 0)`, the one-period fundamental matrix of
/// `w' = (F(t)/lambda - V) w`. At `lambda = 1` this is `Phi_{F-V}(omega)`.
pub fn monodromy(params: &ModelParams, lambda: f64) -> Result<Mat2, ReproductionError> {
    monodromy_with(&LinearizationBlocks::new(params), params, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdVerdict {
    Subcritical,
    Critical,
    Supercritical,
}

pub const CRITICAL_BAND: f64 = 1e-10;

/// `rho(Phi_{F-V}(omega))` and which side of one it falls on.
pub fn r0_threshold(params: &ModelParams) -> Result<(f64, ThresholdVerdict), ReproductionError> {
    let rho = spectral_radius2(&monodromy(params, 1.0)?);
    let verdict = if (rho - 1.0).abs() <= CRITICAL_BAND {
        ThresholdVerdict::Critical
    } else if rho < 1.0 {
        ThresholdVerdict::Subcritical
    } else {
        ThresholdVerdict::Supercritical
    };
    Ok((rho, verdict))
}

/// `rho(W_lambda)`, with overflow of the exponential read as an infinite radius.
fn rho_w(blocks: &LinearizationBlocks, params: &ModelParams, lambda: f64) -> Result<f64, ReproductionError> {
    match monodromy_with(blocks, params, lambda) {
        Ok(w) => Ok(spectral_radius2(&w)),
        Err(ReproductionError::Matrix(MatError::Overflow { .. })) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

const LAMBDA_MIN: f64 = 1e-30;
const LAMBDA_MAX: f64 = 1e30;

/// Bracket `[lo, hi]` with `rho(W_lo) > 1 >= rho(W_hi)` by stepping from one
/// by factors of ten. `None` when the radii seen along the way are not
/// monotone, which would invalidate the bracket.
fn expand_bracket(
    blocks: &LinearizationBlocks,
    params: &ModelParams,
) -> Result<Option<(f64, f64)>, ReproductionError> {
    let mut lambda = 1.0;
    let mut rho = rho_w(blocks, params, lambda)?;
    if rho > 1.0 {
        loop {
            let next = lambda * 10.0;
            if next > LAMBDA_MAX {
                return Err(ReproductionError::BracketFailed);
            }
            let r = rho_w(blocks, params, next)?;
            if r > rho {
                return Ok(None);
            }
            if r <= 1.0 {
                return Ok(Some((lambda, next)));
            }
            lambda = next;
            rho = r;
        }
    } else {
        loop {
            let next = lambda / 10.0;
            if next < LAMBDA_MIN {
                return Err(ReproductionError::BracketFailed);
            }
            let r = rho_w(blocks, params, next)?;
            if r < rho {
                return Ok(None);
            }
            if r > 1.0 {
                return Ok(Some((next, lambda)));
            }
            lambda = next;
            rho = r;
        }
    }
}

/// Fallback: first sign change of `rho(W_lambda) - 1` on a log grid, scanning
/// downwards from the largest `lambda`.
fn scan_bracket(blocks: &LinearizationBlocks, params: &ModelParams) -> Result<(f64, f64), ReproductionError> {
    const PER_DECADE: i32 = 20;
    let decades = 60;
    let mut hi = LAMBDA_MAX;
    if rho_w(blocks, params, hi)? > 1.0 {
        return Err(ReproductionError::BracketFailed);
    }
    for k in 1..=decades * PER_DECADE {
        let lo = LAMBDA_MAX * 10f64.powf(-(k as f64) / PER_DECADE as f64);
        if rho_w(blocks, params, lo)? > 1.0 {
            return Ok((lo, hi));
        }
        hi = lo;
    }
    Err(ReproductionError::BracketFailed)
}

/// The basic reproduction number as the unique `lambda > 0` with
/// `rho(W_lambda(omega, 0)) = 1`, or zero when no such root exists.
pub fn r0_bisection(params: &ModelParams) -> Result<f64, ReproductionError> {
    let blocks = LinearizationBlocks::new(params);
    if blocks.has_no_infection_path() {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = match expand_bracket(&blocks, params)? {
        Some(b) => b,
        None => scan_bracket(&blocks, params)?,
    };
    while hi - lo > 1e-12 * lo.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rho_w(&blocks, params, mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_lo = (rho_w(&blocks, params, lo)? - 1.0).abs();
    let r_hi = (rho_w(&blocks, params, hi)? - 1.0).abs();
    Ok(if r_lo < r_hi { lo } else { hi })
}

/// `beta N (mu / (d + r_a) + alpha (1 - mu) / (d + r_s))`, valid only for
/// constant transmission.
pub fn r0_closed_form(params: &ModelParams) -> Result<f64, ReproductionError> {
    if !params.is_autonomous() {
        return Err(ReproductionError::Seasonal {
            beta1: params.beta1,
            beta2: params.beta2,
        });
    }
    Ok(closed_form_r0(params, params.beta1))
}

/// The closed form at transmission rate `beta`, ignoring the seasonal rates.
pub fn closed_form_r0(params: &ModelParams, beta: f64) -> f64 {
    let ModelParams {
        d,
        alpha,
        mu,
        r_a,
        r_s,
        n,
        ..
    } = *params;
    if beta == 0.0 {
        return 0.0;
    }
    let asym = if mu == 0.0 { 0.0 } else { mu / (d + r_a) };
    let sym = if alpha * (1.0 - mu) == 0.0 {
        0.0
    } else {
        alpha * (1.0 - mu) / (d + r_s)
    };
    beta * n * (asym + sym)
}

/// Slowest decay rate of the transition block, `d + min(r_a, r_s)`.
pub fn decay_rate(params: &ModelParams) -> f64 {
    params.d + params.r_a.min(params.r_s)
}

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;

/// Length of the intersection of `[lo, hi]` with the high season, taken
/// periodically.
fn high_season_overlap(params: &ModelParams, lo: f64, hi: f64) -> f64 {
    let omega = params.omega;
    let switch = params.low_season_len();
    [-omega, 0.0, omega]
        .iter()
        .map(|shift| {
            let a = lo.max(switch + shift);
            let b = hi.min(omega + shift);
            (b - a).max(0.0)
        })
        .sum()
}

/// Spectral radius of a discretised next-infection operator
/// `(L I)(t) = int_0^A e^{-V a} F(t - a) I(t - a) da` on `grid_n` equally
/// spaced points of one period.
///
/// The age integral uses the trapezoid rule on the same spacing with exact
/// `e^{-V a}` factors, and the seasonal transmission rate is averaged over
/// each grid cell. Because `F(t) = beta(t) N u w^T` has rank one, nonzero
/// eigenvalues of the discretised operator coincide with those of the scalar
/// operator `q -> N beta_j sum_l k_l q_{j-l}` with `k_l = w^T G_l u`; power
/// iteration runs on that positive operator and stops once the
/// Collatz-Wielandt bounds agree to `1e-12`.
pub fn r0_operator_oracle(params: &ModelParams, grid_n: usize, truncation: f64) -> Result<f64, ReproductionError> {
    if grid_n < 64 {
        return Err(ReproductionError::GridTooCoarse(grid_n));
    }
    let kappa = decay_rate(params);
    let required = 40.0 / kappa;
    if truncation < required * (1.0 - 1e-12) {
        return Err(ReproductionError::TruncationTooShort {
            given: truncation,
            required,
        });
    }
    let blocks = LinearizationBlocks::new(params);
    if blocks.has_no_infection_path() {
        return Ok(0.0);
    }

    let n = grid_n;
    let h = params.omega / n as f64;
    let ModelParams {
        alpha, mu, d, r_a, r_s, ..
    } = *params;

    // kernel folded onto one period: k_l = sum over a_k = k h with k = l mod n
    let steps = (truncation / h).ceil() as usize;
    let (rate_a, rate_s) = (d + r_a, d + r_s);
    let mut kernel = vec![0.0f64; n];
    for k in 0..=steps {
        let weight = if k == 0 || k == steps { 0.5 * h } else { h };
        let a = k as f64 * h;
        let g = mu * (-rate_a * a).exp() + alpha * (1.0 - mu) * (-rate_s * a).exp();
        kernel[k % n] += weight * g;
    }

    // N times the cell-averaged transmission rate
    let transmission: Vec<f64> = (0..n)
        .map(|j| {
            let t = j as f64 * h;
            let high = high_season_overlap(params, t - 0.5 * h, t + 0.5 * h);
            params.n * (params.beta2 * high + params.beta1 * (h - high)) / h
        })
        .collect();
    let support: Vec<usize> = (0..n).filter(|&j| transmission[j] > 0.0).collect();
    if support.is_empty() {
        return Ok(0.0);
    }

    let mut q: Vec<f64> = transmission.clone();
    let mut next = vec![0.0f64; n];
    let mut gap = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        for &j in &support {
            let mut acc = 0.0;
            for &i in &support {
                // lag j - i taken modulo the period
                let lag = if j >= i { j - i } else { j + n - i };
                acc += kernel[lag] * q[i];
            }
            next[j] = transmission[j] * acc;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for &j in &support {
            let ratio = next[j] / q[j];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        gap = (hi - lo) / hi;
        if gap <= POWER_TOL {
            return Ok(0.5 * (lo + hi));
        }
        let norm: f64 = support.iter().map(|&j| next[j]).sum();
        for &j in &support {
            q[j] = next[j] / norm;
        }
    }
    Err(ReproductionError::NoConvergence {
        iterations: POWER_MAX_ITER,
        residual: gap,
    })
}

/// Everything known about the threshold for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyReport {
    pub blocks: LinearizationBlocks,
    pub phi: Mat2,
    pub rho: f64,
    pub verdict: ThresholdVerdict,
    pub r0_bisection: f64,
    pub r0_operator: Option<f64>,
    pub r0_closed_form: Option<f64>,
}

/// Operator-oracle resolution for [`monodromy_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorGrid {
    pub grid_n: usize,
    /// `None` means `40 / kappa`.
    pub truncation: Option<f64>,
}

pub fn monodromy_report(params: &ModelParams, operator: Option<OperatorGrid>) -> Result<MonodromyReport, ReproductionError> {
    let blocks = LinearizationBlocks::new(params);
    let phi = monodromy_with(&blocks, params, 1.0)?;
    let (rho, verdict) = r0_threshold(params)?;
    let r0_operator = operator
        .map(|g| {
            let a = g.truncation.unwrap_or(40.0 / decay_rate(params));
            r0_operator_oracle(params, g.grid_n, a)
        })
        .transpose()?;
    Ok(MonodromyReport {
        blocks,
        phi,
        rho,
        verdict,
        r0_bisection: r0_bisection(params)?,
        r0_operator,
        r0_closed_form: r0_closed_form(params).ok(),
    })
}
