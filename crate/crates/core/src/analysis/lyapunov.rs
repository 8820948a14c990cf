//! Lyapunov functions of the constant-transmission system and their
//! derivatives along the flow.

use super::AnalysisError;
use crate::model::{rhs, ModelParams, State};
use crate::reproduction::closed_form_r0;

/// A Lyapunov function evaluated at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEval {
    pub value: f64,
    /// Closed-form derivative along the flow.
    pub derivative: f64,
    /// Gradient dotted with the vector field, computed independently.
    pub gradient_derivative: f64,
}

fn constant_beta(params: &ModelParams) -> Result<f64, AnalysisError> {
    if params.is_autonomous() {
        Ok(params.beta1)
    } else {
        Err(AnalysisError::Precondition("needs beta1 = beta2".into()))
    }
}

/// `L = I_a + (d + r_a) / (d + r_s) alpha I_s`, nonincreasing when `R0 <= 1`.
pub fn lyapunov_l(params: &ModelParams, state: &State) -> Result<LyapunovEval, AnalysisError> {
    let beta = constant_beta(params)?;
    let k = (params.d + params.r_a) / (params.d + params.r_s);
    let value = state.i_a + k * params.alpha * state.i_s;
    let force = state.i_a + params.alpha * state.i_s;
    let r0 = closed_form_r0(params, beta);
    let derivative = (params.d + params.r_a) * force * (r0 * state.s / params.n - 1.0);
    let f = rhs(params, state, beta);
    Ok(LyapunovEval {
        value,
        derivative,
        gradient_derivative: f[1] + k * params.alpha * f[2],
    })
}

/// Limit system on `I_a = 0` in shifted coordinates `x = S + sigma / (alpha beta)`, `y = I_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedMu0 {
    pub alpha_beta: f64,
    pub x0: f64,
    pub y0: f64,
}

impl ShiftedMu0 {
    pub fn new(params: &ModelParams) -> Result<Self, AnalysisError> {
        let beta = constant_beta(params)?;
        if params.mu != 0.0 {
            return Err(AnalysisError::Precondition(format!("needs mu = 0, got {}", params.mu)));
        }
        let ab = params.alpha * beta;
        if !(ab > 0.0) {
            return Err(AnalysisError::Precondition("needs alpha beta > 0".into()));
        }
        let r0 = closed_form_r0(params, beta);
        if !(r0 > 1.0) {
            return Err(AnalysisError::Precondition(format!("needs R0 > 1, got {r0}")));
        }
        let ModelParams { d, sigma, r_s, n, .. } = *params;
        Ok(Self {
            alpha_beta: ab,
            x0: (d + r_s + sigma) / ab,
            y0: (d + sigma) * n * (1.0 - 1.0 / r0) / (d + sigma + r_s),
        })
    }

    pub fn to_shifted(&self, params: &ModelParams, state: &State) -> (f64, f64) {
        (state.s + params.sigma / self.alpha_beta, state.i_s)
    }

    pub fn field(&self, params: &ModelParams, x: f64, y: f64) -> (f64, f64) {
        let ModelParams { d, sigma, r_s, n, .. } = *params;
        let ab = self.alpha_beta;
        (
            (d + sigma) * (n + sigma / ab) - (d + sigma) * x - ab * x * y,
            ab * x * y - (d + r_s + sigma) * y,
        )
    }
}

/// `V(x, y) = (x - x0)^2 / 2 + x0 (y - y0 - y0 ln(y / y0))` on the shifted
/// limit system with `mu = 0`.
pub fn lyapunov_v_mu0(params: &ModelParams, x: f64, y: f64) -> Result<LyapunovEval, AnalysisError> {
    let sh = ShiftedMu0::new(params)?;
    if !(y > 0.0) {
        return Err(AnalysisError::Precondition(format!("needs y > 0, got {y}")));
    }
    let ShiftedMu0 { alpha_beta, x0, y0 } = sh;
    let dx = x - x0;
    let value = 0.5 * dx * dx + x0 * (y - y0 - y0 * (y / y0).ln());
    let derivative = -dx * dx * (alpha_beta * y + params.d + params.sigma);
    let (fx, fy) = sh.field(params, x, y);
    Ok(LyapunovEval {
        value,
        derivative,
        gradient_derivative: dx * fx + x0 * (1.0 - y0 / y) * fy,
    })
}

/// Reduced coordinates `(S, I, N1)` with `I = I_a + alpha I_s` and
/// `N1 = S + I_a + I_s`, valid when `r_a = r_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualRates {
    pub beta: f64,
    pub r: f64,
    /// `(mu + alpha (1 - mu)) beta`.
    pub mu_tilde: f64,
    pub s_star: f64,
    pub i_star: f64,
    pub n1_star: f64,
    pub nu2: f64,
    pub nu3: f64,
}

/// Relative tolerance for `r_a = r_s`.
const EQUAL_RATES_TOL: f64 = 1e-12;

impl EqualRates {
    pub fn new(params: &ModelParams) -> Result<Self, AnalysisError> {
        let beta = constant_beta(params)?;
        let ModelParams {
            d,
            alpha,
            sigma,
            mu,
            r_a,
            r_s,
            n,
            ..
        } = *params;
        if (r_a - r_s).abs() > EQUAL_RATES_TOL * r_a.max(r_s) {
            return Err(AnalysisError::Precondition(format!("needs r_a = r_s, got {r_a} and {r_s}")));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(AnalysisError::Precondition(format!("needs 0 < mu < 1, got {mu}")));
        }
        let r0 = closed_form_r0(params, beta);
        if !(r0 > 1.0) {
            return Err(AnalysisError::Precondition(format!("needs R0 > 1, got {r0}")));
        }
        let r = r_a;
        let mu_tilde = (mu + alpha * (1.0 - mu)) * beta;
        let s_star = (d + r) / mu_tilde;
        let n1_star = ((d + sigma) * n + r * s_star) / (d + r + sigma);
        let i_star = ((d + sigma) * n - sigma * n1_star - d * s_star) / (beta * s_star);
        Ok(Self {
            beta,
            r,
            mu_tilde,
            s_star,
            i_star,
            n1_star,
            nu2: beta * s_star / mu_tilde,
            nu3: sigma / r,
        })
    }

    pub fn reduce(&self, params: &ModelParams, state: &State) -> [f64; 3] {
        [
            state.s,
            state.i_a + params.alpha * state.i_s,
            state.s + state.i_a + state.i_s,
        ]
    }

    pub fn field(&self, params: &ModelParams, [s, i, n1]: [f64; 3]) -> [f64; 3] {
        let ModelParams { d, sigma, n, .. } = *params;
        let r = self.r;
        [
            (d + sigma) * n - sigma * n1 - d * s - self.beta * s * i,
            self.mu_tilde * s * i - (d + r) * i,
            (d + sigma) * n - (d + r + sigma) * n1 + r * s,
        ]
    }
}

fn g(x: f64) -> f64 {
    x - 1.0 - x.ln()
}

/// `V1 = (S - S*)^2 / 2 + nu2 I* g(I / I*) + nu3 (N1 - N1*)^2 / 2` with
/// `g(x) = x - 1 - ln x`.
pub fn lyapunov_v1_equal_rates(params: &ModelParams, reduced: [f64; 3]) -> Result<LyapunovEval, AnalysisError> {
    let e = EqualRates::new(params)?;
    let [s, i, n1] = reduced;
    if !(i > 0.0) {
        return Err(AnalysisError::Precondition(format!("needs I > 0, got {i}")));
    }
    let (x, y, z) = (s / e.s_star, i / e.i_star, n1 / e.n1_star);
    let value = 0.5 * (s - e.s_star).powi(2) + e.nu2 * e.i_star * g(y) + 0.5 * e.nu3 * (n1 - e.n1_star).powi(2);
    let ModelParams { d, sigma, .. } = *params;
    let ss = e.s_star * e.s_star;
    let derivative = -d * ss * (x - 1.0).powi(2)
        - e.nu3 * (d + e.r + sigma) * e.n1_star.powi(2) * (z - 1.0).powi(2)
        - e.beta * ss * e.i_star * y * (x - 1.0).powi(2);
    let f = e.field(params, reduced);
    let gradient_derivative =
        (s - e.s_star) * f[0] + e.nu2 * (1.0 - e.i_star / i) * f[1] + e.nu3 * (n1 - e.n1_star) * f[2];
    Ok(LyapunovEval {
        value,
        derivative,
        gradient_derivative,
    })
}
