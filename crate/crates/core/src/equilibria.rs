//! Equilibria of the constant-transmission system and their local stability.
//!
//! Equilibria come from closed forms; the residual of the vector field is the
//! safety net. Stability is read from the Jacobian spectrum and, for the
//! endemic state, cross-checked by a Routh-Hurwitz certificate computed in
//! rescaled coordinates
//!
//! ```text
//! S = (d + r_s) / (mu beta) S^,  I_a = (d + r_s) / beta I_a^,
//! I_s = (d + r_s) / beta I_s^,   dt = d tau / (d + r_s).
//! ```

use crate::model::{rhs, ModelParams, State};
use crate::reproduction::closed_form_r0;
use crate::smallmat::{eig3, routh_hurwitz3, CubicCoeffs, Mat3, StabilityVerdict};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("equilibria need constant transmission (beta1 = {beta1}, beta2 = {beta2})")]
    Seasonal { beta1: f64, beta2: f64 },
    #[error("endemic certificate needs 0 < mu < 1, got mu = {0}")]
    MuOutOfRange(f64),
    #[error("endemic certificate needs R0 > 1, got {0}")]
    NotSupercritical(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    DiseaseFree,
    Endemic,
    AsymptomaticFree,
    SymptomaticFree,
}

impl EquilibriumKind {
    pub fn label(&self) -> &'static str {
        match self {
            EquilibriumKind::DiseaseFree => "E0",
            EquilibriumKind::Endemic => "E1",
            EquilibriumKind::AsymptomaticFree => "E2",
            EquilibriumKind::SymptomaticFree => "E3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    SaddleNode,
    Saddle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub kind: EquilibriumKind,
    pub state: State,
    pub eigenvalues: [Complex64; 3],
    pub stability: Stability,
    pub rh_certificate: Option<RhCertificate>,
}

impl EquilibriumReport {
    /// Max-norm of the vector field at the reported state.
    pub fn residual(&self, params: &ModelParams) -> f64 {
        rhs(params, &self.state, params.beta1)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Band around `R0 = 1` in which the disease-free state is a saddle-node.
pub const SADDLE_NODE_BAND: f64 = 1e-10;

fn require_autonomous(params: &ModelParams) -> Result<f64, EquilibriumError> {
    if params.is_autonomous() {
        Ok(params.beta1)
    } else {
        Err(EquilibriumError::Seasonal {
            beta1: params.beta1,
            beta2: params.beta2,
        })
    }
}

/// Analytic Jacobian of the vector field at `state`.
pub fn jacobian(params: &ModelParams, state: &State, beta: f64) -> Mat3 {
    let ModelParams {
        d,
        alpha,
        sigma,
        mu,
        r_a,
        r_s,
        ..
    } = *params;
    let State { s, i_a, i_s } = *state;
    let force = i_a + alpha * i_s;
    Mat3([
        [-(d + sigma) - beta * force, -beta * s - sigma, -alpha * beta * s - sigma],
        [mu * beta * force, mu * beta * s - (d + r_a), mu * alpha * beta * s],
        [
            (1.0 - mu) * beta * force,
            (1.0 - mu) * beta * s,
            (1.0 - mu) * alpha * beta * s - (d + r_s),
        ],
    ])
}

/// `f1(lambda) = (lambda + d + sigma)(lambda^2 - a1 lambda + a0)` at the
/// disease-free state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfeCharPoly {
    /// From the Jacobian's characteristic polynomial.
    pub a0: f64,
    pub a1: f64,
    /// `(d + r_a)(d + r_s)(1 - R0)`.
    pub a0_closed_form: f64,
}

impl DfeCharPoly {
    /// Discrepancy between the two routes to `a0`, relative to
    /// `max(|a0|, (d + r_a)(d + r_s))`.
    pub fn a0_relative_error(&self, params: &ModelParams) -> f64 {
        let scale = self.a0_closed_form.abs().max((params.d + params.r_a) * (params.d + params.r_s));
        (self.a0 - self.a0_closed_form).abs() / scale
    }
}

pub fn dfe_charpoly(params: &ModelParams, beta: f64) -> DfeCharPoly {
    let j = jacobian(params, &State::disease_free(params), beta);
    let c = j.char_poly();
    // divide lambda^3 + c2 lambda^2 + c1 lambda + c0 by (lambda + k)
    let k = params.d + params.sigma;
    let a1 = k - c.c2;
    let a0 = c.c1 + k * a1;
    let r0 = closed_form_r0(params, beta);
    DfeCharPoly {
        a0,
        a1,
        a0_closed_form: (params.d + params.r_a) * (params.d + params.r_s) * (1.0 - r0),
    }
}

/// Parameters of the rescaled endemic system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedParams {
    pub n1: f64,
    pub d1: f64,
    pub sigma1: f64,
    pub r: f64,
    pub mu1: f64,
    pub alpha: f64,
    pub r0_hat: f64,
}

impl TransformedParams {
    pub fn new(params: &ModelParams, beta: f64) -> Self {
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
        let drs = d + r_s;
        let n1 = n * (d + sigma) * mu * beta / (drs * drs);
        let d1 = (d + sigma) / drs;
        let r = (d + r_a) / drs;
        let mu1 = (1.0 - mu) / mu;
        Self {
            n1,
            d1,
            sigma1: sigma * mu / drs,
            r,
            mu1,
            alpha,
            r0_hat: n1 / d1 * (1.0 / r + alpha * mu1),
        }
    }

    /// Endemic equilibrium `(S^*, I_a^*, I_s^*)` of the rescaled system.
    pub fn endemic_state(&self) -> [f64; 3] {
        let Self {
            n1,
            d1,
            sigma1,
            r,
            mu1,
            r0_hat,
            ..
        } = *self;
        let i_a = n1 / (sigma1 + r * sigma1 * mu1 + r) * (1.0 - 1.0 / r0_hat);
        [n1 / d1 / r0_hat, i_a, mu1 * r * i_a]
    }

    /// Maps a state of the original system into rescaled coordinates.
    pub fn to_rescaled(params: &ModelParams, beta: f64, state: &State) -> [f64; 3] {
        let drs = params.d + params.r_s;
        [
            params.mu * beta * state.s / drs,
            beta * state.i_a / drs,
            beta * state.i_s / drs,
        ]
    }

    /// Jacobian of the rescaled vector field.
    pub fn jacobian(&self, at: [f64; 3]) -> Mat3 {
        let Self {
            d1,
            sigma1,
            r,
            mu1,
            alpha,
            ..
        } = *self;
        let [s, i_a, i_s] = at;
        let force = i_a + alpha * i_s;
        Mat3([
            [-d1 - force, -sigma1 - s, -sigma1 - alpha * s],
            [force, s - r, alpha * s],
            [mu1 * force, mu1 * s, mu1 * alpha * s - 1.0],
        ])
    }
}

/// Band on `R0^ - 1` below which the endemic certificate is reported as
/// marginal; the endemic state merges with the disease-free one at `R0^ = 1`.
pub const CERTIFICATE_BAND: f64 = 1e-8;

/// Routh-Hurwitz certificate for the endemic state in rescaled coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhCertificate {
    pub xi0: f64,
    pub xi1: f64,
    pub xi2: f64,
    /// `xi2 xi1 - xi0`.
    pub hurwitz: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// `|xi2 xi1 - xi0 - (c0 + c1 I_a^* + c2 I_a^*^2)|` relative to `xi2 xi1`.
    pub identity_error: f64,
    pub transformed: TransformedParams,
    pub verdict: StabilityVerdict,
}

impl RhCertificate {
    pub fn coeffs(&self) -> CubicCoeffs {
        CubicCoeffs {
            c2: self.xi2,
            c1: self.xi1,
            c0: self.xi0,
        }
    }
}

pub fn endemic_rh_certificate(params: &ModelParams) -> Result<RhCertificate, EquilibriumError> {
    let beta = require_autonomous(params)?;
    if !(params.mu > 0.0 && params.mu < 1.0) {
        return Err(EquilibriumError::MuOutOfRange(params.mu));
    }
    let tp = TransformedParams::new(params, beta);
    if !(tp.r0_hat > 1.0) {
        return Err(EquilibriumError::NotSupercritical(tp.r0_hat));
    }
    let TransformedParams {
        n1,
        d1,
        sigma1: s1,
        r,
        mu1: m1,
        alpha: a,
        r0_hat,
    } = tp;
    let ia = tp.endemic_state()[1];
    let ram = r * m1 * a + 1.0;
    let base = s1 + r * s1 * m1 + r;

    let xi2 = (s1
        + r * s1 * m1
        + r
        + r * r * m1 * a * s1
        + r.powi(3) * m1 * m1 * a * s1
        + r.powi(3) * m1 * a
        + d1 * s1 * m1 * r * a
        + d1 * s1 * m1 * m1 * r * r * a
        + n1
        + d1 * s1
        + d1 * r * s1 * m1
        + 2.0 * n1 * m1 * r * a
        + r * r * m1 * m1 * a * a * n1)
        / (base * ram);
    let xi1 = d1 * (1.0 + r * r * m1 * a) / ram + (s1 * m1 + 1.0 + r + s1) * ram * ia;
    let xi0 = r * d1 * (r0_hat - 1.0);

    let c0 = d1 * (1.0 + r * r * m1 * a) * (r * r * m1 * a + d1 * m1 * r * a + 1.0 + d1) / (ram * ram);
    let c1 = d1 * m1 * m1 * r * a * s1
        + r.powi(3) * m1 * a
        + r * r * m1 * a * s1
        + 2.0 * d1 * r * r * m1 * a
        + d1 * s1 * m1 * r * a
        + s1 * m1
        + d1 * s1 * m1
        + 1.0
        + 2.0 * d1
        + d1 * s1
        + r * (d1 - s1 * m1)
        + m1 * r * a * (d1 - s1);
    let c2 = ram * ram * (s1 * m1 + 1.0 + r + s1);

    let hurwitz = xi2 * xi1 - xi0;
    let expanded = c0 + c1 * ia + c2 * ia * ia;
    let identity_error = (hurwitz - expanded).abs() / (xi2 * xi1).abs().max(f64::MIN_POSITIVE);

    let coeffs = CubicCoeffs {
        c2: xi2,
        c1: xi1,
        c0: xi0,
    };
    let verdict = if r0_hat - 1.0 <= CERTIFICATE_BAND {
        StabilityVerdict::Marginal
    } else {
        routh_hurwitz3(&coeffs)
    };
    Ok(RhCertificate {
        xi0,
        xi1,
        xi2,
        hurwitz,
        c0,
        c1,
        c2,
        identity_error,
        transformed: tp,
        verdict,
    })
}

fn stability_from_spectrum(eigenvalues: &[Complex64; 3], tol: f64) -> Stability {
    let positive = eigenvalues.iter().filter(|z| z.re > tol).count();
    let negative = eigenvalues.iter().filter(|z| z.re < -tol).count();
    match (positive, negative) {
        (0, 3) => Stability::Stable,
        (p, n) if p > 0 && n > 0 => Stability::Saddle,
        (0, _) => Stability::SaddleNode,
        _ => Stability::Unstable,
    }
}

fn report(params: &ModelParams, beta: f64, kind: EquilibriumKind, state: State) -> EquilibriumReport {
    let j = jacobian(params, &state, beta);
    let eigenvalues = eig3(&j);
    let scale = j.norm1().max(f64::MIN_POSITIVE);
    EquilibriumReport {
        kind,
        state,
        eigenvalues,
        stability: stability_from_spectrum(&eigenvalues, 1e-12 * scale),
        rh_certificate: None,
    }
}

/// All closed-form equilibria of the constant-transmission system, classified.
pub fn find_equilibria(params: &ModelParams) -> Result<Vec<EquilibriumReport>, EquilibriumError> {
    let beta = require_autonomous(params)?;
    let ModelParams {
        d,
        sigma,
        mu,
        r_a,
        r_s,
        n,
        ..
    } = *params;
    let r0 = closed_form_r0(params, beta);

    let mut e0 = report(params, beta, EquilibriumKind::DiseaseFree, State::disease_free(params));
    e0.stability = if (r0 - 1.0).abs() <= SADDLE_NODE_BAND {
        Stability::SaddleNode
    } else if r0 < 1.0 {
        Stability::Stable
    } else {
        Stability::Saddle
    };
    let mut out = vec![e0];
    if r0 <= 1.0 {
        return Ok(out);
    }

    let s_star = n / r0;
    let excess = 1.0 - 1.0 / r0;
    // the E1 formula divides by mu, so the boundary cases go first
    if mu == 0.0 {
        let i_s = (d + sigma) / (d + sigma + r_s) * n * excess;
        out.push(report(params, beta, EquilibriumKind::AsymptomaticFree, State::new(s_star, 0.0, i_s)));
    } else if mu == 1.0 {
        let i_a = (d + sigma) / (d + sigma + r_a) * n * excess;
        out.push(report(params, beta, EquilibriumKind::SymptomaticFree, State::new(s_star, i_a, 0.0)));
    } else {
        let denom = (d + r_a) * (d + r_s) + sigma * (d + mu * r_s) + sigma * r_a * (1.0 - mu);
        let i_a = mu * (d + sigma) * (d + r_s) * n * excess / denom;
        let i_s = (1.0 - mu) * (d + r_a) / (mu * (d + r_s)) * i_a;
        let mut e1 = report(params, beta, EquilibriumKind::Endemic, State::new(s_star, i_a, i_s));
        e1.rh_certificate = endemic_rh_certificate(params).ok();
        out.push(e1);
    }
    Ok(out)
}

/// [`find_equilibria`] for the system with both seasons at rate `beta`.
pub fn classify(params: &ModelParams, beta: f64) -> Result<Vec<EquilibriumReport>, EquilibriumError> {
    find_equilibria(&params.with_constant_beta(beta))
}

#[cfg(test)]
mod tests;
