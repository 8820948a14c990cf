//! Model parameters, the invariant state domain and the right-hand side of
//! the reduced three-compartment system.
//!
//! The recovered class is implicit: `R = N - S - I_a - I_s`. Transmission
//! switches between a low season of length `(1 - theta) * omega` and a high
//! season of length `theta * omega` within every period.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
}

/// Epidemiological and seasonal constants.
///
/// All rates share the time unit of `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Birth rate, equal to the death rate.
    pub d: f64,
    /// Contact reduction factor for symptomatic infectives.
    pub alpha: f64,
    /// Rate of immunity loss.
    pub sigma: f64,
    /// Fraction of new infections that are asymptomatic.
    pub mu: f64,
    pub r_a: f64,
    pub r_s: f64,
    /// Low-season transmission rate.
    pub beta1: f64,
    /// High-season transmission rate.
    pub beta2: f64,
    /// Share of the period taken by the high season.
    pub theta: f64,
    /// Period length.
    pub omega: f64,
    /// Total population.
    #[serde(rename = "N")]
    pub n: f64,
}

impl ModelParams {
    /// Same parameters with both seasons at transmission rate `beta`.
    pub fn with_constant_beta(&self, beta: f64) -> Self {
        Self {
            beta1: beta,
            beta2: beta,
            ..*self
        }
    }

    pub fn is_autonomous(&self) -> bool {
        self.beta1 == self.beta2
    }

    pub fn low_season_len(&self) -> f64 {
        (1.0 - self.theta) * self.omega
    }

    pub fn high_season_len(&self) -> f64 {
        self.theta * self.omega
    }

    pub fn validate(&self) -> ValidationResult {
        validate(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every parameter range. Never fails; violations are collected.
pub fn validate(p: &ModelParams) -> ValidationResult {
    let mut out = ValidationResult::default();
    let mut violate = |field: &'static str, message: String| {
        out.violations.push(Violation { field, message });
    };

    let fields = [
        ("d", p.d),
        ("alpha", p.alpha),
        ("sigma", p.sigma),
        ("mu", p.mu),
        ("r_a", p.r_a),
        ("r_s", p.r_s),
        ("beta1", p.beta1),
        ("beta2", p.beta2),
        ("theta", p.theta),
        ("omega", p.omega),
        ("N", p.n),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            violate(name, format!("{name} is not finite"));
        }
    }
    for (name, v) in [
        ("d", p.d),
        ("sigma", p.sigma),
        ("r_a", p.r_a),
        ("r_s", p.r_s),
        ("beta1", p.beta1),
        ("beta2", p.beta2),
    ] {
        if v < 0.0 {
            violate(name, format!("{name} < 0"));
        }
    }
    if !(0.0..=1.0).contains(&p.mu) {
        violate("mu", "mu ∉ [0,1]".to_string());
    }
    if !(0.0..=1.0).contains(&p.alpha) {
        violate("alpha", "alpha ∉ [0,1]".to_string());
    }
    if !(p.theta > 0.0 && p.theta < 1.0) {
        violate("theta", "theta ∉ (0,1)".to_string());
    }
    if !(p.omega > 0.0) {
        violate("omega", "omega must be > 0".to_string());
    }
    if !(p.n > 0.0) {
        violate("N", "N must be > 0".to_string());
    }
    let no_transmission = p.beta1 == 0.0 && p.beta2 == 0.0;
    // without transmission no formula divides by these sums
    for (field, sum, msg) in [
        ("sigma", p.d + p.sigma, "d + sigma must be > 0"),
        ("r_a", p.d + p.r_a, "d + r_a must be > 0"),
        ("r_s", p.d + p.r_s, "d + r_s must be > 0"),
    ] {
        if !(sum > 0.0) && !no_transmission {
            violate(field, msg.to_string());
        }
    }

    if no_transmission {
        out.warnings.push("degenerate: no transmission".to_string());
    } else if p.beta2 < p.beta1 {
        out.warnings
            .push("beta2 < beta1: high season transmits less than low season".to_string());
    }
    out
}

/// A point `(S, I_a, I_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "Ia")]
    pub i_a: f64,
    #[serde(rename = "Is")]
    pub i_s: f64,
}

/// Time derivative of a [`State`], ordered `(S, I_a, I_s)`.
pub type StateDerivative = [f64; 3];

impl State {
    pub const fn new(s: f64, i_a: f64, i_s: f64) -> Self {
        Self { s, i_a, i_s }
    }

    pub fn disease_free(params: &ModelParams) -> Self {
        Self::new(params.n, 0.0, 0.0)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.s, self.i_a, self.i_s]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn recovered(&self, params: &ModelParams) -> f64 {
        params.n - self.s - self.i_a - self.i_s
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.i_a.is_finite() && self.i_s.is_finite()
    }

    /// Membership in `{S, I_a, I_s >= 0, S + I_a + I_s <= N}` up to `tol`.
    pub fn in_domain(&self, params: &ModelParams, tol: f64) -> bool {
        self.is_finite()
            && self.s >= -tol
            && self.i_a >= -tol
            && self.i_s >= -tol
            && self.s + self.i_a + self.i_s <= params.n + tol
    }

    pub fn l1_distance(&self, other: &State) -> f64 {
        (self.s - other.s).abs() + (self.i_a - other.i_a).abs() + (self.i_s - other.i_s).abs()
    }

    /// Round-off negatives no smaller than `-1e-10 * N` are set to zero.
    pub fn clamped(self, params: &ModelParams) -> Self {
        let floor = -1e-10 * params.n;
        let fix = |v: f64| if v < 0.0 && v >= floor { 0.0 } else { v };
        Self::new(fix(self.s), fix(self.i_a), fix(self.i_s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Season {
    Low,
    High,
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Season::Low => "low",
            Season::High => "high",
        })
    }
}

/// A season together with its half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonLabel {
    pub which: Season,
    pub start: f64,
    pub end: f64,
}

impl SeasonLabel {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// Index of the period containing `t` and the offset of `t` within it.
fn period_phase(params: &ModelParams, t: f64) -> (f64, f64) {
    let m = (t / params.omega).floor();
    let mut phase = t - m * params.omega;
    let mut m = m;
    // guard against phase landing on omega through round-off
    if phase >= params.omega {
        phase -= params.omega;
        m += 1.0;
    }
    if phase < 0.0 {
        phase = 0.0;
    }
    (m, phase)
}

/// The season active at time `t`; a switch instant belongs to the season
/// that begins there.
pub fn season_at(params: &ModelParams, t: f64) -> Result<SeasonLabel, ModelError> {
    if !(t >= 0.0) {
        return Err(ModelError::NegativeTime(t));
    }
    let (m, phase) = period_phase(params, t);
    let period_start = m * params.omega;
    let switch = params.low_season_len();
    Ok(if phase < switch {
        SeasonLabel {
            which: Season::Low,
            start: period_start,
            end: period_start + switch,
        }
    } else {
        SeasonLabel {
            which: Season::High,
            start: period_start + switch,
            end: (m + 1.0) * params.omega,
        }
    })
}

pub fn beta_for(params: &ModelParams, season: Season) -> f64 {
    match season {
        Season::Low => params.beta1,
        Season::High => params.beta2,
    }
}

/// Seasonal transmission rate at time `t`.
pub fn beta_at(params: &ModelParams, t: f64) -> Result<f64, ModelError> {
    season_at(params, t).map(|label| beta_for(params, label.which))
}

/// Right-hand side of the reduced system at fixed transmission rate `beta`.
pub fn rhs(params: &ModelParams, state: &State, beta: f64) -> StateDerivative {
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
    let force = beta * state.s * (state.i_a + alpha * state.i_s);
    [
        (d + sigma) * (n - state.s) - force - sigma * (state.i_a + state.i_s),
        mu * force - (d + r_a) * state.i_a,
        (1.0 - mu) * force - (d + r_s) * state.i_s,
    ]
}

/// Right-hand side of the four-compartment system `(S, I_a, I_s, R)`, with
/// the total population taken as the sum of the components.
pub fn rhs_full4(params: &ModelParams, state4: [f64; 4], beta: f64) -> [f64; 4] {
    let ModelParams {
        d,
        alpha,
        sigma,
        mu,
        r_a,
        r_s,
        ..
    } = *params;
    let [s, i_a, i_s, r] = state4;
    let total = s + i_a + i_s + r;
    let force = beta * s * (i_a + alpha * i_s);
    [
        d * total - d * s - force + sigma * r,
        mu * force - (d + r_a) * i_a,
        (1.0 - mu) * force - (d + r_s) * i_s,
        r_a * i_a + r_s * i_s - (d + sigma) * r,
    ]
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Reference parameter set used across the test suites.
    pub fn p_star(beta: f64) -> ModelParams {
        ModelParams {
            d: 0.02,
            alpha: 0.3,
            sigma: 0.05,
            mu: 0.4,
            r_a: 0.1,
            r_s: 0.2,
            beta1: beta,
            beta2: beta,
            theta: 0.5,
            omega: 1.0,
            n: 100.0,
        }
    }

    #[test]
    fn all_zero_rates_is_degenerate_but_valid() {
        let p = ModelParams {
            d: 0.0,
            alpha: 0.0,
            sigma: 0.0,
            mu: 0.0,
            r_a: 0.0,
            r_s: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            theta: 0.5,
            omega: 1.0,
            n: 1.0,
        };
        let v = validate(&p);
        assert!(v.is_ok());
        assert_eq!(v.warnings, vec!["degenerate: no transmission".to_string()]);

        // with transmission the denominators must be positive
        let v = validate(&ModelParams { beta1: 1.0, ..p });
        let fields: Vec<_> = v.violations.iter().map(|x| x.field).collect();
        assert_eq!(fields, vec!["sigma", "r_a", "r_s"]);
    }

    #[test]
    fn out_of_range_fractions() {
        let v = validate(&ModelParams {
            mu: 1.5,
            ..p_star(0.004)
        });
        assert_eq!(v.violations.len(), 1);
        assert_eq!(v.violations[0].message, "mu ∉ [0,1]");

        let v = validate(&ModelParams {
            theta: 0.0,
            ..p_star(0.004)
        });
        assert_eq!(v.violations[0].message, "theta ∉ (0,1)");
    }

    #[test]
    fn decreasing_season_is_a_warning() {
        let p = ModelParams {
            beta1: 0.005,
            beta2: 0.001,
            ..p_star(0.0)
        };
        let v = validate(&p);
        assert!(v.is_ok());
        assert_eq!(v.warnings.len(), 1);
    }

    #[test]
    fn beta_schedule() {
        let p = ModelParams {
            theta: 0.25,
            omega: 4.0,
            beta1: 1.0,
            beta2: 2.0,
            ..p_star(0.0)
        };
        assert_eq!(beta_at(&p, 2.9).unwrap(), 1.0);
        assert_eq!(beta_at(&p, 3.0).unwrap(), 2.0);
        assert_eq!(beta_at(&p, 7.0).unwrap(), 2.0);
        assert_eq!(beta_at(&p, 0.0).unwrap(), 1.0);
        assert_eq!(beta_at(&p, 4.0).unwrap(), 1.0);
        assert_eq!(beta_at(&p, -0.1), Err(ModelError::NegativeTime(-0.1)));

        let label = season_at(&p, 5.0).unwrap();
        assert_eq!(label.which, Season::Low);
        assert_eq!((label.start, label.end), (4.0, 7.0));
        let label = season_at(&p, 7.0).unwrap();
        assert_eq!(label.which, Season::High);
        assert_eq!((label.start, label.end), (7.0, 8.0));
    }

    #[test]
    fn rhs_examples() {
        let p = p_star(0.004);
        for beta in [0.0, 0.004, 1.0] {
            assert_eq!(rhs(&p, &State::disease_free(&p), beta), [0.0; 3]);
        }
        assert_eq!(rhs(&p, &State::new(0.0, 0.0, 0.0), 0.0), [0.07 * 100.0, 0.0, 0.0]);

        // term-by-term hand evaluation at (50, 10, 5)
        let got = rhs(&p, &State::new(50.0, 10.0, 5.0), 0.004);
        let force = 0.004 * 50.0 * (10.0 + 0.3 * 5.0); // 2.3
        let expected = [
            0.07 * 50.0 - force - 0.05 * 15.0, // 3.5 - 2.3 - 0.75 = 0.45
            0.4 * force - 0.12 * 10.0,         // 0.92 - 1.2 = -0.28
            0.6 * force - 0.22 * 5.0,          // 1.38 - 1.1 = 0.28
        ];
        for (g, e) in got.iter().zip([0.45, -0.28, 0.28]) {
            assert!((g - e).abs() < 1e-13);
        }
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-13);
        }
    }

    #[test]
    fn full_system_examples() {
        let p = p_star(0.004);
        assert_eq!(rhs_full4(&p, [100.0, 0.0, 0.0, 0.0], 0.3), [0.0; 4]);
        let d4 = rhs_full4(&p, [40.0, 20.0, 10.0, 30.0], 0.004);
        assert!(d4.iter().sum::<f64>().abs() < 1e-14 * 100.0);
        let d3 = rhs(&p, &State::new(40.0, 20.0, 10.0), 0.004);
        for i in 0..3 {
            assert!((d3[i] - d4[i]).abs() < 1e-12);
        }
    }
}
