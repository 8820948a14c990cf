//! Numerical verification of the qualitative results: extinction below the
//! threshold, persistence above it, Lyapunov decrease and global stability of
//! the endemic state, plus threshold sweeps.
//!
//! Every check is a finite-horizon experiment and reports what it saw; a
//! `Confirmed` verdict is evidence, not proof.

pub mod lyapunov;
pub mod sampling;

pub use lyapunov::{lyapunov_l, lyapunov_v1_equal_rates, lyapunov_v_mu0, EqualRates, LyapunovEval, ShiftedMu0};

use crate::equilibria::{find_equilibria, EquilibriumError, EquilibriumKind};
use crate::flow::{for_each_step, state_at, FlowError, FlowSettings};
use crate::model::{ModelParams, State};
use crate::reproduction::{r0_bisection, r0_threshold, ReproductionError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sampling::{uniform_in_domain, uniform_interior};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Reproduction(#[from] ReproductionError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

/// Names of the checks the harness can run.
pub const CHECK_IDS: [&str; 4] = ["extinction", "persistence", "endemic-stability", "near-equal-rates"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Confirmed,
    Violated,
    Inconclusive,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Confirmed => "confirmed",
            Outcome::Violated => "violated",
            Outcome::Inconclusive => "inconclusive",
        })
    }
}

/// Quantities that decide whether a result applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypotheses {
    pub r0: f64,
    /// `rho(Phi_{F-V}(omega))`.
    pub rho: f64,
    pub mu_interior: bool,
    pub alpha_beta1_positive: bool,
    pub rate_gap: f64,
    pub autonomous: bool,
}

impl Hypotheses {
    pub fn of(params: &ModelParams) -> Result<Self, AnalysisError> {
        Ok(Self {
            r0: r0_bisection(params)?,
            rho: r0_threshold(params)?.0,
            mu_interior: params.mu > 0.0 && params.mu < 1.0,
            alpha_beta1_positive: params.alpha * params.beta1 > 0.0,
            rate_gap: (params.r_s - params.r_a).abs(),
            autonomous: params.is_autonomous(),
        })
    }
}

/// Where a check failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub params: ModelParams,
    pub p0: State,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictReport {
    pub theorem_id: &'static str,
    pub hypothesis_values: Hypotheses,
    pub params: ModelParams,
    pub outcome: Outcome,
    /// Named worst-case margins, in a fixed order.
    pub evidence: Vec<(&'static str, f64)>,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub seed: Option<u64>,
}

impl VerdictReport {
    pub fn evidence(&self, key: &str) -> Option<f64> {
        self.evidence.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

/// Initial points for a simulation check.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialPoints {
    Given(Vec<State>),
    /// Uniform in the invariant simplex; interior draws keep both infective
    /// classes above `1e-3 N`.
    Random { count: usize, seed: u64 },
}

impl InitialPoints {
    fn resolve(&self, params: &ModelParams, interior: bool) -> (Vec<State>, Option<u64>) {
        match self {
            InitialPoints::Given(v) => (v.clone(), None),
            InitialPoints::Random { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let points = (0..*count)
                    .map(|_| {
                        if interior {
                            uniform_interior(&mut rng, params.n, 1e-3)
                        } else {
                            uniform_in_domain(&mut rng, params.n)
                        }
                    })
                    .collect();
                (points, Some(*seed))
            }
        }
    }
}

/// Upper bound on every adaptive horizon.
pub const HORIZON_CAP: f64 = 1e5;

/// Flow settings for long runs: steps may span a whole season.
pub fn long_run_settings(params: &ModelParams) -> FlowSettings {
    FlowSettings {
        max_step: Some(params.omega),
        ..FlowSettings::default()
    }
}

/// Time for `rate^{t/omega}` to fall below `1e-6`, padded by half, at least ten periods.
fn envelope_horizon(params: &ModelParams, per_period: f64) -> f64 {
    let periods = (1e-6f64).ln() / per_period.ln();
    (1.5 * periods * params.omega).max(10.0 * params.omega).min(HORIZON_CAP)
}

/// Adaptive extinction horizon: the slower of the infective decay `rho` and
/// the susceptible relaxation `e^{-(d + sigma) omega}` per period.
pub fn extinction_horizon(params: &ModelParams, rho: f64) -> f64 {
    let relax = (-(params.d + params.sigma) * params.omega).exp();
    envelope_horizon(params, rho.max(relax))
}

/// Default persistence horizon: long enough for the slowest linear rate to
/// act many times and for infection to regrow by `e^30` from a transient dip.
pub fn persistence_horizon(params: &ModelParams, rho: f64) -> f64 {
    let slow = params.d + params.sigma.min(params.r_a).min(params.r_s);
    let regrow = if rho > 1.0 {
        60.0 * params.omega / rho.ln()
    } else {
        HORIZON_CAP
    };
    (100.0 * params.omega).max(100.0 / slow).max(regrow).min(HORIZON_CAP)
}

/// Global extinction below the threshold: every start in the simplex ends
/// within `1e-4 N` (in l1) of `(N, 0, 0)`.
pub fn check_extinction(
    params: &ModelParams,
    points: &InitialPoints,
    horizon: Option<f64>,
    settings: &FlowSettings,
) -> Result<VerdictReport, AnalysisError> {
    let hyp = Hypotheses::of(params)?;
    let subcritical = if hyp.autonomous {
        hyp.r0 <= 1.0
    } else {
        hyp.r0 < 1.0
    };
    if !subcritical {
        return Err(AnalysisError::Precondition(format!("needs R0 < 1, got {}", hyp.r0)));
    }
    let adaptive = extinction_horizon(params, hyp.rho);
    let h = horizon.unwrap_or(adaptive);
    let (starts, seed) = points.resolve(params, false);
    let e0 = State::disease_free(params);
    let tol = 1e-4 * params.n;
    let mut worst = 0.0f64;
    let mut witness = None;
    for p0 in &starts {
        let end = state_at(params, p0, h, settings)?;
        let dist = end.l1_distance(&e0);
        if dist > worst {
            worst = dist;
            if dist > tol {
                witness = Some(Witness {
                    params: *params,
                    p0: *p0,
                    t: h,
                });
            }
        }
    }
    let capped = horizon.is_none() && adaptive >= HORIZON_CAP;
    let outcome = match (witness.is_some(), capped) {
        (false, _) => Outcome::Confirmed,
        // the envelope did not fit under the cap, so a miss is not decisive
        (true, true) => Outcome::Inconclusive,
        (true, false) => Outcome::Violated,
    };
    Ok(VerdictReport {
        theorem_id: "extinction",
        hypothesis_values: hyp,
        params: *params,
        outcome,
        evidence: vec![("horizon", h), ("max_terminal_distance", worst), ("tolerance", tol)],
        witness,
        samples: starts.len(),
        seed,
    })
}

/// Uniform persistence above the threshold: both infective classes stay above
/// `1e-6 N` over the late window `[h/2, h]`.
pub fn check_persistence(
    params: &ModelParams,
    points: &InitialPoints,
    horizon: Option<f64>,
    settings: &FlowSettings,
) -> Result<VerdictReport, AnalysisError> {
    let hyp = Hypotheses::of(params)?;
    if !(hyp.r0 > 1.0) {
        return Err(AnalysisError::Precondition(format!("needs R0 > 1, got {}", hyp.r0)));
    }
    if !hyp.mu_interior {
        return Err(AnalysisError::Precondition(format!("needs 0 < mu < 1, got {}", params.mu)));
    }
    if !hyp.alpha_beta1_positive {
        return Err(AnalysisError::Precondition("needs alpha beta1 > 0".into()));
    }
    let (starts, seed) = points.resolve(params, true);
    if let Some(bad) = starts.iter().find(|p| !(p.i_a + p.i_s > 0.0)) {
        return Err(AnalysisError::Precondition(format!(
            "start {bad:?} has no infectives and stays on the boundary"
        )));
    }
    let h = horizon.unwrap_or_else(|| persistence_horizon(params, hyp.rho));
    let floor = 1e-6 * params.n;
    let mut delta_hat = f64::INFINITY;
    let mut witness = None;
    for p0 in &starts {
        let mut low = (f64::INFINITY, h);
        for_each_step(params, p0, h, settings, |t, s| {
            if t >= 0.5 * h {
                let m = s.i_a.min(s.i_s);
                if m < low.0 {
                    low = (m, t);
                }
            }
        })?;
        if low.0 < delta_hat {
            delta_hat = low.0;
            if low.0 <= floor {
                witness = Some(Witness {
                    params: *params,
                    p0: *p0,
                    t: low.1,
                });
            }
        }
    }
    Ok(VerdictReport {
        theorem_id: "persistence",
        hypothesis_values: hyp,
        params: *params,
        outcome: if witness.is_some() {
            Outcome::Violated
        } else {
            Outcome::Confirmed
        },
        evidence: vec![("horizon", h), ("delta_hat", delta_hat), ("floor", floor)],
        witness,
        samples: starts.len(),
        seed,
    })
}

/// Default bound on `|r_s - r_a|` for the near-equal-rates result.
pub fn near_equal_rates_bound(params: &ModelParams) -> f64 {
    0.1 * (params.d + params.r_a)
}

/// Horizon for convergence to a stable equilibrium with spectral gap `gap`.
pub fn convergence_horizon(gap: f64) -> f64 {
    if gap > 0.0 {
        (40.0 / gap).min(HORIZON_CAP)
    } else {
        HORIZON_CAP
    }
}

fn endemic_state(params: &ModelParams) -> Result<(State, f64), AnalysisError> {
    let e1 = find_equilibria(params)?
        .into_iter()
        .find(|e| e.kind == EquilibriumKind::Endemic)
        .ok_or_else(|| AnalysisError::Precondition("no endemic equilibrium".into()))?;
    let gap = e1.eigenvalues.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
    Ok((e1.state, gap))
}

/// Global stability of the endemic state when recovery rates are close:
/// `r_s = r_a + delta_r`, every interior start ends within `1e-4 N` of the
/// recomputed endemic state. With `delta_r = 0` this is the equal-rates case.
/// Outside `|delta_r| <= bound` the result is silent and the verdict is at
/// most `Inconclusive`.
pub fn check_near_equal_rates(
    params: &ModelParams,
    delta_r: f64,
    bound: Option<f64>,
    points: &InitialPoints,
    settings: &FlowSettings,
) -> Result<VerdictReport, AnalysisError> {
    if !params.is_autonomous() {
        return Err(AnalysisError::Precondition("needs beta1 = beta2".into()));
    }
    let perturbed = ModelParams {
        r_s: params.r_a + delta_r,
        ..*params
    };
    if !(perturbed.r_s >= 0.0) {
        return Err(AnalysisError::Precondition(format!("r_a + delta_r = {} < 0", perturbed.r_s)));
    }
    let hyp = Hypotheses::of(&perturbed)?;
    if !(hyp.r0 > 1.0) {
        return Err(AnalysisError::Precondition(format!("needs R0 > 1, got {}", hyp.r0)));
    }
    if !hyp.mu_interior {
        return Err(AnalysisError::Precondition(format!("needs 0 < mu < 1, got {}", params.mu)));
    }
    let bound = bound.unwrap_or_else(|| near_equal_rates_bound(params));
    let in_scope = delta_r.abs() <= bound;
    let (e1, gap) = endemic_state(&perturbed)?;
    let h = convergence_horizon(gap);
    let (starts, seed) = points.resolve(&perturbed, true);
    let tol = 1e-4 * params.n;
    let mut worst = 0.0f64;
    let mut witness = None;
    for p0 in &starts {
        let end = state_at(&perturbed, p0, h, settings)?;
        let dist = end.l1_distance(&e1);
        if dist > worst {
            worst = dist;
            if dist > tol {
                witness = Some(Witness {
                    params: perturbed,
                    p0: *p0,
                    t: h,
                });
            }
        }
    }
    let outcome = match (witness.is_some(), in_scope) {
        (_, false) => Outcome::Inconclusive,
        (false, true) => Outcome::Confirmed,
        (true, true) if h >= HORIZON_CAP => Outcome::Inconclusive,
        (true, true) => Outcome::Violated,
    };
    Ok(VerdictReport {
        theorem_id: if delta_r == 0.0 {
            "equal-rates"
        } else {
            "near-equal-rates"
        },
        hypothesis_values: hyp,
        params: perturbed,
        outcome,
        evidence: vec![
            ("horizon", h),
            ("spectral_gap", gap),
            ("max_terminal_distance", worst),
            ("tolerance", tol),
            ("delta_r_bound", bound),
        ],
        witness,
        samples: starts.len(),
        seed,
    })
}

/// Local stability of the endemic state: closed-form residual, Routh-Hurwitz
/// certificate and its agreement with the Jacobian spectrum.
pub fn check_endemic_stability(params: &ModelParams) -> Result<VerdictReport, AnalysisError> {
    let hyp = Hypotheses::of(params)?;
    if !(hyp.r0 > 1.0) || !hyp.mu_interior {
        return Err(AnalysisError::Precondition("needs R0 > 1 and 0 < mu < 1".into()));
    }
    let e1 = find_equilibria(params)?
        .into_iter()
        .find(|e| e.kind == EquilibriumKind::Endemic)
        .ok_or_else(|| AnalysisError::Precondition("no endemic equilibrium".into()))?;
    let cert = e1
        .rh_certificate
        .ok_or_else(|| AnalysisError::Precondition("certificate unavailable".into()))?;
    let residual = e1.residual(params);
    let residual_ok = residual <= 1e-10 * (params.d + params.sigma) * params.n;
    let max_re = e1.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let certified = cert.verdict == crate::smallmat::StabilityVerdict::AllNegative;
    let agree = certified == (max_re < 0.0);
    let positive_c = cert.c0 > 0.0 && cert.c1 > 0.0 && cert.c2 > 0.0;
    let outcome = if residual_ok && certified && agree && positive_c {
        Outcome::Confirmed
    } else if cert.verdict == crate::smallmat::StabilityVerdict::Marginal {
        Outcome::Inconclusive
    } else {
        Outcome::Violated
    };
    Ok(VerdictReport {
        theorem_id: "endemic-stability",
        hypothesis_values: hyp,
        params: *params,
        outcome,
        evidence: vec![
            ("residual", residual),
            ("xi0", cert.xi0),
            ("xi2", cert.xi2),
            ("hurwitz", cert.hurwitz),
            ("identity_error", cert.identity_error),
            ("max_real_eigenvalue", max_re),
        ],
        witness: (outcome == Outcome::Violated).then_some(Witness {
            params: *params,
            p0: e1.state,
            t: 0.0,
        }),
        samples: 1,
        seed: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Theta,
    Beta2,
    Mu,
    Alpha,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theta" => Ok(SweepAxis::Theta),
            "beta2" => Ok(SweepAxis::Beta2),
            "mu" => Ok(SweepAxis::Mu),
            "alpha" => Ok(SweepAxis::Alpha),
            other => Err(format!("unknown axis {other:?}; expected theta, beta2, mu or alpha")),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Theta => "theta",
            SweepAxis::Beta2 => "beta2",
            SweepAxis::Mu => "mu",
            SweepAxis::Alpha => "alpha",
        }
    }

    pub fn apply(&self, base: &ModelParams, value: f64) -> ModelParams {
        let mut p = *base;
        match self {
            SweepAxis::Theta => p.theta = value,
            SweepAxis::Beta2 => p.beta2 = value,
            SweepAxis::Mu => p.mu = value,
            SweepAxis::Alpha => p.alpha = value,
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub rho: f64,
    pub r0: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Grid values that were rejected, with the reason.
    pub skipped: Vec<(f64, String)>,
}

impl SweepTable {
    /// Whether `R0` never decreases along the sampled grid. An observation, not a claim.
    pub fn r0_nondecreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].r0 >= w[0].r0 * (1.0 - 1e-12))
    }

    pub fn r0_strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].r0 > w[0].r0)
    }
}

/// `rho(Phi)` and `R0` along one parameter axis, rows sorted by axis value.
pub fn threshold_sweep(base: &ModelParams, axis: SweepAxis, grid: &[f64]) -> SweepTable {
    let mut values: Vec<f64> = grid.to_vec();
    values.sort_by(|a, b| a.total_cmp(b));
    let mut table = SweepTable::default();
    for value in values {
        let p = axis.apply(base, value);
        let check = p.validate();
        if !check.is_ok() {
            let why = check
                .violations
                .iter()
                .map(|v| format!("{}: {}", v.field, v.message))
                .collect::<Vec<_>>()
                .join("; ");
            table.skipped.push((value, why));
            continue;
        }
        match (r0_threshold(&p), r0_bisection(&p)) {
            (Ok((rho, _)), Ok(r0)) => table.rows.push(SweepRow { value, rho, r0 }),
            (Err(e), _) | (_, Err(e)) => table.skipped.push((value, e.to_string())),
        }
    }
    table
}
