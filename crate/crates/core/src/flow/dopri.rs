//! Dormand-Prince 5(4) embedded Runge-Kutta pair with local extrapolation.

use super::FlowError;

// within a season the field does not depend on time, so the nodes c_i are unused
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const MAX_STEPS: usize = 20_000_000;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn scaled_norm<const D: usize>(v: &[f64; D], y: &[f64; D], tol: &Tolerances) -> f64 {
    let sum: f64 = (0..D)
        .map(|i| {
            let sc = tol.abs_tol + tol.rel_tol * y[i].abs();
            (v[i] / sc).powi(2)
        })
        .sum();
    (sum / D as f64).sqrt()
}

fn initial_step<const D: usize, F>(f: &F, y0: &[f64; D], f0: &[f64; D], tol: &Tolerances, span: f64) -> f64
where
    F: Fn(&[f64; D]) -> [f64; D],
{
    let d0 = scaled_norm(y0, y0, tol);
    let d1 = scaled_norm(f0, y0, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let f1 = f(&y1);
    let diff: [f64; D] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = scaled_norm(&diff, y0, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(tol.max_step).min(span)
}

/// Integrates the autonomous field `f` from local time 0 to `span`, stopping
/// exactly at every entry of `stops` (sorted, inside `(0, span)`).
///
/// `observe(tau, y, is_stop)` is called after every accepted step, including
/// the final one at `span`. `origin` is only used to report absolute times.
pub(crate) fn integrate<const D: usize, F, O>(
    f: &F,
    y0: [f64; D],
    span: f64,
    stops: &[f64],
    tol: &Tolerances,
    origin: f64,
    mut observe: O,
) -> Result<[f64; D], FlowError>
where
    F: Fn(&[f64; D]) -> [f64; D],
    O: FnMut(f64, &[f64; D], bool),
{
    if span <= 0.0 {
        return Ok(y0);
    }
    let mut y = y0;
    let mut t = 0.0;
    let mut k1 = f(&y);
    let mut h = initial_step(f, &y, &k1, tol, span);
    let mut next_stop = 0;
    let mut rejected_last = false;
    let min_step = 1e-13 * span.max(1.0);

    for _ in 0..MAX_STEPS {
        let target = stops.get(next_stop).copied().unwrap_or(span);
        let remaining = target - t;
        let mut hit_target = false;
        let mut step = h.min(tol.max_step);
        if step >= remaining {
            step = remaining;
            hit_target = true;
        } else if step > 0.5 * remaining {
            // split evenly rather than leaving a sliver before the target
            step = 0.5 * remaining;
        }
        if step < min_step && !hit_target {
            return Err(FlowError::StepUnderflow { t: origin + t });
        }

        let k2 = f(&axpy(&y, step, &[(A21, &k1)]));
        let k3 = f(&axpy(&y, step, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(&axpy(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(&axpy(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(&axpy(
            &y,
            step,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ));
        let y_new = axpy(
            &y,
            step,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = f(&y_new);
        let err_vec = axpy(
            &[0.0; D],
            step,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );
        let scale_ref: [f64; D] = std::array::from_fn(|i| y[i].abs().max(y_new[i].abs()));
        let err = scaled_norm(&err_vec, &scale_ref, tol);

        if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
            h = step * MIN_FACTOR;
            rejected_last = true;
            if h < min_step {
                return Err(FlowError::StepUnderflow { t: origin + t });
            }
            continue;
        }

        if err <= 1.0 {
            t = if hit_target { target } else { t + step };
            y = y_new;
            k1 = k7;
            let is_stop = hit_target && next_stop < stops.len();
            observe(t, &y, is_stop || t == span);
            if hit_target {
                if next_stop < stops.len() {
                    next_stop += 1;
                } else {
                    return Ok(y);
                }
            }
            let mut factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if rejected_last {
                factor = factor.min(1.0);
            }
            rejected_last = false;
            // a step shortened to land on a target keeps the earlier proposal
            h = if step < h { (step * factor).max(h) } else { step * factor };
        } else {
            let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            h = step * factor;
            rejected_last = true;
            if h < min_step {
                return Err(FlowError::StepUnderflow { t: origin + t });
            }
        }
    }
    Err(FlowError::TooManySteps { t: origin + t })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_step: 1.0,
        }
    }

    #[test]
    fn exponential_decay() {
        let f = |y: &[f64; 1]| [-0.7 * y[0]];
        let y = integrate(&f, [2.0], 3.0, &[], &tol(), 0.0, |_, _, _| {}).unwrap();
        assert!((y[0] - 2.0 * (-2.1f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_hits_stops() {
        let f = |y: &[f64; 2]| [y[1], -y[0]];
        let stops = [0.5, 1.0, 2.5];
        let mut seen = Vec::new();
        let y = integrate(&f, [1.0, 0.0], 3.0, &stops, &tol(), 0.0, |t, y, is_stop| {
            if is_stop {
                seen.push((t, y[0]));
            }
        })
        .unwrap();
        assert_eq!(seen.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0.5, 1.0, 2.5, 3.0]);
        for (t, x) in seen {
            assert!((x - t.cos()).abs() < 1e-10);
        }
        assert!((y[0] - 3.0f64.cos()).abs() < 1e-10);
    }
}
