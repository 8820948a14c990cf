//! Random parameter sets and initial states for the verification suites.

use crate::model::{ModelParams, State};
use crate::reproduction::{r0_bisection, ReproductionError};
use rand::Rng;

/// A point drawn uniformly from `{S, I_a, I_s >= 0, S + I_a + I_s <= N}`
/// using sorted uniform spacings.
pub fn uniform_in_domain<R: Rng + ?Sized>(rng: &mut R, n: f64) -> State {
    let mut u = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
    u.sort_by(|a, b| a.partial_cmp(b).expect("uniform draws are finite"));
    State::new(u[0] * n, (u[1] - u[0]) * n, (u[2] - u[1]) * n)
}

/// Like [`uniform_in_domain`] but with both infective classes bounded away
/// from zero by `floor * N`.
pub fn uniform_interior<R: Rng + ?Sized>(rng: &mut R, n: f64, floor: f64) -> State {
    loop {
        let s = uniform_in_domain(rng, n);
        if s.i_a > floor * n && s.i_s > floor * n {
            return s;
        }
    }
}

/// Ranges for randomly generated parameter sets.
#[derive(Debug, Clone, Copy)]
pub struct ParamRanges {
    pub d: (f64, f64),
    pub sigma: (f64, f64),
    pub mu: (f64, f64),
    pub alpha: (f64, f64),
    pub recovery: (f64, f64),
    pub theta: (f64, f64),
    pub omega: (f64, f64),
    pub n: (f64, f64),
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            d: (0.005, 0.1),
            sigma: (0.01, 0.5),
            mu: (0.05, 0.95),
            alpha: (0.05, 1.0),
            recovery: (0.05, 1.0),
            theta: (0.1, 0.9),
            omega: (0.5, 5.0),
            n: (10.0, 1000.0),
        }
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

impl ParamRanges {
    /// A seasonal parameter set with `beta N` of the order of the recovery rates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelParams {
        let d = draw(rng, self.d);
        let r_a = draw(rng, self.recovery);
        let r_s = draw(rng, self.recovery);
        let n = draw(rng, self.n);
        let scale = (d + 0.5 * (r_a + r_s)) / n;
        let beta1 = rng.gen_range(0.0..2.0) * scale;
        let beta2 = beta1 + rng.gen_range(0.0..2.0) * scale;
        ModelParams {
            d,
            alpha: draw(rng, self.alpha),
            sigma: draw(rng, self.sigma),
            mu: draw(rng, self.mu),
            r_a,
            r_s,
            beta1,
            beta2,
            theta: draw(rng, self.theta),
            omega: draw(rng, self.omega),
            n,
        }
    }

    /// As [`ParamRanges::sample`] with `beta1 = beta2`.
    pub fn sample_autonomous<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelParams {
        let p = self.sample(rng);
        p.with_constant_beta(p.beta2)
    }
}

/// Rescales both transmission rates so that `R0 = target`.
///
/// `R0` is homogeneous of degree one in `(beta1, beta2)`.
pub fn with_r0(params: &ModelParams, target: f64) -> Result<ModelParams, ReproductionError> {
    let r0 = r0_bisection(params)?;
    if r0 == 0.0 {
        return Ok(*params);
    }
    let k = target / r0;
    Ok(ModelParams {
        beta1: params.beta1 * k,
        beta2: params.beta2 * k,
        ..*params
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn domain_samples_are_inside_and_cover_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mean = [0.0; 3];
        let count = 20_000;
        for _ in 0..count {
            let s = uniform_in_domain(&mut rng, 50.0);
            assert!(s.in_domain(&ModelParams { n: 50.0, ..test_params() }, 0.0));
            mean[0] += s.s / count as f64;
            mean[1] += s.i_a / count as f64;
            mean[2] += s.i_s / count as f64;
        }
        // uniform on the 3-simplex scaled by N has coordinate means N / 4
        for m in mean {
            assert!((m - 12.5).abs() < 0.3, "{m}");
        }
    }

    #[test]
    fn rescaling_hits_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = ParamRanges::default().sample(&mut rng);
        let q = with_r0(&p, 1.7).unwrap();
        assert!((r0_bisection(&q).unwrap() - 1.7).abs() < 1e-9);
        assert!(q.validate().is_ok());
    }

    fn test_params() -> ModelParams {
        ModelParams {
            d: 0.02,
            alpha: 0.3,
            sigma: 0.05,
            mu: 0.4,
            r_a: 0.1,
            r_s: 0.2,
            beta1: 0.004,
            beta2: 0.004,
            theta: 0.5,
            omega: 1.0,
            n: 100.0,
        }
    }
}
