use super::*;
use crate::analysis::sampling::ParamRanges;
use crate::model::tests::p_star;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn endemic(p: &ModelParams) -> EquilibriumReport {
    find_equilibria(p)
        .unwrap()
        .into_iter()
        .find(|e| e.kind != EquilibriumKind::DiseaseFree)
        .expect("no endemic state")
}

#[test]
fn p_star_endemic_state() {
    let p = p_star(0.004);
    let e1 = endemic(&p);
    assert_eq!(e1.kind, EquilibriumKind::Endemic);
    let want = [60.2189781, 7.1235783, 5.8283823];
    let got = e1.state.to_array();
    for k in 0..3 {
        assert!((got[k] - want[k]).abs() < 1e-6, "{got:?}");
    }
    assert_eq!(e1.stability, Stability::Stable);
    let cert = e1.rh_certificate.unwrap();
    assert_eq!(cert.verdict, StabilityVerdict::AllNegative);
    assert!(cert.identity_error < 1e-10);
    assert!(e1.residual(&p) <= 1e-10 * (p.d + p.sigma) * p.n);
}

#[test]
fn disease_free_classification() {
    let below = find_equilibria(&p_star(0.002)).unwrap();
    assert_eq!(below.len(), 1);
    assert_eq!(below[0].stability, Stability::Stable);
    assert_eq!(below[0].state, State::new(100.0, 0.0, 0.0));

    let above = find_equilibria(&p_star(0.004)).unwrap();
    assert_eq!(above[0].stability, Stability::Saddle);
    let positive = above[0].eigenvalues.iter().filter(|z| z.re > 0.0).count();
    assert_eq!(positive, 1);

    // R0 = 1 exactly: beta N = 1 / (mu / (d + r_a) + alpha (1 - mu) / (d + r_s))
    let p = p_star(1.0);
    let beta = 1.0 / (p.n * (0.4 / 0.12 + 0.3 * 0.6 / 0.22));
    let at = find_equilibria(&p.with_constant_beta(beta)).unwrap();
    assert_eq!(at.len(), 1);
    assert_eq!(at[0].stability, Stability::SaddleNode);
}

#[test]
fn boundary_equilibria() {
    let p = ModelParams {
        mu: 0.0,
        ..p_star(0.008)
    };
    let e2 = endemic(&p);
    assert_eq!(e2.kind, EquilibriumKind::AsymptomaticFree);
    assert_eq!(e2.state.i_a, 0.0);
    assert!(e2.residual(&p) <= 1e-10 * (p.d + p.sigma) * p.n);
    assert_eq!(e2.stability, Stability::Stable);

    let p = ModelParams {
        mu: 1.0,
        ..p_star(0.004)
    };
    let e3 = endemic(&p);
    assert_eq!(e3.kind, EquilibriumKind::SymptomaticFree);
    assert_eq!(e3.state.i_s, 0.0);
    assert!(e3.residual(&p) <= 1e-10 * (p.d + p.sigma) * p.n);
    let all = find_equilibria(&p).unwrap();
    assert_eq!(all[0].stability, Stability::Saddle);
    assert_eq!(e3.stability, Stability::Stable);
}

#[test]
fn seasonal_parameters_are_rejected() {
    let p = ModelParams {
        beta2: 0.005,
        ..p_star(0.004)
    };
    assert!(matches!(find_equilibria(&p), Err(EquilibriumError::Seasonal { .. })));
    assert_eq!(classify(&p, 0.004).unwrap().len(), 2);
}

#[test]
fn certificate_is_marginal_near_threshold() {
    let p = p_star(1.0);
    let critical = 1.0 / (p.n * (0.4 / 0.12 + 0.3 * 0.6 / 0.22));
    let p = p.with_constant_beta(critical * (1.0 + 1e-9));
    let cert = endemic_rh_certificate(&p).unwrap();
    assert!(cert.xi0.abs() < 1e-9);
    assert_eq!(cert.verdict, StabilityVerdict::Marginal);
    assert!(matches!(
        endemic_rh_certificate(&p_star(0.002)),
        Err(EquilibriumError::NotSupercritical(_))
    ));
}

#[test]
fn dfe_charpoly_examples() {
    let p = p_star(0.0);
    let f = dfe_charpoly(&p, 0.0);
    assert!((f.a0 - 0.12 * 0.22).abs() < 1e-15);
    assert!((f.a1 + 0.34).abs() < 1e-15);
    assert!(dfe_charpoly(&p, 0.004).a0 < 0.0);
    let critical = 1.0 / (p.n * (0.4 / 0.12 + 0.3 * 0.6 / 0.22));
    assert!(dfe_charpoly(&p, critical).a0.abs() < 1e-12);
    let e0 = find_equilibria(&p_star(0.004)).unwrap()[0].eigenvalues;
    assert!(e0.iter().any(|z| (z.re + 0.07).abs() < 1e-12 && z.im == 0.0));
}

#[test]
fn dfe_charpoly_matches_closed_form() {
    for beta in [0.0, 0.002, 0.004, 0.01] {
        let p = p_star(beta);
        let f = dfe_charpoly(&p, beta);
        assert!(f.a0_relative_error(&p) < 1e-10, "{f:?}");
        let v = crate::reproduction::LinearizationBlocks::new(&p);
        let trace = (v.f(crate::model::Season::Low) - v.v).trace();
        assert!((f.a1 - trace).abs() < 1e-12);
    }
}

#[test]
fn transformed_r0_and_state_agree_with_original() {
    let p = p_star(0.004);
    let tp = TransformedParams::new(&p, 0.004);
    assert!((tp.r0_hat - 1.6606060606).abs() < 1e-9);
    let hat = tp.endemic_state();
    let mapped = TransformedParams::to_rescaled(&p, 0.004, &endemic(&p).state);
    for k in 0..3 {
        assert!((hat[k] - mapped[k]).abs() < 1e-12 * hat[k].abs().max(1.0));
    }
    assert!((hat[0] - tp.r / (1.0 + tp.alpha * tp.mu1 * tp.r)).abs() < 1e-12);
}

fn supercritical(seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let p = ParamRanges::default().sample_autonomous(&mut rng);
        if closed_form_r0(&p, p.beta1) > 1.01 {
            return p;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_matches_finite_differences(seed in any::<u64>(), u in 0.1f64..0.9) {
        let p = supercritical(seed);
        let x = State::new(u * p.n * 0.8, 0.1 * p.n * (1.0 - u), 0.05 * p.n);
        let j = jacobian(&p, &x, p.beta1);
        let h = 1e-6 * p.n;
        for col in 0..3 {
            let mut up = x.to_array();
            let mut dn = x.to_array();
            up[col] += h;
            dn[col] -= h;
            let fu = rhs(&p, &State::from_array(up), p.beta1);
            let fd = rhs(&p, &State::from_array(dn), p.beta1);
            for row in 0..3 {
                let fd_val = (fu[row] - fd[row]) / (2.0 * h);
                prop_assert!((j.0[row][col] - fd_val).abs() <= 1e-6 * (1.0 + j.norm1()));
            }
        }
    }

    #[test]
    fn endemic_residual_and_certificate(seed in any::<u64>()) {
        let p = supercritical(seed);
        let e1 = endemic(&p);
        prop_assert!(e1.residual(&p) <= 1e-10 * (p.d + p.sigma) * p.n);
        prop_assert!(e1.state.in_domain(&p, 0.0));
        let cert = e1.rh_certificate.unwrap();
        prop_assert!(cert.identity_error <= 1e-10);
        prop_assert!(cert.xi0 > 0.0 && cert.xi1 > 0.0 && cert.xi2 > 0.0 && cert.hurwitz > 0.0);
        prop_assert_eq!(e1.stability, Stability::Stable);
        prop_assert!(cert.c0 > 0.0 && cert.c1 > 0.0 && cert.c2 > 0.0);
        let ratio = (1.0 - p.mu) * (p.d + p.r_a) / (p.mu * (p.d + p.r_s));
        prop_assert_eq!(e1.state.i_s, ratio * e1.state.i_a);
        let all_negative = e1.eigenvalues.iter().all(|z| z.re < -1e-8);
        prop_assert_eq!(all_negative, cert.verdict == StabilityVerdict::AllNegative);
        prop_assert!((cert.transformed.r0_hat - closed_form_r0(&p, p.beta1)).abs() <= 1e-12 * cert.transformed.r0_hat);
    }

    #[test]
    fn xi_are_rescaled_charpoly(seed in any::<u64>()) {
        let p = supercritical(seed);
        let e1 = endemic(&p);
        let c = jacobian(&p, &e1.state, p.beta1).char_poly();
        let cert = e1.rh_certificate.unwrap();
        let k = p.d + p.r_s;
        prop_assert!((cert.xi2 - c.c2 / k).abs() <= 1e-10 * cert.xi2);
        prop_assert!((cert.xi1 - c.c1 / (k * k)).abs() <= 1e-9 * cert.xi1.max(cert.xi2 * cert.xi2));
        prop_assert!((cert.xi0 - c.c0 / (k * k * k)).abs() <= 1e-9 * cert.xi2.powi(3).max(cert.xi0));
        let tp = cert.transformed;
        let hat = tp.jacobian(tp.endemic_state()).char_poly();
        prop_assert!((hat.c2 - cert.xi2).abs() <= 1e-10 * cert.xi2);
    }
}
