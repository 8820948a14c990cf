use super::*;
use crate::analysis::sampling::{uniform_in_domain, ParamRanges};
use crate::equilibria::find_equilibria;
use crate::model::tests::p_star;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn seasonal() -> ModelParams {
    ModelParams {
        beta1: 0.003,
        beta2: 0.006,
        theta: 0.3,
        omega: 2.0,
        ..p_star(0.0)
    }
}

#[test]
fn disease_free_start_stays_put() {
    let p = seasonal();
    let e0 = State::disease_free(&p);
    let traj = solve(&p, &e0, 10.0, &FlowSettings::default()).unwrap();
    assert!(traj.samples.iter().all(|s| s.state == e0));
    assert_eq!(period_map(&p, &e0, &FlowSettings::default()).unwrap(), e0);
    let orbit = iterate_period_map(&p, &e0, 5, &FlowSettings::default()).unwrap();
    assert_eq!(orbit, vec![e0; 5]);
}

#[test]
fn rejects_bad_inputs() {
    let p = seasonal();
    let s = FlowSettings::default();
    assert!(matches!(
        solve(&p, &State::new(90.0, 20.0, 0.0), 1.0, &s),
        Err(FlowError::OutsideDomain(_))
    ));
    assert!(matches!(
        solve(&p, &State::new(90.0, 5.0, 0.0), 0.0, &s),
        Err(FlowError::BadEndTime(_))
    ));
    let loose = FlowSettings {
        abs_tol: 0.1,
        ..s
    };
    assert!(matches!(
        solve(&p, &State::new(90.0, 5.0, 0.0), 1.0, &loose),
        Err(FlowError::BadSettings(_))
    ));
}

#[test]
fn switch_times_are_samples_and_times_increase() {
    let p = seasonal();
    let traj = solve_with_stride(&p, &State::new(90.0, 5.0, 5.0), 7.0, 0.25, &FlowSettings::default()).unwrap();
    let times: Vec<f64> = traj.times().collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    for m in 0..4 {
        let start = m as f64 * p.omega;
        let switch = start + p.low_season_len();
        for t in [start, switch] {
            if t <= 7.0 {
                assert!(times.contains(&t), "missing switch time {t}");
            }
        }
    }
    assert_eq!(*times.last().unwrap(), 7.0);
    // the switch instant belongs to the season that starts there
    let at_switch = traj.samples.iter().find(|s| s.t == 1.4).unwrap();
    assert_eq!(at_switch.season.which, Season::High);
    for s in &traj.samples {
        assert!(s.season.contains(s.t));
    }
}

#[test]
fn constant_transmission_matches_autonomous_flow() {
    let p = p_star(0.004);
    let p0 = State::new(90.0, 5.0, 5.0);
    let settings = FlowSettings::default();
    let traj = solve_with_stride(&p, &p0, 10.0 * p.omega, p.omega, &settings).unwrap();
    for sample in traj.samples.iter().filter(|s| s.season.which == Season::Low && s.t > 0.0) {
        let direct = flow_autonomous(&p, 0.004, &p0, sample.t, &settings).unwrap();
        assert!(sample.state.l1_distance(&direct) <= 1e-8, "t = {}", sample.t);
    }
    let one = period_map(&p, &p0, &settings).unwrap();
    let direct = flow_autonomous(&p, 0.004, &p0, p.omega, &settings).unwrap();
    assert!(one.l1_distance(&direct) <= 1e-9);
}

#[test]
fn converges_to_closed_form_endemic_state() {
    let p = p_star(0.004);
    let e1 = find_equilibria(&p).unwrap().into_iter().find(|e| e.state.i_a > 0.0).unwrap().state;
    let end = state_at(&p, &State::new(90.0, 5.0, 5.0), 2000.0, &FlowSettings::default()).unwrap();
    assert!(end.l1_distance(&e1) <= 1e-4, "{end:?} vs {e1:?}");
}

#[test]
fn period_map_composition_matches_solve() {
    let p = seasonal();
    let p0 = State::new(70.0, 10.0, 3.0);
    let s = FlowSettings::default();
    let twice = period_map(&p, &period_map(&p, &p0, &s).unwrap(), &s).unwrap();
    let direct = solve(&p, &p0, 2.0 * p.omega, &s).unwrap().last().state;
    assert!(twice.l1_distance(&direct) <= 1e-9);

    let orbit = iterate_period_map(&p, &p0, 6, &s).unwrap();
    let direct = state_at(&p, &p0, 6.0 * p.omega, &s).unwrap();
    assert!(orbit[5].l1_distance(&direct) <= 1e-8);
}

#[test]
fn majorant_dominates_infectives() {
    let p = seasonal();
    let samples = solve_with_majorant(&p, &State::new(60.0, 8.0, 4.0), 10.0 * p.omega, &FlowSettings::default()).unwrap();
    assert!(samples.len() > 20);
    for s in samples {
        assert!(s.state.i_a <= s.linear[0] + 1e-9 * p.n);
        assert!(s.state.i_s <= s.linear[1] + 1e-9 * p.n);
    }
}

#[test]
fn refinement_changes_little() {
    let p = seasonal();
    let p0 = State::new(80.0, 6.0, 2.0);
    let coarse = FlowSettings {
        max_step: Some(p.omega / 50.0),
        ..FlowSettings::default()
    };
    let fine = FlowSettings {
        max_step: Some(p.omega / 100.0),
        ..coarse
    };
    let a = state_at(&p, &p0, 10.0 * p.omega, &coarse).unwrap();
    let b = state_at(&p, &p0, 10.0 * p.omega, &fine).unwrap();
    assert!(a.l1_distance(&b) <= 1e-8 * p.n);
}

#[test]
fn max_step_never_exceeds_a_season() {
    let p = ModelParams {
        theta: 0.01,
        ..seasonal()
    };
    let s = FlowSettings::default();
    assert_eq!(s.effective_max_step(&p), p.high_season_len());
    solve(&p, &State::new(80.0, 6.0, 2.0), 3.0, &s).unwrap();
}

#[test]
fn random_scenarios_stay_in_domain() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ranges = ParamRanges::default();
    for _ in 0..25 {
        let p = ranges.sample(&mut rng);
        let p0 = uniform_in_domain(&mut rng, p.n);
        let traj = solve(&p, &p0, 20.0 * p.omega, &FlowSettings::default()).unwrap();
        for s in &traj.samples {
            assert!(s.state.in_domain(&p, 1e-8 * p.n), "{:?} at {}", s.state, s.t);
        }
    }
}
