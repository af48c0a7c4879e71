mod common;

use common::scenario;
use isac_beam::formulation::{build_penalized, extract_solution, FormulationOptions, PenalizedSpec, RelaxedSpec};
use isac_beam::irm::{null_eigvecs, rank_one_ratio, rank_one_residual, run_irm, run_irm_spec, IrmParams};
use isac_beam::metrics::{check_constraints, total_power, BeamformerSet, FeasibilityTolerances};
use isac_beam::scene::build_desired_pattern;
use isac_beam::sdp::{solve, SolverStatus};
use isac_beam::Error;

fn no_radar() -> IrmParams {
    IrmParams {
        formulation: FormulationOptions { include_radar_covariance: false, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn single_user_relaxation_is_rank_one() {
    let s = scenario(6, &[(20.0, 20.0)], &[(-30.0, 20.0)], 5.0);
    let r = run_irm(&s, &IrmParams::default()).unwrap();
    assert!(r.converged);
    assert_eq!(r.iterations, 0);
    assert!(r.trace.is_empty());
    assert!((r.final_power - r.sdr_power).abs() <= 1e-7 * r.sdr_power);
    assert!(r.rank_one_ratios[0] <= 1e-6);
    let pat = build_desired_pattern(&s).unwrap();
    let rep = check_constraints(&r.set, &s, &pat, &FeasibilityTolerances::default()).unwrap();
    assert!(rep.all_passed(), "{:?}", rep.failures().collect::<Vec<_>>());
}

#[test]
fn two_users_without_radar_converge_to_rank_one() {
    let s = scenario(6, &[(20.0, 20.0), (40.0, 20.0)], &[(-30.0, 20.0), (60.0, 20.0)], 5.0);
    let r = run_irm(&s, &no_radar()).unwrap();
    assert!(r.converged, "{}", r.message);
    assert!(r.final_power >= r.sdr_power * (1.0 - 1e-7));
    let vectors = r.set.vectors().expect("rank-one vectors");
    assert_eq!(vectors.len(), 2);
    for w in r.set.covariances() {
        assert!(rank_one_ratio(w).unwrap() <= 1e-6);
        assert!(rank_one_residual(w).unwrap() <= 1e-6);
    }
    for t in r.trace.windows(2) {
        assert!(t[1].phi > t[0].phi);
    }
    let pat = build_desired_pattern(&s).unwrap();
    let rep = check_constraints(&r.set, &s, &pat, &FeasibilityTolerances::default()).unwrap();
    assert!(rep.all_passed(), "{:?}", rep.failures().collect::<Vec<_>>());
}

#[test]
fn penalized_problem_reproduces_a_rank_one_relaxation() {
    // With panels spanning the null space of a rank-one optimum, r = 0 is
    // attainable at no extra cost.
    let s = scenario(5, &[(20.0, 20.0)], &[(-30.0, 20.0)], 5.0);
    let p = IrmParams::default();
    let pat = build_desired_pattern(&s).unwrap();
    let spec = RelaxedSpec::from_scenario(&s, &pat, &p.formulation).unwrap();
    let r = run_irm_spec(&spec, &p).unwrap();
    let panels = r.sdr_set.covariances().iter().map(|w| null_eigvecs(w).unwrap()).collect();
    let (problem, layout) = build_penalized(&PenalizedSpec::new(spec, panels, 1.0).unwrap()).unwrap();
    let (sol, rep) = solve(&problem, &p.solver).unwrap();
    assert_eq!(rep.status, SolverStatus::Optimal);
    let set = extract_solution(&sol, &layout).unwrap();
    let slack = sol.scalars[layout.relaxation.unwrap().0];
    assert!(slack.abs() <= 1e-6 * r.sdr_power, "r = {slack}");
    assert!((total_power(&set) - r.sdr_power).abs() <= 1e-6 * r.sdr_power);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let s = scenario(6, &[(20.0, 20.0), (40.0, 20.0)], &[(-30.0, 20.0), (60.0, 20.0)], 5.0);
    let full = run_irm(&s, &no_radar()).unwrap();
    assert!(full.iterations >= 1, "relaxation must not be rank one");
    let mut capped = no_radar();
    capped.max_iterations = 1;
    capped.rank_threshold = 1e-300;
    let r = run_irm(&s, &capped).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 1);
    assert_eq!(r.trace.len(), 1);
    assert!(r.set.vectors().is_none());
    assert!(r.message.contains("no convergence"));
}

#[test]
fn unreachable_user_is_infeasible() {
    // A near-zero sidelobe ceiling at the user's angle leaves no power for it.
    let mut s = scenario(4, &[(20.0, 20.0)], &[(-30.0, 20.0)], 5.0);
    s.sidelobe_region_enabled = true;
    s.sidelobe_level = 0.0;
    s.sidelobe_tolerance = 1e-12;
    match run_irm(&s, &IrmParams::default()) {
        Err(Error::Infeasible(_)) => {}
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let s = scenario(4, &[(20.0, 20.0)], &[(-30.0, 20.0)], 5.0);
    for p in [
        IrmParams { step: 1.0, ..Default::default() },
        IrmParams { initial_weight: 0.0, ..Default::default() },
        IrmParams { max_iterations: 0, ..Default::default() },
        IrmParams { rank_threshold: -1.0, ..Default::default() },
    ] {
        assert!(matches!(run_irm(&s, &p), Err(Error::InvalidInput(_))));
    }
}

#[test]
fn vectors_reconstruct_their_covariances() {
    let s = scenario(6, &[(20.0, 20.0), (40.0, 20.0)], &[(-30.0, 20.0), (60.0, 20.0)], 5.0);
    let r = run_irm(&s, &no_radar()).unwrap();
    let vectors = r.set.vectors().unwrap().to_vec();
    let rebuilt = BeamformerSet::from_vectors(vectors, r.set.radar_covariance().clone()).unwrap();
    let diff = (total_power(&rebuilt) - r.final_power).abs();
    assert!(diff <= 1e-6 * r.final_power, "{diff}");
}
