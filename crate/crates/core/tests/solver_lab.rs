use std::sync::Arc;

use dphase_core::assembly::{
    BoundaryPotentialSpec, PotentialKind, ProblemSpec, ReactionKind, ReactionSpec, SelectionRule,
};
use dphase_core::convergence_lab::{kuratowski_study, qp_oracle, validate_hypotheses, OracleMode, StudyConfig};
use dphase_core::solver::{continuation, default_schedule, linear_predictor, solve_penalized, SolverConfig, SolverMode};
use dphase_core::{BoundaryPartition, DiscreteFunction, Mesh, PhaseConfig, Side};

fn spec(mesh: &Arc<Mesh>, phase: PhaseConfig, phi: f64, reaction: ReactionKind, boundary: BoundaryPotentialSpec) -> ProblemSpec {
    let obs = DiscreteFunction::obstacle(mesh.clone(), vec![phi; mesh.n_nodes()]).unwrap();
    ProblemSpec::new(
        mesh.clone(),
        phase,
        obs,
        ReactionSpec::new(reaction, SelectionRule::Midpoint),
        boundary,
        0.0,
    )
    .unwrap()
}

#[test]
fn continuation_reaches_the_oracle_on_a_membrane() {
    let mesh = Mesh::rectangle(1.0, 1.0, 6, 6, &BoundaryPartition::AllGamma1).unwrap();
    let phase = PhaseConfig::constant(2.0, 2.0, &mesh, 0.0).unwrap();
    let s = spec(&mesh, phase, 0.03, ReactionKind::Constant { value: 10.0 }, BoundaryPotentialSpec::zero());
    let oracle = qp_oracle(&s, OracleMode::ProjectedGradient).unwrap();
    let reports = continuation(&s, &default_schedule(), &SolverConfig::default(), &DiscreteFunction::zeros(mesh)).unwrap();
    assert!(reports.iter().all(|r| r.converged));
    assert!(reports.last().unwrap().solution.lumped_distance(&oracle) < 1e-6);
}

#[test]
fn violation_shrinks_with_rho() {
    let mesh = Mesh::interval(0.0, 1.0, 32, &BoundaryPartition::AllGamma1).unwrap();
    let phase = PhaseConfig::from_fn(2.5, 3.0, &mesh, |x| x[0]).unwrap();
    let s = spec(&mesh, phase, 0.05, ReactionKind::Constant { value: 2.0 }, BoundaryPotentialSpec::zero());
    let init = linear_predictor(&s).unwrap();
    let reports = continuation(&s, &[1e-2, 1e-4, 1e-6], &SolverConfig::default(), &init).unwrap();
    let sup: Vec<f64> = reports.iter().map(|r| r.obstacle_violation.sup).collect();
    assert!(sup[0] > sup[1] && sup[1] > sup[2], "{sup:?}");
    assert!(sup[2] <= 1e-5);
}

#[test]
fn penalty_and_moreau_yosida_modes_agree() {
    let mesh = Mesh::interval(0.0, 1.0, 24, &BoundaryPartition::Gamma2Sides(vec![Side::Right])).unwrap();
    let phase = PhaseConfig::constant(2.0, 3.0, &mesh, 0.5).unwrap();
    let boundary = BoundaryPotentialSpec::new(PotentialKind::Abs { alpha: 0.1 }, 1e-3).unwrap();
    let s = spec(&mesh, phase, 0.1, ReactionKind::Constant { value: 1.0 }, boundary);
    let init = linear_predictor(&s).unwrap();
    let solve = |mode| {
        solve_penalized(
            &s,
            &SolverConfig {
                mode,
                ..SolverConfig::default().with_rho(1e-5)
            },
            &init,
        )
        .unwrap()
    };
    let (a, b) = (solve(SolverMode::Penalty), solve(SolverMode::MoreauYosida));
    assert!(a.converged && b.converged);
    assert!(a.solution.lumped_distance(&b.solution) <= 1e-10);
}

#[test]
fn nonconvex_well_study_keeps_a_nonempty_sample() {
    let mesh = Mesh::interval(0.0, 1.0, 16, &BoundaryPartition::Gamma2Sides(vec![Side::Right])).unwrap();
    let phase = PhaseConfig::constant(2.0, 2.5, &mesh, 0.2).unwrap();
    let boundary = BoundaryPotentialSpec::new(PotentialKind::NonconvexWell { alpha: 1.0, beta: 0.2 }, 1e-2).unwrap();
    let s = spec(&mesh, phase, 0.2, ReactionKind::Interval { lo: 0.5, hi: 2.0 }, boundary);
    let study = StudyConfig {
        n_starts: 3,
        selection_rules: vec![SelectionRule::Lower, SelectionRule::Upper],
        ..StudyConfig::default()
    };
    let d = kuratowski_study(&s, &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5], &SolverConfig::default(), &study).unwrap();
    assert_eq!(d.stages.len(), 5);
    assert!(d.stages.iter().all(|st| st.members >= 1));
    assert!(d.radius > 0.0);
    for c in &d.candidates {
        assert_eq!(c.nearest_trace.len(), 5);
        assert!(c.solution.values().iter().zip(s.obstacle().values()).all(|(u, p)| u <= p));
    }
}

#[test]
fn mixed_boundary_constants() {
    let mesh = Mesh::interval(0.0, 1.0, 64, &BoundaryPartition::Gamma2Sides(vec![Side::Right])).unwrap();
    let phase = PhaseConfig::constant(2.0, 2.0, &mesh, 0.0).unwrap();
    let s = spec(&mesh, phase, f64::INFINITY, ReactionKind::Constant { value: 0.0 }, BoundaryPotentialSpec::zero());
    let r = validate_hypotheses(&s);
    // u(0) = 0, free right end: first eigenfunction sin(pi x / 2)
    let exact = 2.0 / std::f64::consts::PI;
    assert!((r.lambda1_est - exact).abs() / exact < 0.01, "{}", r.lambda1_est);
    assert!((r.lambda2_est - 1.0).abs() < 1e-6, "{}", r.lambda2_est);
}
