//! Semismooth Newton solver for one regularized obstacle problem, with
//! backtracking, a frozen-coefficient (Picard) fallback, and warm-started
//! continuation in the penalty parameter.

use serde::{Deserialize, Serialize};

use crate::assembly::{self, ConstraintTerm, ProblemSpec};
use crate::discrete::DiscreteFunction;
use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::nonsmooth::{plus_part_raw, ConstraintSetK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// `(1/rho) (u - Phi)^+` penalty.
    Penalty,
    /// Moreau-Yosida gradient of the indicator of `K` with `eps = rho`.
    MoreauYosida,
    /// Obstacle ignored.
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Damping {
    pub factor: f64,
    pub max_halvings: usize,
    /// Armijo constant for the sufficient decrease of `||r||^2`.
    pub armijo: f64,
}

impl Default for Damping {
    fn default() -> Self {
        Self {
            factor: 0.5,
            max_halvings: 40,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho: f64,
    pub mode: SolverMode,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub damping: Damping,
    pub picard_fallback: bool,
    /// Overrides the problem's gradient regularization when set.
    pub eps_grad: Option<f64>,
    /// Overrides the problem's boundary smoothing radius when set.
    pub delta_boundary: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            mode: SolverMode::Penalty,
            newton_tol: 1e-10,
            max_newton: 100,
            damping: Damping::default(),
            picard_fallback: true,
            eps_grad: None,
            delta_boundary: None,
        }
    }
}

impl SolverConfig {
    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != SolverMode::Unconstrained && !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::config("solver.schedule", format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::config("solver.newton_tol", "must be positive"));
        }
        if self.max_newton == 0 {
            return Err(Error::config("solver.max_newton", "must be at least 1"));
        }
        let d = &self.damping;
        if !(d.factor > 0.0 && d.factor < 1.0) || !(d.armijo > 0.0 && d.armijo < 0.5) {
            return Err(Error::config("solver.damping", "need 0 < factor < 1 and 0 < armijo < 0.5"));
        }
        for (key, v) in [("solver.eps_grad", self.eps_grad), ("boundary.delta", self.delta_boundary)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::config(key, "must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    fn constraint_term(&self) -> ConstraintTerm {
        match self.mode {
            SolverMode::Penalty => ConstraintTerm::Penalty { rho: self.rho },
            SolverMode::MoreauYosida => ConstraintTerm::MoreauYosida { eps: self.rho },
            SolverMode::Unconstrained => ConstraintTerm::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Newton,
    /// Newton step after diagonal regularization of a singular Jacobian.
    NewtonRegularized,
    Picard,
    /// Picard step taken without a successful line search.
    PicardForced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub residual_norm: f64,
    pub step_length: f64,
    pub kind: StepKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObstacleViolation {
    /// `max_i (u_i - Phi_i)^+`
    pub sup: f64,
    /// `sum_i w_i (u_i - Phi_i)^+`
    pub l1: f64,
}

impl ObstacleViolation {
    pub fn of(spec: &ProblemSpec, u: &[f64]) -> Self {
        let plus = plus_part_raw(u, spec.obstacle().values());
        Self {
            sup: plus.iter().fold(0.0, |m: f64, v| m.max(*v)),
            l1: plus.iter().zip(spec.mesh().lumped_weights()).map(|(v, w)| v * w).sum(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub rho: f64,
    pub mode: SolverMode,
    pub solution: DiscreteFunction,
    /// Reaction selection at the returned state.
    pub eta: Vec<f64>,
    pub residual_norm: f64,
    /// `max(newton_tol, rounding floor)`; see [`residual_floor`].
    pub effective_tol: f64,
    pub iterations: usize,
    pub converged: bool,
    pub obstacle_violation: ObstacleViolation,
    pub iteration_trace: Vec<TraceEntry>,
    pub eps_grad: f64,
    pub delta_boundary: f64,
}

/// Lumped-weight-scaled Euclidean norm of a masked residual:
/// `sqrt(sum_free r_i^2 / w_i + sum_Gamma1 r_i^2)`.
pub fn scaled_norm(spec: &ProblemSpec, r: &[f64]) -> f64 {
    let w = spec.mesh().lumped_weights();
    r.iter()
        .zip(w)
        .zip(spec.dirichlet_mask())
        .map(|((r, w), &m)| if m { r * r } else { r * r / w })
        .sum::<f64>()
        .sqrt()
}

/// Attainable residual level in double precision: a multiple of machine
/// epsilon times the scaled norm of `|J||u|` plus the load magnitudes.
/// With stiff penalties (`w / rho` of order `1e6` and beyond) a single
/// rounding of `u` already perturbs the residual above `1e-10`.
pub fn residual_floor(spec: &ProblemSpec, jac: &SparseMatrix, u: &[f64], load: &[f64]) -> f64 {
    let mut mag = jac.abs_mul_vec(u);
    for (m, l) in mag.iter_mut().zip(load) {
        *m += l.abs();
    }
    16.0 * f64::EPSILON * scaled_norm(spec, &mag)
}

fn effective_spec(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<ProblemSpec> {
    if cfg.eps_grad.is_none() && cfg.delta_boundary.is_none() {
        return Ok(spec.clone());
    }
    spec.with_smoothing(
        cfg.eps_grad.unwrap_or(spec.eps_grad()),
        cfg.delta_boundary.unwrap_or(spec.boundary().delta),
    )
}

fn masked_residual(spec: &ProblemSpec, u: &[f64], term: ConstraintTerm) -> Result<Vec<f64>> {
    let (mut r, _) = assembly::total_residual_raw(spec, u, term)?;
    assembly::mask_residual(spec, &mut r, u);
    Ok(r)
}

fn regularized(jac: &SparseMatrix) -> SparseMatrix {
    let n = jac.nrows();
    let mut b = TripletBuilder::new(n, n);
    for (i, j, v) in jac.triplets() {
        b.push(i, j, v);
    }
    for (i, d) in jac.diagonal().into_iter().enumerate() {
        b.push(i, i, 1e-12 * (1.0 + d.abs()));
    }
    b.build()
}

/// Solves `J d = -r`, regularizing the diagonal once if `J` is singular.
fn direction(jac: &SparseMatrix, r: &[f64]) -> Option<(Vec<f64>, bool)> {
    let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    let (d, reg) = match jac.solve(&rhs) {
        Ok(d) => (d, false),
        Err(_) => (regularized(jac).solve(&rhs).ok()?, true),
    };
    d.iter().all(|v| v.is_finite()).then_some((d, reg))
}

struct LineSearch {
    u: Vec<f64>,
    norm: f64,
    step: f64,
}

fn backtrack(
    spec: &ProblemSpec,
    term: ConstraintTerm,
    damping: &Damping,
    u: &[f64],
    d: &[f64],
    norm: f64,
) -> Option<LineSearch> {
    let mut alpha = 1.0;
    for _ in 0..=damping.max_halvings {
        let mut trial: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        // pivoting can leave rounding noise on the identity rows
        spec.apply_dirichlet(&mut trial);
        if let Ok(r) = masked_residual(spec, &trial, term) {
            let tn = scaled_norm(spec, &r);
            if tn.is_finite() && tn * tn <= (1.0 - 2.0 * damping.armijo * alpha) * norm * norm {
                return Some(LineSearch {
                    u: trial,
                    norm: tn,
                    step: alpha,
                });
            }
        }
        alpha *= damping.factor;
    }
    None
}

const MAX_NEWTON_FAILURES: usize = 5;

/// Solves the regularized problem at `cfg.rho` from `initial`, which must
/// vanish on `Gamma1`. Non-convergence is reported, not raised.
pub fn solve_penalized(spec: &ProblemSpec, cfg: &SolverConfig, initial: &DiscreteFunction) -> Result<SolveReport> {
    cfg.validate()?;
    initial.check_mesh(spec.mesh())?;
    if !spec.satisfies_dirichlet(initial.values()) {
        return Err(Error::config("initial", "initial guess must vanish on Gamma1"));
    }
    let spec = effective_spec(spec, cfg)?;
    let term = cfg.constraint_term();
    let mut u = initial.values().to_vec();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut newton_failures = 0;
    let mut picard_only = false;
    let mut forced_used = false;
    let mut converged = false;
    let (residual_norm, effective_tol, eta) = loop {
        let sys = assembly::system_raw(&spec, &u, term, false)?;
        let norm = scaled_norm(&spec, &sys.residual);
        let load: Vec<f64> = sys.eta.iter().zip(spec.mesh().lumped_weights()).map(|(e, w)| e * w).collect();
        let tol = cfg.newton_tol.max(residual_floor(&spec, &sys.jacobian, &u, &load));
        if norm <= tol {
            converged = true;
            break (norm, tol, sys.eta);
        }
        if iterations >= cfg.max_newton || !norm.is_finite() {
            break (norm, tol, sys.eta);
        }
        iterations += 1;

        if !picard_only {
            if let Some((d, reg)) = direction(&sys.jacobian, &sys.residual) {
                if let Some(ls) = backtrack(&spec, term, &cfg.damping, &u, &d, norm) {
                    u = ls.u;
                    trace.push(TraceEntry {
                        residual_norm: ls.norm,
                        step_length: ls.step,
                        kind: if reg { StepKind::NewtonRegularized } else { StepKind::Newton },
                    });
                    continue;
                }
            }
            if !cfg.picard_fallback {
                break (norm, tol, sys.eta);
            }
            newton_failures += 1;
            if newton_failures >= MAX_NEWTON_FAILURES {
                picard_only = true;
            }
        }

        let frozen = assembly::system_raw(&spec, &u, term, true)?;
        let Some((d, _)) = direction(&frozen.jacobian, &frozen.residual) else {
            break (norm, tol, sys.eta);
        };
        if let Some(ls) = backtrack(&spec, term, &cfg.damping, &u, &d, norm) {
            u = ls.u;
            trace.push(TraceEntry {
                residual_norm: ls.norm,
                step_length: ls.step,
                kind: StepKind::Picard,
            });
        } else if !forced_used {
            forced_used = true;
            for (a, b) in u.iter_mut().zip(&d) {
                *a += b;
            }
            spec.apply_dirichlet(&mut u);
            let r = masked_residual(&spec, &u, term)?;
            trace.push(TraceEntry {
                residual_norm: scaled_norm(&spec, &r),
                step_length: 1.0,
                kind: StepKind::PicardForced,
            });
        } else {
            break (norm, tol, sys.eta);
        }
    };
    let solution = DiscreteFunction::new(spec.mesh().clone(), u.clone())
        .unwrap_or_else(|_| DiscreteFunction::zeros(spec.mesh().clone()).with_values(u.clone()));
    Ok(SolveReport {
        rho: cfg.rho,
        mode: cfg.mode,
        obstacle_violation: ObstacleViolation::of(&spec, &u),
        solution,
        eta,
        residual_norm,
        effective_tol,
        iterations,
        converged,
        iteration_trace: trace,
        eps_grad: spec.eps_grad(),
        delta_boundary: spec.boundary().delta,
    })
}

/// Starting guess from the linear surrogate `-div((1 + mu) grad u) = eta(0)`
/// with the Dirichlet condition on `Gamma1`, ignoring the obstacle.
pub fn linear_predictor(spec: &ProblemSpec) -> Result<DiscreteFunction> {
    let mesh = spec.mesh();
    let n = mesh.n_nodes();
    let zero = vec![0.0; n];
    let mut b = TripletBuilder::new(n, n);
    for e in 0..mesh.n_elements() {
        let coef = mesh.element_volume(e) * (1.0 + spec.phase().mu()[e]);
        let nodes = mesh.element(e);
        let bgs = mesh.basis_gradients(e);
        for (a, &na) in nodes.iter().enumerate() {
            for (c, &nc) in nodes.iter().enumerate() {
                b.push(na, nc, coef * (bgs[a][0] * bgs[c][0] + bgs[a][1] * bgs[c][1]));
            }
        }
    }
    let stiffness = b.build().with_identity_rows(spec.dirichlet_mask());
    let eta = assembly::selection_raw(spec, &zero)?;
    let mut rhs: Vec<f64> = eta.iter().zip(mesh.lumped_weights()).map(|(e, w)| e * w).collect();
    spec.apply_dirichlet(&mut rhs);
    let mut u = stiffness.solve(&rhs)?;
    spec.apply_dirichlet(&mut u);
    DiscreteFunction::new(mesh.clone(), u)
}

/// Solves along a strictly decreasing `schedule`, warm-starting each stage
/// from the previous solution. Active smoothing parameters (`eps_grad`,
/// boundary `delta`) shrink by the same factor as `rho`. A non-converged
/// stage ends the run; the partial list is returned.
pub fn continuation(
    spec: &ProblemSpec,
    schedule: &[f64],
    cfg: &SolverConfig,
    initial: &DiscreteFunction,
) -> Result<Vec<SolveReport>> {
    check_schedule(schedule)?;
    let eps0 = cfg.eps_grad.unwrap_or(spec.eps_grad());
    let delta0 = cfg.delta_boundary.unwrap_or(spec.boundary().delta);
    let mut reports: Vec<SolveReport> = Vec::with_capacity(schedule.len());
    let mut start = initial.clone();
    for &rho in schedule {
        let factor = rho / schedule[0];
        let stage = SolverConfig {
            rho,
            eps_grad: Some(eps0 * factor),
            delta_boundary: Some(delta0 * factor),
            ..cfg.clone()
        };
        let report = solve_penalized(spec, &stage, &start)?;
        let ok = report.converged;
        start = report.solution.clone();
        reports.push(report);
        if !ok {
            break;
        }
    }
    Ok(reports)
}

pub fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::config("solver.schedule", "schedule is empty"));
    }
    if schedule.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::config("solver.schedule", "rho values must be positive and finite"));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("solver.schedule", "schedule must be strictly decreasing"));
    }
    Ok(())
}

/// Default schedule `rho_n = 10^-n`, `n = 0..=8`.
pub fn default_schedule() -> Vec<f64> {
    (0..=8).map(|n| 10f64.powi(-n)).collect()
}

/// Smallest value over `probes` of
/// `<A u, v - u> + sum j°(u; v - u) - <eta, v - u>_w`.
/// A discrete solution of the variational inequality gives a value `>= 0`
/// (up to tolerance) for every `v` in `K`.
pub fn vi_residual(spec: &ProblemSpec, u: &DiscreteFunction, eta: &[f64], probes: &[DiscreteFunction]) -> Result<f64> {
    u.check_mesh(spec.mesh())?;
    if eta.len() != u.values().len() {
        return Err(Error::config("eta", "selection length differs from node count"));
    }
    if probes.is_empty() {
        return Err(Error::config("probes", "probe set is empty"));
    }
    let k = ConstraintSetK::from_spec(spec);
    let r_a = assembly::a_residual_raw(spec, u.values())?;
    let w = spec.mesh().lumped_weights();
    let mut worst = f64::INFINITY;
    for (idx, v) in probes.iter().enumerate() {
        v.check_mesh(spec.mesh())?;
        if !k.contains(v) {
            return Err(Error::config("probes", format!("probe {idx} is not in K")));
        }
        let dir: Vec<f64> = v.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
        let a_term = crate::linalg::dot(&r_a, &dir);
        let j_term = assembly::clarke_raw(spec, u.values(), &dir);
        let f_term: f64 = eta.iter().zip(&dir).zip(w).map(|((e, d), w)| w * e * d).sum();
        worst = worst.min(a_term + j_term - f_term);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{BoundaryPotentialSpec, ReactionKind, ReactionSpec, SelectionRule};
    use crate::mesh::{BoundaryPartition, Mesh};
    use crate::musielak_orlicz::PhaseConfig;

    fn poisson(n: usize, load: f64, obstacle: f64) -> ProblemSpec {
        let m = Mesh::interval(0.0, 1.0, n, &BoundaryPartition::AllGamma1).unwrap();
        let phase = PhaseConfig::constant(2.0, 2.0, &m, 0.0).unwrap();
        let obs = DiscreteFunction::obstacle(m.clone(), vec![obstacle; n + 1]).unwrap();
        let reaction = ReactionSpec::new(ReactionKind::Constant { value: load }, SelectionRule::Midpoint);
        ProblemSpec::new(m, phase, obs, reaction, BoundaryPotentialSpec::zero(), 0.0).unwrap()
    }

    #[test]
    fn poisson_matches_parabola() {
        let spec = poisson(64, 1.0, f64::INFINITY);
        let cfg = SolverConfig {
            mode: SolverMode::Unconstrained,
            ..Default::default()
        };
        let rep = solve_penalized(&spec, &cfg, &DiscreteFunction::zeros(spec.mesh().clone())).unwrap();
        assert!(rep.converged);
        let err = spec
            .mesh()
            .nodes()
            .iter()
            .zip(rep.solution.values())
            .map(|(x, u)| (u - x[0] * (1.0 - x[0]) / 2.0).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn obstacle_is_respected_at_small_rho() {
        let spec = poisson(64, 1.0, 0.1);
        let cfg = SolverConfig {
            rho: 1e-6,
            ..Default::default()
        };
        let rep = solve_penalized(&spec, &cfg, &DiscreteFunction::zeros(spec.mesh().clone())).unwrap();
        assert!(rep.converged);
        assert!(rep.solution.max_abs() <= 0.1 + 5e-6, "{}", rep.solution.max_abs());
    }

    #[test]
    fn zero_problem_converges_immediately() {
        let spec = poisson(16, 0.0, 1.0);
        let rep = solve_penalized(&spec, &SolverConfig::default(), &DiscreteFunction::zeros(spec.mesh().clone())).unwrap();
        assert!(rep.converged && rep.iterations <= 2);
        assert!(rep.solution.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn schedule_validation() {
        assert!(check_schedule(&[1.0, 0.1, 0.01]).is_ok());
        assert!(check_schedule(&[0.01, 0.1, 1.0]).is_err());
        assert!(check_schedule(&[1.0, 1.0]).is_err());
        assert!(check_schedule(&[1.0, -0.1]).is_err());
        assert!(check_schedule(&[]).is_err());
        assert_eq!(default_schedule().len(), 9);
    }

    #[test]
    fn singleton_continuation_equals_single_solve() {
        let spec = poisson(16, 8.0, 0.5);
        let cfg = SolverConfig::default().with_rho(0.01);
        let init = DiscreteFunction::zeros(spec.mesh().clone());
        let one = solve_penalized(&spec, &cfg, &init).unwrap();
        let cont = continuation(&spec, &[0.01], &cfg, &init).unwrap();
        assert_eq!(cont.len(), 1);
        assert_eq!(cont[0].solution.values(), one.solution.values());
        assert_eq!(cont[0].iterations, one.iterations);
    }

    #[test]
    fn initial_guess_must_satisfy_dirichlet() {
        let spec = poisson(4, 1.0, 1.0);
        let bad = DiscreteFunction::new(spec.mesh().clone(), vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(solve_penalized(&spec, &SolverConfig::default(), &bad).is_err());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let m = Mesh::interval(0.0, 1.0, 32, &BoundaryPartition::AllGamma1).unwrap();
        let phase = PhaseConfig::constant(3.0, 4.0, &m, 1.0).unwrap();
        let obs = DiscreteFunction::obstacle(m.clone(), vec![0.05; 33]).unwrap();
        let reaction = ReactionSpec::new(ReactionKind::Constant { value: 5.0 }, SelectionRule::Midpoint);
        let spec = ProblemSpec::new(m, phase, obs, reaction, BoundaryPotentialSpec::zero(), 0.0).unwrap();
        let cfg = SolverConfig {
            max_newton: 1,
            rho: 1e-4,
            ..Default::default()
        };
        let rep = solve_penalized(&spec, &cfg, &linear_predictor(&spec).unwrap()).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.iteration_trace.len(), 1);
    }
}
