//! Finite samples of the approximate solution sets `S_n` along a penalty
//! schedule, and set-limit diagnostics computed from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{self, ProblemSpec, SelectionRule};
use crate::discrete::DiscreteFunction;
use crate::error::{Error, Result};
use crate::musielak_orlicz::{v_distance, v_norm, PhaseConfig};
use crate::nonsmooth::ConstraintSetK;
use crate::solver::{check_schedule, solve_penalized, vi_residual, ObstacleViolation, SolveReport, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub n_starts: usize,
    pub seed: u64,
    pub selection_rules: Vec<SelectionRule>,
    /// Members closer than this in the lumped norm are merged.
    pub dedup_tol: f64,
    /// A chain is Cauchy-like when `d_{k+1} <= cauchy_factor * d_k` over
    /// the last `cauchy_window` steps.
    pub cauchy_factor: f64,
    pub cauchy_window: usize,
    /// Random members of `K` added to each probe set.
    pub random_probes: usize,
    /// Probe perturbation size relative to `||u||_inf`.
    pub probe_scale: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n_starts: 4,
            seed: 0,
            selection_rules: vec![SelectionRule::Midpoint],
            dedup_tol: 1e-6,
            cauchy_factor: 0.5,
            cauchy_window: 3,
            random_probes: 32,
            probe_scale: 0.01,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::config("study.n_starts", "must be at least 1"));
        }
        if self.selection_rules.is_empty() {
            return Err(Error::config("study.selection_rules", "need at least one rule"));
        }
        for r in &self.selection_rules {
            r.validate()?;
        }
        if !(self.dedup_tol >= 0.0) {
            return Err(Error::config("study.dedup_tol", "must be >= 0"));
        }
        if !(self.cauchy_factor > 0.0 && self.cauchy_factor < 1.0) {
            return Err(Error::config("study.cauchy_factor", "must lie in (0, 1)"));
        }
        if self.cauchy_window == 0 {
            return Err(Error::config("study.cauchy_window", "must be at least 1"));
        }
        if !(self.probe_scale > 0.0) {
            return Err(Error::config("study.probe_scale", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleMember {
    pub solution: DiscreteFunction,
    pub eta: Vec<f64>,
    pub rule: SelectionRule,
    pub start: usize,
    pub iterations: usize,
    pub residual_norm: f64,
    pub violation: ObstacleViolation,
}

impl SampleMember {
    fn from_report(report: &SolveReport, rule: SelectionRule, start: usize) -> Self {
        Self {
            solution: report.solution.clone(),
            eta: report.eta.clone(),
            rule,
            start,
            iterations: report.iterations,
            residual_norm: report.residual_norm,
            violation: report.obstacle_violation,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSample {
    pub rho: f64,
    pub dedup_tol: f64,
    pub attempted: usize,
    pub converged: usize,
    pub members: Vec<SampleMember>,
}

/// Uniform nodal values in `[-R, R]`, `R = ||Phi||_inf + 1` over the finite
/// obstacle values, zero on `Gamma1`. One ChaCha stream per start index.
pub fn random_start(spec: &ProblemSpec, seed: u64, start: usize) -> DiscreteFunction {
    let r = spec
        .obstacle()
        .values()
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        + 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    let mut values: Vec<f64> = (0..spec.mesh().n_nodes()).map(|_| rng.gen_range(-r..=r)).collect();
    spec.apply_dirichlet(&mut values);
    spec.obstacle().with_values(values)
}

fn dedup(candidates: Vec<SampleMember>, tol: f64) -> Vec<SampleMember> {
    let mut kept: Vec<SampleMember> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| k.solution.lumped_distance(&c.solution) > tol) {
            kept.push(c);
        }
    }
    kept
}

fn rule_specs(spec: &ProblemSpec, rules: &[SelectionRule]) -> Result<Vec<ProblemSpec>> {
    rules.iter().map(|&r| spec.with_reaction(spec.reaction().with_rule(r))).collect()
}

/// Multi-start sample of the solutions at `cfg.rho`: every start is solved
/// under every selection rule, non-converged runs are dropped and the rest
/// deduplicated.
pub fn sample_solution_set(spec: &ProblemSpec, cfg: &SolverConfig, study: &StudyConfig) -> Result<SolutionSample> {
    study.validate()?;
    let specs = rule_specs(spec, &study.selection_rules)?;
    let jobs: Vec<(usize, usize)> = (0..study.n_starts)
        .flat_map(|s| (0..specs.len()).map(move |r| (s, r)))
        .collect();
    let reports: Vec<Result<SolveReport>> = jobs
        .par_iter()
        .map(|&(s, r)| solve_penalized(&specs[r], cfg, &random_start(spec, study.seed, s)))
        .collect();
    let mut converged = Vec::new();
    for (&(s, r), rep) in jobs.iter().zip(reports) {
        let rep = rep?;
        if rep.converged {
            converged.push(SampleMember::from_report(&rep, study.selection_rules[r], s));
        }
    }
    let n_conv = converged.len();
    let members = dedup(converged, study.dedup_tol);
    if members.is_empty() {
        return Err(Error::EmptySample { rho: cfg.rho });
    }
    Ok(SolutionSample {
        rho: cfg.rho,
        dedup_tol: study.dedup_tol,
        attempted: jobs.len(),
        converged: n_conv,
        members,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StageDiagnostics {
    pub rho: f64,
    pub members: usize,
    /// Largest `||(u - Phi)^+||_inf` over the sample.
    pub violation_sup: f64,
    /// Largest lumped `L^1` norm of `(u - Phi)^+` over the sample.
    pub violation_l1: f64,
    /// Largest `d(u_n, S_{n-1})` over the live chains; absent at the first stage.
    pub chain_distance: Option<f64>,
    /// Smallest vi residual over the (projected) members.
    pub vi_residual: f64,
    /// Distance from `S_n` to the first limit candidate.
    pub nearest_distance: Option<f64>,
    /// Largest `sum_Gamma2 w_i j(u_i)` over the sample (0 when `Gamma2` is empty).
    pub boundary_energy: f64,
    /// Largest `|u_i|` on `Gamma2` over the sample.
    pub gamma2_sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub start: usize,
    pub rule: SelectionRule,
    /// Stages at which the chain converged (a prefix of the schedule).
    pub converged_stages: usize,
    /// `d(u_{n+1}, S_n)` in the discrete V-norm, against all converged
    /// states of stage `n` before deduplication.
    pub distances: Vec<f64>,
    pub cauchy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NearestPoint {
    pub rho: f64,
    pub member: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCandidate {
    /// Chains ending within `dedup_tol` of this candidate.
    pub chains: Vec<usize>,
    pub rule: SelectionRule,
    /// Limit estimate projected onto `K`: the last two chain states
    /// extrapolated linearly in `rho` to `rho = 0`.
    pub solution: DiscreteFunction,
    /// `max_i (u_i - Phi_i)` of the unprojected final state.
    pub max_excess: f64,
    pub vi_residual: f64,
    pub probe_count: usize,
    pub nearest_trace: Vec<NearestPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KuratowskiDiagnostics {
    pub schedule: Vec<f64>,
    pub study: StudyConfig,
    pub stages: Vec<StageDiagnostics>,
    pub samples: Vec<SolutionSample>,
    pub chains: Vec<ChainSummary>,
    pub candidates: Vec<LimitCandidate>,
    /// Largest V-norm over all sampled members.
    pub radius: f64,
    /// Least-squares slope of `log violation_sup` against `log rho` over the
    /// last (up to) five stages with nonzero violation.
    pub violation_slope: Option<f64>,
}

/// Probe set for `vi_residual` at `u` (assumed in `K`): `u` itself, the
/// projected bumps `P_K(u +- h e_i)` at every node off `Gamma1`, and
/// `random` projected perturbations `P_K(u + h xi)`, `xi` uniform in
/// `[-1, 1]^n`, with `h = scale * ||u||_inf` (or `scale` when `u = 0`).
pub fn probe_set(spec: &ProblemSpec, u: &DiscreteFunction, scale: f64, random: usize, seed: u64) -> Vec<DiscreteFunction> {
    let k = ConstraintSetK::from_spec(spec);
    let umax = u.max_abs();
    let h = if umax > 0.0 { scale * umax } else { scale };
    let mut probes = vec![u.clone()];
    for i in 0..u.values().len() {
        if spec.dirichlet_mask()[i] {
            continue;
        }
        for sign in [1.0, -1.0] {
            let mut v = u.values().to_vec();
            v[i] += sign * h;
            probes.push(u.with_values(k.project_raw(&v)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let v: Vec<f64> = u.values().iter().map(|x| x + h * rng.gen_range(-1.0..=1.0)).collect();
        probes.push(u.with_values(k.project_raw(&v)));
    }
    probes
}

/// Projects `u` onto `K`, recomputes the selection there and evaluates the
/// vi residual over [`probe_set`]. Returns the projected state, the residual
/// and the probe count.
pub fn vi_check(spec: &ProblemSpec, u: &DiscreteFunction, study: &StudyConfig, seed: u64) -> Result<(DiscreteFunction, f64, usize)> {
    let k = ConstraintSetK::from_spec(spec);
    let pu = k.project(u)?;
    let eta = assembly::selection_raw(spec, pu.values())?;
    let probes = probe_set(spec, &pu, study.probe_scale, study.random_probes, seed);
    let r = vi_residual(spec, &pu, &eta, &probes)?;
    Ok((pu, r, probes.len()))
}

fn is_cauchy(d: &[f64], factor: f64, window: usize) -> bool {
    let tail = &d[d.len().saturating_sub(window + 1)..];
    tail.windows(2).all(|w| w[1] <= factor * w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

struct Chain {
    start: usize,
    rule: usize,
    state: Option<SolveReport>,
    previous: Option<DiscreteFunction>,
    converged_stages: usize,
    distances: Vec<f64>,
    alive: bool,
}

/// Linear extrapolation in `rho` to `rho = 0` from the last two chain states.
fn extrapolate(prev: &DiscreteFunction, last: &DiscreteFunction, rho_prev: f64, rho_last: f64) -> DiscreteFunction {
    let w = rho_last / (rho_prev - rho_last);
    last.with_values(last.values().iter().zip(prev.values()).map(|(a, b)| a + w * (a - b)).collect())
}

/// Warm-started chains (one per start and selection rule) along `schedule`,
/// sampled into `S_n` at every stage. Smoothing parameters that are active
/// in `cfg` (or the problem) shrink proportionally to `rho`.
pub fn kuratowski_study(
    spec: &ProblemSpec,
    schedule: &[f64],
    cfg: &SolverConfig,
    study: &StudyConfig,
) -> Result<KuratowskiDiagnostics> {
    check_schedule(schedule)?;
    study.validate()?;
    let specs = rule_specs(spec, &study.selection_rules)?;
    let eps0 = cfg.eps_grad.unwrap_or(spec.eps_grad());
    let delta0 = cfg.delta_boundary.unwrap_or(spec.boundary().delta);
    let phase = spec.phase();
    let mesh = spec.mesh();

    let mut chains: Vec<Chain> = (0..study.n_starts)
        .flat_map(|s| {
            (0..specs.len()).map(move |r| Chain {
                start: s,
                rule: r,
                state: None,
                previous: None,
                converged_stages: 0,
                distances: Vec::new(),
                alive: true,
            })
        })
        .collect();
    let mut samples: Vec<SolutionSample> = Vec::with_capacity(schedule.len());
    let mut stage_cfgs = Vec::with_capacity(schedule.len());
    let mut prev_states: Vec<DiscreteFunction> = Vec::new();

    for (n, &rho) in schedule.iter().enumerate() {
        let factor = rho / schedule[0];
        let stage = SolverConfig {
            rho,
            eps_grad: Some(eps0 * factor),
            delta_boundary: Some(delta0 * factor),
            ..cfg.clone()
        };
        let live: Vec<usize> = (0..chains.len()).filter(|&c| chains[c].alive).collect();
        let results: Vec<Result<SolveReport>> = live
            .par_iter()
            .map(|&c| {
                let ch = &chains[c];
                let init = match &ch.state {
                    Some(r) => r.solution.clone(),
                    None => random_start(spec, study.seed, ch.start),
                };
                solve_penalized(&specs[ch.rule], &stage, &init)
            })
            .collect();
        let mut converged = Vec::new();
        let mut states = Vec::new();
        for (&c, rep) in live.iter().zip(results) {
            let rep = rep?;
            let ch = &mut chains[c];
            if rep.converged {
                converged.push(SampleMember::from_report(&rep, study.selection_rules[ch.rule], ch.start));
                ch.converged_stages += 1;
                states.push(rep.solution.clone());
                ch.previous = ch.state.take().map(|r| r.solution);
                ch.state = Some(rep);
            } else {
                ch.alive = false;
            }
        }
        let n_conv = converged.len();
        let members = dedup(converged, study.dedup_tol);
        if members.is_empty() {
            return Err(Error::EmptySample { rho });
        }
        // distances use every converged state of the previous stage, so a
        // chain that does not move has distance exactly 0 even when its state
        // was merged into another member
        if n > 0 {
            let dists: Vec<(usize, f64)> = live
                .par_iter()
                .filter(|&&c| chains[c].alive)
                .map(|&c| {
                    let u = chains[c].state.as_ref().expect("live chain has a state").solution.values();
                    let d = prev_states
                        .iter()
                        .map(|m: &DiscreteFunction| v_distance(mesh, phase, u, m.values()))
                        .fold(f64::INFINITY, f64::min);
                    (c, d)
                })
                .collect();
            for (c, d) in dists {
                chains[c].distances.push(d);
            }
        }
        samples.push(SolutionSample {
            rho,
            dedup_tol: study.dedup_tol,
            attempted: live.len(),
            converged: n_conv,
            members,
        });
        stage_cfgs.push(stage);
        prev_states = states;
    }

    let last = schedule.len() - 1;
    let final_spec = effective(spec, &stage_cfgs[last])?;
    let mut candidates: Vec<LimitCandidate> = Vec::new();
    for (c, ch) in chains.iter().enumerate() {
        if !ch.alive || !is_cauchy(&ch.distances, study.cauchy_factor, study.cauchy_window) {
            continue;
        }
        let state = ch.state.as_ref().expect("alive chain has a state");
        let limit = match (&ch.previous, last) {
            (Some(prev), l) if l > 0 => extrapolate(prev, &state.solution, schedule[l - 1], schedule[l]),
            _ => state.solution.clone(),
        };
        let projected = ConstraintSetK::from_spec(spec).project(&limit)?;
        if let Some(existing) = candidates
            .iter_mut()
            .find(|cand| cand.solution.lumped_distance(&projected) <= study.dedup_tol)
        {
            existing.chains.push(c);
            continue;
        }
        let rule_spec = final_spec.with_reaction(specs[ch.rule].reaction().clone())?;
        let (pu, r, count) = vi_check(&rule_spec, &limit, study, study.seed ^ (c as u64 + 1))?;
        let max_excess = state
            .solution
            .values()
            .iter()
            .zip(spec.obstacle().values())
            .map(|(u, p)| u - p)
            .fold(f64::NEG_INFINITY, f64::max);
        candidates.push(LimitCandidate {
            chains: vec![c],
            rule: study.selection_rules[ch.rule],
            nearest_trace: trace(&samples, phase, &pu)?,
            solution: pu,
            max_excess,
            vi_residual: r,
            probe_count: count,
        });
    }

    let mut stages = Vec::with_capacity(samples.len());
    for (n, sample) in samples.iter().enumerate() {
        let stage_spec = effective(spec, &stage_cfgs[n])?;
        let vi = sample
            .members
            .par_iter()
            .enumerate()
            .map(|(m, member)| {
                let s = stage_spec.with_reaction(spec.reaction().with_rule(member.rule))?;
                Ok(vi_check(&s, &member.solution, study, study.seed ^ ((n as u64) << 32 | m as u64))?.1)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let chain_distance = (n > 0).then(|| {
            chains
                .iter()
                .filter(|ch| ch.distances.len() >= n)
                .map(|ch| ch.distances[n - 1])
                .fold(0.0, f64::max)
        });
        let gamma2 = spec.gamma2_nodes();
        stages.push(StageDiagnostics {
            rho: sample.rho,
            members: sample.members.len(),
            violation_sup: sample.members.iter().map(|m| m.violation.sup).fold(0.0, f64::max),
            violation_l1: sample.members.iter().map(|m| m.violation.l1).fold(0.0, f64::max),
            chain_distance,
            vi_residual: vi,
            nearest_distance: candidates.first().map(|c| c.nearest_trace[n].distance),
            boundary_energy: sample
                .members
                .iter()
                .map(|m| assembly::boundary_energy(spec, m.solution.values()))
                .fold(if gamma2.is_empty() { 0.0 } else { f64::NEG_INFINITY }, f64::max),
            gamma2_sup: sample
                .members
                .iter()
                .flat_map(|m| gamma2.iter().map(move |&i| m.solution.values()[i].abs()))
                .fold(0.0, f64::max),
        });
    }

    let radius = samples
        .iter()
        .flat_map(|s| s.members.iter())
        .map(|m| v_norm(&m.solution, phase))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let nonzero: Vec<&StageDiagnostics> = stages.iter().filter(|s| s.violation_sup > 0.0).collect();
    let tail = &nonzero[nonzero.len().saturating_sub(5)..];
    let violation_slope = loglog_slope(
        &tail.iter().map(|s| s.rho).collect::<Vec<_>>(),
        &tail.iter().map(|s| s.violation_sup).collect::<Vec<_>>(),
    );

    Ok(KuratowskiDiagnostics {
        schedule: schedule.to_vec(),
        study: study.clone(),
        stages,
        samples,
        chains: chains
            .iter()
            .map(|ch| ChainSummary {
                start: ch.start,
                rule: study.selection_rules[ch.rule],
                converged_stages: ch.converged_stages,
                distances: ch.distances.clone(),
                cauchy: ch.alive && is_cauchy(&ch.distances, study.cauchy_factor, study.cauchy_window),
            })
            .collect(),
        candidates,
        radius,
        violation_slope,
    })
}

fn effective(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<ProblemSpec> {
    spec.with_smoothing(
        cfg.eps_grad.unwrap_or(spec.eps_grad()),
        cfg.delta_boundary.unwrap_or(spec.boundary().delta),
    )
}

fn trace(samples: &[SolutionSample], phase: &PhaseConfig, u: &DiscreteFunction) -> Result<Vec<NearestPoint>> {
    samples
        .iter()
        .map(|s| {
            let (member, distance) = s
                .members
                .iter()
                .enumerate()
                .map(|(i, m)| (i, v_distance(u.mesh(), phase, u.values(), m.solution.values())))
                .fold(None, |best: Option<(usize, f64)>, cur| match best {
                    Some(b) if b.1 <= cur.1 => Some(b),
                    _ => Some(cur),
                })
                .ok_or(Error::EmptySample { rho: s.rho })?;
            Ok(NearestPoint {
                rho: s.rho,
                member,
                distance,
            })
        })
        .collect()
}

/// For each stage, the sample member nearest to `u` in the discrete V-norm.
pub fn nearest_point_trace(study: &KuratowskiDiagnostics, phase: &PhaseConfig, u: &DiscreteFunction) -> Result<Vec<NearestPoint>> {
    trace(&study.samples, phase, u)
}
