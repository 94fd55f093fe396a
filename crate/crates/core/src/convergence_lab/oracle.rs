//! Independent ground truth for linear convex instances: the obstacle problem
//! with `p = q = 2` is the box-constrained quadratic program
//! `min 1/2 u^T S u - b^T u` subject to `u <= Phi` on the free nodes.

use serde::{Deserialize, Serialize};

use crate::assembly::{self, ConstraintTerm, PotentialKind, ProblemSpec};
use crate::discrete::DiscreteFunction;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Largest number of constrained unknowns accepted by enumeration.
pub const MAX_ENUMERATION: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Exhaustive search over the `2^m` active sets.
    Enumeration,
    /// Projected gradient with step `1 / ||S||_inf`.
    ProjectedGradient,
    /// Enumeration when `m <= 14`, projected gradient otherwise.
    Auto,
}

/// Reduced quadratic program on the nodes off `Gamma1`.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub free: Vec<usize>,
    pub stiffness: SparseMatrix,
    pub load: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QuadraticProgram {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        let phase = spec.phase();
        let linear = phase.p() == 2.0 && (phase.q() == 2.0 || phase.mu().iter().all(|&m| m == 0.0));
        if !linear {
            return Err(Error::config("phase", "the QP oracle needs p = q = 2"));
        }
        if !spec.reaction().kind.is_state_independent() {
            return Err(Error::config("reaction", "the QP oracle needs a state-independent reaction"));
        }
        if spec.has_gamma2() && !matches!(spec.boundary().kind, PotentialKind::Zero | PotentialKind::SmoothQuadratic { .. }) {
            return Err(Error::config("boundary", "the QP oracle needs a quadratic boundary potential or empty Gamma2"));
        }
        let n = spec.mesh().n_nodes();
        let zero = vec![0.0; n];
        let sys = assembly::system_raw(spec, &zero, ConstraintTerm::None, false)?;
        let (r0, _) = assembly::total_residual_raw(spec, &zero, ConstraintTerm::None)?;
        let free: Vec<usize> = (0..n).filter(|&i| !spec.dirichlet_mask()[i]).collect();
        Ok(Self {
            stiffness: sys.jacobian.submatrix(&free, &free),
            load: free.iter().map(|&i| -r0[i]).collect(),
            upper: free.iter().map(|&i| spec.obstacle().values()[i]).collect(),
            free,
        })
    }

    pub fn n_constrained(&self) -> usize {
        self.upper.iter().filter(|v| v.is_finite()).count()
    }

    /// Multiplier `b - S u` of the bound constraints.
    pub fn multiplier(&self, u: &[f64]) -> Vec<f64> {
        let su = self.stiffness.mul_vec(u);
        self.load.iter().zip(su).map(|(b, s)| b - s).collect()
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        let su = self.stiffness.mul_vec(u);
        u.iter().zip(&su).zip(&self.load).map(|((u, s), b)| 0.5 * u * s - b * u).sum()
    }

    fn scale(&self) -> f64 {
        1.0 + self.load.iter().fold(0.0f64, |m, b| m.max(b.abs()))
    }

    pub fn solve_enumeration(&self) -> Result<Vec<f64>> {
        let constrained: Vec<usize> = (0..self.free.len()).filter(|&k| self.upper[k].is_finite()).collect();
        let m = constrained.len();
        if m > MAX_ENUMERATION {
            return Err(Error::config(
                "oracle",
                format!("{m} constrained unknowns exceed the enumeration limit {MAX_ENUMERATION}"),
            ));
        }
        let tol = 1e-10 * self.scale();
        for set in 0u32..(1u32 << m) {
            let mut active = vec![false; self.free.len()];
            for (bit, &k) in constrained.iter().enumerate() {
                active[k] = set & (1 << bit) != 0;
            }
            let Some(u) = self.solve_with_active(&active) else {
                continue;
            };
            let lambda = self.multiplier(&u);
            let primal = (0..u.len()).all(|k| u[k] <= self.upper[k] + tol);
            let dual = (0..u.len()).all(|k| !active[k] || lambda[k] >= -tol);
            if primal && dual {
                return Ok(u);
            }
        }
        Err(Error::OracleFailure("no KKT point among the active sets".into()))
    }

    fn solve_with_active(&self, active: &[bool]) -> Option<Vec<f64>> {
        let inactive: Vec<usize> = (0..active.len()).filter(|&k| !active[k]).collect();
        let mut u: Vec<f64> = (0..active.len()).map(|k| if active[k] { self.upper[k] } else { 0.0 }).collect();
        if inactive.is_empty() {
            return Some(u);
        }
        let su = self.stiffness.mul_vec(&u);
        let rhs: Vec<f64> = inactive.iter().map(|&k| self.load[k] - su[k]).collect();
        let sub = self.stiffness.submatrix(&inactive, &inactive);
        let x = sub.solve(&rhs).ok()?;
        for (&k, v) in inactive.iter().zip(x) {
            u[k] = v;
        }
        Some(u)
    }

    pub fn solve_projected_gradient(&self, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let l = self.stiffness.norm_inf();
        if !(l > 0.0) {
            return Err(Error::OracleFailure("zero stiffness".into()));
        }
        let mut u: Vec<f64> = self.upper.iter().map(|&p| p.min(0.0)).collect();
        for _ in 0..max_iter {
            let lambda = self.multiplier(&u);
            let mut change = 0.0f64;
            for k in 0..u.len() {
                let next = (u[k] + lambda[k] / l).min(self.upper[k]);
                change = change.max((next - u[k]).abs());
                u[k] = next;
            }
            if change <= tol {
                return Ok(u);
            }
        }
        Err(Error::OracleFailure(format!("projected gradient did not reach {tol:e} in {max_iter} steps")))
    }
}

/// Solution of the linear obstacle problem described by `spec`, using the
/// problem's own selection rule for the (state-independent) reaction.
pub fn qp_oracle(spec: &ProblemSpec, mode: OracleMode) -> Result<DiscreteFunction> {
    let qp = QuadraticProgram::from_spec(spec)?;
    let reduced = match mode {
        OracleMode::Enumeration => qp.solve_enumeration()?,
        OracleMode::ProjectedGradient => qp.solve_projected_gradient(1e-12, 50_000_000)?,
        OracleMode::Auto if qp.n_constrained() <= MAX_ENUMERATION => qp.solve_enumeration()?,
        OracleMode::Auto => qp.solve_projected_gradient(1e-12, 50_000_000)?,
    };
    let mut u = vec![0.0; spec.mesh().n_nodes()];
    for (&i, v) in qp.free.iter().zip(reduced) {
        u[i] = v;
    }
    DiscreteFunction::new(spec.mesh().clone(), u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{BoundaryPotentialSpec, ReactionKind, ReactionSpec, SelectionRule};
    use crate::mesh::{BoundaryPartition, Mesh};
    use crate::musielak_orlicz::PhaseConfig;

    fn contact(n: usize, phi: f64) -> ProblemSpec {
        let m = Mesh::interval(0.0, 1.0, n, &BoundaryPartition::AllGamma1).unwrap();
        let phase = PhaseConfig::constant(2.0, 2.0, &m, 0.0).unwrap();
        let obs = DiscreteFunction::obstacle(m.clone(), vec![phi; n + 1]).unwrap();
        let reaction = ReactionSpec::new(ReactionKind::Constant { value: 8.0 }, SelectionRule::Midpoint);
        ProblemSpec::new(m, phase, obs, reaction, BoundaryPotentialSpec::zero(), 0.0).unwrap()
    }

    #[test]
    fn unconstrained_is_linear_solve() {
        let spec = contact(8, f64::INFINITY);
        let u = qp_oracle(&spec, OracleMode::Enumeration).unwrap();
        // P1 with lumped load is nodally exact for constant f in 1D
        for (x, v) in spec.mesh().nodes().iter().zip(u.values()) {
            assert!((v - 4.0 * x[0] * (1.0 - x[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn contact_region_is_flat() {
        let spec = contact(12, 0.5);
        let u = qp_oracle(&spec, OracleMode::Enumeration).unwrap();
        let touching = u.values().iter().filter(|&&v| (v - 0.5).abs() < 1e-12).count();
        assert!(touching >= 2, "{:?}", u.values());
        assert!(u.values().iter().all(|&v| v <= 0.5 + 1e-12));
        let pg = qp_oracle(&spec, OracleMode::ProjectedGradient).unwrap();
        assert!(u.lumped_distance(&pg) < 1e-9);
    }

    #[test]
    fn rejects_nonlinear_phase() {
        let m = Mesh::interval(0.0, 1.0, 4, &BoundaryPartition::AllGamma1).unwrap();
        let phase = PhaseConfig::constant(2.5, 3.0, &m, 1.0).unwrap();
        let obs = DiscreteFunction::obstacle(m.clone(), vec![1.0; 5]).unwrap();
        let spec = ProblemSpec::new(m, phase, obs, ReactionSpec::zero(), BoundaryPotentialSpec::zero(), 0.0).unwrap();
        assert!(qp_oracle(&spec, OracleMode::Auto).is_err());
    }
}
