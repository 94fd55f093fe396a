use std::sync::Arc;

use super::potential::BoundaryPotentialSpec;
use super::reaction::ReactionSpec;
use crate::discrete::DiscreteFunction;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::musielak_orlicz::PhaseConfig;

/// One solvable obstacle problem instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    mesh: Arc<Mesh>,
    phase: PhaseConfig,
    obstacle: DiscreteFunction,
    reaction: ReactionSpec,
    boundary: BoundaryPotentialSpec,
    eps_grad: f64,
    dirichlet_mask: Vec<bool>,
    boundary_weights: Vec<f64>,
    gamma2_nodes: Vec<usize>,
}

impl ProblemSpec {
    pub fn new(
        mesh: Arc<Mesh>,
        phase: PhaseConfig,
        obstacle: DiscreteFunction,
        reaction: ReactionSpec,
        boundary: BoundaryPotentialSpec,
        eps_grad: f64,
    ) -> Result<Self> {
        phase.check_mesh(&mesh)?;
        obstacle.check_mesh(&mesh)?;
        if let Some(i) = obstacle.values().iter().position(|&v| v < 0.0) {
            return Err(Error::config("obstacle", format!("obstacle must be >= 0 (node {i})")));
        }
        if !(eps_grad.is_finite() && eps_grad >= 0.0) {
            return Err(Error::config("solver.eps_grad", "must be finite and >= 0"));
        }
        if (phase.p() < 2.0 || phase.q() < 2.0) && eps_grad <= 0.0 {
            return Err(Error::config("solver.eps_grad", "eps_grad > 0 is required when p < 2 or q < 2"));
        }
        reaction.rule.validate()?;
        reaction.check_ordering(mesh.nodes())?;
        let boundary_weights = mesh.boundary_lumped_weights(BoundaryTag::Gamma2);
        let gamma2_nodes: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| boundary_weights[i] > 0.0).collect();
        if !gamma2_nodes.is_empty() {
            boundary.check_smoothing()?;
        }
        let dirichlet_mask = mesh.dirichlet_mask();
        Ok(Self {
            mesh,
            phase,
            obstacle,
            reaction,
            boundary,
            eps_grad,
            dirichlet_mask,
            boundary_weights,
            gamma2_nodes,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn phase(&self) -> &PhaseConfig {
        &self.phase
    }

    pub fn obstacle(&self) -> &DiscreteFunction {
        &self.obstacle
    }

    pub fn reaction(&self) -> &ReactionSpec {
        &self.reaction
    }

    pub fn boundary(&self) -> &BoundaryPotentialSpec {
        &self.boundary
    }

    pub fn eps_grad(&self) -> f64 {
        self.eps_grad
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet_mask
    }

    /// Lumped `Gamma2` surface weights (zero off `Gamma2`).
    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary_weights
    }

    pub fn gamma2_nodes(&self) -> &[usize] {
        &self.gamma2_nodes
    }

    pub fn has_gamma2(&self) -> bool {
        !self.gamma2_nodes.is_empty()
    }

    /// True when every node is unconstrained (`Phi = +inf`).
    pub fn is_unconstrained(&self) -> bool {
        self.obstacle.values().iter().all(|v| v.is_infinite())
    }

    pub fn with_reaction(&self, reaction: ReactionSpec) -> Result<Self> {
        reaction.rule.validate()?;
        Ok(Self {
            reaction,
            ..self.clone()
        })
    }

    /// Copy with new smoothing parameters for the gradient and the boundary term.
    pub fn with_smoothing(&self, eps_grad: f64, delta: f64) -> Result<Self> {
        let boundary = BoundaryPotentialSpec { delta, ..self.boundary };
        Self::new(
            self.mesh.clone(),
            self.phase.clone(),
            self.obstacle.clone(),
            self.reaction.clone(),
            boundary,
            eps_grad,
        )
    }

    /// Zero on `Gamma1` nodes, unchanged elsewhere.
    pub fn apply_dirichlet(&self, values: &mut [f64]) {
        for (v, &m) in values.iter_mut().zip(&self.dirichlet_mask) {
            if m {
                *v = 0.0;
            }
        }
    }

    pub fn satisfies_dirichlet(&self, values: &[f64]) -> bool {
        values.iter().zip(&self.dirichlet_mask).all(|(v, &m)| !m || *v == 0.0)
    }
}
