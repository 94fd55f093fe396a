//! Projection onto the discrete constraint set `K`, the Moreau-Yosida
//! envelope of its indicator, and the plus-part operator.
//!
//! The envelope is taken in the vertex-lumped weighted Euclidean norm, for
//! which the projection is nodewise clipping.

use std::sync::Arc;

use crate::assembly::ProblemSpec;
use crate::discrete::DiscreteFunction;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// `K = { u : u_i <= Phi_i where Phi_i is finite, u_i = 0 on Gamma1 }`.
#[derive(Debug, Clone)]
pub struct ConstraintSetK {
    mesh: Arc<Mesh>,
    obstacle: Vec<f64>,
    dirichlet_mask: Vec<bool>,
}

impl ConstraintSetK {
    pub fn new(obstacle: &DiscreteFunction, dirichlet_mask: Vec<bool>) -> Result<Self> {
        if dirichlet_mask.len() != obstacle.values().len() {
            return Err(Error::MeshMismatch);
        }
        Ok(Self {
            mesh: obstacle.mesh().clone(),
            obstacle: obstacle.values().to_vec(),
            dirichlet_mask,
        })
    }

    pub fn from_spec(spec: &ProblemSpec) -> Self {
        Self {
            mesh: spec.mesh().clone(),
            obstacle: spec.obstacle().values().to_vec(),
            dirichlet_mask: spec.dirichlet_mask().to_vec(),
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn obstacle(&self) -> &[f64] {
        &self.obstacle
    }

    pub fn contains(&self, u: &DiscreteFunction) -> bool {
        u.same_mesh(&self.mesh) && self.contains_raw(u.values())
    }

    pub fn contains_raw(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(&self.obstacle)
            .zip(&self.dirichlet_mask)
            .all(|((&v, &phi), &m)| if m { v == 0.0 } else { v <= phi })
    }

    /// Nearest point of `K` in the lumped norm: `min(u_i, Phi_i)`, then 0 on `Gamma1`.
    pub fn project(&self, u: &DiscreteFunction) -> Result<DiscreteFunction> {
        u.check_mesh(&self.mesh)?;
        Ok(u.with_values(self.project_raw(u.values())))
    }

    pub fn project_raw(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.obstacle)
            .zip(&self.dirichlet_mask)
            .map(|((&v, &phi), &m)| if m { 0.0 } else { v.min(phi) })
            .collect()
    }

    /// Whether the projection moves node `i` (the active branch of the
    /// generalized derivative; ties count as inactive).
    pub fn is_clipped(&self, u: &[f64], i: usize) -> bool {
        if self.dirichlet_mask[i] {
            u[i] != 0.0
        } else {
            u[i] > self.obstacle[i]
        }
    }

    /// `||u - P_K u||_w^2 / (2 eps)`.
    pub fn moreau_yosida_value(&self, u: &DiscreteFunction, eps: f64) -> Result<f64> {
        u.check_mesh(&self.mesh)?;
        check_eps(eps)?;
        let w = self.mesh.lumped_weights();
        let proj = self.project_raw(u.values());
        Ok(u.values()
            .iter()
            .zip(&proj)
            .zip(w)
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum::<f64>()
            / (2.0 * eps))
    }

    /// Nodal gradient `(w_i / eps) (u_i - (P_K u)_i)`.
    pub fn moreau_yosida_grad(&self, u: &DiscreteFunction, eps: f64) -> Result<Vec<f64>> {
        u.check_mesh(&self.mesh)?;
        self.moreau_yosida_grad_raw(u.values(), eps)
    }

    pub(crate) fn moreau_yosida_grad_raw(&self, u: &[f64], eps: f64) -> Result<Vec<f64>> {
        check_eps(eps)?;
        let w = self.mesh.lumped_weights();
        let proj = self.project_raw(u);
        Ok(u.iter().zip(&proj).zip(w).map(|((a, b), w)| w / eps * (a - b)).collect())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::config("solver.rho", format!("Moreau-Yosida parameter must be positive, got {eps}")))
    }
}

/// Nodewise `max(u_i - Phi_i, 0)`; infinite obstacle values give 0.
pub fn plus_part(u: &DiscreteFunction, phi: &DiscreteFunction) -> Result<DiscreteFunction> {
    phi.check_mesh(u.mesh())?;
    Ok(u.with_values(plus_part_raw(u.values(), phi.values())))
}

pub fn plus_part_raw(u: &[f64], phi: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(phi)
        .map(|(&v, &p)| if p.is_finite() { (v - p).max(0.0) } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryPartition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn free_mesh(n: usize) -> Arc<Mesh> {
        Mesh::interval(0.0, 1.0, n, &BoundaryPartition::AllGamma1).unwrap()
    }

    #[test]
    fn clipping_example() {
        let m = free_mesh(1);
        let phi = DiscreteFunction::new(m.clone(), vec![1.0, 1.0]).unwrap();
        let k = ConstraintSetK::new(&phi, vec![false, false]).unwrap();
        let u = DiscreteFunction::new(m, vec![2.0, 0.5]).unwrap();
        assert_eq!(k.project(&u).unwrap().values(), &[1.0, 0.5]);
        let p = k.project(&u).unwrap();
        assert!(k.contains(&p));
        assert_eq!(k.project(&p).unwrap().values(), p.values());
    }

    #[test]
    fn scalar_envelope() {
        // single free node of unit weight: interval [0, 2] with a Dirichlet left end
        let m = Mesh::interval(0.0, 2.0, 2, &BoundaryPartition::AllGamma1).unwrap();
        let phi = DiscreteFunction::new(m.clone(), vec![1.0; 3]).unwrap();
        let k = ConstraintSetK::new(&phi, vec![false; 3]).unwrap();
        let u = DiscreteFunction::new(m.clone(), vec![1.0, 3.0, 1.0]).unwrap();
        assert_eq!(m.lumped_weights()[1], 1.0);
        assert!((k.moreau_yosida_value(&u, 0.5).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(k.moreau_yosida_grad(&u, 0.5).unwrap(), vec![0.0, 4.0, 0.0]);
        assert!(k.moreau_yosida_value(&u, 0.0).is_err());
    }

    #[test]
    fn members_of_k_have_zero_envelope() {
        let m = free_mesh(6);
        let phi = DiscreteFunction::new(m.clone(), vec![0.5; 7]).unwrap();
        let k = ConstraintSetK::new(&phi, m.dirichlet_mask()).unwrap();
        let u = DiscreteFunction::new(m, vec![0.0, 0.4, -1.0, 0.5, 0.2, 0.1, 0.0]).unwrap();
        assert!(k.contains(&u));
        for eps in [1.0, 1e-3, 1e-9] {
            assert_eq!(k.moreau_yosida_value(&u, eps).unwrap(), 0.0);
            assert!(k.moreau_yosida_grad(&u, eps).unwrap().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn projection_is_nearest_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = free_mesh(9);
        let phi = DiscreteFunction::new(m.clone(), (0..10).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let k = ConstraintSetK::new(&phi, m.dirichlet_mask()).unwrap();
        let u = DiscreteFunction::new(m.clone(), (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let pu = k.project(&u).unwrap();
        let best = u.lumped_distance(&pu);
        for _ in 0..1000 {
            let cand: Vec<f64> = (0..10).map(|i| rng.gen_range(-2.0..2.0f64).min(phi.values()[i])).collect();
            let v = k.project(&DiscreteFunction::new(m.clone(), cand).unwrap()).unwrap();
            assert!(k.contains(&v));
            assert!(best <= u.lumped_distance(&v) + 1e-15);
        }
    }

    #[test]
    fn plus_part_cases() {
        let m = free_mesh(3);
        let phi = DiscreteFunction::obstacle(m.clone(), vec![1.0, 1.0, f64::INFINITY, 0.0]).unwrap();
        let below = DiscreteFunction::new(m.clone(), vec![0.0, 1.0, 5.0, -1.0]).unwrap();
        assert!(plus_part(&below, &phi).unwrap().values().iter().all(|&v| v == 0.0));
        let fin = DiscreteFunction::new(m.clone(), vec![0.5; 4]).unwrap();
        let above = DiscreteFunction::new(m, vec![1.5; 4]).unwrap();
        assert_eq!(plus_part(&above, &fin).unwrap().values(), &[1.0; 4]);
    }
}
