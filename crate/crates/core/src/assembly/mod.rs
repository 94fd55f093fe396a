//! Residuals and Jacobians of the penalized double-phase obstacle problem:
//! the double-phase operator, the penalty, the reaction selection and the
//! smoothed boundary term, plus the exact Clarke pairing on `Gamma2`.

mod potential;
mod problem;
mod reaction;

pub use potential::{BoundaryPotentialSpec, PotentialGrowth, PotentialKind};
pub use problem::ProblemSpec;
pub use reaction::{BoundPartials, ReactionGrowth, ReactionKind, ReactionSpec, SelectionRule};

use crate::discrete::DiscreteFunction;
use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};

/// Flux coefficients of one element: the scalar factor
/// `g^(p-2) + mu g^(q-2)` and the factor of the rank-one tensor term
/// `(p-2) g^(p-4) + mu (q-2) g^(q-4)`, with `g = sqrt(|grad u|^2 + eps^2)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coefficients {
    pub scalar: f64,
    pub tensor: f64,
}

pub(crate) fn coefficients(p: f64, q: f64, mu: f64, grad: [f64; 2], eps: f64, element: usize) -> Result<Coefficients> {
    let g2 = grad[0] * grad[0] + grad[1] * grad[1] + eps * eps;
    if g2 == 0.0 {
        if p < 2.0 || (q < 2.0 && mu > 0.0) {
            return Err(Error::Singularity { element });
        }
        let unit = |e: f64| if e == 2.0 { 1.0 } else { 0.0 };
        return Ok(Coefficients {
            scalar: unit(p) + mu * unit(q),
            tensor: 0.0,
        });
    }
    let g = g2.sqrt();
    let scalar = g.powf(p - 2.0) + mu * g.powf(q - 2.0);
    let tensor = (p - 2.0) * g.powf(p - 4.0) + mu * (q - 2.0) * g.powf(q - 4.0);
    Ok(Coefficients { scalar, tensor })
}

fn check(spec: &ProblemSpec, f: &DiscreteFunction) -> Result<()> {
    f.check_mesh(spec.mesh())
}

/// `<A(u), v>` with the gradient regularization of `spec`.
pub fn apply_a(spec: &ProblemSpec, u: &DiscreteFunction, v: &DiscreteFunction) -> Result<f64> {
    check(spec, u)?;
    check(spec, v)?;
    apply_a_raw(spec, u.values(), v.values())
}

pub(crate) fn apply_a_raw(spec: &ProblemSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    let r = a_residual_raw(spec, u)?;
    Ok(crate::linalg::dot(&r, v))
}

/// Nodal residual `r` of the double-phase operator: `r . v = <A(u), v>`.
pub fn assemble_a_residual(spec: &ProblemSpec, u: &DiscreteFunction) -> Result<Vec<f64>> {
    check(spec, u)?;
    a_residual_raw(spec, u.values())
}

pub(crate) fn a_residual_raw(spec: &ProblemSpec, u: &[f64]) -> Result<Vec<f64>> {
    let mesh = spec.mesh();
    let phase = spec.phase();
    let mut r = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let grad = mesh.element_gradient(e, u);
        let c = coefficients(phase.p(), phase.q(), phase.mu()[e], grad, spec.eps_grad(), e)?;
        let scale = mesh.element_volume(e) * c.scalar;
        for (&n, bg) in mesh.element(e).iter().zip(mesh.basis_gradients(e)) {
            r[n] += scale * (grad[0] * bg[0] + grad[1] * bg[1]);
        }
    }
    Ok(r)
}

/// Exact derivative of [`assemble_a_residual`] with respect to `u`.
pub fn assemble_a_jacobian(spec: &ProblemSpec, u: &DiscreteFunction) -> Result<SparseMatrix> {
    check(spec, u)?;
    a_jacobian_raw(spec, u.values(), false)
}

/// With `frozen`, only the scalar coefficient is kept (Picard linearization).
pub(crate) fn a_jacobian_raw(spec: &ProblemSpec, u: &[f64], frozen: bool) -> Result<SparseMatrix> {
    let mesh = spec.mesh();
    let phase = spec.phase();
    let n = mesh.n_nodes();
    let mut b = TripletBuilder::new(n, n);
    for e in 0..mesh.n_elements() {
        let grad = mesh.element_gradient(e, u);
        let c = coefficients(phase.p(), phase.q(), phase.mu()[e], grad, spec.eps_grad(), e)?;
        let vol = mesh.element_volume(e);
        let nodes = mesh.element(e);
        let bgs = mesh.basis_gradients(e);
        let stiff = mesh.element_stiffness(e);
        let proj: Vec<f64> = bgs.iter().map(|bg| grad[0] * bg[0] + grad[1] * bg[1]).collect();
        for (a, &na) in nodes.iter().enumerate() {
            for (bb, &nb) in nodes.iter().enumerate() {
                let mut k = c.scalar * stiff[a][bb];
                if !frozen && c.tensor != 0.0 {
                    k += vol * c.tensor * proj[a] * proj[bb];
                }
                b.push(na, nb, k);
            }
        }
    }
    Ok(b.build())
}

/// Penalty residual `(w_i / rho) (u_i - Phi_i)^+` and its generalized
/// derivative diagonal `(w_i / rho) [u_i > Phi_i]` (zero at the kink).
pub fn assemble_penalty(spec: &ProblemSpec, u: &DiscreteFunction, rho: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check(spec, u)?;
    penalty_raw(spec, u.values(), rho)
}

pub(crate) fn penalty_raw(spec: &ProblemSpec, u: &[f64], rho: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::config("solver.rho", format!("penalty parameter must be positive, got {rho}")));
    }
    let w = spec.mesh().lumped_weights();
    let phi = spec.obstacle().values();
    let mut r = vec![0.0; u.len()];
    let mut d = vec![0.0; u.len()];
    for i in 0..u.len() {
        if phi[i].is_finite() && u[i] > phi[i] {
            r[i] = w[i] / rho * (u[i] - phi[i]);
            d[i] = w[i] / rho;
        }
    }
    Ok((r, d))
}

/// Reaction contribution: residual `-w_i eta_i`, its Jacobian, and the selection `eta`.
#[derive(Debug, Clone)]
pub struct ReactionTerm {
    pub residual: Vec<f64>,
    pub jacobian: SparseMatrix,
    pub eta: Vec<f64>,
}

pub fn assemble_reaction(spec: &ProblemSpec, u: &DiscreteFunction) -> Result<ReactionTerm> {
    check(spec, u)?;
    reaction_raw(spec, u.values(), true)
}

/// Selection `eta_i = select(x_i, u_i, xi_i)` with `xi_i` the volume-weighted
/// average of the adjacent element gradients.
pub(crate) fn selection_raw(spec: &ProblemSpec, u: &[f64]) -> Result<Vec<f64>> {
    let mesh = spec.mesh();
    let reaction = spec.reaction();
    let needs_grad = reaction.kind.depends_on_gradient();
    (0..mesh.n_nodes())
        .map(|i| {
            let xi = if needs_grad { mesh.nodal_gradient(i, u) } else { [0.0; 2] };
            let eta = reaction.select(&mesh.node(i), u[i], xi);
            if eta.is_finite() {
                Ok(eta)
            } else {
                Err(Error::Evaluation(format!("non-finite reaction selection at node {i}")))
            }
        })
        .collect()
}

pub(crate) fn reaction_raw(spec: &ProblemSpec, u: &[f64], with_jacobian: bool) -> Result<ReactionTerm> {
    let mesh = spec.mesh();
    let reaction = spec.reaction();
    let w = mesh.lumped_weights();
    let n = mesh.n_nodes();
    let eta = selection_raw(spec, u)?;
    let residual: Vec<f64> = eta.iter().zip(w).map(|(e, w)| -w * e).collect();
    let mut b = TripletBuilder::new(n, n);
    if with_jacobian && !reaction.kind.is_state_independent() {
        let needs_grad = reaction.kind.depends_on_gradient();
        for i in 0..n {
            let xi = if needs_grad { mesh.nodal_gradient(i, u) } else { [0.0; 2] };
            let (ds, dxi) = reaction.select_partials(&mesh.node(i), u[i], xi);
            if ds != 0.0 {
                b.push(i, i, -w[i] * ds);
            }
            if dxi != [0.0, 0.0] {
                let els = mesh.node_elements(i);
                let total: f64 = els.iter().map(|&e| mesh.element_volume(e)).sum();
                for &e in els {
                    let f = mesh.element_volume(e) / total;
                    for (&nj, bg) in mesh.element(e).iter().zip(mesh.basis_gradients(e)) {
                        b.push(i, nj, -w[i] * f * (dxi[0] * bg[0] + dxi[1] * bg[1]));
                    }
                }
            }
        }
    }
    Ok(ReactionTerm {
        residual,
        jacobian: b.build(),
        eta,
    })
}

/// Smoothed boundary residual `bw_i g_delta(u_i)` on `Gamma2` and its derivative diagonal.
pub fn assemble_boundary_term(spec: &ProblemSpec, u: &DiscreteFunction) -> Result<(Vec<f64>, Vec<f64>)> {
    check(spec, u)?;
    boundary_raw(spec, u.values())
}

pub(crate) fn boundary_raw(spec: &ProblemSpec, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = vec![0.0; u.len()];
    let mut d = vec![0.0; u.len()];
    if !spec.has_gamma2() {
        return Ok((r, d));
    }
    let pot = spec.boundary();
    pot.check_smoothing()?;
    let bw = spec.boundary_weights();
    for &i in spec.gamma2_nodes() {
        let (g, dg) = pot.kind.smoothed(u[i], pot.delta);
        r[i] = bw[i] * g;
        d[i] = bw[i] * dg;
    }
    Ok((r, d))
}

/// `sum_{Gamma2} bw_i j°(u_i; v_i)` with the exact (unsmoothed) directional derivative.
pub fn clarke_directional(spec: &ProblemSpec, u: &DiscreteFunction, v: &DiscreteFunction) -> Result<f64> {
    check(spec, u)?;
    check(spec, v)?;
    Ok(clarke_raw(spec, u.values(), v.values()))
}

pub(crate) fn clarke_raw(spec: &ProblemSpec, u: &[f64], v: &[f64]) -> f64 {
    let bw = spec.boundary_weights();
    let kind = spec.boundary().kind;
    spec.gamma2_nodes()
        .iter()
        .map(|&i| bw[i] * kind.directional(u[i], v[i]))
        .sum()
}

/// `sum_{Gamma2} bw_i j(u_i)`.
pub fn boundary_energy(spec: &ProblemSpec, u: &[f64]) -> f64 {
    let bw = spec.boundary_weights();
    let kind = spec.boundary().kind;
    spec.gamma2_nodes().iter().map(|&i| bw[i] * kind.value(u[i])).sum()
}

/// How the obstacle constraint enters the residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintTerm {
    /// `(1/rho) (u - Phi)^+`
    Penalty { rho: f64 },
    /// Moreau-Yosida gradient of the indicator of `K` with parameter `eps`.
    MoreauYosida { eps: f64 },
    None,
}

/// Residual, Jacobian and Dirichlet mask of the full system. Rows at
/// `Gamma1` nodes are identity rows enforcing `u = 0`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub residual: Vec<f64>,
    pub jacobian: SparseMatrix,
    pub dirichlet_mask: Vec<bool>,
    pub eta: Vec<f64>,
}

fn constraint_raw(spec: &ProblemSpec, u: &[f64], term: ConstraintTerm) -> Result<(Vec<f64>, Vec<f64>)> {
    match term {
        ConstraintTerm::Penalty { rho } => penalty_raw(spec, u, rho),
        ConstraintTerm::MoreauYosida { eps } => {
            let k = crate::nonsmooth::ConstraintSetK::from_spec(spec);
            let g = k.moreau_yosida_grad_raw(u, eps)?;
            let w = spec.mesh().lumped_weights();
            let d = (0..u.len())
                .map(|i| if k.is_clipped(u, i) { w[i] / eps } else { 0.0 })
                .collect();
            Ok((g, d))
        }
        ConstraintTerm::None => Ok((vec![0.0; u.len()], vec![0.0; u.len()])),
    }
}

/// Unmasked total residual and the selection it used.
pub(crate) fn total_residual_raw(spec: &ProblemSpec, u: &[f64], term: ConstraintTerm) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = a_residual_raw(spec, u)?;
    let react = reaction_raw(spec, u, false)?;
    let (rb, _) = boundary_raw(spec, u)?;
    let (rc, _) = constraint_raw(spec, u, term)?;
    for i in 0..r.len() {
        r[i] += react.residual[i] + rb[i] + rc[i];
    }
    Ok((r, react.eta))
}

pub(crate) fn mask_residual(spec: &ProblemSpec, r: &mut [f64], u: &[f64]) {
    for (i, &m) in spec.dirichlet_mask().iter().enumerate() {
        if m {
            r[i] = u[i];
        }
    }
}

/// Masked residual and Jacobian. `frozen` drops the tensor part of the
/// double-phase Jacobian.
pub(crate) fn system_raw(spec: &ProblemSpec, u: &[f64], term: ConstraintTerm, frozen: bool) -> Result<AssembledSystem> {
    let ja = a_jacobian_raw(spec, u, frozen)?;
    let mut r = a_residual_raw(spec, u)?;
    let react = reaction_raw(spec, u, true)?;
    let (rb, db) = boundary_raw(spec, u)?;
    let (rc, dc) = constraint_raw(spec, u, term)?;
    let mut diag = vec![0.0; u.len()];
    for i in 0..r.len() {
        r[i] += react.residual[i] + rb[i] + rc[i];
        diag[i] = db[i] + dc[i];
    }
    let jac = ja.add(&react.jacobian).add(&SparseMatrix::from_diagonal(&diag));
    mask_residual(spec, &mut r, u);
    Ok(AssembledSystem {
        residual: r,
        jacobian: jac.with_identity_rows(spec.dirichlet_mask()),
        dirichlet_mask: spec.dirichlet_mask().to_vec(),
        eta: react.eta,
    })
}

pub fn assemble_system(spec: &ProblemSpec, u: &DiscreteFunction, term: ConstraintTerm) -> Result<AssembledSystem> {
    check(spec, u)?;
    system_raw(spec, u.values(), term, false)
}
