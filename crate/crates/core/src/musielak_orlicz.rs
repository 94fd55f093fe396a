//! Musielak-Orlicz modular of the double-phase integrand
//! `H(x, t) = t^p + mu(x) t^q`, its Luxemburg norm and the weighted
//! `q`-seminorm, for P1 functions and their gradients.
//!
//! Zero-order integrands use vertex lumping; gradient integrands use one
//! point per element, which is exact because P1 gradients are constant on
//! each element. `mu` is piecewise constant per element.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discrete::DiscreteFunction;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Exponents and weight of the double-phase integrand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    p: f64,
    q: f64,
    /// Per-element weight values.
    mu: Vec<f64>,
}

impl PhaseConfig {
    /// Requires `1 < p <= q`; `p == q` is accepted so that single-phase
    /// (e.g. linear, `p = q = 2`) instances share the same code path.
    pub fn new(p: f64, q: f64, mu: Vec<f64>) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::config("phase.p", format!("need p > 1, got {p}")));
        }
        if !(q.is_finite() && q >= p) {
            return Err(Error::config("phase.q", format!("need q >= p, got q = {q}, p = {p}")));
        }
        if let Some(e) = mu.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::config("phase.mu", format!("weight must be finite and >= 0 (element {e})")));
        }
        Ok(Self { p, q, mu })
    }

    /// Samples `mu` at element barycenters.
    pub fn from_fn(p: f64, q: f64, mesh: &Mesh, mu: impl Fn(&[f64; 2]) -> f64) -> Result<Self> {
        let values = (0..mesh.n_elements()).map(|e| mu(&mesh.barycenter(e))).collect();
        Self::new(p, q, values)
    }

    pub fn constant(p: f64, q: f64, mesh: &Mesh, mu: f64) -> Result<Self> {
        Self::new(p, q, vec![mu; mesh.n_elements()])
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.mu.len() == mesh.n_elements() {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

/// Value of the modular split into its `p`- and `q`-growth parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularValue {
    pub value: f64,
    pub p_part: f64,
    pub q_part: f64,
}

impl ModularValue {
    fn from_parts(p_part: f64, q_part: f64) -> Self {
        Self {
            value: p_part + q_part,
            p_part,
            q_part,
        }
    }

    /// `rho(f / tau)`, using homogeneity of each part.
    pub fn scaled(&self, tau: f64, cfg: &PhaseConfig) -> f64 {
        self.p_part / tau.powf(cfg.p) + self.q_part / tau.powf(cfg.q)
    }
}

fn modular_of_values(mesh: &Mesh, cfg: &PhaseConfig, values: &[f64], of_gradient: bool) -> ModularValue {
    let (p, q) = (cfg.p, cfg.q);
    let mut pp = 0.0;
    let mut qp = 0.0;
    if of_gradient {
        for e in 0..mesh.n_elements() {
            let g = mesh.element_gradient(e, values);
            let t = (g[0] * g[0] + g[1] * g[1]).sqrt();
            let vol = mesh.element_volume(e);
            pp += vol * t.powf(p);
            qp += vol * cfg.mu[e] * t.powf(q);
        }
    } else {
        let nloc = mesh.nodes_per_element() as f64;
        for e in 0..mesh.n_elements() {
            let w = mesh.element_volume(e) / nloc;
            for &n in mesh.element(e) {
                let t = values[n].abs();
                pp += w * t.powf(p);
                qp += w * cfg.mu[e] * t.powf(q);
            }
        }
    }
    ModularValue::from_parts(pp, qp)
}

/// `int |g|^p + mu |g|^q dx` where `g` is `f` or `|grad f|`.
pub fn modular(f: &DiscreteFunction, cfg: &PhaseConfig, of_gradient: bool) -> Result<ModularValue> {
    cfg.check_mesh(f.mesh())?;
    Ok(modular_of_values(f.mesh(), cfg, f.values(), of_gradient))
}

const MAX_BRACKET_STEPS: usize = 200;
const TAU_TOL: f64 = 1e-12;

/// Luxemburg norm `inf { tau > 0 : rho(f / tau) <= 1 }` by bracketing and
/// bisection on the decreasing map `tau -> rho(f / tau)`.
pub fn luxemburg_norm(f: &DiscreteFunction, cfg: &PhaseConfig, of_gradient: bool) -> Result<f64> {
    let m = modular(f, cfg, of_gradient)?;
    Ok(luxemburg_from_modular(&m, cfg))
}

pub(crate) fn luxemburg_from_modular(m: &ModularValue, cfg: &PhaseConfig) -> f64 {
    if m.value == 0.0 {
        return 0.0;
    }
    let rho = |tau: f64| m.scaled(tau, cfg);
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    if rho(1.0) > 1.0 {
        for _ in 0..MAX_BRACKET_STEPS {
            hi *= 2.0;
            if rho(hi) <= 1.0 {
                break;
            }
            lo = hi;
        }
    } else {
        for _ in 0..MAX_BRACKET_STEPS {
            lo /= 2.0;
            if rho(lo) > 1.0 {
                break;
            }
            hi = lo;
        }
    }
    // absolute tolerance, tightened to relative for norms below 1
    while hi - lo > TAU_TOL * hi.min(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Outcome of the norm-modular relations for one function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormModularRelations {
    pub norm: f64,
    pub modular: f64,
    /// `rho(f / ||f||) = 1` (vacuous for `f = 0`).
    pub unit_scaling: bool,
    /// `||f||` and `rho(f)` lie on the same side of 1 (or both equal 1).
    pub same_side_of_one: bool,
    /// `||f||^q <= rho(f) <= ||f||^p` below 1, exponents swapped above 1.
    pub power_bounds: bool,
}

impl NormModularRelations {
    pub fn all(&self) -> bool {
        self.unit_scaling && self.same_side_of_one && self.power_bounds
    }
}

/// Checks the norm-modular relations at relative tolerance `tol`. Values
/// within `tol` of 1 count as equal to 1.
pub fn norm_modular_relations(f: &DiscreteFunction, cfg: &PhaseConfig, of_gradient: bool, tol: f64) -> Result<NormModularRelations> {
    let m = modular(f, cfg, of_gradient)?;
    let norm = luxemburg_from_modular(&m, cfg);
    let side = |v: f64| {
        if (v - 1.0).abs() <= tol {
            0
        } else if v < 1.0 {
            -1
        } else {
            1
        }
    };
    let unit_scaling = m.value == 0.0 || (m.scaled(norm, cfg) - 1.0).abs() <= tol;
    let (lo, hi) = if norm < 1.0 {
        (norm.powf(cfg.q), norm.powf(cfg.p))
    } else {
        (norm.powf(cfg.p), norm.powf(cfg.q))
    };
    let slack = tol * m.value.max(f64::MIN_POSITIVE);
    Ok(NormModularRelations {
        norm,
        modular: m.value,
        unit_scaling,
        same_side_of_one: side(norm) == side(m.value),
        power_bounds: lo <= m.value + slack && m.value <= hi + slack,
    })
}

/// `(int mu |f|^q dx)^(1/q)` with lumped quadrature.
pub fn weighted_seminorm(f: &DiscreteFunction, cfg: &PhaseConfig) -> Result<f64> {
    let m = modular(f, cfg, false)?;
    Ok(m.q_part.powf(1.0 / cfg.q))
}

/// Discrete norm of the solution space: `||grad f||_H + ||f||_H`.
pub fn v_norm(f: &DiscreteFunction, cfg: &PhaseConfig) -> Result<f64> {
    Ok(luxemburg_norm(f, cfg, false)? + luxemburg_norm(f, cfg, true)?)
}

/// `v_norm(a - b)` on raw nodal vectors.
pub fn v_distance(mesh: &Arc<Mesh>, cfg: &PhaseConfig, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mv = modular_of_values(mesh, cfg, &d, false);
    let mg = modular_of_values(mesh, cfg, &d, true);
    luxemburg_from_modular(&mv, cfg) + luxemburg_from_modular(&mg, cfg)
}
