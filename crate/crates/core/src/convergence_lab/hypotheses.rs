//! Discrete Poincare and trace constants and the smallness condition on the
//! growth constants of the reaction and the boundary potential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::ProblemSpec;
use crate::linalg::{dot, SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryTag, Mesh};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// Estimate of `sup ||u||_p / ||grad u||_p` over the discrete space.
    pub lambda1_est: f64,
    /// Same with the `L^p(Gamma2)` norm in the numerator; 0 when `Gamma2` is empty.
    pub lambda2_est: f64,
    /// True for the eigenvalue solve (`p = 2`), false for the ascent estimate.
    pub certified: bool,
    pub delta_theta1: f64,
    pub delta_theta2: f64,
    pub delta_theta3: f64,
    pub smallness_lhs: f64,
    pub passes: bool,
    pub notes: Vec<String>,
}

/// `1` if `theta == p`, `0` otherwise.
pub fn delta(theta: f64, p: f64) -> f64 {
    if theta == p {
        1.0
    } else {
        0.0
    }
}

pub fn validate_hypotheses(spec: &ProblemSpec) -> HypothesisReport {
    let mesh = spec.mesh();
    let p = spec.phase().p();
    let q = spec.phase().q();
    let mut notes = Vec::new();

    let volume_weights = mesh.lumped_weights().to_vec();
    let boundary_weights = mesh.boundary_lumped_weights(BoundaryTag::Gamma2);
    let (lambda1, lambda2, certified) = if p == 2.0 {
        (
            quadratic_constant(mesh, spec.dirichlet_mask(), &volume_weights),
            if spec.has_gamma2() {
                quadratic_constant(mesh, spec.dirichlet_mask(), &boundary_weights)
            } else {
                0.0
            },
            true,
        )
    } else {
        notes.push(format!("p = {p}: constants from gradient ascent, not certified"));
        (
            ascent_constant(mesh, spec.dirichlet_mask(), &volume_weights, p),
            if spec.has_gamma2() {
                ascent_constant(mesh, spec.dirichlet_mask(), &boundary_weights, p)
            } else {
                0.0
            },
            false,
        )
    };
    if !spec.has_gamma2() {
        notes.push("Gamma2 is empty: lambda2 = 0 and the boundary term drops out".into());
    }

    let n = mesh.dim() as f64;
    if p < n {
        let p_star = n * p / (n - p);
        if q >= p_star {
            notes.push(format!("q = {q} is not below the critical exponent {p_star}"));
        }
    }

    let f = spec.reaction().growth();
    let j = spec.boundary().growth();
    for (name, theta) in [("theta1", j.theta1), ("theta2", f.theta2), ("theta3", f.theta3)] {
        if !(1.0..=p).contains(&theta) {
            notes.push(format!("{name} = {theta} lies outside [1, p]"));
        }
    }
    let d1 = delta(j.theta1, p);
    let d2 = delta(f.theta2, p);
    let d3 = delta(f.theta3, p);
    let lhs = f.e_f * d2 + f.g_f * lambda1 * d3 + j.c_j * lambda2 * d1;
    let passes = lhs < 1.0;
    if !passes {
        notes.push(format!("smallness condition fails: {lhs} >= 1"));
    }
    HypothesisReport {
        lambda1_est: lambda1,
        lambda2_est: lambda2,
        certified,
        delta_theta1: d1,
        delta_theta2: d2,
        delta_theta3: d3,
        smallness_lhs: lhs,
        passes,
        notes,
    }
}

fn free_stiffness(mesh: &Mesh, free: &[usize]) -> SparseMatrix {
    let n = mesh.n_nodes();
    let mut b = TripletBuilder::new(n, n);
    for e in 0..mesh.n_elements() {
        let vol = mesh.element_volume(e);
        let nodes = mesh.element(e);
        let g = mesh.basis_gradients(e);
        for (a, &na) in nodes.iter().enumerate() {
            for (c, &nc) in nodes.iter().enumerate() {
                b.push(na, nc, vol * (g[a][0] * g[c][0] + g[a][1] * g[c][1]));
            }
        }
    }
    b.build().submatrix(free, free)
}

/// `sqrt(max x^T W x / x^T K x)` by power iteration on `K^-1 W`, with `K`
/// the stiffness matrix and `W` a diagonal lumped mass.
fn quadratic_constant(mesh: &Mesh, dirichlet: &[bool], weights: &[f64]) -> f64 {
    let free: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| !dirichlet[i]).collect();
    if free.is_empty() {
        return 0.0;
    }
    let Ok(lu) = free_stiffness(mesh, &free).factorize() else {
        return f64::INFINITY;
    };
    let w: Vec<f64> = free.iter().map(|&i| weights[i]).collect();
    let stiffness = free_stiffness(mesh, &free);
    let mut x: Vec<f64> = w.iter().map(|&wi| if wi > 0.0 { 1.0 } else { 0.0 }).collect();
    let mut est = 0.0;
    for _ in 0..10_000 {
        let wx: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        let y = lu.solve(&wx);
        let ky = stiffness.mul_vec(&y);
        let den = dot(&y, &ky);
        if !(den > 0.0) {
            return 0.0;
        }
        let wy: f64 = y.iter().zip(&w).map(|(a, b)| a * a * b).sum();
        let next = wy / den;
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        x = y.iter().map(|v| v / scale).collect();
        let done = (next - est).abs() <= 1e-14 * next;
        est = next;
        if done {
            break;
        }
    }
    est.sqrt()
}

/// Best ratio `||u||_{p,w} / ||grad u||_p` found by normalized gradient ascent
/// on its logarithm from ten seeded random starts.
fn ascent_constant(mesh: &Mesh, dirichlet: &[bool], weights: &[f64], p: f64) -> f64 {
    let n = mesh.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best = 0.0f64;
    for _ in 0..10 {
        let mut u: Vec<f64> = (0..n)
            .map(|i| if dirichlet[i] { 0.0 } else { rng.gen_range(0.0..1.0) })
            .collect();
        let mut value = log_ratio(mesh, weights, p, &u).0;
        let mut step = 0.1;
        for _ in 0..5000 {
            let (_, grad) = log_ratio(mesh, weights, p, &u);
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gmax == 0.0 || !value.is_finite() {
                break;
            }
            let mut improved = false;
            while step > 1e-14 {
                let trial: Vec<f64> = (0..n)
                    .map(|i| if dirichlet[i] { 0.0 } else { u[i] + step * grad[i] / gmax })
                    .collect();
                let tv = log_ratio(mesh, weights, p, &trial).0;
                if tv > value {
                    let s = trial.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    u = trial.iter().map(|v| v / s).collect();
                    value = tv;
                    step *= 2.0;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if value.is_finite() {
            best = best.max(value.exp());
        }
    }
    best
}

/// `ln(||u||_{p,w} / ||grad u||_p)` and its gradient.
fn log_ratio(mesh: &Mesh, weights: &[f64], p: f64, u: &[f64]) -> (f64, Vec<f64>) {
    let n = mesh.n_nodes();
    let num: f64 = u.iter().zip(weights).map(|(v, w)| w * v.abs().powf(p)).sum();
    let mut den = 0.0;
    let mut dden = vec![0.0; n];
    for e in 0..mesh.n_elements() {
        let g = mesh.element_gradient(e, u);
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let vol = mesh.element_volume(e);
        den += vol * norm.powf(p);
        if norm > 0.0 {
            let c = vol * p * norm.powf(p - 2.0);
            for (a, &node) in mesh.element(e).iter().enumerate() {
                let bg = mesh.basis_gradients(e)[a];
                dden[node] += c * (g[0] * bg[0] + g[1] * bg[1]);
            }
        }
    }
    if !(num > 0.0 && den > 0.0) {
        return (f64::NEG_INFINITY, vec![0.0; n]);
    }
    let value = (num.ln() - den.ln()) / p;
    let grad = (0..n)
        .map(|i| (weights[i] * p * u[i].abs().powf(p - 2.0) * u[i] / num - dden[i] / den) / p)
        .collect();
    (value, grad)
}
