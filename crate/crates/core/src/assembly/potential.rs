//! Boundary potentials `j(s)` on `Gamma2` with exact Clarke calculus and a
//! single-valued smoothed gradient for Newton.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::reaction::Params;
use crate::error::{Error, Result};

/// Growth constants of a potential: `|xi| <= a_j |s|^(q2-1) + b_j` and
/// `|xi s| <= c_j |s|^theta1 + d_j` for `xi` in the Clarke gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialGrowth {
    pub a_j: f64,
    pub b_j: f64,
    pub q2: f64,
    pub c_j: f64,
    pub d_j: f64,
    pub theta1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `j(s) = alpha |s|`
    Abs { alpha: f64 },
    /// `j(s) = alpha s^2 / 2`
    SmoothQuadratic { alpha: f64 },
    /// `j(s) = alpha s^2 / 2 - beta |s|`: a double well with a concave kink at 0.
    NonconvexWell { alpha: f64, beta: f64 },
}

impl PotentialKind {
    pub fn from_catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let take = Params::new("boundary", params);
        let kind = match name {
            "zero" => Self::Zero,
            "abs" => Self::Abs { alpha: take.get("alpha")? },
            "smooth_quadratic" => Self::SmoothQuadratic { alpha: take.get("alpha")? },
            "nonconvex_well" => Self::NonconvexWell {
                alpha: take.get("alpha")?,
                beta: take.get("beta")?,
            },
            other => {
                return Err(Error::config(
                    "boundary.kind",
                    format!("unknown potential `{other}` (zero, abs, smooth_quadratic, nonconvex_well)"),
                ))
            }
        };
        take.finish()?;
        match kind {
            Self::Abs { alpha } | Self::SmoothQuadratic { alpha } if alpha < 0.0 => {
                Err(Error::config("boundary.params.alpha", "must be >= 0"))
            }
            Self::NonconvexWell { alpha, beta } if alpha < 0.0 || beta < 0.0 => {
                Err(Error::config("boundary.params", "alpha and beta must be >= 0"))
            }
            k => Ok(k),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Abs { .. } => "abs",
            Self::SmoothQuadratic { .. } => "smooth_quadratic",
            Self::NonconvexWell { .. } => "nonconvex_well",
        }
    }

    pub fn is_nonsmooth(&self) -> bool {
        matches!(self, Self::Abs { alpha } if *alpha != 0.0)
            || matches!(self, Self::NonconvexWell { beta, .. } if *beta != 0.0)
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, Self::NonconvexWell { beta, .. } if *beta != 0.0)
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Abs { alpha } => alpha * s.abs(),
            Self::SmoothQuadratic { alpha } => 0.5 * alpha * s * s,
            Self::NonconvexWell { alpha, beta } => 0.5 * alpha * s * s - beta * s.abs(),
        }
    }

    /// Clarke generalized gradient `[lo, hi]` at `s`.
    pub fn clarke_interval(&self, s: f64) -> (f64, f64) {
        match *self {
            Self::Zero => (0.0, 0.0),
            Self::Abs { alpha } => {
                if s > 0.0 {
                    (alpha, alpha)
                } else if s < 0.0 {
                    (-alpha, -alpha)
                } else {
                    (-alpha, alpha)
                }
            }
            Self::SmoothQuadratic { alpha } => (alpha * s, alpha * s),
            Self::NonconvexWell { alpha, beta } => {
                if s > 0.0 {
                    let g = alpha * s - beta;
                    (g, g)
                } else if s < 0.0 {
                    let g = alpha * s + beta;
                    (g, g)
                } else {
                    (-beta, beta)
                }
            }
        }
    }

    /// Generalized directional derivative `j°(s; t) = max { xi t : xi in dj(s) }`.
    pub fn directional(&self, s: f64, t: f64) -> f64 {
        let (lo, hi) = self.clarke_interval(s);
        (lo * t).max(hi * t)
    }

    /// Smoothed gradient `g_delta(s)` and its derivative.
    ///
    /// `abs` uses `alpha * clamp(s / delta, -1, 1)` (Moreau envelope gradient);
    /// the well mollifies its kink the same way.
    pub fn smoothed(&self, s: f64, delta: f64) -> (f64, f64) {
        let ramp = |s: f64| -> (f64, f64) {
            if delta <= 0.0 {
                (sign(s), 0.0)
            } else if s.abs() < delta {
                (s / delta, 1.0 / delta)
            } else {
                (sign(s), 0.0)
            }
        };
        match *self {
            Self::Zero => (0.0, 0.0),
            Self::Abs { alpha } => {
                let (r, dr) = ramp(s);
                (alpha * r, alpha * dr)
            }
            Self::SmoothQuadratic { alpha } => (alpha * s, alpha),
            Self::NonconvexWell { alpha, beta } => {
                let (r, dr) = ramp(s);
                (alpha * s - beta * r, alpha - beta * dr)
            }
        }
    }

    /// Lipschitz constant relating the smoothing radius to the Clarke
    /// interval: `g_delta(s)` lies in `dj(s')` for some `|s' - s| <= delta * L`.
    pub fn smoothing_lipschitz(&self) -> f64 {
        1.0
    }

    pub fn growth(&self) -> PotentialGrowth {
        match *self {
            Self::Zero => PotentialGrowth {
                a_j: 0.0,
                b_j: 0.0,
                q2: 2.0,
                c_j: 0.0,
                d_j: 0.0,
                theta1: 1.0,
            },
            Self::Abs { alpha } => PotentialGrowth {
                a_j: 0.0,
                b_j: alpha,
                q2: 2.0,
                c_j: alpha,
                d_j: 0.0,
                theta1: 1.0,
            },
            Self::SmoothQuadratic { alpha } => PotentialGrowth {
                a_j: alpha,
                b_j: 0.0,
                q2: 2.0,
                c_j: alpha,
                d_j: 0.0,
                theta1: 2.0,
            },
            // |xi s| <= alpha s^2 + beta |s| <= (alpha + beta/2) s^2 + beta/2
            Self::NonconvexWell { alpha, beta } => PotentialGrowth {
                a_j: alpha,
                b_j: beta,
                q2: 2.0,
                c_j: alpha + beta / 2.0,
                d_j: beta / 2.0,
                theta1: 2.0,
            },
        }
    }
}

/// Potential entry with its smoothing radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPotentialSpec {
    pub kind: PotentialKind,
    pub delta: f64,
    pub growth_override: Option<PotentialGrowth>,
}

impl BoundaryPotentialSpec {
    pub fn new(kind: PotentialKind, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::config("boundary.delta", "must be finite and >= 0"));
        }
        Ok(Self {
            kind,
            delta,
            growth_override: None,
        })
    }

    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
            delta: 0.0,
            growth_override: None,
        }
    }

    pub fn growth(&self) -> PotentialGrowth {
        self.growth_override.unwrap_or_else(|| self.kind.growth())
    }

    pub fn check_smoothing(&self) -> Result<()> {
        if self.kind.is_nonsmooth() && self.delta <= 0.0 {
            return Err(Error::config(
                "boundary.delta",
                format!("nonsmooth potential `{}` needs delta > 0", self.kind.name()),
            ));
        }
        Ok(())
    }
}

fn sign(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}
