//! Catalog of multivalued reaction (convection) terms `f(x, s, xi)` given by
//! interval bounds, and the rules selecting one value from the interval.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Growth constants of a reaction entry, consumed by the hypothesis validator.
///
/// `|eta| <= a_f |xi|^(p/q1') + b_f |s|^(q1-1) + c_f` and
/// `|eta s| <= e_f |xi|^theta2 + g_f |s|^theta3 + d_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionGrowth {
    pub a_f: f64,
    pub b_f: f64,
    pub c_f: f64,
    pub q1: f64,
    pub e_f: f64,
    pub g_f: f64,
    pub d_f: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl ReactionGrowth {
    fn bounded(m: f64) -> Self {
        Self {
            a_f: 0.0,
            b_f: 0.0,
            c_f: m,
            q1: 2.0,
            e_f: 0.0,
            g_f: m,
            d_f: 0.0,
            theta2: 1.0,
            theta3: 1.0,
        }
    }
}

type BoundsFn = dyn Fn(&[f64; 2], f64, [f64; 2]) -> (f64, f64) + Send + Sync;

/// Interval-valued reaction `f(x, s, xi) = [lo, hi]`.
#[derive(Clone)]
pub enum ReactionKind {
    /// `[c, c]`
    Constant { value: f64 },
    /// `[lo, hi]`, independent of the state.
    Interval { lo: f64, hi: f64 },
    /// `[c - r - k|s|, c + r + k|s|]`
    AbsBand { center: f64, radius: f64, slope: f64 },
    /// Single-valued `c + k s`.
    Linear { value: f64, slope: f64 },
    /// Single-valued convection `c + beta . xi`.
    Convection { value: f64, beta: [f64; 2] },
    /// User-supplied bounds; partial derivatives come from finite differences.
    Custom { bounds: Arc<BoundsFn>, growth: ReactionGrowth },
}

impl fmt::Debug for ReactionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { value } => write!(f, "Constant({value})"),
            Self::Interval { lo, hi } => write!(f, "Interval({lo}, {hi})"),
            Self::AbsBand { center, radius, slope } => write!(f, "AbsBand({center}, {radius}, {slope})"),
            Self::Linear { value, slope } => write!(f, "Linear({value}, {slope})"),
            Self::Convection { value, beta } => write!(f, "Convection({value}, {beta:?})"),
            Self::Custom { .. } => write!(f, "Custom(..)"),
        }
    }
}

/// Partial derivatives `(d/ds, d/dxi)` of one bound.
pub type BoundPartials = (f64, [f64; 2]);

impl ReactionKind {
    /// Builds a catalog entry from its name and parameter map.
    pub fn from_catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let take = Params::new("reaction", params);
        let kind = match name {
            "constant" => Self::Constant { value: take.get("value")? },
            "interval" => Self::Interval {
                lo: take.get("lo")?,
                hi: take.get("hi")?,
            },
            "abs_band" => Self::AbsBand {
                center: take.get_or("center", 0.0)?,
                radius: take.get("radius")?,
                slope: take.get_or("slope", 0.0)?,
            },
            "linear" => Self::Linear {
                value: take.get("value")?,
                slope: take.get("slope")?,
            },
            "convection" => Self::Convection {
                value: take.get("value")?,
                beta: [take.get_or("beta_x", 0.0)?, take.get_or("beta_y", 0.0)?],
            },
            other => {
                return Err(Error::config(
                    "reaction.kind",
                    format!("unknown reaction `{other}` (constant, interval, abs_band, linear, convection)"),
                ))
            }
        };
        take.finish()?;
        Ok(kind)
    }

    pub fn bounds(&self, x: &[f64; 2], s: f64, xi: [f64; 2]) -> (f64, f64) {
        match self {
            Self::Constant { value } => (*value, *value),
            Self::Interval { lo, hi } => (*lo, *hi),
            Self::AbsBand { center, radius, slope } => {
                let w = radius + slope * s.abs();
                (center - w, center + w)
            }
            Self::Linear { value, slope } => {
                let v = value + slope * s;
                (v, v)
            }
            Self::Convection { value, beta } => {
                let v = value + beta[0] * xi[0] + beta[1] * xi[1];
                (v, v)
            }
            Self::Custom { bounds, .. } => bounds(x, s, xi),
        }
    }

    /// Closed-form partials of `(lo, hi)` when the entry provides them.
    pub fn bound_partials(&self, s: f64) -> Option<(BoundPartials, BoundPartials)> {
        match self {
            Self::Constant { .. } | Self::Interval { .. } => Some(((0.0, [0.0; 2]), (0.0, [0.0; 2]))),
            Self::AbsBand { slope, .. } => {
                let d = slope * sign(s);
                Some(((-d, [0.0; 2]), (d, [0.0; 2])))
            }
            Self::Linear { slope, .. } => Some(((*slope, [0.0; 2]), (*slope, [0.0; 2]))),
            Self::Convection { beta, .. } => Some(((0.0, *beta), (0.0, *beta))),
            Self::Custom { .. } => None,
        }
    }

    /// True when the bounds depend on neither `s` nor `xi`.
    pub fn is_state_independent(&self) -> bool {
        match self {
            Self::Constant { .. } | Self::Interval { .. } => true,
            Self::AbsBand { slope, .. } => *slope == 0.0,
            Self::Linear { slope, .. } => *slope == 0.0,
            Self::Convection { beta, .. } => beta[0] == 0.0 && beta[1] == 0.0,
            Self::Custom { .. } => false,
        }
    }

    pub fn depends_on_gradient(&self) -> bool {
        match self {
            Self::Convection { beta, .. } => beta[0] != 0.0 || beta[1] != 0.0,
            Self::Custom { .. } => true,
            _ => false,
        }
    }

    /// Declared growth constants.
    pub fn growth(&self) -> ReactionGrowth {
        match self {
            Self::Constant { value } => ReactionGrowth::bounded(value.abs()),
            Self::Interval { lo, hi } => ReactionGrowth::bounded(lo.abs().max(hi.abs())),
            Self::AbsBand { center, radius, slope } => {
                let m = center.abs() + radius;
                if *slope == 0.0 {
                    ReactionGrowth::bounded(m)
                } else {
                    // (|c| + r)|s| <= (|c| + r)(1 + s^2)/2
                    ReactionGrowth {
                        b_f: *slope,
                        g_f: slope + m / 2.0,
                        d_f: m / 2.0,
                        theta3: 2.0,
                        ..ReactionGrowth::bounded(m)
                    }
                }
            }
            Self::Linear { value, slope } => {
                if *slope == 0.0 {
                    ReactionGrowth::bounded(value.abs())
                } else {
                    ReactionGrowth {
                        b_f: slope.abs(),
                        g_f: slope.abs() + value.abs() / 2.0,
                        d_f: value.abs() / 2.0,
                        theta3: 2.0,
                        ..ReactionGrowth::bounded(value.abs())
                    }
                }
            }
            Self::Convection { value, beta } => {
                let b = (beta[0] * beta[0] + beta[1] * beta[1]).sqrt();
                if b == 0.0 {
                    ReactionGrowth::bounded(value.abs())
                } else {
                    // |beta||xi||s| <= |beta|(|xi|^2 + s^2)/2
                    ReactionGrowth {
                        a_f: b,
                        e_f: b / 2.0,
                        theta2: 2.0,
                        g_f: (b + value.abs()) / 2.0,
                        d_f: value.abs() / 2.0,
                        theta3: 2.0,
                        ..ReactionGrowth::bounded(value.abs())
                    }
                }
            }
            Self::Custom { growth, .. } => *growth,
        }
    }
}

/// Rule picking `eta = lo + lambda (hi - lo)` from the interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionRule {
    Lower,
    Upper,
    Midpoint,
    Lambda(f64),
}

impl SelectionRule {
    pub fn weight(&self) -> f64 {
        match self {
            Self::Lower => 0.0,
            Self::Upper => 1.0,
            Self::Midpoint => 0.5,
            Self::Lambda(l) => *l,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Lower => "lower".into(),
            Self::Upper => "upper".into(),
            Self::Midpoint => "midpoint".into(),
            Self::Lambda(l) => format!("lambda={l}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(Self::Lower),
            "upper" => Ok(Self::Upper),
            "midpoint" => Ok(Self::Midpoint),
            other => {
                let l: f64 = other
                    .strip_prefix("lambda=")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::config("reaction.selection", format!("unknown selection rule `{other}`")))?;
                let rule = Self::Lambda(l);
                rule.validate()?;
                Ok(rule)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.weight();
        if (0.0..=1.0).contains(&l) {
            Ok(())
        } else {
            Err(Error::config("reaction.selection", format!("lambda must lie in [0, 1], got {l}")))
        }
    }
}

/// A reaction entry together with its selection rule.
#[derive(Debug, Clone)]
pub struct ReactionSpec {
    pub kind: ReactionKind,
    pub rule: SelectionRule,
    /// Overrides the catalog's declared growth constants.
    pub growth_override: Option<ReactionGrowth>,
}

impl ReactionSpec {
    pub fn new(kind: ReactionKind, rule: SelectionRule) -> Self {
        Self {
            kind,
            rule,
            growth_override: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(ReactionKind::Constant { value: 0.0 }, SelectionRule::Midpoint)
    }

    pub fn with_rule(&self, rule: SelectionRule) -> Self {
        Self { rule, ..self.clone() }
    }

    pub fn growth(&self) -> ReactionGrowth {
        self.growth_override.unwrap_or_else(|| self.kind.growth())
    }

    pub fn select(&self, x: &[f64; 2], s: f64, xi: [f64; 2]) -> f64 {
        let (lo, hi) = self.kind.bounds(x, s, xi);
        lo + self.rule.weight() * (hi - lo)
    }

    /// `(d eta / ds, d eta / d xi)` of the selection; closed form when the
    /// catalog provides it, central differences otherwise.
    pub fn select_partials(&self, x: &[f64; 2], s: f64, xi: [f64; 2]) -> (f64, [f64; 2]) {
        let l = self.rule.weight();
        if let Some(((ds_lo, dx_lo), (ds_hi, dx_hi))) = self.kind.bound_partials(s) {
            return (
                ds_lo + l * (ds_hi - ds_lo),
                [dx_lo[0] + l * (dx_hi[0] - dx_lo[0]), dx_lo[1] + l * (dx_hi[1] - dx_lo[1])],
            );
        }
        let h = 1e-7 * (1.0 + s.abs());
        let ds = (self.select(x, s + h, xi) - self.select(x, s - h, xi)) / (2.0 * h);
        let mut dxi = [0.0; 2];
        for c in 0..2 {
            let hc = 1e-7 * (1.0 + xi[c].abs());
            let (mut a, mut b) = (xi, xi);
            a[c] += hc;
            b[c] -= hc;
            dxi[c] = (self.select(x, s, a) - self.select(x, s, b)) / (2.0 * hc);
        }
        (ds, dxi)
    }

    /// Checks `lo <= hi` on a fixed set of probe states at the given points.
    pub fn check_ordering(&self, points: &[[f64; 2]]) -> Result<()> {
        const S: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
        const XI: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]];
        for x in points {
            for &s in &S {
                for &xi in &XI {
                    let (lo, hi) = self.kind.bounds(x, s, xi);
                    if !(lo <= hi) {
                        return Err(Error::config(
                            "reaction",
                            format!("lower bound exceeds upper bound at x = {x:?}, s = {s}"),
                        ));
                    }
                }
            }
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

/// Parameter map reader that rejects unused keys.
pub(crate) struct Params<'a> {
    block: &'static str,
    map: &'a BTreeMap<String, f64>,
    used: std::cell::RefCell<Vec<&'static str>>,
}

impl<'a> Params<'a> {
    pub(crate) fn new(block: &'static str, map: &'a BTreeMap<String, f64>) -> Self {
        Self {
            block,
            map,
            used: Default::default(),
        }
    }

    pub(crate) fn get(&self, key: &'static str) -> Result<f64> {
        self.used.borrow_mut().push(key);
        let v = *self
            .map
            .get(key)
            .ok_or_else(|| Error::config(format!("{}.params.{key}", self.block), "missing parameter"))?;
        if !v.is_finite() {
            return Err(Error::config(format!("{}.params.{key}", self.block), "must be finite"));
        }
        Ok(v)
    }

    pub(crate) fn get_or(&self, key: &'static str, default: f64) -> Result<f64> {
        if self.map.contains_key(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    pub(crate) fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.map.keys().find(|k| !used.contains(&k.as_str())) {
            Some(k) => Err(Error::config(format!("{}.params.{k}", self.block), "unknown parameter")),
            None => Ok(()),
        }
    }
}
