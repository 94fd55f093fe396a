//! TOML experiment configuration: parsing, validation against the library's
//! invariants, and construction of the problem, solver and study settings.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use dphase_core::assembly::{
    BoundaryPotentialSpec, PotentialGrowth, PotentialKind, ProblemSpec, ReactionGrowth, ReactionKind, ReactionSpec,
    SelectionRule,
};
use dphase_core::convergence_lab::StudyConfig;
use dphase_core::solver::{check_schedule, default_schedule, Damping, SolverConfig, SolverMode};
use dphase_core::{BoundaryPartition, BoundaryTag, DiscreteFunction, Error, Mesh, PhaseConfig, Side};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh: MeshBlock,
    pub phase: PhaseBlock,
    #[serde(default)]
    pub obstacle: ObstacleBlock,
    #[serde(default)]
    pub reaction: ReactionBlock,
    #[serde(default)]
    pub boundary: BoundaryBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub study: StudyBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "GrowthBlock::is_empty")]
    pub growth: GrowthBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    pub dim: usize,
    /// Domain `(0, L)` in 1D, `(0, lx) x (0, ly)` in 2D.
    pub extents: Vec<f64>,
    pub counts: Vec<usize>,
    /// Sides belonging to `Gamma2`; the rest of the boundary is `Gamma1`.
    #[serde(default)]
    pub gamma2: Vec<Side>,
    /// Alternative to `gamma2`: faces whose midpoint gives a positive value belong to `Gamma2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2_where: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseBlock {
    pub p: f64,
    pub q: f64,
    #[serde(default = "zero_expr")]
    pub mu: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleBlock {
    pub expr: String,
}

impl Default for ObstacleBlock {
    fn default() -> Self {
        Self { expr: "inf".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionBlock {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default = "midpoint")]
    pub selection: String,
}

impl Default for ReactionBlock {
    fn default() -> Self {
        Self {
            kind: "constant".into(),
            params: BTreeMap::from([("value".to_string(), 0.0)]),
            selection: midpoint(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryBlock {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub delta: f64,
}

impl Default for BoundaryBlock {
    fn default() -> Self {
        Self {
            kind: "zero".into(),
            params: BTreeMap::new(),
            delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub mode: SolverMode,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub picard_fallback: bool,
    pub eps_grad: f64,
    pub schedule: Vec<f64>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            mode: d.mode,
            newton_tol: d.newton_tol,
            max_newton: d.max_newton,
            picard_fallback: d.picard_fallback,
            eps_grad: 0.0,
            schedule: default_schedule(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyBlock {
    pub n_starts: usize,
    pub seed: u64,
    pub selection_rules: Vec<String>,
    pub dedup_tol: f64,
    pub cauchy_factor: f64,
    pub cauchy_window: usize,
    pub random_probes: usize,
    pub probe_scale: f64,
}

impl Default for StudyBlock {
    fn default() -> Self {
        let d = StudyConfig::default();
        Self {
            n_starts: d.n_starts,
            seed: d.seed,
            selection_rules: d.selection_rules.iter().map(|r| r.label()).collect(),
            dedup_tol: d.dedup_tol,
            cauchy_factor: d.cauchy_factor,
            cauchy_window: d.cauchy_window,
            random_probes: d.random_probes,
            probe_scale: d.probe_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

/// Declared growth constants replacing the catalog values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction: Option<ReactionGrowth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<PotentialGrowth>,
}

impl GrowthBlock {
    fn is_empty(&self) -> bool {
        self.reaction.is_none() && self.boundary.is_none()
    }
}

fn zero_expr() -> String {
    "0".into()
}

fn midpoint() -> String {
    "midpoint".into()
}

/// Configuration error anchored to a line of the source when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn anchored(source: Option<&str>, key: &str, message: String) -> Self {
        Self {
            line: source.and_then(|s| locate(s, key)),
            key: key.to_string(),
            message,
        }
    }
}

/// 1-based line of `key` (dotted path) in a TOML source, found by scanning
/// table headers and `name =` lines; falls back to the enclosing table.
pub fn locate(source: &str, key: &str) -> Option<usize> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = String::new();
    let mut lines = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = h.trim().to_string();
            lines.push((i + 1, table.clone(), None));
        } else if let Some((name, _)) = line.split_once('=') {
            lines.push((i + 1, table.clone(), Some(name.trim().to_string())));
        }
    }
    for split in (1..parts.len()).rev() {
        let section = parts[..split].join(".");
        let field = parts[split];
        if let Some((l, _, _)) = lines
            .iter()
            .find(|(_, t, n)| *t == section && n.as_deref() == Some(field))
        {
            return Some(*l);
        }
    }
    let section = parts.join(".");
    lines.iter().find(|(_, t, n)| *t == section && n.is_none()).map(|(l, _, _)| *l).or_else(|| {
        lines
            .iter()
            .find(|(_, t, n)| *t == parts[0] && n.is_none())
            .map(|(l, _, _)| *l)
    })
}

/// Everything a subcommand needs, built from one validated config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub mesh: Arc<Mesh>,
    pub phase: PhaseConfig,
    pub spec: ProblemSpec,
    pub solver: SolverConfig,
    pub schedule: Vec<f64>,
    pub study: StudyConfig,
    pub hash: String,
}

impl ExperimentConfig {
    pub fn from_toml(source: &str) -> Result<Self, ConfigError> {
        toml::from_str(source).map_err(|e| ConfigError {
            line: e.span().map(|s| source[..s.start].matches('\n').count() + 1),
            key: "config".into(),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    /// sha256 of the canonical TOML with the output block reset, so the
    /// hash identifies the experiment and not where it was written.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            output: OutputBlock::default(),
            ..self.clone()
        };
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    /// Parses and validates `source` in full.
    pub fn load(source: &str) -> Result<Experiment, ConfigError> {
        Self::from_toml(source)?.build_anchored(Some(source))
    }

    pub fn build(&self) -> Result<Experiment, ConfigError> {
        self.build_anchored(None)
    }

    fn build_anchored(&self, source: Option<&str>) -> Result<Experiment, ConfigError> {
        self.try_build().map_err(|e| match e {
            Error::Config { key, message } => ConfigError::anchored(source, &key, message),
            other => ConfigError {
                line: None,
                key: "config".into(),
                message: other.to_string(),
            },
        })
    }

    pub fn build_mesh(&self) -> dphase_core::Result<Arc<Mesh>> {
        let m = &self.mesh;
        if m.gamma2_where.is_some() && !m.gamma2.is_empty() {
            return Err(Error::config("mesh.gamma2_where", "give either gamma2 sides or gamma2_where, not both"));
        }
        let partition = match &m.gamma2_where {
            Some(src) => {
                let e = parse_expr("mesh.gamma2_where", src, m.dim)?;
                BoundaryPartition::Predicate(Arc::new(move |x: &[f64; 2]| {
                    if e.eval_at(x) > 0.0 {
                        BoundaryTag::Gamma2
                    } else {
                        BoundaryTag::Gamma1
                    }
                }))
            }
            None if m.gamma2.is_empty() => BoundaryPartition::AllGamma1,
            None => BoundaryPartition::Gamma2Sides(m.gamma2.clone()),
        };
        match m.dim {
            1 => {
                if m.extents.len() != 1 || m.counts.len() != 1 {
                    return Err(Error::config("mesh.extents", "1D meshes take one extent and one count"));
                }
                Mesh::interval(0.0, m.extents[0], m.counts[0], &partition)
            }
            2 => {
                if m.extents.len() != 2 || m.counts.len() != 2 {
                    return Err(Error::config("mesh.extents", "2D meshes take two extents and two counts"));
                }
                Mesh::rectangle(m.extents[0], m.extents[1], m.counts[0], m.counts[1], &partition)
            }
            d => Err(Error::config("mesh.dim", format!("dimension must be 1 or 2, got {d}"))),
        }
    }

    pub fn build_phase(&self, mesh: &Mesh) -> dphase_core::Result<PhaseConfig> {
        let mu = parse_expr("phase.mu", &self.phase.mu, mesh.dim())?;
        PhaseConfig::from_fn(self.phase.p, self.phase.q, mesh, |x| mu.eval_at(x))
    }

    fn try_build(&self) -> dphase_core::Result<Experiment> {
        let mesh = self.build_mesh()?;
        let phase = self.build_phase(&mesh)?;

        let obstacle_expr = parse_expr("obstacle.expr", &self.obstacle.expr, mesh.dim())?;
        let phi: Vec<f64> = mesh.nodes().iter().map(|x| obstacle_expr.eval_at(x)).collect();
        if phi.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::config("obstacle.expr", "obstacle evaluates to NaN or -inf"));
        }
        let obstacle = DiscreteFunction::obstacle(mesh.clone(), phi)
            .map_err(|e| Error::config("obstacle.expr", e.to_string()))?;

        let mut reaction = ReactionSpec::new(
            ReactionKind::from_catalog(&self.reaction.kind, &self.reaction.params)?,
            SelectionRule::parse(&self.reaction.selection)?,
        );
        reaction.growth_override = self.growth.reaction;
        let mut boundary = BoundaryPotentialSpec::new(
            PotentialKind::from_catalog(&self.boundary.kind, &self.boundary.params)?,
            self.boundary.delta,
        )?;
        boundary.growth_override = self.growth.boundary;

        let spec = ProblemSpec::new(mesh.clone(), phase.clone(), obstacle, reaction, boundary, self.solver.eps_grad)?;

        check_schedule(&self.solver.schedule)?;
        let solver = SolverConfig {
            rho: self.solver.schedule[0],
            mode: self.solver.mode,
            newton_tol: self.solver.newton_tol,
            max_newton: self.solver.max_newton,
            damping: Damping::default(),
            picard_fallback: self.solver.picard_fallback,
            eps_grad: None,
            delta_boundary: None,
        };
        solver.validate()?;

        let s = &self.study;
        let study = StudyConfig {
            n_starts: s.n_starts,
            seed: s.seed,
            selection_rules: s
                .selection_rules
                .iter()
                .map(|r| SelectionRule::parse(r).map_err(|e| relabel(e, "study.selection_rules")))
                .collect::<dphase_core::Result<_>>()?,
            dedup_tol: s.dedup_tol,
            cauchy_factor: s.cauchy_factor,
            cauchy_window: s.cauchy_window,
            random_probes: s.random_probes,
            probe_scale: s.probe_scale,
        };
        study.validate()?;
        if self.output.formats.is_empty() {
            return Err(Error::config("output.formats", "need at least one output format"));
        }

        Ok(Experiment {
            config: self.clone(),
            hash: self.hash(),
            schedule: self.solver.schedule.clone(),
            mesh,
            phase,
            spec,
            solver,
            study,
        })
    }
}

fn relabel(e: Error, key: &str) -> Error {
    match e {
        Error::Config { message, .. } => Error::config(key, message),
        other => other,
    }
}

fn parse_expr(key: &str, src: &str, dim: usize) -> dphase_core::Result<Expr> {
    let e = Expr::parse(src).map_err(|e| Error::config(key, format!("`{src}`: {e}")))?;
    if dim == 1 && e.uses_y() {
        return Err(Error::config(key, "`y` is not available on a 1D mesh"));
    }
    Ok(e)
}
