//! Study reports: JSON with the full diagnostics, CSV with one row per stage.

use std::fmt::Write;

use serde::Serialize;

use super::study::KuratowskiDiagnostics;

/// Provenance stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputMeta {
    pub config_hash: String,
    pub seed: u64,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Boundary columns are emitted only when `with_boundary` is set.
pub fn study_csv(diag: &KuratowskiDiagnostics, with_boundary: bool, meta: &OutputMeta) -> String {
    let mut out = String::new();
    writeln!(out, "# config_hash={}", meta.config_hash).unwrap();
    writeln!(out, "# seed={}", meta.seed).unwrap();
    out.push_str("rho,members,violation_sup,violation_l1,chain_distance,vi_residual,nearest_distance");
    if with_boundary {
        out.push_str(",boundary_energy,gamma2_sup");
    }
    out.push('\n');
    for s in &diag.stages {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            num(s.rho),
            s.members,
            num(s.violation_sup),
            num(s.violation_l1),
            opt(s.chain_distance),
            num(s.vi_residual),
            opt(s.nearest_distance)
        )
        .unwrap();
        if with_boundary {
            write!(out, ",{},{}", num(s.boundary_energy), num(s.gamma2_sup)).unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    #[serde(flatten)]
    meta: &'a OutputMeta,
    report: &'a T,
}

/// Pretty JSON `{config_hash, seed, report}` for any serializable report.
pub fn study_json<T: Serialize>(report: &T, meta: &OutputMeta) -> String {
    serde_json::to_string_pretty(&Stamped { meta, report }).expect("reports serialize")
}
