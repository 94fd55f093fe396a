//! Numerical set-convergence experiments: multi-start samples of the
//! approximate solution sets along a penalty schedule, limit candidates and
//! their verification, an exact QP oracle for linear instances, and checks
//! of the structural hypotheses on the data.
//!
//! In finite dimensions weak and strong convergence coincide, so the two
//! upper set limits are not distinguished here.

mod hypotheses;
mod oracle;
mod output;
mod study;

pub use hypotheses::{delta, validate_hypotheses, HypothesisReport};
pub use oracle::{qp_oracle, OracleMode, QuadraticProgram, MAX_ENUMERATION};
pub use output::{study_csv, study_json, OutputMeta};
pub use study::{
    kuratowski_study, loglog_slope, nearest_point_trace, probe_set, random_start, sample_solution_set, vi_check,
    ChainSummary, KuratowskiDiagnostics, LimitCandidate, NearestPoint, SampleMember, SolutionSample, StageDiagnostics,
    StudyConfig,
};
