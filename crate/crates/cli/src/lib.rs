//! Command-line driver: `solve`, `study`, `norm-tool`, `check` and `oracle`
//! subcommands over a TOML experiment file.

pub mod config;
pub mod expr;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dphase_core::convergence_lab::{
    kuratowski_study, qp_oracle, study_csv, study_json, validate_hypotheses, HypothesisReport, KuratowskiDiagnostics,
    OracleMode, OutputMeta,
};
use dphase_core::musielak_orlicz::{luxemburg_norm, modular, weighted_seminorm};
use dphase_core::nonsmooth::plus_part_raw;
use dphase_core::solver::{linear_predictor, solve_penalized, SolveReport};
use dphase_core::{DiscreteFunction, Error};

use config::{ConfigError, Experiment, ExperimentConfig, Format};
use expr::Expr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dphase", version, about = "Double-phase obstacle problem laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single solve at the first schedule entry.
    Solve(Common),
    /// Multi-start set-convergence study along the schedule.
    Study(Common),
    /// Modular, Luxemburg norm and weighted seminorm of an expression.
    NormTool {
        #[command(flatten)]
        common: Common,
        /// Function of x (and y in 2D).
        #[arg(long = "expr")]
        expr: String,
    },
    /// Discrete constants and the smallness condition on the growth data.
    Check(Common),
    /// Exact solution of a linear instance by quadratic programming.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Auto,
    Enumeration,
    ProjectedGradient,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `study.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Runtime(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "config error: {e}"),
            Self::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { key, message } => Self::Config(ConfigError {
                line: None,
                key,
                message,
            }),
            other => Self::Runtime(other.to_string()),
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let threads = match &cli.command {
        Command::Solve(c) | Command::Study(c) | Command::Check(c) => c.threads,
        Command::NormTool { common, .. } | Command::Oracle { common, .. } => common.threads,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            match e {
                Failure::Config(_) => EXIT_CONFIG,
                Failure::Runtime(_) => EXIT_RUNTIME,
            }
        }
    }
}

fn load(common: &Common) -> Result<(Experiment, PathBuf), Failure> {
    let source = fs::read_to_string(&common.config).map_err(|e| ConfigError {
        line: None,
        key: "config".into(),
        message: format!("{}: {e}", common.config.display()),
    })?;
    let mut cfg = ExperimentConfig::from_toml(&source)?;
    if let Some(seed) = common.seed {
        cfg.study.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    let exp = ExperimentConfig::load(&source).and_then(|_| cfg.build())?;
    let dir = PathBuf::from(&exp.config.output.dir);
    Ok((exp, dir))
}

fn dispatch(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Solve(c) => {
            let (exp, dir) = load(&c)?;
            cmd_solve(&exp, &dir)
        }
        Command::Study(c) => {
            let (exp, dir) = load(&c)?;
            cmd_study(&exp, &dir)
        }
        Command::NormTool { common, expr } => {
            let (exp, _) = load(&common)?;
            let text = cmd_norm_tool(&exp, &expr)?;
            print!("{text}");
            Ok(EXIT_OK)
        }
        Command::Check(c) => {
            let (exp, _) = load(&c)?;
            let report = validate_hypotheses(&exp.spec);
            print!("{}", format_hypotheses(&report));
            Ok(if report.passes { EXIT_OK } else { EXIT_HYPOTHESIS })
        }
        Command::Oracle { common, mode } => {
            let (exp, dir) = load(&common)?;
            let mode = match mode {
                ModeArg::Auto => OracleMode::Auto,
                ModeArg::Enumeration => OracleMode::Enumeration,
                ModeArg::ProjectedGradient => OracleMode::ProjectedGradient,
            };
            cmd_oracle(&exp, &dir, mode)
        }
    }
}

fn meta(exp: &Experiment) -> OutputMeta {
    OutputMeta {
        config_hash: exp.hash.clone(),
        seed: exp.config.study.seed,
    }
}

fn wants(exp: &Experiment, f: Format) -> bool {
    exp.config.output.formats.contains(&f)
}

fn header(meta: &OutputMeta) -> String {
    format!("# config_hash={}\n# seed={}\n", meta.config_hash, meta.seed)
}

fn coordinate_columns(dim: usize) -> &'static str {
    if dim == 1 {
        "x"
    } else {
        "x,y"
    }
}

fn coordinates(p: &[f64; 2], dim: usize) -> String {
    if dim == 1 {
        format!("{:e}", p[0])
    } else {
        format!("{:e},{:e}", p[0], p[1])
    }
}

/// Nodal table: coordinates, `u`, `Phi`, `eta`, `(u - Phi)^+`.
pub fn solution_csv(exp: &Experiment, report: &SolveReport, meta: &OutputMeta) -> String {
    let mesh = &exp.mesh;
    let u = report.solution.values();
    let phi = exp.spec.obstacle().values();
    let plus = plus_part_raw(u, phi);
    let mut out = header(meta);
    writeln!(out, "{},u,phi,eta,violation", coordinate_columns(mesh.dim())).unwrap();
    for i in 0..mesh.n_nodes() {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e}",
            coordinates(&mesh.node(i), mesh.dim()),
            u[i],
            phi[i],
            report.eta[i],
            plus[i]
        )
        .unwrap();
    }
    out
}

fn cmd_solve(exp: &Experiment, dir: &Path) -> Result<i32, Failure> {
    let init = linear_predictor(&exp.spec)?;
    let report = solve_penalized(&exp.spec, &exp.solver, &init)?;
    let meta = meta(exp);
    fs::create_dir_all(dir)?;
    if wants(exp, Format::Json) {
        fs::write(dir.join("solve_report.json"), study_json(&report, &meta))?;
    }
    if wants(exp, Format::Csv) {
        fs::write(dir.join("solution.csv"), solution_csv(exp, &report, &meta))?;
    }
    println!(
        "rho = {:e}: converged = {}, iterations = {}, residual = {:e}, violation = {:e}",
        report.rho, report.converged, report.iterations, report.residual_norm, report.obstacle_violation.sup
    );
    Ok(if report.converged { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

/// Runs the study and returns the rendered (`study.json`, `study.csv`, traces) contents.
pub fn render_study(exp: &Experiment) -> dphase_core::Result<(KuratowskiDiagnostics, String, String, Vec<String>)> {
    let diag = kuratowski_study(&exp.spec, &exp.schedule, &exp.solver, &exp.study)?;
    let meta = meta(exp);
    let json = study_json(&diag, &meta);
    let csv = study_csv(&diag, exp.spec.has_gamma2(), &meta);
    let traces = diag
        .candidates
        .iter()
        .map(|c| {
            let mut t = header(&meta);
            t.push_str("rho,member,distance\n");
            for p in &c.nearest_trace {
                writeln!(t, "{:e},{},{:e}", p.rho, p.member, p.distance).unwrap();
            }
            t
        })
        .collect();
    Ok((diag, json, csv, traces))
}

fn cmd_study(exp: &Experiment, dir: &Path) -> Result<i32, Failure> {
    let (diag, json, csv, traces) = match render_study(exp) {
        Ok(r) => r,
        Err(e @ Error::EmptySample { .. }) => {
            eprintln!("error: {e}");
            return Ok(EXIT_NONCONVERGENCE);
        }
        Err(e) => return Err(e.into()),
    };
    fs::create_dir_all(dir)?;
    if wants(exp, Format::Json) {
        fs::write(dir.join("study.json"), json)?;
    }
    if wants(exp, Format::Csv) {
        fs::write(dir.join("study.csv"), csv)?;
        for (k, t) in traces.iter().enumerate() {
            fs::write(dir.join(format!("nearest_trace_{k}.csv")), t)?;
        }
    }
    for s in &diag.stages {
        println!(
            "rho = {:e}: members = {}, violation = {:e}, vi_residual = {:e}",
            s.rho, s.members, s.violation_sup, s.vi_residual
        );
    }
    println!("limit candidates: {}", diag.candidates.len());
    for c in &diag.candidates {
        println!(
            "  rule {}: vi_residual = {:e} over {} probes, chains {:?}",
            c.rule.label(),
            c.vi_residual,
            c.probe_count,
            c.chains
        );
    }
    let short = diag.chains.iter().any(|c| c.converged_stages < exp.schedule.len());
    Ok(if short { EXIT_NONCONVERGENCE } else { EXIT_OK })
}

/// Text printed by `norm-tool` for the nodal interpolant of `source`.
pub fn cmd_norm_tool(exp: &Experiment, source: &str) -> Result<String, Failure> {
    let e = Expr::parse(source).map_err(|e| ConfigError {
        line: None,
        key: "expr".into(),
        message: e.to_string(),
    })?;
    if exp.mesh.dim() == 1 && e.uses_y() {
        return Err(Failure::Config(ConfigError {
            line: None,
            key: "expr".into(),
            message: "`y` is not available on a 1D mesh".into(),
        }));
    }
    let f = DiscreteFunction::from_fn(exp.mesh.clone(), |x| e.eval_at(x)).map_err(|err| ConfigError {
        line: None,
        key: "expr".into(),
        message: err.to_string(),
    })?;
    let m = modular(&f, &exp.phase, false)?;
    let lux = luxemburg_norm(&f, &exp.phase, false)?;
    let semi = weighted_seminorm(&f, &exp.phase)?;
    Ok(format!(
        "modular = {} (p_part = {}, q_part = {})\nluxemburg = {}\nseminorm = {}\n",
        m.value, m.p_part, m.q_part, lux, semi
    ))
}

pub fn format_hypotheses(r: &HypothesisReport) -> String {
    let mut out = String::new();
    writeln!(out, "lambda1 = {}", r.lambda1_est).unwrap();
    writeln!(out, "lambda2 = {}", r.lambda2_est).unwrap();
    writeln!(out, "certified = {}", r.certified).unwrap();
    writeln!(
        out,
        "delta(theta1, theta2, theta3) = ({}, {}, {})",
        r.delta_theta1, r.delta_theta2, r.delta_theta3
    )
    .unwrap();
    writeln!(out, "smallness_lhs = {}", r.smallness_lhs).unwrap();
    writeln!(out, "passes = {}", r.passes).unwrap();
    for n in &r.notes {
        writeln!(out, "note: {n}").unwrap();
    }
    out
}

fn cmd_oracle(exp: &Experiment, dir: &Path, mode: OracleMode) -> Result<i32, Failure> {
    let u = qp_oracle(&exp.spec, mode)?;
    let meta = meta(exp);
    let phi = exp.spec.obstacle().values();
    let mut out = header(&meta);
    writeln!(out, "{},u,phi", coordinate_columns(exp.mesh.dim())).unwrap();
    for i in 0..exp.mesh.n_nodes() {
        writeln!(out, "{},{:e},{:e}", coordinates(&exp.mesh.node(i), exp.mesh.dim()), u.values()[i], phi[i]).unwrap();
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join("oracle.csv"), out)?;
    let contact = u.values().iter().zip(phi).filter(|(a, b)| (*a - *b).abs() <= 1e-12).count();
    println!("oracle: max u = {:e}, contact nodes = {}", u.max_abs(), contact);
    Ok(EXIT_OK)
}
