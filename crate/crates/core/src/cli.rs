//! Command-line front end. Flags override the JSON configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::config::{ensure_writable, CaseSpec, RunConfig, OUTPUT_ENV};
use crate::error::{Error, Result};
use crate::lorentz::{
    dist_to_bounded_with, distribution_curve, is_in_closure, lorentz_quasinorm, write_curve_csv,
    DistanceSchedule, LorentzIndex, SampledScalarField,
};
use crate::mesh::Mesh;
use crate::obstacle::{
    complementarity_residual, probe_family, vi_truncation_scheme, write_contact_csv,
};
use crate::profile::ScalarProfile;
use crate::solver::{truncation_continuation, SolveReport};
use crate::structural::truncate_field;
use crate::verification::{CaseResult, CaseStatus};

#[derive(Debug, Parser)]
#[command(
    name = "noncoercive",
    version,
    about = "Noncoercive quasilinear Dirichlet and obstacle problems"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output root.
    #[arg(long, global = true, env = OUTPUT_ENV)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Value used for the Sobolev constant instead of the computed estimate.
    #[arg(long, global = true)]
    pub sobolev_override: Option<f64>,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct SolverFlags {
    #[arg(long, global = true)]
    pub newton_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_newton: Option<usize>,
    #[arg(long, global = true)]
    pub picard_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_picard: Option<usize>,
    #[arg(long, global = true)]
    pub relaxation: Option<f64>,
    #[arg(long, global = true)]
    pub anderson_depth: Option<usize>,
    #[arg(long, global = true)]
    pub vi_tol: Option<f64>,
    #[arg(long, global = true)]
    pub polish: Option<bool>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Truncation scheme for the configured problem.
    Solve,
    /// Truncation scheme for the configured obstacle problem.
    Obstacle,
    /// Runs one verification case.
    Verify(VerifyArgs),
    /// Lorentz-space quantities of a sampled field.
    Lorentz(LorentzArgs),
    /// Runs the configured cases on a bounded pool of workers.
    Sweep {
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// One of the case names, e.g. `dist_radial`.
    pub case: String,
    #[arg(long = "B", allow_negative_numbers = true)]
    pub amplitude: Option<f64>,
    #[arg(long = "N")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub psi: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub cells: Option<Vec<usize>>,
    #[arg(long)]
    pub refinements: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LorentzOp {
    /// `‖f‖_{p,q}`
    Norm,
    /// Distance to `L^∞` in `L^{p,∞}`.
    Dist,
    /// Curve `t ↦ (λ_f(t), t λ_f(t)^{1/p})`.
    Distribution,
    /// Membership in the closure of `L^∞` in `L^{p,∞}`.
    Closure,
}

#[derive(Debug, Args)]
pub struct LorentzArgs {
    pub op: LorentzOp,
    /// Sampled field CSV (`x0..,value,weight`); otherwise `B/|x|` on the unit ball.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long = "B", default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long = "N", default_value_t = 2)]
    pub dim: usize,
    /// Defaults to `N`.
    #[arg(long)]
    pub p: Option<f64>,
    /// `inf` for the weak space.
    #[arg(long, default_value = "inf")]
    pub q: f64,
    /// Absolute tolerance on successive values along the doubling schedule.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 64)]
    pub points: usize,
}

/// Outcome of a successful run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Pass,
    RecordOnly,
    Failed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::RecordOnly => 2,
            Outcome::Failed => 1,
        }
    }

    fn of(status: CaseStatus) -> Self {
        match status {
            CaseStatus::Pass => Outcome::Pass,
            CaseStatus::RecordOnly => Outcome::RecordOnly,
            CaseStatus::Fail => Outcome::Failed,
        }
    }
}

/// Parses `args`, runs, prints errors to stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(o) => o.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Configuration with command-line overrides applied.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.output {
        cfg.output = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.sobolev_override {
        cfg.sobolev_override = Some(s);
    }
    let f = &cli.solver;
    let s = &mut cfg.solver;
    if let Some(v) = f.newton_tol {
        s.newton_tol = v;
    }
    if let Some(v) = f.max_newton {
        s.max_newton = v;
    }
    if let Some(v) = f.picard_tol {
        s.picard_tol = v;
    }
    if let Some(v) = f.max_picard {
        s.max_picard = v;
    }
    if let Some(v) = f.relaxation {
        s.relaxation = v;
    }
    if let Some(v) = f.anderson_depth {
        s.anderson_depth = v;
    }
    if let Some(v) = f.vi_tol {
        s.vi_tol = v;
    }
    if let Some(v) = f.polish {
        s.polish = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::Solve => solve(&cfg),
        Command::Obstacle => obstacle(&cfg),
        Command::Verify(args) => verify(&cfg, args),
        Command::Lorentz(args) => lorentz(&cfg, args),
        Command::Sweep { workers } => sweep(&cfg, workers.unwrap_or(cfg.workers)),
    }
}

fn create(path: &Path) -> Result<fs::File> {
    Ok(fs::File::create(path)?)
}

fn write_report(dir: &Path, report: &SolveReport) -> Result<()> {
    report.write_json(create(&dir.join("report.json"))?)?;
    report.write_history_csv(create(&dir.join("history.csv"))?)
}

fn report_outcome(report: &SolveReport) -> Outcome {
    let f = &report.flags;
    if !f.converged {
        Outcome::Failed
    } else if f.stagnated || f.blowup_suspected || f.bound_growing {
        Outcome::RecordOnly
    } else {
        Outcome::Pass
    }
}

fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.problem.as_ref().ok_or_else(|| Error::Config {
        path: "problem".into(),
        message: "`solve` needs a problem section".into(),
    })?;
    if spec.obstacle.is_some() {
        return Err(Error::Config {
            path: "problem.obstacle".into(),
            message: "the problem has an obstacle; use the `obstacle` subcommand".into(),
        });
    }
    let built = spec.build(cfg.sobolev_override)?;
    let dir = cfg.output_root().join("solve");
    ensure_writable(&dir)?;
    let (u, report) = truncation_continuation(
        &built.field,
        &built.rhs,
        &built.mesh,
        &built.sobolev,
        &cfg.solver,
    )?;
    u.write_csv(create(&dir.join("solution.csv"))?)?;
    write_report(&dir, &report)?;
    let outcome = report_outcome(&report);
    println!(
        "solve: {outcome:?}, {} levels, output in {}",
        report.levels.len(),
        dir.display()
    );
    Ok(outcome)
}

fn obstacle(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.problem.as_ref().ok_or_else(|| Error::Config {
        path: "problem".into(),
        message: "`obstacle` needs a problem section".into(),
    })?;
    if spec.obstacle.is_none() {
        return Err(Error::Config {
            path: "problem.obstacle".into(),
            message: "`obstacle` needs an obstacle section".into(),
        });
    }
    let built = spec.build(cfg.sobolev_override)?;
    let obstacle = built.obstacle.as_ref().expect("obstacle section present");
    let dir = cfg.output_root().join("obstacle");
    ensure_writable(&dir)?;
    let (v, report) = vi_truncation_scheme(
        &built.field,
        &built.rhs,
        obstacle,
        &built.mesh,
        &built.sobolev,
        &cfg.solver,
    )?;
    let probes = probe_family(&v, obstacle, 50, &[0.1, 1.0, 10.0], cfg.seed)?;
    let field = match report.levels.last().and_then(|l| l.level) {
        Some(n) => truncate_field(&built.field, n)?,
        None => built.field.clone(),
    };
    let comp = complementarity_residual(&v, obstacle, &field, &built.rhs, &probes)?;
    let contact = obstacle.contact_set(&v, 1e-10);
    let u = match &built.shift {
        Some(g) => v.axpy(1.0, g)?,
        None => v,
    };
    u.write_csv(create(&dir.join("solution.csv"))?)?;
    write_contact_csv(&contact, create(&dir.join("contact.csv"))?)?;
    write_report(&dir, &report)?;
    let file = create(&dir.join("complementarity.json"))?;
    serde_json::to_writer_pretty(
        file,
        &json!({
            "min_slack": comp.min_slack,
            "vi_tol": cfg.solver.vi_tol,
            "contact_fraction": comp.contact_fraction,
            "inadmissible_probes": comp.inadmissible_probes,
            "slacks": comp.slacks,
        }),
    )?;
    let mut outcome = report_outcome(&report);
    if comp.min_slack < -cfg.solver.vi_tol {
        outcome = outcome.max(Outcome::RecordOnly);
    }
    println!(
        "obstacle: {outcome:?}, {} contact nodes, min slack {:e}, output in {}",
        contact.len(),
        comp.min_slack,
        dir.display()
    );
    Ok(outcome)
}

const SCALAR_CELLS: [&str; 2] = ["example_concentration", "scheme_consistency"];

/// Case from the configuration (when present) with flag overrides.
pub fn case_from_args(cfg: &RunConfig, args: &VerifyArgs) -> Result<CaseSpec> {
    if !CaseSpec::NAMES.contains(&args.case.as_str()) {
        return Err(Error::InvalidArgument(format!(
            "unknown case `{}`; expected one of {}",
            args.case,
            CaseSpec::NAMES.join(", ")
        )));
    }
    let mut params: Map<String, Value> = match cfg.cases.iter().find(|c| c.name() == args.case) {
        Some(c) => match serde_json::to_value(c)? {
            Value::Object(m) => m,
            _ => Map::new(),
        },
        None => Map::new(),
    };
    params.remove("case");
    let mut set = |k: &str, v: Value| {
        params.insert(k.into(), v);
    };
    if let Some(v) = args.amplitude {
        set("B", json!(v));
    }
    if let Some(v) = args.dim {
        set("N", json!(v));
    }
    if let Some(v) = args.p {
        set("p", json!(v));
    }
    if let Some(v) = args.r {
        set("r", json!(v));
    }
    if let Some(v) = args.gamma {
        set("gamma", json!(v));
    }
    if let Some(v) = args.psi {
        set("psi", json!(v));
    }
    if let Some(v) = args.refinements {
        set("refinements", json!(v));
    }
    if let Some(v) = &args.n_list {
        set("n_list", json!(v));
    }
    if let Some(v) = &args.cells {
        if SCALAR_CELLS.contains(&args.case.as_str()) {
            set("cells", json!(v.last().copied().unwrap_or(0)));
        } else {
            set("cells", json!(v));
        }
    }
    CaseSpec::from_name(&args.case, params)
}

fn print_case(r: &CaseResult) {
    println!("{}: {:?}", r.case, r.status());
    for c in &r.checks {
        let oracle = c
            .oracle
            .map(|o| format!("{o:e}"))
            .unwrap_or_else(|| "-".into());
        let mark = match c.passed {
            Some(true) => "ok",
            Some(false) if c.deviates => "deviates",
            Some(false) => "FAIL",
            None if c.deviates => "deviates",
            None => "record",
        };
        println!(
            "  {:<32} {:>14e}  {:>14}  {mark}",
            c.name, c.computed, oracle
        );
    }
    for n in &r.notes {
        println!("  note: {n}");
    }
}

fn verify(cfg: &RunConfig, args: &VerifyArgs) -> Result<Outcome> {
    let case = case_from_args(cfg, args)?;
    let root = cfg.output_root();
    ensure_writable(&root)?;
    let mut res = case.run(&cfg.solver, cfg.sobolev_override)?;
    res.write(&root)?;
    print_case(&res);
    Ok(Outcome::of(res.status()))
}

fn sampled_input(args: &LorentzArgs) -> Result<SampledScalarField> {
    match &args.input {
        Some(path) => SampledScalarField::read_csv_path(path),
        None => {
            let mesh = Mesh::radial_graded_ratio(args.dim, 1.0, 1e-6, 1.001)?;
            let profile = ScalarProfile::InverseRadius {
                amplitude: args.amplitude,
            };
            let values: Vec<f64> = (0..mesh.qp_count())
                .map(|q| profile.eval(mesh.qp_point(q)))
                .collect();
            SampledScalarField::new(
                mesh.field_dim(),
                mesh.qp_points_flat().to_vec(),
                values,
                mesh.qp_weights().to_vec(),
                mesh.domain_measure(),
            )
        }
    }
}

fn lorentz(cfg: &RunConfig, args: &LorentzArgs) -> Result<Outcome> {
    let f = sampled_input(args)?;
    let p = args.p.unwrap_or(args.dim as f64);
    let dir = cfg.output_root().join("lorentz");
    ensure_writable(&dir)?;
    match args.op {
        LorentzOp::Norm => {
            let v = lorentz_quasinorm(&f, LorentzIndex::new(p, args.q)?)?;
            write_scalar(
                &dir.join("norm.csv"),
                &[("p", p), ("q", args.q), ("norm", v)],
            )?;
            println!("norm_({p},{}) = {v:e}", args.q);
        }
        LorentzOp::Dist => {
            let est = dist_to_bounded_with(&f, p, args.tol, DistanceSchedule::default())?;
            let mut w = csv::Writer::from_path(dir.join("dist.csv"))?;
            w.write_record(["k", "excess_norm"])?;
            for (k, v) in &est.history {
                w.write_record([format!("{k:e}"), format!("{v:e}")])?;
            }
            w.flush()?;
            println!(
                "dist_({p},inf)(f, L^inf) = {:e}{}",
                est.value,
                if est.exact_zero {
                    " (bounded samples)"
                } else {
                    ""
                }
            );
        }
        LorentzOp::Distribution => {
            let curve = distribution_curve(&f, p, args.points);
            write_curve_csv(&curve, create(&dir.join("distribution.csv"))?)?;
            println!("{} curve points written", curve.len());
        }
        LorentzOp::Closure => {
            let t = is_in_closure(&f, p, args.tol)?;
            write_curve_csv(&t.curve, create(&dir.join("closure.csv"))?)?;
            println!(
                "in closure of L^inf: {} (tail {:e}{})",
                t.in_closure,
                t.tail_value,
                if t.inconclusive { ", inconclusive" } else { "" }
            );
            if t.inconclusive {
                return Ok(Outcome::RecordOnly);
            }
        }
    }
    Ok(Outcome::Pass)
}

fn write_scalar(path: &Path, rows: &[(&str, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["name", "value"])?;
    for (k, v) in rows {
        w.write_record([k.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn sweep(cfg: &RunConfig, workers: usize) -> Result<Outcome> {
    if cfg.cases.is_empty() {
        return Err(Error::Config {
            path: "cases".into(),
            message: "`sweep` needs at least one case".into(),
        });
    }
    if workers == 0 {
        return Err(Error::InvalidArgument(
            "at least one worker is required".into(),
        ));
    }
    let root = cfg.output_root().join("sweep");
    ensure_writable(&root)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<CaseStatus>>>> =
        Mutex::new((0..cfg.cases.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.min(cfg.cases.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(case) = cfg.cases.get(i) else { break };
                let dir = root.join(format!("{i:03}"));
                let out = case
                    .run(&cfg.solver, cfg.sobolev_override)
                    .and_then(|mut r| {
                        r.write(&dir)?;
                        Ok(r.status())
                    });
                results.lock().expect("no worker panicked")[i] = Some(out);
            });
        }
    });
    let results = results.into_inner().expect("no worker panicked");
    let mut summary = csv::Writer::from_path(root.join("summary.csv"))?;
    summary.write_record(["index", "case", "status"])?;
    let mut outcome = Outcome::Pass;
    for (i, (case, r)) in cfg.cases.iter().zip(results).enumerate() {
        let status = match r.expect("every case ran") {
            Ok(s) => {
                outcome = outcome.max(Outcome::of(s));
                format!("{s:?}")
            }
            Err(e) => {
                eprintln!("case {i} ({}): {e}", case.name());
                outcome = Outcome::Failed;
                "Error".into()
            }
        };
        println!("{i:03} {:<28} {status}", case.name());
        summary.write_record([i.to_string(), case.name().to_string(), status])?;
    }
    summary.flush()?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("noncoercive").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config() {
        let cli = parse(&[
            "--newton-tol",
            "1e-12",
            "--seed",
            "7",
            "verify",
            "dist_radial",
            "--B",
            "2",
            "--N",
            "3",
        ]);
        let cfg = effective_config(&cli).unwrap();
        assert_eq!(cfg.solver.newton_tol, 1e-12);
        assert_eq!(cfg.seed, 7);
        let Command::Verify(args) = &cli.command else {
            panic!()
        };
        assert_eq!(
            case_from_args(&cfg, args).unwrap(),
            CaseSpec::DistRadial {
                amplitude: 2.0,
                dim: 3
            }
        );
    }

    #[test]
    fn scalar_cells_take_last_value() {
        let cli = parse(&["verify", "scheme_consistency", "--cells", "64,128"]);
        let Command::Verify(args) = &cli.command else {
            panic!()
        };
        match case_from_args(&RunConfig::default(), args).unwrap() {
            CaseSpec::SchemeConsistency { cells, .. } => assert_eq!(cells, 128),
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn unknown_case_is_an_error() {
        let cli = parse(&["verify", "nothing"]);
        let Command::Verify(args) = &cli.command else {
            panic!()
        };
        assert!(case_from_args(&RunConfig::default(), args).is_err());
    }

    #[test]
    fn outcome_ordering() {
        assert!(Outcome::Pass < Outcome::RecordOnly && Outcome::RecordOnly < Outcome::Failed);
        assert_eq!(Outcome::RecordOnly.exit_code(), 2);
    }
}
