//! `qsap` command line: solve instances, run the exact oracle, generate
//! random test sets, and benchmark directories of instances.
//!
//! Exit codes are stable API: 0 ok, 2 parse/input error, 3 numeric
//! failure, 4 oracle cap exceeded.

mod record;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qsap_core::{
    brute_force, build_model, generate_random, parse_instance, parse_instance_json, serialize,
    solve, validate, Instance, PenaltyParams, SolveError, SolveReport,
};

use record::{format_hms, text_table, RunRecord, CSV_HEADER};

#[derive(Parser)]
#[command(name = "qsap", about = "Quadratic semi-assignment solver for protein design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and write a solution file
    Solve(SolveArgs),
    /// Exhaustive search for the exact optimum
    Oracle(OracleArgs),
    /// Solve every instance in a directory and print a result table
    Bench(BenchArgs),
    /// Generate seeded random instances
    Gen(GenArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file (.cpd text or .json)
    path: PathBuf,
    /// Solution output path; defaults to `<path>.sol`
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct OracleArgs {
    path: PathBuf,
    /// Maximum number of assignments to enumerate
    #[arg(long, default_value_t = qsap_core::DEFAULT_CAP)]
    cap: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of instance files
    dir: PathBuf,
    /// Reference values file: one `<name> <integer>` per line
    #[arg(long)]
    refs: Option<PathBuf>,
    /// CSV output path
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Worker threads; defaults to the available cores
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    l_min: usize,
    #[arg(long, default_value_t = 4)]
    l_max: usize,
    #[arg(long, default_value_t = 100)]
    e_max: i64,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    outdir: PathBuf,
}

/// Solver parameters exposed one-to-one as flags; unset flags fall back
/// to `--params-json` values, then to the documented defaults.
#[derive(Args, Clone)]
struct SolverFlags {
    /// Full parameter record as JSON, for reproducibility
    #[arg(long)]
    params_json: Option<PathBuf>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma_cap: Option<f64>,
    #[arg(long)]
    inner_max_iters: Option<usize>,
    #[arg(long)]
    outer_max_iters: Option<usize>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    stable_t: Option<usize>,
    #[arg(long)]
    eps_support: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverFlags {
    fn to_params(&self) -> Result<PenaltyParams, CliError> {
        let mut p = match &self.params_json {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::parse(format!("bad params JSON: {e}")))?
            }
            None => PenaltyParams::default(),
        };
        if self.sigma0.is_some() {
            p.sigma0 = self.sigma0;
        }
        if let Some(v) = self.rho {
            p.rho = v;
        }
        if self.sigma_cap.is_some() {
            p.sigma_cap = self.sigma_cap;
        }
        if let Some(v) = self.inner_max_iters {
            p.inner_max_iters = v;
        }
        if let Some(v) = self.outer_max_iters {
            p.outer_max_iters = v;
        }
        if let Some(v) = self.inner_tol {
            p.inner_tol = v;
        }
        if let Some(v) = self.stable_t {
            p.stable_t = v;
        }
        if let Some(v) = self.eps_support {
            p.eps_support = v;
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        Ok(p)
    }
}

struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn parse(msg: String) -> Self {
        CliError { code: 2, msg }
    }
    fn numeric(msg: String) -> Self {
        CliError { code: 3, msg }
    }
    fn cap(msg: String) -> Self {
        CliError { code: 4, msg }
    }
    fn io(msg: String) -> Self {
        CliError { code: 1, msg }
    }
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    let inst = if path.extension().is_some_and(|e| e == "json") {
        parse_instance_json(&text)
    } else {
        parse_instance(&text)
    }
    .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let violations = validate(&inst);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::parse(format!(
            "{}: invalid instance: {}",
            path.display(),
            msgs.join("; ")
        )));
    }
    Ok(inst)
}

fn instance_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn run_one(name: &str, inst: &Instance, params: &PenaltyParams) -> Result<(RunRecord, SolveReport), CliError> {
    let model = build_model(inst);
    let started = Instant::now();
    let report = solve(&model, params, None).map_err(|e| match e {
        SolveError::NonFiniteObjective => CliError::numeric(format!("{name}: {e}")),
        other => CliError::numeric(format!("{name}: {other}")),
    })?;
    let elapsed = started.elapsed().as_millis() as u64;
    let record = RunRecord {
        name: name.to_string(),
        n: inst.n,
        m: inst.dimension(),
        objective: Some(report.objective),
        relaxation: Some(report.relaxation_objective),
        ratio_pct: None,
        time_ms: elapsed,
        reason: report.reason.as_str().to_string(),
        outer_iters: report.outer_iters,
        inner_iters: report.inner_iters,
    };
    Ok((record, report))
}

fn solution_document(report: &SolveReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("objective {}\n", report.objective));
    out.push_str(&format!("relaxation {}\n", report.relaxation_objective));
    for (i, &r) in report.assignment.choices.iter().enumerate() {
        out.push_str(&format!("choose {} {}\n", i + 1, r + 1));
    }
    out
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let inst = load_instance(&args.path)?;
    let params = args.solver.to_params()?;
    let name = instance_name(&args.path);
    let (record, report) = run_one(&name, &inst, &params)?;

    let out_path = args.out.clone().unwrap_or_else(|| {
        let mut p = args.path.clone().into_os_string();
        p.push(".sol");
        PathBuf::from(p)
    });
    fs::write(&out_path, solution_document(&report))
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", out_path.display())))?;

    println!("{}", record.to_csv_row());
    println!("solution written to {}", out_path.display());
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let inst = load_instance(&args.path)?;
    let result = brute_force(&inst, args.cap).map_err(|e| match e {
        qsap_core::OracleError::CapExceeded { .. } => CliError::cap(e.to_string()),
        qsap_core::OracleError::Overflow => CliError::numeric(e.to_string()),
    })?;
    println!("optimum {}", result.value);
    println!("count {}", result.optima_count);
    for (i, &r) in result.assignment.choices.iter().enumerate() {
        println!("choose {} {}", i + 1, r + 1);
    }
    Ok(())
}

fn read_refs(path: &Path) -> Result<BTreeMap<String, i64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    let mut refs = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 {
            return Err(CliError::parse(format!(
                "{}:{}: expected '<name> <integer>'",
                path.display(),
                idx + 1
            )));
        }
        let value: i64 = tokens[1].parse().map_err(|e| {
            CliError::parse(format!("{}:{}: bad reference value: {e}", path.display(), idx + 1))
        })?;
        refs.insert(tokens[0].to_string(), value);
    }
    Ok(refs)
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let params = args.solver.to_params()?;
    let refs = match &args.refs {
        Some(path) => read_refs(path)?,
        None => BTreeMap::new(),
    };

    let mut paths: Vec<PathBuf> = fs::read_dir(&args.dir)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", args.dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|ext| ext == "cpd" || ext == "json")
        })
        .collect();
    paths.sort_by_key(|p| instance_name(p));

    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::io(format!("thread pool: {e}")))?;
    }

    use rayon::prelude::*;
    let mut rows: Vec<RunRecord> = paths
        .par_iter()
        .map(|path| {
            let name = instance_name(path);
            let outcome = load_instance(path).and_then(|inst| run_one(&name, &inst, &params));
            match outcome {
                Ok((mut record, _)) => {
                    if let Some(&reference) = refs.get(&name) {
                        record.ratio_against(reference);
                    }
                    record
                }
                Err(e) => RunRecord {
                    name,
                    n: 0,
                    m: 0,
                    objective: None,
                    relaxation: None,
                    ratio_pct: None,
                    time_ms: 0,
                    reason: format!("error({})", e.code),
                    outer_iters: 0,
                    inner_iters: 0,
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| a.name.cmp(&b.name));

    print!("{}", text_table(&rows));
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio_pct).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let total_ms: u64 = rows.iter().map(|r| r.time_ms).sum();
    if ratios.is_empty() {
        println!("summary: {} instances, total time {}", rows.len(), format_hms(total_ms));
    } else {
        let median = if ratios.len() % 2 == 1 {
            ratios[ratios.len() / 2]
        } else {
            (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2]) / 2.0
        };
        println!(
            "summary: {} instances, median ratio {median:.2}%, total time {}",
            rows.len(),
            format_hms(total_ms)
        );
    }

    if let Some(csv_path) = &args.csv {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &rows {
            out.push_str(&row.to_csv_row());
            out.push('\n');
        }
        fs::write(csv_path, out)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", csv_path.display())))?;
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    fs::create_dir_all(&args.outdir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", args.outdir.display())))?;
    for idx in 0..args.count {
        let seed = args.seed.wrapping_add(idx as u64);
        let inst = generate_random(args.n, args.l_min, args.l_max, args.e_max, args.density, seed)
            .map_err(|e| CliError::parse(e.to_string()))?;
        let path = args.outdir.join(format!("gen_n{}_s{seed}.cpd", args.n));
        fs::write(&path, serialize(&inst))
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
