//! Subcommand implementations. Each returns the process exit status; errors
//! that reach `main` exit with status 1.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use log::info;
use lottype_core::model::{complete_ilp_dimensions, count_applicable_lot_types, LotTypeParams};
use lottype_core::subsolver::{brute_force_oracle, ORACLE_BUDGET};
use lottype_core::{solve, Conclusion, Instance, SolveError, SolveReport, SolverConfig, SubsolverError};
use thiserror::Error;

use crate::generate::{generate, GenerateError, GeneratorParams};
use crate::io::{read_instance, read_raw, instance_to_json, InputError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Optimal = 0,
    /// Bad input, or an instance proven to have no feasible assignment.
    Input = 1,
    Limit = 2,
    Budget = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error("solver failed: {0}")]
    Solve(#[from] SolveError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Write { path: "<stdout>".into(), source })
}

/// Comma-separated unsigned integers.
fn parse_list(text: &str) -> Result<Vec<u64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

#[derive(Args, Clone, Debug)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[arg(long, default_value_t = 0.15)]
    pub eps: f64,
    #[arg(long, default_value_t = lottype_core::pricing::TOL_RC)]
    pub tol_rc: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_rounds: usize,
    /// Seconds; 0 stops right after the heuristic.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "report.json")]
    pub report: PathBuf,
}

impl SolveArgs {
    pub fn new(instance: PathBuf, report: PathBuf) -> Self {
        SolveArgs {
            instance,
            eps: 0.15,
            tol_rc: lottype_core::pricing::TOL_RC,
            max_rounds: 1_000_000,
            time_limit: None,
            threads: None,
            seed: 0,
            report,
        }
    }

    fn config(&self) -> SolverConfig {
        SolverConfig {
            eps: self.eps,
            tol_rc: self.tol_rc,
            max_rounds: self.max_rounds,
            time_limit: self.time_limit,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

/// Human-readable counters in the layout of the usual results table.
pub fn summary(inst: &Instance, report: &SolveReport) -> String {
    let c = &report.counters;
    let cert = &report.certificate;
    let mut s = String::new();
    // gaps are kept in scaled units internally
    let unscale = |g: f64| g / inst.scale() as f64;
    let conclusion = match &cert.conclusion {
        Conclusion::ProvenOptimal => "proven optimal".to_string(),
        Conclusion::ProvenInfeasible => "proven infeasible".to_string(),
        Conclusion::BoundOnly { gap } => format!("bound only (gap {:.6})", unscale(*gap)),
        Conclusion::LimitReached { reason, gap } => match gap {
            Some(g) => format!("limit reached: {reason} (gap {:.6})", unscale(*g)),
            None => format!("limit reached: {reason}"),
        },
    };
    let _ = writeln!(s, "conclusion          {conclusion}");
    match &report.assignment {
        Some(a) => {
            let _ = writeln!(s, "cost                {}", inst.format_scaled(a.total_cost));
            let _ = writeln!(s, "supply              {}", a.total_supply);
            let lots: Vec<String> = a.selected.iter().map(|l| l.to_string()).collect();
            let _ = writeln!(s, "lot-types           {}", lots.join(" "));
        }
        None => {
            let _ = writeln!(s, "cost                -");
        }
    }
    let _ = writeln!(s, "lower bound         {:.6}", cert.lower_bound / inst.scale() as f64);
    let _ = writeln!(s, "time (s)            {:.3}", c.wall_seconds);
    let _ = writeln!(s, "initial variables   {}", c.initial_variables);
    let _ = writeln!(s, "initial constraints {}", c.initial_constraints);
    let _ = writeln!(s, "final variables     {}", c.final_variables);
    let _ = writeln!(s, "final constraints   {}", c.final_constraints);
    let _ = writeln!(s, "cover cuts          {}", c.cover_cuts);
    let _ = writeln!(s, "pricing steps       {}", c.pricing_rounds);
    let _ = writeln!(s, "dives               {}", c.dives);
    let _ = writeln!(s, "nodes               {}", c.nodes);
    let _ = writeln!(s, "lot-types in pool   {}", c.pool_size);
    s
}

fn solve_status(conclusion: &Conclusion) -> ExitStatus {
    match conclusion {
        Conclusion::ProvenOptimal => ExitStatus::Optimal,
        Conclusion::ProvenInfeasible => ExitStatus::Input,
        Conclusion::BoundOnly { .. } | Conclusion::LimitReached { .. } => ExitStatus::Limit,
    }
}

/// Solves, writes the JSON report and a `.txt` summary beside it, and
/// echoes the summary.
pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<(SolveReport, ExitStatus), CliError> {
    let inst = read_instance(&args.instance)?;
    let config = args.config();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    let report = pool.install(|| solve(&inst, &config))?;

    let c = &report.counters;
    info!(
        "pricing_rounds={} cover_cuts={} dives={} nodes={} initial={}x{} final={}x{}",
        c.pricing_rounds,
        c.cover_cuts,
        c.dives,
        c.nodes,
        c.initial_variables,
        c.initial_constraints,
        c.final_variables,
        c.final_constraints
    );
    let mut json = serde_json::to_string_pretty(&report).expect("reports serialize");
    json.push('\n');
    write_file(&args.report, &json)?;
    let text = summary(&inst, &report);
    write_file(&args.report.with_extension("txt"), &text)?;
    emit(out, &text)?;
    let status = solve_status(&report.certificate.conclusion);
    Ok((report, status))
}

#[derive(Args, Clone, Debug, Default)]
pub struct GenerateArgs {
    /// One of t1-i1 .. t1-i5.
    #[arg(long, conflicts_with_all = ["branches", "sizes"])]
    pub preset: Option<String>,
    #[arg(long)]
    pub branches: Option<usize>,
    #[arg(long)]
    pub sizes: Option<usize>,
    /// min_c,max_c,min_t,max_t
    #[arg(long)]
    pub bounds: Option<String>,
    #[arg(long)]
    pub multiplicities: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// lo,hi (default: a window around the expected supply)
    #[arg(long)]
    pub supply: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn generator_params(args: &GenerateArgs) -> Result<GeneratorParams, CliError> {
    let usage = CliError::Usage;
    let mut p = match &args.preset {
        Some(name) => GeneratorParams::preset(name)?,
        None => {
            let (Some(branches), Some(sizes)) = (args.branches, args.sizes) else {
                return Err(usage("either --preset or both --branches and --sizes are required".into()));
            };
            GeneratorParams {
                branches,
                sizes,
                min_c: 0,
                max_c: 5,
                min_t: 3,
                max_t: 15,
                multiplicities: vec![1, 2, 3],
                k: 3,
                supply_lo: 0,
                supply_hi: 0,
            }
        }
    };
    if let Some(b) = &args.bounds {
        let v = parse_list(b).map_err(usage)?;
        let [a, b, c, d] = v[..] else { return Err(usage("--bounds takes four values".into())) };
        let narrow = |x: u64| u32::try_from(x).map_err(|_| usage(format!("bound {x} out of range")));
        (p.min_c, p.max_c, p.min_t, p.max_t) = (narrow(a)?, narrow(b)?, narrow(c)?, narrow(d)?);
    }
    if let Some(m) = &args.multiplicities {
        p.multiplicities = parse_list(m)
            .map_err(usage)?
            .into_iter()
            .map(|x| u32::try_from(x).map_err(|_| usage(format!("multiplicity {x} out of range"))))
            .collect::<Result<_, _>>()?;
    }
    if let Some(k) = args.k {
        p.k = k;
    }
    match &args.supply {
        Some(s) => {
            let v = parse_list(s).map_err(usage)?;
            let [lo, hi] = v[..] else { return Err(usage("--supply takes two values".into())) };
            (p.supply_lo, p.supply_hi) = (lo, hi);
        }
        None if args.preset.is_none() => p.default_supply(),
        None => {}
    }
    Ok(p)
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let params = generator_params(args)?;
    let inst = generate(&params, args.seed)?;
    let json = instance_to_json(&inst);
    match &args.output {
        Some(path) => write_file(path, &json)?,
        None => emit(out, &json)?,
    }
    Ok(ExitStatus::Optimal)
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let raw = read_raw(path)?;
    match lottype_core::validate_instance(&raw) {
        Ok(inst) => {
            let mut s = format!(
                "valid: {} branches, {} sizes, k = {}, supply [{}, {}], demand scale 10^-{}\n",
                inst.num_branches(),
                inst.num_sizes(),
                inst.k(),
                inst.supply_lo(),
                inst.supply_hi(),
                inst.scale_exp()
            );
            for w in inst.warnings() {
                let _ = writeln!(s, "warning: {w}");
            }
            emit(out, &s)?;
            Ok(ExitStatus::Optimal)
        }
        Err(report) => {
            emit(out, &format!("invalid:\n{report}\n"))?;
            Ok(ExitStatus::Input)
        }
    }
}

pub fn cmd_oracle(path: &Path, budget: u128, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let inst = read_instance(path)?;
    match brute_force_oracle(&inst, budget) {
        Ok(a) => {
            let lots: Vec<String> = a.selected.iter().map(|l| l.to_string()).collect();
            emit(
                out,
                &format!(
                    "cost       {}\nsupply     {}\nlot-types  {}\n",
                    inst.format_scaled(a.total_cost),
                    a.total_supply,
                    lots.join(" ")
                ),
            )?;
            Ok(ExitStatus::Optimal)
        }
        Err(SubsolverError::Infeasible) => {
            emit(out, "infeasible: no assignment meets the supply window\n")?;
            Ok(ExitStatus::Input)
        }
        Err(SubsolverError::Budget { needed, budget }) => {
            emit(out, &format!("oracle budget exceeded: {needed} evaluations needed, budget {budget}\n"))?;
            Ok(ExitStatus::Budget)
        }
        Err(e) => Err(CliError::Usage(e.to_string())),
    }
}

pub const DEFAULT_ORACLE_BUDGET: u128 = ORACLE_BUDGET;

#[derive(Args, Clone, Debug, Default)]
pub struct StatsArgs {
    /// Instance file; its bounds, branches and multiplicities are used.
    pub instance: Option<PathBuf>,
    /// sizes,min_c,max_c,min_t,max_t instead of an instance file.
    #[arg(long, conflicts_with = "instance")]
    pub params: Option<String>,
    /// Branch count for the dimensions when using --params.
    #[arg(long)]
    pub branches: Option<u128>,
    /// Number of multiplicities when using --params.
    #[arg(long, default_value_t = 3)]
    pub num_multiplicities: u128,
}

/// `|L|` and, when the branch count is known, the complete model size.
pub fn stats_text(params: &LotTypeParams, dims: Option<(u128, u128)>) -> String {
    let count = count_applicable_lot_types(params);
    let mut s = format!("applicable lot-types {count}\n");
    if let (Some((nb, nm)), Some(nl)) = (dims, u128::try_from(&count).ok()) {
        let (v, c) = complete_ilp_dimensions(nb, nl, nm);
        let _ = writeln!(s, "complete variables   {v}");
        let _ = writeln!(s, "complete constraints {c}");
    }
    s
}

pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let text = match (&args.instance, &args.params) {
        (Some(path), _) => {
            let inst = read_instance(path)?;
            let dims = (inst.num_branches() as u128, inst.multiplicities().len() as u128);
            stats_text(inst.params(), Some(dims))
        }
        (None, Some(p)) => {
            let v = parse_list(p).map_err(CliError::Usage)?;
            let [ns, a, b, c, d] = v[..] else {
                return Err(CliError::Usage("--params takes sizes,min_c,max_c,min_t,max_t".into()));
            };
            let narrow = |x: u64| u32::try_from(x).map_err(|_| CliError::Usage(format!("{x} out of range")));
            let params = LotTypeParams::new(ns as usize, narrow(a)?, narrow(b)?, narrow(c)?, narrow(d)?);
            let problems = params.violations();
            if !problems.is_empty() {
                return Err(CliError::Usage(problems.join("; ")));
            }
            stats_text(&params, args.branches.map(|nb| (nb, args.num_multiplicities)))
        }
        (None, None) => return Err(CliError::Usage("give an instance file or --params".into())),
    };
    emit(out, &text)?;
    Ok(ExitStatus::Optimal)
}
