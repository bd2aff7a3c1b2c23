//! `hvr`: generate, inspect, run and benchmark hidden-variable resultant
//! solvers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;

use hvr_core::basis_search::{GenerateError, SearchConfig, DEFAULT_SEED};
use hvr_core::pencil::{ScheduleOp, Side};
use hvr_core::poly::parse_system;
use hvr_core::problems::{builtin, run_stability, StabilityConfig, StabilityMode, StabilityReport};
use hvr_core::runtime::{format_solutions, parse_instance, solve_with_report, OutputFormat, SolveOptions};
use hvr_core::{PolySystem, SolverTemplate};

#[derive(Parser, Debug)]
#[command(name = "hvr", version, about = "Hidden-variable sparse resultant solver generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search a monomial basis and write a solver template.
    Generate {
        /// Problem file, or a built-in name (SYS-A, SYS-B, SYS-C).
        problem: String,
        /// Where to write the template.
        template: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Solve one coefficient instance with a template.
    Solve {
        template: PathBuf,
        /// Lines of `slot = value`.
        instance: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
        /// Also emit invalid and indeterminate records.
        #[arg(long)]
        keep_all: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Print the sizes and structure of a template.
    Inspect { template: PathBuf },
    /// Generate once, then measure accuracy on planted-root instances.
    Bench {
        /// Problem file, or a built-in name (SYS-A, SYS-B, SYS-C).
        problem: String,
        /// Prefix for the per-trial CSV and histogram files.
        report: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, value_enum, default_value_t = Mode::Random)]
        mode: Mode,
        /// Distance between the two near-coincident roots.
        #[arg(long, default_value_t = 1e-2)]
        gap: f64,
        /// Run both modes and report both medians.
        #[arg(long)]
        compare: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    /// Variable to hide; every variable is tried when absent.
    #[arg(long)]
    hidden: Option<String>,
    /// Displacement size, as `p/q` or a decimal.
    #[arg(long, value_parser = parse_rational, default_value = "1/1000")]
    eps: Rational64,
    #[arg(long, default_value_t = 1e-8)]
    rank_tol: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    max_subset_size: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    #[arg(long, default_value_t = 1e-6)]
    residual_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pivot_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    inf_tol: f64,
    /// Skip the reduction schedule and solve the full pencil.
    #[arg(long)]
    no_reduce: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Struct,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Random,
    #[value(name = "near_degenerate")]
    NearDegenerate,
}

impl From<Mode> for StabilityMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Random => StabilityMode::Random,
            Mode::NearDegenerate => StabilityMode::NearDegenerate,
        }
    }
}

/// Validated settings shared by every subcommand.
#[derive(Clone, Debug)]
struct Config {
    epsilon: Rational64,
    rank_tol: f64,
    residual_tol: f64,
    consistency_tol: f64,
    pivot_tol: f64,
    inf_tol: f64,
    seed: u64,
    max_subset_size: Option<usize>,
    forced_hidden: Option<String>,
    no_reduce: bool,
}

impl Default for Config {
    fn default() -> Self {
        let search = SearchConfig::default();
        let solve = SolveOptions::default();
        Config {
            epsilon: search.epsilon,
            rank_tol: search.rank_tol,
            residual_tol: solve.residual_tol,
            consistency_tol: solve.consistency_tol,
            pivot_tol: solve.pivot_tol,
            inf_tol: solve.inf_tol,
            seed: search.seed,
            max_subset_size: None,
            forced_hidden: None,
            no_reduce: false,
        }
    }
}

impl Config {
    fn with_search(mut self, a: &SearchArgs) -> Self {
        self.epsilon = a.eps;
        self.rank_tol = a.rank_tol;
        self.seed = a.seed;
        self.max_subset_size = a.max_subset_size;
        self.forced_hidden = a.hidden.clone();
        self
    }

    fn with_solve(mut self, a: &SolveArgs) -> Self {
        self.residual_tol = a.residual_tol;
        self.pivot_tol = a.pivot_tol;
        self.inf_tol = a.inf_tol;
        self.no_reduce = a.no_reduce;
        self
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank-tol", self.rank_tol),
            ("residual-tol", self.residual_tol),
            ("consistency-tol", self.consistency_tol),
            ("pivot-tol", self.pivot_tol),
            ("inf-tol", self.inf_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                bail!("--{name} must lie in (0, 1), got {v}");
            }
        }
        if self.epsilon <= Rational64::from_integer(0) || self.epsilon >= Rational64::from_integer(1) {
            bail!("--eps must lie in (0, 1), got {}", self.epsilon);
        }
        if self.max_subset_size == Some(0) {
            bail!("--max-subset-size must be at least 1");
        }
        Ok(())
    }

    fn search(&self, sys: &PolySystem) -> Result<SearchConfig> {
        let hidden = match &self.forced_hidden {
            None => None,
            Some(name) => Some(
                sys.variable_index(name)
                    .ok_or_else(|| anyhow!("--hidden {name}: no such variable"))?,
            ),
        };
        Ok(SearchConfig {
            epsilon: self.epsilon,
            rank_tol: self.rank_tol,
            seed: self.seed,
            max_subset_size: self.max_subset_size,
            hidden,
            inf_tol: self.inf_tol,
            pivot_tol: self.pivot_tol,
            ..SearchConfig::default()
        })
    }

    fn solve_options(&self, keep_all: bool) -> SolveOptions {
        SolveOptions {
            residual_tol: self.residual_tol,
            consistency_tol: self.consistency_tol,
            pivot_tol: self.pivot_tol,
            inf_tol: self.inf_tol,
            no_reduce: self.no_reduce,
            keep_all,
            ..SolveOptions::default()
        }
    }
}

fn parse_rational(s: &str) -> Result<Rational64, String> {
    let s = s.trim();
    if let Ok(r) = Rational64::from_str(s) {
        return Ok(r);
    }
    let bad = || format!("`{s}` is not a fraction or decimal");
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').ok_or_else(bad)?;
    if frac.len() > 15 || !(int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())) {
        return Err(bad());
    }
    let digits: i64 = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let r = Rational64::new(digits, 10i64.pow(frac.len() as u32));
    Ok(if neg { -r } else { r })
}

fn load_problem(arg: &str) -> Result<PolySystem> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return parse_system(&text).with_context(|| format!("parsing {arg}"));
    }
    builtin(arg)
        .map(|b| b.system)
        .map_err(|_| anyhow!("{arg}: no such file or built-in problem"))
}

fn load_template(path: &Path) -> Result<SolverTemplate> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let template = SolverTemplate::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
    Ok(template)
}

fn generate(sys: &PolySystem, config: &Config) -> Result<SolverTemplate> {
    match hvr_core::generate(sys, &config.search(sys)?) {
        Ok(r) => Ok(r.template),
        Err(GenerateError::NoViableCandidate { diagnostics }) => {
            for (id, why) in &diagnostics {
                eprintln!("candidate {id}: {why}");
            }
            bail!("no viable basis among {} candidates", diagnostics.len())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_generate(problem: &str, out: &Path, config: &Config) -> Result<()> {
    let sys = load_problem(problem)?;
    let template = generate(&sys, config)?;
    fs::write(out, template.to_json()).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "basis={} gep={} reduced={} hidden={}",
        template.basis_size(),
        template.pencil_size,
        template.reduced_size(),
        template.hidden_name()
    );
    Ok(())
}

fn cmd_solve(template: &Path, instance: &Path, config: &Config, keep_all: bool, format: Format) -> Result<()> {
    let template = load_template(template)?;
    let text = fs::read_to_string(instance).with_context(|| format!("reading {}", instance.display()))?;
    let inst = parse_instance(&text).with_context(|| format!("parsing {}", instance.display()))?;
    let report = solve_with_report(&template, &inst, &config.solve_options(keep_all))?;
    let format = match format {
        Format::Csv => OutputFormat::Csv,
        Format::Struct => OutputFormat::Struct,
    };
    print!("{}", format_solutions(&report.solutions, template.system.variables(), format));
    let route = if report.fallback {
        "fallback to unreduced pencil"
    } else if report.reduced {
        "reduced pencil"
    } else {
        "unreduced pencil"
    };
    eprintln!(
        "{} valid solution(s); {}x{} {route}; eigenvalues: {} finite, {} infinite, {} indeterminate",
        report.valid_count(),
        report.pencil_size,
        report.pencil_size,
        report.finite,
        report.infinite,
        report.indeterminate
    );
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let t = SolverTemplate::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
    let sys = &t.system;
    let vars = sys.variables();
    let base: Vec<String> = vars
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != t.hidden)
        .map(|(_, v)| v.clone())
        .collect();
    let poly_name = |i: usize| sys.polys()[i].name.clone();

    println!("hidden: {}", t.hidden_name());
    println!(
        "subset: {}",
        t.subset.iter().map(|&i| poly_name(i)).collect::<Vec<_>>().join(" ")
    );
    println!("displacement: {}", t.displacement);
    println!(
        "basis ({}): {}",
        t.basis_size(),
        t.basis.iter().map(|e| e.display_with(&base)).collect::<Vec<_>>().join(", ")
    );
    println!("rows:");
    for r in &t.rows {
        println!("  {} * {}", poly_name(r.poly), r.multiplier.display_with(&base));
    }
    println!("l={} k={} k'={}", t.hidden_degree, t.pencil_size, t.reduced_size());
    let ops = &t.schedule.ops;
    let elim = ops.iter().filter(|o| matches!(o, ScheduleOp::Eliminate { .. })).count();
    println!(
        "schedule: {} ops ({} eliminate, {} remove: {} zero, {} infinite)",
        ops.len(),
        elim,
        ops.len() - elim,
        t.schedule.removals_on(Side::AZeroCol),
        t.schedule.removals_on(Side::BZeroCol)
    );
    println!("recovery:");
    println!("  {} = eigenvalue", t.hidden_name());
    let label = |col: usize| {
        let (block, mono) = t.column_label(col);
        format!("{}^{block}*{}", t.hidden_name(), mono.display_with(&base))
    };
    for r in &t.recovery {
        let shift = if r.hidden_shift == 0 {
            String::new()
        } else {
            format!(" / {}^{}", t.hidden_name(), r.hidden_shift)
        };
        println!(
            "  {} = v[{}] / v[{}]{shift}    ({} / {})",
            vars[r.variable],
            r.numerator,
            r.denominator,
            label(r.numerator),
            label(r.denominator)
        );
    }
    if t.to_json() != text {
        eprintln!("note: file is not in canonical form");
    }
    Ok(())
}

fn bench_once(template: &SolverTemplate, config: &Config, mode: Mode, trials: usize, gap: f64) -> Result<StabilityReport> {
    let sc = StabilityConfig {
        trials,
        mode: mode.into(),
        gap,
        seed: config.seed,
        options: config.solve_options(false),
        ..StabilityConfig::default()
    };
    Ok(run_stability(template, &sc)?)
}

fn write_report(prefix: &Path, suffix: &str, report: &StabilityReport) -> Result<()> {
    let stem = prefix.display().to_string();
    let csv = PathBuf::from(format!("{stem}{suffix}.csv"));
    let hist = PathBuf::from(format!("{stem}{suffix}.hist"));
    fs::write(&csv, report.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    fs::write(&hist, report.histogram_data()).with_context(|| format!("writing {}", hist.display()))?;
    eprintln!("wrote {} and {}", csv.display(), hist.display());
    Ok(())
}

fn cmd_bench(
    problem: &str,
    prefix: Option<&Path>,
    config: &Config,
    trials: usize,
    mode: Mode,
    gap: f64,
    compare: bool,
) -> Result<()> {
    if !(gap > 0.0) {
        bail!("--gap must be positive, got {gap}");
    }
    let sys = load_problem(problem)?;
    let template = generate(&sys, config)?;
    eprintln!(
        "template: basis={} gep={} reduced={} hidden={}",
        template.basis_size(),
        template.pencil_size,
        template.reduced_size(),
        template.hidden_name()
    );
    let modes = if compare {
        vec![Mode::Random, Mode::NearDegenerate]
    } else {
        vec![mode]
    };
    let mut reports = Vec::new();
    for m in modes {
        let report = bench_once(&template, config, m, trials, gap)?;
        if let Some(prefix) = prefix {
            let suffix = if compare { format!("-{}", StabilityMode::from(m)) } else { String::new() };
            write_report(prefix, &suffix, &report)?;
        }
        print!("{}", report.summary());
        println!("mean solve time: {:.3} ms", report.mean_solve_seconds * 1e3);
        reports.push(report);
    }
    if let [random, near] = reports.as_slice() {
        println!(
            "median log10 error: random={:.3} near_degenerate={:.3}",
            random.median(),
            near.median()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let base = Config::default();
    match cli.command {
        Command::Generate { problem, template, search } => {
            let config = base.with_search(&search);
            config.validate()?;
            cmd_generate(&problem, &template, &config)
        }
        Command::Solve {
            template,
            instance,
            solve,
            keep_all,
            format,
        } => {
            let config = base.with_solve(&solve);
            config.validate()?;
            cmd_solve(&template, &instance, &config, keep_all, format)
        }
        Command::Inspect { template } => cmd_inspect(&template),
        Command::Bench {
            problem,
            report,
            search,
            solve,
            trials,
            mode,
            gap,
            compare,
        } => {
            let config = base.with_search(&search).with_solve(&solve);
            config.validate()?;
            cmd_bench(&problem, report.as_deref(), &config, trials as usize, mode, gap, compare)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("1/1000").unwrap(), Rational64::new(1, 1000));
        assert_eq!(parse_rational("0.001").unwrap(), Rational64::new(1, 1000));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational64::new(-1, 4));
        assert!(parse_rational("1e-3").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn config_bounds() {
        assert!(Config::default().validate().is_ok());
        let bad = Config { rank_tol: 1.5, ..Config::default() };
        assert!(bad.validate().is_err());
        let bad = Config { epsilon: Rational64::from_integer(0), ..Config::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
