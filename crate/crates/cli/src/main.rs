use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lrd_kendall::io::{self, ConfigOverrides, RegionalReport, TestReport};
use lrd_kendall::permutation::{self, PermutationMode};
use lrd_kendall::regional::{self, LrdPolicy, LrdSpec};
use lrd_kendall::{inference, power, sim};
use lrd_kendall::{Boundary, Direction, Error, LrdRule, Sidedness, TestOptions};

#[derive(Parser)]
#[command(name = "lrdmk", version, about = "Mann-Kendall trend tests with a level of relevant difference")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "LRDMK_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test one series (CSV with a time,value header).
    Test(TestArgs),
    /// Regional or seasonal test (CSV with region,time,value or region,season,time,value).
    Regional(RegionalArgs),
    /// Asymptotic power curve over a grid of LRD values.
    Power(PowerArgs),
    /// Monte Carlo simulation grid from a TOML config.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LrdMode {
    Absolute,
    FractionOfMean,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Leq,
    Lt,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Sym,
    Pos,
    Neg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sided {
    Two,
    Greater,
    Less,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Normal,
    Permutation,
    Exhaustive,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Json,
    Text,
    Csv,
}

#[derive(clap::Args)]
struct LrdArgs {
    /// LRD value: absolute d, or the fraction f with --lrd-mode fraction-of-mean.
    #[arg(long, default_value_t = 0.0)]
    lrd: f64,
    #[arg(long, value_enum, default_value = "absolute")]
    lrd_mode: LrdMode,
    /// Tie when |difference| <= d (leq) or < d (lt).
    #[arg(long, value_enum, default_value = "leq")]
    boundary: BoundaryArg,
    #[arg(long, value_enum, default_value = "sym")]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value = "two")]
    sided: Sided,
    #[arg(long, value_enum, default_value = "normal")]
    method: Method,
    /// Random permutations for --method permutation.
    #[arg(long, default_value_t = permutation::DEFAULT_REPLICATES)]
    permutations: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

impl LrdArgs {
    fn spec(&self) -> LrdSpec {
        match self.lrd_mode {
            LrdMode::Absolute => LrdSpec::Absolute(self.lrd),
            LrdMode::FractionOfMean => LrdSpec::FractionOfMean(self.lrd),
        }
    }

    fn boundary(&self) -> Boundary {
        match self.boundary {
            BoundaryArg::Leq => Boundary::TieIfLeq,
            BoundaryArg::Lt => Boundary::TieIfLt,
        }
    }

    fn direction(&self) -> Direction {
        match self.direction {
            DirectionArg::Sym => Direction::Symmetric,
            DirectionArg::Pos => Direction::PositiveOnly,
            DirectionArg::Neg => Direction::NegativeOnly,
        }
    }

    fn sidedness(&self) -> Sidedness {
        match self.sided {
            Sided::Two => Sidedness::TwoSided,
            Sided::Greater => Sidedness::Greater,
            Sided::Less => Sidedness::Less,
        }
    }
}

#[derive(clap::Args)]
struct TestArgs {
    input: PathBuf,
    #[command(flatten)]
    lrd: LrdArgs,
}

#[derive(clap::Args)]
struct RegionalArgs {
    input: PathBuf,
    #[command(flatten)]
    lrd: LrdArgs,
    /// Per-group LRD in the units of --lrd-mode, as GROUP=VALUE (repeatable).
    #[arg(long = "lrd-override", value_name = "GROUP=VALUE")]
    overrides: Vec<String>,
}

#[derive(clap::Args)]
struct PowerArgs {
    /// normal:SIGMA, uniform:A:B or file:PATH (CSV with an x,f header).
    #[arg(long, default_value = "normal:1")]
    density: String,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// START:STOP:STEP
    #[arg(long, default_value = "0:3:0.01")]
    d_grid: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: TableFormat,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the replicate count of every scenario.
    #[arg(long)]
    replicates: Option<u64>,
    /// Overrides the seed of every scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn run_test(args: &TestArgs) -> Result<String, Error> {
    let a = &args.lrd;
    let series = io::parse_table(&read(&args.input)?)?.to_series()?;
    let d = a.spec().resolve(series.values())?;
    let rule = LrdRule::with_options(d, a.boundary(), a.direction())?;
    let sidedness = a.sidedness();
    let analytic = if a.method == Method::Normal || rule.is_symmetric() {
        Some(inference::run_test(&series, &rule, sidedness, &TestOptions::default())?)
    } else {
        None
    };
    let permutation = match a.method {
        Method::Normal => None,
        Method::Permutation => {
            Some(permutation::run(&series, &rule, PermutationMode::Sampled, a.permutations, a.seed, sidedness)?)
        }
        Method::Exhaustive => Some(permutation::exhaustive_test(&series, &rule, sidedness)?),
    };
    let report = TestReport { n: series.len(), d, analytic, permutation };
    match a.format {
        Format::Json => io::to_json(&report),
        Format::Text => Ok(io::render_test_text(&report)),
    }
}

fn run_regional(args: &RegionalArgs) -> Result<String, Error> {
    let a = &args.lrd;
    let data = io::parse_table(&read(&args.input)?)?.to_regional()?;
    let mut policy = LrdPolicy::from_spec(a.spec()).with_boundary(a.boundary()).with_direction(a.direction());
    for o in &args.overrides {
        let (label, value) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--lrd-override expects GROUP=VALUE, got {o:?}")))?;
        let value: f64 = value.trim().parse().map_err(|_| Error::Config(format!("bad override value in {o:?}")))?;
        let spec = match a.lrd_mode {
            LrdMode::Absolute => LrdSpec::Absolute(value),
            LrdMode::FractionOfMean => LrdSpec::FractionOfMean(value),
        };
        policy = policy.with_override(label.trim(), spec);
    }
    let sidedness = a.sidedness();
    let analytic = if a.method == Method::Normal || policy.direction == Direction::Symmetric {
        Some(regional::regional_test(&data, &policy, sidedness, &TestOptions::default())?)
    } else {
        None
    };
    let permutation = match a.method {
        Method::Normal => None,
        Method::Exhaustive => {
            return Err(Error::Config("--method exhaustive is only available for single series".into()))
        }
        Method::Permutation => Some(permutation::regional_permutation_test(
            &data,
            &policy,
            a.permutations,
            a.seed,
            sidedness,
        )?),
    };
    match a.format {
        Format::Json => io::to_json(&RegionalReport { analytic, permutation }),
        Format::Text => {
            let mut out = analytic.as_ref().map(io::render_regional_text).unwrap_or_default();
            if let Some(p) = &permutation {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str("Within-group ");
                out.push_str(&io::render_permutation_text(p));
            }
            Ok(out)
        }
    }
}

fn run_power(args: &PowerArgs) -> Result<String, Error> {
    let density = io::parse_density_spec(&args.density)?;
    let grid = io::parse_d_grid(&args.d_grid)?;
    let curve = power::power_curve(&density, args.lambda, &grid, args.alpha)?;
    match args.format {
        TableFormat::Json => io::to_json(&curve),
        TableFormat::Text => Ok(io::render_power_text(&curve)),
        TableFormat::Csv => io::power_to_csv(&curve),
    }
}

fn run_simulate(args: &SimulateArgs) -> Result<String, Error> {
    let overrides = ConfigOverrides { replicates: args.replicates, seed: args.seed };
    let scenarios = io::parse_sim_config(&read(&args.config)?, overrides)?;
    let rows = sim::run_grid(&scenarios)?;
    let body = match args.format {
        TableFormat::Json => io::to_json(&rows)?,
        TableFormat::Text => io::render_grid_text(&rows),
        TableFormat::Csv => io::grid_to_csv(&rows)?,
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, body)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(body),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n > 0 {
            // only fails if a pool already exists, which cannot happen here
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let result = match &cli.command {
        Command::Test(a) => run_test(a),
        Command::Regional(a) => run_regional(a),
        Command::Power(a) => run_power(a),
        Command::Simulate(a) => run_simulate(a),
    };
    match result {
        Ok(mut out) => {
            if !out.is_empty() && !out.ends_with('\n') {
                out.push('\n');
            }
            // a closed pipe (e.g. `| head`) is not an error for a report writer
            let _ = std::io::stdout().lock().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_parse_error() { 2 } else { 3 })
        }
    }
}
