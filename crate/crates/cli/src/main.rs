use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matchlab::continuum::{solve_cutoff, SolveRecord, DEFAULT_TOL};
use matchlab::experiments::{cell_spec, read_results, run_experiment, simulate_once, summarize, sweep_cells, write_outputs, GroupKey};
use matchlab::{Error, Execution, ExperimentConfig};

const OUT_ENV: &str = "MATCHLAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "matchlab", version, about = "Stable matching under shared versus independent evaluation noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the continuum market for its market-clearing cutoff
    Solve(Settings),
    /// Run one finite market and print its match metrics
    Simulate(Settings),
    /// Run every replication of a config and write CSV plus manifest
    Experiment(Settings),
    /// Print mean and standard error tables from a results CSV
    Report(ReportArgs),
}

/// Config file plus per-key overrides; flags win over file values.
#[derive(Debug, Args)]
struct Settings {
    /// Config file of `key = value` lines
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Evaluation mode(s): mono, poly
    #[arg(long, value_name = "LIST")]
    mode: Option<String>,
    /// Number(s) of firms
    #[arg(long, value_name = "LIST")]
    m: Option<String>,
    /// Total capacity as a share of applicants, in (0,1)
    #[arg(long = "S", value_name = "SHARE")]
    capacity: Option<String>,
    /// Applicant value law, e.g. uniform(0,1) or gaussian(0,1)
    #[arg(long, value_name = "DIST")]
    values: Option<String>,
    /// Evaluation noise law, e.g. uniform(-0.5,0.5)
    #[arg(long, value_name = "DIST")]
    noise: Option<String>,
    /// Law of applications per applicant, e.g. uniform(1..10), or none
    #[arg(long, value_name = "LAW")]
    kappa: Option<String>,
    /// Which k firms receive applications: topk or randomk
    #[arg(long, value_name = "NAME")]
    strategy: Option<String>,
    /// Weight(s) on common firm quality
    #[arg(long, value_name = "LIST")]
    beta: Option<String>,
    /// Weight(s) on squared distance
    #[arg(long, value_name = "LIST")]
    gamma: Option<String>,
    /// Applicants per market
    #[arg(long, value_name = "N")]
    n: Option<String>,
    /// Replications per cell
    #[arg(long, value_name = "N")]
    reps: Option<String>,
    /// Master seed
    #[arg(long, value_name = "U64")]
    seed: Option<String>,
    /// Worker threads; 0 uses every core
    #[arg(long, value_name = "N")]
    threads: Option<String>,
    /// Output directory [default: $MATCHLAB_OUT, else .]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run the full replication count
    #[arg(long)]
    full: bool,
    /// Override any other config key
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Results CSV written by `experiment`
    #[arg(value_name = "CSV")]
    input: PathBuf,
    /// Only report these metrics (repeatable)
    #[arg(long, value_name = "NAME")]
    metric: Vec<String>,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_config_error() { 1 } else { 2 };
        Failure { code, message: e.to_string() }
    }
}

impl Settings {
    fn overrides(&self) -> Result<Vec<(&str, String)>, Failure> {
        let mut pairs: Vec<(&str, String)> = [
            ("mode", &self.mode),
            ("m", &self.m),
            ("S", &self.capacity),
            ("values", &self.values),
            ("noise", &self.noise),
            ("kappa", &self.kappa),
            ("strategy", &self.strategy),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("n", &self.n),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("threads", &self.threads),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect();
        if let Some(out) = &self.out {
            pairs.push(("out", out.display().to_string()));
        }
        if self.full {
            pairs.push(("full", "true".into()));
        }
        for raw in &self.set {
            let (k, v) = raw
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("--set expects KEY=VALUE, got '{raw}'")))?;
            pairs.push((k.trim(), v.to_owned()));
        }
        Ok(pairs)
    }

    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path).map_err(|e| Failure::usage(e.to_string()))?,
            None => ExperimentConfig::default(),
        };
        let pairs = self.overrides()?;
        config
            .apply_overrides(pairs.iter().map(|(k, v)| (*k, v.as_str())))
            .map_err(|e| Failure::usage(e.to_string()))?;
        Ok(config)
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 2, message: e.to_string() })?;
    println!("{text}");
    Ok(())
}

fn solve(config: &ExperimentConfig) -> Result<(), Failure> {
    // the continuum market ignores beta and gamma
    let mut cells = sweep_cells(config);
    cells.dedup_by_key(|c| (c.mode, c.m));
    let mut records = Vec::new();
    for cell in cells {
        let spec = cell_spec(config, &cell)?;
        records.push(SolveRecord::new(&spec, &solve_cutoff(&spec, DEFAULT_TOL)?));
    }
    match records.as_slice() {
        [one] => print_json(one),
        many => print_json(&many),
    }
}

fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs `job` on the configured number of threads.
fn with_threads<T: Send>(threads: usize, job: impl FnOnce(Execution) -> T + Send) -> Result<T, Failure> {
    match threads {
        1 => Ok(job(Execution::Sequential)),
        0 => Ok(job(Execution::Parallel)),
        n => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure { code: 2, message: e.to_string() })?;
            Ok(pool.install(|| job(Execution::Parallel)))
        }
    }
}

fn experiment(config: &ExperimentConfig) -> Result<(), Failure> {
    let rows = with_threads(config.threads, |exec| run_experiment(config, exec))??;
    let paths = write_outputs(config, &rows, &output_dir(config))?;
    println!("{}", paths.csv.display());
    println!("{}", paths.manifest.display());
    Ok(())
}

fn report(args: &ReportArgs) -> Result<(), Failure> {
    let mut rows = read_results(&args.input)?;
    if !args.metric.is_empty() {
        rows.retain(|r| args.metric.contains(&r.metric));
    }
    let table = summarize(&rows, &GroupKey::ALL)?;
    let mut out = std::io::stdout().lock();
    let header: Vec<&str> = GroupKey::ALL.iter().map(GroupKey::column).chain(["count", "mean", "se"]).collect();
    let mut text = header.join("\t");
    text.push('\n');
    for row in &table {
        let mut cells: Vec<String> = row.key.iter().map(ToString::to_string).collect();
        cells.push(row.count.to_string());
        cells.push(format!("{:.6}", row.mean));
        cells.push(format!("{:.6}", row.se));
        text.push_str(&cells.join("\t"));
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(|e| Failure { code: 2, message: e.to_string() })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Solve(s) => solve(&s.resolve()?),
        Command::Simulate(s) => {
            let config = s.resolve()?;
            print_json(&simulate_once(&config, config.seed)?)
        }
        Command::Experiment(s) => experiment(&s.resolve()?),
        Command::Report(args) => report(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_become_config_keys() {
        let cli = Cli::try_parse_from(["matchlab", "solve", "--mode", "poly", "--m", "2", "--S", "0.3", "--full", "--set", "value_bins=5"]).unwrap();
        let Command::Solve(s) = cli.command else { panic!() };
        let config = s.resolve().unwrap();
        assert_eq!(config.firms, vec![2]);
        assert_eq!(config.capacity, 0.3);
        assert!(config.full);
        assert_eq!(config.value_bins, 5);
    }

    #[test]
    fn output_dir_prefers_config() {
        let config = ExperimentConfig {
            out: Some(PathBuf::from("x")),
            ..ExperimentConfig::default()
        };
        assert_eq!(output_dir(&config), PathBuf::from("x"));
    }
}
