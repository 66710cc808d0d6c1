//! Replicated finite-market experiments and their flat CSV tables.
//!
//! Every replication draws its RNG stream from `(seed, replication)` alone,
//! so all sweep cells see common random numbers and differences between
//! cells can be read replication by replication.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::access::{AccessDistribution, Strategy};
use crate::config::{ExperimentConfig, Suite};
use crate::continuum::{MarketSpec, Mode};
use crate::error::{Error, Result};
use crate::market::{compute_metrics_with_bins, deferred_acceptance, generate_market, MatchMetrics};
use crate::parallel::{try_map_indexed, Execution};
use crate::preferences::{PreferenceKind, PreferenceModel};
use crate::rng;

/// CSV header, in column order.
pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "replication",
    "mode",
    "m",
    "beta",
    "gamma",
    "k_bin",
    "value_bin",
    "metric",
    "value",
    "seed",
];

/// Application scenarios compared by the correlated suite. Each is written
/// as a prefix of the metric name, e.g. `topk/access_gap`.
pub const SCENARIOS: [&str; 3] = ["full", "topk", "randomk"];

/// Access law the correlated suite uses when the config gives none.
pub const DEFAULT_SUITE_KAPPA_MAX: usize = 10;

/// One metric value from one replication of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub replication: usize,
    pub mode: Mode,
    pub m: usize,
    pub beta: f64,
    pub gamma: f64,
    pub k_bin: Option<usize>,
    pub value_bin: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

impl ResultRow {
    fn cmp_canonical(&self, other: &Self) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then(self.mode.cmp(&other.mode))
            .then(self.m.cmp(&other.m))
            .then(self.beta.total_cmp(&other.beta))
            .then(self.gamma.total_cmp(&other.gamma))
            .then(self.replication.cmp(&other.replication))
            .then_with(|| self.metric.cmp(&other.metric))
            .then(self.k_bin.cmp(&other.k_bin))
            .then(self.value_bin.cmp(&other.value_bin))
    }
}

/// A sweep cell: one market configuration, run for every replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mode: Mode,
    pub m: usize,
    pub beta: f64,
    pub gamma: f64,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mode={} m={} beta={} gamma={}", self.mode, self.m, self.beta, self.gamma)
    }
}

/// Cells in canonical order.
pub fn sweep_cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut modes = config.modes.clone();
    modes.sort();
    modes.dedup();
    let mut cells = Vec::new();
    for &mode in &modes {
        for &m in &config.firms {
            for &beta in &config.betas {
                for &gamma in &config.gammas {
                    cells.push(Cell { mode, m, beta, gamma });
                }
            }
        }
    }
    cells
}

fn preference_model(config: &ExperimentConfig, cell: &Cell) -> PreferenceModel {
    PreferenceModel {
        kind: config.preferences,
        beta: cell.beta,
        gamma: cell.gamma,
    }
}

fn market_spec(config: &ExperimentConfig, cell: &Cell, access: Option<AccessDistribution>) -> Result<MarketSpec> {
    MarketSpec::new(cell.m, config.capacity, config.values, config.noise, cell.mode, access)
}

/// Continuum market of one sweep cell under the configured access law.
pub fn cell_spec(config: &ExperimentConfig, cell: &Cell) -> Result<MarketSpec> {
    market_spec(config, cell, config.kappa.clone())
}

struct RowSink<'a> {
    experiment: &'a str,
    cell: Cell,
    replication: usize,
    seed: u64,
    rows: Vec<ResultRow>,
}

impl RowSink<'_> {
    fn push(&mut self, metric: impl Into<String>, value: f64, k_bin: Option<usize>, value_bin: Option<usize>) {
        self.rows.push(ResultRow {
            experiment: self.experiment.to_owned(),
            replication: self.replication,
            mode: self.cell.mode,
            m: self.cell.m,
            beta: self.cell.beta,
            gamma: self.cell.gamma,
            k_bin,
            value_bin,
            metric: metric.into(),
            value,
            seed: self.seed,
        });
    }

    /// Rows for one market's metrics, metric names prefixed by `prefix`.
    fn push_metrics(&mut self, prefix: &str, metrics: &MatchMetrics, per_k: bool) {
        self.push(format!("{prefix}match_rate"), metrics.match_rate, None, None);
        self.push(format!("{prefix}top_choice_rate"), metrics.top_choice_rate, None, None);
        self.push(format!("{prefix}matched_not_top_rate"), metrics.matched_not_top_rate(), None, None);
        if let Some(r) = metrics.avg_rank_conditional_on_match {
            self.push(format!("{prefix}avg_rank"), r, None, None);
        }
        if let Some(p) = metrics.avg_matched_value_percentile {
            self.push(format!("{prefix}matched_value_percentile"), p, None, None);
        }
        for (b, bin) in metrics.by_value_bin.iter().enumerate() {
            if let (Some(rate), Some(top)) = (bin.match_rate(), bin.top_choice_rate()) {
                self.push(format!("{prefix}match_rate_by_value"), rate, None, Some(b));
                self.push(format!("{prefix}top_choice_by_value"), top, None, Some(b));
            }
        }
        if per_k {
            for (j, bin) in metrics.by_k.iter().enumerate() {
                if let Some(rate) = bin.match_rate() {
                    self.push(format!("{prefix}match_rate_by_k"), rate, Some(j + 1), None);
                }
            }
        }
    }
}

/// Match rate of applicants sending more than `split` applications minus
/// that of applicants sending at most `split`.
pub fn access_gap(metrics: &MatchMetrics, split: usize) -> Option<f64> {
    let (lo, hi) = metrics.by_k.iter().enumerate().fold(((0, 0), (0, 0)), |(lo, hi), (j, b)| {
        if j < split {
            ((lo.0 + b.matched, lo.1 + b.applicants), hi)
        } else {
            (lo, (hi.0 + b.matched, hi.1 + b.applicants))
        }
    });
    (lo.1 > 0 && hi.1 > 0).then(|| hi.0 as f64 / hi.1 as f64 - lo.0 as f64 / lo.1 as f64)
}

fn simulate(
    spec: &MarketSpec,
    n: usize,
    prefs: &PreferenceModel,
    strategy: Option<Strategy>,
    seed: u64,
    value_bins: usize,
) -> Result<MatchMetrics> {
    let market = generate_market(spec, n, prefs, strategy, &mut rng::stream(seed))?;
    compute_metrics_with_bins(&market, &deferred_acceptance(&market), value_bins)
}

/// Runs one finite market with the first cell of `config` and the given
/// seed.
pub fn simulate_once(config: &ExperimentConfig, seed: u64) -> Result<MatchMetrics> {
    let cell = *sweep_cells(config)
        .first()
        .ok_or_else(|| Error::invalid("config describes no sweep cell"))?;
    let spec = market_spec(config, &cell, config.kappa.clone())?;
    simulate(&spec, config.n, &preference_model(config, &cell), Some(config.strategy), seed, config.value_bins)
}

fn run_standard_cell(config: &ExperimentConfig, cell: Cell, replication: usize) -> Result<Vec<ResultRow>> {
    let seed = rng::replication_seed(config.seed, replication as u64);
    let spec = market_spec(config, &cell, config.kappa.clone())?;
    let metrics = simulate(&spec, config.n, &preference_model(config, &cell), Some(config.strategy), seed, config.value_bins)?;
    let mut sink = RowSink {
        experiment: &config.experiment,
        cell,
        replication,
        seed,
        rows: Vec::new(),
    };
    sink.push_metrics("", &metrics, config.kappa.is_some());
    if let Some(kappa) = &config.kappa {
        if let Some(gap) = access_gap(&metrics, kappa.max_k() / 2) {
            sink.push("access_gap", gap, None, None);
        }
    }
    Ok(sink.rows)
}

fn run_correlated_cell(config: &ExperimentConfig, cell: Cell, replication: usize) -> Result<Vec<ResultRow>> {
    let seed = rng::replication_seed(config.seed, replication as u64);
    let kappa = match &config.kappa {
        Some(k) => k.clone(),
        None => AccessDistribution::uniform(DEFAULT_SUITE_KAPPA_MAX.min(cell.m))?,
    };
    let prefs = preference_model(config, &cell);
    let mut sink = RowSink {
        experiment: &config.experiment,
        cell,
        replication,
        seed,
        rows: Vec::new(),
    };
    // same seed in every scenario: values and preferences coincide
    let full = simulate(&market_spec(config, &cell, None)?, config.n, &prefs, None, seed, config.value_bins)?;
    sink.push_metrics("full/", &full, false);
    let split = kappa.max_k() / 2;
    for (name, strategy) in [("topk", Strategy::TopK), ("randomk", Strategy::RandomK)] {
        let spec = market_spec(config, &cell, Some(kappa.clone()))?;
        let metrics = simulate(&spec, config.n, &prefs, Some(strategy), seed, config.value_bins)?;
        let prefix = format!("{name}/");
        sink.push_metrics(&prefix, &metrics, true);
        if let Some(gap) = access_gap(&metrics, split) {
            sink.push(format!("{prefix}access_gap"), gap, None, None);
        }
        if let (Some(a), Some(b)) = (full.avg_matched_value_percentile, metrics.avg_matched_value_percentile) {
            sink.push(format!("{prefix}welfare_drop"), a - b, None, None);
        }
    }
    Ok(sink.rows)
}

fn run_cells(
    config: &ExperimentConfig,
    execution: Execution,
    run: fn(&ExperimentConfig, Cell, usize) -> Result<Vec<ResultRow>>,
) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let cells = sweep_cells(config);
    let reps = config.effective_reps();
    let chunks = try_map_indexed(cells.len() * reps, execution, |task| {
        let (cell, rep) = (cells[task / reps], task % reps);
        run(config, cell, rep).map_err(|e| Error::Cell {
            cell: format!("{cell} replication={rep}"),
            source: Box::new(e),
        })
    })?;
    let mut rows: Vec<ResultRow> = chunks.into_iter().flatten().collect();
    rows.sort_by(ResultRow::cmp_canonical);
    Ok(rows)
}

/// Runs every sweep cell for every replication. Dispatches on the suite.
pub fn run_experiment(config: &ExperimentConfig, execution: Execution) -> Result<Vec<ResultRow>> {
    match config.suite {
        Suite::Standard => run_cells(config, execution, run_standard_cell),
        Suite::Correlated => run_correlated_suite(config, execution),
    }
}

/// Both modes over the beta x gamma grid, each replication run under full
/// access and under an access law with top-k and random-k applications.
pub fn run_correlated_suite(config: &ExperimentConfig, execution: Execution) -> Result<Vec<ResultRow>> {
    if config.preferences != PreferenceKind::RandomUtility {
        return Err(Error::invalid("the correlated suite needs preferences = rum"));
    }
    run_cells(config, execution, run_correlated_cell)
}

/// Grouping columns for [`summarize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKey {
    Experiment,
    Mode,
    M,
    Beta,
    Gamma,
    KBin,
    ValueBin,
    Metric,
}

impl GroupKey {
    /// Every column except replication and seed.
    pub const ALL: [GroupKey; 8] = [
        GroupKey::Experiment,
        GroupKey::Mode,
        GroupKey::M,
        GroupKey::Beta,
        GroupKey::Gamma,
        GroupKey::KBin,
        GroupKey::ValueBin,
        GroupKey::Metric,
    ];

    pub fn column(&self) -> &'static str {
        match self {
            GroupKey::Experiment => "experiment",
            GroupKey::Mode => "mode",
            GroupKey::M => "m",
            GroupKey::Beta => "beta",
            GroupKey::Gamma => "gamma",
            GroupKey::KBin => "k_bin",
            GroupKey::ValueBin => "value_bin",
            GroupKey::Metric => "metric",
        }
    }
}

/// A grouping column value; sorts numerically where the column is numeric.
#[derive(Debug, Clone, PartialEq)]
pub enum KeyValue {
    Text(String),
    Int(Option<usize>),
    Real(f64),
}

impl Eq for KeyValue {}

impl Ord for KeyValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (KeyValue::Text(a), KeyValue::Text(b)) => a.cmp(b),
            (KeyValue::Int(a), KeyValue::Int(b)) => a.cmp(b),
            (KeyValue::Real(a), KeyValue::Real(b)) => a.total_cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for KeyValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KeyValue {
    fn rank(&self) -> u8 {
        match self {
            KeyValue::Text(_) => 0,
            KeyValue::Int(_) => 1,
            KeyValue::Real(_) => 2,
        }
    }
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Text(s) => f.write_str(s),
            KeyValue::Int(Some(i)) => write!(f, "{i}"),
            KeyValue::Int(None) => Ok(()),
            KeyValue::Real(x) => write!(f, "{x}"),
        }
    }
}

fn key_value(row: &ResultRow, key: GroupKey) -> KeyValue {
    match key {
        GroupKey::Experiment => KeyValue::Text(row.experiment.clone()),
        GroupKey::Mode => KeyValue::Text(row.mode.to_string()),
        GroupKey::M => KeyValue::Int(Some(row.m)),
        GroupKey::Beta => KeyValue::Real(row.beta),
        GroupKey::Gamma => KeyValue::Real(row.gamma),
        GroupKey::KBin => KeyValue::Int(row.k_bin),
        GroupKey::ValueBin => KeyValue::Int(row.value_bin),
        GroupKey::Metric => KeyValue::Text(row.metric.clone()),
    }
}

/// Mean and standard error of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<KeyValue>,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; zero for one row.
    pub se: f64,
}

/// Mean and standard error of `xs`.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Groups rows by `keys` and reports each group's mean and standard error,
/// ordered by key.
pub fn summarize(rows: &[ResultRow], keys: &[GroupKey]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::Table("nothing to summarize".into()));
    }
    let mut groups: BTreeMap<Vec<KeyValue>, Vec<f64>> = BTreeMap::new();
    for row in rows {
        let key = keys.iter().map(|&k| key_value(row, k)).collect();
        groups.entry(key).or_default().push(row.value);
    }
    Ok(groups
        .into_iter()
        .map(|(key, xs)| {
            let (mean, se) = mean_se(&xs);
            SummaryRow {
                key,
                count: xs.len(),
                mean,
                se,
            }
        })
        .collect())
}

/// Replication-paired difference `poly - mono` of one metric within a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeContrast {
    pub m: usize,
    pub beta: f64,
    pub gamma: f64,
    pub k_bin: Option<usize>,
    pub value_bin: Option<usize>,
    pub pairs: usize,
    pub mean: f64,
    pub se: f64,
}

/// Pairs mono and poly rows of `metric` that share every other coordinate,
/// including the replication, and summarizes the differences.
pub fn mode_contrasts(rows: &[ResultRow], metric: &str) -> Vec<ModeContrast> {
    type Coord = (usize, u64, u64, Option<usize>, Option<usize>);
    let mut by: BTreeMap<Coord, BTreeMap<usize, [Option<f64>; 2]>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let coord = (r.m, r.beta.to_bits(), r.gamma.to_bits(), r.k_bin, r.value_bin);
        let slot = by.entry(coord).or_default().entry(r.replication).or_default();
        slot[(r.mode == Mode::Poly) as usize] = Some(r.value);
    }
    by.into_iter()
        .filter_map(|((m, beta, gamma, k_bin, value_bin), reps)| {
            let diffs: Vec<f64> = reps.values().filter_map(|[mono, poly]| Some((*poly)? - (*mono)?)).collect();
            if diffs.is_empty() {
                return None;
            }
            let (mean, se) = mean_se(&diffs);
            Some(ModeContrast {
                m,
                beta: f64::from_bits(beta),
                gamma: f64::from_bits(gamma),
                k_bin,
                value_bin,
                pairs: diffs.len(),
                mean,
                se,
            })
        })
        .collect()
}

fn io_error(context: &str, path: &Path) -> impl FnOnce(std::io::Error) -> Error {
    let (context, path) = (context.to_owned(), path.to_owned());
    move |source| Error::Io { context, path, source }
}

fn opt_to_string(x: Option<usize>) -> String {
    x.map(|i| i.to_string()).unwrap_or_default()
}

/// Serializes rows as CSV text.
pub fn to_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let table = |e: csv::Error| Error::Table(e.to_string());
    w.write_record(CSV_HEADER).map_err(table)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.replication.to_string(),
            r.mode.to_string(),
            r.m.to_string(),
            r.beta.to_string(),
            r.gamma.to_string(),
            opt_to_string(r.k_bin),
            opt_to_string(r.value_bin),
            r.metric.clone(),
            r.value.to_string(),
            r.seed.to_string(),
        ])
        .map_err(table)?;
    }
    w.into_inner().map_err(|e| Error::Table(e.to_string()))
}

/// Parses CSV text written by [`to_csv`].
pub fn from_csv(data: &[u8]) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(data);
    let header = reader.headers().map_err(|e| Error::Table(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Table(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| Error::Table(e.to_string()))?;
            let line = i + 2;
            let field = |j: usize| rec.get(j).unwrap_or_default();
            let bad = |col: &str| Error::Table(format!("line {line}: bad {col} '{}'", field(CSV_HEADER.iter().position(|c| *c == col).unwrap())));
            let opt = |j: usize, col: &str| -> Result<Option<usize>> {
                let s = field(j);
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(col))
                }
            };
            Ok(ResultRow {
                experiment: field(0).to_owned(),
                replication: field(1).parse().map_err(|_| bad("replication"))?,
                mode: field(2).parse().map_err(|_| bad("mode"))?,
                m: field(3).parse().map_err(|_| bad("m"))?,
                beta: field(4).parse().map_err(|_| bad("beta"))?,
                gamma: field(5).parse().map_err(|_| bad("gamma"))?,
                k_bin: opt(6, "k_bin")?,
                value_bin: opt(7, "value_bin")?,
                metric: field(8).to_owned(),
                value: field(9).parse().map_err(|_| bad("value"))?,
                seed: field(10).parse().map_err(|_| bad("seed"))?,
            })
        })
        .collect()
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let data = fs::read(path).map_err(io_error("reading results", path))?;
    from_csv(&data)
}

/// Run metadata written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub suite: String,
    pub version: String,
    pub config_hash: String,
    pub config: String,
    pub seed: u64,
    pub replications: usize,
    pub modes: Vec<Mode>,
    pub m: Vec<usize>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub scenarios: Vec<String>,
    pub metrics: Vec<String>,
    pub rows: usize,
    /// SHA-256 of the CSV bytes.
    pub csv_sha256: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, rows: &[ResultRow], csv: &[u8]) -> Self {
        use sha2::{Digest, Sha256};
        let mut metrics: Vec<String> = rows.iter().map(|r| r.metric.clone()).collect();
        metrics.sort();
        metrics.dedup();
        let mut modes = config.modes.clone();
        modes.sort();
        modes.dedup();
        let scenarios = match config.suite {
            Suite::Standard => Vec::new(),
            Suite::Correlated => SCENARIOS.iter().map(|s| s.to_string()).collect(),
        };
        Manifest {
            experiment: config.experiment.clone(),
            suite: config.suite.to_string(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_hash: config.hash(),
            config: config.canonical(),
            seed: config.seed,
            replications: config.effective_reps(),
            modes,
            m: config.firms.clone(),
            beta: config.betas.clone(),
            gamma: config.gammas.clone(),
            scenarios,
            metrics,
            rows: rows.len(),
            csv_sha256: hex::encode(Sha256::digest(csv)),
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }
}

/// Where [`write_outputs`] put its files.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `<experiment>.csv` and `<experiment>.manifest.json` into `dir`.
pub fn write_outputs(config: &ExperimentConfig, rows: &[ResultRow], dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(dir).map_err(io_error("creating output directory", dir))?;
    let csv_path = dir.join(format!("{}.csv", config.experiment));
    let manifest_path = dir.join(format!("{}.manifest.json", config.experiment));
    let csv = to_csv(rows)?;
    fs::write(&csv_path, &csv).map_err(io_error("writing results", &csv_path))?;
    let manifest = Manifest::new(config, rows, &csv);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Table(e.to_string()))?;
    fs::write(&manifest_path, json + "\n").map_err(io_error("writing manifest", &manifest_path))?;
    Ok(OutputPaths {
        csv: csv_path,
        manifest: manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mode: Mode, rep: usize, value: f64) -> ResultRow {
        ResultRow {
            experiment: "t".into(),
            replication: rep,
            mode,
            m: 2,
            beta: 0.0,
            gamma: 0.0,
            k_bin: None,
            value_bin: Some(3),
            metric: "x".into(),
            value,
            seed: 9,
        }
    }

    #[test]
    fn summary_of_single_and_constant() {
        let s = summarize(&[row(Mode::Mono, 0, 0.3)], &GroupKey::ALL).unwrap();
        assert_eq!((s[0].mean, s[0].se, s[0].count), (0.3, 0.0, 1));
        let rows: Vec<_> = (0..10).map(|r| row(Mode::Mono, r, 0.25)).collect();
        let s = summarize(&rows, &GroupKey::ALL).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].mean - 0.25).abs() < 1e-15 && s[0].se.abs() < 1e-15);
        assert!(summarize(&[], &GroupKey::ALL).is_err());
    }

    #[test]
    fn summary_se_of_bernoulli() {
        // 50 ones and 50 zeros: sd = sqrt(25/99), se = sd / 10
        let rows: Vec<_> = (0..100).map(|r| row(Mode::Mono, r, (r % 2) as f64)).collect();
        let s = summarize(&rows, &[GroupKey::Metric]).unwrap();
        assert!((s[0].se - (0.25f64 * 100.0 / 99.0).sqrt() / 10.0).abs() < 1e-15);
        assert!((s[0].se - 0.05).abs() < 0.001);
    }

    #[test]
    fn summary_orders_numerically() {
        let mut rows = vec![row(Mode::Mono, 0, 1.0), row(Mode::Mono, 0, 2.0)];
        rows[0].m = 125;
        let s = summarize(&rows, &[GroupKey::M]).unwrap();
        assert_eq!(s[0].key, vec![KeyValue::Int(Some(2))]);
    }

    #[test]
    fn contrasts_pair_by_replication() {
        let rows = vec![
            row(Mode::Mono, 0, 1.0),
            row(Mode::Poly, 0, 3.0),
            row(Mode::Mono, 1, 2.0),
            row(Mode::Poly, 1, 6.0),
            row(Mode::Poly, 2, 9.0),
        ];
        let c = mode_contrasts(&rows, "x");
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].pairs, c[0].mean), (2, 3.0));
        assert!((c[0].se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = vec![row(Mode::Mono, 0, 0.1 + 0.2), row(Mode::Poly, 4, -1e-300)];
        rows[1].k_bin = Some(7);
        rows[1].value_bin = None;
        rows[1].beta = 2.5;
        let bytes = to_csv(&rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("experiment,replication,mode,m,beta,gamma,k_bin,value_bin,metric,value,seed\n"));
        assert!(!text.contains('\r'));
        assert_eq!(from_csv(&bytes).unwrap(), rows);
        assert!(from_csv(b"a,b\n1,2\n").is_err());
    }

    #[test]
    fn small_experiment_is_deterministic_across_execution() {
        let mut config = ExperimentConfig::default();
        config.apply_overrides([("n", "60"), ("m", "2,3"), ("reps", "4"), ("kappa", "uniform(1..2)")]).unwrap();
        let a = run_experiment(&config, Execution::Sequential).unwrap();
        let b = run_experiment(&config, Execution::Parallel).unwrap();
        assert_eq!(to_csv(&a).unwrap(), to_csv(&b).unwrap());
        assert!(a.iter().any(|r| r.metric == "access_gap"));
        assert!(a.iter().any(|r| r.metric == "match_rate_by_k" && r.k_bin == Some(2)));
    }

    #[test]
    fn correlated_suite_needs_rum() {
        let config = ExperimentConfig {
            suite: Suite::Correlated,
            ..ExperimentConfig::default()
        };
        assert!(run_experiment(&config, Execution::Sequential).is_err());
    }
}
