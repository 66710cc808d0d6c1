//! Experiment configuration: a `key = value` text format.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! List-valued keys (`mode`, `m`, `beta`, `gamma`) take comma-separated
//! items. Unknown keys, malformed values and repeated keys are errors
//! reported with their line number.
//!
//! ```text
//! experiment = e_wisdom
//! n = 1000
//! S = 0.5
//! values = uniform(0,1)
//! noise = uniform(-0.5,0.5)
//! mode = mono, poly
//! m = 2, 5, 25, 125
//! reps = 200
//! seed = 42
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::access::{AccessDistribution, Strategy};
use crate::continuum::Mode;
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::preferences::PreferenceKind;

/// Multiplier from desk-scale to full-scale replication counts when
/// `full_reps` is not given.
pub const FULL_SCALE_FACTOR: usize = 5;

/// Every key the format accepts, in canonical order.
pub const KEYS: &[&str] = &[
    "experiment",
    "suite",
    "n",
    "S",
    "values",
    "noise",
    "mode",
    "m",
    "preferences",
    "beta",
    "gamma",
    "kappa",
    "strategy",
    "reps",
    "full_reps",
    "full",
    "seed",
    "value_bins",
    "threads",
    "out",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Suite {
    /// Sweep cells over mode x m x beta x gamma.
    #[default]
    Standard,
    /// Both modes over a beta x gamma grid with three application scenarios.
    Correlated,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Standard => "standard",
            Suite::Correlated => "correlated",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(Suite::Standard),
            "correlated" => Ok(Suite::Correlated),
            _ => Err(Error::invalid(format!("unknown suite '{s}' (expected standard or correlated)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub suite: Suite,
    /// Applicants per market.
    pub n: usize,
    /// Total capacity as a fraction of `n`.
    pub capacity: f64,
    pub values: Distribution,
    pub noise: Distribution,
    pub modes: Vec<Mode>,
    pub firms: Vec<usize>,
    pub preferences: PreferenceKind,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub kappa: Option<AccessDistribution>,
    pub strategy: Strategy,
    pub reps: usize,
    pub full_reps: Option<usize>,
    pub full: bool,
    pub seed: u64,
    pub value_bins: usize,
    /// Worker threads; 0 means all available.
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: "experiment".into(),
            suite: Suite::Standard,
            n: 1000,
            capacity: 0.5,
            values: Distribution::Uniform { lo: 0.0, hi: 1.0 },
            noise: Distribution::Uniform { lo: -0.5, hi: 0.5 },
            modes: Mode::ALL.to_vec(),
            firms: vec![10],
            preferences: PreferenceKind::Uniform,
            betas: vec![0.0],
            gammas: vec![0.0],
            kappa: None,
            strategy: Strategy::TopK,
            reps: 200,
            full_reps: None,
            full: false,
            seed: 42,
            value_bins: crate::market::DEFAULT_VALUE_BINS,
            threads: 1,
            out: None,
        }
    }
}

fn parse_scalar<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e| Error::invalid(format!("{key}: cannot parse '{}': {e}", raw.trim())))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_scalar(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::invalid(format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::invalid(format!("{key}: expected true or false, got '{other}'"))),
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses config text. `source_name` labels diagnostics.
    pub fn parse(text: &str, source_name: Option<&str>) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let config_error = |message: String| Error::Config {
                source_name: source_name.map(str::to_owned),
                line,
                message,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_error(format!("expected 'key = value', got '{content}'")))?;
            let key = key.trim();
            let canonical = canonical_key(key).ok_or_else(|| config_error(format!("unknown key '{key}'")))?;
            if !seen.insert(canonical) {
                return Err(config_error(format!("duplicate key '{key}'")));
            }
            config.set(canonical, value).map_err(|e| config_error(strip_prefix(e)))?;
        }
        config.validate().map_err(|e| Error::Config {
            source_name: source_name.map(str::to_owned),
            line: 0,
            message: strip_prefix(e),
        })?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            context: "reading config".into(),
            path: path.to_owned(),
            source,
        })?;
        ExperimentConfig::parse(&text, Some(&path.display().to_string()))
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = canonical_key(key).ok_or_else(|| Error::invalid(format!("unknown key '{key}'")))?;
        let v = value.trim();
        match key {
            "experiment" => {
                if v.is_empty() || v.contains(|c: char| c == ',' || c.is_whitespace()) {
                    return Err(Error::invalid(format!("experiment: '{v}' must be nonempty without commas or spaces")));
                }
                self.experiment = v.to_owned();
            }
            "suite" => self.suite = parse_scalar(key, v)?,
            "n" => self.n = parse_scalar(key, v)?,
            "S" => self.capacity = parse_scalar(key, v)?,
            "values" => self.values = parse_scalar(key, v)?,
            "noise" => self.noise = parse_scalar(key, v)?,
            "mode" => self.modes = parse_list(key, v)?,
            "m" => self.firms = parse_list(key, v)?,
            "preferences" => self.preferences = parse_scalar(key, v)?,
            "beta" => self.betas = parse_list(key, v)?,
            "gamma" => self.gammas = parse_list(key, v)?,
            "kappa" => {
                self.kappa = match v.to_ascii_lowercase().as_str() {
                    "none" | "all" | "" => None,
                    _ => Some(parse_scalar(key, v)?),
                }
            }
            "strategy" => self.strategy = parse_scalar(key, v)?,
            "reps" => self.reps = parse_scalar(key, v)?,
            "full_reps" => self.full_reps = Some(parse_scalar(key, v)?),
            "full" => self.full = parse_bool(key, v)?,
            "seed" => self.seed = parse_scalar(key, v)?,
            "value_bins" => self.value_bins = parse_scalar(key, v)?,
            "threads" => self.threads = parse_scalar(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            _ => unreachable!("canonical_key only returns known keys"),
        }
        Ok(())
    }

    /// Applies `key=value` overrides on top of the current values.
    pub fn apply_overrides<'a>(&mut self, overrides: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in overrides {
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.full_reps == Some(0) {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if !(self.capacity > 0.0 && self.capacity < 1.0) {
            return Err(Error::invalid(format!("S = {} outside (0,1)", self.capacity)));
        }
        if self.value_bins == 0 {
            return Err(Error::invalid("value_bins must be at least 1"));
        }
        if self.firms.contains(&0) {
            return Err(Error::invalid("m must be at least 1"));
        }
        for (name, grid) in [("beta", &self.betas), ("gamma", &self.gammas)] {
            if grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::invalid(format!("{name} values must be finite and nonnegative")));
            }
        }
        let seats = crate::market::seats_for(self.n, self.capacity);
        if self.n <= seats {
            return Err(Error::invalid(format!("n = {} leaves no more applicants than {seats} seats", self.n)));
        }
        if let Some(&m) = self.firms.iter().find(|&&m| m > seats) {
            return Err(Error::invalid(format!("m = {m} exceeds the {seats} seats available")));
        }
        if let Some(kappa) = &self.kappa {
            for &m in &self.firms {
                kappa.check_firms(m)?;
            }
        }
        Ok(())
    }

    /// Replications actually run: `full_reps` (or `reps` scaled up) under
    /// `full`, else `reps`.
    pub fn effective_reps(&self) -> usize {
        if self.full {
            self.full_reps.unwrap_or(self.reps * FULL_SCALE_FACTOR)
        } else {
            self.reps
        }
    }

    /// Canonical text of the settings that affect results. Excludes the
    /// thread count and output directory.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let kappa = self.kappa.as_ref().map_or("none".to_owned(), ToString::to_string);
        let full_reps = self.full_reps.map_or("none".to_owned(), |r| r.to_string());
        let fields: [(&str, String); 18] = [
            ("experiment", self.experiment.clone()),
            ("suite", self.suite.to_string()),
            ("n", self.n.to_string()),
            ("S", self.capacity.to_string()),
            ("values", self.values.to_string()),
            ("noise", self.noise.to_string()),
            ("mode", join(&self.modes)),
            ("m", join(&self.firms)),
            ("preferences", self.preferences.to_string()),
            ("beta", join(&self.betas)),
            ("gamma", join(&self.gammas)),
            ("kappa", kappa),
            ("strategy", self.strategy.to_string()),
            ("reps", self.reps.to_string()),
            ("full_reps", full_reps),
            ("full", self.full.to_string()),
            ("seed", self.seed.to_string()),
            ("value_bins", self.value_bins.to_string()),
        ];
        for (k, v) in fields {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn canonical_key(key: &str) -> Option<&'static str> {
    let key = key.trim();
    if key == "capacity" {
        return Some("S");
    }
    KEYS.iter().copied().find(|k| *k == key || (*k == "S" && key == "s"))
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::InvalidArgument(m) | Error::InvalidSpec(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WISDOM: &str = "\
# match curves as m grows
experiment = e_wisdom
n = 1000
S = 0.5
values = uniform(0,1)
noise = uniform(-0.5,0.5)   # shared noise law
mode = mono, poly
m = 2, 5, 25, 125
reps = 200
seed = 42
";

    #[test]
    fn parses_example() {
        let c = ExperimentConfig::parse(WISDOM, Some("e_wisdom.cfg")).unwrap();
        assert_eq!(c.experiment, "e_wisdom");
        assert_eq!(c.firms, vec![2, 5, 25, 125]);
        assert_eq!(c.modes, vec![Mode::Mono, Mode::Poly]);
        assert_eq!(c.noise, Distribution::uniform(-0.5, 0.5).unwrap());
        assert_eq!(c.effective_reps(), 200);
        let mut full = c.clone();
        full.full = true;
        assert_eq!(full.effective_reps(), 1000);
    }

    #[test]
    fn canonical_round_trips() {
        let mut c = ExperimentConfig::parse(WISDOM, None).unwrap();
        c.kappa = Some(AccessDistribution::uniform(2).unwrap());
        c.full_reps = Some(7);
        let back = ExperimentConfig::parse(&c.canonical(), None).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_threads_and_out() {
        let a = ExperimentConfig::parse(WISDOM, None).unwrap();
        let mut b = a.clone();
        b.apply_overrides([("threads", "8"), ("out", "/tmp/x")]).unwrap();
        assert_eq!(a.hash(), b.hash());
        b.apply_overrides([("seed", "43")]).unwrap();
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("n = 10\nbogus = 3\n", 2),
            ("n = 10\n\nm = two\n", 3),
            ("reps = 3\nreps = 4\n", 2),
            ("just text\n", 1),
            ("values = cauchy(0,1)\n", 1),
        ];
        for (text, line) in cases {
            match ExperimentConfig::parse(text, Some("bad.cfg")) {
                Err(Error::Config { line: l, ref source_name, .. }) => {
                    assert_eq!(l, line, "{text}");
                    assert_eq!(source_name.as_deref(), Some("bad.cfg"));
                }
                other => panic!("{text}: {other:?}"),
            }
        }
        let e = ExperimentConfig::parse("m = 0\n", Some("z.cfg")).unwrap_err();
        assert!(e.is_config_error());
        assert!(e.to_string().starts_with("z.cfg: line 0:"), "{e}");
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        assert!(c.apply_overrides([("reps", "0")]).is_err());
        let mut c2 = ExperimentConfig::default();
        assert!(c2.apply_overrides([("S", "1.0")]).is_err());
        let mut c3 = ExperimentConfig::default();
        assert!(c3.apply_overrides([("kappa", "uniform(1..20)")]).is_err());
        c.reps = 1;
        assert!(c.apply_overrides([("kappa", "uniform(1..10)")]).is_ok());
        assert!(c.apply_overrides([("kappa", "none")]).is_ok());
        assert_eq!(c.kappa, None);
    }
}
