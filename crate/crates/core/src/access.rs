//! Differential application access: how many firms an applicant may apply
//! to, which firms they pick, and what a given application set is worth
//! ex ante under a shared cutoff.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::continuum::{MarketSpec, Mode};
use crate::error::{Error, Result};

/// Largest application set whose outcome is enumerated exactly.
pub const EXACT_ENUMERATION_LIMIT: usize = 20;

/// Law of the number of applications `k` an applicant may submit.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessDistribution {
    // weights[k - 1] = P[k]
    weights: Vec<f64>,
}

impl AccessDistribution {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("access law needs at least one weight"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("access weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("access weights sum to {total}, not 1")));
        }
        let mut weights: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        while weights.last() == Some(&0.0) {
            weights.pop();
        }
        Ok(AccessDistribution { weights })
    }

    /// Uniform over `{1, ..., max_k}`.
    pub fn uniform(max_k: usize) -> Result<Self> {
        if max_k == 0 {
            return Err(Error::invalid("uniform access law needs max_k >= 1"));
        }
        Ok(AccessDistribution {
            weights: vec![1.0 / max_k as f64; max_k],
        })
    }

    pub fn point_mass(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("point-mass access law needs k >= 1"));
        }
        let mut weights = vec![0.0; k];
        weights[k - 1] = 1.0;
        Ok(AccessDistribution { weights })
    }

    /// Largest `k` with positive weight.
    pub fn max_k(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.weights.get(k - 1).copied().unwrap_or(0.0)
    }

    /// `(k, P[k])` for every `k` with positive weight.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, w)| (i + 1, *w))
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|(k, w)| k as f64 * w).sum()
    }

    pub(crate) fn check_firms(&self, m: usize) -> Result<()> {
        if self.max_k() > m {
            return Err(Error::InvalidSpec(format!(
                "access law reaches k = {} but there are only {m} firms",
                self.max_k()
            )));
        }
        Ok(())
    }

    /// Draws the number of applications for one applicant.
    pub fn sample_k<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.support() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        // rounding left u above the final partial sum
        self.support().last().map(|(k, _)| k).unwrap_or(1)
    }
}

impl fmt::Display for AccessDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.weights.len();
        if self.weights.iter().all(|w| *w == self.weights[0]) {
            return write!(f, "uniform(1..{n})");
        }
        if self.support().count() == 1 {
            return write!(f, "pointmass({n})");
        }
        write!(f, "weights[")?;
        for (i, w) in self.weights.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, "]")
    }
}

impl FromStr for AccessDistribution {
    type Err = Error;

    /// `uniform(1..K)`, `pointmass(k)` or `weights[w1,w2,...]`.
    fn from_str(s: &str) -> Result<Self> {
        let c: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        let bad = || Error::invalid(format!("cannot parse access law '{s}'"));
        if let Some(inner) = c.strip_prefix("uniform(").and_then(|r| r.strip_suffix(')')) {
            let (lo, hi) = inner.split_once("..").ok_or_else(bad)?;
            if lo != "1" {
                return Err(Error::invalid("uniform access law must start at 1"));
            }
            return AccessDistribution::uniform(hi.parse().map_err(|_| bad())?);
        }
        if let Some(inner) = c
            .strip_prefix("pointmass(")
            .or_else(|| c.strip_prefix("point_mass("))
            .and_then(|r| r.strip_suffix(')'))
        {
            return AccessDistribution::point_mass(inner.parse().map_err(|_| bad())?);
        }
        if let Some(inner) = c.strip_prefix("weights[").and_then(|r| r.strip_suffix(']')) {
            let w = inner
                .split(',')
                .map(|x| x.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            return AccessDistribution::from_weights(w);
        }
        Err(bad())
    }
}

impl Serialize for AccessDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AccessDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which `k` firms an applicant applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// The `k` most-preferred firms.
    #[default]
    TopK,
    /// `k` firms chosen uniformly at random; offers are still ranked by true
    /// preference.
    RandomK,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::TopK => "topk",
            Strategy::RandomK => "randomk",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "topk" | "top-k" | "top_k" => Ok(Strategy::TopK),
            "randomk" | "random-k" | "random_k" => Ok(Strategy::RandomK),
            _ => Err(Error::invalid(format!("unknown strategy '{s}' (expected topk or randomk)"))),
        }
    }
}

impl Strategy {
    /// Application set for an applicant with preference list `ranking`
    /// (most preferred first), returned in preference order.
    pub fn apply<R: Rng + ?Sized>(&self, ranking: &[usize], k: usize, rng: &mut R) -> Result<Vec<usize>> {
        let m = ranking.len();
        if k == 0 || k > m {
            return Err(Error::invalid(format!("cannot apply to {k} of {m} firms")));
        }
        Ok(match self {
            Strategy::TopK => ranking[..k].to_vec(),
            Strategy::RandomK => {
                let mut positions = index::sample(rng, m, k).into_vec();
                positions.sort_unstable();
                positions.into_iter().map(|p| ranking[p]).collect()
            }
        })
    }
}

/// Ex-ante value of applying to a particular set of firms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetOutcome {
    pub match_probability: f64,
    /// Expected preference rank of the match given a match; `None` when a
    /// match is impossible.
    pub expected_rank: Option<f64>,
}

impl SetOutcome {
    /// Lexicographic comparison: higher match probability first, then lower
    /// expected rank. `tol` absorbs rounding.
    pub fn weakly_dominates(&self, other: &SetOutcome, tol: f64) -> bool {
        if self.match_probability > other.match_probability + tol {
            return true;
        }
        if self.match_probability < other.match_probability - tol {
            return false;
        }
        match (self.expected_rank, other.expected_rank) {
            (Some(a), Some(b)) => a <= b + tol,
            _ => true,
        }
    }
}

fn check_ranks(spec: &MarketSpec, ranks: &[usize]) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::invalid("application set is empty"));
    }
    let m = spec.num_firms;
    let mut seen = vec![false; m + 1];
    for &r in ranks {
        if r == 0 || r > m {
            return Err(Error::invalid(format!("rank {r} outside 1..={m}")));
        }
        if std::mem::replace(&mut seen[r], true) {
            return Err(Error::invalid(format!("rank {r} listed twice")));
        }
    }
    Ok(())
}

/// Match probability and expected matched rank for an applicant of value `v`
/// who applies to the firms at preference ranks `ranks`, when every firm
/// admits at cutoff `cutoff`. Exact enumeration over afford-sets.
pub fn expected_outcome_for_set(spec: &MarketSpec, cutoff: f64, v: f64, ranks: &[usize]) -> Result<SetOutcome> {
    check_ranks(spec, ranks)?;
    if ranks.len() > EXACT_ENUMERATION_LIMIT {
        return Err(Error::invalid(format!(
            "{} applications exceed the exact enumeration limit of {EXACT_ENUMERATION_LIMIT}; use estimate_outcome_for_set",
            ranks.len()
        )));
    }
    let p = spec.single_afford_probability(cutoff, v);
    match spec.mode {
        Mode::Mono => Ok(SetOutcome {
            match_probability: p,
            expected_rank: (p > 0.0).then(|| *ranks.iter().min().unwrap() as f64),
        }),
        Mode::Poly => {
            let n = ranks.len();
            let mut matched = 0.0;
            let mut rank_mass = 0.0;
            for mask in 1u32..(1 << n) {
                let size = mask.count_ones() as i32;
                let prob = p.powi(size) * (1.0 - p).powi(n as i32 - size);
                if prob == 0.0 {
                    continue;
                }
                let best = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).min().unwrap();
                matched += prob;
                rank_mass += prob * best as f64;
            }
            Ok(SetOutcome {
                match_probability: matched,
                expected_rank: (matched > 0.0).then(|| rank_mass / matched),
            })
        }
    }
}

/// Monte Carlo counterpart of [`expected_outcome_for_set`] for sets too large
/// to enumerate.
pub fn estimate_outcome_for_set<R: Rng + ?Sized>(
    spec: &MarketSpec,
    cutoff: f64,
    v: f64,
    ranks: &[usize],
    rng: &mut R,
    draws: usize,
) -> Result<SetOutcome> {
    check_ranks(spec, ranks)?;
    if draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let mut matched = 0usize;
    let mut rank_sum = 0.0;
    for _ in 0..draws {
        let best = match spec.mode {
            Mode::Mono => (v + spec.noise_dist.draw(rng) >= cutoff).then(|| *ranks.iter().min().unwrap()),
            Mode::Poly => ranks
                .iter()
                .filter(|_| v + spec.noise_dist.draw(rng) >= cutoff)
                .copied()
                .min(),
        };
        if let Some(r) = best {
            matched += 1;
            rank_sum += r as f64;
        }
    }
    Ok(SetOutcome {
        match_probability: matched as f64 / draws as f64,
        expected_rank: (matched > 0).then(|| rank_sum / matched as f64),
    })
}
