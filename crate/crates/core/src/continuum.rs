//! Continuum economy: a unit mass of applicants, `m` symmetric firms with
//! total capacity `S < 1`, and a single shared market-clearing cutoff.
//!
//! An applicant of value `v` affords firm `f` when its estimated value there
//! is at least the cutoff. With uniformly random preferences every firm faces
//! the same demand, so all firms clear at the same cutoff `P` and the stable
//! matching is determined by the scalar equation `D(P) = S`, where `D` is the
//! mass of applicants who can afford at least one firm they applied to:
//!
//! ```text
//! mono            q(v, P) = 1 - F(P - v)
//! poly            q(v, P) = 1 - F(P - v)^m
//! poly with kappa q(v, P) = sum_k kappa(k) (1 - F(P - v)^k)
//! D(P)            = integral of q(v, P) d eta(v)
//! ```
//!
//! Monoculture with an access law is unchanged: one shared score decides
//! every application at once. `D` is strictly decreasing wherever it lies in
//! `(0, 1)` because both laws have connected support, so bisection finds the
//! unique root.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::access::AccessDistribution;
use crate::distributions::{pow_n, Distribution};
use crate::error::{Error, Result};
use crate::quad;

/// Default absolute tolerance on the demand residual `D(P) - S`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Bisection iteration cap.
pub const MAX_ITERATIONS: usize = 200;

/// Probability level used to truncate infinite supports when bracketing.
pub const BRACKET_TAIL: f64 = 1e-12;

const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One shared estimate per applicant.
    Mono,
    /// Independent estimates at every firm.
    Poly,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Mono, Mode::Poly];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Mono => "mono",
            Mode::Poly => "poly",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mono" | "monoculture" => Ok(Mode::Mono),
            "poly" | "polyculture" => Ok(Mode::Poly),
            _ => Err(Error::invalid(format!("unknown mode '{s}' (expected mono or poly)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub num_firms: usize,
    /// Total capacity `S` as a fraction of the applicant mass.
    pub capacity: f64,
    pub value_dist: Distribution,
    pub noise_dist: Distribution,
    pub mode: Mode,
    /// Number-of-applications law; `None` means everyone applies everywhere.
    pub access: Option<AccessDistribution>,
}

impl MarketSpec {
    pub fn new(
        num_firms: usize,
        capacity: f64,
        value_dist: Distribution,
        noise_dist: Distribution,
        mode: Mode,
        access: Option<AccessDistribution>,
    ) -> Result<Self> {
        let spec = MarketSpec {
            num_firms,
            capacity,
            value_dist,
            noise_dist,
            mode,
            access,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_firms == 0 {
            return Err(Error::InvalidSpec("need at least one firm".into()));
        }
        if !(self.capacity > 0.0 && self.capacity < 1.0) {
            return Err(Error::InvalidSpec(format!("total capacity {} outside (0,1)", self.capacity)));
        }
        if let Some(kappa) = &self.access {
            kappa.check_firms(self.num_firms)?;
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        MarketSpec { mode, ..self.clone() }
    }

    pub fn with_firms(&self, num_firms: usize) -> Self {
        MarketSpec { num_firms, ..self.clone() }
    }

    /// Probability that one estimated value clears the cutoff: `1 - F(P - v)`.
    pub fn single_afford_probability(&self, cutoff: f64, v: f64) -> f64 {
        1.0 - self.noise_dist.cdf(cutoff - v)
    }

    /// `q(v, P)`: probability that an applicant of value `v` is matched.
    fn matched_given_value(&self, cutoff: f64, v: f64) -> f64 {
        let miss = self.noise_dist.cdf(cutoff - v);
        match (self.mode, &self.access) {
            (Mode::Mono, _) => 1.0 - miss,
            (Mode::Poly, None) => 1.0 - pow_n(miss, self.num_firms as u64),
            (Mode::Poly, Some(kappa)) => kappa.support().map(|(k, w)| w * (1.0 - pow_n(miss, k as u64))).sum(),
        }
    }

    /// Values of `v` where an integrand built from `F(P - v)` has a kink.
    fn kinks(&self, cutoffs: impl IntoIterator<Item = f64>) -> Vec<f64> {
        let (xl, xh) = self.noise_dist.support();
        cutoffs.into_iter().flat_map(|p| [p - xh, p - xl]).collect()
    }

    /// `E_eta[g(v)]` with integration breakpoints at `extra`.
    fn expect_over_values<G: Fn(f64) -> f64>(&self, g: G, extra: Vec<f64>) -> f64 {
        if let Distribution::PointMass { at } = self.value_dist {
            return g(at);
        }
        let (a, b) = self.value_dist.effective_support();
        let breaks = quad::breakpoints(a, b, extra);
        quad::integrate_with_breaks(|v| g(v) * self.value_dist.pdf(v), &breaks, QUAD_TOL).value
    }

    fn check_firm_count(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.num_firms {
            return Err(Error::invalid(format!("k = {k} outside 1..={}", self.num_firms)));
        }
        Ok(())
    }
}

/// Mass of applicants matched when every firm uses cutoff `cutoff`.
pub fn aggregate_demand(spec: &MarketSpec, cutoff: f64) -> Result<f64> {
    spec.validate()?;
    Ok(spec.expect_over_values(|v| spec.matched_given_value(cutoff, v), spec.kinks([cutoff])))
}

/// Demand at each firm for an arbitrary cutoff vector, under uniformly random
/// preferences and full application access.
///
/// Poly: a firm is demanded when it is affordable and no firm ranked above it
/// is. Ranking the firms by i.i.d. uniform arrival times `t`, the chance that
/// none of the others that precede `f` is affordable is
/// `integral_0^1 prod_{g != f} (1 - t p_g) dt`, which is a polynomial integral.
///
/// Mono: an applicant with score `s` affords `A(s) = {g : P_g <= s}` and takes
/// each member with probability `1 / |A(s)|`.
pub fn per_firm_demand(spec: &MarketSpec, cutoffs: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if cutoffs.len() != spec.num_firms {
        return Err(Error::DimensionMismatch(format!(
            "{} cutoffs for {} firms",
            cutoffs.len(),
            spec.num_firms
        )));
    }
    if spec.access.is_some() {
        return Err(Error::invalid("per-firm demand is only defined here without an access law"));
    }
    let kinks = spec.kinks(cutoffs.iter().copied());
    let m = cutoffs.len();
    let demand = (0..m)
        .map(|f| match spec.mode {
            Mode::Poly => spec.expect_over_values(
                |v| {
                    let afford: Vec<f64> = cutoffs.iter().map(|&p| spec.single_afford_probability(p, v)).collect();
                    if afford[f] == 0.0 {
                        return 0.0;
                    }
                    // coefficients of prod_{g != f} (1 - t p_g)
                    let mut coef = vec![1.0];
                    for (g, &pg) in afford.iter().enumerate() {
                        if g == f {
                            continue;
                        }
                        let mut next = vec![0.0; coef.len() + 1];
                        for (i, c) in coef.iter().enumerate() {
                            next[i] += c;
                            next[i + 1] -= c * pg;
                        }
                        coef = next;
                    }
                    let none_above: f64 = coef.iter().enumerate().map(|(i, c)| c / (i + 1) as f64).sum();
                    afford[f] * none_above
                },
                kinks.clone(),
            ),
            Mode::Mono => {
                let mut levels: Vec<f64> = cutoffs.to_vec();
                levels.sort_by(f64::total_cmp);
                levels.dedup();
                spec.expect_over_values(
                    |v| {
                        let mut acc = 0.0;
                        for (i, &t) in levels.iter().enumerate() {
                            if t < cutoffs[f] {
                                continue;
                            }
                            let upper = levels.get(i + 1).map_or(1.0, |&u| spec.noise_dist.cdf(u - v));
                            let mass = upper - spec.noise_dist.cdf(t - v);
                            let affordable = cutoffs.iter().filter(|&&p| p <= t).count();
                            acc += mass / affordable as f64;
                        }
                        acc
                    },
                    kinks.clone(),
                )
            }
        })
        .collect();
    Ok(demand)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffSolution {
    /// Shared cutoff `P = P_1 = ... = P_m`.
    pub cutoff: f64,
    /// `D(P) - S`.
    pub residual: f64,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    pub mode: Mode,
    pub iterations: usize,
}

/// Bisection bracket `[V- + X-, V+ + X+]`, with infinite ends replaced by
/// extreme quantiles.
pub fn cutoff_bracket(spec: &MarketSpec) -> Result<(f64, f64)> {
    let end = |d: &Distribution| -> Result<(f64, f64)> {
        let (lo, hi) = d.support();
        let lo = if lo.is_finite() { lo } else { d.quantile(BRACKET_TAIL)? };
        let hi = if hi.is_finite() { hi } else { d.quantile(1.0 - BRACKET_TAIL)? };
        Ok((lo, hi))
    };
    let (vl, vh) = end(&spec.value_dist)?;
    let (xl, xh) = end(&spec.noise_dist)?;
    Ok((vl + xl, vh + xh))
}

/// Solves `D(P) = S` for the shared cutoff by bisection.
pub fn solve_cutoff(spec: &MarketSpec, tol: f64) -> Result<CutoffSolution> {
    solve_cutoff_with_limit(spec, tol, MAX_ITERATIONS)
}

pub fn solve_cutoff_with_limit(spec: &MarketSpec, tol: f64, max_iterations: usize) -> Result<CutoffSolution> {
    spec.validate()?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !spec.value_dist.has_connected_support() || !spec.noise_dist.has_connected_support() {
        return Err(Error::InvalidSpec(
            "cutoff solving needs value and noise laws with connected support".into(),
        ));
    }
    let target = spec.capacity;
    let (mut lo, mut hi) = cutoff_bracket(spec)?;
    let demand_lo = aggregate_demand(spec, lo)?;
    let demand_hi = aggregate_demand(spec, hi)?;
    if !(demand_lo > target && demand_hi < target) {
        return Err(Error::BracketFailure {
            lo,
            hi,
            demand_lo,
            demand_hi,
            target,
        });
    }
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::NotConverged {
                iterations: iteration,
                residual,
            });
        }
        residual = aggregate_demand(spec, mid)? - target;
        if residual.abs() <= tol {
            return Ok(CutoffSolution {
                cutoff: mid,
                residual,
                bracket: (lo, hi),
                mode: spec.mode,
                iterations: iteration,
            });
        }
        // demand falls as the cutoff rises
        if residual > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
        residual,
    })
}

/// Solver output together with the market it solves.
#[derive(Debug, Clone, Serialize)]
pub struct SolveRecord {
    pub m: usize,
    #[serde(rename = "S")]
    pub capacity: f64,
    pub value_dist: Distribution,
    pub noise_dist: Distribution,
    pub kappa: Option<AccessDistribution>,
    #[serde(flatten)]
    pub solution: CutoffSolution,
}

impl SolveRecord {
    pub fn new(spec: &MarketSpec, solution: &CutoffSolution) -> Self {
        SolveRecord {
            m: spec.num_firms,
            capacity: spec.capacity,
            value_dist: spec.value_dist,
            noise_dist: spec.noise_dist,
            kappa: spec.access.clone(),
            solution: *solution,
        }
    }
}

/// Probability that an applicant of value `v` is matched at cutoff `cutoff`.
/// With `k` given, conditions on the applicant sending `k` applications.
pub fn match_probability(spec: &MarketSpec, cutoff: f64, v: f64, k: Option<usize>) -> Result<f64> {
    spec.validate()?;
    match (spec.mode, k) {
        (_, Some(k)) => {
            spec.check_firm_count(k)?;
            Ok(match spec.mode {
                Mode::Mono => spec.single_afford_probability(cutoff, v),
                Mode::Poly => 1.0 - pow_n(spec.noise_dist.cdf(cutoff - v), k as u64),
            })
        }
        (_, None) => Ok(spec.matched_given_value(cutoff, v)),
    }
}

/// Probability of matching to one's top choice: the single estimate at the
/// top-choice firm clears the cutoff. Same formula in both modes.
pub fn top_choice_probability(spec: &MarketSpec, cutoff: f64, v: f64) -> f64 {
    spec.single_afford_probability(cutoff, v)
}

/// `v_S`, the value above which exactly mass `S` of applicants lie.
pub fn v_s_threshold(value_dist: &Distribution, capacity: f64) -> Result<f64> {
    if !(capacity > 0.0 && capacity < 1.0) {
        return Err(Error::invalid(format!("capacity {capacity} outside (0,1)")));
    }
    value_dist.quantile(1.0 - capacity)
}

/// Mean match probability within each of `bins` equal-probability value
/// bins, lowest values first.
pub fn binned_match_probability(spec: &MarketSpec, cutoff: f64, bins: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if bins == 0 {
        return Err(Error::invalid("need at least one bin"));
    }
    if matches!(spec.value_dist, Distribution::PointMass { .. }) {
        return Err(Error::invalid("value bins need a continuous value law"));
    }
    let (lo, hi) = spec.value_dist.effective_support();
    let mut edges = vec![lo];
    for b in 1..bins {
        edges.push(spec.value_dist.quantile(b as f64 / bins as f64)?.clamp(lo, hi));
    }
    edges.push(hi);
    let kinks = spec.kinks([cutoff]);
    Ok(edges
        .windows(2)
        .map(|w| {
            let breaks = quad::breakpoints(w[0], w[1], kinks.iter().copied());
            let f = |v: f64| spec.matched_given_value(cutoff, v) * spec.value_dist.pdf(v);
            let mass = spec.value_dist.cdf(w[1]) - spec.value_dist.cdf(w[0]);
            quad::integrate_with_breaks(f, &breaks, QUAD_TOL).value / mass
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirmWelfare {
    /// Total value of matched applicants, `integral of v q(v) d eta`.
    pub welfare: f64,
    /// The firm-optimal benchmark: every applicant above `v_S` matched.
    pub optimal: f64,
}

pub fn firm_welfare(spec: &MarketSpec, cutoff: f64) -> Result<FirmWelfare> {
    spec.validate()?;
    let v_s = v_s_threshold(&spec.value_dist, spec.capacity)?;
    let welfare = spec.expect_over_values(|v| v * spec.matched_given_value(cutoff, v), spec.kinks([cutoff]));
    let optimal = spec.expect_over_values(|v| if v > v_s { v } else { 0.0 }, vec![v_s]);
    Ok(FirmWelfare { welfare, optimal })
}

/// `sum_{j>=1} Binom(k, p)(j) (k + 1) / (j + 1)`: expected rank of the best of
/// `j` uniformly placed affordable firms among the applicant's top `k`,
/// unnormalised by the match probability.
fn rank_mass(p: f64, k: u64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let kf = k as f64;
    let mut ln_choose = 0.0;
    let mut acc = 0.0;
    for j in 1..=k {
        ln_choose += ((k - j + 1) as f64).ln() - (j as f64).ln();
        let pmf = (ln_choose + j as f64 * lp + (k - j) as f64 * lq).exp();
        acc += pmf * (kf + 1.0) / (j as f64 + 1.0);
    }
    acc
}

fn rank_mass_for(spec: &MarketSpec, p: f64) -> f64 {
    match &spec.access {
        None => rank_mass(p, spec.num_firms as u64),
        Some(kappa) => kappa.support().map(|(k, w)| w * rank_mass(p, k as u64)).sum(),
    }
}

/// Expected preference rank of the match of an applicant of value `v`,
/// conditional on matching, under uniformly random preferences.
///
/// Each applied firm is affordable independently with `p = 1 - F(P - v)`; the
/// best of `j` affordable firms among the top `k` has expected rank
/// `(k + 1) / (j + 1)`. Monoculture always yields rank 1.
pub fn expected_rank_poly(spec: &MarketSpec, cutoff: f64, v: f64) -> Result<f64> {
    spec.validate()?;
    let p = spec.single_afford_probability(cutoff, v);
    if p <= 0.0 {
        return Err(Error::invalid(format!(
            "value {v} never clears cutoff {cutoff}; rank given a match is undefined"
        )));
    }
    match spec.mode {
        Mode::Mono => Ok(1.0),
        Mode::Poly => Ok(rank_mass_for(spec, p) / spec.matched_given_value(cutoff, v)),
    }
}

/// Population average of the matched rank, over all matched applicants.
pub fn average_rank(spec: &MarketSpec, cutoff: f64) -> Result<f64> {
    spec.validate()?;
    if spec.mode == Mode::Mono {
        return Ok(1.0);
    }
    let kinks = spec.kinks([cutoff]);
    let mass = spec.expect_over_values(|v| rank_mass_for(spec, spec.single_afford_probability(cutoff, v)), kinks);
    let matched = aggregate_demand(spec, cutoff)?;
    if matched <= 0.0 {
        return Err(Error::invalid("nobody is matched at this cutoff"));
    }
    Ok(mass / matched)
}
