//! Value and noise laws, and the maximum order statistic of `n` draws.
//!
//! A [`Distribution`] is used both for applicant values and for the noise a
//! firm adds to a value when it scores an applicant. Uniform and Gaussian laws
//! have connected support and strictly increasing CDFs on it; the point mass
//! exists for perfect-information test cases only and is rejected by the
//! cutoff solver.
//!
//! The maximum of `n` i.i.d. draws has CDF `F(x)^n`. Its moments, its
//! concentration around the mean, and the probability that one maximum beats
//! an independent copy by more than a margin are computed by adaptive
//! quadrature (closed forms where they exist).

use std::fmt;
use std::str::FromStr;

use libm::erfc;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::quad::{self, DEFAULT_ABS_TOL};

/// Width of the window, in standard deviations, that stands in for the real
/// line when integrating against a Gaussian. The mass outside is below 1e-15.
pub const GAUSSIAN_TRUNCATION_SDS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, variance: f64 },
    PointMass { at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxOrderSummary {
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
}

impl Distribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("uniform({lo},{hi}) needs finite lo < hi")));
        }
        Ok(Distribution::Uniform { lo, hi })
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !(mean.is_finite() && variance.is_finite() && variance > 0.0) {
            return Err(Error::invalid(format!(
                "gaussian({mean},{variance}) needs a finite mean and positive variance"
            )));
        }
        Ok(Distribution::Gaussian { mean, variance })
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        if !at.is_finite() {
            return Err(Error::invalid("point mass must sit at a finite location"));
        }
        Ok(Distribution::PointMass { at })
    }

    /// Closed support interval; infinite endpoints for the Gaussian.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { lo, hi } => (lo, hi),
            Distribution::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution::PointMass { at } => (at, at),
        }
    }

    /// Finite interval carrying all but a negligible amount of mass.
    pub fn effective_support(&self) -> (f64, f64) {
        match *self {
            Distribution::Gaussian { mean, .. } => {
                let w = GAUSSIAN_TRUNCATION_SDS * self.std_dev();
                (mean - w, mean + w)
            }
            _ => self.support(),
        }
    }

    /// Whether the law has an interval support with a strictly increasing CDF.
    pub fn has_connected_support(&self) -> bool {
        !matches!(self, Distribution::PointMass { .. })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::Gaussian { mean, .. } => mean,
            Distribution::PointMass { at } => at,
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            Distribution::Gaussian { variance, .. } => variance.sqrt(),
            Distribution::PointMass { .. } => 0.0,
        }
    }

    /// `P[X <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => {
                if x <= lo {
                    0.0
                } else if x >= hi {
                    1.0
                } else {
                    (x - lo) / (hi - lo)
                }
            }
            Distribution::Gaussian { mean, variance } => {
                let z = (x - mean) / (2.0 * variance).sqrt();
                (0.5 * erfc(-z)).clamp(0.0, 1.0)
            }
            Distribution::PointMass { at } => {
                if x >= at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Density; zero everywhere for the point mass.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => {
                if x < lo || x > hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
            Distribution::Gaussian { mean, variance } => {
                let d = x - mean;
                (-0.5 * d * d / variance).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            Distribution::PointMass { .. } => 0.0,
        }
    }

    /// Inverse CDF on the open unit interval.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("quantile level {p} outside (0,1)")));
        }
        Ok(match *self {
            Distribution::Uniform { lo, hi } => lo + p * (hi - lo),
            Distribution::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                let mut x = mean - std::f64::consts::SQRT_2 * sd * erfc_inv(2.0 * p);
                // statrs' inverse is a starting point; polish against the libm-based cdf
                for _ in 0..3 {
                    let dens = self.pdf(x);
                    if dens <= 0.0 {
                        break;
                    }
                    let step = (self.cdf(x) - p) / dens;
                    if !step.is_finite() || step.abs() < 1e-16 * (1.0 + x.abs()) {
                        break;
                    }
                    x -= step;
                }
                x
            }
            Distribution::PointMass { at } => at,
        })
    }

    /// One draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Distribution::Gaussian { mean, variance } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + variance.sqrt() * z
            }
            Distribution::PointMass { at } => at,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.draw(rng)).collect()
    }

    /// CDF of the maximum of `n` independent draws, `F(x)^n`.
    pub fn max_order_cdf(&self, n: u64, x: f64) -> Result<f64> {
        check_n(n)?;
        Ok(pow_n(self.cdf(x), n))
    }

    fn max_order_pdf(&self, n: u64, x: f64) -> f64 {
        let f = self.pdf(x);
        if f == 0.0 {
            return 0.0;
        }
        n as f64 * pow_n(self.cdf(x), n - 1) * f
    }

    /// Mean and variance of the maximum of `n` draws.
    pub fn max_order_summary(&self, n: u64) -> Result<MaxOrderSummary> {
        check_n(n)?;
        let nf = n as f64;
        let (mean, variance) = match *self {
            Distribution::Uniform { lo, hi } => {
                // (max - lo) / (hi - lo) ~ Beta(n, 1)
                let w = hi - lo;
                (lo + w * nf / (nf + 1.0), w * w * (nf / ((nf + 1.0) * (nf + 1.0) * (nf + 2.0))))
            }
            Distribution::PointMass { at } => (at, 0.0),
            Distribution::Gaussian { .. } => {
                let (a, b) = self.effective_support();
                let mean = quad::integrate(|x| x * self.max_order_pdf(n, x), a, b, DEFAULT_ABS_TOL).value;
                let var = quad::integrate(
                    |x| {
                        let d = x - mean;
                        d * d * self.max_order_pdf(n, x)
                    },
                    a,
                    b,
                    DEFAULT_ABS_TOL,
                )
                .value;
                (mean, var.max(0.0))
            }
        };
        Ok(MaxOrderSummary { n, mean, variance })
    }

    /// `P[|X(n) - E X(n)| > epsilon]` for each `n` of an increasing schedule.
    pub fn concentration_curve(&self, epsilon: f64, n_schedule: &[u64]) -> Result<Vec<(u64, f64)>> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if n_schedule.is_empty() {
            return Err(Error::invalid("empty n schedule"));
        }
        if n_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("n schedule must be strictly increasing"));
        }
        n_schedule
            .iter()
            .map(|&n| {
                let s = self.max_order_summary(n)?;
                if !self.has_connected_support() {
                    return Ok((n, 0.0));
                }
                let below = pow_n(self.cdf(s.mean - epsilon), n);
                let above = 1.0 - pow_n(self.cdf(s.mean + epsilon), n);
                Ok((n, (below + above).clamp(0.0, 1.0)))
            })
            .collect()
    }

    /// `P[Y - Z > delta]` where `Y` and `Z` are independent maxima of `n` draws.
    pub fn pr_max_exceeds(&self, n: u64, delta: f64) -> Result<f64> {
        check_n(n)?;
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::invalid(format!("delta must be nonnegative, got {delta}")));
        }
        if !self.has_connected_support() {
            return Ok(0.0);
        }
        let (a, b) = self.effective_support();
        let breaks = quad::breakpoints(a, b, [b - delta]);
        let q = quad::integrate_with_breaks(
            |x| (1.0 - pow_n(self.cdf(x + delta), n)) * self.max_order_pdf(n, x),
            &breaks,
            DEFAULT_ABS_TOL,
        );
        Ok(q.value.clamp(0.0, 1.0))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n < 1 {
        return Err(Error::invalid("order statistic needs n >= 1"));
    }
    Ok(())
}

pub(crate) fn pow_n(base: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(k) => base.powi(k),
        Err(_) => base.powf(n as f64),
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            Distribution::Gaussian { mean, variance } => write!(f, "gaussian({mean},{variance})"),
            Distribution::PointMass { at } => write!(f, "pointmass({at})"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    /// Parses `uniform(a,b)`, `gaussian(mean,variance)` (alias `normal`) and
    /// `pointmass(c)`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        let bad = || Error::invalid(format!("cannot parse distribution '{s}'"));
        let open = compact.find('(').ok_or_else(bad)?;
        if !compact.ends_with(')') {
            return Err(bad());
        }
        let name = &compact[..open];
        let args: Vec<f64> = compact[open + 1..compact.len() - 1]
            .split(',')
            .map(|a| a.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name, args.as_slice()) {
            ("uniform", [a, b]) => Distribution::uniform(*a, *b),
            ("gaussian" | "normal", [m, v]) => Distribution::gaussian(*m, *v),
            ("pointmass" | "point_mass" | "point-mass", [c]) => Distribution::point_mass(*c),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
