//! Applicant preferences over firms.
//!
//! Either uniformly random strict orders, or a random-utility model with a
//! vertical quality term and a horizontal distance term:
//!
//! ```text
//! u_i(f) = beta * quality_f - gamma * (loc_i - loc_f)^2 + eps_if,   eps ~ Logistic(0, 1)
//! ```
//!
//! With `beta = gamma = 0` the utility model reduces to uniform orders.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceKind {
    #[default]
    Uniform,
    #[serde(rename = "rum")]
    RandomUtility,
}

impl fmt::Display for PreferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreferenceKind::Uniform => "uniform",
            PreferenceKind::RandomUtility => "rum",
        })
    }
}

impl FromStr for PreferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(PreferenceKind::Uniform),
            "rum" | "random-utility" | "random_utility" => Ok(PreferenceKind::RandomUtility),
            _ => Err(Error::invalid(format!("unknown preference model '{s}' (expected uniform or rum)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PreferenceModel {
    pub kind: PreferenceKind,
    /// Weight on the shared firm quality.
    pub beta: f64,
    /// Weight on squared applicant-firm distance.
    pub gamma: f64,
}

impl PreferenceModel {
    pub fn uniform() -> Self {
        PreferenceModel::default()
    }

    pub fn random_utility(beta: f64, gamma: f64) -> Result<Self> {
        let model = PreferenceModel {
            kind: PreferenceKind::RandomUtility,
            beta,
            gamma,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.gamma >= 0.0 && self.beta.is_finite() && self.gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "beta and gamma must be finite and nonnegative (got {}, {})",
                self.beta, self.gamma
            )));
        }
        Ok(())
    }
}

/// Strict rankings of `m` firms by `n` applicants, plus the characteristics
/// they were generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceProfile {
    num_firms: usize,
    // row i: firms in applicant i's order, most preferred first
    rankings: Vec<usize>,
    // row i: 1-based rank of each firm for applicant i
    ranks: Vec<u32>,
    pub applicant_locations: Vec<f64>,
    pub firm_quality: Vec<f64>,
    pub firm_locations: Vec<f64>,
}

impl PreferenceProfile {
    /// Builds a profile from explicit rankings (0-based firm indices).
    pub fn from_rankings(rankings: Vec<Vec<usize>>, num_firms: usize) -> Result<Self> {
        let n = rankings.len();
        let mut flat = Vec::with_capacity(n * num_firms);
        for (i, row) in rankings.into_iter().enumerate() {
            if row.len() != num_firms {
                return Err(Error::DimensionMismatch(format!(
                    "applicant {i} ranks {} firms, expected {num_firms}",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        let profile = PreferenceProfile::from_flat(flat, num_firms, vec![0.0; n], vec![0.0; num_firms], vec![0.0; num_firms]);
        profile.check_permutations()?;
        Ok(profile)
    }

    fn from_flat(
        rankings: Vec<usize>,
        num_firms: usize,
        applicant_locations: Vec<f64>,
        firm_quality: Vec<f64>,
        firm_locations: Vec<f64>,
    ) -> Self {
        let mut ranks = vec![0u32; rankings.len()];
        for (row, rank_row) in rankings.chunks(num_firms.max(1)).zip(ranks.chunks_mut(num_firms.max(1))) {
            for (pos, &f) in row.iter().enumerate() {
                if f < num_firms {
                    rank_row[f] = pos as u32 + 1;
                }
            }
        }
        PreferenceProfile {
            num_firms,
            rankings,
            ranks,
            applicant_locations,
            firm_quality,
            firm_locations,
        }
    }

    /// Errors unless every row is a permutation of the firms.
    pub fn check_permutations(&self) -> Result<()> {
        for i in 0..self.num_applicants() {
            let mut seen = vec![false; self.num_firms];
            for &f in self.ranking(i) {
                if f >= self.num_firms || std::mem::replace(&mut seen[f], true) {
                    return Err(Error::invalid(format!("ranking of applicant {i} is not a permutation")));
                }
            }
        }
        Ok(())
    }

    pub fn num_applicants(&self) -> usize {
        self.rankings.len().checked_div(self.num_firms).unwrap_or(0)
    }

    pub fn num_firms(&self) -> usize {
        self.num_firms
    }

    /// Firms in applicant `i`'s order, most preferred first.
    pub fn ranking(&self, i: usize) -> &[usize] {
        &self.rankings[i * self.num_firms..(i + 1) * self.num_firms]
    }

    /// 1-based rank of `firm` for `applicant`, with `None` (unmatched) at 0.
    pub fn rank_of(&self, applicant: usize, firm: Option<usize>) -> Result<u32> {
        if applicant >= self.num_applicants() {
            return Err(Error::invalid(format!("applicant {applicant} out of range")));
        }
        match firm {
            None => Ok(0),
            Some(f) if f < self.num_firms => Ok(self.ranks[applicant * self.num_firms + f]),
            Some(f) => Err(Error::invalid(format!("firm {f} out of range"))),
        }
    }

    /// Unchecked rank lookup for hot loops.
    #[inline]
    pub(crate) fn rank(&self, applicant: usize, firm: usize) -> u32 {
        self.ranks[applicant * self.num_firms + firm]
    }
}

/// Draws a standard logistic variate by inversion.
fn logistic<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let p: f64 = rng.sample(Open01);
    (p / (1.0 - p)).ln()
}

/// Generates preferences for `n` applicants over `m` firms.
pub fn generate_preferences<R: Rng + ?Sized>(
    model: &PreferenceModel,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<PreferenceProfile> {
    model.validate()?;
    if n == 0 || m == 0 {
        return Err(Error::invalid("need at least one applicant and one firm"));
    }
    let firm_quality: Vec<f64> = (0..m).map(|_| rng.random()).collect();
    let firm_locations: Vec<f64> = (0..m).map(|_| rng.random()).collect();
    let mut applicant_locations = Vec::with_capacity(n);
    let mut rankings = Vec::with_capacity(n * m);
    let mut utility = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    for _ in 0..n {
        let loc: f64 = rng.random();
        applicant_locations.push(loc);
        for (j, slot) in order.iter_mut().enumerate() {
            *slot = j;
        }
        match model.kind {
            PreferenceKind::Uniform => order.shuffle(rng),
            PreferenceKind::RandomUtility => {
                for (f, u) in utility.iter_mut().enumerate() {
                    let d = loc - firm_locations[f];
                    *u = model.beta * firm_quality[f] - model.gamma * d * d + logistic(rng);
                }
                order.sort_by(|&a, &b| utility[b].total_cmp(&utility[a]).then(a.cmp(&b)));
            }
        }
        rankings.extend_from_slice(&order);
    }
    Ok(PreferenceProfile::from_flat(
        rankings,
        m,
        applicant_locations,
        firm_quality,
        firm_locations,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn rank_of_examples() {
        // firms 1-based (2, 3, 1) -> 0-based (1, 2, 0)
        let p = PreferenceProfile::from_rankings(vec![vec![1, 2, 0]], 3).unwrap();
        assert_eq!(p.rank_of(0, Some(1)).unwrap(), 1);
        assert_eq!(p.rank_of(0, None).unwrap(), 0);
        assert_eq!(p.rank_of(0, Some(0)).unwrap(), 3);
        assert!(p.rank_of(1, Some(0)).is_err());
        assert!(p.rank_of(0, Some(3)).is_err());
    }

    #[test]
    fn explicit_rankings_are_validated() {
        assert!(PreferenceProfile::from_rankings(vec![vec![0, 0, 1]], 3).is_err());
        assert!(PreferenceProfile::from_rankings(vec![vec![0, 1]], 3).is_err());
        assert!(PreferenceProfile::from_rankings(vec![vec![0, 3, 1]], 3).is_err());
    }

    #[test]
    fn generated_rankings_are_permutations() {
        for model in [PreferenceModel::uniform(), PreferenceModel::random_utility(5.0, 5.0).unwrap()] {
            let p = generate_preferences(&model, 500, 7, &mut rng::stream(1)).unwrap();
            p.check_permutations().unwrap();
            assert_eq!(p.num_applicants(), 500);
            for i in 0..500 {
                for (pos, &f) in p.ranking(i).iter().enumerate() {
                    assert_eq!(p.rank_of(i, Some(f)).unwrap() as usize, pos + 1);
                }
            }
            assert!(p.applicant_locations.iter().chain(&p.firm_quality).all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let model = PreferenceModel::random_utility(3.0, 1.0).unwrap();
        let a = generate_preferences(&model, 50, 4, &mut rng::stream(5)).unwrap();
        let b = generate_preferences(&model, 50, 4, &mut rng::stream(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_validation() {
        assert!(PreferenceModel::random_utility(-1.0, 0.0).is_err());
        assert!(PreferenceModel::random_utility(0.0, f64::NAN).is_err());
        assert_eq!("RUM".parse::<PreferenceKind>().unwrap(), PreferenceKind::RandomUtility);
        assert!("logit".parse::<PreferenceKind>().is_err());
    }
}
