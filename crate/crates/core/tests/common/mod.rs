//! Brute-force oracles shared by the market and acceptance suites.
#![allow(dead_code)]

use matchlab::continuum::Mode;
use matchlab::market::FiniteMarket;
use matchlab::preferences::{generate_preferences, PreferenceModel};
use matchlab::Distribution;
use rand::Rng;

/// A small random market given by explicit scores. Under mono every finite
/// entry of a row is the same; `mask` knocks out applications at random.
pub fn random_market<R: Rng>(rng: &mut R, n: usize, m: usize, mode: Mode, mask: bool) -> FiniteMarket {
    let prefs = generate_preferences(&PreferenceModel::uniform(), n, m, rng).unwrap();
    let values: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let scores = (0..n)
        .map(|i| {
            let shared: f64 = values[i] + rng.random::<f64>();
            (0..m)
                .map(|_| {
                    let s = match mode {
                        Mode::Mono => shared,
                        Mode::Poly => values[i] + rng.random::<f64>(),
                    };
                    if mask && rng.random_bool(0.3) {
                        f64::NEG_INFINITY
                    } else {
                        s
                    }
                })
                .collect()
        })
        .collect();
    let capacities = (0..m).map(|_| rng.random_range(1..=3)).collect();
    FiniteMarket::from_parts(mode, Distribution::uniform(0.0, 1.0).unwrap(), values, prefs, capacities, scores).unwrap()
}

/// Brute-force blocking check, written independently of the library.
pub fn is_stable(market: &FiniteMarket, assignment: &[Option<usize>]) -> bool {
    let n = market.num_applicants();
    for i in 0..n {
        for f in 0..market.num_firms() {
            let s = market.score(i, f);
            if !s.is_finite() {
                continue;
            }
            let prefers = match assignment[i] {
                None => true,
                Some(g) => market.preferences.rank_of(i, Some(f)).unwrap() < market.preferences.rank_of(i, Some(g)).unwrap(),
            };
            if !prefers {
                continue;
            }
            let held: Vec<usize> = (0..n).filter(|&j| assignment[j] == Some(f)).collect();
            if held.len() < market.capacities[f] || held.iter().any(|&j| market.score(j, f) < s) {
                return false;
            }
        }
    }
    true
}

/// Every feasible, stable assignment: each applicant at a firm it applied
/// to or unmatched, within capacities.
pub fn all_stable(market: &FiniteMarket) -> Vec<Vec<Option<usize>>> {
    let (n, m) = (market.num_applicants(), market.num_firms());
    let total = (m + 1).pow(n as u32);
    let mut out = Vec::new();
    'outer: for code in 0..total {
        let mut c = code;
        let mut assignment = Vec::with_capacity(n);
        let mut load = vec![0; m];
        for i in 0..n {
            let d = c % (m + 1);
            c /= m + 1;
            if d == m {
                assignment.push(None);
            } else {
                if !market.score(i, d).is_finite() {
                    continue 'outer;
                }
                load[d] += 1;
                if load[d] > market.capacities[d] {
                    continue 'outer;
                }
                assignment.push(Some(d));
            }
        }
        if is_stable(market, &assignment) {
            out.push(assignment);
        }
    }
    out
}

