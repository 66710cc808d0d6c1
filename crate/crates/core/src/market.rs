//! Finite markets: score generation, deferred acceptance, stability checks
//! and per-replication metrics.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use serde::Serialize;

use crate::access::Strategy;
use crate::continuum::{MarketSpec, Mode};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::preferences::{generate_preferences, PreferenceModel, PreferenceProfile};

/// Number of equal-probability value bins used for match curves.
pub const DEFAULT_VALUE_BINS: usize = 20;

/// One realized market: values, preferences, seats and the score matrix
/// firms rank applicants by.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMarket {
    pub mode: Mode,
    /// Law the values were drawn from; used to bin applicants by value.
    pub value_dist: Distribution,
    pub values: Vec<f64>,
    pub preferences: PreferenceProfile,
    pub capacities: Vec<usize>,
    // n x m, row-major; NEG_INFINITY off the application set
    scores: Vec<f64>,
    // number of firms each applicant applied to
    applications: Vec<usize>,
}

impl FiniteMarket {
    /// Assembles a market from explicit parts. `scores[i][f]` is firm `f`'s
    /// estimate of applicant `i`, `-inf` where `i` did not apply.
    pub fn from_parts(
        mode: Mode,
        value_dist: Distribution,
        values: Vec<f64>,
        preferences: PreferenceProfile,
        capacities: Vec<usize>,
        scores: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = values.len();
        let m = capacities.len();
        if preferences.num_applicants() != n || preferences.num_firms() != m || scores.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} values, {m} capacities, preferences {}x{}, {} score rows",
                preferences.num_applicants(),
                preferences.num_firms(),
                scores.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * m);
        for (i, row) in scores.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!("score row {i} has {} entries, expected {m}", row.len())));
            }
            if row.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
                return Err(Error::invalid(format!("score row {i} has NaN or +inf")));
            }
            flat.extend(row);
        }
        let applications = flat.chunks(m.max(1)).map(|r| r.iter().filter(|s| s.is_finite()).count()).collect();
        Ok(FiniteMarket {
            mode,
            value_dist,
            values,
            preferences,
            capacities,
            scores: flat,
            applications,
        })
    }

    pub fn num_applicants(&self) -> usize {
        self.values.len()
    }

    pub fn num_firms(&self) -> usize {
        self.capacities.len()
    }

    pub fn total_capacity(&self) -> usize {
        self.capacities.iter().sum()
    }

    /// Firm `firm`'s estimated value of `applicant`.
    #[inline]
    pub fn score(&self, applicant: usize, firm: usize) -> f64 {
        self.scores[applicant * self.num_firms() + firm]
    }

    pub fn score_row(&self, applicant: usize) -> &[f64] {
        let m = self.num_firms();
        &self.scores[applicant * m..(applicant + 1) * m]
    }

    /// Number of firms `applicant` applied to.
    pub fn applications(&self, applicant: usize) -> usize {
        self.applications[applicant]
    }

    /// Firms `applicant` applied to, in preference order.
    pub fn application_set(&self, applicant: usize) -> Vec<usize> {
        self.preferences
            .ranking(applicant)
            .iter()
            .copied()
            .filter(|&f| self.score(applicant, f).is_finite())
            .collect()
    }
}

/// Splits `total` seats over `m` firms, remainder to the lowest indices.
pub fn split_capacity(total: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 || total < m {
        return Err(Error::InvalidSpec(format!("{total} seats cannot give each of {m} firms a positive capacity")));
    }
    let (base, extra) = (total / m, total % m);
    Ok((0..m).map(|f| base + usize::from(f < extra)).collect())
}

/// Seat count for `n` applicants at capacity fraction `s`.
pub fn seats_for(n: usize, s: f64) -> usize {
    (s * n as f64).round() as usize
}

/// Draws a finite market of `n` applicants from a continuum specification.
///
/// Total seats are `round(S * n)`. Under mono one noise draw is shared across
/// the row, under poly each firm gets its own. With an access law each
/// applicant draws `k` and applies by `strategy` (top-k when `None`).
pub fn generate_market<R: Rng + ?Sized>(
    spec: &MarketSpec,
    n: usize,
    pref_model: &PreferenceModel,
    strategy: Option<Strategy>,
    rng: &mut R,
) -> Result<FiniteMarket> {
    spec.validate()?;
    let m = spec.num_firms;
    let seats = seats_for(n, spec.capacity);
    if n <= seats {
        return Err(Error::InvalidSpec(format!("{n} applicants for {seats} seats; need more applicants than seats")));
    }
    let capacities = split_capacity(seats, m)?;
    let values = spec.value_dist.sample(rng, n);
    let preferences = generate_preferences(pref_model, n, m, rng)?;
    let strategy = strategy.unwrap_or_default();

    let mut scores = vec![f64::NEG_INFINITY; n * m];
    let mut applications = vec![m; n];
    let mut noise = vec![0.0; m];
    for i in 0..n {
        match spec.mode {
            Mode::Mono => noise.fill(spec.noise_dist.draw(rng)),
            Mode::Poly => noise.iter_mut().for_each(|x| *x = spec.noise_dist.draw(rng)),
        }
        let row = &mut scores[i * m..(i + 1) * m];
        match &spec.access {
            None => {
                for (s, x) in row.iter_mut().zip(&noise) {
                    *s = values[i] + x;
                }
            }
            Some(kappa) => {
                let k = kappa.sample_k(rng);
                for f in strategy.apply(preferences.ranking(i), k, rng)? {
                    row[f] = values[i] + noise[f];
                }
                applications[i] = k;
            }
        }
    }
    Ok(FiniteMarket {
        mode: spec.mode,
        value_dist: spec.value_dist,
        values,
        preferences,
        capacities,
        scores,
        applications,
    })
}

/// A many-to-one assignment of applicants to firms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub assignment: Vec<Option<usize>>,
    /// Matched applicants per firm, ascending by index.
    pub rosters: Vec<Vec<usize>>,
}

impl Matching {
    pub fn empty(n: usize, m: usize) -> Self {
        Matching {
            assignment: vec![None; n],
            rosters: vec![Vec::new(); m],
        }
    }

    /// Builds rosters from an assignment vector.
    pub fn from_assignment(assignment: Vec<Option<usize>>, m: usize) -> Result<Self> {
        let mut rosters = vec![Vec::new(); m];
        for (i, f) in assignment.iter().enumerate() {
            if let Some(f) = *f {
                rosters
                    .get_mut(f)
                    .ok_or_else(|| Error::DimensionMismatch(format!("applicant {i} assigned to firm {f} of {m}")))?
                    .push(i);
            }
        }
        Ok(Matching { assignment, rosters })
    }

    pub fn matched_count(&self) -> usize {
        self.assignment.iter().flatten().count()
    }
}

/// A tentative admit, ordered so that "greater" means the firm prefers it:
/// higher score first, then lower applicant index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Admit {
    score: f64,
    applicant: usize,
}

impl Eq for Admit {}

impl Ord for Admit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.applicant.cmp(&self.applicant))
    }
}

impl PartialOrd for Admit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Applicant-proposing deferred acceptance. Firms rank proposals by score,
/// ties going to the lower applicant index; `-inf` is never admitted.
pub fn deferred_acceptance(market: &FiniteMarket) -> Matching {
    let n = market.num_applicants();
    let m = market.num_firms();
    let mut next = vec![0usize; n];
    // min-heaps: the top is each firm's weakest current admit
    let mut held: Vec<BinaryHeap<Reverse<Admit>>> =
        market.capacities.iter().map(|&c| BinaryHeap::with_capacity(c + 1)).collect();
    let mut free: Vec<usize> = (0..n).rev().collect();

    while let Some(i) = free.pop() {
        let ranking = market.preferences.ranking(i);
        while next[i] < m {
            let f = ranking[next[i]];
            next[i] += 1;
            let score = market.score(i, f);
            let cap = market.capacities[f];
            if !score.is_finite() || cap == 0 {
                continue;
            }
            let admit = Admit { score, applicant: i };
            let heap = &mut held[f];
            if heap.len() < cap {
                heap.push(Reverse(admit));
                break;
            }
            let Reverse(weakest) = *heap.peek().expect("full roster is nonempty");
            if admit > weakest {
                heap.pop();
                heap.push(Reverse(admit));
                free.push(weakest.applicant);
                break;
            }
        }
    }

    let mut matching = Matching::empty(n, m);
    for (f, heap) in held.into_iter().enumerate() {
        let mut roster: Vec<usize> = heap.into_iter().map(|Reverse(a)| a.applicant).collect();
        roster.sort_unstable();
        for &i in &roster {
            matching.assignment[i] = Some(f);
        }
        matching.rosters[f] = roster;
    }
    matching
}

/// Checks that `matching` fits `market`: dimensions, capacities, agreement
/// between assignment and rosters, and no match without an application.
fn check_matching(market: &FiniteMarket, matching: &Matching) -> Result<()> {
    let n = market.num_applicants();
    let m = market.num_firms();
    if matching.assignment.len() != n || matching.rosters.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "matching covers {} applicants and {} firms, market has {n} and {m}",
            matching.assignment.len(),
            matching.rosters.len()
        )));
    }
    let mut on_roster = 0;
    for (f, roster) in matching.rosters.iter().enumerate() {
        if roster.len() > market.capacities[f] {
            return Err(Error::invalid(format!("firm {f} holds {} over capacity {}", roster.len(), market.capacities[f])));
        }
        for &i in roster {
            if matching.assignment.get(i) != Some(&Some(f)) {
                return Err(Error::invalid(format!("roster of firm {f} lists applicant {i} not assigned to it")));
            }
            if !market.score(i, f).is_finite() {
                return Err(Error::invalid(format!("applicant {i} matched to firm {f} without applying")));
            }
        }
        on_roster += roster.len();
    }
    if on_roster != matching.matched_count() {
        return Err(Error::invalid("assignment and rosters disagree"));
    }
    Ok(())
}

/// Every blocking pair `(applicant, firm)`: the applicant prefers the firm to
/// its match and the firm either has a free seat or scores the applicant
/// strictly above its weakest admit.
pub fn verify_stability(market: &FiniteMarket, matching: &Matching) -> Result<Vec<(usize, usize)>> {
    check_matching(market, matching)?;
    let m = market.num_firms();
    // None marks a firm with a free seat
    let weakest: Vec<Option<f64>> = matching
        .rosters
        .iter()
        .enumerate()
        .map(|(f, roster)| {
            (roster.len() >= market.capacities[f])
                .then(|| roster.iter().map(|&i| market.score(i, f)).fold(f64::INFINITY, f64::min))
        })
        .collect();
    let mut blocking = Vec::new();
    for i in 0..market.num_applicants() {
        let current = matching.assignment[i].map_or(m as u32 + 1, |f| market.preferences.rank(i, f));
        for &f in market.preferences.ranking(i) {
            if market.preferences.rank(i, f) >= current {
                break;
            }
            let s = market.score(i, f);
            if !s.is_finite() || market.capacities[f] == 0 {
                continue;
            }
            if weakest[f].is_none_or(|w| s > w) {
                blocking.push((i, f));
            }
        }
    }
    Ok(blocking)
}

/// Applicant counts within one bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BinCount {
    pub applicants: usize,
    pub matched: usize,
    pub top_choice: usize,
}

impl BinCount {
    pub fn match_rate(&self) -> Option<f64> {
        (self.applicants > 0).then(|| self.matched as f64 / self.applicants as f64)
    }

    pub fn top_choice_rate(&self) -> Option<f64> {
        (self.applicants > 0).then(|| self.top_choice as f64 / self.applicants as f64)
    }
}

/// Outcome summary of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchMetrics {
    pub applicants: usize,
    pub matched: usize,
    pub match_rate: f64,
    /// Fraction of all applicants matched to their first choice.
    pub top_choice_rate: f64,
    /// Mean preference rank of the match among matched applicants.
    pub avg_rank_conditional_on_match: Option<f64>,
    /// Mean within-sample value percentile of matched applicants.
    pub avg_matched_value_percentile: Option<f64>,
    /// Equal-probability bins of the value law, lowest first.
    pub by_value_bin: Vec<BinCount>,
    /// Indexed by `k - 1`.
    pub by_k: Vec<BinCount>,
}

impl MatchMetrics {
    /// Matched applicants not at their first choice, as a fraction of all.
    pub fn matched_not_top_rate(&self) -> f64 {
        self.match_rate - self.top_choice_rate
    }

    pub fn match_rate_by_value_bin(&self) -> Vec<Option<f64>> {
        self.by_value_bin.iter().map(BinCount::match_rate).collect()
    }

    pub fn match_rate_by_k(&self) -> Vec<Option<f64>> {
        self.by_k.iter().map(BinCount::match_rate).collect()
    }
}

/// Within-sample percentile of each value: `(rank - 1/2) / n`, rank 1 the
/// lowest, ties broken by index.
pub fn value_percentiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut pct = vec![0.0; n];
    for (r, &i) in order.iter().enumerate() {
        pct[i] = (r as f64 + 0.5) / n as f64;
    }
    pct
}

/// Equal-probability bin of `v` under `dist`.
pub fn value_bin(dist: &Distribution, v: f64, bins: usize) -> usize {
    ((dist.cdf(v) * bins as f64).floor() as usize).min(bins - 1)
}

pub fn compute_metrics(market: &FiniteMarket, matching: &Matching) -> Result<MatchMetrics> {
    compute_metrics_with_bins(market, matching, DEFAULT_VALUE_BINS)
}

pub fn compute_metrics_with_bins(market: &FiniteMarket, matching: &Matching, value_bins: usize) -> Result<MatchMetrics> {
    check_matching(market, matching)?;
    if value_bins == 0 {
        return Err(Error::invalid("need at least one value bin"));
    }
    let n = market.num_applicants();
    let m = market.num_firms();
    let pct = value_percentiles(&market.values);
    let mut by_value_bin = vec![BinCount::default(); value_bins];
    let mut by_k = vec![BinCount::default(); m];
    let (mut matched, mut top, mut rank_sum, mut pct_sum) = (0usize, 0usize, 0u64, 0.0);
    for i in 0..n {
        let vb = &mut by_value_bin[value_bin(&market.value_dist, market.values[i], value_bins)];
        vb.applicants += 1;
        let kb = &mut by_k[market.applications(i).max(1) - 1];
        kb.applicants += 1;
        if let Some(f) = matching.assignment[i] {
            let rank = market.preferences.rank(i, f);
            matched += 1;
            rank_sum += u64::from(rank);
            pct_sum += pct[i];
            vb.matched += 1;
            kb.matched += 1;
            if rank == 1 {
                top += 1;
                vb.top_choice += 1;
                kb.top_choice += 1;
            }
        }
    }
    let nf = n as f64;
    Ok(MatchMetrics {
        applicants: n,
        matched,
        match_rate: matched as f64 / nf,
        top_choice_rate: top as f64 / nf,
        avg_rank_conditional_on_match: (matched > 0).then(|| rank_sum as f64 / matched as f64),
        avg_matched_value_percentile: (matched > 0).then(|| pct_sum / matched as f64),
        by_value_bin,
        by_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::access::AccessDistribution;
    use crate::rng;

    fn uniform_spec(mode: Mode, m: usize) -> MarketSpec {
        MarketSpec::new(
            m,
            0.5,
            Distribution::uniform(0.0, 1.0).unwrap(),
            Distribution::uniform(-0.5, 0.5).unwrap(),
            mode,
            None,
        )
        .unwrap()
    }

    fn single_firm(scores: &[f64], cap: usize) -> FiniteMarket {
        let n = scores.len();
        FiniteMarket::from_parts(
            Mode::Mono,
            Distribution::uniform(0.0, 1.0).unwrap(),
            scores.to_vec(),
            PreferenceProfile::from_rankings(vec![vec![0]; n], 1).unwrap(),
            vec![cap],
            scores.iter().map(|&s| vec![s]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn higher_score_wins_single_seat() {
        let market = single_firm(&[0.9, 0.3], 1);
        let mu = deferred_acceptance(&market);
        assert_eq!(mu.assignment, vec![Some(0), None]);
        let market = single_firm(&[0.3, 0.9], 1);
        assert_eq!(deferred_acceptance(&market).assignment, vec![None, Some(0)]);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let market = single_firm(&[0.5, 0.5, 0.5], 2);
        assert_eq!(deferred_acceptance(&market).assignment, vec![Some(0), Some(0), None]);
    }

    #[test]
    fn capacity_split() {
        assert_eq!(split_capacity(500, 25).unwrap(), vec![20; 25]);
        assert_eq!(split_capacity(7, 3).unwrap(), vec![3, 2, 2]);
        assert!(split_capacity(2, 3).is_err());
    }

    #[test]
    fn mono_rows_are_broadcast() {
        let market = generate_market(&uniform_spec(Mode::Mono, 4), 200, &PreferenceModel::uniform(), None, &mut rng::stream(2)).unwrap();
        for i in 0..200 {
            let row = market.score_row(i);
            assert!(row.iter().all(|&s| s == row[0]));
            assert!((row[0] - market.values[i]).abs() <= 0.5);
        }
        assert_eq!(market.total_capacity(), 100);
    }

    #[test]
    fn rejects_too_few_applicants() {
        let spec = uniform_spec(Mode::Mono, 2).with_firms(2);
        let spec = MarketSpec { capacity: 0.99, ..spec };
        assert!(generate_market(&spec, 10, &PreferenceModel::uniform(), None, &mut rng::stream(0)).is_err());
    }

    #[test]
    fn top_one_applies_to_first_choice() {
        let spec = MarketSpec {
            access: Some(AccessDistribution::point_mass(1).unwrap()),
            ..uniform_spec(Mode::Poly, 5)
        };
        let market = generate_market(&spec, 300, &PreferenceModel::uniform(), Some(Strategy::TopK), &mut rng::stream(4)).unwrap();
        for i in 0..300 {
            let finite: Vec<usize> = (0..5).filter(|&f| market.score(i, f).is_finite()).collect();
            assert_eq!(finite, vec![market.preferences.ranking(i)[0]]);
            assert_eq!(market.applications(i), 1);
        }
    }

    #[test]
    fn da_fills_capacity_and_is_stable() {
        for mode in Mode::ALL {
            let market = generate_market(&uniform_spec(mode, 10), 1000, &PreferenceModel::uniform(), None, &mut rng::stream(8)).unwrap();
            let mu = deferred_acceptance(&market);
            assert_eq!(mu.matched_count(), 500);
            assert!(mu.rosters.iter().zip(&market.capacities).all(|(r, &c)| r.len() == c));
            assert!(verify_stability(&market, &mu).unwrap().is_empty());
            let metrics = compute_metrics(&market, &mu).unwrap();
            assert_eq!(metrics.match_rate, 0.5);
        }
    }

    #[test]
    fn empty_matching_is_blocked() {
        let market = generate_market(&uniform_spec(Mode::Poly, 3), 30, &PreferenceModel::uniform(), None, &mut rng::stream(1)).unwrap();
        let empty = Matching::empty(30, 3);
        assert!(!verify_stability(&market, &empty).unwrap().is_empty());
    }

    #[test]
    fn inconsistent_matchings_are_rejected() {
        let market = single_firm(&[0.9, 0.3], 1);
        assert!(verify_stability(&market, &Matching::empty(3, 1)).is_err());
        let over = Matching::from_assignment(vec![Some(0), Some(0)], 1).unwrap();
        assert!(verify_stability(&market, &over).is_err());
        let torn = Matching {
            assignment: vec![Some(0), None],
            rosters: vec![vec![1]],
        };
        assert!(compute_metrics(&market, &torn).is_err());
    }

    #[test]
    fn perfect_information_percentile() {
        let spec = MarketSpec {
            noise_dist: Distribution::point_mass(0.0).unwrap(),
            ..uniform_spec(Mode::Poly, 10)
        };
        let market = generate_market(&spec, 1000, &PreferenceModel::uniform(), None, &mut rng::stream(3)).unwrap();
        let metrics = compute_metrics(&market, &deferred_acceptance(&market)).unwrap();
        assert!((metrics.avg_matched_value_percentile.unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn all_top_choice_metrics() {
        // three applicants with distinct first choices, one seat each
        let prefs = PreferenceProfile::from_rankings(vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]], 3).unwrap();
        let market = FiniteMarket::from_parts(
            Mode::Mono,
            Distribution::uniform(0.0, 1.0).unwrap(),
            vec![0.2, 0.5, 0.8],
            prefs,
            vec![1, 1, 1],
            vec![vec![0.2; 3], vec![0.5; 3], vec![0.8; 3]],
        )
        .unwrap();
        let metrics = compute_metrics(&market, &deferred_acceptance(&market)).unwrap();
        assert_eq!(metrics.top_choice_rate, 1.0);
        assert_eq!(metrics.avg_rank_conditional_on_match, Some(1.0));
        assert_eq!(metrics.by_k[2].applicants, 3);
        assert_eq!(metrics.by_value_bin.iter().map(|b| b.applicants).sum::<usize>(), 3);
    }

    #[test]
    fn percentiles_of_sample() {
        assert_eq!(value_percentiles(&[0.3, 0.1, 0.2]), vec![5.0 / 6.0, 1.0 / 6.0, 0.5]);
    }
}
