use matchlab::Distribution;
use proptest::prelude::*;

fn any_dist() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (-5.0..5.0f64, 0.01..5.0f64).prop_map(|(lo, w)| Distribution::uniform(lo, lo + w).unwrap()),
        (-5.0..5.0f64, 0.01..4.0f64).prop_map(|(m, v)| Distribution::gaussian(m, v).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdf_is_monotone(d in any_dist()) {
        let (lo, hi) = d.effective_support();
        let (a, b) = (lo - 1.0, hi + 1.0);
        let mut prev = -1.0;
        for i in 0..=1000 {
            let x = a + (b - a) * i as f64 / 1000.0;
            let c = d.cdf(x);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!(c >= prev);
            // strictly increasing inside the bulk of the support
            if x > lo && x < hi && d.pdf(x) > 1e-12 && prev > 0.0 && prev < 1.0 {
                prop_assert!(c > prev || d.pdf(x) * (b - a) / 1000.0 < 1e-15);
            }
            prev = c;
        }
    }

    #[test]
    fn quantile_round_trips(d in any_dist(), p in 1e-6..(1.0 - 1e-6)) {
        let x = d.quantile(p).unwrap();
        prop_assert!((d.cdf(x) - p).abs() < 1e-9, "cdf(quantile({p})) = {}", d.cdf(x));
        let (lo, hi) = d.effective_support();
        let y = lo + (hi - lo) * p;
        let c = d.cdf(y);
        if c > 1e-9 && c < 1.0 - 1e-9 {
            prop_assert!((d.quantile(c).unwrap() - y).abs() < 1e-6 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn max_of_one_is_the_law(d in any_dist(), t in 0.0..1.0f64) {
        let (lo, hi) = d.effective_support();
        let x = lo + (hi - lo) * t;
        prop_assert_eq!(d.max_order_cdf(1, x).unwrap(), d.cdf(x));
    }

    #[test]
    fn max_order_cdf_is_power(d in any_dist(), n in 1u64..200, t in 0.0..1.0f64) {
        let (lo, hi) = d.effective_support();
        let x = lo + (hi - lo) * t;
        let expect = d.cdf(x).powi(n as i32);
        prop_assert!((d.max_order_cdf(n, x).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn pr_max_exceeds_decreases_in_delta(d in any_dist(), n in 1u64..50, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let sd = d.std_dev();
        let (d1, d2) = if a < b { (a * sd, b * sd) } else { (b * sd, a * sd) };
        let p1 = d.pr_max_exceeds(n, d1).unwrap();
        let p2 = d.pr_max_exceeds(n, d2).unwrap();
        prop_assert!(p2 <= p1 + 1e-9, "{p1} then {p2}");
        prop_assert!((0.0..=1.0 + 1e-9).contains(&p1));
    }
}

#[test]
fn uniform_max_variance_closed_form() {
    let u = Distribution::uniform(0.0, 1.0).unwrap();
    for n in 1..=100u64 {
        let s = u.max_order_summary(n).unwrap();
        let nf = n as f64;
        assert!((s.variance * (nf + 1.0).powi(2) * (nf + 2.0) / nf - 1.0).abs() < 1e-12, "n = {n}");
        assert!((s.mean - nf / (nf + 1.0)).abs() < 1e-14);
    }
}

#[test]
fn concentration_vanishes() {
    let u = Distribution::uniform(0.0, 1.0).unwrap();
    let curve = u.concentration_curve(0.05, &[1, 10, 100, 1000]).unwrap();
    let (first, last) = (curve[0].1, curve.last().unwrap().1);
    assert!(last < first && last < 0.01, "{curve:?}");
    let g = Distribution::gaussian(0.0, 1.0).unwrap();
    let curve = g.concentration_curve(0.5, &[10, 100, 1000, 10_000]).unwrap();
    assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1), "{curve:?}");
    assert!(curve.last().unwrap().1 < curve[0].1);
}

#[test]
fn pr_max_exceeds_shrinks_along_n() {
    for d in [Distribution::uniform(-0.5, 0.5).unwrap(), Distribution::gaussian(0.0, 0.25).unwrap()] {
        let delta = 0.3 * d.std_dev();
        let ps: Vec<f64> = [1, 5, 25, 125].iter().map(|&n| d.pr_max_exceeds(n, delta).unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[1] <= w[0] + 0.005), "{d}: {ps:?}");
    }
    let u = Distribution::uniform(-0.5, 0.5).unwrap();
    assert!((u.pr_max_exceeds(1, 0.29289).unwrap() - 0.25).abs() < 1e-3);
    assert!(u.pr_max_exceeds(25, 0.29289).unwrap() < 0.01);
}

#[test]
fn uniform_max_mean_agrees_with_simulation() {
    use rand::Rng;
    let u = Distribution::uniform(0.0, 1.0).unwrap();
    let mut rng = matchlab::rng::stream(17);
    let draws = 1_000_000;
    let total: f64 = (0..draws).map(|_| rng.random::<f64>().max(rng.random::<f64>())).sum();
    let mc = total / draws as f64;
    // sd of the max of two uniforms is sqrt(1/18)
    assert!((mc - 2.0 / 3.0).abs() < 4.0 * (1.0 / 18.0f64).sqrt() / (draws as f64).sqrt(), "{mc}");
    assert!((u.max_order_summary(2).unwrap().mean - mc).abs() < 1e-3);
    // E X = integral of 1 - F(x)^n over [0,1], midpoint rule
    for n in [2u64, 7, 30] {
        let steps = 20_000;
        let integral: f64 = (0..steps)
            .map(|j| 1.0 - u.max_order_cdf(n, (j as f64 + 0.5) / steps as f64).unwrap())
            .sum::<f64>()
            / steps as f64;
        assert!((u.max_order_summary(n).unwrap().mean - integral).abs() < 1e-6, "n = {n}");
    }
}
