use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varcast::evaluation::{
    backtest, chi2_1_critical, christoffersen_independence, count_breaches, error_measures_from, kupiec_pof,
    traffic_light, MapeDenominator, Zone,
};
use varcast::market_data::ReturnSeries;
use varcast::risk::RiskForecast;
use varcast::Error;

fn dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2001, 1, 2).unwrap();
    (0..n as u64).map(|i| start + Days::new(i)).collect()
}

fn forecasts(var: &[f64]) -> Vec<RiskForecast> {
    dates(var.len())
        .into_iter()
        .zip(var)
        .map(|(date, v)| RiskForecast {
            date,
            model_id: "m".into(),
            horizon_days: 10,
            confidence: 0.99,
            var_fraction: *v,
            stressed: false,
        })
        .collect()
}

/// Kupiec statistic written out directly.
fn kupiec_reference(x: usize, n: usize, p: f64) -> f64 {
    let (x, n) = (x as f64, n as f64);
    let term = |k: f64, q: f64| if k == 0.0 { 0.0 } else { k * q.ln() };
    let phat = x / n;
    -2.0 * ((term(n - x, 1.0 - p) + term(x, p)) - (term(n - x, 1.0 - phat) + term(x, phat)))
}

#[test]
fn kupiec_region_for_the_full_span() {
    // Exact LR against chi-square(1); a normal approximation to the breach
    // count would give the slightly wider [50.98, 94.74].
    let region: Vec<usize> = (0..=200).filter(|x| !kupiec_pof(*x, 7286, 0.01, 0.01).reject).collect();
    assert_eq!(region, (53..=95).collect::<Vec<_>>());
    assert!(kupiec_reference(52, 7286, 0.01) > chi2_1_critical(0.01));
    assert!(kupiec_reference(53, 7286, 0.01) < chi2_1_critical(0.01));
    assert!(kupiec_reference(95, 7286, 0.01) < chi2_1_critical(0.01));
    assert!(kupiec_reference(96, 7286, 0.01) > chi2_1_critical(0.01));
    assert!(kupiec_pof(3, 7286, 0.01, 0.01).reject);
    assert!((chi2_1_critical(0.01) - 6.634_896_601).abs() < 1e-8);
}

#[test]
fn kupiec_matches_formula() {
    for (x, n) in [(0, 250), (3, 250), (21, 7286), (73, 7286), (150, 7286), (250, 250)] {
        let t = kupiec_pof(x, n, 0.01, 0.01);
        assert!((t.statistic - kupiec_reference(x, n, 0.01)).abs() < 1e-9, "x={x} n={n}");
        assert!((0.0..=1.0).contains(&t.p_value));
    }
}

#[test]
fn basel_zones_at_250_days() {
    let zones: Vec<Zone> = (0..=12).map(|x| traffic_light(x, 250, 0.01)).collect();
    for (x, z) in zones.iter().enumerate() {
        let want = match x {
            0..=4 => Zone::Green,
            5..=9 => Zone::Yellow,
            _ => Zone::Red,
        };
        assert_eq!(*z, want, "{x} breaches");
    }
    assert_eq!(traffic_light(21, 7286, 0.01), Zone::Green);
    assert_eq!(traffic_light(0, 0, 0.01), Zone::Green);
}

#[test]
fn breach_is_a_strict_exceedance() {
    let f = forecasts(&[0.05, 0.05, 0.05, 0.05]);
    let r = ReturnSeries::new("r", dates(4), vec![-0.05, -0.0500001, 0.2, -0.3]).unwrap();
    let b = count_breaches(&f, &r).unwrap();
    assert_eq!(b.n_breaches(), 2);
    assert_eq!(b.breach_dates(), vec![dates(4)[1], dates(4)[3]]);
}

#[test]
fn forecasts_must_line_up_with_returns() {
    let mut f = forecasts(&[0.05, 0.05]);
    let r = ReturnSeries::new("r", dates(1), vec![0.0]).unwrap();
    assert!(matches!(count_breaches(&f, &r), Err(Error::Input(_))));
    f.swap(0, 1);
    let r = ReturnSeries::new("r", dates(2), vec![0.0, 0.0]).unwrap();
    assert!(matches!(count_breaches(&f, &r), Err(Error::Input(_))));
    assert!(matches!(
        backtest(&[], &r, 0.01, MapeDenominator::Forecast),
        Err(Error::Input(_))
    ));
}

#[test]
fn independence_matches_hand_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(50..600);
        let p = rng.random_range(0.01..0.2);
        let ind: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
        let var: Vec<f64> = vec![0.05; n];
        let ret: Vec<f64> = ind.iter().map(|b| if *b { -0.1 } else { 0.0 }).collect();
        let series = count_breaches(&forecasts(&var), &ReturnSeries::new("r", dates(n), ret).unwrap()).unwrap();
        let t = christoffersen_independence(&series, 0.01);

        let mut c = [0.0f64; 4];
        for w in ind.windows(2) {
            c[2 * w[0] as usize + w[1] as usize] += 1.0;
        }
        assert_eq!(t.transitions.map(|v| v as f64), c);
        let [n00, n01, n10, n11] = c;
        if n01 + n11 == 0.0 || n10 + n11 == 0.0 {
            assert!(!t.defined && !t.test.reject);
            continue;
        }
        let l = |k: f64, q: f64| if k == 0.0 { 0.0 } else { k * q.ln() };
        let (p0, p1, pa) = (n01 / (n00 + n01), n11 / (n10 + n11), (n01 + n11) / (n - 1) as f64);
        let lr = -2.0
            * (l(n00 + n10, 1.0 - pa) + l(n01 + n11, pa)
                - l(n00, 1.0 - p0)
                - l(n01, p0)
                - l(n10, 1.0 - p1)
                - l(n11, p1));
        assert!((t.test.statistic - lr.max(0.0)).abs() < 1e-9);
    }
}

#[test]
fn clustered_breaches_reject_independence() {
    let run = |n: usize, hits: &[usize]| {
        let mut ret = vec![0.0; n];
        for i in hits {
            ret[*i] = -0.1;
        }
        let s = count_breaches(
            &forecasts(&vec![0.05; n]),
            &ReturnSeries::new("r", dates(n), ret).unwrap(),
        )
        .unwrap();
        christoffersen_independence(&s, 0.01)
    };
    let hits: Vec<usize> = (400..410).collect();
    assert!(run(1000, &hits).test.reject);
    let sparse = run(7286, &[1650, 1860, 4400]);
    assert!(sparse.defined && !sparse.test.reject);
    let none = run(7286, &[]);
    assert!(!none.defined && !none.test.reject);
}

#[test]
fn error_measures_by_hand() {
    // q = -VaR: errors r - q are 0.01, -0.02, 0.04.
    let var = [0.02, 0.03, 0.01];
    let ret = [-0.01, -0.05, 0.03];
    let m = error_measures_from(&var, &ret, MapeDenominator::Forecast).unwrap();
    assert!((m.mae - 0.07 / 3.0).abs() < 1e-15);
    assert!((m.rmse - (0.0021f64 / 3.0).sqrt()).abs() < 1e-15);
    let mape = 100.0 * (0.01 / 0.02 + 0.02 / 0.03 + 0.04 / 0.01) / 3.0;
    assert!((m.mape.unwrap() - mape).abs() < 1e-10);
    let smape = 100.0 * (2.0 * 0.01 / 0.03 + 2.0 * 0.02 / 0.08 + 2.0 * 0.04 / 0.04) / 3.0;
    assert!((m.smape - smape).abs() < 1e-10);

    let a = error_measures_from(&var, &ret, MapeDenominator::Actual).unwrap();
    let mape = 100.0 * (0.01 / 0.01 + 0.02 / 0.05 + 0.04 / 0.03) / 3.0;
    assert!((a.mape.unwrap() - mape).abs() < 1e-10);

    let undefined = error_measures_from(&[0.02, 0.02], &[0.0, -0.01], MapeDenominator::Actual).unwrap();
    assert_eq!(undefined.mape, None);
    assert_eq!(undefined.mape_or_smape(), undefined.smape);
    assert!(error_measures_from(&[0.02], &[0.0, 0.0], MapeDenominator::Forecast).is_err());
}

#[test]
fn backtest_assembles_everything() {
    let n = 250;
    let mut ret = vec![0.001; n];
    for i in [10, 50, 90, 130, 170, 210] {
        ret[i] = -0.08;
    }
    let f = forecasts(&vec![0.05; n]);
    let r = ReturnSeries::new("r", dates(n), ret).unwrap();
    let rep = backtest(&f, &r, 0.01, MapeDenominator::Forecast).unwrap();
    assert_eq!(rep.n_days, n);
    assert_eq!(rep.n_breaches, 6);
    assert_eq!(rep.zone, Zone::Yellow);
    assert_eq!(rep.model_id, "m");
    assert!(!rep.stressed);
    assert!((rep.kupiec.statistic - kupiec_reference(6, n, 0.01)).abs() < 1e-9);
}

proptest! {
    #[test]
    fn rmse_bounds_mae(pairs in prop::collection::vec((0.001f64..0.3, -0.2f64..0.2), 1..300)) {
        let (v, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = error_measures_from(&v, &r, MapeDenominator::Forecast).unwrap();
        prop_assert!(m.rmse >= m.mae - 1e-15);
        prop_assert!(m.smape <= 200.0 + 1e-9);
    }

    #[test]
    fn zones_never_improve_with_more_breaches(n in 20usize..8000, x in 0usize..200) {
        prop_assert!(traffic_light(x, n, 0.01) <= traffic_light(x + 1, n, 0.01));
    }

    #[test]
    fn kupiec_grows_away_from_the_expected_count(n in 100usize..8000, x in 0usize..300) {
        let expected = 0.01 * n as f64;
        let s = |k: usize| kupiec_pof(k, n, 0.01, 0.01).statistic;
        if x as f64 >= expected {
            prop_assert!(s(x + 1) >= s(x) - 1e-9);
        }
        if (x as f64) + 1.0 <= expected {
            prop_assert!(s(x) >= s(x + 1) - 1e-9);
        }
    }
}
