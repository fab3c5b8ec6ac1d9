use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varcast::distributions::{InnovationDist, InnovationKind};
use varcast::market_data::{log_returns, PanelManifest};
use varcast::volatility::{
    fit, fit_from, forecast_variance, loglik, random_feasible, simulate, FitOptions, MeanModel, ShapeEstimation,
    VolKind, VolModelSpec, VolParams,
};
use varcast::Error;

fn spx_returns() -> varcast::market_data::ReturnSeries {
    let m = PanelManifest::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/panel.toml")).unwrap();
    log_returns(&m.load_target().unwrap()).unwrap()
}

/// Straightforward re-statement of the variance recursions.
fn reference_loglik(kind: VolKind, p: &VolParams, d: &InnovationDist, eps: &[f64]) -> f64 {
    let mut s2 = eps.iter().map(|e| e * e).sum::<f64>() / eps.len() as f64;
    let e_abs = d.expected_abs();
    let mut ll = 0.0;
    for (t, e) in eps.iter().enumerate() {
        let z = e / s2.sqrt();
        ll += d.log_density(z) - 0.5 * s2.ln();
        if t + 1 == eps.len() {
            break;
        }
        s2 = match kind {
            VolKind::Arch1 => p.omega + p.alpha * e * e,
            VolKind::Garch11 => p.omega + p.alpha * e * e + p.beta * s2,
            VolKind::Egarch11 => (p.omega + p.beta * s2.ln() + p.alpha * (z.abs() - e_abs) + p.gamma * z).exp(),
            VolKind::RiskMetrics => 0.94 * s2 + 0.06 * e * e,
        };
    }
    ll
}

#[test]
fn likelihood_matches_reference_recursion() {
    let r = spx_returns();
    let eps = &r.values()[2000..3264];
    let cases = [
        (
            VolKind::Arch1,
            VolParams {
                omega: 8e-5,
                alpha: 0.2,
                ..Default::default()
            },
        ),
        (
            VolKind::Garch11,
            VolParams {
                omega: 2e-6,
                alpha: 0.07,
                beta: 0.91,
                gamma: 0.0,
            },
        ),
        (
            VolKind::Egarch11,
            VolParams {
                omega: -0.3,
                alpha: 0.12,
                beta: 0.965,
                gamma: -0.08,
            },
        ),
        (VolKind::RiskMetrics, VolParams::default()),
    ];
    let dists = [InnovationDist::Normal, InnovationDist::skewed_t(7.0, 0.9).unwrap()];
    for (kind, p) in cases {
        for d in dists {
            let (ll, state) = loglik(kind, &p, &d, eps);
            let reference = reference_loglik(kind, &p, &d, eps);
            assert!(
                (ll - reference).abs() < 1e-8 * reference.abs(),
                "{kind:?} {d:?}: {ll} vs {reference}"
            );
            assert_eq!(state.eps, *eps.last().unwrap());
        }
    }
}

#[test]
fn garch_simulate_and_refit() {
    let truth = VolParams {
        omega: 2e-6,
        alpha: 0.08,
        beta: 0.9,
        gamma: 0.0,
    };
    let spec = VolModelSpec::new(VolKind::Garch11, InnovationKind::Normal);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut within = 0;
    for _ in 0..10 {
        let x = simulate(VolKind::Garch11, &truth, 5000, 500, &mut rng);
        let m = fit(spec, &x, &FitOptions::default()).unwrap();
        let se = m.standard_errors(&x).unwrap();
        let est = [m.params.omega, m.params.alpha, m.params.beta];
        let tru = [truth.omega, truth.alpha, truth.beta];
        if est.iter().zip(tru).zip(&se).all(|((e, t), s)| (e - t).abs() <= 3.0 * s) {
            within += 1;
        }
    }
    assert!(within >= 8, "{within} of 10 within 3 standard errors");
}

#[test]
fn egarch_simulate_and_refit() {
    let truth = VolParams {
        omega: -0.35,
        alpha: 0.15,
        beta: 0.96,
        gamma: -0.08,
    };
    let spec = VolModelSpec::new(VolKind::Egarch11, InnovationKind::Normal);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = simulate(VolKind::Egarch11, &truth, 8000, 500, &mut rng);
    let m = fit(spec, &x, &FitOptions::default()).unwrap();
    let se = m.standard_errors(&x).unwrap();
    let est = [m.params.omega, m.params.alpha, m.params.beta, m.params.gamma];
    let tru = [truth.omega, truth.alpha, truth.beta, truth.gamma];
    for ((e, t), s) in est.iter().zip(tru).zip(&se) {
        assert!((e - t).abs() <= 4.0 * s, "estimate {e} vs {t} (se {s})");
    }
}

#[test]
fn fit_dominates_random_feasible_points() {
    let r = spx_returns();
    let window = &r.values()[4000..5264];
    let m2 = window.iter().map(|x| x * x).sum::<f64>() / window.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in [VolKind::Arch1, VolKind::Garch11, VolKind::Egarch11] {
        for innovation in [InnovationKind::Normal, InnovationKind::SkewedT] {
            let spec = VolModelSpec::new(kind, innovation);
            let m = fit(spec, window, &FitOptions::default()).unwrap();
            for _ in 0..50 {
                let (p, d) = random_feasible(spec, m2, &mut rng);
                assert!(m.loglik >= loglik(kind, &p, &d, window).0, "{}", spec.tag());
            }
        }
    }
}

#[test]
fn warm_starts_reach_the_cold_optimum() {
    let r = spx_returns();
    let v = r.values();
    let start = r.position(NaiveDate::from_ymd_opt(2008, 9, 2).unwrap()).unwrap();
    for kind in [VolKind::Arch1, VolKind::Garch11, VolKind::Egarch11] {
        for innovation in [InnovationKind::Normal, InnovationKind::SkewedT] {
            let spec = VolModelSpec::new(kind, innovation);
            let mut prev = None;
            for i in start..start + 15 {
                let window = &v[i - 1264..i];
                let warm = fit_from(spec, window, &FitOptions::default(), prev.as_ref()).unwrap();
                let cold = fit(spec, window, &FitOptions::default()).unwrap();
                assert!(
                    warm.loglik >= cold.loglik - 1e-3,
                    "{} day {i}: {} vs {}",
                    spec.tag(),
                    warm.loglik,
                    cold.loglik
                );
                prev = Some(warm);
            }
        }
    }
}

#[test]
fn warm_chain_through_mid_1994_stays_bounded() {
    // A near-unit-root EGARCH stretch where a stale warm start once sat on an
    // explosive filter.
    let r = spx_returns();
    let v = r.values();
    let from = r.position(NaiveDate::from_ymd_opt(1994, 7, 1).unwrap()).unwrap();
    let to = r.position(NaiveDate::from_ymd_opt(1994, 8, 5).unwrap()).unwrap();
    let spec = VolModelSpec::new(VolKind::Egarch11, InnovationKind::Normal);
    let mut prev = None;
    for i in from..=to {
        let window = &v[i - 1264..i];
        let m2 = window.iter().map(|x| x * x).sum::<f64>() / window.len() as f64;
        let m = fit_from(spec, window, &FitOptions::default(), prev.as_ref()).unwrap();
        let s2 = forecast_variance(&m);
        assert!(
            s2 > m2 / 100.0 && s2 < 100.0 * m2,
            "{}: variance forecast {s2}",
            r.dates()[i]
        );
        assert!(m.loglik > 4000.0);
        prev = Some(m);
    }
}

#[test]
fn riskmetrics_fits_only_the_shape() {
    let r = spx_returns();
    let window = &r.values()[6000..7264];
    let normal = fit(
        VolModelSpec::new(VolKind::RiskMetrics, InnovationKind::Normal),
        window,
        &FitOptions::default(),
    )
    .unwrap();
    assert_eq!(normal.lambda, Some(0.94));
    assert_eq!(normal.params, VolParams::default());
    let reference = reference_loglik(
        VolKind::RiskMetrics,
        &VolParams::default(),
        &InnovationDist::Normal,
        window,
    );
    assert!((normal.loglik - reference).abs() < 1e-8);

    let skew = fit(
        VolModelSpec::new(VolKind::RiskMetrics, InnovationKind::SkewedT),
        window,
        &FitOptions::default(),
    )
    .unwrap();
    assert_eq!(skew.params, VolParams::default());
    assert!(skew.loglik > normal.loglik);
    // Same variance path, so the same one-day variance forecast.
    assert_eq!(forecast_variance(&skew), forecast_variance(&normal));
    match skew.dist {
        InnovationDist::SkewedT { nu, xi } => assert!(nu > 2.1 && nu <= 100.0 && (0.2..=5.0).contains(&xi)),
        other => panic!("expected a skewed t, got {other:?}"),
    }
}

#[test]
fn options_are_honoured() {
    let r = spx_returns();
    let window = &r.values()[3000..4264];
    let spec = VolModelSpec::new(VolKind::Garch11, InnovationKind::SkewedT);
    let fixed = FitOptions {
        shape: ShapeEstimation::Fixed { nu: 6.0, xi: 0.9 },
        mean: MeanModel::SampleMean,
        ..FitOptions::default()
    };
    let m = fit(spec, window, &fixed).unwrap();
    assert_eq!(m.dist, InnovationDist::skewed_t(6.0, 0.9).unwrap());
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    assert!((m.mean - mean).abs() < 1e-18);

    let capped = FitOptions {
        max_evaluations: 5,
        restarts: 0,
        ..FitOptions::default()
    };
    match fit(spec, window, &capped) {
        Err(Error::Calibration {
            evaluations,
            best_params,
            ..
        }) => {
            assert!(evaluations <= 5 + 2 * best_params.len() + 2);
            assert!(!best_params.is_empty());
        }
        other => panic!("expected a calibration failure, got {other:?}"),
    }

    let a = fit(
        spec,
        window,
        &FitOptions {
            seed: 9,
            ..FitOptions::default()
        },
    )
    .unwrap();
    let b = fit(
        spec,
        window,
        &FitOptions {
            seed: 9,
            ..FitOptions::default()
        },
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_windows() {
    let spec = VolModelSpec::new(VolKind::Garch11, InnovationKind::Normal);
    assert!(matches!(
        fit(spec, &[0.01; 100], &FitOptions::default()),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        fit(spec, &[0.01; 400], &FitOptions::default()),
        Err(Error::Domain(_))
    ));
    let mut w = vec![0.01; 400];
    w[10] = f64::NAN;
    assert!(matches!(fit(spec, &w, &FitOptions::default()), Err(Error::Domain(_))));
}
