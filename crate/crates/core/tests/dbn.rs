use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use varcast::dbn::*;
use varcast::market_data::{align_to_target, PriceSeries, Units};
use varcast::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn names(v: usize) -> Vec<String> {
    (0..v).map(|i| format!("v{i}")).collect()
}

/// Dataset from per-variable daily series: rows pair day i with day i + 1.
fn from_series(series: &[Vec<f64>], target: usize) -> TwoSliceDataset {
    let mut cols: Vec<Vec<f64>> = series.iter().map(|s| s[..s.len() - 1].to_vec()).collect();
    cols.extend(series.iter().map(|s| s[1..].to_vec()));
    TwoSliceDataset::from_columns(names(series.len()), target, cols)
}

/// Dataset whose lagged and current columns are given directly.
fn from_pairs(lagged: Vec<Vec<f64>>, current: Vec<Vec<f64>>, target: usize) -> TwoSliceDataset {
    let v = lagged.len();
    let mut cols = lagged;
    cols.extend(current);
    TwoSliceDataset::from_columns(names(v), target, cols)
}

fn noise_panel(v: usize, days: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..v).map(|_| (0..days).map(|_| normal(&mut r)).collect()).collect()
}

fn ar1(days: usize, coef: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut x = vec![0.0; days];
    for t in 1..days {
        x[t] = coef * x[t - 1] + normal(&mut r);
    }
    x
}

fn tiny_panel(days: usize) -> varcast::market_data::VariablePanel {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let dates: Vec<NaiveDate> = (0..days as i64).map(|i| start + chrono::Days::new(i as u64)).collect();
    let a = PriceSeries::new(
        "spx",
        Units::Level,
        dates.clone(),
        (0..days).map(|i| 100.0 + i as f64).collect(),
    )
    .unwrap();
    let b = PriceSeries::new(
        "oil",
        Units::Level,
        dates,
        (0..days).map(|i| 50.0 - i as f64 * 0.5).collect(),
    )
    .unwrap();
    align_to_target(&[a, b], "spx").unwrap()
}

#[test]
fn slices_count_day_pairs() {
    let panel = tiny_panel(10);
    let d = panel.dates().to_vec();
    let ds = build_slices(&panel, d[2], d[6]).unwrap();
    assert_eq!(ds.n_rows(), 4);
    assert_eq!(ds.n_nodes(), 4);
    assert_eq!(ds.column(0), &panel.column_at(0)[2..6]);
    assert_eq!(ds.column(2), &panel.column_at(0)[3..7]);
    assert!(matches!(build_slices(&panel, d[3], d[3]), Err(Error::Domain(_))));
}

#[test]
fn full_window_shape() {
    let series = noise_panel(42, 1264, 1);
    let ds = from_series(&series, 0);
    assert_eq!(ds.n_rows(), 1263);
    assert_eq!(ds.n_nodes(), 84);
}

#[test]
fn ci_test_detects_copy() {
    let x = noise_panel(1, 500, 2).remove(0);
    let other = noise_panel(2, 500, 3);
    let ds = from_pairs(vec![x.clone(), x], other, 0);
    assert!(ci_test(&ds, 0, 1, &[]).unwrap() < 1e-12);
}

#[test]
fn ci_test_size_is_nominal() {
    let mut r = rng(4);
    let trials = 1000;
    let mut rejections = 0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..5000).map(|_| normal(&mut r)).collect();
        let y: Vec<f64> = (0..5000).map(|_| normal(&mut r)).collect();
        let ds = from_pairs(vec![x, y], vec![vec![0.0; 5000], vec![0.0; 5000]], 0);
        let p = ci_test(&ds, 0, 1, &[]).unwrap();
        assert!((0.0..=1.0).contains(&p));
        if p < 0.05 {
            rejections += 1;
        }
    }
    // Binomial(1000, 0.05) sd is about 6.9.
    let rate = rejections as f64 / trials as f64;
    assert!((0.03..=0.07).contains(&rate), "rejection rate {rate}");
}

#[test]
fn ci_test_on_chain() {
    let mut r = rng(5);
    let n = 5000;
    let x: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let z: Vec<f64> = x.iter().map(|x| 0.8 * x + normal(&mut r)).collect();
    let y: Vec<f64> = z.iter().map(|z| 0.8 * z + normal(&mut r)).collect();
    let ds = from_pairs(vec![x, z, y], vec![vec![0.0; n]; 3], 0);
    assert!(ci_test(&ds, 0, 2, &[]).unwrap() < 1e-6);
    assert!(ci_test(&ds, 0, 2, &[1]).unwrap() > 0.01);
}

#[test]
fn ci_test_flags_collinear_conditioning() {
    let mut r = rng(6);
    let n = 200;
    let a: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let b: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
    let c: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let ds = from_pairs(vec![a, b, c], vec![vec![0.0; n]; 3], 0);
    assert!(matches!(ci_test(&ds, 2, 0, &[1]), Err(Error::Numerical(_))));
}

#[test]
fn learners_find_autoregressive_edge() {
    let mut series = noise_panel(3, 5001, 7);
    series[0] = ar1(5001, 0.9, 8);
    let ds = from_series(&series, 0);
    for algo in Algorithm::ALL {
        let s = learn_structure(&ds, algo, &LearnerSettings::default()).unwrap();
        assert!(s.has_edge(0, 3), "{algo} missed the lag edge:\n{}", s.to_edge_list());
    }
}

#[test]
fn learners_control_false_edges_on_noise() {
    let v = 5;
    let tested = v * v + v * (v - 1) / 2;
    for algo in Algorithm::ALL {
        let mut total = 0;
        for seed in 0..5 {
            let ds = from_series(&noise_panel(v, 5001, 100 + seed), 0);
            total += learn_structure(&ds, algo, &LearnerSettings::default())
                .unwrap()
                .n_edges();
        }
        let rate = total as f64 / (5 * tested) as f64;
        assert!(rate <= 0.05, "{algo}: false edge rate {rate}");
    }
}

#[test]
fn learners_respect_time_and_are_deterministic() {
    // Correlated random walks with cross effects.
    let mut r = rng(9);
    let v = 5;
    let days = 800;
    let mut series = vec![vec![0.0; days]; v];
    for t in 1..days {
        let common = normal(&mut r);
        for i in 0..v {
            let spill = if i > 0 { 0.3 * series[i - 1][t - 1] } else { 0.0 };
            series[i][t] = 0.7 * series[i][t - 1] + spill + 0.5 * common + normal(&mut r);
        }
    }
    let ds = from_series(&series, 0);
    for algo in Algorithm::ALL {
        let a = learn_structure(&ds, algo, &LearnerSettings::default()).unwrap();
        let b = learn_structure(&ds, algo, &LearnerSettings::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.edges().all(|(_, c)| c >= v), "{algo} edge into lagged slice");
        assert!(a.topological_order().is_some());
        assert!(a.n_edges() > 0);
    }
}

#[test]
fn constant_columns_stay_isolated() {
    let mut series = noise_panel(3, 600, 10);
    series[2] = vec![4.0; 600];
    series[0] = ar1(600, 0.8, 11);
    let ds = from_series(&series, 0);
    for algo in Algorithm::ALL {
        let s = learn_structure(&ds, algo, &LearnerSettings::default()).unwrap();
        assert!(s.edges().all(|(p, c)| p % 3 != 2 && c % 3 != 2));
        let m = fit_parameters(&s, &ds).unwrap();
        assert_eq!(m.node_params(5).intercept, 4.0);
    }
}

#[test]
fn edge_list_round_trip() {
    let s = DbnStructure::from_edges(names(3), 1, [(0, 3), (3, 4), (2, 4), (5, 4)]).unwrap();
    let text = s.to_edge_list();
    assert!(text.contains("t-1:v0 -> t:v0\n"));
    assert!(text.contains("t:v0 -> t:v1\n"));
    assert_eq!(DbnStructure::from_edge_list(names(3), 1, &text).unwrap(), s);
    assert!(DbnStructure::from_edges(names(2), 0, [(2, 0)]).is_err());
    assert!(DbnStructure::from_edges(names(2), 0, [(2, 3), (3, 2)]).is_err());
}

#[test]
fn parentless_node_gets_moments() {
    let series = noise_panel(2, 300, 12);
    let ds = from_series(&series, 0);
    let s = DbnStructure::empty(names(2), 0);
    let m = fit_parameters(&s, &ds).unwrap();
    let col = ds.column(2);
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let p = m.node_params(2);
    assert!((p.intercept - mean).abs() < 1e-12);
    assert!((p.residual_variance - var).abs() < 1e-12);
    // The forecast of a parentless target is its training mean.
    assert!((m.forecast_one_step(&[3.0, -1.0]).unwrap() - mean).abs() < 1e-12);
}

#[test]
fn regression_coefficient_recovered() {
    let mut r = rng(13);
    let n = 10_000;
    let x: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let y: Vec<f64> = x.iter().map(|x| 2.0 * x + 0.1 * normal(&mut r)).collect();
    let ds = from_pairs(vec![x, vec![0.0; n]], vec![y, vec![0.0; n]], 0);
    let s = DbnStructure::from_edges(names(2), 0, [(0, 2)]).unwrap();
    let m = fit_parameters(&s, &ds).unwrap();
    let b = m.node_params(2).coefficients[0].1;
    assert!((b - 2.0).abs() < 0.01, "{b}");
}

#[test]
fn rank_deficient_parents_name_the_node() {
    let mut r = rng(14);
    let n = 200;
    let a: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let b: Vec<f64> = a.iter().map(|x| 3.0 * x + 1.0).collect();
    let y: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let ds = from_pairs(vec![a, b], vec![y, vec![1.0; n]], 0);
    let s = DbnStructure::from_edges(names(2), 0, [(0, 2), (1, 2)]).unwrap();
    match fit_parameters(&s, &ds) {
        Err(Error::Numerical(msg)) => assert!(msg.contains("t:v0"), "{msg}"),
        other => panic!("expected a numerical error, got {other:?}"),
    }
}

/// Independent log-likelihood: sum of per-row normal log densities of the
/// residuals under each node's residual variance.
fn recomputed_loglik(m: &GaussianDbn, ds: &TwoSliceDataset) -> f64 {
    let mut ll = 0.0;
    for node in 0..ds.n_nodes() {
        let p = m.node_params(node);
        for i in 0..ds.n_rows() {
            let fitted: f64 = p.intercept + p.coefficients.iter().map(|&(q, b)| b * ds.column(q)[i]).sum::<f64>();
            let e = ds.column(node)[i] - fitted;
            let v = p.residual_variance;
            ll += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - e * e / (2.0 * v);
        }
    }
    ll
}

#[test]
fn aic_matches_recomputed_likelihood() {
    let mut series = noise_panel(4, 1264, 15);
    series[0] = ar1(1264, 0.95, 16).iter().map(|x| 1000.0 + 10.0 * x).collect();
    let ds = from_series(&series, 0);
    let s = learn_structure(&ds, Algorithm::Mmhc, &LearnerSettings::default()).unwrap();
    let s = {
        let mut s = s;
        let _ = s.add_edge(1, 4);
        let _ = s.add_edge(6, 4);
        s
    };
    let m = fit_parameters(&s, &ds).unwrap();
    let k = (0..ds.n_nodes()).map(|n| s.parents(n).len() + 2).sum::<usize>();
    assert_eq!(m.parameter_count(), k);
    let aic = 2.0 * k as f64 - 2.0 * recomputed_loglik(&m, &ds);
    assert!((m.fit_aic() - aic).abs() < 1e-8, "{} vs {aic}", m.fit_aic());
}

#[test]
fn useless_parent_usually_raises_aic() {
    // The AIC change from one irrelevant regressor is 2 − LR with LR ~ χ²(1),
    // so it rises with probability P(χ²(1) < 2) ≈ 0.843.
    let mut r = rng(17);
    let n = 500;
    let reps = 200;
    let mut rises = 0;
    for _ in 0..reps {
        let x: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let junk: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let y: Vec<f64> = x.iter().map(|x| 0.7 * x + normal(&mut r)).collect();
        let ds = from_pairs(vec![x, junk], vec![y, vec![0.0; n]], 0);
        let truth = DbnStructure::from_edges(names(2), 0, [(0, 2)]).unwrap();
        let padded = DbnStructure::from_edges(names(2), 0, [(0, 2), (1, 2)]).unwrap();
        let a = fit_parameters(&truth, &ds).unwrap().fit_aic();
        let b = fit_parameters(&padded, &ds).unwrap().fit_aic();
        if b > a {
            rises += 1;
        }
    }
    let rate = rises as f64 / reps as f64;
    assert!((0.77..=0.91).contains(&rate), "AIC rose in {rate} of replications");
}

fn params(intercept: f64, coefficients: Vec<(usize, f64)>, residual_variance: f64) -> NodeParams {
    NodeParams {
        intercept,
        coefficients,
        residual_variance,
    }
}

#[test]
fn single_regression_forecast() {
    let s = DbnStructure::from_edges(names(1), 0, [(0, 1)]).unwrap();
    let m = GaussianDbn::from_params(s, vec![params(0.0, vec![], 1.0), params(0.0, vec![(0, 2.0)], 1.0)]).unwrap();
    assert_eq!(m.forecast_one_step(&[5.0]).unwrap(), 10.0);
    let mut ev = BTreeMap::new();
    assert!(matches!(m.forecast_from(&ev), Err(Error::Input(_))));
    ev.insert("v0".to_string(), 5.0);
    assert_eq!(m.forecast_from(&ev).unwrap(), 10.0);
    assert!(matches!(m.forecast_one_step(&[]), Err(Error::Input(_))));
}

/// Conditional mean of the target given the lagged slice, by forming the
/// dense joint covariance `(I − B)⁻¹ D (I − B)⁻ᵀ` and conditioning.
fn joint_gaussian_oracle(m: &GaussianDbn, evidence: &[f64]) -> f64 {
    let s = m.structure();
    let n = s.n_nodes();
    let v = s.n_vars();
    let mut b = DMatrix::zeros(n, n);
    let mut c = DVector::zeros(n);
    let mut d = DMatrix::zeros(n, n);
    for node in 0..n {
        let p = m.node_params(node);
        c[node] = p.intercept;
        d[(node, node)] = p.residual_variance;
        for &(q, coef) in &p.coefficients {
            b[(node, q)] = coef;
        }
    }
    let a = (DMatrix::identity(n, n) - b).try_inverse().unwrap();
    let mean = &a * c;
    let cov = &a * d * a.transpose();
    let t = s.target_node();
    let cov_ll = cov.view((0, 0), (v, v)).into_owned();
    let cov_tl = cov.view((t, 0), (1, v)).into_owned();
    let dev = DVector::from_fn(v, |i, _| evidence[i] - mean[i]);
    mean[t] + (cov_tl * cov_ll.try_inverse().unwrap() * dev)[0]
}

fn random_model(v: usize, seed: u64) -> GaussianDbn {
    let mut r = rng(seed);
    let mut s = DbnStructure::empty(names(v), 0);
    for child in v..2 * v {
        for parent in 0..2 * v {
            if parent != child && r.random_bool(0.4) {
                let _ = s.add_edge(parent, child);
            }
        }
    }
    let p = (0..2 * v)
        .map(|node| {
            let coefficients = s
                .parents(node)
                .into_iter()
                .map(|q| (q, r.random_range(-1.0..1.0)))
                .collect();
            params(r.random_range(-2.0..2.0), coefficients, r.random_range(0.5..2.0))
        })
        .collect();
    GaussianDbn::from_params(s, p).unwrap()
}

#[test]
fn forecast_matches_joint_gaussian_conditioning() {
    // Chain lagged X → current Y → current target.
    let s = DbnStructure::from_edges(names(2), 0, [(1, 3), (3, 2)]).unwrap();
    let m = GaussianDbn::from_params(
        s,
        vec![
            params(1.0, vec![], 1.0),
            params(-0.5, vec![], 2.0),
            params(0.3, vec![(3, 1.5)], 0.7),
            params(2.0, vec![(1, -0.8)], 1.2),
        ],
    )
    .unwrap();
    let ev = [0.4, 1.7];
    let f = m.forecast_one_step(&ev).unwrap();
    assert!((f - (0.3 + 1.5 * (2.0 - 0.8 * 1.7))).abs() < 1e-12);
    assert!((f - joint_gaussian_oracle(&m, &ev)).abs() < 1e-9);

    for seed in 0..20 {
        let m = random_model(4, 200 + seed);
        let mut r = rng(300 + seed);
        let ev: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
        let f = m.forecast_one_step(&ev).unwrap();
        assert!((f - joint_gaussian_oracle(&m, &ev)).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn forecast_is_affine_in_evidence() {
    for seed in 0..10 {
        let m = random_model(4, 400 + seed);
        let mut r = rng(500 + seed);
        let e1: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
        let e2: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
        let sum: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a + b).collect();
        let f0 = m.forecast_one_step(&[0.0; 4]).unwrap();
        let f1 = m.forecast_one_step(&e1).unwrap() - f0;
        let f2 = m.forecast_one_step(&e2).unwrap() - f0;
        let f12 = m.forecast_one_step(&sum).unwrap() - f0;
        assert!((f12 - f1 - f2).abs() < 1e-9);
    }
}

#[test]
fn standardization_does_not_change_forecasts() {
    // Oracle: ordinary least squares on the raw columns with an explicit
    // intercept, then the same topological propagation by hand.
    let mut r = rng(18);
    let days = 700;
    let mut a = vec![1500.0; days];
    let mut b = vec![2.0; days];
    for t in 1..days {
        a[t] = a[t - 1] + 5.0 * normal(&mut r) + 0.3 * (b[t - 1] - 2.0) * 10.0;
        b[t] = 2.0 + 0.9 * (b[t - 1] - 2.0) + 0.01 * normal(&mut r);
    }
    let ds = from_series(&[a.clone(), b.clone()], 0);
    let s = DbnStructure::from_edges(names(2), 0, [(0, 2), (1, 2), (1, 3), (3, 2)]).unwrap();
    let m = fit_parameters(&s, &ds).unwrap();
    let ols = |child: usize, parents: &[usize]| -> Vec<f64> {
        let n = ds.n_rows();
        let x = DMatrix::from_fn(n, parents.len() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                ds.column(parents[j - 1])[i]
            }
        });
        let y = DVector::from_column_slice(ds.column(child));
        let xtx = x.transpose() * &x;
        let sol = xtx.lu().solve(&(x.transpose() * y)).unwrap();
        sol.iter().copied().collect()
    };
    let bt = ols(3, &[1]);
    let at = ols(2, &[0, 1, 3]);
    let ev = [a[days - 1], b[days - 1]];
    let b_next = bt[0] + bt[1] * ev[1];
    let expected = at[0] + at[1] * ev[0] + at[2] * ev[1] + at[3] * b_next;
    let got = m.forecast_one_step(&ev).unwrap();
    assert!((got - expected).abs() < 1e-6 * expected.abs(), "{got} vs {expected}");
}

#[test]
fn learned_model_forecasts_close_to_last_value_for_random_walk() {
    let mut r = rng(19);
    let days = 1264;
    let mut level = vec![2000.0; days];
    for t in 1..days {
        level[t] = level[t - 1] + 15.0 * normal(&mut r);
    }
    let ds = from_series(&[level.clone(), noise_panel(1, days, 20).remove(0)], 0);
    for algo in Algorithm::ALL {
        let s = learn_structure(&ds, algo, &LearnerSettings::default()).unwrap();
        let m = fit_parameters(&s, &ds).unwrap();
        let f = m.forecast_one_step(&[level[days - 1], 0.0]).unwrap();
        let ret = forecast_return(f, level[days - 1]).unwrap();
        assert!(ret.abs() < 0.02, "{algo}: {ret}");
    }
}
