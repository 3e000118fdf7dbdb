mod common;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use svfactor::estimator::FitOptions;
use svfactor::evalkit::*;
use svfactor::simlab::*;

/// Equal entrywise, with NaN matching NaN.
fn same<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> bool {
    a.into_iter().zip(b).all(|(x, y)| x == y || (x.is_nan() && y.is_nan()))
}

fn state_source() -> LoadingSource {
    LoadingSource::StateVarying { h: 0.3, opts: FitOptions::default() }
}

#[test]
fn single_refit_is_one_split() {
    let p = generate_panel(&DgpConfig::cubic(40, 200, 1)).unwrap();
    let cfg = BacktestConfig { initial_train: 120, refit_every: 80, r: 1, source: state_source() };
    let bt = expanding_backtest(&p.x, &p.states, &cfg).unwrap();
    assert_eq!(bt.schedule.len(), 1);
    let train = p.x.columns(0, 120).into_owned();
    let test = p.x.columns(120, 80).into_owned();
    let split = oos_common_component(&train, &p.states[..120], &test, &p.states[120..], 0.3, 1, &FitOptions::default()).unwrap();
    assert!(same(bt.common.iter(), split.common.iter()));
}

#[test]
fn future_data_does_not_leak() {
    let p = generate_panel(&DgpConfig::cubic(30, 160, 2)).unwrap();
    for source in [state_source(), LoadingSource::Constant] {
        let cfg = BacktestConfig { initial_train: 60, refit_every: 20, r: 1, source };
        let base = expanding_backtest(&p.x, &p.states, &cfg).unwrap();
        let cut = 110;
        let mut x = p.x.clone();
        let mut s = p.states.clone();
        for k in cut..160 {
            x.column_mut(k).scale_mut(-3.0);
            s[k] += 1.0;
        }
        let moved = expanding_backtest(&x, &s, &cfg).unwrap();
        let upto = cut - 60;
        assert!(same(base.common.columns(0, upto).iter(), moved.common.columns(0, upto).iter()));
        assert!(!same(base.common.columns(upto, 1).iter(), moved.common.columns(upto, 1).iter()));
    }
}

#[test]
fn shuffled_panel_has_no_predictive_structure() {
    let p = generate_panel(&DgpConfig::cubic(50, 300, 3)).unwrap();
    let mut g = common::rng(4);
    let mut x = p.x.clone();
    for i in 0..50 {
        let mut row: Vec<f64> = p.x.row(i).iter().copied().collect();
        row.shuffle(&mut g);
        for (k, v) in row.into_iter().enumerate() {
            x[(i, k)] = v;
        }
    }
    let cfg = BacktestConfig { initial_train: 150, refit_every: 30, r: 1, source: state_source() };
    let oos = expanding_backtest(&x, &p.states, &cfg).unwrap().rsq.rsq_x;
    let ins = in_sample_common(&x, &p.states, &state_source(), &[1]).unwrap().remove(0);
    let bound = rsq(&x, &ins.common, None, Scope::InSample, 1).unwrap().rsq_x;
    assert!(oos < bound, "{oos} vs {bound}");
    let real = expanding_backtest(&p.x, &p.states, &cfg).unwrap().rsq.rsq_x;
    assert!(real > oos + 0.1);
}

#[test]
fn state_model_beats_constant_out_of_sample() {
    let p = generate_panel(&DgpConfig::cubic(100, 500, 5)).unwrap();
    let state = BacktestConfig { initial_train: 250, refit_every: 50, r: 1, source: state_source() };
    let constant = BacktestConfig { source: LoadingSource::Constant, ..state.clone() };
    let a = expanding_backtest(&p.x, &p.states, &state).unwrap().rsq.rsq_x;
    let b = expanding_backtest(&p.x, &p.states, &constant).unwrap().rsq.rsq_x;
    assert!(a > b, "{a} vs {b}");
}

#[test]
fn portfolio_respects_risk_free_and_schedule() {
    let p = generate_panel(&DgpConfig::cubic(20, 120, 6)).unwrap();
    let cfg = BacktestConfig { initial_train: 60, refit_every: 30, r: 1, source: LoadingSource::Constant };
    let zero = mv_factor_portfolio(&p.x, &p.states, &cfg, &PortfolioConfig::default()).unwrap();
    let rf = PortfolioConfig { risk_free: Some(vec![0.01; 120]), ..Default::default() };
    let with = mv_factor_portfolio(&p.x, &p.states, &cfg, &rf).unwrap();
    assert_eq!(zero.times, (60..120).collect::<Vec<_>>());
    for (a, b) in zero.returns.iter().zip(&with.returns) {
        assert!((a - b - 0.01).abs() < 1e-15);
    }
    assert!(with.risk_free_supplied && !zero.risk_free_supplied);
    for w in &zero.weights {
        assert!((w.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let bad = PortfolioConfig { risk_free: Some(vec![0.0; 5]), ..Default::default() };
    assert!(mv_factor_portfolio(&p.x, &p.states, &cfg, &bad).is_err());
}

#[test]
fn factor_returns_are_least_squares() {
    let mut g = common::rng(7);
    let l = common::gaussian(10, 2, &mut g);
    let x = common::gaussian(10, 5, &mut g);
    let f = factor_returns(&l, &x).unwrap();
    let oracle = (l.transpose() * &l).try_inverse().unwrap() * l.transpose() * &x;
    assert!((f.transpose() - oracle).abs().max() < 1e-12);
    assert!(factor_returns(&DMatrix::zeros(10, 2), &x).is_err());
}
