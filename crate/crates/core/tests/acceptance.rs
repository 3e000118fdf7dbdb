//! Acceptance criteria at full size. Each test prints one PASS/FAIL line, then asserts.

mod common;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use svfactor::estimator::*;
use svfactor::evalkit::variance_explained_shares;
use svfactor::inference::*;
use svfactor::io::*;
use svfactor::numerics::*;
use svfactor::simlab::*;

use common::*;

fn report(id: u32, ok: bool, detail: String) {
    println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

#[test]
fn criterion_1_equal_weight_oracle() {
    let (x, _, _) = factor_panel(100, 500, 3, 1.0, 1);
    let states = vec![0.0; 500];
    let start = Instant::now();
    let fit = fit_conditional(&x, &states, 0.0, 1.0, 3, &FitOptions::with_kernel(KernelKind::Uniform)).unwrap();
    let cc = common_components(&fit, fit.default_floor());
    let secs = start.elapsed().as_secs_f64();
    let err = rel_err(&cc.common, &svd_truncation(&x, 3));
    report(1, err < 1e-8 && secs < 2.0, format!("relative error {err:.2e} (≤ 1e-8), fit time {secs:.3}s (< 2s)"));
}

#[test]
fn criterion_2_estimator_normality() {
    let cfg = DgpConfig::cubic(100, 500, 2);
    let spec = DistributionSpec::new(0.5, 0.3, 2000);
    let start = Instant::now();
    let studies = mc_estimator_study(&cfg, &spec).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for d in &studies {
        let good = d.mean.abs() <= 0.10 && within(d.variance, 0.88, 1.12) && d.ks <= 0.05 && d.failures == 0;
        ok &= good;
        parts.push(format!(
            "{} mean {:+.3} var {:.3} ks {:.3} failures {} [{}]",
            d.target,
            d.mean,
            d.variance,
            d.ks,
            d.failures,
            if good { "ok" } else { "out of band" }
        ));
    }
    parts.push(format!("{:.0}s", start.elapsed().as_secs_f64()));
    report(2, ok, parts.join("; "));
}

#[test]
fn criterion_3_power_table_cells() {
    let mut spec = PowerSpec::standard(500, 7);
    spec.families = vec![LoadingModel::BreakLinear { s0: 0.3 }];
    spec.pairs = vec![(0.1, 0.9), (0.9, 0.95)];
    spec.sizes = vec![(50, 250), (100, 500)];
    let table = mc_power_study(&spec).unwrap();
    let size = table.get((100, 500), 0, 1).unwrap();
    let power_big = table.get((100, 500), 0, 0).unwrap();
    let power_small = table.get((50, 250), 0, 0).unwrap();
    let checks = [
        (within(size, 0.954 - 0.04, 0.954 + 0.04), format!("(100,500) (0.90,0.95) acceptance {size:.3} (0.954 ± 0.04)")),
        (power_big <= 0.02, format!("(100,500) (0.1,0.9) acceptance {power_big:.3} (≤ 0.02)")),
        (within(power_small, 0.328 - 0.08, 0.328 + 0.08), format!("(50,250) (0.1,0.9) acceptance {power_small:.3} (0.328 ± 0.08)")),
    ];
    let ok = checks.iter().all(|c| c.0);
    let detail = checks.iter().map(|c| format!("{} [{}]", c.1, if c.0 { "ok" } else { "out of band" })).collect::<Vec<_>>();
    report(3, ok, detail.join("; "));
}

#[test]
fn criterion_4_change_statistic_null() {
    let mut cfg = DgpConfig::cubic(100, 500, 4);
    cfg.loading_model = LoadingModel::Constant;
    let mut spec = DistributionSpec::new(0.5, 0.3, 2000);
    spec.hold_fixed = true;
    let d = mc_distribution_study(&cfg, &spec, Target::GcNull { s1: 0.4, s2: 0.6 }).unwrap();
    let ok = within(d.variance, 0.85, 1.15) && within(d.mean, -0.35, 0.05);
    report(
        4,
        ok,
        format!("mean {:+.3} ([-0.35, 0.05]), variance {:.3} ([0.85, 1.15]), ks {:.3}, failures {}", d.mean, d.variance, d.ks, d.failures),
    );
}

#[test]
fn criterion_5_rsq_table() {
    let rows = mc_rsq_study(&RsqSpec::standard(20, 5)).unwrap();
    let g = rows.iter().find(|r| r.label == "G = S").unwrap();
    let c = rows.iter().find(|r| r.label == "constant").unwrap();
    let checks = [
        (within(g.in_x, 0.627, 0.727), format!("G=S in-sample R²_X {:.3} (0.677 ± 0.05)", g.in_x)),
        (within(g.in_c, 0.967, 1.007), format!("G=S in-sample R²_C {:.3} (0.987 ± 0.02)", g.in_c)),
        (within(c.in_x, 0.392, 0.492), format!("constant in-sample R²_X {:.3} (0.442 ± 0.05)", c.in_x)),
    ];
    let ok = checks.iter().all(|c| c.0);
    let detail = checks.iter().map(|c| format!("{} [{}]", c.1, if c.0 { "ok" } else { "out of band" })).collect::<Vec<_>>();
    report(5, ok, detail.join("; "));
}

#[test]
fn criterion_6_two_state_ordering() {
    let curves = mc_factor_count_curves(&CurveSpec::standard(20, 6)).unwrap();
    let wins = curves.iter().filter(|c| c[1].state_c > c[6].pca_c).count();
    let mean_state: f64 = curves.iter().map(|c| c[1].state_c).sum::<f64>() / 20.0;
    let mean_pca: f64 = curves.iter().map(|c| c[6].pca_c).sum::<f64>() / 20.0;
    report(
        6,
        wins >= 18,
        format!("state-PCA k=2 beats PCA k=7 on out-of-sample R²_C in {wins}/20 seeds (≥ 18); means {mean_state:.3} vs {mean_pca:.3}"),
    );
}

#[test]
fn criterion_7_loading_curves() {
    let p = generate_panel(&DgpConfig::cubic(100, 500, 7)).unwrap();
    let grid: Vec<f64> = (0..31).map(|k| -1.5 + 0.1 * k as f64).collect();
    let sweep = state_sweep(&p.x, &p.states, &grid, 0.5, 1, &FitOptions::default()).unwrap();
    let mut est = DMatrix::zeros(100, grid.len());
    let mut truth = DMatrix::zeros(100, grid.len());
    for (g, point) in sweep.iter().enumerate() {
        let fit = point.fit.as_ref().unwrap();
        let lam = p.true_loading_at(point.s).column(0).into_owned();
        let mut l = fit.loadings.column(0).into_owned();
        if l.dot(&lam) < 0.0 {
            l.neg_mut();
        }
        est.set_column(g, &l);
        truth.set_column(g, &lam);
    }
    let corr = |a: DVector<f64>, b: DVector<f64>| {
        let (ma, mb) = (a.mean(), b.mean());
        let (a, b) = (a.add_scalar(-ma), b.add_scalar(-mb));
        a.dot(&b) / (a.norm() * b.norm())
    };
    let good = (0..100).filter(|&i| corr(est.row(i).transpose(), truth.row(i).transpose()) > 0.95).count();
    report(7, good >= 90, format!("{good}/100 series with curve correlation > 0.95 (≥ 90%)"));
}

#[test]
fn criterion_8_property_suite() {
    let mut failures = Vec::new();
    let mut g = rng(8);

    // ρ̂ range and invariance under invertible right-multiplication.
    for _ in 0..200 {
        let l1 = gaussian(20, 3, &mut g);
        let l2 = gaussian(20, 3, &mut g);
        let rho = generalized_correlation(&l1, &l2).unwrap();
        if !(rho >= 0.0 && rho <= 3.0 + 1e-12) {
            failures.push(format!("rho {rho} outside [0, 3]"));
        }
        let (a, b) = (gaussian(3, 3, &mut g), gaussian(3, 3, &mut g));
        if a.determinant().abs() < 0.1 || b.determinant().abs() < 0.1 {
            continue;
        }
        let moved = generalized_correlation(&(&l1 * a), &(&l2 * b)).unwrap();
        if (moved - rho).abs() > 1e-9 {
            failures.push(format!("rho changed by {:.1e} under rotation", (moved - rho).abs()));
        }
    }

    // Plug-in estimators against brute-force sums over every pair.
    let (x, _, _) = factor_panel(8, 10, 1, 0.7, 9);
    let states: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).collect();
    let mut opts = FitOptions::default();
    opts.min_effective_size = 1.0;
    let f1 = fit_conditional(&x, &states, 0.3, 0.4, 1, &opts).unwrap();
    let f2 = fit_conditional(&x, &states, 0.7, 0.4, 1, &opts).unwrap();
    let cc = common_components(&f1, f1.default_floor());
    let t0 = cc.valid_times[0];
    let pi = estimate_factor_cov(&f1, &cc, t0, &PairSet::Full).unwrap().pi_hat[(0, 0)];
    let e = cc.residuals.column(t0);
    let le: f64 = (0..8).map(|i| f1.loadings[(i, 0)] * e[i]).sum();
    let pi_oracle = le * le / 8.0 / f1.eigenvalues[0].powi(2);
    if (pi - pi_oracle).abs() > 1e-12 * pi_oracle.abs().max(1.0) {
        failures.push(format!("Π̂ off by {:.1e}", (pi - pi_oracle).abs()));
    }
    let th = estimate_loading_cov(&f1, &cc, 3, &PairSet::Full).unwrap().theta_hat[(0, 0)];
    let fe: f64 = (0..10).map(|k| f1.projected_factors[(k, 0)] * cc.residuals_projected[(3, k)]).sum();
    let th_oracle = fe * fe * 10.0 * f1.h / f1.effective_size.powi(2);
    if (th - th_oracle).abs() > 1e-12 * th_oracle.abs().max(1.0) {
        failures.push(format!("Θ̂ off by {:.1e}", (th - th_oracle).abs()));
    }
    let detail = gc_test_detailed(&f1, &f2, &SparsitySets::full(), &GcOptions::default()).unwrap();
    let bars: Vec<_> = [&f1, &f2]
        .iter()
        .map(|f| {
            let v = f.eigenvalues[0];
            let lb = &f.loadings / v.sqrt();
            let fb = &f.projected_factors * v.sqrt();
            let eb = &f.projected_data - &lb * fb.transpose();
            (lb, fb, eb, f.effective_size)
        })
        .collect();
    let mut total = DVector::<f64>::zeros(4);
    for i in 0..8 {
        for k in 0..10 {
            for u in 0..2 {
                for v in 0..2 {
                    total[2 * u + v] += bars[u].1[(k, 0)] * bars[v].0[(i, 0)] * bars[u].2[(i, k)] / bars[u].3;
                }
            }
        }
    }
    let sigma_oracle = &total * total.transpose() * (10.0 * 0.4 / 8.0);
    let gap = (&detail.sigma_bb - &sigma_oracle).abs().max();
    if gap > 1e-12 * sigma_oracle.abs().max().max(1.0) {
        failures.push(format!("Σ̂_BB off by {gap:.1e}"));
    }

    // Eigen residual bound.
    for _ in 0..50 {
        let a = gaussian(9, 9, &mut g);
        let m = &a + a.transpose();
        let e = top_r_symmetric_eig(&m, 4).unwrap();
        let resid = (&m * &e.vectors - &e.vectors * DMatrix::from_diagonal(&e.values)).norm();
        if resid > 1e-8 * m.norm() {
            failures.push(format!("eigen residual {resid:.1e}"));
        }
    }

    // CSV round trip.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    let panel = PanelData::unlabeled(gaussian(7, 13, &mut g) * 1e3);
    let state = StateSeries { values: (0..13).map(|k| (k as f64).sqrt()).collect(), id: "state".into(), transform: StateTransform::None };
    write_panel_csv(&panel, Some(&state), Layout::RowsAreTime, &path).unwrap();
    let (back, s) = load_panel_csv(&path, Layout::RowsAreTime, Some("state"), StateTransform::None).unwrap();
    if back.values != panel.values || s.map(|s| s.values) != Some(state.values.clone()) {
        failures.push("CSV round trip changed values".into());
    }

    // Seed determinism.
    let cfg = DgpConfig::cubic(20, 50, 10);
    let (a, b) = (generate_replication(&cfg, 3, false).unwrap(), generate_replication(&cfg, 3, false).unwrap());
    if a.x != b.x || a.states != b.states {
        failures.push("same seed gave different panels".into());
    }
    let sweep = state_sweep(&a.x, &a.states, &[0.0, 0.5], 0.5, 2, &FitOptions::default()).unwrap();
    if variance_explained_shares(&sweep).iter().any(|c| c.shares.as_ref().is_some_and(|s| s[0] < s[1])) {
        failures.push("variance shares not ordered".into());
    }

    let ok = failures.is_empty();
    report(8, ok, if ok { "all property checks hold".into() } else { failures.join("; ") });
}
