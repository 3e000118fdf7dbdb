use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{fit_conditional, unprojected_factors};
use crate::evalkit::projection::{oos_common_components_multi, pca_loadings, LoadingSource};
use crate::evalkit::rsq::{rsq, RsqReport, Scope};

/// Smallest initial training window accepted.
pub const MIN_TRAIN: usize = 10;

#[derive(Clone, Debug)]
pub struct BacktestConfig {
    pub initial_train: usize,
    pub refit_every: usize,
    pub r: usize,
    pub source: LoadingSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Step {
    /// Training uses periods [0, train_end).
    pub train_end: usize,
    /// Test periods [train_end, test_end).
    pub test_end: usize,
}

#[derive(Clone, Debug)]
pub struct BacktestReport {
    pub schedule: Vec<Step>,
    /// N × (T − initial_train), NaN where a fit failed.
    pub common: DMatrix<f64>,
    pub rsq: RsqReport,
    pub failed_times: Vec<usize>,
}

pub fn schedule(t: usize, initial_train: usize, refit_every: usize) -> Result<Vec<Step>> {
    if initial_train < MIN_TRAIN || initial_train >= t {
        return Err(Error::InvalidArgument(format!(
            "initial training window {initial_train} must be in [{MIN_TRAIN}, {t})"
        )));
    }
    if refit_every == 0 {
        return Err(Error::InvalidArgument("refit_every must be at least 1".into()));
    }
    let mut out = Vec::new();
    let mut end = initial_train;
    while end < t {
        let test_end = (end + refit_every).min(t);
        out.push(Step { train_end: end, test_end });
        end = test_end;
    }
    Ok(out)
}

fn check(x: &DMatrix<f64>, states: &[f64]) -> Result<()> {
    if states.len() != x.ncols() {
        return Err(Error::DimensionMismatch(format!("{} states for {} periods", states.len(), x.ncols())));
    }
    Ok(())
}

/// Walk-forward evaluation on an expanding window.
pub fn expanding_backtest(x: &DMatrix<f64>, states: &[f64], cfg: &BacktestConfig) -> Result<BacktestReport> {
    check(x, states)?;
    let (n, t) = x.shape();
    let steps = schedule(t, cfg.initial_train, cfg.refit_every)?;
    let mut common = DMatrix::from_element(n, t - cfg.initial_train, f64::NAN);
    let mut failed_times = Vec::new();
    for step in &steps {
        let train = x.columns(0, step.train_end).into_owned();
        let test = x.columns(step.train_end, step.test_end - step.train_end).into_owned();
        let res = oos_common_components_multi(
            &train,
            &states[..step.train_end],
            &test,
            &states[step.train_end..step.test_end],
            &cfg.source,
            &[cfg.r],
        )?
        .remove(0);
        let offset = step.train_end - cfg.initial_train;
        common.columns_mut(offset, test.ncols()).copy_from(&res.common);
        failed_times.extend(res.failed_times.iter().map(|k| k + step.train_end));
    }
    let realized = x.columns(cfg.initial_train, t - cfg.initial_train).into_owned();
    let rsq = rsq(&realized, &common, None, Scope::OutOfSample, cfg.r)?;
    Ok(BacktestReport { schedule: steps, common, rsq, failed_times })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightNormalization {
    /// Σ|w| = 1.
    #[default]
    UnitGross,
    Raw,
}

#[derive(Clone, Debug)]
pub struct PortfolioConfig {
    /// Per-period risk-free rate aligned with the panel; zero when absent.
    pub risk_free: Option<Vec<f64>>,
    pub periods_per_year: f64,
    pub normalization: WeightNormalization,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        PortfolioConfig { risk_free: None, periods_per_year: 252.0, normalization: WeightNormalization::UnitGross }
    }
}

#[derive(Clone, Debug)]
pub struct MvWeights {
    pub weights: DVector<f64>,
    pub ridge: bool,
}

/// w ∝ Σ̂⁻¹μ̂ from a T×r history, optionally with observation weights.
pub fn mv_weights(history: &DMatrix<f64>, obs_weights: Option<&[f64]>, norm: WeightNormalization) -> Result<MvWeights> {
    let (t, r) = history.shape();
    if t < 2 {
        return Err(Error::InvalidArgument("need at least two observations for moments".into()));
    }
    let w: Vec<f64> = match obs_weights {
        Some(w) if w.len() == t => w.to_vec(),
        Some(_) => return Err(Error::DimensionMismatch("observation weights length".into())),
        None => vec![1.0; t],
    };
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SingularFactorCov);
    }
    let mut mu = DVector::zeros(r);
    for k in 0..t {
        mu += history.row(k).transpose() * (w[k] / total);
    }
    let mut cov = DMatrix::zeros(r, r);
    for k in 0..t {
        let d = history.row(k).transpose() - &mu;
        cov += &d * d.transpose() * (w[k] / total);
    }
    let eig = cov.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let low = eig.eigenvalues.min();
    let ridge = !(top > 0.0) || low <= 1e-12 * top;
    let raw = if ridge {
        let lam = 1e-8 * cov.trace().max(f64::MIN_POSITIVE);
        log::warn!("factor covariance singular, using ridge {lam:e}");
        let reg = &cov + DMatrix::identity(r, r) * lam;
        reg.cholesky().ok_or(Error::SingularFactorCov)?.solve(&mu)
    } else {
        cov.cholesky().ok_or(Error::SingularFactorCov)?.solve(&mu)
    };
    let weights = match norm {
        WeightNormalization::Raw => raw,
        WeightNormalization::UnitGross => {
            let g = raw.iter().map(|v| v.abs()).sum::<f64>();
            if g > 0.0 {
                raw / g
            } else {
                raw
            }
        }
    };
    Ok(MvWeights { weights, ridge })
}

/// Annualized mean over standard deviation (n − 1 denominator).
pub fn sharpe_ratio(returns: &[f64], periods_per_year: f64) -> Result<f64> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two returns".into()));
    }
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(mean / var.sqrt() * periods_per_year.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct PortfolioReport {
    pub times: Vec<usize>,
    /// Excess returns per test period.
    pub returns: Vec<f64>,
    /// Factor weights fixed at the start of each test period.
    pub weights: Vec<Vec<f64>>,
    pub sharpe: f64,
    pub ridge_periods: usize,
    pub risk_free_supplied: bool,
    pub failed_times: Vec<usize>,
}

/// Mean-variance portfolio of the estimated factors, traded out of sample on an expanding window.
pub fn mv_factor_portfolio(
    x: &DMatrix<f64>,
    states: &[f64],
    cfg: &BacktestConfig,
    pcfg: &PortfolioConfig,
) -> Result<PortfolioReport> {
    check(x, states)?;
    let t = x.ncols();
    if let Some(rf) = &pcfg.risk_free {
        if rf.len() != t {
            return Err(Error::MisalignedState(format!("risk-free series has {} periods, panel has {t}", rf.len())));
        }
    } else {
        log::warn!("no risk-free series supplied, using zero");
    }
    let steps = schedule(t, cfg.initial_train, cfg.refit_every)?;
    let mut report = PortfolioReport {
        times: vec![],
        returns: vec![],
        weights: vec![],
        sharpe: f64::NAN,
        ridge_periods: 0,
        risk_free_supplied: pcfg.risk_free.is_some(),
        failed_times: vec![],
    };
    for step in &steps {
        let train = x.columns(0, step.train_end).into_owned();
        let train_s = &states[..step.train_end];
        let constant = match &cfg.source {
            LoadingSource::Constant => {
                let l = pca_loadings(&train, cfg.r)?;
                let hist = factor_returns(&l, &train)?;
                Some((l, hist))
            }
            LoadingSource::StateVarying { .. } => None,
        };
        for k in step.train_end..step.test_end {
            let outcome = match (&cfg.source, &constant) {
                (_, Some((l, hist))) => mv_weights(hist, None, pcfg.normalization).map(|w| (l.clone(), w)),
                (LoadingSource::StateVarying { h, opts }, None) => {
                    fit_conditional(&train, train_s, states[k], *h, cfg.r, opts).and_then(|fit| {
                        let u = unprojected_factors(&fit, fit.default_floor());
                        let rows: Vec<usize> = (0..u.valid.len()).filter(|&j| u.valid[j]).collect();
                        let hist = u.values.select_rows(&rows);
                        let w: Vec<f64> = rows.iter().map(|&j| fit.weights.weights[j]).collect();
                        mv_weights(&hist, Some(&w), pcfg.normalization).map(|mw| (fit.loadings.clone(), mw))
                    })
                }
                (LoadingSource::Constant, None) => unreachable!(),
            };
            match outcome {
                Ok((l, mw)) => {
                    let f = factor_returns(&l, &x.columns(k, 1).into_owned())?;
                    let rf = pcfg.risk_free.as_ref().map_or(0.0, |v| v[k]);
                    report.returns.push(mw.weights.dot(&f.row(0).transpose()) - rf);
                    report.weights.push(mw.weights.iter().copied().collect());
                    report.times.push(k);
                    report.ridge_periods += usize::from(mw.ridge);
                }
                Err(e) => {
                    log::warn!("period {k}: {e}");
                    report.failed_times.push(k);
                }
            }
        }
    }
    report.sharpe = sharpe_ratio(&report.returns, pcfg.periods_per_year)?;
    Ok(report)
}

/// Rows are (LᵀL)⁻¹LᵀX_t for each column of `x`.
pub fn factor_returns(loadings: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = loadings.tr_mul(loadings).cholesky().ok_or(Error::SingularLoadingGram)?;
    Ok(chol.solve(&loadings.tr_mul(x)).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_covers_test_period() {
        let s = schedule(100, 40, 25).unwrap();
        assert_eq!(s, vec![Step { train_end: 40, test_end: 65 }, Step { train_end: 65, test_end: 90 }, Step {
            train_end: 90,
            test_end: 100
        }]);
        assert!(schedule(100, 5, 1).is_err());
        assert!(schedule(100, 40, 0).is_err());
    }

    #[test]
    fn single_factor_sharpe() {
        let m = 0.3;
        let hist = DMatrix::from_fn(200, 1, |k, _| if k % 2 == 0 { m + 1.0 } else { m - 1.0 });
        let w = mv_weights(&hist, None, WeightNormalization::UnitGross).unwrap();
        assert_eq!(w.weights[0], 1.0);
        let rets: Vec<f64> = hist.column(0).iter().map(|f| w.weights[0] * f).collect();
        let sr = sharpe_ratio(&rets, 1.0).unwrap();
        // sample sd with n−1 is √(200/199)
        assert!((sr - m / (200.0f64 / 199.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rotation_leaves_returns_unchanged() {
        let hist = DMatrix::from_fn(300, 3, |k, j| ((k * (j + 2)) as f64 * 0.37).sin() + 0.05 * (j as f64 + 1.0));
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.2, 0.3, 2.0, 0.1, -0.5, 0.2, 0.7]);
        let rotated = &hist * &g;
        let w1 = mv_weights(&hist, None, WeightNormalization::Raw).unwrap().weights;
        let w2 = mv_weights(&rotated, None, WeightNormalization::Raw).unwrap().weights;
        let f = DVector::from_vec(vec![0.2, -1.0, 0.5]);
        let a = w1.dot(&f);
        let b = w2.dot(&(g.transpose() * &f));
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn ridge_on_degenerate_history() {
        let hist = DMatrix::from_fn(50, 2, |k, _| 1.0 + (k as f64 * 0.3).sin());
        let w = mv_weights(&hist, None, WeightNormalization::UnitGross).unwrap();
        assert!(w.ridge);
    }
}
