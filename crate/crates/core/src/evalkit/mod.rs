//! Explained variation, out-of-sample projections, backtests and the factor portfolio.

mod backtest;
mod projection;
mod rsq;

pub use backtest::{
    expanding_backtest, factor_returns, mv_factor_portfolio, mv_weights, schedule, sharpe_ratio, BacktestConfig,
    BacktestReport, MvWeights, PortfolioConfig, PortfolioReport, Step, WeightNormalization, MIN_TRAIN,
};
pub use projection::{
    in_sample_common, oos_common_component, oos_common_components_multi, pca_loadings, project, LoadingSource,
    OosResult,
};
pub use rsq::{rsq, RsqReport, Scope};

use crate::estimator::SweepPoint;

#[derive(Clone, Debug)]
pub struct ShareCurve {
    pub s: f64,
    /// None where the fit at `s` failed.
    pub shares: Option<Vec<f64>>,
}

/// Per-state shares V_j / total variation from a sweep.
pub fn variance_explained_shares(sweep: &[SweepPoint<f64>]) -> Vec<ShareCurve> {
    sweep.iter().map(|p| ShareCurve { s: p.s, shares: p.variance_shares() }).collect()
}
