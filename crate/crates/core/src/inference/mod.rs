//! Feasible covariance estimators and the test for a change in the loading span.

mod covariance;
mod gc;
mod sparsity;

pub use covariance::{
    common_se_from_parts, cross_section_meat, estimate_common_se, estimate_factor_cov, estimate_loading_cov,
    factor_cov_from_parts, loading_cov_from_parts, loading_gram_inverse, CommonSE, FactorCov, LoadingCov,
};
pub use gc::{
    derivative_map, gc_test, gc_test_detailed, gc_test_with, generalized_correlation, pairwise_test_grid, BiasTerms, GcDetail, GcOptions, GcTestResult, VarianceForm,
    GridError, PairwiseGrid,
};
pub use sparsity::{JointSet, PairSet, SparsitySets};
