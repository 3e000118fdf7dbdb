//! Simulated panels and Monte Carlo studies.

mod dgp;
mod rng;
mod studies;

pub use dgp::{
    generate_panel, generate_replication, simulate_ou_state, state_noise, DgpConfig, ErrorModel, LoadingFunction,
    LoadingModel, SimPanel, StateModel,
};
pub use rng::{derive_seed, substream, Component};
pub use studies::{
    gc_statistic, ks_normal, mc_distribution_study, mc_estimator_study, mc_factor_count_curves, mc_power_study,
    mc_rsq_study, power_config, rotation_h, standardized_estimates, study_fit_options, two_state_config, CurvePoint, CurveSpec,
    DistributionSpec, DistributionStudy, PowerSpec, PowerTable, RotationMatrix, RsqRow, RsqSpec, Target,
};
