use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::{common_components, fit_conditional, unprojected_factors, ConditionalFit, FitOptions};
use crate::evalkit::{in_sample_common, oos_common_components_multi, rsq, LoadingSource, Scope};
use crate::numerics::KernelKind;
use crate::inference::{estimate_common_se, estimate_factor_cov, estimate_loading_cov, gc_test, SparsitySets};
use crate::simlab::dgp::{
    generate_panel, generate_replication, state_noise, DgpConfig, ErrorModel, LoadingModel, SimPanel, StateModel,
};
use crate::simlab::rng::derive_seed;

/// Ĥˢ relating the fitted and true factor bases.
#[derive(Clone, Debug)]
pub struct RotationMatrix {
    pub h_s: DMatrix<f64>,
}

/// Ĥˢ = (ΛᵀΛ/N)·((Fˢ)ᵀF̂ˢ/T(s))·V⁻¹ with Λ = Λ(s) and Fˢ the kernel-projected true factors.
pub fn rotation_h(sim: &SimPanel, fit: &ConditionalFit<f64>) -> Result<RotationMatrix> {
    if sim.second_states.is_some() {
        return Err(Error::InvalidArgument("rotation needs loadings that depend on the fitted state alone".into()));
    }
    if sim.x.shape() != fit.data.shape() {
        return Err(Error::DimensionMismatch("fit was not computed on this panel".into()));
    }
    for (j, &v) in fit.eigenvalues.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::SingularEigenvalue { index: j, value: v });
        }
    }
    let lam = sim.true_loading_at(fit.s);
    let n = lam.nrows() as f64;
    let mut fs = sim.factors.clone();
    for (k, mut row) in fs.row_iter_mut().enumerate() {
        row *= fit.weights.weights[k].sqrt();
    }
    let v_inv = DMatrix::from_diagonal(&fit.eigenvalues.map(|v| 1.0 / v));
    let h_s = lam.tr_mul(&lam) / n * (fs.tr_mul(&fit.projected_factors) / fit.effective_size) * v_inv;
    Ok(RotationMatrix { h_s })
}

/// Sample moments and distance to the standard normal.
#[derive(Clone, Debug, Serialize)]
pub struct DistributionStudy {
    pub target: String,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Kolmogorov–Smirnov distance to N(0, 1).
    pub ks: f64,
    pub failures: usize,
    pub failure_kinds: BTreeMap<String, usize>,
}

pub fn ks_normal(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = s.len() as f64;
    let norm = Normal::new(0.0, 1.0).expect("standard normal");
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = norm.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

fn summarize(target: &str, results: Vec<Result<f64>>) -> Result<DistributionStudy> {
    let mut samples = Vec::with_capacity(results.len());
    let mut failure_kinds = BTreeMap::new();
    for r in results {
        match r {
            Ok(v) => samples.push(v),
            Err(e) => *failure_kinds.entry(e.kind().to_string()).or_insert(0) += 1,
        }
    }
    let failures = failure_kinds.values().sum();
    if samples.is_empty() {
        if failure_kinds.keys().all(|k| k == "ZeroVariance") {
            return Err(Error::ZeroVariance);
        }
        return Err(Error::InvalidArgument(format!("every replication failed: {failure_kinds:?}")));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let ks = ks_normal(&samples);
    Ok(DistributionStudy { target: target.into(), samples, mean, variance, ks, failures, failure_kinds })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Target {
    Factor,
    Loading,
    Common,
    GcNull { s1: f64, s2: f64 },
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Factor => "factor",
            Target::Loading => "loading",
            Target::Common => "common",
            Target::GcNull { .. } => "gc_null",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DistributionSpec {
    pub s: f64,
    pub h: f64,
    pub n_reps: usize,
    pub opts: FitOptions,
    pub sets: SparsitySets,
    /// Series whose loading and common component are tracked.
    pub series: usize,
    /// Keep states, loadings and factors from the first draw and redraw only errors.
    pub hold_fixed: bool,
}

impl DistributionSpec {
    pub fn new(s: f64, h: f64, n_reps: usize) -> Self {
        DistributionSpec {
            s,
            h,
            n_reps,
            opts: study_fit_options(),
            sets: SparsitySets::default(),
            series: 0,
            hold_fixed: false,
        }
    }
}

/// Fit options used by the study constructors: a compactly supported kernel, so
/// periods far from the target state carry no weight.
pub fn study_fit_options() -> FitOptions {
    FitOptions::with_kernel(KernelKind::Epanechnikov)
}

const MIN_REPS: usize = 100;

/// Standardized errors are 0/0 without idiosyncratic noise.
fn require_noise(cfg: &DgpConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.error_scale == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(())
}

fn nonzero_se(se: f64) -> Result<f64> {
    if se > 0.0 && se.is_finite() {
        Ok(se)
    } else {
        Err(Error::ZeroVariance)
    }
}

/// Standardized (loading, factor, common component) for one panel, first factor component.
pub fn standardized_estimates(panel: &SimPanel, spec: &DistributionSpec, r: usize) -> Result<[f64; 3]> {
    let fit = fit_conditional(&panel.x, &panel.states, spec.s, spec.h, r, &spec.opts)?;
    let cc = common_components(&fit, fit.default_floor());
    let hm = rotation_h(panel, &fit)?.h_s;
    let h_inv = hm.clone().try_inverse().ok_or(Error::SingularLoadingGram)?;
    let (n, t) = panel.x.shape();
    let i = spec.series;
    if i >= n {
        return Err(Error::InvalidArgument(format!("series {i} out of range")));
    }

    let lam_true = panel.true_loading_at(spec.s).row(i).transpose();
    let d_load = fit.loadings.row(i).transpose() - &h_inv * lam_true;
    let theta = estimate_loading_cov(&fit, &cc, i, &spec.sets.time_within_series)?.theta_hat;
    let z_load = d_load[0] / nonzero_se((theta[(0, 0)] / (t as f64 * spec.h)).sqrt())?;

    let tstar = (0..t)
        .min_by(|&a, &b| {
            (panel.states[a] - spec.s).abs().partial_cmp(&(panel.states[b] - spec.s).abs()).expect("finite states")
        })
        .expect("nonempty panel");
    let f = unprojected_factors(&fit, fit.default_floor());
    if !f.valid[tstar] {
        return Err(Error::InvalidArgument("nearest period has negligible weight".into()));
    }
    let d_fac = f.values.row(tstar).transpose() - hm.transpose() * panel.factors.row(tstar).transpose();
    let pi = estimate_factor_cov(&fit, &cc, tstar, &spec.sets.cross_section_at_t)?.pi_hat;
    let z_fac = d_fac[0] / nonzero_se((pi[(0, 0)] / n as f64).sqrt())?;

    let se = estimate_common_se(&fit, &cc, i, tstar, &spec.sets)?;
    let z_com = (cc.common[(i, tstar)] - panel.common[(i, tstar)]) / nonzero_se(se.se)?;
    Ok([z_load, z_fac, z_com])
}

/// Loading, factor and common-component studies from one set of replications.
pub fn mc_estimator_study(cfg: &DgpConfig, spec: &DistributionSpec) -> Result<[DistributionStudy; 3]> {
    if spec.n_reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_REPS} replications")));
    }
    require_noise(cfg)?;
    let draws: Vec<Result<[f64; 3]>> = (0..spec.n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let panel = generate_replication(cfg, rep, spec.hold_fixed)?;
            standardized_estimates(&panel, spec, cfg.r)
        })
        .collect();
    let pick = |k: usize| draws.iter().map(|d| d.as_ref().map(|v| v[k]).map_err(clone_err)).collect::<Vec<_>>();
    Ok([summarize("loading", pick(0))?, summarize("factor", pick(1))?, summarize("common", pick(2))?])
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::ZeroVariance => Error::ZeroVariance,
        Error::EffectiveSampleTooSmall { state, effective, floor } => {
            Error::EffectiveSampleTooSmall { state: *state, effective: *effective, floor: *floor }
        }
        Error::SingularEigenvalue { index, value } => Error::SingularEigenvalue { index: *index, value: *value },
        Error::SingularLoadingGram => Error::SingularLoadingGram,
        Error::RankDeficient { condition } => Error::RankDeficient { condition: *condition },
        Error::NotConverged => Error::NotConverged,
        other => Error::InvalidArgument(other.to_string()),
    }
}

/// Bias-corrected change statistic for one panel.
pub fn gc_statistic(panel: &SimPanel, s1: f64, s2: f64, h: f64, r: usize, opts: &FitOptions, sets: &SparsitySets) -> Result<f64> {
    let f1 = fit_conditional(&panel.x, &panel.states, s1, h, r, opts)?;
    let f2 = fit_conditional(&panel.x, &panel.states, s2, h, r, opts)?;
    Ok(gc_test(&f1, &f2, sets)?.statistic)
}

pub fn mc_distribution_study(cfg: &DgpConfig, spec: &DistributionSpec, target: Target) -> Result<DistributionStudy> {
    match target {
        Target::GcNull { s1, s2 } => {
            if spec.n_reps < MIN_REPS {
                return Err(Error::InvalidArgument(format!("need at least {MIN_REPS} replications")));
            }
            require_noise(cfg)?;
            let draws: Vec<Result<f64>> = (0..spec.n_reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let panel = generate_replication(cfg, rep, spec.hold_fixed)?;
                    gc_statistic(&panel, s1, s2, spec.h, cfg.r, &spec.opts, &spec.sets)
                })
                .collect();
            summarize("gc_null", draws)
        }
        other => {
            let [l, f, c] = mc_estimator_study(cfg, spec)?;
            Ok(match other {
                Target::Loading => l,
                Target::Factor => f,
                _ => c,
            })
        }
    }
}

#[derive(Clone, Debug)]
pub struct PowerSpec {
    pub families: Vec<LoadingModel>,
    pub pairs: Vec<(f64, f64)>,
    pub sizes: Vec<(usize, usize)>,
    pub n_reps: usize,
    pub h: f64,
    pub opts: FitOptions,
    pub sets: SparsitySets,
    pub seed: u64,
    /// Statistics at or above this value count as acceptances.
    pub critical: f64,
}

impl PowerSpec {
    /// The break designs, state pairs and sizes of the standard power table.
    pub fn standard(n_reps: usize, seed: u64) -> Self {
        PowerSpec {
            families: vec![LoadingModel::BreakLinear { s0: 0.3 }, LoadingModel::BreakQuadratic { s0: 0.3 }],
            pairs: vec![(0.1, 0.9), (0.25, 0.75), (0.9, 0.95)],
            sizes: [50, 100, 200].iter().flat_map(|&n| [250, 500, 1000].map(|t| (n, t))).collect(),
            n_reps,
            h: 0.3,
            opts: study_fit_options(),
            sets: SparsitySets::default(),
            seed,
            critical: -1.65,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PowerTable {
    pub sizes: Vec<(usize, usize)>,
    pub families: Vec<LoadingModel>,
    pub pairs: Vec<(f64, f64)>,
    /// Rows follow `sizes`; columns run over pairs within each family.
    pub acceptance: DMatrix<f64>,
    pub failures: DMatrix<f64>,
}

impl PowerTable {
    pub fn get(&self, size: (usize, usize), family: usize, pair: usize) -> Option<f64> {
        let row = self.sizes.iter().position(|&s| s == size)?;
        Some(self.acceptance[(row, family * self.pairs.len() + pair)])
    }
}

/// Substream for one (size, family) cell; independent of where the cell sits in the table.
fn cell_stream(n: usize, t: usize, family: LoadingModel) -> u64 {
    let code = match family {
        LoadingModel::BreakLinear { .. } => 1,
        LoadingModel::BreakQuadratic { .. } => 2,
        LoadingModel::Cubic => 3,
        LoadingModel::Constant => 4,
        LoadingModel::ExpTwoState => 5,
    };
    ((n as u64) << 40) | ((t as u64) << 8) | code
}

/// Panel configuration used by the power table: uniform state, one N(0,1) factor, iid N(0,1) errors.
pub fn power_config(n: usize, t: usize, family: LoadingModel, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        t,
        r: 1,
        state_model: StateModel::Uniform01,
        loading_model: family,
        error_model: ErrorModel::Iid,
        error_scale: 1.0,
        noise_on_state: 0.0,
        seed,
    }
}

pub fn mc_power_study(spec: &PowerSpec) -> Result<PowerTable> {
    if spec.n_reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_REPS} replications")));
    }
    let np = spec.pairs.len();
    let mut acceptance = DMatrix::from_element(spec.sizes.len(), spec.families.len() * np, f64::NAN);
    let mut failures = DMatrix::zeros(spec.sizes.len(), spec.families.len() * np);
    let mut grid: Vec<f64> = spec.pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite pair"));
    grid.dedup();
    let index = |s: f64| grid.iter().position(|&g| g == s).expect("state in grid");

    for (si, &(n, t)) in spec.sizes.iter().enumerate() {
        for (fi, &family) in spec.families.iter().enumerate() {
            let cfg = power_config(n, t, family, derive_seed(spec.seed, cell_stream(n, t, family)));
            let outcomes: Vec<Vec<Option<bool>>> = (0..spec.n_reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let Ok(panel) = generate_replication(&cfg, rep, false) else {
                        return vec![None; np];
                    };
                    let fits: Vec<Result<ConditionalFit<f64>>> = grid
                        .iter()
                        .map(|&s| fit_conditional(&panel.x, &panel.states, s, spec.h, 1, &spec.opts))
                        .collect();
                    spec.pairs
                        .iter()
                        .map(|&(a, b)| match (&fits[index(a)], &fits[index(b)]) {
                            (Ok(f1), Ok(f2)) => gc_test(f1, f2, &spec.sets).ok().map(|g| g.statistic >= spec.critical),
                            _ => None,
                        })
                        .collect()
                })
                .collect();
            for p in 0..np {
                let valid: Vec<bool> = outcomes.iter().filter_map(|o| o[p]).collect();
                let col = fi * np + p;
                failures[(si, col)] = (spec.n_reps - valid.len()) as f64;
                if !valid.is_empty() {
                    acceptance[(si, col)] = valid.iter().filter(|&&a| a).count() as f64 / valid.len() as f64;
                }
            }
        }
    }
    Ok(PowerTable {
        sizes: spec.sizes.clone(),
        families: spec.families.clone(),
        pairs: spec.pairs.clone(),
        acceptance,
        failures,
    })
}

#[derive(Clone, Debug)]
pub struct RsqSpec {
    pub n: usize,
    pub t: usize,
    pub r: usize,
    pub h: f64,
    pub opts: FitOptions,
    /// Multipliers c in G = S + c·v.
    pub noise_levels: Vec<f64>,
    pub include_constant: bool,
    pub n_seeds: usize,
    pub seed: u64,
}

impl RsqSpec {
    pub fn standard(n_seeds: usize, seed: u64) -> Self {
        RsqSpec {
            n: 100,
            t: 500,
            r: 1,
            h: 0.3,
            opts: study_fit_options(),
            noise_levels: vec![0.0, 0.1, 0.5, 1.0, 2.0],
            include_constant: true,
            n_seeds,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RsqRow {
    pub label: String,
    pub in_x: f64,
    pub in_c: f64,
    pub out_x: f64,
    pub out_c: f64,
    /// Periods dropped across seeds because a fit failed.
    pub excluded: usize,
}

fn rsq_pair(
    x: &DMatrix<f64>,
    c: &DMatrix<f64>,
    states: &[f64],
    source: &LoadingSource,
    r: usize,
) -> Result<([f64; 4], usize)> {
    let t = x.ncols();
    let half = t / 2;
    let ins = in_sample_common(x, states, source, &[r])?.remove(0);
    let a = rsq(x, &ins.common, Some(c), Scope::InSample, r)?;
    let train = x.columns(0, half).into_owned();
    let test = x.columns(half, t - half).into_owned();
    let oos = oos_common_components_multi(&train, &states[..half], &test, &states[half..], source, &[r])?.remove(0);
    let b = rsq(&test, &oos.common, Some(&c.columns(half, t - half).into_owned()), Scope::OutOfSample, r)?;
    Ok((
        [a.rsq_x, a.rsq_c.unwrap_or(f64::NAN), b.rsq_x, b.rsq_c.unwrap_or(f64::NAN)],
        a.excluded_times + b.excluded_times,
    ))
}

/// In- and out-of-sample R² under noisy observed states, averaged over seeds.
pub fn mc_rsq_study(spec: &RsqSpec) -> Result<Vec<RsqRow>> {
    if spec.n_seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let mut labels: Vec<String> = spec
        .noise_levels
        .iter()
        .map(|&c| if c == 0.0 { "G = S".to_string() } else { format!("G = S + {c}v") })
        .collect();
    if spec.include_constant {
        labels.push("constant".into());
    }
    let per_seed: Vec<Result<Vec<([f64; 4], usize)>>> = (0..spec.n_seeds as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = DgpConfig::cubic(spec.n, spec.t, derive_seed(spec.seed, k));
            let panel = generate_panel(&cfg)?;
            let v = state_noise(cfg.seed, 0, spec.t);
            let source = LoadingSource::StateVarying { h: spec.h, opts: spec.opts.clone() };
            let mut rows = Vec::new();
            for &c in &spec.noise_levels {
                let g: Vec<f64> = panel.true_states.iter().zip(&v).map(|(s, v)| s + c * v).collect();
                rows.push(rsq_pair(&panel.x, &panel.common, &g, &source, spec.r)?);
            }
            if spec.include_constant {
                rows.push(rsq_pair(&panel.x, &panel.common, &panel.states, &LoadingSource::Constant, spec.r)?);
            }
            Ok(rows)
        })
        .collect();
    let mut acc = vec![([0.0; 4], 0usize); labels.len()];
    for seed_rows in per_seed {
        for (a, (v, e)) in acc.iter_mut().zip(seed_rows?) {
            for j in 0..4 {
                a.0[j] += v[j] / spec.n_seeds as f64;
            }
            a.1 += e;
        }
    }
    Ok(labels
        .into_iter()
        .zip(acc)
        .map(|(label, (v, e))| RsqRow { label, in_x: v[0], in_c: v[1], out_x: v[2], out_c: v[3], excluded: e })
        .collect())
}

#[derive(Clone, Debug)]
pub struct CurveSpec {
    pub n: usize,
    pub t: usize,
    pub h: f64,
    pub opts: FitOptions,
    pub max_factors: usize,
    pub n_seeds: usize,
    pub seed: u64,
}

impl CurveSpec {
    pub fn standard(n_seeds: usize, seed: u64) -> Self {
        CurveSpec { n: 100, t: 500, h: 0.3, opts: study_fit_options(), max_factors: 8, n_seeds, seed }
    }
}

/// Out-of-sample R² at factor count k for the state model and for plain PCA.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub state_x: f64,
    pub state_c: f64,
    pub pca_x: f64,
    pub pca_c: f64,
}

pub fn two_state_config(n: usize, t: usize, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        t,
        r: 1,
        state_model: StateModel::TwoStateOu { theta: 1.0, mu: 0.2, sigma: 1.0 },
        loading_model: LoadingModel::ExpTwoState,
        error_model: ErrorModel::Iid,
        error_scale: 1.0,
        noise_on_state: 0.0,
        seed,
    }
}

/// Loadings driven by two states, estimation conditioning on the first only. One curve per seed.
pub fn mc_factor_count_curves(spec: &CurveSpec) -> Result<Vec<Vec<CurvePoint>>> {
    if spec.max_factors == 0 || spec.n_seeds == 0 {
        return Err(Error::InvalidArgument("need at least one factor and one seed".into()));
    }
    let ks: Vec<usize> = (1..=spec.max_factors).collect();
    (0..spec.n_seeds as u64)
        .into_par_iter()
        .map(|k| {
            let panel = generate_panel(&two_state_config(spec.n, spec.t, derive_seed(spec.seed, k)))?;
            let t = spec.t;
            let half = t / 2;
            let train = panel.x.columns(0, half).into_owned();
            let test = panel.x.columns(half, t - half).into_owned();
            let c_test = panel.common.columns(half, t - half).into_owned();
            let s = &panel.states;
            let state_src = LoadingSource::StateVarying { h: spec.h, opts: spec.opts.clone() };
            let st = oos_common_components_multi(&train, &s[..half], &test, &s[half..], &state_src, &ks)?;
            let pc = oos_common_components_multi(&train, &s[..half], &test, &s[half..], &LoadingSource::Constant, &ks)?;
            ks.iter()
                .zip(st.iter().zip(&pc))
                .map(|(&k, (a, b))| {
                    let ra = rsq(&test, &a.common, Some(&c_test), Scope::OutOfSample, k)?;
                    let rb = rsq(&test, &b.common, Some(&c_test), Scope::OutOfSample, k)?;
                    Ok(CurvePoint {
                        k,
                        state_x: ra.rsq_x,
                        state_c: ra.rsq_c.unwrap_or(f64::NAN),
                        pca_x: rb.rsq_x,
                        pca_c: rb.rsq_c.unwrap_or(f64::NAN),
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_normal_quantiles_is_small() {
        let norm = Normal::new(0.0, 1.0).unwrap();
        let q: Vec<f64> = (0..1000).map(|i| norm.inverse_cdf((i as f64 + 0.5) / 1000.0)).collect();
        assert!(ks_normal(&q) < 1e-3);
        let shifted: Vec<f64> = q.iter().map(|v| v + 1.0).collect();
        assert!(ks_normal(&shifted) > 0.3);
    }

    #[test]
    fn noiseless_rotation_identity() {
        let mut cfg = DgpConfig::cubic(40, 200, 3);
        cfg.error_scale = 0.0;
        cfg.loading_model = LoadingModel::Constant;
        let p = generate_panel(&cfg).unwrap();
        let fit = fit_conditional(&p.x, &p.states, 0.3, 0.5, 1, &FitOptions::default()).unwrap();
        let h = rotation_h(&p, &fit).unwrap().h_s;
        let hit = h.clone().try_inverse().unwrap().transpose();
        let lam = p.true_loading_at(0.3);
        assert!((&fit.loadings - lam * hit).norm() / 40f64.sqrt() < 1e-6);
        let f = unprojected_factors(&fit, fit.default_floor());
        for k in 0..200 {
            let d = f.values.row(k).transpose() - h.transpose() * p.factors.row(k).transpose();
            assert!(d.norm() < 1e-6);
        }
    }

    #[test]
    fn scalar_rotation_is_regression_slope() {
        let p = generate_panel(&DgpConfig::cubic(60, 300, 9)).unwrap();
        let fit = fit_conditional(&p.x, &p.states, 0.2, 0.4, 1, &FitOptions::default()).unwrap();
        let h = rotation_h(&p, &fit).unwrap().h_s[(0, 0)];
        // with H⁻¹ scalar, Λ̂ ≈ Λ/H; least squares slope of Λ̂ on Λ estimates 1/H
        let lam = p.true_loading_at(0.2);
        let slope = lam.column(0).dot(&fit.loadings.column(0)) / lam.column(0).norm_squared();
        assert!((slope * h - 1.0).abs() < 0.1, "{slope} {h}");
    }

    #[test]
    fn zero_noise_study_refuses() {
        let mut cfg = DgpConfig::cubic(20, 100, 1);
        cfg.error_scale = 0.0;
        let spec = DistributionSpec::new(0.3, 0.5, 100);
        assert!(matches!(mc_distribution_study(&cfg, &spec, Target::Loading), Err(Error::ZeroVariance)));
    }

    #[test]
    fn too_few_reps_rejected() {
        let spec = DistributionSpec::new(0.3, 0.5, 10);
        assert!(mc_distribution_study(&DgpConfig::cubic(20, 100, 1), &spec, Target::Factor).is_err());
    }
}

