use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simlab::rng::{substream, Component};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StateModel {
    Ou { theta: f64, mu: f64, sigma: f64 },
    Uniform01,
    /// Two independent OU states with the same parameters; loadings use both, fits see the first.
    TwoStateOu { theta: f64, mu: f64, sigma: f64 },
}

impl StateModel {
    pub fn ou_default() -> Self {
        StateModel::Ou { theta: 1.0, mu: 0.2, sigma: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LoadingModel {
    /// Λ0 + s/2·Λ1 + s²/4·Λ2 + s³/8·Λ3.
    Cubic,
    Constant,
    /// Λ1 + 1(s ≤ s0)(s − s0)·Λ2.
    BreakLinear { s0: f64 },
    /// Adds 1(s ≤ s0)(s − s0)²·Λ3 to the linear break.
    BreakQuadratic { s0: f64 },
    /// exp(Λ1·S1 + Λ2·S2) elementwise.
    ExpTwoState,
}

impl LoadingModel {
    fn n_coefs(self) -> usize {
        match self {
            LoadingModel::Cubic => 4,
            LoadingModel::Constant => 1,
            LoadingModel::BreakLinear { .. } | LoadingModel::ExpTwoState => 2,
            LoadingModel::BreakQuadratic { .. } => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LoadingModel::Cubic => "cubic",
            LoadingModel::Constant => "constant",
            LoadingModel::BreakLinear { .. } => "linear",
            LoadingModel::BreakQuadratic { .. } => "quadratic",
            LoadingModel::ExpTwoState => "exp_two_state",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ErrorModel {
    Iid,
    /// σ_i·v_it with σ_i ~ U(low, high).
    Heteroskedastic { low: f64, high: f64 },
    /// N(0, Σ) across series with Σ_ij = rho^|i−j|.
    CrossDependent { rho: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub t: usize,
    pub r: usize,
    pub state_model: StateModel,
    pub loading_model: LoadingModel,
    pub error_model: ErrorModel,
    /// Multiplies the idiosyncratic errors; 0 gives a noiseless panel.
    pub error_scale: f64,
    /// c in G = S + c·v.
    pub noise_on_state: f64,
    pub seed: u64,
}

impl DgpConfig {
    /// One factor, cubic loadings, OU state, iid errors.
    pub fn cubic(n: usize, t: usize, seed: u64) -> Self {
        DgpConfig {
            n,
            t,
            r: 1,
            state_model: StateModel::ou_default(),
            loading_model: LoadingModel::Cubic,
            error_model: ErrorModel::Iid,
            error_scale: 1.0,
            noise_on_state: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.n < self.r || self.t < self.r {
            return Err(Error::InvalidArgument(format!("invalid sizes N={}, T={}, r={}", self.n, self.t, self.r)));
        }
        if !(self.error_scale >= 0.0) || !(self.noise_on_state >= 0.0) {
            return Err(Error::InvalidArgument("scales must be nonnegative".into()));
        }
        match self.state_model {
            StateModel::Ou { theta, sigma, .. } | StateModel::TwoStateOu { theta, sigma, .. } => {
                if !(theta > 0.0) || !(sigma > 0.0) {
                    return Err(Error::InvalidArgument("OU theta and sigma must be positive".into()));
                }
            }
            StateModel::Uniform01 => {}
        }
        match self.error_model {
            ErrorModel::Heteroskedastic { low, high } if !(0.0 < low && low <= high) => {
                Err(Error::InvalidArgument("need 0 < low <= high".into()))
            }
            ErrorModel::CrossDependent { rho } if !(rho.abs() < 1.0) => {
                Err(Error::InvalidArgument("need |rho| < 1".into()))
            }
            _ => {
                let two = matches!(self.state_model, StateModel::TwoStateOu { .. });
                let exp = matches!(self.loading_model, LoadingModel::ExpTwoState);
                if two != exp {
                    return Err(Error::InvalidArgument("exp_two_state loadings need the two-state OU model".into()));
                }
                Ok(())
            }
        }
    }
}

/// Loading coefficients together with the functional form.
#[derive(Clone, Debug)]
pub struct LoadingFunction {
    pub model: LoadingModel,
    /// Coefficient matrices, each N×r.
    pub coefs: Vec<DMatrix<f64>>,
}

impl LoadingFunction {
    /// Λ(s), N×r. For the two-state model the second state is taken as zero; use [`Self::at_pair`].
    pub fn at(&self, s: f64) -> DMatrix<f64> {
        self.at_pair(s, 0.0)
    }

    pub fn at_pair(&self, s: f64, s2: f64) -> DMatrix<f64> {
        let c = &self.coefs;
        match self.model {
            LoadingModel::Cubic => &c[0] + &c[1] * (s / 2.0) + &c[2] * (s * s / 4.0) + &c[3] * (s * s * s / 8.0),
            LoadingModel::Constant => c[0].clone(),
            LoadingModel::BreakLinear { s0 } => {
                if s <= s0 {
                    &c[0] + &c[1] * (s - s0)
                } else {
                    c[0].clone()
                }
            }
            LoadingModel::BreakQuadratic { s0 } => {
                if s <= s0 {
                    &c[0] + &c[1] * (s - s0) + &c[2] * ((s - s0) * (s - s0))
                } else {
                    c[0].clone()
                }
            }
            LoadingModel::ExpTwoState => (&c[0] * s + &c[1] * s2).map(f64::exp),
        }
    }
}

/// A simulated panel with every ingredient kept.
#[derive(Clone, Debug)]
pub struct SimPanel {
    pub x: DMatrix<f64>,
    /// State the estimator sees, G = S + c·v.
    pub states: Vec<f64>,
    pub true_states: Vec<f64>,
    pub second_states: Option<Vec<f64>>,
    /// T×r.
    pub factors: DMatrix<f64>,
    pub loadings: LoadingFunction,
    pub common: DMatrix<f64>,
    pub errors: DMatrix<f64>,
}

impl SimPanel {
    pub fn true_loading_at(&self, s: f64) -> DMatrix<f64> {
        self.loadings.at(s)
    }

    /// Λ(S_t) at period t, using both states when present.
    pub fn true_loading_at_time(&self, t: usize) -> DMatrix<f64> {
        let s2 = self.second_states.as_ref().map_or(0.0, |v| v[t]);
        self.loadings.at_pair(self.true_states[t], s2)
    }
}

/// Exact unit-step transition of dS = θ(μ − S)dt + σdW, started from the stationary law.
pub fn simulate_ou_state<R: Rng>(t: usize, theta: f64, mu: f64, sigma: f64, rng: &mut R) -> Vec<f64> {
    let decay = (-theta).exp();
    let step_sd = sigma * ((1.0 - (-2.0 * theta).exp()) / (2.0 * theta)).sqrt();
    let stat_sd = sigma / (2.0 * theta).sqrt();
    let mut out = Vec::with_capacity(t);
    if t == 0 {
        return out;
    }
    let z: f64 = rng.sample(StandardNormal);
    let mut s = mu + stat_sd * z;
    out.push(s);
    for _ in 1..t {
        let z: f64 = rng.sample(StandardNormal);
        s = mu + decay * (s - mu) + step_sd * z;
        out.push(s);
    }
    out
}

fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn generate_panel(cfg: &DgpConfig) -> Result<SimPanel> {
    generate_replication(cfg, 0, false)
}

/// Panel for replication `rep`. With `hold_fixed`, states, loadings and factors come from
/// replication 0 and only the errors are redrawn.
pub fn generate_replication(cfg: &DgpConfig, rep: u64, hold_fixed: bool) -> Result<SimPanel> {
    cfg.validate()?;
    let (n, t, r) = (cfg.n, cfg.t, cfg.r);
    let fixed_rep = if hold_fixed { 0 } else { rep };
    let seed = cfg.seed;

    let mut srng = substream(seed, fixed_rep, Component::State);
    let (true_states, second_states) = match cfg.state_model {
        StateModel::Ou { theta, mu, sigma } => (simulate_ou_state(t, theta, mu, sigma, &mut srng), None),
        StateModel::Uniform01 => {
            let u = Uniform::new(0.0, 1.0);
            ((0..t).map(|_| srng.sample(u)).collect(), None)
        }
        StateModel::TwoStateOu { theta, mu, sigma } => {
            let mut s2rng = substream(seed, fixed_rep, Component::SecondState);
            (
                simulate_ou_state(t, theta, mu, sigma, &mut srng),
                Some(simulate_ou_state(t, theta, mu, sigma, &mut s2rng)),
            )
        }
    };

    let mut lrng = substream(seed, fixed_rep, Component::Loadings);
    let coefs = (0..cfg.loading_model.n_coefs()).map(|_| normal_matrix(n, r, &mut lrng)).collect();
    let loadings = LoadingFunction { model: cfg.loading_model, coefs };

    let mut frng = substream(seed, fixed_rep, Component::Factors);
    let factors = normal_matrix(t, r, &mut frng);

    let mut erng = substream(seed, rep, Component::Errors);
    let mut errors = DMatrix::zeros(n, t);
    match cfg.error_model {
        ErrorModel::Iid => {
            for v in errors.iter_mut() {
                *v = erng.sample(StandardNormal);
            }
        }
        ErrorModel::Heteroskedastic { low, high } => {
            let u = Uniform::new_inclusive(low, high);
            let sd: Vec<f64> = (0..n).map(|_| erng.sample(u)).collect();
            for k in 0..t {
                for i in 0..n {
                    let z: f64 = erng.sample(StandardNormal);
                    errors[(i, k)] = sd[i] * z;
                }
            }
        }
        ErrorModel::CrossDependent { rho } => {
            // AR(1) recursion across the cross-section has exactly the Toeplitz covariance rho^|i-j|.
            let innov = (1.0 - rho * rho).sqrt();
            for k in 0..t {
                let mut prev: f64 = erng.sample(StandardNormal);
                errors[(0, k)] = prev;
                for i in 1..n {
                    let z: f64 = erng.sample(StandardNormal);
                    prev = rho * prev + innov * z;
                    errors[(i, k)] = prev;
                }
            }
        }
    }
    errors *= cfg.error_scale;

    let mut common = DMatrix::zeros(n, t);
    for k in 0..t {
        let s2 = second_states.as_ref().map_or(0.0, |v: &Vec<f64>| v[k]);
        let lam = loadings.at_pair(true_states[k], s2);
        let c = lam * factors.row(k).transpose();
        common.set_column(k, &c);
    }
    let x = &common + &errors;

    let states = if cfg.noise_on_state > 0.0 {
        let mut vrng = substream(seed, fixed_rep, Component::StateNoise);
        true_states
            .iter()
            .map(|&s| {
                let v: f64 = vrng.sample(StandardNormal);
                s + cfg.noise_on_state * v
            })
            .collect()
    } else {
        true_states.clone()
    };

    Ok(SimPanel { x, states, true_states, second_states, factors, loadings, common, errors })
}

/// Noise draws v_t for the observed-state variants, shared across noise levels.
pub fn state_noise(seed: u64, rep: u64, t: usize) -> Vec<f64> {
    let mut vrng = substream(seed, rep, Component::StateNoise);
    (0..t).map(|_| vrng.sample(StandardNormal)).collect()
}
