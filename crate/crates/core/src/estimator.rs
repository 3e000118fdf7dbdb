//! Kernel-projected PCA at a state value, and what can be recovered from it.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{kernel_weights, top_r_symmetric_eig, KernelKind, KernelWeights};
use crate::scalar::{from_usize, lit, nan, to_f64, Real};

/// Which symmetric problem to decompose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EigenPath {
    /// The smaller of the N×N and T×T problems.
    #[default]
    Auto,
    /// The T×T matrix (Xˢ)ᵀXˢ.
    TimeSide,
    /// The N×N matrix XˢXˢᵀ.
    SeriesSide,
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub kernel: KernelKind,
    /// Fits with T(s) below this fail with `EffectiveSampleTooSmall`.
    pub min_effective_size: f64,
    /// Subtract each series' time mean before weighting. Off by default.
    pub demean: bool,
    pub path: EigenPath,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { kernel: KernelKind::Gaussian, min_effective_size: 10.0, demean: false, path: EigenPath::Auto }
    }
}

impl FitOptions {
    pub fn with_kernel(kernel: KernelKind) -> Self {
        FitOptions { kernel, ..Default::default() }
    }
}

/// Relative weight floor used when undoing the kernel projection.
pub const DEFAULT_FLOOR_REL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct ConditionalFit<T: Real> {
    pub s: T,
    pub h: T,
    pub r: usize,
    pub weights: KernelWeights<T>,
    /// F̂ˢ, T×r.
    pub projected_factors: DMatrix<T>,
    /// Λ̂(s), N×r.
    pub loadings: DMatrix<T>,
    pub eigenvalues: DVector<T>,
    pub effective_size: T,
    /// Panel the fit was computed from (demeaned if requested), N×T.
    pub data: DMatrix<T>,
    /// Xˢ = X·diag(w)^{1/2}.
    pub projected_data: DMatrix<T>,
    /// trace of (Xˢ)ᵀXˢ/(N·T(s)).
    pub total_variation: T,
    /// Eigenvalue gap at or below r was numerically zero.
    pub repeated_eigenvalue: bool,
}

impl<T: Real> ConditionalFit<T> {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn t(&self) -> usize {
        self.data.ncols()
    }

    /// V_r[j] over the total variation of the projected panel.
    pub fn variance_shares(&self) -> Vec<T> {
        self.eigenvalues.iter().map(|&v| v / self.total_variation).collect()
    }

    /// Default floor for unprojection, 1e-8 times the largest weight.
    pub fn default_floor(&self) -> T {
        self.weights.max_weight() * lit(DEFAULT_FLOOR_REL)
    }
}

#[derive(Clone, Debug)]
pub struct NormalizedFit<T: Real> {
    /// Λ̄ = Λ̂·V^{-1/2}.
    pub loadings_bar: DMatrix<T>,
    /// F̄ˢ = F̂ˢ·V^{1/2}.
    pub factors_bar: DMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct UnprojectedFactors<T: Real> {
    /// T×r; masked rows hold NaN.
    pub values: DMatrix<T>,
    pub valid: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct CommonComponentResult<T: Real> {
    /// Ĉ, N×T; columns outside `valid_times` hold NaN.
    pub common: DMatrix<T>,
    /// êˢ = Xˢ − Λ̂(F̂ˢ)ᵀ.
    pub residuals_projected: DMatrix<T>,
    /// ê = X − Ĉ on valid times, NaN elsewhere.
    pub residuals: DMatrix<T>,
    pub valid_times: Vec<usize>,
}

fn check_panel<T: Real>(x: &DMatrix<T>, states: &[T], r: usize) -> Result<()> {
    let (n, t) = x.shape();
    if states.len() != t {
        return Err(Error::DimensionMismatch(format!("panel has {t} periods but state has {}", states.len())));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    if n < r || t < r {
        return Err(Error::DimensionMismatch(format!("cannot fit {r} factors to a {n}x{t} panel")));
    }
    for j in 0..t {
        for i in 0..n {
            if !x[(i, j)].is_finite() {
                return Err(Error::NonFiniteValue { row: i, column: j });
            }
        }
    }
    Ok(())
}

fn demeaned<T: Real>(x: &DMatrix<T>) -> DMatrix<T> {
    let t = from_usize::<T>(x.ncols());
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let m = row.sum() / t;
        row.add_scalar_mut(-m);
    }
    out
}

/// Estimates Λ̂(s), F̂ˢ and V_rˢ.
pub fn fit_conditional<T: Real>(
    x: &DMatrix<T>,
    states: &[T],
    s: T,
    h: T,
    r: usize,
    opts: &FitOptions,
) -> Result<ConditionalFit<T>> {
    check_panel(x, states, r)?;
    let weights = kernel_weights(states, s, h, opts.kernel)?;
    fit_with_weights(x, weights, r, opts)
}

/// Same as [`fit_conditional`] with precomputed kernel weights.
pub fn fit_with_weights<T: Real>(
    x: &DMatrix<T>,
    weights: KernelWeights<T>,
    r: usize,
    opts: &FitOptions,
) -> Result<ConditionalFit<T>> {
    let (n, t) = x.shape();
    if weights.len() != t {
        return Err(Error::DimensionMismatch(format!("{} weights for {t} periods", weights.len())));
    }
    if n < r || t < r || r == 0 {
        return Err(Error::DimensionMismatch(format!("cannot fit {r} factors to a {n}x{t} panel")));
    }
    let ts = weights.effective_size;
    if !(to_f64(ts) >= opts.min_effective_size) || !(ts > T::zero()) {
        return Err(Error::EffectiveSampleTooSmall {
            state: to_f64(weights.state),
            effective: to_f64(ts),
            floor: opts.min_effective_size,
        });
    }
    let data = if opts.demean { demeaned(x) } else { x.clone() };
    let mut xs = data.clone();
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        col *= weights.weights[j].sqrt();
    }
    let nf = from_usize::<T>(n);
    let scale = nf * ts;

    let time_side = match opts.path {
        EigenPath::TimeSide => true,
        EigenPath::SeriesSide => false,
        EigenPath::Auto => t <= n,
    };

    let (mut factors, mut loadings, values, repeated, total) = if time_side {
        let m = xs.tr_mul(&xs) / scale;
        let total = m.trace();
        let e = top_r_symmetric_eig(&m, r)?;
        check_positive(&e.values)?;
        let f = &e.vectors * ts.sqrt();
        let l = &xs * &f / ts;
        (f, l, e.values, e.repeated, total)
    } else {
        let m = &xs * xs.transpose() / scale;
        let total = m.trace();
        let e = top_r_symmetric_eig(&m, r)?;
        check_positive(&e.values)?;
        // Λ̂ = √N·W·V^{1/2}, F̂ˢ = (Xˢ)ᵀW·V^{-1/2}/√N
        let mut l = e.vectors.clone();
        let mut w = e.vectors.clone();
        for j in 0..r {
            let v = e.values[j];
            l.column_mut(j).scale_mut(nf.sqrt() * v.sqrt());
            w.column_mut(j).scale_mut(T::one() / (v.sqrt() * nf.sqrt()));
        }
        let f = xs.tr_mul(&w);
        (f, l, e.values, e.repeated, total)
    };

    // One sign convention for both paths: largest-magnitude loading positive.
    for j in 0..r {
        let i = loadings.column(j).iamax();
        if loadings[(i, j)] < T::zero() {
            loadings.column_mut(j).neg_mut();
            factors.column_mut(j).neg_mut();
        }
    }
    if repeated {
        log::warn!("near-repeated eigenvalues at s = {}", to_f64(weights.state));
    }

    Ok(ConditionalFit {
        s: weights.state,
        h: weights.bandwidth,
        r,
        effective_size: ts,
        weights,
        projected_factors: factors,
        loadings,
        eigenvalues: values,
        data,
        projected_data: xs,
        total_variation: total,
        repeated_eigenvalue: repeated,
    })
}

fn check_positive<T: Real>(values: &DVector<T>) -> Result<()> {
    for (j, &v) in values.iter().enumerate() {
        if !(v > T::zero()) {
            return Err(Error::SingularEigenvalue { index: j, value: to_f64(v) });
        }
    }
    Ok(())
}

pub fn unprojected_factors<T: Real>(fit: &ConditionalFit<T>, floor: T) -> UnprojectedFactors<T> {
    let (t, r) = fit.projected_factors.shape();
    let mut values = DMatrix::from_element(t, r, nan::<T>());
    let mut valid = vec![false; t];
    for (k, &w) in fit.weights.weights.iter().enumerate() {
        if w >= floor && w > T::zero() {
            valid[k] = true;
            let root = w.sqrt();
            for j in 0..r {
                values[(k, j)] = fit.projected_factors[(k, j)] / root;
            }
        }
    }
    UnprojectedFactors { values, valid }
}

pub fn common_components<T: Real>(fit: &ConditionalFit<T>, floor: T) -> CommonComponentResult<T> {
    let (n, t) = fit.data.shape();
    let residuals_projected = &fit.projected_data - &fit.loadings * fit.projected_factors.transpose();
    let f = unprojected_factors(fit, floor);
    let mut common = DMatrix::from_element(n, t, nan::<T>());
    let mut residuals = DMatrix::from_element(n, t, nan::<T>());
    let mut valid_times = Vec::new();
    for k in 0..t {
        if !f.valid[k] {
            continue;
        }
        valid_times.push(k);
        let c = &fit.loadings * f.values.row(k).transpose();
        for i in 0..n {
            common[(i, k)] = c[i];
            residuals[(i, k)] = fit.data[(i, k)] - c[i];
        }
    }
    CommonComponentResult { common, residuals_projected, residuals, valid_times }
}

pub fn normalize_fit<T: Real>(fit: &ConditionalFit<T>) -> Result<NormalizedFit<T>> {
    check_positive(&fit.eigenvalues)?;
    let mut loadings_bar = fit.loadings.clone();
    let mut factors_bar = fit.projected_factors.clone();
    for (j, &v) in fit.eigenvalues.iter().enumerate() {
        let root = v.sqrt();
        loadings_bar.column_mut(j).unscale_mut(root);
        factors_bar.column_mut(j).scale_mut(root);
    }
    Ok(NormalizedFit { loadings_bar, factors_bar })
}

#[derive(Debug)]
pub struct SweepPoint<T: Real> {
    pub s: T,
    pub fit: Result<ConditionalFit<T>>,
}

impl<T: Real> SweepPoint<T> {
    pub fn variance_shares(&self) -> Option<Vec<T>> {
        self.fit.as_ref().ok().map(|f| f.variance_shares())
    }
}

/// One fit per grid point; failures are kept in place and do not stop the sweep.
pub fn state_sweep<T: Real>(
    x: &DMatrix<T>,
    states: &[T],
    grid: &[T],
    h: T,
    r: usize,
    opts: &FitOptions,
) -> Result<Vec<SweepPoint<T>>> {
    check_panel(x, states, r)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty state grid".into()));
    }
    Ok(grid
        .par_iter()
        .map(|&s| SweepPoint { s, fit: fit_conditional(x, states, s, h, r, opts) })
        .collect())
}
