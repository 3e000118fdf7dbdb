use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::estimator::{CommonComponentResult, ConditionalFit};
use crate::inference::sparsity::PairSet;
use crate::scalar::{from_usize, lit, Real};

#[derive(Clone, Debug)]
pub struct FactorCov<T: Real> {
    /// Π̂_t.
    pub pi_hat: DMatrix<T>,
}

#[derive(Clone, Debug)]
pub struct LoadingCov<T: Real> {
    /// Θ̂_i.
    pub theta_hat: DMatrix<T>,
}

#[derive(Clone, Copy, Debug)]
pub struct CommonSE<T: Real> {
    pub v_hat: T,
    pub w_hat: T,
    pub se: T,
}

pub(crate) fn symmetrize<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * lit::<T>(0.5)
}

/// (1/N)·Σ_{(i,j)∈Ω} Λ_i Λ_jᵀ e_i e_j.
pub fn cross_section_meat<T: Real>(loadings: &DMatrix<T>, resid: DVectorView<'_, T>, set: &PairSet) -> DMatrix<T> {
    let (n, r) = loadings.shape();
    let mut acc = DMatrix::zeros(r, r);
    set.for_each(n, |i, j| {
        let w = resid[i] * resid[j];
        if w != T::zero() {
            for a in 0..r {
                let la = loadings[(i, a)] * w;
                for b in 0..r {
                    acc[(a, b)] += la * loadings[(j, b)];
                }
            }
        }
    });
    acc / from_usize::<T>(n)
}

fn inverse_eigenvalues<T: Real>(values: &DVector<T>) -> Result<DMatrix<T>> {
    let mut d = DMatrix::zeros(values.len(), values.len());
    for (j, &v) in values.iter().enumerate() {
        if !(v > T::zero()) {
            return Err(Error::SingularEigenvalue { index: j, value: crate::scalar::to_f64(v) });
        }
        d[(j, j)] = T::one() / v;
    }
    Ok(d)
}

/// Π̂_t from loadings, eigenvalues and the period-t residual cross-section.
pub fn factor_cov_from_parts<T: Real>(
    loadings: &DMatrix<T>,
    eigenvalues: &DVector<T>,
    resid_t: DVectorView<'_, T>,
    set: &PairSet,
) -> Result<FactorCov<T>> {
    if resid_t.len() != loadings.nrows() {
        return Err(Error::DimensionMismatch("residual column length differs from N".into()));
    }
    let vinv = inverse_eigenvalues(eigenvalues)?;
    let meat = cross_section_meat(loadings, resid_t, set);
    Ok(FactorCov { pi_hat: symmetrize(&(&vinv * meat * &vinv)) })
}

/// Θ̂_i = (T·h/T(s)²)·Σ_{(t,u)∈Ω} F̂ˢ_t F̂ˢ_uᵀ êˢ_it êˢ_iu.
pub fn loading_cov_from_parts<T: Real>(
    projected_factors: &DMatrix<T>,
    resid_i: &[T],
    h: T,
    effective_size: T,
    set: &PairSet,
) -> Result<LoadingCov<T>> {
    let (nt, r) = projected_factors.shape();
    if resid_i.len() != nt {
        return Err(Error::DimensionMismatch("residual row length differs from T".into()));
    }
    let mut acc = DMatrix::zeros(r, r);
    set.for_each(nt, |k, u| {
        let w = resid_i[k] * resid_i[u];
        if w != T::zero() {
            for a in 0..r {
                let fa = projected_factors[(k, a)] * w;
                for b in 0..r {
                    acc[(a, b)] += fa * projected_factors[(u, b)];
                }
            }
        }
    });
    let scale = from_usize::<T>(nt) * h / (effective_size * effective_size);
    Ok(LoadingCov { theta_hat: symmetrize(&(acc * scale)) })
}

/// Combines V̂ and Ŵ into √(V̂/N + Ŵ/(T·h)).
pub fn common_se_from_parts<T: Real>(
    loading_i: DVectorView<'_, T>,
    gram_inv: &DMatrix<T>,
    meat_t: &DMatrix<T>,
    factor_t: DVectorView<'_, T>,
    theta_i: &DMatrix<T>,
    n: usize,
    nt: usize,
    h: T,
) -> CommonSE<T> {
    let a = gram_inv * loading_i;
    let v_hat = (a.transpose() * meat_t * &a)[(0, 0)];
    let w_hat = (factor_t.transpose() * theta_i * factor_t)[(0, 0)];
    let var = v_hat / from_usize::<T>(n) + w_hat / (from_usize::<T>(nt) * h);
    CommonSE { v_hat, w_hat, se: var.max(T::zero()).sqrt() }
}

/// Inverse of Λ̂ᵀΛ̂/N, refusing condition numbers above 1e12.
pub fn loading_gram_inverse<T: Real>(loadings: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = from_usize::<T>(loadings.nrows());
    let gram = loadings.tr_mul(loadings) / n;
    let eig = nalgebra::SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > T::zero()) || max / min > lit(1e12) {
        return Err(Error::SingularLoadingGram);
    }
    gram.try_inverse().map(|g| symmetrize(&g)).ok_or(Error::SingularLoadingGram)
}

fn check_valid_time<T: Real>(cc: &CommonComponentResult<T>, t: usize) -> Result<()> {
    if cc.valid_times.binary_search(&t).is_err() {
        return Err(Error::InvalidArgument(format!("period {t} has kernel weight below the floor")));
    }
    Ok(())
}

pub fn estimate_factor_cov<T: Real>(
    fit: &ConditionalFit<T>,
    cc: &CommonComponentResult<T>,
    t: usize,
    set: &PairSet,
) -> Result<FactorCov<T>> {
    check_valid_time(cc, t)?;
    factor_cov_from_parts(&fit.loadings, &fit.eigenvalues, cc.residuals.column(t), set)
}

pub fn estimate_loading_cov<T: Real>(
    fit: &ConditionalFit<T>,
    cc: &CommonComponentResult<T>,
    i: usize,
    set: &PairSet,
) -> Result<LoadingCov<T>> {
    if i >= fit.n() {
        return Err(Error::InvalidArgument(format!("series {i} out of range")));
    }
    let row: Vec<T> = cc.residuals_projected.row(i).iter().copied().collect();
    loading_cov_from_parts(&fit.projected_factors, &row, fit.h, fit.effective_size, set)
}

pub fn estimate_common_se<T: Real>(
    fit: &ConditionalFit<T>,
    cc: &CommonComponentResult<T>,
    i: usize,
    t: usize,
    sets: &crate::inference::SparsitySets,
) -> Result<CommonSE<T>> {
    check_valid_time(cc, t)?;
    let gram_inv = loading_gram_inverse(&fit.loadings)?;
    let meat = cross_section_meat(&fit.loadings, cc.residuals.column(t), &sets.cross_section_at_t);
    let theta = estimate_loading_cov(fit, cc, i, &sets.time_within_series)?;
    let root = fit.weights.weights[t].sqrt();
    let f_t: DVector<T> = fit.projected_factors.row(t).transpose() / root;
    Ok(common_se_from_parts(
        fit.loadings.row(i).transpose().as_view(),
        &gram_inv,
        &meat,
        f_t.as_view(),
        &theta.theta_hat,
        fit.n(),
        fit.t(),
        fit.h,
    ))
}
