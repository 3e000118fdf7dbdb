use nalgebra::{DMatrix, DVector, DVectorView};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{fit_conditional, FitOptions};
use crate::numerics::top_r_symmetric_eig;

/// Where loadings for a period come from.
#[derive(Clone, Debug)]
pub enum LoadingSource {
    /// Refit Λ̂(S_t) at each period's state.
    StateVarying { h: f64, opts: FitOptions },
    /// One set of PCA loadings for every period.
    Constant,
}

/// Plain PCA loadings Λ̂ = √N·W·V^{1/2} from the top eigenvectors of XXᵀ/(NT).
pub fn pca_loadings(x: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let (n, t) = x.shape();
    let m = x * x.transpose() / (n * t) as f64;
    let e = top_r_symmetric_eig(&m, r)?;
    let mut l = e.vectors;
    for j in 0..r {
        if !(e.values[j] > 0.0) {
            return Err(Error::SingularEigenvalue { index: j, value: e.values[j] });
        }
        l.column_mut(j).scale_mut((n as f64).sqrt() * e.values[j].sqrt());
    }
    Ok(l)
}

/// Cross-sectional projection L(LᵀL)⁻¹Lᵀx.
pub fn project(loadings: &DMatrix<f64>, x_t: DVectorView<'_, f64>) -> Result<DVector<f64>> {
    let gram = loadings.tr_mul(loadings);
    let rhs = loadings.tr_mul(&x_t);
    let coef = gram.cholesky().ok_or(Error::SingularLoadingGram)?.solve(&rhs);
    Ok(loadings * coef)
}

/// Common components of the test columns, each projected on loadings estimated from the training
/// columns alone. Entries are NaN at periods where the fit failed.
#[derive(Clone, Debug)]
pub struct OosResult {
    pub common: DMatrix<f64>,
    pub failed_times: Vec<usize>,
}

/// Projections for several factor counts at once; loadings are nested so one fit with the
/// largest count serves all of them.
pub fn oos_common_components_multi(
    train_x: &DMatrix<f64>,
    train_states: &[f64],
    test_x: &DMatrix<f64>,
    test_states: &[f64],
    source: &LoadingSource,
    ks: &[usize],
) -> Result<Vec<OosResult>> {
    let n = train_x.nrows();
    if test_x.nrows() != n {
        return Err(Error::DimensionMismatch("train and test panels differ in N".into()));
    }
    if test_states.len() != test_x.ncols() || train_states.len() != train_x.ncols() {
        return Err(Error::DimensionMismatch("state length differs from panel length".into()));
    }
    let kmax = *ks.iter().max().ok_or_else(|| Error::InvalidArgument("no factor counts".into()))?;
    if kmax == 0 {
        return Err(Error::InvalidArgument("factor count must be at least 1".into()));
    }
    let tt = test_x.ncols();

    let columns: Vec<Option<Vec<DVector<f64>>>> = match source {
        LoadingSource::Constant => {
            let l = pca_loadings(train_x, kmax)?;
            let per_k: Vec<DMatrix<f64>> = ks.iter().map(|&k| l.columns(0, k).into_owned()).collect();
            (0..tt)
                .map(|t| per_k.iter().map(|lk| project(lk, test_x.column(t))).collect::<Result<Vec<_>>>().ok())
                .collect()
        }
        LoadingSource::StateVarying { h, opts } => (0..tt)
            .into_par_iter()
            .map(|t| {
                let fit = fit_conditional(train_x, train_states, test_states[t], *h, kmax, opts).ok()?;
                ks.iter()
                    .map(|&k| project(&fit.loadings.columns(0, k).into_owned(), test_x.column(t)))
                    .collect::<Result<Vec<_>>>()
                    .ok()
            })
            .collect(),
    };

    let mut out: Vec<OosResult> =
        ks.iter().map(|_| OosResult { common: DMatrix::from_element(n, tt, f64::NAN), failed_times: vec![] }).collect();
    for (t, col) in columns.into_iter().enumerate() {
        match col {
            Some(cs) => {
                for (res, c) in out.iter_mut().zip(cs) {
                    res.common.set_column(t, &c);
                }
            }
            None => out.iter_mut().for_each(|res| res.failed_times.push(t)),
        }
    }
    Ok(out)
}

/// Ĉ_t = Λ̂_t(Λ̂_tᵀΛ̂_t)⁻¹Λ̂_tᵀX_t with Λ̂_t fitted on the training panel at the test state.
pub fn oos_common_component(
    train_x: &DMatrix<f64>,
    train_states: &[f64],
    test_x: &DMatrix<f64>,
    test_states: &[f64],
    h: f64,
    r: usize,
    opts: &FitOptions,
) -> Result<OosResult> {
    let source = LoadingSource::StateVarying { h, opts: opts.clone() };
    let mut v = oos_common_components_multi(train_x, train_states, test_x, test_states, &source, &[r])?;
    Ok(v.remove(0))
}

/// In-sample common components: every period projected on loadings fitted to the full panel.
pub fn in_sample_common(
    x: &DMatrix<f64>,
    states: &[f64],
    source: &LoadingSource,
    ks: &[usize],
) -> Result<Vec<OosResult>> {
    oos_common_components_multi(x, states, x, states, source, ks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::common_components;
    use crate::numerics::KernelKind;

    fn panel(n: usize, t: usize) -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_fn(n, t, |i, k| ((i * 7 + k * 3) as f64).sin() + 0.1 * ((i + 2 * k) as f64).cos());
        let s = (0..t).map(|k| (k as f64 * 0.21).sin()).collect();
        (x, s)
    }

    #[test]
    fn in_sample_matches_fitted_common_component() {
        let (x, s) = panel(12, 60);
        let opts = FitOptions { kernel: KernelKind::Gaussian, min_effective_size: 1.0, ..Default::default() };
        let source = LoadingSource::StateVarying { h: 0.4, opts: opts.clone() };
        let ins = in_sample_common(&x, &s, &source, &[2]).unwrap().remove(0);
        for t in [0usize, 17, 59] {
            let fit = fit_conditional(&x, &s, s[t], 0.4, 2, &opts).unwrap();
            let cc = common_components(&fit, fit.default_floor());
            for i in 0..12 {
                assert!((cc.common[(i, t)] - ins.common[(i, t)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn noiseless_projection_recovers_x() {
        let l = DMatrix::from_fn(10, 1, |i, _| 1.0 + i as f64 * 0.1);
        let f = DMatrix::from_fn(1, 40, |_, k| (k as f64).cos());
        let x = &l * &f;
        let s = vec![0.0; 40];
        let opts = FitOptions { min_effective_size: 1.0, ..Default::default() };
        let r = oos_common_component(&x, &s, &x, &s, 0.5, 1, &opts).unwrap();
        assert!((&r.common - &x).amax() < 1e-8);
    }

    #[test]
    fn failures_are_marked() {
        let (x, s) = panel(8, 30);
        let opts = FitOptions { min_effective_size: 5.0, kernel: KernelKind::Uniform, ..Default::default() };
        let test_s = vec![0.0, 40.0];
        let r = oos_common_component(&x, &s, &x.columns(0, 2).into_owned(), &test_s, 0.3, 1, &opts).unwrap();
        assert_eq!(r.failed_times, vec![1]);
        assert!(r.common[(0, 1)].is_nan());
    }
}
