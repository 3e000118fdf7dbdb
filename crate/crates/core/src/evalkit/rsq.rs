use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    InSample,
    OutOfSample,
}

#[derive(Clone, Debug, Serialize)]
pub struct RsqReport {
    pub rsq_x: f64,
    pub rsq_c: Option<f64>,
    pub scope: Scope,
    pub n_factors: usize,
    /// Periods left out because the fitted common component is missing there.
    pub excluded_times: usize,
}

/// 1 − Σ(X − Ĉ)²/ΣX² and, when the truth is known, 1 − Σ(C − Ĉ)²/ΣC². Columns of Ĉ containing
/// NaN are skipped and counted.
pub fn rsq(
    x: &DMatrix<f64>,
    c_hat: &DMatrix<f64>,
    c_true: Option<&DMatrix<f64>>,
    scope: Scope,
    n_factors: usize,
) -> Result<RsqReport> {
    if x.shape() != c_hat.shape() || c_true.is_some_and(|c| c.shape() != x.shape()) {
        return Err(Error::DimensionMismatch("R² inputs differ in shape".into()));
    }
    let (mut num_x, mut den_x, mut num_c, mut den_c) = (0.0, 0.0, 0.0, 0.0);
    let mut excluded = 0;
    for k in 0..x.ncols() {
        if c_hat.column(k).iter().any(|v| v.is_nan()) {
            excluded += 1;
            continue;
        }
        for i in 0..x.nrows() {
            let ch = c_hat[(i, k)];
            num_x += (x[(i, k)] - ch).powi(2);
            den_x += x[(i, k)].powi(2);
            if let Some(c) = c_true {
                num_c += (c[(i, k)] - ch).powi(2);
                den_c += c[(i, k)].powi(2);
            }
        }
    }
    if den_x == 0.0 || (c_true.is_some() && den_c == 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(RsqReport {
        rsq_x: 1.0 - num_x / den_x,
        rsq_c: c_true.map(|_| 1.0 - num_c / den_c),
        scope,
        n_factors,
        excluded_times: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(rsq(&x, &c, None, Scope::InSample, 1).unwrap().rsq_x, 0.5);
        assert_eq!(rsq(&x, &x, Some(&x), Scope::InSample, 1).unwrap().rsq_x, 1.0);
        assert_eq!(rsq(&x, &DMatrix::zeros(2, 2), None, Scope::InSample, 1).unwrap().rsq_x, 0.0);
    }

    #[test]
    fn zero_denominator() {
        let z = DMatrix::zeros(2, 2);
        assert!(matches!(rsq(&z, &z, None, Scope::InSample, 1), Err(Error::ZeroDenominator)));
    }

    #[test]
    fn nan_columns_are_excluded() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 5.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        let r = rsq(&x, &c, None, Scope::OutOfSample, 1).unwrap();
        assert_eq!((r.rsq_x, r.excluded_times), (1.0, 1));
    }
}
