use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Leading eigenpairs of a symmetric matrix, in descending order.
#[derive(Clone, Debug)]
pub struct EigenResult<T: Real> {
    pub values: DVector<T>,
    /// One column per eigenvalue.
    pub vectors: DMatrix<T>,
    /// Set when two of the returned eigenvalues, or the last returned and the next, nearly coincide.
    pub repeated: bool,
}

const MAX_SWEEPS: usize = 10_000;

/// Flips each column so its entry of largest magnitude is positive (first such entry on ties).
pub fn fix_column_signs<T: Real>(v: &mut DMatrix<T>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        let mut best_abs = T::zero();
        for (i, x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if col[best] < T::zero() {
            col.neg_mut();
        }
    }
}

pub fn top_r_symmetric_eig<T: Real>(m: &DMatrix<T>, r: usize) -> Result<EigenResult<T>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!("matrix is {}x{}", n, m.ncols())));
    }
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("cannot extract {r} eigenpairs from order {n}")));
    }
    let scale = m.iter().fold(T::zero(), |a, x| a.max(x.abs()));
    if !scale.is_finite() {
        return Err(Error::NotConverged);
    }
    let asym = (m - m.transpose()).iter().fold(T::zero(), |a, x| a.max(x.abs()));
    if asym > lit::<T>(1e-8) * scale.max(T::one()) {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    let sym = (m + m.transpose()) * lit::<T>(0.5);
    let eig = SymmetricEigen::try_new(sym, T::default_epsilon(), MAX_SWEEPS).ok_or(Error::NotConverged)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));

    let values = DVector::from_iterator(r, order.iter().take(r).map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, r);
    for (j, &k) in order.iter().take(r).enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(k));
    }
    fix_column_signs(&mut vectors);

    let top = values[0].abs();
    let tol = lit::<T>(1e-10) * top;
    let upto = (r + 1).min(n);
    let repeated = top > T::zero()
        && (1..upto).any(|j| (eig.eigenvalues[order[j - 1]] - eig.eigenvalues[order[j]]).abs() < tol);

    Ok(EigenResult { values, vectors, repeated })
}
