use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::{fit_conditional, normalize_fit, ConditionalFit, FitOptions};
use crate::inference::covariance::symmetrize;
use crate::inference::sparsity::SparsitySets;
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Which x̂ terms enter the bias.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum BiasTerms {
    /// x̂_{l,l',l,l'} + ŷ_{l,l'}, the expected second-order drift of ρ̂ under equal spans.
    #[default]
    Leading,
    /// x̂_{l,l',l,l'} + x̂_{l,l,l,l'} + x̂_{l,l',l',l'} + ŷ_{l,l'}.
    Full,
}

/// Variance used to standardize the statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum VarianceForm {
    /// ν̂, the variance of the quadratic term that drives ρ̂ when the spans coincide.
    #[default]
    Null,
    /// ν̂ + max(ξ̂ᵀD̂Σ̂D̂ᵀξ̂ − 2ν̂, 0) with ν̂ the variance of the quadratic null term.
    /// The plug-in carries 2ν̂ of noise from the estimated loadings.
    NullAdjusted,
    /// ξ̂ᵀD̂Σ̂D̂ᵀξ̂ alone.
    PlugIn,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GcOptions {
    pub bias: BiasTerms,
    pub variance: VarianceForm,
}

#[derive(Clone, Debug, Serialize)]
pub struct GcTestResult<T: Real> {
    pub rho_hat: T,
    pub r: usize,
    /// ξ̂ᵀb̂.
    pub bias: T,
    /// Variance in the denominator of the statistic.
    pub variance: T,
    /// ξ̂ᵀD̂Σ̂_BB D̂ᵀξ̂.
    pub plugin_variance: T,
    /// Scaled variance of ‖(I − P̂₁)Λ̄₂‖²/N when the spans coincide.
    pub null_variance: T,
    pub statistic: T,
    /// Lower-tail normal probability of the statistic.
    pub p_value: T,
    /// Number of negative eigenvalues of Σ̂_BB set to zero.
    pub clipped: usize,
}

/// Intermediate pieces of the test, stacked in the order (1,1), (1,2), (2,1), (2,2).
#[derive(Clone, Debug)]
pub struct GcDetail<T: Real> {
    pub result: GcTestResult<T>,
    pub xi: DVector<T>,
    pub b: DVector<T>,
    /// b̂ split into the x̂_{l,l',l,l'} terms, the remaining two x̂ terms, and ŷ.
    pub b_parts: [DVector<T>; 3],
    pub d: DMatrix<T>,
    pub sigma_bb: DMatrix<T>,
}

fn condition<T: Real>(gram: &DMatrix<T>) -> f64 {
    let e = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (max, min) = (to_f64(e.max()), to_f64(e.min()));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn checked_inverse<T: Real>(gram: &DMatrix<T>) -> Result<DMatrix<T>> {
    let c = condition(gram);
    if !(c <= 1e12) {
        return Err(Error::RankDeficient { condition: c });
    }
    gram.clone().try_inverse().map(|g| symmetrize(&g)).ok_or(Error::RankDeficient { condition: c })
}

/// tr[(L1ᵀL1)⁻¹(L1ᵀL2)(L2ᵀL2)⁻¹(L2ᵀL1)], the squared canonical correlations summed.
pub fn generalized_correlation<T: Real>(l1: &DMatrix<T>, l2: &DMatrix<T>) -> Result<T> {
    if l1.nrows() != l2.nrows() {
        return Err(Error::DimensionMismatch(format!("{} rows vs {} rows", l1.nrows(), l2.nrows())));
    }
    let n = from_usize::<T>(l1.nrows());
    let g1 = checked_inverse(&(l1.tr_mul(l1) / n))?;
    let g4 = checked_inverse(&(l2.tr_mul(l2) / n))?;
    let g2 = l1.tr_mul(l2) / n;
    Ok((g1 * &g2 * g4 * g2.transpose()).trace())
}

/// Commutation matrix: K·vec(A) = vec(Aᵀ) for r×r A.
fn commutation<T: Real>(r: usize) -> DMatrix<T> {
    let mut k = DMatrix::zeros(r * r, r * r);
    for i in 0..r {
        for j in 0..r {
            k[(j + i * r, i + j * r)] = T::one();
        }
    }
    k
}

fn vec_of<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

/// Linear map from the stacked scores [vec μ11; vec μ12; vec μ21; vec μ22] to the first-order
/// perturbations [vec ΔG11; vec ΔG12; vec ΔG21; vec ΔG22], where
/// ΔG_{l,l'} = V_l⁻¹A_{ll}μ_{l,l'} + V_l⁻¹μ_{l,l}ᵀA_{l,l'} + μ_{l',l}ᵀA_{l'l'}V_{l'}⁻¹ + A_{l,l'}μ_{l',l'}V_{l'}⁻¹.
pub fn derivative_map<T: Real>(v_inv: &[DMatrix<T>; 2], a: &[[DMatrix<T>; 2]; 2]) -> DMatrix<T> {
    let r = v_inv[0].nrows();
    let q = r * r;
    let id = DMatrix::<T>::identity(r, r);
    let k = commutation::<T>(r);
    let block = |l: usize, lp: usize| 2 * l + lp;
    let mut d = DMatrix::zeros(4 * q, 4 * q);
    for l in 0..2 {
        for lp in 0..2 {
            let m1 = &v_inv[l] * &a[l][l];
            let m2 = &id;
            let m3 = &v_inv[l];
            let m4 = &a[l][lp];
            let m5 = &id;
            let m6 = &a[lp][lp] * &v_inv[lp];
            let m7 = &a[l][lp];
            let m8 = &v_inv[lp];
            let row = block(l, lp) * q;
            let terms = [
                (block(l, lp), m2.transpose().kronecker(&m1)),
                (block(l, l), m4.transpose().kronecker(m3) * &k),
                (block(lp, l), m6.transpose().kronecker(m5) * &k),
                (block(lp, lp), m8.transpose().kronecker(m7)),
            ];
            for (col, m) in terms {
                let mut view = d.view_mut((row, col * q), (q, q));
                view += m;
            }
        }
    }
    d
}

struct Side<T: Real> {
    lbar: DMatrix<T>,
    fbar: DMatrix<T>,
    v_inv: DMatrix<T>,
    ts: T,
    ebar: DMatrix<T>,
    /// ē with each cell divided by √((1 − h^Λ_i)(1 − h^F_t)).
    ebar_hc: DMatrix<T>,
}

fn side<T: Real>(fit: &ConditionalFit<T>) -> Result<Side<T>> {
    let nf = normalize_fit(fit)?;
    let ebar = &fit.projected_data - &nf.loadings_bar * nf.factors_bar.transpose();
    let v_inv = DMatrix::from_diagonal(&fit.eigenvalues.map(|v| T::one() / v));
    let (n, nt) = ebar.shape();
    // Λ̄ᵀΛ̄/N = I and F̄ᵀF̄ = T(s)·V
    let lev_l: Vec<T> = (0..n).map(|i| nf.loadings_bar.row(i).norm_squared() / from_usize::<T>(n)).collect();
    let fv = &nf.factors_bar * v_inv.map(|v| v.sqrt());
    let lev_f: Vec<T> = (0..nt).map(|t| fv.row(t).norm_squared() / fit.effective_size).collect();
    let ebar_hc = DMatrix::from_fn(n, nt, |i, t| {
        let k = (T::one() - lev_l[i]) * (T::one() - lev_f[t]);
        if k > lit(1e-3) {
            ebar[(i, t)] / k.sqrt()
        } else {
            ebar[(i, t)]
        }
    });
    Ok(Side { lbar: nf.loadings_bar, fbar: nf.factors_bar, v_inv, ts: fit.effective_size, ebar, ebar_hc })
}

pub fn gc_test<T: Real>(fit1: &ConditionalFit<T>, fit2: &ConditionalFit<T>, sets: &SparsitySets) -> Result<GcTestResult<T>> {
    gc_test_detailed(fit1, fit2, sets, &GcOptions::default()).map(|d| d.result)
}

pub fn gc_test_with<T: Real>(
    fit1: &ConditionalFit<T>,
    fit2: &ConditionalFit<T>,
    sets: &SparsitySets,
    opts: &GcOptions,
) -> Result<GcTestResult<T>> {
    gc_test_detailed(fit1, fit2, sets, opts).map(|d| d.result)
}

/// ν̂ averaged over both orderings of the pair, so relabelling the states leaves it unchanged.
fn null_quadratic_variance<T: Real>(sd: &[Side<T>; 2], r12: &DMatrix<T>, sets: &SparsitySets, h: T) -> T {
    let a = null_quadratic_variance_ordered([&sd[0], &sd[1]], r12, sets, h);
    let b = null_quadratic_variance_ordered([&sd[1], &sd[0]], &r12.transpose(), sets, h);
    (a + b) * lit::<T>(0.5)
}

/// ν̂: rows g_it = V₂⁻¹F̄²_t ē²_it/T₂ − Rᵀ V₁⁻¹F̄¹_t ē¹_it/T₁ with R = Λ̄₁ᵀΛ̄₂/N,
/// C_ij = Σ_{Ω_eT} g_it g_jt'ᵀ and ν̂ = (Th/N)·2Σ_{Ω_eN} ‖C_ij‖²_F.
fn null_quadratic_variance_ordered<T: Real>(sd: [&Side<T>; 2], r12: &DMatrix<T>, sets: &SparsitySets, h: T) -> T {
    let (n, nt) = sd[0].ebar.shape();
    let c1 = r12.transpose() * &sd[0].v_inv / sd[0].ts;
    let c2 = &sd[1].v_inv / sd[1].ts;
    let f1 = &sd[0].fbar * c1.transpose();
    let f2 = &sd[1].fbar * c2.transpose();
    let g: Vec<DMatrix<T>> = (0..n)
        .map(|i| {
            let mut gi = f2.clone();
            let mut g1 = f1.clone();
            for t in 0..nt {
                gi.row_mut(t).scale_mut(sd[1].ebar_hc[(i, t)]);
                g1.row_mut(t).scale_mut(sd[0].ebar_hc[(i, t)]);
            }
            gi - g1
        })
        .collect();
    let cross = |i: usize, j: usize| -> DMatrix<T> {
        if sets.time_pairs.is_diagonal() {
            g[i].tr_mul(&g[j])
        } else {
            let mut c = DMatrix::zeros(g[i].ncols(), g[i].ncols());
            sets.time_pairs.for_each(nt, |t1, t2| c += g[i].row(t1).transpose() * g[j].row(t2));
            c
        }
    };
    let mut acc = T::zero();
    sets.series_pairs.for_each(n, |i, j| acc += cross(i, j).norm_squared());
    let nn = from_usize::<T>(n);
    lit::<T>(2.0) * acc * from_usize::<T>(nt) * h / nn
}

pub fn gc_test_detailed<T: Real>(
    fit1: &ConditionalFit<T>,
    fit2: &ConditionalFit<T>,
    sets: &SparsitySets,
    opts: &GcOptions,
) -> Result<GcDetail<T>> {
    if fit1.data.shape() != fit2.data.shape() {
        return Err(Error::DimensionMismatch("fits come from panels of different shape".into()));
    }
    if fit1.r != fit2.r {
        return Err(Error::DimensionMismatch(format!("factor counts {} and {}", fit1.r, fit2.r)));
    }
    if fit1.h != fit2.h {
        return Err(Error::DimensionMismatch("fits use different bandwidths".into()));
    }
    let (n, nt) = fit1.data.shape();
    let r = fit1.r;
    let q = r * r;
    sets.validate(n, nt)?;
    let sd = [side(fit1)?, side(fit2)?];

    for (fit, s) in [fit1, fit2].iter().zip(&sd) {
        if s.ebar.norm() <= lit::<T>(1e-12) * fit.projected_data.norm() {
            return Err(Error::ZeroVariance);
        }
    }

    let nn = from_usize::<T>(n);
    let a: [[DMatrix<T>; 2]; 2] =
        std::array::from_fn(|p| std::array::from_fn(|u| sd[p].lbar.tr_mul(&sd[u].lbar) / nn));
    let g1i = checked_inverse(&a[0][0])?;
    let g4i = checked_inverse(&a[1][1])?;
    let (g2, g3) = (&a[0][1], &a[1][0]);
    let rho_hat = (&g1i * g2 * &g4i * g3).trace();

    let p12 = &g1i * g2 * &g4i;
    let p21 = &g4i * g3 * &g1i;
    let xi_blocks = [
        -(&p12 * g3 * &g1i).transpose(),
        p12.clone(),
        p21.clone(),
        -(&p21 * g2 * &g4i).transpose(),
    ];
    let mut xi = DVector::zeros(4 * q);
    for (k, m) in xi_blocks.iter().enumerate() {
        xi.rows_mut(k * q, q).copy_from(&vec_of(m));
    }

    // Time-pair middle matrices and cross-section bias pieces.
    let mid: [[DMatrix<T>; 2]; 2] = std::array::from_fn(|u| {
        std::array::from_fn(|v| {
            let mut acc = DMatrix::zeros(r, r);
            sets.time_pairs.for_each(nt, |t1, t2| {
                let w = sd[u].ebar_hc.column(t1).dot(&sd[v].ebar_hc.column(t2));
                acc += sd[u].fbar.row(t1).transpose() * sd[v].fbar.row(t2) * w;
            });
            acc / (nn * sd[u].ts * sd[v].ts)
        })
    });
    let x = |u: usize, v: usize, p: usize, w: usize| -> DMatrix<T> {
        &sd[p].v_inv * &a[p][u] * &mid[u][v] * &a[v][w] * &sd[w].v_inv
    };
    let z: [[DMatrix<T>; 2]; 2] = std::array::from_fn(|p| {
        std::array::from_fn(|w| {
            let mut acc = DMatrix::zeros(r, r);
            sets.series_pairs.for_each(n, |i, j| {
                let d = sd[p].ebar_hc.row(i).dot(&sd[p].ebar_hc.row(j));
                acc += sd[p].lbar.row(i).transpose() * sd[w].lbar.row(j) * d;
            });
            &sd[p].v_inv * acc / (nn * nn * sd[p].ts)
        })
    });
    let mut b_parts: [DVector<T>; 3] = std::array::from_fn(|_| DVector::zeros(4 * q));
    for l in 0..2 {
        for lp in 0..2 {
            let k = (2 * l + lp) * q;
            b_parts[0].rows_mut(k, q).copy_from(&vec_of(&x(l, lp, l, lp)));
            b_parts[1].rows_mut(k, q).copy_from(&vec_of(&(x(l, l, l, lp) + x(l, lp, lp, lp))));
            b_parts[2].rows_mut(k, q).copy_from(&vec_of(&(&z[l][lp] + &z[lp][l])));
        }
    }
    let b = match opts.bias {
        BiasTerms::Leading => &b_parts[0] + &b_parts[2],
        BiasTerms::Full => &b_parts[0] + &b_parts[1] + &b_parts[2],
    };
    let bias = xi.dot(&b);

    // Scores per cell, z(i,t) blocks (u,v) = vec(F̄ᵘ_t λ̄_{v,i}ᵀ)·ēᵘ_it / T(s_u).
    let dim = 4 * q;
    let mut scores = DMatrix::<T>::zeros(n * nt, dim);
    for i in 0..n {
        for t in 0..nt {
            let row = i * nt + t;
            for u in 0..2 {
                let e = sd[u].ebar[(i, t)] / sd[u].ts;
                for v in 0..2 {
                    let base = (2 * u + v) * q;
                    for m in 0..r {
                        let lm = sd[v].lbar[(i, m)] * e;
                        for k in 0..r {
                            scores[(row, base + k + m * r)] = sd[u].fbar[(t, k)] * lm;
                        }
                    }
                }
            }
        }
    }
    let mut sigma = DMatrix::<T>::zeros(dim, dim);
    match &sets.joint {
        crate::inference::JointSet::Diagonal => sigma = scores.tr_mul(&scores),
        joint => joint.for_each(n, nt, |c1, c2| {
            let r1 = scores.row(c1.0 * nt + c1.1);
            let r2 = scores.row(c2.0 * nt + c2.1);
            sigma += r1.transpose() * r2;
        }),
    }
    sigma = symmetrize(&sigma) * (from_usize::<T>(nt) * fit1.h / nn);

    let mut clipped = 0;
    let tr = sigma.trace();
    let eig = SymmetricEigen::new(sigma.clone());
    if eig.eigenvalues.iter().any(|&v| v < -lit::<T>(1e-10) * tr.abs()) {
        let vals = eig.eigenvalues.map(|v| {
            if v < T::zero() {
                clipped += 1;
                T::zero()
            } else {
                v
            }
        });
        log::warn!("clipped {clipped} negative eigenvalues of the score covariance");
        sigma = symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()));
    }

    let v_inv = [sd[0].v_inv.clone(), sd[1].v_inv.clone()];
    let d = derivative_map(&v_inv, &a);
    let u = d.tr_mul(&xi);
    let plugin_variance = (u.transpose() * &sigma * &u)[(0, 0)];
    let null_variance = null_quadratic_variance(&sd, &a[0][1], sets, fit1.h);
    let variance = match opts.variance {
        VarianceForm::Null => null_variance,
        VarianceForm::PlugIn => plugin_variance,
        VarianceForm::NullAdjusted => null_variance + (plugin_variance - lit::<T>(2.0) * null_variance).max(T::zero()),
    };
    if !(variance > T::zero()) || !variance.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let scale = (nn * from_usize::<T>(nt) * fit1.h).sqrt();
    let statistic = scale * (rho_hat - from_usize::<T>(r) - bias) / variance.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = lit(std_normal.cdf(to_f64(statistic)));

    Ok(GcDetail {
        result: GcTestResult {
            rho_hat,
            r,
            bias,
            variance,
            plugin_variance,
            null_variance,
            statistic,
            p_value,
            clipped,
        },
        xi,
        b,
        b_parts,
        d,
        sigma_bb: sigma,
    })
}

/// Change tests over all unordered pairs of a state grid.
#[derive(Clone, Debug)]
pub struct PairwiseGrid<T: Real> {
    pub grid: Vec<T>,
    /// Symmetric; NaN on the diagonal and on failed cells.
    pub statistic: DMatrix<T>,
    pub p_value: DMatrix<T>,
    pub errors: Vec<GridError>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridError {
    pub row: usize,
    pub column: usize,
    pub kind: String,
    pub message: String,
}

pub fn pairwise_test_grid<T: Real>(
    x: &DMatrix<T>,
    states: &[T],
    grid: &[T],
    h: T,
    r: usize,
    opts: &FitOptions,
    sets: &SparsitySets,
) -> Result<PairwiseGrid<T>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty state grid".into()));
    }
    let fits: Vec<Result<ConditionalFit<T>>> =
        grid.par_iter().map(|&s| fit_conditional(x, states, s, h, r, opts)).collect();
    let pairs: Vec<(usize, usize)> =
        (0..grid.len()).flat_map(|i| (i + 1..grid.len()).map(move |j| (i, j))).collect();
    let cells: Vec<(usize, usize, Result<GcTestResult<T>>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let res = match (&fits[i], &fits[j]) {
                (Ok(a), Ok(b)) => gc_test(a, b, sets),
                (Err(e), _) | (_, Err(e)) => Err(Error::InvalidArgument(format!("fit failed: {e}"))),
            };
            (i, j, res)
        })
        .collect();
    let g = grid.len();
    let nan = crate::scalar::nan::<T>();
    let mut statistic = DMatrix::from_element(g, g, nan);
    let mut p_value = DMatrix::from_element(g, g, nan);
    let mut errors = Vec::new();
    for (i, j, res) in cells {
        match res {
            Ok(t) => {
                statistic[(i, j)] = t.statistic;
                statistic[(j, i)] = t.statistic;
                p_value[(i, j)] = t.p_value;
                p_value[(j, i)] = t.p_value;
            }
            Err(e) => errors.push(GridError { row: i, column: j, kind: e.kind().into(), message: e.to_string() }),
        }
    }
    Ok(PairwiseGrid { grid: grid.to_vec(), statistic, p_value, errors })
}
