use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index pairs (a, b) with an assumed nonzero covariance. Always symmetric with the diagonal included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PairSet {
    Diagonal,
    /// |a − b| ≤ lag.
    Banded(usize),
    Full,
    /// Listed pairs, closed under symmetry; the diagonal is implied.
    Explicit(Vec<(usize, usize)>),
}

impl PairSet {
    pub fn explicit(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a != b {
                set.insert((a, b));
                set.insert((b, a));
            }
        }
        PairSet::Explicit(set.into_iter().collect())
    }

    /// Calls `f(a, b)` once per ordered pair with a, b < n.
    pub fn for_each(&self, n: usize, mut f: impl FnMut(usize, usize)) {
        match self {
            PairSet::Diagonal => (0..n).for_each(|a| f(a, a)),
            PairSet::Banded(q) => {
                for a in 0..n {
                    for b in a.saturating_sub(*q)..n.min(a + q + 1) {
                        f(a, b);
                    }
                }
            }
            PairSet::Full => {
                for a in 0..n {
                    for b in 0..n {
                        f(a, b);
                    }
                }
            }
            PairSet::Explicit(pairs) => {
                (0..n).for_each(|a| f(a, a));
                for &(a, b) in pairs {
                    if a < n && b < n && a != b {
                        f(a, b);
                    }
                }
            }
        }
    }

    /// Largest number of members in any row.
    pub fn max_row_count(&self, n: usize) -> usize {
        let mut rows = vec![0usize; n];
        self.for_each(n, |a, _| rows[a] += 1);
        rows.into_iter().max().unwrap_or(0)
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, PairSet::Diagonal | PairSet::Banded(0))
            || matches!(self, PairSet::Explicit(p) if p.is_empty())
    }
}

/// Pairs of panel cells ((i, t), (j, u)) for the joint error covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum JointSet {
    Diagonal,
    /// Same series, |t − u| ≤ lag.
    SameSeriesBanded(usize),
    Full,
    Explicit(Vec<((usize, usize), (usize, usize))>),
}

impl JointSet {
    pub fn explicit(pairs: impl IntoIterator<Item = ((usize, usize), (usize, usize))>) -> Self {
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a != b {
                set.insert((a, b));
                set.insert((b, a));
            }
        }
        JointSet::Explicit(set.into_iter().collect())
    }

    pub fn for_each(&self, n: usize, t: usize, mut f: impl FnMut((usize, usize), (usize, usize))) {
        match self {
            JointSet::Diagonal => {
                for i in 0..n {
                    for k in 0..t {
                        f((i, k), (i, k));
                    }
                }
            }
            JointSet::SameSeriesBanded(q) => {
                for i in 0..n {
                    for k in 0..t {
                        for u in k.saturating_sub(*q)..t.min(k + q + 1) {
                            f((i, k), (i, u));
                        }
                    }
                }
            }
            JointSet::Full => {
                for i in 0..n {
                    for k in 0..t {
                        for j in 0..n {
                            for u in 0..t {
                                f((i, k), (j, u));
                            }
                        }
                    }
                }
            }
            JointSet::Explicit(pairs) => {
                for i in 0..n {
                    for k in 0..t {
                        f((i, k), (i, k));
                    }
                }
                for &(a, b) in pairs {
                    if a.0 < n && b.0 < n && a.1 < t && b.1 < t && a != b {
                        f(a, b);
                    }
                }
            }
        }
    }

    pub fn max_row_count(&self, n: usize, t: usize) -> usize {
        let mut rows = vec![0usize; n * t];
        self.for_each(n, t, |a, _| rows[a.0 * t + a.1] += 1);
        rows.into_iter().max().unwrap_or(0)
    }
}

/// The index sets over which residual cross-products enter the plug-in estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsitySets {
    /// Ω_{e_t}: series pairs (i, j) within one period, for Π̂_t and V̂_it.
    pub cross_section_at_t: PairSet,
    /// Ω_{e_i}: period pairs (t, u) within one series, for Θ̂_i.
    pub time_within_series: PairSet,
    /// Ω_{e_T}: period pairs in the time bias term of the change test.
    pub time_pairs: PairSet,
    /// Ω_{e_N}: series pairs in the cross-section bias term of the change test.
    pub series_pairs: PairSet,
    /// Ω_e: joint cell pairs for the covariance of the score terms.
    pub joint: JointSet,
    /// Upper bound on members per row; `None` disables the check.
    pub row_cap: Option<usize>,
}

impl Default for SparsitySets {
    fn default() -> Self {
        SparsitySets::banded(0)
    }
}

impl SparsitySets {
    /// Cross-sectionally independent errors with serial dependence up to `q` lags.
    pub fn banded(q: usize) -> Self {
        SparsitySets {
            cross_section_at_t: PairSet::Diagonal,
            time_within_series: PairSet::Banded(q),
            time_pairs: PairSet::Banded(q),
            series_pairs: PairSet::Diagonal,
            joint: JointSet::SameSeriesBanded(q),
            row_cap: None,
        }
    }

    /// Every pair in every set.
    pub fn full() -> Self {
        SparsitySets {
            cross_section_at_t: PairSet::Full,
            time_within_series: PairSet::Full,
            time_pairs: PairSet::Full,
            series_pairs: PairSet::Full,
            joint: JointSet::Full,
            row_cap: None,
        }
    }

    /// Checks the row cap against a panel of n series and t periods.
    pub fn validate(&self, n: usize, t: usize) -> Result<()> {
        let Some(cap) = self.row_cap else { return Ok(()) };
        let counts = [
            ("cross_section_at_t", self.cross_section_at_t.max_row_count(n)),
            ("time_within_series", self.time_within_series.max_row_count(t)),
            ("time_pairs", self.time_pairs.max_row_count(t)),
            ("series_pairs", self.series_pairs.max_row_count(n)),
            ("joint", self.joint.max_row_count(n, t)),
        ];
        for (name, c) in counts {
            if c > cap {
                return Err(Error::InvalidArgument(format!("{name} has {c} members in a row, cap is {cap}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect(set: &PairSet, n: usize) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        set.for_each(n, |a, b| {
            assert!(out.insert((a, b)), "duplicate pair");
        });
        out
    }

    #[test]
    fn banded_is_symmetric_with_diagonal() {
        let got = collect(&PairSet::Banded(2), 6);
        for &(a, b) in &got {
            assert!(got.contains(&(b, a)));
            assert!(a.abs_diff(b) <= 2);
        }
        assert_eq!(got.len(), 6 + 2 * (5 + 4));
    }

    #[test]
    fn explicit_closes_under_symmetry() {
        let set = PairSet::explicit([(0, 2), (3, 3)]);
        let got = collect(&set, 4);
        assert!(got.contains(&(2, 0)) && got.contains(&(0, 2)));
        assert!((0..4).all(|a| got.contains(&(a, a))));
        assert_eq!(got.len(), 6);
    }

    #[test]
    fn row_cap_enforced() {
        let mut sets = SparsitySets::banded(3);
        sets.row_cap = Some(4);
        assert!(sets.validate(5, 20).is_err());
        sets.row_cap = Some(7);
        assert!(sets.validate(5, 20).is_ok());
    }

    #[test]
    fn joint_banded_counts() {
        assert_eq!(JointSet::SameSeriesBanded(1).max_row_count(3, 5), 3);
        assert_eq!(JointSet::Diagonal.max_row_count(3, 5), 1);
    }
}
