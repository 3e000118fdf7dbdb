use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Gaussian,
    Uniform,
    Epanechnikov,
    Biweight,
    Triweight,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Gaussian,
        KernelKind::Uniform,
        KernelKind::Epanechnikov,
        KernelKind::Biweight,
        KernelKind::Triweight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Uniform => "uniform",
            KernelKind::Epanechnikov => "epanechnikov",
            KernelKind::Biweight => "biweight",
            KernelKind::Triweight => "triweight",
        }
    }

    /// True when the kernel vanishes outside [-1, 1].
    pub fn compact(self) -> bool {
        !matches!(self, KernelKind::Gaussian)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(KernelKind::Gaussian),
            "uniform" | "box" => Ok(KernelKind::Uniform),
            "epanechnikov" => Ok(KernelKind::Epanechnikov),
            "biweight" | "quartic" => Ok(KernelKind::Biweight),
            "triweight" => Ok(KernelKind::Triweight),
            other => Err(Error::InvalidArgument(format!("unknown kernel '{other}'"))),
        }
    }
}

/// K(u) for a symmetric density kernel.
pub fn kernel_value<T: Real>(u: T, kind: KernelKind) -> T {
    let one = T::one();
    let inside = u.abs() <= one;
    match kind {
        KernelKind::Gaussian => (-(u * u) * lit(0.5)).exp() / T::two_pi().sqrt(),
        KernelKind::Uniform => {
            if inside {
                lit(0.5)
            } else {
                T::zero()
            }
        }
        KernelKind::Epanechnikov => {
            if inside {
                lit::<T>(0.75) * (one - u * u)
            } else {
                T::zero()
            }
        }
        KernelKind::Biweight => {
            if inside {
                let a = one - u * u;
                lit::<T>(15.0 / 16.0) * a * a
            } else {
                T::zero()
            }
        }
        KernelKind::Triweight => {
            if inside {
                let a = one - u * u;
                lit::<T>(35.0 / 32.0) * a * a * a
            } else {
                T::zero()
            }
        }
    }
}

/// Closed-form integral of K(u)^2.
pub fn roughness<T: Real>(kind: KernelKind) -> T {
    match kind {
        KernelKind::Gaussian => T::one() / (lit::<T>(2.0) * T::pi().sqrt()),
        KernelKind::Uniform => lit(0.5),
        KernelKind::Epanechnikov => lit(0.6),
        KernelKind::Biweight => lit(5.0 / 7.0),
        KernelKind::Triweight => lit(350.0 / 429.0),
    }
}

/// Kernel weights K_s(S_t) = K((S_t - s)/h)/h over the sample.
#[derive(Clone, Debug)]
pub struct KernelWeights<T: Real> {
    pub state: T,
    pub bandwidth: T,
    pub kind: KernelKind,
    pub weights: Vec<T>,
    /// Sum of the weights, T(s).
    pub effective_size: T,
}

impl<T: Real> KernelWeights<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_weight(&self) -> T {
        self.weights.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }
}

fn check_inputs<T: Real>(states: &[T], s: T, h: T) -> Result<()> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("empty state series".into()));
    }
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidArgument("bandwidth must be positive and finite".into()));
    }
    if !s.is_finite() {
        return Err(Error::InvalidArgument("state must be finite".into()));
    }
    if let Some(t) = states.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { row: t, column: 0 });
    }
    Ok(())
}

pub fn kernel_weights<T: Real>(
    states: &[T],
    s: T,
    h: T,
    kind: KernelKind,
) -> Result<KernelWeights<T>> {
    check_inputs(states, s, h)?;
    let weights: Vec<T> = states
        .iter()
        .map(|&st| kernel_value((st - s) / h, kind) / h)
        .collect();
    let effective_size = weights.iter().copied().fold(T::zero(), |a, b| a + b);
    Ok(KernelWeights { state: s, bandwidth: h, kind, weights, effective_size })
}

/// Kernel density estimate of the state at `s`, T(s)/T.
pub fn density_estimate<T: Real>(states: &[T], s: T, h: T, kind: KernelKind) -> Result<T> {
    let w = kernel_weights(states, s, h, kind)?;
    Ok(w.effective_size / from_usize(states.len()))
}
