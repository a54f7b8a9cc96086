//! Gaussian heat kernel of R^m, its time derivative and pointwise bounds.
//!
//! Every function takes the squared distance `r2 = |x - y|^2`, so symmetry in
//! `x, y` holds by construction.

use crate::error::{Error, Result};
use crate::scalar::{exp_clamped, Real};

/// Grid resolution in r² used by [`kernel_dt_bound_check`]; the endpoints
/// `0` and `diam²` are always included.
pub const BOUND_CHECK_POINTS: usize = 2048;

/// Evaluation point `(m, t, |x - y|^2)` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint<T> {
    m: usize,
    t: T,
    r2: T,
}

impl<T: Real> KernelPoint<T> {
    pub fn new(m: usize, t: T, r2: T) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if !(t > T::zero() && t.is_finite()) {
            return Err(Error::InvalidTime(t.as_f64()));
        }
        if !(r2 >= T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "squared distance must be non-negative, got {r2}"
            )));
        }
        Ok(Self { m, t, r2 })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn r2(&self) -> T {
        self.r2
    }
}

/// `(4 pi t)^(-m/2)`, the on-diagonal value and global maximum of `p_t`.
#[inline]
pub fn kernel_peak<T: Real>(m: usize, t: T) -> T {
    let four_pi_t = T::lit(4.0) * T::PI() * t;
    four_pi_t.powf(-T::from_usize_lossy(m) / T::lit(2.0))
}

/// `p_t(x, y) = (4 pi t)^(-m/2) exp(-|x-y|^2 / 4t)`.
pub fn heat_kernel<T: Real>(k: &KernelPoint<T>) -> T {
    kernel_peak(k.m, k.t) * exp_clamped(-k.r2 / (T::lit(4.0) * k.t))
}

/// The bracket `-m/2 + r²/(4t)` with `∂_t p = bracket * p / t`.
#[inline]
fn dt_bracket<T: Real>(m: usize, t: T, r2: T) -> T {
    -T::from_usize_lossy(m) / T::lit(2.0) + r2 / (T::lit(4.0) * t)
}

/// `∂_t p_t = (1/t) [-m/2 + r²/(4t)] p_t`; its sign is that of `r² - 2mt`.
pub fn heat_kernel_dt<T: Real>(k: &KernelPoint<T>) -> T {
    dt_bracket(k.m, k.t, k.r2) * heat_kernel(k) / k.t
}

/// `e^(-1/8) (4 pi t)^(-m/2)`; a lower bound for `p_t` whenever
/// `|x - y|² ≤ t / 2`. The caller enforces the region.
pub fn kernel_lower_bound<T: Real>(m: usize, t: T) -> T {
    T::lit(-0.125).exp() * kernel_peak(m, t)
}

/// `(2m - 1) / 4`.
pub fn monotonicity_constant<T: Real>(m: usize) -> T {
    (T::lit(2.0) * T::from_usize_lossy(m) - T::one()) / T::lit(4.0)
}

/// Worst point of the check `∂_t p ≤ -((2m-1)/4) p / t` over `r² ∈ [0, diam²]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtBoundCheck<T> {
    /// `min (rhs - lhs)` over the grid; non-negative certifies the bound.
    pub margin: T,
    pub worst_r2: T,
    /// `∂_t p` at `worst_r2`.
    pub lhs: T,
    /// `-((2m-1)/4) p / t` at `worst_r2`.
    pub rhs: T,
    pub grid_points: usize,
}

/// Checks the pointwise time-derivative bound on a uniform r² grid.
///
/// Valid only for `t ≥ diam²`; earlier times are rejected.
pub fn kernel_dt_bound_check<T: Real>(m: usize, t: T, diam: T) -> Result<DtBoundCheck<T>> {
    if !(diam > T::zero() && diam.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "diameter must be positive, got {diam}"
        )));
    }
    let d2 = diam * diam;
    if !(t >= d2 * (T::one() - T::lit(4.0) * T::EPS)) {
        return Err(Error::OutsideValidity {
            t: t.as_f64(),
            lower: d2.as_f64(),
        });
    }
    // t within rounding of diam² (e.g. diam = √5, t = 5) counts as t = diam²
    let d2 = d2.min(t);
    let rhs_bracket = -monotonicity_constant::<T>(m);
    let n = BOUND_CHECK_POINTS;
    let mut worst: Option<DtBoundCheck<T>> = None;
    // n interior points plus both endpoints
    for i in 0..=n + 1 {
        let r2 = if i == n + 1 {
            d2
        } else {
            d2 * T::from_usize_lossy(i) / T::from_usize_lossy(n + 1)
        };
        let k = KernelPoint::new(m, t, r2)?;
        let p_over_t = heat_kernel(&k) / t;
        let lhs_bracket = dt_bracket(m, t, r2);
        // Brackets are compared before scaling so that rounding stays monotone.
        let margin = (rhs_bracket - lhs_bracket) * p_over_t;
        if worst.is_none_or(|w| margin < w.margin) {
            worst = Some(DtBoundCheck {
                margin,
                worst_r2: r2,
                lhs: lhs_bracket * p_over_t,
                rhs: rhs_bracket * p_over_t,
                grid_points: n + 2,
            });
        }
    }
    Ok(worst.expect("grid is non-empty"))
}
