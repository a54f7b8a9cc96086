//! Time derivatives of `H(t)` by Richardson-extrapolated central differences,
//! and the sign pattern `H ≥ 0, H' ≤ 0, H'' ≥ 0, H''' ≤ 0`.

use rayon::prelude::*;

use crate::engines::{ErrorKind, Estimate};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Base step as a fraction of `t`.
pub const DEFAULT_STEP_FRACTION: f64 = 1e-2;
/// Richardson levels used for orders 1 and 2 unless overridden. A third
/// level puts second differences on the rounding floor in double precision.
pub const DEFAULT_LEVELS: usize = 2;
/// Error widening applied to third derivatives.
pub const THIRD_ORDER_WIDENING: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeEstimate<T> {
    pub order: u32,
    pub value: T,
    /// Finest step used.
    pub step: T,
    pub error_estimate: T,
    pub richardson_levels: usize,
}

/// Central stencil `(offset, coefficient)`; divide by `step^order`.
fn stencil(order: u32) -> &'static [(i32, f64)] {
    match order {
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        _ => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    }
}

/// `order`-th derivative of `f` at `t` with base step `DEFAULT_STEP_FRACTION · t`.
///
/// Third derivatives always use a single Richardson level.
pub fn fd_derivative<T, F>(f: F, t: T, order: u32, levels: usize) -> Result<DerivativeEstimate<T>>
where
    T: Real,
    F: Fn(T) -> Result<Estimate<T>>,
{
    fd_derivative_with_step(f, t, order, levels, T::lit(DEFAULT_STEP_FRACTION))
}

pub fn fd_derivative_with_step<T, F>(
    f: F,
    t: T,
    order: u32,
    levels: usize,
    eta: T,
) -> Result<DerivativeEstimate<T>>
where
    T: Real,
    F: Fn(T) -> Result<Estimate<T>>,
{
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidConfig(format!(
            "derivative order must be 1, 2 or 3, got {order}"
        )));
    }
    if levels == 0 {
        return Err(Error::InvalidConfig(
            "at least one Richardson level is required".into(),
        ));
    }
    if !(t > T::zero() && t.is_finite()) {
        return Err(Error::InvalidTime(t.as_f64()));
    }
    if !(eta > T::zero() && eta < T::lit(0.25)) {
        return Err(Error::InvalidConfig(format!(
            "step fraction must lie in (0, 0.25), got {eta}"
        )));
    }
    let levels = if order == 3 { 1 } else { levels };
    let base = eta * t;
    let finest = base / T::lit(2.0).powi(levels as i32);
    if !(finest > T::zero()) || t + finest == t || t - finest == t {
        return Err(Error::StepUnderflow(t.as_f64()));
    }

    let mut cache: Vec<(T, Estimate<T>)> = Vec::new();
    let mut eval = |x: T| -> Result<Estimate<T>> {
        if let Some((_, e)) = cache.iter().find(|(y, _)| *y == x) {
            return Ok(e.clone());
        }
        let e = f(x)?;
        if e.kind == ErrorKind::Statistical99 && order >= 2 {
            return Err(Error::TooNoisy { order });
        }
        cache.push((x, e.clone()));
        Ok(e)
    };

    let st = stencil(order);
    let mut raw = Vec::with_capacity(levels + 1);
    let mut worst_err = T::zero();
    for j in 0..=levels {
        let step = base / T::lit(2.0).powi(j as i32);
        let mut acc = T::zero();
        for &(k, c) in st {
            let e = eval(t + T::lit(k as f64) * step)?;
            acc = acc + T::lit(c) * e.value;
            worst_err = worst_err.max(e.error_bound);
        }
        raw.push(acc / step.powi(order as i32));
    }

    // Richardson tableau; central stencils have even error expansions.
    let mut prev = raw.clone();
    let mut diag = vec![raw[0]];
    for k in 1..=levels {
        let factor = T::lit(4f64.powi(k as i32));
        let next: Vec<T> = (1..prev.len())
            .map(|j| prev[j] + (prev[j] - prev[j - 1]) / (factor - T::one()))
            .collect();
        diag.push(next[next.len() - 1]);
        prev = next;
    }
    let value = diag[levels];
    let extrapolation = (diag[levels] - diag[levels - 1]).abs();
    let weight: T = st
        .iter()
        .fold(T::zero(), |acc, &(_, c)| acc + T::lit(c.abs()));
    let amplified = weight * worst_err / finest.powi(order as i32);
    let mut error_estimate = extrapolation + amplified;
    if order == 3 {
        error_estimate = error_estimate * T::lit(THIRD_ORDER_WIDENING);
    }
    Ok(DerivativeEstimate {
        order,
        value,
        step: finest,
        error_estimate,
        richardson_levels: levels,
    })
}

/// `H` and its first three derivatives at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub t: T,
    pub value: T,
    pub value_err: T,
    pub derivatives: [DerivativeEstimate<T>; 3],
}

/// Evaluates [`SweepRow`]s over `t_grid`, in grid order.
pub fn sweep<T, F>(f: F, t_grid: &[T], levels: usize) -> Result<Vec<SweepRow<T>>>
where
    T: Real,
    F: Fn(T) -> Result<Estimate<T>> + Sync,
{
    t_grid
        .par_iter()
        .map(|&t| {
            let e = f(t)?;
            let d1 = fd_derivative(&f, t, 1, levels)?;
            let d2 = fd_derivative(&f, t, 2, levels)?;
            let d3 = fd_derivative(&f, t, 3, levels)?;
            Ok(SweepRow {
                t,
                value: e.value,
                value_err: e.error_bound,
                derivatives: [d1, d2, d3],
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignViolation<T> {
    pub t: T,
    /// 0 for `H`, otherwise the derivative order.
    pub order: u32,
    pub value: T,
    pub tolerance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignReport<T> {
    pub rows: Vec<SweepRow<T>>,
    pub violations: Vec<SignViolation<T>>,
}

impl<T> SignReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Violations of `H ≥ 0, H' ≤ 0, H'' ≥ 0, H''' ≤ 0` beyond each estimate's
/// own error.
pub fn check_signs<T: Real>(rows: Vec<SweepRow<T>>) -> SignReport<T> {
    let mut violations = Vec::new();
    for r in &rows {
        if r.value < -r.value_err {
            violations.push(SignViolation {
                t: r.t,
                order: 0,
                value: r.value,
                tolerance: r.value_err,
            });
        }
        for d in &r.derivatives {
            // (-1)^k H^(k) ≥ 0
            let signed = if d.order % 2 == 1 { -d.value } else { d.value };
            if signed < -d.error_estimate {
                violations.push(SignViolation {
                    t: r.t,
                    order: d.order,
                    value: d.value,
                    tolerance: d.error_estimate,
                });
            }
        }
    }
    SignReport { rows, violations }
}

pub fn sign_pattern<T, F>(f: F, t_grid: &[T]) -> Result<SignReport<T>>
where
    T: Real,
    F: Fn(T) -> Result<Estimate<T>> + Sync,
{
    if let Some(w) = t_grid.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig(format!(
            "time grid must be ascending ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(check_signs(sweep(f, t_grid, DEFAULT_LEVELS)?))
}
