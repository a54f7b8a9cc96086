//! Closed forms for sets built from axis-aligned boxes.
//!
//! The kernel factorizes over coordinates, so every box pair contributes a
//! product of one-dimensional interval pair integrals
//! `∫_a^b ∫_c^d g_t(x - y) dy dx = Φ(b-c) - Φ(a-c) - Φ(b-d) + Φ(a-d)` with
//! `Φ(u) = (u/2) erf(u / 2√t) + √(t/π) exp(-u²/4t)`, `Φ'' = g_t`.

use crate::engines::{ErrorKind, Estimate, Method};
use crate::error::{Error, Result};
use crate::geometry::{AxisBox, Domain, Shape};
use crate::scalar::{exp_clamped, Real};

/// Rounding budgets, in units of machine epsilon times the summed term
/// magnitudes, for the two-term self integral and the eight-term pair
/// integral (erf and exp within one ulp, half an ulp per arithmetic step).
pub const SELF_ROUNDING: f64 = 6.0;
pub const PAIR_ROUNDING: f64 = 10.0;

pub fn supports<T: Real>(d: &Domain<T>) -> bool {
    d.as_boxes().is_some()
}

/// Value and its rounding error bound.
type Rounded<T> = (T, T);

fn rounded<T: Real>(terms: &[T], budget: f64) -> Rounded<T> {
    let sum = terms.iter().fold(T::zero(), |acc, &x| acc + x);
    let mag = terms.iter().fold(T::zero(), |acc, &x| acc + x.abs());
    (sum.max(T::zero()), T::lit(budget) * T::EPS * mag)
}

/// Second antiderivative of the 1-D heat kernel, as its two terms.
fn phi<T: Real>(u: T, t: T) -> [T; 2] {
    let two_sqrt_t = T::lit(2.0) * t.sqrt();
    [
        u * (u / two_sqrt_t).erf() / T::lit(2.0),
        (t / T::PI()).sqrt() * exp_clamped(-u * u / (T::lit(4.0) * t)),
    ]
}

/// `∫_a^b ∫_c^d g_t(x - y) dy dx` for `a < b`, `c < d`, `t > 0`.
pub(crate) fn interval_pair<T: Real>(a: T, b: T, c: T, d: T, t: T) -> Rounded<T> {
    let [p0, p1] = phi(b - c, t);
    let [q0, q1] = phi(a - c, t);
    let [r0, r1] = phi(b - d, t);
    let [s0, s1] = phi(a - d, t);
    rounded(&[p0, p1, -q0, -q1, -r0, -r1, s0, s1], PAIR_ROUNDING)
}

fn interval_self<T: Real>(length: T, t: T) -> Rounded<T> {
    let x = length / (T::lit(2.0) * t.sqrt());
    rounded(
        &[
            length * x.erf(),
            T::lit(2.0) * (t / T::PI()).sqrt() * (-x * x).exp_m1(),
        ],
        SELF_ROUNDING,
    )
}

fn check_time_closed<T: Real>(t: T) -> Result<()> {
    if t >= T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTime(t.as_f64()))
    }
}

/// `H(t) = L erf(L / 2√t) + 2√(t/π) (exp(-L²/4t) - 1)` for the interval
/// `(0, L)`; `H(0) = L`.
pub fn hc_closed_interval<T: Real>(length: T, t: T) -> Result<Estimate<T>> {
    check_time_closed(t)?;
    if !(length > T::zero() && length.is_finite()) {
        return Err(Error::InvalidDomain(format!(
            "interval length must be positive, got {length}"
        )));
    }
    let (value, err) = if t == T::zero() {
        (length, T::zero())
    } else {
        interval_self(length, t)
    };
    Ok(Estimate::new(value, err, ErrorKind::Certified, Method::Closed).with("t", t))
}

/// Product of interval heat contents over the box sides.
pub fn hc_closed_box<T: Real>(lengths: &[T], t: T) -> Result<Estimate<T>> {
    check_time_closed(t)?;
    if lengths.is_empty() {
        return Err(Error::InvalidDomain("box needs at least one length".into()));
    }
    let mut factors = Vec::with_capacity(lengths.len());
    for &l in lengths {
        let e = hc_closed_interval(l, t)?;
        factors.push((e.value, e.error_bound));
    }
    let (value, err) = product_with_error(&factors);
    Ok(Estimate::new(value, err, ErrorKind::Certified, Method::Closed).with("t", t))
}

/// `Π v_i` and the bound `Π (|v_i| + e_i) - Π |v_i|` plus the product's own rounding.
fn product_with_error<T: Real>(factors: &[Rounded<T>]) -> Rounded<T> {
    let value = factors.iter().fold(T::one(), |acc, &(v, _)| acc * v);
    let upper = factors
        .iter()
        .fold(T::one(), |acc, &(v, e)| acc * (v.abs() + e));
    let n = T::from_usize_lossy(factors.len());
    (
        value,
        (upper - value.abs()).max(T::zero()) + n * T::EPS * value.abs(),
    )
}

fn box_pair<T: Real>(p: &AxisBox<T>, q: &AxisBox<T>, t: T) -> Vec<Rounded<T>> {
    (0..p.dimension())
        .map(|a| {
            let (a0, a1) = (p.corner[a], p.corner[a] + p.lengths[a]);
            let (b0, b1) = (q.corner[a], q.corner[a] + q.lengths[a]);
            if std::ptr::eq(p, q) {
                interval_self(p.lengths[a], t)
            } else {
                interval_pair(a0, a1, b0, b1, t)
            }
        })
        .collect()
}

/// Closed-form heat content of an interval, box or disjoint box union.
pub fn hc_closed<T: Real>(d: &Domain<T>, t: T) -> Result<Estimate<T>> {
    check_time_closed(t)?;
    match d.shape() {
        Shape::Interval { length } => return hc_closed_interval(*length, t),
        Shape::Box { lengths } => return hc_closed_box(lengths, t),
        _ => {}
    }
    let boxes = d.as_boxes().ok_or_else(|| Error::Unsupported {
        engine: "closed",
        what: format!("domain {d}"),
    })?;
    if t == T::zero() {
        return Ok(
            Estimate::new(d.volume(), T::zero(), ErrorKind::Certified, Method::Closed).with("t", t),
        );
    }
    let mut value = T::zero();
    let mut err = T::zero();
    for (i, p) in boxes.iter().enumerate() {
        for (j, q) in boxes.iter().enumerate().skip(i) {
            let (v, e) = product_with_error(&box_pair(p, q, t));
            let w = if i == j { T::one() } else { T::lit(2.0) };
            value = value + w * v;
            err = err + w * e;
        }
    }
    Ok(
        Estimate::new(value, err, ErrorKind::Certified, Method::Closed)
            .with("t", t)
            .with("boxes", boxes.len()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AxisBox;
    use std::f64::consts::PI;

    /// Midpoint double sum of the defining integral over (0, L)², spacing h.
    fn interval_oracle(length: f64, t: f64, h: f64) -> f64 {
        let n = (length / h).round() as usize;
        let g: Vec<f64> = (0..n)
            .map(|k| (-(k as f64 * h).powi(2) / (4.0 * t)).exp() / (4.0 * PI * t).sqrt())
            .collect();
        // pairs at lattice offset k occur (n - k) times, twice for k > 0
        let mut s = n as f64 * g[0];
        for (k, gk) in g.iter().enumerate().skip(1) {
            s += 2.0 * (n - k) as f64 * gk;
        }
        s * h * h
    }

    #[test]
    fn interval_examples() {
        assert_eq!(hc_closed_interval(1.0, 0.0).unwrap().value, 1.0);
        let v = hc_closed_interval(1.0, 0.1).unwrap().value;
        let oracle = interval_oracle(1.0, 0.1, 1e-3);
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
        assert!((v - 0.647_117_823).abs() < 1e-9, "{v}");
        // large-time flattening: H (4 pi t)^(1/2) / L² -> 1
        let t = 1e6;
        let r = hc_closed_interval(2.0, t).unwrap().value * (4.0 * PI * t).sqrt() / 4.0;
        assert!((r - 1.0).abs() < 1e-5, "{r}");
    }

    #[test]
    fn derivative_of_interval_closed_form() {
        // H'(t) = (exp(-L²/4t) - 1) / sqrt(pi t), obtained by differentiating the erf form
        for (l, t) in [(1.0f64, 0.3f64), (2.0, 1.5)] {
            let e = 1e-5 * t;
            let fd = (hc_closed_interval(l, t + e).unwrap().value
                - hc_closed_interval(l, t - e).unwrap().value)
                / (2.0 * e);
            let an = ((-(l * l) / (4.0 * t)).exp() - 1.0) / (PI * t).sqrt();
            assert!(((fd - an) / an).abs() < 1e-7);
        }
    }

    #[test]
    fn box_examples() {
        let one = hc_closed_interval(1.0f64, 0.1).unwrap().value;
        assert_eq!(hc_closed_box(&[1.0], 0.1).unwrap().value, one);
        assert_eq!(hc_closed_box(&[1.0, 2.0], 0.0).unwrap().value, 2.0);
        let sq = hc_closed_box(&[1.0, 1.0], 0.1).unwrap().value;
        assert_eq!(sq, one * one);
        assert!((sq - 0.418_761_5).abs() < 1e-7);
    }

    #[test]
    fn pair_integral_matches_quadrature() {
        // (0,1) against (2,3.5) at t = 0.7
        let (h, t) = (1e-3, 0.7);
        let mut s = 0.0;
        for i in 0..1000 {
            let x = (i as f64 + 0.5) * h;
            for j in 0..1500 {
                let y = 2.0 + (j as f64 + 0.5) * h;
                s += (-(x - y).powi(2) / (4.0 * t)).exp();
            }
        }
        s *= h * h / (4.0 * PI * t).sqrt();
        let (v, e) = interval_pair(0.0, 1.0, 2.0, 3.5, t);
        assert!((v - s).abs() < 1e-6, "{v} vs {s}");
        assert!(e < 1e-13);
        // symmetric and equal to the self term for identical intervals
        assert!((interval_pair(2.0, 3.5, 0.0, 1.0, t).0 - v).abs() < 1e-15);
        assert!((interval_pair(0.0, 1.0, 0.0, 1.0, t).0 - interval_self(1.0, t).0).abs() < 1e-14);
    }

    #[test]
    fn union_of_adjacent_boxes_equals_merged_box() {
        let u = Domain::box_union(vec![
            AxisBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap(),
            AxisBox::new(vec![1.0, 0.0], vec![0.5, 2.0]).unwrap(),
        ])
        .unwrap();
        for t in [0.01f64, 0.3, 4.0] {
            let a = hc_closed(&u, t).unwrap().value;
            let b = hc_closed_box(&[1.5, 2.0], t).unwrap().value;
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
        }
        assert_eq!(hc_closed(&u, 0.0).unwrap().value, 3.0);
    }

    #[test]
    fn unsupported_and_invalid() {
        let ball = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            hc_closed(&ball, 1.0),
            Err(Error::Unsupported { .. })
        ));
        assert!(hc_closed_interval(1.0, -1.0).is_err());
        assert!(hc_closed_interval(-1.0, 1.0).is_err());
    }

    #[test]
    fn f32_matches_f64() {
        let a = hc_closed_box(&[1.0f32, 2.0], 0.2).unwrap().value as f64;
        let b = hc_closed_box(&[1.0f64, 2.0], 0.2).unwrap().value;
        assert!((a - b).abs() < 1e-5);
    }
}
