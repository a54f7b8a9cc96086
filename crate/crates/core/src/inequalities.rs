//! Data-driven catalog of the heat content inequalities and their numerical
//! verification.
//!
//! Each [`InequalityCase`] is `lhs (≤ | ≥) rhs` on a time window expressed in
//! multiples of `diam²`. The refined constants are
//! `(2m-1)/4` (monotonicity) and `((2m-1)/2)²` (convexity); the baseline
//! constants are `(4m²+4m-7) / (8(m+2) e^{1/4})` and `(4m²+4m-7)/16`.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::derivatives::{fd_derivative, DEFAULT_LEVELS};
use crate::engines::Engine;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernel::{kernel_dt_bound_check, kernel_peak};
use crate::scalar::{Rational, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CaseId {
    I04,
    I05,
    I06,
    I07,
    I08,
    I09,
    I010,
    I011,
    Bg24Mono,
    Bg24Conv,
}

impl CaseId {
    pub const ALL: [CaseId; 10] = [
        CaseId::I04,
        CaseId::I05,
        CaseId::I06,
        CaseId::I07,
        CaseId::I08,
        CaseId::I09,
        CaseId::I010,
        CaseId::I011,
        CaseId::Bg24Mono,
        CaseId::Bg24Conv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::I04 => "I04",
            CaseId::I05 => "I05",
            CaseId::I06 => "I06",
            CaseId::I07 => "I07",
            CaseId::I08 => "I08",
            CaseId::I09 => "I09",
            CaseId::I010 => "I010",
            CaseId::I011 => "I011",
            CaseId::Bg24Mono => "BG24_MONO",
            CaseId::Bg24Conv => "BG24_CONV",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownCase(s.to_string()))
    }
}

/// Time window in multiples of `diam²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window<T> {
    /// `t ≥ c · diam²`
    AtLeast(T),
    /// `0 < t ≤ c · diam²`
    AtMost(T),
}

impl<T: Real> Window<T> {
    /// Boundaries are widened by a few ulps so that times computed from a
    /// rounded diameter still count as on the boundary.
    pub fn contains(&self, t: T, diam_sq: T) -> bool {
        let d2 = diam_sq;
        let slack = T::lit(8.0) * T::EPS;
        match *self {
            Window::AtLeast(c) => t >= c * d2 * (T::one() - slack),
            Window::AtMost(c) => t > T::zero() && t <= c * d2 * (T::one() + slack),
        }
    }

    /// Lower multiplier of `diam²` (0 for upper-bounded windows).
    pub fn lower_multiplier(&self) -> T {
        match *self {
            Window::AtLeast(c) => c,
            Window::AtMost(_) => T::zero(),
        }
    }

    /// Upper multiplier, `None` for unbounded windows.
    pub fn upper_multiplier(&self) -> Option<T> {
        match *self {
            Window::AtLeast(_) => None,
            Window::AtMost(c) => Some(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `lhs ≤ rhs`
    Le,
    /// `lhs ≥ rhs`
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lhs {
    /// `∂_t p_t` at the worst grid point of `r² ∈ [0, diam²]`.
    KernelDt,
    /// `H(t)`
    Value,
    /// `d^k H / dt^k`
    Derivative(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantSource {
    Improved,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rhs {
    /// `-((2m-1)/4) p_t / t` at the same grid point as the lhs.
    KernelDtBound,
    /// `-c_mono H / t`
    MonoRatio(ConstantSource),
    /// `c_conv H / t²`
    ConvRatio(ConstantSource),
    /// `e^{-1/8} |Ω|² (4πt)^{-m/2}`
    KernelFloor,
    /// `c_conv e^{-1/8} (4π)^{-m/2} |Ω|² τ^{-m/2-2}`, `τ = t` or `2 diam²`.
    ConvPower { frozen: bool },
    /// `-(c_conv / (m/2 + 1)) e^{-1/8} (4π)^{-m/2} |Ω|² τ^{-m/2-1}`.
    MonoPower { frozen: bool },
}

/// Geometric data the right-hand sides may reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inputs<T> {
    pub m: usize,
    pub t: T,
    pub volume: T,
    pub diameter_squared: T,
    pub heat: T,
}

impl Rhs {
    /// Value and `∂rhs/∂H`.
    pub fn evaluate<T: Real>(&self, x: &Inputs<T>) -> (T, T) {
        let m = x.m;
        let half_m = T::from_usize_lossy(m) / T::lit(2.0);
        let floor = T::lit(-0.125).exp();
        let power_prefactor = |tau: T, extra: i32| {
            let c = improved_constants::<T>(m).1;
            c * floor
                * kernel_peak(m, T::one())
                * x.volume
                * x.volume
                * tau.powf(-half_m - T::from_i32(extra).unwrap())
        };
        let frozen_time = |frozen: bool| {
            if frozen {
                T::lit(2.0) * x.diameter_squared
            } else {
                x.t
            }
        };
        match *self {
            Rhs::KernelDtBound => (T::nan(), T::zero()),
            Rhs::MonoRatio(src) => {
                let c = constants::<T>(m, src).0;
                (-c * x.heat / x.t, -c / x.t)
            }
            Rhs::ConvRatio(src) => {
                let c = constants::<T>(m, src).1;
                (c * x.heat / (x.t * x.t), c / (x.t * x.t))
            }
            Rhs::KernelFloor => (floor * x.volume * x.volume * kernel_peak(m, x.t), T::zero()),
            Rhs::ConvPower { frozen } => (power_prefactor(frozen_time(frozen), 2), T::zero()),
            Rhs::MonoPower { frozen } => (
                -power_prefactor(frozen_time(frozen), 1) / (half_m + T::one()),
                T::zero(),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCase<T> {
    pub id: CaseId,
    pub validity: Window<T>,
    pub lhs: Lhs,
    pub rhs: Rhs,
    pub direction: Direction,
}

pub fn build_case<T: Real>(id: CaseId) -> InequalityCase<T> {
    use ConstantSource::*;
    let one = T::one();
    let two = T::lit(2.0);
    let (validity, lhs, rhs, direction) = match id {
        CaseId::I04 => (
            Window::AtLeast(one),
            Lhs::KernelDt,
            Rhs::KernelDtBound,
            Direction::Le,
        ),
        CaseId::I05 => (
            Window::AtLeast(one),
            Lhs::Derivative(1),
            Rhs::MonoRatio(Improved),
            Direction::Le,
        ),
        CaseId::I06 => (
            Window::AtLeast(two),
            Lhs::Derivative(2),
            Rhs::ConvRatio(Improved),
            Direction::Ge,
        ),
        CaseId::I07 => (
            Window::AtLeast(two),
            Lhs::Value,
            Rhs::KernelFloor,
            Direction::Ge,
        ),
        CaseId::I08 => (
            Window::AtLeast(two),
            Lhs::Derivative(2),
            Rhs::ConvPower { frozen: false },
            Direction::Ge,
        ),
        CaseId::I09 => (
            Window::AtLeast(two),
            Lhs::Derivative(1),
            Rhs::MonoPower { frozen: false },
            Direction::Le,
        ),
        CaseId::I010 => (
            Window::AtMost(two),
            Lhs::Derivative(1),
            Rhs::MonoPower { frozen: true },
            Direction::Le,
        ),
        CaseId::I011 => (
            Window::AtMost(two),
            Lhs::Derivative(2),
            Rhs::ConvPower { frozen: true },
            Direction::Ge,
        ),
        CaseId::Bg24Mono => (
            Window::AtLeast(one),
            Lhs::Derivative(1),
            Rhs::MonoRatio(Baseline),
            Direction::Le,
        ),
        CaseId::Bg24Conv => (
            Window::AtLeast(one),
            Lhs::Derivative(2),
            Rhs::ConvRatio(Baseline),
            Direction::Ge,
        ),
    };
    InequalityCase {
        id,
        validity,
        lhs,
        rhs,
        direction,
    }
}

/// Parses an id and builds its case.
pub fn build_case_str<T: Real>(id: &str) -> Result<InequalityCase<T>> {
    Ok(build_case(id.parse()?))
}

// ---------------------------------------------------------------------------
// Constants

fn m_i64(m: usize) -> i64 {
    i64::try_from(m).expect("dimension fits in i64")
}

/// `((2m-1)/4, ((2m-1)/2)²)` exactly.
pub fn improved_constants_exact(m: usize) -> (Rational, Rational) {
    let k = 2 * m_i64(m) - 1;
    (Rational::new(k, 4), Rational::new(k * k, 4))
}

/// Baseline convexity constant `(4m²+4m-7)/16` and the rational part
/// `(4m²+4m-7)/(8(m+2))` of the baseline monotonicity constant, which carries
/// an extra factor `e^{-1/4}`.
pub fn bg24_constants_exact(m: usize) -> (Rational, Rational) {
    let m = m_i64(m);
    let q = 4 * m * m + 4 * m - 7;
    (Rational::new(q, 8 * (m + 2)), Rational::new(q, 16))
}

fn rational_to<T: Real>(r: Rational) -> T {
    T::lit(*r.numer() as f64) / T::lit(*r.denom() as f64)
}

/// Refined `(monotonicity, convexity)` constants.
pub fn improved_constants<T: Real>(m: usize) -> (T, T) {
    let (a, b) = improved_constants_exact(m);
    (rational_to(a), rational_to(b))
}

/// Baseline `(monotonicity, convexity)` constants.
pub fn bg24_constants<T: Real>(m: usize) -> (T, T) {
    let (a, b) = bg24_constants_exact(m);
    (rational_to::<T>(a) * T::lit(-0.25).exp(), rational_to(b))
}

fn constants<T: Real>(m: usize, src: ConstantSource) -> (T, T) {
    match src {
        ConstantSource::Improved => improved_constants(m),
        ConstantSource::Baseline => bg24_constants(m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsRow<T> {
    pub m: usize,
    pub improved_mono: T,
    pub bg24_mono: T,
    pub ratio_mono: T,
    pub improved_conv: T,
    pub bg24_conv: T,
    pub ratio_conv: T,
    pub integrated_sharper: bool,
}

pub const CONSTANTS_CSV_HEADER: &str =
    "m,improved_mono,bg24_mono,ratio_mono,improved_conv,bg24_conv,ratio_conv,integrated_sharper";

/// Refined versus baseline constants for each `m`.
pub fn compare_constants<T: Real>(ms: impl IntoIterator<Item = usize>) -> Vec<ConstantsRow<T>> {
    ms.into_iter()
        .map(|m| {
            let (im, ic) = improved_constants::<T>(m);
            let (bm, bc) = bg24_constants::<T>(m);
            let (im_x, ic_x) = improved_constants_exact(m);
            let (bm_x, bc_x) = bg24_constants_exact(m);
            ConstantsRow {
                m,
                improved_mono: im,
                bg24_mono: bm,
                // the e^{1/4} factor is applied once to the exact rational ratio
                ratio_mono: rational_to::<T>(im_x / bm_x) * T::lit(0.25).exp(),
                improved_conv: ic,
                bg24_conv: bc,
                ratio_conv: rational_to(ic_x / bc_x),
                integrated_sharper: sharpness_compare::<T>(m).integrated_sharper,
            }
        })
        .collect()
}

impl<T: Real> ConstantsRow<T> {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            self.m,
            self.improved_mono,
            self.bg24_mono,
            self.ratio_mono,
            self.improved_conv,
            self.bg24_conv,
            self.ratio_conv,
            self.integrated_sharper
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessVerdict<T> {
    pub m: usize,
    /// `(2m-1)/4`: monotonicity bound combined with the kernel floor.
    pub c_direct: T,
    /// `(2m-1)² / (2(m+2))`: the integrated convexity bound.
    pub c_integrated: T,
    pub integrated_sharper: bool,
}

/// Compares the two `t^{-m/2-1}` coefficients bounding `-H'`; the
/// comparison is exact in rationals.
pub fn sharpness_compare<T: Real>(m: usize) -> SharpnessVerdict<T> {
    let k = 2 * m_i64(m) - 1;
    let direct = Rational::new(k, 4);
    let integrated = Rational::new(k * k, 2 * (m_i64(m) + 2));
    SharpnessVerdict {
        m,
        c_direct: rational_to(direct),
        c_integrated: rational_to(integrated),
        integrated_sharper: integrated > direct,
    }
}

/// `H(t) (4πt)^{m/2} / |Ω|²`, which lies in `[e^{-1/8}, 1]` for `t ≥ 2 diam²`.
pub fn normalized_heat_content<T: Real>(heat: T, m: usize, t: T, volume: T) -> T {
    heat / (kernel_peak(m, t) * volume * volume)
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TolerancePolicy<T> {
    /// Floor relative to `max(|lhs|, |rhs|)`.
    pub relative_floor: T,
    pub absolute_floor: T,
    pub richardson_levels: usize,
}

impl<T: Real> Default for TolerancePolicy<T> {
    fn default() -> Self {
        Self {
            relative_floor: T::lit(1e-9),
            absolute_floor: T::zero(),
            richardson_levels: DEFAULT_LEVELS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Time outside the validity window; not evaluated.
    Clipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Clipped => "clipped",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow<T> {
    pub t: T,
    pub lhs: T,
    pub rhs: T,
    /// Direction-signed `rhs - lhs`; non-negative when the inequality holds.
    pub margin: T,
    pub tolerance: T,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport<T> {
    pub case: CaseId,
    /// The set actually verified (the raster for raster-based engines).
    pub domain: String,
    pub m: usize,
    pub volume: T,
    pub diameter: T,
    pub engine: String,
    pub rows: Vec<ReportRow<T>>,
    pub overall: bool,
}

pub const REPORT_CSV_HEADER: &str = "case_id,domain_id,m,t,lhs,rhs,margin,tolerance,verdict";

impl<T: Real> VerificationReport<T> {
    pub fn evaluated(&self) -> impl Iterator<Item = &ReportRow<T>> {
        self.rows.iter().filter(|r| r.verdict != Verdict::Clipped)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow<T>> {
        self.rows.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    pub fn write_csv<W: Write>(&self, domain_id: &str, w: &mut W) -> io::Result<()> {
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:?},{:?},{:?},{:?},{:?},{}",
                self.case, domain_id, self.m, r.t, r.lhs, r.rhs, r.margin, r.tolerance, r.verdict
            )?;
        }
        Ok(())
    }
}

/// `n` geometric points from `lo` to `hi`, both endpoints exact.
pub fn geometric_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = hi / lo;
            let last = T::from_usize_lossy(n - 1);
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    i if i == n - 1 => hi,
                    i => lo * ratio.powf(T::from_usize_lossy(i) / last),
                })
                .collect()
        }
    }
}

/// Lower end of the default grid for upper-bounded windows, in units of diam².
pub const SMALL_TIME_MULTIPLIER: f64 = 0.05;
/// Span of the default grid for lower-bounded windows.
pub const LARGE_TIME_SPAN: f64 = 100.0;

/// Geometric grid of `n` times inside the case's window:
/// `[c, 100c]·diam²` for `t ≥ c·diam²`, `[0.05, c]·diam²` for `t ≤ c·diam²`.
pub fn default_t_grid<T: Real>(case: &InequalityCase<T>, diameter_squared: T, n: usize) -> Vec<T> {
    let d2 = diameter_squared;
    match case.validity {
        Window::AtLeast(c) => geometric_grid(c * d2, T::lit(LARGE_TIME_SPAN) * c * d2, n),
        Window::AtMost(c) => geometric_grid(T::lit(SMALL_TIME_MULTIPLIER) * d2, c * d2, n),
    }
}

/// Checks `case` on `domain` at each time of `t_grid`. Times outside the
/// validity window produce `clipped` rows.
pub fn verify<T: Real>(
    case: &InequalityCase<T>,
    domain: &Domain<T>,
    t_grid: &[T],
    engine: &Engine<T>,
    policy: &TolerancePolicy<T>,
) -> Result<VerificationReport<T>> {
    run(case, domain, t_grid, engine, policy, true)
}

/// Like [`verify`] but evaluates every time, including those outside the
/// validity window. For exploring where a bound empirically holds.
pub fn probe<T: Real>(
    case: &InequalityCase<T>,
    domain: &Domain<T>,
    t_grid: &[T],
    engine: &Engine<T>,
    policy: &TolerancePolicy<T>,
) -> Result<VerificationReport<T>> {
    if case.lhs == Lhs::KernelDt {
        return Err(Error::InvalidConfig(
            "the pointwise kernel check has no meaning outside t ≥ diam²".into(),
        ));
    }
    run(case, domain, t_grid, engine, policy, false)
}

fn run<T: Real>(
    case: &InequalityCase<T>,
    domain: &Domain<T>,
    t_grid: &[T],
    engine: &Engine<T>,
    policy: &TolerancePolicy<T>,
    clip: bool,
) -> Result<VerificationReport<T>> {
    if let Some(&t) = t_grid.iter().find(|t| !(**t > T::zero() && t.is_finite())) {
        return Err(Error::InvalidTime(t.as_f64()));
    }
    let target = engine.prepare(domain)?;
    let m = target.dimension();
    let volume = target.volume();
    let diameter = target.diameter();
    let diameter_squared = target.diameter_squared();
    let heat = |t: T| engine.heat_content(&target, t);

    let rows: Vec<ReportRow<T>> = t_grid
        .par_iter()
        .map(|&t| -> Result<ReportRow<T>> {
            if clip && !case.validity.contains(t, diameter_squared) {
                return Ok(ReportRow {
                    t,
                    lhs: T::nan(),
                    rhs: T::nan(),
                    margin: T::nan(),
                    tolerance: T::zero(),
                    verdict: Verdict::Clipped,
                });
            }
            let (lhs, rhs, lhs_err, rhs_err) = if case.lhs == Lhs::KernelDt {
                let c = kernel_dt_bound_check(m, t, diameter)?;
                (c.lhs, c.rhs, T::zero(), T::zero())
            } else {
                let h = heat(t)?;
                let (lhs, lhs_err) = match case.lhs {
                    Lhs::Value => (h.value, h.error_bound),
                    Lhs::Derivative(k) => {
                        let d = fd_derivative(heat, t, k, policy.richardson_levels)?;
                        (d.value, d.error_estimate)
                    }
                    Lhs::KernelDt => unreachable!(),
                };
                let inputs = Inputs {
                    m,
                    t,
                    volume,
                    diameter_squared,
                    heat: h.value,
                };
                let (rhs, sens) = case.rhs.evaluate(&inputs);
                (lhs, rhs, lhs_err, sens.abs() * h.error_bound)
            };
            let margin = match case.direction {
                Direction::Le => rhs - lhs,
                Direction::Ge => lhs - rhs,
            };
            let tolerance = lhs_err
                + rhs_err
                + policy
                    .absolute_floor
                    .max(policy.relative_floor * lhs.abs().max(rhs.abs()));
            let verdict = if margin >= -tolerance {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            Ok(ReportRow {
                t,
                lhs,
                rhs,
                margin,
                tolerance,
                verdict,
            })
        })
        .collect::<Result<_>>()?;
    let overall = rows.iter().all(|r| r.verdict != Verdict::Fail);
    Ok(VerificationReport {
        case: case.id,
        domain: target.to_string(),
        m,
        volume,
        diameter,
        engine: engine.describe(),
        rows,
        overall,
    })
}
