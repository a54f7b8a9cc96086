//! Heat content engines.
//!
//! Four independent routes to `H_Ω(t) = ∫_Ω ∫_Ω p_t(x, y) dx dy`:
//!
//! * [`closed`]: erf closed forms for intervals, boxes and disjoint box unions.
//! * [`grid`]: squared semigroup `H(t) = ‖e^{(t/2)Δ} χ_Ω‖²` via separable
//!   Gaussian convolution of the rasterized indicator.
//! * [`mc`]: Monte Carlo over `|Ω| · P(X + √(2t) Z ∈ Ω)`.
//! * [`brute`]: direct midpoint double sum over raster cell pairs.
//!
//! All engines take the caller's `t`; the grid engine halves it internally.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::scalar::Real;

pub mod brute;
pub mod closed;
pub mod grid;
pub mod mc;

pub use brute::{hc_bruteforce_pairs, ORACLE_CELL_LIMIT};
pub use closed::{hc_closed, hc_closed_box, hc_closed_interval};
pub use grid::{hc_d2_semigroup, hc_grid, laplacian_field, semigroup_field, Field, GridConfig};
pub use mc::{hc_mc, McConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorKind {
    Certified,
    /// Half-width of a 99% normal confidence interval.
    Statistical99,
    Heuristic,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Certified => "certified",
            ErrorKind::Statistical99 => "statistical_99",
            ErrorKind::Heuristic => "heuristic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Closed,
    Grid,
    Mc,
    Brute,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Closed => "closed",
            Method::Grid => "grid",
            Method::Mc => "mc",
            Method::Brute => "brute",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Method::Closed),
            "grid" => Ok(Method::Grid),
            "mc" => Ok(Method::Mc),
            "brute" => Ok(Method::Brute),
            other => Err(Error::InvalidConfig(format!("unknown engine \"{other}\""))),
        }
    }
}

/// A heat content value with its error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error_bound: T,
    pub kind: ErrorKind,
    pub method: Method,
    /// Method parameters actually used.
    pub meta: BTreeMap<&'static str, String>,
}

impl<T: Real> Estimate<T> {
    pub(crate) fn new(value: T, error_bound: T, kind: ErrorKind, method: Method) -> Self {
        debug_assert!(error_bound >= T::zero());
        Self {
            value,
            error_bound,
            kind,
            method,
            meta: BTreeMap::new(),
        }
    }

    pub(crate) fn with(mut self, key: &'static str, value: impl ToString) -> Self {
        self.meta.insert(key, value.to_string());
        self
    }

    /// True when the two estimates agree within the sum of their bounds.
    pub fn agrees_with(&self, other: &Self) -> bool {
        (self.value - other.value).abs() <= self.error_bound + other.error_bound
    }
}

/// Engine choice plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Engine<T> {
    Closed,
    Grid(GridConfig<T>),
    Mc(McConfig),
    /// Brute force on a raster of spacing `h` (default: the domain's default spacing).
    Brute {
        h: Option<T>,
    },
}

impl<T: Real> Engine<T> {
    pub fn method(&self) -> Method {
        match self {
            Engine::Closed => Method::Closed,
            Engine::Grid(_) => Method::Grid,
            Engine::Mc(_) => Method::Mc,
            Engine::Brute { .. } => Method::Brute,
        }
    }

    /// Closed form when the domain has one, grid otherwise.
    pub fn default_for(d: &Domain<T>) -> Self {
        if closed::supports(d) {
            Engine::Closed
        } else {
            Engine::Grid(GridConfig::default())
        }
    }

    /// The set this engine actually integrates over: raster-based engines
    /// work on the rasterized domain, the others on `d` itself.
    pub fn prepare(&self, d: &Domain<T>) -> Result<Domain<T>> {
        let h = match self {
            Engine::Grid(cfg) => cfg.h,
            Engine::Brute { h } => *h,
            Engine::Closed | Engine::Mc(_) => return Ok(d.clone()),
        };
        if d.as_raster().is_some() {
            return Ok(d.clone());
        }
        d.rasterize(h.unwrap_or_else(|| d.default_spacing()))
    }

    /// `H_Ω(t)` by this engine.
    pub fn heat_content(&self, d: &Domain<T>, t: T) -> Result<Estimate<T>> {
        match self {
            Engine::Closed => hc_closed(d, t),
            Engine::Grid(cfg) => hc_grid(d, t, cfg),
            Engine::Mc(cfg) => hc_mc(d, t, cfg),
            Engine::Brute { h } => {
                let r = match d.as_raster() {
                    Some(_) => d.clone(),
                    None => d.rasterize(h.unwrap_or_else(|| d.default_spacing()))?,
                };
                hc_bruteforce_pairs(&r, t)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Engine::Closed => "closed".into(),
            Engine::Grid(cfg) => format!(
                "grid(h={},padding_sigmas={},points_per_sigma={},richardson={})",
                cfg.h.map_or("auto".to_string(), |h| h.to_string()),
                cfg.padding_sigmas,
                cfg.points_per_sigma,
                cfg.richardson
            ),
            Engine::Mc(cfg) => format!("mc(n_samples={},seed={})", cfg.n_samples, cfg.seed),
            Engine::Brute { h } => format!(
                "brute(h={})",
                h.map_or("auto".to_string(), |h| h.to_string())
            ),
        }
    }
}

pub(crate) fn check_time<T: Real>(t: T) -> Result<()> {
    if t > T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTime(t.as_f64()))
    }
}
