//! Direct double sum over raster cell pairs: the reference every other
//! engine is checked against.
//!
//! `H ≈ h^{2m} Σ_i Σ_j p_t(c_i, c_j)` over occupied cell centers. The kernel
//! factorizes, so per-axis tables of `exp(-(Δ h)²/4t)` indexed by integer
//! offset replace the exponential in the inner loop; the sum itself is still
//! the full O(N²) pair sum.

use rayon::prelude::*;

use crate::engines::{check_time, ErrorKind, Estimate, Method};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernel::kernel_peak;
use crate::scalar::{exp_clamped, Real};

/// Largest occupied-cell count accepted.
pub const ORACLE_CELL_LIMIT: usize = 100_000;

/// Midpoint-rule pair sum on a raster domain.
///
/// The error bound is the midpoint remainder over each 2m-dimensional cell
/// pair, `h² / 24 · Σ_k sup |∂_k² p_t|` with `sup |∂²_{x_a} p_t| = (4πt)^{-m/2} / 2t`,
/// i.e. `|R|² h² m (4πt)^{-m/2} / (24 t)`.
pub fn hc_bruteforce_pairs<T: Real>(r: &Domain<T>, t: T) -> Result<Estimate<T>> {
    check_time(t)?;
    let raster = r.as_raster().ok_or_else(|| Error::Unsupported {
        engine: "brute",
        what: format!("non-raster domain {r}; rasterize first"),
    })?;
    let n = raster.occupied_count();
    if n > ORACLE_CELL_LIMIT {
        return Err(Error::OracleScaleExceeded {
            cells: n,
            limit: ORACLE_CELL_LIMIT,
        });
    }
    let m = raster.dimension();
    let h = raster.spacing();
    let four_t = T::lit(4.0) * t;
    let tables: Vec<Vec<T>> = raster
        .shape()
        .iter()
        .map(|&len| {
            (0..len)
                .map(|k| {
                    let d = T::from_usize_lossy(k) * h;
                    exp_clamped(-d * d / four_t)
                })
                .collect()
        })
        .collect();
    let cells = raster.occupied_indices();
    // Row sums in parallel, combined in index order for reproducibility.
    let rows: Vec<T> = cells
        .par_iter()
        .map(|ci| {
            let mut acc = T::zero();
            for cj in &cells {
                let mut w = T::one();
                for a in 0..m {
                    w = w * tables[a][ci[a].abs_diff(cj[a])];
                }
                acc = acc + w;
            }
            acc
        })
        .collect();
    let sum = rows.iter().fold(T::zero(), |acc, &v| acc + v);
    let cell_vol = h.powi(m as i32);
    let peak = kernel_peak(m, t);
    let value = sum * cell_vol * cell_vol * peak;
    let vol = T::from_usize_lossy(n) * cell_vol;
    let bound = vol * vol * h * h * T::from_usize_lossy(m) * peak / (T::lit(24.0) * t);
    Ok(Estimate::new(
        value,
        bound + T::EPS * T::from_usize_lossy(n) * value,
        ErrorKind::Certified,
        Method::Brute,
    )
    .with("t", t)
    .with("h", h)
    .with("cells", n))
}
