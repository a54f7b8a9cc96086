//! Monte Carlo engine: `H(t) = |Ω| · P(X + √(2t) Z ∈ Ω)` with `X` uniform on
//! Ω and `Z` standard normal in R^m.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::engines::{check_time, ErrorKind, Estimate, Method};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::rng;
use crate::scalar::Real;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.58;

/// Samples drawn from one generator stream; fixed so the estimate does not
/// depend on the number of worker threads.
const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 1_000_000,
            seed: rng::DEFAULT_SEED,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1000 {
            return Err(Error::InvalidConfig(format!(
                "n_samples must be at least 1000, got {}",
                self.n_samples
            )));
        }
        Ok(())
    }
}

/// Key for time `t`: every `t` gets its own generator family.
fn time_key<T: Real>(seed: u64, t: T) -> u64 {
    seed ^ t.as_f64().to_bits().wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn hc_mc<T: Real>(d: &Domain<T>, t: T, cfg: &McConfig) -> Result<Estimate<T>> {
    check_time(t)?;
    cfg.validate()?;
    let m = d.dimension();
    let scale = (T::lit(2.0) * t).sqrt();
    let key = time_key(cfg.seed, t);
    let chunks = cfg.n_samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut g = rng::split(key, c as u64);
            let n = CHUNK.min(cfg.n_samples - c * CHUNK);
            let mut y = vec![T::zero(); m];
            let mut hit = 0usize;
            for _ in 0..n {
                let x = d.sample_uniform(&mut g);
                for (yi, &xi) in y.iter_mut().zip(x.iter()) {
                    let z: f64 = StandardNormal.sample(&mut g);
                    *yi = xi + scale * T::lit(z);
                }
                if d.contains(&y).expect("dimension matches") {
                    hit += 1;
                }
            }
            hit
        })
        .sum();
    let n = cfg.n_samples;
    let vol = d.volume();
    let p = hits as f64 / n as f64;
    let half_width = if hits == 0 || hits == n {
        // degenerate sample variance: one-sided 99% bound -ln(0.01)/n
        100f64.ln() / n as f64
    } else {
        Z99 * (p * (1.0 - p) / n as f64).sqrt()
    };
    Ok(Estimate::new(
        vol * T::lit(p),
        vol * T::lit(half_width),
        ErrorKind::Statistical99,
        Method::Mc,
    )
    .with("t", t)
    .with("n_samples", n)
    .with("seed", cfg.seed)
    .with("hits", hits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::closed::hc_closed_interval;

    #[test]
    fn interval_within_confidence_interval() {
        let d = Domain::interval(1.0f64).unwrap();
        let e = hc_mc(&d, 0.1, &McConfig::default()).unwrap();
        let c = hc_closed_interval(1.0, 0.1).unwrap().value;
        assert!(
            (e.value - c).abs() <= e.error_bound,
            "{} ± {} vs {c}",
            e.value,
            e.error_bound
        );
        assert_eq!(e.kind, ErrorKind::Statistical99);
    }

    #[test]
    fn tiny_time_recovers_volume() {
        let d = Domain::boxed(vec![1.0f64, 2.0]).unwrap();
        let e = hc_mc(
            &d,
            1e-8,
            &McConfig {
                n_samples: 20_000,
                seed: 3,
            },
        )
        .unwrap();
        assert!((e.value - 2.0).abs() / 2.0 < 1e-3, "{}", e.value);
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let cfg = McConfig {
            n_samples: 50_000,
            seed: 11,
        };
        assert_eq!(hc_mc(&d, 0.2, &cfg).unwrap(), hc_mc(&d, 0.2, &cfg).unwrap());
        let other = McConfig { seed: 12, ..cfg };
        assert_ne!(
            hc_mc(&d, 0.2, &cfg).unwrap().value,
            hc_mc(&d, 0.2, &other).unwrap().value
        );
    }

    #[test]
    fn too_few_samples_rejected() {
        let d = Domain::interval(1.0).unwrap();
        assert!(hc_mc(
            &d,
            0.1,
            &McConfig {
                n_samples: 10,
                seed: 0
            }
        )
        .is_err());
    }
}
