//! Bounded open sets in R^m and the geometric quantities the heat content
//! bounds consume: volume, diameter, membership, sampling and rasterization.
//!
//! Membership is open-set membership; boundary points are outside. Rasters use
//! the cell-center rule and describe the interior of the union of their
//! occupied closed cells.

use std::fmt;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Cells per smallest feature used when no spacing is given.
pub const DEFAULT_CELLS_PER_FEATURE: usize = 50;

/// A point of R^m.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T>(pub Vec<T>);

impl<T> Deref for Point<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> From<Vec<T>> for Point<T> {
    fn from(v: Vec<T>) -> Self {
        Point(v)
    }
}

/// Axis-aligned box `corner + (0, lengths)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox<T> {
    pub corner: Vec<T>,
    pub lengths: Vec<T>,
}

impl<T: Real> AxisBox<T> {
    pub fn new(corner: Vec<T>, lengths: Vec<T>) -> Result<Self> {
        if corner.is_empty() || corner.len() != lengths.len() {
            return Err(Error::InvalidDomain(format!(
                "box corner has {} coordinates but {} lengths",
                corner.len(),
                lengths.len()
            )));
        }
        check_positive("box length", &lengths)?;
        check_finite("box corner", &corner)?;
        Ok(Self { corner, lengths })
    }

    pub fn dimension(&self) -> usize {
        self.lengths.len()
    }

    pub fn volume(&self) -> T {
        self.lengths.iter().fold(T::one(), |acc, &l| acc * l)
    }

    fn contains(&self, p: &[T]) -> bool {
        p.iter()
            .zip(self.corner.iter().zip(&self.lengths))
            .all(|(&x, (&c, &l))| x > c && x < c + l)
    }

    /// True when the open interiors intersect.
    pub fn overlaps(&self, other: &Self) -> bool {
        (0..self.dimension()).all(|i| {
            let lo = self.corner[i].max(other.corner[i]);
            let hi = (self.corner[i] + self.lengths[i]).min(other.corner[i] + other.lengths[i]);
            lo < hi
        })
    }

    fn corners(&self) -> impl Iterator<Item = Vec<T>> + '_ {
        let m = self.dimension();
        (0..1usize << m).map(move |mask| {
            (0..m)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        self.corner[i] + self.lengths[i]
                    } else {
                        self.corner[i]
                    }
                })
                .collect()
        })
    }
}

/// Occupancy grid: cell `i` along axis `a` spans
/// `origin[a] + [i, i + 1) * spacing`. Storage is row-major, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    origin: Vec<T>,
    spacing: T,
    shape: Vec<usize>,
    occupied: Vec<bool>,
}

impl<T: Real> Raster<T> {
    pub fn new(origin: Vec<T>, spacing: T, shape: Vec<usize>, occupied: Vec<bool>) -> Result<Self> {
        if origin.is_empty() || origin.len() != shape.len() {
            return Err(Error::InvalidDomain(
                "raster origin and shape must have the same positive length".into(),
            ));
        }
        check_finite("raster origin", &origin)?;
        check_positive("raster spacing", &[spacing])?;
        let total: usize = shape.iter().product();
        if total != occupied.len() {
            return Err(Error::InvalidDomain(format!(
                "raster has {} cells but shape implies {total}",
                occupied.len()
            )));
        }
        if !occupied.iter().any(|&b| b) {
            return Err(Error::InvalidDomain("raster has no occupied cell".into()));
        }
        Ok(Self {
            origin,
            spacing,
            shape,
            occupied,
        })
    }

    pub fn origin(&self) -> &[T] {
        &self.origin
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupied
    }

    pub fn dimension(&self) -> usize {
        self.shape.len()
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&b| b).count()
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Multi-indices of occupied cells, in storage order.
    pub fn occupied_indices(&self) -> Vec<Vec<usize>> {
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| self.unravel(k))
            .collect()
    }

    pub fn cell_center(&self, idx: &[usize]) -> Vec<T> {
        idx.iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + (T::from_usize_lossy(i) + T::lit(0.5)) * self.spacing)
            .collect()
    }

    fn is_occupied(&self, idx: &[isize]) -> bool {
        let mut u = Vec::with_capacity(idx.len());
        for (&i, &n) in idx.iter().zip(&self.shape) {
            if i < 0 || i as usize >= n {
                return false;
            }
            u.push(i as usize);
        }
        self.occupied[self.ravel(&u)]
    }

    fn contains(&self, p: &[T]) -> bool {
        // A point on a grid plane is interior only if every adjacent cell is occupied.
        let mut candidates: Vec<Vec<isize>> = Vec::with_capacity(p.len());
        for (a, &x) in p.iter().enumerate() {
            let s = (x - self.origin[a]) / self.spacing;
            let f = s.floor();
            let k = match f.to_isize() {
                Some(k) => k,
                None => return false,
            };
            if s == f {
                candidates.push(vec![k - 1, k]);
            } else {
                candidates.push(vec![k]);
            }
        }
        let mut stack = vec![Vec::with_capacity(p.len())];
        for c in &candidates {
            let mut next = Vec::with_capacity(stack.len() * c.len());
            for prefix in &stack {
                for &k in c {
                    let mut v: Vec<isize> = prefix.clone();
                    v.push(k);
                    next.push(v);
                }
            }
            stack = next;
        }
        stack.iter().all(|idx| self.is_occupied(idx))
    }

    /// Occupied cells that are first or last occupied in their row along every
    /// axis. Every vertex of the convex hull is a corner of one of them.
    fn extreme_cells(&self) -> Vec<Vec<usize>> {
        let m = self.shape.len();
        let mut extreme = self.occupied.clone();
        for axis in 0..m {
            let mut keep = vec![false; self.occupied.len()];
            let stride: usize = self.shape[axis + 1..].iter().product();
            let n = self.shape[axis];
            for base in 0..self.occupied.len() {
                if !(base / stride).is_multiple_of(n) {
                    continue;
                }
                let row = (0..n).map(|i| base + i * stride);
                let first = row.clone().find(|&k| self.occupied[k]);
                let last = row.rev().find(|&k| self.occupied[k]);
                if let (Some(f), Some(l)) = (first, last) {
                    keep[f] = true;
                    keep[l] = true;
                }
            }
            for (e, k) in extreme.iter_mut().zip(keep) {
                *e = *e && k;
            }
        }
        extreme
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| self.unravel(k))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape<T> {
    /// `(0, length)` in R^1.
    Interval {
        length: T,
    },
    /// `(0, l_1) x ... x (0, l_m)`.
    Box {
        lengths: Vec<T>,
    },
    Ball {
        center: Vec<T>,
        radius: T,
    },
    BoxUnion {
        boxes: Vec<AxisBox<T>>,
    },
    Raster(Raster<T>),
}

/// A bounded open set of R^m. Immutable once built; every constructor
/// validates its invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    shape: Shape<T>,
}

impl<T: Real> Domain<T> {
    pub fn interval(length: T) -> Result<Self> {
        check_positive("interval length", &[length])?;
        Ok(Self {
            shape: Shape::Interval { length },
        })
    }

    pub fn boxed(lengths: Vec<T>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidDomain("box needs at least one length".into()));
        }
        check_positive("box length", &lengths)?;
        Ok(Self {
            shape: Shape::Box { lengths },
        })
    }

    pub fn ball(center: Vec<T>, radius: T) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidDomain(
                "ball center needs a coordinate".into(),
            ));
        }
        check_finite("ball center", &center)?;
        check_positive("ball radius", &[radius])?;
        Ok(Self {
            shape: Shape::Ball { center, radius },
        })
    }

    pub fn box_union(boxes: Vec<AxisBox<T>>) -> Result<Self> {
        let first = boxes
            .first()
            .ok_or_else(|| Error::InvalidDomain("box union needs at least one box".into()))?;
        let m = first.dimension();
        if let Some(b) = boxes.iter().find(|b| b.dimension() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: b.dimension(),
            });
        }
        for (i, a) in boxes.iter().enumerate() {
            for (j, b) in boxes.iter().enumerate().skip(i + 1) {
                if a.overlaps(b) {
                    return Err(Error::InvalidDomain(format!("boxes {i} and {j} overlap")));
                }
            }
        }
        Ok(Self {
            shape: Shape::BoxUnion { boxes },
        })
    }

    pub fn raster(raster: Raster<T>) -> Self {
        Self {
            shape: Shape::Raster(raster),
        }
    }

    pub fn shape(&self) -> &Shape<T> {
        &self.shape
    }

    pub fn as_raster(&self) -> Option<&Raster<T>> {
        match &self.shape {
            Shape::Raster(r) => Some(r),
            _ => None,
        }
    }

    pub fn dimension(&self) -> usize {
        match &self.shape {
            Shape::Interval { .. } => 1,
            Shape::Box { lengths } => lengths.len(),
            Shape::Ball { center, .. } => center.len(),
            Shape::BoxUnion { boxes } => boxes[0].dimension(),
            Shape::Raster(r) => r.dimension(),
        }
    }

    /// Lebesgue measure |Ω|.
    pub fn volume(&self) -> T {
        match &self.shape {
            Shape::Interval { length } => *length,
            Shape::Box { lengths } => lengths.iter().fold(T::one(), |acc, &l| acc * l),
            Shape::Ball { center, radius } => {
                unit_ball_volume::<T>(center.len()) * radius.powi(center.len() as i32)
            }
            Shape::BoxUnion { boxes } => boxes.iter().fold(T::zero(), |acc, b| acc + b.volume()),
            Shape::Raster(r) => {
                T::from_usize_lossy(r.occupied_count()) * r.spacing.powi(r.dimension() as i32)
            }
        }
    }

    /// diam(Ω) = sup |x - y|.
    pub fn diameter(&self) -> T {
        self.diameter_squared().sqrt()
    }

    /// `diam(Ω)²`, without the rounding of a square root; `Σ L_i²` for a box.
    pub fn diameter_squared(&self) -> T {
        match &self.shape {
            Shape::Interval { length } => *length * *length,
            Shape::Box { lengths } => lengths.iter().fold(T::zero(), |acc, &l| acc + l * l),
            Shape::Ball { radius, .. } => (*radius + *radius) * (*radius + *radius),
            Shape::BoxUnion { boxes } => {
                let corners: Vec<Vec<T>> = boxes.iter().flat_map(|b| b.corners()).collect();
                max_pair_distance_squared(&corners)
            }
            Shape::Raster(r) => {
                let cells = r.extreme_cells();
                let m = r.dimension();
                let mut corners = Vec::with_capacity(cells.len() << m);
                for idx in &cells {
                    for mask in 0..1usize << m {
                        corners.push(
                            (0..m)
                                .map(|a| {
                                    let i = idx[a] + (mask >> a & 1);
                                    r.origin[a] + T::from_usize_lossy(i) * r.spacing
                                })
                                .collect(),
                        );
                    }
                }
                max_pair_distance_squared(&corners)
            }
        }
    }

    /// Open-set membership; boundary points are outside.
    pub fn contains(&self, p: &[T]) -> Result<bool> {
        let m = self.dimension();
        if p.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: p.len(),
            });
        }
        Ok(match &self.shape {
            Shape::Interval { length } => p[0] > T::zero() && p[0] < *length,
            Shape::Box { lengths } => p.iter().zip(lengths).all(|(&x, &l)| x > T::zero() && x < l),
            Shape::Ball { center, radius } => {
                let r2 = p
                    .iter()
                    .zip(center)
                    .fold(T::zero(), |acc, (&x, &c)| acc + (x - c) * (x - c));
                r2 < *radius * *radius
            }
            Shape::BoxUnion { boxes } => boxes.iter().any(|b| b.contains(p)),
            Shape::Raster(r) => r.contains(p),
        })
    }

    /// Closed bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<T>, Vec<T>) {
        match &self.shape {
            Shape::Interval { length } => (vec![T::zero()], vec![*length]),
            Shape::Box { lengths } => (vec![T::zero(); lengths.len()], lengths.clone()),
            Shape::Ball { center, radius } => (
                center.iter().map(|&c| c - *radius).collect(),
                center.iter().map(|&c| c + *radius).collect(),
            ),
            Shape::BoxUnion { boxes } => {
                let m = boxes[0].dimension();
                let mut lo = vec![T::infinity(); m];
                let mut hi = vec![T::neg_infinity(); m];
                for b in boxes {
                    for a in 0..m {
                        lo[a] = lo[a].min(b.corner[a]);
                        hi[a] = hi[a].max(b.corner[a] + b.lengths[a]);
                    }
                }
                (lo, hi)
            }
            Shape::Raster(r) => {
                let hi = r
                    .origin
                    .iter()
                    .zip(&r.shape)
                    .map(|(&o, &n)| o + T::from_usize_lossy(n) * r.spacing)
                    .collect();
                (r.origin.clone(), hi)
            }
        }
    }

    /// Length of the smallest geometric feature: shortest side, ball
    /// diameter, or raster spacing.
    pub fn smallest_feature(&self) -> T {
        match &self.shape {
            Shape::Interval { length } => *length,
            Shape::Box { lengths } => lengths.iter().copied().fold(T::infinity(), T::min),
            Shape::Ball { radius, .. } => *radius + *radius,
            Shape::BoxUnion { boxes } => boxes
                .iter()
                .flat_map(|b| b.lengths.iter().copied())
                .fold(T::infinity(), T::min),
            Shape::Raster(r) => r.spacing,
        }
    }

    /// Spacing giving [`DEFAULT_CELLS_PER_FEATURE`] cells across the smallest
    /// feature; a raster keeps its own spacing.
    pub fn default_spacing(&self) -> T {
        match &self.shape {
            Shape::Raster(r) => r.spacing,
            _ => self.smallest_feature() / T::from_usize_lossy(DEFAULT_CELLS_PER_FEATURE),
        }
    }

    /// Uniform sample from Ω.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<T> {
        loop {
            let p = self.sample_candidate(rng);
            // Candidates land on the boundary only with probability zero.
            if self.contains(&p).unwrap_or(false) {
                return Point(p);
            }
        }
    }

    fn sample_candidate<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let unit = |rng: &mut R| T::lit(rng.random::<f64>());
        match &self.shape {
            Shape::Interval { length } => vec![unit(rng) * *length],
            Shape::Box { lengths } => lengths.iter().map(|&l| unit(rng) * l).collect(),
            Shape::Ball { center, radius } => center
                .iter()
                .map(|&c| c - *radius + T::lit(2.0) * *radius * unit(rng))
                .collect(),
            Shape::BoxUnion { boxes } => {
                let total = self.volume();
                let mut pick = unit(rng) * total;
                let mut chosen = &boxes[boxes.len() - 1];
                for b in boxes {
                    let v = b.volume();
                    if pick < v {
                        chosen = b;
                        break;
                    }
                    pick = pick - v;
                }
                chosen
                    .corner
                    .iter()
                    .zip(&chosen.lengths)
                    .map(|(&c, &l)| c + unit(rng) * l)
                    .collect()
            }
            Shape::Raster(r) => {
                let count = r.occupied_count();
                let target = rng.random_range(0..count);
                let flat = r
                    .occupied
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .nth(target)
                    .map(|(k, _)| k)
                    .expect("target below occupied count");
                let idx = r.unravel(flat);
                idx.iter()
                    .zip(&r.origin)
                    .map(|(&i, &o)| o + (T::from_usize_lossy(i) + unit(rng)) * r.spacing)
                    .collect()
            }
        }
    }

    /// Cell-center rasterization on a grid anchored at the bounding box.
    pub fn rasterize(&self, h: T) -> Result<Domain<T>> {
        check_positive("raster spacing", &[h])?;
        let feature = self.smallest_feature();
        if h >= feature {
            return Err(Error::ResolutionTooCoarse {
                spacing: h.as_f64(),
                feature: feature.as_f64(),
            });
        }
        let (lo, hi) = self.bounding_box();
        let shape: Vec<usize> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &u)| {
                let n = ((u - l) / h - T::lit(1e-9)).ceil();
                n.to_usize().unwrap_or(1).max(1)
            })
            .collect();
        let total: usize = shape.iter().product();
        let mut raster = Raster {
            origin: lo,
            spacing: h,
            shape,
            occupied: vec![false; total],
        };
        for k in 0..total {
            let c = raster.cell_center(&raster.unravel(k));
            raster.occupied[k] = self.contains(&c)?;
        }
        if !raster.occupied.iter().any(|&b| b) {
            return Err(Error::ResolutionTooCoarse {
                spacing: h.as_f64(),
                feature: feature.as_f64(),
            });
        }
        Ok(Domain::raster(raster))
    }

    /// Same set magnified by `s` about the origin.
    pub fn scaled(&self, s: T) -> Result<Domain<T>> {
        check_positive("scale", &[s])?;
        let sc = |v: &[T]| v.iter().map(|&x| x * s).collect::<Vec<T>>();
        match &self.shape {
            Shape::Interval { length } => Domain::interval(*length * s),
            Shape::Box { lengths } => Domain::boxed(sc(lengths)),
            Shape::Ball { center, radius } => Domain::ball(sc(center), *radius * s),
            Shape::BoxUnion { boxes } => Domain::box_union(
                boxes
                    .iter()
                    .map(|b| AxisBox::new(sc(&b.corner), sc(&b.lengths)))
                    .collect::<Result<_>>()?,
            ),
            Shape::Raster(r) => Ok(Domain::raster(Raster::new(
                sc(&r.origin),
                r.spacing * s,
                r.shape.clone(),
                r.occupied.clone(),
            )?)),
        }
    }

    /// Axis-aligned boxes whose disjoint union is Ω, when Ω is box-shaped.
    pub fn as_boxes(&self) -> Option<Vec<AxisBox<T>>> {
        match &self.shape {
            Shape::Interval { length } => Some(vec![AxisBox {
                corner: vec![T::zero()],
                lengths: vec![*length],
            }]),
            Shape::Box { lengths } => Some(vec![AxisBox {
                corner: vec![T::zero(); lengths.len()],
                lengths: lengths.clone(),
            }]),
            Shape::BoxUnion { boxes } => Some(boxes.clone()),
            _ => None,
        }
    }
}

impl<T: Real> fmt::Display for Domain<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[T]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match &self.shape {
            Shape::Interval { length } => write!(f, "interval(L={length})"),
            Shape::Box { lengths } => write!(f, "box({})", list(lengths)),
            Shape::Ball { center, radius } => write!(f, "ball(c=({}),r={radius})", list(center)),
            Shape::BoxUnion { boxes } => {
                write!(f, "box_union(k={},m={})", boxes.len(), boxes[0].dimension())
            }
            Shape::Raster(r) => write!(
                f,
                "raster(m={},h={},cells={})",
                r.dimension(),
                r.spacing,
                r.occupied_count()
            ),
        }
    }
}

/// Volume of the unit ball in R^m.
pub fn unit_ball_volume<T: Real>(m: usize) -> T {
    // V_m = V_{m-2} * 2 pi / m, V_0 = 1, V_1 = 2
    let two_pi = T::PI() + T::PI();
    let even = m.is_multiple_of(2);
    let mut v = if even { T::one() } else { T::lit(2.0) };
    let mut k = if even { 2 } else { 3 };
    while k <= m {
        v = v * two_pi / T::from_usize_lossy(k);
        k += 2;
    }
    v
}

fn max_pair_distance_squared<T: Real>(points: &[Vec<T>]) -> T {
    let mut best = T::zero();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d2 = a
                .iter()
                .zip(b)
                .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
            best = best.max(d2);
        }
    }
    best
}

fn check_positive<T: Real>(what: &str, v: &[T]) -> Result<()> {
    match v.iter().find(|x| !(x.is_finite() && **x > T::zero())) {
        Some(x) => Err(Error::InvalidDomain(format!(
            "{what} must be positive and finite, got {x}"
        ))),
        None => Ok(()),
    }
}

fn check_finite<T: Real>(what: &str, v: &[T]) -> Result<()> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(Error::InvalidDomain(format!(
            "{what} must be finite, got {x}"
        ))),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// JSON configuration

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxSpec {
    corner: Vec<f64>,
    lengths: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSpec {
    dimension: usize,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lengths: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boxes: Option<Vec<BoxSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    origin: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cells: Option<serde_json::Value>,
}

impl DomainSpec {
    fn present_fields(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        if self.length.is_some() {
            f.push("length");
        }
        if self.lengths.is_some() {
            f.push("lengths");
        }
        if self.center.is_some() {
            f.push("center");
        }
        if self.radius.is_some() {
            f.push("radius");
        }
        if self.boxes.is_some() {
            f.push("boxes");
        }
        if self.origin.is_some() {
            f.push("origin");
        }
        if self.spacing.is_some() {
            f.push("spacing");
        }
        if self.cells.is_some() {
            f.push("cells");
        }
        f
    }
}

fn missing(kind: &str, field: &str) -> Error {
    Error::DomainFile(format!("kind \"{kind}\" requires field \"{field}\""))
}

fn to_real<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

/// Flattens an m-deep nested array of 0/1 into (shape, row-major bits).
fn parse_cells(v: &serde_json::Value, m: usize) -> Result<(Vec<usize>, Vec<bool>)> {
    fn walk(
        v: &serde_json::Value,
        depth: usize,
        m: usize,
        shape: &mut Vec<usize>,
        out: &mut Vec<bool>,
    ) -> Result<()> {
        if depth == m {
            return match v.as_u64() {
                Some(0) => {
                    out.push(false);
                    Ok(())
                }
                Some(1) => {
                    out.push(true);
                    Ok(())
                }
                _ => match v.as_bool() {
                    Some(b) => {
                        out.push(b);
                        Ok(())
                    }
                    None => Err(Error::DomainFile(format!(
                        "cell value must be 0 or 1, got {v}"
                    ))),
                },
            };
        }
        let arr = v
            .as_array()
            .ok_or_else(|| Error::DomainFile(format!("cells must be nested {m} levels deep")))?;
        if arr.is_empty() {
            return Err(Error::DomainFile("cells contain an empty axis".into()));
        }
        if shape.len() == depth {
            shape.push(arr.len());
        } else if shape[depth] != arr.len() {
            return Err(Error::DomainFile("cells grid is ragged".into()));
        }
        for x in arr {
            walk(x, depth + 1, m, shape, out)?;
        }
        Ok(())
    }
    let mut shape = Vec::new();
    let mut out = Vec::new();
    walk(v, 0, m, &mut shape, &mut out)?;
    Ok((shape, out))
}

fn nest_cells(shape: &[usize], bits: &[bool]) -> serde_json::Value {
    if shape.is_empty() {
        return serde_json::Value::from(u8::from(bits[0]));
    }
    let stride: usize = shape[1..].iter().product();
    serde_json::Value::Array(
        (0..shape[0])
            .map(|i| nest_cells(&shape[1..], &bits[i * stride..(i + 1) * stride]))
            .collect(),
    )
}

impl<T: Real> Domain<T> {
    /// Parses the JSON domain description. Unknown fields, and fields that do
    /// not belong to the declared kind, are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DomainSpec =
            serde_json::from_str(text).map_err(|e| Error::DomainFile(e.to_string()))?;
        let m = spec.dimension;
        if m == 0 {
            return Err(Error::DomainFile("dimension must be at least 1".into()));
        }
        let allowed: &[&str] = match spec.kind.as_str() {
            "interval" => &["length"],
            "box" => &["lengths"],
            "ball" => &["center", "radius"],
            "box_union" => &["boxes"],
            "raster" => &["origin", "spacing", "cells"],
            other => return Err(Error::DomainFile(format!("unknown kind \"{other}\""))),
        };
        if let Some(f) = spec
            .present_fields()
            .into_iter()
            .find(|f| !allowed.contains(f))
        {
            return Err(Error::DomainFile(format!(
                "field \"{f}\" is not valid for kind \"{}\"",
                spec.kind
            )));
        }
        let kind = spec.kind.as_str();
        let domain = match kind {
            "interval" => {
                if m != 1 {
                    return Err(Error::DomainFile("interval requires dimension 1".into()));
                }
                Domain::interval(T::lit(spec.length.ok_or_else(|| missing(kind, "length"))?))?
            }
            "box" => Domain::boxed(to_real(
                &spec.lengths.ok_or_else(|| missing(kind, "lengths"))?,
            ))?,
            "ball" => Domain::ball(
                to_real(&spec.center.ok_or_else(|| missing(kind, "center"))?),
                T::lit(spec.radius.ok_or_else(|| missing(kind, "radius"))?),
            )?,
            "box_union" => Domain::box_union(
                spec.boxes
                    .ok_or_else(|| missing(kind, "boxes"))?
                    .iter()
                    .map(|b| AxisBox::new(to_real(&b.corner), to_real(&b.lengths)))
                    .collect::<Result<_>>()?,
            )?,
            _ => {
                let origin = to_real(&spec.origin.ok_or_else(|| missing(kind, "origin"))?);
                let spacing = T::lit(spec.spacing.ok_or_else(|| missing(kind, "spacing"))?);
                let (shape, bits) = parse_cells(
                    spec.cells.as_ref().ok_or_else(|| missing(kind, "cells"))?,
                    m,
                )?;
                Domain::raster(Raster::new(origin, spacing, shape, bits)?)
            }
        };
        if domain.dimension() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: domain.dimension(),
            });
        }
        Ok(domain)
    }

    pub fn to_json(&self) -> String {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        let mut spec = DomainSpec {
            dimension: self.dimension(),
            ..Default::default()
        };
        match &self.shape {
            Shape::Interval { length } => {
                spec.kind = "interval".into();
                spec.length = Some(length.as_f64());
            }
            Shape::Box { lengths } => {
                spec.kind = "box".into();
                spec.lengths = Some(f(lengths));
            }
            Shape::Ball { center, radius } => {
                spec.kind = "ball".into();
                spec.center = Some(f(center));
                spec.radius = Some(radius.as_f64());
            }
            Shape::BoxUnion { boxes } => {
                spec.kind = "box_union".into();
                spec.boxes = Some(
                    boxes
                        .iter()
                        .map(|b| BoxSpec {
                            corner: f(&b.corner),
                            lengths: f(&b.lengths),
                        })
                        .collect(),
                );
            }
            Shape::Raster(r) => {
                spec.kind = "raster".into();
                spec.origin = Some(f(&r.origin));
                spec.spacing = Some(r.spacing.as_f64());
                spec.cells = Some(nest_cells(&r.shape, &r.occupied));
            }
        }
        serde_json::to_string(&spec).expect("domain spec serializes")
    }
}
