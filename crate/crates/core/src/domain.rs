//! Concrete group axes, product regions, Haar quadrature and mixed norms.
//!
//! Every axis is a uniform grid `start + i * step`, `i = 0..num_points`, and
//! the Haar measure is discretized by the left-endpoint rule: each node
//! carries weight `step`. Regions are products of node ranges, snapped
//! outward so that continuous containments survive discretization.

use nalgebra::ComplexField;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar field of grid functions and coefficients (`f64` or `Complex<f64>`).
pub trait Scalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Interval,
    Cyclic,
}

/// Serialized form of an [`Axis`]; the step is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub kind: AxisKind,
    pub start: f64,
    pub end: f64,
    pub num_points: usize,
}

/// One factor group, discretized. On a cyclic axis `end` is identified with
/// `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AxisSpec", into = "AxisSpec")]
pub struct Axis {
    kind: AxisKind,
    start: f64,
    end: f64,
    num_points: usize,
    step: f64,
}

impl TryFrom<AxisSpec> for Axis {
    type Error = Error;

    fn try_from(s: AxisSpec) -> Result<Self> {
        Axis::new(s.kind, s.start, s.end, s.num_points)
    }
}

impl From<Axis> for AxisSpec {
    fn from(a: Axis) -> Self {
        AxisSpec { kind: a.kind, start: a.start, end: a.end, num_points: a.num_points }
    }
}

impl Axis {
    pub fn new(kind: AxisKind, start: f64, end: f64, num_points: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(Error::InvalidAxis(format!("need start < end, got [{start}, {end}]")));
        }
        if num_points < 2 {
            return Err(Error::InvalidAxis(format!("need at least 2 points, got {num_points}")));
        }
        let step = (end - start) / num_points as f64;
        Ok(Axis { kind, start, end, num_points, step })
    }

    pub fn interval(start: f64, end: f64, num_points: usize) -> Result<Self> {
        Self::new(AxisKind::Interval, start, end, num_points)
    }

    pub fn cyclic(start: f64, end: f64, num_points: usize) -> Result<Self> {
        Self::new(AxisKind::Cyclic, start, end, num_points)
    }

    pub fn kind(&self) -> AxisKind {
        self.kind
    }
    pub fn start(&self) -> f64 {
        self.start
    }
    pub fn end(&self) -> f64 {
        self.end
    }
    pub fn num_points(&self) -> usize {
        self.num_points
    }
    /// Haar weight of a single node.
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn period(&self) -> f64 {
        self.end - self.start
    }
    pub fn is_cyclic(&self) -> bool {
        self.kind == AxisKind::Cyclic
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_points).map(|i| self.node(i))
    }

    /// Reduces a coordinate into `[start, end)` on a cyclic axis; identity on
    /// an interval.
    pub fn wrap(&self, x: f64) -> f64 {
        match self.kind {
            AxisKind::Interval => x,
            AxisKind::Cyclic => self.start + (x - self.start).rem_euclid(self.period()),
        }
    }

    /// Group distance between two coordinates.
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.kind {
            AxisKind::Interval => d,
            AxisKind::Cyclic => {
                let d = d.rem_euclid(self.period());
                d.min(self.period() - d)
            }
        }
    }

    fn floor_index(&self, x: f64) -> i64 {
        ((x - self.start) / self.step + SNAP_TOL).floor() as i64
    }

    fn ceil_index(&self, x: f64) -> i64 {
        ((x - self.start) / self.step - SNAP_TOL).ceil() as i64
    }

    /// Index offset `k` with `start + k * step == 0`, if the node lattice
    /// contains the group identity.
    pub fn origin_index(&self) -> Option<i64> {
        let t = -self.start / self.step;
        let k = t.round();
        ((t - k).abs() < 1e-7).then_some(k as i64)
    }

    fn global(&self, idx: i64) -> usize {
        match self.kind {
            AxisKind::Interval => idx as usize,
            AxisKind::Cyclic => idx.rem_euclid(self.num_points as i64) as usize,
        }
    }
}

/// A closed interval on one axis, snapped outward to nodes.
///
/// Nodes are `first .. first + count` (indices taken modulo `num_points` on a
/// cyclic axis). `lo`/`hi` are the snapped continuous bounds; `lo == hi`
/// encodes a single point, which still owns one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub first: i64,
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl AxisRange {
    pub fn snap(axis: &Axis, axis_id: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::Parameter(format!("invalid interval [{lo}, {hi}] on axis {axis_id}")));
        }
        let n = axis.num_points as i64;
        if axis.is_cyclic() && hi - lo >= axis.period() - SNAP_TOL * axis.step {
            return Ok(Self::full(axis));
        }
        let f = axis.floor_index(lo);
        let l = axis.ceil_index(hi).max(f);
        let count = ((l - f).max(1)) as usize;
        match axis.kind {
            AxisKind::Interval => {
                if f < 0 || f + count as i64 > n {
                    return Err(Error::DomainOverflow {
                        axis: axis_id,
                        lo,
                        hi,
                        start: axis.start,
                        end: axis.end,
                    });
                }
            }
            AxisKind::Cyclic => {
                if count as i64 >= n {
                    return Ok(Self::full(axis));
                }
            }
        }
        let lo_s = axis.start + f as f64 * axis.step;
        let hi_s = axis.start + l as f64 * axis.step;
        Ok(AxisRange { first: f, count, lo: lo_s, hi: hi_s })
    }

    pub fn full(axis: &Axis) -> Self {
        AxisRange { first: 0, count: axis.num_points, lo: axis.start, hi: axis.end }
    }

    /// Unwrapped coordinate of the `k`-th node of the range.
    pub fn position(&self, axis: &Axis, k: usize) -> f64 {
        axis.start + (self.first + k as i64) as f64 * axis.step
    }

    pub fn global_index(&self, axis: &Axis, k: usize) -> usize {
        axis.global(self.first + k as i64)
    }

    /// Position within this range of a (possibly unwrapped) node index.
    pub fn local_index(&self, axis: &Axis, idx: i64) -> Option<usize> {
        let rel = match axis.kind {
            AxisKind::Interval => idx - self.first,
            AxisKind::Cyclic => (idx - self.first).rem_euclid(axis.num_points as i64),
        };
        (rel >= 0 && (rel as usize) < self.count).then_some(rel as usize)
    }

    pub fn measure(&self, axis: &Axis) -> f64 {
        self.count as f64 * axis.step
    }

    /// Upper end of the node cells, `lo + count * step`.
    pub fn extent_hi(&self, axis: &Axis) -> f64 {
        self.lo + self.count as f64 * axis.step
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// Nodewise containment.
    pub fn contains(&self, axis: &Axis, other: &AxisRange) -> bool {
        (0..other.count).all(|k| self.local_index(axis, other.first + k as i64).is_some())
    }

    /// Continuous membership in the closed cell extent `[lo, lo + count*step]`.
    pub fn contains_coord(&self, axis: &Axis, x: f64) -> bool {
        let tol = SNAP_TOL * axis.step;
        let len = self.count as f64 * axis.step;
        match axis.kind {
            AxisKind::Interval => x >= self.lo - tol && x <= self.lo + len + tol,
            AxisKind::Cyclic => {
                if self.count == axis.num_points {
                    return true;
                }
                let d = (x - self.lo).rem_euclid(axis.period());
                d <= len + tol || d >= axis.period() - tol
            }
        }
    }
}

/// Product region `[lo1, hi1] × [lo2, hi2]` on two axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    axes: [Axis; 2],
    ranges: [AxisRange; 2],
}

impl Region {
    pub fn new(axes: [Axis; 2], b1: [f64; 2], b2: [f64; 2]) -> Result<Self> {
        let ranges = [
            AxisRange::snap(&axes[0], 0, b1[0], b1[1])?,
            AxisRange::snap(&axes[1], 1, b2[0], b2[1])?,
        ];
        Ok(Region { axes, ranges })
    }

    pub fn from_ranges(axes: [Axis; 2], ranges: [AxisRange; 2]) -> Self {
        Region { axes, ranges }
    }

    /// Whole grid.
    pub fn full(axes: [Axis; 2]) -> Self {
        Region { axes, ranges: [AxisRange::full(&axes[0]), AxisRange::full(&axes[1])] }
    }

    pub fn axes(&self) -> &[Axis; 2] {
        &self.axes
    }
    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }
    pub fn range(&self, i: usize) -> &AxisRange {
        &self.ranges[i]
    }
    pub fn ranges(&self) -> &[AxisRange; 2] {
        &self.ranges
    }

    /// Haar measure of factor `i` (node count times step).
    pub fn measure(&self, i: usize) -> f64 {
        self.ranges[i].measure(&self.axes[i])
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ranges[0].count, self.ranges[1].count)
    }

    pub fn len(&self) -> usize {
        self.ranges[0].count * self.ranges[1].count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weight of a single node, `step1 * step2`.
    pub fn cell(&self) -> f64 {
        self.axes[0].step * self.axes[1].step
    }

    pub fn node(&self, k1: usize, k2: usize) -> (f64, f64) {
        (self.ranges[0].position(&self.axes[0], k1), self.ranges[1].position(&self.axes[1], k2))
    }

    /// All nodes in row-major `(k1, k2)` order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c1, c2) = self.shape();
        (0..c1).flat_map(move |k1| (0..c2).map(move |k2| self.node(k1, k2)))
    }

    pub fn same_axes(&self, other: &Region) -> bool {
        self.axes == other.axes
    }

    pub fn contains(&self, other: &Region) -> bool {
        self.same_axes(other)
            && (0..2).all(|i| self.ranges[i].contains(&self.axes[i], &other.ranges[i]))
    }

    pub fn contains_point(&self, u: f64, v: f64) -> bool {
        self.ranges[0].contains_coord(&self.axes[0], u)
            && self.ranges[1].contains_coord(&self.axes[1], v)
    }

    /// Continuous bounds `[lo, hi]` of factor `i`.
    pub fn bounds(&self, i: usize) -> [f64; 2] {
        [self.ranges[i].lo, self.ranges[i].hi]
    }

    /// Cell extent `[lo, lo + count*step)` of factor `i`; the region sampling
    /// draws from.
    pub fn extent(&self, i: usize) -> [f64; 2] {
        [self.ranges[i].lo, self.ranges[i].extent_hi(&self.axes[i])]
    }

    /// Local node index of an unwrapped global index pair.
    pub fn local(&self, g1: i64, g2: i64) -> Option<(usize, usize)> {
        Some((
            self.ranges[0].local_index(&self.axes[0], g1)?,
            self.ranges[1].local_index(&self.axes[1], g2)?,
        ))
    }

    /// Unwrapped global index of local node `(k1, k2)`.
    pub fn global(&self, k1: usize, k2: usize) -> (i64, i64) {
        (self.ranges[0].first + k1 as i64, self.ranges[1].first + k2 as i64)
    }
}

/// Minkowski difference `K − W = {k − w}`, snapped outward.
///
/// Cyclic factors whose difference spans a full period become the whole
/// circle; interval factors that leave the grid report `DomainOverflow`.
pub fn minkowski_diff(k: &Region, w: &Region) -> Result<Region> {
    if !k.same_axes(w) {
        return Err(Error::Parameter("regions live on different axes".into()));
    }
    let mut ranges = [AxisRange::full(k.axis(0)); 2];
    for (i, r) in ranges.iter_mut().enumerate() {
        let axis = k.axis(i);
        let (kr, wr) = (k.range(i), w.range(i));
        let lo = kr.lo - wr.hi;
        let hi = kr.hi.max(kr.extent_hi(axis)) - wr.lo;
        *r = AxisRange::snap(axis, i, lo, hi)?;
    }
    Ok(Region::from_ranges(*k.axes(), ranges))
}

/// Exponent pair `(p, q)` with `1 <= p, q <= ∞`; `q` is the inner exponent
/// (second variable), `p` the outer one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedExponents {
    #[serde(with = "exponent_serde")]
    pub p: f64,
    #[serde(with = "exponent_serde")]
    pub q: f64,
}

impl MixedExponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for x in [p, q] {
            if x.is_nan() || x < 1.0 {
                return Err(Error::InvalidExponent(x));
            }
        }
        Ok(MixedExponents { p, q })
    }

    pub fn uniform(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    pub const L1: MixedExponents = MixedExponents { p: 1.0, q: 1.0 };
    pub const L2: MixedExponents = MixedExponents { p: 2.0, q: 2.0 };
    pub const INF: MixedExponents = MixedExponents { p: f64::INFINITY, q: f64::INFINITY };

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.q.is_finite()
    }

    pub fn is_l2(&self) -> bool {
        self.p == 2.0 && self.q == 2.0
    }
}

mod exponent_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                other => other.parse().map_err(serde::de::Error::custom),
            },
        }
    }
}

/// Folds rows of magnitudes into `(Σ_rows w_out (Σ_cols w_in |x|^q)^{p/q})^{1/p}`.
pub(crate) fn fold_mixed<R, I>(rows: R, e: MixedExponents, w_outer: f64, w_inner: f64) -> f64
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = f64>,
{
    let inner = |row: I| -> f64 {
        if e.q.is_infinite() {
            row.into_iter().fold(0.0, f64::max)
        } else if e.q == 1.0 {
            row.into_iter().sum::<f64>() * w_inner
        } else {
            (row.into_iter().map(|x| x.powf(e.q)).sum::<f64>() * w_inner).powf(1.0 / e.q)
        }
    };
    let mut acc = 0.0;
    for row in rows {
        let r = inner(row);
        if e.p.is_infinite() {
            acc = f64::max(acc, r);
        } else if e.p == 1.0 {
            acc += r;
        } else {
            acc += r.powf(e.p);
        }
    }
    if e.p.is_infinite() {
        acc
    } else if e.p == 1.0 {
        acc * w_outer
    } else {
        (acc * w_outer).powf(1.0 / e.p)
    }
}

/// `ℓ^{p,q}` norm of a doubly indexed sequence given as rows `c[s][t]`.
pub fn seq_mixed_norm<T: Scalar>(rows: &[Vec<T>], e: MixedExponents) -> f64 {
    fold_mixed(rows.iter().map(|r| r.iter().map(|x| x.modulus())), e, 1.0, 1.0)
}

/// Values of a function on the nodes of a region, row-major in `(k1, k2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T = f64> {
    region: Region,
    values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn from_values(region: Region, values: Vec<T>) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::Layout { expected: region.len(), got: values.len() });
        }
        if values.iter().any(|x| !x.modulus().is_finite()) {
            return Err(Error::Parameter("grid function has non-finite values".into()));
        }
        Ok(GridFunction { region, values })
    }

    pub(crate) fn from_values_unchecked(region: Region, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), region.len());
        GridFunction { region, values }
    }

    pub fn from_fn(region: Region, mut f: impl FnMut(f64, f64) -> T) -> Self {
        let values = region.nodes().map(|(u, v)| f(u, v)).collect();
        GridFunction { region, values }
    }

    pub fn zeros(region: Region) -> Self {
        GridFunction { region, values: vec![T::zero(); region.len()] }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, k1: usize, k2: usize) -> T {
        self.values[k1 * self.region.shape().1 + k2]
    }

    /// Value at an unwrapped global node index, if it lies in the region.
    pub fn at_global(&self, g1: i64, g2: i64) -> Option<T> {
        self.region.local(g1, g2).map(|(a, b)| self.get(a, b))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        GridFunction { region: self.region, values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|x| x * a)
    }

    /// `self + a * other`, on identical regions.
    pub fn axpy(&self, a: T, other: &Self) -> Result<Self> {
        if self.region != other.region {
            return Err(Error::Parameter("grid functions live on different regions".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| x + a * y).collect();
        Ok(GridFunction { region: self.region, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-T::one(), other)
    }

    /// `‖f‖_{L^{p,q}(region)}` over the nodes of `region`.
    pub fn mixed_norm(&self, region: &Region, e: MixedExponents) -> Result<f64> {
        mixed_norm(self, region, e)
    }

    /// `‖f‖_{L^{p,q}}` over the function's own region.
    pub fn norm(&self, e: MixedExponents) -> f64 {
        let (_, c2) = self.region.shape();
        fold_mixed(
            self.values.chunks(c2.max(1)).map(|row| row.iter().map(|x| x.modulus())),
            e,
            self.region.axis(0).step(),
            self.region.axis(1).step(),
        )
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }
}

/// Mixed Lebesgue norm `(Σ_{i1} (Σ_{i2} |f|^q step2)^{p/q} step1)^{1/p}` over the
/// nodes of `region`, which must lie inside `f`'s region.
pub fn mixed_norm<T: Scalar>(f: &GridFunction<T>, region: &Region, e: MixedExponents) -> Result<f64> {
    if !f.region.contains(region) {
        return Err(Error::Parameter("norm region is not contained in the function's region".into()));
    }
    let (c1, c2) = region.shape();
    let rows = (0..c1).map(|k1| {
        (0..c2).map(move |k2| {
            let (g1, g2) = region.global(k1, k2);
            f.at_global(g1, g2).map(|x| x.modulus()).unwrap_or(0.0)
        })
    });
    Ok(fold_mixed(rows, e, region.axis(0).step(), region.axis(1).step()))
}

/// The three regions every construction works on: the sampling window `K`,
/// the kernel support `W` (containing the identity) and `K̃ = K − W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductDomain {
    axes: [Axis; 2],
    k: Region,
    w: Region,
    k_tilde: Region,
}

impl ProductDomain {
    pub fn new(axes: [Axis; 2], k: [[f64; 2]; 2], w: [[f64; 2]; 2]) -> Result<Self> {
        let kr = Region::new(axes, k[0], k[1])?;
        let wr = Region::new(axes, w[0], w[1])?;
        Self::from_regions(kr, wr)
    }

    pub fn from_regions(k: Region, w: Region) -> Result<Self> {
        let axes = *k.axes();
        for (i, axis) in axes.iter().enumerate() {
            let origin = axis.origin_index().ok_or_else(|| {
                Error::InvalidAxis(format!("axis {i} node lattice does not contain the identity 0"))
            })?;
            if w.range(i).local_index(axis, origin).is_none() {
                return Err(Error::Parameter(format!("W does not contain the identity on axis {i}")));
            }
        }
        let k_tilde = minkowski_diff(&k, &w)?;
        // every node difference k - w must be a node of K̃ (checked per factor)
        for i in 0..2 {
            let axis = &axes[i];
            let origin = axis.origin_index().unwrap_or(0);
            let (kr, wr, tr) = (k.range(i), w.range(i), k_tilde.range(i));
            for a in 0..kr.count as i64 {
                for b in 0..wr.count as i64 {
                    let idx = kr.first + a - (wr.first + b) + origin;
                    if tr.local_index(axis, idx).is_none() {
                        return Err(Error::Parameter(format!("K - W not covered by K̃ on axis {i}")));
                    }
                }
            }
        }
        Ok(ProductDomain { axes, k, w, k_tilde })
    }

    pub fn axes(&self) -> &[Axis; 2] {
        &self.axes
    }
    pub fn k(&self) -> &Region {
        &self.k
    }
    pub fn w(&self) -> &Region {
        &self.w
    }
    pub fn k_tilde(&self) -> &Region {
        &self.k_tilde
    }
    /// `(μ1, μ2)`, the Haar measures of the factors of `K`.
    pub fn mu(&self) -> (f64, f64) {
        (self.k.measure(0), self.k.measure(1))
    }
}
