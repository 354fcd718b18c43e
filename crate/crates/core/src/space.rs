//! Generators, separated shift systems and the local space `V_K(Φ)`.
//!
//! A space element is `f = Σ_{i,s,t} c_i(s,t) φ_i(· − x_s, · − y_t)` restricted
//! to `K̃`. Only *active* triples `(i, s, t)`, whose shifted generator support
//! meets `K̃` in positive measure, carry coefficients; every other coefficient
//! is zero by convention.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, SVD};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{convolve_grid, AveragingKernel};
use crate::domain::{fold_mixed, Axis, GridFunction, MixedExponents, ProductDomain, Scalar};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Cardinal B-spline of degree `order` dilated by `scale`, supported on
/// `[0, (order + 1) * scale]`, with `Σ_k B(x − k*scale) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BSpline {
    pub order: u32,
    pub scale: f64,
}

impl BSpline {
    pub fn new(order: u32, scale: f64) -> Result<Self> {
        if order > 3 {
            return Err(Error::UnsupportedOrder(order));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Parameter(format!("B-spline scale must be positive, got {scale}")));
        }
        Ok(BSpline { order, scale })
    }

    pub fn support_len(&self) -> f64 {
        (self.order + 1) as f64 * self.scale
    }

    /// Breakpoints `j * scale`, `j = 0..=order+1`.
    pub fn knots(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.order + 1).map(|j| j as f64 * self.scale)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = x / self.scale;
        match self.order {
            0 => {
                if (0.0..1.0).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
            1 => {
                if (0.0..=1.0).contains(&t) {
                    t
                } else if t > 1.0 && t <= 2.0 {
                    2.0 - t
                } else {
                    0.0
                }
            }
            2 => {
                if !(0.0..3.0).contains(&t) {
                    0.0
                } else if t < 1.0 {
                    0.5 * t * t
                } else if t < 2.0 {
                    0.5 * (-2.0 * t * t + 6.0 * t - 3.0)
                } else {
                    0.5 * (3.0 - t) * (3.0 - t)
                }
            }
            _ => {
                if !(0.0..4.0).contains(&t) {
                    0.0
                } else if t < 1.0 {
                    t * t * t / 6.0
                } else if t < 2.0 {
                    (((-3.0 * t + 12.0) * t - 12.0) * t + 4.0) / 6.0
                } else if t < 3.0 {
                    (((3.0 * t - 24.0) * t + 60.0) * t - 44.0) / 6.0
                } else {
                    let s = 4.0 - t;
                    s * s * s / 6.0
                }
            }
        }
    }
}

/// Tensor-product generator `φ(u, v) = b_u(u) b_v(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub u: BSpline,
    pub v: BSpline,
}

impl Generator {
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let a = self.u.eval(u);
        if a == 0.0 {
            return 0.0;
        }
        a * self.v.eval(v)
    }

    /// Support rectangle `[0, L_u] × [0, L_v]`.
    pub fn support(&self) -> [[f64; 2]; 2] {
        [[0.0, self.u.support_len()], [0.0, self.v.support_len()]]
    }

    pub fn factor(&self, axis: usize) -> &BSpline {
        if axis == 0 {
            &self.u
        } else {
            &self.v
        }
    }
}

/// `Φ = (φ_1, …, φ_r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSet {
    generators: Vec<Generator>,
}

/// `r` tensor-product cardinal B-splines of one order. Generator `i` uses
/// scale `scale / 2^i`, so the variants are dilations with distinct supports.
pub fn make_bspline_generators(order: u32, scale: f64, r: usize) -> Result<GeneratorSet> {
    if r == 0 {
        return Err(Error::Parameter("need at least one generator".into()));
    }
    let generators = (0..r)
        .map(|i| {
            let b = BSpline::new(order, scale / (1u64 << i) as f64)?;
            Ok(Generator { u: b, v: b })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratorSet { generators })
}

impl GeneratorSet {
    pub fn new(generators: Vec<Generator>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Parameter("need at least one generator".into()));
        }
        Ok(GeneratorSet { generators })
    }

    pub fn r(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    /// Union support rectangle `Ω`.
    pub fn omega(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0, 0.0]; 2];
        for g in &self.generators {
            let s = g.support();
            for a in 0..2 {
                out[a][0] = f64::min(out[a][0], s[a][0]);
                out[a][1] = f64::max(out[a][1], s[a][1]);
            }
        }
        out
    }

    /// False when some generator is discontinuous (order 0).
    pub fn is_continuous(&self) -> bool {
        self.generators.iter().all(|g| g.u.order > 0 && g.v.order > 0)
    }
}

/// Separated shift sets `X` (first axis) and `Y` (second axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSystem {
    xs: Vec<f64>,
    ys: Vec<f64>,
    rad: [f64; 2],
}

impl ShiftSystem {
    /// Validates `|x_s − x_s'| >= 2 rad` (group distance) on both axes.
    pub fn new(axes: &[Axis; 2], xs: Vec<f64>, ys: Vec<f64>, rad: [f64; 2]) -> Result<Self> {
        for (a, pts) in [&xs, &ys].into_iter().enumerate() {
            if !(rad[a] > 0.0) {
                return Err(Error::Shift(format!("separation radius on axis {a} must be positive")));
            }
            if pts.is_empty() || pts.iter().any(|x| !x.is_finite()) {
                return Err(Error::Shift(format!("axis {a} needs finite shifts")));
            }
            let mut sorted: Vec<f64> = pts.iter().map(|&x| axes[a].wrap(x)).collect();
            sorted.sort_by(f64::total_cmp);
            let mut gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
            if axes[a].is_cyclic() && sorted.len() > 1 {
                gaps.push(axes[a].distance(sorted[0], sorted[sorted.len() - 1]));
            }
            let tol = 1e-12 * (1.0 + rad[a]);
            if let Some(g) = gaps.into_iter().find(|&g| g < 2.0 * rad[a] - tol) {
                return Err(Error::Shift(format!(
                    "axis {a}: gap {g} violates separation 2*{}",
                    rad[a]
                )));
            }
        }
        Ok(ShiftSystem { xs, ys, rad })
    }

    /// Perturbed lattice `x_s = s Δ + δ_s`, `|δ_s| <= jitter Δ / 2`, over the
    /// given index ranges; separation radii `Δ (1 − jitter) / 2`.
    pub fn perturbed_lattice(
        axes: &[Axis; 2],
        steps: [f64; 2],
        jitter: f64,
        seed: u64,
        ranges: [(i64, i64); 2],
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&jitter) {
            return Err(Error::Shift(format!("jitter must lie in [0, 1), got {jitter}")));
        }
        if steps.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Shift("lattice steps must be positive".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut axis_pts = |a: usize| -> Vec<f64> {
            (ranges[a].0..=ranges[a].1)
                .map(|s| {
                    let u: f64 = rng.random_range(-1.0..=1.0);
                    s as f64 * steps[a] + u * jitter * steps[a] / 2.0
                })
                .collect()
        };
        let xs = axis_pts(0);
        let ys = axis_pts(1);
        let rad = [steps[0] * (1.0 - jitter) / 2.0, steps[1] * (1.0 - jitter) / 2.0];
        Self::new(axes, xs, ys, rad)
    }

    /// Perturbed lattice whose index range is just wide enough that every
    /// shift touching `K̃` is present, with inactive shifts beyond both ends.
    /// On a cyclic axis the lattice covers one period.
    pub fn lattice_covering(
        domain: &ProductDomain,
        generators: &GeneratorSet,
        steps: [f64; 2],
        jitter: f64,
        seed: u64,
    ) -> Result<Self> {
        let omega = generators.omega();
        let kt = domain.k_tilde();
        let mut ranges = [(0i64, 0i64); 2];
        for a in 0..2 {
            let axis = &domain.axes()[a];
            let d = steps[a];
            ranges[a] = if axis.is_cyclic() {
                let n = (axis.period() / d + 1e-9).floor() as i64;
                (0, n.max(1) - 1)
            } else {
                let ext = kt.extent(a);
                let lo = ((ext[0] - omega[a][1]) / d).floor() as i64 - 1;
                let hi = ((ext[1] - omega[a][0]) / d).ceil() as i64 + 1;
                (lo, hi)
            };
        }
        Self::perturbed_lattice(domain.axes(), steps, jitter, seed, ranges)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }
    pub fn rad(&self) -> [f64; 2] {
        self.rad
    }

    /// Smallest group distance between distinct shifts on axis `a`.
    pub fn min_gap(&self, axes: &[Axis; 2], a: usize) -> f64 {
        let pts = if a == 0 { &self.xs } else { &self.ys };
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min(axes[a].distance(pts[i], pts[j]));
            }
        }
        best
    }
}

/// One active basis function `φ_gen(· − x_s, · − y_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Column {
    pub gen: usize,
    pub s: usize,
    pub t: usize,
}

/// Result of the active-shift scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    /// Active triples, generator-major then `(s, t)` lexicographic.
    pub columns: Vec<Column>,
    /// Active `(s, t)` pairs (some generator is active there).
    pub pairs: BTreeSet<(usize, usize)>,
    pub s0: usize,
    pub t0: usize,
}

fn overlaps(axis: &Axis, a: f64, b: f64, lo: f64, hi: f64, full: bool) -> bool {
    let tol = 1e-12 * (1.0 + hi.abs() + lo.abs());
    if axis.is_cyclic() {
        if full {
            return b - a > tol;
        }
        let p = axis.period();
        return [-1.0, 0.0, 1.0]
            .iter()
            .any(|k| f64::max(a + k * p, lo) < f64::min(b + k * p, hi) - tol);
    }
    f64::max(a, lo) < f64::min(b, hi) - tol
}

/// Triples `(i, s, t)` whose shifted support meets `K̃` with positive measure.
///
/// On interval axes the shift sets must reach past `K̃` on both sides, so that
/// no boundary shift is silently missing.
pub fn active_shifts(
    domain: &ProductDomain,
    generators: &GeneratorSet,
    shifts: &ShiftSystem,
) -> Result<ActiveSet> {
    let kt = domain.k_tilde();
    let axes = domain.axes();
    let ext = [kt.extent(0), kt.extent(1)];
    let full = [kt.range(0).count == axes[0].num_points(), kt.range(1).count == axes[1].num_points()];
    let pts = [shifts.xs(), shifts.ys()];

    for (a, axis) in axes.iter().enumerate() {
        if axis.is_cyclic() {
            if generators.omega()[a][1] - generators.omega()[a][0] > axis.period() {
                return Err(Error::Shift(format!("generator support wider than the circle on axis {a}")));
            }
            continue;
        }
        let min = pts[a].iter().copied().fold(f64::INFINITY, f64::min);
        let max = pts[a].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for g in generators.generators() {
            let sup = g.support()[a];
            if min + sup[1] > ext[a][0] + 1e-12 || max + sup[0] < ext[a][1] - 1e-12 {
                return Err(Error::Shift(format!(
                    "shifts on axis {a} span [{min}, {max}] and do not cover K̃ = [{}, {}]",
                    ext[a][0], ext[a][1]
                )));
            }
        }
    }

    let mut columns = Vec::new();
    for (i, g) in generators.generators().iter().enumerate() {
        let sup = g.support();
        let act = |a: usize, x: f64| {
            overlaps(&axes[a], x + sup[a][0], x + sup[a][1], ext[a][0], ext[a][1], full[a])
        };
        let s_act: Vec<usize> = (0..pts[0].len()).filter(|&s| act(0, pts[0][s])).collect();
        let t_act: Vec<usize> = (0..pts[1].len()).filter(|&t| act(1, pts[1][t])).collect();
        for &s in &s_act {
            for &t in &t_act {
                columns.push(Column { gen: i, s, t });
            }
        }
    }
    if columns.is_empty() {
        return Err(Error::DegenerateSpace("no shifted generator meets K̃".into()));
    }
    let pairs: BTreeSet<(usize, usize)> = columns.iter().map(|c| (c.s, c.t)).collect();
    let s0 = pairs.iter().map(|p| p.0).collect::<BTreeSet<_>>().len();
    let t0 = pairs.iter().map(|p| p.1).collect::<BTreeSet<_>>().len();
    Ok(ActiveSet { columns, pairs, s0, t0 })
}

/// The local quasi shift-invariant space `V_K(Φ)`.
#[derive(Debug, Clone)]
pub struct QsisSpace {
    domain: ProductDomain,
    generators: GeneratorSet,
    shifts: ShiftSystem,
    active: ActiveSet,
    columns: Arc<Vec<Column>>,
    /// Column supports in unwrapped coordinates.
    col_support: Vec<[[f64; 2]; 2]>,
    /// Basis values on the nodes of `K̃` (rows row-major over the region).
    synthesis: DMatrix<f64>,
    candidates: [Vec<f64>; 2],
}

impl QsisSpace {
    pub fn new(domain: ProductDomain, generators: GeneratorSet, shifts: ShiftSystem) -> Result<Self> {
        let active = active_shifts(&domain, &generators, &shifts)?;
        let columns = Arc::new(active.columns.clone());
        let col_support = columns
            .iter()
            .map(|c| {
                let sup = generators.generators()[c.gen].support();
                [
                    [shifts.xs[c.s] + sup[0][0], shifts.xs[c.s] + sup[0][1]],
                    [shifts.ys[c.t] + sup[1][0], shifts.ys[c.t] + sup[1][1]],
                ]
            })
            .collect();
        let mut space = QsisSpace {
            domain,
            generators,
            shifts,
            active,
            columns,
            col_support,
            synthesis: DMatrix::zeros(0, 0),
            candidates: [Vec::new(), Vec::new()],
        };
        let kt = *space.domain.k_tilde();
        let nodes: Vec<(f64, f64)> = kt.nodes().collect();
        let cols = space.columns.len();
        let data: Vec<Vec<f64>> = (0..cols)
            .into_par_iter()
            .map(|j| nodes.iter().map(|&(u, v)| space.basis(j, u, v)).collect())
            .collect();
        space.synthesis = DMatrix::from_fn(nodes.len(), cols, |i, j| data[j][i]);
        space.candidates = [space.candidate_coords(0), space.candidate_coords(1)];
        Ok(space)
    }

    /// Perturbed-lattice space built in one go.
    pub fn bspline_lattice(
        domain: ProductDomain,
        order: u32,
        scale: f64,
        r: usize,
        steps: [f64; 2],
        jitter: f64,
        seed: u64,
    ) -> Result<Self> {
        let generators = make_bspline_generators(order, scale, r)?;
        let shifts = ShiftSystem::lattice_covering(&domain, &generators, steps, jitter, seed)?;
        Self::new(domain, generators, shifts)
    }

    pub fn domain(&self) -> &ProductDomain {
        &self.domain
    }
    pub fn generators(&self) -> &GeneratorSet {
        &self.generators
    }
    pub fn shifts(&self) -> &ShiftSystem {
        &self.shifts
    }
    pub fn active(&self) -> &ActiveSet {
        &self.active
    }
    pub fn columns(&self) -> &Arc<Vec<Column>> {
        &self.columns
    }
    /// Number of active triples (columns of the synthesis and sample matrices).
    pub fn dim(&self) -> usize {
        self.columns.len()
    }
    /// Basis values on `K̃` nodes; rows follow `k_tilde().nodes()`.
    pub fn synthesis_matrix(&self) -> &DMatrix<f64> {
        &self.synthesis
    }

    /// Support rectangle of column `j` (unwrapped coordinates).
    pub fn column_support(&self, j: usize) -> [[f64; 2]; 2] {
        self.col_support[j]
    }

    fn arg(&self, a: usize, x: f64) -> f64 {
        let axis = &self.domain.axes()[a];
        if axis.is_cyclic() {
            x.rem_euclid(axis.period())
        } else {
            x
        }
    }

    /// Value of basis function `j` at `(u, v)`.
    pub fn basis(&self, j: usize, u: f64, v: f64) -> f64 {
        let c = self.columns[j];
        let g = &self.generators.generators()[c.gen];
        let a = g.u.eval(self.arg(0, u - self.shifts.xs[c.s]));
        if a == 0.0 {
            return 0.0;
        }
        a * g.v.eval(self.arg(1, v - self.shifts.ys[c.t]))
    }

    /// Value of the first (second) tensor factor of basis function `j`.
    pub fn basis_factor(&self, j: usize, axis: usize, x: f64) -> f64 {
        let c = self.columns[j];
        let g = &self.generators.generators()[c.gen];
        let shift = if axis == 0 { self.shifts.xs[c.s] } else { self.shifts.ys[c.t] };
        g.factor(axis).eval(self.arg(axis, x - shift))
    }

    /// Could column `j` be nonzero somewhere in the box `[lo, hi]` (per axis)?
    pub(crate) fn column_may_touch(&self, j: usize, a: usize, lo: f64, hi: f64) -> bool {
        let axis = &self.domain.axes()[a];
        let [s0, s1] = self.col_support[j][a];
        if axis.is_cyclic() {
            return true;
        }
        s0 <= hi && s1 >= lo
    }

    /// Pointwise evaluation of `Σ c_j basis_j`.
    pub fn eval<T: Scalar>(&self, c: &CoefficientArray<T>, u: f64, v: f64) -> T {
        let mut acc = T::zero();
        for (j, &cj) in c.values.iter().enumerate() {
            if cj == T::zero() || !self.column_may_touch(j, 0, u, u) || !self.column_may_touch(j, 1, v, v) {
                continue;
            }
            acc += cj * T::from_real(self.basis(j, u, v));
        }
        acc
    }

    /// `f = Σ c(s,t)^T Φ(· − x_s, · − y_t)` on the nodes of `K̃`.
    pub fn synthesize<T: Scalar>(&self, c: &CoefficientArray<T>) -> Result<GridFunction<T>> {
        self.check_layout(c)?;
        let rows = self.synthesis.nrows();
        let mut out = vec![T::zero(); rows];
        for (j, &cj) in c.values.iter().enumerate() {
            if cj == T::zero() {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(self.synthesis.column(j).iter()) {
                if b != 0.0 {
                    *o += cj * T::from_real(b);
                }
            }
        }
        Ok(GridFunction::from_values_unchecked(*self.domain.k_tilde(), out))
    }

    pub(crate) fn check_layout<T>(&self, c: &CoefficientArray<T>) -> Result<()> {
        if c.values.len() != self.dim() {
            return Err(Error::Layout { expected: self.dim(), got: c.values.len() });
        }
        Ok(())
    }

    /// Coordinates per axis at which continuous suprema over `K̃` are taken:
    /// grid nodes, the closed ends of `K̃`, and every generator breakpoint that
    /// falls inside. For orders >= 2 midpoints are added as well.
    fn candidate_coords(&self, a: usize) -> Vec<f64> {
        let kt = self.domain.k_tilde();
        let axis = &self.domain.axes()[a];
        let [lo, hi] = kt.extent(a);
        let range = kt.range(a);
        let mut pts: Vec<f64> = (0..range.count).map(|k| range.position(axis, k)).collect();
        pts.push(lo);
        pts.push(hi);
        let shifts = if a == 0 { &self.shifts.xs } else { &self.shifts.ys };
        for c in self.columns.iter() {
            let b = self.generators.generators()[c.gen].factor(a);
            let x0 = shifts[if a == 0 { c.s } else { c.t }];
            for k in b.knots() {
                let mut x = x0 + k;
                if axis.is_cyclic() {
                    x = lo + (x - lo).rem_euclid(axis.period());
                }
                if x >= lo && x <= hi {
                    pts.push(x);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        let max_order = self.generators.generators().iter().map(|g| g.factor(a).order).max().unwrap_or(0);
        if max_order >= 2 {
            let mids: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            pts.extend(mids);
            pts.sort_by(f64::total_cmp);
        }
        pts
    }

    /// `sup_{K̃} |g|` over the candidate points; exact for piecewise
    /// (bi)linear and piecewise constant generators.
    pub fn sup_over_k_tilde(&self, g: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
        let [xs, ys] = &self.candidates;
        xs.par_iter()
            .map(|&u| ys.iter().map(|&v| g(u, v).abs()).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    /// Continuous `‖f‖_{L^∞(K̃)}` of a space element.
    pub fn sup_norm<T: Scalar>(&self, c: &CoefficientArray<T>) -> f64 {
        self.sup_over_k_tilde(|u, v| self.eval(c, u, v).modulus())
    }

    /// `C̃_Φ = sup_{K̃} Σ_i Σ_{s,t} |φ_i(u − x_s, v − y_t)|`.
    pub fn c_phi_tilde(&self) -> f64 {
        self.sup_over_k_tilde(|u, v| {
            (0..self.dim())
                .filter(|&j| self.column_may_touch(j, 0, u, u) && self.column_may_touch(j, 1, v, v))
                .map(|j| self.basis(j, u, v).abs())
                .sum()
        })
    }
}

/// Coefficients over the active triples of a space, in column order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientArray<T = f64> {
    columns: Arc<Vec<Column>>,
    values: Vec<T>,
}

impl<T: Scalar> CoefficientArray<T> {
    pub fn zeros(space: &QsisSpace) -> Self {
        CoefficientArray { columns: space.columns.clone(), values: vec![T::zero(); space.dim()] }
    }

    pub fn from_vec(space: &QsisSpace, values: Vec<T>) -> Result<Self> {
        if values.len() != space.dim() {
            return Err(Error::Layout { expected: space.dim(), got: values.len() });
        }
        if values.iter().any(|x| !x.modulus().is_finite()) {
            return Err(Error::Parameter("coefficients must be finite".into()));
        }
        Ok(CoefficientArray { columns: space.columns.clone(), values })
    }

    /// Unit coefficient on column `j`.
    pub fn unit(space: &QsisSpace, j: usize) -> Self {
        let mut c = Self::zeros(space);
        c.values[j] = T::one();
        c
    }

    /// From a dense array indexed `(i, s, t)` over all generators and shifts,
    /// laid out `i`-major. Nonzero entries at inactive triples are rejected.
    pub fn from_full(space: &QsisSpace, full: &[T]) -> Result<Self> {
        let (r, ns, nt) = (space.generators.r(), space.shifts.xs.len(), space.shifts.ys.len());
        if full.len() != r * ns * nt {
            return Err(Error::Layout { expected: r * ns * nt, got: full.len() });
        }
        let active: BTreeSet<Column> = space.columns.iter().copied().collect();
        for i in 0..r {
            for s in 0..ns {
                for t in 0..nt {
                    let x = full[(i * ns + s) * nt + t];
                    if x != T::zero() && !active.contains(&Column { gen: i, s, t }) {
                        return Err(Error::ConventionViolation((i, s, t)));
                    }
                }
            }
        }
        let values = space.columns.iter().map(|c| full[(c.gen * ns + c.s) * nt + c.t]).collect();
        Self::from_vec(space, values)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&self, a: T) -> Self {
        CoefficientArray { columns: self.columns.clone(), values: self.values.iter().map(|&x| x * a).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect();
        CoefficientArray { columns: self.columns.clone(), values }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    /// `‖c‖_{ℓ^{p,q}} = Σ_i ‖c_i‖_{ℓ^{p,q}}`.
    pub fn norm(&self, e: MixedExponents) -> f64 {
        let mut total = 0.0;
        let mut start = 0;
        while start < self.values.len() {
            let gen = self.columns[start].gen;
            let mut end = start;
            while end < self.values.len() && self.columns[end].gen == gen {
                end += 1;
            }
            // rows: runs of equal s within this generator's block
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut last_s = usize::MAX;
            for j in start..end {
                if self.columns[j].s != last_s {
                    rows.push(Vec::new());
                    last_s = self.columns[j].s;
                }
                rows.last_mut().unwrap().push(self.values[j].modulus());
            }
            total += fold_mixed(rows, e, 1.0, 1.0);
            start = end;
        }
        total
    }

    /// `max |c_i(s,t)|`.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }
}

/// Stability constants and dimension of a space under given exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceAnalysis {
    pub a1: f64,
    pub a2: f64,
    pub d: usize,
    pub c_phi_tilde: f64,
    /// True iff the `p = q = 2` spectral path produced `a1`, `a2`.
    pub a_exact: bool,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub exponents: MixedExponents,
    pub probes: usize,
    pub columns: usize,
    pub s0: usize,
    pub t0: usize,
}

/// Singular values of the Haar-weighted synthesis matrix, descending.
pub fn weighted_singular_values(space: &QsisSpace) -> Vec<f64> {
    let w = space.domain.k_tilde().cell().sqrt();
    let m = space.synthesis.scale(w);
    let svd = SVD::new(m, false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub const RANK_TOL: f64 = 1e-10;

/// Computes `a1`, `a2`, `d` and `C̃_Φ`.
///
/// For `p = q = 2` the constants come from the singular values of the
/// Haar-weighted synthesis matrix on its row space; with `r > 1` generators
/// the lower constant is divided by `√r` because `‖c‖_{ℓ^{2,2}}` sums the
/// per-generator Euclidean norms. Otherwise `a1`/`a2` are the extreme ratios
/// `‖f‖ / ‖c‖` over all coordinate vectors plus `probes` random unit arrays.
pub fn analyze_space(space: &QsisSpace, e: MixedExponents, probes: usize, seed: u64) -> Result<SpaceAnalysis> {
    let sv = weighted_singular_values(space);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let d = sv.iter().filter(|&&s| s > RANK_TOL * sigma_max).count();
    if d == 0 || sigma_max == 0.0 {
        return Err(Error::DegenerateSpace("synthesis matrix has rank 0".into()));
    }
    let sigma_min = sv[d - 1];
    let (a1, a2, a_exact) = if e.is_l2() {
        (sigma_min / (space.generators.r() as f64).sqrt(), sigma_max, true)
    } else {
        let ratios = probe_ratios(space, probes, seed, |c| {
            let f = space.synthesize(c).expect("layout");
            f.norm(e) / c.norm(e)
        });
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        (lo, hi, false)
    };
    if !(a1 > 0.0) {
        return Err(Error::DegenerateSpace("lower stability constant is zero".into()));
    }
    Ok(SpaceAnalysis {
        a1,
        a2,
        d,
        c_phi_tilde: space.c_phi_tilde(),
        a_exact,
        sigma_min,
        sigma_max,
        exponents: e,
        probes,
        columns: space.dim(),
        s0: space.active.s0,
        t0: space.active.t0,
    })
}

/// The probe set: every coordinate vector, then `probes` Gaussian arrays.
pub fn probe_set(space: &QsisSpace, probes: usize, seed: u64) -> Vec<CoefficientArray> {
    let mut out: Vec<CoefficientArray> = (0..space.dim()).map(|j| CoefficientArray::unit(space, j)).collect();
    for k in 0..probes {
        out.push(gaussian_coefficients(space, derive_seed(seed, k as u64)));
    }
    out
}

pub(crate) fn probe_ratios(
    space: &QsisSpace,
    probes: usize,
    seed: u64,
    ratio: impl Fn(&CoefficientArray) -> f64 + Sync,
) -> Vec<f64> {
    probe_set(space, probes, seed).par_iter().map(&ratio).filter(|r| r.is_finite()).collect()
}

/// I.i.d. standard normal coefficients over the active triples.
pub fn gaussian_coefficients(space: &QsisSpace, seed: u64) -> CoefficientArray {
    let mut rng = rng_from_seed(seed);
    let values = (0..space.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    CoefficientArray { columns: space.columns.clone(), values }
}

/// Random element of `V_K*(Φ)`: Gaussian coefficients rescaled so that
/// `‖f‖_{L^{p,q}(K̃)} = 1`.
pub fn random_unit_element(
    space: &QsisSpace,
    e: MixedExponents,
    seed: u64,
) -> Result<(GridFunction, CoefficientArray)> {
    for attempt in 0..8u64 {
        let c = gaussian_coefficients(space, derive_seed(seed, attempt));
        let f = space.synthesize(&c)?;
        let n = f.norm(e);
        if n > 0.0 && n.is_finite() {
            let c = c.scale(1.0 / n);
            let f = f.scale(1.0 / n);
            return Ok((f, c));
        }
    }
    Err(Error::DegenerateSpace("eight consecutive zero draws".into()))
}

/// Membership of one element in the two subsets the sampling inequalities
/// are stated for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    /// `‖f∗ω‖_{L^{p,q}(K)} >= θ` and `‖f‖_{L^{p,q}(K̃)} <= α`.
    pub in_v_pq_alpha_theta: bool,
    /// `μ ‖ω‖_1 ‖f‖_{L^{p,q}(K̃)} <= ‖f∗ω‖_{L^1(K)}`.
    pub in_v_omega_mu: bool,
    pub f_norm: f64,
    pub conv_pq: f64,
    pub conv_l1: f64,
}

impl Membership {
    /// Both flags from precomputed norms. Inequalities are inclusive up to
    /// `1e-12` relative.
    pub fn from_norms(
        f_norm: f64,
        conv_pq: f64,
        conv_l1: f64,
        omega_l1: f64,
        theta: f64,
        alpha: f64,
        mu: f64,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::Parameter(format!("mu must lie in (0, 1], got {mu}")));
        }
        let slack = 1.0 + 1e-12;
        Ok(Membership {
            in_v_pq_alpha_theta: conv_pq * slack >= theta && f_norm <= alpha * slack,
            in_v_omega_mu: mu * omega_l1 * f_norm <= conv_l1 * slack,
            f_norm,
            conv_pq,
            conv_l1,
        })
    }
}

pub fn classify_membership(
    space: &QsisSpace,
    c: &CoefficientArray,
    kernel: &AveragingKernel,
    theta: f64,
    alpha: f64,
    mu: f64,
    e: MixedExponents,
) -> Result<Membership> {
    let f = space.synthesize(c)?;
    let conv = convolve_grid(&f, kernel, space.domain.k())?;
    Membership::from_norms(
        f.norm(e),
        conv.norm(e),
        conv.norm(MixedExponents::L1),
        kernel.l1_norm(),
        theta,
        alpha,
        mu,
    )
}
