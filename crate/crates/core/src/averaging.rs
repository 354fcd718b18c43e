//! The averaging kernel `ω`, convolution `f∗ω` on `K`, and Young-type checks.
//!
//! Convolution uses the same left-endpoint rule as the norms:
//! `(f∗ω)(z) = Σ_{w ∈ W-grid} f(z − w) ω(w) step1 step2`. On grid nodes this
//! is pure index arithmetic, so the discrete Young and Hölder inequalities
//! hold exactly.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::domain::{fold_mixed, minkowski_diff, Axis, AxisRange, GridFunction, MixedExponents, Region, Scalar};
use crate::error::{Error, Result};
use crate::space::{CoefficientArray, QsisSpace};

/// Something that can be evaluated at an arbitrary point of the group.
pub trait Evaluate<T> {
    fn eval(&self, u: f64, v: f64) -> T;
}

impl<T, F: Fn(f64, f64) -> T> Evaluate<T> for F {
    fn eval(&self, u: f64, v: f64) -> T {
        self(u, v)
    }
}

/// Bilinear interpolation of node data, clamped at the region's edges.
impl<T: Scalar> Evaluate<T> for GridFunction<T> {
    fn eval(&self, u: f64, v: f64) -> T {
        let r = self.region();
        let (i0, i1, a) = locate(r.axis(0), r.range(0), u);
        let (j0, j1, b) = locate(r.axis(1), r.range(1), v);
        let (a, b) = (T::from_real(a), T::from_real(b));
        let one = T::one();
        self.get(i0, j0) * (one - a) * (one - b)
            + self.get(i1, j0) * a * (one - b)
            + self.get(i0, j1) * (one - a) * b
            + self.get(i1, j1) * a * b
    }
}

fn locate(axis: &Axis, range: &AxisRange, x: f64) -> (usize, usize, f64) {
    let n = range.count;
    let full_circle = axis.is_cyclic() && n == axis.num_points();
    let mut t = x - range.lo;
    if axis.is_cyclic() {
        t = t.rem_euclid(axis.period());
    }
    t /= axis.step();
    if full_circle {
        let i = (t.floor() as usize).min(n - 1);
        return (i, (i + 1) % n, t - i as f64);
    }
    if t <= 0.0 || n == 1 {
        return (0, 0, 0.0);
    }
    if t >= (n - 1) as f64 {
        return (n - 1, n - 1, 0.0);
    }
    let i = t.floor() as usize;
    (i, i + 1, t - i as f64)
}

/// A space element `Σ c_j basis_j`, evaluated exactly.
pub struct SpaceElement<'a, T> {
    pub space: &'a QsisSpace,
    pub coeffs: &'a CoefficientArray<T>,
}

impl<T: Scalar> Evaluate<T> for SpaceElement<'_, T> {
    fn eval(&self, u: f64, v: f64) -> T {
        self.space.eval(self.coeffs, u, v)
    }
}

/// `ω` sampled on the nodes of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingKernel<T = f64> {
    region: Region,
    values: Vec<T>,
    /// `ω(h1, h2) = f1[h1] f2[h2]` when known.
    factors: Option<[Vec<T>; 2]>,
    l1: f64,
}

impl<T: Scalar> AveragingKernel<T> {
    pub fn from_values(w: &Region, values: Vec<T>) -> Result<Self> {
        let g = GridFunction::from_values(*w, values)?;
        Self::build(w, g.into_values(), None)
    }

    pub fn from_fn(w: &Region, f: impl FnMut(f64, f64) -> T) -> Result<Self> {
        Self::from_values(w, GridFunction::from_fn(*w, f).into_values())
    }

    /// Separable kernel `f1(u) f2(v)`.
    pub fn separable(w: &Region, f1: impl Fn(f64) -> T, f2: impl Fn(f64) -> T) -> Result<Self> {
        let (c1, c2) = w.shape();
        let a: Vec<T> = (0..c1).map(|k| f1(w.node(k, 0).0)).collect();
        let b: Vec<T> = (0..c2).map(|k| f2(w.node(0, k).1)).collect();
        let values = (0..c1).flat_map(|i| b.iter().map(move |&y| (i, y))).map(|(i, y)| a[i] * y).collect();
        let g = GridFunction::from_values(*w, values)?;
        Self::build(w, g.into_values(), Some([a, b]))
    }

    fn build(w: &Region, values: Vec<T>, factors: Option<[Vec<T>; 2]>) -> Result<Self> {
        let l1 = values.iter().map(|x| x.modulus()).sum::<f64>() * w.cell();
        if !(l1 > 0.0) {
            return Err(Error::Parameter("averaging kernel has zero L1 norm".into()));
        }
        Ok(AveragingKernel { region: *w, values, factors, l1 })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn factors(&self) -> Option<&[Vec<T>; 2]> {
        self.factors.as_ref()
    }
    /// `‖ω‖_{L¹(W)}`.
    pub fn l1_norm(&self) -> f64 {
        self.l1
    }

    pub fn value(&self, h1: usize, h2: usize) -> T {
        self.values[h1 * self.region.shape().1 + h2]
    }

    /// Multiplies every value by `a`.
    pub fn scaled(&self, a: T) -> Result<Self> {
        let factors = self.factors.as_ref().map(|[x, y]| [x.iter().map(|&v| v * a).collect(), y.clone()]);
        Self::build(&self.region, self.values.iter().map(|&v| v * a).collect(), factors)
    }

    /// Kernel as a grid function on `W`.
    pub fn as_grid(&self) -> GridFunction<T> {
        GridFunction::from_values_unchecked(self.region, self.values.clone())
    }
}

impl AveragingKernel<f64> {
    /// `1_W / |W|`, so `‖ω‖₁ = 1`.
    pub fn boxed(w: &Region) -> Self {
        let h = 1.0 / (w.measure(0) * w.measure(1));
        Self::separable(w, |_| h, |_| 1.0).expect("box kernel is nonzero")
    }

    /// Gaussian truncated to `W` and normalized to unit mass.
    pub fn truncated_gaussian(w: &Region, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
        }
        let g = |x: f64| (-0.5 * (x / sigma).powi(2)).exp();
        let raw = Self::separable(w, g, g)?;
        raw.scaled(1.0 / raw.l1)
    }
}

impl AveragingKernel<nalgebra::Complex<f64>> {
    /// Normalized box modulated by `exp(i freq (u + v))`.
    pub fn modulated(w: &Region, freq: f64) -> Self {
        use nalgebra::Complex;
        let h = 1.0 / (w.measure(0) * w.measure(1));
        Self::separable(w, |u| Complex::from_polar(h, freq * u), |v| Complex::from_polar(1.0, freq * v))
            .expect("modulated box is nonzero")
    }
}

/// Per-axis gather table: for target node `k` and kernel node `h`, the local
/// index into the source range of `z_k − w_h`.
fn gather_table(axis: &Axis, src: &AxisRange, target: &AxisRange, w: &AxisRange) -> Result<Vec<Vec<usize>>> {
    let origin = axis
        .origin_index()
        .ok_or_else(|| Error::InvalidAxis("node lattice does not contain the identity".into()))?;
    (0..target.count)
        .map(|k| {
            (0..w.count)
                .map(|h| {
                    let idx = target.first + k as i64 - (w.first + h as i64) + origin;
                    src.local_index(axis, idx).ok_or_else(|| {
                        Error::Parameter("function is not defined on the whole of target − W".into())
                    })
                })
                .collect()
        })
        .collect()
}

/// `f∗ω` on every node of `target`, by exact node arithmetic.
pub fn convolve_grid<T: Scalar>(f: &GridFunction<T>, kernel: &AveragingKernel<T>, target: &Region) -> Result<GridFunction<T>> {
    let src = f.region();
    let w = kernel.region();
    if !(src.same_axes(target) && src.same_axes(w)) {
        return Err(Error::Parameter("function, kernel and target live on different axes".into()));
    }
    let axes = src.axes();
    let t1 = gather_table(&axes[0], src.range(0), target.range(0), w.range(0))?;
    let t2 = gather_table(&axes[1], src.range(1), target.range(1), w.range(1))?;
    let (n1, n2) = target.shape();
    let (s1, s2) = src.shape();
    let cell = T::from_real(w.cell());
    let fv = f.values();

    let values: Vec<T> = if let Some([a, b]) = kernel.factors() {
        // inner pass along the second axis for every source row
        let tmp: Vec<T> = (0..s1)
            .into_par_iter()
            .flat_map_iter(|i| {
                let row = &fv[i * s2..(i + 1) * s2];
                t2.iter().map(move |idx| idx.iter().zip(b).fold(T::zero(), |acc, (&j, &y)| acc + row[j] * y))
            })
            .collect();
        (0..n1)
            .into_par_iter()
            .flat_map_iter(|k1| {
                let tmp = &tmp;
                let idx1 = &t1[k1];
                (0..n2).map(move |k2| {
                    idx1.iter().zip(a).fold(T::zero(), |acc, (&i, &x)| acc + tmp[i * n2 + k2] * x) * cell
                })
            })
            .collect()
    } else {
        let (c1, c2) = w.shape();
        let wv = kernel.values();
        (0..n1)
            .into_par_iter()
            .flat_map_iter(|k1| {
                let idx1 = &t1[k1];
                let t2 = &t2;
                (0..n2).map(move |k2| {
                    let idx2 = &t2[k2];
                    let mut acc = T::zero();
                    for h1 in 0..c1 {
                        let row = &fv[idx1[h1] * s2..];
                        for h2 in 0..c2 {
                            acc += row[idx2[h2]] * wv[h1 * c2 + h2];
                        }
                    }
                    acc * cell
                })
            })
            .collect()
    };
    Ok(GridFunction::from_values_unchecked(*target, values))
}

/// `(f∗ω)(z)` at arbitrary points `z ∈ K`.
pub fn convolve<T: Scalar, F: Evaluate<T> + Sync>(
    f: &F,
    kernel: &AveragingKernel<T>,
    k: &Region,
    targets: &[(f64, f64)],
) -> Result<Vec<T>> {
    if let Some(&(u, v)) = targets.iter().find(|&&(u, v)| !k.contains_point(u, v)) {
        return Err(Error::OutOfDomain(u, v));
    }
    let w = kernel.region();
    let (c1, c2) = w.shape();
    let nodes: Vec<(f64, f64)> = w.nodes().collect();
    let cell = T::from_real(w.cell());
    Ok(targets
        .par_iter()
        .map(|&(u, v)| {
            let mut acc = T::zero();
            for h1 in 0..c1 {
                for h2 in 0..c2 {
                    let (a, b) = nodes[h1 * c2 + h2];
                    acc += f.eval(u - a, v - b) * kernel.value(h1, h2);
                }
            }
            acc * cell
        })
        .collect())
}

/// `(φ_j∗ω)(u, v)` for every column `j` of the space (zeros where the
/// shifted support cannot reach the point).
pub fn averaged_basis_at<T: Scalar>(space: &QsisSpace, kernel: &AveragingKernel<T>, u: f64, v: f64) -> Vec<T> {
    let w = kernel.region();
    let (c1, c2) = w.shape();
    let [wu, wv] = [w.extent(0), w.extent(1)];
    let cell = T::from_real(w.cell());
    let mut out = vec![T::zero(); space.dim()];
    let pos1: Vec<f64> = (0..c1).map(|h| w.node(h, 0).0).collect();
    let pos2: Vec<f64> = (0..c2).map(|h| w.node(0, h).1).collect();
    for (j, o) in out.iter_mut().enumerate() {
        if !space.column_may_touch(j, 0, u - wu[1], u - wu[0]) || !space.column_may_touch(j, 1, v - wv[1], v - wv[0]) {
            continue;
        }
        *o = match kernel.factors() {
            Some([a, b]) => {
                let x = pos1
                    .iter()
                    .zip(a)
                    .fold(T::zero(), |acc, (&p, &y)| acc + T::from_real(space.basis_factor(j, 0, u - p)) * y);
                if x == T::zero() {
                    continue;
                }
                let y = pos2
                    .iter()
                    .zip(b)
                    .fold(T::zero(), |acc, (&p, &y)| acc + T::from_real(space.basis_factor(j, 1, v - p)) * y);
                x * y * cell
            }
            None => {
                let mut acc = T::zero();
                for h1 in 0..c1 {
                    let bu = space.basis_factor(j, 0, u - pos1[h1]);
                    if bu == 0.0 {
                        continue;
                    }
                    for h2 in 0..c2 {
                        let bv = space.basis_factor(j, 1, v - pos2[h2]);
                        acc += T::from_real(bu * bv) * kernel.value(h1, h2);
                    }
                }
                acc * cell
            }
        };
    }
    out
}

/// `(f∗ω)(u, v)` for a space element, through the averaged basis.
pub fn averaged_eval<T: Scalar>(space: &QsisSpace, kernel: &AveragingKernel<T>, c: &CoefficientArray<T>, u: f64, v: f64) -> T {
    averaged_basis_at(space, kernel, u, v)
        .into_iter()
        .zip(c.values())
        .fold(T::zero(), |acc, (m, &x)| acc + m * x)
}

/// Matrix of `(φ_j∗ω)` on the nodes of `K`; applying it to coefficients
/// gives `f∗ω` on `K`.
#[derive(Debug, Clone)]
pub struct AveragedSynthesis<T = f64> {
    k: Region,
    matrix: DMatrix<T>,
}

impl<T: Scalar> AveragedSynthesis<T> {
    pub fn new(space: &QsisSpace, kernel: &AveragingKernel<T>) -> Result<Self> {
        let k = *space.domain().k();
        let cols: Vec<Vec<T>> = (0..space.dim())
            .into_par_iter()
            .map(|j| {
                let f = space.synthesize(&CoefficientArray::<T>::unit(space, j))?;
                Ok(convolve_grid(&f, kernel, &k)?.into_values())
            })
            .collect::<Result<_>>()?;
        let matrix = DMatrix::from_fn(k.len(), space.dim(), |i, j| cols[j][i]);
        Ok(AveragedSynthesis { k, matrix })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn region(&self) -> &Region {
        &self.k
    }

    pub fn apply(&self, c: &CoefficientArray<T>) -> Result<GridFunction<T>> {
        if c.len() != self.matrix.ncols() {
            return Err(Error::Layout { expected: self.matrix.ncols(), got: c.len() });
        }
        let x = nalgebra::DVector::from_column_slice(c.values());
        let y = &self.matrix * x;
        Ok(GridFunction::from_values_unchecked(self.k, y.iter().copied().collect()))
    }
}

/// Node values of a one-axis function on a range.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFunction {
    pub axis: Axis,
    pub range: AxisRange,
    pub values: Vec<f64>,
}

impl LineFunction {
    pub fn new(axis: Axis, range: AxisRange, values: Vec<f64>) -> Result<Self> {
        if values.len() != range.count {
            return Err(Error::Layout { expected: range.count, got: values.len() });
        }
        Ok(LineFunction { axis, range, values })
    }

    pub fn from_fn(axis: Axis, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let range = AxisRange::snap(&axis, 0, lo, hi)?;
        let values = (0..range.count).map(|k| f(range.position(&axis, k))).collect();
        Ok(LineFunction { axis, range, values })
    }

    fn at(&self, idx: i64) -> Option<f64> {
        self.range.local_index(&self.axis, idx).map(|k| self.values[k])
    }

    fn lp_on(&self, range: &AxisRange, p: f64) -> f64 {
        let vals = (0..range.count).map(|k| self.at(range.first + k as i64).unwrap_or(0.0).abs());
        let e = MixedExponents { p, q: 1.0 };
        fold_mixed(vals.map(std::iter::once), e, self.axis.step(), 1.0)
    }
}

fn recip(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// `‖f‖_{L^p(K̃₀)} ‖g‖_{L^q(W₀)} − ‖f∗g‖_{L^r(K₀)}` on one axis, with
/// `1/p + 1/q = 1/r + 1`. Here `g` lives on `W₀` and `k0` gives `K₀`.
pub fn young_check_scalar(f: &LineFunction, g: &LineFunction, k0: [f64; 2], p: f64, q: f64, r: f64) -> Result<f64> {
    for x in [p, q, r] {
        if x.is_nan() || x < 1.0 {
            return Err(Error::InvalidExponent(x));
        }
    }
    if (recip(p) + recip(q) - recip(r) - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!("1/p + 1/q must equal 1/r + 1, got p={p} q={q} r={r}")));
    }
    if f.axis != g.axis {
        return Err(Error::Parameter("f and g live on different axes".into()));
    }
    let axis = f.axis;
    let kr = AxisRange::snap(&axis, 0, k0[0], k0[1])?;
    let wr = g.range;
    let kt = AxisRange::snap(&axis, 0, kr.lo - wr.hi, kr.hi.max(kr.extent_hi(&axis)) - wr.lo)?;
    let origin = axis
        .origin_index()
        .ok_or_else(|| Error::InvalidAxis("node lattice does not contain the identity".into()))?;
    let conv: Vec<f64> = (0..kr.count)
        .map(|k| {
            let z = kr.first + k as i64;
            (0..wr.count)
                .map(|h| {
                    let idx = z - (wr.first + h as i64) + origin;
                    // f restricted to K̃₀
                    let fv = if kt.local_index(&axis, idx).is_some() { f.at(idx).unwrap_or(0.0) } else { 0.0 };
                    fv * g.values[h]
                })
                .sum::<f64>()
                * axis.step()
        })
        .collect();
    let conv = LineFunction { axis, range: kr, values: conv };
    let lhs = conv.lp_on(&kr, r);
    let rhs = f.lp_on(&kt, p) * g.lp_on(&wr, q);
    Ok(rhs - lhs)
}

/// Slacks of the mixed-norm and sup-norm Young bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedSlack {
    pub pq: f64,
    pub inf: f64,
}

/// `‖f‖_{L^{p,q}(K̃₀)}‖g‖₁ − ‖f∗g‖_{L^{p,q}(K₀)}` and the same with `L^∞`,
/// where `K̃₀ = K₀ − W₀` and `W₀` is the kernel's region.
pub fn young_check_mixed<T: Scalar>(f: &GridFunction<T>, g: &AveragingKernel<T>, k0: &Region, e: MixedExponents) -> Result<MixedSlack> {
    let kt = minkowski_diff(k0, g.region())?;
    let conv = convolve_grid(f, g, k0)?;
    let pq = f.mixed_norm(&kt, e)? * g.l1_norm() - conv.norm(e);
    let inf = f.mixed_norm(&kt, MixedExponents::INF)? * g.l1_norm() - conv.norm(MixedExponents::INF);
    Ok(MixedSlack { pq, inf })
}
