//! Sampling densities on `K`, random sample sets and the centered statistic
//! `Y(f) = |(f∗ω)(z)| − ∫_K ρ |f∗ω|`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{averaged_basis_at, convolve_grid, AveragingKernel};
use crate::domain::{MixedExponents, Region};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::space::{CoefficientArray, QsisSpace};

/// How the `n × m` sample grid is populated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// `n·m` independent pairs drawn from `ρ`.
    #[default]
    Joint,
    /// `u_1..u_n` from `ρ₁` and `v_1..v_m` from `ρ₂`; point `(j,k) = (u_j, v_k)`.
    Product,
}

/// Unnormalized density shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    Uniform,
    /// Separable Gaussian truncated to `K`.
    TruncatedGaussian { center: [f64; 2], sigma: [f64; 2] },
    /// `1 + tilt ξ₁ ξ₂` with `ξ` the coordinates rescaled to `[−1, 1]` over
    /// `K`; not a product density unless `tilt = 0`.
    Tilted { tilt: f64 },
}

/// Probability density `ρ` on `K` with bounds `0 < C_{ρ,1} <= ρ <= C_{ρ,2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingDensity {
    kind: DensityKind,
    k: Region,
    mode: SamplingMode,
    norm: f64,
    c_rho_1: f64,
    c_rho_2: f64,
}

impl SamplingDensity {
    pub fn new(kind: DensityKind, k: &Region, mode: SamplingMode) -> Result<Self> {
        match kind {
            DensityKind::Uniform => {}
            DensityKind::TruncatedGaussian { center, sigma } => {
                if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Parameter("gaussian density needs finite center and positive sigma".into()));
                }
            }
            DensityKind::Tilted { tilt } => {
                if !(tilt.abs() < 1.0) {
                    return Err(Error::Parameter(format!("tilt must satisfy |tilt| < 1, got {tilt}")));
                }
            }
        }
        let mut rho = SamplingDensity { kind, k: *k, mode, norm: 1.0, c_rho_1: 0.0, c_rho_2: 0.0 };
        if mode == SamplingMode::Product && !rho.is_product() {
            return Err(Error::Mode("product sampling needs a separable density".into()));
        }
        rho.norm = k.nodes().map(|(u, v)| rho.raw(u, v)).sum::<f64>() * k.cell();
        let (lo, hi) = rho.extremes();
        rho.c_rho_1 = lo;
        rho.c_rho_2 = hi;
        Ok(rho)
    }

    pub fn uniform(k: &Region) -> Self {
        Self::new(DensityKind::Uniform, k, SamplingMode::Joint).expect("uniform density is valid")
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }
    pub fn mode(&self) -> SamplingMode {
        self.mode
    }
    pub fn region(&self) -> &Region {
        &self.k
    }
    pub fn c_rho_1(&self) -> f64 {
        self.c_rho_1
    }
    pub fn c_rho_2(&self) -> f64 {
        self.c_rho_2
    }

    /// Same density, different sampling mode.
    pub fn with_mode(&self, mode: SamplingMode) -> Result<Self> {
        Self::new(self.kind, &self.k, mode)
    }

    pub fn is_product(&self) -> bool {
        match self.kind {
            DensityKind::Tilted { tilt } => tilt == 0.0,
            _ => true,
        }
    }

    fn xi(&self, a: usize, x: f64) -> f64 {
        let [lo, hi] = self.k.extent(a);
        2.0 * (x - lo) / (hi - lo).max(f64::MIN_POSITIVE) - 1.0
    }

    /// Per-axis factor of a separable density (unnormalized).
    fn factor(&self, a: usize, x: f64) -> f64 {
        match self.kind {
            DensityKind::TruncatedGaussian { center, sigma } => (-0.5 * ((x - center[a]) / sigma[a]).powi(2)).exp(),
            _ => 1.0,
        }
    }

    fn raw(&self, u: f64, v: f64) -> f64 {
        match self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::TruncatedGaussian { .. } => self.factor(0, u) * self.factor(1, v),
            DensityKind::Tilted { tilt } => 1.0 + tilt * self.xi(0, u) * self.xi(1, v),
        }
    }

    /// `ρ(u, v)`; zero outside `K`.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        if !self.k.contains_point(u, v) {
            return 0.0;
        }
        self.raw(u, v) / self.norm
    }

    /// Extremes over grid nodes, the corners of `K`, and the projection of a
    /// Gaussian center, which together contain the continuous extremes.
    fn extremes(&self) -> (f64, f64) {
        let [e0, e1] = [self.k.extent(0), self.k.extent(1)];
        let mut pts: Vec<(f64, f64)> = self.k.nodes().collect();
        for u in e0 {
            for v in e1 {
                pts.push((u, v));
            }
        }
        if let DensityKind::TruncatedGaussian { center, .. } = self.kind {
            pts.push((center[0].clamp(e0[0], e0[1]), center[1].clamp(e1[0], e1[1])));
        }
        pts.iter().map(|&(u, v)| self.raw(u, v) / self.norm).fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }

    /// Grid quadrature of `ρ` over `K` (1 by construction).
    pub fn total_mass(&self) -> f64 {
        self.k.nodes().map(|(u, v)| self.eval(u, v)).sum::<f64>() * self.k.cell()
    }

    fn draw_point<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let [e0, e1] = [self.k.extent(0), self.k.extent(1)];
        loop {
            let u = uniform_in(rng, e0);
            let v = uniform_in(rng, e1);
            let accept: f64 = rng.random::<f64>() * self.c_rho_2;
            if accept < self.eval(u, v) {
                return (u, v);
            }
        }
    }

    fn draw_coord<R: Rng>(&self, rng: &mut R, a: usize) -> f64 {
        let e = self.k.extent(a);
        let peak = match self.kind {
            DensityKind::TruncatedGaussian { center, .. } => self.factor(a, center[a].clamp(e[0], e[1])),
            _ => 1.0,
        };
        loop {
            let x = uniform_in(rng, e);
            if rng.random::<f64>() * peak < self.factor(a, x) {
                return x;
            }
        }
    }
}

fn uniform_in<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Random sample points `(u_j, v_k)`, row-major in `(j, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub n: usize,
    pub m: usize,
    pub mode: SamplingMode,
    pub seed: u64,
    points: Vec<(f64, f64)>,
}

impl SampleSet {
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn point(&self, j: usize, k: usize) -> (f64, f64) {
        self.points[j * self.m + k]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `rows` rows of the layout viewed as an `rows·m` set.
    pub fn truncated(&self, rows: usize) -> SampleSet {
        let rows = rows.min(self.n);
        SampleSet { n: rows, m: self.m, mode: self.mode, seed: self.seed, points: self.points[..rows * self.m].to_vec() }
    }
}

pub fn draw_sample_set(rho: &SamplingDensity, n: usize, m: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 || m == 0 {
        return Err(Error::Parameter("n and m must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let points = match rho.mode {
        SamplingMode::Joint => (0..n * m).map(|_| rho.draw_point(&mut rng)).collect(),
        SamplingMode::Product => {
            let us: Vec<f64> = (0..n).map(|_| rho.draw_coord(&mut rng, 0)).collect();
            let vs: Vec<f64> = (0..m).map(|_| rho.draw_coord(&mut rng, 1)).collect();
            us.iter().flat_map(|&u| vs.iter().map(move |&v| (u, v))).collect()
        }
    };
    Ok(SampleSet { n, m, mode: rho.mode, seed, points })
}

/// How `∫_K ρ |f∗ω|` is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Left-endpoint rule on the nodes of `K`.
    Grid,
    /// Midpoint rule with each cell of `K` split `r × r`; `f∗ω` is evaluated
    /// exactly at the midpoints.
    Midpoint(usize),
}

/// `Y(f)` for one space element, with the expectation term cached.
pub struct YStatistic<'a> {
    space: &'a QsisSpace,
    kernel: &'a AveragingKernel,
    coeffs: CoefficientArray,
    expectation: f64,
}

impl<'a> YStatistic<'a> {
    pub fn new(
        space: &'a QsisSpace,
        kernel: &'a AveragingKernel,
        rho: &SamplingDensity,
        coeffs: &CoefficientArray,
        quadrature: Quadrature,
    ) -> Result<Self> {
        let f = space.synthesize(coeffs)?;
        let mut y = YStatistic { space, kernel, coeffs: coeffs.clone(), expectation: 0.0 };
        let k = space.domain().k();
        y.expectation = match quadrature {
            Quadrature::Grid => {
                // node arithmetic gives f∗ω on the grid exactly
                let g = convolve_grid(&f, kernel, k)?;
                k.nodes().zip(g.values()).map(|((u, v), x)| rho.eval(u, v) * x.abs()).sum::<f64>() * k.cell()
            }
            Quadrature::Midpoint(_) => quadrature_points(k, quadrature)
                .par_iter()
                .map(|&(u, v, w)| w * rho.eval(u, v) * y.conv_abs(u, v))
                .collect::<Vec<f64>>()
                .iter()
                .sum(),
        };
        Ok(y)
    }

    fn conv_abs(&self, u: f64, v: f64) -> f64 {
        averaged_basis_at(self.space, self.kernel, u, v)
            .iter()
            .zip(self.coeffs.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .abs()
    }

    /// Cached `∫_K ρ |f∗ω|`.
    pub fn expectation(&self) -> f64 {
        self.expectation
    }

    pub fn value(&self, u: f64, v: f64) -> Result<f64> {
        if !self.space.domain().k().contains_point(u, v) {
            return Err(Error::OutOfDomain(u, v));
        }
        Ok(self.conv_abs(u, v) - self.expectation)
    }
}

/// `(u, v, weight)` for a quadrature rule on `k`.
pub fn quadrature_points(k: &Region, quadrature: Quadrature) -> Vec<(f64, f64, f64)> {
    match quadrature {
        Quadrature::Grid => k.nodes().map(|(u, v)| (u, v, k.cell())).collect(),
        Quadrature::Midpoint(r) => {
            let r = r.max(1);
            let (h1, h2) = (k.axis(0).step() / r as f64, k.axis(1).step() / r as f64);
            let w = h1 * h2;
            let mut out = Vec::with_capacity(k.len() * r * r);
            for (u, v) in k.nodes() {
                for a in 0..r {
                    for b in 0..r {
                        out.push((u + (a as f64 + 0.5) * h1, v + (b as f64 + 0.5) * h2, w));
                    }
                }
            }
            out
        }
    }
}

/// Single evaluation of `Y(f)` at `point`.
pub fn y_statistic(
    space: &QsisSpace,
    coeffs: &CoefficientArray,
    point: (f64, f64),
    rho: &SamplingDensity,
    kernel: &AveragingKernel,
) -> Result<f64> {
    YStatistic::new(space, kernel, rho, coeffs, Quadrature::Grid)?.value(point.0, point.1)
}

/// An observed quantity against its deterministic bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(observed: f64, bound: f64) -> Self {
        BoundCheck { observed, bound, pass: observed - bound <= 1e-12 }
    }
}

/// Empirical moments of `Y` over random points, against the lemma's bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    pub std_error: f64,
    /// `|mean| <= 3 std / √trials`.
    pub clt_pass: bool,
    /// `max |Y(f) − Y(g)|` against `2‖f − g‖_{L^∞(K̃)}‖ω‖₁`.
    pub lipschitz: BoundCheck,
    /// `Var(Y(f) − Y(g))` against `4‖f − g‖²_{L^∞(K̃)}‖ω‖₁²`.
    pub variance_difference: BoundCheck,
    /// `max |Y(f/‖f‖)|` against `(C̃_Φ/a₁)‖ω‖₁`.
    pub sup_normalized: BoundCheck,
    /// `Var(Y(f/‖f‖))` against `(C̃_Φ/a₁)²‖ω‖₁²`.
    pub variance_normalized: BoundCheck,
}

impl MomentReport {
    pub fn all_bounds_pass(&self) -> bool {
        self.lipschitz.pass && self.variance_difference.pass && self.sup_normalized.pass && self.variance_normalized.pass
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Settings for [`empirical_y_moments`].
#[derive(Debug, Clone, Copy)]
pub struct MomentSettings {
    pub e: MixedExponents,
    pub a1: f64,
    pub c_phi_tilde: f64,
    pub trials: usize,
    pub seed: u64,
    pub quadrature: Quadrature,
}

pub fn empirical_y_moments(
    space: &QsisSpace,
    kernel: &AveragingKernel,
    rho: &SamplingDensity,
    f: &CoefficientArray,
    g: &CoefficientArray,
    s: MomentSettings,
) -> Result<MomentReport> {
    if s.trials < 1000 {
        return Err(Error::Parameter(format!("need at least 1000 trials, got {}", s.trials)));
    }
    let f_norm = space.synthesize(f)?.norm(s.e);
    let unit = if f_norm > 0.0 { f.scale(1.0 / f_norm) } else { f.clone() };
    let yf = YStatistic::new(space, kernel, rho, f, s.quadrature)?;
    let yg = YStatistic::new(space, kernel, rho, g, s.quadrature)?;
    let yu = YStatistic::new(space, kernel, rho, &unit, s.quadrature)?;
    let pts = draw_sample_set(&rho.with_mode(SamplingMode::Joint)?, s.trials, 1, s.seed)?;
    let vals: Vec<(f64, f64, f64)> = pts
        .points()
        .par_iter()
        .map(|&(u, v)| Ok((yf.value(u, v)?, yg.value(u, v)?, yu.value(u, v)?)))
        .collect::<Result<_>>()?;

    let a: Vec<f64> = vals.iter().map(|t| t.0).collect();
    let diff: Vec<f64> = vals.iter().map(|t| t.0 - t.1).collect();
    let un: Vec<f64> = vals.iter().map(|t| t.2).collect();
    let (mean, var) = mean_var(&a);
    let n = s.trials as f64;
    let std = (var * n / (n - 1.0)).sqrt();
    let std_error = std / n.sqrt();

    let w1 = kernel.l1_norm();
    let sup_diff = space.sup_norm(&f.sub(g));
    let max_diff = diff.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let (_, var_diff) = mean_var(&diff);
    let ceiling = s.c_phi_tilde / s.a1 * w1;
    let max_unit = un.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let (_, var_unit) = mean_var(&un);
    Ok(MomentReport {
        trials: s.trials,
        mean,
        std,
        std_error,
        clt_pass: mean.abs() <= 3.0 * std_error,
        lipschitz: BoundCheck::new(max_diff, 2.0 * sup_diff * w1),
        variance_difference: BoundCheck::new(var_diff, 4.0 * (sup_diff * w1).powi(2)),
        sup_normalized: BoundCheck::new(max_unit, ceiling),
        variance_normalized: BoundCheck::new(var_unit, ceiling * ceiling),
    })
}
