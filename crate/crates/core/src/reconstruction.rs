//! Sample matrix, dual system and least-squares reconstruction.
//!
//! With `M` the `(n·m) × cols` matrix of averaged basis values at the sample
//! points, `M c = S` for every element of the space. The dual matrix is
//! `M̃ = M̄ (Mᵀ M̄)^{-1}`, so that `M̃ᵀ = M⁺` and `ĉ = M̃ᵀ S`. It is always
//! formed from an SVD; normal equations are never built.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SVD};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{averaged_basis_at, averaged_eval, AveragedSynthesis, AveragingKernel};
use crate::domain::{GridFunction, MixedExponents, Scalar};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sampling::SampleSet;
use crate::space::{probe_set, weighted_singular_values, CoefficientArray, Column, QsisSpace, RANK_TOL};

/// `M`, rows `(j, k)` row-major, columns the active triples `(i, s, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix<T = f64> {
    pub n: usize,
    pub m: usize,
    matrix: DMatrix<T>,
    columns: Arc<Vec<Column>>,
}

impl<T: Scalar> SampleMatrix<T> {
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// `(rows, cols)`.
    pub fn dims(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    pub fn apply(&self, c: &CoefficientArray<T>) -> Result<Vec<T>> {
        if c.len() != self.matrix.ncols() {
            return Err(Error::Layout { expected: self.matrix.ncols(), got: c.len() });
        }
        Ok((&self.matrix * DVector::from_column_slice(c.values())).iter().copied().collect())
    }

    /// Column names `i:s:t` for CSV export.
    pub fn csv_header(&self) -> Vec<String> {
        self.columns.iter().map(|c| format!("{}:{}:{}", c.gen, c.s, c.t)).collect()
    }

    /// Rows as formatted values, `(j, k)` row-major.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        (0..self.matrix.nrows())
            .map(|r| self.matrix.row(r).iter().map(|x| format!("{x}")).collect())
            .collect()
    }

    /// `min` and `max` of `‖Mc‖_{ℓ¹} / ‖c‖_{ℓ^{p,q}}` over a probe set.
    pub fn l1_stability(&self, space: &QsisSpace, e: MixedExponents, probes: usize, seed: u64) -> (f64, f64) {
        let ratios: Vec<f64> = probe_set(space, probes, seed)
            .iter()
            .map(|c| {
                let x = DVector::from_iterator(c.len(), c.values().iter().map(|&v| T::from_real(v)));
                (&self.matrix * x).iter().map(|z| z.modulus()).sum::<f64>() / c.norm(e)
            })
            .collect();
        ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)))
    }
}

/// Assembles `M` from the averaged basis at every sample point.
pub fn assemble_matrix<T: Scalar>(space: &QsisSpace, kernel: &AveragingKernel<T>, samples: &SampleSet) -> Result<SampleMatrix<T>> {
    if space.dim() == 0 {
        return Err(Error::DegenerateSpace("no active columns".into()));
    }
    let k = space.domain().k();
    if let Some(&(u, v)) = samples.points().iter().find(|&&(u, v)| !k.contains_point(u, v)) {
        return Err(Error::OutOfDomain(u, v));
    }
    let rows: Vec<Vec<T>> = samples.points().par_iter().map(|&(u, v)| averaged_basis_at(space, kernel, u, v)).collect();
    let matrix = DMatrix::from_fn(rows.len(), space.dim(), |i, j| rows[i][j]);
    Ok(SampleMatrix { n: samples.n, m: samples.m, matrix, columns: space.columns().clone() })
}

/// Noiseless samples `S_{jk} = (f∗ω)(u_j, v_k)` of a space element.
pub fn sample_values<T: Scalar>(
    space: &QsisSpace,
    kernel: &AveragingKernel<T>,
    c: &CoefficientArray<T>,
    samples: &SampleSet,
) -> Result<Vec<T>> {
    space.synthesize(c)?;
    Ok(samples.points().par_iter().map(|&(u, v)| averaged_eval(space, kernel, c, u, v)).collect())
}

/// Lower constant of the averaged synthesis map on `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta: f64,
    /// True for the `p = q = 2` spectral path.
    pub exact: bool,
    /// The averaged map is (numerically) not bounded below on this instance.
    pub hypothesis_failed: bool,
}

/// `min ‖Σ c(s,t)ᵀ(Φ∗ω)(· − x_s, · − y_t)‖_{L^{p,q}(K)} / ‖c‖_{ℓ^{p,q}}`.
///
/// For `p = q = 2` this is the smallest singular value of the Haar-weighted
/// averaged synthesis matrix, divided by `√r` as for `a₁`. Otherwise the
/// minimum runs over every coordinate vector plus `probes` random arrays.
pub fn beta_estimate(space: &QsisSpace, kernel: &AveragingKernel, e: MixedExponents, probes: usize, seed: u64) -> Result<BetaEstimate> {
    let synth = AveragedSynthesis::new(space, kernel)?;
    let (beta, exact) = if e.is_l2() {
        let a = synth.matrix().scale(synth.region().cell().sqrt());
        let sv = SVD::new(a, false, false).singular_values;
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        (min / (space.generators().r() as f64).sqrt(), true)
    } else {
        let ratios: Vec<f64> = probe_set(space, probes, seed)
            .par_iter()
            .map(|c| Ok(synth.apply(c)?.norm(e) / c.norm(e)))
            .collect::<Result<_>>()?;
        (ratios.into_iter().fold(f64::INFINITY, f64::min), false)
    };
    let scale = kernel.l1_norm() * weighted_singular_values(space)[0];
    Ok(BetaEstimate { beta, exact, hypothesis_failed: !(beta > RANK_TOL * scale) })
}

/// `M̃` together with the factorization data it came from.
#[derive(Debug, Clone)]
pub struct DualSystem<T = f64> {
    matrix: DMatrix<T>,
    dual: DMatrix<T>,
    singular_values: Vec<f64>,
    columns: Arc<Vec<Column>>,
}

impl<T: Scalar> DualSystem<T> {
    /// `M̃`, same shape as `M`.
    pub fn dual(&self) -> &DMatrix<T> {
        &self.dual
    }

    pub fn sample_matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// Singular values of `M`, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Condition number of `MᵀM̄`, `(σ_max/σ_min)²`.
    pub fn condition(&self) -> f64 {
        let s = &self.singular_values;
        (s[0] / s[s.len() - 1]).powi(2)
    }

    pub fn rows(&self) -> usize {
        self.dual.nrows()
    }

    /// `h_{jk}(u, v) = Σ_{i,s,t} M̃_{jk,(i,s,t)} φ_i(u − x_s, v − y_t)`, with
    /// `row = j·m + k`.
    pub fn dual_function(&self, space: &QsisSpace, row: usize, u: f64, v: f64) -> T {
        (0..self.dual.ncols()).fold(T::zero(), |acc, j| acc + self.dual[(row, j)] * T::from_real(space.basis(j, u, v)))
    }

    /// `Σ_{jk} S_{jk} h_{jk}(u, v)`.
    pub fn expand(&self, space: &QsisSpace, s: &[T], u: f64, v: f64) -> T {
        s.iter().enumerate().fold(T::zero(), |acc, (r, &x)| acc + x * self.dual_function(space, r, u, v))
    }
}

/// Forms `M̃` through an SVD of `M`.
pub fn solve_dual<T: Scalar>(m: &SampleMatrix<T>) -> Result<DualSystem<T>> {
    let (rows, cols) = m.dims();
    let svd = SVD::new(m.matrix.clone(), true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = if rows < cols { 0.0 } else { sv.last().copied().unwrap_or(0.0) };
    if !(sigma_min > RANK_TOL * sigma_max) {
        return Err(Error::NotInjective { sigma_min, sigma_max });
    }
    let pinv = svd
        .pseudo_inverse(0.5 * sigma_min)
        .map_err(|_| Error::NotInjective { sigma_min, sigma_max })?;
    Ok(DualSystem { matrix: m.matrix.clone(), dual: pinv.transpose(), singular_values: sv, columns: m.columns.clone() })
}

/// Relative errors `‖f − f̂‖ / ‖f‖` (0/0 counts as 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub rel_pq: f64,
    pub rel_inf: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn reconstruction_error<T: Scalar>(f: &GridFunction<T>, f_hat: &GridFunction<T>, e: MixedExponents) -> Result<RelativeErrors> {
    let diff = f_hat.sub(f)?;
    Ok(RelativeErrors {
        rel_pq: ratio(diff.norm(e), f.norm(e)),
        rel_inf: ratio(diff.sup_norm(), f.sup_norm()),
    })
}

/// Errors against a known truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthErrors {
    pub rel_pq: f64,
    pub rel_inf: f64,
    pub rel_coeff: f64,
}

/// Output of [`reconstruct`].
#[derive(Debug, Clone)]
pub struct ReconstructionReport<T = f64> {
    pub coefficients: CoefficientArray<T>,
    pub f_hat: GridFunction<T>,
    pub condition: f64,
    /// `‖M ĉ − S‖₂`; zero up to roundoff for noiseless samples.
    pub residual: f64,
    pub beta_hat: Option<f64>,
    pub errors: Option<TruthErrors>,
}

impl<T: Scalar> ReconstructionReport<T> {
    /// Fills the error fields from the true element.
    pub fn with_truth(mut self, space: &QsisSpace, c: &CoefficientArray<T>, e: MixedExponents) -> Result<Self> {
        let f = space.synthesize(c)?;
        let rel = reconstruction_error(&f, &self.f_hat, e)?;
        let rel_coeff = ratio(self.coefficients.sub(c).norm(e), c.norm(e));
        self.errors = Some(TruthErrors { rel_pq: rel.rel_pq, rel_inf: rel.rel_inf, rel_coeff });
        Ok(self)
    }
}

/// `ĉ = M̃ᵀ S`, `f̂ = Σ ĉ φ` on `K̃`.
pub fn reconstruct<T: Scalar>(s: &[T], dual: &DualSystem<T>, space: &QsisSpace) -> Result<ReconstructionReport<T>> {
    if s.len() != dual.rows() {
        return Err(Error::Layout { expected: dual.rows(), got: s.len() });
    }
    if dual.dual.ncols() != space.dim() || dual.columns.as_slice() != space.columns().as_slice() {
        return Err(Error::Layout { expected: space.dim(), got: dual.dual.ncols() });
    }
    let sv = DVector::from_column_slice(s);
    let c_hat = dual.dual.transpose() * &sv;
    let residual = (&dual.matrix * &c_hat - &sv).norm();
    let coefficients = CoefficientArray::from_vec(space, c_hat.iter().copied().collect())?;
    let f_hat = space.synthesize(&coefficients)?;
    Ok(ReconstructionReport { coefficients, f_hat, condition: dual.condition(), residual, beta_hat: None, errors: None })
}

/// Random nodes of `K̃` at which `f̂ = Σ S h` is spot-checked; returns the
/// largest relative deviation.
pub fn spot_check_expansion<T: Scalar>(
    space: &QsisSpace,
    dual: &DualSystem<T>,
    s: &[T],
    report: &ReconstructionReport<T>,
    points: usize,
    seed: u64,
) -> f64 {
    let kt = space.domain().k_tilde();
    let (c1, c2) = kt.shape();
    let mut rng = rng_from_seed(seed);
    let scale = report.f_hat.sup_norm().max(f64::MIN_POSITIVE);
    (0..points)
        .map(|_| {
            let (k1, k2) = (rng.random_range(0..c1), rng.random_range(0..c2));
            let (u, v) = kt.node(k1, k2);
            (dual.expand(space, s, u, v) - report.f_hat.get(k1, k2)).modulus() / scale
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Axis, ProductDomain};
    use crate::sampling::{draw_sample_set, SamplingDensity};
    use crate::space::gaussian_coefficients;

    fn setup(nodes: usize) -> (QsisSpace, AveragingKernel) {
        let a = Axis::interval(-0.5, 1.5, nodes).unwrap();
        let d = ProductDomain::new([a, a], [[0.0, 1.0]; 2], [[-0.25, 0.25]; 2]).unwrap();
        let s = QsisSpace::bspline_lattice(d, 1, 0.5, 1, [0.5, 0.5], 0.25, 3).unwrap();
        let w = AveragingKernel::boxed(s.domain().w());
        (s, w)
    }

    #[test]
    fn orthonormal_columns_give_identity_dual() {
        let q = DMatrix::from_fn(6, 3, |i, j| if i == 2 * j { 1.0 } else { 0.0 });
        let m = SampleMatrix { n: 6, m: 1, matrix: q.clone(), columns: Arc::new(vec![]) };
        let d = solve_dual(&m).unwrap();
        assert!((d.dual() - &q).amax() < 1e-14);
        assert!((d.condition() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_not_injective() {
        let a = DMatrix::from_fn(8, 3, |i, j| if j == 2 { (i as f64).sin() } else { ((i * (j + 1)) as f64).cos() });
        let mut dup = a.clone();
        dup.set_column(2, &a.column(0));
        let m = SampleMatrix { n: 8, m: 1, matrix: dup, columns: Arc::new(vec![]) };
        assert!(matches!(solve_dual(&m), Err(Error::NotInjective { .. })));
    }

    #[test]
    fn dims_and_consistent_recovery() {
        let (s, w) = setup(64);
        let rho = SamplingDensity::uniform(s.domain().k());
        let samples = draw_sample_set(&rho, 12, 12, 9).unwrap();
        let m = assemble_matrix(&s, &w, &samples).unwrap();
        assert_eq!(m.dims(), (144, s.dim()));
        let d = solve_dual(&m).unwrap();
        let id = d.dual().transpose() * m.matrix();
        assert!((id - DMatrix::<f64>::identity(s.dim(), s.dim())).amax() < 1e-8);

        let c = gaussian_coefficients(&s, 4);
        let sv = sample_values(&s, &w, &c, &samples).unwrap();
        let mc = m.apply(&c).unwrap();
        assert!(sv.iter().zip(&mc).all(|(a, b)| (a - b).abs() < 1e-12));
        let rep = reconstruct(&sv, &d, &s).unwrap().with_truth(&s, &c, MixedExponents::L2).unwrap();
        let err = rep.errors.unwrap();
        assert!(err.rel_coeff < 1e-10 && err.rel_pq < 1e-10, "{err:?}");
        assert!(spot_check_expansion(&s, &d, &sv, &rep, 100, 1) < 1e-8);

        let zero = reconstruct(&vec![0.0; 144], &d, &s).unwrap();
        assert_eq!(zero.f_hat.sup_norm(), 0.0);
        assert!(matches!(reconstruct(&vec![0.0; 3], &d, &s), Err(Error::Layout { .. })));
    }

    #[test]
    fn relative_error_conventions() {
        let (s, _) = setup(32);
        let f = s.synthesize(&gaussian_coefficients(&s, 1)).unwrap();
        let e = MixedExponents::L2;
        assert_eq!(reconstruction_error(&f, &f, e).unwrap(), RelativeErrors { rel_pq: 0.0, rel_inf: 0.0 });
        let r = reconstruction_error(&f, &f.scale(2.0), e).unwrap();
        assert!((r.rel_pq - 1.0).abs() < 1e-14 && (r.rel_inf - 1.0).abs() < 1e-14);
        let z = GridFunction::<f64>::zeros(*f.region());
        assert_eq!(reconstruction_error(&z, &z, e).unwrap(), RelativeErrors { rel_pq: 0.0, rel_inf: 0.0 });
    }

    #[test]
    fn beta_respects_young_ceiling() {
        let (s, w) = setup(64);
        let a2 = weighted_singular_values(&s)[0];
        let b = beta_estimate(&s, &w, MixedExponents::L2, 0, 0).unwrap();
        assert!(b.exact && !b.hypothesis_failed);
        assert!(b.beta > 0.0 && b.beta <= a2 * w.l1_norm() + 1e-12);
        let e = MixedExponents::new(3.0, 1.5).unwrap();
        let p = beta_estimate(&s, &w, e, 16, 1).unwrap();
        assert!(!p.exact && p.beta > 0.0);
    }
}
