use qsis_core::sampling::{draw_sample_set, empirical_y_moments, DensityKind, MomentSettings, Quadrature};
use qsis_core::space::{analyze_space, gaussian_coefficients};
use qsis_core::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn unit_square(nodes: usize) -> ProductDomain {
    let a = Axis::interval(-0.5, 1.5, nodes).unwrap();
    ProductDomain::new([a, a], [[0.0, 1.0]; 2], [[-0.25, 0.25]; 2]).unwrap()
}

/// Pearson test of the sampler on an 8×8 binning of `K`; expected counts come
/// from a fine midpoint integral of the continuous density.
fn chi_square_p_value(rho: &SamplingDensity, draws: usize, seed: u64) -> f64 {
    const BINS: usize = 8;
    let s = draw_sample_set(rho, draws, 1, seed).unwrap();
    let mut counts = [[0usize; BINS]; BINS];
    for &(u, v) in s.points() {
        let i = ((u * BINS as f64) as usize).min(BINS - 1);
        let j = ((v * BINS as f64) as usize).min(BINS - 1);
        counts[i][j] += 1;
    }
    let sub = 32;
    let h = 1.0 / (BINS * sub) as f64;
    let mut mass = [[0.0; BINS]; BINS];
    for a in 0..BINS * sub {
        for b in 0..BINS * sub {
            let (u, v) = ((a as f64 + 0.5) * h, (b as f64 + 0.5) * h);
            mass[a / sub][b / sub] += rho.eval(u, v) * h * h;
        }
    }
    let total: f64 = mass.iter().flatten().sum();
    let mut stat = 0.0;
    for i in 0..BINS {
        for j in 0..BINS {
            let expected = draws as f64 * mass[i][j] / total;
            stat += (counts[i][j] as f64 - expected).powi(2) / expected;
        }
    }
    let dist = ChiSquared::new((BINS * BINS - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn sampler_matches_density() {
    let d = unit_square(64);
    let kinds = [
        DensityKind::Uniform,
        DensityKind::Tilted { tilt: 0.7 },
        DensityKind::TruncatedGaussian { center: [0.3, 0.7], sigma: [0.4, 0.6] },
    ];
    for (i, kind) in kinds.into_iter().enumerate() {
        let rho = SamplingDensity::new(kind, d.k(), SamplingMode::Joint).unwrap();
        let p = chi_square_p_value(&rho, 100_000, 40 + i as u64);
        assert!(p > 1e-4, "{kind:?}: p = {p}");
    }
}

#[test]
fn chi_square_detects_a_wrong_density() {
    // sanity check on the test itself: tilted draws against a uniform model
    let d = unit_square(64);
    let tilted = SamplingDensity::new(DensityKind::Tilted { tilt: 0.7 }, d.k(), SamplingMode::Joint).unwrap();
    let s = draw_sample_set(&tilted, 100_000, 1, 1).unwrap();
    let uniform = SamplingDensity::uniform(d.k());
    let mut counts = [0usize; 4];
    for &(u, v) in s.points() {
        counts[(u >= 0.5) as usize * 2 + (v >= 0.5) as usize] += 1;
    }
    let expected = 100_000.0 * 0.25;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(1.0 - ChiSquared::new(3.0).unwrap().cdf(stat) < 1e-4);
    assert!(uniform.c_rho_1() == uniform.c_rho_2());
}

#[test]
fn product_mode_draws_a_tensor_grid() {
    let d = unit_square(64);
    let rho = SamplingDensity::new(
        DensityKind::TruncatedGaussian { center: [0.5, 0.5], sigma: [0.3, 0.3] },
        d.k(),
        SamplingMode::Product,
    )
    .unwrap();
    let s = draw_sample_set(&rho, 5, 7, 3).unwrap();
    for j in 0..5 {
        for k in 0..7 {
            assert_eq!(s.point(j, k).0, s.point(j, 0).0);
            assert_eq!(s.point(j, k).1, s.point(0, k).1);
        }
    }
    assert!(SamplingDensity::new(DensityKind::Tilted { tilt: 0.4 }, d.k(), SamplingMode::Product).is_err());
}

#[test]
fn y_moments_respect_the_bounds() {
    let d = unit_square(64);
    let space = QsisSpace::bspline_lattice(d, 1, 0.5, 1, [0.5, 0.5], 0.25, 3).unwrap();
    let w = AveragingKernel::boxed(d.w());
    let a = analyze_space(&space, MixedExponents::L2, 4, 0).unwrap();
    for (kind, seed) in [(DensityKind::Uniform, 1), (DensityKind::Tilted { tilt: -0.5 }, 2)] {
        let rho = SamplingDensity::new(kind, d.k(), SamplingMode::Joint).unwrap();
        let f = gaussian_coefficients(&space, seed);
        let g = gaussian_coefficients(&space, seed + 100);
        let settings = MomentSettings {
            e: MixedExponents::L2,
            a1: a.a1,
            c_phi_tilde: a.c_phi_tilde,
            trials: 4000,
            seed,
            quadrature: Quadrature::Midpoint(4),
        };
        let r = empirical_y_moments(&space, &w, &rho, &f, &g, settings).unwrap();
        assert!(r.all_bounds_pass(), "{r:?}");
        assert!(r.mean.abs() <= 4.0 * r.std_error, "{r:?}");
    }
}

#[test]
fn too_few_trials_are_rejected() {
    let d = unit_square(64);
    let space = QsisSpace::bspline_lattice(d, 1, 0.5, 1, [0.5, 0.5], 0.25, 3).unwrap();
    let w = AveragingKernel::boxed(d.w());
    let f = gaussian_coefficients(&space, 1);
    let settings = MomentSettings {
        e: MixedExponents::L2,
        a1: 1.0,
        c_phi_tilde: 1.0,
        trials: 10,
        seed: 0,
        quadrature: Quadrature::Grid,
    };
    assert!(empirical_y_moments(&space, &w, &SamplingDensity::uniform(d.k()), &f, &f, settings).is_err());
}
