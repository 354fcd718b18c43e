mod oracle;

use qsis_core::bounds::{covering_bound, lemma31_bound, p_min, thm32_constants, thm33_constants, BoundInputs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn draw(rng: &mut ChaCha8Rng) -> (BoundInputs, oracle::Inputs) {
    let c = rng.random_range(0.5..5.0);
    let x = BoundInputs {
        d: rng.random_range(1..40),
        c_phi_tilde: c,
        a1: c * rng.random_range(0.02..1.0),
        omega_l1: rng.random_range(0.2..3.0),
        mu1: rng.random_range(0.2..3.0),
        mu2: rng.random_range(0.2..3.0),
        c_rho_1: rng.random_range(0.2..1.0),
        c_rho_2: rng.random_range(1.0..3.0),
        p: rng.random_range(1.05..4.0),
        q: rng.random_range(1.05..4.0),
    };
    let o = oracle::Inputs {
        d: x.d as f64,
        c: x.c_phi_tilde,
        a1: x.a1,
        w1: x.omega_l1,
        mu1: x.mu1,
        mu2: x.mu2,
        cr1: x.c_rho_1,
        cr2: x.c_rho_2,
        p: x.p,
        q: x.q,
    };
    (x, o)
}

/// `1 − t₁ − t₂` is compared against the size of its terms, since the
/// difference cancels when it is close to zero.
fn prob_close(lib: f64, orc: f64, t1: f64, t2: f64) -> bool {
    (lib - orc).abs() <= 1e-12 * (1.0 + t1 + t2)
}

/// `𝒜 exp(−e)` against the library term. Past `e ≈ 700` the oracle's
/// `exp(−e)` goes subnormal, so the comparison moves to log space.
fn term_close(lib: f64, a: f64, e: f64) -> bool {
    if e < 700.0 {
        return oracle::rel_close(lib, a * (-e).exp(), 1e-12);
    }
    let ln = a.ln() - e;
    if lib < f64::MIN_POSITIVE {
        // subnormal or zero: only the magnitude is meaningful
        return ln < f64::MIN_POSITIVE.ln() + 1e-9;
    }
    oracle::rel_close(lib.ln(), ln, 1e-12)
}

#[test]
fn covering_and_p_min_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let (x, o) = draw(&mut rng);
        let eta = rng.random_range(0.01..5.0);
        let lib = covering_bound(x.d, x.c_phi_tilde, x.a1, eta).unwrap();
        assert!(oracle::rel_close(lib, oracle::covering(o.d, o.c, o.a1, eta), 1e-12));
        let (n, m) = (rng.random_range(1..300), rng.random_range(1..300));
        assert!(oracle::rel_close(p_min(n, m, x.d, x.omega_l1), oracle::p_min(n as f64, m as f64, o.d, o.w1), 1e-12));
    }
}

#[test]
fn deviation_bound_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let (x, o) = draw(&mut rng);
        let (n, m) = (rng.random_range(1..100), rng.random_range(1..100));
        let pf = p_min(n, m, x.d, x.omega_l1) * rng.random_range(0.5..20.0);
        let lib = lemma31_bound(&x, n, m, pf).unwrap();
        let (t1, t2, tot) = oracle::lemma31(o.d, o.c, o.a1, o.w1, n as f64, m as f64, pf);
        let a1 = oracle::a_one(o.d, o.c, o.a1);
        let a2 = oracle::a_two(o.d, o.c, o.a1);
        assert!(oracle::rel_close(a1 * (-lib.exponent1).exp(), t1, 1e-15) || lib.exponent1 >= 700.0);
        assert!(term_close(lib.term1, a1, lib.exponent1), "{} vs {t1}", lib.term1);
        assert!(term_close(lib.term2, a2, lib.exponent2), "{} vs {t2}", lib.term2);
        assert!(oracle::rel_close(lib.total, lib.term1 + lib.term2, 1e-15));
        if lib.exponent1 < 700.0 && lib.exponent2 < 700.0 {
            assert!(oracle::rel_close(lib.total, tot, 1e-12));
        }
        let nm = (n * m) as f64;
        let e1 = 3.0 * o.a1 * o.a1 * pf * pf / (4.0 * o.c * o.w1 * (6.0 * nm * o.c * o.w1 + pf * o.a1));
        let e2 = pf * pf / (72.0 * std::f64::consts::SQRT_2 * o.w1 * (81.0 * nm * o.w1 + pf));
        assert!(oracle::rel_close(lib.exponent1, e1, 1e-12) && oracle::rel_close(lib.exponent2, e2, 1e-12));
    }
}

#[test]
fn fixed_gamma_constants_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..500 {
        let (x, o) = draw(&mut rng);
        let zeta = rng.random_range(0.05..2.0);
        let gamma = rng.random_range(0.01..0.99);
        let (n, m) = (rng.random_range(1..2000), rng.random_range(1..2000));
        let lib = thm32_constants(&x, zeta, gamma, n, m).unwrap();
        let orc = oracle::thm32(&o, zeta, gamma, n as f64, m as f64);
        for (a, b) in [
            (lib.a_tilde, orc.a_tilde),
            (lib.b_tilde, orc.b_tilde),
            (lib.beta_prime, orc.beta1),
            (lib.beta_dprime, orc.beta2),
            (lib.nm_min, orc.nm_min),
            (lib.p_frak, orc.p_frak),
        ] {
            assert!(oracle::rel_close(a, b, 1e-12), "{a} vs {b}");
        }
        let nm = (n * m) as f64;
        let t1 = oracle::a_one(o.d, o.c, o.a1) * (-nm * orc.beta1).exp();
        let t2 = oracle::a_two(o.d, o.c, o.a1) * (-nm * orc.beta2).exp();
        assert!(prob_close(lib.prob_lower, orc.prob, t1, t2), "{} vs {}", lib.prob_lower, orc.prob);
        assert_eq!(lib.vacuous, lib.prob_lower <= 0.0);
    }
}

#[test]
fn sample_size_constants_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..500 {
        let (x, o) = draw(&mut rng);
        let mu = rng.random_range(0.05..=1.0);
        let eta = mu * x.c_rho_1 * rng.random_range(0.01..0.99);
        let (n, m) = (rng.random_range(1..3000), rng.random_range(1..3000));
        let lib = thm33_constants(&x, mu, eta, n, m).unwrap();
        let orc = oracle::thm33(&o, mu, eta, n as f64, m as f64);
        for (a, b) in [
            (lib.lower_factor, orc.lower),
            (lib.upper_factor, orc.upper),
            (lib.nm_min, orc.nm_min),
            (lib.exponent1, orc.exp1),
            (lib.exponent2, orc.exp2),
        ] {
            assert!(oracle::rel_close(a, b, 1e-12), "{a} vs {b}");
        }
        let t1 = oracle::a_one(o.d, o.c, o.a1) * (-orc.exp1).exp();
        let t2 = oracle::a_two(o.d, o.c, o.a1) * (-orc.exp2).exp();
        assert!(prob_close(lib.prob_lower, orc.prob, t1, t2));
    }
}

#[test]
fn golden_values() {
    let v = p_min(1, 1, 1, 1.0);
    assert_eq!(format!("{v:.2}"), "274.27");
    let x = BoundInputs {
        d: 1,
        c_phi_tilde: 1.0,
        a1: 1.0,
        omega_l1: 1.0,
        mu1: 1.0,
        mu2: 1.0,
        c_rho_1: 2.0,
        c_rho_2: 2.0,
        p: 2.0,
        q: 2.0,
    };
    let r = thm33_constants(&x, 1.0, 1.0, 1, 1).unwrap();
    assert_eq!(format!("{:.4e}", r.nm_min), format!("{:.4e}", 17362.4));
}

/// `nm > nm_min` and `𝔭 = nm N₂ > p_min` are the same condition; probe both
/// sides of the threshold.
#[test]
fn threshold_equivalence_at_the_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut checked = 0;
    while checked < 200 {
        let (x, _) = draw(&mut rng);
        let zeta = rng.random_range(0.5..3.0);
        let base = thm32_constants(&x, zeta, 0.5, 1, 1).unwrap();
        if !(base.nm_min < 1e9) {
            continue;
        }
        let edge = base.nm_min.floor() as usize;
        for nm in [edge.max(1), edge + 1, edge + 2] {
            let r = thm32_constants(&x, zeta, 0.5, nm, 1).unwrap();
            assert_eq!(nm as f64 > r.nm_min, r.p_frak > r.p_min, "nm={nm} nm_min={}", r.nm_min);
        }
        checked += 1;
    }
}

#[test]
fn exponents_agree_with_deviation_bound_at_matching_deviation() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..200 {
        let (x, _) = draw(&mut rng);
        let (n, m) = (rng.random_range(1..200), rng.random_range(1..200));
        let nm = (n * m) as f64;
        let t = thm32_constants(&x, rng.random_range(0.05..2.0), rng.random_range(0.05..0.95), n, m).unwrap();
        let l = lemma31_bound(&x, n, m, t.p_frak).unwrap();
        assert!(oracle::rel_close(l.exponent1, nm * t.beta_prime, 1e-12));
        assert!(oracle::rel_close(l.exponent2, nm * t.beta_dprime, 1e-12));

        let eta = x.c_rho_1 * rng.random_range(0.01..0.99);
        let s = thm33_constants(&x, 1.0, eta, n, m).unwrap();
        let l = lemma31_bound(&x, n, m, nm * eta * x.omega_l1).unwrap();
        assert!(oracle::rel_close(l.exponent1, s.exponent1, 1e-12));
        assert!(oracle::rel_close(l.exponent2, s.exponent2, 1e-12));
    }
}

#[test]
fn probability_bounds_grow_with_sample_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let (x, _) = draw(&mut rng);
        let mut last = f64::NEG_INFINITY;
        for k in 0..12 {
            let r = thm32_constants(&x, 1.0, 0.5, 1 << k, 7).unwrap();
            assert!(r.prob_lower >= last);
            last = r.prob_lower;
        }
    }
}

#[test]
fn parameter_errors() {
    let (x, _) = draw(&mut ChaCha8Rng::seed_from_u64(1));
    assert!(thm32_constants(&x, 1.0, 0.5, 0, 3).is_err());
    assert!(thm32_constants(&BoundInputs { p: 1.0, ..x }, 1.0, 0.5, 2, 3).is_err());
    assert!(thm33_constants(&x, 1.5, 0.1, 2, 3).is_err());
    assert!(lemma31_bound(&BoundInputs { d: 0, ..x }, 2, 3, 10.0).is_err());
}
