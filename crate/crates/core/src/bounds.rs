//! Closed-form constants of the probabilistic sampling bounds.
//!
//! Powers such as `(4C̃/a₁)^{2d}` overflow quickly, so every product of
//! powers is assembled as a sum of logarithms and exponentiated once.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `108 √2 ln 2`, the recurring prefactor of the sample-count thresholds.
const K108: f64 = 108.0 * SQRT_2 * LN_2;

/// Everything the bounds depend on besides the experiment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub d: usize,
    pub c_phi_tilde: f64,
    pub a1: f64,
    pub omega_l1: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub c_rho_1: f64,
    pub c_rho_2: f64,
    pub p: f64,
    pub q: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Parameter("d must be a positive integer".into()));
        }
        let named = [
            ("c_phi_tilde", self.c_phi_tilde),
            ("a1", self.a1),
            ("omega_l1", self.omega_l1),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("c_rho_1", self.c_rho_1),
            ("c_rho_2", self.c_rho_2),
        ];
        for (name, x) in named {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {x}")));
            }
        }
        for x in [self.p, self.q] {
            if !(x > 1.0 && x.is_finite()) {
                return Err(Error::InvalidExponent(x));
            }
        }
        Ok(())
    }

    fn d(&self) -> f64 {
        self.d as f64
    }

    /// `ln 𝒜₁ = ln 2 + d ln(8C̃/a₁)`.
    pub fn ln_a_one(&self) -> f64 {
        LN_2 + self.d() * (8.0 * self.c_phi_tilde / self.a1).ln()
    }

    /// `ln 𝒜₂ = ln(4 / (3d ln²2)) + 2d ln(4C̃/a₁)`.
    pub fn ln_a_two(&self) -> f64 {
        (4.0 / (3.0 * self.d() * LN_2 * LN_2)).ln() + 2.0 * self.d() * (4.0 * self.c_phi_tilde / self.a1).ln()
    }

    pub fn a_one(&self) -> f64 {
        self.ln_a_one().exp()
    }

    pub fn a_two(&self) -> f64 {
        self.ln_a_two().exp()
    }

    /// `μ₁^{1−q} μ₂^{1−p}`.
    fn mu_low(&self) -> f64 {
        ((1.0 - self.q) * self.mu1.ln() + (1.0 - self.p) * self.mu2.ln()).exp()
    }

    /// `μ₁^{q−1} μ₂^{p−1}`.
    fn mu_high(&self) -> f64 {
        1.0 / self.mu_low()
    }

    /// `μ₁^{(p−1)/p} μ₂^{(q−1)/q}`.
    pub fn holder_factor(&self) -> f64 {
        ((self.p - 1.0) / self.p * self.mu1.ln() + (self.q - 1.0) / self.q * self.mu2.ln()).exp()
    }
}

/// `exp(d ln(4C̃/(η a₁)))`, clamped to 1 when the argument drops to 1 or below.
pub fn covering_bound(d: usize, c_phi_tilde: f64, a1: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    let base = 4.0 * c_phi_tilde / (eta * a1);
    if base <= 1.0 {
        return Ok(1.0);
    }
    Ok((d as f64 * base.ln()).exp())
}

/// The smallest admissible deviation level `𝔭` for `n·m` samples.
pub fn p_min(n: usize, m: usize, d: usize, omega_l1: f64) -> f64 {
    let nm = (n * m) as f64;
    let n1 = 2.0 * SQRT_2 * LN_2 * d as f64;
    K108 * d as f64 * (1.0 + (1.0 + 3.0 * nm / n1).sqrt()) * omega_l1
}

/// Tail bound on `sup_f |Σ Y_{j,k}(f)| >= 𝔭`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma31Bound {
    pub term1: f64,
    pub term2: f64,
    pub total: f64,
    /// The two exponents (positive numbers `e` with `term = 𝒜 exp(−e)`).
    pub exponent1: f64,
    pub exponent2: f64,
    pub p_min: f64,
    /// False when `𝔭 <= p_min`; the value is then not a valid bound.
    pub precondition_met: bool,
}

pub fn lemma31_bound(x: &BoundInputs, n: usize, m: usize, p_frak: f64) -> Result<Lemma31Bound> {
    x.validate()?;
    let nm = (n * m) as f64;
    let (c, a1, w) = (x.c_phi_tilde, x.a1, x.omega_l1);
    let exponent1 = 3.0 * a1 * a1 * p_frak * p_frak / (4.0 * c * w * (6.0 * nm * c * w + p_frak * a1));
    let exponent2 = p_frak * p_frak / (72.0 * SQRT_2 * w * (81.0 * nm * w + p_frak));
    let term1 = (x.ln_a_one() - exponent1).exp();
    let term2 = (x.ln_a_two() - exponent2).exp();
    let pm = p_min(n, m, x.d, w);
    Ok(Lemma31Bound {
        term1,
        term2,
        total: term1 + term2,
        exponent1,
        exponent2,
        p_min: pm,
        precondition_met: p_frak > pm,
    })
}

/// Constants of the sampling inequality on `V^{p,q}_{K,α}(Φ, θ)`, with
/// `ζ = θ/α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm32Report {
    pub zeta: f64,
    pub gamma: f64,
    pub n: usize,
    pub m: usize,
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub beta_prime: f64,
    pub beta_dprime: f64,
    pub nm_min: f64,
    pub prob_lower: f64,
    pub vacuous: bool,
    pub a_one: f64,
    pub a_two: f64,
    /// `N₂`, the per-sample deviation level; `𝔭 = nm N₂`.
    pub n2: f64,
    pub p_frak: f64,
    pub p_min: f64,
}

impl Thm32Report {
    /// Column names for CSV output, in field order.
    pub const CSV_HEADER: [&'static str; 16] = [
        "zeta", "gamma", "n", "m", "a_tilde", "b_tilde", "beta_prime", "beta_dprime", "nm_min", "prob_lower",
        "vacuous", "a_one", "a_two", "n2", "p_frak", "p_min",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            format!("{:?}", self.zeta),
            format!("{:?}", self.gamma),
            self.n.to_string(),
            self.m.to_string(),
            format!("{:?}", self.a_tilde),
            format!("{:?}", self.b_tilde),
            format!("{:?}", self.beta_prime),
            format!("{:?}", self.beta_dprime),
            format!("{:?}", self.nm_min),
            format!("{:?}", self.prob_lower),
            self.vacuous.to_string(),
            format!("{:?}", self.a_one),
            format!("{:?}", self.a_two),
            format!("{:?}", self.n2),
            format!("{:?}", self.p_frak),
            format!("{:?}", self.p_min),
        ]
    }
}

pub fn thm32_constants(x: &BoundInputs, zeta: f64, gamma: f64, n: usize, m: usize) -> Result<Thm32Report> {
    x.validate()?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Parameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::Parameter(format!("zeta must be positive, got {zeta}")));
    }
    if n == 0 || m == 0 {
        return Err(Error::Parameter("n and m must be at least 1".into()));
    }
    let (p, q, pq) = (x.p, x.q, x.p * x.q);
    let (c, a1, w) = (x.c_phi_tilde, x.a1, x.omega_l1);
    let nm = (n * m) as f64;
    // ln[C_{ρ,1} μ₁^{1−q} μ₂^{1−p} (C̃‖ω‖/a₁)^{1−pq} ζ^{pq}]
    let ln_core = x.c_rho_1.ln() + x.mu_low().ln() + (1.0 - pq) * (c * w / a1).ln() + pq * zeta.ln();
    let core = ln_core.exp();
    let n2 = gamma * core;
    let a_tilde = ((1.0 - gamma).ln() + ln_core + (n as f64).ln() / p + (m as f64).ln() / q).exp();
    let b_tilde = x.c_rho_2 * x.holder_factor() * w * nm + n2 * nm;

    let t = (gamma.ln() + x.c_rho_1.ln() + pq * (a1 * zeta / (c * w)).ln()).exp();
    let mu_low = x.mu_low();
    let mu_high = x.mu_high();
    let beta_prime = mu_low * 0.75 * t * t / (6.0 * mu_high + t);
    let tc = t * c / a1;
    let beta_dprime = mu_low * tc * tc / (72.0 * SQRT_2 * (81.0 * mu_high + tc));

    let nm_min = K108 * x.d() * w / (n2 * n2) * (162.0 * w + 2.0 * n2);
    let prob_lower = 1.0 - (x.ln_a_one() - nm * beta_prime).exp() - (x.ln_a_two() - nm * beta_dprime).exp();
    Ok(Thm32Report {
        zeta,
        gamma,
        n,
        m,
        a_tilde,
        b_tilde,
        beta_prime,
        beta_dprime,
        nm_min,
        prob_lower,
        vacuous: prob_lower <= 0.0,
        a_one: x.a_one(),
        a_two: x.a_two(),
        n2,
        p_frak: nm * n2,
        p_min: p_min(n, m, x.d, w),
    })
}

/// Constants of the `ℓ¹` sampling inequality on `V_K(Φ, ω, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm33Report {
    pub mu: f64,
    pub eta: f64,
    pub n: usize,
    pub m: usize,
    /// `μ C_{ρ,1} − η`.
    pub lower_factor: f64,
    /// `C_{ρ,2} μ₁^{(p−1)/p} μ₂^{(q−1)/q} + η`.
    pub upper_factor: f64,
    pub nm_min: f64,
    pub prob_lower: f64,
    pub vacuous: bool,
    pub exponent1: f64,
    pub exponent2: f64,
    pub a_one: f64,
    pub a_two: f64,
}

impl Thm33Report {
    /// Bounds on `Σ|(f∗ω)(u_j, v_k)|` for an element of norm `f_norm`.
    pub fn sum_bounds(&self, omega_l1: f64, f_norm: f64) -> (f64, f64) {
        let s = (self.n * self.m) as f64 * omega_l1 * f_norm;
        (s * self.lower_factor, s * self.upper_factor)
    }
}

pub fn thm33_constants(x: &BoundInputs, mu: f64, eta: f64, n: usize, m: usize) -> Result<Thm33Report> {
    x.validate()?;
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Parameter(format!("mu must lie in (0, 1], got {mu}")));
    }
    if !(eta > 0.0 && eta < mu * x.c_rho_1) {
        return Err(Error::Parameter(format!(
            "eta must lie in (0, mu*c_rho_1) = (0, {}), got {eta}",
            mu * x.c_rho_1
        )));
    }
    if n == 0 || m == 0 {
        return Err(Error::Parameter("n and m must be at least 1".into()));
    }
    let nm = (n * m) as f64;
    let (c, a1) = (x.c_phi_tilde, x.a1);
    let exponent1 = nm * 3.0 * a1 * a1 * eta * eta / (4.0 * c * (6.0 * c + eta * a1));
    let exponent2 = nm * eta * eta / (72.0 * SQRT_2 * (81.0 + eta));
    let prob_lower = 1.0 - (x.ln_a_one() - exponent1).exp() - (x.ln_a_two() - exponent2).exp();
    Ok(Thm33Report {
        mu,
        eta,
        n,
        m,
        lower_factor: mu * x.c_rho_1 - eta,
        upper_factor: x.c_rho_2 * x.holder_factor() + eta,
        nm_min: K108 * x.d() / eta * (2.0 + 162.0 / eta),
        prob_lower,
        vacuous: prob_lower <= 0.0,
        exponent1,
        exponent2,
        a_one: x.a_one(),
        a_two: x.a_two(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> BoundInputs {
        BoundInputs {
            d,
            c_phi_tilde: 1.0,
            a1: 1.0,
            omega_l1: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            c_rho_1: 1.0,
            c_rho_2: 1.0,
            p: 2.0,
            q: 2.0,
        }
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_bound(5, 0.25, 1.0, 1.0).unwrap(), 1.0);
        assert!((covering_bound(2, 2.0, 1.0, 1.0).unwrap() - 64.0).abs() < 1e-12);
        assert_eq!(covering_bound(3, 0.1, 1.0, 1.0).unwrap(), 1.0);
        let mut last = f64::INFINITY;
        for k in 1..50 {
            let v = covering_bound(3, 2.0, 1.0, 0.05 * k as f64).unwrap();
            assert!(v < last || v == 1.0);
            last = v;
        }
        assert!(covering_bound(1, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn p_min_examples() {
        let v = p_min(1, 1, 1, 1.0);
        assert!((v - 274.27).abs() < 0.005, "{v}");
        assert!((p_min(1, 1, 1, 2.0) - 2.0 * v).abs() < 1e-12);
        assert!(p_min(2, 1, 1, 1.0) > v && p_min(1, 2, 3, 1.0) > p_min(1, 2, 2, 1.0));
    }

    #[test]
    fn deviation_bound_is_decreasing_in_p() {
        let x = unit(2);
        let mut last = lemma31_bound(&x, 3, 4, 100.0).unwrap();
        for k in 1..40 {
            let b = lemma31_bound(&x, 3, 4, 100.0 + 50.0 * k as f64).unwrap();
            assert!(b.exponent1 > last.exponent1 && b.exponent2 > last.exponent2);
            assert!(b.term1 <= last.term1 && b.term2 <= last.term2);
            last = b;
        }
        assert!(!lemma31_bound(&x, 1, 1, 274.0).unwrap().precondition_met);
        assert!(lemma31_bound(&x, 1, 1, 600.0).unwrap().precondition_met);
    }

    #[test]
    fn fixed_gamma_constants_hand_example() {
        let r = thm32_constants(&unit(1), 1.0, 0.5, 2, 2).unwrap();
        assert!((r.a_tilde - 1.0).abs() < 1e-14);
        assert!(r.beta_prime > 0.0 && r.beta_dprime > 0.0 && r.nm_min > 0.0);
        assert!(r.prob_lower <= 1.0);
        assert!(r.vacuous);
        assert!(thm32_constants(&unit(1), 1.0, 1.0, 2, 2).is_err());
        assert!(thm32_constants(&unit(1), 1.0, 0.0, 2, 2).is_err());
    }

    #[test]
    fn sample_size_constants_examples() {
        let r = thm33_constants(&unit(1), 1.0, 0.999, 1, 1).unwrap();
        assert!(r.lower_factor > 0.0);
        let x = BoundInputs { c_rho_1: 2.0, ..unit(1) };
        let r = thm33_constants(&x, 1.0, 1.0, 1, 1).unwrap();
        // 108√2 ln2 · 164 = 17362.33; agrees with the rounded 17362.4 to 4 digits
        assert!((r.nm_min - 17362.33).abs() < 0.01, "{}", r.nm_min);
        assert_eq!(format!("{:.3e}", r.nm_min), format!("{:.3e}", 17362.4));
        assert!(matches!(thm33_constants(&unit(1), 0.5, 0.5, 1, 1), Err(Error::Parameter(_))));
        let mut last = f64::NEG_INFINITY;
        for nm in [1, 10, 100, 1000, 10_000, 100_000] {
            let r = thm33_constants(&x, 1.0, 0.5, nm, 1).unwrap();
            assert!(r.prob_lower > last);
            last = r.prob_lower;
        }
    }

    #[test]
    fn no_overflow_for_large_d() {
        let x = BoundInputs { c_phi_tilde: 50.0, a1: 0.01, ..unit(400) };
        let r = thm32_constants(&x, 0.5, 0.5, 10, 10).unwrap();
        assert!(r.a_one.is_infinite() || r.a_one > 1e300);
        assert!(r.prob_lower.is_infinite() && r.prob_lower < 0.0 || r.prob_lower < -1e300);
        assert!(r.vacuous);
        // huge nm drives both tails to zero in log space without inf * 0
        let big = thm33_constants(&x, 1.0, 0.5, 1 << 30, 1 << 20).unwrap();
        assert_eq!(big.prob_lower, 1.0);
    }
}
