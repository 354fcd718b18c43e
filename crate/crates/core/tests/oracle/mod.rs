//! Test-only oracles.
//!
//! Everything here is a second, deliberately naive implementation of a
//! quantity the library also computes. Closed forms are transcribed term by
//! term with `powf` and no log-space rewriting; grid quantities are computed
//! by brute-force loops over nodes. Nothing in this module calls into the
//! library's numerical routines.

#![allow(dead_code)]

use std::f64::consts::{LN_2, SQRT_2};

pub fn covering(d: f64, c_tilde: f64, a1: f64, eta: f64) -> f64 {
    let base = 4.0 * c_tilde / (eta * a1);
    if base <= 1.0 {
        1.0
    } else {
        base.powf(d)
    }
}

pub fn p_min(n: f64, m: f64, d: f64, w1: f64) -> f64 {
    let nm = n * m;
    108.0 * SQRT_2 * LN_2 * d * (1.0 + (1.0 + 3.0 * nm / (2.0 * SQRT_2 * LN_2 * d)).sqrt()) * w1
}

pub fn a_one(d: f64, c: f64, a1: f64) -> f64 {
    2.0 * (8.0 * c / a1).powf(d)
}

pub fn a_two(d: f64, c: f64, a1: f64) -> f64 {
    4.0 / (3.0 * d * LN_2 * LN_2) * (4.0 * c / a1).powf(2.0 * d)
}

/// (term1, term2, total) of the supremum tail bound.
pub fn lemma31(d: f64, c: f64, a1: f64, w1: f64, n: f64, m: f64, pf: f64) -> (f64, f64, f64) {
    let nm = n * m;
    let t1 = a_one(d, c, a1)
        * (-3.0 * a1 * a1 * pf * pf / (4.0 * c * w1 * (6.0 * nm * c * w1 + pf * a1))).exp();
    let t2 = a_two(d, c, a1) * (-pf * pf / (72.0 * SQRT_2 * w1 * (81.0 * nm * w1 + pf))).exp();
    (t1, t2, t1 + t2)
}

#[derive(Debug, Clone, Copy)]
pub struct Inputs {
    pub d: f64,
    pub c: f64,
    pub a1: f64,
    pub w1: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub cr1: f64,
    pub cr2: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Thm32 {
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub nm_min: f64,
    pub prob: f64,
    pub p_frak: f64,
}

/// Sampling-inequality constants, written exactly as displayed (theta/alpha
/// collapsed into zeta).
pub fn thm32(x: &Inputs, zeta: f64, gamma: f64, n: f64, m: f64) -> Thm32 {
    let Inputs { d, c, a1, w1, mu1, mu2, cr1, cr2, p, q } = *x;
    let pq = p * q;
    let nm = n * m;
    let mu_low = mu1.powf(1.0 - q) * mu2.powf(1.0 - p);
    let scale = (c * w1 / a1).powf(1.0 - pq) * zeta.powf(pq);
    let a_tilde = (1.0 - gamma) * cr1 * mu_low * scale * n.powf(1.0 / p) * m.powf(1.0 / q);
    let b_tilde = cr2 * mu1.powf((p - 1.0) / p) * mu2.powf((q - 1.0) / q) * w1 * nm
        + gamma * cr1 * mu_low * scale * nm;
    let t = gamma * cr1 * (a1 * zeta / (c * w1)).powf(pq);
    let beta1 = mu_low * ((3.0f64).sqrt() / 2.0 * t).powi(2)
        / (6.0 * mu1.powf(q - 1.0) * mu2.powf(p - 1.0) + t);
    let beta2 = mu_low * (t * c / a1).powi(2)
        / (72.0 * SQRT_2 * (81.0 * mu1.powf(q - 1.0) * mu2.powf(p - 1.0) + t * c / a1));
    let n2 = gamma * cr1 * mu_low * scale;
    let nm_min = 108.0 * SQRT_2 * LN_2 * d * w1 / (n2 * n2) * (162.0 * w1 + 2.0 * n2);
    let prob = 1.0 - a_one(d, c, a1) * (-nm * beta1).exp() - a_two(d, c, a1) * (-nm * beta2).exp();
    Thm32 { a_tilde, b_tilde, beta1, beta2, nm_min, prob, p_frak: nm * n2 }
}

#[derive(Debug, Clone, Copy)]
pub struct Thm33 {
    pub lower: f64,
    pub upper: f64,
    pub nm_min: f64,
    pub prob: f64,
    pub exp1: f64,
    pub exp2: f64,
}

pub fn thm33(x: &Inputs, mu: f64, eta: f64, n: f64, m: f64) -> Thm33 {
    let Inputs { d, c, a1, mu1, mu2, cr1, cr2, p, q, .. } = *x;
    let nm = n * m;
    let exp1 = nm * 3.0 * a1 * a1 * eta * eta / (4.0 * c * (6.0 * c + eta * a1));
    let exp2 = nm * eta * eta / (72.0 * SQRT_2 * (81.0 + eta));
    Thm33 {
        lower: mu * cr1 - eta,
        upper: cr2 * mu1.powf((p - 1.0) / p) * mu2.powf((q - 1.0) / q) + eta,
        nm_min: 108.0 * SQRT_2 * LN_2 * d / eta * (2.0 + 162.0 / eta),
        prob: 1.0 - a_one(d, c, a1) * (-exp1).exp() - a_two(d, c, a1) * (-exp2).exp(),
        exp1,
        exp2,
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    if scale < 1e-300 {
        return true;
    }
    (a - b).abs() <= tol * scale
}
