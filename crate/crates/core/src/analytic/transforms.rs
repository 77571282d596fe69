//! Shared numerical building blocks for the closed forms: the excess
//! transform `E(s) = (1 - beta(s)) / s`, divided differences that stay exact
//! across removable singularities, and the per-model scalar constants.

use num_complex::Complex64 as C;

use crate::dists::DistributionSpec;

use super::{ArrivalClass, ModelSpec};

/// Below this scaled distance a divided difference switches to its Taylor series.
const DD_SERIES_THRESHOLD: f64 = 1e-4;
const DD_SERIES_TERMS: u32 = 5;
/// `|z - 1|` below which ratios with a common zero at 1 use their series limit.
pub(crate) const NEAR_ONE: f64 = 1e-6;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Characteristic time scale, used to decide when two arguments are "close".
pub(crate) fn time_scale(d: &DistributionSpec) -> f64 {
    d.mean().max(d.second_moment().sqrt())
}

/// k-th derivative of `E(s) = integral_0^inf exp(-s t) P(T > t) dt`.
///
/// Every kind has a form without the `1 - beta(s)` cancellation except the
/// point mass, which switches to its power series for small `|s| v`.
pub(crate) fn excess(d: &DistributionSpec, s: C, k: u32) -> C {
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    match d {
        DistributionSpec::Exponential { rate } => sign * factorial(k) / (*rate + s).powu(k + 1),
        DistributionSpec::Erlang { phases, rate } => {
            let base = *rate + s;
            let mut acc = C::new(0.0, 0.0);
            for j in 0..*phases {
                let rising: f64 = (0..k).map(|i| f64::from(j + 1 + i)).product();
                acc += rate.powi(j as i32) * rising / base.powu(j + 1 + k);
            }
            sign * acc
        }
        DistributionSpec::HyperExponential { weights, rates } => weights
            .iter()
            .zip(rates)
            .map(|(w, r)| sign * factorial(k) * *w / (*r + s).powu(k + 1))
            .sum(),
        DistributionSpec::Deterministic { value } => {
            let v = *value;
            if v == 0.0 {
                return C::new(0.0, 0.0);
            }
            if s.norm() * v <= 2.0 {
                // integral_0^v (-t)^k e^{-st} dt, expanded in s
                let mut acc = C::new(0.0, 0.0);
                let mut pw = C::new(1.0, 0.0); // (-s)^n v^n / n!
                for n in 0..200u32 {
                    let term = pw * (sign * v.powi(k as i32 + 1) / f64::from(n + k + 1));
                    acc += term;
                    if term.norm() < 1e-18 * acc.norm() && n > 4 {
                        break;
                    }
                    pw *= -s * v / f64::from(n + 1);
                }
                acc
            } else {
                // s E^(j) + j E^(j-1) = -beta^(j)
                let mut e = (C::new(1.0, 0.0) - d.lst_c(s)) / s;
                for j in 1..=k {
                    e = (-d.lst_deriv_c(s, j) - f64::from(j) * e) / s;
                }
                e
            }
        }
    }
}

/// `(f(b) - f(a)) / (b - a)` where `df(x, k)` is the k-th derivative of `f`.
pub(crate) fn divided_difference<F>(df: F, a: C, b: C, scale: f64) -> C
where
    F: Fn(C, u32) -> C,
{
    let h = b - a;
    if h.norm() * scale >= DD_SERIES_THRESHOLD {
        return (df(b, 0) - df(a, 0)) / h;
    }
    let mut acc = C::new(0.0, 0.0);
    let mut hp = C::new(1.0, 0.0);
    for k in 1..=DD_SERIES_TERMS {
        acc += df(a, k) * hp / factorial(k);
        hp *= h;
    }
    acc
}

pub(crate) fn dd_lst(d: &DistributionSpec, a: C, b: C) -> C {
    divided_difference(|x, k| d.lst_deriv_c(x, k), a, b, time_scale(d))
}

pub(crate) fn dd_excess(d: &DistributionSpec, a: C, b: C) -> C {
    divided_difference(|x, k| excess(d, x, k), a, b, time_scale(d))
}

/// `(n1 + n2 h / 2) / (d1 + d2 h / 2)` with `h = z - 1` when `z` is within
/// `NEAR_ONE` of 1; `direct` otherwise. `(n1, n2)` and `(d1, d2)` are the first
/// two derivatives at 1 of a numerator and denominator vanishing at 1.
pub(crate) fn ratio_at_one<F>(z: C, n: (f64, f64), d: (f64, f64), direct: F) -> C
where
    F: FnOnce() -> C,
{
    let h = z - 1.0;
    if h.norm() < NEAR_ONE {
        (n.0 + n.1 * h / 2.0) / (d.0 + d.1 * h / 2.0)
    } else {
        direct()
    }
}

/// `A_k(z) = beta(lambda) - lambda z (beta(c) - beta(lambda)) / (c - lambda)`, `c = lambda_plus (1 - z)`.
pub(crate) fn a_k_c(model: &ModelSpec, k: ArrivalClass, z: C) -> C {
    let (lambda, lambda_plus) = model.rates.for_class(k);
    let b = &model.service;
    if lambda == 0.0 {
        return C::new(1.0, 0.0);
    }
    if lambda_plus == lambda {
        return b.lst_c(lambda * (1.0 - z));
    }
    let l = C::new(lambda, 0.0);
    let c = lambda_plus * (1.0 - z);
    b.lst_c(l) - lambda * z * dd_lst(b, l, c)
}

/// Generating function of arrivals strictly after the first, accumulated
/// over the residual service: `lambda z (E(c) - E(lambda)) / (lambda - c)`.
pub(crate) fn after_first_c(model: &ModelSpec, k: ArrivalClass, z: C) -> C {
    let (lambda, lambda_plus) = model.rates.for_class(k);
    if lambda == 0.0 {
        return C::new(0.0, 0.0);
    }
    let l = C::new(lambda, 0.0);
    let c = lambda_plus * (1.0 - z);
    -lambda * z * dd_excess(&model.service, l, c)
}

/// Scalars of one service class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassConstants {
    pub lambda: f64,
    pub lambda_plus: f64,
    /// `E(lambda)`: expected service time before the first arrival.
    pub excess: f64,
    /// `(b - E(lambda)) / lambda`.
    pub excess_slope: f64,
    /// `A_k'(1)`.
    pub a1: f64,
    /// `A_k''(1)`.
    pub a2: f64,
    /// Expected area under the arrival count over one service.
    pub s: f64,
}

impl ClassConstants {
    fn new(model: &ModelSpec, k: ArrivalClass) -> Self {
        let (lambda, lambda_plus) = model.rates.for_class(k);
        let b = &model.service;
        let b1 = b.mean();
        let b2 = b.second_moment();
        let l = C::new(lambda, 0.0);
        let excess_l = excess(b, l, 0).re;
        let excess_slope = -dd_excess(b, C::new(0.0, 0.0), l).re;
        let (a1, a2, s) = if lambda == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            let a1 = (lambda - lambda_plus) * excess_l + lambda_plus * b1;
            let a2 = lambda_plus * (2.0 * b1 + lambda_plus * b2)
                - 2.0 * lambda_plus * (excess_l + lambda_plus * excess_slope);
            let s = (lambda - lambda_plus) * excess_slope + lambda_plus * b2 / 2.0;
            (a1, a2, s)
        };
        ClassConstants {
            lambda,
            lambda_plus,
            excess: excess_l,
            excess_slope,
            a1,
            a2,
            s,
        }
    }
}

/// Every real scalar the closed forms are built from. Computed for any valid
/// model; the stationary quantities only mean something when `margin > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub lambda_minus: f64,
    /// `alpha*(lambda_minus)`.
    pub alpha: f64,
    pub b1: f64,
    pub b2: f64,
    pub e: ClassConstants,
    pub r: ClassConstants,
    /// Drift margin `alpha (1 - a_r) - (1 - alpha) a_e`.
    pub margin: f64,
    /// `1 + a_e - a_r`.
    pub s1: f64,
    pub pi0: f64,
    /// Normalizer shared by the arbitrary-epoch probabilities.
    pub den: f64,
    pub p00: f64,
    pub p_idle: f64,
    pub throughput: f64,
    /// Derivative at 1 of `P0*(0, z)`, divided by `p00 (1 - alpha)`.
    pub g: f64,
    /// Second derivatives at 1 of the embedded-chain numerator and denominator.
    pub num2: f64,
    pub den2: f64,
}

impl Constants {
    pub fn new(model: &ModelSpec) -> Self {
        let alpha = model.alpha_star();
        let b1 = model.service.mean();
        let b2 = model.service.second_moment();
        let lm = model.rates.lambda_minus;
        let e = ClassConstants::new(model, ArrivalClass::Primary);
        let r = ClassConstants::new(model, ArrivalClass::Retrial);
        let margin = alpha * (1.0 - r.a1) - (1.0 - alpha) * e.a1;
        let s1 = 1.0 + e.a1 - r.a1;
        let den = lm * b1 * s1 + 1.0 - r.a1;
        let num2 = 2.0 * e.a1 + e.a2 - r.a2;
        let den2 = alpha * num2 - 2.0 * e.a1 - e.a2;
        let g = alpha * ((2.0 * e.a1 + e.a2) * (1.0 - r.a1) + e.a1 * r.a2) / (2.0 * margin * margin);
        Constants {
            lambda_minus: lm,
            alpha,
            b1,
            b2,
            e,
            r,
            margin,
            s1,
            pi0: margin / (alpha * s1),
            den,
            p00: margin / (alpha * den),
            p_idle: (1.0 - r.a1) / den,
            throughput: lm * s1 / den,
            g,
            num2,
            den2,
        }
    }

    pub fn class(&self, k: ArrivalClass) -> &ClassConstants {
        match k {
            ArrivalClass::Primary => &self.e,
            ArrivalClass::Retrial => &self.r,
        }
    }

    pub fn stable(&self) -> bool {
        self.margin > 0.0 && self.margin.is_finite()
    }

    /// `D(z) = alpha (z A_e - A_r) + z (1 - A_e)`, shared denominator.
    pub(crate) fn denominator(&self, z: C, ae: C, ar: C) -> C {
        self.alpha * (z * ae - ar) + z * (1.0 - ae)
    }

    /// `(D'(1), D''(1))`.
    pub(crate) fn den_series(&self) -> (f64, f64) {
        (self.margin, self.den2)
    }

    /// Boundary mass `K(1)`: rate of seek wins, per unit time.
    pub fn k1(&self) -> f64 {
        self.lambda_minus * self.e.a1 / self.den
    }
}
