//! Orbit size at departure epochs: arrivals-per-service transforms, the drift
//! condition, the stationary generating function and the transition kernel.

use num_complex::Complex64 as C;
use serde::Serialize;

use crate::error::{Error, Result};

use super::counts::arrivals_during_service_vec;
use super::transforms::{a_k_c, ratio_at_one, Constants};
use super::{ArrivalClass, ModelSpec};

pub(crate) fn check_disk(z: C) -> Result<()> {
    if !(z.norm() <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("|z| must be <= 1, got |z| = {}", z.norm())));
    }
    Ok(())
}

pub(crate) fn require_stable(c: &Constants) -> Result<()> {
    if c.stable() {
        Ok(())
    } else {
        Err(Error::Unstable { margin: c.margin })
    }
}

/// Generating function of the number of arrivals during a class-`k` service.
pub fn a_k(k: ArrivalClass, model: &ModelSpec, z: C) -> Result<C> {
    check_disk(z)?;
    Ok(a_k_c(model, k, z))
}

/// The arrivals-per-service transform with the sign of the `(z - 1)` term
/// exactly as it is usually printed. Kept only as a tripwire fixture: its
/// value at 0 is `-beta(lambda)`, so coefficient extraction rejects it.
pub fn a_k_uncorrected(k: ArrivalClass, model: &ModelSpec, z: C) -> C {
    let (lambda, lambda_plus) = model.rates.for_class(k);
    let b = &model.service;
    let c = lambda_plus * (1.0 - z);
    (b.lst_c(C::new(lambda, 0.0)) * (lambda_plus - lambda) * (z - 1.0) - lambda * z * b.lst_c(c))
        / (c - lambda)
}

/// `(A_k'(1), A_k''(1))`.
pub fn a_k_derivatives(k: ArrivalClass, model: &ModelSpec) -> (f64, f64) {
    let c = Constants::new(model);
    let cls = c.class(k);
    (cls.a1, cls.a2)
}

/// `alpha - [(1 - alpha) A_e'(1) + alpha A_r'(1)]`; positive iff stable.
pub fn stability_margin(model: &ModelSpec) -> f64 {
    Constants::new(model).margin
}

/// `alpha lambda_e t_r - (1 - alpha) lambda_r t_e`, which equals
/// `lambda_e lambda_r` times the margin.
pub fn stability_compact(model: &ModelSpec) -> f64 {
    let c = Constants::new(model);
    let t_e = c.e.lambda * c.e.a1;
    let t_r = c.r.lambda * (1.0 - c.r.a1);
    c.alpha * c.e.lambda * t_r - (1.0 - c.alpha) * c.r.lambda * t_e
}

/// The stability condition written as an upper bound on the mean service
/// time, both as commonly printed (with `beta(lambda_e)` in the second term)
/// and with that factor read as `1 - beta(lambda_e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityDisplay {
    pub mean_service: f64,
    pub bound_as_printed: Option<f64>,
    pub bound_corrected: Option<f64>,
    /// `None` when the display is undefined (a zero first rate or denominator).
    pub printed_agrees_with_drift: Option<bool>,
    pub corrected_agrees_with_drift: Option<bool>,
}

pub fn stability_display(model: &ModelSpec) -> StabilityDisplay {
    let c = Constants::new(model);
    let r = &model.rates;
    let b = &model.service;
    let a = c.alpha;
    let denom = r.lambda_e_plus + (r.lambda_r_plus - r.lambda_e_plus) * a;
    let defined = r.lambda_e > 0.0 && r.lambda_r > 0.0 && denom > 0.0;
    let stable = c.stable();
    if !defined {
        return StabilityDisplay {
            mean_service: c.b1,
            bound_as_printed: None,
            bound_corrected: None,
            printed_agrees_with_drift: None,
            corrected_agrees_with_drift: None,
        };
    }
    let beta_e = b.lst(r.lambda_e).unwrap_or(f64::NAN);
    let beta_r = b.lst(r.lambda_r).unwrap_or(f64::NAN);
    let first = a * (r.lambda_r_plus + (r.lambda_r - r.lambda_r_plus) * beta_r) / (r.lambda_r * denom);
    let second = |f: f64| (1.0 - a) * (r.lambda_e - r.lambda_e_plus) * f / (r.lambda_e * denom);
    let printed = first - second(beta_e);
    let corrected = first - second(1.0 - beta_e);
    StabilityDisplay {
        mean_service: c.b1,
        bound_as_printed: Some(printed),
        bound_corrected: Some(corrected),
        printed_agrees_with_drift: Some((c.b1 < printed) == stable),
        corrected_agrees_with_drift: Some((c.b1 < corrected) == stable),
    }
}

/// `pi_0`, the probability of an empty orbit just after a departure.
pub fn embedded_pi0(model: &ModelSpec) -> Result<f64> {
    let c = Constants::new(model);
    require_stable(&c)?;
    if !(c.pi0 > 0.0) {
        return Err(Error::Integrity(format!("pi0 = {} for a stable model", c.pi0)));
    }
    Ok(c.pi0)
}

pub(crate) fn embedded_pgf_with(c: &Constants, model: &ModelSpec, z: C) -> C {
    let n = (c.pi0 * c.alpha * c.s1, c.pi0 * c.alpha * c.num2);
    ratio_at_one(z, n, c.den_series(), || {
        let ae = a_k_c(model, ArrivalClass::Primary, z);
        let ar = a_k_c(model, ArrivalClass::Retrial, z);
        c.pi0 * c.alpha * (z * ae - ar) / c.denominator(z, ae, ar)
    })
}

/// `Pi(z)`: generating function of the orbit size at departure epochs.
pub fn embedded_pgf(model: &ModelSpec, z: C) -> Result<C> {
    check_disk(z)?;
    let c = Constants::new(model);
    require_stable(&c)?;
    Ok(embedded_pgf_with(&c, model, z))
}

/// Orbit generating function conditioned on an idle server,
/// normalized so that `chi1(1) = 1`.
pub fn chi1(model: &ModelSpec, z: f64) -> Result<f64> {
    let zc = C::new(z, 0.0);
    check_disk(zc)?;
    let c = Constants::new(model);
    require_stable(&c)?;
    let scale = c.margin / (1.0 - c.r.a1);
    let v = ratio_at_one(zc, (1.0 - c.r.a1, -c.r.a2), c.den_series(), || {
        let ae = a_k_c(model, ArrivalClass::Primary, zc);
        let ar = a_k_c(model, ArrivalClass::Retrial, zc);
        (zc - ar) / c.denominator(zc, ae, ar)
    });
    Ok(scale * v.re)
}

/// Departure-to-departure kernel of the orbit size, built from the
/// arrivals-per-service laws up to a fixed count.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    pub alpha: f64,
    pub b_e: Vec<f64>,
    pub b_r: Vec<f64>,
}

impl TransitionKernel {
    /// Laws tabulated for counts `0..=n_max`.
    pub fn new(model: &ModelSpec, n_max: usize) -> Self {
        TransitionKernel {
            alpha: model.alpha_star(),
            b_e: arrivals_during_service_vec(ArrivalClass::Primary, model, n_max),
            b_r: arrivals_during_service_vec(ArrivalClass::Retrial, model, n_max),
        }
    }

    fn get(v: &[f64], j: i64) -> f64 {
        if j < 0 {
            0.0
        } else {
            v.get(j as usize).copied().unwrap_or(0.0)
        }
    }

    /// `p_{m,n}`.
    pub fn prob(&self, m: usize, n: usize) -> f64 {
        let d = n as i64 - m as i64;
        if m == 0 {
            return Self::get(&self.b_e, d);
        }
        (1.0 - self.alpha) * Self::get(&self.b_e, d) + self.alpha * Self::get(&self.b_r, d + 1)
    }
}

/// One-step probability of going from orbit size `m` to `n` between departures.
pub fn transition_prob(model: &ModelSpec, m: usize, n: usize) -> f64 {
    let need = (n + 1).saturating_sub(m);
    TransitionKernel::new(model, need).prob(m, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::RateProfile;
    use crate::dists::DistributionSpec;

    fn table5_row1() -> ModelSpec {
        let q = [0.0547, 0.0287, 0.1719, 0.033];
        ModelSpec::new(
            RateProfile::new(1.0, 2.0 * q[0], 2.0 * q[1], 2.0 * q[2], 2.0 * q[3]),
            DistributionSpec::erlang(4, 1.5),
            DistributionSpec::erlang(3, 3.0),
        )
    }

    #[test]
    fn a_k_boundary_values() {
        let m = table5_row1();
        for k in ArrivalClass::BOTH {
            let one = a_k(k, &m, C::new(1.0, 0.0)).unwrap();
            assert!((one - 1.0).norm() < 1e-15);
            let (l, _) = m.rates.for_class(k);
            let zero = a_k(k, &m, C::new(0.0, 0.0)).unwrap();
            assert!((zero.re - m.service.lst(l).unwrap()).abs() < 1e-15);
        }
        assert!(a_k(ArrivalClass::Primary, &m, C::new(1.1, 0.0)).is_err());
    }

    #[test]
    fn uncorrected_sign_is_negative_at_origin() {
        let m = table5_row1();
        let v = a_k_uncorrected(ArrivalClass::Retrial, &m, C::new(0.0, 0.0));
        assert!((v.re + m.service.lst(m.rates.lambda_r).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn a_k_matches_quadrature_coefficients() {
        let m = table5_row1();
        for k in ArrivalClass::BOTH {
            let b = arrivals_during_service_vec(k, &m, 400);
            for i in 0..20 {
                let z = i as f64 / 20.0;
                let series: f64 = b.iter().rev().fold(0.0, |acc, p| acc * z + p);
                let closed = a_k(k, &m, C::new(z, 0.0)).unwrap().re;
                assert!((series - closed).abs() < 1e-8, "k={k:?} z={z}");
            }
        }
    }

    #[test]
    fn removable_singularity_of_a_k() {
        // c = lambda at z* = 1 - lambda / lambda_plus = 0.5
        let m = ModelSpec::new(
            RateProfile::new(1.0, 0.5, 1.0, 0.2, 0.1),
            DistributionSpec::erlang(2, 2.0),
            DistributionSpec::exponential(3.0),
        );
        let at = |z: f64| a_k(ArrivalClass::Primary, &m, C::new(z, 0.0)).unwrap().re;
        let mid = at(0.5);
        let near = 0.5 * (at(0.5 - 1e-3) + at(0.5 + 1e-3));
        assert!((mid - near).abs() < 1e-5);
        assert!(mid.is_finite() && mid > 0.0);
    }

    #[test]
    fn event_independent_reduction() {
        let m = ModelSpec::new(
            RateProfile::event_independent(0.5),
            DistributionSpec::exponential(2.0),
            DistributionSpec::exponential(3.0),
        );
        assert!((embedded_pi0(&m).unwrap() - (1.0 - 0.25 * 7.0 / 6.0)).abs() < 1e-12);
        let (a1, a2) = a_k_derivatives(ArrivalClass::Primary, &m);
        assert!((a1 - 0.25).abs() < 1e-14 && (a2 - 0.125).abs() < 1e-14);
        assert!(stability_margin(&m) > 0.0);
    }

    #[test]
    fn no_load_margin_is_alpha() {
        let m = ModelSpec::new(
            RateProfile::new(0.7, 0.0, 0.0, 0.0, 0.0),
            DistributionSpec::erlang(4, 1.5),
            DistributionSpec::erlang(3, 3.0),
        );
        assert!((stability_margin(&m) - m.alpha_star()).abs() < 1e-15);
        assert_eq!(a_k_derivatives(ArrivalClass::Retrial, &m), (0.0, 0.0));
    }

    #[test]
    fn pgf_is_normalized_and_continuous_at_one() {
        let m = ModelSpec::new(
            RateProfile::new(1.0, 0.3, 0.2, 0.5, 0.1),
            DistributionSpec::erlang(2, 2.0),
            DistributionSpec::exponential(3.0),
        );
        let one = embedded_pgf(&m, C::new(1.0, 0.0)).unwrap();
        assert!((one - 1.0).norm() < 1e-14);
        let a = embedded_pgf(&m, C::new(1.0 - 2e-6, 0.0)).unwrap();
        let b = embedded_pgf(&m, C::new(1.0 - 5e-7, 0.0)).unwrap();
        // series branch just inside the switch agrees with the direct form just outside
        let slope = (one - a) / 2e-6;
        assert!((b - (one - 5e-7 * slope)).norm() < 1e-9);
        let x1 = chi1(&m, 1.0).unwrap();
        assert!((x1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_rows_are_stochastic() {
        let m = table5_row1();
        let k = TransitionKernel::new(&m, 400);
        for row in 0..5 {
            let s: f64 = (0..400).map(|n| k.prob(row, n)).sum();
            assert!((s - 1.0).abs() < 1e-10, "row {row}: {s}");
        }
        assert_eq!(transition_prob(&m, 5, 3), 0.0);
        let down = transition_prob(&m, 5, 4);
        assert!((down - m.alpha_star() * m.service.lst(m.rates.lambda_r).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn printed_display_can_disagree_with_drift() {
        // Found by scanning; the corrected form never disagrees.
        let svc = DistributionSpec::erlang(4, 1.5);
        let seek = DistributionSpec::erlang(3, 3.0);
        let mut printed_bad = 0;
        for i in 1..40 {
            let le = 0.05 * i as f64;
            let m = ModelSpec::new(RateProfile::new(1.0, le, 0.01, 0.3, 0.2), svc.clone(), seek.clone());
            let d = stability_display(&m);
            assert_eq!(d.corrected_agrees_with_drift, Some(true), "le={le}");
            if d.printed_agrees_with_drift == Some(false) {
                printed_bad += 1;
            }
        }
        assert!(printed_bad > 0);
    }
}
