//! Number of arrivals in a fixed or random service time when the first
//! arrival comes at rate `lambda` and every later one at `lambda_plus`.

use crate::error::{Error, Result};
use crate::oracles::quadrature::integrate_vec;

use super::{ArrivalClass, ModelSpec, RateProfile};

/// Quadrature target for the arrivals-per-service laws.
const SERVICE_QUAD_TOL: f64 = 1e-13;

fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

/// `P(N(t) = n)` for `n = 0..=n_max`.
///
/// For `n >= 1`, `P(N(t) = n) = lambda * lambda_plus^(n-1) * t^n * exp(-max(lambda, lambda_plus) t)
/// * S_n(|lambda_plus - lambda| t) / n!` with `S_n(x) = sum_j x^j n! / (n+j)!`. Every term is
/// positive, which avoids the cancellation in the difference-of-exponentials form.
pub fn arrival_count_pmf_vec(lambda: f64, lambda_plus: f64, t: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if t <= 0.0 || lambda == 0.0 {
        out[0] = 1.0;
        return out;
    }
    out[0] = (-lambda * t).exp();
    if n_max == 0 {
        return out;
    }
    if lambda_plus == 0.0 {
        out[1] = -(-lambda * t).exp_m1();
        return out;
    }

    let top = lambda.max(lambda_plus);
    let x = (lambda_plus - lambda).abs() * t;

    let mut log_s = vec![0.0; n_max + 1];
    if x > 0.0 && lambda_plus > lambda {
        // ln S_n by downward recursion S_n = 1 + x S_{n+1} / (n+1), seeded where
        // the direct series converges geometrically.
        let start = n_max.max((2.0 * x).ceil() as usize + 20);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 1usize;
        loop {
            term *= x / (start + j) as f64;
            sum += term;
            if term < 1e-18 * sum || j > 100_000 {
                break;
            }
            j += 1;
        }
        let mut ls = sum.ln();
        for n in (1..start).rev() {
            ls = softplus((x / (n + 1) as f64).ln() + ls);
            if n <= n_max {
                log_s[n] = ls;
            }
        }
        if start <= n_max {
            log_s[start] = sum.ln();
        }
    } else if x > 0.0 {
        // First arrival faster: S_n = n W_n e^x with W_n = int_0^1 u^(n-1) e^(-x(1-u)) du,
        // from W_n = (1 - x W_{n+1}) / n downward above x and
        // W_{n+1} = (1 - n W_n) / x upward below it; both directions are contracting.
        let split = (x.ceil() as usize).clamp(1, n_max + 1);
        let mut w = vec![0.0; n_max + 2];
        let seed = n_max.max(2 * x.ceil() as usize) + 60;
        let mut wn = 1.0 / (seed as f64 + x);
        for n in (split..seed).rev() {
            wn = (1.0 - x * wn) / n as f64;
            if n <= n_max + 1 {
                w[n] = wn;
            }
        }
        w[1] = if split > 1 { -(-x).exp_m1() / x } else { w[1] };
        for n in 1..split.saturating_sub(1) {
            w[n + 1] = (1.0 - n as f64 * w[n]) / x;
        }
        for n in 1..=n_max {
            log_s[n] = (n as f64 * w[n]).ln() + x;
        }
    }

    // log weight lambda * lambda_plus^(n-1) * t^n / n! * exp(-top t)
    let mut log_w = lambda.ln() + t.ln() - top * t;
    for n in 1..=n_max {
        if n > 1 {
            log_w += (lambda_plus * t).ln() - (n as f64).ln();
        }
        out[n] = (log_w + log_s[n]).exp();
    }
    out
}

/// `P_k(N(t) = n)` for the class-`k` modified Poisson process.
pub fn arrival_count_pmf(k: ArrivalClass, rates: &RateProfile, n: usize, t: f64) -> f64 {
    let (lambda, lambda_plus) = rates.for_class(k);
    arrival_count_pmf_vec(lambda, lambda_plus, t, n)[n]
}

/// `b_n^k` for `n = 0..=n_max`: the count law integrated against the service law.
pub fn arrivals_during_service_vec(k: ArrivalClass, model: &ModelSpec, n_max: usize) -> Vec<f64> {
    let (lambda, lambda_plus) = model.rates.for_class(k);
    let service = &model.service;
    if service.is_zero() {
        let mut v = vec![0.0; n_max + 1];
        v[0] = 1.0;
        return v;
    }
    if let crate::dists::DistributionSpec::Deterministic { value } = service {
        return arrival_count_pmf_vec(lambda, lambda_plus, *value, n_max);
    }
    let upper = service.tail_time(1e-15);
    integrate_vec(
        |t, out| {
            let density = service.pdf(t);
            if density == 0.0 {
                out.iter_mut().for_each(|v| *v = 0.0);
                return;
            }
            let p = arrival_count_pmf_vec(lambda, lambda_plus, t, n_max);
            for (o, q) in out.iter_mut().zip(p) {
                *o = q * density;
            }
        },
        0.0,
        upper,
        n_max + 1,
        16,
        SERVICE_QUAD_TOL,
    )
}

pub fn arrivals_during_service_pmf(k: ArrivalClass, model: &ModelSpec, n: usize) -> Result<f64> {
    model.validate().map_err(|e| Error::Domain(e.to_string()))?;
    Ok(arrivals_during_service_vec(k, model, n)[n])
}
