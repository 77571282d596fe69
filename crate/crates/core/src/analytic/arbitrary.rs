//! Arbitrary-epoch distribution of (server state, orbit size, last event) and
//! the performance measures built on it.

use num_complex::Complex64 as C;
use serde::Serialize;

use crate::dists::DistributionSpec;
use crate::error::Result;
use crate::oracles::pgf_to_pmf;

use super::embedded::{check_disk, require_stable};
use super::transforms::{a_k_c, after_first_c, ratio_at_one, Constants};
use super::{ArrivalClass, ModelSpec};

/// Orbit-size transforms at an arbitrary epoch, split by server state and
/// last event, plus the seek-win boundary function `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbitraryEpoch {
    /// Idle with a nonempty orbit (a seek in progress).
    pub p0: C,
    /// Busy with a primary, no arrival yet.
    pub p12: C,
    /// Busy with a retrieved customer, no arrival yet.
    pub p13: C,
    /// Busy with a primary, at least one arrival so far.
    pub p45: C,
    /// Busy with a retrieved customer, at least one arrival so far.
    pub p67: C,
    pub k: C,
}

impl ArbitraryEpoch {
    pub fn busy(&self) -> C {
        self.p12 + self.p13 + self.p45 + self.p67
    }
}

pub(crate) fn arbitrary_with(c: &Constants, model: &ModelSpec, z: C) -> ArbitraryEpoch {
    let (a1, a2) = (c.e.a1, c.e.a2);
    let lm = c.lambda_minus;
    let both = || {
        let ae = a_k_c(model, ArrivalClass::Primary, z);
        let ar = a_k_c(model, ArrivalClass::Retrial, z);
        (ae, c.denominator(z, ae, ar))
    };
    let p0 = c.p00 * (1.0 - c.alpha)
        * ratio_at_one(z, (a1, 2.0 * a1 + a2), c.den_series(), || {
            let (ae, d) = both();
            z * (ae - 1.0) / d
        });
    let k = lm * c.alpha * c.p00
        * ratio_at_one(z, (a1, a2), c.den_series(), || {
            let (ae, d) = both();
            (ae - 1.0) / d
        });
    let r2 = lm * (c.p00 + p0);
    ArbitraryEpoch {
        p0,
        p12: r2 * c.e.excess,
        p13: k * c.r.excess,
        p45: r2 * after_first_c(model, ArrivalClass::Primary, z),
        p67: k * after_first_c(model, ArrivalClass::Retrial, z),
        k,
    }
}

pub fn arbitrary_epoch_transforms(model: &ModelSpec, z: C) -> Result<ArbitraryEpoch> {
    check_disk(z)?;
    let c = Constants::new(model);
    require_stable(&c)?;
    Ok(arbitrary_with(&c, model, z))
}

/// Generating function of the orbit size at an arbitrary epoch.
pub fn orbit_pgf(model: &ModelSpec, z: C) -> Result<C> {
    let t = arbitrary_epoch_transforms(model, z)?;
    Ok(Constants::new(model).p00 + t.p0 + t.busy())
}

/// Generating function of the number in system (orbit plus the one in service).
pub fn total_system_pgf(model: &ModelSpec, z: C) -> Result<C> {
    let t = arbitrary_epoch_transforms(model, z)?;
    Ok(Constants::new(model).p00 + t.p0 + z * t.busy())
}

/// Orbit-size pmf at an arbitrary epoch for `n = 0..=n_max`.
pub fn orbit_pmf(model: &ModelSpec, n_max: usize) -> Result<Vec<f64>> {
    let c = Constants::new(model);
    require_stable(&c)?;
    pgf_to_pmf(
        |z| {
            let t = arbitrary_with(&c, model, z);
            c.p00 + t.p0 + t.busy()
        },
        n_max,
        None,
    )
}

/// Total-variation distance `sum_n |P(X = n) - P_inf(X = n)|` between the
/// orbit law and that of the same model with instantaneous seeks. Both pmfs
/// are extended until their unextracted tails are negligible, and the tails
/// are added to the sum so the result never underestimates.
pub fn instant_seek_distance(model: &ModelSpec) -> Result<f64> {
    let limit = model.with_seek(DistributionSpec::deterministic(0.0));
    let mut n = 64;
    loop {
        let a = orbit_pmf(model, n)?;
        let b = orbit_pmf(&limit, n)?;
        let tail_a = (1.0 - a.iter().sum::<f64>()).max(0.0);
        let tail_b = (1.0 - b.iter().sum::<f64>()).max(0.0);
        if (tail_a < 1e-10 && tail_b < 1e-10) || n >= 1 << 16 {
            let body: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
            return Ok(body + tail_a + tail_b);
        }
        n *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PTerms {
    pub p00: f64,
    pub t_e: f64,
    pub t_r: f64,
}

/// Empty-system probability and the two drift terms
/// `t_e = lambda_e A_e'(1)`, `t_r = lambda_r (1 - A_r'(1))`.
pub fn p00_t_terms(model: &ModelSpec) -> Result<PTerms> {
    let c = Constants::new(model);
    require_stable(&c)?;
    Ok(PTerms {
        p00: c.p00,
        t_e: c.e.lambda * c.e.a1,
        t_r: c.r.lambda * (1.0 - c.r.a1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ServerStateProbs {
    /// `P(C = 0)`.
    pub idle: f64,
    /// Idle and empty.
    pub empty: f64,
    pub e2: f64,
    pub e3: f64,
    pub e45: f64,
    pub e67: f64,
}

impl ServerStateProbs {
    pub fn total(&self) -> f64 {
        self.idle + self.e2 + self.e3 + self.e45 + self.e67
    }
}

pub(crate) fn server_state_with(c: &Constants) -> ServerStateProbs {
    let from_idle = c.lambda_minus * c.p_idle;
    let k1 = c.k1();
    ServerStateProbs {
        idle: c.p_idle,
        empty: c.p00,
        e2: from_idle * c.e.excess,
        e3: k1 * c.r.excess,
        e45: from_idle * (c.b1 - c.e.excess),
        e67: k1 * (c.b1 - c.r.excess),
    }
}

pub fn server_state_probs(model: &ModelSpec) -> Result<ServerStateProbs> {
    let c = Constants::new(model);
    require_stable(&c)?;
    Ok(server_state_with(&c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    /// Mean orbit size.
    pub ex: f64,
    /// Departure rate.
    pub th: f64,
    /// `E(X) / TH`.
    pub es: f64,
    pub s_e: f64,
    pub s_r: f64,
    /// `P0*'(1) / (p00 (1 - alpha))`.
    pub g: f64,
    /// `K'(1) / (lambda_minus alpha)`.
    pub f: f64,
    /// Mean orbit size assembled the long way round, through `1 / (1 - alpha)`
    /// terms; absent when `alpha = 1`.
    pub ex_alternate: Option<f64>,
}

pub(crate) fn moments_with(c: &Constants) -> Moments {
    let lm = c.lambda_minus;
    let a = c.alpha;
    let m = c.margin;
    let f = c.p00 * (c.e.a2 * m - c.e.a1 * c.den2) / (2.0 * m * m);
    let ex = c.p00 * (1.0 - a) * c.g * (1.0 + lm * c.b1)
        + lm * a * c.b1 * f
        + lm * c.p_idle * c.e.s
        + c.k1() * c.r.s;
    let ex_alternate = if a < 1.0 - 1e-6 {
        let q = 1.0 - a;
        let p0_one = c.p_idle - c.p00;
        let f_alt = (q * (c.p00 * q * c.g + c.e.a1 * c.p_idle) - p0_one * (1.0 - a * c.r.a1)) / (q * q);
        Some(
            c.p00 * (q * (1.0 + lm * c.b1) * c.g - lm * a / q * c.r.s)
                + lm * a * c.b1 * f_alt
                + lm * c.p_idle * (c.e.s + a / q * c.r.s),
        )
    } else {
        None
    };
    Moments {
        ex,
        th: c.throughput,
        es: ex / c.throughput,
        s_e: c.e.s,
        s_r: c.r.s,
        g: c.g,
        f,
        ex_alternate,
    }
}

pub fn moments_and_throughput(model: &ModelSpec) -> Result<Moments> {
    let c = Constants::new(model);
    require_stable(&c)?;
    Ok(moments_with(&c))
}

/// Admission rate summed over every state: the throughput computed from the
/// transforms rather than the closed form.
pub fn throughput_transform_sum(model: &ModelSpec) -> Result<f64> {
    let c = Constants::new(model);
    require_stable(&c)?;
    let t = arbitrary_with(&c, model, C::new(1.0, 0.0));
    let r = &model.rates;
    Ok(r.lambda_minus * (c.p00 + t.p0.re)
        + r.lambda_e * t.p12.re
        + r.lambda_e_plus * t.p45.re
        + r.lambda_r * t.p13.re
        + r.lambda_r_plus * t.p67.re)
}

/// Lower and upper bounds on the distance to the instant-seek limit.
pub fn asymptotic_bounds(model: &ModelSpec) -> Result<(f64, f64)> {
    let c = Constants::new(model);
    require_stable(&c)?;
    let top = 2.0 * c.e.a1 * (1.0 - c.alpha) / c.alpha;
    Ok((top / c.den, top / (1.0 - c.r.a1)))
}
