use num_complex::Complex64 as C;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracles::pgf_to_pmf;

use super::arbitrary::{arbitrary_with, moments_with, server_state_with, ServerStateProbs};
use super::embedded::{embedded_pgf_with, stability_display};
use super::transforms::Constants;
use super::ModelSpec;

/// One reading chosen where the published closed forms are ambiguous or
/// inconsistent; emitted with every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypoResolution {
    pub quantity: &'static str,
    pub as_published: &'static str,
    pub used: &'static str,
    pub check: &'static str,
}

pub fn typo_ledger() -> Vec<TypoResolution> {
    vec![
        TypoResolution {
            quantity: "A_k(z)",
            as_published: "beta(l)(l+ - l)(z - 1) in the numerator",
            used: "beta(l)(l+ - l)(1 - z)",
            check: "A_k(0) = b_0 and coefficients match quadrature",
        },
        TypoResolution {
            quantity: "P_k(N(t) = n)",
            as_published: "exp(-l) t",
            used: "exp(-l t)",
            check: "agrees with ODE integration of the forward equations",
        },
        TypoResolution {
            quantity: "stability bound on mean service time",
            as_published: "second term carries beta(l_e)",
            used: "second term carries 1 - beta(l_e); drift margin is canonical",
            check: "sign agrees with the drift margin",
        },
        TypoResolution {
            quantity: "p_{m,n}",
            as_published: "(1 - alpha b^e_{n-m}",
            used: "(1 - alpha) b^e_{n-m}",
            check: "rows sum to 1",
        },
        TypoResolution {
            quantity: "pi_0, p_00",
            as_published: "unbalanced parentheses in (1 - beta(l_e)(l_e - l_e+)",
            used: "(1 - beta(l_e))(l_e - l_e+)",
            check: "event-independent reduction and truncated-chain solve",
        },
        TypoResolution {
            quantity: "P(C=1, I=E3)",
            as_published: "denominator ends in l_e t_r",
            used: "denominator ends in l_r t_e",
            check: "state probabilities sum to 1",
        },
        TypoResolution {
            quantity: "P(C=1, I=E4 or E5)",
            as_published: "numerator l- l_r t_r",
            used: "numerator l- l_e t_r",
            check: "state probabilities sum to 1; equals transform at z = 1",
        },
        TypoResolution {
            quantity: "K(z)",
            as_published: "P_0*(0, x) and A_r^*(z)",
            used: "P_0*(0, z) and A_r(z)",
            check: "balance identities of the joint transforms",
        },
        TypoResolution {
            quantity: "boundary of P_14 + P_15",
            as_published: "beta(l_e (1 - z))",
            used: "beta(l_e+ (1 - z))",
            check: "balance identities of the joint transforms",
        },
        TypoResolution {
            quantity: "F",
            as_published: "[p00 (1-alpha) G + a_e P(C=0)] - P_0*(0,1)(1 - alpha(l- A_r'(1)))",
            used: "(1-alpha)[p00 (1-alpha) G + a_e P(C=0)] - P_0*(0,1)(1 - alpha A_r'(1))",
            check: "equals K'(1) / (l- alpha)",
        },
        TypoResolution {
            quantity: "E(X)",
            as_published: "term b F",
            used: "term l- alpha b F",
            check: "finite-difference derivative of the orbit transform",
        },
        TypoResolution {
            quantity: "TH_S",
            as_published: "admission-rate sum without the l- p00 term",
            used: "sum including l- p00 (departure rate)",
            check: "equals the closed form; TH = l in the event-independent case",
        },
        TypoResolution {
            quantity: "P(z)",
            as_published: "p00 + P_0* + x sum P_1k",
            used: "p00 + P_0* + z sum P_1k",
            check: "instant-seek limit equals the M/G/1 transform",
        },
        TypoResolution {
            quantity: "chi_1(z)",
            as_published: "normalizing factor alpha (1 + a_e - a_r) / (1 - a_r)",
            used: "normalizing factor margin / (1 - a_r), so chi_1(1) = 1",
            check: "equals (p00 + P_0*(0,z)) / P(C=0)",
        },
        TypoResolution {
            quantity: "distance to the instant-seek limit",
            as_published: "signed sum of pmf differences (identically 0)",
            used: "total-variation distance, compared with the upper bound only",
            check: "coefficient extraction of both orbit transforms",
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryReport {
    pub stable: bool,
    pub stability_margin: f64,
    pub alpha: f64,
    pub pi0: Option<f64>,
    pub p00: Option<f64>,
    pub p_idle: Option<f64>,
    pub state_event_probs: Option<ServerStateProbs>,
    pub ex: Option<f64>,
    pub th_s: Option<f64>,
    pub es: Option<f64>,
    pub t_e: Option<f64>,
    pub t_r: Option<f64>,
    pub th_transform: Option<f64>,
    pub bounds: Option<(f64, f64)>,
    pub orbit_pmf_departure: Option<Vec<f64>>,
    pub system_pmf: Option<Vec<f64>>,
    pub stability_display_agrees: Option<bool>,
}

/// Full stationary analysis; `pmf_max` also extracts the departure-epoch
/// orbit pmf and the system-size pmf up to that count.
pub fn analyze(model: &ModelSpec, pmf_max: Option<usize>) -> Result<StationaryReport> {
    model.validate()?;
    let c = Constants::new(model);
    let mut rep = StationaryReport {
        stable: c.stable(),
        stability_margin: c.margin,
        alpha: c.alpha,
        pi0: None,
        p00: None,
        p_idle: None,
        state_event_probs: None,
        ex: None,
        th_s: None,
        es: None,
        t_e: None,
        t_r: None,
        th_transform: None,
        bounds: None,
        orbit_pmf_departure: None,
        system_pmf: None,
        stability_display_agrees: None,
    };
    if !rep.stable {
        return Ok(rep);
    }
    let m = moments_with(&c);
    let states = server_state_with(&c);
    let at_one = arbitrary_with(&c, model, C::new(1.0, 0.0));
    let r = &model.rates;
    let th_transform = r.lambda_minus * (c.p00 + at_one.p0.re)
        + r.lambda_e * at_one.p12.re
        + r.lambda_e_plus * at_one.p45.re
        + r.lambda_r * at_one.p13.re
        + r.lambda_r_plus * at_one.p67.re;
    let top = 2.0 * c.e.a1 * (1.0 - c.alpha) / c.alpha;

    rep.pi0 = Some(c.pi0);
    rep.p00 = Some(c.p00);
    rep.p_idle = Some(c.p_idle);
    rep.state_event_probs = Some(states);
    rep.ex = Some(m.ex);
    rep.th_s = Some(m.th);
    rep.es = Some(m.es);
    rep.t_e = Some(c.e.lambda * c.e.a1);
    rep.t_r = Some(c.r.lambda * (1.0 - c.r.a1));
    rep.th_transform = Some(th_transform);
    rep.bounds = Some((top / c.den, top / (1.0 - c.r.a1)));
    rep.stability_display_agrees = stability_display(model).corrected_agrees_with_drift;

    if !(c.pi0 > 0.0 && c.p00 > 0.0) {
        return Err(Error::Integrity(format!("pi0 = {}, p00 = {} on a stable model", c.pi0, c.p00)));
    }
    if let Some(n) = pmf_max {
        rep.orbit_pmf_departure = Some(pgf_to_pmf(|z| embedded_pgf_with(&c, model, z), n, None)?);
        rep.system_pmf = Some(pgf_to_pmf(
            |z| {
                let t = arbitrary_with(&c, model, z);
                c.p00 + t.p0 + z * t.busy()
            },
            n,
            None,
        )?);
    }
    Ok(rep)
}
