//! Joint transforms in the remaining time `s` and the orbit size `z`, and the
//! balance identities they must satisfy. Used as an internal consistency
//! check on the one-argument results.

use num_complex::Complex64 as C;
use serde::Serialize;

use crate::error::Result;

use super::arbitrary::arbitrary_with;
use super::embedded::{check_disk, require_stable};
use super::transforms::{a_k_c, dd_lst, time_scale, Constants};
use super::{ArrivalClass, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoArgTransforms {
    pub s: C,
    pub z: C,
    /// Boundary (remaining time 0) functions.
    pub p0_boundary: C,
    pub busy_boundary: C,
    pub p12_boundary: C,
    pub p13_boundary: C,
    pub p45_boundary: C,
    pub p67_boundary: C,
    /// Transforms in `s`.
    pub p0: C,
    pub p12: C,
    pub p13: C,
    pub p45: C,
    pub p67: C,
}

/// Value of an analytic `f` at `x`, averaged over a small circle when `x`
/// sits on a removable singularity of the direct formula.
fn mean_value<F: Fn(C) -> C>(f: F, x: C, singular: bool, radius: f64) -> C {
    if !singular {
        return f(x);
    }
    let n = 8;
    (0..n)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
            f(x + C::from_polar(radius, th))
        })
        .sum::<C>()
        / n as f64
}

impl TwoArgTransforms {
    pub fn new(model: &ModelSpec, s: C, z: C) -> Result<Self> {
        check_disk(z)?;
        let c = Constants::new(model);
        require_stable(&c)?;
        Ok(Self::with(&c, model, s, z))
    }

    pub(crate) fn with(c: &Constants, model: &ModelSpec, s: C, z: C) -> Self {
        let r = &model.rates;
        let b = &model.service;
        let a = &model.seek;
        let lm = C::new(r.lambda_minus, 0.0);
        let le = C::new(r.lambda_e, 0.0);
        let lr = C::new(r.lambda_r, 0.0);
        let at0 = arbitrary_with(c, model, z);
        let idle = c.p00 + at0.p0;
        let p0_boundary = z * at0.k;

        let ae = a_k_c(model, ArrivalClass::Primary, z);
        let ar = a_k_c(model, ArrivalClass::Retrial, z);
        let busy_boundary = lm * ae * idle + at0.k * ar;

        let ce = r.lambda_e_plus * (1.0 - z);
        let cr = r.lambda_r_plus * (1.0 - z);
        let p12_boundary = lm * b.lst_c(le) * idle;
        let p13_boundary = b.lst_c(lr) * at0.k;
        let p45_boundary = -lm * r.lambda_e * z * dd_lst(b, le, ce) * idle;
        let p67_boundary = -r.lambda_r * dd_lst(b, lr, cr) * p0_boundary;

        let p0 = -dd_lst(a, lm, s) * p0_boundary / c.alpha;
        let p12 = -lm * dd_lst(b, le, s) * idle;
        let p13 = -dd_lst(b, lr, s) * at0.k;

        let radius = 1e-2 / time_scale(b).max(1e-300);
        let second = |lam: C, cc: C, x: C| (dd_lst(b, lam, x) - dd_lst(b, lam, cc)) / (x - cc);
        let near = |cc: C| (s - cc).norm() < radius;
        let p45 = lm * r.lambda_e * z * mean_value(|x| second(le, ce, x), s, near(ce), radius) * idle;
        let p67 = r.lambda_r * mean_value(|x| second(lr, cr, x), s, near(cr), radius) * p0_boundary;

        TwoArgTransforms {
            s,
            z,
            p0_boundary,
            busy_boundary,
            p12_boundary,
            p13_boundary,
            p45_boundary,
            p67_boundary,
            p0,
            p12,
            p13,
            p45,
            p67,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub name: &'static str,
    pub s: f64,
    pub z: f64,
    pub residual: f64,
}

/// Residuals of every balance identity at each `(s, z)` pair of the grid.
pub fn transform_identity_residuals(model: &ModelSpec, s_grid: &[f64], z_grid: &[f64]) -> Result<Vec<IdentityResidual>> {
    let c = Constants::new(model);
    require_stable(&c)?;
    let r = &model.rates;
    let lm = r.lambda_minus;
    let mut out = Vec::new();

    let push = |out: &mut Vec<IdentityResidual>, name, s, z, v: C| {
        out.push(IdentityResidual {
            name,
            s,
            z,
            residual: v.norm(),
        })
    };

    // s- and z-free checks
    let at_one = arbitrary_with(&c, model, C::new(1.0, 0.0));
    push(&mut out, "normalization", 0.0, 1.0, C::new(c.p00 - 1.0, 0.0) + at_one.p0 + at_one.busy());
    let t0 = TwoArgTransforms::with(&c, model, C::new(0.0, 0.0), C::new(0.0, 0.0));
    push(
        &mut out,
        "empty_balance",
        0.0,
        0.0,
        C::new(lm * c.p00, 0.0) - t0.p12_boundary - t0.p13_boundary,
    );

    for &zr in z_grid {
        let z = C::new(zr, 0.0);
        let zero = TwoArgTransforms::with(&c, model, C::new(0.0, 0.0), z);
        let one_arg = arbitrary_with(&c, model, z);
        push(
            &mut out,
            "seek_boundary",
            0.0,
            zr,
            zero.p0_boundary - c.alpha * (zero.busy_boundary - lm * c.p00),
        );
        push(
            &mut out,
            "busy_boundary_split",
            0.0,
            zr,
            zero.busy_boundary
                - (zero.p12_boundary + zero.p13_boundary + zero.p45_boundary + zero.p67_boundary),
        );
        let diff = (zero.p0 - one_arg.p0).norm()
            + (zero.p12 - one_arg.p12).norm()
            + (zero.p13 - one_arg.p13).norm()
            + (zero.p45 - one_arg.p45).norm()
            + (zero.p67 - one_arg.p67).norm();
        push(&mut out, "s_zero_agreement", 0.0, zr, C::new(diff, 0.0));

        for &sr in s_grid {
            let s = C::new(sr, 0.0);
            let t = TwoArgTransforms::with(&c, model, s, z);
            let idle = c.p00 + zero.p0;
            let k = zero.p0_boundary / z;
            let ce = r.lambda_e_plus * (1.0 - z);
            let cr = r.lambda_r_plus * (1.0 - z);
            push(
                &mut out,
                "seek_phase",
                sr,
                zr,
                (s - lm) * t.p0 - (zero.p0_boundary - model.seek.lst_c(s) * (zero.busy_boundary - lm * c.p00)),
            );
            push(
                &mut out,
                "primary_no_arrival",
                sr,
                zr,
                (s - r.lambda_e) * t.p12 - (zero.p12_boundary - lm * model.service.lst_c(s) * idle),
            );
            push(
                &mut out,
                "retrial_no_arrival",
                sr,
                zr,
                (s - r.lambda_r) * t.p13 - (zero.p13_boundary - model.service.lst_c(s) * k),
            );
            push(
                &mut out,
                "primary_after_first",
                sr,
                zr,
                (s - ce) * t.p45 - (zero.p45_boundary - r.lambda_e * z * t.p12),
            );
            push(
                &mut out,
                "retrial_after_first",
                sr,
                zr,
                (s - cr) * t.p67 - (zero.p67_boundary - r.lambda_r * z * t.p13),
            );
        }
    }
    Ok(out)
}
