use crate::analytic::{ArrivalClass, RateProfile};

// Dormand-Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = f(t, y)` from 0 to `t_end` with adaptive Dormand-Prince steps.
pub fn dopri5<F>(f: F, y0: &[f64], t_end: f64, atol: f64, rtol: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if t_end <= 0.0 {
        return y;
    }
    let mut t = 0.0;
    let mut h = (t_end * 1e-3).max(1e-12);
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(t, &y, &mut k[0]);
    let mut steps = 0usize;
    while t < t_end && steps < 1_000_000 {
        steps += 1;
        if t + h > t_end {
            h = t_end - t;
        }
        let stage = |k: &mut Vec<Vec<f64>>, tmp: &mut Vec<f64>, idx: usize, c: f64, coeffs: &[f64]| {
            for i in 0..n {
                let mut acc = y[i];
                for (j, a) in coeffs.iter().enumerate() {
                    acc += h * a * k[j][i];
                }
                tmp[i] = acc;
            }
            let (head, tail) = k.split_at_mut(idx);
            let _ = head;
            f(t + c * h, tmp, &mut tail[0]);
        };
        stage(&mut k, &mut tmp, 1, C2, &[A21]);
        stage(&mut k, &mut tmp, 2, C3, &[A31, A32]);
        stage(&mut k, &mut tmp, 3, C4, &[A41, A42, A43]);
        stage(&mut k, &mut tmp, 4, C5, &[A51, A52, A53, A54]);
        stage(&mut k, &mut tmp, 5, 1.0, &[A61, A62, A63, A64, A65]);
        for i in 0..n {
            y_new[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
        }
        let mut k7 = vec![0.0; n];
        f(t + h, &y_new, &mut k7);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k7[i]);
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y_new);
            k[0] = k7;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

/// Arrival-count probabilities at time `t` by integrating the forward
/// equations of the two-rate counting process.
pub fn ode_arrival_count(k: ArrivalClass, rates: &RateProfile, t: f64, n_max: usize) -> Vec<f64> {
    let (lambda, lambda_plus) = rates.for_class(k);
    let mut y0 = vec![0.0; n_max + 1];
    y0[0] = 1.0;
    dopri5(
        |_, p, dp| {
            dp[0] = -lambda * p[0];
            if p.len() > 1 {
                dp[1] = -lambda_plus * p[1] + lambda * p[0];
            }
            for n in 2..p.len() {
                dp[n] = -lambda_plus * p[n] + lambda_plus * p[n - 1];
            }
        },
        &y0,
        t,
        1e-12,
        1e-10,
    )
}
