use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::analytic::{ModelSpec, TransitionKernel};
use crate::error::{Error, Result};

/// Dense LU is used up to this many states; power iteration above.
const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationConfig {
    pub max_orbit: usize,
    pub tail_tolerance: f64,
}

impl TruncationConfig {
    pub fn new(max_orbit: usize, tail_tolerance: f64) -> Result<Self> {
        let cfg = TruncationConfig {
            max_orbit,
            tail_tolerance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_orbit < 10 {
            return Err(Error::Config(format!("max_orbit must be >= 10, got {}", self.max_orbit)));
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance <= 1e-6) {
            return Err(Error::Config(format!(
                "tail_tolerance must be in (0, 1e-6], got {}",
                self.tail_tolerance
            )));
        }
        Ok(())
    }
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            max_orbit: 400,
            tail_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedSolution {
    pub pi: Vec<f64>,
    /// Stationary mass in the last (absorbing-overflow) state.
    pub boundary_mass: f64,
    pub max_orbit: usize,
    pub iterations: usize,
}

/// Row `m` of the truncated kernel over states `0..=n`, overflow lumped into `n`.
fn kernel_row(kernel: &TransitionKernel, m: usize, n: usize, row: &mut [f64]) {
    let mut acc = 0.0;
    for (j, v) in row.iter_mut().enumerate().take(n) {
        *v = kernel.prob(m, j);
        acc += *v;
    }
    row[n] = (1.0 - acc).max(0.0);
}

fn solve_dense(kernel: &TransitionKernel, n: usize) -> Result<Vec<f64>> {
    let size = n + 1;
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut row = vec![0.0; size];
    for m in 0..size {
        kernel_row(kernel, m, n, &mut row);
        for (j, v) in row.iter().enumerate() {
            a[(j, m)] += v;
        }
        a[(m, m)] -= 1.0;
    }
    for m in 0..size {
        a[(n, m)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(size);
    rhs[n] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Integrity("singular truncated kernel".into()))?;
    Ok(sol.iter().copied().collect())
}

/// Power iteration using the Toeplitz structure of rows `m >= 1`; every few
/// sweeps an Aitken extrapolation is tried and kept only if it shrinks the
/// residual.
fn solve_power(kernel: &TransitionKernel, n: usize) -> (Vec<f64>, usize) {
    let size = n + 1;
    let step = |pi: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for m in 0..size {
            if pi[m] == 0.0 {
                continue;
            }
            let lo = m.saturating_sub(1);
            let mut acc = 0.0;
            for j in lo..n {
                let p = kernel.prob(m, j);
                out[j] += pi[m] * p;
                acc += p;
            }
            out[n] += pi[m] * (1.0 - acc).max(0.0);
        }
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= s);
    };
    let mut x0 = vec![1.0 / size as f64; size];
    let mut x1 = vec![0.0; size];
    let mut x2 = vec![0.0; size];
    let mut iters = 0;
    let residual = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum::<f64>();
    while iters < 200_000 {
        step(&x0, &mut x1);
        step(&x1, &mut x2);
        iters += 2;
        let r = residual(&x1, &x2);
        if r < 1e-15 {
            x0.copy_from_slice(&x2);
            break;
        }
        // Aitken delta-squared per component
        let mut ext: Vec<f64> = (0..size)
            .map(|i| {
                let d2 = x2[i] - 2.0 * x1[i] + x0[i];
                if d2.abs() > 1e-300 {
                    (x2[i] - (x2[i] - x1[i]).powi(2) / d2).max(0.0)
                } else {
                    x2[i]
                }
            })
            .collect();
        let s: f64 = ext.iter().sum();
        ext.iter_mut().for_each(|v| *v /= s);
        let mut probe = vec![0.0; size];
        step(&ext, &mut probe);
        iters += 1;
        if s.is_finite() && residual(&ext, &probe) < r {
            x0 = probe;
        } else {
            x0.copy_from_slice(&x2);
        }
    }
    (x0, iters)
}

/// Stationary orbit law at departures of the chain truncated at `max_orbit`.
pub fn embedded_stationary_truncated(model: &ModelSpec, cfg: &TruncationConfig) -> Result<TruncatedSolution> {
    cfg.validate()?;
    model.validate()?;
    let n = cfg.max_orbit;
    let kernel = TransitionKernel::new(model, n + 1);
    let (mut pi, iterations) = if n < DENSE_LIMIT {
        (solve_dense(&kernel, n)?, 0)
    } else {
        solve_power(&kernel, n)
    };
    for v in pi.iter_mut() {
        if *v < 0.0 && *v > -1e-13 {
            *v = 0.0;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    let boundary_mass = pi[n];
    if !(boundary_mass < cfg.tail_tolerance) {
        return Err(Error::TruncationInsufficient {
            boundary_mass,
            max_orbit: n,
            suggested: suggest(&pi, cfg.tail_tolerance),
        });
    }
    Ok(TruncatedSolution {
        pi,
        boundary_mass,
        max_orbit: n,
        iterations,
    })
}

/// Truncation level at which a geometric fit of the tail drops below `tol`.
fn suggest(pi: &[f64], tol: f64) -> usize {
    let n = pi.len() - 1;
    let (a, b) = (n / 2, (3 * n) / 4);
    let fallback = 2 * n;
    if a == 0 || pi[a] <= 0.0 || pi[b] <= 0.0 || b <= a {
        return fallback;
    }
    let rho = (pi[b] / pi[a]).powf(1.0 / (b - a) as f64);
    if !(rho > 0.0 && rho < 1.0) {
        return fallback;
    }
    let extra = ((tol / pi[b]).ln() / rho.ln()).ceil();
    ((b as f64 + extra.max(0.0)) as usize).max(fallback.min(n + 10)).max(n + 1)
}

/// Smallest tried truncation (doubling from `start`) that certifies, with the
/// whole escalation history. Stops at `cap`.
pub fn certify_truncation(
    model: &ModelSpec,
    start: usize,
    cap: usize,
    tail_tolerance: f64,
) -> (Vec<(usize, f64)>, Option<TruncatedSolution>) {
    let mut history = Vec::new();
    let mut n = start.max(10);
    loop {
        let cfg = TruncationConfig {
            max_orbit: n,
            tail_tolerance,
        };
        match embedded_stationary_truncated(model, &cfg) {
            Ok(sol) => {
                history.push((n, sol.boundary_mass));
                return (history, Some(sol));
            }
            Err(Error::TruncationInsufficient { boundary_mass, .. }) => {
                history.push((n, boundary_mass));
            }
            Err(_) => return (history, None),
        }
        if n >= cap {
            return (history, None);
        }
        n = (2 * n).min(cap);
    }
}
