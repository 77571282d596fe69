use num_complex::Complex64 as C;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const NEGATIVE_TOLERANCE: f64 = 1e-10;

fn grid_size(n_max: usize) -> usize {
    (4 * n_max.max(2)).next_power_of_two()
}

/// Radius whose `N`-th power is `1e-8`: aliasing from coefficients `N` places
/// further out is damped by that factor, while roundoff in coefficient `n`
/// grows only like `radius^-n <= 1e2` for `n <= N / 4`.
pub fn default_radius(n_max: usize) -> f64 {
    10f64.powf(-8.0 / grid_size(n_max) as f64)
}

/// Coefficients `0..=n_max` of a generating function, by discrete Fourier
/// averaging on the circle `|z| = radius`.
pub fn pgf_to_pmf<F>(f: F, n_max: usize, radius: Option<f64>) -> Result<Vec<f64>>
where
    F: Fn(C) -> C,
{
    let n = grid_size(n_max);
    let r = radius.unwrap_or_else(|| default_radius(n_max));
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius must be in (0,1), got {r}")));
    }
    let mut buf: Vec<C> = (0..n)
        .map(|j| f(C::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / n as f64)))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut out = Vec::with_capacity(n_max + 1);
    let mut scale = 1.0 / n as f64;
    for (idx, v) in buf.iter().take(n_max + 1).enumerate() {
        let c = v.re * scale;
        scale /= r;
        if c < -NEGATIVE_TOLERANCE || !c.is_finite() {
            return Err(Error::NotAPgf { index: idx, value: c });
        }
        out.push(c.max(0.0));
    }
    Ok(out)
}
