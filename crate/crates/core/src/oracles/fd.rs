/// Central-difference derivative of order 1 or 2, Richardson-extrapolated
/// from steps `h` and `h / 2` (error `O(h^4)`).
pub fn fd_derivative<F: Fn(f64) -> f64>(f: F, x: f64, order: u32, h: f64) -> f64 {
    let d = |h: f64| match order {
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        _ => f64::NAN,
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Five-point backward stencil, for functions only defined to the left of
/// `x` (generating functions at `z = 1`).
pub fn fd_derivative_backward<F: Fn(f64) -> f64>(f: F, x: f64, order: u32, h: f64) -> f64 {
    let v: Vec<f64> = (0..5).map(|i| f(x - i as f64 * h)).collect();
    match order {
        1 => (25.0 * v[0] - 48.0 * v[1] + 36.0 * v[2] - 16.0 * v[3] + 3.0 * v[4]) / (12.0 * h),
        2 => (35.0 * v[0] - 104.0 * v[1] + 114.0 * v[2] - 56.0 * v[3] + 11.0 * v[4]) / (12.0 * h * h),
        _ => f64::NAN,
    }
}
