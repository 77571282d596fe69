use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Point estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn contains(&self, x: f64, widths: f64) -> bool {
        (self.mean - x).abs() <= widths * self.half_width
    }
}

fn t_quantile(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY)
}

/// Student-t interval over independent replicate values.
pub fn replication_estimate(values: &[f64]) -> Estimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Estimate {
            mean,
            half_width: f64::INFINITY,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate {
        mean,
        half_width: t_quantile(n - 1) * (var / n as f64).sqrt(),
    }
}

/// Batch-means interval for one long run, from per-batch `(numerator,
/// denominator)` pairs (e.g. area and elapsed time) so batches of unequal
/// length are weighted correctly.
pub fn batch_means(batches: &[(f64, f64)]) -> Estimate {
    let ratios: Vec<f64> = batches.iter().map(|(a, t)| a / t).collect();
    let total_a: f64 = batches.iter().map(|b| b.0).sum();
    let total_t: f64 = batches.iter().map(|b| b.1).sum();
    let mut est = replication_estimate(&ratios);
    est.mean = total_a / total_t;
    est
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_interval_known_values() {
        let e = replication_estimate(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(e.mean, 3.0);
        // t_{0.975,4} = 2.776445, s = sqrt(2.5)
        assert!((e.half_width - 2.776_445 * (2.5f64 / 5.0).sqrt()).abs() < 1e-5);
        assert!(replication_estimate(&[1.0]).half_width.is_infinite());
    }

    #[test]
    fn batch_means_weights_by_length() {
        let e = batch_means(&[(2.0, 1.0), (6.0, 3.0), (4.0, 2.0)]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.half_width, 0.0);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!((slope(&x, &y) - 2.0).abs() < 1e-15);
    }
}
