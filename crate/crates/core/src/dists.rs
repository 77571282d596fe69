//! Service and seek time laws.
//!
//! The analysis only ever needs three things from a nonnegative time `T`:
//! its Laplace-Stieltjes transform `E[exp(-sT)]` (on the closed right half
//! plane, including complex arguments), its raw moments, and i.i.d. draws for
//! the simulator. The family is closed so that every transform is exact.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistributionSpec {
    Exponential {
        rate: f64,
    },
    Erlang {
        phases: u32,
        rate: f64,
    },
    Deterministic {
        value: f64,
    },
    #[serde(rename = "hyperexp")]
    HyperExponential {
        weights: Vec<f64>,
        rates: Vec<f64>,
    },
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Self {
        DistributionSpec::Exponential { rate }
    }

    pub fn erlang(phases: u32, rate: f64) -> Self {
        DistributionSpec::Erlang { phases, rate }
    }

    pub fn deterministic(value: f64) -> Self {
        DistributionSpec::Deterministic { value }
    }

    pub fn hyperexponential(weights: Vec<f64>, rates: Vec<f64>) -> Self {
        DistributionSpec::HyperExponential { weights, rates }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match self {
            DistributionSpec::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
            }
            DistributionSpec::Erlang { phases, rate } => {
                if *phases == 0 {
                    return bad("erlang needs at least one phase".into());
                }
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("erlang phase rate must be positive, got {rate}"));
                }
            }
            DistributionSpec::Deterministic { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return bad(format!("deterministic value must be >= 0, got {value}"));
                }
            }
            DistributionSpec::HyperExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return bad("hyperexp needs matching, non-empty weights and rates".into());
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return bad("hyperexp weights must be nonnegative".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("hyperexp weights sum to {total}, not 1"));
                }
                if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return bad("hyperexp rates must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// `E[exp(-sT)]` for real `s >= 0`.
    pub fn lst(&self, s: f64) -> Result<f64> {
        if s.is_nan() || s < 0.0 {
            return Err(Error::Domain(format!("LST argument must be >= 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(1.0);
        }
        Ok(self.lst_c(Complex64::new(s, 0.0)).re)
    }

    /// Transform at a complex argument. Callers keep `Re(s)` above the
    /// leftmost pole; no domain check is made here.
    pub fn lst_c(&self, s: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match self {
            DistributionSpec::Exponential { rate } => *rate / (*rate + s),
            DistributionSpec::Erlang { phases, rate } => (*rate / (*rate + s)).powu(*phases),
            DistributionSpec::Deterministic { value } => {
                if *value == 0.0 {
                    one
                } else {
                    (-s * *value).exp()
                }
            }
            DistributionSpec::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| *w * *r / (*r + s))
                .sum(),
        }
    }

    /// k-th derivative of the transform at `s`.
    pub fn lst_deriv_c(&self, s: Complex64, k: u32) -> Complex64 {
        if k == 0 {
            return self.lst_c(s);
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        match self {
            DistributionSpec::Exponential { rate } => {
                let fact: f64 = (1..=k).map(f64::from).product();
                sign * fact * *rate / (*rate + s).powu(k + 1)
            }
            DistributionSpec::Erlang { phases, rate } => {
                let rising: f64 = (0..k).map(|j| f64::from(phases + j)).product();
                let base = *rate / (*rate + s);
                sign * rising * base.powu(*phases) / (*rate + s).powu(k)
            }
            DistributionSpec::Deterministic { value } => {
                if *value == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    (-*value).powi(k as i32) * (-s * *value).exp()
                }
            }
            DistributionSpec::HyperExponential { weights, rates } => {
                let fact: f64 = (1..=k).map(f64::from).product();
                weights
                    .iter()
                    .zip(rates)
                    .map(|(w, r)| sign * fact * *w * *r / (*r + s).powu(k + 1))
                    .sum()
            }
        }
    }

    /// Raw moment `E[T^k]` of any order.
    pub fn raw_moment(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self {
            DistributionSpec::Exponential { rate } => {
                (1..=k).map(f64::from).product::<f64>() / rate.powi(k as i32)
            }
            DistributionSpec::Erlang { phases, rate } => {
                (0..k).map(|j| f64::from(phases + j)).product::<f64>() / rate.powi(k as i32)
            }
            DistributionSpec::Deterministic { value } => value.powi(k as i32),
            DistributionSpec::HyperExponential { weights, rates } => {
                let fact: f64 = (1..=k).map(f64::from).product();
                weights
                    .iter()
                    .zip(rates)
                    .map(|(w, r)| w * fact / r.powi(k as i32))
                    .sum()
            }
        }
    }

    pub fn moment(&self, order: u32) -> Result<f64> {
        match order {
            1 | 2 => Ok(self.raw_moment(order)),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    pub fn second_moment(&self) -> f64 {
        self.raw_moment(2)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DistributionSpec::Deterministic { value } if *value == 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => Exp::new(*rate).unwrap().sample(rng),
            DistributionSpec::Erlang { phases, rate } => {
                if *phases == 1 {
                    Exp::new(*rate).unwrap().sample(rng)
                } else {
                    Gamma::new(f64::from(*phases), 1.0 / rate)
                        .unwrap()
                        .sample(rng)
                }
            }
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::HyperExponential { weights, rates } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = rates.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                Exp::new(rates[pick]).unwrap().sample(rng)
            }
        }
    }

    /// Density for the absolutely continuous kinds; zero for a point mass.
    pub fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            DistributionSpec::Exponential { rate } => rate * (-rate * t).exp(),
            DistributionSpec::Erlang { phases, rate } => {
                let m = f64::from(*phases);
                if t == 0.0 {
                    return if *phases == 1 { *rate } else { 0.0 };
                }
                (m * rate.ln() + (m - 1.0) * t.ln() - rate * t - ln_gamma(m)).exp()
            }
            DistributionSpec::Deterministic { .. } => 0.0,
            DistributionSpec::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * r * (-r * t).exp())
                .sum(),
        }
    }

    /// `P(T > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match self {
            DistributionSpec::Exponential { rate } => (-rate * t).exp(),
            DistributionSpec::Erlang { phases, rate } => {
                if t == 0.0 {
                    1.0
                } else {
                    gamma_ur(f64::from(*phases), rate * t)
                }
            }
            DistributionSpec::Deterministic { value } => {
                if t < *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * (-r * t).exp())
                .sum(),
        }
    }

    /// Smallest convenient `t` with `P(T > t) < eps`.
    pub fn tail_time(&self, eps: f64) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => (1.0 / eps).ln() / rate,
            DistributionSpec::Deterministic { value } => *value,
            _ => {
                let mut hi = self.mean().max(1e-12);
                while self.survival(hi) >= eps {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.survival(mid) >= eps {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-12 * hi {
                        break;
                    }
                }
                hi
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::exponential(2.0),
            DistributionSpec::erlang(4, 1.5),
            DistributionSpec::erlang(1, 0.7),
            DistributionSpec::deterministic(2.0),
            DistributionSpec::deterministic(0.0),
            DistributionSpec::hyperexponential(vec![0.3, 0.7], vec![0.5, 4.0]),
        ]
    }

    #[test]
    fn lst_examples() {
        let d = DistributionSpec::erlang(4, 1.5);
        assert_relative_eq!(d.lst(0.1094).unwrap(), (1.5f64 / 1.6094).powi(4), epsilon = 1e-15);
        assert_relative_eq!(d.lst(0.1094).unwrap(), 0.754_587, epsilon = 1e-6);
        for d in corpus() {
            assert_eq!(d.lst(0.0).unwrap(), 1.0);
        }
        let det = DistributionSpec::deterministic(2.0);
        assert_relative_eq!(det.lst(0.5).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn negative_argument_is_a_domain_error() {
        let d = DistributionSpec::exponential(1.0);
        assert!(matches!(d.lst(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn moment_examples() {
        assert_relative_eq!(DistributionSpec::erlang(4, 1.5).moment(1).unwrap(), 4.0 / 1.5);
        assert_relative_eq!(DistributionSpec::exponential(2.0).moment(2).unwrap(), 0.5);
        assert_relative_eq!(DistributionSpec::deterministic(3.0).moment(2).unwrap(), 9.0);
        assert_eq!(
            DistributionSpec::exponential(2.0).moment(3),
            Err(Error::UnsupportedOrder(3))
        );
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(DistributionSpec::exponential(0.0).validate().is_err());
        assert!(DistributionSpec::erlang(0, 1.0).validate().is_err());
        assert!(DistributionSpec::deterministic(-1.0).validate().is_err());
        assert!(DistributionSpec::hyperexponential(vec![0.5, 0.4], vec![1.0, 2.0])
            .validate()
            .is_err());
        for d in corpus() {
            d.validate().unwrap();
        }
    }

    #[test]
    fn derivatives_at_zero_match_moments() {
        // Central differences with h = 1e-5 on the real axis.
        let h = 1e-5;
        for d in corpus() {
            let f = |s: f64| d.lst_c(Complex64::new(s, 0.0)).re;
            let d1 = (f(h) - f(-h)) / (2.0 * h);
            let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
            let m1 = d.moment(1).unwrap();
            let m2 = d.moment(2).unwrap();
            if m1 == 0.0 {
                assert!(d1.abs() < 1e-9 && d2.abs() < 1e-3);
                continue;
            }
            assert_relative_eq!(-d1, m1, max_relative = 1e-6);
            assert_relative_eq!(d2, m2, max_relative = 1e-4);
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let h = 1e-4;
        for d in corpus() {
            for &s in &[0.01, 0.3, 1.0, 10.0] {
                for k in 1..4 {
                    let f = |x: f64| d.lst_deriv_c(Complex64::new(x, 0.0), k - 1).re;
                    let fd = (f(s + h) - f(s - h)) / (2.0 * h);
                    let exact = d.lst_deriv_c(Complex64::new(s, 0.0), k).re;
                    assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{d:?} s={s} k={k}");
                }
            }
        }
    }

    #[test]
    fn lst_is_decreasing_and_log_convex() {
        let grid: Vec<f64> = (1..=1000).map(|i| 0.01 * i as f64).collect();
        for d in corpus().into_iter().filter(|d| !d.is_zero()) {
            let vals: Vec<f64> = grid.iter().map(|&s| d.lst(s).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]));
            for w in vals.windows(3) {
                // log f(mid) <= (log f(lo) + log f(hi)) / 2 on an even grid
                assert!(2.0 * w[1].ln() <= w[0].ln() + w[2].ln() + 1e-12);
            }
        }
    }

    #[test]
    fn sampling_moments_converge() {
        let n = 1_000_000;
        for d in corpus() {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for _ in 0..n {
                let x = d.sample(&mut rng);
                assert!(x >= 0.0);
                s1 += x;
                s2 += x * x;
            }
            let mean = s1 / n as f64;
            let sq = s2 / n as f64;
            let m1 = d.moment(1).unwrap();
            let m2 = d.moment(2).unwrap();
            let se1 = ((m2 - m1 * m1).max(0.0) / n as f64).sqrt();
            let se2 = ((d.raw_moment(4) - m2 * m2).max(0.0) / n as f64).sqrt();
            assert!((mean - m1).abs() <= 4.0 * se1 + 1e-12, "{d:?}: {mean} vs {m1}");
            assert!((sq - m2).abs() <= 4.0 * se2 + 1e-12, "{d:?}: {sq} vs {m2}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = DistributionSpec::exponential(1.0);
        let mean = (0..n).map(|_| e.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01);
        let erl = DistributionSpec::erlang(4, 1.5);
        let mean = (0..n).map(|_| erl.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 4.0 / 1.5).abs() < 0.02);
        assert_eq!(DistributionSpec::deterministic(2.0).sample(&mut rng), 2.0);
    }

    #[test]
    fn pdf_integrates_to_one_and_tail_time_is_tight() {
        for d in corpus().into_iter().filter(|d| !matches!(d, DistributionSpec::Deterministic { .. })) {
            let t_max = d.tail_time(1e-14);
            assert!(d.survival(t_max) < 1e-14);
            let n = 200_000;
            let h = t_max / n as f64;
            // composite Simpson
            let mut acc = d.pdf(0.0) + d.pdf(t_max);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * d.pdf(i as f64 * h);
            }
            assert_relative_eq!(acc * h / 3.0, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn json_fragments_round_trip() {
        let d: DistributionSpec = serde_json::from_str(r#"{"kind":"erlang","phases":4,"rate":1.5}"#).unwrap();
        assert_eq!(d, DistributionSpec::erlang(4, 1.5));
        let d: DistributionSpec = serde_json::from_str(r#"{"kind":"exponential","rate":2.0}"#).unwrap();
        assert_eq!(d, DistributionSpec::exponential(2.0));
        let d: DistributionSpec = serde_json::from_str(r#"{"kind":"deterministic","value":0.0}"#).unwrap();
        assert!(d.is_zero());
        let d: DistributionSpec =
            serde_json::from_str(r#"{"kind":"hyperexp","weights":[0.5,0.5],"rates":[1.0,3.0]}"#).unwrap();
        assert_eq!(serde_json::to_value(&d).unwrap()["kind"], "hyperexp");
    }
}
