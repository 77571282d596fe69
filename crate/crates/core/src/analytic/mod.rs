//! Closed-form stationary analysis of the retrial queue with event-dependent
//! arrivals: arrival-count laws, the embedded chain at departures, the
//! arbitrary-epoch transforms and every performance measure derived from them.

pub(crate) mod arbitrary;
mod counts;
mod embedded;
mod report;
pub(crate) mod transforms;
mod two_arg;

use serde::{Deserialize, Serialize};

use crate::dists::DistributionSpec;
use crate::error::{Error, Result};

pub use arbitrary::{
    arbitrary_epoch_transforms, asymptotic_bounds, instant_seek_distance, orbit_pmf, moments_and_throughput, orbit_pgf,
    p00_t_terms, server_state_probs, throughput_transform_sum, total_system_pgf,
    ArbitraryEpoch, Moments, PTerms, ServerStateProbs,
};
pub use counts::{
    arrival_count_pmf, arrival_count_pmf_vec, arrivals_during_service_pmf,
    arrivals_during_service_vec,
};
pub use embedded::{
    a_k, a_k_derivatives, a_k_uncorrected, chi1, embedded_pgf, embedded_pi0, stability_compact,
    stability_display, stability_margin, transition_prob, StabilityDisplay, TransitionKernel,
};
pub use report::{analyze, typo_ledger, StationaryReport, TypoResolution};
pub use transforms::Constants;
pub use two_arg::{transform_identity_residuals, IdentityResidual, TwoArgTransforms};

/// The five event-dependent Poisson rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    /// After a service completion.
    pub lambda_minus: f64,
    /// First arrival during a service begun by a primary customer.
    pub lambda_e: f64,
    /// Later arrivals during a primary-initiated service.
    pub lambda_e_plus: f64,
    /// First arrival during a service begun by a retrial customer.
    pub lambda_r: f64,
    /// Later arrivals during a retrial-initiated service.
    pub lambda_r_plus: f64,
}

impl RateProfile {
    pub fn new(lambda_minus: f64, lambda_e: f64, lambda_e_plus: f64, lambda_r: f64, lambda_r_plus: f64) -> Self {
        RateProfile {
            lambda_minus,
            lambda_e,
            lambda_e_plus,
            lambda_r,
            lambda_r_plus,
        }
    }

    /// Every rate equal to `lambda`: the classical constant-retrial model.
    pub fn event_independent(lambda: f64) -> Self {
        Self::new(lambda, lambda, lambda, lambda, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_minus", self.lambda_minus),
            ("lambda_e", self.lambda_e),
            ("lambda_e_plus", self.lambda_e_plus),
            ("lambda_r", self.lambda_r),
            ("lambda_r_plus", self.lambda_r_plus),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidRates(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.lambda_minus <= 0.0 {
            return Err(Error::InvalidRates(
                "lambda_minus must be > 0, otherwise an empty system never restarts".into(),
            ));
        }
        Ok(())
    }

    /// `(first, subsequent)` arrival rates during a class-`k` service.
    pub fn for_class(&self, k: ArrivalClass) -> (f64, f64) {
        match k {
            ArrivalClass::Primary => (self.lambda_e, self.lambda_e_plus),
            ArrivalClass::Retrial => (self.lambda_r, self.lambda_r_plus),
        }
    }
}

/// Who started the current service: a primary arrival (`e`) or a customer
/// retrieved from the orbit (`r`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArrivalClass {
    #[serde(rename = "e")]
    Primary,
    #[serde(rename = "r")]
    Retrial,
}

impl ArrivalClass {
    pub const BOTH: [ArrivalClass; 2] = [ArrivalClass::Primary, ArrivalClass::Retrial];

    pub fn tag(self) -> &'static str {
        match self {
            ArrivalClass::Primary => "e",
            ArrivalClass::Retrial => "r",
        }
    }
}

/// A full model instance: rates, service law `B` and seek law `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub rates: RateProfile,
    pub service: DistributionSpec,
    pub seek: DistributionSpec,
}

impl ModelSpec {
    pub fn new(rates: RateProfile, service: DistributionSpec, seek: DistributionSpec) -> Self {
        ModelSpec { rates, service, seek }
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.service.validate()?;
        self.seek.validate()
    }

    /// Parse and validate a model JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelSpec =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("model JSON: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    /// Same rates and service law with a different seek law.
    pub fn with_seek(&self, seek: DistributionSpec) -> Self {
        ModelSpec {
            seek,
            ..self.clone()
        }
    }

    /// Seek wins the race against the next primary arrival with this probability.
    pub fn alpha_star(&self) -> f64 {
        self.seek.lst(self.rates.lambda_minus).unwrap_or(f64::NAN)
    }
}
