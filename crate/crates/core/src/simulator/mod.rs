//! Discrete-event simulation of the retrial queue, independent of every
//! closed form. One replication is a single-threaded state machine with its
//! own random stream; replications run in parallel and are reduced in index
//! order, so results depend only on the seed.

pub mod stats;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ArrivalClass, ModelSpec};
use crate::error::{Error, Result};

pub use stats::{batch_means, replication_estimate, slope, Estimate};

/// Last realized event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventLabel {
    /// Service completion.
    E1,
    /// A primary arrival took the idle server.
    E2,
    /// A retrieved orbit customer took the server.
    E3,
    /// First arrival during a primary-initiated service.
    E4,
    /// Later arrival during a primary-initiated service.
    E5,
    /// First arrival during a retrial-initiated service.
    E6,
    /// Later arrival during a retrial-initiated service.
    E7,
}

impl EventLabel {
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub warmup_departures: u64,
    pub measured_departures: u64,
    pub replications: usize,
    pub seed: u64,
    /// Departure-epoch orbit sizes are tabulated for `0..=pmf_max`.
    #[serde(default = "default_pmf_max")]
    pub pmf_max: usize,
}

fn default_pmf_max() -> usize {
    30
}

const BATCHES: usize = 20;

impl SimConfig {
    pub fn new(measured_departures: u64, replications: usize, seed: u64) -> Self {
        SimConfig {
            warmup_departures: (measured_departures / 10).max(1000),
            measured_departures,
            replications,
            seed,
            pmf_max: default_pmf_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.measured_departures == 0 {
            return Err(Error::Config("replications and measured_departures must be positive".into()));
        }
        Ok(())
    }

    /// Large enough for confidence intervals to be trusted.
    pub fn certified(&self) -> bool {
        self.measured_departures >= 10_000 && self.replications >= 5
    }
}

/// Raw accumulators of one replication.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub time: f64,
    pub area_orbit: f64,
    pub area_system: f64,
    pub time_idle_empty: f64,
    pub time_seeking: f64,
    pub time_e2: f64,
    pub time_e3: f64,
    pub time_e45: f64,
    pub time_e67: f64,
    pub departures: u64,
    pub admissions: u64,
    pub departure_orbit_counts: Vec<u64>,
    pub sojourn_sum: f64,
    pub sojourn_count: u64,
    pub orbit_wait_sum: f64,
    pub orbit_wait_count: u64,
    pub orbit_growth_slope: f64,
    pub label_counts: [u64; 7],
    pub grammar_violations: u64,
    pub admissions_total: u64,
    pub departures_total: u64,
    pub in_system_at_end: u64,
    pub batches: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Idle,
    Seeking { end: f64 },
    Busy { class: ArrivalClass, arrived: bool, end: f64, customer: f64 },
}

fn exp_after<R: Rng>(rng: &mut R, now: f64, rate: f64) -> f64 {
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        let e: f64 = rng.sample(Exp1);
        now + e / rate
    }
}

/// Simulate one replication from an empty system.
pub fn run_replication(model: &ModelSpec, cfg: &SimConfig, rep: usize) -> ReplicationResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    let r = model.rates;
    let rate_of = |phase: &Phase| match phase {
        Phase::Idle | Phase::Seeking { .. } => r.lambda_minus,
        Phase::Busy { class, arrived, .. } => {
            let (first, later) = r.for_class(*class);
            if *arrived {
                later
            } else {
                first
            }
        }
    };

    let mut out = ReplicationResult {
        departure_orbit_counts: vec![0; cfg.pmf_max + 2],
        ..Default::default()
    };
    let mut t = 0.0;
    let mut orbit: VecDeque<f64> = VecDeque::new();
    let mut phase = Phase::Idle;
    let mut next_arrival = exp_after(&mut rng, t, r.lambda_minus);
    let mut last_label = EventLabel::E1;
    let mut orbit_at_last_e1 = 0usize;

    let total = cfg.warmup_departures + cfg.measured_departures;
    let batch_len = (cfg.measured_departures / BATCHES as u64).max(1);
    let mut measuring = cfg.warmup_departures == 0;
    let mut batch = (0.0, 0.0);
    // running sums for the orbit-size regression at departure epochs
    let (mut sx, mut sy, mut sxy, mut sxx, mut sn) = (0.0, 0.0, 0.0, 0.0, 0.0);

    let emit = |label: EventLabel, last: &mut EventLabel, orbit_at_e1: usize, counts: &mut [u64; 7]| -> u64 {
        let ok = match label {
            EventLabel::E1 => matches!(last, EventLabel::E2 | EventLabel::E3 | EventLabel::E4 | EventLabel::E5 | EventLabel::E6 | EventLabel::E7),
            EventLabel::E2 => *last == EventLabel::E1,
            EventLabel::E3 => *last == EventLabel::E1 && orbit_at_e1 > 0,
            EventLabel::E4 => *last == EventLabel::E2,
            EventLabel::E5 => matches!(last, EventLabel::E4 | EventLabel::E5),
            EventLabel::E6 => *last == EventLabel::E3,
            EventLabel::E7 => matches!(last, EventLabel::E6 | EventLabel::E7),
        };
        counts[label.index()] += 1;
        *last = label;
        u64::from(!ok)
    };

    while out.departures_total < total {
        let completion = match phase {
            Phase::Idle => f64::INFINITY,
            Phase::Seeking { end } => end,
            Phase::Busy { end, .. } => end,
        };
        let t_next = next_arrival.min(completion);
        if measuring {
            let dt = t_next - t;
            let n_orbit = orbit.len() as f64;
            out.time += dt;
            out.area_orbit += dt * n_orbit;
            batch.0 += dt * n_orbit;
            batch.1 += dt;
            match phase {
                Phase::Idle => {
                    out.area_system += dt * n_orbit;
                    if orbit.is_empty() {
                        out.time_idle_empty += dt;
                    } else {
                        // only reachable with a zero-length seek
                        out.time_seeking += dt;
                    }
                }
                Phase::Seeking { .. } => {
                    out.area_system += dt * n_orbit;
                    out.time_seeking += dt;
                }
                Phase::Busy { class, arrived, .. } => {
                    out.area_system += dt * (n_orbit + 1.0);
                    match (class, arrived) {
                        (ArrivalClass::Primary, false) => out.time_e2 += dt,
                        (ArrivalClass::Primary, true) => out.time_e45 += dt,
                        (ArrivalClass::Retrial, false) => out.time_e3 += dt,
                        (ArrivalClass::Retrial, true) => out.time_e67 += dt,
                    }
                }
            }
        }
        t = t_next;

        if next_arrival <= completion {
            out.admissions_total += 1;
            if measuring {
                out.admissions += 1;
            }
            match phase {
                Phase::Idle | Phase::Seeking { .. } => {
                    // the arrival pre-empts any seek in progress
                    out.grammar_violations += emit(EventLabel::E2, &mut last_label, orbit_at_last_e1, &mut out.label_counts);
                    let end = t + model.service.sample(&mut rng);
                    phase = Phase::Busy {
                        class: ArrivalClass::Primary,
                        arrived: false,
                        end,
                        customer: t,
                    };
                }
                Phase::Busy { class, arrived, end, customer } => {
                    orbit.push_back(t);
                    let label = match (class, arrived) {
                        (ArrivalClass::Primary, false) => EventLabel::E4,
                        (ArrivalClass::Primary, true) => EventLabel::E5,
                        (ArrivalClass::Retrial, false) => EventLabel::E6,
                        (ArrivalClass::Retrial, true) => EventLabel::E7,
                    };
                    out.grammar_violations += emit(label, &mut last_label, orbit_at_last_e1, &mut out.label_counts);
                    phase = Phase::Busy {
                        class,
                        arrived: true,
                        end,
                        customer,
                    };
                }
            }
            next_arrival = exp_after(&mut rng, t, rate_of(&phase));
            continue;
        }

        match phase {
            Phase::Seeking { .. } => {
                out.grammar_violations += emit(EventLabel::E3, &mut last_label, orbit_at_last_e1, &mut out.label_counts);
                let joined = orbit.pop_front().expect("seeking with an empty orbit");
                if measuring {
                    out.orbit_wait_sum += t - joined;
                    out.orbit_wait_count += 1;
                }
                let end = t + model.service.sample(&mut rng);
                phase = Phase::Busy {
                    class: ArrivalClass::Retrial,
                    arrived: false,
                    end,
                    customer: joined,
                };
            }
            Phase::Busy { customer, .. } => {
                out.grammar_violations += emit(EventLabel::E1, &mut last_label, orbit_at_last_e1, &mut out.label_counts);
                out.departures_total += 1;
                orbit_at_last_e1 = orbit.len();
                if measuring {
                    out.departures += 1;
                    out.sojourn_sum += t - customer;
                    out.sojourn_count += 1;
                    let idx = orbit.len().min(cfg.pmf_max + 1);
                    out.departure_orbit_counts[idx] += 1;
                    let y = orbit.len() as f64;
                    sx += t;
                    sy += y;
                    sxy += t * y;
                    sxx += t * t;
                    sn += 1.0;
                    if out.departures % batch_len == 0 && out.batches.len() < BATCHES {
                        out.batches.push(batch);
                        batch = (0.0, 0.0);
                    }
                } else if out.departures_total == cfg.warmup_departures {
                    measuring = true;
                }
                phase = if orbit.is_empty() {
                    Phase::Idle
                } else {
                    Phase::Seeking {
                        end: t + model.seek.sample(&mut rng),
                    }
                };
            }
            Phase::Idle => unreachable!("idle phase has no completion"),
        }
        next_arrival = exp_after(&mut rng, t, rate_of(&phase));
    }
    if batch.1 > 0.0 && out.batches.len() < BATCHES {
        out.batches.push(batch);
    }
    out.orbit_growth_slope = if sn > 1.0 {
        (sn * sxy - sx * sy) / (sn * sxx - sx * sx)
    } else {
        0.0
    };
    out.in_system_at_end = orbit.len() as u64 + u64::from(matches!(phase, Phase::Busy { .. }));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimates {
    pub ex_timeavg: Estimate,
    pub system_timeavg: Estimate,
    pub ex_departure_epoch_pmf: Vec<Estimate>,
    pub p_idle: Estimate,
    pub p_empty: Estimate,
    /// Idle with a nonempty orbit (seek in progress).
    pub p_seeking: Estimate,
    pub p_e2: Estimate,
    pub p_e3: Estimate,
    pub p_e45: Estimate,
    pub p_e67: Estimate,
    pub departure_rate: Estimate,
    pub admission_rate: Estimate,
    pub mean_sojourn: Estimate,
    pub mean_orbit_wait: Estimate,
    pub orbit_growth_slope: Estimate,
    /// Batch-means interval for the time-average orbit size of replication 0.
    pub ex_batch_means: Estimate,
    pub replications: usize,
    pub measured_departures: u64,
    pub grammar_violations: u64,
    pub flow_balance_ok: bool,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Run all replications and reduce them to interval estimates.
pub fn run(model: &ModelSpec, cfg: &SimConfig) -> Result<SimEstimates> {
    model.validate()?;
    cfg.validate()?;
    let reps: Vec<ReplicationResult> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| run_replication(model, cfg, i))
        .collect();
    Ok(summarize(&reps, cfg))
}

pub fn summarize(reps: &[ReplicationResult], cfg: &SimConfig) -> SimEstimates {
    let est = |f: &dyn Fn(&ReplicationResult) -> f64| {
        let v: Vec<f64> = reps.iter().map(f).collect();
        replication_estimate(&v)
    };
    let pmf = (0..=cfg.pmf_max)
        .map(|n| est(&|r| ratio(r.departure_orbit_counts[n] as f64, r.departures as f64)))
        .collect();
    SimEstimates {
        ex_timeavg: est(&|r| ratio(r.area_orbit, r.time)),
        system_timeavg: est(&|r| ratio(r.area_system, r.time)),
        ex_departure_epoch_pmf: pmf,
        p_idle: est(&|r| ratio(r.time_idle_empty + r.time_seeking, r.time)),
        p_empty: est(&|r| ratio(r.time_idle_empty, r.time)),
        p_seeking: est(&|r| ratio(r.time_seeking, r.time)),
        p_e2: est(&|r| ratio(r.time_e2, r.time)),
        p_e3: est(&|r| ratio(r.time_e3, r.time)),
        p_e45: est(&|r| ratio(r.time_e45, r.time)),
        p_e67: est(&|r| ratio(r.time_e67, r.time)),
        departure_rate: est(&|r| ratio(r.departures as f64, r.time)),
        admission_rate: est(&|r| ratio(r.admissions as f64, r.time)),
        mean_sojourn: est(&|r| ratio(r.sojourn_sum, r.sojourn_count as f64)),
        mean_orbit_wait: est(&|r| ratio(r.orbit_wait_sum, r.orbit_wait_count as f64)),
        orbit_growth_slope: est(&|r| r.orbit_growth_slope),
        ex_batch_means: reps
            .first()
            .map(|r| batch_means(&r.batches))
            .unwrap_or(Estimate {
                mean: f64::NAN,
                half_width: f64::INFINITY,
            }),
        replications: reps.len(),
        measured_departures: cfg.measured_departures,
        grammar_violations: reps.iter().map(|r| r.grammar_violations).sum(),
        flow_balance_ok: reps
            .iter()
            .all(|r| r.admissions_total == r.departures_total + r.in_system_at_end),
    }
}
