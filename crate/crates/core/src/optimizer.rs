//! Admission control: choose joining probabilities `q` maximizing throughput
//! subject to a bound on the mean orbit size, stability, `[0,1]` boxes and
//! optional ordering constraints.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::arbitrary::moments_with;
use crate::analytic::transforms::Constants;
use crate::analytic::{throughput_transform_sum, ModelSpec, RateProfile};
use crate::dists::DistributionSpec;
use crate::error::{Error, Result};

/// Closed-constraint margin for the strict stability inequality.
pub const STRICT_GAP: f64 = 1e-9;
const PENALTY_ROUNDS: usize = 4;
const NM_MAX_EVALS: usize = 600;
const POLISH_TOL: f64 = 1e-6;
const CROSS_CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionProblem {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Service phases.
    #[serde(rename = "M")]
    pub m: u32,
    pub mu: f64,
    /// Seek phases.
    #[serde(rename = "N")]
    pub n: u32,
    pub alpha: f64,
    /// `None` (JSON null) means no bound.
    #[serde(default)]
    pub ex_bound: Option<f64>,
    #[serde(default)]
    pub ordering: bool,
}

impl AdmissionProblem {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("lambda_plus", self.lambda_plus),
            ("lambda_minus", self.lambda_minus),
            ("mu", self.mu),
            ("alpha", self.alpha),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::Config("M and N must be at least 1".into()));
        }
        if let Some(b) = self.ex_bound {
            if !(b >= 0.0) {
                return Err(Error::Config(format!("ex_bound must be nonnegative, got {b}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn bound(&self) -> f64 {
        self.ex_bound.unwrap_or(f64::INFINITY)
    }

    pub fn model(&self, q: [f64; 4]) -> ModelSpec {
        let lp = self.lambda_plus;
        ModelSpec::new(
            RateProfile::new(self.lambda_minus, lp * q[0], lp * q[1], lp * q[2], lp * q[3]),
            DistributionSpec::erlang(self.m, self.mu),
            DistributionSpec::erlang(self.n, self.alpha),
        )
    }

    fn ordering_violation(&self, q: &[f64; 4]) -> f64 {
        if self.ordering {
            (q[1] - q[0]).max(0.0) + (q[3] - q[2]).max(0.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub q: [f64; 4],
    /// Closed-form throughput; only meaningful when `stable`.
    pub th: f64,
    pub ex: Option<f64>,
    pub margin: f64,
    pub stable: bool,
    pub feasible: bool,
}

/// Map `q` to a model and score it. Infeasibility is reported, never raised.
pub fn evaluate(problem: &AdmissionProblem, q: [f64; 4]) -> Evaluation {
    let in_box = q.iter().all(|v| (0.0..=1.0).contains(v));
    let c = Constants::new(&problem.model(q));
    let stable = c.margin >= STRICT_GAP && c.margin.is_finite();
    let ex = if stable { Some(moments_with(&c).ex) } else { None };
    let feasible = in_box
        && stable
        && problem.ordering_violation(&q) == 0.0
        && ex.is_some_and(|e| e.is_finite() && e <= problem.bound() + 1e-9);
    Evaluation {
        q,
        th: c.throughput,
        ex,
        margin: c.margin,
        stable,
        feasible,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissionSolution {
    pub q: [f64; 4],
    #[serde(rename = "TH")]
    pub th: f64,
    #[serde(rename = "EX")]
    pub ex: f64,
    pub feasible: bool,
    pub restarts_used: usize,
    pub seed: u64,
}

fn clamp_box(x: &[f64; 4]) -> [f64; 4] {
    x.map(|v| v.clamp(0.0, 1.0))
}

/// Exterior-penalty objective (minimized). Points outside the box are
/// projected onto it and charged the distance.
fn penalized(problem: &AdmissionProblem, x: &[f64; 4], weight: f64) -> (f64, Evaluation) {
    let q = clamp_box(x);
    let box_excess: f64 = x.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
    let ev = evaluate(problem, q);
    let mut viol = box_excess + problem.ordering_violation(&q);
    let gain = if ev.stable {
        let ex = ev.ex.unwrap_or(f64::INFINITY);
        let b = problem.bound();
        if ex > b {
            viol += if b.is_finite() && ex.is_finite() { (ex - b) / (ex + b) } else { 1.0 };
        }
        ev.th
    } else {
        viol += 1.0 + (STRICT_GAP - ev.margin);
        0.0
    };
    (-gain + weight * viol * viol, ev)
}

struct Incumbent {
    best: Option<Evaluation>,
    evals: usize,
}

impl Incumbent {
    fn offer(&mut self, ev: Evaluation) {
        self.evals += 1;
        if ev.feasible && self.best.is_none_or(|b| ev.th > b.th) {
            self.best = Some(ev);
        }
    }
}

/// Nelder–Mead on `f`, starting from a simplex of size `step` around `x0`.
fn nelder_mead<F: FnMut(&[f64; 4]) -> f64>(mut f: F, x0: [f64; 4], step: f64, max_evals: usize) -> [f64; 4] {
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    let v0 = f(&x0);
    simplex.push((x0, v0));
    for i in 0..4 {
        let mut x = x0;
        x[i] += if x[i] + step <= 1.0 { step } else { -step };
        let v = f(&x);
        simplex.push((x, v));
    }
    let mut evals = 5;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[4].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.abs() < 1e-13 && size < 1e-9 {
            break;
        }
        let mut centroid = [0.0; 4];
        for (x, _) in &simplex[..4] {
            for i in 0..4 {
                centroid[i] += x[i] / 4.0;
            }
        }
        let worst = simplex[4];
        let along = |t: f64| {
            let mut x = [0.0; 4];
            for i in 0..4 {
                x[i] = centroid[i] + t * (worst.0[i] - centroid[i]);
            }
            x
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[4] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[3].1 {
            simplex[4] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                (x, f(&x))
            } else {
                let x = along(0.5);
                (x, f(&x))
            };
            evals += 1;
            if fc < worst.1.min(fr) {
                simplex[4] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for item in simplex.iter_mut().skip(1) {
                    let mut x = item.0;
                    for i in 0..4 {
                        x[i] = best[i] + 0.5 * (x[i] - best[i]);
                    }
                    *item = (x, f(&x));
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].0
}

/// Latin-hypercube sample of `n` points in `[0,1]^4`.
fn latin_hypercube<R: Rng>(rng: &mut R, n: usize) -> Vec<[f64; 4]> {
    let mut pts = vec![[0.0; 4]; n];
    for d in 0..4 {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in pts.iter_mut().zip(strata) {
            p[d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

/// Run one multi-round penalty search from `x0`, tracking the best feasible
/// point seen at any evaluation.
fn search_from(problem: &AdmissionProblem, x0: [f64; 4]) -> Incumbent {
    let mut inc = Incumbent { best: None, evals: 0 };
    let mut x = x0;
    let mut weight = 10.0;
    for round in 0..PENALTY_ROUNDS {
        let step = 0.2 / (1 << round) as f64;
        x = nelder_mead(
            |y| {
                let (v, ev) = penalized(problem, y, weight);
                inc.offer(ev);
                v
            },
            x,
            step,
            NM_MAX_EVALS,
        );
        weight *= 10.0;
    }
    inc
}

/// Feasible-only refinement: Nelder–Mead with an extreme barrier, then
/// coordinate pattern search down to `POLISH_TOL`.
fn polish(problem: &AdmissionProblem, start: Evaluation) -> Evaluation {
    let mut best = start;
    let barrier = |y: &[f64; 4], best: &mut Evaluation| {
        let ev = evaluate(problem, *y);
        if ev.feasible {
            if ev.th > best.th {
                *best = ev;
            }
            -ev.th
        } else {
            f64::INFINITY
        }
    };
    for step in [0.05, 0.005] {
        let x0 = best.q;
        nelder_mead(|y| barrier(y, &mut best), x0, step, NM_MAX_EVALS);
    }
    let mut step = 0.01;
    while step >= POLISH_TOL {
        let mut improved = false;
        for i in 0..4 {
            for dir in [1.0, -1.0] {
                let mut q = best.q;
                q[i] = (q[i] + dir * step).clamp(0.0, 1.0);
                let ev = evaluate(problem, q);
                if ev.feasible && ev.th > best.th {
                    best = ev;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    best
}

/// Deterministic multistart solve. Never returns an infeasible incumbent:
/// if nothing feasible is found the result has `feasible = false`.
pub fn solve(problem: &AdmissionProblem, restarts: usize, seed: u64) -> Result<AdmissionSolution> {
    problem.validate()?;
    if restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![[0.0; 4]];
    starts.extend(latin_hypercube(&mut rng, restarts));
    if problem.ordering {
        for s in starts.iter_mut() {
            if s[1] > s[0] {
                s.swap(0, 1);
            }
            if s[3] > s[2] {
                s.swap(2, 3);
            }
        }
    }
    let found: Vec<Option<Evaluation>> = starts.par_iter().map(|&x| search_from(problem, x).best).collect();
    // reduce in start order so ties resolve the same way on every run
    let mut best: Option<Evaluation> = None;
    for ev in found.into_iter().flatten() {
        if best.is_none_or(|b| ev.th > b.th) {
            best = Some(ev);
        }
    }
    let Some(best) = best else {
        return Ok(AdmissionSolution {
            q: [f64::NAN; 4],
            th: f64::NAN,
            ex: f64::NAN,
            feasible: false,
            restarts_used: restarts,
            seed,
        });
    };
    let best = polish(problem, best);

    // re-validate from scratch and cross-check the throughput
    let fresh = evaluate(problem, best.q);
    if !fresh.feasible {
        return Err(Error::Integrity(format!("incumbent {:?} failed re-evaluation", best.q)));
    }
    let via_transforms = throughput_transform_sum(&problem.model(best.q))?;
    if (via_transforms - fresh.th).abs() > CROSS_CHECK_TOL {
        return Err(Error::Integrity(format!(
            "closed-form throughput {} disagrees with transform sum {}",
            fresh.th, via_transforms
        )));
    }
    Ok(AdmissionSolution {
        q: fresh.q,
        th: fresh.th,
        ex: fresh.ex.unwrap_or(f64::NAN),
        feasible: true,
        restarts_used: restarts,
        seed,
    })
}
