//! Continuous-time FA2f dynamics by uniformization.
//!
//! Rings arrive at total rate |S| (number of susceptible sites) and pick a
//! susceptible site uniformly. A ring at a constrained site resamples it:
//! infected with probability q, healthy otherwise.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::lattice::{sample_configuration_with, stream, stream_rng, Configuration, Environment, ModelParams, Site, State};
use crate::moves::{Move, MoveSequence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HittingResult {
    /// `None` is TIMEOUT.
    pub hit_time: Option<f64>,
    pub occupation_time_e: f64,
    /// Number of state changes.
    pub events_processed: u64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<(f64, Site, State)>,
    pub final_time: f64,
    pub result: HittingResult,
}

impl Trajectory {
    /// The state changes as a move sequence, for replay through the verifier.
    pub fn to_moves(&self) -> MoveSequence {
        MoveSequence::from_moves(self.events.iter().map(|&(_, s, a)| Move::new(s, a)).collect())
    }
}

struct Run<'a> {
    cfg: Configuration,
    rng: &'a mut ChaCha8Rng,
    log: Option<Vec<(f64, Site, State)>>,
}

fn run<S, E>(mut r: Run<'_>, q: f64, stop: S, horizon: f64, observer: Option<E>) -> (HittingResult, Run<'_>, f64)
where
    S: Fn(&Configuration) -> bool,
    E: Fn(&Configuration) -> bool,
{
    let obs = |c: &Configuration| observer.as_ref().is_some_and(|e| e(c));
    if stop(&r.cfg) {
        return (HittingResult { hit_time: Some(0.0), occupation_time_e: 0.0, events_processed: 0 }, r, 0.0);
    }
    let sites = r.cfg.env().susceptible_indices();
    let mut in_e = obs(&r.cfg);
    let blocked = sites.iter().all(|&i| !r.cfg.constraint_idx(i));
    if sites.is_empty() || blocked {
        let occ = if in_e { horizon } else { 0.0 };
        return (HittingResult { hit_time: None, occupation_time_e: occ, events_processed: 0 }, r, horizon);
    }
    let exp = Exp::new(sites.len() as f64).unwrap();
    let mut t = 0.0;
    let mut last = 0.0;
    let mut occ = 0.0;
    let mut events = 0u64;
    loop {
        t += exp.sample(r.rng);
        if t >= horizon {
            if in_e {
                occ += horizon - last;
            }
            return (HittingResult { hit_time: None, occupation_time_e: occ, events_processed: events }, r, horizon);
        }
        let i = sites[r.rng.random_range(0..sites.len())];
        let u: f64 = r.rng.random();
        if !r.cfg.constraint_idx(i) {
            continue;
        }
        let new = u < q;
        if new == r.cfg.infected_idx(i) {
            continue;
        }
        r.cfg.set_idx(i, new);
        events += 1;
        if let Some(log) = r.log.as_mut() {
            log.push((t, r.cfg.bx().site(i), State::from_infected(new)));
        }
        if in_e {
            occ += t - last;
        }
        last = t;
        if stop(&r.cfg) {
            return (HittingResult { hit_time: Some(t), occupation_time_e: occ, events_processed: events }, r, t);
        }
        in_e = obs(&r.cfg);
    }
}

type Pred<'a> = &'a dyn Fn(&Configuration) -> bool;

/// One run from `cfg0` until `stop` holds or `horizon` is reached.
pub fn simulate(
    cfg0: &Configuration,
    params: &ModelParams,
    stop: Pred<'_>,
    horizon: f64,
    seed: u64,
    observer: Option<Pred<'_>>,
) -> HittingResult {
    let mut rng = stream_rng(seed, stream::DYNAMICS);
    simulate_with(cfg0, params.q, stop, horizon, &mut rng, observer).0
}

/// As [`simulate`] with an explicit generator; also returns the final configuration.
pub fn simulate_with(
    cfg0: &Configuration,
    q: f64,
    stop: Pred<'_>,
    horizon: f64,
    rng: &mut ChaCha8Rng,
    observer: Option<Pred<'_>>,
) -> (HittingResult, Configuration) {
    let r = Run { cfg: cfg0.clone(), rng, log: None };
    let (res, r, _) = run(r, q, stop, horizon, observer);
    (res, r.cfg)
}

/// Full event log of a run.
pub fn simulate_trajectory(cfg0: &Configuration, params: &ModelParams, stop: Pred<'_>, horizon: f64, seed: u64) -> Trajectory {
    let mut rng = stream_rng(seed, stream::DYNAMICS);
    let r = Run { cfg: cfg0.clone(), rng: &mut rng, log: Some(vec![]) };
    let (result, r, tf) = run(r, params.q, stop, horizon, None::<Pred<'_>>);
    Trajectory { initial: cfg0.clone(), events: r.log.unwrap(), final_time: tf, result }
}

/// Time average of the infected density over `[0, horizon]`.
pub fn time_averaged_density(cfg0: &Configuration, q: f64, horizon: f64, rng: &mut ChaCha8Rng) -> f64 {
    let sites = cfg0.env().susceptible_indices();
    if sites.is_empty() {
        return 0.0;
    }
    let n = sites.len() as f64;
    let exp = Exp::new(n).unwrap();
    let mut cfg = cfg0.clone();
    let mut count = cfg.infected_count() as f64;
    let (mut t, mut last, mut integral) = (0.0, 0.0, 0.0);
    loop {
        t += exp.sample(rng);
        if t >= horizon {
            integral += count * (horizon - last);
            return integral / (n * horizon);
        }
        let i = sites[rng.random_range(0..sites.len())];
        let u: f64 = rng.random();
        if !cfg.constraint_idx(i) {
            continue;
        }
        let new = u < q;
        if new != cfg.infected_idx(i) {
            integral += count * (t - last);
            last = t;
            count += if new { 1.0 } else { -1.0 };
            cfg.set_idx(i, new);
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Tau0Stats {
    pub replicas: usize,
    /// Per replica, `None` for TIMEOUT.
    pub samples: Vec<Option<f64>>,
    /// Mean over replicas that hit; `None` if none did.
    pub mean: Option<f64>,
    /// Quantiles with TIMEOUT ordered as +∞ (`None`).
    pub median: Option<f64>,
    pub quantiles: Vec<(f64, Option<f64>)>,
    pub timeout_fraction: f64,
    pub origin: Site,
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Inverse empirical CDF at level `p`, TIMEOUT sorting last.
pub fn quantile(sorted: &[Option<f64>], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[k]
}

fn sort_samples(s: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut v = s.to_vec();
    v.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    v
}

pub fn summarize(samples: Vec<Option<f64>>, origin: Site) -> Tau0Stats {
    let sorted = sort_samples(&samples);
    let hits: Vec<f64> = samples.iter().flatten().copied().collect();
    let n = samples.len();
    Tau0Stats {
        replicas: n,
        mean: (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64),
        median: quantile(&sorted, 0.5),
        quantiles: QUANTILE_LEVELS.iter().map(|&p| (p, quantile(&sorted, p))).collect(),
        timeout_fraction: (n - hits.len()) as f64 / n.max(1) as f64,
        samples,
        origin,
    }
}

/// Independent replicas, each from a fresh product-measure start, stopping when
/// the origin is infected. Replicas run in parallel and are merged by index.
pub fn estimate_tau0(env: &Arc<Environment>, params: &ModelParams, replicas: usize, horizon: f64, seed: u64) -> Tau0Stats {
    let origin = env.bx.origin();
    let oi = env.bx.index(origin).unwrap();
    let samples: Vec<Option<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            if env.is_immune_idx(oi) {
                return None;
            }
            let mut crng = stream_rng(seed, stream::REPLICA_BASE + stream::REPLICA_CFG + r);
            let cfg = sample_configuration_with(params.q, env, &mut crng);
            let mut drng = stream_rng(seed, stream::REPLICA_BASE + r);
            let stop = |c: &Configuration| c.infected_idx(oi);
            simulate_with(&cfg, params.q, &stop, horizon, &mut drng, None).0.hit_time
        })
        .collect();
    summarize(samples, origin)
}
