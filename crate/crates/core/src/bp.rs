//! Two-neighbour bootstrap percolation with synchronous rounds.

use serde::Serialize;

use crate::lattice::{Configuration, LatticeError, Site};

pub const NEVER: Option<u32> = None;

#[derive(Clone, Debug)]
pub struct BpResult {
    /// Final infected configuration (the closure).
    pub closure: Configuration,
    /// Round in which each box index was first infected; `None` for never
    /// (immune sites included).
    pub infection_step: Vec<Option<u32>>,
    pub rounds: u32,
}

impl BpResult {
    pub fn closure_size(&self) -> usize {
        self.closure.infected_count()
    }

    pub fn step(&self, s: Site) -> Option<u32> {
        self.closure.bx().index(s).and_then(|i| self.infection_step[i])
    }

    pub fn in_closure(&self, s: Site) -> bool {
        self.closure.is_infected(s)
    }
}

/// Synchronous fixed point. Only neighbours of sites infected in the previous
/// round are re-examined.
pub fn bp_closure(cfg: &Configuration) -> BpResult {
    let env = cfg.env().clone();
    let bx = &env.bx;
    let n = bx.len();
    let mut cur = cfg.clone();
    let mut step: Vec<Option<u32>> = (0..n).map(|i| cur.infected_idx(i).then_some(0)).collect();
    let mut mark = vec![0u32; n];
    let mut frontier: Vec<usize> = (0..n)
        .filter(|&i| !env.is_immune_idx(i) && !cur.infected_idx(i))
        .collect();
    let mut round = 0u32;
    loop {
        round += 1;
        let newly: Vec<usize> = frontier
            .iter()
            .copied()
            .filter(|&i| !cur.infected_idx(i) && cur.constraint_idx(i))
            .collect();
        if newly.is_empty() {
            round -= 1;
            break;
        }
        for &i in &newly {
            cur.set_idx(i, true);
            step[i] = Some(round);
        }
        frontier.clear();
        for &i in &newly {
            for dir in 0..bx.degree() {
                if let crate::lattice::Nb::In(j) = bx.neighbor(i, dir) {
                    if !env.is_immune_idx(j) && !cur.infected_idx(j) && mark[j] != round {
                        mark[j] = round;
                        frontier.push(j);
                    }
                }
            }
        }
    }
    BpResult { closure: cur, infection_step: step, rounds: round }
}

pub fn bp_tau0(cfg: &Configuration, origin: Site) -> Result<Option<u32>, LatticeError> {
    cfg.state(origin)?;
    Ok(bp_closure(cfg).step(origin))
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct BpSummary {
    pub infected_initial: usize,
    pub closure_size: usize,
    pub tau0: Option<u32>,
    pub rounds: u32,
}

pub fn bp_summary(cfg: &Configuration, origin: Site) -> BpSummary {
    let r = bp_closure(cfg);
    BpSummary {
        infected_initial: cfg.infected_count(),
        closure_size: r.closure_size(),
        tau0: r.step(origin),
        rounds: r.rounds,
    }
}
