//! Runs every brick lemma once on a random good family and reports what a
//! replay of each sequence shows.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use super::construct::{ibs_parts, line_by_line};
use super::paths::{constants, family, infect_origin_z3, random_supergood_brickpath, SailBook};
use super::sail::{find_sail, sail_intersection, SailOptions};
use super::{clean_above, infect_from_bottom, pass_to_next_brick, translate_infection, Sail, Z3Error};
use crate::lattice::{Configuration, Site, State};
use crate::moves::{verify_legal, MoveSequence};

#[derive(Clone, Debug, Serialize)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub legal: bool,
    /// The replayed endpoint is exactly the promised configuration (up to the
    /// allowed residual for line-by-line steps).
    pub endpoint: bool,
    pub moves: u64,
    pub hamming: u64,
    pub within_bounds: bool,
}

impl LemmaCheck {
    pub fn ok(&self) -> bool {
        self.legal && self.endpoint && self.within_bounds
    }
}

/// Frozen regression bounds, measured at L = 1, 2 and padded by half.
pub mod bounds {
    /// Moves of one separator crossing, per L².
    pub const IBS_MOVES_L2: u64 = 1_500;
    /// Hamming distance of one separator crossing, per L.
    pub const IBS_HAMMING_L: u64 = 90;
    /// Moves of a brick hand-over, per L².
    pub const PASS_MOVES_L2: u64 = 4_900;
    pub const PASS_HAMMING_L: u64 = 120;
    /// Moves of a whole translation with its cleaning loop, per L².
    pub const TRANSLATE_MOVES_L2: u64 = 81_000;
    pub const TRANSLATE_HAMMING_L: u64 = 435;
}

fn with_infected(eta: &Configuration, xs: impl IntoIterator<Item = Site>) -> Configuration {
    let v: Vec<Site> = xs.into_iter().collect();
    eta.set_state(&v, State::Infected).expect("sites inside the box")
}

fn meet(a: &BTreeSet<Site>, b: &BTreeSet<Site>) -> HashSet<Site> {
    a.intersection(b).copied().collect()
}

fn check(
    name: &'static str,
    start: &Configuration,
    g: &MoveSequence,
    want: &Configuration,
    moves_cap: u64,
    ham_cap: u64,
) -> LemmaCheck {
    let rep = verify_legal(start, g);
    let w = rep.witness;
    LemmaCheck {
        name,
        legal: rep.legal,
        endpoint: rep.endpoint.hamming_distance(want) == 0,
        moves: w.n_moves,
        hamming: w.hamming_budget,
        within_bounds: w.n_moves <= moves_cap && w.hamming_budget <= ham_cap,
    }
}

/// Largest residual of a line-by-line step over every layer of `sail`: the
/// number of sites off `S_{i+1}` where the endpoint differs from `η`.
pub fn line_residuals(eta: &Configuration, sail: &Sail) -> Result<(bool, usize), Z3Error> {
    let mut legal = true;
    let mut worst = 0;
    for i in 0..sail.brick.layers() - 1 {
        let start = with_infected(eta, sail.layer(i));
        let g = line_by_line(eta, sail, i)?;
        let rep = verify_legal(&start, &g);
        legal &= rep.legal;
        let next: HashSet<Site> = sail.layer(i + 1).into_iter().collect();
        if next.iter().any(|&s| !rep.endpoint.is_infected(s)) {
            return Err(Z3Error::Stuck(i));
        }
        let diff = rep.endpoint.hamming_diff(eta).unwrap();
        worst = worst.max(diff.iter().filter(|s| !next.contains(s)).count());
    }
    Ok((legal, worst))
}

/// Everything the battery measured on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct Battery {
    pub checks: Vec<LemmaCheck>,
    pub line_residual: usize,
    pub sail_meet: usize,
    /// Censored and uncensored sweeps agree on the top component.
    pub censor_consistent: bool,
}

impl Battery {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok())
            && self.line_residual <= constants::LINE_RESIDUAL
            && self.sail_meet <= constants::SAIL_MEET_PER_L
            && self.censor_consistent
    }
}

/// One random one-step family at scale `l`, every lemma run on it.
pub fn run_battery(l: i32, q: f64, pi: f64, seed: u64) -> Result<Battery, Z3Error> {
    let (cfg, path) = random_supergood_brickpath(l, 1, q, pi, seed);
    let l2 = (l * l) as u64;
    let lu = l as u64;
    let mut book = SailBook::new(&cfg, SailOptions::default());
    let (rb, cb) = family(path.anchors[0], path.routes[0], l);
    let s0 = find_sail(&cfg, &rb[0], SailOptions { require_bottom_infected: true, ..SailOptions::default() })
        .ok_or(Z3Error::NotSupergood)?;
    let mut rs = vec![s0.clone()];
    for b in &rb[1..] {
        rs.push(book.get(b).ok_or(Z3Error::NotGood(b.anchor))?);
    }
    let mut cs = vec![];
    for b in &cb {
        cs.push(book.get(b).ok_or(Z3Error::NotGood(b.anchor))?);
    }
    let rs: [Sail; 4] = rs.try_into().unwrap();
    let cs: [Sail; 8] = cs.try_into().unwrap();
    let mut checks = vec![];

    let (lbl_legal, residual) = line_residuals(&cfg, &s0)?;
    checks.push(LemmaCheck {
        name: "line_by_line",
        legal: lbl_legal,
        endpoint: residual <= constants::LINE_RESIDUAL,
        moves: 0,
        hamming: 0,
        within_bounds: true,
    });

    // separator: layer 12L of B⁰, crossing up to the part shared with B¹
    let sep: HashSet<Site> = rs[0].brick.layer(12 * l).into_iter().collect();
    let t0 = rs[0].thick();
    let t1 = rs[1].thick();
    let x1: HashSet<Site> = sep.iter().copied().filter(|s| t0.contains(s)).collect();
    let x2 = meet(&t0, &t1);
    let e1 = with_infected(&cfg, x1.iter().copied());
    let e12 = with_infected(&e1, x2.iter().copied());

    let g = infect_from_bottom(&cfg, &s0, &x1)?;
    checks.push(check("infect_from_bottom", &cfg, &g, &e1, bounds::IBS_MOVES_L2 * l2, bounds::IBS_HAMMING_L * lu));

    let parts = ibs_parts(&cfg, &s0, &sep, &x1, &x2)?;
    checks.push(check(
        "infect_beyond_separator",
        &e1,
        &parts.full,
        &e12,
        bounds::IBS_MOVES_L2 * l2,
        bounds::IBS_HAMMING_L * lu,
    ));
    let censor_consistent = {
        let a = crate::moves::apply(&parts.sweep_start, &parts.sweep).map_err(|_| Z3Error::Stuck(-1))?;
        let b = crate::moves::apply(&e1, &parts.forward).map_err(|_| Z3Error::Stuck(-1))?;
        let agree = |x: &Configuration, y: &Configuration| parts.upper.iter().all(|&s| x.is_infected(s) == y.is_infected(s));
        agree(&parts.sweep_start, &e1) && agree(&a, &b) && verify_legal(&e1, &parts.forward).legal
    };

    let g = clean_above(&cfg, &s0, &sep, &x1, &x2)?;
    checks.push(check("clean_above", &e12, &g, &e1, bounds::IBS_MOVES_L2 * l2, bounds::IBS_HAMMING_L * lu));

    let t2 = rs[2].thick();
    let xt = meet(&t1, &t2);
    let g = pass_to_next_brick(&cfg, &s0, &rs[1], &sep, &x1, &xt)?;
    let want = with_infected(&e1, xt.iter().copied());
    checks.push(check(
        "pass_to_next_brick",
        &e1,
        &g,
        &want,
        bounds::PASS_MOVES_L2 * l2,
        bounds::PASS_HAMMING_L * lu,
    ));

    let tr = translate_infection(&cfg, &rs, &cs, &sep, &x1)?;
    let want = with_infected(&cfg, tr.seed.iter().copied());
    checks.push(check(
        "translate_infection",
        &e1,
        &tr.seq,
        &want,
        bounds::TRANSLATE_MOVES_L2 * l2,
        bounds::TRANSLATE_HAMMING_L * lu,
    ));

    let g = infect_origin_z3(&cfg, &path)?;
    let rep = verify_legal(&cfg, &g);
    let w = rep.witness;
    checks.push(LemmaCheck {
        name: "infect_origin_z3",
        legal: rep.legal,
        endpoint: rep.endpoint.is_infected(Site::ORIGIN),
        moves: w.n_moves,
        hamming: w.hamming_budget,
        within_bounds: w.n_moves <= constants::MOVES_PER_STEP_L2 * l2 * path.routes.len() as u64
            && w.hamming_budget <= constants::HAMMING_PER_L * lu,
    });

    let mut meet_max = 0;
    for pair in rs.windows(2) {
        meet_max = meet_max.max(sail_intersection(&pair[0], &pair[1])?.len());
    }
    Ok(Battery {
        checks,
        line_residual: residual,
        sail_meet: meet_max.div_ceil(l as usize),
        censor_consistent,
    })
}
