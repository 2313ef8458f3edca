//! Paths of bricks, their search, and the sequence that infects the origin.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::construct::{infect_beyond_separator, infect_from_bottom, translate_infection};
use super::geometry::{base_brick, cleaning_route, family_bounds, translation_route, Brick, Route};
use super::sail::{find_sail, Sail, SailOptions};
use super::Z3Error;
use crate::lattice::{stream, stream_rng, Boundary, Configuration, Environment, LatticeBox, Site, State};
use crate::moves::{verify_legal, MoveSequence, PathWitness, Window};

/// Regression constants, measured at L ∈ {1, 2} over the test battery and
/// frozen at 1.5× the observed maxima (rounded up).
pub mod constants {
    /// Window half-width around the active move, in units of L.
    pub const WINDOW_RADIUS: i32 = 72;
    /// Hamming budget of a full origin sequence, in units of L.
    pub const HAMMING_PER_L: u64 = 450;
    /// Moves per translation step, in units of L².
    pub const MOVES_PER_STEP_L2: u64 = 83_000;
    /// Residual of one line-by-line step.
    pub const LINE_RESIDUAL: usize = 20;
    /// `|S ∩ S'|` for a pointed pair, in units of L.
    pub const SAIL_MEET_PER_L: usize = 60;
}

/// Offset of the designated sail site from the anchor corner of B⁰.
pub fn origin_offset(l: i32) -> Site {
    Site::new3(3 * l - 2, 12 * l - 5, 16 * l)
}

/// Translation of B⁰ whose sail, if good, passes through the origin.
pub fn terminal_anchor(l: i32) -> Site {
    let o = origin_offset(l);
    Site::new3(-o.x(), -o.y(), -o.z())
}

/// Sails by brick, searched once.
pub struct SailBook<'a> {
    cfg: &'a Configuration,
    opts: SailOptions,
    cache: HashMap<(Site, Site), Option<Sail>>,
}

impl<'a> SailBook<'a> {
    pub fn new(cfg: &'a Configuration, opts: SailOptions) -> SailBook<'a> {
        SailBook { cfg, opts, cache: HashMap::new() }
    }

    pub fn get(&mut self, b: &Brick) -> Option<Sail> {
        let (cfg, opts) = (self.cfg, self.opts);
        self.cache.entry((b.anchor, b.flag)).or_insert_with(|| find_sail(cfg, b, opts)).clone()
    }

    /// Every brick a step from `z` along `route` needs, in order.
    pub fn family_good(&mut self, z: Site, route: Route, l: i32) -> bool {
        let (r, c) = family(z, route, l);
        r.iter().chain(c.iter()).all(|b| self.get(b).is_some())
    }
}

pub fn family(z: Site, route: Route, l: i32) -> ([Brick; 4], [Brick; 8]) {
    (translation_route(route, l).map(|b| b.translate(z)), cleaning_route(l).map(|b| b.translate(z)))
}

/// `anchors[j]` translates B⁰; `routes[j]` leads from `anchors[j]` to
/// `anchors[j + 1]`; the last anchor is the terminal one. The brick at
/// `supergood` has a sail with a fully infected bottom layer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrickPath {
    pub l: i32,
    pub anchors: Vec<Site>,
    pub routes: Vec<Route>,
    pub supergood: usize,
}

impl BrickPath {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn is_consistent(&self) -> bool {
        !self.anchors.is_empty()
            && self.routes.len() + 1 == self.anchors.len()
            && *self.anchors.last().unwrap() == terminal_anchor(self.l)
            && self.supergood < self.anchors.len()
            && self.routes.iter().enumerate().all(|(j, r)| {
                let s = r.shift(self.l);
                self.anchors[j].offset(s.0) == self.anchors[j + 1]
            })
    }
}

fn bottom_infected() -> SailOptions {
    SailOptions { require_bottom_infected: true, ..SailOptions::default() }
}

/// Shortest path of at most `max_len` bricks ending at the terminal brick
/// whose first brick is super-good, found by breadth-first search backwards
/// (route B tried before A).
pub fn find_supergood_brickpath(cfg: &Configuration, l: i32, max_len: usize) -> Option<BrickPath> {
    let mut book = SailBook::new(cfg, SailOptions::default());
    let z0 = terminal_anchor(l);
    book.get(&base_brick(l).translate(z0))?;
    let mut prev: HashMap<Site, (Site, Route)> = HashMap::new();
    let mut depth: HashMap<Site, usize> = HashMap::from([(z0, 1)]);
    let mut q = VecDeque::from([z0]);
    while let Some(z) = q.pop_front() {
        if find_sail(cfg, &base_brick(l).translate(z), bottom_infected()).is_some() {
            let mut anchors = vec![z];
            let mut routes = vec![];
            let mut c = z;
            while let Some(&(n, r)) = prev.get(&c) {
                anchors.push(n);
                routes.push(r);
                c = n;
            }
            return Some(BrickPath { l, anchors, routes, supergood: 0 });
        }
        let d = depth[&z];
        if d >= max_len {
            continue;
        }
        for r in [Route::B, Route::A] {
            let s = r.shift(l);
            let p = Site::new3(z.x() - s.x(), z.y() - s.y(), z.z() - s.z());
            if depth.contains_key(&p) || book.get(&base_brick(l).translate(p)).is_none() || !book.family_good(p, r, l) {
                continue;
            }
            depth.insert(p, d + 1);
            prev.insert(p, (z, r));
            q.push_back(p);
        }
    }
    None
}

/// Legal moves from `cfg` that end with the origin infected, passing the
/// seed along the path one translation at a time. Windows are cubes of
/// half-width `WINDOW_RADIUS · L` around each move.
pub fn infect_origin_z3(cfg: &Configuration, path: &BrickPath) -> Result<MoveSequence, Z3Error> {
    if !path.is_consistent() {
        return Err(Z3Error::NotSupergood);
    }
    let l = path.l;
    let mut book = SailBook::new(cfg, SailOptions::default());
    let i = path.supergood;
    let b0 = base_brick(l).translate(path.anchors[i]);
    let mut sail = find_sail(cfg, &b0, bottom_infected()).ok_or(Z3Error::NotSupergood)?;
    let mut sep: HashSet<Site> = b0.layer(12 * l).into_iter().collect();
    let thick = sail.thick();
    let mut seed: HashSet<Site> = sep.iter().copied().filter(|s| thick.contains(s)).collect();
    let mut seq = infect_from_bottom(cfg, &sail, &seed)?;
    for j in i..path.routes.len() {
        let (rb, cb) = family(path.anchors[j], path.routes[j], l);
        let mut rs = vec![sail.clone()];
        for b in &rb[1..] {
            rs.push(book.get(b).ok_or(Z3Error::NotGood(b.anchor))?);
        }
        let mut cs = vec![];
        for b in &cb {
            cs.push(book.get(b).ok_or(Z3Error::NotGood(b.anchor))?);
        }
        let rs: [Sail; 4] = rs.try_into().unwrap();
        let cs: [Sail; 8] = cs.try_into().unwrap();
        let t = translate_infection(cfg, &rs, &cs, &sep, &seed)?;
        seq.extend(&t.seq);
        seed = t.seed;
        sep = t.separator;
        sail = rs[3].clone();
    }
    let origin: HashSet<Site> = [Site::ORIGIN].into_iter().collect();
    seq.extend(&infect_beyond_separator(cfg, &sail, &sep, &seed, &origin)?);
    Ok(seq.with_uniform_window(Window::Around { radius: constants::WINDOW_RADIUS * l }))
}

#[derive(Clone, Debug, Serialize)]
pub struct OriginReport {
    pub legal: bool,
    pub origin_infected: bool,
    pub witness: PathWitness,
    /// Largest L∞ distance from a move to a differing site, in lattice units.
    pub reach: i32,
    pub steps: usize,
}

/// Replay `seq` from `cfg` and summarise it.
pub fn origin_report(cfg: &Configuration, path: &BrickPath, seq: &MoveSequence) -> OriginReport {
    let rep = verify_legal(cfg, seq);
    OriginReport {
        legal: rep.legal,
        origin_infected: rep.endpoint.is_infected(Site::ORIGIN),
        witness: rep.witness,
        reach: diff_reach(cfg, seq),
        steps: path.routes.len() - path.supergood,
    }
}

/// Largest L∞ distance between a move and any site differing from `cfg`
/// right after it.
pub fn diff_reach(cfg: &Configuration, seq: &MoveSequence) -> i32 {
    let mut cur = cfg.clone();
    let mut diff: HashSet<Site> = HashSet::new();
    let mut reach = 0;
    for m in seq.moves.iter().filter(|m| !m.censored) {
        cur.set(m.site, m.target).unwrap();
        if cur.is_infected(m.site) != cfg.is_infected(m.site) {
            diff.insert(m.site);
        } else {
            diff.remove(&m.site);
        }
        // only extremes matter; a full scan is fine at desk scale
        for d in &diff {
            reach = reach.max(d.linf(m.site));
        }
    }
    reach
}

/// Lattice box holding every brick the path may touch, plus a margin of one.
pub fn path_box(l: i32, anchors: &[Site]) -> LatticeBox {
    let (flo, fhi) = family_bounds(l);
    let mut lo = [i32::MAX; 3];
    let mut hi = [i32::MIN; 3];
    for z in anchors {
        for j in 0..3 {
            lo[j] = lo[j].min(flo.0[j] + z.0[j] - 1);
            hi[j] = hi[j].max(fhi.0[j] + z.0[j] + 1);
        }
    }
    let dims: Vec<usize> = (0..3).map(|j| (hi[j] - lo[j] + 1) as usize).collect();
    LatticeBox::new(Site(lo), &dims, Boundary::HealthyFrozen).unwrap()
}

/// Random super-good path of `steps` translations (routes drawn at random)
/// ending at the terminal brick, with every brick good. The first brick's
/// sail gets its bottom layer infected and the origin starts healthy.
pub fn random_supergood_brickpath(l: i32, steps: usize, q: f64, pi: f64, seed: u64) -> (Configuration, BrickPath) {
    let mut rng = stream_rng(seed, stream::CONFIGURATION);
    let routes: Vec<Route> = (0..steps).map(|_| if rng.random::<bool>() { Route::B } else { Route::A }).collect();
    supergood_brickpath_along(l, routes, q, pi, seed)
}

/// As [`random_supergood_brickpath`] with the routes given.
pub fn supergood_brickpath_along(l: i32, routes: Vec<Route>, q: f64, pi: f64, seed: u64) -> (Configuration, BrickPath) {
    let mut anchors = vec![terminal_anchor(l)];
    for r in routes.iter().rev() {
        let z = *anchors.last().unwrap();
        let s = r.shift(l);
        anchors.push(Site::new3(z.x() - s.x(), z.y() - s.y(), z.z() - s.z()));
    }
    anchors.reverse();
    let bx = path_box(l, &anchors);
    let path = BrickPath { l, anchors, routes, supergood: 0 };
    let mut bricks: Vec<Brick> = vec![];
    for (j, r) in path.routes.iter().enumerate() {
        let (rb, cb) = family(path.anchors[j], *r, l);
        bricks.extend(rb);
        bricks.extend(cb);
    }
    bricks.push(base_brick(l).translate(*path.anchors.last().unwrap()));
    for attempt in 0u64.. {
        let env = Arc::new(if pi > 0.0 {
            let mut imm = vec![];
            let mut er = stream_rng(seed ^ (attempt << 32), stream::ENVIRONMENT);
            for i in 0..bx.len() {
                if er.random::<f64>() < pi {
                    imm.push(bx.site(i));
                }
            }
            Environment::with_immune(bx.clone(), &imm).unwrap()
        } else {
            Environment::unpolluted(bx.clone())
        });
        let mut cr = stream_rng(seed ^ (attempt << 32), stream::DYNAMICS);
        let mut cfg = crate::lattice::sample_configuration_with(q, &env, &mut cr);
        if env.is_susceptible(Site::ORIGIN) {
            cfg.set(Site::ORIGIN, State::Healthy).unwrap();
        }
        let first = base_brick(l).translate(path.anchors[0]);
        let Some(s0) = find_sail(&cfg, &first, SailOptions::default()) else { continue };
        for x in s0.layer(0) {
            cfg.set(x, State::Infected).unwrap();
        }
        let mut book = SailBook::new(&cfg, SailOptions::default());
        if bricks.iter().all(|b| book.get(b).is_some()) {
            return (cfg, path);
        }
    }
    unreachable!()
}
