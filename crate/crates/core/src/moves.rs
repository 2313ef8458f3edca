//! Move sequences: application, legality certification, reversal, censoring
//! and the path-to-time bound.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::Serialize;
use statrs::function::factorial::{binomial, ln_factorial};
use thiserror::Error;

use crate::lattice::{Configuration, LatticeBox, LatticeError, Site, State};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MoveError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("move {0} has no recorded prior state; verify the sequence first")]
    NotRecorded(usize),
    #[error("hamming budget {d} exceeds locality volume {v}")]
    BudgetExceedsVolume { d: u64, v: u64 },
    #[error("invalid bound argument: {0}")]
    BadArgument(String),
    #[error("move file line {0}: {1}")]
    Parse(usize, String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct Move {
    pub site: Site,
    pub target: State,
    /// A cure turned into a no-op by censoring; skipped and exempt from the constraint.
    pub censored: bool,
    /// State of `site` just before this move, once recorded.
    pub prior: Option<State>,
}

impl Move {
    pub fn new(site: Site, target: State) -> Move {
        Move { site, target, censored: false, prior: None }
    }

    pub fn infect(site: Site) -> Move {
        Move::new(site, State::Infected)
    }

    pub fn cure(site: Site) -> Move {
        Move::new(site, State::Healthy)
    }
}

/// Locality window Y(x) attached to a move.
#[derive(Clone, PartialEq, Debug)]
pub enum Window {
    Sites(HashSet<Site>),
    Cube { center: Site, radius: i32 },
    /// Cube of the given radius centred at the move's own site.
    Around { radius: i32 },
    /// Union of disjoint boxes, each `(lower, dims)`.
    Boxes(Vec<(Site, [usize; 3])>),
}

impl Window {
    pub fn contains(&self, s: Site, at: Site) -> bool {
        match self {
            Window::Sites(set) => set.contains(&s),
            Window::Cube { center, radius } => s.linf(*center) <= *radius,
            Window::Around { radius } => s.linf(at) <= *radius,
            Window::Boxes(bs) => bs.iter().any(|(lo, d)| {
                (0..3).all(|k| {
                    let r = s.0[k] - lo.0[k];
                    r >= 0 && (r as usize) < d[k]
                })
            }),
        }
    }

    pub fn volume(&self, dim: usize) -> u64 {
        match self {
            Window::Sites(set) => set.len() as u64,
            Window::Cube { radius, .. } | Window::Around { radius } => {
                (2 * *radius as u64 + 1).pow(dim as u32)
            }
            Window::Boxes(bs) => bs.iter().map(|(_, d)| d.iter().product::<usize>() as u64).sum(),
        }
    }
}

pub const NO_WINDOW: u32 = u32::MAX;

/// Distinct windows plus, for every move, the index of its window.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct WindowMap {
    pub windows: Vec<Window>,
    pub index: Vec<u32>,
}

#[derive(Clone, Debug, Default)]
pub struct MoveSequence {
    pub moves: Vec<Move>,
    pub map: WindowMap,
    current: u32,
}

impl PartialEq for MoveSequence {
    fn eq(&self, other: &Self) -> bool {
        self.moves == other.moves && self.map == other.map
    }
}

impl MoveSequence {
    pub fn new() -> MoveSequence {
        MoveSequence { moves: vec![], map: WindowMap::default(), current: NO_WINDOW }
    }

    pub fn from_moves(moves: Vec<Move>) -> MoveSequence {
        let n = moves.len();
        MoveSequence {
            moves,
            map: WindowMap { windows: vec![], index: vec![NO_WINDOW; n] },
            current: NO_WINDOW,
        }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Later pushes use this window.
    pub fn open_window(&mut self, w: Window) {
        if let Some(k) = self.map.windows.iter().position(|x| *x == w) {
            self.current = k as u32;
        } else {
            self.map.windows.push(w);
            self.current = (self.map.windows.len() - 1) as u32;
        }
    }

    pub fn push(&mut self, m: Move) {
        self.moves.push(m);
        self.map.index.push(self.current);
    }

    pub fn window_of(&self, i: usize) -> Option<&Window> {
        let k = self.map.index[i];
        (k != NO_WINDOW).then(|| &self.map.windows[k as usize])
    }

    /// `self + other`, window tables merged.
    pub fn extend(&mut self, other: &MoveSequence) {
        let mut remap = Vec::with_capacity(other.map.windows.len());
        for w in &other.map.windows {
            match self.map.windows.iter().position(|x| x == w) {
                Some(k) => remap.push(k as u32),
                None => {
                    self.map.windows.push(w.clone());
                    remap.push((self.map.windows.len() - 1) as u32);
                }
            }
        }
        self.moves.extend_from_slice(&other.moves);
        self.map
            .index
            .extend(other.map.index.iter().map(|&k| if k == NO_WINDOW { k } else { remap[k as usize] }));
    }

    pub fn concat(mut self, other: &MoveSequence) -> MoveSequence {
        self.extend(other);
        self
    }

    /// Replace every window with `w`.
    pub fn with_uniform_window(mut self, w: Window) -> MoveSequence {
        self.map.windows = vec![w];
        self.map.index = vec![0; self.moves.len()];
        self
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.moves.iter().map(|m| m.site)
    }
}

/// Apply the non-censored moves in order.
pub fn apply(cfg: &Configuration, g: &MoveSequence) -> Result<Configuration, MoveError> {
    let mut c = cfg.clone();
    for m in &g.moves {
        if !m.censored {
            c.set(m.site, m.target)?;
        }
    }
    Ok(c)
}

/// Fill in the prior state of every move by replaying from `cfg`.
pub fn record(cfg: &Configuration, g: &MoveSequence) -> Result<MoveSequence, MoveError> {
    let mut c = cfg.clone();
    let mut out = g.clone();
    for m in out.moves.iter_mut() {
        let prior = c.state(m.site)?;
        m.prior = Some(prior);
        if !m.censored {
            c.set(m.site, m.target)?;
        }
    }
    Ok(out)
}

/// Reversed order, targets swapped with priors. Censored no-ops stay as they are.
pub fn reverse(g: &MoveSequence) -> Result<MoveSequence, MoveError> {
    let n = g.len();
    let mut out = MoveSequence::new();
    out.map.windows = g.map.windows.clone();
    for j in (0..n).rev() {
        let m = g.moves[j];
        let prior = m.prior.ok_or(MoveError::NotRecorded(j))?;
        let r = if m.censored {
            m
        } else {
            Move { site: m.site, target: prior, censored: false, prior: Some(m.target) }
        };
        out.moves.push(r);
        out.map.index.push(g.map.index[j]);
    }
    Ok(out)
}

/// Cures at sites of `x` become censored no-ops.
pub fn censor(g: &MoveSequence, x: &HashSet<Site>) -> MoveSequence {
    let mut out = g.clone();
    for m in out.moves.iter_mut() {
        if m.target == State::Healthy && x.contains(&m.site) {
            m.censored = true;
        }
    }
    out
}

/// Drop censored moves.
pub fn strip(g: &MoveSequence) -> MoveSequence {
    let mut out = MoveSequence::new();
    out.map.windows = g.map.windows.clone();
    for (m, &k) in g.moves.iter().zip(&g.map.index) {
        if !m.censored {
            out.moves.push(*m);
            out.map.index.push(k);
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum ViolationKind {
    /// Move at an immune or out-of-box site.
    NotSusceptible,
    /// Constraint false before the move.
    Constraint,
    /// The move site is outside its own window.
    SiteOutsideWindow,
    /// Some differing site left the window.
    DiffOutsideWindow,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathWitness {
    pub n_moves: u64,
    /// Largest Hamming distance from the start reached along the way.
    pub hamming_budget: u64,
    /// Largest declared window volume.
    pub locality_volume: u64,
    pub windows_declared: bool,
}

#[derive(Clone, Debug)]
pub struct LegalityReport {
    pub legal: bool,
    pub first_violation: Option<Violation>,
    pub witness: PathWitness,
    pub endpoint: Configuration,
}

/// Replay `g` from `cfg`. Every non-censored move needs its constraint, no-ops
/// included. Windows, where declared, must contain the move site and the whole
/// current difference from `cfg` (taken after the move).
pub fn verify_legal(cfg: &Configuration, g: &MoveSequence) -> LegalityReport {
    let bx: LatticeBox = cfg.bx().clone();
    let mut cur = cfg.clone();
    let mut diff: HashSet<usize> = HashSet::new();
    // per-axis coordinate multisets of the diff, for O(log n) bounding boxes
    let mut spread = Spread::default();
    let mut hb = 0usize;
    let mut first = None;
    let mut last_window = NO_WINDOW;
    for (i, m) in g.moves.iter().enumerate() {
        let Some(idx) = bx.index(m.site).filter(|&j| !cfg.env().is_immune_idx(j)) else {
            first = Some(Violation { index: i, kind: ViolationKind::NotSusceptible });
            break;
        };
        if m.censored {
            continue;
        }
        if !cur.constraint_idx(idx) {
            first = Some(Violation { index: i, kind: ViolationKind::Constraint });
            break;
        }
        let v = m.target.is_infected();
        cur.set_idx(idx, v);
        if v != cfg.infected_idx(idx) {
            if diff.insert(idx) {
                spread.add(m.site);
            }
        } else if diff.remove(&idx) {
            spread.remove(m.site);
        }
        hb = hb.max(diff.len());
        let k = g.map.index[i];
        if k != NO_WINDOW {
            let w = &g.map.windows[k as usize];
            if !w.contains(m.site, m.site) {
                first = Some(Violation { index: i, kind: ViolationKind::SiteOutsideWindow });
                break;
            }
            // a fixed window already held the old diff; only the new site needs checking
            if let Window::Around { radius } = w {
                if !spread.within(m.site, *radius) {
                    first = Some(Violation { index: i, kind: ViolationKind::DiffOutsideWindow });
                    break;
                }
            } else if k != last_window
                && diff.iter().any(|&j| !w.contains(bx.site(j), m.site)) {
                    first = Some(Violation { index: i, kind: ViolationKind::DiffOutsideWindow });
                    break;
                }
            last_window = k;
        } else {
            last_window = NO_WINDOW;
        }
    }
    let declared = g.map.index.iter().all(|&k| k != NO_WINDOW);
    let vol = g.map.windows.iter().map(|w| w.volume(bx.dim)).max().unwrap_or(0);
    LegalityReport {
        legal: first.is_none(),
        first_violation: first,
        witness: PathWitness {
            n_moves: g.len() as u64,
            hamming_budget: hb as u64,
            locality_volume: vol,
            windows_declared: declared,
        },
        endpoint: cur,
    }
}

#[derive(Default)]
struct Spread {
    axes: [BTreeMap<i32, u32>; 3],
}

impl Spread {
    fn add(&mut self, s: Site) {
        for k in 0..3 {
            *self.axes[k].entry(s.0[k]).or_insert(0) += 1;
        }
    }

    fn remove(&mut self, s: Site) {
        for k in 0..3 {
            let e = self.axes[k].get_mut(&s.0[k]).unwrap();
            *e -= 1;
            if *e == 0 {
                self.axes[k].remove(&s.0[k]);
            }
        }
    }

    fn within(&self, at: Site, r: i32) -> bool {
        (0..3).all(|k| match (self.axes[k].first_key_value(), self.axes[k].last_key_value()) {
            (Some((&lo, _)), Some((&hi, _))) => at.0[k] - lo <= r && hi - at.0[k] <= r,
            _ => true,
        })
    }
}

fn check_bound_args(n: u64, d: u64, v: u64, q: f64) -> Result<(), MoveError> {
    if d > v {
        return Err(MoveError::BudgetExceedsVolume { d, v });
    }
    if n < 1 {
        return Err(MoveError::BadArgument("N must be at least 1".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(MoveError::BadArgument(format!("q={q} outside (0,1)")));
    }
    Ok(())
}

fn log10_bound(n: u64, d: u64, v: u64, q: f64, extra: i64) -> f64 {
    let ln_binom = ln_factorial(v) - ln_factorial(d) - ln_factorial(v - d);
    let ln = 2.0 * (n as f64).ln() + ln_binom + d as f64 * std::f64::consts::LN_2
        - (d as f64 + extra as f64) * q.ln();
    ln / std::f64::consts::LN_10
}

/// log10 of N² C(V,D) 2^D q^(-D-1).
pub fn eval_path_bound(n: u64, d: u64, v: u64, q: f64) -> Result<f64, MoveError> {
    check_bound_args(n, d, v, q)?;
    Ok(log10_bound(n, d, v, q, 1))
}

/// The same bound as a plain float, evaluated by direct multiplication.
pub fn path_bound_value(n: u64, d: u64, v: u64, q: f64) -> Result<f64, MoveError> {
    check_bound_args(n, d, v, q)?;
    Ok((n as f64).powi(2) * binomial(v, d) * 2f64.powi(d as i32) * q.powi(-(d as i32) - 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct YoyomaBound {
    pub time_threshold_log10: f64,
    pub prob_bound: f64,
}

/// Tail bound: P(τ_A > N² C(V,D) 2^D q^(-D-2)) ≤ 2q + δ + √δ.
pub fn eval_yoyoma_bound(n: u64, d: u64, v: u64, q: f64, delta: f64) -> Result<YoyomaBound, MoveError> {
    check_bound_args(n, d, v, q)?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(MoveError::BadArgument(format!("delta={delta} outside [0,1]")));
    }
    Ok(YoyomaBound {
        time_threshold_log10: log10_bound(n, d, v, q, 2),
        prob_bound: (2.0 * q + delta + delta.sqrt()).min(1.0),
    })
}

/// CSV move format: `index,x,y[,z],target` where target is `i`, `h`, or `c`
/// for a censored cure.
pub fn write_moves<W: Write>(out: &mut W, g: &MoveSequence, dim: usize) -> std::io::Result<()> {
    for (k, m) in g.moves.iter().enumerate() {
        let t = if m.censored { 'c' } else { m.target.letter() };
        if dim == 2 {
            writeln!(out, "{},{},{},{}", k, m.site.x(), m.site.y(), t)?;
        } else {
            writeln!(out, "{},{},{},{},{}", k, m.site.x(), m.site.y(), m.site.z(), t)?;
        }
    }
    Ok(())
}

pub fn read_moves<R: BufRead>(input: R) -> Result<MoveSequence, MoveError> {
    let mut moves = vec![];
    for (ln, line) in input.lines().enumerate() {
        let line = line.map_err(|e| MoveError::Parse(ln + 1, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 && f.len() != 5 {
            return Err(MoveError::Parse(ln + 1, format!("expected 4 or 5 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<i32>().map_err(|e| MoveError::Parse(ln + 1, e.to_string()));
        let x = num(f[1])?;
        let y = num(f[2])?;
        let z = if f.len() == 5 { num(f[3])? } else { 0 };
        let site = Site([x, y, z]);
        let m = match *f.last().unwrap() {
            "i" => Move::infect(site),
            "h" => Move::cure(site),
            "c" => Move { censored: true, ..Move::cure(site) },
            t => return Err(MoveError::Parse(ln + 1, format!("bad target `{t}`"))),
        };
        moves.push(m);
    }
    Ok(MoveSequence::from_moves(moves))
}
