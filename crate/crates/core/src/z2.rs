//! Good boxes on Z² and the line-propagation infection path.
//!
//! A full infected line (row or column of a box) is pushed one step at a time.
//! One step infects the next line from the sites that are already infected on
//! it (anchors), then cures the old line wherever the reference configuration
//! does not have it infected. Corners of a box path are turned by dragging the
//! line across the box while keeping its low end, which leaves a perpendicular
//! line behind that is then slid to the exit edge.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{stream_rng, Boundary, Configuration, Environment, LatticeBox, Site};
use crate::moves::{Move, MoveSequence, Window};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Z2Error {
    #[error("box at {0:?} is not good")]
    NotGood((i32, i32)),
    #[error("no fully infected line in the starting box")]
    NoLine,
    #[error("target line at {0:?} has no infected anchor")]
    NoAnchor(Site),
    #[error("origin {0:?} is not in the terminal box")]
    OriginOutside(Site),
    #[error("boxes are not a connected self-avoiding path")]
    BadPath,
    #[error("construction step illegal at {0:?}")]
    Illegal(Site),
}

/// Axis-aligned rectangle of sites.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct Rect {
    pub lo: (i32, i32),
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn contains(&self, s: Site) -> bool {
        s.x() >= self.lo.0 && s.x() < self.lo.0 + self.w as i32 && s.y() >= self.lo.1 && s.y() < self.lo.1 + self.h as i32
    }

    fn extent(&self, axis: usize) -> (i32, usize) {
        if axis == 0 {
            (self.lo.0, self.w)
        } else {
            (self.lo.1, self.h)
        }
    }

    /// Edge coordinate along `axis` in direction `sign`.
    fn edge(&self, axis: usize, sign: i32) -> i32 {
        let (lo, n) = self.extent(axis);
        if sign > 0 {
            lo + n as i32 - 1
        } else {
            lo
        }
    }

    fn window_box(&self) -> (Site, [usize; 3]) {
        (Site::new2(self.lo.0, self.lo.1), [self.w, self.h, 1])
    }

    pub fn column(&self, k: usize) -> Vec<Site> {
        (0..self.h as i32).map(|y| Site::new2(self.lo.0 + k as i32, self.lo.1 + y)).collect()
    }

    pub fn row(&self, k: usize) -> Vec<Site> {
        (0..self.w as i32).map(|x| Site::new2(self.lo.0 + x, self.lo.1 + k as i32)).collect()
    }
}

/// The box `L·g + [0,L)²`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct CoarseBox {
    pub grid: (i32, i32),
    pub side: usize,
}

impl CoarseBox {
    pub fn new(grid: (i32, i32), side: usize) -> CoarseBox {
        CoarseBox { grid, side }
    }

    pub fn rect(&self) -> Rect {
        let l = self.side as i32;
        Rect { lo: (self.grid.0 * l, self.grid.1 * l), w: self.side, h: self.side }
    }

    pub fn containing(s: Site, side: usize) -> CoarseBox {
        let l = side as i32;
        CoarseBox { grid: (s.x().div_euclid(l), s.y().div_euclid(l)), side }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct BoxPath {
    pub boxes: Vec<CoarseBox>,
}

impl BoxPath {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn is_connected(&self) -> bool {
        self.boxes.windows(2).all(|w| {
            let (a, b) = (w[0].grid, w[1].grid);
            (a.0 - b.0).abs() + (a.1 - b.1).abs() == 1
        })
    }

    pub fn is_self_avoiding(&self) -> bool {
        let set: HashSet<_> = self.boxes.iter().map(|b| b.grid).collect();
        set.len() == self.boxes.len()
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct Z2Scales {
    pub side: usize,
    pub length: usize,
    pub q: f64,
    pub epsilon: f64,
}

impl Z2Scales {
    /// The asymptotic choices L = q^(-1-ε/3) and log10 of l = q^(-L-1). Logged only.
    pub fn asymptotic(q: f64, epsilon: f64) -> (f64, f64) {
        let l = q.powf(-1.0 - epsilon / 3.0);
        (l, -(l + 1.0) * q.log10())
    }
}

fn rect_susceptible(cfg: &Configuration, r: &Rect) -> bool {
    (0..r.w as i32).all(|x| (0..r.h as i32).all(|y| cfg.env().is_susceptible(Site::new2(r.lo.0 + x, r.lo.1 + y))))
}

/// Fully susceptible, with an infected site in every row and column.
pub fn is_good_rect(cfg: &Configuration, r: &Rect) -> bool {
    rect_susceptible(cfg, r)
        && (0..r.w).all(|k| r.column(k).iter().any(|&s| cfg.is_infected(s)))
        && (0..r.h).all(|k| r.row(k).iter().any(|&s| cfg.is_infected(s)))
}

pub fn is_good_square(cfg: &Configuration, b: &CoarseBox) -> bool {
    is_good_rect(cfg, &b.rect())
}

/// A fully infected line of the box: columns by x first, then rows by y.
pub fn infected_line(cfg: &Configuration, r: &Rect) -> Option<Line> {
    for k in 0..r.w {
        if r.column(k).iter().all(|&s| cfg.is_infected(s)) {
            return Some(Line { axis: 0, pos: r.lo.0 + k as i32, lo: r.lo.1, len: r.h });
        }
    }
    for k in 0..r.h {
        if r.row(k).iter().all(|&s| cfg.is_infected(s)) {
            return Some(Line { axis: 1, pos: r.lo.1 + k as i32, lo: r.lo.0, len: r.w });
        }
    }
    None
}

pub fn is_supergood(cfg: &Configuration, path: &BoxPath) -> bool {
    path.boxes.iter().any(|b| infected_line(cfg, &b.rect()).is_some())
}

/// Box grid coordinates whose boxes lie inside the lattice box.
pub fn grid_range(bx: &LatticeBox, side: usize) -> ((i32, i32), (i32, i32)) {
    let l = side as i32;
    let lo = |k: usize| (bx.lower.0[k] + l - 1).div_euclid(l);
    let hi = |k: usize| (bx.lower.0[k] + bx.dims[k] as i32).div_euclid(l) - 1;
    ((lo(0), lo(1)), (hi(0), hi(1)))
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodClusters {
    pub side: usize,
    /// Cluster label of every good box.
    pub labels: BTreeMap<(i32, i32), usize>,
    pub sizes: Vec<usize>,
    pub largest: usize,
    /// Size of the cluster holding the box of the origin; 0 if that box is not good.
    pub origin_cluster: usize,
}

const NBRS: [(i32, i32); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];

/// Connected components of good boxes under grid adjacency.
pub fn good_cluster(cfg: &Configuration, side: usize) -> GoodClusters {
    let ((x0, y0), (x1, y1)) = grid_range(cfg.bx(), side);
    let mut good = HashSet::new();
    for gx in x0..=x1 {
        for gy in y0..=y1 {
            if is_good_square(cfg, &CoarseBox::new((gx, gy), side)) {
                good.insert((gx, gy));
            }
        }
    }
    let mut labels = BTreeMap::new();
    let mut sizes = vec![];
    let mut order: Vec<_> = good.iter().copied().collect();
    order.sort_unstable();
    for g in order {
        if labels.contains_key(&g) {
            continue;
        }
        let id = sizes.len();
        let mut n = 0;
        let mut queue = VecDeque::from([g]);
        labels.insert(g, id);
        while let Some(c) = queue.pop_front() {
            n += 1;
            for d in NBRS {
                let nb = (c.0 + d.0, c.1 + d.1);
                if good.contains(&nb) && !labels.contains_key(&nb) {
                    labels.insert(nb, id);
                    queue.push_back(nb);
                }
            }
        }
        sizes.push(n);
    }
    let ob = CoarseBox::containing(cfg.bx().origin(), side).grid;
    GoodClusters {
        side,
        largest: sizes.iter().copied().max().unwrap_or(0),
        origin_cluster: labels.get(&ob).map_or(0, |&k| sizes[k]),
        labels,
        sizes,
    }
}

/// Breadth-first search from `origin_box` through good boxes (neighbours in
/// lexicographic order). Returns the shortest path that starts at a box holding
/// an infected line and ends at `origin_box`, if one has at most `scales.length` boxes.
pub fn find_supergood_path(cfg: &Configuration, scales: &Z2Scales, origin_box: (i32, i32)) -> Option<BoxPath> {
    let side = scales.side;
    let ((x0, y0), (x1, y1)) = grid_range(cfg.bx(), side);
    let inside = |g: (i32, i32)| g.0 >= x0 && g.0 <= x1 && g.1 >= y0 && g.1 <= y1;
    let good = |g: (i32, i32)| inside(g) && is_good_square(cfg, &CoarseBox::new(g, side));
    if scales.length == 0 || !good(origin_box) {
        return None;
    }
    let mut parent: BTreeMap<(i32, i32), (i32, i32)> = BTreeMap::new();
    let mut dist = BTreeMap::from([(origin_box, 1usize)]);
    let mut queue = VecDeque::from([origin_box]);
    while let Some(g) = queue.pop_front() {
        if infected_line(cfg, &CoarseBox::new(g, side).rect()).is_some() {
            let mut boxes = vec![CoarseBox::new(g, side)];
            let mut c = g;
            while let Some(&p) = parent.get(&c) {
                boxes.push(CoarseBox::new(p, side));
                c = p;
            }
            return Some(BoxPath { boxes });
        }
        if dist[&g] == scales.length {
            continue;
        }
        for d in NBRS {
            let nb = (g.0 + d.0, g.1 + d.1);
            if !dist.contains_key(&nb) && good(nb) {
                dist.insert(nb, dist[&g] + 1);
                parent.insert(nb, g);
                queue.push_back(nb);
            }
        }
    }
    None
}

/// A full line: `axis` is the axis it moves along (0 for a column), `pos` its
/// coordinate on that axis, and it spans `lo..lo+len` on the other axis.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct Line {
    pub axis: usize,
    pub pos: i32,
    pub lo: i32,
    pub len: usize,
}

impl Line {
    fn site(&self, t: i32) -> Site {
        if self.axis == 0 {
            Site::new2(self.pos, t)
        } else {
            Site::new2(t, self.pos)
        }
    }

    /// Sites ordered along the direction obtained by turning the motion
    /// direction `sign·e_axis` a quarter turn counter-clockwise.
    fn ordered(&self, sign: i32) -> Vec<Site> {
        let up = if self.axis == 0 { sign > 0 } else { sign < 0 };
        let mut v: Vec<Site> = (0..self.len as i32).map(|k| self.site(self.lo + k)).collect();
        if !up {
            v.reverse();
        }
        v
    }

    fn shifted(&self, sign: i32) -> Line {
        Line { pos: self.pos + sign, ..*self }
    }

    pub fn sites(&self) -> Vec<Site> {
        self.ordered(if self.axis == 0 { 1 } else { -1 })
    }
}

/// Whether the line being pushed counts as infected in the reference configuration.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LineBase {
    /// The reference is the start configuration itself; the initial line is never cured.
    Start,
    /// The initial line is treated as healthy in the reference and cured where
    /// legal, as in the pictures.
    Cured,
}

struct Builder {
    cur: Configuration,
    base: Configuration,
    seq: MoveSequence,
}

impl Builder {
    fn new(cfg: &Configuration, line: Option<&Line>) -> Builder {
        let mut base = cfg.clone();
        if let Some(l) = line {
            for s in l.sites() {
                base.set(s, crate::lattice::State::Healthy).unwrap();
            }
        }
        Builder { cur: cfg.clone(), base, seq: MoveSequence::new() }
    }

    fn step(&mut self, s: Site, infect: bool) -> Result<(), Z2Error> {
        let i = self.cur.bx().index(s).ok_or(Z2Error::Illegal(s))?;
        if self.cur.env().is_immune_idx(i) || !self.cur.constraint_idx(i) {
            return Err(Z2Error::Illegal(s));
        }
        self.cur.set_idx(i, infect);
        self.seq.push(if infect { Move::infect(s) } else { Move::cure(s) });
        Ok(())
    }

    /// Push the full line one step in direction `sign`; sites in `kept` are not cured.
    fn move_line(&mut self, line: Line, sign: i32, kept: &HashSet<Site>) -> Result<Line, Z2Error> {
        let old = line.ordered(sign);
        let new_line = line.shifted(sign);
        let tgt = new_line.ordered(sign);
        let n = old.len();
        let anchor: Vec<bool> = tgt.iter().map(|&s| self.cur.is_infected(s)).collect();
        if !anchor.iter().any(|&a| a) {
            return Err(Z2Error::NoAnchor(tgt[0]));
        }
        for (a, b) in runs(&anchor) {
            let order: Vec<usize> = if a > 0 { (a..=b).collect() } else { (a..=b).rev().collect() };
            for j in order {
                self.step(tgt[j], true)?;
            }
        }
        let fixed: Vec<bool> = old.iter().map(|s| self.base.is_infected(*s) || kept.contains(s)).collect();
        for (a, b) in runs(&fixed) {
            let below = a > 0;
            let above = b + 1 < n;
            let order: Vec<usize> = if below && !above { (a..=b).rev().collect() } else { (a..=b).collect() };
            for j in order {
                let s = old[j];
                let i = self.cur.bx().index(s).unwrap();
                if self.cur.infected_idx(i) && self.cur.constraint_idx(i) {
                    self.step(s, false)?;
                }
            }
        }
        Ok(new_line)
    }

    fn move_to(&mut self, mut line: Line, target: i32) -> Result<Line, Z2Error> {
        while line.pos != target {
            let s = (target - line.pos).signum();
            line = self.move_line(line, s, &HashSet::new())?;
        }
        Ok(line)
    }

    /// Line on an edge of `r`: drag it across in direction `c` keeping its
    /// `v`-low end, then slide the perpendicular line left behind to the `v` edge.
    fn rotate(&mut self, r: &Rect, mut line: Line, c: i32, v: i32) -> Result<Line, Z2Error> {
        let a = line.axis;
        let b = 1 - a;
        let far = r.edge(a, c);
        let low_end = r.edge(b, -v);
        while line.pos != far {
            let keep: HashSet<Site> = [line.site(low_end)].into_iter().collect();
            line = self.move_line(line, c, &keep)?;
        }
        let (lo, len) = r.extent(a);
        let row = Line { axis: b, pos: low_end, lo, len };
        self.move_to(row, r.edge(b, v))
    }
}

/// Maximal runs of `false` as inclusive index pairs.
fn runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = vec![];
    let mut j = 0;
    while j < mask.len() {
        if mask[j] {
            j += 1;
            continue;
        }
        let a = j;
        while j < mask.len() && !mask[j] {
            j += 1;
        }
        out.push((a, j - 1));
    }
    out
}

/// Moves per column step are at most this many times the column height.
pub const PROPAGATE_STEP_FACTOR: usize = 2;

/// Push the infected column `from_col` of `r` to `to_col` (local indices).
/// The starting column counts as healthy in the reference, so it is cured
/// where legal; other columns return to their values in `cfg`.
pub fn propagate_column(cfg: &Configuration, r: &Rect, from_col: usize, to_col: usize) -> Result<MoveSequence, Z2Error> {
    let line = Line { axis: 0, pos: r.lo.0 + from_col as i32, lo: r.lo.1, len: r.h };
    if line.sites().iter().any(|&s| !cfg.is_infected(s)) {
        return Err(Z2Error::NoLine);
    }
    let mut b = Builder::new(cfg, Some(&line));
    b.seq.open_window(Window::Boxes(vec![r.window_box()]));
    b.move_to(line, r.lo.0 + to_col as i32)?;
    Ok(b.seq)
}

/// Turn the infected leftmost column of `r` into an infected top row.
pub fn rotate_column(cfg: &Configuration, r: &Rect) -> Result<MoveSequence, Z2Error> {
    let top = r.row(r.h - 1);
    if top.iter().all(|&s| cfg.is_infected(s)) {
        return Ok(MoveSequence::new());
    }
    let line = Line { axis: 0, pos: r.lo.0, lo: r.lo.1, len: r.h };
    if line.sites().iter().any(|&s| !cfg.is_infected(s)) {
        return Err(Z2Error::NoLine);
    }
    let mut b = Builder::new(cfg, Some(&line));
    b.seq.open_window(Window::Boxes(vec![r.window_box()]));
    b.rotate(r, line, 1, 1)?;
    Ok(b.seq)
}

fn direction(a: (i32, i32), b: (i32, i32)) -> (usize, i32) {
    if a.0 != b.0 {
        (0, b.0 - a.0)
    } else {
        (1, b.1 - a.1)
    }
}

/// Legal moves carrying the infected line of the path's last line-holding box
/// along the path until `origin` (in the final box) is infected.
pub fn build_infection_path(cfg: &Configuration, path: &BoxPath, origin: Site) -> Result<MoveSequence, Z2Error> {
    build_infection_path_with(cfg, path, origin, LineBase::Start)
}

pub fn build_infection_path_with(cfg: &Configuration, path: &BoxPath, origin: Site, mode: LineBase) -> Result<MoveSequence, Z2Error> {
    if path.is_empty() || !path.is_connected() || !path.is_self_avoiding() {
        return Err(Z2Error::BadPath);
    }
    let last = path.boxes.last().unwrap();
    if !last.rect().contains(origin) {
        return Err(Z2Error::OriginOutside(origin));
    }
    for b in &path.boxes {
        if !is_good_square(cfg, b) {
            return Err(Z2Error::NotGood(b.grid));
        }
    }
    let start = (0..path.len())
        .rev()
        .find(|&k| infected_line(cfg, &path.boxes[k].rect()).is_some())
        .ok_or(Z2Error::NoLine)?;
    let boxes: Vec<Rect> = path.boxes[start..].iter().map(|b| b.rect()).collect();
    let grids: Vec<(i32, i32)> = path.boxes[start..].iter().map(|b| b.grid).collect();
    let mut line = infected_line(cfg, &boxes[0]).unwrap();
    let mut b = Builder::new(cfg, (mode == LineBase::Cured).then_some(&line));
    let m = boxes.len();
    let window = |k: usize| {
        let lo = k.saturating_sub(1);
        let hi = (k + 1).min(m - 1);
        Window::Boxes((lo..=hi).map(|j| boxes[j].window_box()).collect())
    };
    // the cured starting line stays different from the start, so no windows apply then
    let windowed = mode == LineBase::Start;
    let mut k = 0;
    while k + 1 < m {
        if windowed {
            b.seq.open_window(window(k));
        }
        let (e, s) = direction(grids[k], grids[k + 1]);
        let r = &boxes[k];
        if k == 0 && line.axis != e {
            // line parallel to the exit: start from its nearest side edge
            let (lo, n) = r.extent(line.axis);
            let hi = lo + n as i32 - 1;
            let (edge, c) = if line.pos - lo <= hi - line.pos { (lo, 1) } else { (hi, -1) };
            line = b.move_to(line, edge)?;
            line = b.rotate(r, line, c, s)?;
        } else if k == 0 {
            line = b.move_to(line, r.edge(e, s))?;
        } else {
            let (ein, sin) = direction(grids[k - 1], grids[k]);
            if ein == e {
                line = b.move_to(line, r.edge(e, s))?;
            } else {
                line = b.rotate(r, line, sin, s)?;
            }
        }
        line = b.move_line(line, s, &HashSet::new())?;
        k += 1;
    }
    if windowed {
        b.seq.open_window(window(m - 1));
    }
    let target = if line.axis == 0 { origin.x() } else { origin.y() };
    b.move_to(line, target)?;
    Ok(b.seq)
}

/// Random instance: a self-avoiding path of `l` good boxes of side `side`
/// ending at the box of the origin, with an infected line planted in the
/// first box. The lattice box is the bounding box of the path plus one box.
pub fn random_supergood_instance(side: usize, l: usize, q: f64, pi: f64, seed: u64) -> (Configuration, BoxPath, Site) {
    let mut rng = stream_rng(seed, crate::lattice::stream::CONFIGURATION);
    let grids = loop {
        let mut g = vec![(0i32, 0i32)];
        let mut seen: HashSet<(i32, i32)> = g.iter().copied().collect();
        while g.len() < l {
            let c = *g.last().unwrap();
            let mut opts: Vec<(i32, i32)> = NBRS.iter().map(|d| (c.0 + d.0, c.1 + d.1)).filter(|n| !seen.contains(n)).collect();
            if opts.is_empty() {
                break;
            }
            opts.shuffle(&mut rng);
            seen.insert(opts[0]);
            g.push(opts[0]);
        }
        if g.len() == l {
            g.reverse();
            break g;
        }
    };
    let s = side as i32;
    let gx0 = grids.iter().map(|g| g.0).min().unwrap() - 1;
    let gy0 = grids.iter().map(|g| g.1).min().unwrap() - 1;
    let gx1 = grids.iter().map(|g| g.0).max().unwrap() + 1;
    let gy1 = grids.iter().map(|g| g.1).max().unwrap() + 1;
    let bx = LatticeBox::new(
        Site::new2(gx0 * s, gy0 * s),
        &[((gx1 - gx0 + 1) * s) as usize, ((gy1 - gy0 + 1) * s) as usize],
        Boundary::HealthyFrozen,
    )
    .unwrap();
    let boxes: Vec<CoarseBox> = grids.iter().map(|&g| CoarseBox::new(g, side)).collect();
    let on_path = |x: Site| boxes.iter().any(|b| b.rect().contains(x));
    let mut immune = vec![];
    for i in 0..bx.len() {
        let x = bx.site(i);
        if !on_path(x) && rng.random::<f64>() < pi {
            immune.push(x);
        }
    }
    let env = Arc::new(Environment::with_immune(bx.clone(), &immune).unwrap());
    let mut cfg = Configuration::all_healthy(env.clone());
    for i in 0..bx.len() {
        if !env.is_immune_idx(i) && !on_path(bx.site(i)) && rng.random::<f64>() < q {
            cfg.set_idx(i, true);
        }
    }
    for b in &boxes {
        let r = b.rect();
        loop {
            for x in 0..side as i32 {
                for y in 0..side as i32 {
                    let st = rng.random::<f64>() < q;
                    cfg.set(Site::new2(r.lo.0 + x, r.lo.1 + y), crate::lattice::State::from_infected(st)).unwrap();
                }
            }
            if is_good_rect(&cfg, &r) {
                break;
            }
        }
    }
    let r0 = boxes[0].rect();
    let k = rng.random_range(0..side);
    let line = if rng.random::<bool>() { r0.column(k) } else { r0.row(k) };
    for x in line {
        cfg.set(x, crate::lattice::State::Infected).unwrap();
    }
    (cfg, BoxPath { boxes }, Site::ORIGIN)
}

/// The pictured instances, with the infected sites of their final panels.
pub mod figures {
    use super::*;

    fn build(w: usize, h: usize, inf: &[(i32, i32)]) -> Configuration {
        let bx = LatticeBox::new(Site::ORIGIN, &[w, h], Boundary::HealthyFrozen).unwrap();
        let env = Arc::new(Environment::unpolluted(bx));
        let s: Vec<Site> = inf.iter().map(|&(x, y)| Site::new2(x, y)).collect();
        Configuration::from_infected(env, &s).unwrap()
    }

    fn sites(v: &[(i32, i32)]) -> Vec<Site> {
        let mut s: Vec<Site> = v.iter().map(|&(x, y)| Site::new2(x, y)).collect();
        s.sort();
        s
    }

    /// Column propagation in a 3×5 box.
    pub fn column_instance() -> (Configuration, Rect, Vec<Site>) {
        let c = build(3, 5, &[(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 1), (2, 2)]);
        let fin = sites(&[(0, 4), (1, 1), (2, 0), (2, 1), (2, 2), (2, 3), (2, 4)]);
        (c, Rect { lo: (0, 0), w: 3, h: 5 }, fin)
    }

    /// Column rotation in a 5×5 box.
    pub fn rotation_instance() -> (Configuration, Rect, Vec<Site>) {
        let c = build(5, 5, &[(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 1), (2, 2), (3, 0), (3, 4), (4, 3)]);
        let fin = sites(&[(0, 4), (1, 1), (1, 4), (2, 2), (2, 4), (3, 0), (3, 4), (4, 3), (4, 4)]);
        (c, Rect { lo: (0, 0), w: 5, h: 5 }, fin)
    }

    /// Three boxes of side 5 turning a corner; the origin sits at (9,5).
    pub fn path_instance() -> (Configuration, BoxPath, Site, Vec<Site>) {
        let scattered = [
            (2, 1), (4, 2), (3, 3), (1, 4), (2, 5), (0, 6), (1, 7), (4, 8), (3, 9),
            (5, 8), (6, 6), (7, 7), (8, 5), (9, 9),
        ];
        let mut inf: Vec<(i32, i32)> = (0..5).map(|x| (x, 0)).collect();
        inf.extend_from_slice(&scattered);
        let c = build(10, 10, &inf);
        let path = BoxPath { boxes: vec![CoarseBox::new((0, 0), 5), CoarseBox::new((0, 1), 5), CoarseBox::new((1, 1), 5)] };
        let mut fin: Vec<(i32, i32)> = scattered.to_vec();
        fin.push((0, 0));
        fin.extend((5..10).map(|y| (9, y)));
        fin.sort();
        fin.dedup();
        (c, path, Site::new2(9, 5), sites(&fin))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::{apply, record, reverse, verify_legal};

    fn sorted(mut v: Vec<Site>) -> Vec<Site> {
        v.sort();
        v
    }

    #[test]
    fn seven_of_sixteen_two_by_two_boxes_are_good() {
        let bx = LatticeBox::square(2, Boundary::HealthyFrozen);
        let env = Arc::new(Environment::unpolluted(bx.clone()));
        let mut good = 0;
        let mut with_line = 0;
        for mask in 0u32..16 {
            let s: Vec<Site> = (0..4).filter(|k| mask >> k & 1 == 1).map(|k| bx.site(k)).collect();
            let c = Configuration::from_infected(env.clone(), &s).unwrap();
            let b = CoarseBox::new((0, 0), 2);
            if is_good_square(&c, &b) {
                good += 1;
                with_line += is_supergood(&c, &BoxPath { boxes: vec![b] }) as u32;
            }
        }
        assert_eq!(good, 7);
        // only the two diagonal pairs lack a full line
        assert_eq!(with_line, 5);
    }

    #[test]
    fn immune_site_spoils_box() {
        let bx = LatticeBox::square(3, Boundary::HealthyFrozen);
        let env = Arc::new(Environment::with_immune(bx, &[Site::new2(1, 1)]).unwrap());
        let c = Configuration::all_infected(env);
        assert!(!is_good_square(&c, &CoarseBox::new((0, 0), 3)));
    }

    #[test]
    fn column_figure_final_panel() {
        let (c, r, fin) = figures::column_instance();
        let g = propagate_column(&c, &r, 0, 2).unwrap();
        let rep = verify_legal(&c, &g);
        assert!(rep.legal);
        assert_eq!(sorted(rep.endpoint.infected_sites()), fin);
        assert!(rep.witness.hamming_budget <= 3 * 5);
        assert!(propagate_column(&c, &r, 0, 0).unwrap().is_empty());
    }

    #[test]
    fn rotation_figure_final_panel_and_reverse() {
        let (c, r, fin) = figures::rotation_instance();
        let g = rotate_column(&c, &r).unwrap();
        let rep = verify_legal(&c, &g);
        assert!(rep.legal);
        assert_eq!(sorted(rep.endpoint.infected_sites()), fin);
        let back = reverse(&record(&c, &g).unwrap()).unwrap();
        let rb = verify_legal(&rep.endpoint, &back);
        assert!(rb.legal);
        assert_eq!(rb.endpoint, c);
        assert!(rotate_column(&rep.endpoint, &r).unwrap().is_empty());
    }

    #[test]
    fn path_figure_final_panel() {
        let (c, p, o, fin) = figures::path_instance();
        let g = build_infection_path_with(&c, &p, o, LineBase::Cured).unwrap();
        let rep = verify_legal(&c, &g);
        assert!(rep.legal, "{:?}", rep.first_violation);
        assert_eq!(sorted(rep.endpoint.infected_sites()), fin);
    }

    #[test]
    fn random_paths_meet_witness() {
        for seed in 0..40u64 {
            let side = 3 + (seed % 4) as usize;
            let l = 2 + (seed % 9) as usize;
            let (c, p, o) = random_supergood_instance(side, l, 0.5, 0.0, seed);
            let g = build_infection_path(&c, &p, o).unwrap();
            let rep = verify_legal(&c, &g);
            assert!(rep.legal, "seed {seed}: {:?}", rep.first_violation);
            assert!(rep.endpoint.is_infected(o));
            let w = &rep.witness;
            assert!(w.windows_declared);
            assert!(w.n_moves <= (4 * side * side * l) as u64, "seed {seed}: N={}", w.n_moves);
            assert!(w.hamming_budget <= 3 * side as u64);
            assert!(w.locality_volume <= 3 * (side * side) as u64);
        }
    }

    #[test]
    fn line_through_origin_is_immediate() {
        let bx = LatticeBox::square(4, Boundary::HealthyFrozen);
        let env = Arc::new(Environment::unpolluted(bx));
        let inf: Vec<Site> = (0..4).map(|y| Site::new2(0, y)).chain([Site::new2(1, 1), Site::new2(2, 2), Site::new2(3, 3)]).collect();
        let c = Configuration::from_infected(env, &inf).unwrap();
        let p = BoxPath { boxes: vec![CoarseBox::new((0, 0), 4)] };
        let g = build_infection_path(&c, &p, Site::ORIGIN).unwrap();
        assert!(g.is_empty());
        assert!(apply(&c, &g).unwrap().is_infected(Site::ORIGIN));
    }

    #[test]
    fn supergood_search() {
        let (c, _, _, _) = figures::path_instance();
        let sc = Z2Scales { side: 5, length: 3, q: 0.5, epsilon: 1.0 };
        let p = find_supergood_path(&c, &sc, (1, 1)).unwrap();
        assert_eq!(p.boxes.iter().map(|b| b.grid).collect::<Vec<_>>(), vec![(0, 0), (0, 1), (1, 1)]);
        let short = Z2Scales { length: 2, ..sc };
        assert!(find_supergood_path(&c, &short, (1, 1)).is_none());
        // box (1,0) is empty, hence not good
        assert!(find_supergood_path(&c, &sc, (1, 0)).is_none());
        let cl = good_cluster(&c, 5);
        assert_eq!(cl.sizes, vec![3]);
    }
}
