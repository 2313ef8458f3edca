//! Layer-by-layer sweeps up a sail and the lemma-level sequences built on them.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use super::geometry::unit;
use super::sail::Sail;
use super::Z3Error;
use crate::lattice::{Configuration, Site, State};
use crate::moves::{censor, record, reverse, Move, MoveSequence};

/// Applies moves while checking them. Sites infected in `reference` or listed
/// in `keep` are never cured.
struct Builder<'a> {
    cur: Configuration,
    reference: &'a Configuration,
    keep: &'a HashSet<Site>,
    seq: MoveSequence,
}

impl<'a> Builder<'a> {
    fn new(start: Configuration, reference: &'a Configuration, keep: &'a HashSet<Site>) -> Builder<'a> {
        Builder { cur: start, reference, keep, seq: MoveSequence::new() }
    }

    fn legal(&self, s: Site) -> bool {
        self.cur.env().is_susceptible(s) && self.cur.constraint(s)
    }

    fn infect(&mut self, s: Site) -> Result<(), Z3Error> {
        if self.cur.is_infected(s) {
            return Ok(());
        }
        if !self.legal(s) {
            return Err(Z3Error::Illegal(s));
        }
        self.cur.set(s, State::Infected).unwrap();
        self.seq.push(Move::infect(s));
        Ok(())
    }

    fn curable(&self, s: Site) -> bool {
        self.cur.is_infected(s) && !self.reference.is_infected(s) && !self.keep.contains(&s)
    }

    fn cure(&mut self, s: Site) -> Result<(), Z3Error> {
        if !self.curable(s) {
            return Ok(());
        }
        if !self.legal(s) {
            return Err(Z3Error::Illegal(s));
        }
        self.cur.set(s, State::Healthy).unwrap();
        self.seq.push(Move::cure(s));
        Ok(())
    }

    fn try_cure(&mut self, s: Site) -> bool {
        if self.curable(s) && self.legal(s) {
            self.cur.set(s, State::Healthy).unwrap();
            self.seq.push(Move::cure(s));
            true
        } else {
            false
        }
    }
}

fn neighbors(s: Site) -> [Site; 6] {
    [
        s.offset([1, 0, 0]),
        s.offset([-1, 0, 0]),
        s.offset([0, 1, 0]),
        s.offset([0, -1, 0]),
        s.offset([0, 0, 1]),
        s.offset([0, 0, -1]),
    ]
}

/// BFS distances inside `set` from `sources`.
fn distances(set: &HashSet<Site>, sources: &[Site]) -> HashMap<Site, u32> {
    let mut d: HashMap<Site, u32> = sources.iter().map(|&s| (s, 0)).collect();
    let mut q: VecDeque<Site> = sources.iter().copied().collect();
    while let Some(s) = q.pop_front() {
        let ds = d[&s];
        for n in neighbors(s) {
            if set.contains(&n) && !d.contains_key(&n) {
                d.insert(n, ds + 1);
                q.push_back(n);
            }
        }
    }
    d
}

/// One step of the sweep: with `S_i` infected, infect `S_{i+1}` and cure
/// `S_i` (and, above a transition layer, the part of `S_i + e₃` off `S_{i+1}`)
/// wherever that is legal.
fn layer_step(b: &mut Builder, sail: &Sail, i: i32) -> Result<(), Z3Error> {
    let br = &sail.brick;
    let up = i + 1;
    let units: Vec<(i32, i32)> = sail.units(i).to_vec();
    let s_i = sail.layer(i);
    let s_set: HashSet<Site> = s_i.iter().copied().collect();
    let p0: Vec<Site> = units.iter().flat_map(|&v| unit(v, up)).map(|s| br.world(s)).collect();
    let p_set: HashSet<Site> = p0.iter().copied().collect();

    // spread along S_i + e₃ from its infected sites, each new site resting on S_i
    let seeds: Vec<Site> = p0.iter().copied().filter(|&s| b.cur.is_infected(s)).collect();
    if seeds.is_empty() {
        return Err(Z3Error::NoSeed(i));
    }
    let mut seen: HashSet<Site> = seeds.iter().copied().collect();
    let mut q: VecDeque<Site> = seeds.into_iter().collect();
    while let Some(w) = q.pop_front() {
        for n in neighbors(w) {
            if p_set.contains(&n) && seen.insert(n) {
                b.infect(n)?;
                q.push_back(n);
            }
        }
    }
    if seen.len() != p_set.len() {
        return Err(Z3Error::Stuck(i));
    }

    // cure S_i leaf-first towards sites that can stay or have outside support
    let upv = br.up();
    let mut sources: Vec<Site> = s_i
        .iter()
        .copied()
        .filter(|&v| {
            !b.curable(v)
                || neighbors(v).iter().any(|&n| !s_set.contains(&n) && n != v.offset(upv) && b.cur.is_infected(n))
        })
        .collect();
    if sources.is_empty() {
        sources.push(s_i[0]);
    }
    let dist = distances(&s_set, &sources);
    let mut order: Vec<Site> = s_i.iter().copied().filter(|s| dist[s] > 0).collect();
    order.sort_by_key(|s| std::cmp::Reverse(dist[s]));
    for v in order {
        b.cure(v)?;
    }
    for v in sources {
        b.try_cure(v);
    }

    if Sail::is_transition(i) {
        exchange_corners(b, sail, i)?;
    }
    Ok(())
}

/// Above a transition layer: swap exterior corner units of the infected path
/// for their diagonal neighbours in `S_{i+1}`, then fill and tidy up.
fn exchange_corners(b: &mut Builder, sail: &Sail, i: i32) -> Result<(), Z3Error> {
    let br = &sail.brick;
    let up = i + 1;
    let target: HashSet<(i32, i32)> = sail.units(up).iter().copied().collect();
    let mut p: Vec<(i32, i32)> = sail.units(i).to_vec();
    let w = |v: (i32, i32), j: i32| br.world([v.0, 4 * v.1 + j, up]);
    loop {
        let hit = (1..p.len().saturating_sub(1)).find(|&j| {
            let u = p[j];
            p[j - 1] == (u.0 - 1, u.1)
                && p[j + 1] == (u.0, u.1 - 1)
                && !target.contains(&u)
                && target.contains(&(u.0 - 1, u.1 - 1))
        });
        let Some(j) = hit else { break };
        let u = p[j];
        let nw = (u.0 - 1, u.1 - 1);
        for jj in (0..4).rev() {
            b.infect(w(nw, jj))?;
        }
        for jj in (0..4).rev() {
            b.cure(w(u, jj))?;
        }
        p[j] = nw;
    }
    let t_sites = sail.layer(up);
    loop {
        let mut changed = false;
        for &s in &t_sites {
            if !b.cur.is_infected(s) && b.legal(s) {
                b.infect(s)?;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if t_sites.iter().any(|&s| !b.cur.is_infected(s)) {
        return Err(Z3Error::Stuck(i));
    }
    let t_set: HashSet<Site> = t_sites.into_iter().collect();
    let mut rest: Vec<Site> = sail.layer(i);
    rest.extend(sail.units(i).iter().flat_map(|&v| unit(v, up)).map(|s| br.world(s)));
    rest.retain(|s| !t_set.contains(s));
    loop {
        let mut changed = false;
        for &s in rest.iter().rev() {
            changed |= b.try_cure(s);
        }
        if !changed {
            break;
        }
    }
    Ok(())
}

fn with_infected(eta: &Configuration, xs: impl IntoIterator<Item = Site>) -> Configuration {
    let v: Vec<Site> = xs.into_iter().collect();
    eta.set_state(&v, State::Infected).expect("sites inside the box")
}

/// From `η` with `S_i` infected: a sequence after which `S_{i+1}` is infected
/// and the rest agrees with `η` up to a few boundary sites.
pub fn line_by_line(eta: &Configuration, sail: &Sail, i: i32) -> Result<MoveSequence, Z3Error> {
    if i < 0 || i + 1 >= sail.brick.layers() {
        return Err(Z3Error::Stuck(i));
    }
    let keep = HashSet::new();
    let mut b = Builder::new(with_infected(eta, sail.layer(i)), eta, &keep);
    layer_step(&mut b, sail, i)?;
    Ok(b.seq)
}

/// The pieces of [`infect_beyond_separator`], kept for audits.
#[derive(Clone, Debug)]
pub struct IbsParts {
    /// Highest layer whose sail part misses the top component.
    pub i0: i32,
    /// Component of the brick minus the separator that holds the top face.
    pub upper: HashSet<Site>,
    /// `η` with `S_{i0}` infected: start of the unrestricted sweep.
    pub sweep_start: Configuration,
    /// The unrestricted sweep (cures of the targets suppressed).
    pub sweep: MoveSequence,
    /// The sweep restricted to the top component, run from `η^{X1}`.
    pub forward: MoveSequence,
    /// `forward` followed by its reversal with cures of `X1 ∪ X2` censored.
    pub full: MoveSequence,
}

fn upper_component(sail: &Sail, sep: &HashSet<Site>) -> HashSet<Site> {
    let br = &sail.brick;
    let top = br.layers() - 1;
    let start: Vec<Site> = br.layer(top).into_iter().filter(|s| !sep.contains(s)).collect();
    let mut seen: HashSet<Site> = start.iter().copied().collect();
    let mut q: VecDeque<Site> = start.into_iter().collect();
    while let Some(s) = q.pop_front() {
        for n in neighbors(s) {
            if !sep.contains(&n) && br.contains(n) && seen.insert(n) {
                q.push_back(n);
            }
        }
    }
    seen
}

fn sweep(
    eta: &Configuration,
    sail: &Sail,
    start: Configuration,
    from: i32,
    to: i32,
    keep: &HashSet<Site>,
) -> Result<(MoveSequence, Configuration), Z3Error> {
    let mut b = Builder::new(start, eta, keep);
    for i in from..to {
        layer_step(&mut b, sail, i)?;
    }
    Ok((b.seq, b.cur))
}

fn top_layer(sail: &Sail, xs: &HashSet<Site>) -> i32 {
    xs.iter().map(|&s| sail.brick.std(s)[2]).max().unwrap_or(-1)
}

pub fn ibs_parts(
    eta: &Configuration,
    sail: &Sail,
    sep: &HashSet<Site>,
    x1: &HashSet<Site>,
    x2: &HashSet<Site>,
) -> Result<IbsParts, Z3Error> {
    let br = &sail.brick;
    let thick = sail.thick();
    if !x1.is_subset(sep) || sep.iter().any(|s| thick.contains(s) && !x1.contains(s)) {
        return Err(Z3Error::NotSeparating(br.anchor));
    }
    let upper = upper_component(sail, sep);
    let i0 = (0..br.layers())
        .rev()
        .find(|&k| sail.layer(k).iter().all(|s| !upper.contains(s)))
        .ok_or(Z3Error::NotSeparating(br.anchor))?;
    for &s in x2 {
        if !upper.contains(&s) || !thick.contains(&s) || br.std(s)[2] <= i0 {
            return Err(Z3Error::BadTarget(s));
        }
    }
    let start = with_infected(eta, x1.iter().copied());
    let sweep_start = with_infected(eta, sail.layer(i0));
    if x2.is_empty() {
        return Ok(IbsParts {
            i0,
            upper,
            sweep_start,
            sweep: MoveSequence::new(),
            forward: MoveSequence::new(),
            full: MoveSequence::new(),
        });
    }
    let (sw, _) = sweep(eta, sail, sweep_start.clone(), i0, top_layer(sail, x2), x2)?;
    let kept: Vec<Move> = sw.moves.iter().copied().filter(|m| upper.contains(&m.site)).collect();
    let forward = MoveSequence::from_moves(kept);
    let rec = record(&start, &forward).map_err(|_| Z3Error::Illegal(br.anchor))?;
    let back: HashSet<Site> = x1.union(x2).copied().collect();
    let full = forward.clone().concat(&censor(&reverse(&rec).unwrap(), &back));
    Ok(IbsParts { i0, upper, sweep_start, sweep: sw, forward, full })
}

/// From `η^{X1}` to `η^{X1 ∪ X2}`, where `X1` is the thick sail on the
/// separator and `X2` lies in the thick sail above it.
pub fn infect_beyond_separator(
    eta: &Configuration,
    sail: &Sail,
    sep: &HashSet<Site>,
    x1: &HashSet<Site>,
    x2: &HashSet<Site>,
) -> Result<MoveSequence, Z3Error> {
    Ok(ibs_parts(eta, sail, sep, x1, x2)?.full)
}

/// From `η^{X1 ∪ X2}` back to `η^{X1}`.
pub fn clean_above(
    eta: &Configuration,
    sail: &Sail,
    sep: &HashSet<Site>,
    x1: &HashSet<Site>,
    x2: &HashSet<Site>,
) -> Result<MoveSequence, Z3Error> {
    let g = infect_beyond_separator(eta, sail, sep, x1, x2)?;
    rev_from(&with_infected(eta, x1.iter().copied()), &g)
}

fn rev_from(start: &Configuration, g: &MoveSequence) -> Result<MoveSequence, Z3Error> {
    let rec = record(start, g).map_err(|_| Z3Error::Stuck(-1))?;
    Ok(reverse(&rec).unwrap())
}

/// With the bottom layer of the sail already infected in `η`: from `η` to
/// `η^{X}` for `X` in the thick sail.
pub fn infect_from_bottom(eta: &Configuration, sail: &Sail, x: &HashSet<Site>) -> Result<MoveSequence, Z3Error> {
    if sail.layer(0).iter().any(|&s| !eta.is_infected(s)) {
        return Err(Z3Error::NotSupergood);
    }
    let thick = sail.thick();
    if let Some(&s) = x.iter().find(|s| !thick.contains(s)) {
        return Err(Z3Error::BadTarget(s));
    }
    if x.is_empty() {
        return Ok(MoveSequence::new());
    }
    let (sw, _) = sweep(eta, sail, eta.clone(), 0, top_layer(sail, x), x)?;
    let rec = record(eta, &sw).unwrap();
    Ok(sw.concat(&censor(&reverse(&rec).unwrap(), x)))
}

fn meet(a: &BTreeSet<Site>, b: &BTreeSet<Site>) -> HashSet<Site> {
    a.intersection(b).copied().collect()
}

/// `B ▷ B'`: from `η^{X1}` to `η^{X1 ∪ X'}` for `X'` in the thick sail of `B'`
/// above the part of `B` it overlaps.
pub fn pass_to_next_brick(
    eta: &Configuration,
    s: &Sail,
    s2: &Sail,
    sep: &HashSet<Site>,
    x1: &HashSet<Site>,
    xt: &HashSet<Site>,
) -> Result<MoveSequence, Z3Error> {
    let k = s2.brick.pointed_section(&s.brick).ok_or(Z3Error::NotPointing)?;
    let t1 = s.thick();
    let t2 = s2.thick();
    let x2 = meet(&t1, &t2);
    let g1 = infect_beyond_separator(eta, s, sep, x1, &x2)?;
    let sep2 = meet(&t1, &s2.brick.section(k));
    let g2 = infect_beyond_separator(eta, s2, &sep2, &x2, xt)?;
    let g3 = rev_from(&with_infected(eta, x1.iter().copied()), &g1)?;
    Ok(g1.concat(&g2).concat(&g3))
}

/// Result of moving a seed one route further.
#[derive(Clone, Debug)]
pub struct Translation {
    pub seq: MoveSequence,
    /// Infected set left at the end, in the last brick of the route.
    pub seed: HashSet<Site>,
    /// Separator of the last brick that `seed` is the thick-sail part of.
    pub separator: HashSet<Site>,
}

/// Seed `x0` (the thick sail of `route[0]` on separator `sep0`, inside its
/// section 3) is carried to the last brick of the route, then the first brick
/// is cleaned by going round the cleaning loop. Ends at `η^{seed}`.
pub fn translate_infection(
    eta: &Configuration,
    route: &[Sail; 4],
    cleaning: &[Sail; 8],
    sep0: &HashSet<Site>,
    x0: &HashSet<Site>,
) -> Result<Translation, Z3Error> {
    let thick: Vec<BTreeSet<Site>> = route.iter().map(|s| s.thick()).collect();
    let mut seeds = vec![x0.clone()];
    let mut seps = vec![sep0.clone()];
    for j in 0..3 {
        let k = route[j + 1].brick.pointed_section(&route[j].brick).ok_or(Z3Error::NotPointing)?;
        seeds.push(meet(&thick[j], &thick[j + 1]));
        seps.push(meet(&thick[j], &route[j + 1].brick.section(k)));
    }
    let mut fwd = vec![];
    for j in 0..3 {
        fwd.push(infect_beyond_separator(eta, &route[j], &seps[j], &seeds[j], &seeds[j + 1])?);
    }
    let mut seq = MoveSequence::new();
    for g in &fwd {
        seq.extend(g);
    }
    for j in (0..2).rev() {
        seq.extend(&rev_from(&with_infected(eta, seeds[j].iter().copied()), &fwd[j])?);
    }

    // round the cleaning loop back into section 0 of the first brick
    let mut chain: Vec<&Sail> = vec![&route[3]];
    chain.extend(cleaning.iter());
    chain.push(&route[0]);
    let cthick: Vec<BTreeSet<Site>> = chain.iter().map(|s| s.thick()).collect();
    let mut z = vec![seeds[3].clone()];
    let mut w = vec![seps[3].clone()];
    for j in 0..chain.len() - 1 {
        let k = chain[j + 1].brick.pointed_section(&chain[j].brick).ok_or(Z3Error::NotPointing)?;
        z.push(meet(&cthick[j], &cthick[j + 1]));
        w.push(meet(&cthick[j], &chain[j + 1].brick.section(k)));
    }
    let n = chain.len() - 1;
    let mut loop_fwd = vec![];
    for j in 0..n {
        loop_fwd.push(infect_beyond_separator(eta, chain[j], &w[j], &z[j], &z[j + 1])?);
    }
    let mut round = MoveSequence::new();
    for g in &loop_fwd {
        round.extend(g);
    }
    for j in (0..n - 1).rev() {
        round.extend(&rev_from(&with_infected(eta, z[j].iter().copied()), &loop_fwd[j])?);
    }
    seq.extend(&round);
    seq.extend(&clean_above(eta, &route[0], &w[n], &z[n], x0)?);
    let rec = record(&with_infected(eta, z[0].iter().copied()), &round).map_err(|_| Z3Error::Stuck(-1))?;
    seq.extend(&reverse(&rec).unwrap());
    Ok(Translation { seq, seed: z[0].clone(), separator: w[0].clone() })
}
