//! Sails: the diagonal scaffold of a good brick, its search and an independent checker.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use super::geometry::{cell, unit, Brick, Std};
use super::Z3Error;
use crate::lattice::{Configuration, Site};

/// Strict bounds `3L + lo < x̂1 + x̂2 + x̂3 < 4L + hi` on sail vertices.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct SlabRule {
    pub lo: i32,
    pub hi: i32,
}

impl SlabRule {
    /// `3L < Σ < 4L`. Empty for L ≤ 2 once the designated vertex is required.
    pub const NARROW: SlabRule = SlabRule { lo: 0, hi: 0 };
    /// `3L − 2 < Σ < 4L + 2`, usable at L ∈ {1, 2, 3}.
    pub const DESK: SlabRule = SlabRule { lo: -2, hi: 2 };

    pub fn admits(&self, l: i32, v: [i32; 3]) -> bool {
        let s = v[0] + v[1] + v[2];
        3 * l + self.lo < s && s < 4 * l + self.hi
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct SailOptions {
    pub rule: SlabRule,
    /// Only accept sails whose bottom layer is fully infected.
    pub require_bottom_infected: bool,
}

impl Default for SailOptions {
    fn default() -> Self {
        SailOptions { rule: SlabRule::DESK, require_bottom_infected: false }
    }
}

/// `paths[k]` lists the proto vertices `(x̂1, x̂2)` of layer k in path order,
/// from the `x̂1 = 0` end to the `x̂2 = 0` end.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct Sail {
    pub brick: Brick,
    pub paths: Vec<Vec<(i32, i32)>>,
}

impl Sail {
    /// Unit columns of layer `i` (standard index).
    pub fn units(&self, i: i32) -> &[(i32, i32)] {
        &self.paths[i.div_euclid(16) as usize]
    }

    pub fn is_transition(i: i32) -> bool {
        i % 16 == 15
    }

    /// `S_i` in standard coordinates, unit by unit.
    pub fn layer_std(&self, i: i32) -> Vec<Std> {
        self.units(i).iter().flat_map(|&v| unit(v, i)).collect()
    }

    pub fn layer(&self, i: i32) -> Vec<Site> {
        self.layer_std(i).into_iter().map(|s| self.brick.world(s)).collect()
    }

    pub fn proto(&self) -> BTreeSet<[i32; 3]> {
        let mut out = BTreeSet::new();
        for (k, p) in self.paths.iter().enumerate() {
            for &(a, b) in p {
                out.insert([a, b, k as i32]);
            }
        }
        out
    }

    pub fn sites(&self) -> BTreeSet<Site> {
        (0..self.brick.layers()).flat_map(|i| self.layer(i)).collect()
    }

    /// `S̄ = S ∪ ((S + e₃) ∩ B)`.
    pub fn thick(&self) -> BTreeSet<Site> {
        let mut out = self.sites();
        let top = self.brick.layers();
        for i in 0..top - 1 {
            for s in self.layer_std(i) {
                out.insert(self.brick.world([s[0], s[1], i + 1]));
            }
        }
        out
    }
}

fn cell_susceptible(cfg: &Configuration, b: &Brick, v: [i32; 3]) -> bool {
    cell(v).into_iter().all(|s| cfg.env().is_susceptible(b.world(s)))
}

struct Search<'a> {
    cfg: &'a Configuration,
    brick: Brick,
    l: i32,
    opts: SailOptions,
    /// `ok[k][a][b]`: vertex `(a, b, k)` satisfies conditions 1 and 3.
    ok: Vec<Vec<Vec<bool>>>,
    dead: HashSet<(usize, Vec<(i32, i32)>)>,
}

impl<'a> Search<'a> {
    fn new(cfg: &'a Configuration, brick: &Brick, opts: SailOptions) -> Search<'a> {
        let l = brick.l;
        let n = 4 * l;
        let h = 2 * l;
        let susc: Vec<Vec<Vec<bool>>> = (0..h)
            .map(|k| (0..n).map(|a| (0..n).map(|b| cell_susceptible(cfg, brick, [a, b, k])).collect()).collect())
            .collect();
        let ok = (0..h)
            .map(|k| {
                (0..n)
                    .map(|a| {
                        (0..n)
                            .map(|b| {
                                let ku = k as usize;
                                let (au, bu) = (a as usize, b as usize);
                                let mut good = susc[ku][au][bu] && opts.rule.admits(l, [a, b, k]);
                                if k + 1 < h {
                                    good &= susc[ku + 1][au][bu];
                                    if a > 0 && b > 0 {
                                        good &= susc[ku + 1][au - 1][bu - 1];
                                    }
                                }
                                good
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Search { cfg, brick: *brick, l, opts, ok, dead: HashSet::new() }
    }

    fn vertex_ok(&self, k: i32, v: (i32, i32), prev: Option<&HashSet<(i32, i32)>>) -> bool {
        let n = 4 * self.l;
        if v.0 < 0 || v.1 < 0 || v.0 >= n || v.1 >= n || !self.ok[k as usize][v.0 as usize][v.1 as usize] {
            return false;
        }
        match prev {
            None => true,
            Some(p) => p.contains(&v) || p.contains(&(v.0 + 1, v.1 + 1)),
        }
    }

    /// Condition 6 for the sixteen layers of proto layer k, plus the optional
    /// bottom requirement.
    fn layer_infection_ok(&self, k: i32, path: &[(i32, i32)]) -> bool {
        let top = self.brick.layers();
        if k == 0 && self.opts.require_bottom_infected {
            let all = path.iter().flat_map(|&v| unit(v, 0)).all(|s| self.cfg.is_infected(self.brick.world(s)));
            if !all {
                return false;
            }
        }
        (16 * k..16 * k + 16).filter(|&i| i < top - 1).all(|i| {
            path.iter().flat_map(|&v| unit(v, i + 1)).any(|s| self.cfg.is_infected(self.brick.world(s)))
        })
    }

    /// Enumerate layer-k paths in order, calling `f` on each; stop when it returns true.
    fn paths(&self, k: i32, prev: Option<&HashSet<(i32, i32)>>, f: &mut dyn FnMut(&[(i32, i32)]) -> bool) -> bool {
        let n = 4 * self.l;
        let must = (k == self.l).then_some((self.l + 1, self.l + 1));
        let mut acc = Vec::new();
        for a in 0..n {
            if self.vertex_ok(k, (0, a), prev) {
                acc.push((0, a));
                if self.extend(k, prev, must, &mut acc, f) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }

    fn extend(
        &self,
        k: i32,
        prev: Option<&HashSet<(i32, i32)>>,
        must: Option<(i32, i32)>,
        acc: &mut Vec<(i32, i32)>,
        f: &mut dyn FnMut(&[(i32, i32)]) -> bool,
    ) -> bool {
        let &(x, y) = acc.last().unwrap();
        if y == 0 && must.is_none_or(|m| acc.contains(&m)) && f(acc) {
            return true;
        }
        // last two steps, 0 = ê1, 1 = −ê2
        let steps: Vec<u8> = acc.windows(2).rev().take(2).map(|w| if w[1].0 > w[0].0 { 0 } else { 1 }).collect();
        for (st, nv) in [(0u8, (x + 1, y)), (1u8, (x, y - 1))] {
            if steps.len() == 2 && steps[0] == st && steps[1] == st {
                continue;
            }
            if self.vertex_ok(k, nv, prev) {
                acc.push(nv);
                if self.extend(k, prev, must, acc, f) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }

    fn solve(&mut self, k: i32, prev: Option<Vec<(i32, i32)>>, out: &mut Vec<Vec<(i32, i32)>>) -> bool {
        let h = 2 * self.l;
        let prev_set: Option<HashSet<(i32, i32)>> = prev.as_ref().map(|p| p.iter().copied().collect());
        let mut cands: Vec<Vec<(i32, i32)>> = vec![];
        // collect first, then recurse, so the enumeration borrow ends
        self.paths(k, prev_set.as_ref(), &mut |p| {
            cands.push(p.to_vec());
            false
        });
        for p in cands {
            if self.dead.contains(&(k as usize, p.clone())) || !self.layer_infection_ok(k, &p) {
                continue;
            }
            out.push(p.clone());
            if k + 1 == h || self.solve(k + 1, Some(p.clone()), out) {
                return true;
            }
            out.pop();
            self.dead.insert((k as usize, p));
        }
        false
    }
}

/// First sail in enumeration order: layer 0 first, then start row ascending,
/// ê1 tried before −ê2. `None` when the brick is not good (or leaves the box).
pub fn find_sail(cfg: &Configuration, brick: &Brick, opts: SailOptions) -> Option<Sail> {
    let (lo, hi) = brick.world_bounds();
    if !cfg.bx().contains(lo) || !cfg.bx().contains(hi) {
        return None;
    }
    let mut s = Search::new(cfg, brick, opts);
    let mut out = vec![];
    s.solve(0, None, &mut out).then_some(Sail { brick: *brick, paths: out })
}

/// Re-check every good-brick condition for a proto set, straight from the
/// definitions. Returns the numbers of the failed conditions.
pub fn check_sail(cfg: &Configuration, brick: &Brick, proto: &BTreeSet<[i32; 3]>, rule: SlabRule) -> Vec<u8> {
    let l = brick.l;
    let n = 4 * l;
    let h = 2 * l;
    let in_proto = |v: [i32; 3]| (0..3).all(|j| v[j] >= 0) && v[0] < n && v[1] < n && v[2] < h;
    let mut failed = vec![];
    // 1
    let sigma = proto.iter().flat_map(|&v| {
        [v, [v[0], v[1], v[2] + 1], [v[0] - 1, v[1] - 1, v[2] + 1]].into_iter().filter(|&w| in_proto(w))
    });
    if !proto.iter().all(|&v| in_proto(v)) || !sigma.into_iter().all(|w| cell_susceptible(cfg, brick, w)) {
        failed.push(1);
    }
    // 2
    let stitched = proto.iter().filter(|v| v[2] > 0).all(|v| {
        proto.contains(&[v[0], v[1], v[2] - 1]) || proto.contains(&[v[0] + 1, v[1] + 1, v[2] - 1])
    });
    if !stitched {
        failed.push(2);
    }
    // 3
    if !proto.iter().all(|&v| rule.admits(l, v)) {
        failed.push(3);
    }
    // 4
    let paths_ok = (0..h).all(|k| {
        let mut layer: Vec<(i32, i32)> = proto.iter().filter(|v| v[2] == k).map(|v| (v[0], v[1])).collect();
        if layer.is_empty() {
            return false;
        }
        layer.sort_by_key(|&(a, b)| (a, -b));
        let steps: Option<Vec<u8>> = layer
            .windows(2)
            .map(|w| match (w[1].0 - w[0].0, w[1].1 - w[0].1) {
                (1, 0) => Some(0),
                (0, -1) => Some(1),
                _ => None,
            })
            .collect();
        let Some(steps) = steps else { return false };
        let no_triple = steps.windows(3).all(|t| !(t[0] == t[1] && t[1] == t[2]));
        layer[0].0 == 0 && layer.last().unwrap().1 == 0 && no_triple
    });
    if !paths_ok {
        failed.push(4);
    }
    // 5: standard site (L+1, 4L+4, 16L) lies in cell (L+1, L+1, L)
    if !proto.contains(&[l + 1, l + 1, l]) {
        failed.push(5);
    }
    // 6
    let seeded = (0..32 * l - 1).all(|i| {
        let k = i / 16;
        proto.iter().filter(|v| v[2] == k).any(|v| {
            (0..4).any(|j| cfg.is_infected(brick.world([v[0], 4 * v[1] + j, i + 1])))
        })
    });
    if !seeded {
        failed.push(6);
    }
    failed
}

/// `S ∩ S'` for a pointed pair.
pub fn sail_intersection(a: &Sail, b: &Sail) -> Result<BTreeSet<Site>, Z3Error> {
    if b.brick.pointed_section(&a.brick).is_none() {
        return Err(Z3Error::NotPointing);
    }
    let sb = b.sites();
    Ok(a.sites().intersection(&sb).copied().collect())
}
