//! Brick frames, regions, cells, and the fixed translation and cleaning routes.

use std::collections::BTreeSet;

use serde::Serialize;

use super::Z3Error;
use crate::lattice::Site;

/// Standard-frame coordinates of a site, `[0,4L)×[0,16L)×[0,32L)`.
pub type Std = [i32; 3];

/// Anchor-to-flag offset of the standard brick, in units of L.
const STD_DELTA: [i32; 3] = [-4, -16, 32];
const STD_ANCHOR: [i32; 3] = [4, 16, 0];

/// An oriented 4L×16L×32L box given by its anchor and flag corners.
///
/// Standard axis `k` is carried to world axis `axes[k].0` with sign
/// `axes[k].1`; a standard site `s` lands at `t + s` along a positive axis and
/// at `t - s - 1` along a negative one.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct Brick {
    pub anchor: Site,
    pub flag: Site,
    pub l: i32,
    axes: [(usize, i32); 3],
    t: [i32; 3],
}

impl Brick {
    pub fn new(anchor: Site, flag: Site, l: i32) -> Result<Brick, Z3Error> {
        if l < 1 {
            return Err(Z3Error::BadBrick(anchor, flag));
        }
        let d: Vec<i32> = (0..3).map(|j| flag.0[j] - anchor.0[j]).collect();
        let mut axes = [(0usize, 0i32); 3];
        let mut used = [false; 3];
        for k in 0..3 {
            let want = STD_DELTA[k].abs() * l;
            let j = (0..3).find(|&j| !used[j] && d[j].abs() == want).ok_or(Z3Error::BadBrick(anchor, flag))?;
            used[j] = true;
            axes[k] = (j, d[j].signum() * STD_DELTA[k].signum());
        }
        let mut t = [0i32; 3];
        for k in 0..3 {
            let (j, s) = axes[k];
            t[j] = anchor.0[j] - s * STD_ANCHOR[k] * l;
        }
        Ok(Brick { anchor, flag, l, axes, t })
    }

    pub fn standard(l: i32) -> Brick {
        Brick::new(Site::new3(4 * l, 16 * l, 0), Site::new3(0, 0, 32 * l), l).unwrap()
    }

    /// Multiples of L, as in the route tables.
    pub fn scaled(anchor: [i32; 3], flag: [i32; 3], l: i32) -> Brick {
        let a = Site(anchor.map(|v| v * l));
        let f = Site(flag.map(|v| v * l));
        Brick::new(a, f, l).unwrap()
    }

    pub fn translate(&self, d: Site) -> Brick {
        Brick::new(self.anchor.offset(d.0), self.flag.offset(d.0), self.l).unwrap()
    }

    pub fn dims(&self) -> Std {
        [4 * self.l, 16 * self.l, 32 * self.l]
    }

    pub fn layers(&self) -> i32 {
        32 * self.l
    }

    /// World axis and sign of standard axis `k`.
    pub fn axis(&self, k: usize) -> (usize, i32) {
        self.axes[k]
    }

    pub fn world(&self, s: Std) -> Site {
        let mut w = [0i32; 3];
        for k in 0..3 {
            let (j, sg) = self.axes[k];
            w[j] = if sg > 0 { self.t[j] + s[k] } else { self.t[j] - s[k] - 1 };
        }
        Site(w)
    }

    pub fn std(&self, w: Site) -> Std {
        let mut s = [0i32; 3];
        for k in 0..3 {
            let (j, sg) = self.axes[k];
            s[k] = if sg > 0 { w.0[j] - self.t[j] } else { self.t[j] - w.0[j] - 1 };
        }
        s
    }

    pub fn contains_std(&self, s: Std) -> bool {
        let d = self.dims();
        (0..3).all(|k| s[k] >= 0 && s[k] < d[k])
    }

    pub fn contains(&self, w: Site) -> bool {
        self.contains_std(self.std(w))
    }

    /// Sites of the standard-frame box `[lo, hi)`, in world coordinates.
    pub fn region(&self, lo: Std, hi: Std) -> BTreeSet<Site> {
        let mut out = BTreeSet::new();
        for a in lo[0]..hi[0] {
            for b in lo[1]..hi[1] {
                for c in lo[2]..hi[2] {
                    out.insert(self.world([a, b, c]));
                }
            }
        }
        out
    }

    /// World bounding box `(lower, upper)` inclusive.
    pub fn world_bounds(&self) -> (Site, Site) {
        let d = self.dims();
        let a = self.world([0, 0, 0]);
        let b = self.world([d[0] - 1, d[1] - 1, d[2] - 1]);
        let lo = Site([0, 1, 2].map(|j| a.0[j].min(b.0[j])));
        let hi = Site([0, 1, 2].map(|j| a.0[j].max(b.0[j])));
        (lo, hi)
    }

    pub fn sites(&self) -> BTreeSet<Site> {
        self.region([0, 0, 0], self.dims())
    }

    pub fn base(&self) -> BTreeSet<Site> {
        let l = self.l;
        self.region([0, 0, 0], [4 * l, 16 * l, 16 * l])
    }

    pub fn top(&self) -> BTreeSet<Site> {
        let l = self.l;
        self.region([0, 0, 16 * l], [4 * l, 16 * l, 32 * l])
    }

    pub fn section(&self, k: i32) -> BTreeSet<Site> {
        let l = self.l;
        self.region([0, 0, 4 * k * l], [4 * l, 16 * l, 4 * (k + 1) * l])
    }

    pub fn tip(&self) -> BTreeSet<Site> {
        let l = self.l;
        self.region([0, 0, 16 * l], [4 * l, 4 * l, 32 * l])
    }

    pub fn layer(&self, i: i32) -> BTreeSet<Site> {
        let l = self.l;
        self.region([0, 0, i], [4 * l, 16 * l, i + 1])
    }

    /// World step that raises the standard layer index by one.
    pub fn up(&self) -> [i32; 3] {
        let (j, s) = self.axes[2];
        let mut e = [0; 3];
        e[j] = s;
        e
    }

    /// Section of this brick whose sites coincide with the tip of `from`.
    pub fn pointed_section(&self, from: &Brick) -> Option<i32> {
        let tip = from.tip();
        (0..8).find(|&k| self.section(k) == tip)
    }
}

/// `from ▷_k to`: the tip of `from` is exactly section `k` of `to`.
pub fn points_to(from: &Brick, to: &Brick, k: i32) -> bool {
    from.tip() == to.section(k)
}

/// Proto-brick vertex of a standard site.
pub fn proto_of(s: Std) -> [i32; 3] {
    [s[0], s[1].div_euclid(4), s[2].div_euclid(16)]
}

/// Standard sites of `cell(x̂) = (x̂1, 4x̂2, 16x̂3) + {0}×[0,4)×[0,16)`.
pub fn cell(x: [i32; 3]) -> Vec<Std> {
    let mut out = Vec::with_capacity(64);
    for b in 0..4 {
        for c in 0..16 {
            out.push([x[0], 4 * x[1] + b, 16 * x[2] + c]);
        }
    }
    out
}

/// The four standard sites of the unit of proto column `(x̂1, x̂2)` at layer `i`.
pub fn unit(v: (i32, i32), i: i32) -> [Std; 4] {
    [0, 1, 2, 3].map(|j| [v.0, 4 * v.1 + j, i])
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum Route {
    B,
    A,
}

impl Route {
    pub fn parse(s: &str) -> Option<Route> {
        match s {
            "B" | "b" => Some(Route::B),
            "A" | "a" => Some(Route::A),
            _ => None,
        }
    }

    /// Offset of the route's last brick from its first.
    pub fn shift(self, l: i32) -> Site {
        match self {
            Route::B => Site::new3(4 * l, 16 * l, 4 * l),
            Route::A => Site::new3(16 * l, 16 * l, 4 * l),
        }
    }
}

/// B⁰ in our frame: the box `[0,4L)×[0,16L)×[0,32L)`.
pub fn base_brick(l: i32) -> Brick {
    Brick::scaled([0, 0, 0], [4, 16, 32], l)
}

/// The four bricks of a translation route, each pointing to the next at section 3.
pub fn translation_route(route: Route, l: i32) -> [Brick; 4] {
    let b1 = Brick::scaled([-12, 16, 32], [20, 12, 16], l);
    match route {
        Route::B => [
            base_brick(l),
            b1,
            Brick::scaled([20, 0, 16], [4, 32, 20], l),
            Brick::scaled([4, 16, 4], [8, 32, 36], l),
        ],
        Route::A => [
            base_brick(l),
            b1,
            Brick::scaled([4, 0, 16], [20, 32, 20], l),
            Brick::scaled([16, 16, 4], [20, 32, 36], l),
        ],
    }
}

/// Anchor and flag (units of L) of our cleaning loop C⁰..C⁷.
pub const CLEANING: [([i32; 3], [i32; 3]); 8] = [
    ([4, 32, 36], [36, 28, 20]),
    ([36, 32, 24], [20, 0, 20]),
    ([24, 16, 24], [20, 0, -8]),
    ([36, 4, 8], [4, 0, -8]),
    ([20, 16, -4], [4, -16, -8]),
    ([8, 0, -16], [4, -16, 16]),
    ([20, -12, 16], [-12, -16, 0]),
    ([-12, -16, 4], [4, 16, 0]),
];

/// Section index each cleaning brick receives its predecessor's tip in.
/// Entry 0 depends on the route (0 after B³, 3 after A³); the last entry is
/// the section of B⁰ reached from C⁷.
pub const CLEANING_SECTIONS: [i32; 9] = [0, 0, 0, 3, 3, 2, 3, 0, 0];

pub fn cleaning_route(l: i32) -> [Brick; 8] {
    CLEANING.map(|(a, f)| Brick::scaled(a, f, l))
}

/// Every pointing relation of both routes and the cleaning loop, with its
/// expected section.
pub fn route_certificates(l: i32) -> Vec<(Brick, Brick, i32)> {
    let b = translation_route(Route::B, l);
    let a = translation_route(Route::A, l);
    let c = cleaning_route(l);
    let mut out = vec![];
    for r in [&b, &a] {
        for k in 0..3 {
            out.push((r[k], r[k + 1], 3));
        }
    }
    out.push((b[3], c[0], 0));
    out.push((a[3], c[0], 3));
    for k in 0..7 {
        out.push((c[k], c[k + 1], CLEANING_SECTIONS[k + 1]));
    }
    out.push((c[7], b[0], 0));
    out
}

/// Inclusive world bounds of all bricks of both routes and the cleaning loop.
pub fn family_bounds(l: i32) -> (Site, Site) {
    let mut bricks: Vec<Brick> = translation_route(Route::B, l).to_vec();
    bricks.extend(translation_route(Route::A, l));
    bricks.extend(cleaning_route(l));
    let mut lo = [i32::MAX; 3];
    let mut hi = [i32::MIN; 3];
    for b in &bricks {
        let (a, c) = b.world_bounds();
        for j in 0..3 {
            lo[j] = lo[j].min(a.0[j]);
            hi[j] = hi[j].max(c.0[j]);
        }
    }
    (Site(lo), Site(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn standard_brick_regions() {
        let b = Brick::standard(1);
        assert_eq!(b.world([1, 2, 3]), Site::new3(1, 2, 3));
        assert_eq!(b.sites().len(), 4 * 16 * 32);
        let tip = b.tip();
        assert_eq!(tip.len(), 4 * 4 * 16);
        assert!(tip.iter().all(|s| s.x() < 4 && s.y() < 4 && (16..32).contains(&s.z())));
        assert!(!b.contains(b.anchor) && !b.contains(b.flag));
        let secs: usize = (0..8).map(|k| b.section(k).len()).sum();
        assert_eq!(secs, b.sites().len());
        assert_eq!(b.base().len() + b.top().len(), b.sites().len());
    }

    #[test]
    fn frames_round_trip() {
        for l in 1..=2 {
            for br in translation_route(Route::A, l).iter().chain(cleaning_route(l).iter()) {
                for s in [[0, 0, 0], [4 * l - 1, 3, 7], [1, 16 * l - 1, 32 * l - 1]] {
                    assert_eq!(br.std(br.world(s)), s);
                }
                // the flag is a corner of the tip's bounding box
                let tip = br.tip();
                let f = br.flag;
                assert!(tip.iter().all(|s| s.linf(f) <= 16 * l));
            }
        }
    }

    #[test]
    fn bad_offsets_rejected() {
        assert!(Brick::new(Site::ORIGIN, Site::new3(4, 16, 31), 1).is_err());
        assert!(Brick::new(Site::ORIGIN, Site::new3(16, 16, 32), 1).is_err());
    }

    #[test]
    fn cells_tile_the_brick() {
        let l = 1;
        let mut seen: HashMap<Std, usize> = HashMap::new();
        for a in 0..4 * l {
            for b in 0..4 * l {
                for c in 0..2 * l {
                    for s in cell([a, b, c]) {
                        assert_eq!(proto_of(s), [a, b, c]);
                        *seen.entry(s).or_default() += 1;
                    }
                }
            }
        }
        assert_eq!(seen.len(), (4 * 16 * 32 * l * l * l) as usize);
        assert!(seen.values().all(|&n| n == 1));
        assert_eq!(cell([0, 0, 0]).len(), 64);
        assert!(cell([0, 0, 0]).iter().all(|s| s[0] == 0 && s[1] < 4 && s[2] < 16));
    }

    #[test]
    fn routes_point_and_translate() {
        for l in 1..=3 {
            for (from, to, k) in route_certificates(l) {
                assert!(points_to(&from, &to, k), "L={l} {from:?} -> {to:?} at {k}");
            }
            let b0 = base_brick(l);
            for r in [Route::B, Route::A] {
                let last = translation_route(r, l)[3];
                assert_eq!(last, b0.translate(r.shift(l)));
            }
        }
    }

    #[test]
    fn family_bounds_at_unit_scale() {
        let (lo, hi) = family_bounds(1);
        assert_eq!(lo, Site::new3(-12, -16, -16));
        assert_eq!(hi, Site::new3(35, 31, 35));
    }
}
