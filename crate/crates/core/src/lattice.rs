//! Finite boxes of Z^2 / Z^3, quenched environments, configurations and the
//! two-infected-neighbour constraint.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitSet;

/// Stream tags mixed into the user seed (`seed ^ stream`).
pub mod stream {
    pub const ENVIRONMENT: u64 = 0x0000_0000_0000_0e01;
    pub const CONFIGURATION: u64 = 0x0000_0000_0000_0c02;
    pub const DYNAMICS: u64 = 0x0000_0000_0000_0d03;
    /// Replica `r` uses `REPLICA_BASE + r` (and `+ r + REPLICA_CFG` for its start).
    pub const REPLICA_BASE: u64 = 0x0001_0000_0000_0000;
    pub const REPLICA_CFG: u64 = 0x0000_8000_0000_0000;
}

/// Named generator: ChaCha8 seeded from `seed ^ stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stream)
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LatticeError {
    #[error("box dimensions must be positive, got {0:?}")]
    BadDims(Vec<usize>),
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("site {0:?} is immune")]
    ImmuneSite(Site),
    #[error("site {0:?} lies outside the box")]
    OutsideBox(Site),
    #[error("configurations live on different environments")]
    EnvMismatch,
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("grid parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Site(pub [i32; 3]);

impl Site {
    pub const ORIGIN: Site = Site([0, 0, 0]);

    pub fn new2(x: i32, y: i32) -> Site {
        Site([x, y, 0])
    }

    pub fn new3(x: i32, y: i32, z: i32) -> Site {
        Site([x, y, z])
    }

    pub fn x(self) -> i32 {
        self.0[0]
    }

    pub fn y(self) -> i32 {
        self.0[1]
    }

    pub fn z(self) -> i32 {
        self.0[2]
    }

    pub fn offset(self, d: [i32; 3]) -> Site {
        Site([self.0[0] + d[0], self.0[1] + d[1], self.0[2] + d[2]])
    }

    pub fn linf(self, other: Site) -> i32 {
        (0..3).map(|k| (self.0[k] - other.0[k]).abs()).max().unwrap()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    HealthyFrozen,
    InfectedFrozen,
    ImmuneFrozen,
    Periodic,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::HealthyFrozen => "healthy_frozen",
            Boundary::InfectedFrozen => "infected_frozen",
            Boundary::ImmuneFrozen => "immune_frozen",
            Boundary::Periodic => "periodic",
        }
    }

    pub fn parse(s: &str) -> Result<Boundary, LatticeError> {
        match s {
            "healthy_frozen" => Ok(Boundary::HealthyFrozen),
            "infected_frozen" => Ok(Boundary::InfectedFrozen),
            "immune_frozen" => Ok(Boundary::ImmuneFrozen),
            "periodic" => Ok(Boundary::Periodic),
            _ => Err(LatticeError::Parse(format!("unknown boundary mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum State {
    Infected,
    Healthy,
}

impl State {
    pub fn from_infected(b: bool) -> State {
        if b {
            State::Infected
        } else {
            State::Healthy
        }
    }

    pub fn is_infected(self) -> bool {
        self == State::Infected
    }

    pub fn flipped(self) -> State {
        match self {
            State::Infected => State::Healthy,
            State::Healthy => State::Infected,
        }
    }

    pub fn letter(self) -> char {
        match self {
            State::Infected => 'i',
            State::Healthy => 'h',
        }
    }
}

/// Result of resolving a lattice neighbour against the box.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Nb {
    In(usize),
    Out,
}

/// Axis-aligned finite box with a boundary rule.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LatticeBox {
    pub lower: Site,
    pub dims: [usize; 3],
    pub dim: usize,
    pub boundary: Boundary,
}

const DIRS: [[i32; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

impl LatticeBox {
    pub fn new(lower: Site, dims: &[usize], boundary: Boundary) -> Result<LatticeBox, LatticeError> {
        let dim = dims.len();
        if dim != 2 && dim != 3 {
            return Err(LatticeError::BadDimension(dim));
        }
        if dims.contains(&0) {
            return Err(LatticeError::BadDims(dims.to_vec()));
        }
        let mut d = [1usize; 3];
        d[..dim].copy_from_slice(dims);
        let mut lower = lower;
        if dim == 2 {
            lower.0[2] = 0;
        }
        Ok(LatticeBox { lower, dims: d, dim, boundary })
    }

    pub fn square(side: usize, boundary: Boundary) -> LatticeBox {
        LatticeBox::new(Site::ORIGIN, &[side, side], boundary).unwrap()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn degree(&self) -> usize {
        2 * self.dim
    }

    pub fn contains(&self, s: Site) -> bool {
        (0..3).all(|k| {
            let r = s.0[k] - self.lower.0[k];
            r >= 0 && (r as usize) < self.dims[k]
        })
    }

    #[inline]
    pub fn index(&self, s: Site) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        let r = |k: usize| (s.0[k] - self.lower.0[k]) as usize;
        Some((r(2) * self.dims[1] + r(1)) * self.dims[0] + r(0))
    }

    #[inline]
    pub fn site(&self, i: usize) -> Site {
        let x = i % self.dims[0];
        let y = (i / self.dims[0]) % self.dims[1];
        let z = i / (self.dims[0] * self.dims[1]);
        Site([
            self.lower.0[0] + x as i32,
            self.lower.0[1] + y as i32,
            self.lower.0[2] + z as i32,
        ])
    }

    /// Neighbour of index `i` in direction `dir` (0..2*dim).
    #[inline]
    pub fn neighbor(&self, i: usize, dir: usize) -> Nb {
        let axis = dir / 2;
        let step: isize = if dir.is_multiple_of(2) { 1 } else { -1 };
        let stride = match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        };
        let n = self.dims[axis];
        let c = (i / stride) % n;
        let nc = c as isize + step;
        if nc >= 0 && (nc as usize) < n {
            Nb::In((i as isize + step * stride as isize) as usize)
        } else if self.boundary == Boundary::Periodic {
            let wrapped = if nc < 0 { n - 1 } else { 0 };
            Nb::In(i - c * stride + wrapped * stride)
        } else {
            Nb::Out
        }
    }

    pub fn neighbor_sites(&self, s: Site) -> impl Iterator<Item = Site> + '_ {
        DIRS[..self.degree()].iter().map(move |d| s.offset(*d))
    }

    /// The site called "origin": the lattice origin when inside, else the box centre.
    pub fn origin(&self) -> Site {
        if self.contains(Site::ORIGIN) {
            Site::ORIGIN
        } else {
            let mut c = [0i32; 3];
            for (k, ck) in c.iter_mut().enumerate() {
                *ck = self.lower.0[k] + (self.dims[k] / 2) as i32;
            }
            Site(c)
        }
    }

    pub fn dims_string(&self) -> String {
        self.dims[..self.dim]
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x")
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
    pub pi: f64,
    pub epsilon: f64,
    pub dimension: usize,
}

impl ModelParams {
    pub fn new(q: f64, pi: f64, epsilon: f64, dimension: usize) -> Result<ModelParams, LatticeError> {
        let p = ModelParams { q, pi, epsilon, dimension };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(LatticeError::BadParam(format!("q={} must lie in (0,1)", self.q)));
        }
        if !(self.pi >= 0.0 && self.pi < 1.0) {
            return Err(LatticeError::BadParam(format!("pi={} must lie in [0,1)", self.pi)));
        }
        if self.epsilon <= 0.0 {
            return Err(LatticeError::BadParam("epsilon must be positive".into()));
        }
        if self.dimension != 2 && self.dimension != 3 {
            return Err(LatticeError::BadDimension(self.dimension));
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Environment {
    pub bx: LatticeBox,
    immune: BitSet,
    pub pi: f64,
}

impl Environment {
    pub fn unpolluted(bx: LatticeBox) -> Environment {
        let n = bx.len();
        Environment { bx, immune: BitSet::new(n), pi: 0.0 }
    }

    pub fn with_immune(bx: LatticeBox, immune_sites: &[Site]) -> Result<Environment, LatticeError> {
        let mut env = Environment::unpolluted(bx);
        for &s in immune_sites {
            let i = env.bx.index(s).ok_or(LatticeError::OutsideBox(s))?;
            env.immune.set(i, true);
        }
        Ok(env)
    }

    pub fn len(&self) -> usize {
        self.bx.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn is_immune_idx(&self, i: usize) -> bool {
        self.immune.get(i)
    }

    pub fn is_immune(&self, s: Site) -> bool {
        self.bx.index(s).is_some_and(|i| self.immune.get(i))
    }

    pub fn is_susceptible(&self, s: Site) -> bool {
        self.bx.index(s).is_some_and(|i| !self.immune.get(i))
    }

    pub fn immune_count(&self) -> usize {
        self.immune.count_ones()
    }

    pub fn susceptible_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.immune.get(i)).collect()
    }

    pub fn immune_mask(&self) -> &BitSet {
        &self.immune
    }

    pub fn same_labels(&self, other: &Environment) -> bool {
        self.bx == other.bx && self.immune == other.immune
    }
}

/// Infection state on the susceptible sites of a shared environment.
#[derive(Clone, Debug)]
pub struct Configuration {
    env: Arc<Environment>,
    infected: BitSet,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.env.same_labels(&other.env) && self.infected == other.infected
    }
}

impl Configuration {
    pub fn all_healthy(env: Arc<Environment>) -> Configuration {
        let n = env.len();
        Configuration { env, infected: BitSet::new(n) }
    }

    pub fn all_infected(env: Arc<Environment>) -> Configuration {
        let mut c = Configuration::all_healthy(env);
        for i in 0..c.env.len() {
            if !c.env.is_immune_idx(i) {
                c.infected.set(i, true);
            }
        }
        c
    }

    pub fn from_infected(env: Arc<Environment>, sites: &[Site]) -> Result<Configuration, LatticeError> {
        let mut c = Configuration::all_healthy(env);
        for &s in sites {
            c.set(s, State::Infected)?;
        }
        Ok(c)
    }

    pub fn env(&self) -> &Arc<Environment> {
        &self.env
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.env.bx
    }

    pub fn bits(&self) -> &BitSet {
        &self.infected
    }

    #[inline]
    pub fn infected_idx(&self, i: usize) -> bool {
        self.infected.get(i)
    }

    /// False for immune or out-of-box sites.
    pub fn is_infected(&self, s: Site) -> bool {
        self.env.bx.index(s).is_some_and(|i| self.infected.get(i))
    }

    pub fn state(&self, s: Site) -> Result<State, LatticeError> {
        let i = self.checked_index(s)?;
        Ok(State::from_infected(self.infected.get(i)))
    }

    pub fn infected_count(&self) -> usize {
        self.infected.count_ones()
    }

    pub fn infected_sites(&self) -> Vec<Site> {
        self.infected.ones().map(|i| self.env.bx.site(i)).collect()
    }

    fn checked_index(&self, s: Site) -> Result<usize, LatticeError> {
        let i = self.env.bx.index(s).ok_or(LatticeError::OutsideBox(s))?;
        if self.env.is_immune_idx(i) {
            return Err(LatticeError::ImmuneSite(s));
        }
        Ok(i)
    }

    /// Number of neighbours that count as infected, boundary rule included.
    #[inline]
    pub fn infected_neighbors_idx(&self, i: usize) -> usize {
        let bx = &self.env.bx;
        let mut n = 0;
        for dir in 0..bx.degree() {
            match bx.neighbor(i, dir) {
                Nb::In(j) => n += self.infected.get(j) as usize,
                Nb::Out => n += (bx.boundary == Boundary::InfectedFrozen) as usize,
            }
        }
        n
    }

    #[inline]
    pub fn constraint_idx(&self, i: usize) -> bool {
        self.infected_neighbors_idx(i) >= 2
    }

    /// The FA2f constraint at `x`. Querying an immune or out-of-box site is a
    /// contract violation and panics; see [`Configuration::try_constraint`].
    pub fn constraint(&self, x: Site) -> bool {
        self.try_constraint(x).expect("constraint queried at a non-susceptible site")
    }

    pub fn try_constraint(&self, x: Site) -> Result<bool, LatticeError> {
        let i = self.checked_index(x)?;
        Ok(self.constraint_idx(i))
    }

    /// In-place update; immune sites are rejected.
    pub fn set(&mut self, x: Site, a: State) -> Result<(), LatticeError> {
        let i = self.checked_index(x)?;
        self.infected.set(i, a.is_infected());
        Ok(())
    }

    #[inline]
    pub fn set_idx(&mut self, i: usize, infected: bool) {
        debug_assert!(!self.env.is_immune_idx(i));
        self.infected.set(i, infected);
    }

    /// `η^{X←a}`; `self` is untouched.
    pub fn set_state<'a, I>(&self, xs: I, a: State) -> Result<Configuration, LatticeError>
    where
        I: IntoIterator<Item = &'a Site>,
    {
        let mut c = self.clone();
        for &s in xs {
            c.set(s, a)?;
        }
        Ok(c)
    }

    pub fn flip(&self, x: Site) -> Result<Configuration, LatticeError> {
        let i = self.checked_index(x)?;
        let mut c = self.clone();
        c.infected.set(i, !self.infected.get(i));
        Ok(c)
    }

    pub fn hamming_diff(&self, other: &Configuration) -> Result<BTreeSet<Site>, LatticeError> {
        if !self.env.same_labels(&other.env) {
            return Err(LatticeError::EnvMismatch);
        }
        Ok(self.infected.xor_ones(&other.infected).map(|i| self.env.bx.site(i)).collect())
    }

    pub fn hamming_distance(&self, other: &Configuration) -> usize {
        self.infected.xor_ones(&other.infected).count()
    }

    /// Infected set of `self` contains that of `other`.
    pub fn dominates(&self, other: &Configuration) -> bool {
        other.infected.is_subset(&self.infected)
    }
}

pub fn sample_environment(params: &ModelParams, bx: &LatticeBox, seed: u64) -> Environment {
    let mut rng = stream_rng(seed, stream::ENVIRONMENT);
    let mut env = Environment::unpolluted(bx.clone());
    env.pi = params.pi;
    for i in 0..bx.len() {
        if rng.random::<f64>() < params.pi {
            env.immune.set(i, true);
        }
    }
    env
}

pub fn sample_configuration(params: &ModelParams, env: &Arc<Environment>, seed: u64) -> Configuration {
    sample_configuration_with(params.q, env, &mut stream_rng(seed, stream::CONFIGURATION))
}

/// Product measure with density `q` drawn from an explicit generator.
pub fn sample_configuration_with<R: Rng>(q: f64, env: &Arc<Environment>, rng: &mut R) -> Configuration {
    let mut c = Configuration::all_healthy(env.clone());
    for i in 0..env.len() {
        // one draw per site keeps streams aligned across environments
        let u = rng.random::<f64>();
        if !env.is_immune_idx(i) && u < q {
            c.infected.set(i, true);
        }
    }
    c
}

/// Plain-text grid: header line, then rows (y ascending), layers separated by a blank line.
pub fn to_grid_text(cfg: &Configuration) -> String {
    let bx = cfg.bx();
    let mut out = format!("d={} dims={} boundary={}", bx.dim, bx.dims_string(), bx.boundary.name());
    if bx.lower != Site::ORIGIN {
        let l = &bx.lower.0[..bx.dim];
        let _ = write!(out, " lower={}", l.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    }
    out.push('\n');
    for z in 0..bx.dims[2] {
        if z > 0 {
            out.push('\n');
        }
        for y in 0..bx.dims[1] {
            for x in 0..bx.dims[0] {
                let i = (z * bx.dims[1] + y) * bx.dims[0] + x;
                out.push(if cfg.env.is_immune_idx(i) {
                    '#'
                } else if cfg.infected.get(i) {
                    'i'
                } else {
                    'h'
                });
            }
            out.push('\n');
        }
    }
    out
}

pub fn env_to_grid_text(env: &Arc<Environment>) -> String {
    to_grid_text(&Configuration::all_healthy(env.clone()))
}

pub fn parse_grid_text(text: &str) -> Result<Configuration, LatticeError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| LatticeError::Parse("empty input".into()))?;
    let mut dim = None;
    let mut dims: Option<Vec<usize>> = None;
    let mut boundary = Boundary::HealthyFrozen;
    let mut lower = Site::ORIGIN;
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| LatticeError::Parse(format!("bad header token `{tok}`")))?;
        match k {
            "d" => dim = Some(v.parse::<usize>().map_err(|e| LatticeError::Parse(e.to_string()))?),
            "dims" => {
                dims = Some(
                    v.split('x')
                        .map(|p| p.parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| LatticeError::Parse(e.to_string()))?,
                )
            }
            "boundary" => boundary = Boundary::parse(v)?,
            "lower" => {
                let c = v
                    .split(',')
                    .map(|p| p.parse::<i32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| LatticeError::Parse(e.to_string()))?;
                for (k, ck) in c.iter().enumerate().take(3) {
                    lower.0[k] = *ck;
                }
            }
            _ => return Err(LatticeError::Parse(format!("unknown header key `{k}`"))),
        }
    }
    let dim = dim.ok_or_else(|| LatticeError::Parse("missing d=".into()))?;
    let dims = dims.ok_or_else(|| LatticeError::Parse("missing dims=".into()))?;
    if dims.len() != dim {
        return Err(LatticeError::Parse("dims do not match d".into()));
    }
    let bx = LatticeBox::new(lower, &dims, boundary)?;
    let rows: Vec<&str> = lines.map(|l| l.trim_end()).filter(|l| !l.is_empty()).collect();
    if rows.len() != bx.dims[1] * bx.dims[2] {
        return Err(LatticeError::Parse(format!(
            "expected {} rows, found {}",
            bx.dims[1] * bx.dims[2],
            rows.len()
        )));
    }
    let mut env = Environment::unpolluted(bx.clone());
    let mut inf = BitSet::new(bx.len());
    for (r, row) in rows.iter().enumerate() {
        let chars: Vec<char> = row.chars().collect();
        if chars.len() != bx.dims[0] {
            return Err(LatticeError::Parse(format!("row {r} has {} cells", chars.len())));
        }
        for (x, ch) in chars.into_iter().enumerate() {
            let i = r * bx.dims[0] + x;
            match ch {
                '#' => env.immune.set(i, true),
                'i' => inf.set(i, true),
                'h' => {}
                _ => return Err(LatticeError::Parse(format!("bad cell `{ch}`"))),
            }
        }
    }
    let n = bx.len();
    env.pi = env.immune_count() as f64 / n as f64;
    Ok(Configuration { env: Arc::new(env), infected: inf })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env2(n: usize) -> Arc<Environment> {
        Arc::new(Environment::unpolluted(LatticeBox::square(n, Boundary::HealthyFrozen)))
    }

    fn params(q: f64, pi: f64) -> ModelParams {
        ModelParams { q, pi, epsilon: 1.0, dimension: 2 }
    }

    #[test]
    fn zero_pollution_is_all_susceptible() {
        let bx = LatticeBox::square(20, Boundary::HealthyFrozen);
        let env = sample_environment(&params(0.3, 0.0), &bx, 9);
        assert_eq!(env.immune_count(), 0);
    }

    #[test]
    fn full_pollution_is_all_immune() {
        let bx = LatticeBox::square(2, Boundary::HealthyFrozen);
        let env = sample_environment(&params(0.3, 1.0), &bx, 9);
        assert_eq!(env.immune_count(), 4);
    }

    #[test]
    fn immune_fraction_concentrates() {
        let bx = LatticeBox::square(100, Boundary::HealthyFrozen);
        let mut tot = 0.0;
        for seed in 0..100 {
            tot += sample_environment(&params(0.3, 0.5), &bx, seed).immune_count() as f64 / 1e4;
        }
        assert!((tot / 100.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn infected_fraction_band() {
        let env = env2(100);
        let c = sample_configuration(&params(0.3, 0.0), &env, 4);
        let f = c.infected_count() as f64 / 1e4;
        assert!((f - 0.3).abs() < 0.015, "{f}");
        assert_eq!(sample_configuration(&params(0.0, 0.0), &env, 4).infected_count(), 0);
        assert_eq!(sample_configuration(&params(1.0, 0.0), &env, 4).infected_count(), 10_000);
    }

    #[test]
    fn sampling_is_deterministic() {
        let bx = LatticeBox::new(Site::ORIGIN, &[7, 5, 3], Boundary::Periodic).unwrap();
        let p = params(0.4, 0.2);
        let e1 = Arc::new(sample_environment(&p, &bx, 77));
        let e2 = Arc::new(sample_environment(&p, &bx, 77));
        assert_eq!(*e1, *e2);
        assert_eq!(sample_configuration(&p, &e1, 5), sample_configuration(&p, &e2, 5));
        assert_ne!(sample_configuration(&p, &e1, 5), sample_configuration(&p, &e1, 6));
    }

    #[test]
    fn constraint_counts_two_infected() {
        let env = env2(3);
        let c = Configuration::from_infected(env.clone(), &[Site::new2(0, 1), Site::new2(1, 0)]).unwrap();
        assert!(c.constraint(Site::new2(1, 1)));
        let c1 = Configuration::from_infected(env, &[Site::new2(0, 1)]).unwrap();
        assert!(!c1.constraint(Site::new2(1, 1)));
    }

    // Exhaustive over the 3^4 (immune / healthy / infected) neighbour patterns.
    #[test]
    fn constraint_exhaustive_patterns() {
        let nbrs = [Site::new2(2, 1), Site::new2(0, 1), Site::new2(1, 2), Site::new2(1, 0)];
        for code in 0..81u32 {
            let mut labels = [0u32; 4];
            let mut c = code;
            for l in labels.iter_mut() {
                *l = c % 3;
                c /= 3;
            }
            let immune: Vec<Site> = (0..4).filter(|&k| labels[k] == 0).map(|k| nbrs[k]).collect();
            let env = Arc::new(Environment::with_immune(LatticeBox::square(3, Boundary::HealthyFrozen), &immune).unwrap());
            let inf: Vec<Site> = (0..4).filter(|&k| labels[k] == 2).map(|k| nbrs[k]).collect();
            let cfg = Configuration::from_infected(env, &inf).unwrap();
            assert_eq!(cfg.constraint(Site::new2(1, 1)), inf.len() >= 2, "pattern {labels:?}");
        }
    }

    #[test]
    fn boundary_modes() {
        for (mode, corner) in [
            (Boundary::HealthyFrozen, false),
            (Boundary::ImmuneFrozen, false),
            (Boundary::InfectedFrozen, true),
        ] {
            let env = Arc::new(Environment::unpolluted(LatticeBox::square(3, mode)));
            let c = Configuration::all_healthy(env);
            assert_eq!(c.constraint(Site::new2(0, 0)), corner);
        }
        let env = Arc::new(Environment::unpolluted(LatticeBox::square(4, Boundary::Periodic)));
        let c = Configuration::from_infected(env, &[Site::new2(3, 0), Site::new2(0, 3)]).unwrap();
        assert!(c.constraint(Site::new2(0, 0)));
    }

    #[test]
    #[should_panic]
    fn constraint_on_immune_site_panics() {
        let env = Arc::new(Environment::with_immune(LatticeBox::square(3, Boundary::HealthyFrozen), &[Site::new2(1, 1)]).unwrap());
        Configuration::all_healthy(env).constraint(Site::new2(1, 1));
    }

    #[test]
    fn set_state_and_flip() {
        let env = env2(4);
        let c = Configuration::all_healthy(env);
        let xs = [Site::new2(1, 1), Site::new2(2, 3)];
        assert_eq!(c.set_state(&[], State::Infected).unwrap(), c);
        let ci = c.set_state(&xs, State::Infected).unwrap();
        assert_eq!(ci.set_state(&xs, State::Healthy).unwrap(), c);
        assert_eq!(ci.hamming_diff(&c).unwrap(), xs.iter().copied().collect());
        let f = c.flip(Site::new2(0, 0)).unwrap();
        assert_eq!(f.infected_sites(), vec![Site::new2(0, 0)]);
        assert_eq!(f.flip(Site::new2(0, 0)).unwrap(), c);
        assert!(c.hamming_diff(&c).unwrap().is_empty());
    }

    #[test]
    fn immune_sites_reject_updates() {
        let env = Arc::new(Environment::with_immune(LatticeBox::square(3, Boundary::HealthyFrozen), &[Site::new2(1, 1)]).unwrap());
        let c = Configuration::all_healthy(env);
        assert_eq!(c.flip(Site::new2(1, 1)), Err(LatticeError::ImmuneSite(Site::new2(1, 1))));
        assert!(c.set_state(&[Site::new2(1, 1)], State::Infected).is_err());
    }

    #[test]
    fn grid_round_trip_2d_and_3d() {
        let p = params(0.4, 0.2);
        for (dims, lower) in [(vec![6usize, 4], Site::ORIGIN), (vec![3, 4, 2], Site::new3(-1, 2, 5))] {
            let bx = LatticeBox::new(lower, &dims, Boundary::InfectedFrozen).unwrap();
            let env = Arc::new(sample_environment(&p, &bx, 3));
            let c = sample_configuration(&p, &env, 3);
            let text = to_grid_text(&c);
            let back = parse_grid_text(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(to_grid_text(&back), text);
        }
    }

    #[test]
    fn grid_header_format() {
        let env = env2(2);
        let c = Configuration::from_infected(env, &[Site::new2(1, 0)]).unwrap();
        assert_eq!(to_grid_text(&c), "d=2 dims=2x2 boundary=healthy_frozen\nhi\nhh\n");
    }

    #[test]
    fn periodic_neighbors_wrap() {
        let bx = LatticeBox::new(Site::ORIGIN, &[3, 2, 2], Boundary::Periodic).unwrap();
        let i = bx.index(Site::new3(0, 0, 0)).unwrap();
        assert_eq!(bx.neighbor(i, 1), Nb::In(bx.index(Site::new3(2, 0, 0)).unwrap()));
        assert_eq!(bx.neighbor(i, 5), Nb::In(bx.index(Site::new3(0, 0, 1)).unwrap()));
    }
}
