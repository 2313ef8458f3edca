//! Exhaustive analysis of tiny systems: generator, Dirichlet form and the
//! Poisson problem for the time spent in E before hitting A.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{Boundary, Configuration, Environment, Nb, Site};

pub const MAX_SITES: usize = 20;
/// Unknown count up to which the dense LU path is used.
pub const DENSE_LIMIT: usize = 1024;
const CG_TOL: f64 = 1e-13;
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ExactError {
    #[error("{0} susceptible sites exceed the cap of {MAX_SITES}")]
    TooLarge(usize),
    #[error("site order is not a permutation of the susceptible sites")]
    BadOrder,
    #[error("target unreachable from {} states (first: {:?})", .excluded.len(), .excluded.first())]
    Unreachable { excluded: Vec<u64> },
    #[error("linear solve failed: {0}")]
    Solver(String),
}

/// All 2^n configurations of the susceptible sites, state bit k = site k infected.
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub env: Arc<Environment>,
    /// Box index of the site carried by each state bit.
    pub sites: Vec<usize>,
    nb_mask: Vec<u64>,
    nb_const: Vec<u8>,
}

impl StateSpace {
    pub fn new(env: Arc<Environment>) -> Result<StateSpace, ExactError> {
        let sites = env.susceptible_indices();
        StateSpace::with_order(env, sites)
    }

    /// Same space with a caller-chosen bit order.
    pub fn with_order(env: Arc<Environment>, sites: Vec<usize>) -> Result<StateSpace, ExactError> {
        let mut sorted = sites.clone();
        sorted.sort_unstable();
        if sorted != env.susceptible_indices() {
            return Err(ExactError::BadOrder);
        }
        if sites.len() > MAX_SITES {
            return Err(ExactError::TooLarge(sites.len()));
        }
        let bx = &env.bx;
        let mut pos = vec![usize::MAX; bx.len()];
        for (k, &i) in sites.iter().enumerate() {
            pos[i] = k;
        }
        let mut nb_mask = vec![0u64; sites.len()];
        let mut nb_const = vec![0u8; sites.len()];
        for (k, &i) in sites.iter().enumerate() {
            for dir in 0..bx.degree() {
                match bx.neighbor(i, dir) {
                    Nb::In(j) if pos[j] != usize::MAX => nb_mask[k] |= 1 << pos[j],
                    Nb::In(_) => {}
                    Nb::Out => nb_const[k] += (bx.boundary == Boundary::InfectedFrozen) as u8,
                }
            }
        }
        Ok(StateSpace { env, sites, nb_mask, nb_const })
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_states(&self) -> usize {
        1 << self.sites.len()
    }

    #[inline]
    pub fn constraint(&self, eta: u64, k: usize) -> bool {
        (eta & self.nb_mask[k]).count_ones() + self.nb_const[k] as u32 >= 2
    }

    pub fn mu(&self, eta: u64, q: f64) -> f64 {
        let ni = eta.count_ones() as i32;
        q.powi(ni) * (1.0 - q).powi(self.n_sites() as i32 - ni)
    }

    pub fn bit_of(&self, s: Site) -> Option<usize> {
        let i = self.env.bx.index(s)?;
        self.sites.iter().position(|&j| j == i)
    }

    pub fn to_configuration(&self, eta: u64) -> Configuration {
        let mut c = Configuration::all_healthy(self.env.clone());
        for (k, &i) in self.sites.iter().enumerate() {
            if eta >> k & 1 == 1 {
                c.set_idx(i, true);
            }
        }
        c
    }

    pub fn from_configuration(&self, c: &Configuration) -> u64 {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, &i)| c.infected_idx(i))
            .fold(0u64, |a, (k, _)| a | 1 << k)
    }

    /// Predicate "site `s` infected".
    pub fn site_infected(&self, s: Site) -> impl Fn(u64) -> bool + Clone {
        let k = self.bit_of(s).expect("site must be susceptible");
        move |eta: u64| eta >> k & 1 == 1
    }
}

/// Sparse generator: off-diagonal rates per row plus the diagonal.
#[derive(Clone, Debug)]
pub struct Generator {
    pub rows: Vec<Vec<(u32, f64)>>,
    pub diag: Vec<f64>,
}

impl Generator {
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return self.diag[from];
        }
        self.rows[from].iter().find(|(j, _)| *j as usize == to).map_or(0.0, |(_, r)| *r)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            m[(i, i)] = self.diag[i];
            for &(j, r) in row {
                m[(i, j as usize)] = r;
            }
        }
        m
    }
}

pub fn build_generator(space: &StateSpace, q: f64) -> Generator {
    let ns = space.n_states();
    let mut rows = Vec::with_capacity(ns);
    let mut diag = vec![0.0; ns];
    for eta in 0..ns as u64 {
        let mut row = vec![];
        let mut out = 0.0;
        for k in 0..space.n_sites() {
            if space.constraint(eta, k) {
                let r = if eta >> k & 1 == 1 { 1.0 - q } else { q };
                row.push(((eta ^ 1 << k) as u32, r));
                out += r;
            }
        }
        diag[eta as usize] = -out;
        rows.push(row);
    }
    Generator { rows, diag }
}

/// q(1-q) Σ_η μ(η) Σ_x c_x(η) (f(η^x) - f(η))².
pub fn dirichlet_form(space: &StateSpace, q: f64, f: &[f64]) -> f64 {
    let mut tot = 0.0;
    for eta in 0..space.n_states() as u64 {
        let mut s = 0.0;
        for k in 0..space.n_sites() {
            if space.constraint(eta, k) {
                let d = f[(eta ^ 1 << k) as usize] - f[eta as usize];
                s += d * d;
            }
        }
        tot += space.mu(eta, q) * s;
    }
    q * (1.0 - q) * tot
}

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    /// T(η); zero on A and on excluded states.
    pub values: Vec<f64>,
    pub in_event: Vec<bool>,
    pub in_target: Vec<bool>,
    /// States outside A from which A cannot be reached.
    pub excluded: Vec<u64>,
    pub residual: f64,
    pub method: &'static str,
}

impl PoissonSolution {
    pub fn mean_under_mu(&self, space: &StateSpace, q: f64) -> f64 {
        (0..self.values.len()).map(|e| space.mu(e as u64, q) * self.values[e]).sum()
    }
}

fn reach_target(space: &StateSpace, target: &[bool]) -> Vec<bool> {
    // the chain is reversible, so edges are symmetric and forward search suffices
    let ns = space.n_states();
    let mut seen = target.to_vec();
    let mut queue: VecDeque<u64> = (0..ns as u64).filter(|&e| target[e as usize]).collect();
    while let Some(eta) = queue.pop_front() {
        for k in 0..space.n_sites() {
            if space.constraint(eta, k) {
                let nx = eta ^ 1 << k;
                if !seen[nx as usize] {
                    seen[nx as usize] = true;
                    queue.push_back(nx);
                }
            }
        }
    }
    seen
}

/// Solve L T = -1_E off A, T = 0 on A. Fails when some state cannot reach A.
pub fn solve_poisson<E, A>(space: &StateSpace, q: f64, e: E, a: A) -> Result<PoissonSolution, ExactError>
where
    E: Fn(u64) -> bool,
    A: Fn(u64) -> bool,
{
    let sol = solve_poisson_restricted(space, q, e, a)?;
    if !sol.excluded.is_empty() {
        return Err(ExactError::Unreachable { excluded: sol.excluded });
    }
    Ok(sol)
}

/// As [`solve_poisson`] but restricted to the states that can reach A; the
/// rest are listed in `excluded` and carry T = 0.
pub fn solve_poisson_restricted<E, A>(space: &StateSpace, q: f64, e: E, a: A) -> Result<PoissonSolution, ExactError>
where
    E: Fn(u64) -> bool,
    A: Fn(u64) -> bool,
{
    solve_poisson_with(space, q, e, a, Solver::Auto)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    /// Dense LU up to [`DENSE_LIMIT`] unknowns, conjugate gradients beyond.
    Auto,
    Dense,
    Cg,
}

pub fn solve_poisson_with<E, A>(space: &StateSpace, q: f64, e: E, a: A, solver: Solver) -> Result<PoissonSolution, ExactError>
where
    E: Fn(u64) -> bool,
    A: Fn(u64) -> bool,
{
    let ns = space.n_states();
    let in_event: Vec<bool> = (0..ns as u64).map(&e).collect();
    let in_target: Vec<bool> = (0..ns as u64).map(&a).collect();
    let reach = reach_target(space, &in_target);
    let excluded: Vec<u64> = (0..ns as u64).filter(|&x| !reach[x as usize]).collect();
    let unknowns: Vec<u64> = (0..ns as u64).filter(|&x| reach[x as usize] && !in_target[x as usize]).collect();
    let mut pos = vec![usize::MAX; ns];
    for (u, &x) in unknowns.iter().enumerate() {
        pos[x as usize] = u;
    }
    let m = unknowns.len();
    let mut values = vec![0.0; ns];
    let method;
    if m == 0 {
        method = "trivial";
    } else if solver == Solver::Dense || (solver == Solver::Auto && m <= DENSE_LIMIT) {
        method = "dense-lu";
        let mut mat = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for (u, &eta) in unknowns.iter().enumerate() {
            rhs[u] = if in_event[eta as usize] { -1.0 } else { 0.0 };
            for k in 0..space.n_sites() {
                if space.constraint(eta, k) {
                    let r = if eta >> k & 1 == 1 { 1.0 - q } else { q };
                    mat[(u, u)] -= r;
                    let p = pos[(eta ^ 1 << k) as usize];
                    if p != usize::MAX {
                        mat[(u, p)] += r;
                    }
                }
            }
        }
        let sol = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| ExactError::Solver("singular matrix".into()))?;
        for (u, &eta) in unknowns.iter().enumerate() {
            values[eta as usize] = sol[u];
        }
    } else {
        method = "cg";
        let x = solve_cg(space, q, &unknowns, &pos, &in_event)?;
        for (u, &eta) in unknowns.iter().enumerate() {
            values[eta as usize] = x[u];
        }
    }
    let residual = poisson_residual(space, q, &values, &in_event, &unknowns);
    if residual > RESIDUAL_TOL {
        return Err(ExactError::Solver(format!("relative residual {residual:e} above tolerance")));
    }
    Ok(PoissonSolution { values, in_event, in_target, excluded, residual, method })
}

/// max |L T + 1_E| over unknowns, relative to max(1, |T|_∞ · max out-rate).
fn poisson_residual(space: &StateSpace, q: f64, t: &[f64], ev: &[bool], unknowns: &[u64]) -> f64 {
    let tmax = t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for &eta in unknowns {
        let mut lt = 0.0;
        for k in 0..space.n_sites() {
            if space.constraint(eta, k) {
                let r = if eta >> k & 1 == 1 { 1.0 - q } else { q };
                lt += r * (t[(eta ^ 1 << k) as usize] - t[eta as usize]);
            }
        }
        let b = if ev[eta as usize] { 1.0 } else { 0.0 };
        worst = worst.max((lt + b).abs());
    }
    worst / tmax.max(1.0)
}

/// Conjugate gradients on the μ-weighted (symmetric positive definite) system
/// -μ L T = μ 1_E, Jacobi preconditioned, with on-the-fly products.
fn solve_cg(space: &StateSpace, q: f64, unknowns: &[u64], pos: &[usize], ev: &[bool]) -> Result<Vec<f64>, ExactError> {
    let m = unknowns.len();
    let mu: Vec<f64> = unknowns.iter().map(|&e| space.mu(e, q)).collect();
    let diag: Vec<f64> = unknowns
        .iter()
        .enumerate()
        .map(|(u, &eta)| {
            let out: f64 = (0..space.n_sites())
                .filter(|&k| space.constraint(eta, k))
                .map(|k| if eta >> k & 1 == 1 { 1.0 - q } else { q })
                .sum();
            mu[u] * out
        })
        .collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        for (u, &eta) in unknowns.iter().enumerate() {
            let mut acc = 0.0;
            for k in 0..space.n_sites() {
                if space.constraint(eta, k) {
                    let r = if eta >> k & 1 == 1 { 1.0 - q } else { q };
                    let p = pos[(eta ^ 1 << k) as usize];
                    let xn = if p == usize::MAX { 0.0 } else { x[p] };
                    acc += r * (x[u] - xn);
                }
            }
            y[u] = mu[u] * acc;
        }
    };
    let b: Vec<f64> = unknowns.iter().enumerate().map(|(u, &e)| if ev[e as usize] { mu[u] } else { 0.0 }).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; m];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..20 * m.max(100) {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for u in 0..m {
            x[u] += alpha * p[u];
            r[u] -= alpha * ap[u];
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= CG_TOL * bnorm {
            return Ok(x);
        }
        for u in 0..m {
            z[u] = r[u] / diag[u];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for u in 0..m {
            p[u] = z[u] + beta * p[u];
        }
    }
    Err(ExactError::Solver("conjugate gradients did not converge".into()))
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct DirichletCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub rel_gap: f64,
}

/// μ(T·1_E) against D(T) for the solution of the Poisson problem.
pub fn verify_dirichlet_identity(space: &StateSpace, q: f64, sol: &PoissonSolution) -> DirichletCheck {
    let lhs: f64 = (0..space.n_states())
        .filter(|&e| sol.in_event[e])
        .map(|e| space.mu(e as u64, q) * sol.values[e])
        .sum();
    let rhs = dirichlet_form(space, q, &sol.values);
    let gap = (lhs - rhs).abs();
    let scale = lhs.abs().max(rhs.abs());
    DirichletCheck { lhs, rhs, gap, rel_gap: if scale > 0.0 { gap / scale } else { 0.0 } }
}

/// E_η[τ_A] for every state.
pub fn exact_expected_hitting<A: Fn(u64) -> bool>(space: &StateSpace, q: f64, a: A) -> Result<Vec<f64>, ExactError> {
    Ok(solve_poisson(space, q, |_| true, a)?.values)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactReport {
    pub states: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub expected_hitting_from_mu: f64,
}

/// Hitting of "origin infected" with E = everything.
pub fn origin_report(env: Arc<Environment>, q: f64, origin: Site) -> Result<ExactReport, ExactError> {
    let space = StateSpace::new(env)?;
    let a = space.site_infected(origin);
    let sol = solve_poisson(&space, q, |_| true, a)?;
    let chk = verify_dirichlet_identity(&space, q, &sol);
    Ok(ExactReport {
        states: space.n_states(),
        lhs: chk.lhs,
        rhs: chk.rhs,
        gap: chk.gap,
        expected_hitting_from_mu: sol.mean_under_mu(&space, q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;

    fn single(q: f64) -> (StateSpace, f64) {
        let bx = LatticeBox::new(Site::ORIGIN, &[1, 1], Boundary::InfectedFrozen).unwrap();
        (StateSpace::new(Arc::new(Environment::unpolluted(bx))).unwrap(), q)
    }

    #[test]
    fn single_site_generator() {
        let (sp, q) = single(0.3);
        let g = build_generator(&sp, q).to_dense();
        let want = DMatrix::from_row_slice(2, 2, &[-q, q, 1.0 - q, -(1.0 - q)]);
        assert!((g - want).abs().max() < 1e-15);
    }

    #[test]
    fn single_site_hitting_and_dirichlet() {
        let (sp, q) = single(0.3);
        let a = sp.site_infected(Site::ORIGIN);
        let t = exact_expected_hitting(&sp, q, a.clone()).unwrap();
        assert!((t[0] - 1.0 / q).abs() < 1e-12 && t[1] == 0.0);
        let f = [1.0 / q, 0.0];
        assert!((dirichlet_form(&sp, q, &f) - (1.0 - q) / q).abs() < 1e-12);
        let sol = solve_poisson(&sp, q, |_| true, a).unwrap();
        let c = verify_dirichlet_identity(&sp, q, &sol);
        assert!((c.lhs - (1.0 - q) / q).abs() < 1e-12 && c.gap < 1e-12);
    }

    #[test]
    fn empty_event_gives_zero() {
        let bx = LatticeBox::new(Site::ORIGIN, &[2, 2], Boundary::InfectedFrozen).unwrap();
        let sp = StateSpace::new(Arc::new(Environment::unpolluted(bx))).unwrap();
        let sol = solve_poisson(&sp, 0.4, |_| false, sp.site_infected(Site::ORIGIN)).unwrap();
        assert!(sol.values.iter().all(|&v| v == 0.0));
        let c = verify_dirichlet_identity(&sp, 0.4, &sol);
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
    }

    #[test]
    fn generator_rows_and_detailed_balance() {
        let bx = LatticeBox::new(Site::ORIGIN, &[3, 2], Boundary::HealthyFrozen).unwrap();
        let sp = StateSpace::new(Arc::new(Environment::unpolluted(bx))).unwrap();
        let q = 0.35;
        let g = build_generator(&sp, q);
        for (i, row) in g.rows.iter().enumerate() {
            let s: f64 = row.iter().map(|(_, r)| r).sum::<f64>() + g.diag[i];
            assert!(s.abs() < 1e-15);
            for &(j, r) in row {
                assert!(r > 0.0);
                let back = g.rate(j as usize, i);
                assert!((sp.mu(i as u64, q) * r - sp.mu(j as u64, q) * back).abs() < 1e-12);
            }
        }
        // all healthy under a healthy boundary is blocked
        assert!(g.rows[0].is_empty() && g.diag[0] == 0.0);
    }

    #[test]
    fn unreachable_target_is_reported() {
        let bx = LatticeBox::new(Site::ORIGIN, &[2, 2], Boundary::HealthyFrozen).unwrap();
        let sp = StateSpace::new(Arc::new(Environment::unpolluted(bx))).unwrap();
        let err = solve_poisson(&sp, 0.5, |_| true, sp.site_infected(Site::ORIGIN)).unwrap_err();
        match err {
            ExactError::Unreachable { excluded } => assert!(excluded.contains(&0)),
            e => panic!("{e:?}"),
        }
        let r = solve_poisson_restricted(&sp, 0.5, |_| true, sp.site_infected(Site::ORIGIN)).unwrap();
        let c = verify_dirichlet_identity(&sp, 0.5, &r);
        assert!(c.gap < 1e-9);
    }

    #[test]
    fn cg_agrees_with_dense() {
        let bx = LatticeBox::new(Site::ORIGIN, &[4, 3], Boundary::InfectedFrozen).unwrap();
        let env = Arc::new(Environment::with_immune(bx, &[Site::new2(3, 2), Site::new2(2, 1)]).unwrap());
        let sp = StateSpace::new(env).unwrap();
        let q = 0.3;
        let a = sp.site_infected(Site::ORIGIN);
        let ev = |e: u64| !e.count_ones().is_multiple_of(3);
        let cg = solve_poisson_with(&sp, q, ev, a.clone(), Solver::Cg).unwrap();
        let lu = solve_poisson_with(&sp, q, ev, a, Solver::Dense).unwrap();
        assert_eq!((cg.method, lu.method), ("cg", "dense-lu"));
        for (x, y) in cg.values.iter().zip(&lu.values) {
            assert!((x - y).abs() < 1e-9 * y.abs().max(1.0));
        }
        assert!(verify_dirichlet_identity(&sp, q, &cg).rel_gap < 1e-9);
    }

    #[test]
    fn large_space_uses_cg() {
        let bx = LatticeBox::new(Site::ORIGIN, &[4, 3], Boundary::InfectedFrozen).unwrap();
        let sp = StateSpace::new(Arc::new(Environment::unpolluted(bx))).unwrap();
        let sol = solve_poisson(&sp, 0.25, |_| true, sp.site_infected(Site::new2(1, 1))).unwrap();
        assert_eq!(sol.method, "cg");
        assert!(verify_dirichlet_identity(&sp, 0.25, &sol).rel_gap < 1e-9);
    }

    #[test]
    fn too_many_sites_rejected() {
        let bx = LatticeBox::new(Site::ORIGIN, &[7, 3], Boundary::HealthyFrozen).unwrap();
        assert_eq!(StateSpace::new(Arc::new(Environment::unpolluted(bx))).unwrap_err(), ExactError::TooLarge(21));
    }
}
