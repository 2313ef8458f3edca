use std::collections::HashSet;
use std::sync::Arc;

use fa2lab::lattice::{Configuration, Environment, Site};
use fa2lab::moves::verify_legal;
use fa2lab::z3::audit::{line_residuals, run_battery};
use fa2lab::z3::paths::{constants, path_box, random_supergood_brickpath, terminal_anchor};
use fa2lab::z3::*;

#[test]
fn battery_passes_at_unit_scale() {
    for seed in 0..6 {
        let b = run_battery(1, 0.5, 0.0, seed).unwrap();
        for c in &b.checks {
            assert!(c.ok(), "seed {seed}: {c:?}");
        }
        assert!(b.line_residual <= constants::LINE_RESIDUAL);
        assert!(b.sail_meet <= constants::SAIL_MEET_PER_L);
        assert!(b.censor_consistent);
    }
}

#[test]
fn battery_passes_with_immune_sites() {
    let b = run_battery(1, 0.6, 0.0002, 3).unwrap();
    assert!(b.ok(), "{b:?}");
}

#[test]
fn line_steps_stay_within_residual() {
    let (cfg, path) = random_supergood_brickpath(1, 1, 0.5, 0.0, 11);
    let b0 = base_brick(1).translate(path.anchors[0]);
    let sail = find_sail(&cfg, &b0, SailOptions::default()).unwrap();
    let (legal, res) = line_residuals(&cfg, &sail).unwrap();
    assert!(legal);
    assert!(res <= constants::LINE_RESIDUAL);
}

#[test]
fn separator_must_lie_in_the_thick_sail() {
    let (cfg, path) = random_supergood_brickpath(1, 1, 0.5, 0.0, 2);
    let b0 = base_brick(1).translate(path.anchors[0]);
    let sail = find_sail(&cfg, &b0, SailOptions::default()).unwrap();
    let sep: HashSet<Site> = b0.layer(12).into_iter().collect();
    // X1 missing part of sep ∩ thick sail
    let x1: HashSet<Site> = HashSet::new();
    let x2: HashSet<Site> = HashSet::new();
    assert!(matches!(
        infect_beyond_separator(&cfg, &sail, &sep, &x1, &x2),
        Err(Z3Error::NotSeparating(_))
    ));
}

#[test]
fn target_below_separator_is_rejected() {
    let (cfg, path) = random_supergood_brickpath(1, 1, 0.5, 0.0, 4);
    let b0 = base_brick(1).translate(path.anchors[0]);
    let sail = find_sail(&cfg, &b0, SailOptions::default()).unwrap();
    let thick = sail.thick();
    let sep: HashSet<Site> = b0.layer(12).into_iter().collect();
    let x1: HashSet<Site> = sep.iter().copied().filter(|s| thick.contains(s)).collect();
    let low: HashSet<Site> = sail.layer(3).into_iter().take(1).collect();
    assert!(matches!(infect_beyond_separator(&cfg, &sail, &sep, &x1, &low), Err(Z3Error::BadTarget(_))));
}

#[test]
fn clean_above_undoes_a_crossing() {
    let (cfg, path) = random_supergood_brickpath(1, 1, 0.5, 0.0, 5);
    let b0 = base_brick(1).translate(path.anchors[0]);
    let sail = find_sail(&cfg, &b0, SailOptions::default()).unwrap();
    let thick = sail.thick();
    let sep: HashSet<Site> = b0.layer(12).into_iter().collect();
    let x1: HashSet<Site> = sep.iter().copied().filter(|s| thick.contains(s)).collect();
    let x2: HashSet<Site> = sail.layer(30).into_iter().collect();
    let v1: Vec<Site> = x1.iter().copied().collect();
    let e1 = cfg.set_state(&v1, fa2lab::State::Infected).unwrap();
    let up = infect_beyond_separator(&cfg, &sail, &sep, &x1, &x2).unwrap();
    let down = clean_above(&cfg, &sail, &sep, &x1, &x2).unwrap();
    let mid = verify_legal(&e1, &up);
    assert!(mid.legal);
    let end = verify_legal(&mid.endpoint, &down);
    assert!(end.legal);
    assert_eq!(end.endpoint.hamming_distance(&e1), 0);
}

#[test]
fn origin_reached_over_several_translations() {
    let (cfg, path) = random_supergood_brickpath(1, 3, 0.5, 0.0, 7);
    assert!(path.is_consistent());
    let seq = infect_origin_z3(&cfg, &path).unwrap();
    let rep = paths::origin_report(&cfg, &path, &seq);
    assert!(rep.legal);
    assert!(rep.origin_infected);
    assert!(rep.reach <= constants::WINDOW_RADIUS * path.l);
    assert!(rep.witness.hamming_budget <= constants::HAMMING_PER_L);
}

#[test]
fn search_finds_the_terminal_brick_when_everything_is_infected() {
    let bx = path_box(1, &[terminal_anchor(1)]);
    let cfg = Configuration::all_infected(Arc::new(Environment::unpolluted(bx)));
    let p = find_supergood_brickpath(&cfg, 1, 3).unwrap();
    assert_eq!(p.len(), 1);
    assert!(p.is_consistent());
}

#[test]
fn search_fails_when_everything_is_immune() {
    let bx = path_box(1, &[terminal_anchor(1)]);
    let all: Vec<Site> = (0..bx.len()).map(|i| bx.site(i)).collect();
    let env = Environment::with_immune(bx, &all).unwrap();
    let cfg = Configuration::all_healthy(Arc::new(env));
    assert!(find_supergood_brickpath(&cfg, 1, 3).is_none());
}

#[test]
fn search_follows_a_generated_path() {
    let (cfg, path) = random_supergood_brickpath(1, 2, 0.5, 0.0, 9);
    let found = find_supergood_brickpath(&cfg, 1, 4).unwrap();
    assert!(found.is_consistent());
    assert!(found.len() <= path.len());
    let seq = infect_origin_z3(&cfg, &found).unwrap();
    let rep = verify_legal(&cfg, &seq);
    assert!(rep.legal && rep.endpoint.is_infected(Site::ORIGIN));
}
