//! Command-line front end: one subcommand per experiment, JSON on stdout or
//! `--out`, CSV streams where a table makes sense.
//!
//! Exit codes: 0 ok, 1 bad configuration or IO, 2 a verification failed.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fa2lab::bp::bp_summary;
use fa2lab::exact;
use fa2lab::kcm::estimate_tau0;
use fa2lab::lattice::{
    parse_grid_text, sample_configuration, sample_environment, to_grid_text, Boundary, Configuration, Environment,
    LatticeBox, ModelParams, Site,
};
use fa2lab::moves::{eval_yoyoma_bound, read_moves, verify_legal, write_moves, MoveSequence};
use fa2lab::z2::{build_infection_path, random_supergood_instance};
use fa2lab::z3::paths::{constants, origin_report, random_supergood_brickpath, supergood_brickpath_along};
use fa2lab::z3::{infect_origin_z3, Route};

#[derive(Parser, Debug)]
#[command(name = "fa2lab", version, about = "FA2f on polluted lattices", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// JSON result file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct Lattice {
    /// Grid-text file holding the environment (and, where used, the configuration).
    #[arg(long)]
    env: Option<PathBuf>,
    /// Box shape when sampling, e.g. 8x8 or 4x4x4.
    #[arg(long, default_value = "8x8")]
    dims: String,
    #[arg(long, default_value = "healthy_frozen")]
    boundary: String,
    #[arg(long, default_value_t = 0.3)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    pi: f64,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Monte-Carlo estimate of the origin's infection time.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lattice: Lattice,
        #[arg(long, default_value_t = 100)]
        replicas: usize,
        #[arg(long, default_value_t = 1e4)]
        horizon: f64,
        /// Per-replica CSV stream.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Bootstrap-percolation closure of a configuration.
    Bp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lattice: Lattice,
    },
    /// Exact hitting time of the origin on a small box.
    Exact {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lattice: Lattice,
    },
    /// Random super-good box path in Z² and its infection sequence.
    #[command(name = "z2-path")]
    Z2Path {
        #[command(flatten)]
        common: Common,
        #[arg(long = "L", default_value_t = 4)]
        side: usize,
        #[arg(long = "l", default_value_t = 4)]
        length: usize,
        #[arg(long, default_value_t = 0.3)]
        q: f64,
        #[arg(long, default_value_t = 0.0)]
        pi: f64,
        #[arg(long)]
        emit_moves: Option<PathBuf>,
        #[arg(long)]
        emit_grid: Option<PathBuf>,
    },
    /// Random good brick path in Z³ and its infection sequence.
    #[command(name = "z3-demo")]
    Z3Demo {
        #[command(flatten)]
        common: Common,
        #[arg(long = "L", default_value_t = 1)]
        scale: i32,
        #[arg(long = "l", default_value_t = 1)]
        steps: usize,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        #[arg(long, default_value_t = 0.0)]
        pi: f64,
        /// B, A, or auto (drawn at random per step).
        #[arg(long, default_value = "auto")]
        route: String,
        #[arg(long)]
        emit_moves: Option<PathBuf>,
        #[arg(long)]
        emit_grid: Option<PathBuf>,
    },
    /// Median infection time over a grid of (q, π).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated.
        #[arg(long, default_value = "0.3,0.25,0.2")]
        qs: String,
        #[arg(long, default_value = "0")]
        pis: String,
        #[arg(long, default_value = "16x16")]
        dims: String,
        #[arg(long, default_value = "periodic")]
        boundary: String,
        #[arg(long, default_value_t = 50)]
        replicas: usize,
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        /// Z² path scale for the bound columns: N = 4L²l, D = 3L, V = 3L².
        #[arg(long = "L", default_value_t = 4)]
        side: u64,
        #[arg(long = "l", default_value_t = 10)]
        length: u64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replay a move file against a grid-text configuration.
    #[command(name = "verify-path")]
    VerifyPath {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        moves: Option<PathBuf>,
    },
}

enum Fail {
    Config(String),
    Verify(String),
}

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Fail {
        Fail::Config(e.to_string())
    }
}

type Res<T> = Result<T, Fail>;

/// `--config FILE` lines become flags placed right after the subcommand, so
/// anything on the command line overrides them.
fn expand_config(raw: Vec<String>) -> Res<Vec<String>> {
    let pos = raw.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(raw) };
    let path = if let Some(v) = raw[pos].strip_prefix("--config=") {
        v.to_string()
    } else {
        raw.get(pos + 1).cloned().ok_or_else(|| Fail::Config("--config needs a file".into()))?
    };
    let text = fs::read_to_string(&path).map_err(|e| Fail::Config(format!("{path}: {e}")))?;
    let mut extra = vec![];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Fail::Config(format!("{path}:{}: expected key=value", ln + 1)))?;
        let k = k.trim().replace('_', "-");
        if k == "mode" {
            continue;
        }
        extra.push(format!("--{k}={}", v.trim()));
    }
    let mut out = raw[..2.min(raw.len())].to_vec();
    out.extend(extra);
    out.extend(raw[2.min(raw.len())..].iter().cloned());
    Ok(out)
}

fn need_seed(c: &Common) -> Res<u64> {
    c.seed.ok_or_else(|| Fail::Config("--seed is required".into()))
}

fn parse_dims(s: &str) -> Res<Vec<usize>> {
    let d: Vec<usize> = s.split('x').map(|p| p.trim().parse::<usize>()).collect::<Result<_, _>>()?;
    if d.is_empty() || d.len() > 3 || d.contains(&0) {
        return Err(Fail::Config(format!("bad dims `{s}`")));
    }
    Ok(d)
}

fn parse_list(s: &str) -> Res<Vec<f64>> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(Fail::Config("empty list".into()));
    }
    Ok(v)
}

fn sample_box(dims: &str, boundary: &str) -> Res<LatticeBox> {
    let d = parse_dims(dims)?;
    Ok(LatticeBox::new(Site::ORIGIN, &d, Boundary::parse(boundary)?)?)
}

fn params(q: f64, pi: f64, dim: usize) -> Res<ModelParams> {
    Ok(ModelParams::new(q, pi, 1.0, dim)?)
}

fn read_grid(p: &Path) -> Res<Configuration> {
    let text = fs::read_to_string(p).map_err(|e| Fail::Config(format!("{}: {e}", p.display())))?;
    Ok(parse_grid_text(&text)?)
}

/// Environment from `--env` or sampled; configuration from the same file or
/// sampled from the product measure.
fn lattice_inputs(lat: &Lattice, seed: u64) -> Res<(Arc<Environment>, Configuration, ModelParams)> {
    if let Some(p) = &lat.env {
        let cfg = read_grid(p)?;
        let env = cfg.env().clone();
        let par = params(lat.q, lat.pi, env.bx.dim)?;
        return Ok((env, cfg, par));
    }
    let bx = sample_box(&lat.dims, &lat.boundary)?;
    let par = params(lat.q, lat.pi, bx.dim)?;
    let env = Arc::new(sample_environment(&par, &bx, seed));
    let cfg = sample_configuration(&par, &env, seed);
    Ok((env, cfg, par))
}

fn write_text(p: &Path, s: &str) -> Res<()> {
    fs::write(p, s).map_err(|e| Fail::Config(format!("{}: {e}", p.display())))
}

fn emit_moves(p: &Path, g: &MoveSequence, dim: usize) -> Res<()> {
    let mut f = fs::File::create(p).map_err(|e| Fail::Config(format!("{}: {e}", p.display())))?;
    write_moves(&mut f, g, dim)?;
    Ok(())
}

fn run(cmd: &Cmd) -> Res<(Value, bool)> {
    match cmd {
        Cmd::Simulate { common, lattice, replicas, horizon, csv } => {
            let seed = need_seed(common)?;
            let (env, _, par) = lattice_inputs(lattice, seed)?;
            let st = estimate_tau0(&env, &par, *replicas, *horizon, seed);
            if let Some(p) = csv {
                let mut s = String::from("replica,tau0\n");
                for (r, t) in st.samples.iter().enumerate() {
                    s.push_str(&format!("{r},{}\n", t.map(|v| v.to_string()).unwrap_or_else(|| "TIMEOUT".into())));
                }
                write_text(p, &s)?;
            }
            Ok((json!({ "params": par, "horizon": horizon, "stats": st }), true))
        }
        Cmd::Bp { common, lattice } => {
            let seed = need_seed(common)?;
            let (env, cfg, _) = lattice_inputs(lattice, seed)?;
            let origin = env.bx.origin();
            if env.is_immune(origin) {
                return Err(Fail::Config("origin is immune".into()));
            }
            Ok((serde_json::to_value(bp_summary(&cfg, origin))?, true))
        }
        Cmd::Exact { common, lattice } => {
            let seed = need_seed(common)?;
            let (env, _, par) = lattice_inputs(lattice, seed)?;
            let origin = env.bx.origin();
            let rep = exact::origin_report(env, par.q, origin)?;
            let scale = rep.lhs.abs().max(rep.rhs.abs()).max(f64::MIN_POSITIVE);
            let ok = rep.gap / scale <= 1e-9;
            Ok((json!({ "q": par.q, "report": rep, "identity_holds": ok }), ok))
        }
        Cmd::Z2Path { common, side, length, q, pi, emit_moves: em, emit_grid } => {
            let seed = need_seed(common)?;
            params(*q, *pi, 2)?;
            if *side < 2 || *length < 1 {
                return Err(Fail::Config("need L >= 2 and l >= 1".into()));
            }
            let (cfg, path, origin) = random_supergood_instance(*side, *length, *q, *pi, seed);
            let g = build_infection_path(&cfg, &path, origin).map_err(|e| Fail::Verify(e.to_string()))?;
            let rep = verify_legal(&cfg, &g);
            let w = &rep.witness;
            let infected = rep.endpoint.is_infected(origin);
            if let Some(p) = em {
                emit_moves(p, &g, 2)?;
            }
            if let Some(p) = emit_grid {
                write_text(p, &to_grid_text(&cfg))?;
            }
            let v = json!({
                "N": w.n_moves, "D": w.hamming_budget, "V": w.locality_volume,
                "legal": rep.legal, "origin_infected": infected,
                "bounds": { "N": 4 * side * side * length, "D": 3 * side, "V": 3 * side * side },
            });
            Ok((v, rep.legal && infected))
        }
        Cmd::Z3Demo { common, scale, steps, q, pi, route, emit_moves: em, emit_grid } => {
            let seed = need_seed(common)?;
            params(*q, *pi, 3)?;
            if !(1..=3).contains(scale) || *steps < 1 {
                return Err(Fail::Config("need 1 <= L <= 3 and l >= 1".into()));
            }
            let (cfg, path) = match route.as_str() {
                "auto" => random_supergood_brickpath(*scale, *steps, *q, *pi, seed),
                r => {
                    let r = Route::parse(r).ok_or_else(|| Fail::Config(format!("unknown route `{r}`")))?;
                    supergood_brickpath_along(*scale, vec![r; *steps], *q, *pi, seed)
                }
            };
            let g = infect_origin_z3(&cfg, &path).map_err(|e| Fail::Verify(e.to_string()))?;
            let rep = origin_report(&cfg, &path, &g);
            if let Some(p) = em {
                emit_moves(p, &g, 3)?;
            }
            if let Some(p) = emit_grid {
                write_text(p, &to_grid_text(&cfg))?;
            }
            let v = json!({
                "legal": rep.legal,
                "origin_infected": rep.origin_infected,
                "N": rep.witness.n_moves,
                "hamming_max": rep.witness.hamming_budget,
                "reach": rep.reach,
                "routes": path.routes,
                "constants": {
                    "window_radius_per_L": constants::WINDOW_RADIUS,
                    "hamming_per_L": constants::HAMMING_PER_L,
                    "moves_per_step_L2": constants::MOVES_PER_STEP_L2,
                    "line_residual": constants::LINE_RESIDUAL,
                    "sail_meet_per_L": constants::SAIL_MEET_PER_L,
                },
            });
            Ok((v, rep.legal && rep.origin_infected))
        }
        Cmd::Sweep { common, qs, pis, dims, boundary, replicas, horizon, side, length, delta, csv } => {
            let seed = need_seed(common)?;
            let qs = parse_list(qs)?;
            let pis = parse_list(pis)?;
            let bx = sample_box(dims, boundary)?;
            let (n, d, v) = (4 * side * side * length, 3 * side, 3 * side * side);
            let mut rows = vec![];
            let mut table = String::from("q,pi,median_tau0,timeout_frac,time_threshold_log10,prob_bound\n");
            for &pi in &pis {
                for &q in &qs {
                    let par = params(q, pi, bx.dim)?;
                    let env = Arc::new(sample_environment(&par, &bx, seed));
                    let st = estimate_tau0(&env, &par, *replicas, *horizon, seed);
                    let b = eval_yoyoma_bound(n, d, v, q, *delta)?;
                    let med = st.median.map(|m| m.to_string()).unwrap_or_else(|| "TIMEOUT".into());
                    table.push_str(&format!(
                        "{q},{pi},{med},{},{},{}\n",
                        st.timeout_fraction, b.time_threshold_log10, b.prob_bound
                    ));
                    rows.push(json!({
                        "q": q, "pi": pi, "median_tau0": st.median, "timeout_frac": st.timeout_fraction,
                        "time_threshold_log10": b.time_threshold_log10, "prob_bound": b.prob_bound,
                    }));
                }
            }
            match csv {
                Some(p) => write_text(p, &table)?,
                None => eprint!("{table}"),
            }
            Ok((json!({ "N": n, "D": d, "V": v, "delta": delta, "rows": rows }), true))
        }
        Cmd::VerifyPath { common, grid, moves } => {
            need_seed(common)?;
            let grid = grid.as_ref().ok_or_else(|| Fail::Config("--grid is required".into()))?;
            let moves = moves.as_ref().ok_or_else(|| Fail::Config("--moves is required".into()))?;
            let cfg = read_grid(grid)?;
            let f = fs::File::open(moves).map_err(|e| Fail::Config(format!("{}: {e}", moves.display())))?;
            let g = read_moves(BufReader::new(f))?;
            if let Some(m) = g.moves.iter().find(|m| !cfg.bx().contains(m.site)) {
                return Err(Fail::Config(format!("move site {:?} outside the box", m.site)));
            }
            let rep = verify_legal(&cfg, &g);
            if let Some(v) = rep.first_violation {
                eprintln!("violation at move {}: {:?}", v.index, v.kind);
            }
            let v = json!({ "legal": rep.legal, "first_violation": rep.first_violation, "witness": rep.witness });
            Ok((v, rep.legal))
        }
    }
}

fn common(cmd: &Cmd) -> &Common {
    match cmd {
        Cmd::Simulate { common, .. }
        | Cmd::Bp { common, .. }
        | Cmd::Exact { common, .. }
        | Cmd::Z2Path { common, .. }
        | Cmd::Z3Demo { common, .. }
        | Cmd::Sweep { common, .. }
        | Cmd::VerifyPath { common, .. } => common,
    }
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match expand_config(raw) {
        Ok(a) => a,
        Err(Fail::Config(m) | Fail::Verify(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let t = Instant::now();
    let (mut v, ok) = match run(&cli.cmd) {
        Ok(r) => r,
        Err(Fail::Config(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
        Err(Fail::Verify(m)) => {
            eprintln!("verification failed: {m}");
            return ExitCode::from(2);
        }
    };
    let c = common(&cli.cmd);
    if let Value::Object(map) = &mut v {
        map.insert("seed".into(), json!(c.seed));
        map.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        map.insert("wall_clock_s".into(), json!(t.elapsed().as_secs_f64()));
    }
    let text = serde_json::to_string_pretty(&v).unwrap() + "\n";
    let wrote = match &c.out {
        Some(p) => write_text(p, &text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Fail::from),
    };
    if wrote.is_err() {
        eprintln!("error: cannot write result");
        return ExitCode::from(1);
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
