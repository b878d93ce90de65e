use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use gasket_core::bhi::{run_bhi, run_lemma_battery, run_scaling_suite, ExperimentConfig};
use gasket_core::geometry::{build_window, parse_rational, write_cache, Cell, ExactPoint, GasketGraph, WindowSpec};
use gasket_core::io::{
    emit_bhi, emit_lemmas, emit_scaling, format_f64, harmonic_rows, spline_rows, write_csv_to, RunDir, RunManifest,
    HARMONIC_HEADER, SPLINE_HEADER,
};
use gasket_core::mc::{
    estimate_harmonic_measure, oracle_battery, sampler_battery, with_workers, OracleConfig, SamplerConfig, SeedPlan,
};
use gasket_core::spline::{ball_cutoff, cutoff_fractional_bound, format_rational, rotated_state, verify_spline_condition};
use gasket_core::stable::{
    lambda_functional, lambda_tail_bound, DomainSolver, FractionalOperator, KernelMode, RimPolicy, StableParams,
    WalkOperator, DEFAULT_GREEN_CAP, DEFAULT_SPECTRAL_CAP,
};
use gasket_core::{Error, Result};

#[derive(Parser)]
#[command(name = "gasket", version, about = "Stable-like processes and boundary Harnack experiments on the Sierpinski gasket")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a window graph and write it in the cache format.
    BuildGraph {
        #[arg(long, default_value = "pair")]
        window: String,
        #[arg(long)]
        level: u32,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Values and scaled normal derivatives of phi0 on the cell of a path.
    SplineEval {
        /// Digits 1..3, e.g. 1213.
        #[arg(long, default_value = "")]
        path: String,
        /// Corner (0..2) where the rotation of phi0 equals 1.
        #[arg(long, default_value_t = 0)]
        apex: usize,
        #[arg(long, value_enum, default_value_t = Format::Rational)]
        format: Format,
    },
    /// Exhaustive exact check of the spline condition.
    SplineVerify {
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// Also write every state at exactly this depth as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Ball cutoff from phi0 pieces, optionally with its fractional bound.
    Cutoff {
        #[arg(long, default_value = "pair")]
        window: String,
        #[arg(long, default_value = "0,0")]
        center: String,
        #[arg(long, default_value = "1/4")]
        p1_sq: String,
        #[arg(long, default_value = "9/16")]
        p2_sq: String,
        /// Level of the graph on which `(I - P)^beta phi` is bounded.
        #[arg(long)]
        level: Option<u32>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Harmonic function on a ball with indicator data on a target.
    SolveHarmonic {
        #[command(flatten)]
        d: DomainArgs,
        /// `right`, `left`, or a cell `LEVEL@a,b` given by its lower-left corner.
        #[arg(long, default_value = "right")]
        target: String,
    },
    /// Expected number of jumps and continuum exit time from a ball.
    ExitTime {
        #[command(flatten)]
        d: DomainArgs,
    },
    /// Green kernel of a ball.
    Green {
        #[command(flatten)]
        d: DomainArgs,
    },
    /// The tail functional Lambda of `1 + x^2` outside a ball.
    Lambda {
        #[arg(long, default_value = "pair")]
        window: String,
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value = "0,0")]
        center: String,
        #[arg(long, default_value = "1/16")]
        radius_sq: String,
    },
    /// Monte Carlo against the spectral solve, and the sampler laws.
    McValidate {
        #[arg(long, default_value_t = 4)]
        level: u32,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo harmonic measure of the right and left halves.
    McHarmonic {
        #[command(flatten)]
        d: DomainArgs,
        /// Start vertices `a,b`; repeatable.
        #[arg(long, default_value = "0,0")]
        start: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
    /// Boundary Harnack batteries.
    Bhi {
        #[command(subcommand)]
        battery: Battery,
    },
}

#[derive(Subcommand)]
enum Battery {
    Run(BhiArgs),
    Lemmas(BhiArgs),
    Scaling(BhiArgs),
}

#[derive(Args)]
struct BhiArgs {
    /// TOML config; defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
    /// Output directory; overrides `out_dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DomainArgs {
    #[arg(long, default_value = "pair")]
    window: String,
    #[arg(long)]
    level: u32,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// D is the set of interior vertices with `rho(x, center)^2 < radius_sq`.
    #[arg(long, default_value = "0,0")]
    center: String,
    #[arg(long, default_value = "1/4")]
    radius_sq: String,
    #[arg(long, default_value_t = DEFAULT_SPECTRAL_CAP)]
    cap: usize,
    /// Directory for CSV and manifest; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Rational,
    Decimal,
}

/// Exit status of a completed command.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) | Error::InvalidParameter(_) | Error::InvalidWindow(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}

fn outcome(passed: bool) -> Outcome {
    if passed {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn run(command: Command) -> Result<Outcome> {
    let started = Instant::now();
    match command {
        Command::BuildGraph { window, level, out } => {
            let g = build_window(&window.parse()?, level)?;
            eprintln!("{} vertices, {} edges, {} rim vertices", g.len(), g.edge_count(), g.rim().len());
            match out {
                Some(p) => {
                    let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
                    write_cache(&g, std::io::BufWriter::new(f)).map_err(|e| Error::io(&p, e))?;
                }
                None => write_cache(&g, std::io::stdout().lock()).map_err(|e| Error::io("<stdout>", e))?,
            }
            Ok(Outcome::Pass)
        }
        Command::SplineEval { path, apex, format } => {
            let digits = gasket_core::spline::parse_path(&path)?;
            if apex > 2 {
                return Err(Error::InvalidParameter(format!("apex {apex} must be 0, 1 or 2")));
            }
            let s = rotated_state(apex, &digits, gasket_core::spline::DEFAULT_DEPTH_CAP)?;
            let show = |x: &gasket_core::spline::Rational| match format {
                Format::Rational => format_rational(x),
                Format::Decimal => format_f64(x.to_f64().unwrap_or(f64::NAN)),
            };
            for i in 0..3 {
                println!("v{} = {}", i + 1, show(&s.values[i]));
            }
            for i in 0..3 {
                println!("d{} = {}", i + 1, show(&s.derivs[i]));
            }
            Ok(Outcome::Pass)
        }
        Command::SplineVerify { depth, dump } => {
            let r = verify_spline_condition(depth)?;
            println!("depth {}: {} states, {} violations", r.depth, r.states_checked, r.violations());
            println!("min phi0 = {}, max phi0 = {}", format_rational(&r.min_value), format_rational(&r.max_value));
            println!("max |d|/v = {}", format_rational(&r.max_derivative_ratio));
            println!("elapsed {:.3} s", started.elapsed().as_secs_f64());
            if let Some(p) = dump {
                let rows = spline_rows(depth)?;
                let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
                write_csv_to(f, &SPLINE_HEADER, &rows).map_err(|e| Error::io(&p, e))?;
            }
            Ok(outcome(r.violations() == 0))
        }
        Command::Cutoff {
            window,
            center,
            p1_sq,
            p2_sq,
            level,
            alpha,
        } => {
            let w: WindowSpec = window.parse()?;
            let c = ball_cutoff(&w, &center.parse()?, parse_rational(&p1_sq)?, parse_rational(&p2_sq)?)?;
            println!("cutoff on {}-cells, {} pieces", c.level(), c.pieces().len());
            if let Some(k) = level {
                let g = build_window(&w, k)?;
                let p = StableParams::new(alpha)?;
                let op = FractionalOperator::build(&g, p.beta, RimPolicy::Absorbing, KernelMode::Spectral, DEFAULT_SPECTRAL_CAP)?;
                let b = cutoff_fractional_bound(&c, &op, &g)?;
                println!("level {}: max |L phi| = {} per jump, {} per unit time", b.level, format_f64(b.raw), format_f64(b.scaled));
            }
            Ok(Outcome::Pass)
        }
        Command::SolveHarmonic { d, target } => {
            let s = DomainSetup::new(&d)?;
            let t = target_set(&s.graph, &s.domain, &target)?;
            let mut g = vec![0.0; s.graph.len()];
            for v in t {
                g[v] = 1.0;
            }
            let h = DomainSolver::new(&s.op, &s.domain)?.harmonic(&g, 0.0)?;
            let rows = vertex_rows(&s.graph, &h.domain, &[&h.values]);
            emit_table(&d, "harmonic", &["vertex", "a", "b", "h"], rows, json!({"condition": h.condition, "certificate": h.certificate}), started)
        }
        Command::ExitTime { d } => {
            let s = DomainSetup::new(&d)?;
            let e = DomainSolver::new(&s.op, &s.domain)?.exit_times();
            let dt = StableParams::new(d.alpha)?.time_per_jump(d.level);
            let time: Vec<f64> = e.steps.iter().map(|x| x * dt).collect();
            let rows = vertex_rows(&s.graph, &e.domain, &[&e.steps, &time]);
            emit_table(&d, "exit-time", &["vertex", "a", "b", "jumps", "time"], rows, json!({"condition": e.condition}), started)
        }
        Command::Green { d } => {
            let s = DomainSetup::new(&d)?;
            let t = DomainSolver::new(&s.op, &s.domain)?.green(DEFAULT_GREEN_CAP)?;
            let n = t.domain.len();
            let mut rows = Vec::with_capacity(n * n);
            for x in 0..n {
                for y in 0..n {
                    rows.push(vec![t.domain[x].to_string(), t.domain[y].to_string(), format_f64(t.kernel(x, y))]);
                }
            }
            let diag = json!({"symmetry_defect": t.symmetry_defect(), "min_entry": t.min_entry()});
            emit_table(&d, "green", &["x", "y", "kernel"], rows, diag, started)
        }
        Command::Lambda {
            window,
            level,
            alpha,
            center,
            radius_sq,
        } => {
            let g = build_window(&window.parse()?, level)?;
            let v: ExactPoint = center.parse()?;
            let r2 = parse_rational(&radius_sq)?;
            let f: Vec<f64> = g.vertices().iter().map(|p| 1.0 + p.to_f64().0.powi(2)).collect();
            let l = lambda_functional(&g, &v, r2, &f, alpha)?;
            let far = g.vertices().iter().map(|p| p.dist2(&v).to_f64().unwrap_or(0.0)).fold(0.0, f64::max);
            println!("Lambda = {}", format_f64(l));
            println!("tail bound of 1 beyond the window radius = {}", format_f64(lambda_tail_bound(far.sqrt(), alpha)));
            Ok(Outcome::Pass)
        }
        Command::McValidate {
            level,
            paths,
            samples,
            seed,
            out,
        } => {
            let oc = OracleConfig {
                level,
                paths,
                seed,
                ..OracleConfig::default()
            };
            let o = oracle_battery(&oc)?;
            for t in &o.targets {
                println!(
                    "alpha {} start {} {:>6}: mc {:.5} exact {:.5} se {:.5} {}",
                    t.alpha, t.start, t.target, t.frequency, t.exact, t.se, pass_word(t.within)
                );
            }
            for j in &o.jumps {
                println!(
                    "alpha {} start {} jumps: mc {:.4} exact {:.4} se {:.4} {}",
                    j.alpha, j.start, j.mean_jumps, j.exact, j.se, pass_word(j.within)
                );
            }
            let sc = SamplerConfig {
                samples,
                seed,
                ..SamplerConfig::default()
            };
            let s = sampler_battery(&sc)?;
            for l in &s.laplace {
                println!("laplace s={} empirical {:.6} exact {:.6} se {:.2e} {}", l.s, l.empirical, l.exact, l.se, pass_word(l.within));
            }
            for w in &s.weights {
                println!(
                    "weights beta={:.4} m={}: c_m m^(1+beta) {:.6} limit {:.6} rel {:.2e} {}",
                    w.beta, w.m, w.scaled, w.limit, w.relative_error, pass_word(w.within)
                );
            }
            println!("tail constant (beta {}): empirical {:.5} textbook {:.5} stated {:.5}", s.tail.beta, s.tail.empirical, s.tail.textbook, s.tail.stated);
            for c in &s.constants {
                println!("alpha {}: beta/Gamma(1-beta) = {:.6}, A_alpha = {:.6}", c.alpha, c.textbook, c.a_alpha);
            }
            let passed = o.passed && s.passed;
            if let Some(dir) = out {
                let run_id = format!("mc-validate-{level}-{paths}-{samples}-{seed}");
                let mut rd = RunDir::create(dir, &run_id)?;
                let rows: Vec<Vec<String>> = o
                    .targets
                    .iter()
                    .map(|t| {
                        vec![
                            format_f64(t.alpha),
                            t.start.clone(),
                            t.target.clone(),
                            t.count.to_string(),
                            t.paths.to_string(),
                            format_f64(t.ci_lo),
                            format_f64(t.ci_hi),
                            format_f64(t.exact),
                            t.within.to_string(),
                        ]
                    })
                    .collect();
                rd.write_csv(
                    "oracle.csv",
                    &["alpha", "start", "target", "count", "N", "ci_lo", "ci_hi", "exact", "within"],
                    &rows,
                )?;
                rd.write_json("oracle.json", &o)?;
                rd.write_json("sampler.json", &s)?;
                manifest(&rd, "mc-validate", &run_id, json!({"master": seed, "paths": paths, "samples": samples}), json!({"sigmas": oc.sigmas, "weight_tolerance": sc.weight_tolerance}), json!({"flagged": o.flagged}), passed, started)?;
            }
            Ok(outcome(passed))
        }
        Command::McHarmonic {
            d,
            start,
            paths,
            seed,
            confidence,
        } => {
            let graph = build_window(&d.window.parse()?, d.level)?;
            let walk = WalkOperator::new(&graph, RimPolicy::Absorbing);
            let domain = ball_domain(&graph, &d)?;
            let right = target_set(&graph, &domain, "right")?;
            let left = target_set(&graph, &domain, "left")?;
            let middle: Vec<usize> = walk
                .states()
                .iter()
                .copied()
                .filter(|v| domain.binary_search(v).is_err() && !right.contains(v) && !left.contains(v))
                .collect();
            let mut targets = vec![right, left];
            let mut names: Vec<String> = vec!["right".into(), "left".into()];
            if !middle.is_empty() {
                targets.push(middle);
                names.push("axis".into());
            }
            names.push("killed".into());
            let starts: Vec<usize> = start.iter().map(|s| graph.require_index(&s.parse()?)).collect::<Result<_>>()?;
            let beta = StableParams::new(d.alpha)?.beta;
            let plan = SeedPlan::new(seed, paths);
            let est = with_workers(|| estimate_harmonic_measure(&walk, &domain, &targets, &starts, beta, &plan, 0))??;
            let rows = harmonic_rows(&est, &names, confidence);
            let flagged: u64 = est.starts.iter().map(|s| s.flagged).sum();
            emit_table(&d, "mc-harmonic", &HARMONIC_HEADER, rows, json!({"flagged": flagged, "seed": seed, "paths": paths}), started)
        }
        Command::Bhi { battery } => {
            let (name, args) = match &battery {
                Battery::Run(a) => ("run", a),
                Battery::Lemmas(a) => ("lemmas", a),
                Battery::Scaling(a) => ("scaling", a),
            };
            let config = match &args.config {
                Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
                    Error::Io { .. } => Error::Config(e.to_string()),
                    e => e,
                })?,
                None => ExperimentConfig::default(),
            };
            if args.print_config {
                print!("{}", config.to_toml());
                return Ok(Outcome::Pass);
            }
            let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&config.out_dir));
            let hash = config.hash();
            let mut rd = RunDir::create(dir, &hash)?;
            let tolerances = json!({
                "stability": config.stability,
                "max_excluded": config.max_excluded,
                "lemma_tolerance": config.lemmas.tolerance,
                "scaling_tolerance": config.scaling.tolerance,
            });
            let seed_plan = json!({"master": config.seed, "instances": config.instances});
            let command = format!("bhi {name}");
            let result = match battery {
                Battery::Run(_) => run_bhi(&config).and_then(|r| {
                    emit_bhi(&mut rd, &r)?;
                    for s in &r.summaries {
                        println!(
                            "alpha {} level {}: max R {} excluded {}/{}",
                            s.alpha, s.level, s.max_ratio.map(format_f64).unwrap_or_default(), s.excluded, s.instances
                        );
                    }
                    for s in &r.stability {
                        println!("alpha {} stability {:.4} {}", s.alpha, s.relative_change, pass_word(s.within));
                    }
                    Ok((r.passed, json!({"truncation": r.truncation, "outside_hypothesis": r.outside_hypothesis})))
                }),
                Battery::Lemmas(_) => run_lemma_battery(&config).and_then(|r| {
                    emit_lemmas(&mut rd, &r)?;
                    for s in &r.stability {
                        println!("alpha {} {}: change {:.4} {}", s.alpha, s.constant, s.relative_change, pass_word(s.within));
                    }
                    println!("bound R <= (c8/c8')^2 on every instance: {}", pass_word(r.bound_holds));
                    Ok((r.passed, json!({"sweeps": r.sweeps})))
                }),
                Battery::Scaling(_) => run_scaling_suite(&config).and_then(|r| {
                    emit_scaling(&mut rd, &r)?;
                    println!("walk dimension fit {:.4} {}", r.walk.fit.slope, pass_word(r.walk.fit.within));
                    for e in &r.exit {
                        println!("alpha {} exit exponent {:.4} {}", e.alpha, e.fit.slope, pass_word(e.fit.within));
                    }
                    let exact = r.lambda.iter().all(|l| l.exact);
                    println!("Lambda dilation identity exact: {}", pass_word(exact));
                    Ok((r.passed, Value::Null))
                }),
            };
            let (passed, diagnostics) = match result {
                Ok(x) => x,
                Err(e) => {
                    let diag = json!({"error": e.to_string()});
                    manifest(&rd, &command, &hash, seed_plan, tolerances, diag, false, started)?;
                    return Err(e);
                }
            };
            rd.write_text("config.toml", &config.to_toml())?;
            manifest(&rd, &command, &hash, seed_plan, tolerances, diagnostics, passed, started)?;
            println!("{}", pass_word(passed));
            Ok(outcome(passed))
        }
    }
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[allow(clippy::too_many_arguments)]
fn manifest(
    rd: &RunDir,
    command: &str,
    hash: &str,
    seed_plan: Value,
    tolerances: Value,
    diagnostics: Value,
    passed: bool,
    started: Instant,
) -> Result<()> {
    rd.append_manifest(&RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_hash: hash.into(),
        seed_plan,
        wall_time_s: started.elapsed().as_secs_f64(),
        tolerances,
        diagnostics,
        outputs: rd.outputs().to_vec(),
        passed,
    })
}

struct DomainSetup {
    graph: GasketGraph,
    op: FractionalOperator,
    domain: Vec<usize>,
}

impl DomainSetup {
    fn new(d: &DomainArgs) -> Result<Self> {
        let graph = build_window(&d.window.parse()?, d.level)?;
        let beta = StableParams::new(d.alpha)?.beta;
        let op = FractionalOperator::build(&graph, beta, RimPolicy::Absorbing, KernelMode::Spectral, d.cap)?;
        let domain = ball_domain(&graph, d)?;
        Ok(Self { graph, op, domain })
    }
}

fn ball_domain(graph: &GasketGraph, d: &DomainArgs) -> Result<Vec<usize>> {
    let c: ExactPoint = d.center.parse()?;
    let r2 = parse_rational(&d.radius_sq)?;
    let mut v: Vec<usize> = graph.ball(&c, r2).into_iter().filter(|&v| !graph.is_rim(v)).collect();
    v.sort_unstable();
    if v.is_empty() {
        return Err(Error::EmptyDomain);
    }
    Ok(v)
}

/// Interior vertices outside `D` on one side of the vertical axis, or in a
/// given cell.
fn target_set(graph: &GasketGraph, domain: &[usize], spec: &str) -> Result<Vec<usize>> {
    let zero = num_rational::Rational64::from_integer(0);
    let keep: Box<dyn Fn(&ExactPoint) -> bool> = match spec {
        "right" => Box::new(move |p: &ExactPoint| p.a > zero),
        "left" => Box::new(move |p: &ExactPoint| p.a < zero),
        _ => {
            let (level, corner) = spec
                .split_once('@')
                .ok_or_else(|| Error::Parse(format!("target `{spec}` is not right, left or LEVEL@a,b")))?;
            let level: i32 = level.parse().map_err(|_| Error::Parse(format!("bad level in `{spec}`")))?;
            let cell = Cell::new(level, corner.parse()?);
            Box::new(move |p: &ExactPoint| cell.contains(p))
        }
    };
    let t: Vec<usize> = (0..graph.len())
        .filter(|&v| !graph.is_rim(v) && domain.binary_search(&v).is_err() && keep(graph.vertex(v)))
        .collect();
    if t.is_empty() {
        return Err(Error::InvalidParameter(format!("target `{spec}` has no vertices outside D")));
    }
    Ok(t)
}

fn vertex_rows(graph: &GasketGraph, domain: &[usize], cols: &[&[f64]]) -> Vec<Vec<String>> {
    domain
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let p = graph.vertex(v);
            let mut r = vec![v.to_string(), p.a.to_string(), p.b.to_string()];
            r.extend(cols.iter().map(|c| format_f64(c[i])));
            r
        })
        .collect()
}

fn emit_table(
    d: &DomainArgs,
    name: &str,
    header: &[&str],
    rows: Vec<Vec<String>>,
    diagnostics: Value,
    started: Instant,
) -> Result<Outcome> {
    match &d.out {
        None => {
            write_csv_to(std::io::stdout().lock(), header, &rows).map_err(|e| Error::io("<stdout>", e))?;
        }
        Some(dir) => {
            let run_id = format!(
                "{name}:{}:{}:{}:{}:{}",
                d.window, d.level, d.alpha, d.center, d.radius_sq
            );
            let mut rd = RunDir::create(dir, &run_id)?;
            rd.write_csv(&format!("{name}.csv"), header, &rows)?;
            manifest(&rd, name, &run_id, Value::Null, Value::Null, diagnostics, true, started)?;
        }
    }
    Ok(Outcome::Pass)
}
