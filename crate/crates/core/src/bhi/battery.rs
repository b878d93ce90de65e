use rayon::prelude::*;
use serde::Serialize;

use super::config::{DomainFamily, ExperimentConfig, Resolved};
use super::domains::{ball_mask, target_vertices, DomainSampler};
use super::SCHEMA_VERSION;
use crate::error::Result;
use crate::geometry::{build_window, GasketGraph};
use crate::stable::{walk_dim, DomainSolver, FractionalOperator, RimPolicy, SpectralWalk};

/// Relative tolerance of the `f <-> g` symmetry check on `R`.
const SYMMETRY_TOL: f64 = 1e-9;

/// `R(D)` of one instance. `ratio` is empty when the instance is excluded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceRatio {
    pub alpha: f64,
    pub level: u32,
    pub instance: u64,
    pub ratio: Option<f64>,
    /// Empty, or one of `empty-b-prime`, `vanishing`, `asymmetric`.
    pub flags: String,
    pub domain_size: usize,
    pub points: usize,
    pub condition: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSummary {
    pub alpha: f64,
    pub level: u32,
    pub instances: usize,
    pub excluded: usize,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub q90_ratio: Option<f64>,
    pub all_finite: bool,
    pub all_at_least_one: bool,
    pub max_condition: f64,
    pub excluded_ok: bool,
}

/// Relative change of max R between two levels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stability {
    pub alpha: f64,
    pub levels: [u32; 2],
    pub max_ratio: [f64; 2],
    pub relative_change: f64,
    pub within: bool,
}

/// Change of the harmonic measure of the first target on `B'` when the
/// ambient window is doubled, for `D` the interior of `B`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Truncation {
    pub alpha: f64,
    pub level: u32,
    pub windows: [String; 2],
    pub max_relative_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BhiReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub outside_hypothesis: bool,
    pub a_alpha: Vec<(f64, f64)>,
    pub rows: Vec<InstanceRatio>,
    pub summaries: Vec<LevelSummary>,
    pub stability: Vec<Stability>,
    pub truncation: Option<Truncation>,
    pub passed: bool,
}

/// `max(f/g) / min(f/g)` and the same with `f` and `g` swapped, over the
/// given positions.
pub fn ratio_statistic(f: &[f64], g: &[f64], points: &[usize]) -> Option<(f64, f64)> {
    if points.is_empty() || points.iter().any(|&i| !(f[i] > 0.0 && g[i] > 0.0)) {
        return None;
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let (mut lo2, mut hi2) = (f64::INFINITY, 0.0f64);
    for &i in points {
        let q = f[i] / g[i];
        lo = lo.min(q);
        hi = hi.max(q);
        let q2 = g[i] / f[i];
        lo2 = lo2.min(q2);
        hi2 = hi2.max(q2);
    }
    Some((hi / lo, hi2 / lo2))
}

fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let r = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[r - 1])
}

/// Everything that depends on the level but not on `alpha`.
struct LevelSetup {
    graph: GasketGraph,
    spectral: SpectralWalk,
    domains: Vec<Vec<usize>>,
    targets: [Vec<usize>; 2],
    b_prime: Vec<bool>,
}

fn setup(config: &ExperimentConfig, geo: &Resolved, level: u32) -> Result<LevelSetup> {
    let graph = build_window(&geo.window, level)?;
    let spectral = SpectralWalk::from_graph(&graph, RimPolicy::Absorbing, config.spectral_cap)?;
    let sampler = DomainSampler::new(&graph, geo, &config.domain, config.seed, 0)?;
    let domains = (0..config.instances as u64).map(|i| sampler.domain(i)).collect();
    let targets = [
        target_vertices(&graph, geo, &geo.targets[0], 0)?,
        target_vertices(&graph, geo, &geo.targets[1], 0)?,
    ];
    let b_prime = ball_mask(&graph, &geo.x0, geo.b_prime_r2, 0);
    Ok(LevelSetup {
        graph,
        spectral,
        domains,
        targets,
        b_prime,
    })
}

fn instance_ratio(op: &FractionalOperator, s: &LevelSetup, alpha: f64, instance: usize) -> Result<InstanceRatio> {
    let domain = &s.domains[instance];
    let mut row = InstanceRatio {
        alpha,
        level: s.graph.level(),
        instance: instance as u64,
        ratio: None,
        flags: String::new(),
        domain_size: domain.len(),
        points: 0,
        condition: 0.0,
    };
    let points: Vec<usize> = (0..domain.len()).filter(|&i| s.b_prime[domain[i]]).collect();
    row.points = points.len();
    if points.is_empty() {
        row.flags = "empty-b-prime".into();
        return Ok(row);
    }
    let solver = DomainSolver::new(op, domain)?;
    row.condition = solver.condition();
    let h = solver.harmonic_measure(&[s.targets[0].clone(), s.targets[1].clone()])?;
    match ratio_statistic(&h[0], &h[1], &points) {
        None => row.flags = "vanishing".into(),
        Some((r, swapped)) => {
            if (r - swapped).abs() > SYMMETRY_TOL * r {
                row.flags = "asymmetric".into();
            }
            row.ratio = Some(r);
        }
    }
    Ok(row)
}

fn summarize(rows: &[InstanceRatio], alpha: f64, level: u32, max_excluded: f64) -> LevelSummary {
    let mine: Vec<&InstanceRatio> = rows.iter().filter(|r| r.alpha == alpha && r.level == level).collect();
    let mut ratios: Vec<f64> = mine.iter().filter_map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let excluded = mine.iter().filter(|r| r.ratio.is_none()).count();
    LevelSummary {
        alpha,
        level,
        instances: mine.len(),
        excluded,
        max_ratio: ratios.last().copied(),
        median_ratio: quantile(&ratios, 0.5),
        q90_ratio: quantile(&ratios, 0.9),
        all_finite: ratios.iter().all(|r| r.is_finite()),
        all_at_least_one: ratios.iter().all(|&r| r >= 1.0),
        max_condition: mine.iter().map(|r| r.condition).fold(0.0, f64::max),
        excluded_ok: (excluded as f64) < max_excluded * mine.len() as f64 || excluded == 0,
    }
}

fn truncation(config: &ExperimentConfig, geo: &Resolved) -> Result<Truncation> {
    let alpha = config.alphas[0];
    let level = config.truncation_level;
    let full = DomainFamily::RandomCellUnion {
        level: 0,
        density: 1.0,
    };
    let windows = [geo.window.clone(), geo.window.dilate(1)?];
    let mut on_b_prime = Vec::new();
    for w in &windows {
        let graph = build_window(w, level)?;
        let op = FractionalOperator::spectral(
            &SpectralWalk::from_graph(&graph, RimPolicy::Absorbing, config.spectral_cap)?,
            alpha / walk_dim(),
        )?;
        let domain = DomainSampler::new(&graph, geo, &full, 0, 0)?.domain(0);
        let target = target_vertices(&graph, geo, &geo.targets[0], 0)?;
        let h = DomainSolver::new(&op, &domain)?.harmonic_measure(&[target])?;
        let bp = ball_mask(&graph, &geo.x0, geo.b_prime_r2, 0);
        let mut vals: Vec<(crate::geometry::ExactPoint, f64)> = domain
            .iter()
            .zip(&h[0])
            .filter(|(&v, _)| bp[v])
            .map(|(&v, &x)| (*graph.vertex(v), x))
            .collect();
        vals.sort_by(|a, b| a.0.cmp(&b.0));
        on_b_prime.push(vals);
    }
    let change = on_b_prime[0]
        .iter()
        .zip(&on_b_prime[1])
        .map(|((_, a), (_, b))| (a - b).abs() / b)
        .fold(0.0, f64::max);
    Ok(Truncation {
        alpha,
        level,
        windows: [windows[0].to_string(), windows[1].to_string()],
        max_relative_change: change,
    })
}

/// The boundary Harnack battery: `R(D)` for every instance, `alpha` and
/// level, with summaries and the level-to-level stability of max R.
pub fn run_bhi(config: &ExperimentConfig) -> Result<BhiReport> {
    config.validate()?;
    let geo = config.resolve()?;
    let mut levels = vec![config.level];
    if config.compare_level != 0 {
        levels.push(config.compare_level);
    }
    let mut rows = Vec::new();
    for &level in &levels {
        let s = setup(config, &geo, level)?;
        for &alpha in &config.alphas {
            let op = FractionalOperator::spectral(&s.spectral, alpha / walk_dim())?;
            let part: Vec<InstanceRatio> = (0..config.instances)
                .into_par_iter()
                .map(|i| instance_ratio(&op, &s, alpha, i))
                .collect::<Result<_>>()?;
            rows.extend(part);
        }
    }
    let mut summaries = Vec::new();
    let mut stability = Vec::new();
    for &alpha in &config.alphas {
        let per: Vec<LevelSummary> = levels
            .iter()
            .map(|&l| summarize(&rows, alpha, l, config.max_excluded))
            .collect();
        if per.len() == 2 {
            let a = per[0].max_ratio.unwrap_or(f64::NAN);
            let b = per[1].max_ratio.unwrap_or(f64::NAN);
            let change = (a - b).abs() / a.min(b);
            stability.push(Stability {
                alpha,
                levels: [levels[0], levels[1]],
                max_ratio: [a, b],
                relative_change: change,
                within: change <= config.stability,
            });
        }
        summaries.extend(per);
    }
    let truncation = if config.truncation_level != 0 {
        Some(truncation(config, &geo)?)
    } else {
        None
    };
    let outside_hypothesis = config.alphas.iter().any(|&a| a >= 1.0);
    let passed = !outside_hypothesis
        && summaries
            .iter()
            .all(|s| s.all_finite && s.all_at_least_one && s.excluded_ok && s.max_ratio.is_some())
        && stability.iter().all(|s| s.within);
    let a_alpha = config
        .alphas
        .iter()
        .map(|&a| (a, crate::stable::StableParams::new(a).map(|p| p.a_alpha()).unwrap_or(f64::NAN)))
        .collect();
    Ok(BhiReport {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        seed: config.seed,
        outside_hypothesis,
        a_alpha,
        rows,
        summaries,
        stability,
        truncation,
        passed,
    })
}
