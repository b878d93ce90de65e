use rayon::prelude::*;
use serde::Serialize;

use super::battery::ratio_statistic;
use super::config::{ExperimentConfig, Resolved};
use super::domains::{target_vertices, DomainSampler};
use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::geometry::{build_window, parse_rational, GasketGraph};
use crate::stable::{walk_dim, FractionalOperator, LemmaDomain, LemmaScale, RimPolicy, SpectralWalk};

/// Slack for the algebraic bound `R <= (c8 / c8')^2`.
const BOUND_SLACK: f64 = 1e-9;

/// Constants of one instance at one scale. Empty values mark an excluded
/// instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaRow {
    pub alpha: f64,
    pub instance: u64,
    pub level: u32,
    pub m: i32,
    pub c4: Option<f64>,
    pub c7: Option<f64>,
    pub c8: Option<f64>,
    pub c8_prime: Option<f64>,
    pub ratio: Option<f64>,
    /// `(c8 / c8')^2`.
    pub bound: Option<f64>,
    pub bound_holds: bool,
    /// `c7` for each radius of the sweep.
    pub sweep: Vec<Option<f64>>,
    pub flags: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaAggregate {
    pub alpha: f64,
    pub level: u32,
    pub m: i32,
    pub max_c4: f64,
    pub max_c7: f64,
    pub max_c8: f64,
    pub min_c8_prime: f64,
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaStability {
    pub alpha: f64,
    pub constant: String,
    pub values: [f64; 2],
    pub relative_change: f64,
    pub within: bool,
}

/// Largest `c7` over the instances at the coarse scale for each sweep radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub alpha: f64,
    pub p3_sq: Vec<String>,
    pub max_c7: Vec<f64>,
    pub monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<LemmaRow>,
    pub aggregates: Vec<LemmaAggregate>,
    pub stability: Vec<LemmaStability>,
    pub sweeps: Vec<Sweep>,
    pub bound_holds: bool,
    pub excluded_ok: bool,
    pub passed: bool,
}

struct Scale {
    graph: GasketGraph,
    spectral: SpectralWalk,
    m: i32,
    domains: Vec<Vec<usize>>,
    targets: [Vec<usize>; 2],
}

fn scale_setup(config: &ExperimentConfig, geo: &Resolved, level: u32, m: i32) -> Result<Scale> {
    let graph = build_window(&geo.window, level)?;
    let spectral = SpectralWalk::from_graph(&graph, RimPolicy::Absorbing, config.spectral_cap)?;
    let sampler = DomainSampler::new(&graph, geo, &config.lemmas.domain, config.seed, m)?;
    let domains = (0..config.lemmas.instances as u64).map(|i| sampler.domain(i)).collect();
    let targets = [
        target_vertices(&graph, geo, &geo.targets[0], m)?,
        target_vertices(&graph, geo, &geo.targets[1], m)?,
    ];
    Ok(Scale {
        graph,
        spectral,
        m,
        domains,
        targets,
    })
}

struct Radii {
    p1: num_rational::Rational64,
    p3: num_rational::Rational64,
    p5: num_rational::Rational64,
    sweep: Vec<num_rational::Rational64>,
}

fn instance_row(op: &FractionalOperator, s: &Scale, geo: &Resolved, r: &Radii, alpha: f64, i: usize) -> Result<LemmaRow> {
    let mut row = LemmaRow {
        alpha,
        instance: i as u64,
        level: s.graph.level(),
        m: s.m,
        c4: None,
        c7: None,
        c8: None,
        c8_prime: None,
        ratio: None,
        bound: None,
        bound_holds: true,
        sweep: vec![None; r.sweep.len()],
        flags: String::new(),
    };
    let scale = LemmaScale::new(geo.x0, s.m);
    let mut run = || -> Result<()> {
        let d = LemmaDomain::new(op, &s.graph, &s.domains[i], scale, r.p5)?;
        let f = d.harmonic_measure(&s.targets[0])?;
        let g = d.harmonic_measure(&s.targets[1])?;
        row.c4 = Some(d.escape(r.p1)?.c4);
        row.c7 = Some(d.upper(&f, r.p3)?.c7.max(d.upper(&g, r.p3)?.c7));
        let fac = d.factorization(&[&f, &g], r.p1)?;
        row.c8 = Some(fac.c8);
        row.c8_prime = Some(fac.c8_prime);
        let fd: Vec<f64> = d.domain().iter().map(|&v| f[v]).collect();
        let gd: Vec<f64> = d.domain().iter().map(|&v| g[v]).collect();
        let points: Vec<usize> = (0..d.domain().len())
            .filter(|&j| scale.inside(&s.graph, d.domain()[j], r.p1))
            .collect();
        let (ratio, _) = ratio_statistic(&fd, &gd, &points).ok_or_else(|| Error::Degenerate("f or g vanishes".into()))?;
        let bound = (fac.c8 / fac.c8_prime).powi(2);
        row.ratio = Some(ratio);
        row.bound = Some(bound);
        row.bound_holds = ratio <= bound * (1.0 + BOUND_SLACK);
        for (k, &p3) in r.sweep.iter().enumerate() {
            row.sweep[k] = d.upper(&f, p3).and_then(|a| Ok(a.c7.max(d.upper(&g, p3)?.c7))).ok();
        }
        Ok(())
    };
    match run() {
        Ok(()) => {}
        Err(Error::EmptyDomain) => row.flags = "empty".into(),
        Err(Error::Degenerate(_)) => row.flags = "degenerate".into(),
        Err(e) => return Err(e),
    }
    if row.flags.is_empty() {
        Ok(row)
    } else {
        Ok(LemmaRow {
            c4: None,
            c7: None,
            c8: None,
            c8_prime: None,
            ratio: None,
            bound: None,
            bound_holds: true,
            sweep: vec![None; r.sweep.len()],
            ..row
        })
    }
}

fn aggregate(rows: &[LemmaRow], alpha: f64, level: u32, m: i32) -> LemmaAggregate {
    let mine: Vec<&LemmaRow> = rows.iter().filter(|r| r.alpha == alpha && r.level == level).collect();
    let max = |f: fn(&LemmaRow) -> Option<f64>| mine.iter().filter_map(|r| f(r)).fold(0.0, f64::max);
    LemmaAggregate {
        alpha,
        level,
        m,
        max_c4: max(|r| r.c4),
        max_c7: max(|r| r.c7),
        max_c8: max(|r| r.c8),
        min_c8_prime: mine.iter().filter_map(|r| r.c8_prime).fold(f64::INFINITY, f64::min),
        excluded: mine.iter().filter(|r| !r.flags.is_empty()).count(),
    }
}

/// Escape, upper and factorization constants at scale `m` on level `k` and
/// at `m + 1` on level `k + 1`, with their cross-scale stability, a sweep of
/// the upper constant over `p3`, and the per-instance check
/// `R <= (c8 / c8')^2`.
pub fn run_lemma_battery(config: &ExperimentConfig) -> Result<LemmaReport> {
    config.validate()?;
    let geo = config.resolve()?;
    let lc = &config.lemmas;
    let radii = Radii {
        p1: parse_rational(&lc.p1_sq)?,
        p3: parse_rational(&lc.p3_sq)?,
        p5: parse_rational(&lc.p5_sq)?,
        sweep: lc.p3_sweep.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?,
    };
    let scales = [(lc.level, lc.m), (lc.level + 1, lc.m + 1)];
    let mut rows = Vec::new();
    for &(level, m) in &scales {
        let s = scale_setup(config, &geo, level, m)?;
        for &alpha in &config.alphas {
            let op = FractionalOperator::spectral(&s.spectral, alpha / walk_dim())?;
            let part: Vec<LemmaRow> = (0..lc.instances)
                .into_par_iter()
                .map(|i| instance_row(&op, &s, &geo, &radii, alpha, i))
                .collect::<Result<_>>()?;
            rows.extend(part);
        }
    }
    let mut aggregates = Vec::new();
    let mut stability = Vec::new();
    let mut sweeps = Vec::new();
    for &alpha in &config.alphas {
        let a = aggregate(&rows, alpha, scales[0].0, scales[0].1);
        let b = aggregate(&rows, alpha, scales[1].0, scales[1].1);
        for (name, x, y) in [
            ("c4", a.max_c4, b.max_c4),
            ("c7", a.max_c7, b.max_c7),
            ("c8", a.max_c8, b.max_c8),
            ("c8_prime", a.min_c8_prime, b.min_c8_prime),
        ] {
            let change = (x - y).abs() / x.min(y);
            let finite = x.is_finite() && y.is_finite() && x > 0.0 && y > 0.0;
            stability.push(LemmaStability {
                alpha,
                constant: name.into(),
                values: [x, y],
                relative_change: change,
                within: finite && change <= lc.tolerance,
            });
        }
        let coarse: Vec<&LemmaRow> = rows
            .iter()
            .filter(|r| r.alpha == alpha && r.level == scales[0].0)
            .collect();
        let max_c7: Vec<f64> = (0..lc.p3_sweep.len())
            .map(|k| coarse.iter().filter_map(|r| r.sweep[k]).fold(0.0, f64::max))
            .collect();
        let mut order: Vec<usize> = (0..radii.sweep.len()).collect();
        order.sort_by(|&i, &j| radii.sweep[i].cmp(&radii.sweep[j]));
        let monotone = order.windows(2).all(|w| max_c7[w[0]] <= max_c7[w[1]]);
        sweeps.push(Sweep {
            alpha,
            p3_sq: lc.p3_sweep.clone(),
            max_c7,
            monotone,
        });
        aggregates.push(a);
        aggregates.push(b);
    }
    let bound_holds = rows.iter().all(|r| r.bound_holds);
    let excluded_ok = aggregates
        .iter()
        .all(|a| a.excluded == 0 || (a.excluded as f64) < config.max_excluded * lc.instances as f64);
    let passed = bound_holds && excluded_ok && stability.iter().all(|s| s.within);
    Ok(LemmaReport {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        seed: config.seed,
        rows,
        aggregates,
        stability,
        sweeps,
        bound_holds,
        excluded_ok,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bhi::config::{DomainFamily, LemmaConfig};

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            alphas: vec![0.5],
            lemmas: LemmaConfig {
                level: 3,
                m: 0,
                instances: 4,
                domain: DomainFamily::RandomCellUnion { level: 1, density: 0.8 },
                ..LemmaConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn constants_are_positive_and_the_bound_holds() {
        let r = run_lemma_battery(&small()).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r.bound_holds);
        for row in r.rows.iter().filter(|r| r.flags.is_empty()) {
            for c in [row.c4, row.c7, row.c8, row.c8_prime] {
                let c = c.unwrap();
                assert!(c > 0.0 && c.is_finite());
            }
            assert!(row.c8_prime.unwrap() <= row.c8.unwrap());
            assert!(row.ratio.unwrap() >= 1.0);
        }
        assert_eq!(r.stability.len(), 4);
        assert_eq!(r.sweeps[0].max_c7.len(), 3);
    }

    #[test]
    fn upper_constant_grows_with_p3() {
        let r = run_lemma_battery(&small()).unwrap();
        assert!(r.sweeps.iter().all(|s| s.monotone), "{:?}", r.sweeps);
    }
}
