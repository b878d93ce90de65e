use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use super::engine::{simulate_stable_exit, simulate_walk_exit, Exit, JumpEngine, PathOutcome};
use super::sampler::StepCountSampler;
use super::seed::SeedPlan;
use crate::error::{Error, Result};
use crate::geometry::{build_window, Cell, ExactPoint, WindowSpec};
use crate::stable::{RimPolicy, WalkOperator};

/// Largest tolerated fraction of flagged paths.
pub const FLAGGED_FRACTION_CAP: f64 = 1e-4;

/// Exact two-sided binomial confidence interval at confidence `1 - a`.
pub fn clopper_pearson(x: u64, n: u64, a: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (xf, nf) = (x as f64, n as f64);
    let lo = if x == 0 {
        0.0
    } else {
        Beta::new(xf, nf - xf + 1.0).map(|b| b.inverse_cdf(a / 2.0)).unwrap_or(0.0)
    };
    let hi = if x == n {
        1.0
    } else {
        Beta::new(xf + 1.0, nf - xf).map(|b| b.inverse_cdf(1.0 - a / 2.0)).unwrap_or(1.0)
    };
    (lo, hi)
}

/// Frequencies of each exit category from one start vertex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartEstimate {
    /// Graph vertex of the start.
    pub start: usize,
    /// One count per target, then the killed count.
    pub counts: Vec<u64>,
    pub paths: u64,
    pub flagged: u64,
    pub mean_jumps: f64,
    /// Standard error of `mean_jumps`.
    pub jumps_se: f64,
}

impl StartEstimate {
    pub fn frequency(&self, c: usize) -> f64 {
        self.counts[c] as f64 / self.paths as f64
    }

    /// Binomial standard error of a frequency with true value `p`.
    pub fn binomial_se(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.paths as f64).sqrt()
    }

    pub fn interval(&self, c: usize, a: f64) -> (f64, f64) {
        clopper_pearson(self.counts[c], self.paths, a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicEstimate {
    pub beta: f64,
    pub targets: usize,
    pub starts: Vec<StartEstimate>,
}

/// Target index of each state: `targets.len()` never appears; states in `D`
/// map to `None`.
fn target_map(walk: &WalkOperator, in_domain: &[bool], targets: &[Vec<usize>]) -> Result<Vec<Option<usize>>> {
    let mut map = vec![None; walk.len()];
    for (i, t) in targets.iter().enumerate() {
        for &v in t {
            let s = walk
                .state_of(v)
                .ok_or_else(|| Error::InvalidParameter(format!("target vertex {v} is not a state")))?;
            if in_domain[s] {
                return Err(Error::InvalidParameter(format!("target vertex {v} lies in D")));
            }
            if map[s].is_some() {
                return Err(Error::InvalidParameter(format!("target vertex {v} is in two targets")));
            }
            map[s] = Some(i);
        }
    }
    if let Some(s) = (0..walk.len()).find(|&s| !in_domain[s] && map[s].is_none()) {
        return Err(Error::InvalidParameter(format!(
            "targets must cover every state outside D; vertex {} is missing",
            walk.states()[s]
        )));
    }
    Ok(map)
}

/// Monte Carlo exit distribution of the subordinated walk.
///
/// `domain`, `targets` and `starts` are graph vertices; the targets must
/// partition the states outside `D`. Killing is reported as an extra last
/// category.
pub fn estimate_harmonic_measure(
    walk: &WalkOperator,
    domain: &[usize],
    targets: &[Vec<usize>],
    starts: &[usize],
    beta: f64,
    plan: &SeedPlan,
    instance: u64,
) -> Result<HarmonicEstimate> {
    let mut in_domain = vec![false; walk.len()];
    for &v in domain {
        let s = walk.state_of(v).ok_or(Error::RimVertex(v))?;
        in_domain[s] = true;
    }
    let map = target_map(walk, &in_domain, targets)?;
    let sampler = StepCountSampler::new(beta)?;
    let engine = if beta == 1.0 { JumpEngine::Stepwise } else { JumpEngine::auto(walk)? };
    let mut out = Vec::with_capacity(starts.len());
    for (i, &x) in starts.iter().enumerate() {
        let sx = walk.state_of(x).ok_or(Error::RimVertex(x))?;
        if !in_domain[sx] {
            return Err(Error::InvalidParameter(format!("start vertex {x} is outside D")));
        }
        let key = (instance << 20) | i as u64;
        let outcomes: Vec<PathOutcome> = (0..plan.paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = plan.rng(key, p);
                simulate_stable_exit(walk, &engine, &sampler, &in_domain, sx, &mut rng)
            })
            .collect();
        out.push(tally(x, &outcomes, &map, targets.len())?);
    }
    Ok(HarmonicEstimate {
        beta,
        targets: targets.len(),
        starts: out,
    })
}

fn tally(start: usize, outcomes: &[PathOutcome], map: &[Option<usize>], ntargets: usize) -> Result<StartEstimate> {
    let mut counts = vec![0u64; ntargets + 1];
    let mut flagged = 0u64;
    let mut sum = 0u128;
    let mut sum2 = 0u128;
    for o in outcomes {
        match *o {
            PathOutcome::Flagged => flagged += 1,
            PathOutcome::Exited { exit, jumps, .. } => {
                let c = match exit {
                    Exit::Killed => ntargets,
                    Exit::State(s) => map[s].unwrap_or(ntargets),
                };
                counts[c] += 1;
                sum += jumps as u128;
                sum2 += (jumps as u128) * (jumps as u128);
            }
        }
    }
    let total = outcomes.len() as u64;
    if flagged as f64 > FLAGGED_FRACTION_CAP * total as f64 {
        return Err(Error::TooManyFlagged { flagged, total });
    }
    let paths = total - flagged;
    let n = paths as f64;
    let mean = sum as f64 / n;
    let var = if paths > 1 { (sum2 as f64 - n * mean * mean) / (n - 1.0) } else { 0.0 };
    Ok(StartEstimate {
        start,
        counts,
        paths,
        flagged,
        mean_jumps: mean,
        jumps_se: (var.max(0.0) / n).sqrt(),
    })
}

/// Mean number of base-walk steps to reach a corner of the `j`-cell at the
/// origin, started at the midpoint of its bottom edge, on the level-`k` graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellExit {
    pub cell_level: u32,
    pub mean_steps: f64,
    pub se: f64,
    pub flagged: u64,
}

pub fn cell_exit_steps(k: u32, j: u32, plan: &SeedPlan, instance: u64) -> Result<CellExit> {
    if j >= k {
        return Err(Error::InvalidParameter(format!("cell level {j} must be below graph level {k}")));
    }
    let g = build_window(&WindowSpec::unit(), k)?;
    let walk = WalkOperator::new(&g, RimPolicy::Reflecting);
    let cell = Cell::new(j as i32, ExactPoint::origin());
    let in_domain: Vec<bool> = walk
        .states()
        .iter()
        .map(|&v| {
            let p = g.vertex(v);
            cell.contains(p) && !cell.vertices.contains(p)
        })
        .collect();
    let start = cell.vertices[0].midpoint(&cell.vertices[1]);
    let sx = walk.state_of(g.require_index(&start)?).ok_or(Error::EmptyDomain)?;
    let outcomes: Vec<PathOutcome> = (0..plan.paths)
        .into_par_iter()
        .map(|p| simulate_walk_exit(&walk, &in_domain, sx, &mut plan.rng(instance, p)))
        .collect();
    let map = vec![None; walk.len()];
    let t = tally(g.require_index(&start)?, &outcomes, &map, 0)?;
    Ok(CellExit {
        cell_level: j,
        mean_steps: t.mean_jumps,
        se: t.jumps_se,
        flagged: t.flagged,
    })
}
