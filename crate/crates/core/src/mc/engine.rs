use faer::Mat;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::sampler::StepCountSampler;
use crate::error::{Error, Result};
use crate::stable::WalkOperator;

/// Largest chain for which dyadic powers of `P` are tabulated.
pub const DYADIC_STATE_CAP: usize = 1000;
/// Base steps allowed per path.
pub const STEP_CAP: u64 = 100_000_000;
/// Jumps allowed per path.
pub const JUMP_CAP: u64 = 1_000_000;

/// Where a path left `D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exit {
    /// Landed on this state of the walk (outside `D`).
    State(usize),
    /// Killed by stepping onto the absorbing rim.
    Killed,
}

/// Outcome of one simulated path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOutcome {
    Exited { exit: Exit, jumps: u64, steps: u64 },
    /// A step or jump cap was hit.
    Flagged,
}

/// One step of the nearest-neighbour walk from state `s`.
pub fn walk_step<R: Rng + ?Sized>(walk: &WalkOperator, s: usize, rng: &mut R) -> Option<usize> {
    let deg = walk.degree(s) as usize;
    let i = rng.random_range(0..deg);
    walk.neighbors(s).get(i).copied()
}

/// Plain walk from `x` until it leaves `D` (`in_domain` is indexed by state).
pub fn simulate_walk_exit<R: Rng + ?Sized>(walk: &WalkOperator, in_domain: &[bool], x: usize, rng: &mut R) -> PathOutcome {
    let mut s = x;
    let mut steps = 0u64;
    while steps < STEP_CAP {
        steps += 1;
        match walk_step(walk, s, rng) {
            None => {
                return PathOutcome::Exited {
                    exit: Exit::Killed,
                    jumps: steps,
                    steps,
                }
            }
            Some(t) if !in_domain[t] => {
                return PathOutcome::Exited {
                    exit: Exit::State(t),
                    jumps: steps,
                    steps,
                }
            }
            Some(t) => s = t,
        }
    }
    PathOutcome::Flagged
}

/// Alias tables of `P^(2^j)` with a final cemetery outcome per row.
#[derive(Clone, Debug)]
pub struct DyadicPowers {
    n: usize,
    /// `tables[j][s]`: targets (with `n` meaning killed) and sampler.
    tables: Vec<Vec<(Vec<usize>, WeightedAliasIndex<f64>)>>,
}

const NEGLIGIBLE: f64 = 1e-15;

impl DyadicPowers {
    pub fn new(walk: &WalkOperator) -> Result<Self> {
        let n = walk.len();
        if n > DYADIC_STATE_CAP {
            return Err(Error::CapExceeded {
                what: "dyadic powers",
                states: n,
                cap: DYADIC_STATE_CAP,
            });
        }
        let mut p = walk.dense();
        let mut tables = Vec::new();
        for _ in 0..63 {
            tables.push(Self::tabulate(&p)?);
            let next = &p * &p;
            let mass = (0..n).map(|i| (0..n).map(|j| next[(i, j)]).sum::<f64>()).fold(0.0, f64::max);
            let mut change = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    change = change.max((next[(i, j)] - p[(i, j)]).abs());
                }
            }
            p = next;
            if mass < NEGLIGIBLE || change < NEGLIGIBLE {
                tables.push(Self::tabulate(&p)?);
                break;
            }
        }
        Ok(Self { n, tables })
    }

    fn tabulate(p: &Mat<f64>) -> Result<Vec<(Vec<usize>, WeightedAliasIndex<f64>)>> {
        let n = p.nrows();
        (0..n)
            .map(|i| {
                let mut targets = Vec::new();
                let mut weights = Vec::new();
                let mut sum = 0.0;
                for j in 0..n {
                    let w = p[(i, j)];
                    if w > 0.0 {
                        targets.push(j);
                        weights.push(w);
                        sum += w;
                    }
                }
                let killed = 1.0 - sum;
                if killed > 0.0 {
                    targets.push(n);
                    weights.push(killed);
                }
                let alias = WeightedAliasIndex::new(weights)
                    .map_err(|e| Error::InvalidParameter(format!("alias table: {e}")))?;
                Ok((targets, alias))
            })
            .collect()
    }

    pub fn levels(&self) -> usize {
        self.tables.len()
    }

    /// Position after `m` steps from `s`, or `None` if killed.
    pub fn advance<R: Rng + ?Sized>(&self, s: usize, m: u64, rng: &mut R) -> Option<usize> {
        let top = self.tables.len() - 1;
        let mut cur = s;
        for bit in 0..64 {
            if m >> bit == 0 {
                break;
            }
            if (m >> bit) & 1 == 1 {
                let (targets, alias) = &self.tables[bit.min(top)][cur];
                let t = targets[alias.sample(rng)];
                if t == self.n {
                    return None;
                }
                cur = t;
            }
        }
        Some(cur)
    }
}

/// How the base walk is advanced inside a jump.
#[derive(Clone, Debug)]
pub enum JumpEngine {
    Stepwise,
    Dyadic(DyadicPowers),
}

impl JumpEngine {
    /// Dyadic tables when the chain is small enough, stepping otherwise.
    pub fn auto(walk: &WalkOperator) -> Result<Self> {
        if walk.len() <= DYADIC_STATE_CAP {
            Ok(JumpEngine::Dyadic(DyadicPowers::new(walk)?))
        } else {
            Ok(JumpEngine::Stepwise)
        }
    }
}

/// Subordinated walk from `x`: each jump runs the base walk for a sampled
/// number of steps; the exit is the first landing site outside `D`.
pub fn simulate_stable_exit<R: Rng + ?Sized>(
    walk: &WalkOperator,
    engine: &JumpEngine,
    sampler: &StepCountSampler,
    in_domain: &[bool],
    x: usize,
    rng: &mut R,
) -> PathOutcome {
    let mut s = x;
    let mut steps = 0u64;
    for jumps in 1..=JUMP_CAP {
        let m = sampler.sample(rng);
        let landed = match engine {
            JumpEngine::Dyadic(d) => {
                steps = steps.saturating_add(m);
                d.advance(s, m, rng)
            }
            JumpEngine::Stepwise => {
                let mut cur = Some(s);
                for _ in 0..m {
                    if steps >= STEP_CAP {
                        return PathOutcome::Flagged;
                    }
                    steps += 1;
                    cur = walk_step(walk, cur.unwrap_or(s), rng);
                    if cur.is_none() {
                        break;
                    }
                }
                cur
            }
        };
        match landed {
            None => {
                return PathOutcome::Exited {
                    exit: Exit::Killed,
                    jumps,
                    steps,
                }
            }
            Some(t) if !in_domain[t] => {
                return PathOutcome::Exited {
                    exit: Exit::State(t),
                    jumps,
                    steps,
                }
            }
            Some(t) => s = t,
        }
    }
    PathOutcome::Flagged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_window, ExactPoint, WindowSpec};
    use crate::mc::SeedPlan;
    use crate::stable::RimPolicy;

    fn setup(rim: RimPolicy) -> (crate::geometry::GasketGraph, WalkOperator) {
        let g = build_window(&WindowSpec::pair(), 3).unwrap();
        let w = WalkOperator::new(&g, rim);
        (g, w)
    }

    #[test]
    fn single_vertex_domain_exits_in_one_step() {
        let (g, w) = setup(RimPolicy::Absorbing);
        let x = w.state_of(g.require_index(&ExactPoint::origin()).unwrap()).unwrap();
        let mut d = vec![false; w.len()];
        d[x] = true;
        let plan = SeedPlan::new(1, 100);
        let mut seen = std::collections::BTreeSet::new();
        for p in 0..100 {
            match simulate_walk_exit(&w, &d, x, &mut plan.rng(0, p)) {
                PathOutcome::Exited { exit: Exit::State(t), steps, .. } => {
                    assert_eq!(steps, 1);
                    assert!(w.neighbors(x).contains(&t));
                    seen.insert(t);
                }
                o => panic!("{o:?}"),
            }
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn beta_one_matches_the_walk_step_for_step() {
        let (g, w) = setup(RimPolicy::Absorbing);
        let o = w.state_of(g.require_index(&ExactPoint::origin()).unwrap()).unwrap();
        let d: Vec<bool> = (0..w.len())
            .map(|s| g.vertex(w.states()[s]).dist2(&ExactPoint::origin()) < num_rational::Rational64::new(1, 4))
            .collect();
        let sampler = StepCountSampler::new(1.0).unwrap();
        let plan = SeedPlan::new(3, 200);
        for p in 0..200 {
            let a = simulate_walk_exit(&w, &d, o, &mut plan.rng(0, p));
            let b = simulate_stable_exit(&w, &JumpEngine::Stepwise, &sampler, &d, o, &mut plan.rng(0, p));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dyadic_powers_reproduce_the_matrix_power() {
        let (_, w) = setup(RimPolicy::Absorbing);
        let d = DyadicPowers::new(&w).unwrap();
        assert!(d.levels() > 3);
        // Empirical distribution of P^5 from one state against the dense power.
        let p = w.dense();
        let p5 = &(&(&p * &p) * &(&p * &p)) * &p;
        let plan = SeedPlan::new(8, 1);
        let mut r = plan.rng(0, 0);
        let n = 100_000;
        let mut counts = vec![0u64; w.len() + 1];
        for _ in 0..n {
            match d.advance(0, 5, &mut r) {
                Some(t) => counts[t] += 1,
                None => counts[w.len()] += 1,
            }
        }
        for t in 0..w.len() {
            let want = p5[(0, t)];
            let sd = (want * (1.0 - want) / n as f64).sqrt();
            assert!((counts[t] as f64 / n as f64 - want).abs() <= 4.0 * sd + 1e-4, "state {t}");
        }
    }

    #[test]
    fn reflecting_powers_converge() {
        let (_, w) = setup(RimPolicy::Reflecting);
        let d = DyadicPowers::new(&w).unwrap();
        let mut r = SeedPlan::new(1, 1).rng(0, 0);
        assert!(d.advance(0, u64::MAX >> 2, &mut r).is_some());
    }
}
