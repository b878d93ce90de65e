use faer::Mat;

use super::linalg::SpdSolver;
use super::operator::FractionalOperator;
use crate::error::{Error, Result};

/// Default cap on `|D|` for the dense Green table.
pub const DEFAULT_GREEN_CAP: usize = 3000;

/// A harmonic function on `D` with prescribed values off `D`.
#[derive(Clone, Debug)]
pub struct HarmonicSolution {
    /// Graph vertices of `D`.
    pub domain: Vec<usize>,
    /// Solution on `D`, aligned with `domain`.
    pub values: Vec<f64>,
    /// Solution on every graph vertex: `h` on `D`, the boundary data elsewhere,
    /// the cemetery value on removed rim vertices.
    pub extended: Vec<f64>,
    pub condition: f64,
    /// `max_D |L h| / max |h|`; zero for an exact solve.
    pub certificate: f64,
}

/// Expected number of jumps before leaving `D`.
#[derive(Clone, Debug)]
pub struct ExitTimes {
    pub domain: Vec<usize>,
    pub steps: Vec<f64>,
    pub condition: f64,
}

/// Expected visits `Gmat(x, y)` to `y` before leaving `D`, started at `x`.
#[derive(Clone, Debug)]
pub struct GreenTable {
    pub domain: Vec<usize>,
    pub visits: Mat<f64>,
    pub measure: Vec<f64>,
}

impl GreenTable {
    /// Symmetric kernel `Gmat(x, y) / m(y)` (indices into `domain`).
    pub fn kernel(&self, x: usize, y: usize) -> f64 {
        self.visits[(x, y)] / self.measure[y]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.domain.len();
        (0..n).map(|i| (0..n).map(|j| self.visits[(i, j)]).sum()).collect()
    }

    /// `max |m(x) Gmat(x,y) - m(y) Gmat(y,x)| / max |m(x) Gmat(x,y)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.domain.len();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.measure[i] * self.visits[(i, j)];
                scale = scale.max(a.abs());
                worst = worst.max((a - self.measure[j] * self.visits[(j, i)]).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn min_entry(&self) -> f64 {
        let n = self.domain.len();
        let mut m = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                m = m.min(self.visits[(i, j)]);
            }
        }
        m
    }
}

/// Factorisation of `(L_beta)_DD`, shared by all solves on `D`.
pub struct DomainSolver<'a> {
    op: &'a FractionalOperator,
    domain: Vec<usize>,
    /// State index of each domain vertex.
    dstates: Vec<usize>,
    in_domain: Vec<bool>,
    solver: SpdSolver,
    kill_rate: Vec<f64>,
}

impl<'a> DomainSolver<'a> {
    /// `domain` lists graph vertices; every one must be a state of `op`.
    pub fn new(op: &'a FractionalOperator, domain: &[usize]) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut domain = domain.to_vec();
        domain.sort_unstable();
        domain.dedup();
        let dstates = domain
            .iter()
            .map(|&v| op.state_of(v).ok_or(Error::RimVertex(v)))
            .collect::<Result<Vec<usize>>>()?;
        let mut in_domain = vec![false; op.len()];
        for &s in &dstates {
            in_domain[s] = true;
        }
        let n = dstates.len();
        let l = op.matrix();
        let a = Mat::from_fn(n, n, |i, j| l[(dstates[i], dstates[j])]);
        let m: Vec<f64> = dstates.iter().map(|&s| op.measure()[s]).collect();
        let solver = SpdSolver::new(a, &m)?;
        let kill_rate = dstates
            .iter()
            .map(|&s| (0..op.len()).map(|t| l[(s, t)]).sum::<f64>().max(0.0))
            .collect();
        Ok(Self {
            op,
            domain,
            dstates,
            in_domain,
            solver,
            kill_rate,
        })
    }

    pub fn domain(&self) -> &[usize] {
        &self.domain
    }

    pub fn condition(&self) -> f64 {
        self.solver.condition_estimate()
    }

    /// Right-hand side `-L_{D,C} g + kappa g_cemetery` for boundary data on
    /// graph vertices.
    fn rhs(&self, g: &[f64], cemetery: f64) -> Vec<f64> {
        let l = self.op.matrix();
        let states = self.op.states();
        self.dstates
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let mut r = self.kill_rate[i] * cemetery;
                for (t, &v) in states.iter().enumerate() {
                    if !self.in_domain[t] && g[v] != 0.0 {
                        r -= l[(s, t)] * g[v];
                    }
                }
                r
            })
            .collect()
    }

    /// Solves `(L h)(x) = 0` on `D` with `h = g` off `D` and `h = cemetery`
    /// after killing.
    pub fn harmonic(&self, g: &[f64], cemetery: f64) -> Result<HarmonicSolution> {
        let graph_len = self.op.graph_len();
        if g.len() != graph_len {
            return Err(Error::LengthMismatch {
                expected: graph_len,
                found: g.len(),
            });
        }
        let b = self.rhs(g, cemetery);
        let values = self.solver.solve_vec(&b);
        let mut extended = vec![cemetery; graph_len];
        for (t, &v) in self.op.states().iter().enumerate() {
            if !self.in_domain[t] {
                extended[v] = g[v];
            }
        }
        for (i, &v) in self.domain.iter().enumerate() {
            extended[v] = values[i];
        }
        let certificate = self.certificate(&values, &b);
        Ok(HarmonicSolution {
            domain: self.domain.clone(),
            values,
            extended,
            condition: self.condition(),
            certificate,
        })
    }

    fn certificate(&self, values: &[f64], b: &[f64]) -> f64 {
        let l = self.op.matrix();
        let n = self.dstates.len();
        let scale = values.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut r = -b[i];
            for j in 0..n {
                r += l[(self.dstates[i], self.dstates[j])] * values[j];
            }
            worst = worst.max(r.abs());
        }
        worst / scale
    }

    /// Probability of exiting into each target set (graph vertices outside
    /// `D`), one vector over `D` per target.
    pub fn harmonic_measure(&self, targets: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        let n = self.op.graph_len();
        targets
            .iter()
            .map(|t| {
                let mut g = vec![0.0; n];
                for &v in t {
                    g[v] = 1.0;
                }
                Ok(self.harmonic(&g, 0.0)?.values)
            })
            .collect()
    }

    /// Exit distribution from each `x` in `D` over every state outside `D`,
    /// as a `|D| x |C|` matrix, together with the killed mass.
    pub fn exit_distribution(&self) -> (Vec<usize>, Mat<f64>, Vec<f64>) {
        let l = self.op.matrix();
        let outside: Vec<usize> = (0..self.op.len()).filter(|&t| !self.in_domain[t]).collect();
        let n = self.dstates.len();
        let b = Mat::from_fn(n, outside.len(), |i, j| -l[(self.dstates[i], outside[j])]);
        let h = self.solver.solve(b.as_ref());
        let killed = self.solver.solve_vec(&self.kill_rate);
        let vertices = outside.iter().map(|&t| self.op.states()[t]).collect();
        (vertices, h, killed)
    }

    pub fn exit_times(&self) -> ExitTimes {
        let ones = vec![1.0; self.dstates.len()];
        ExitTimes {
            domain: self.domain.clone(),
            steps: self.solver.solve_vec(&ones),
            condition: self.condition(),
        }
    }

    pub fn green(&self, cap: usize) -> Result<GreenTable> {
        let n = self.dstates.len();
        if n > cap {
            return Err(Error::CapExceeded {
                what: "Green table",
                states: n,
                cap,
            });
        }
        let visits = self.solver.solve(Mat::<f64>::identity(n, n).as_ref());
        let measure = self.dstates.iter().map(|&s| self.op.measure()[s]).collect();
        Ok(GreenTable {
            domain: self.domain.clone(),
            visits,
            measure,
        })
    }
}

/// Solves for the regular harmonic extension of `g` (given on all graph
/// vertices; values on `D` are ignored) with killed paths scoring zero.
pub fn harmonic_solve(op: &FractionalOperator, domain: &[usize], g: &[f64]) -> Result<HarmonicSolution> {
    DomainSolver::new(op, domain)?.harmonic(g, 0.0)
}

pub fn exit_time_solve(op: &FractionalOperator, domain: &[usize]) -> Result<ExitTimes> {
    Ok(DomainSolver::new(op, domain)?.exit_times())
}

pub fn green_table(op: &FractionalOperator, domain: &[usize]) -> Result<GreenTable> {
    DomainSolver::new(op, domain)?.green(DEFAULT_GREEN_CAP)
}
