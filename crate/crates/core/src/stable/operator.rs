use faer::{Mat, MatRef, Side};

use super::weights::{SubordinationWeights, TailPolicy};
use crate::error::{Error, Result};
use crate::geometry::GasketGraph;

/// Default cap on the number of states for dense spectral construction.
pub const DEFAULT_SPECTRAL_CAP: usize = 5000;

/// Treatment of the window rim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RimPolicy {
    /// Rim vertices are not states; stepping onto them kills the walk.
    #[default]
    Absorbing,
    /// Rim vertices are ordinary states, so the walk is conservative.
    Reflecting,
}

/// How `L_beta` is built.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelMode {
    Spectral,
    Series { terms: usize, tail: TailPolicy },
}

/// The nearest-neighbour walk on a window, killed on the rim or not.
#[derive(Clone, Debug)]
pub struct WalkOperator {
    rim: RimPolicy,
    level: u32,
    /// Graph vertex of each state.
    states: Vec<usize>,
    /// State of each graph vertex, if any.
    state_of: Vec<Option<usize>>,
    /// Neighbouring states of each state.
    neighbors: Vec<Vec<usize>>,
    /// Graph degree of each state; each neighbour has probability `1/deg`.
    degree: Vec<f64>,
    measure: Vec<f64>,
}

impl WalkOperator {
    pub fn new(graph: &GasketGraph, rim: RimPolicy) -> Self {
        let keep = |i: usize| rim == RimPolicy::Reflecting || !graph.is_rim(i);
        let states: Vec<usize> = (0..graph.len()).filter(|&i| keep(i)).collect();
        let mut state_of = vec![None; graph.len()];
        for (s, &v) in states.iter().enumerate() {
            state_of[v] = Some(s);
        }
        let neighbors = states
            .iter()
            .map(|&v| graph.neighbors(v).iter().filter_map(|&w| state_of[w]).collect())
            .collect();
        let degree = states.iter().map(|&v| graph.degree(v) as f64).collect();
        let w = graph.weights_f64();
        let measure = states.iter().map(|&v| w[v]).collect();
        Self {
            rim,
            level: graph.level(),
            states,
            state_of,
            neighbors,
            degree,
            measure,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn rim_policy(&self) -> RimPolicy {
        self.rim
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn state_of(&self, vertex: usize) -> Option<usize> {
        self.state_of[vertex]
    }

    /// Number of vertices of the underlying graph.
    pub fn graph_len(&self) -> usize {
        self.state_of.len()
    }

    pub fn neighbors(&self, s: usize) -> &[usize] {
        &self.neighbors[s]
    }

    pub fn degree(&self, s: usize) -> f64 {
        self.degree[s]
    }

    /// Vertex measure of each state, proportional to its graph degree.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Probability of being killed in one step from `s`.
    pub fn kill_probability(&self, s: usize) -> f64 {
        1.0 - self.neighbors[s].len() as f64 / self.degree[s]
    }

    /// `(P f)(x)` for `f` given on states.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|s| self.neighbors[s].iter().map(|&t| f[t]).sum::<f64>() / self.degree[s])
            .collect()
    }

    pub fn dense(&self) -> Mat<f64> {
        let n = self.len();
        let mut p = Mat::zeros(n, n);
        for s in 0..n {
            for &t in &self.neighbors[s] {
                p[(s, t)] += 1.0 / self.degree[s];
            }
        }
        p
    }

    /// `I - P`, assembled without rounding.
    pub fn generator(&self) -> Mat<f64> {
        let n = self.len();
        let mut l = Mat::zeros(n, n);
        for s in 0..n {
            l[(s, s)] = 1.0;
            for &t in &self.neighbors[s] {
                l[(s, t)] -= 1.0 / self.degree[s];
            }
        }
        l
    }

    /// `D^(1/2) P D^(-1/2)` with `D` the vertex measure; symmetric.
    pub fn symmetrized(&self) -> Mat<f64> {
        let n = self.len();
        let mut s = Mat::zeros(n, n);
        for x in 0..n {
            for &y in &self.neighbors[x] {
                s[(x, y)] += (self.measure[x] / self.measure[y]).sqrt() / self.degree[x];
            }
        }
        s
    }
}

/// Eigen-decomposition of the symmetrised walk, reusable across `beta`.
#[derive(Clone, Debug)]
pub struct SpectralWalk {
    walk: WalkOperator,
    /// Eigenvalues of `P`, nondecreasing.
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
}

impl SpectralWalk {
    pub fn new(walk: WalkOperator, cap: usize) -> Result<Self> {
        let n = walk.len();
        if n > cap {
            return Err(Error::CapExceeded {
                what: "spectral",
                states: n,
                cap,
            });
        }
        if n == 0 {
            return Err(Error::EmptyDomain);
        }
        let s = walk.symmetrized();
        let evd = s.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenFailure)?;
        let col = evd.S().column_vector();
        let eigenvalues = (0..n).map(|i| col[i]).collect();
        Ok(Self {
            walk,
            eigenvalues,
            eigenvectors: evd.U().to_owned(),
        })
    }

    pub fn from_graph(graph: &GasketGraph, rim: RimPolicy, cap: usize) -> Result<Self> {
        Self::new(WalkOperator::new(graph, rim), cap)
    }

    pub fn walk(&self) -> &WalkOperator {
        &self.walk
    }

    /// Eigenvalues of `P` in nondecreasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Spectrum of `I - P` as `(min, max)`.
    pub fn generator_spectrum(&self) -> (f64, f64) {
        let n = self.eigenvalues.len();
        (1.0 - self.eigenvalues[n - 1], 1.0 - self.eigenvalues[0])
    }
}

/// The fractional generator `L_beta = (I - P)^beta` on the states of a walk.
///
/// `L_beta` is symmetric with respect to the vertex measure, has nonpositive
/// off-diagonal entries, and `I - L_beta` is the one-jump kernel of the
/// subordinated walk.
#[derive(Clone, Debug)]
pub struct FractionalOperator {
    beta: f64,
    mode: KernelMode,
    walk: WalkOperator,
    matrix: Mat<f64>,
}

impl FractionalOperator {
    /// Dense spectral construction `D^(-1/2) U (1 - Lambda)^beta U^T D^(1/2)`.
    pub fn spectral(spec: &SpectralWalk, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let walk = spec.walk.clone();
        if beta == 1.0 {
            let matrix = walk.generator();
            return Ok(Self {
                beta,
                mode: KernelMode::Spectral,
                walk,
                matrix,
            });
        }
        let n = walk.len();
        let u = &spec.eigenvectors;
        let scale: Vec<f64> = spec
            .eigenvalues
            .iter()
            .map(|l| (1.0 - l).max(0.0).powf(beta / 2.0))
            .collect();
        let a = Mat::from_fn(n, n, |i, j| u[(i, j)] * scale[j]);
        let sym = &a * a.transpose();
        let root: Vec<f64> = walk.measure.iter().map(|m| m.sqrt()).collect();
        let matrix = Mat::from_fn(n, n, |i, j| sym[(i, j)] * root[j] / root[i]);
        Ok(Self {
            beta,
            mode: KernelMode::Spectral,
            walk,
            matrix,
        })
    }

    /// Truncated series `I - sum_{m <= M} c_m P^m` with the tail handled by
    /// `tail`.
    pub fn series(walk: &WalkOperator, beta: f64, terms: usize, tail: TailPolicy) -> Result<Self> {
        check_beta(beta)?;
        let walk = walk.clone();
        let mode = KernelMode::Series { terms, tail };
        if beta == 1.0 {
            let matrix = walk.generator();
            return Ok(Self {
                beta,
                mode,
                walk,
                matrix,
            });
        }
        let weights = SubordinationWeights::new(beta, terms)?.with_tail(tail);
        let n = walk.len();
        // Row-major dense powers: q holds P^m.
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        let mut next = vec![0.0; n * n];
        let mut acc = vec![0.0; n * n];
        for &c in &weights {
            for x in 0..n {
                let row = &mut next[x * n..(x + 1) * n];
                row.fill(0.0);
                let p = 1.0 / walk.degree[x];
                for &y in &walk.neighbors[x] {
                    let src = &q[y * n..(y + 1) * n];
                    for (r, s) in row.iter_mut().zip(src) {
                        *r += p * s;
                    }
                }
            }
            std::mem::swap(&mut q, &mut next);
            for (a, x) in acc.iter_mut().zip(&q) {
                *a += c * x;
            }
        }
        let matrix = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - acc[i * n + j]
        });
        Ok(Self {
            beta,
            mode,
            walk,
            matrix,
        })
    }

    /// Builds the walk and the operator in one step.
    pub fn build(graph: &GasketGraph, beta: f64, rim: RimPolicy, mode: KernelMode, cap: usize) -> Result<Self> {
        match mode {
            KernelMode::Spectral => Self::spectral(&SpectralWalk::from_graph(graph, rim, cap)?, beta),
            KernelMode::Series { terms, tail } => {
                let walk = WalkOperator::new(graph, rim);
                if walk.len() > cap {
                    return Err(Error::CapExceeded {
                        what: "dense series",
                        states: walk.len(),
                        cap,
                    });
                }
                Self::series(&walk, beta, terms, tail)
            }
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn walk(&self) -> &WalkOperator {
        &self.walk
    }

    pub fn len(&self) -> usize {
        self.walk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walk.is_empty()
    }

    pub fn level(&self) -> u32 {
        self.walk.level
    }

    pub fn states(&self) -> &[usize] {
        &self.walk.states
    }

    pub fn state_of(&self, vertex: usize) -> Option<usize> {
        self.walk.state_of[vertex]
    }

    pub fn graph_len(&self) -> usize {
        self.walk.state_of.len()
    }

    pub fn measure(&self) -> &[f64] {
        &self.walk.measure
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    /// `(L f)(x)` for `f` given on states.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * f[j]).sum())
            .collect()
    }

    /// Row sums of `L`: the killing rate of each state.
    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)]).sum()).collect()
    }

    /// `max |m(x) L(x,y) - m(y) L(y,x)| / max |m(x) L(x,y)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.len();
        let m = self.measure();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = m[i] * self.matrix[(i, j)];
                scale = scale.max(a.abs());
                worst = worst.max((a - m[j] * self.matrix[(j, i)]).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Largest off-diagonal entry; should be `<= 0` up to rounding.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.len();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.matrix[(i, j)]);
                }
            }
        }
        worst
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must lie in (0, 1]")));
    }
    Ok(())
}
