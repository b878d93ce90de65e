use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Direct solver for `A x = b` where `A` is symmetric positive definite with
/// respect to a diagonal measure `m`, i.e. `m(x) A(x,y) = m(y) A(y,x)`.
///
/// Factorises `M^(1/2) A M^(-1/2)` by Cholesky and polishes solutions with
/// iterative refinement against the original `A`.
pub struct SpdSolver {
    a: Mat<f64>,
    root: Vec<f64>,
    llt: faer::linalg::solvers::Llt<f64>,
    sym: Mat<f64>,
}

const REFINEMENT_STEPS: usize = 2;

impl SpdSolver {
    pub fn new(a: Mat<f64>, measure: &[f64]) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::EmptyDomain);
        }
        let root: Vec<f64> = measure.iter().map(|m| m.sqrt()).collect();
        let mut sym = Mat::from_fn(n, n, |i, j| a[(i, j)] * root[i] / root[j]);
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (sym[(i, j)] + sym[(j, i)]);
                sym[(i, j)] = v;
                sym[(j, i)] = v;
            }
        }
        let llt = sym.llt(Side::Lower).map_err(|_| Error::SingularSystem)?;
        Ok(Self { a, root, llt, sym })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn solve_once(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        let n = self.dim();
        let scaled = Mat::from_fn(n, b.ncols(), |i, j| b[(i, j)] * self.root[i]);
        let y = self.llt.solve(&scaled);
        Mat::from_fn(n, b.ncols(), |i, j| y[(i, j)] / self.root[i])
    }

    /// Solves for every column of `b`.
    pub fn solve(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        let mut x = self.solve_once(b);
        for _ in 0..REFINEMENT_STEPS {
            let ax = &self.a * &x;
            let r = Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] - ax[(i, j)]);
            let dx = self.solve_once(r.as_ref());
            x = &x + &dx;
        }
        x
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let m = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.solve(m.as_ref());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Estimate of the 2-norm condition number of the symmetrised matrix by
    /// power and inverse-power iteration.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        let iters = 40;
        let start = || Mat::from_fn(n, 1, |i, _| 1.0 + (i % 7) as f64 * 0.1);
        let normalize = |v: &mut Mat<f64>| {
            let s = v.norm_l2();
            if s > 0.0 {
                for i in 0..n {
                    v[(i, 0)] /= s;
                }
            }
            s
        };
        let mut v = start();
        normalize(&mut v);
        let mut hi = 0.0;
        for _ in 0..iters {
            let mut w = &self.sym * &v;
            hi = normalize(&mut w);
            v = w;
        }
        let mut v = start();
        normalize(&mut v);
        let mut inv = 0.0;
        for _ in 0..iters {
            let mut w = self.llt.solve(&v);
            inv = normalize(&mut w);
            v = w;
        }
        if inv == 0.0 {
            f64::INFINITY
        } else {
            hi * inv
        }
    }
}
