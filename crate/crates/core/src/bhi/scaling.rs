use num_rational::Rational64;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::SCHEMA_VERSION;
use crate::error::Result;
use crate::geometry::{build_window, pow2, Dilate, ExactPoint, GasketGraph, WindowSpec};
use crate::mc::{cell_exit_steps, with_workers, CellExit, SeedPlan};
use crate::stable::{
    exit_time_solve, lambda_functional, lambda_nodes, walk_dim, FractionalOperator, KernelMode, RimPolicy,
};

/// Least-squares line through `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub slope: f64,
    pub target: f64,
    pub tolerance: f64,
    pub within: bool,
}

impl Fit {
    pub fn new(x: Vec<f64>, y: Vec<f64>, target: f64, tolerance: f64) -> Self {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        Self {
            x,
            y,
            slope,
            target,
            tolerance,
            within: (slope - target).abs() <= tolerance,
        }
    }
}

/// Base-walk exit from `j`-cells: `log2 E[steps]` against `log2 2^-j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkFit {
    pub level: u32,
    pub cells: Vec<CellExit>,
    /// Exact means `2 * 5^(k - j - 1)`.
    pub exact: Vec<f64>,
    pub fit: Fit,
}

/// Exit steps from `x0` out of balls of radius `2^-j` against `log2 r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExitFit {
    pub alpha: f64,
    pub level: u32,
    pub fit: Fit,
}

/// `Lambda_{v,r}(f) = 2^(alpha n) Lambda_{2^n v, 2^n r}(f_n)` under the
/// quadrature, for one `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaIdentity {
    pub n: i32,
    pub alpha: f64,
    pub nodes: usize,
    /// Same nodes, distances times `4^n`, weights times `3^n`, in exact
    /// arithmetic.
    pub exact: bool,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub walk: WalkFit,
    pub exit: Vec<ExitFit>,
    pub lambda: Vec<LambdaIdentity>,
    pub passed: bool,
}

pub fn walk_dimension_fit(level: u32, cells: &[u32], paths: u64, seed: u64, tolerance: f64) -> Result<WalkFit> {
    let plan = SeedPlan::new(seed, paths);
    let runs: Vec<CellExit> = with_workers(|| {
        cells
            .iter()
            .map(|&j| cell_exit_steps(level, j, &plan, j as u64))
            .collect::<Result<Vec<_>>>()
    })??;
    let exact = cells.iter().map(|&j| 2.0 * 5f64.powi((level - j - 1) as i32)).collect();
    let x = cells.iter().map(|&j| -(j as f64)).collect();
    let y = runs.iter().map(|c| c.mean_steps.log2()).collect();
    Ok(WalkFit {
        level,
        cells: runs,
        exact,
        fit: Fit::new(x, y, walk_dim(), tolerance),
    })
}

pub fn exit_exponent_fit(
    window: &WindowSpec,
    level: u32,
    x0: &ExactPoint,
    radii: &[u32],
    alpha: f64,
    cap: usize,
    tolerance: f64,
) -> Result<ExitFit> {
    let graph = build_window(window, level)?;
    let op = FractionalOperator::build(&graph, alpha / walk_dim(), RimPolicy::Absorbing, KernelMode::Spectral, cap)?;
    let center = graph.require_index(x0)?;
    let mut y = Vec::new();
    for &j in radii {
        let r2 = pow2(-(j as i32)) * pow2(-(j as i32));
        let domain: Vec<usize> = graph.ball(x0, r2).into_iter().filter(|&v| !graph.is_rim(v)).collect();
        let e = exit_time_solve(&op, &domain)?;
        let i = e.domain.binary_search(&center).expect("centre lies in its ball");
        y.push(e.steps[i].log2());
    }
    let x = radii.iter().map(|&j| -(j as f64)).collect();
    Ok(ExitFit {
        alpha,
        level,
        fit: Fit::new(x, y, alpha, tolerance),
    })
}

pub fn lambda_identity(graph: &GasketGraph, v: &ExactPoint, r2: Rational64, alpha: f64, n: i32) -> Result<LambdaIdentity> {
    let h = graph.dilate(n)?;
    let vn = v.dilate(n);
    let rn = r2 * pow2(n) * pow2(n);
    let a = lambda_nodes(graph, v, r2);
    let b = lambda_nodes(&h, &vn, rn);
    let (d, w) = (pow2(n) * pow2(n), Rational64::from_integer(3).pow(n));
    let exact = a.len() == b.len()
        && a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.vertex == y.vertex && y.dist2 == x.dist2 * d && y.weight == x.weight * w);
    // f(y) = 1 + a^2 at the original point; f_n(y) = f(2^-n y) is the same
    // vector over the dilated vertices.
    let f: Vec<f64> = graph.vertices().iter().map(|p| 1.0 + p.to_f64().0.powi(2)).collect();
    let la = lambda_functional(graph, v, r2, &f, alpha)?;
    let lb = lambda_functional(&h, &vn, rn, &f, alpha)?;
    Ok(LambdaIdentity {
        n,
        alpha,
        nodes: a.len(),
        exact,
        relative_error: (la - (alpha * n as f64).exp2() * lb).abs() / la,
    })
}

/// Walk-dimension fit, exit-time exponent fit per `alpha`, and the Lambda
/// dilation identity.
pub fn run_scaling_suite(config: &ExperimentConfig) -> Result<ScalingReport> {
    config.validate()?;
    let geo = config.resolve()?;
    let sc = &config.scaling;
    let walk = walk_dimension_fit(sc.walk_level, &sc.walk_cells, sc.walk_paths, config.seed, sc.tolerance)?;
    let window: WindowSpec = sc.exit_window.parse()?;
    let exit = config
        .alphas
        .iter()
        .map(|&a| exit_exponent_fit(&window, sc.exit_level, &geo.x0, &sc.exit_radii, a, config.spectral_cap, sc.tolerance))
        .collect::<Result<Vec<_>>>()?;
    let graph = build_window(&window, sc.exit_level)?;
    let mut lambda = Vec::new();
    for &a in &config.alphas {
        for n in 1..=2 {
            lambda.push(lambda_identity(&graph, &geo.x0, Rational64::new(1, 16), a, n)?);
        }
    }
    let passed = walk.fit.within
        && exit.iter().all(|e| e.fit.within)
        && lambda.iter().all(|l| l.exact && l.relative_error < 1e-12);
    Ok(ScalingReport {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        seed: config.seed,
        walk,
        exit,
        lambda,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let f = Fit::new(vec![0.0, 1.0, 2.0], vec![1.0, 3.5, 6.0], 2.5, 1e-12);
        assert!(f.within);
    }

    #[test]
    fn lambda_identity_is_exact() {
        let g = build_window(&WindowSpec::pair(), 3).unwrap();
        for n in [1, 2] {
            let l = lambda_identity(&g, &ExactPoint::origin(), Rational64::new(1, 4), 0.5, n).unwrap();
            assert!(l.exact && l.relative_error < 1e-12, "{l:?}");
            assert!(l.nodes > 0);
        }
    }

    #[test]
    fn exit_exponent_small() {
        let e = exit_exponent_fit(&WindowSpec::pair(), 4, &ExactPoint::origin(), &[1, 2], 0.5, 5000, 0.2).unwrap();
        assert!(e.fit.slope > 0.0);
        assert!(e.fit.within, "{:?}", e.fit);
    }

    #[test]
    fn walk_fit_small() {
        let w = walk_dimension_fit(4, &[1, 2], 4000, 3, 0.1).unwrap();
        assert!(w.fit.within, "{:?}", w.fit);
        for (c, e) in w.cells.iter().zip(&w.exact) {
            assert!((c.mean_steps - e).abs() <= 4.0 * c.se + 1e-9);
        }
    }
}
