//! Empirical constants of the escape, upper and factorization estimates.
//!
//! Times are in continuum units: one jump of the level-`k` chain lasts
//! `2^(-k alpha)`. With this convention every reported constant is invariant
//! under the joint dilation `(m, k) -> (m + 1, k + 1)`.

use num_rational::Rational64;

use super::lambda::{lambda_nodes, lambda_sum};
use super::operator::FractionalOperator;
use super::params::walk_dim;
use super::solve::DomainSolver;
use crate::error::{Error, Result};
use crate::geometry::{pow2, ExactPoint, GasketGraph};

/// Centre `v` and scale `m` of the balls `B(v, p 2^-m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaScale {
    pub v: ExactPoint,
    pub m: i32,
}

impl LemmaScale {
    pub fn new(v: ExactPoint, m: i32) -> Self {
        Self { v, m }
    }

    /// `(p 2^-m)^2` for `p^2 = p_sq`.
    pub fn radius2(&self, p_sq: Rational64) -> Rational64 {
        p_sq * pow2(-self.m) * pow2(-self.m)
    }

    pub fn inside(&self, graph: &GasketGraph, vertex: usize, p_sq: Rational64) -> bool {
        graph.vertex(vertex).dist2(&self.v) < self.radius2(p_sq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeEstimate {
    /// `max_x P^x(X(tau_D) outside B(v, p2 2^-m)) / (2^(alpha m) E^x tau_D)`.
    pub c4: f64,
    pub max_probability: f64,
    pub points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpperEstimate {
    /// `max_x f(x) / (2^(-alpha m) Lambda_{v, p3 2^-m}(f))`.
    pub c7: f64,
    pub lambda: f64,
    pub points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorizationEstimate {
    /// `max_x f(x) / (Lambda_{v, p1 2^-m}(f) E^x tau_D)` over all functions.
    pub c8: f64,
    /// The matching minimum.
    pub c8_prime: f64,
    pub points: usize,
}

/// A domain `D` cut down to `B(v, p_outer 2^-m)` with its exit times solved.
pub struct LemmaDomain<'a> {
    op: &'a FractionalOperator,
    graph: &'a GasketGraph,
    scale: LemmaScale,
    outer_sq: Rational64,
    alpha: f64,
    solver: DomainSolver<'a>,
    /// `E^x tau_D` in continuum time, indexed like `solver.domain()`.
    exit: Vec<f64>,
    in_domain: Vec<bool>,
}

impl<'a> LemmaDomain<'a> {
    /// Keeps the vertices of `domain` that are states of `op` and lie in the
    /// open ball of radius `sqrt(outer_sq) 2^-m`.
    pub fn new(
        op: &'a FractionalOperator,
        graph: &'a GasketGraph,
        domain: &[usize],
        scale: LemmaScale,
        outer_sq: Rational64,
    ) -> Result<Self> {
        if graph.len() != op.graph_len() || graph.level() != op.level() {
            return Err(Error::LevelMismatch {
                expected: op.level(),
                found: graph.level(),
            });
        }
        let kept: Vec<usize> = domain
            .iter()
            .copied()
            .filter(|&x| op.state_of(x).is_some() && scale.inside(graph, x, outer_sq))
            .collect();
        let solver = DomainSolver::new(op, &kept)?;
        let alpha = op.beta() * walk_dim();
        let tau = (-(op.level() as f64) * alpha).exp2();
        let exit = solver.exit_times().steps.iter().map(|s| s * tau).collect();
        let mut in_domain = vec![false; graph.len()];
        for &x in solver.domain() {
            in_domain[x] = true;
        }
        Ok(Self {
            op,
            graph,
            scale,
            outer_sq,
            alpha,
            solver,
            exit,
            in_domain,
        })
    }

    pub fn domain(&self) -> &[usize] {
        self.solver.domain()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `E^x tau_D` in continuum time, aligned with `domain()`.
    pub fn exit_times(&self) -> &[f64] {
        &self.exit
    }

    pub fn condition(&self) -> f64 {
        self.solver.condition()
    }

    /// Positions in `domain()` of the vertices in `B(v, p 2^-m)`.
    fn points_within(&self, p_sq: Rational64) -> Vec<usize> {
        self.domain()
            .iter()
            .enumerate()
            .filter(|(_, &x)| self.scale.inside(self.graph, x, p_sq))
            .map(|(i, _)| i)
            .collect()
    }

    /// Harmonic measure of `targets` from `D`, extended by the indicator of
    /// the targets off `D`. Targets must avoid the outer ball.
    pub fn harmonic_measure(&self, targets: &[usize]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.graph.len()];
        for &t in targets {
            if self.scale.inside(self.graph, t, self.outer_sq) {
                return Err(Error::InvalidParameter(format!(
                    "target vertex {} lies inside the outer ball",
                    self.graph.vertex(t)
                )));
            }
            g[t] = 1.0;
        }
        Ok(self.solver.harmonic(&g, 0.0)?.extended)
    }

    /// Escape estimate with `p2` the outer radius.
    pub fn escape(&self, p1_sq: Rational64) -> Result<EscapeEstimate> {
        let points = self.points_within(p1_sq);
        if points.is_empty() {
            return Err(Error::EmptyDomain);
        }
        // Leaving the ball or being killed both count as escaping.
        let g: Vec<f64> = (0..self.graph.len())
            .map(|y| if self.scale.inside(self.graph, y, self.outer_sq) { 0.0 } else { 1.0 })
            .collect();
        let h = self.solver.harmonic(&g, 1.0)?;
        let norm = (self.alpha * self.scale.m as f64).exp2();
        let mut c4 = 0.0f64;
        let mut max_probability = 0.0f64;
        for &i in &points {
            let p = h.values[i].clamp(0.0, 1.0);
            max_probability = max_probability.max(p);
            c4 = c4.max(p / (norm * self.exit[i]));
        }
        Ok(EscapeEstimate {
            c4,
            max_probability,
            points: points.len(),
        })
    }

    /// `Lambda_{v, p 2^-m}(f)` for `f` on every graph vertex.
    pub fn lambda(&self, f: &[f64], p_sq: Rational64) -> f64 {
        let nodes = lambda_nodes(self.graph, &self.scale.v, self.scale.radius2(p_sq));
        lambda_sum(&nodes, f, self.alpha)
    }

    /// Upper estimate for `f` (extended to all graph vertices, vanishing on
    /// the outer ball outside `D`).
    pub fn upper(&self, f: &[f64], p3_sq: Rational64) -> Result<UpperEstimate> {
        if p3_sq >= self.outer_sq {
            return Err(Error::InvalidParameter(format!(
                "p3^2 = {p3_sq} must be below the outer radius {}",
                self.outer_sq
            )));
        }
        self.check_vanishing(f)?;
        let points = self.points_within(p3_sq);
        if points.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let lambda = self.lambda(f, p3_sq);
        if !(lambda > 0.0) {
            return Err(Error::Degenerate("Lambda vanishes".into()));
        }
        let norm = (-self.alpha * self.scale.m as f64).exp2() * lambda;
        let c7 = points
            .iter()
            .map(|&i| f[self.domain()[i]] / norm)
            .fold(0.0f64, f64::max);
        Ok(UpperEstimate {
            c7,
            lambda,
            points: points.len(),
        })
    }

    /// Factorization constants, jointly over several functions.
    pub fn factorization(&self, fs: &[&[f64]], p1_sq: Rational64) -> Result<FactorizationEstimate> {
        let points = self.points_within(p1_sq);
        if points.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut c8 = 0.0f64;
        let mut c8_prime = f64::INFINITY;
        for f in fs {
            self.check_vanishing(f)?;
            let lambda = self.lambda(f, p1_sq);
            if !(lambda > 0.0) {
                return Err(Error::Degenerate("Lambda vanishes".into()));
            }
            for &i in &points {
                let q = f[self.domain()[i]] / (lambda * self.exit[i]);
                c8 = c8.max(q);
                c8_prime = c8_prime.min(q);
            }
        }
        Ok(FactorizationEstimate {
            c8,
            c8_prime,
            points: points.len(),
        })
    }

    fn check_vanishing(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.graph.len() {
            return Err(Error::LengthMismatch {
                expected: self.graph.len(),
                found: f.len(),
            });
        }
        for y in 0..f.len() {
            if !self.in_domain[y] && f[y] != 0.0 && self.scale.inside(self.graph, y, self.outer_sq) {
                return Err(Error::InvalidParameter(format!(
                    "f must vanish off D inside the outer ball, but f({}) = {}",
                    self.graph.vertex(y),
                    f[y]
                )));
            }
        }
        Ok(())
    }

    pub fn operator(&self) -> &FractionalOperator {
        self.op
    }
}

pub fn escape_check(
    op: &FractionalOperator,
    graph: &GasketGraph,
    domain: &[usize],
    scale: LemmaScale,
    p1_sq: Rational64,
    p2_sq: Rational64,
) -> Result<EscapeEstimate> {
    LemmaDomain::new(op, graph, domain, scale, p2_sq)?.escape(p1_sq)
}

/// Upper estimate for the harmonic measure of `targets` from `D`.
pub fn upper_check(
    op: &FractionalOperator,
    graph: &GasketGraph,
    domain: &[usize],
    scale: LemmaScale,
    p3_sq: Rational64,
    p5_sq: Rational64,
    targets: &[usize],
) -> Result<UpperEstimate> {
    let d = LemmaDomain::new(op, graph, domain, scale, p5_sq)?;
    let f = d.harmonic_measure(targets)?;
    d.upper(&f, p3_sq)
}

/// Factorization constants for the harmonic measure of `targets` from `D`.
pub fn factorization_check(
    op: &FractionalOperator,
    graph: &GasketGraph,
    domain: &[usize],
    scale: LemmaScale,
    p1_sq: Rational64,
    p5_sq: Rational64,
    targets: &[usize],
) -> Result<FactorizationEstimate> {
    let d = LemmaDomain::new(op, graph, domain, scale, p5_sq)?;
    let f = d.harmonic_measure(targets)?;
    d.factorization(&[&f], p1_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_window, Cell, WindowSpec};
    use crate::stable::{KernelMode, RimPolicy, DEFAULT_SPECTRAL_CAP};

    fn op(k: u32, alpha: f64) -> (GasketGraph, FractionalOperator) {
        let g = build_window(&WindowSpec::dilated_pair(1), k).unwrap();
        let op = FractionalOperator::build(
            &g,
            alpha / walk_dim(),
            RimPolicy::Absorbing,
            KernelMode::Spectral,
            DEFAULT_SPECTRAL_CAP,
        )
        .unwrap();
        (g, op)
    }

    /// The 1-cell at `(1, 0)` scaled by `2^-m`, without its corner `(2^-m, 0)`.
    fn target(g: &GasketGraph, m: i32) -> Vec<usize> {
        let c = Cell::new(1 + m, ExactPoint::new(pow2(-m), Rational64::from_integer(0)));
        (0..g.len())
            .filter(|&y| c.contains(g.vertex(y)) && *g.vertex(y) != c.vertices[0])
            .collect()
    }

    fn all_nonrim(g: &GasketGraph) -> Vec<usize> {
        (0..g.len()).filter(|&y| !g.is_rim(y)).collect()
    }

    const P1: (i64, i64) = (1, 4);
    const P5: (i64, i64) = (3, 4);

    fn r(p: (i64, i64)) -> Rational64 {
        Rational64::new(p.0, p.1)
    }

    #[test]
    fn constants_are_positive_and_finite() {
        let (g, op) = op(3, 0.5);
        let s = LemmaScale::new(ExactPoint::origin(), 0);
        let d = all_nonrim(&g);
        let e = escape_check(&op, &g, &d, s, r(P1), r(P5)).unwrap();
        assert!(e.c4 > 0.0 && e.c4.is_finite());
        assert!(e.max_probability <= 1.0);
        let t = target(&g, 0);
        let u = upper_check(&op, &g, &d, s, Rational64::new(9, 16), r(P5), &t).unwrap();
        assert!(u.c7 > 0.0 && u.c7.is_finite());
        let f = factorization_check(&op, &g, &d, s, r(P1), r(P5), &t).unwrap();
        assert!(f.c8_prime > 0.0 && f.c8_prime <= f.c8 && f.c8.is_finite());
    }

    #[test]
    fn targets_inside_the_ball_are_rejected() {
        let (g, op) = op(3, 0.5);
        let s = LemmaScale::new(ExactPoint::origin(), 0);
        let d = all_nonrim(&g);
        let inner = g.require_index(&ExactPoint::from_ints((1, 4), (0, 1))).unwrap();
        assert!(upper_check(&op, &g, &d, s, r(P1), r(P5), &[inner]).is_err());
    }

    #[test]
    fn constants_are_stable_under_joint_dilation() {
        let alpha = 0.7;
        let mut rows = Vec::new();
        for (k, m) in [(3u32, 0i32), (4, 1)] {
            let (g, op) = op(k, alpha);
            let s = LemmaScale::new(ExactPoint::origin(), m);
            let d = all_nonrim(&g);
            let ld = LemmaDomain::new(&op, &g, &d, s, r(P5)).unwrap();
            let f = ld.harmonic_measure(&target(&g, m)).unwrap();
            let e = ld.escape(r(P1)).unwrap();
            let u = ld.upper(&f, Rational64::new(9, 16)).unwrap();
            let fac = ld.factorization(&[&f], r(P1)).unwrap();
            rows.push([e.c4, u.c7, fac.c8, fac.c8_prime]);
        }
        for j in 0..4 {
            let q = rows[1][j] / rows[0][j];
            assert!((0.6..1.6).contains(&q), "constant {j}: {:?}", rows);
        }
    }
}
