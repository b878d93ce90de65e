use num_rational::Rational64;
use num_traits::ToPrimitive;

use super::params::hausdorff_dim;
use crate::error::{Error, Result};
use crate::geometry::{ExactPoint, GasketGraph};

/// One quadrature node of `Lambda_{v,r}`: a vertex outside the open ball,
/// with its exact squared distance and weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LambdaNode {
    pub vertex: usize,
    pub dist2: Rational64,
    pub weight: Rational64,
}

/// The exact part of the quadrature: every vertex with `rho(y, v)^2 >= r2`.
pub fn lambda_nodes(graph: &GasketGraph, v: &ExactPoint, r2: Rational64) -> Vec<LambdaNode> {
    (0..graph.len())
        .filter_map(|i| {
            let dist2 = graph.vertex(i).dist2(v);
            (dist2 >= r2 && dist2 > Rational64::from_integer(0)).then(|| LambdaNode {
                vertex: i,
                dist2,
                weight: graph.weight(i),
            })
        })
        .collect()
}

/// `sum_{rho(y,v) >= r} rho(y,v)^(-d-alpha) f(y) w(y)` over the vertices of
/// `graph`; `f` is indexed by graph vertex and must be nonnegative.
pub fn lambda_functional(graph: &GasketGraph, v: &ExactPoint, r2: Rational64, f: &[f64], alpha: f64) -> Result<f64> {
    if f.len() != graph.len() {
        return Err(Error::LengthMismatch {
            expected: graph.len(),
            found: f.len(),
        });
    }
    if r2 <= Rational64::from_integer(0) {
        return Err(Error::InvalidParameter(format!("squared radius {r2} must be positive")));
    }
    if let Some(x) = f.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::InvalidParameter(format!("Lambda needs f >= 0, found {x}")));
    }
    Ok(lambda_sum(&lambda_nodes(graph, v, r2), f, alpha))
}

pub(crate) fn lambda_sum(nodes: &[LambdaNode], f: &[f64], alpha: f64) -> f64 {
    let exponent = -(hausdorff_dim() + alpha) / 2.0;
    nodes
        .iter()
        .filter(|n| f[n.vertex] != 0.0)
        .map(|n| {
            let d2 = n.dist2.to_f64().unwrap_or(f64::NAN);
            let w = n.weight.to_f64().unwrap_or(f64::NAN);
            d2.powf(exponent) * f[n.vertex] * w
        })
        .sum()
}

/// Bound on `Lambda_{0,R}(1)` over the part of the infinite gasket beyond
/// radius `R`, from `mu(B(0, 2^j)) <= 2 * 3^j` summed over dyadic shells.
pub fn lambda_tail_bound(radius: f64, alpha: f64) -> f64 {
    6.0 * radius.powf(-alpha) / (1.0 - (-alpha).exp2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_window, Dilate, WindowSpec};
    use num_traits::Zero;

    #[test]
    fn zero_function() {
        let g = build_window(&WindowSpec::pair(), 3).unwrap();
        let f = vec![0.0; g.len()];
        let x = lambda_functional(&g, &ExactPoint::origin(), Rational64::new(1, 4), &f, 0.5).unwrap();
        assert_eq!(x, 0.0);
        assert!(lambda_functional(&g, &ExactPoint::origin(), Rational64::zero(), &f, 0.5).is_err());
        let mut neg = f.clone();
        neg[0] = -1.0;
        assert!(lambda_functional(&g, &ExactPoint::origin(), Rational64::new(1, 4), &neg, 0.5).is_err());
    }

    #[test]
    fn dilation_identity() {
        let alpha = 0.7;
        let g = build_window(&WindowSpec::pair(), 4).unwrap();
        let v = ExactPoint::from_ints((1, 2), (0, 1));
        let r2 = Rational64::new(1, 16);
        let f: Vec<f64> = g.vertices().iter().map(|p| 1.0 + p.to_f64().0.abs()).collect();
        for n in 1..=3 {
            let h = g.dilate(n).unwrap();
            let vn = v.dilate(n);
            let rn = r2 * Rational64::from_integer(4i64.pow(n as u32));
            let a = lambda_nodes(&g, &v, r2);
            let b = lambda_nodes(&h, &vn, rn);
            // Exact bookkeeping: same nodes, distances scale by 4^n, weights by 3^n.
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.vertex, y.vertex);
                assert_eq!(y.dist2, x.dist2 * Rational64::from_integer(4i64.pow(n as u32)));
                assert_eq!(y.weight, x.weight * Rational64::from_integer(3i64.pow(n as u32)));
            }
            // f_n(x) = f(2^-n x) is the same vector on the dilated vertices.
            let la = lambda_functional(&g, &v, r2, &f, alpha).unwrap();
            let lb = lambda_functional(&h, &vn, rn, &f, alpha).unwrap();
            let rel = (la - (alpha * n as f64).exp2() * lb).abs() / la;
            assert!(rel < 1e-12, "n = {n}: {rel}");
        }
    }

    #[test]
    fn truncation_increment_is_bounded() {
        let alpha = 0.5;
        let k = 4;
        let small = build_window(&WindowSpec::pair(), k).unwrap();
        let large = build_window(&WindowSpec::dilated_pair(1), k).unwrap();
        let r2 = Rational64::new(1, 4);
        let o = ExactPoint::origin();
        let a = lambda_functional(&small, &o, r2, &vec![1.0; small.len()], alpha).unwrap();
        let b = lambda_functional(&large, &o, r2, &vec![1.0; large.len()], alpha).unwrap();
        assert!(b > a);
        assert!(b - a <= lambda_tail_bound(1.0, alpha), "{a} {b}");
    }
}
