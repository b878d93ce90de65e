//! Finite-level calculus on gasket graphs: energy, harmonic extension,
//! Laplacian and normal derivatives.
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f64` and in
//! exact `BigRational` arithmetic.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::geometry::{Cell, ExactPoint, GasketGraph};

/// Field operations needed by the calculus routines.
pub trait Scalar: Clone + PartialOrd + Debug + Num + Neg<Output = Self> {
    fn ratio(n: i64, d: i64) -> Self;
    fn abs_val(&self) -> Self;
    fn to_f64(&self) -> f64;

    fn from_int(n: i64) -> Self {
        Self::ratio(n, 1)
    }

    fn pow_ratio(n: i64, d: i64, e: u32) -> Self {
        let mut out = Self::one();
        let base = Self::ratio(n, d);
        for _ in 0..e {
            out = out * base.clone();
        }
        out
    }
}

impl Scalar for f64 {
    fn ratio(n: i64, d: i64) -> Self {
        n as f64 / d as f64
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn ratio(n: i64, d: i64) -> Self {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Normalisation of the finite-level Laplacian against the equal-split
/// vertex measure.
pub const LAPLACIAN_CONSTANT: (i64, i64) = (3, 2);

/// Values of a function at every vertex of a graph.
#[derive(Clone, Debug)]
pub struct VertexFunction<'g, T> {
    graph: &'g GasketGraph,
    values: Vec<T>,
}

impl<'g, T: Scalar> VertexFunction<'g, T> {
    pub fn new(graph: &'g GasketGraph, values: Vec<T>) -> Result<Self> {
        if values.len() != graph.len() {
            return Err(Error::LengthMismatch {
                expected: graph.len(),
                found: values.len(),
            });
        }
        Ok(Self { graph, values })
    }

    pub fn from_fn(graph: &'g GasketGraph, f: impl Fn(&ExactPoint) -> T) -> Self {
        let values = graph.vertices().iter().map(f).collect();
        Self { graph, values }
    }

    pub fn constant(graph: &'g GasketGraph, c: T) -> Self {
        Self {
            graph,
            values: vec![c; graph.len()],
        }
    }

    pub fn graph(&self) -> &'g GasketGraph {
        self.graph
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, i: usize) -> &T {
        &self.values[i]
    }

    /// Value at a point; absent points are an error.
    pub fn at(&self, p: &ExactPoint) -> Result<&T> {
        Ok(&self.values[self.graph.require_index(p)?])
    }
}

fn check_level(graph: &GasketGraph, k: u32) -> Result<()> {
    if graph.level() != k {
        return Err(Error::LevelMismatch {
            expected: graph.level(),
            found: k,
        });
    }
    Ok(())
}

/// `(5/3)^k` times the sum over edges of `(f(u) - f(w))^2`.
pub fn graph_energy<T: Scalar>(f: &VertexFunction<T>, k: u32) -> Result<T> {
    energy_form(f, f, k)
}

/// Polarised energy `(5/3)^k sum (f(u)-f(w)) (g(u)-g(w))`.
pub fn energy_form<T: Scalar>(f: &VertexFunction<T>, g: &VertexFunction<T>, k: u32) -> Result<T> {
    check_level(f.graph, k)?;
    check_level(g.graph, k)?;
    let graph = f.graph;
    let mut sum = T::zero();
    for i in 0..graph.len() {
        for &j in graph.neighbors(i) {
            if i < j {
                let df = f.values[i].clone() - f.values[j].clone();
                let dg = g.values[i].clone() - g.values[j].clone();
                sum = sum + df * dg;
            }
        }
    }
    Ok(T::pow_ratio(5, 3, k) * sum)
}

/// Harmonic extension of corner values `x` to the three edge midpoints.
/// Entry `i` is the midpoint opposite corner `i`.
pub fn harmonic_extension<T: Scalar>(x: &[T; 3]) -> [T; 3] {
    let two_fifths = T::ratio(2, 5);
    let fifth = T::ratio(1, 5);
    let m = |i: usize, j: usize, k: usize| {
        (x[j].clone() + x[k].clone()) * two_fifths.clone() + x[i].clone() * fifth.clone()
    };
    [m(0, 1, 2), m(1, 2, 0), m(2, 0, 1)]
}

/// Extends `coarse` harmonically from its level to the next one.
pub fn harmonic_refine<'h, T: Scalar>(
    coarse: &VertexFunction<T>,
    fine: &'h GasketGraph,
) -> Result<VertexFunction<'h, T>> {
    let cg = coarse.graph;
    if fine.level() != cg.level() + 1 || fine.window() != cg.window() {
        return Err(Error::LevelMismatch {
            expected: cg.level() + 1,
            found: fine.level(),
        });
    }
    let mut values: Vec<Option<T>> = vec![None; fine.len()];
    for (i, p) in cg.vertices().iter().enumerate() {
        values[fine.require_index(p)?] = Some(coarse.values[i].clone());
    }
    for ids in cg.cells() {
        let x = [
            coarse.values[ids[0]].clone(),
            coarse.values[ids[1]].clone(),
            coarse.values[ids[2]].clone(),
        ];
        let m = harmonic_extension(&x);
        let p: Vec<&ExactPoint> = ids.iter().map(|&i| cg.vertex(i)).collect();
        let mids = [p[1].midpoint(p[2]), p[2].midpoint(p[0]), p[0].midpoint(p[1])];
        for (mid, val) in mids.iter().zip(m) {
            values[fine.require_index(mid)?] = Some(val);
        }
    }
    let values = values
        .into_iter()
        .map(|v| v.ok_or_else(|| Error::InvalidParameter("refinement left a vertex unset".into())))
        .collect::<Result<Vec<T>>>()?;
    VertexFunction::new(fine, values)
}

/// `(3/2) 5^k sum_{w ~ v} (f(w) - f(v))` at a non-rim vertex.
pub fn discrete_laplacian<T: Scalar>(f: &VertexFunction<T>, v: usize) -> Result<T> {
    let g = f.graph;
    if g.is_rim(v) {
        return Err(Error::RimVertex(v));
    }
    let mut s = T::zero();
    for &w in g.neighbors(v) {
        s = s + f.values[w].clone() - f.values[v].clone();
    }
    let (n, d) = LAPLACIAN_CONSTANT;
    Ok(T::ratio(n, d) * T::pow_ratio(5, 1, g.level()) * s)
}

/// Finite-depth normal derivative estimates `(level, estimate)` for the
/// cells refining toward a corner.
#[derive(Clone, Debug)]
pub struct NormalDerivative<T> {
    pub estimates: Vec<(u32, T)>,
}

impl<T: Clone> NormalDerivative<T> {
    /// The deepest estimate.
    pub fn value(&self) -> T {
        self.estimates.last().expect("at least one estimate").1.clone()
    }
}

/// Normal derivative of `f` at corner `v` of cell `s`, estimated with the
/// sub-cells at `v` of levels `s.level ..= depth`.
pub fn normal_derivative<T: Scalar>(
    f: &VertexFunction<T>,
    v: &ExactPoint,
    s: &Cell,
    depth: u32,
) -> Result<NormalDerivative<T>> {
    let slot = s
        .vertices
        .iter()
        .position(|p| p == v)
        .ok_or_else(|| Error::OutsideCell(v.to_string()))?;
    if s.level < 0 || depth < s.level as u32 || depth > f.graph.level() {
        return Err(Error::DepthExceeded {
            depth: depth as usize,
            cap: f.graph.level() as usize,
        });
    }
    let u = s.vertices[(slot + 1) % 3];
    let w = s.vertices[(slot + 2) % 3];
    let fv = f.at(v)?.clone();
    let mut estimates = Vec::new();
    for k in s.level as u32..=depth {
        let shrink = crate::geometry::pow2(-((k as i32) - s.level));
        let uk = v.add(&u.sub(v).scale(shrink));
        let wk = v.add(&w.sub(v).scale(shrink));
        let est = fv.clone() + fv.clone() - f.at(&uk)?.clone() - f.at(&wk)?.clone();
        estimates.push((k, T::pow_ratio(5, 3, k) * est));
    }
    Ok(NormalDerivative { estimates })
}

/// Residual of the discrete Gauss-Green identity on cell `s` at the level of
/// the functions' graph:
/// `|E_S(f,g) + <Lap f, g> - sum_{corners} dn f * g|`.
pub fn gauss_green_check<T: Scalar>(
    f: &VertexFunction<T>,
    g: &VertexFunction<T>,
    s: &Cell,
    depth: u32,
) -> Result<T> {
    let graph = f.graph;
    check_level(graph, depth)?;
    check_level(g.graph, depth)?;
    let inside: Vec<bool> = graph.vertices().iter().map(|p| s.contains(p)).collect();
    let corners: Vec<usize> = s
        .vertices
        .iter()
        .map(|p| graph.require_index(p))
        .collect::<Result<_>>()?;
    let scale = T::pow_ratio(5, 3, depth);

    let mut energy = T::zero();
    let mut laplace_pairing = T::zero();
    let mut boundary = T::zero();
    let (ln, ld) = LAPLACIAN_CONSTANT;
    let lap_scale = T::ratio(ln, ld) * T::pow_ratio(5, 1, depth);
    let interior_weight = T::ratio(2, 1) * T::pow_ratio(1, 3, depth + 1);
    for i in 0..graph.len() {
        if !inside[i] {
            continue;
        }
        let mut lap = T::zero();
        for &j in graph.neighbors(i) {
            if !inside[j] {
                continue;
            }
            let df = f.values[j].clone() - f.values[i].clone();
            lap = lap + df.clone();
            if i < j {
                let dg = g.values[j].clone() - g.values[i].clone();
                energy = energy + df * dg;
            }
        }
        if corners.contains(&i) {
            boundary = boundary + scale.clone() * (-lap) * g.values[i].clone();
        } else {
            laplace_pairing = laplace_pairing
                + lap_scale.clone() * lap * g.values[i].clone() * interior_weight.clone();
        }
    }
    let residual = scale * energy + laplace_pairing - boundary;
    Ok(residual.abs_val())
}
