//! Cutoff functions assembled from rotated copies of `phi0` on `n`-cells.

use std::collections::BTreeSet;

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};

use super::{phi0_at_vertex_capped, phi0_grid, Rational, DEFAULT_DEPTH_CAP};
use crate::error::{Error, Result};
use crate::geometry::{Cell, ExactPoint, GasketGraph, WindowSpec};
use crate::stable::FractionalOperator;

/// Largest cell level tried when separating two balls.
const MAX_SEPARATION_LEVEL: u32 = 8;

/// What the cutoff is on one `n`-cell. `apex` indexes the cell's vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Piece {
    One,
    Zero,
    /// `phi0` equal to 1 at `vertices[apex]`, the only vertex in `V`.
    Phi0 { apex: usize },
    /// `1 - phi0` with `phi0` equal to 1 at `vertices[apex]`, the only vertex
    /// not in `V`.
    OneMinusPhi0 { apex: usize },
}

impl Piece {
    fn classify(in_v: [bool; 3]) -> Piece {
        match in_v.iter().filter(|b| **b).count() {
            3 => Piece::One,
            0 => Piece::Zero,
            1 => Piece::Phi0 {
                apex: in_v.iter().position(|b| *b).unwrap_or(0),
            },
            _ => Piece::OneMinusPhi0 {
                apex: in_v.iter().position(|b| !*b).unwrap_or(0),
            },
        }
    }
}

fn home(cell: &Cell, apex: usize) -> [ExactPoint; 3] {
    std::array::from_fn(|i| cell.vertices[(apex + i) % 3])
}

/// A cutoff function on a window, one piece per `n`-cell.
#[derive(Clone, Debug)]
pub struct Cutoff {
    level: u32,
    window: WindowSpec,
    pieces: Vec<(Cell, Piece)>,
}

impl Cutoff {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn pieces(&self) -> &[(Cell, Piece)] {
        &self.pieces
    }

    pub fn piece_of(&self, cell: &Cell) -> Option<Piece> {
        self.pieces
            .binary_search_by(|(c, _)| c.cmp(cell))
            .ok()
            .map(|i| self.pieces[i].1)
    }

    /// Value at a gasket point of the window whose coordinates are dyadic.
    pub fn eval(&self, p: &ExactPoint) -> Result<Rational> {
        let (cell, piece) = self
            .pieces
            .iter()
            .find(|(c, _)| c.contains(p))
            .ok_or_else(|| Error::OutsideCell(p.to_string()))?;
        match *piece {
            Piece::One => Ok(Rational::one()),
            Piece::Zero => Ok(Rational::zero()),
            Piece::Phi0 { apex } => phi0_at_vertex_capped(&home(cell, apex), p, DEFAULT_DEPTH_CAP),
            Piece::OneMinusPhi0 { apex } => {
                Ok(Rational::one() - phi0_at_vertex_capped(&home(cell, apex), p, DEFAULT_DEPTH_CAP)?)
            }
        }
    }

    /// Exact values at every vertex of `graph`, checking that neighbouring
    /// pieces agree on shared vertices.
    pub fn values_on(&self, graph: &GasketGraph) -> Result<Vec<Rational>> {
        if graph.window() != &self.window {
            return Err(Error::InvalidWindow(format!(
                "cutoff window `{}` differs from graph window `{}`",
                self.window,
                graph.window()
            )));
        }
        if graph.level() < self.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                found: graph.level(),
            });
        }
        let depth = (graph.level() - self.level) as usize;
        let mut values: Vec<Option<Rational>> = vec![None; graph.len()];
        let mut set = |p: &ExactPoint, x: Rational| -> Result<()> {
            let i = graph.require_index(p)?;
            match &values[i] {
                Some(old) if *old != x => Err(Error::CutoffCase(format!("pieces disagree at {p}"))),
                Some(_) => Ok(()),
                None => {
                    values[i] = Some(x);
                    Ok(())
                }
            }
        };
        for (cell, piece) in &self.pieces {
            match *piece {
                Piece::One | Piece::Zero => {
                    let x = if *piece == Piece::One { Rational::one() } else { Rational::zero() };
                    for p in corners_at_depth(cell, depth) {
                        set(&p, x.clone())?;
                    }
                }
                Piece::Phi0 { apex } => {
                    for (p, x) in phi0_grid(&home(cell, apex), depth)? {
                        set(&p, x)?;
                    }
                }
                Piece::OneMinusPhi0 { apex } => {
                    for (p, x) in phi0_grid(&home(cell, apex), depth)? {
                        set(&p, Rational::one() - x)?;
                    }
                }
            }
        }
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::OutsideCell(graph.vertex(i).to_string())))
            .collect()
    }

    pub fn values_f64(&self, graph: &GasketGraph) -> Result<Vec<f64>> {
        Ok(self
            .values_on(graph)?
            .iter()
            .map(|x| x.to_f64().unwrap_or(f64::NAN))
            .collect())
    }
}

fn corners_at_depth(cell: &Cell, depth: usize) -> BTreeSet<ExactPoint> {
    let mut cells = vec![*cell];
    for _ in 0..depth {
        cells = cells.iter().flat_map(|c| c.children()).collect();
    }
    cells.iter().flat_map(|c| c.vertices).collect()
}

/// The cutoff for `V` = vertices of the `selected` `n`-cells.
pub fn cutoff_assemble(window: &WindowSpec, n: u32, selected: &[Cell]) -> Result<Cutoff> {
    let cells = window.subcells(n);
    let mut v = BTreeSet::new();
    for s in selected {
        if cells.binary_search(s).is_err() {
            return Err(Error::CutoffCase(format!(
                "cell with corner {} is not a level-{n} cell of the window",
                s.vertices[0]
            )));
        }
        v.extend(s.vertices);
    }
    let pieces = cells
        .into_iter()
        .map(|c| {
            let in_v = c.vertices.map(|p| v.contains(&p));
            (c, Piece::classify(in_v))
        })
        .collect();
    Ok(Cutoff {
        level: n,
        window: window.clone(),
        pieces,
    })
}

/// A cutoff equal to 1 on `B(v, sqrt(p1_sq))` and 0 off `B(v, sqrt(p2_sq))`,
/// built on the coarsest cell level at which cells meeting the inner ball
/// share no vertex with cells reaching outside the outer one.
pub fn ball_cutoff(window: &WindowSpec, v: &ExactPoint, p1_sq: Rational64, p2_sq: Rational64) -> Result<Cutoff> {
    if !(p1_sq > Rational64::zero() && p1_sq < p2_sq) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < p1^2 < p2^2, got {p1_sq} and {p2_sq}"
        )));
    }
    for n in 0..=MAX_SEPARATION_LEVEL {
        let cells = window.subcells(n);
        let near: Vec<Cell> = cells.iter().filter(|c| c.dist2_to(v) < p1_sq).copied().collect();
        let inner: BTreeSet<ExactPoint> = near.iter().flat_map(|c| c.vertices).collect();
        let clash = cells
            .iter()
            .filter(|c| c.vertices.iter().any(|p| p.dist2(v) >= p2_sq))
            .any(|c| c.vertices.iter().any(|p| inner.contains(p)));
        if !clash {
            return cutoff_assemble(window, n, &near);
        }
    }
    Err(Error::DepthExceeded {
        depth: MAX_SEPARATION_LEVEL as usize + 1,
        cap: MAX_SEPARATION_LEVEL as usize,
    })
}

/// `max |(I - P)^beta phi|` over the states of a level-`k` operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffBound {
    pub level: u32,
    /// Per jump of the level-`k` chain.
    pub raw: f64,
    /// Per unit of continuum time, `raw * 2^(k alpha)`.
    pub scaled: f64,
}

pub fn cutoff_fractional_bound(cutoff: &Cutoff, op: &FractionalOperator, graph: &GasketGraph) -> Result<CutoffBound> {
    let phi = cutoff.values_f64(graph)?;
    let on_states: Vec<f64> = op.states().iter().map(|&v| phi[v]).collect();
    let raw = op.apply(&on_states).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let alpha = op.beta() * crate::stable::walk_dim();
    let k = graph.level();
    Ok(CutoffBound {
        level: k,
        raw,
        scaled: raw * (k as f64 * alpha).exp2(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{discrete_laplacian, normal_derivative, VertexFunction};
    use crate::geometry::build_window;
    use crate::spline::rotated_state;
    use crate::stable::{walk_dim, KernelMode, RimPolicy, DEFAULT_SPECTRAL_CAP};
    use num_bigint::BigInt;
    use num_traits::Signed;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn all_cells_give_one_and_none_give_zero() {
        let w = WindowSpec::pair();
        let g = build_window(&w, 3).unwrap();
        let all = w.subcells(1);
        let one = cutoff_assemble(&w, 1, &all).unwrap();
        assert!(one.values_on(&g).unwrap().iter().all(|x| x.is_one()));
        let zero = cutoff_assemble(&w, 1, &[]).unwrap();
        assert!(zero.values_on(&g).unwrap().iter().all(|x| x.is_zero()));
    }

    #[test]
    fn single_one_cell_case_table() {
        let w = WindowSpec::unit();
        let cells = w.subcells(1);
        // The 1-cell at the origin; its neighbours share one vertex each.
        let s = Cell::new(1, ExactPoint::origin());
        let phi = cutoff_assemble(&w, 1, &[s]).unwrap();
        assert_eq!(phi.piece_of(&s), Some(Piece::One));
        for c in cells.iter().filter(|c| **c != s) {
            let shared: Vec<usize> = (0..3).filter(|&i| s.vertices.contains(&c.vertices[i])).collect();
            assert_eq!(shared.len(), 1);
            assert_eq!(phi.piece_of(c), Some(Piece::Phi0 { apex: shared[0] }));
            assert!(phi.eval(&c.vertices[shared[0]]).unwrap().is_one());
        }
        // Level-2 window: the far corner of the unit cell is in no cell of S.
        let g = build_window(&w, 4).unwrap();
        let vals = phi.values_on(&g).unwrap();
        let far = g.require_index(&ExactPoint::p2()).unwrap();
        assert!(vals[far].is_zero());
        for x in &vals {
            assert!(!x.is_negative() && *x <= Rational::one());
        }
        // Evaluation by address agrees with the grid.
        for (i, p) in g.vertices().iter().enumerate() {
            assert_eq!(phi.eval(p).unwrap(), vals[i]);
        }
    }

    #[test]
    fn mixed_pieces_are_continuous() {
        // Two 2-cells meeting at a vertex force a 1 - phi0 piece between them.
        let w = WindowSpec::unit();
        let sel = [
            Cell::new(2, ExactPoint::origin()),
            Cell::new(2, ExactPoint::from_ints((1, 4), (1, 4))),
        ];
        let phi = cutoff_assemble(&w, 2, &sel).unwrap();
        assert!(phi
            .pieces()
            .iter()
            .any(|(_, p)| matches!(p, Piece::OneMinusPhi0 { .. })));
        let g = build_window(&w, 5).unwrap();
        phi.values_on(&g).unwrap();
    }

    #[test]
    fn normal_derivatives_match_at_shared_vertices() {
        let w = WindowSpec::unit();
        let s = Cell::new(1, ExactPoint::origin());
        let phi = cutoff_assemble(&w, 1, &[s]).unwrap();
        let k = 8;
        let g = build_window(&w, k).unwrap();
        let f = VertexFunction::new(&g, phi.values_on(&g).unwrap()).unwrap();
        let v = ExactPoint::from_ints((1, 2), (0, 1));
        let other = Cell::new(1, v);
        let a = normal_derivative(&f, &v, &s, k).unwrap();
        let b = normal_derivative(&f, &v, &other, k).unwrap();
        assert!(a.value().is_zero());
        let first = b.estimates[0].1.abs();
        let last = b.value().abs();
        assert!(last < first, "{first} -> {last}");
        assert!((a.value() + b.value()).abs() < q(1, 10));
    }

    #[test]
    fn ball_cutoff_separates() {
        let w = WindowSpec::pair();
        let v = ExactPoint::origin();
        let phi = ball_cutoff(&w, &v, Rational64::new(1, 4), Rational64::new(3, 4)).unwrap();
        let g = build_window(&w, phi.level() + 2).unwrap();
        let vals = phi.values_on(&g).unwrap();
        for (i, p) in g.vertices().iter().enumerate() {
            let d2 = p.dist2(&v);
            if d2 < Rational64::new(1, 4) {
                assert!(vals[i].is_one(), "{p}");
            }
            if d2 >= Rational64::new(3, 4) {
                assert!(vals[i].is_zero(), "{p}");
            }
        }
        assert!(ball_cutoff(&w, &v, Rational64::new(3, 4), Rational64::new(1, 4)).is_err());
    }

    #[test]
    fn laplacian_of_phi0_matches_the_spline_state() {
        // At the midpoint of the bottom edge, the discrete Laplacian of phi0 at
        // level k is (3/2) 5^k times the second difference of the spline values
        // read from the descent states; the two computations must agree exactly.
        // For this spline the sequence is already constant from level 2 on.
        let w = WindowSpec::unit();
        let home = Cell::unit();
        let phi0 = Cutoff {
            level: 0,
            window: w.clone(),
            pieces: vec![(home, Piece::Phi0 { apex: 0 })],
        };
        let mut seq = Vec::new();
        for k in 2..=7u32 {
            let g = build_window(&w, k).unwrap();
            let f = VertexFunction::new(&g, phi0.values_on(&g).unwrap()).unwrap();
            let m = ExactPoint::from_ints((1, 2), (0, 1));
            let lap = discrete_laplacian(&f, g.require_index(&m).unwrap()).unwrap();
            // Spline side: the two level-k cells at m are reached by paths
            // 1 2^(k-1) and 2 1^(k-1); their corners give the neighbours of m.
            let mut left = vec![1u8];
            left.extend(std::iter::repeat_n(2u8, k as usize - 1));
            let mut right = vec![2u8];
            right.extend(std::iter::repeat_n(1u8, k as usize - 1));
            let sl = rotated_state(0, &left, 10).unwrap();
            let sr = rotated_state(0, &right, 10).unwrap();
            let center = sl.values[1].clone();
            assert_eq!(center, sr.values[0]);
            let sum = &sl.values[0] + &sl.values[2] + &sr.values[1] + &sr.values[2] - &center * q(4, 1);
            let oracle = q(3, 2) * Rational::from_integer(BigInt::from(5).pow(k)) * sum;
            assert_eq!(lap, oracle);
            seq.push(lap);
        }
        assert!(seq.windows(2).all(|w| w[0] == w[1]), "{seq:?}");
        assert!(seq[0].is_negative());
    }

    #[test]
    fn fractional_bound_is_stable_across_levels() {
        let w = WindowSpec::pair();
        let alpha = 0.5;
        let phi = ball_cutoff(&w, &ExactPoint::origin(), Rational64::new(1, 4), Rational64::new(3, 4)).unwrap();
        let mut scaled = Vec::new();
        for k in 4..=6 {
            let g = build_window(&w, k).unwrap();
            let op = FractionalOperator::build(
                &g,
                alpha / walk_dim(),
                RimPolicy::Absorbing,
                KernelMode::Spectral,
                DEFAULT_SPECTRAL_CAP,
            )
            .unwrap();
            let b = cutoff_fractional_bound(&phi, &op, &g).unwrap();
            assert!(b.raw.is_finite() && b.raw > 0.0);
            scaled.push(b.scaled);
        }
        let hi = scaled.iter().cloned().fold(f64::MIN, f64::max);
        let lo = scaled.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi / lo < 2.0, "{scaled:?}");
    }

    #[test]
    fn zero_cutoff_has_zero_bound() {
        let w = WindowSpec::pair();
        let g = build_window(&w, 3).unwrap();
        let op = FractionalOperator::build(&g, 0.3, RimPolicy::Absorbing, KernelMode::Spectral, 5000).unwrap();
        let zero = cutoff_assemble(&w, 1, &[]).unwrap();
        assert_eq!(cutoff_fractional_bound(&zero, &op, &g).unwrap().raw, 0.0);
        // phi = 1 on a conservative window: L annihilates constants.
        let op = FractionalOperator::build(&g, 0.3, RimPolicy::Reflecting, KernelMode::Spectral, 5000).unwrap();
        let one = cutoff_assemble(&w, 1, &w.subcells(1)).unwrap();
        assert!(cutoff_fractional_bound(&one, &op, &g).unwrap().raw < 1e-10);
    }
}
