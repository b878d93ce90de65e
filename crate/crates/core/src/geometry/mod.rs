//! Exact geometry of the infinite Sierpinski gasket.
//!
//! Points are stored as `(a, b)` meaning the planar point `(a, b*sqrt(3))`, so
//! squared distances, ball membership and cell incidence are all decided in
//! rational arithmetic. The gasket is the union of the dyadic dilations of the
//! unit triangle `F+` with corners `(0,0), (1,0), (1/2, sqrt(3)/2)` and of its
//! mirror image `F-`.

mod cache;
mod graph;

use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::{read_cache, write_cache, CACHE_FORMAT};
pub use graph::{build_window, build_window_capped, GasketGraph, DEFAULT_VERTEX_CAP};

/// Scale objects by `2^n` about the origin.
pub trait Dilate: Sized {
    type Output;
    fn dilate(&self, n: i32) -> Self::Output;
}

pub(crate) fn pow2(n: i32) -> Rational64 {
    if n >= 0 {
        Rational64::from_integer(1i64 << n)
    } else {
        Rational64::new(1, 1i64 << (-n))
    }
}

/// A point `(a, b*sqrt(3))` of the plane with rational `a`, `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExactPoint {
    pub a: Rational64,
    pub b: Rational64,
}

impl ExactPoint {
    pub fn new(a: Rational64, b: Rational64) -> Self {
        Self { a, b }
    }

    pub fn from_ints(a: (i64, i64), b: (i64, i64)) -> Self {
        Self::new(Rational64::new(a.0, a.1), Rational64::new(b.0, b.1))
    }

    pub fn origin() -> Self {
        Self::new(Rational64::zero(), Rational64::zero())
    }

    /// Corners of the unit cell `F+`: `p1 = (0,0)`, `p2 = (1,0)`, `p3` the apex.
    pub fn p1() -> Self {
        Self::origin()
    }

    pub fn p2() -> Self {
        Self::new(Rational64::one(), Rational64::zero())
    }

    pub fn p3() -> Self {
        Self::from_ints((1, 2), (1, 2))
    }

    /// Exact squared Euclidean distance `(da)^2 + 3 (db)^2`.
    pub fn dist2(&self, other: &ExactPoint) -> Rational64 {
        let da = self.a - other.a;
        let db = self.b - other.b;
        da * da + Rational64::from_integer(3) * db * db
    }

    /// Euclidean inner product of two points viewed as vectors.
    pub fn dot(&self, other: &ExactPoint) -> Rational64 {
        self.a * other.a + Rational64::from_integer(3) * self.b * other.b
    }

    pub fn sub(&self, other: &ExactPoint) -> ExactPoint {
        ExactPoint::new(self.a - other.a, self.b - other.b)
    }

    pub fn add(&self, other: &ExactPoint) -> ExactPoint {
        ExactPoint::new(self.a + other.a, self.b + other.b)
    }

    pub fn scale(&self, s: Rational64) -> ExactPoint {
        ExactPoint::new(self.a * s, self.b * s)
    }

    pub fn midpoint(&self, other: &ExactPoint) -> ExactPoint {
        let half = Rational64::new(1, 2);
        ExactPoint::new((self.a + other.a) * half, (self.b + other.b) * half)
    }

    /// Reflection across the vertical axis through the origin.
    pub fn mirror(&self) -> ExactPoint {
        ExactPoint::new(-self.a, self.b)
    }

    /// Smallest `k >= 0` such that `2^(k+1) a` and `2^(k+1) b` are integers,
    /// or `None` if a denominator is not a power of two.
    pub fn level_hint(&self) -> Option<u32> {
        let den = num_integer::lcm(*self.a.denom(), *self.b.denom());
        if den <= 0 || den & (den - 1) != 0 {
            return None;
        }
        let t = den.trailing_zeros();
        Some(t.saturating_sub(1))
    }

    pub fn to_f64(&self) -> (f64, f64) {
        let a = *self.a.numer() as f64 / *self.a.denom() as f64;
        let b = *self.b.numer() as f64 / *self.b.denom() as f64;
        (a, b * 3f64.sqrt())
    }
}

impl fmt::Display for ExactPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.a, self.b)
    }
}

impl std::str::FromStr for ExactPoint {
    type Err = Error;

    /// Parses `a,b` with rational components such as `1/2,1/2`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("expected `a,b`, got `{s}`")))?;
        Ok(ExactPoint::new(parse_rational(a)?, parse_rational(b)?))
    }
}

/// Parses `p`, `p/q` into a reduced `Rational64`.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: `{s}`"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(n, d))
        }
        None => Ok(Rational64::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

impl Dilate for ExactPoint {
    type Output = ExactPoint;

    fn dilate(&self, n: i32) -> ExactPoint {
        self.scale(pow2(n))
    }
}

/// An upward triangle of the gasket with side `2^-level`.
///
/// Vertices are stored as `[lower-left, lower-right, apex]`. Every cell of the
/// infinite gasket, on either side of the origin, is upward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub level: i32,
    pub vertices: [ExactPoint; 3],
}

impl Cell {
    pub fn new(level: i32, lower_left: ExactPoint) -> Self {
        let s = pow2(-level);
        let half = s * Rational64::new(1, 2);
        let lr = ExactPoint::new(lower_left.a + s, lower_left.b);
        let top = ExactPoint::new(lower_left.a + half, lower_left.b + half);
        Self {
            level,
            vertices: [lower_left, lr, top],
        }
    }

    /// The unit cell `F+`.
    pub fn unit() -> Self {
        Self::new(0, ExactPoint::origin())
    }

    pub fn side(&self) -> Rational64 {
        pow2(-self.level)
    }

    /// Sub-cell `i` (0-based) sharing corner `vertices[i]`.
    pub fn child(&self, i: usize) -> Cell {
        let ll = self.vertices[0];
        let c = match i {
            0 => ll,
            1 => ll.midpoint(&self.vertices[1]),
            _ => ll.midpoint(&self.vertices[2]),
        };
        Cell::new(self.level + 1, c)
    }

    pub fn children(&self) -> [Cell; 3] {
        [self.child(0), self.child(1), self.child(2)]
    }

    /// Lattice coordinates `(u, v)` of `p` relative to the lower-left corner in
    /// units of the side; the cell is `u, v >= 0, u + v <= 1`.
    fn lattice(&self, p: &ExactPoint) -> (Rational64, Rational64) {
        let d = p.sub(&self.vertices[0]);
        let s = self.side();
        let v = d.b * Rational64::from_integer(2) / s;
        let u = (d.a - d.b) / s;
        (u, v)
    }

    /// Whether `p` lies in the closed solid triangle. For gasket points this
    /// is the same as membership in the gasket cell.
    pub fn contains(&self, p: &ExactPoint) -> bool {
        let (u, v) = self.lattice(p);
        !u.is_negative() && !v.is_negative() && u + v <= Rational64::one()
    }

    /// Exact squared distance from `p` to the closed solid triangle.
    pub fn dist2_to(&self, p: &ExactPoint) -> Rational64 {
        if self.contains(p) {
            return Rational64::zero();
        }
        let mut best: Option<Rational64> = None;
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let d = segment_dist2(p, &self.vertices[i], &self.vertices[j]);
            best = Some(match best {
                Some(b) if b <= d => b,
                _ => d,
            });
        }
        best.unwrap_or_else(Rational64::zero)
    }

    pub fn mirror(&self) -> Cell {
        let lr = self.vertices[1].mirror();
        Cell::new(self.level, lr)
    }
}

impl Dilate for Cell {
    type Output = Cell;

    fn dilate(&self, n: i32) -> Cell {
        Cell::new(self.level - n, self.vertices[0].dilate(n))
    }
}

fn segment_dist2(p: &ExactPoint, x: &ExactPoint, y: &ExactPoint) -> Rational64 {
    let d = y.sub(x);
    let len2 = d.dot(&d);
    let t = p.sub(x).dot(&d) / len2;
    let t = if t.is_negative() {
        Rational64::zero()
    } else if t > Rational64::one() {
        Rational64::one()
    } else {
        t
    };
    p.dist2(&x.add(&d.scale(t)))
}

/// Which half of the infinite gasket a 0-cell belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

/// A 0-cell of the infinite gasket.
///
/// On the plus side the cell `(i, j)` has lower-left corner `(i + j/2, j/2)`
/// and exists iff `i & j == 0`; minus-side cells are mirror images.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub side: Side,
    pub i: u64,
    pub j: u64,
}

impl CellIndex {
    pub fn plus(i: u64, j: u64) -> Self {
        Self {
            side: Side::Plus,
            i,
            j,
        }
    }

    pub fn minus(i: u64, j: u64) -> Self {
        Self {
            side: Side::Minus,
            i,
            j,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.i & self.j == 0 && self.i < (1 << 30) && self.j < (1 << 30)
    }

    pub fn cell(&self) -> Cell {
        let a = Rational64::from_integer(self.i as i64) + Rational64::new(self.j as i64, 2);
        let b = Rational64::new(self.j as i64, 2);
        let plus = Cell::new(0, ExactPoint::new(a, b));
        match self.side {
            Side::Plus => plus,
            Side::Minus => plus.mirror(),
        }
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.side {
            Side::Plus => '+',
            Side::Minus => '-',
        };
        write!(f, "{s}{},{}", self.i, self.j)
    }
}

impl std::str::FromStr for CellIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("expected `+i,j` or `-i,j`, got `{s}`"));
        let side = match s.chars().next() {
            Some('+') => Side::Plus,
            Some('-') => Side::Minus,
            _ => return Err(bad()),
        };
        let (i, j) = s[1..].split_once(',').ok_or_else(bad)?;
        let c = CellIndex {
            side,
            i: i.trim().parse().map_err(|_| bad())?,
            j: j.trim().parse().map_err(|_| bad())?,
        };
        if !c.is_valid() {
            return Err(Error::InvalidWindow(format!("{c} is not a cell of the gasket")));
        }
        Ok(c)
    }
}

/// A finite union of 0-cells.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    cells: Vec<CellIndex>,
}

impl WindowSpec {
    /// Validates and sorts the cells. Rejects invalid, duplicate or
    /// disconnected cell lists.
    pub fn new(mut cells: Vec<CellIndex>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidWindow("no cells".into()));
        }
        if let Some(c) = cells.iter().find(|c| !c.is_valid()) {
            return Err(Error::InvalidWindow(format!("{c} is not a cell of the gasket")));
        }
        cells.sort();
        let before = cells.len();
        cells.dedup();
        if cells.len() != before {
            return Err(Error::InvalidWindow("duplicate cells".into()));
        }
        let spec = Self { cells };
        if !spec.is_connected() {
            return Err(Error::DisconnectedWindow);
        }
        Ok(spec)
    }

    /// `F+`.
    pub fn unit() -> Self {
        Self {
            cells: vec![CellIndex::plus(0, 0)],
        }
    }

    /// `F+ u F-`.
    pub fn pair() -> Self {
        Self::dilated_pair(0)
    }

    /// `2^n (F+ u F-)`.
    pub fn dilated_pair(n: u32) -> Self {
        let mut cells = Vec::new();
        let lim = 1u64 << n;
        for i in 0..lim {
            for j in 0..lim - i {
                if i & j == 0 {
                    cells.push(CellIndex::plus(i, j));
                    cells.push(CellIndex::minus(i, j));
                }
            }
        }
        cells.sort();
        Self { cells }
    }

    pub fn cells(&self) -> &[CellIndex] {
        &self.cells
    }

    /// All `n`-cells of the window, sorted.
    pub fn subcells(&self, n: u32) -> Vec<Cell> {
        let mut out: Vec<Cell> = self.cells.iter().map(|c| c.cell()).collect();
        for _ in 0..n {
            out = out.iter().flat_map(|c| c.children()).collect();
        }
        out.sort();
        out
    }

    fn is_connected(&self) -> bool {
        let geo: Vec<Cell> = self.cells.iter().map(|c| c.cell()).collect();
        let n = geo.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for y in 0..n {
                if !seen[y] && shares_vertex(&geo[x], &geo[y]) {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// The window scaled by `2^n`, if it is again a union of 0-cells.
    pub fn dilate(&self, n: i32) -> Result<WindowSpec> {
        if n >= 0 {
            let lim = 1u64 << n;
            let mut cells = Vec::new();
            for c in &self.cells {
                for i in 0..lim {
                    for j in 0..lim - i {
                        if i & j == 0 {
                            cells.push(CellIndex {
                                side: c.side,
                                i: (c.i << n) + i,
                                j: (c.j << n) + j,
                            });
                        }
                    }
                }
            }
            return WindowSpec::new(cells);
        }
        let s = (-n) as u32;
        let mut groups: std::collections::BTreeMap<CellIndex, u64> = Default::default();
        for c in &self.cells {
            let parent = CellIndex {
                side: c.side,
                i: c.i >> s,
                j: c.j >> s,
            };
            *groups.entry(parent).or_default() += 1;
        }
        let full = 3u64.pow(s);
        if groups.iter().any(|(p, &cnt)| cnt != full || !p.is_valid()) {
            return Err(Error::InvalidWindow(format!(
                "window scaled by 2^{n} is not a union of 0-cells"
            )));
        }
        WindowSpec::new(groups.into_keys().collect())
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.cells.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(";"))
    }
}

impl std::str::FromStr for WindowSpec {
    type Err = Error;

    /// Accepts `unit`, `pair`, `pair:N` for `2^N (F+ u F-)`, or an explicit
    /// list such as `+0,0;-0,0`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "unit" => return Ok(WindowSpec::unit()),
            "pair" => return Ok(WindowSpec::pair()),
            _ => {}
        }
        if let Some(n) = s.strip_prefix("pair:") {
            let n: u32 = n
                .parse()
                .map_err(|_| Error::Parse(format!("bad window scale in `{s}`")))?;
            if n > 12 {
                return Err(Error::InvalidWindow(format!("scale {n} is too large")));
            }
            return Ok(WindowSpec::dilated_pair(n));
        }
        let cells = s
            .split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.parse())
            .collect::<Result<Vec<CellIndex>>>()?;
        WindowSpec::new(cells)
    }
}

fn shares_vertex(x: &Cell, y: &Cell) -> bool {
    x.vertices.iter().any(|p| y.vertices.contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn distances_are_exact() {
        let c = Cell::unit();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(c.vertices[i].dist2(&c.vertices[j]), r(1, 1));
                }
            }
        }
        let c3 = Cell::new(3, ExactPoint::origin());
        assert_eq!(c3.vertices[0].dist2(&c3.vertices[2]), r(1, 64));
    }

    #[test]
    fn dilate_point() {
        assert_eq!(ExactPoint::p2().dilate(1), ExactPoint::from_ints((2, 1), (0, 1)));
        assert_eq!(ExactPoint::p3().dilate(-1), ExactPoint::from_ints((1, 4), (1, 4)));
    }

    #[test]
    fn level_hint_matches_denominators() {
        assert_eq!(ExactPoint::p2().level_hint(), Some(0));
        assert_eq!(ExactPoint::p3().level_hint(), Some(0));
        assert_eq!(ExactPoint::from_ints((3, 8), (1, 8)).level_hint(), Some(2));
        assert_eq!(ExactPoint::from_ints((1, 3), (0, 1)).level_hint(), None);
    }

    #[test]
    fn children_tile_the_parent() {
        let c = Cell::unit();
        let kids = c.children();
        assert_eq!(kids[0].vertices[0], c.vertices[0]);
        assert_eq!(kids[1].vertices[1], c.vertices[1]);
        assert_eq!(kids[2].vertices[2], c.vertices[2]);
        for k in &kids {
            for v in &k.vertices {
                assert!(c.contains(v));
            }
        }
    }

    #[test]
    fn containment_and_distance() {
        let c = Cell::unit();
        let hole = ExactPoint::from_ints((1, 2), (1, 6));
        assert!(c.contains(&hole));
        let out = ExactPoint::from_ints((2, 1), (0, 1));
        assert!(!c.contains(&out));
        assert_eq!(c.dist2_to(&out), r(1, 1));
        let left = ExactPoint::from_ints((-1, 1), (0, 1));
        assert_eq!(c.dist2_to(&left), r(1, 1));
        let above = ExactPoint::from_ints((1, 2), (1, 1));
        assert_eq!(c.dist2_to(&above), r(3, 4));
    }

    #[test]
    fn minus_cells_mirror_plus_cells() {
        let m = CellIndex::minus(0, 0).cell();
        assert_eq!(m.vertices[0], ExactPoint::from_ints((-1, 1), (0, 1)));
        assert_eq!(m.vertices[1], ExactPoint::origin());
        assert_eq!(m.vertices[2], ExactPoint::from_ints((-1, 2), (1, 2)));
    }

    #[test]
    fn window_validation() {
        assert!(WindowSpec::new(vec![CellIndex::plus(1, 1)]).is_err());
        assert!(matches!(
            WindowSpec::new(vec![CellIndex::plus(0, 0), CellIndex::plus(2, 0)]),
            Err(Error::DisconnectedWindow)
        ));
        assert!(WindowSpec::new(vec![CellIndex::plus(0, 0), CellIndex::plus(1, 0)]).is_ok());
        assert_eq!(WindowSpec::dilated_pair(1).cells().len(), 6);
        assert_eq!(WindowSpec::dilated_pair(2).cells().len(), 18);
    }

    #[test]
    fn window_parse_round_trip() {
        let w: WindowSpec = "+0,0;-0,0".parse().unwrap();
        assert_eq!(w, WindowSpec::pair());
        assert_eq!(w.to_string().parse::<WindowSpec>().unwrap(), w);
        assert_eq!("pair:1".parse::<WindowSpec>().unwrap(), WindowSpec::dilated_pair(1));
        assert!("+1,1".parse::<WindowSpec>().is_err());
    }

    #[test]
    fn window_dilation() {
        assert_eq!(WindowSpec::pair().dilate(1).unwrap(), WindowSpec::dilated_pair(1));
        assert_eq!(WindowSpec::dilated_pair(2).dilate(-1).unwrap(), WindowSpec::dilated_pair(1));
        assert!(WindowSpec::pair().dilate(-1).is_err());
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("3/4").unwrap(), r(3, 4));
        assert_eq!(parse_rational(" -2 ").unwrap(), r(-2, 1));
        assert!(parse_rational("1/0").is_err());
        assert_eq!("1/2,1/2".parse::<ExactPoint>().unwrap(), ExactPoint::p3());
    }
}
