//! Exact evaluation of the biharmonic spline `phi0` on a cell.
//!
//! `phi0` equals 1 at the first corner, 0 at the other two, and has vanishing
//! normal derivatives at all three. Its values and scaled normal derivatives
//! on the corners of any sub-cell are obtained by applying 6x6 rational
//! descent matrices along the path of sub-cell indices.

mod cutoff;

use std::collections::HashMap;
use std::sync::RwLock;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::geometry::ExactPoint;

pub use cutoff::{
    ball_cutoff, cutoff_assemble, cutoff_fractional_bound, Cutoff, CutoffBound, Piece,
};

pub type Rational = BigRational;

/// Default cap on path length.
pub const DEFAULT_DEPTH_CAP: usize = 10;

const PRINTED: [[i64; 6]; 6] = [
    [75, 0, 0, 0, 0, 0],
    [36, 36, 3, -7, -7, -1],
    [36, 3, 36, -7, -1, -7],
    [0, 0, 0, 45, 0, 0],
    [-90, 90, 0, 15, -15, 0],
    [-90, 0, 90, 15, 0, -15],
];
const DENOMINATOR: i64 = 75;

fn q(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Maps the state on a cell `(u1, u2, u3)` to the state on its sub-cell
/// `target` (1-based), whose corners are `mid(u_target, u_j)`.
///
/// Entries are integers over the common denominator 75.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DescentMatrix {
    pub target: usize,
    pub numerators: [[i64; 6]; 6],
}

impl DescentMatrix {
    pub fn toward(target: usize) -> Self {
        assert!((1..=3).contains(&target), "sub-cell index must be 1, 2 or 3");
        let mut perm = [0, 1, 2, 3, 4, 5];
        if target != 1 {
            let t = target - 1;
            perm.swap(0, t);
            perm.swap(3, 3 + t);
        }
        let mut numerators = [[0; 6]; 6];
        for (r, row) in numerators.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = PRINTED[perm[r]][perm[c]];
            }
        }
        Self { target, numerators }
    }

    pub fn entry(&self, r: usize, c: usize) -> Rational {
        q(self.numerators[r][c], DENOMINATOR)
    }

    pub fn apply(&self, s: &[Rational; 6]) -> [Rational; 6] {
        let den = BigInt::from(DENOMINATOR);
        std::array::from_fn(|r| {
            let mut acc = Rational::zero();
            for (c, x) in s.iter().enumerate() {
                let m = self.numerators[r][c];
                if m != 0 {
                    acc += x * BigInt::from(m);
                }
            }
            acc / den.clone()
        })
    }
}

/// Values of `phi0` at the corners of a sub-cell and its normal derivatives
/// there, scaled by `(3/5)^k` where `k` is the path length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplineState {
    pub path: Vec<u8>,
    pub values: [Rational; 3],
    pub derivs: [Rational; 3],
}

impl SplineState {
    /// The home-cell state of the rotation of `phi0` that equals 1 at corner
    /// `apex` (0-based).
    pub fn initial(apex: usize) -> Self {
        let values = std::array::from_fn(|i| if i == apex { Rational::one() } else { Rational::zero() });
        Self {
            path: Vec::new(),
            values,
            derivs: std::array::from_fn(|_| Rational::zero()),
        }
    }

    fn as_vector(&self) -> [Rational; 6] {
        std::array::from_fn(|i| if i < 3 { self.values[i].clone() } else { self.derivs[i - 3].clone() })
    }

    pub fn descend(&self, target: usize) -> SplineState {
        let v = DescentMatrix::toward(target).apply(&self.as_vector());
        let mut path = self.path.clone();
        path.push(target as u8);
        let [a, b, c, d, e, f] = v;
        SplineState {
            path,
            values: [a, b, c],
            derivs: [d, e, f],
        }
    }
}

fn check_path(path: &[u8], cap: usize) -> Result<()> {
    if path.len() > cap {
        return Err(Error::DepthExceeded {
            depth: path.len(),
            cap,
        });
    }
    if let Some(d) = path.iter().find(|d| !(1..=3).contains(*d)) {
        return Err(Error::InvalidParameter(format!("path digit {d} is not 1, 2 or 3")));
    }
    Ok(())
}

/// State of `phi0` after descending along `path` (digits 1..=3).
pub fn phi0_state(path: &[u8]) -> Result<SplineState> {
    rotated_state(0, path, DEFAULT_DEPTH_CAP)
}

/// State of the rotation of `phi0` equal to 1 at corner `apex` (0-based).
pub fn rotated_state(apex: usize, path: &[u8], cap: usize) -> Result<SplineState> {
    check_path(path, cap)?;
    let mut s = SplineState::initial(apex);
    for &d in path {
        s = s.descend(d as usize);
    }
    Ok(s)
}

/// Parses a path such as `1213`.
pub fn parse_path(s: &str) -> Result<Vec<u8>> {
    s.trim()
        .chars()
        .map(|c| match c {
            '1'..='3' => Ok(c as u8 - b'0'),
            _ => Err(Error::Parse(format!("path `{s}` must use digits 1, 2, 3"))),
        })
        .collect()
}

/// Memoised states keyed by path; concurrent readers, serialised writers.
#[derive(Debug, Default)]
pub struct SplineMemo {
    cap: usize,
    table: RwLock<HashMap<Vec<u8>, SplineState>>,
}

impl SplineMemo {
    pub fn new(cap: usize) -> Self {
        Self {
            cap,
            table: RwLock::new(HashMap::new()),
        }
    }

    pub fn state(&self, path: &[u8]) -> Result<SplineState> {
        check_path(path, self.cap)?;
        if let Some(s) = self.table.read().expect("memo lock").get(path) {
            return Ok(s.clone());
        }
        let s = match path.split_last() {
            None => SplineState::initial(0),
            Some((&last, prefix)) => self.state(prefix)?.descend(last as usize),
        };
        self.table
            .write()
            .expect("memo lock")
            .entry(path.to_vec())
            .or_insert_with(|| s.clone());
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.table.read().expect("memo lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of the exhaustive exact check of the spline condition.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineReport {
    pub depth: usize,
    /// Paths of length `<= depth` visited, for `phi0` itself.
    pub states_checked: u64,
    pub negative_values: u64,
    pub values_above_one: u64,
    pub derivative_bound: u64,
    pub sibling_value_mismatch: u64,
    pub sibling_derivative_mismatch: u64,
    pub derivative_scale_mismatch: u64,
    pub partition_failures: u64,
    pub min_value: Rational,
    pub max_value: Rational,
    /// Largest `|d| / v` over slots with `v > 0`; the condition needs `<= 3`.
    pub max_derivative_ratio: Rational,
}

impl SplineReport {
    pub fn violations(&self) -> u64 {
        self.negative_values
            + self.values_above_one
            + self.derivative_bound
            + self.sibling_value_mismatch
            + self.sibling_derivative_mismatch
            + self.derivative_scale_mismatch
            + self.partition_failures
    }
}

/// Checks every path of length `<= depth` in exact arithmetic: `0 <= phi0 <= 1`,
/// `|scaled derivative| <= 3 phi0`, agreement of sibling sub-cells at shared
/// corners, the derivative scaling of the fixed corner, and the partition of
/// unity by the three rotations.
pub fn verify_spline_condition(depth: usize) -> Result<SplineReport> {
    verify_spline_condition_capped(depth, DEFAULT_DEPTH_CAP)
}

pub fn verify_spline_condition_capped(depth: usize, cap: usize) -> Result<SplineReport> {
    if depth > cap {
        return Err(Error::DepthExceeded { depth, cap });
    }
    let mut report = SplineReport {
        depth,
        states_checked: 0,
        negative_values: 0,
        values_above_one: 0,
        derivative_bound: 0,
        sibling_value_mismatch: 0,
        sibling_derivative_mismatch: 0,
        derivative_scale_mismatch: 0,
        partition_failures: 0,
        min_value: Rational::one(),
        max_value: Rational::zero(),
        max_derivative_ratio: Rational::zero(),
    };
    let root: [SplineState; 3] = std::array::from_fn(SplineState::initial);
    visit(&root, depth, &mut report);
    Ok(report)
}

fn visit(states: &[SplineState; 3], remaining: usize, rep: &mut SplineReport) {
    rep.states_checked += 1;
    let three = q(3, 1);
    let three_fifths = q(3, 5);
    for s in states {
        for slot in 0..3 {
            let v = &s.values[slot];
            let d = s.derivs[slot].abs();
            if v.is_negative() {
                rep.negative_values += 1;
            }
            if *v > Rational::one() {
                rep.values_above_one += 1;
            }
            if d > &three * v {
                rep.derivative_bound += 1;
            }
            if v.is_positive() {
                let ratio = &d / v;
                if ratio > rep.max_derivative_ratio {
                    rep.max_derivative_ratio = ratio;
                }
            }
            if *v < rep.min_value {
                rep.min_value = v.clone();
            }
            if *v > rep.max_value {
                rep.max_value = v.clone();
            }
        }
    }
    for slot in 0..3 {
        let vs: Rational = states.iter().map(|s| s.values[slot].clone()).sum();
        let ds: Rational = states.iter().map(|s| s.derivs[slot].clone()).sum();
        if !vs.is_one() || !ds.is_zero() {
            rep.partition_failures += 1;
        }
    }
    if remaining == 0 {
        return;
    }
    let children: [[SplineState; 3]; 3] =
        std::array::from_fn(|c| std::array::from_fn(|r| states[r].descend(c + 1)));
    for r in 0..3 {
        for i in 0..3 {
            let ci = &children[i][r];
            if ci.values[i] != states[r].values[i] || ci.derivs[i] != &three_fifths * &states[r].derivs[i] {
                rep.derivative_scale_mismatch += 1;
            }
            for j in (i + 1)..3 {
                let cj = &children[j][r];
                if ci.values[j] != cj.values[i] {
                    rep.sibling_value_mismatch += 1;
                }
                if !(&ci.derivs[j] + &cj.derivs[i]).is_zero() {
                    rep.sibling_derivative_mismatch += 1;
                }
            }
        }
    }
    for c in &children {
        visit(c, remaining - 1, rep);
    }
}

/// Barycentric coordinates of `p` with respect to the corners of `home`.
pub(crate) fn barycentric(home: &[ExactPoint; 3], p: &ExactPoint) -> Result<[Rational64; 3]> {
    let e1 = home[1].sub(&home[0]);
    let e2 = home[2].sub(&home[0]);
    let d = p.sub(&home[0]);
    let det = e1.a * e2.b - e2.a * e1.b;
    if det.is_zero() {
        return Err(Error::InvalidParameter("degenerate home cell".into()));
    }
    let l1 = (d.a * e2.b - e2.a * d.b) / det;
    let l2 = (e1.a * d.b - d.a * e1.b) / det;
    Ok([Rational64::one() - l1 - l2, l1, l2])
}

/// All minimal-depth addresses `(path, slot)` of a gasket point of `home`,
/// sorted; the first one is canonical.
pub fn vertex_addresses(home: &[ExactPoint; 3], p: &ExactPoint, cap: usize) -> Result<Vec<(Vec<u8>, usize)>> {
    let lam = barycentric(home, p)?;
    if lam.iter().any(|l| l.is_negative()) {
        return Err(Error::OutsideCell(p.to_string()));
    }
    let mut frontier = vec![(Vec::new(), lam)];
    let half = Rational64::new(1, 2);
    let two = Rational64::from_integer(2);
    for _ in 0..=cap {
        let mut found: Vec<(Vec<u8>, usize)> = Vec::new();
        for (path, l) in &frontier {
            if let Some(slot) = l.iter().position(|x| x.is_one()) {
                found.push((path.clone(), slot));
            }
        }
        if !found.is_empty() {
            found.sort();
            return Ok(found);
        }
        let mut next = Vec::new();
        for (path, l) in &frontier {
            for i in 0..3 {
                if l[i] >= half {
                    let nl: [Rational64; 3] =
                        std::array::from_fn(|j| if j == i { two * l[j] - Rational64::one() } else { two * l[j] });
                    let mut np = path.clone();
                    np.push(i as u8 + 1);
                    next.push((np, nl));
                }
            }
        }
        if next.is_empty() {
            return Err(Error::OutsideCell(p.to_string()));
        }
        frontier = next;
    }
    Err(Error::DepthExceeded {
        depth: cap + 1,
        cap,
    })
}

/// `phi0` at a vertex of its home cell; `home[0]` is where `phi0 = 1`.
pub fn phi0_at_vertex(home: &[ExactPoint; 3], p: &ExactPoint) -> Result<Rational> {
    phi0_at_vertex_capped(home, p, DEFAULT_DEPTH_CAP)
}

pub fn phi0_at_vertex_capped(home: &[ExactPoint; 3], p: &ExactPoint, cap: usize) -> Result<Rational> {
    let addr = vertex_addresses(home, p, cap)?;
    let (path, slot) = &addr[0];
    let s = rotated_state(0, path, cap)?;
    Ok(s.values[*slot].clone())
}

/// Values of `phi0` at every corner of every sub-cell at exactly `depth`
/// levels below `home`; shared corners appear once per sub-cell.
pub fn phi0_grid(home: &[ExactPoint; 3], depth: usize) -> Result<Vec<(ExactPoint, Rational)>> {
    if depth > DEFAULT_DEPTH_CAP {
        return Err(Error::DepthExceeded {
            depth,
            cap: DEFAULT_DEPTH_CAP,
        });
    }
    let mut out = Vec::with_capacity(3 * 3usize.pow(depth as u32));
    grid(home, &SplineState::initial(0), depth, &mut out);
    Ok(out)
}

fn grid(cell: &[ExactPoint; 3], s: &SplineState, depth: usize, out: &mut Vec<(ExactPoint, Rational)>) {
    if depth == 0 {
        for i in 0..3 {
            out.push((cell[i], s.values[i].clone()));
        }
        return;
    }
    for t in 0..3 {
        let sub: [ExactPoint; 3] =
            std::array::from_fn(|j| if j == t { cell[t] } else { cell[t].midpoint(&cell[j]) });
        grid(&sub, &s.descend(t + 1), depth - 1, out);
    }
}

/// Formats a rational as `num/den`.
pub fn format_rational(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}
