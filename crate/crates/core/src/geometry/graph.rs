use std::collections::HashMap;

use num_rational::Rational64;

use super::{Cell, Dilate, ExactPoint, Side, WindowSpec};
use crate::error::{Error, Result};

/// Default cap on the number of vertices `build_window` will allocate.
pub const DEFAULT_VERTEX_CAP: u64 = 5_000_000;

/// The level-`k` graph of a window: vertices of all `k`-cells, with two
/// vertices adjacent iff they share a `k`-cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GasketGraph {
    level: u32,
    window: WindowSpec,
    vertices: Vec<ExactPoint>,
    adjacency: Vec<Vec<usize>>,
    /// Number of window `k`-cells incident to each vertex (1 or 2).
    incidence: Vec<u8>,
    /// `k`-cells as vertex indices `[lower-left, lower-right, apex]`.
    cells: Vec<[usize; 3]>,
}

/// Builds the level-`k` graph of `window` with the default vertex cap.
pub fn build_window(window: &WindowSpec, k: u32) -> Result<GasketGraph> {
    build_window_capped(window, k, DEFAULT_VERTEX_CAP)
}

pub fn build_window_capped(window: &WindowSpec, k: u32, cap: u64) -> Result<GasketGraph> {
    let ncells = window.cells().len() as u64;
    let estimate = 3u64
        .checked_pow(k + 1)
        .and_then(|p| p.checked_mul(ncells))
        .map(|v| v / 2 + 2)
        .unwrap_or(u64::MAX);
    if k > 30 || estimate > cap {
        return Err(Error::LevelTooLarge {
            level: k,
            vertices: estimate,
            cap,
        });
    }

    // Integer coordinates scaled by 2^(k+1); a level-k cell has side 2.
    let scale = 1i64 << (k + 1);
    let mut corners: Vec<[(i64, i64); 3]> = Vec::with_capacity((ncells as usize) * 3usize.pow(k));
    for c in window.cells() {
        let (i, j) = (c.i as i64, c.j as i64);
        let base_a = (2 * i + j) << k;
        let base_b = j << k;
        let ll = match c.side {
            Side::Plus => (base_a, base_b),
            Side::Minus => (-base_a - scale, base_b),
        };
        subdivide(ll, scale, &mut corners);
    }

    let mut pts: Vec<(i64, i64)> = corners.iter().flatten().copied().collect();
    pts.sort_unstable();
    pts.dedup();
    let index: HashMap<(i64, i64), usize> = pts.iter().enumerate().map(|(n, p)| (*p, n)).collect();

    let n = pts.len();
    let mut adjacency = vec![Vec::with_capacity(4); n];
    let mut incidence = vec![0u8; n];
    let mut cells = Vec::with_capacity(corners.len());
    for tri in &corners {
        let ids = [index[&tri[0]], index[&tri[1]], index[&tri[2]]];
        for x in 0..3 {
            incidence[ids[x]] += 1;
            for y in 0..3 {
                if x != y {
                    adjacency[ids[x]].push(ids[y]);
                }
            }
        }
        cells.push(ids);
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
    }

    let vertices = pts
        .iter()
        .map(|&(a, b)| ExactPoint::new(Rational64::new(a, scale), Rational64::new(b, scale)))
        .collect();
    Ok(GasketGraph {
        level: k,
        window: window.clone(),
        vertices,
        adjacency,
        incidence,
        cells,
    })
}

fn subdivide(ll: (i64, i64), side: i64, out: &mut Vec<[(i64, i64); 3]>) {
    if side == 2 {
        out.push([ll, (ll.0 + 2, ll.1), (ll.0 + 1, ll.1 + 1)]);
        return;
    }
    let h = side / 2;
    subdivide(ll, h, out);
    subdivide((ll.0 + h, ll.1), h, out);
    subdivide((ll.0 + h / 2, ll.1 + h / 2), h, out);
}

impl GasketGraph {
    pub(crate) fn from_parts(
        level: u32,
        window: WindowSpec,
        vertices: Vec<ExactPoint>,
        cells: Vec<[usize; 3]>,
    ) -> Result<Self> {
        let n = vertices.len();
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("vertices are not strictly sorted".into()));
        }
        let mut adjacency = vec![Vec::with_capacity(4); n];
        let mut incidence = vec![0u8; n];
        for ids in &cells {
            for x in 0..3 {
                if ids[x] >= n {
                    return Err(Error::Parse(format!("cell refers to vertex {}", ids[x])));
                }
                incidence[ids[x]] += 1;
                for y in 0..3 {
                    if x != y {
                        adjacency[ids[x]].push(ids[y]);
                    }
                }
            }
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        Ok(Self {
            level,
            window,
            vertices,
            adjacency,
            incidence,
            cells,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[ExactPoint] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &ExactPoint {
        &self.vertices[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Rim vertices touch the part of the gasket outside the window.
    pub fn is_rim(&self, i: usize) -> bool {
        self.incidence[i] == 1
    }

    pub fn rim(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_rim(i)).collect()
    }

    pub fn incident_cells(&self, i: usize) -> u8 {
        self.incidence[i]
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> Cell {
        Cell::new(self.level as i32, self.vertices[self.cells[c][0]])
    }

    pub fn edge_count(&self) -> usize {
        self.cells.len() * 3
    }

    /// Index of `p`, found by binary search in the sorted vertex list.
    pub fn index_of(&self, p: &ExactPoint) -> Option<usize> {
        self.vertices.binary_search(p).ok()
    }

    pub fn require_index(&self, p: &ExactPoint) -> Result<usize> {
        self.index_of(p)
            .ok_or_else(|| Error::VertexNotInGraph(p.to_string()))
    }

    /// `w(y) = 3^-k / 3` times the number of incident `k`-cells.
    pub fn weight(&self, i: usize) -> Rational64 {
        Rational64::new(self.incidence[i] as i64, 3i64.pow(self.level + 1))
    }

    pub fn weights(&self) -> Vec<Rational64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        let unit = 1.0 / 3f64.powi(self.level as i32 + 1);
        self.incidence.iter().map(|&c| c as f64 * unit).collect()
    }

    /// Exact total measure; each window 0-cell contributes 1.
    pub fn total_measure(&self) -> Rational64 {
        let total: i64 = self.incidence.iter().map(|&c| c as i64).sum();
        Rational64::new(total, 3i64.pow(self.level + 1))
    }

    /// Vertices at squared distance strictly less than `r2` from `center`.
    pub fn ball(&self, center: &ExactPoint, r2: Rational64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.vertices[i].dist2(center) < r2)
            .collect()
    }

    /// The same graph scaled by `2^n`: level `k - n` on the window `2^n W`.
    pub fn dilate(&self, n: i32) -> Result<GasketGraph> {
        let level = self.level as i64 - n as i64;
        if level < 0 {
            return Err(Error::InvalidParameter(format!(
                "dilating a level-{} graph by 2^{n} leaves no integral level",
                self.level
            )));
        }
        let window = self.window.dilate(n)?;
        Ok(GasketGraph {
            level: level as u32,
            window,
            vertices: self.vertices.iter().map(|p| p.dilate(n)).collect(),
            adjacency: self.adjacency.clone(),
            incidence: self.incidence.clone(),
            cells: self.cells.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CellIndex;
    use std::collections::BTreeSet;

    fn unit(k: u32) -> GasketGraph {
        build_window(&WindowSpec::unit(), k).unwrap()
    }

    /// Independent construction: subdivide cells as exact points and
    /// collect distinct vertices and edges.
    fn brute(window: &WindowSpec, k: u32) -> (BTreeSet<ExactPoint>, BTreeSet<(ExactPoint, ExactPoint)>, usize) {
        let mut cells: Vec<Cell> = window.cells().iter().map(|c| c.cell()).collect();
        for _ in 0..k {
            cells = cells.iter().flat_map(|c| c.children()).collect();
        }
        let mut vs = BTreeSet::new();
        let mut es = BTreeSet::new();
        for c in &cells {
            for i in 0..3 {
                vs.insert(c.vertices[i]);
                for j in 0..3 {
                    if i < j {
                        let (x, y) = (c.vertices[i], c.vertices[j]);
                        es.insert(if x < y { (x, y) } else { (y, x) });
                    }
                }
            }
        }
        (vs, es, cells.len())
    }

    #[test]
    fn base_triangle() {
        let g = unit(0);
        assert_eq!(g.len(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.cells().len(), 1);
        assert!((0..3).all(|i| g.is_rim(i) && g.degree(i) == 2));
    }

    #[test]
    fn level_two_unit_cell_matches_brute_force() {
        let g = unit(2);
        let (vs, es, nc) = brute(&WindowSpec::unit(), 2);
        assert_eq!(g.len(), 15);
        assert_eq!(vs.len(), 15);
        assert_eq!(nc, 9);
        assert_eq!(g.cells().len(), 9);
        let gv: BTreeSet<ExactPoint> = g.vertices().iter().copied().collect();
        assert_eq!(gv, vs);
        let mut ge = BTreeSet::new();
        for i in 0..g.len() {
            for &j in g.neighbors(i) {
                if i < j {
                    ge.insert((g.vertices()[i], g.vertices()[j]));
                }
            }
        }
        assert_eq!(ge, es);
    }

    #[test]
    fn pair_level_one_shares_origin() {
        let g = build_window(&WindowSpec::pair(), 1).unwrap();
        assert_eq!(g.len(), 11);
        let o = g.index_of(&ExactPoint::origin()).unwrap();
        assert_eq!(g.degree(o), 4);
        assert!(!g.is_rim(o));
    }

    #[test]
    fn counting_and_degree_laws() {
        for k in 0..=8 {
            let g = unit(k);
            assert_eq!(g.len() as u64, (3u64.pow(k + 1) + 3) / 2);
            assert_eq!(g.cells().len() as u64, 3u64.pow(k));
            for i in 0..g.len() {
                let want = if g.is_rim(i) { 2 } else { 4 };
                assert_eq!(g.degree(i), want);
            }
            assert_eq!(g.rim().len(), 3);
        }
        for k in 0..=6 {
            let g = build_window(&WindowSpec::dilated_pair(1), k).unwrap();
            for i in 0..g.len() {
                assert_eq!(g.degree(i), if g.is_rim(i) { 2 } else { 4 });
            }
        }
    }

    #[test]
    fn weights() {
        let g = unit(3);
        let inner = g.index_of(&ExactPoint::from_ints((1, 2), (0, 1))).unwrap();
        assert_eq!(g.weight(inner), Rational64::new(2, 81));
        for i in g.rim() {
            assert_eq!(g.weight(i), Rational64::new(1, 81));
        }
        for k in 0..=6 {
            let g = unit(k);
            let s: Rational64 = g.weights().into_iter().sum();
            assert_eq!(s, Rational64::from_integer(1));
            assert_eq!(g.total_measure(), Rational64::from_integer(1));
        }
        let g = build_window(&WindowSpec::dilated_pair(1), 3).unwrap();
        assert_eq!(g.total_measure(), Rational64::from_integer(6));
    }

    #[test]
    fn ball_membership() {
        let g = unit(2);
        assert!(g.ball(&ExactPoint::origin(), Rational64::from_integer(0)).is_empty());
        assert_eq!(g.ball(&ExactPoint::p1(), Rational64::new(17, 4)).len(), g.len());
        let r2 = Rational64::new(1, 4);
        let got = g.ball(&ExactPoint::p1(), r2);
        let want: Vec<usize> = (0..g.len())
            .filter(|&i| {
                let (x, y) = g.vertex(i).to_f64();
                (x * x + y * y).sqrt() < 0.5 - 1e-12
            })
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn dilation_covariance() {
        for k in 0..5 {
            let fine = build_window(&WindowSpec::unit(), k + 1).unwrap();
            let doubled = WindowSpec::unit().dilate(1).unwrap();
            let coarse = build_window(&doubled, k).unwrap();
            let d = fine.dilate(1).unwrap();
            assert_eq!(d.vertices(), coarse.vertices());
            for i in 0..d.len() {
                assert_eq!(d.neighbors(i), coarse.neighbors(i));
                assert_eq!(d.is_rim(i), coarse.is_rim(i));
                assert_eq!(d.weight(i), fine.weight(i) * Rational64::from_integer(3));
            }
            let back = coarse.dilate(-1).unwrap();
            assert_eq!(back.vertices(), fine.vertices());
        }
    }

    #[test]
    fn repeated_builds_identical() {
        let w = WindowSpec::new(vec![CellIndex::plus(0, 0), CellIndex::minus(0, 0), CellIndex::plus(1, 0)]).unwrap();
        assert_eq!(build_window(&w, 4).unwrap(), build_window(&w, 4).unwrap());
    }

    #[test]
    fn vertex_cap() {
        assert!(matches!(
            build_window_capped(&WindowSpec::unit(), 12, 1000),
            Err(Error::LevelTooLarge { .. })
        ));
    }

    #[test]
    fn vertices_have_expected_denominators() {
        let g = unit(4);
        for p in g.vertices() {
            assert!(p.level_hint().unwrap() <= 4);
        }
    }
}
