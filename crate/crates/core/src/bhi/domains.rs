use std::collections::BTreeMap;

use num_rational::Rational64;
use rand::Rng;

use super::config::{DomainFamily, Resolved};
use crate::error::{Error, Result};
use crate::geometry::{pow2, Cell, CellIndex, Dilate, ExactPoint, GasketGraph};
use crate::mc::{splitmix64, SeedPlan};

/// The `n`-cells of a graph's window and, for every vertex, the ones
/// containing it.
#[derive(Clone, Debug)]
pub struct CellCover {
    level: i32,
    cells: Vec<Cell>,
    of_vertex: Vec<Vec<u32>>,
}

/// The `n`-cell (from the lattice anchored at the origin) containing the
/// sub-cell with lower-left corner `ll` and side `side`.
fn ancestor(ll: &ExactPoint, side: Rational64, n: i32) -> Cell {
    let s = pow2(-n);
    let c = ExactPoint::new(ll.a + side / 2, ll.b + side / 6);
    let j = (c.b * 2 / s).floor();
    let i = ((c.a - c.b) / s).floor();
    Cell::new(n, ExactPoint::new(i * s + j * s / 2, j * s / 2))
}

impl CellCover {
    pub fn new(graph: &GasketGraph, n: i32) -> Result<Self> {
        if n > graph.level() as i32 {
            return Err(Error::InvalidParameter(format!(
                "cover level {n} is finer than the graph level {}",
                graph.level()
            )));
        }
        let side = pow2(-(graph.level() as i32));
        let mut index: BTreeMap<Cell, u32> = BTreeMap::new();
        let anc: Vec<Cell> = graph
            .cells()
            .iter()
            .map(|c| ancestor(graph.vertex(c[0]), side, n))
            .collect();
        for a in &anc {
            index.entry(*a).or_insert(0);
        }
        for (i, v) in index.values_mut().enumerate() {
            *v = i as u32;
        }
        let mut of_vertex = vec![Vec::new(); graph.len()];
        for (c, a) in graph.cells().iter().zip(&anc) {
            let id = index[a];
            for &v in c {
                if !of_vertex[v].contains(&id) {
                    of_vertex[v].push(id);
                }
            }
        }
        for l in &mut of_vertex {
            l.sort_unstable();
        }
        Ok(Self {
            level: n,
            cells: index.into_keys().collect(),
            of_vertex,
        })
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn containing(&self, vertex: usize) -> &[u32] {
        &self.of_vertex[vertex]
    }

    /// Vertices all of whose containing cells are chosen.
    pub fn interior(&self, chosen: &[bool]) -> Vec<bool> {
        self.of_vertex
            .iter()
            .map(|l| !l.is_empty() && l.iter().all(|&c| chosen[c as usize]))
            .collect()
    }
}

/// Draws instances of a domain family inside `2^-m B` on one graph. The
/// random choices depend on the instance and on positions relative to
/// `2^-m B` only, so different levels and scales see the same shapes.
pub struct DomainSampler<'g> {
    graph: &'g GasketGraph,
    family: DomainFamily,
    seed: u64,
    m: i32,
    cover: CellCover,
    /// For each cover cell, its position among the sorted cells of `B`
    /// (after rescaling by `2^m`), if it lies in `2^-m B`.
    in_b: Vec<Option<usize>>,
    b_cell_count: usize,
    b_interior: Vec<bool>,
    removed: Option<Cell>,
}

impl<'g> DomainSampler<'g> {
    pub fn new(graph: &'g GasketGraph, geo: &Resolved, family: &DomainFamily, seed: u64, m: i32) -> Result<Self> {
        let rel = match family {
            DomainFamily::RandomCellUnion { level, .. } => *level as i32,
            _ => 0,
        };
        let cover = CellCover::new(graph, rel + m)?;
        let b_cells = geo.b.subcells(rel as u32);
        let in_b: Vec<Option<usize>> = cover
            .cells()
            .iter()
            .map(|c| b_cells.binary_search(&c.dilate(m)).ok())
            .collect();
        let b_interior = if rel == 0 {
            let chosen: Vec<bool> = in_b.iter().map(Option::is_some).collect();
            cover.interior(&chosen)
        } else {
            let zero = CellCover::new(graph, m)?;
            let b0 = geo.b.subcells(0);
            let chosen: Vec<bool> = zero.cells().iter().map(|c| b0.binary_search(&c.dilate(m)).is_ok()).collect();
            zero.interior(&chosen)
        };
        let removed = match family {
            DomainFamily::Slit { base, path } => {
                let base: CellIndex = base.parse()?;
                if !geo.b.cells().contains(&base) {
                    return Err(Error::Config(format!("slit base {base} is not a cell of B")));
                }
                let mut c = base.cell();
                for d in path.chars() {
                    let i = d.to_digit(10).filter(|d| (1..=3).contains(d)).ok_or_else(|| {
                        Error::Config(format!("slit path `{path}` must use the digits 1, 2, 3"))
                    })?;
                    c = c.child(i as usize - 1);
                }
                Some(c.dilate(-m))
            }
            _ => None,
        };
        Ok(Self {
            graph,
            family: family.clone(),
            seed,
            m,
            cover,
            in_b,
            b_cell_count: b_cells.len(),
            b_interior,
            removed,
        })
    }

    /// Non-rim vertices of instance `instance`, sorted.
    pub fn domain(&self, instance: u64) -> Vec<usize> {
        let plan = SeedPlan::new(self.seed, 0);
        let keep: Vec<bool> = match &self.family {
            DomainFamily::RandomCellUnion { density, .. } => {
                let mut rng = plan.rng(instance, 0);
                let mask: Vec<bool> = (0..self.b_cell_count).map(|_| rng.random::<f64>() < *density).collect();
                let chosen: Vec<bool> = self.in_b.iter().map(|i| i.is_some_and(|i| mask[i])).collect();
                self.cover.interior(&chosen)
            }
            DomainFamily::RandomVertexSubset { p } => (0..self.graph.len())
                .map(|v| {
                    self.b_interior[v] && {
                        let key = point_key(&self.graph.vertex(v).dilate(self.m));
                        plan.rng(instance, key).random::<f64>() < *p
                    }
                })
                .collect(),
            DomainFamily::Slit { .. } => {
                let cut = self.removed.expect("slit cell");
                (0..self.graph.len())
                    .map(|v| self.b_interior[v] && !cut.contains(self.graph.vertex(v)))
                    .collect()
            }
        };
        (0..self.graph.len())
            .filter(|&v| keep[v] && !self.graph.is_rim(v))
            .collect()
    }
}

/// Stable key of an exact point.
fn point_key(p: &ExactPoint) -> u64 {
    [p.a.numer(), p.a.denom(), p.b.numer(), p.b.denom()]
        .iter()
        .fold(0x5EED_u64, |h, &x| splitmix64(h ^ (*x as u64)))
}

/// Non-rim vertices of `2^-m cell` outside the closed `2^-m B`.
pub fn target_vertices(graph: &GasketGraph, geo: &Resolved, cell: &Cell, m: i32) -> Result<Vec<usize>> {
    let cell = cell.dilate(-m);
    let b: Vec<Cell> = geo.b.cells().iter().map(|c| c.cell().dilate(-m)).collect();
    let out: Vec<usize> = (0..graph.len())
        .filter(|&v| {
            let p = graph.vertex(v);
            !graph.is_rim(v) && cell.contains(p) && !b.iter().any(|c| c.contains(p))
        })
        .collect();
    if out.is_empty() {
        return Err(Error::Config(format!(
            "target cell with corner {} has no vertex outside B at level {}",
            cell.vertices[0],
            graph.level()
        )));
    }
    Ok(out)
}

/// Vertices within the open ball `B(x0, r 2^-m)`, `r^2 = r2`.
pub fn ball_mask(graph: &GasketGraph, x0: &ExactPoint, r2: Rational64, m: i32) -> Vec<bool> {
    let r2 = r2 * pow2(-m) * pow2(-m);
    graph.vertices().iter().map(|p| p.dist2(x0) < r2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bhi::config::ExperimentConfig;
    use crate::geometry::{build_window, WindowSpec};

    fn geo() -> Resolved {
        ExperimentConfig::default().resolve().unwrap()
    }

    #[test]
    fn cover_matches_brute_force_containment() {
        let g = build_window(&WindowSpec::dilated_pair(1), 4).unwrap();
        for n in [-1, 0, 2, 4] {
            let cover = CellCover::new(&g, n).unwrap();
            for v in 0..g.len() {
                let want: Vec<Cell> = cover.cells().iter().filter(|c| c.contains(g.vertex(v))).copied().collect();
                let got: Vec<Cell> = cover.containing(v).iter().map(|&i| cover.cells()[i as usize]).collect();
                // Window cells containing the point, except those outside the window.
                assert!(want.iter().all(|c| got.contains(c)) && got.iter().all(|c| want.contains(c)), "n={n} v={v}");
                assert!(!got.is_empty() && got.len() <= 2);
            }
        }
    }

    #[test]
    fn cell_union_is_level_independent() {
        let geo = geo();
        let fam = DomainFamily::RandomCellUnion { level: 2, density: 0.6 };
        let g3 = build_window(&geo.window, 3).unwrap();
        let g4 = build_window(&geo.window, 4).unwrap();
        let a = DomainSampler::new(&g3, &geo, &fam, 7, 0).unwrap();
        let b = DomainSampler::new(&g4, &geo, &fam, 7, 0).unwrap();
        for inst in 0..10 {
            let da: Vec<ExactPoint> = a.domain(inst).iter().map(|&v| *g3.vertex(v)).collect();
            let db: Vec<ExactPoint> = b.domain(inst).iter().map(|&v| *g4.vertex(v)).collect();
            // Level-3 points of D stay in D at level 4.
            assert!(da.iter().all(|p| db.contains(p)));
            assert!(db.iter().all(|p| Cell::new(0, ExactPoint::origin()).contains(p) || Cell::new(0, ExactPoint::origin()).mirror().contains(p)));
        }
    }

    #[test]
    fn full_density_gives_the_interior_of_b() {
        let geo = geo();
        let g = build_window(&geo.window, 3).unwrap();
        let d = DomainSampler::new(&g, &geo, &DomainFamily::RandomCellUnion { level: 1, density: 1.0 }, 1, 0)
            .unwrap()
            .domain(0);
        let corners: Vec<ExactPoint> = ["1,0", "1/2,1/2", "-1,0", "-1/2,1/2"].iter().map(|s| s.parse().unwrap()).collect();
        let inside: Vec<usize> = (0..g.len())
            .filter(|&v| {
                let p = g.vertex(v);
                (Cell::unit().contains(p) || Cell::unit().mirror().contains(p)) && !corners.contains(p)
            })
            .collect();
        assert_eq!(d, inside);
        assert!(d.contains(&g.require_index(&ExactPoint::origin()).unwrap()));
    }

    #[test]
    fn scaled_domains_are_dilates() {
        let geo = geo();
        let fam = DomainFamily::RandomCellUnion { level: 2, density: 0.5 };
        let g4 = build_window(&geo.window, 4).unwrap();
        let g5 = build_window(&geo.window, 5).unwrap();
        let a = DomainSampler::new(&g4, &geo, &fam, 3, 1).unwrap();
        let b = DomainSampler::new(&g5, &geo, &fam, 3, 2).unwrap();
        for inst in 0..5 {
            let da: Vec<ExactPoint> = a.domain(inst).iter().map(|&v| g4.vertex(v).dilate(1)).collect();
            let mut db: Vec<ExactPoint> = b.domain(inst).iter().map(|&v| g5.vertex(v).dilate(2)).collect();
            let mut da = da;
            da.sort();
            db.sort();
            assert_eq!(da, db);
        }
    }

    #[test]
    fn vertex_subset_and_slit() {
        let geo = geo();
        let g = build_window(&geo.window, 3).unwrap();
        let all = DomainSampler::new(&g, &geo, &DomainFamily::RandomVertexSubset { p: 1.0 }, 1, 0).unwrap().domain(0);
        let half = DomainSampler::new(&g, &geo, &DomainFamily::RandomVertexSubset { p: 0.5 }, 1, 0).unwrap().domain(0);
        assert!(half.len() < all.len() && half.iter().all(|v| all.contains(v)));
        let slit = DomainFamily::Slit {
            base: "+0,0".into(),
            path: "3".into(),
        };
        let s = DomainSampler::new(&g, &geo, &slit, 1, 0).unwrap().domain(0);
        let top = Cell::unit().child(2);
        assert_eq!(s.len(), all.iter().filter(|&&v| !top.contains(g.vertex(v))).count());
    }

    #[test]
    fn targets_avoid_b() {
        let geo = geo();
        let g = build_window(&geo.window, 3).unwrap();
        for m in [0, 1] {
            let t = target_vertices(&g, &geo, &geo.targets[0], m).unwrap();
            let corner = ExactPoint::new(pow2(-m), Rational64::from_integer(0));
            assert!(!t.iter().any(|&v| *g.vertex(v) == corner));
            assert_eq!(t.len(), (3usize.pow(3 - m as u32) + 3) / 2 - 1);
        }
    }
}
