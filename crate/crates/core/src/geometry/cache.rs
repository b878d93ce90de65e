//! Plain-text graph cache.
//!
//! ```text
//! gasket-graph 1
//! level <k>
//! window <cells as +i,j;-i,j;...>
//! vertices <n>
//! <a> <b> <weight>          one line per vertex, rationals as num/den
//! cells <m>
//! <v0> <v1> <v2>            one line per k-cell: lower-left, lower-right, apex
//! adjacency
//! <neighbours of vertex i, space separated>
//! end
//! ```
//!
//! On load the adjacency and weights are recomputed from the cells and must
//! match the stored values.

use std::io::{BufRead, Write};

use num_rational::Rational64;

use super::{parse_rational, ExactPoint, GasketGraph, WindowSpec};
use crate::error::{Error, Result};

pub const CACHE_FORMAT: &str = "gasket-graph 1";

pub fn write_cache<W: Write>(graph: &GasketGraph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CACHE_FORMAT}")?;
    writeln!(out, "level {}", graph.level())?;
    writeln!(out, "window {}", graph.window())?;
    writeln!(out, "vertices {}", graph.len())?;
    for (i, p) in graph.vertices().iter().enumerate() {
        writeln!(out, "{} {} {}", p.a, p.b, graph.weight(i))?;
    }
    writeln!(out, "cells {}", graph.cells().len())?;
    for c in graph.cells() {
        writeln!(out, "{} {} {}", c[0], c[1], c[2])?;
    }
    writeln!(out, "adjacency")?;
    for i in 0..graph.len() {
        let nb: Vec<String> = graph.neighbors(i).iter().map(|j| j.to_string()).collect();
        writeln!(out, "{}", nb.join(" "))?;
    }
    writeln!(out, "end")
}

pub fn read_cache<R: BufRead>(input: R) -> Result<GasketGraph> {
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::Parse(e.to_string())),
            None => Err(Error::Parse("unexpected end of graph cache".into())),
        }
    };
    let header = next()?;
    if header.trim() != CACHE_FORMAT {
        return Err(Error::Parse(format!("unsupported cache header `{header}`")));
    }
    let level: u32 = keyed(&next()?, "level")?
        .parse()
        .map_err(|_| Error::Parse("bad level".into()))?;
    let window: WindowSpec = keyed(&next()?, "window")?.parse()?;
    let n: usize = keyed(&next()?, "vertices")?
        .parse()
        .map_err(|_| Error::Parse("bad vertex count".into()))?;
    let mut vertices = Vec::with_capacity(n);
    let mut weights: Vec<Rational64> = Vec::with_capacity(n);
    for _ in 0..n {
        let line = next()?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse(format!("bad vertex line `{line}`")));
        }
        vertices.push(ExactPoint::new(parse_rational(f[0])?, parse_rational(f[1])?));
        weights.push(parse_rational(f[2])?);
    }
    let m: usize = keyed(&next()?, "cells")?
        .parse()
        .map_err(|_| Error::Parse("bad cell count".into()))?;
    let mut cells = Vec::with_capacity(m);
    for _ in 0..m {
        let line = next()?;
        let ids: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad cell line `{line}`"))))
            .collect::<Result<_>>()?;
        if ids.len() != 3 {
            return Err(Error::Parse(format!("bad cell line `{line}`")));
        }
        cells.push([ids[0], ids[1], ids[2]]);
    }
    if next()?.trim() != "adjacency" {
        return Err(Error::Parse("missing adjacency section".into()));
    }
    let graph = GasketGraph::from_parts(level, window, vertices, cells)?;
    for i in 0..n {
        let line = next()?;
        let nb: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad adjacency line `{line}`"))))
            .collect::<Result<_>>()?;
        if nb != graph.neighbors(i) {
            return Err(Error::Parse(format!("adjacency of vertex {i} disagrees with the cells")));
        }
        if weights[i] != graph.weight(i) {
            return Err(Error::Parse(format!("weight of vertex {i} disagrees with the cells")));
        }
    }
    if next()?.trim() != "end" {
        return Err(Error::Parse("missing end marker".into()));
    }
    Ok(graph)
}

fn keyed<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .map(str::trim)
        .ok_or_else(|| Error::Parse(format!("expected `{key} ...`, got `{line}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_window;

    #[test]
    fn round_trip() {
        for w in [WindowSpec::unit(), WindowSpec::pair(), WindowSpec::dilated_pair(1)] {
            let g = build_window(&w, 3).unwrap();
            let mut buf = Vec::new();
            write_cache(&g, &mut buf).unwrap();
            let back = read_cache(buf.as_slice()).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn rejects_tampered_adjacency() {
        let g = build_window(&WindowSpec::unit(), 1).unwrap();
        let mut buf = Vec::new();
        write_cache(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let pos = text.find("adjacency\n").unwrap() + "adjacency\n".len();
        let mut bad = text.clone();
        bad.insert_str(pos, "0 ");
        assert!(read_cache(bad.as_bytes()).is_err());
        assert!(read_cache("gasket-graph 9\n".as_bytes()).is_err());
    }
}
