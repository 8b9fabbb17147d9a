use std::io::{BufRead, Write};

use super::EdgeSet;
use crate::error::{Error, Result};
use crate::lattice::fmt17;

/// Writes `M,contains_voronoi,n_points`, its values, then `i,j` rows.
pub fn write_edges_csv<W: Write>(edges: &EdgeSet, mut out: W) -> Result<()> {
    writeln!(out, "M,contains_voronoi,n_points")?;
    writeln!(out, "{},{},{}", fmt17(edges.range_bound), edges.contains_voronoi, edges.n_points())?;
    writeln!(out, "i,j")?;
    for &(i, j) in edges.edges() {
        writeln!(out, "{i},{j}")?;
    }
    Ok(())
}

pub fn read_edges_csv<R: BufRead>(input: R) -> Result<EdgeSet> {
    let mut lines = input.lines();
    let mut next = |what: &str| -> Result<String> {
        lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")))?.map_err(Error::from)
    };
    if next("header")?.trim() != "M,contains_voronoi,n_points" {
        return Err(Error::Parse("bad edge file header".into()));
    }
    let meta = next("metadata")?;
    let f: Vec<&str> = meta.trim().split(',').collect();
    if f.len() != 3 {
        return Err(Error::Parse("metadata needs 3 fields".into()));
    }
    let bad = |s: &str| Error::Parse(format!("bad value `{s}`"));
    let m: f64 = f[0].parse().map_err(|_| bad(f[0]))?;
    let cv: bool = f[1].parse().map_err(|_| bad(f[1]))?;
    let n: usize = f[2].parse().map_err(|_| bad(f[2]))?;
    if next("column header")?.trim() != "i,j" {
        return Err(Error::Parse("expected `i,j`".into()));
    }
    let mut edges = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let (a, b) = t.split_once(',').ok_or_else(|| bad(t))?;
        edges.push((a.trim().parse().map_err(|_| bad(a))?, b.trim().parse().map_err(|_| bad(b))?));
    }
    EdgeSet::new(n, edges, m, cv)
}
