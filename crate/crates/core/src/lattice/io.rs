//! Point-cloud CSV: a metadata header line, its values, then one point per row.
//!
//! ```text
//! d,topology,r,R,seed,lower,upper,generator
//! 2,torus,1.0000000000000000e0,1.0883883476483184e0,42,0;0,10;10,random_parking
//! x1,x2
//! 3.1415926535897931e0,2.7182818284590451e0
//! ```
//! Reals are written with 17 significant digits, which round-trips `f64` exactly.

use std::io::{BufRead, Write};

use super::{Generator, Point, StochasticLattice, Topology, Window, MAX_DIM};
use crate::error::{Error, Result};

pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt17(x)).collect::<Vec<_>>().join(";")
}

fn generator_tag(g: &Generator) -> String {
    match g {
        Generator::RandomParking { diameter } => format!("random_parking:{}", fmt17(*diameter)),
        Generator::Cubic { spacing } => format!("cubic:{}", fmt17(*spacing)),
        Generator::JitteredCubic { spacing, jitter } => {
            format!("jittered_cubic:{};{}", fmt17(*spacing), fmt17(*jitter))
        }
        Generator::Transformed => "transformed".into(),
        Generator::Loaded => "loaded".into(),
    }
}

pub fn write_points_csv<W: Write>(lattice: &StochasticLattice, mut out: W) -> Result<()> {
    let w = &lattice.window;
    let d = w.dim;
    writeln!(out, "d,topology,r,R,seed,lower,upper,generator")?;
    let topo = match w.topology {
        Topology::Box => "box",
        Topology::Torus => "torus",
    };
    writeln!(
        out,
        "{d},{topo},{},{},{},{},{},{}",
        fmt17(lattice.min_separation),
        fmt17(lattice.covering_radius),
        lattice.seed,
        join(&w.lower[..d]),
        join(&w.upper[..d]),
        generator_tag(&lattice.generator)
    )?;
    let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    writeln!(out, "{}", names.join(","))?;
    for p in &lattice.points {
        let row: Vec<String> = p[..d].iter().map(|&x| fmt17(x)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(';').map(parse_f64).collect()
}

/// Reads a point CSV. Cubic grid bookkeeping is rebuilt for unjittered cubic files
/// written by this crate.
pub fn read_points_csv<R: BufRead>(input: R) -> Result<StochasticLattice> {
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        lines.next().ok_or_else(|| Error::Parse("unexpected end of point file".into()))?.map_err(Error::from)
    };
    let header = next()?;
    if !header.starts_with("d,topology,r,R,seed") {
        return Err(Error::Parse(format!("bad header `{header}`")));
    }
    let meta = next()?;
    let f: Vec<&str> = meta.split(',').collect();
    if f.len() < 8 {
        return Err(Error::Parse("metadata line needs 8 fields".into()));
    }
    let d: usize = f[0].parse().map_err(|_| Error::Parse(format!("bad dimension `{}`", f[0])))?;
    let topology = match f[1] {
        "box" => Topology::Box,
        "torus" => Topology::Torus,
        t => return Err(Error::Parse(format!("unknown topology `{t}`"))),
    };
    let r = parse_f64(f[2])?;
    let big_r = parse_f64(f[3])?;
    let seed: u64 = f[4].parse().map_err(|_| Error::Parse(format!("bad seed `{}`", f[4])))?;
    let window = Window::new(d, &parse_list(f[5])?, &parse_list(f[6])?, topology)?;
    let generator = match f[7].split_once(':') {
        Some(("random_parking", v)) => Generator::RandomParking { diameter: parse_f64(v)? },
        Some(("cubic", v)) => Generator::Cubic { spacing: parse_f64(v)? },
        Some(("jittered_cubic", v)) => {
            let xs = parse_list(v)?;
            Generator::JitteredCubic { spacing: xs[0], jitter: *xs.get(1).unwrap_or(&0.0) }
        }
        _ if f[7] == "transformed" => Generator::Transformed,
        _ => Generator::Loaded,
    };
    next()?;
    let mut points = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let xs: Vec<f64> = line.split(',').map(parse_f64).collect::<Result<_>>()?;
        if xs.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: xs.len() });
        }
        let mut p: Point = [0.0; MAX_DIM];
        p[..d].copy_from_slice(&xs);
        points.push(p);
    }
    let grid = match &generator {
        Generator::Cubic { spacing } => {
            let mut counts = [1; MAX_DIM];
            for (i, c) in counts.iter_mut().enumerate().take(d) {
                *c = (window.side(i) / spacing + 1e-9).floor() as usize;
            }
            let g = super::CubicGrid { spacing: *spacing, counts };
            (g.counts.iter().product::<usize>() == points.len()).then_some(g)
        }
        _ => None,
    };
    Ok(StochasticLattice { window, points, min_separation: r, covering_radius: big_r, seed, generator, grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{generate_cubic, generate_random_parking};

    #[test]
    fn roundtrip_is_bit_exact() {
        let w = Window::cube(2, 6.0, Topology::Torus).unwrap();
        let l = generate_random_parking(&w, 1.0, 17).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&l, &mut buf).unwrap();
        let back = read_points_csv(buf.as_slice()).unwrap();
        assert_eq!(back, l);
        let c = generate_cubic(&Window::cube(3, 3.0, Topology::Box).unwrap(), 1.0, 0.0, 0).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&c, &mut buf).unwrap();
        assert_eq!(read_points_csv(buf.as_slice()).unwrap(), c);
    }
}
