//! Incremental Bowyer–Watson Delaunay triangulation in the plane.
//!
//! Orientation and in-circle tests use adaptive exact predicates. A point
//! exactly on a circumcircle does not invalidate the triangle, which resolves
//! cocircular configurations deterministically by insertion order.

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug)]
struct Tri {
    /// Counter-clockwise vertices.
    v: [usize; 3],
    /// `n[k]` is the triangle across the edge opposite `v[k]`.
    n: [usize; 3],
    alive: bool,
}

/// A Delaunay triangulation of `points`, with three far-away auxiliary vertices
/// (indices `n..n+3`) enclosing everything.
pub struct Triangulation {
    coords: Vec<[f64; 2]>,
    tris: Vec<Tri>,
    n_real: usize,
}

fn c(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

impl Triangulation {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        let n = points.len();
        if n < 3 {
            return Err(Error::Degenerate(format!("need at least 3 points, got {n}")));
        }
        let (a, b) = (points[0], points.iter().copied().find(|p| *p != points[0]));
        let b = b.ok_or_else(|| Error::Degenerate("all points coincide".into()))?;
        if points.iter().all(|p| orient2d(c(a), c(b), c(*p)) == 0.0) {
            return Err(Error::Degenerate("all points are collinear".into()));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
        let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let big = 1e5 * span;
        let mut coords = points.to_vec();
        coords.push([mid[0] - 2.0 * big, mid[1] - big]);
        coords.push([mid[0] + 2.0 * big, mid[1] - big]);
        coords.push([mid[0], mid[1] + 2.0 * big]);
        let mut t = Self { coords, tris: vec![Tri { v: [n, n + 1, n + 2], n: [NONE; 3], alive: true }], n_real: n };
        let order = spatial_order(points, lo, span);
        let mut last = 0;
        for &i in &order {
            last = t.insert(i, last)?;
        }
        Ok(t)
    }

    fn orient(&self, a: usize, b: usize, p: usize) -> f64 {
        orient2d(c(self.coords[a]), c(self.coords[b]), c(self.coords[p]))
    }

    fn in_circle(&self, t: usize, p: usize) -> bool {
        let v = self.tris[t].v;
        incircle(c(self.coords[v[0]]), c(self.coords[v[1]]), c(self.coords[v[2]]), c(self.coords[p])) > 0.0
    }

    fn locate(&self, p: usize, start: usize) -> usize {
        let mut t = start;
        let limit = 4 * self.tris.len() + 16;
        'walk: for _ in 0..limit {
            let tri = self.tris[t];
            for k in 0..3 {
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if self.orient(a, b, p) < 0.0 && tri.n[k] != NONE {
                    t = tri.n[k];
                    continue 'walk;
                }
            }
            return t;
        }
        // Fallback scan; the visibility walk terminates on Delaunay meshes.
        (0..self.tris.len())
            .find(|&t| {
                let tri = self.tris[t];
                tri.alive && (0..3).all(|k| self.orient(tri.v[(k + 1) % 3], tri.v[(k + 2) % 3], p) >= 0.0)
            })
            .expect("point outside the enclosing triangle")
    }

    fn insert(&mut self, p: usize, hint: usize) -> Result<usize> {
        let start = if self.tris[hint].alive { hint } else { self.tris.iter().rposition(|t| t.alive).unwrap() };
        let t0 = self.locate(p, start);
        if self.tris[t0].v.iter().any(|&v| self.coords[v] == self.coords[p]) {
            return Err(Error::Degenerate(format!("duplicate point {p}")));
        }
        let mut bad = vec![t0];
        let mut is_bad = std::collections::HashSet::from([t0]);
        let mut boundary: Vec<(usize, usize, usize, usize)> = Vec::new(); // (a, b, outer, inner)
        let mut stack = vec![t0];
        while let Some(t) = stack.pop() {
            let tri = self.tris[t];
            for k in 0..3 {
                let nb = tri.n[k];
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if nb != NONE && !is_bad.contains(&nb) && self.in_circle(nb, p) {
                    is_bad.insert(nb);
                    bad.push(nb);
                    stack.push(nb);
                } else if nb == NONE || !is_bad.contains(&nb) {
                    boundary.push((a, b, nb, t));
                }
            }
        }
        // Edges queued before their outer triangle turned bad are interior.
        boundary.retain(|&(_, _, nb, _)| nb == NONE || !is_bad.contains(&nb));
        for &t in &bad {
            self.tris[t].alive = false;
        }
        let first = self.tris.len();
        let mut by_start = std::collections::HashMap::with_capacity(boundary.len());
        for (idx, &(a, b, nb, inner)) in boundary.iter().enumerate() {
            let id = first + idx;
            self.tris.push(Tri { v: [a, b, p], n: [NONE, NONE, nb], alive: true });
            by_start.insert(a, id);
            if nb != NONE {
                let outer = &mut self.tris[nb];
                for slot in outer.n.iter_mut() {
                    if *slot == inner {
                        *slot = id;
                    }
                }
            }
        }
        for idx in 0..boundary.len() {
            let id = first + idx;
            let (_, b, _, _) = boundary[idx];
            // Edge (b, p) is shared with the new triangle starting at b.
            let next = *by_start.get(&b).ok_or_else(|| Error::Degenerate("cavity is not a simple polygon".into()))?;
            self.tris[id].n[0] = next;
            self.tris[next].n[1] = id;
        }
        Ok(first)
    }

    fn is_real(&self, v: usize) -> bool {
        v < self.n_real
    }

    /// Live triangles with only real vertices.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        self.tris.iter().filter(|t| t.alive && t.v.iter().all(|&v| self.is_real(v))).map(|t| t.v).collect()
    }

    fn circumcenter(&self, t: usize) -> [f64; 2] {
        let [a, b, cc] = self.tris[t].v.map(|v| self.coords[v]);
        let (bx, by) = (b[0] - a[0], b[1] - a[1]);
        let (cx, cy) = (cc[0] - a[0], cc[1] - a[1]);
        let d = 2.0 * (bx * cy - by * cx);
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
    }

    /// Unordered pairs of real vertices whose Voronoi cells share an edge of
    /// positive length: Delaunay edges whose two adjacent circumcentres differ,
    /// plus hull edges (their dual is a ray).
    pub fn voronoi_pairs(&self, rel_tol: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (t, tri) in self.tris.iter().enumerate() {
            if !tri.alive {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if !self.is_real(a) || !self.is_real(b) {
                    continue;
                }
                let nb = tri.n[k];
                if nb != NONE && nb < t && self.tris[nb].alive {
                    continue; // handled from the other side
                }
                let real = |x: usize| self.tris[x].v.iter().all(|&v| self.is_real(v));
                let keep = if nb == NONE || !real(t) || !real(nb) {
                    true
                } else {
                    let (c1, c2) = (self.circumcenter(t), self.circumcenter(nb));
                    let len = ((c1[0] - c2[0]).powi(2) + (c1[1] - c2[1]).powi(2)).sqrt();
                    let pa = self.coords[a];
                    let pb = self.coords[b];
                    let scale = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
                    len > rel_tol * scale
                };
                if keep {
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Row-serpentine bin order keeps consecutive insertions close together.
fn spatial_order(points: &[[f64; 2]], lo: [f64; 2], span: f64) -> Vec<usize> {
    let side = ((points.len() as f64).sqrt().ceil() as usize).max(1);
    let h = span / side as f64 * (1.0 + 1e-9);
    let key = |p: &[f64; 2]| {
        let gx = (((p[0] - lo[0]) / h) as usize).min(side - 1);
        let gy = (((p[1] - lo[1]) / h) as usize).min(side - 1);
        let gx = if gy.is_multiple_of(2) { gx } else { side - 1 - gx };
        gy * side + gx
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (key(&points[i]), i));
    order
}
