//! Directed edge sets over lattice indices: Voronoi neighbours (d = 2), k-NN
//! supersets (any d), forward differences on cubic lattices, and graph paths.

mod delaunay;
mod io;

pub use delaunay::Triangulation;
pub use io::{read_edges_csv, write_edges_csv};

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::lattice::{norm_sq, Point, StochasticLattice, MAX_DIM};
use crate::par;
use crate::spatial::BinGrid;

/// Relative tolerance under which two circumcentres count as one Voronoi vertex.
pub const VORONOI_REL_TOL: f64 = 1e-9;
/// Relative tolerance for k-NN distance ties.
pub const KNN_TIE_TOL: f64 = 1e-12;

/// Directed edges with a CSR out-adjacency index.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSet {
    n_points: usize,
    /// Sorted by source, then target; no duplicates, no self loops.
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    /// Strict upper bound on edge lengths.
    pub range_bound: f64,
    /// Whether the symmetrization contains every Voronoi-neighbour pair.
    pub contains_voronoi: bool,
}

impl EdgeSet {
    pub fn new(
        n_points: usize,
        mut edges: Vec<(usize, usize)>,
        range_bound: f64,
        contains_voronoi: bool,
    ) -> Result<Self> {
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i >= n_points || j >= n_points) {
            return Err(Error::Parse(format!("edge ({i},{j}) out of range for {n_points} points")));
        }
        edges.retain(|&(i, j)| i != j);
        edges.sort_unstable();
        edges.dedup();
        let mut offsets = vec![0; n_points + 1];
        for &(i, _) in &edges {
            offsets[i + 1] += 1;
        }
        for i in 0..n_points {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self { n_points, edges, offsets, range_bound, contains_voronoi })
    }

    /// Both orientations of each unordered pair.
    pub fn from_pairs(
        n_points: usize,
        pairs: &[(usize, usize)],
        range_bound: f64,
        contains_voronoi: bool,
    ) -> Result<Self> {
        let edges = pairs.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect();
        Self::new(n_points, edges, range_bound, contains_voronoi)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Targets of the out-edges of `i`.
    pub fn out_neighbors(&self, i: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.edges[self.offsets[i]..self.offsets[i + 1]].iter().map(|e| e.1)
    }

    /// Range of positions of `i`'s out-edges in [`Self::edges`].
    pub fn out_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges[self.out_range(i)].binary_search(&(i, j)).is_ok()
    }

    /// Undirected neighbour lists of the symmetrized graph, sorted.
    pub fn symmetrized_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_points];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Unordered pairs `(min, max)` of the symmetrization, sorted.
    pub fn undirected_pairs(&self) -> Vec<(usize, usize)> {
        let mut p: Vec<_> = self.edges.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// Every unordered pair of `other` appears here in at least one orientation.
    pub fn contains_symmetrized(&self, other: &EdgeSet) -> bool {
        other.edges.iter().all(|&(i, j)| self.contains(i, j) || self.contains(j, i))
    }

    pub fn max_undirected_degree(&self) -> usize {
        self.symmetrized_adjacency().iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_length(&self, lattice: &StochasticLattice) -> f64 {
        self.edges
            .iter()
            .map(|&(i, j)| lattice.window.distance(&lattice.points[i], &lattice.points[j]))
            .fold(0.0, f64::max)
    }

    /// Packing bound on the undirected degree: points within distance `M` of a
    /// site have disjoint `r/2`-balls inside `B_{M + r/2}`.
    pub fn degree_bound(&self, min_separation: f64, dim: usize) -> f64 {
        (2.0 * self.range_bound / min_separation + 1.0).powi(dim as i32)
    }

    pub fn is_connected(&self) -> bool {
        if self.n_points == 0 {
            return true;
        }
        let adj = self.symmetrized_adjacency();
        let mut seen = vec![false; self.n_points];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n_points
    }
}

/// Outcome of [`validate_edges`].
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeReport {
    pub max_length: f64,
    pub max_degree: usize,
    pub degree_bound: f64,
    pub pass: bool,
}

/// Checks the range condition `|x - y| < M` and the packing degree bound.
pub fn validate_edges(edges: &EdgeSet, lattice: &StochasticLattice) -> EdgeReport {
    let max_length = edges.max_length(lattice);
    let max_degree = edges.max_undirected_degree();
    let degree_bound = edges.degree_bound(lattice.min_separation, lattice.dim());
    EdgeReport {
        max_length,
        max_degree,
        degree_bound,
        pass: max_length < edges.range_bound && (max_degree as f64) <= degree_bound,
    }
}

fn range_bound_for(max_len: f64, lattice: &StochasticLattice) -> f64 {
    max_len + lattice.min_separation / 100.0
}

/// Voronoi neighbours of a planar lattice via Delaunay triangulation. On a
/// torus the points are replicated across the boundary before triangulating.
pub fn voronoi_neighbors_2d(lattice: &StochasticLattice) -> Result<EdgeSet> {
    if lattice.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: lattice.dim() });
    }
    let w = &lattice.window;
    let local = lattice.local_points();
    let n = local.len();
    let (coords, origin) = if w.is_torus() {
        let band = [0, 1].map(|k| (3.0 * lattice.covering_radius).min(w.side(k)));
        let mut coords = Vec::new();
        let mut origin = Vec::new();
        for sy in [0.0, -1.0, 1.0] {
            for sx in [0.0, -1.0, 1.0] {
                for (i, p) in local.iter().enumerate() {
                    let q = [p[0] + sx * w.side(0), p[1] + sy * w.side(1)];
                    let inside = (0..2).all(|k| q[k] >= w.lower[k] - band[k] && q[k] <= w.upper[k] + band[k]);
                    if inside {
                        coords.push(q);
                        origin.push(i);
                    }
                }
            }
        }
        (coords, origin)
    } else {
        (local.iter().map(|p| [p[0], p[1]]).collect(), (0..n).collect())
    };
    let tri = Triangulation::new(&coords)?;
    let mut pairs: Vec<(usize, usize)> = tri
        .voronoi_pairs(VORONOI_REL_TOL)
        .into_iter()
        .filter(|&(a, b)| a < n || b < n)
        .map(|(a, b)| (origin[a], origin[b]))
        .filter(|&(i, j)| i != j)
        .map(|(i, j)| (i.min(j), i.max(j)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let max_len = pairs.iter().map(|&(i, j)| w.distance(&lattice.points[i], &lattice.points[j])).fold(0.0, f64::max);
    EdgeSet::from_pairs(n, &pairs, range_bound_for(max_len, lattice), true)
}

/// `⌈(4R/r + 1)^d − (2R/r − 1)^d⌉ − 2`: a k for which k nearest neighbours
/// include all Voronoi neighbours.
pub fn knn_k_bound(r: f64, big_r: f64, dim: usize) -> usize {
    let q = big_r / r;
    let v = (4.0 * q + 1.0).powi(dim as i32) - (2.0 * q - 1.0).powi(dim as i32);
    // Guard against representation error on exact integers.
    let c = if (v - v.round()).abs() < 1e-9 * v.max(1.0) { v.round() } else { v.ceil() };
    (c as i64 - 2).max(1) as usize
}

/// Edges from each point to its `k` nearest others, keeping all ties.
pub fn knn_edges(lattice: &StochasticLattice, k: usize) -> Result<EdgeSet> {
    let n = lattice.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    let w = &lattice.window;
    let local = lattice.local_points();
    let d = lattice.dim();
    let grid = BinGrid::with_points(w, lattice.covering_radius, &local);
    let unit_ball = unit_ball_volume(d);
    let start = ((k as f64 + 1.0) / (lattice.density() * unit_ball)).powf(1.0 / d as f64);
    let max_extent = (0..d).map(|i| w.side(i)).fold(0.0, f64::max);
    let lists: Vec<(Vec<usize>, f64)> = par::map_range(n, |i| {
        let p = &local[i];
        let mut radius = start.max(lattice.min_separation);
        loop {
            let mut cand: Vec<(f64, usize)> = Vec::new();
            grid.for_each_near(p, radius, |j| {
                if j != i {
                    let dist = norm_sq(&w.local_displacement(p, &local[j])).sqrt();
                    if dist <= radius {
                        cand.push((dist, j));
                    }
                }
            });
            let exhausted = radius > max_extent * 2.0;
            if cand.len() >= k || exhausted {
                cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let kth = cand[k.min(cand.len()) - 1].0;
                let cut = kth * (1.0 + KNN_TIE_TOL);
                if cut <= radius || exhausted {
                    let sel: Vec<usize> = cand.iter().take_while(|c| c.0 <= cut).map(|c| c.1).collect();
                    return (sel, kth);
                }
            }
            radius *= 2.0;
        }
    });
    let mut edges = Vec::new();
    let mut max_len: f64 = 0.0;
    for (i, (sel, _)) in lists.iter().enumerate() {
        for &j in sel {
            edges.push((i, j));
            max_len = max_len.max(w.distance(&lattice.points[i], &lattice.points[j]));
        }
    }
    let contains = k >= knn_k_bound(lattice.min_separation, lattice.covering_radius, d);
    EdgeSet::new(n, edges, range_bound_for(max_len, lattice), contains)
}

/// Forward differences `(x, x + s e_i)` on an unjittered cubic lattice.
pub fn forward_difference_edges(lattice: &StochasticLattice) -> Result<EdgeSet> {
    let grid = lattice.grid.as_ref().ok_or(Error::NotCubic)?;
    let d = lattice.dim();
    let torus = lattice.window.is_torus();
    let mut edges = Vec::with_capacity(d * lattice.len());
    for idx in 0..lattice.len() {
        let c = grid.coords(idx);
        for axis in 0..d {
            let mut t = c;
            if c[axis] + 1 < grid.counts[axis] {
                t[axis] += 1;
            } else if torus && grid.counts[axis] > 1 {
                t[axis] = 0;
            } else {
                continue;
            }
            edges.push((idx, grid.index(&t)));
        }
    }
    EdgeSet::new(lattice.len(), edges, range_bound_for(grid.spacing, lattice), true)
}

pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 / 3.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Path-length constant `|B_{r/2}|^{-1} · 2 (2R)^d / r`.
pub fn path_constant(r: f64, big_r: f64, dim: usize) -> f64 {
    let ball = unit_ball_volume(dim) * (r / 2.0).powi(dim as i32);
    2.0 * (2.0 * big_r).powi(dim as i32) / r / ball
}

/// Shortest (fewest points) path from `i` to `j` over symmetrized edges whose
/// points stay within `2R` of the segment `[x_i, x_j]`. The number of points
/// is checked against `path_constant · |x_i − x_j|`.
pub fn find_path(edges: &EdgeSet, lattice: &StochasticLattice, i: usize, j: usize) -> Result<Vec<usize>> {
    find_path_with(&edges.symmetrized_adjacency(), edges, lattice, i, j)
}

/// [`find_path`] with a precomputed symmetrized adjacency.
pub fn find_path_with(
    adj: &[Vec<usize>],
    edges: &EdgeSet,
    lattice: &StochasticLattice,
    i: usize,
    j: usize,
) -> Result<Vec<usize>> {
    if !edges.contains_voronoi {
        return Err(Error::Unsupported("paths need an edge set containing the Voronoi neighbours".into()));
    }
    if i == j {
        return Ok(vec![i]);
    }
    let w = &lattice.window;
    let seg = w.displacement(&lattice.points[i], &lattice.points[j]);
    let seg_len2 = norm_sq(&seg);
    let tube = 2.0 * lattice.covering_radius;
    let in_tube = |k: usize| {
        let v = w.displacement(&lattice.points[i], &lattice.points[k]);
        let t = (crate::lattice::dot(&v, &seg) / seg_len2).clamp(0.0, 1.0);
        let mut d2 = 0.0;
        for a in 0..MAX_DIM {
            d2 += (v[a] - t * seg[a]).powi(2);
        }
        d2 <= tube * tube
    };
    let mut prev = vec![usize::MAX; lattice.len()];
    prev[i] = i;
    let mut queue = VecDeque::from([i]);
    while let Some(a) = queue.pop_front() {
        if a == j {
            break;
        }
        for &b in &adj[a] {
            if prev[b] == usize::MAX && in_tube(b) {
                prev[b] = a;
                queue.push_back(b);
            }
        }
    }
    if prev[j] == usize::MAX {
        return Err(Error::NoPath { from: i, to: j });
    }
    let mut path = vec![j];
    while *path.last().unwrap() != i {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    let bound = path_constant(lattice.min_separation, lattice.covering_radius, lattice.dim()) * seg_len2.sqrt();
    if path.len() as f64 > bound {
        return Err(Error::PathTooLong { from: i, to: j, len: path.len(), bound });
    }
    Ok(path)
}

/// Distance between two lattice points in the window metric.
pub fn point_distance(lattice: &StochasticLattice, a: &Point, b: &Point) -> f64 {
    lattice.window.distance(a, b)
}
