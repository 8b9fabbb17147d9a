//! Uniform spatial binning over a window's local frame.

use crate::lattice::{Point, Window, MAX_DIM};

/// Bins of side at least `min_bin` covering a window; on a torus the bins wrap.
#[derive(Clone, Debug)]
pub struct BinGrid {
    dim: usize,
    lower: Point,
    bin: Point,
    counts: [usize; MAX_DIM],
    periodic: bool,
    bins: Vec<Vec<usize>>,
}

impl BinGrid {
    pub fn new(window: &Window, min_bin: f64) -> Self {
        let mut counts = [1; MAX_DIM];
        let mut bin = [1.0; MAX_DIM];
        for i in 0..window.dim {
            let side = window.side(i);
            // Cap the bin count so sparse or tiny-`min_bin` grids stay small.
            let n = ((side / min_bin.max(1e-12)).floor() as usize).clamp(1, 4096);
            counts[i] = n;
            bin[i] = side / n as f64;
        }
        let total = counts.iter().product();
        Self {
            dim: window.dim,
            lower: window.lower,
            bin,
            counts,
            periodic: window.is_torus(),
            bins: vec![Vec::new(); total],
        }
    }

    /// Bins all `points` (local coordinates), indexed by position.
    pub fn with_points(window: &Window, min_bin: f64, points: &[Point]) -> Self {
        let mut g = Self::new(window, min_bin);
        for (i, p) in points.iter().enumerate() {
            g.insert(i, p);
        }
        g
    }

    fn coord(&self, axis: usize, x: f64) -> isize {
        ((x - self.lower[axis]) / self.bin[axis]).floor() as isize
    }

    fn clamp_or_wrap(&self, axis: usize, c: isize) -> Option<usize> {
        let n = self.counts[axis] as isize;
        if self.periodic {
            Some(c.rem_euclid(n) as usize)
        } else if c < 0 || c >= n {
            None
        } else {
            Some(c as usize)
        }
    }

    fn flat(&self, c: &[usize; MAX_DIM]) -> usize {
        c[0] + self.counts[0] * (c[1] + self.counts[1] * c[2])
    }

    pub fn insert(&mut self, idx: usize, p: &Point) {
        let mut c = [0usize; MAX_DIM];
        for (axis, ci) in c.iter_mut().enumerate().take(self.dim) {
            let raw = self.coord(axis, p[axis]);
            let n = self.counts[axis] as isize;
            *ci = if self.periodic { raw.rem_euclid(n) as usize } else { raw.clamp(0, n - 1) as usize };
        }
        let f = self.flat(&c);
        self.bins[f].push(idx);
    }

    /// Calls `visit` with every stored index whose bin intersects the cube of
    /// half-width `radius` around `p`. Each index is visited at most once.
    pub fn for_each_near(&self, p: &Point, radius: f64, mut visit: impl FnMut(usize)) {
        let mut axes: [Vec<usize>; MAX_DIM] = [vec![0], vec![0], vec![0]];
        for (axis, list) in axes.iter_mut().enumerate().take(self.dim) {
            list.clear();
            let lo = self.coord(axis, p[axis] - radius);
            let hi = self.coord(axis, p[axis] + radius);
            let n = self.counts[axis] as isize;
            if self.periodic && hi - lo + 1 >= n {
                list.extend(0..self.counts[axis]);
                continue;
            }
            for c in lo..=hi {
                if let Some(w) = self.clamp_or_wrap(axis, c) {
                    list.push(w);
                }
            }
        }
        for &c2 in &axes[2] {
            for &c1 in &axes[1] {
                for &c0 in &axes[0] {
                    let f = self.flat(&[c0, c1, c2]);
                    for &idx in &self.bins[f] {
                        visit(idx);
                    }
                }
            }
        }
    }

    /// Nearest stored point to `p` under `window`'s local metric, skipping `exclude`.
    /// Returns `(index, distance)`.
    pub fn nearest(
        &self,
        window: &Window,
        points: &[Point],
        p: &Point,
        exclude: Option<usize>,
    ) -> Option<(usize, f64)> {
        let available = points.len() - usize::from(exclude.is_some());
        if available == 0 {
            return None;
        }
        let max_extent = (0..self.dim).map(|i| window.side(i)).fold(0.0, f64::max);
        let mut radius = self.bin[..self.dim].iter().cloned().fold(f64::INFINITY, f64::min);
        loop {
            let mut best: Option<(usize, f64)> = None;
            self.for_each_near(p, radius, |j| {
                if Some(j) == exclude {
                    return;
                }
                let d = window.local_displacement(p, &points[j]);
                let d2 = d.iter().map(|x| x * x).sum::<f64>();
                if best.is_none_or(|(_, b)| d2 < b) {
                    best = Some((j, d2));
                }
            });
            if let Some((j, d2)) = best {
                if d2.sqrt() <= radius {
                    return Some((j, d2.sqrt()));
                }
            }
            if radius > 2.0 * max_extent {
                return best.map(|(j, d2)| (j, d2.sqrt()));
            }
            radius *= 2.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Topology;

    #[test]
    fn nearest_matches_brute_force_on_torus() {
        let w = Window::cube(2, 7.0, Topology::Torus).unwrap();
        let pts: Vec<Point> = (0..40)
            .map(|i| {
                let t = i as f64;
                [(t * 1.618).rem_euclid(7.0), (t * 2.7).rem_euclid(7.0), 0.0]
            })
            .collect();
        let g = BinGrid::with_points(&w, 1.0, &pts);
        for q in [[0.1, 6.9, 0.0], [3.5, 3.5, 0.0], [6.99, 0.01, 0.0]] {
            let (j, d) = g.nearest(&w, &pts, &q, None).unwrap();
            let brute = pts
                .iter()
                .map(|p| crate::lattice::norm_sq(&w.local_displacement(&q, p)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!((d - brute).abs() < 1e-12, "{j}");
        }
    }
}
