//! Point evaluation of spectral fields: the trigonometric polynomial is sampled
//! on an upsampled periodic grid and read back with four-point Lagrange
//! interpolation per axis.

use crate::field::{padded_values, SpectralField};

/// Upsampling factor per axis.
pub fn upsample_factor(dim: usize) -> usize {
    if dim == 1 {
        4
    } else {
        2
    }
}

#[derive(Debug, Clone)]
pub struct Interpolator {
    dim: usize,
    m: usize,
    h: f64,
    /// One table per component, row-major.
    tables: Vec<Vec<f64>>,
}

#[inline]
fn weights(t: f64) -> [f64; 4] {
    // nodes -1, 0, 1, 2
    let (a, b, c) = (t + 1.0, t - 1.0, t - 2.0);
    [
        -t * b * c / 6.0,
        a * b * c / 2.0,
        -a * t * c / 2.0,
        a * t * b / 6.0,
    ]
}

impl Interpolator {
    pub fn new(f: &SpectralField) -> Self {
        let grid = *f.grid();
        let m = grid.n() * upsample_factor(grid.dim());
        let tables = (0..f.components())
            .map(|c| padded_values(&grid, f.component(c), m))
            .collect();
        Self {
            dim: grid.dim(),
            m,
            h: grid.length() / m as f64,
            tables,
        }
    }

    pub fn grid_spacing(&self) -> f64 {
        self.h
    }

    pub fn components(&self) -> usize {
        self.tables.len()
    }

    #[inline]
    fn split(&self, x: f64) -> (isize, [f64; 4]) {
        let s = x / self.h;
        let i = s.floor();
        (i as isize, weights(s - i))
    }

    #[inline]
    fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.m as isize) as usize
    }

    /// Component `c` at the point `x` (only the first `dim` entries are read).
    #[inline]
    pub fn eval(&self, c: usize, x: &[f64]) -> f64 {
        let t = &self.tables[c];
        let (i, wx) = self.split(x[0]);
        if self.dim == 1 {
            let mut s = 0.0;
            for (k, w) in wx.iter().enumerate() {
                s += w * t[self.wrap(i - 1 + k as isize)];
            }
            s
        } else {
            let (j, wy) = self.split(x[1]);
            let mut s = 0.0;
            for (k, w) in wx.iter().enumerate() {
                let row = self.wrap(i - 1 + k as isize) * self.m;
                let mut r = 0.0;
                for (l, v) in wy.iter().enumerate() {
                    r += v * t[row + self.wrap(j - 1 + l as isize)];
                }
                s += w * r;
            }
            s
        }
    }

    /// All components at `x`, written into `out`.
    #[inline]
    pub fn eval_all(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate().take(self.tables.len()) {
            *o = self.eval(c, x);
        }
    }

    /// Largest absolute table value of component `c`.
    pub fn sup(&self, c: usize) -> f64 {
        self.tables[c].iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Piecewise-linear-in-time interpolation between per-node interpolators.
#[derive(Debug, Clone)]
pub struct TimeInterpolator {
    times: Vec<f64>,
    nodes: Vec<Interpolator>,
}

impl TimeInterpolator {
    pub fn new(times: &[f64], snaps: &[SpectralField]) -> Self {
        // identical snapshots share one table
        let all_same = snaps.windows(2).all(|w| w[0] == w[1]);
        let nodes = if all_same {
            vec![Interpolator::new(&snaps[0])]
        } else {
            snaps.iter().map(Interpolator::new).collect()
        };
        Self {
            times: times.to_vec(),
            nodes,
        }
    }

    pub fn components(&self) -> usize {
        self.nodes[0].components()
    }

    /// Node index and weight of the later node for time `t`.
    #[inline]
    pub fn locate(&self, t: f64) -> (usize, f64) {
        if self.nodes.len() == 1 {
            return (0, 0.0);
        }
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return (0, 0.0);
        }
        if t >= self.times[last] {
            return (last, 0.0);
        }
        let k = self.times.partition_point(|s| *s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (k, w)
    }

    #[inline]
    pub fn eval_at(&self, loc: (usize, f64), c: usize, x: &[f64]) -> f64 {
        let (k, w) = loc;
        let a = self.nodes[k].eval(c, x);
        if w == 0.0 {
            a
        } else {
            (1.0 - w) * a + w * self.nodes[k + 1].eval(c, x)
        }
    }

    pub fn sup(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| (0..n.components()).map(|c| n.sup(c)).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}
