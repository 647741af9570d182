//! Uniform time grid and the sampled containers built on it.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform discretization `t_i = i * dt`, `i = 0..=N`, of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<R> {
    horizon: R,
    steps: usize,
    dt: R,
}

impl<R: Real> TimeGrid<R> {
    pub fn new(horizon: R, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Invalid("grid needs at least one step".into()));
        }
        if !(horizon.is_finite() && horizon > R::zero()) {
            return Err(Error::Invalid(format!("grid horizon must be positive, got {horizon}")));
        }
        let dt = horizon / R::from_usize(steps).unwrap();
        Ok(Self { horizon, steps, dt })
    }

    /// Grid over `[0, horizon]` with the given step, `horizon / dt` rounded to an integer.
    pub fn with_step(horizon: R, dt: R) -> Result<Self> {
        let steps = (horizon / dt).round().to_usize().unwrap_or(0);
        let grid = Self::new(R::from_usize(steps).unwrap_or_else(R::zero) * dt, steps)?;
        if (grid.horizon - horizon).abs() > R::lit(1e-9) * horizon.max(R::one()) {
            return Err(Error::GridMismatch(format!(
                "horizon {horizon} is not a multiple of the step {dt}"
            )));
        }
        Ok(grid)
    }

    pub fn horizon(&self) -> R {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> R {
        self.dt
    }

    pub fn t(&self, i: usize) -> R {
        if i == self.steps {
            self.horizon
        } else {
            R::from_usize(i).unwrap() * self.dt
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = R> + '_ {
        (0..self.len()).map(move |i| self.t(i))
    }

    /// Index of the node at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: R) -> Option<usize> {
        if t < -self.dt * R::lit(1e-6) {
            return None;
        }
        let i = (t / self.dt).round().to_usize()?;
        (i <= self.steps && (self.t(i) - t).abs() <= self.dt * R::lit(1e-6)).then_some(i)
    }

    /// The grid restricted to `[0, t_steps]`, sharing `dt`.
    pub fn truncate(&self, steps: usize) -> Result<Self> {
        if steps == 0 || steps > self.steps {
            return Err(Error::GridMismatch(format!(
                "cannot truncate a {}-step grid to {steps} steps",
                self.steps
            )));
        }
        Ok(Self {
            horizon: self.t(steps),
            steps,
            dt: self.dt,
        })
    }

    pub(crate) fn same_as(&self, other: &Self) -> bool {
        self.steps == other.steps && self.dt == other.dt
    }
}

/// Real-valued function sampled at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPath<R> {
    grid: TimeGrid<R>,
    values: Vec<R>,
}

impl<R: Real> ScalarPath<R> {
    pub fn new(grid: TimeGrid<R>, values: Vec<R>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "path has {} samples, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid<R>, f: impl Fn(R) -> R) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: TimeGrid<R>, value: R) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: TimeGrid<R>) -> Self {
        Self::constant(grid, R::zero())
    }

    pub fn grid(&self) -> &TimeGrid<R> {
        &self.grid
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn into_values(self) -> Vec<R> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize) -> R {
        self.values[i]
    }

    pub fn last(&self) -> R {
        self.values[self.values.len() - 1]
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(R, R) -> R) -> Self {
        debug_assert!(self.grid.same_as(&other.grid));
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    /// Largest absolute pointwise difference to another path on the same grid.
    pub fn max_abs_diff(&self, other: &Self) -> R {
        self.values
            .iter()
            .zip(&other.values)
            .fold(R::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Value at `t_i + dt/2` by four-point cubic interpolation (linear on grids with
    /// fewer than four nodes). Constant stencils are returned exactly.
    pub fn midpoint(&self, i: usize) -> R {
        let v = &self.values;
        let n = v.len();
        debug_assert!(i + 1 < n);
        if n < 4 {
            return R::half() * (v[i] + v[i + 1]);
        }
        let s = if i == 0 {
            0
        } else if i + 2 >= n {
            n - 4
        } else {
            i - 1
        };
        let w = &v[s..s + 4];
        if w.iter().all(|&x| x == w[0]) {
            return w[0];
        }
        // Lagrange weights at offset (i + 1/2) - s from the stencil start.
        let (a, b, c, d) = match i - s {
            0 => (5.0, 15.0, -5.0, 1.0),
            1 => (-1.0, 9.0, 9.0, -1.0),
            _ => (1.0, -5.0, 15.0, 5.0),
        };
        (R::lit(a) * w[0] + R::lit(b) * w[1] + R::lit(c) * w[2] + R::lit(d) * w[3]) / R::lit(16.0)
    }

    /// The first `steps + 1` samples on the truncated grid.
    pub fn truncate(&self, steps: usize) -> Result<Self> {
        let grid = self.grid.truncate(steps)?;
        Ok(Self {
            grid,
            values: self.values[..=steps].to_vec(),
        })
    }

    pub fn integral(&self) -> R {
        crate::scalar::trapezoid(&self.values, self.grid.dt())
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::non_finite(what, self.grid.t(i).as_f64())),
            None => Ok(()),
        }
    }
}

/// Lower-triangular two-time function `K[i][j]`, `0 <= j <= i <= N`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TriKernel<R> {
    grid: TimeGrid<R>,
    data: Vec<R>,
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl<R: Real> TriKernel<R> {
    pub fn zeros(grid: TimeGrid<R>) -> Self {
        let n = grid.len();
        Self {
            grid,
            data: vec![R::zero(); n * (n + 1) / 2],
        }
    }

    /// Builds the kernel from `f(i, j)`; `f` is only called with `j <= i`.
    pub fn from_fn(grid: TimeGrid<R>, mut f: impl FnMut(usize, usize) -> R) -> Self {
        let mut data = Vec::with_capacity(grid.len() * (grid.len() + 1) / 2);
        for i in 0..grid.len() {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> &TimeGrid<R> {
        &self.grid
    }

    /// Value at `(t_i, t_j)`. Panics if `j > i`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> R {
        assert!(j <= i, "kernel is defined only for j <= i");
        self.data[tri_index(i, j)]
    }

    pub(crate) fn from_raw(grid: TimeGrid<R>, data: Vec<R>) -> Self {
        assert_eq!(data.len(), grid.len() * (grid.len() + 1) / 2);
        Self { grid, data }
    }

    /// Entries `K[i][0..=i]`.
    #[inline]
    pub fn row(&self, i: usize) -> &[R] {
        &self.data[tri_index(i, 0)..=tri_index(i, i)]
    }

    /// Value at grid times `(t, s)`, `s <= t`, both on the grid.
    pub fn at_time(&self, t: R, s: R) -> Option<R> {
        let i = self.grid.index_of(t)?;
        let j = self.grid.index_of(s)?;
        (j <= i).then(|| self.get(i, j))
    }

    pub fn diag(&self) -> ScalarPath<R> {
        let values = (0..self.grid.len()).map(|i| self.get(i, i)).collect();
        ScalarPath {
            grid: self.grid,
            values,
        }
    }

    /// Iterates `(i, j, value)` in row-major triangular order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, R)> + '_ {
        (0..self.grid.len()).flat_map(move |i| (0..=i).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn max_abs_diff(&self, other: &Self) -> R {
        self.data
            .iter()
            .zip(&other.data)
            .fold(R::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Applies the kernel to increments with the Itô convention:
    /// `out_i = sum_{j < i} K[i][j] * dy_j`.
    pub fn convolve(&self, dy: &[R]) -> Result<ScalarPath<R>> {
        if dy.len() != self.grid.steps() {
            return Err(Error::GridMismatch(format!(
                "{} increments for a {}-step grid",
                dy.len(),
                self.grid.steps()
            )));
        }
        let values = (0..self.grid.len())
            .map(|i| crate::scalar::compensated_sum(self.row(i)[..i].iter().zip(dy).map(|(&k, &d)| k * d)))
            .collect();
        Ok(ScalarPath {
            grid: self.grid,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_are_uniform_and_end_at_horizon() {
        let g = TimeGrid::new(1.0_f64, 7).unwrap();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(7), 1.0);
        let nodes: Vec<f64> = g.nodes().collect();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.index_of(3.0 / 7.0), Some(3));
        assert_eq!(g.index_of(0.3), None);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(TimeGrid::new(1.0_f64, 0).is_err());
        assert!(TimeGrid::new(-1.0_f64, 10).is_err());
        assert!(TimeGrid::with_step(1.05_f64, 0.1).is_err());
        assert_eq!(TimeGrid::with_step(2.0_f64, 0.001).unwrap().steps(), 2000);
    }

    #[test]
    fn path_length_must_match() {
        let g = TimeGrid::new(1.0_f64, 4).unwrap();
        assert!(ScalarPath::new(g, vec![0.0; 4]).is_err());
        assert!(ScalarPath::new(g, vec![0.0; 5]).is_ok());
    }

    #[test]
    fn midpoint_is_exact_for_cubics() {
        let g = TimeGrid::new(1.0_f64, 10).unwrap();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t + 3.0 * t * t * t;
        let p = ScalarPath::from_fn(g, f);
        for i in 0..10 {
            let tm = g.t(i) + 0.05;
            assert!((p.midpoint(i) - f(tm)).abs() < 1e-13, "node {i}");
        }
    }

    #[test]
    fn triangle_storage_round_trip() {
        let g = TimeGrid::new(1.0_f64, 5).unwrap();
        let k = TriKernel::from_fn(g, |i, j| (10 * i + j) as f64);
        assert_eq!(k.get(4, 2), 42.0);
        assert_eq!(k.row(3), &[30.0, 31.0, 32.0, 33.0]);
        assert_eq!(k.at_time(0.6, 0.2), Some(31.0));
        assert_eq!(k.entries().count(), 21);
    }

    #[test]
    #[should_panic]
    fn upper_triangle_is_not_addressable() {
        let g = TimeGrid::new(1.0_f64, 5).unwrap();
        TriKernel::zeros(g).get(1, 2);
    }
}
