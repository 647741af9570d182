//! Signal/observation model, exponential-quadratic criterion and their validation.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ScalarPath, TimeGrid, TriKernel};
use crate::ode::{rk4_step, At};
use crate::scalar::Real;

/// Tolerance below zero accepted for `l11` and `det` before clamping.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Symmetric 2x2 matrix `((l11, l12), (l12, l22))`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMat2<R> {
    pub l11: R,
    pub l12: R,
    pub l22: R,
}

impl<R: Real> SymMat2<R> {
    pub fn new(l11: R, l12: R, l22: R) -> Self {
        Self { l11, l12, l22 }
    }

    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero(), R::zero())
    }

    pub fn det(&self) -> R {
        self.l11 * self.l22 - self.l12 * self.l12
    }

    /// `(x, y) M (x, y)^T`.
    #[inline]
    pub fn quad(&self, x: R, y: R) -> R {
        self.l11 * x * x + R::lit(2.0) * self.l12 * x * y + self.l22 * y * y
    }

    pub fn is_finite(&self) -> bool {
        self.l11.is_finite() && self.l12.is_finite() && self.l22.is_finite()
    }

    /// Nonnegative definite within [`PSD_TOLERANCE`].
    pub fn is_nonnegative_definite(&self) -> bool {
        let tol = R::lit(PSD_TOLERANCE);
        self.l11 >= -tol && self.l22 >= -tol && self.det() >= -tol
    }

    /// `l11 = l22 = -l12`: the quadratic form is `l11 (x - y)^2`.
    pub fn is_singular_criterion(&self) -> bool {
        self.l11 == self.l22 && self.l12 == -self.l11
    }

    pub fn scale(&self, s: R) -> Self {
        Self::new(self.l11 * s, self.l12 * s, self.l22 * s)
    }

    /// Snaps entries within tolerance of the nonnegative-definite cone onto it.
    fn clamped(self) -> Self {
        let l11 = self.l11.max(R::zero());
        let l22 = self.l22.max(R::zero());
        let bound = (l11 * l22).sqrt();
        let l12 = if self.l12.abs() > bound {
            bound.copysign(self.l12)
        } else {
            self.l12
        };
        Self { l11, l12, l22 }
    }
}

/// A time-dependent coefficient as supplied by the caller.
#[derive(Clone)]
pub enum Coefficient<R> {
    Const(R),
    /// One value per grid node.
    Samples(Vec<R>),
    Func(Arc<dyn Fn(R) -> R + Send + Sync>),
}

impl<R: Real> Coefficient<R> {
    pub fn func(f: impl Fn(R) -> R + Send + Sync + 'static) -> Self {
        Coefficient::Func(Arc::new(f))
    }

    fn sample(&self, grid: &TimeGrid<R>, name: &str) -> Result<Sampled<R>> {
        let sampled = match self {
            Coefficient::Const(c) => Sampled {
                nodes: ScalarPath::constant(*grid, *c),
                mids: vec![*c; grid.steps()],
            },
            Coefficient::Samples(v) => {
                let nodes = ScalarPath::new(*grid, v.clone()).map_err(|_| {
                    Error::GridMismatch(format!(
                        "coefficient {name} has {} samples, grid has {} nodes",
                        v.len(),
                        grid.len()
                    ))
                })?;
                let mids = (0..grid.steps()).map(|i| nodes.midpoint(i)).collect();
                Sampled { nodes, mids }
            }
            Coefficient::Func(f) => {
                let nodes = ScalarPath::from_fn(*grid, |t| f(t));
                let half = grid.dt() * R::half();
                let mids = (0..grid.steps()).map(|i| f(grid.t(i) + half)).collect();
                Sampled { nodes, mids }
            }
        };
        sampled.check_finite(name)?;
        Ok(sampled)
    }
}

impl<R: fmt::Debug> fmt::Debug for Coefficient<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Const(c) => write!(f, "Const({c:?})"),
            Coefficient::Samples(v) => write!(f, "Samples(len = {})", v.len()),
            Coefficient::Func(_) => write!(f, "Func(..)"),
        }
    }
}

impl<R: Real> From<R> for Coefficient<R> {
    fn from(c: R) -> Self {
        Coefficient::Const(c)
    }
}

/// Criterion matrix path `Lambda(t)`, entry by entry.
#[derive(Debug, Clone)]
pub struct LambdaSpec<R> {
    pub l11: Coefficient<R>,
    pub l12: Coefficient<R>,
    pub l22: Coefficient<R>,
}

impl<R: Real> LambdaSpec<R> {
    pub fn constant(m: SymMat2<R>) -> Self {
        Self {
            l11: m.l11.into(),
            l12: m.l12.into(),
            l22: m.l22.into(),
        }
    }
}

/// `dX = a X dt + dB`, `dY = A X dt + dB~`, criterion `Lambda`, risk parameter `mu`, horizon `T`.
#[derive(Debug, Clone)]
pub struct ModelSpec<R> {
    pub drift: Coefficient<R>,
    pub obs_gain: Coefficient<R>,
    pub lambda: LambdaSpec<R>,
    pub mu: R,
    pub horizon: R,
}

impl<R: Real> ModelSpec<R> {
    pub fn constant(drift: R, obs_gain: R, lambda: SymMat2<R>, mu: R, horizon: R) -> Self {
        Self {
            drift: drift.into(),
            obs_gain: obs_gain.into(),
            lambda: LambdaSpec::constant(lambda),
            mu,
            horizon,
        }
    }

    /// The example model with a nonsingular criterion: `Lambda = ((2,-1),(-1,1))`,
    /// `a = 0`, `A = 1`, `mu = -1`.
    pub fn worked_example(horizon: R) -> Self {
        let l = SymMat2::new(R::lit(2.0), R::lit(-1.0), R::one());
        Self::constant(R::zero(), R::one(), l, R::lit(-1.0), horizon)
    }

    /// Same dynamics with the singular criterion `l11 = l22 = -l12 = 1`.
    pub fn singular_example(horizon: R) -> Self {
        let l = SymMat2::new(R::one(), R::lit(-1.0), R::one());
        Self::constant(R::zero(), R::one(), l, R::lit(-1.0), horizon)
    }
}

/// A coefficient sampled at nodes and at step midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled<R> {
    nodes: ScalarPath<R>,
    mids: Vec<R>,
}

impl<R: Real> Sampled<R> {
    #[inline]
    pub fn at(&self, at: At) -> R {
        match at {
            At::Node(i) => self.nodes.at(i),
            At::Mid(i) => self.mids[i],
        }
    }

    pub fn nodes(&self) -> &ScalarPath<R> {
        &self.nodes
    }

    fn from_fn(grid: &TimeGrid<R>, f: impl Fn(At) -> R) -> Self {
        let nodes = ScalarPath::new(*grid, (0..grid.len()).map(|i| f(At::Node(i))).collect()).unwrap();
        let mids = (0..grid.steps()).map(|i| f(At::Mid(i))).collect();
        Self { nodes, mids }
    }

    fn check_finite(&self, what: &str) -> Result<()> {
        self.nodes.check_finite(what)?;
        let dt = self.nodes.grid().dt();
        match self.mids.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::non_finite(
                what,
                (self.nodes.grid().t(i) + dt * R::half()).as_f64(),
            )),
            None => Ok(()),
        }
    }

    fn truncate(&self, steps: usize) -> Result<Self> {
        Ok(Self {
            nodes: self.nodes.truncate(steps)?,
            mids: self.mids[..steps].to_vec(),
        })
    }
}

/// A model whose invariants have been checked at every node and midpoint of its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel<R> {
    grid: TimeGrid<R>,
    mu: R,
    drift: Sampled<R>,
    obs_gain: Sampled<R>,
    l11: Sampled<R>,
    l12: Sampled<R>,
    l22: Sampled<R>,
    det: Sampled<R>,
}

/// Checks a model on a grid and samples its coefficients there.
pub fn validate_model<R: Real>(spec: &ModelSpec<R>, grid: &TimeGrid<R>) -> Result<ValidatedModel<R>> {
    if !spec.mu.is_finite() {
        return Err(Error::non_finite("mu", 0.0));
    }
    if (spec.horizon - grid.horizon()).abs() > R::lit(1e-9) * grid.horizon().max(R::one()) {
        return Err(Error::GridMismatch(format!(
            "model horizon {} differs from grid horizon {}",
            spec.horizon,
            grid.horizon()
        )));
    }
    let drift = spec.drift.sample(grid, "a")?;
    let obs_gain = spec.obs_gain.sample(grid, "A")?;
    let l11 = spec.lambda.l11.sample(grid, "lambda.l11")?;
    let l12 = spec.lambda.l12.sample(grid, "lambda.l12")?;
    let l22 = spec.lambda.l22.sample(grid, "lambda.l22")?;
    let det = Sampled::from_fn(grid, |at| SymMat2::new(l11.at(at), l12.at(at), l22.at(at)).det());
    ValidatedModel {
        grid: *grid,
        mu: spec.mu,
        drift,
        obs_gain,
        l11,
        l12,
        l22,
        det,
    }
    .validate()
}

impl<R: Real> ValidatedModel<R> {
    /// Re-runs every invariant check; a validated model comes back unchanged.
    pub fn validate(&self) -> Result<Self> {
        let grid = self.grid;
        let half = grid.dt() * R::half();
        let time = |at: At| match at {
            At::Node(i) => grid.t(i),
            At::Mid(i) => grid.t(i) + half,
        };
        let points = (0..grid.len()).map(At::Node).chain((0..grid.steps()).map(At::Mid));
        let mut clamped = Vec::new();
        for at in points {
            let m = self.lambda_at(at);
            let t = time(at).as_f64();
            if !m.is_finite() {
                return Err(Error::non_finite("lambda", t));
            }
            if m.l22 <= R::zero() {
                return Err(Error::ZeroLambda22 {
                    t,
                    value: m.l22.as_f64(),
                });
            }
            if !m.is_nonnegative_definite() {
                return Err(Error::NonPositiveDefinite {
                    t,
                    detail: format!("l11 = {}, det = {}", m.l11, m.det()),
                });
            }
            let c = m.clamped();
            if c != m {
                clamped.push((at, c));
            }
        }
        let mut out = self.clone();
        for (at, c) in clamped {
            out.set_lambda(at, c);
        }
        Ok(out)
    }

    fn set_lambda(&mut self, at: At, m: SymMat2<R>) {
        let put = |s: &mut Sampled<R>, v: R| match at {
            At::Node(i) => {
                let mut vals = s.nodes.values().to_vec();
                vals[i] = v;
                s.nodes = ScalarPath::new(*s.nodes.grid(), vals).unwrap();
            }
            At::Mid(i) => s.mids[i] = v,
        };
        put(&mut self.l11, m.l11);
        put(&mut self.l12, m.l12);
        put(&mut self.l22, m.l22);
        put(&mut self.det, m.det().max(R::zero()));
    }

    pub fn grid(&self) -> &TimeGrid<R> {
        &self.grid
    }

    pub fn mu(&self) -> R {
        self.mu
    }

    pub fn horizon(&self) -> R {
        self.grid.horizon()
    }

    /// Same coefficients, different risk parameter.
    pub fn with_mu(&self, mu: R) -> Self {
        Self { mu, ..self.clone() }
    }

    /// The model restricted to `[0, t_steps]`.
    pub fn truncate(&self, steps: usize) -> Result<Self> {
        Ok(Self {
            grid: self.grid.truncate(steps)?,
            mu: self.mu,
            drift: self.drift.truncate(steps)?,
            obs_gain: self.obs_gain.truncate(steps)?,
            l11: self.l11.truncate(steps)?,
            l12: self.l12.truncate(steps)?,
            l22: self.l22.truncate(steps)?,
            det: self.det.truncate(steps)?,
        })
    }

    /// The model restricted to `[0, horizon]`; `horizon` must be a grid node.
    pub fn up_to(&self, horizon: R) -> Result<Self> {
        let n = self
            .grid
            .index_of(horizon)
            .ok_or_else(|| Error::GridMismatch(format!("horizon {horizon} is not a node of the model grid")))?;
        if n == self.grid.steps() {
            Ok(self.clone())
        } else {
            self.truncate(n)
        }
    }

    #[inline]
    pub fn drift(&self, at: At) -> R {
        self.drift.at(at)
    }

    #[inline]
    pub fn obs_gain(&self, at: At) -> R {
        self.obs_gain.at(at)
    }

    #[inline]
    pub fn lambda_at(&self, at: At) -> SymMat2<R> {
        SymMat2::new(self.l11.at(at), self.l12.at(at), self.l22.at(at))
    }

    #[inline]
    pub fn lambda(&self, i: usize) -> SymMat2<R> {
        self.lambda_at(At::Node(i))
    }

    /// `det Lambda` recorded per node (and midpoint) at validation time.
    #[inline]
    pub fn det(&self, at: At) -> R {
        self.det.at(at)
    }

    pub fn det_path(&self) -> &ScalarPath<R> {
        self.det.nodes()
    }

    pub fn drift_path(&self) -> &ScalarPath<R> {
        self.drift.nodes()
    }

    pub fn obs_gain_path(&self) -> &ScalarPath<R> {
        self.obs_gain.nodes()
    }

    /// Whether `l11 = l22 = -l12` holds at every node.
    pub fn has_singular_criterion(&self) -> bool {
        (0..self.grid.len()).all(|i| self.lambda(i).is_singular_criterion())
    }
}

/// Solves `dPi/dt = a(t) Pi`, `Pi(0) = 1`.
pub fn transition_pi<R: Real>(model: &ValidatedModel<R>) -> Result<ScalarPath<R>> {
    let grid = model.grid();
    let f = |at: At, y: [R; 1]| [model.drift(at) * y[0]];
    let mut values = Vec::with_capacity(grid.len());
    let mut y = [R::one()];
    values.push(y[0]);
    for i in 0..grid.steps() {
        y = rk4_step(y, i, i + 1, grid.dt(), &f);
        if !y[0].is_finite() {
            return Err(Error::non_finite("Pi", grid.t(i + 1).as_f64()));
        }
        values.push(y[0]);
    }
    ScalarPath::new(*grid, values)
}

/// Mean and covariance of a Gaussian signal, sampled on the lower triangle of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec<R> {
    mean: ScalarPath<R>,
    cov: TriKernel<R>,
}

impl<R: Real> CovarianceSpec<R> {
    /// Symmetric by construction: only `K(t, s)` with `s <= t` is stored.
    pub fn new(mean: ScalarPath<R>, cov: TriKernel<R>) -> Result<Self> {
        if !mean.grid().same_as(cov.grid()) {
            return Err(Error::GridMismatch("mean and covariance grids differ".into()));
        }
        mean.check_finite("mean")?;
        let grid = *cov.grid();
        for (i, j, v) in cov.entries() {
            if !v.is_finite() {
                return Err(Error::non_finite(format!("K(t, {})", grid.t(j)), grid.t(i).as_f64()));
            }
        }
        for i in 0..grid.len() {
            if cov.get(i, i) < R::zero() {
                return Err(Error::Invalid(format!("K(t, t) < 0 at t = {}", grid.t(i))));
            }
        }
        Ok(Self { mean, cov })
    }

    /// Samples `m` and `k` on the grid; `k` is only evaluated for `s <= t`.
    pub fn from_fn(grid: TimeGrid<R>, m: impl Fn(R) -> R, k: impl Fn(R, R) -> R) -> Result<Self> {
        let mean = ScalarPath::from_fn(grid, m);
        let cov = TriKernel::from_fn(grid, |i, j| k(grid.t(i), grid.t(j)));
        Self::new(mean, cov)
    }

    /// From a full `(N+1) x (N+1)` matrix; entries above the diagonal are ignored.
    pub fn from_full(mean: ScalarPath<R>, full: &[Vec<R>]) -> Result<Self> {
        let grid = *mean.grid();
        if full.len() != grid.len() || full.iter().enumerate().any(|(i, r)| r.len() <= i) {
            return Err(Error::GridMismatch("covariance matrix does not cover the grid".into()));
        }
        let cov = TriKernel::from_fn(grid, |i, j| full[i][j]);
        Self::new(mean, cov)
    }

    pub fn grid(&self) -> &TimeGrid<R> {
        self.cov.grid()
    }

    pub fn mean(&self) -> &ScalarPath<R> {
        &self.mean
    }

    pub fn kernel(&self) -> &TriKernel<R> {
        &self.cov
    }

    /// `K(t_i, t_j)` for any ordering of the indices.
    #[inline]
    pub fn k(&self, i: usize, j: usize) -> R {
        if j <= i {
            self.cov.get(i, j)
        } else {
            self.cov.get(j, i)
        }
    }
}

/// Covariance of the signal `dX = a X dt + dB`, `X_0 = 0`:
/// `K(t, s) = Pi_t Pi_s int_0^min(t,s) Pi_r^-2 dr`.
pub fn ou_covariance<R: Real>(model: &ValidatedModel<R>) -> Result<CovarianceSpec<R>> {
    let grid = *model.grid();
    let pi = transition_pi(model)?;
    let inv_sq: Vec<R> = pi.values().iter().map(|p| (*p * *p).recip()).collect();
    let mut cumulative = Vec::with_capacity(grid.len());
    let mut acc = R::zero();
    cumulative.push(acc);
    for i in 0..grid.steps() {
        acc += grid.dt() * R::half() * (inv_sq[i] + inv_sq[i + 1]);
        cumulative.push(acc);
    }
    let cov = TriKernel::from_fn(grid, |i, j| pi.at(i) * pi.at(j) * cumulative[j]);
    CovarianceSpec::new(ScalarPath::zeros(grid), cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid<f64> {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn worked_example_is_valid_with_unit_determinant() {
        let m = validate_model(&ModelSpec::worked_example(1.0), &grid(100)).unwrap();
        assert!(m.det_path().values().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn singular_criterion_is_accepted() {
        let m = validate_model(&ModelSpec::singular_example(1.0), &grid(100)).unwrap();
        assert!(m.det_path().values().iter().all(|&d| d == 0.0));
        assert!(m.has_singular_criterion());
    }

    #[test]
    fn zero_lambda22_is_rejected() {
        let spec = ModelSpec::constant(0.0, 1.0, SymMat2::new(1.0, 0.0, 0.0), -1.0, 1.0);
        assert!(matches!(
            validate_model(&spec, &grid(10)),
            Err(Error::ZeroLambda22 { .. })
        ));
    }

    #[test]
    fn indefinite_lambda_is_rejected() {
        let spec = ModelSpec::constant(0.0, 1.0, SymMat2::new(1.0, 2.0, 1.0), -1.0, 1.0);
        assert!(matches!(
            validate_model(&spec, &grid(10)),
            Err(Error::NonPositiveDefinite { .. })
        ));
        let spec = ModelSpec::constant(0.0, 1.0, SymMat2::new(-1.0, 0.0, 1.0), -1.0, 1.0);
        assert!(matches!(
            validate_model(&spec, &grid(10)),
            Err(Error::NonPositiveDefinite { .. })
        ));
    }

    #[test]
    fn non_finite_coefficient_is_rejected() {
        let mut spec = ModelSpec::worked_example(1.0);
        spec.drift = Coefficient::func(|t: f64| if t > 0.5 { f64::NAN } else { 0.0 });
        assert!(matches!(validate_model(&spec, &grid(10)), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn near_singular_lambda_is_clamped() {
        let l12 = -(1.0 + 1e-13);
        let spec = ModelSpec::constant(0.0, 1.0, SymMat2::new(1.0, l12, 1.0), -1.0, 1.0);
        let m = validate_model(&spec, &grid(10)).unwrap();
        assert_eq!(m.lambda(3).l12, -1.0);
        assert_eq!(m.det(At::Node(3)), 0.0);
    }

    #[test]
    fn sample_count_must_match_grid() {
        let mut spec = ModelSpec::worked_example(1.0);
        spec.drift = Coefficient::Samples(vec![0.0; 5]);
        assert!(matches!(validate_model(&spec, &grid(10)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn horizon_must_match_grid() {
        let spec = ModelSpec::worked_example(2.0);
        assert!(matches!(validate_model(&spec, &grid(10)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn validation_is_idempotent() {
        let mut spec = ModelSpec::worked_example(1.0);
        spec.drift = Coefficient::func(|t: f64| t.sin());
        let m = validate_model(&spec, &grid(50)).unwrap();
        assert_eq!(m.validate().unwrap(), m);
    }

    #[test]
    fn pi_zero_drift_is_one() {
        let m = validate_model(&ModelSpec::worked_example(1.0), &grid(100)).unwrap();
        assert!(transition_pi(&m).unwrap().values().iter().all(|&p| p == 1.0));
    }

    #[test]
    fn pi_matches_closed_forms() {
        let g = grid(1000);
        let mut spec = ModelSpec::worked_example(1.0);
        spec.drift = Coefficient::Const(1.0);
        let pi = transition_pi(&validate_model(&spec, &g).unwrap()).unwrap();
        let exact = ScalarPath::from_fn(g, f64::exp);
        assert!(pi.max_abs_diff(&exact) < 1e-9);
        assert!((pi.last() - std::f64::consts::E).abs() < 1e-6);

        spec.drift = Coefficient::func(|t| t);
        let pi = transition_pi(&validate_model(&spec, &g).unwrap()).unwrap();
        assert!((pi.last() - 1.648721).abs() < 1e-6);
        assert!((pi.last() - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn pi_from_samples_uses_interpolated_midpoints() {
        let g = grid(1000);
        let mut spec = ModelSpec::worked_example(1.0);
        spec.drift = Coefficient::Samples(g.nodes().collect());
        let pi = transition_pi(&validate_model(&spec, &g).unwrap()).unwrap();
        assert!((pi.last() - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn brownian_covariance_is_min() {
        let g = grid(200);
        let m = validate_model(&ModelSpec::worked_example(1.0), &g).unwrap();
        let cov = ou_covariance(&m).unwrap();
        for (i, j, v) in cov.kernel().entries() {
            assert!((v - g.t(j).min(g.t(i))).abs() < 1e-10);
        }
        assert!((cov.kernel().at_time(1.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(cov.k(3, 7), cov.k(7, 3));
    }

    #[test]
    fn stable_ou_variance() {
        let g = grid(2000);
        let mut spec = ModelSpec::worked_example(1.0);
        spec.drift = Coefficient::Const(-1.0);
        let cov = ou_covariance(&validate_model(&spec, &g).unwrap()).unwrap();
        let v = cov.kernel().get(2000, 2000);
        assert!((v - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-7);
        assert!((v - 0.432332).abs() < 1e-6);
        assert!(cov.kernel().diag().values().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn covariance_ignores_upper_triangle() {
        let g = grid(4);
        let mean = ScalarPath::zeros(g);
        let base: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| g.t(i).min(g.t(j))).collect()).collect();
        let mut garbage = base.clone();
        garbage[1][3] = 99.0;
        let a = CovarianceSpec::from_full(mean.clone(), &base).unwrap();
        let b = CovarianceSpec::from_full(mean, &garbage).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_keeps_shared_nodes() {
        let m = validate_model(&ModelSpec::worked_example(2.0), &TimeGrid::new(2.0, 20).unwrap()).unwrap();
        let t = m.up_to(1.0).unwrap();
        assert_eq!(t.grid().steps(), 10);
        assert_eq!(t.lambda(10), m.lambda(10));
        assert!(m.up_to(1.05).is_err());
    }
}
