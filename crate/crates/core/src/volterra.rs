//! Riccati-Volterra and Itô-Volterra equations for general Gaussian signals,
//! and the risk-sensitive filter built on them.

use crate::error::{Error, Result};
use crate::grid::{ScalarPath, TimeGrid, TriKernel};
use crate::model::{CovarianceSpec, ValidatedModel};
use crate::ode::At;
use crate::riccati::CONDITION_MARGIN;
use crate::scalar::Real;

/// `gamma(t, s)` for `s <= t` and its diagonal `gammaXX(t) = gamma(t, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraSolution<R> {
    pub gamma: TriKernel<R>,
    pub diag: ScalarPath<R>,
}

/// State of the auxiliary filter, `Z(0) = m(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZPath<R> {
    pub z: ScalarPath<R>,
}

fn check_same_grid<R: Real>(cov: &CovarianceSpec<R>, model: &ValidatedModel<R>) -> Result<TimeGrid<R>> {
    if !cov.grid().same_as(model.grid()) {
        return Err(Error::GridMismatch(
            "covariance grid differs from the model grid".into(),
        ));
    }
    Ok(*model.grid())
}

fn check_increments<R: Real>(grid: &TimeGrid<R>, dy: &[R]) -> Result<()> {
    if dy.len() != grid.steps() {
        return Err(Error::GridMismatch(format!(
            "{} increments for a {}-step grid",
            dy.len(),
            grid.steps()
        )));
    }
    Ok(())
}

/// Solves `gamma(t,s) = K(t,s) - int_0^s gamma(t,r) [A_r^2 - mu Lambda11(r)] gamma(s,r) dr`
/// on the lower triangle.
///
/// Rows are filled in increasing `t`, and within a row in increasing `s`. The memory
/// integral uses the trapezoid rule; the current unknown enters linearly off the
/// diagonal and quadratically on it, and is solved for in closed form.
pub fn solve_riccati_volterra<R: Real>(
    cov: &CovarianceSpec<R>,
    model: &ValidatedModel<R>,
) -> Result<VolterraSolution<R>> {
    let grid = check_same_grid(cov, model)?;
    let n = grid.len();
    let dt = grid.dt();
    let half = R::half();
    let two = R::lit(2.0);
    let q: Vec<R> = (0..n)
        .map(|k| {
            let a = model.obs_gain(At::Node(k));
            a * a - model.mu() * model.lambda(k).l11
        })
        .collect();
    let mut data: Vec<R> = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let start = data.len();
        for j in 0..=i {
            let (done, row_i) = data.split_at(start);
            let row_j: &[R] = if j == i {
                row_i
            } else {
                &done[j * (j + 1) / 2..j * (j + 1) / 2 + j + 1]
            };
            // sum_{k<j} w_k q_k gamma(i,k) gamma(j,k), w_0 = 1/2.
            let memory = if j == 0 {
                R::zero()
            } else {
                let mut acc = half * q[0] * row_i[0] * row_j[0];
                for k in 1..j {
                    acc += q[k] * row_i[k] * row_j[k];
                }
                acc
            };
            let rhs = cov.k(i, j) - dt * memory;
            let value = if j == 0 {
                rhs
            } else if j < i {
                let denom = R::one() + half * dt * q[j] * row_j[j];
                if !(denom > R::zero()) {
                    return Err(Error::non_finite("gamma (step denominator)", grid.t(i).as_f64()));
                }
                rhs / denom
            } else {
                // (dt/2) q g^2 + g - rhs = 0, root continuous in dt -> 0.
                let disc = R::one() + two * dt * q[j] * rhs;
                if !(disc >= R::zero()) {
                    return Err(Error::non_finite("gamma diagonal", grid.t(i).as_f64()));
                }
                two * rhs / (R::one() + disc.sqrt())
            };
            if !value.is_finite() {
                return Err(Error::non_finite("gamma", grid.t(i).as_f64()));
            }
            if j == i && value < -R::lit(CONDITION_MARGIN) {
                return Err(Error::NegativeDiagonal {
                    t: grid.t(i).as_f64(),
                    value: value.as_f64(),
                });
            }
            data.push(value);
        }
    }
    let gamma = TriKernel::from_raw(grid, data);
    let diag = gamma.diag();
    Ok(VolterraSolution { gamma, diag })
}

/// Solves
/// `Z_t = m_t + int_0^t gamma(t,s) mu [L11 Z_s + L12 h_s] ds + int_0^t gamma(t,s) A_s [dY_s - A_s Z_s ds]`
/// by explicit recursion with left-point evaluation in both integrals.
pub fn solve_z_volterra<R: Real>(
    sol: &VolterraSolution<R>,
    cov: &CovarianceSpec<R>,
    model: &ValidatedModel<R>,
    h: &ScalarPath<R>,
    dy: &[R],
) -> Result<ZPath<R>> {
    let grid = check_same_grid(cov, model)?;
    check_increments(&grid, dy)?;
    if !h.grid().same_as(&grid) || !sol.gamma.grid().same_as(&grid) {
        return Err(Error::GridMismatch(
            "estimate path or kernel is on a different grid".into(),
        ));
    }
    let dt = grid.dt();
    let mu = model.mu();
    let z = volterra_recursion(&sol.gamma, cov.mean(), |j, zj| {
        let l = model.lambda(j);
        let a = model.obs_gain(At::Node(j));
        mu * (l.l11 * zj + l.l12 * h.at(j)) * dt + a * (dy[j] - a * zj * dt)
    })?;
    Ok(ZPath { z })
}

/// `Z_i = m_i + sum_{j<i} gamma(i,j) * increment(j, Z_j)`.
fn volterra_recursion<R: Real>(
    gamma: &TriKernel<R>,
    mean: &ScalarPath<R>,
    increment: impl Fn(usize, R) -> R,
) -> Result<ScalarPath<R>> {
    let grid = *gamma.grid();
    let mut z = Vec::with_capacity(grid.len());
    let mut incr = Vec::with_capacity(grid.steps());
    for i in 0..grid.len() {
        let row = gamma.row(i);
        let mut acc = mean.at(i);
        for (g, d) in row.iter().zip(&incr) {
            acc += *g * *d;
        }
        if !acc.is_finite() {
            return Err(Error::non_finite("Z", grid.t(i).as_f64()));
        }
        z.push(acc);
        if i < grid.steps() {
            incr.push(increment(i, acc));
        }
    }
    ScalarPath::new(grid, z)
}

/// Algebraic form of the closed-loop drift in the risk-sensitive Itô-Volterra equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RsDriftForm {
    /// `mu det (1 - mu g L11) / (L22 - mu g det)`, obtained by substituting the
    /// feedback law into the open-loop equation.
    #[default]
    Substitution,
    /// `mu det (1 - mu g L11 det) / (L22 - mu g det)`, with `det` inside the factor.
    MarkovFactor,
    /// `mu det (1 - L11 g det) / (L22 - mu g det)`, with `det` inside the factor and no `mu`.
    GeneralFactor,
}

impl RsDriftForm {
    /// Feedback coefficient multiplying `Z` in the `ds` integral.
    pub fn coefficient<R: Real>(self, mu: R, g: R, l11: R, l22: R, det: R) -> R {
        let num = match self {
            RsDriftForm::Substitution => R::one() - mu * g * l11,
            RsDriftForm::MarkovFactor => R::one() - mu * g * l11 * det,
            RsDriftForm::GeneralFactor => R::one() - l11 * g * det,
        };
        mu * det * num / (l22 - mu * g * det)
    }
}

/// RS gain `-(L12/L22) / (1 - mu g det / L22)` after checking
/// `1 - mu g L11 > 0` and `L22 - mu g det > 0`.
pub(crate) fn rs_gain<R: Real>(mu: R, g: R, l11: R, l12: R, l22: R, det: R, t: R) -> Result<R> {
    let margin = R::lit(CONDITION_MARGIN);
    let c1 = R::one() - mu * g * l11;
    if !(c1 > margin) {
        return Err(Error::ConditionViolated(format!(
            "1 - mu gammaXX Lambda11 = {c1} at t = {t}"
        )));
    }
    let c2 = l22 - mu * g * det;
    if !(c2 > R::zero()) {
        return Err(Error::ConditionViolated(format!(
            "Lambda22 - mu gammaXX det = {c2} at t = {t}"
        )));
    }
    Ok(-(l12 / l22) / (R::one() - mu * g * det / l22))
}

/// Risk-sensitive filter for a general Gaussian signal, with the Riccati-Volterra
/// solution and gains precomputed so that many observation records can be filtered.
#[derive(Debug, Clone)]
pub struct GeneralRsFilter<R> {
    solution: VolterraSolution<R>,
    mean: ScalarPath<R>,
    gain: ScalarPath<R>,
    /// `kappa_s - A_s^2`, the coefficient of `Z_s ds`.
    feedback: Vec<R>,
    obs_gain: Vec<R>,
}

impl<R: Real> GeneralRsFilter<R> {
    pub fn new(cov: &CovarianceSpec<R>, model: &ValidatedModel<R>, form: RsDriftForm) -> Result<Self> {
        let grid = check_same_grid(cov, model)?;
        let solution = solve_riccati_volterra(cov, model)?;
        let mu = model.mu();
        let mut gain = Vec::with_capacity(grid.len());
        let mut feedback = Vec::with_capacity(grid.len());
        let mut obs_gain = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let g = solution.diag.at(i);
            let l = model.lambda(i);
            let det = model.det(At::Node(i));
            let a = model.obs_gain(At::Node(i));
            gain.push(rs_gain(mu, g, l.l11, l.l12, l.l22, det, grid.t(i))?);
            feedback.push(form.coefficient(mu, g, l.l11, l.l22, det) - a * a);
            obs_gain.push(a);
        }
        Ok(Self {
            solution,
            mean: cov.mean().clone(),
            gain: ScalarPath::new(grid, gain)?,
            feedback,
            obs_gain,
        })
    }

    pub fn solution(&self) -> &VolterraSolution<R> {
        &self.solution
    }

    /// Feedback gain `c(t)` with `h_t = c(t) Z_t`.
    pub fn gain(&self) -> &ScalarPath<R> {
        &self.gain
    }

    /// Returns `(h, Z)` for one observation record.
    pub fn apply(&self, dy: &[R]) -> Result<(ScalarPath<R>, ZPath<R>)> {
        let grid = *self.gain.grid();
        check_increments(&grid, dy)?;
        let dt = grid.dt();
        let z = volterra_recursion(&self.solution.gamma, &self.mean, |j, zj| {
            self.feedback[j] * zj * dt + self.obs_gain[j] * dy[j]
        })?;
        let h = self.gain.zip_map(&z, |c, z| c * z);
        Ok((h, ZPath { z }))
    }
}

/// Risk-sensitive estimate `h_t = c(t) Z_t` for a general Gaussian signal.
pub fn rs_filter_general<R: Real>(
    cov: &CovarianceSpec<R>,
    model: &ValidatedModel<R>,
    dy: &[R],
) -> Result<ScalarPath<R>> {
    Ok(GeneralRsFilter::new(cov, model, RsDriftForm::Substitution)?
        .apply(dy)?
        .0)
}
