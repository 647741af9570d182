//! Conditional Laplace transform of exponential-quadratic functionals given
//! the observations, the effective terminal matrix `G_T`, and the LEG optimal risk.

use crate::error::{Error, Result};
use crate::filters::{kalman_filter_with, kalman_gains, propagate_open_loop, FilterGains};
use crate::grid::ScalarPath;
use crate::model::{SymMat2, ValidatedModel};
use crate::montecarlo::CostSample;
use crate::ode::At;
use crate::riccati::{solve_backward_gamma, solve_forward_gamma, BackwardSolution, CONDITION_MARGIN};
use crate::scalar::{compensated_sum, trapezoid, Real};

/// `G_T` and the scalar prefactor `(1 - mu M11 gammaXX(T))^(-1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GMatrix<R> {
    pub matrix: SymMat2<R>,
    pub prefactor: R,
}

/// `G = (1 - mu M11 g)^-1 ((M11, M12), (M12, M22 - mu g det M))`.
pub fn gain_matrix_g<R: Real>(m: &SymMat2<R>, mu: R, gamma_t: R) -> Result<GMatrix<R>> {
    let base = R::one() - mu * m.l11 * gamma_t;
    if !(base > R::zero()) {
        return Err(Error::ConditionViolated(format!("1 - mu M11 gammaXX(T) = {base}")));
    }
    let inv = base.recip();
    let matrix = SymMat2::new(m.l11 * inv, m.l12 * inv, (m.l22 - mu * gamma_t * m.det()) * inv);
    Ok(GMatrix {
        matrix,
        prefactor: inv.sqrt(),
    })
}

/// Evaluator of the right-hand side of the conditional Cameron-Martin formula for a
/// Gauss-Markov model, with the horizon-independent parts precomputed.
#[derive(Debug, Clone)]
pub struct CameronMartin<R> {
    model: ValidatedModel<R>,
    terminal: SymMat2<R>,
    gamma_xx: ScalarPath<R>,
    kalman: FilterGains<R>,
}

impl<R: Real> CameronMartin<R> {
    pub fn new(model: &ValidatedModel<R>, terminal: SymMat2<R>) -> Result<Self> {
        let gamma_xx = solve_forward_gamma(model)
            .map_err(|e| match e {
                Error::Blowup { .. } => Error::ConditionViolated(e.to_string()),
                other => other,
            })?
            .gamma_xx;
        let floor = -R::lit(CONDITION_MARGIN);
        if let Some(i) = gamma_xx.values().iter().position(|&g| g < floor) {
            return Err(Error::ConditionViolated(format!(
                "gammaXX < 0 at t = {}",
                model.grid().t(i)
            )));
        }
        Ok(Self {
            model: model.clone(),
            terminal,
            gamma_xx,
            kalman: kalman_gains(model)?,
        })
    }

    /// `I_t` for horizon `up_to` (a grid node), estimate path `h`, terminal variable `g`
    /// and observation increments `dy`, all given on the full model grid.
    pub fn evaluate(&self, h: &ScalarPath<R>, g: R, dy: &[R], up_to: R) -> Result<CostSample<R>> {
        let grid = *self.model.grid();
        if !h.grid().same_as(&grid) || dy.len() != grid.steps() {
            return Err(Error::GridMismatch(
                "estimate or increments do not match the model grid".into(),
            ));
        }
        let n = grid
            .index_of(up_to)
            .ok_or_else(|| Error::GridMismatch(format!("horizon {up_to} is not a grid node")))?;
        let mu = self.model.mu();
        let gamma_n = self.gamma_xx.at(n);
        let base = R::one() - mu * self.terminal.l11 * gamma_n;
        if !(base > R::lit(CONDITION_MARGIN)) {
            return Err(Error::ConditionViolated(format!(
                "1 - mu M11 gammaXX(T) = {base} at T = {up_to}"
            )));
        }
        let g_mat = gain_matrix_g(&self.terminal, mu, gamma_n)?;

        // Filters run on the full grid; every term below reads only nodes 0..=n.
        let kal = kalman_filter_with(&self.model, &self.kalman, dy)?;
        let z = propagate_open_loop(&self.model, &self.gamma_xx, h, dy)?;
        let dt = grid.dt();
        let half = R::half();

        let variance_term: Vec<R> = (0..=n)
            .map(|i| self.gamma_xx.at(i) * self.model.lambda(i).l11)
            .collect();
        let quad_term: Vec<R> = (0..=n).map(|i| self.model.lambda(i).quad(z.at(i), h.at(i))).collect();
        let ito = compensated_sum(
            (0..n).map(|i| self.model.obs_gain(At::Node(i)) * (z.at(i) - kal.pi_x.at(i)) * kal.innovations[i]),
        );
        let compensator = compensated_sum((0..n).map(|i| {
            let d = self.model.obs_gain(At::Node(i)) * (z.at(i) - kal.pi_x.at(i));
            d * d * dt
        }));

        let logmag = -half * base.ln()
            + half * mu * trapezoid(&variance_term, dt)
            + half * mu * g_mat.matrix.quad(z.at(n), g)
            + half * mu * trapezoid(&quad_term, dt)
            + ito
            - half * compensator;
        if !logmag.is_finite() {
            return Err(Error::non_finite("conditional Laplace exponent", up_to.as_f64()));
        }
        Ok(CostSample::new(mu, logmag))
    }
}

/// Right-hand side `I_upTo` of the conditional Cameron-Martin formula.
pub fn conditional_laplace_rhs<R: Real>(
    model: &ValidatedModel<R>,
    terminal: &SymMat2<R>,
    h: &ScalarPath<R>,
    g: R,
    dy: &[R],
    up_to: R,
) -> Result<R> {
    Ok(CameronMartin::new(model, *terminal)?.evaluate(h, g, dy, up_to)?.value)
}

/// LEG optimal risk
/// `mu exp{(mu/2) int gammaXX L11 ds + (mu/2) int Gamma(T,s) A^2 gammaXX^2 ds}` over `[0, horizon]`.
pub fn optimal_risk<R: Real>(model: &ValidatedModel<R>, horizon: R) -> Result<R> {
    let model = model.up_to(horizon)?;
    let to_condition = |e: Error| match e {
        Error::Blowup { .. } | Error::SingularPhi1 { .. } => Error::ConditionViolated(e.to_string()),
        other => other,
    };
    let gamma_xx = solve_forward_gamma(&model).map_err(to_condition)?.gamma_xx;
    let back = solve_backward_gamma(&model, &gamma_xx).map_err(to_condition)?;
    optimal_risk_from(&model, &gamma_xx, &back)
}

/// As [`optimal_risk`] from precomputed Riccati solutions on the model grid.
pub fn optimal_risk_from<R: Real>(
    model: &ValidatedModel<R>,
    gamma_xx: &ScalarPath<R>,
    back: &BackwardSolution<R>,
) -> Result<R> {
    Ok(optimal_risk_exponent(model, gamma_xx, back)?.value)
}

pub(crate) fn optimal_risk_exponent<R: Real>(
    model: &ValidatedModel<R>,
    gamma_xx: &ScalarPath<R>,
    back: &BackwardSolution<R>,
) -> Result<CostSample<R>> {
    let grid = *model.grid();
    if !gamma_xx.grid().same_as(&grid) || !back.gamma.grid().same_as(&grid) {
        return Err(Error::GridMismatch("Riccati solutions are on a different grid".into()));
    }
    let floor = -R::lit(CONDITION_MARGIN);
    if gamma_xx.values().iter().chain(back.gamma.values()).any(|&v| v < floor) {
        return Err(Error::ConditionViolated("negative Riccati solution".into()));
    }
    let mu = model.mu();
    let first: Vec<R> = (0..grid.len()).map(|i| gamma_xx.at(i) * model.lambda(i).l11).collect();
    let second: Vec<R> = (0..grid.len())
        .map(|i| {
            let a = model.obs_gain(At::Node(i));
            let g = gamma_xx.at(i);
            back.gamma.at(i) * a * a * g * g
        })
        .collect();
    let dt = grid.dt();
    let logmag = R::half() * mu * (trapezoid(&first, dt) + trapezoid(&second, dt));
    Ok(CostSample::new(mu, logmag))
}
