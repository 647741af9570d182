//! Forward Riccati equation for the filtering-error variance, backward Riccati
//! equation for the LEG value function (direct and linearized), and the
//! solvability conditions built on them.

use crate::error::{Error, Result};
use crate::grid::ScalarPath;
use crate::model::{SymMat2, ValidatedModel};
use crate::ode::{rk4_step, At};
use crate::scalar::Real;

/// Magnitude beyond which a Riccati solution is treated as divergent.
pub const BLOWUP_CAP: f64 = 1e8;
/// Margin for the strict inequalities and nonnegativity checks.
pub const CONDITION_MARGIN: f64 = 1e-10;

/// Filtering-error variance `gammaXX(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution<R> {
    pub gamma_xx: ScalarPath<R>,
    /// First node time at which the solution exceeded [`BLOWUP_CAP`]. When set,
    /// `gamma_xx` holds `+inf` from that node on.
    pub blowup: Option<R>,
}

/// `Gamma(T, t)` on the model grid together with the linearization pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSolution<R> {
    pub gamma: ScalarPath<R>,
    pub phi1: ScalarPath<R>,
    pub phi2: ScalarPath<R>,
}

impl<R: Real> BackwardSolution<R> {
    /// `phi2 / phi1` node by node.
    pub fn gamma_from_phi(&self) -> ScalarPath<R> {
        self.phi2.zip_map(&self.phi1, |p2, p1| p2 / p1)
    }
}

#[inline]
fn forward_rhs<R: Real>(model: &ValidatedModel<R>, at: At, g: R) -> R {
    let a = model.drift(at);
    let obs = model.obs_gain(at);
    let damping = obs * obs - model.mu() * model.lambda_at(at).l11;
    R::lit(2.0) * a * g + R::one() - g * g * damping
}

/// Integrates the forward equation, recording a blow-up instead of failing.
pub fn forward_gamma_trajectory<R: Real>(model: &ValidatedModel<R>) -> Result<RiccatiSolution<R>> {
    let grid = *model.grid();
    let cap = R::lit(BLOWUP_CAP);
    let f = |at: At, y: [R; 1]| [forward_rhs(model, at, y[0])];
    let mut values = Vec::with_capacity(grid.len());
    let mut y = [R::zero()];
    values.push(y[0]);
    let mut blowup = None;
    for i in 0..grid.steps() {
        y = rk4_step(y, i, i + 1, grid.dt(), &f);
        if y[0].is_nan() && blowup.is_none() {
            return Err(Error::non_finite("gammaXX", grid.t(i + 1).as_f64()));
        }
        if !(y[0].abs() <= cap) {
            blowup = Some(grid.t(i + 1));
            values.resize(grid.len(), R::infinity());
            break;
        }
        values.push(y[0]);
    }
    Ok(RiccatiSolution {
        gamma_xx: ScalarPath::new(grid, values)?,
        blowup,
    })
}

/// `d/dt gammaXX = 2 a gammaXX + 1 - gammaXX^2 (A^2 - mu Lambda11)`, `gammaXX(0) = 0`.
pub fn solve_forward_gamma<R: Real>(model: &ValidatedModel<R>) -> Result<RiccatiSolution<R>> {
    let sol = forward_gamma_trajectory(model)?;
    match sol.blowup {
        Some(t) => Err(Error::Blowup {
            what: "gammaXX".into(),
            t: t.as_f64(),
        }),
        None => Ok(sol),
    }
}

/// Coefficients of `dGamma/dt = q + 2 b Gamma + r Gamma^2`.
struct BackwardCoefficients<'a, R> {
    model: &'a ValidatedModel<R>,
    gamma_xx: &'a ScalarPath<R>,
    gamma_mid: Vec<R>,
}

impl<'a, R: Real> BackwardCoefficients<'a, R> {
    fn new(model: &'a ValidatedModel<R>, gamma_xx: &'a ScalarPath<R>) -> Result<Self> {
        if !gamma_xx.grid().same_as(model.grid()) {
            return Err(Error::GridMismatch("gammaXX grid differs from the model grid".into()));
        }
        gamma_xx.check_finite("gammaXX")?;
        let gamma_mid = (0..model.grid().steps()).map(|i| gamma_xx.midpoint(i)).collect();
        Ok(Self {
            model,
            gamma_xx,
            gamma_mid,
        })
    }

    #[inline]
    fn eval(&self, at: At) -> (R, R, R) {
        let g = match at {
            At::Node(i) => self.gamma_xx.at(i),
            At::Mid(i) => self.gamma_mid[i],
        };
        let m = self.model;
        let mu = m.mu();
        let l = m.lambda_at(at);
        let det_ratio = m.det(at) / l.l22;
        let obs = m.obs_gain(at);
        let q = -det_ratio;
        let b = -(m.drift(at) + mu * g * det_ratio);
        let r = -mu * g * g * (obs * obs - mu * l.l12 * l.l12 / l.l22);
        (q, b, r)
    }
}

fn integrate_backward_direct<R: Real>(c: &BackwardCoefficients<'_, R>) -> Result<ScalarPath<R>> {
    let grid = *c.model.grid();
    let n = grid.steps();
    let cap = R::lit(BLOWUP_CAP);
    let f = |at: At, y: [R; 1]| {
        let (q, b, r) = c.eval(at);
        [q + R::lit(2.0) * b * y[0] + r * y[0] * y[0]]
    };
    let mut values = vec![R::zero(); grid.len()];
    let mut y = [R::zero()];
    for i in (0..n).rev() {
        y = rk4_step(y, i + 1, i, grid.dt(), &f);
        let t = grid.t(i).as_f64();
        if y[0].is_nan() {
            return Err(Error::non_finite("Gamma", t));
        }
        if !(y[0].abs() <= cap) {
            return Err(Error::Blowup {
                what: "Gamma".into(),
                t,
            });
        }
        values[i] = y[0];
    }
    ScalarPath::new(grid, values)
}

fn integrate_backward_linear<R: Real>(c: &BackwardCoefficients<'_, R>) -> Result<(ScalarPath<R>, ScalarPath<R>)> {
    let grid = *c.model.grid();
    let n = grid.steps();
    let f = |at: At, y: [R; 2]| {
        let (q, b, r) = c.eval(at);
        [-b * y[0] - r * y[1], q * y[0] + b * y[1]]
    };
    let mut phi1 = vec![R::one(); grid.len()];
    let mut phi2 = vec![R::zero(); grid.len()];
    let mut y = [R::one(), R::zero()];
    for i in (0..n).rev() {
        y = rk4_step(y, i + 1, i, grid.dt(), &f);
        let t = grid.t(i).as_f64();
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::non_finite("phi", t));
        }
        if y[0] <= R::zero() {
            return Err(Error::SingularPhi1 { t });
        }
        phi1[i] = y[0];
        phi2[i] = y[1];
    }
    Ok((ScalarPath::new(grid, phi1)?, ScalarPath::new(grid, phi2)?))
}

/// Solves
/// `dGamma/dt = -det/L22 - 2 (a + mu gammaXX det/L22) Gamma - mu Gamma^2 gammaXX^2 (A^2 - mu L12^2/L22)`
/// backward from `Gamma(T, T) = 0`, and fills `phi1`, `phi2` from the linearized system.
pub fn solve_backward_gamma<R: Real>(
    model: &ValidatedModel<R>,
    gamma_xx: &ScalarPath<R>,
) -> Result<BackwardSolution<R>> {
    let c = BackwardCoefficients::new(model, gamma_xx)?;
    let gamma = integrate_backward_direct(&c)?;
    let (phi1, phi2) = integrate_backward_linear(&c)?;
    Ok(BackwardSolution { gamma, phi1, phi2 })
}

/// `Gamma = phi2 / phi1` with
/// `dphi1/dt = -b phi1 - r phi2`, `dphi2/dt = q phi1 + b phi2`, `phi1(T) = 1`, `phi2(T) = 0`,
/// where `q + 2 b Gamma + r Gamma^2` is the backward Riccati right-hand side.
pub fn solve_backward_linearized<R: Real>(
    model: &ValidatedModel<R>,
    gamma_xx: &ScalarPath<R>,
) -> Result<BackwardSolution<R>> {
    let c = BackwardCoefficients::new(model, gamma_xx)?;
    let (phi1, phi2) = integrate_backward_linear(&c)?;
    let gamma = phi2.zip_map(&phi1, |p2, p1| p2 / p1);
    Ok(BackwardSolution { gamma, phi1, phi2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionId {
    /// Bounded nonnegative error variance and `1 - mu M11 gammaXX(T) > 0`.
    Cmu,
    /// Forward and backward Riccati equations bounded and nonnegative.
    CmuStar,
    /// Forward equation bounded and `1 - mu gammaXX Lambda11 > 0` on the grid.
    CmuStarStar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub satisfied: bool,
    /// Set whenever `satisfied` is false.
    pub witness: Option<String>,
}

impl ConditionReport {
    fn ok(condition: ConditionId) -> Self {
        Self {
            condition,
            satisfied: true,
            witness: None,
        }
    }

    fn failed(condition: ConditionId, witness: String) -> Self {
        Self {
            condition,
            satisfied: false,
            witness: Some(witness),
        }
    }
}

fn first_negative<R: Real>(path: &ScalarPath<R>) -> Option<(R, R)> {
    let floor = -R::lit(CONDITION_MARGIN);
    path.values()
        .iter()
        .position(|&v| v < floor)
        .map(|i| (path.grid().t(i), path.at(i)))
}

/// Evaluates the three solvability conditions for terminal matrix `m`.
pub fn check_conditions<R: Real>(model: &ValidatedModel<R>, m: &SymMat2<R>) -> Vec<ConditionReport> {
    let margin = R::lit(CONDITION_MARGIN);
    let mu = model.mu();
    let forward = forward_gamma_trajectory(model);
    let forward_problem: Option<String> = match &forward {
        Err(e) => Some(e.to_string()),
        Ok(sol) => match (sol.blowup, first_negative(&sol.gamma_xx)) {
            (Some(t), _) => Some(format!("gammaXX blows up at t = {t}")),
            (None, Some((t, v))) => Some(format!("gammaXX = {v} < 0 at t = {t}")),
            _ => None,
        },
    };

    let cmu = match (&forward_problem, &forward) {
        (Some(w), _) => ConditionReport::failed(ConditionId::Cmu, w.clone()),
        (None, Ok(sol)) => {
            let v = R::one() - mu * m.l11 * sol.gamma_xx.last();
            if v > margin {
                ConditionReport::ok(ConditionId::Cmu)
            } else {
                ConditionReport::failed(
                    ConditionId::Cmu,
                    format!("1 - mu M11 gammaXX(T) = {v} at T = {}", model.horizon()),
                )
            }
        }
        (None, Err(_)) => unreachable!(),
    };

    let cmu_star = match (&forward_problem, &forward) {
        (Some(w), _) => ConditionReport::failed(ConditionId::CmuStar, w.clone()),
        (None, Ok(sol)) => match solve_backward_gamma(model, &sol.gamma_xx) {
            Err(e) => ConditionReport::failed(ConditionId::CmuStar, e.to_string()),
            Ok(back) => match first_negative(&back.gamma) {
                Some((t, v)) => ConditionReport::failed(ConditionId::CmuStar, format!("Gamma = {v} < 0 at t = {t}")),
                None => ConditionReport::ok(ConditionId::CmuStar),
            },
        },
        (None, Err(_)) => unreachable!(),
    };

    let cmu_star_star = match (&forward_problem, &forward) {
        (Some(w), _) => ConditionReport::failed(ConditionId::CmuStarStar, w.clone()),
        (None, Ok(sol)) => {
            let violation = (0..model.grid().len()).find_map(|i| {
                let v = R::one() - mu * sol.gamma_xx.at(i) * model.lambda(i).l11;
                (v <= margin).then(|| (model.grid().t(i), v))
            });
            match violation {
                Some((t, v)) => ConditionReport::failed(
                    ConditionId::CmuStarStar,
                    format!("1 - mu gammaXX Lambda11 = {v} at t = {t}"),
                ),
                None => ConditionReport::ok(ConditionId::CmuStarStar),
            }
        }
        (None, Err(_)) => unreachable!(),
    };

    vec![cmu, cmu_star, cmu_star_star]
}
