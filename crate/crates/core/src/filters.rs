//! Linear filters of the form `h_t = c(t) Z_t`, `dZ = zdrift Z dt + obsgain dY`:
//! the Kalman-Bucy conditional mean, the risk-neutral estimate, and the LEG
//! and RS optimal estimates, plus their impulse-response kernels.
//!
//! All filters share one discretization. Over a step the homogeneous part is
//! integrated exactly with the trapezoid-averaged drift and the observation
//! increment enters at the left node (Itô):
//! `Z_{i+1} = exp((zdrift_i + zdrift_{i+1}) dt / 2) (Z_i + obsgain_i dY_i)`.
//! The kernels returned by [`extract_kernel`] reproduce this recursion exactly.

use crate::error::{Error, Result};
use crate::grid::{ScalarPath, TimeGrid, TriKernel};
use crate::model::ValidatedModel;
use crate::ode::At;
use crate::riccati::{solve_backward_gamma, solve_forward_gamma, RiccatiSolution, CONDITION_MARGIN};
use crate::scalar::Real;
use crate::volterra::{rs_gain, RsDriftForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    /// Kalman-Bucy conditional mean `pi_t(X)`, gain 1.
    ConditionalMean,
    RiskNeutral,
    Leg,
    Rs,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::ConditionalMean => "conditional-mean",
            FilterKind::RiskNeutral => "risk-neutral",
            FilterKind::Leg => "LEG",
            FilterKind::Rs => "RS",
        }
    }
}

/// Coefficient paths of a linear filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterGains<R> {
    pub kind: FilterKind,
    /// `c(t)` in `h_t = c(t) Z_t`.
    pub gain: ScalarPath<R>,
    /// Closed-loop drift of `Z`, feedback included.
    pub zdrift: ScalarPath<R>,
    /// Coefficient of `dY`, `A(t) gammaXX(t)`.
    pub obsgain: ScalarPath<R>,
}

impl<R: Real> FilterGains<R> {
    pub fn grid(&self) -> &TimeGrid<R> {
        self.gain.grid()
    }

    /// Per-step growth factors `exp((zdrift_i + zdrift_{i+1}) dt / 2)` as logs.
    fn log_steps(&self) -> Vec<R> {
        let dt = self.grid().dt();
        let d = self.zdrift.values();
        d.windows(2).map(|w| R::half() * dt * (w[0] + w[1])).collect()
    }
}

/// Conditional mean and innovation increments `dnu_i = dY_i - A_i pi_i dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOutput<R> {
    pub pi_x: ScalarPath<R>,
    pub innovations: Vec<R>,
}

/// Output of [`apply_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun<R> {
    pub h: ScalarPath<R>,
    pub z: ScalarPath<R>,
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

fn as_condition(e: Error) -> Error {
    match e {
        Error::Blowup { .. } | Error::SingularPhi1 { .. } | Error::NegativeDiagonal { .. } => {
            Error::ConditionViolated(e.to_string())
        }
        other => other,
    }
}

fn node_path<R: Real>(grid: TimeGrid<R>, f: impl FnMut(usize) -> R) -> ScalarPath<R> {
    ScalarPath::new(grid, (0..grid.len()).map(f).collect()).expect("one value per node")
}

fn check_forward<R: Real>(model: &ValidatedModel<R>, forward: &RiccatiSolution<R>) -> Result<()> {
    if !forward.gamma_xx.grid().same_as(model.grid()) {
        return Err(Error::GridMismatch("gammaXX grid differs from the model grid".into()));
    }
    if let Some(t) = forward.blowup {
        return Err(Error::ConditionViolated(format!("gammaXX blows up at t = {t}")));
    }
    Ok(())
}

/// Gains of the Kalman-Bucy filter: `dpi = a pi dt + gamma A (dY - A pi dt)` with the
/// risk-neutral error variance.
pub fn kalman_gains<R: Real>(model: &ValidatedModel<R>) -> Result<FilterGains<R>> {
    let neutral = model.with_mu(R::zero());
    let gamma = solve_forward_gamma(&neutral)?.gamma_xx;
    let grid = *model.grid();
    let at = At::Node;
    Ok(FilterGains {
        kind: FilterKind::ConditionalMean,
        gain: ScalarPath::constant(grid, R::one()),
        zdrift: node_path(grid, |i| {
            let a = model.obs_gain(at(i));
            model.drift(at(i)) - a * a * gamma.at(i)
        }),
        obsgain: node_path(grid, |i| model.obs_gain(at(i)) * gamma.at(i)),
    })
}

/// Runs the Kalman-Bucy filter and emits the innovation increments.
pub fn kalman_filter<R: Real>(model: &ValidatedModel<R>, dy: &[R]) -> Result<KalmanOutput<R>> {
    kalman_filter_with(model, &kalman_gains(model)?, dy)
}

/// As [`kalman_filter`] with precomputed [`kalman_gains`].
pub fn kalman_filter_with<R: Real>(
    model: &ValidatedModel<R>,
    gains: &FilterGains<R>,
    dy: &[R],
) -> Result<KalmanOutput<R>> {
    let pi_x = apply_filter(gains, dy)?.z;
    let dt = model.grid().dt();
    let innovations = dy
        .iter()
        .enumerate()
        .map(|(i, &d)| d - model.obs_gain(At::Node(i)) * pi_x.at(i) * dt)
        .collect();
    Ok(KalmanOutput { pi_x, innovations })
}

/// `h_t = -(Lambda12 / Lambda22) pi_t(X)`.
pub fn risk_neutral_h<R: Real>(model: &ValidatedModel<R>, kal: &KalmanOutput<R>) -> ScalarPath<R> {
    node_path(*kal.pi_x.grid(), |i| {
        let l = model.lambda(i);
        -(l.l12 / l.l22) * kal.pi_x.at(i)
    })
}

/// The risk-neutral estimate as a linear filter on `dY`.
pub fn risk_neutral_gains<R: Real>(model: &ValidatedModel<R>) -> Result<FilterGains<R>> {
    let k = kalman_gains(model)?;
    let grid = *model.grid();
    Ok(FilterGains {
        kind: FilterKind::RiskNeutral,
        gain: node_path(grid, |i| {
            let l = model.lambda(i);
            -(l.l12 / l.l22)
        }),
        ..k
    })
}

/// LEG gains for horizon `horizon` (a node of the model grid); the gains live on `[0, horizon]`.
pub fn leg_gains<R: Real>(model: &ValidatedModel<R>, horizon: R) -> Result<FilterGains<R>> {
    let forward = solve_forward_gamma(model).map_err(as_condition)?;
    leg_gains_from(model, &forward, horizon)
}

/// As [`leg_gains`], reusing a forward solve (it does not depend on the horizon).
pub fn leg_gains_from<R: Real>(
    model: &ValidatedModel<R>,
    forward: &RiccatiSolution<R>,
    horizon: R,
) -> Result<FilterGains<R>> {
    check_forward(model, forward)?;
    let model = model.up_to(horizon)?;
    let grid = *model.grid();
    let gamma_xx = forward.gamma_xx.truncate(grid.steps())?;
    let floor = -R::lit(CONDITION_MARGIN);
    if let Some(i) = gamma_xx.values().iter().position(|&g| g < floor) {
        return Err(Error::ConditionViolated(format!("gammaXX < 0 at t = {}", grid.t(i))));
    }
    let back = solve_backward_gamma(&model, &gamma_xx).map_err(as_condition)?;
    if let Some(i) = back.gamma.values().iter().position(|&g| g < floor) {
        return Err(Error::ConditionViolated(format!(
            "Gamma(T, t) < 0 at t = {}",
            grid.t(i)
        )));
    }
    let mu = model.mu();
    let mut gain = Vec::with_capacity(grid.len());
    let mut zdrift = Vec::with_capacity(grid.len());
    let mut obsgain = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let at = At::Node(i);
        let (g, big) = (gamma_xx.at(i), back.gamma.at(i));
        let l = model.lambda(i);
        let a = model.obs_gain(at);
        gain.push(-(l.l12 / l.l22) * (R::one() + mu * g * big));
        zdrift.push(model.drift(at) + mu * (g / l.l22) * (model.det(at) - mu * l.l12 * l.l12 * g * big) - a * a * g);
        obsgain.push(a * g);
    }
    Ok(FilterGains {
        kind: FilterKind::Leg,
        gain: ScalarPath::new(grid, gain)?,
        zdrift: ScalarPath::new(grid, zdrift)?,
        obsgain: ScalarPath::new(grid, obsgain)?,
    })
}

/// RS gains `c = -(L12/L22) [1 - mu gammaXX det / L22]^-1`; independent of any horizon.
pub fn rs_gains<R: Real>(model: &ValidatedModel<R>) -> Result<FilterGains<R>> {
    rs_gains_with_form(model, RsDriftForm::Substitution)
}

pub fn rs_gains_with_form<R: Real>(model: &ValidatedModel<R>, form: RsDriftForm) -> Result<FilterGains<R>> {
    let forward = solve_forward_gamma(model).map_err(as_condition)?;
    rs_gains_from(model, &forward, form)
}

pub fn rs_gains_from<R: Real>(
    model: &ValidatedModel<R>,
    forward: &RiccatiSolution<R>,
    form: RsDriftForm,
) -> Result<FilterGains<R>> {
    check_forward(model, forward)?;
    let grid = *model.grid();
    let mu = model.mu();
    let mut gain = Vec::with_capacity(grid.len());
    let mut zdrift = Vec::with_capacity(grid.len());
    let mut obsgain = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let at = At::Node(i);
        let g = forward.gamma_xx.at(i);
        let l = model.lambda(i);
        let det = model.det(at);
        let a = model.obs_gain(at);
        gain.push(rs_gain(mu, g, l.l11, l.l12, l.l22, det, grid.t(i))?);
        zdrift.push(model.drift(at) + g * (form.coefficient(mu, g, l.l11, l.l22, det) - a * a));
        obsgain.push(a * g);
    }
    Ok(FilterGains {
        kind: FilterKind::Rs,
        gain: ScalarPath::new(grid, gain)?,
        zdrift: ScalarPath::new(grid, zdrift)?,
        obsgain: ScalarPath::new(grid, obsgain)?,
    })
}

/// Runs a linear filter on observation increments, `Z_0 = 0`.
pub fn apply_filter<R: Real>(gains: &FilterGains<R>, dy: &[R]) -> Result<FilterRun<R>> {
    let grid = *gains.grid();
    check_increments(&grid, dy)?;
    let growth: Vec<R> = gains.log_steps().into_iter().map(R::exp).collect();
    let mut z = Vec::with_capacity(grid.len());
    let mut state = R::zero();
    z.push(state);
    for i in 0..grid.steps() {
        state = growth[i] * (state + gains.obsgain.at(i) * dy[i]);
        if !state.is_finite() {
            return Err(Error::non_finite("Z", grid.t(i + 1).as_f64()));
        }
        z.push(state);
    }
    let z = ScalarPath::new(grid, z)?;
    let h = gains.gain.zip_map(&z, |c, z| c * z);
    Ok(FilterRun { h, z })
}

/// Impulse response `H(t_i, t_j) = c(t_i) Phi(t_i, t_j) obsgain(t_j)`, with `Phi` the
/// transition of `zdrift` from the trapezoid-integrated log. `h_i = sum_{j<i} H(i,j) dY_j`.
pub fn extract_kernel<R: Real>(gains: &FilterGains<R>) -> Result<TriKernel<R>> {
    let grid = *gains.grid();
    let mut log_phi = Vec::with_capacity(grid.len());
    let mut acc = R::zero();
    log_phi.push(acc);
    for e in gains.log_steps() {
        acc += e;
        log_phi.push(acc);
    }
    let kernel = TriKernel::from_fn(grid, |i, j| {
        gains.gain.at(i) * (log_phi[i] - log_phi[j]).exp() * gains.obsgain.at(j)
    });
    if let Some((i, _, _)) = kernel.entries().find(|(_, _, v)| !v.is_finite()) {
        return Err(Error::non_finite("kernel", grid.t(i).as_f64()));
    }
    Ok(kernel)
}

/// Solves the open-loop equation for an arbitrary estimate path `h`:
/// `dZ = [a - gammaXX (A^2 - mu L11)] Z dt + mu gammaXX L12 h dt + gammaXX A dY`, `Z_0 = 0`,
/// with the same step as [`apply_filter`].
pub fn propagate_open_loop<R: Real>(
    model: &ValidatedModel<R>,
    gamma_xx: &ScalarPath<R>,
    h: &ScalarPath<R>,
    dy: &[R],
) -> Result<ScalarPath<R>> {
    let grid = *model.grid();
    check_increments(&grid, dy)?;
    if !gamma_xx.grid().same_as(&grid) || !h.grid().same_as(&grid) {
        return Err(Error::GridMismatch("open-loop inputs are on a different grid".into()));
    }
    let mu = model.mu();
    let dt = grid.dt();
    let drift = node_path(grid, |i| {
        let at = At::Node(i);
        let a = model.obs_gain(at);
        model.drift(at) - gamma_xx.at(i) * (a * a - mu * model.lambda(i).l11)
    });
    let mut z = Vec::with_capacity(grid.len());
    let mut state = R::zero();
    z.push(state);
    for (i, &d) in dy.iter().enumerate() {
        let g = gamma_xx.at(i);
        let forcing = mu * g * model.lambda(i).l12 * h.at(i) * dt + g * model.obs_gain(At::Node(i)) * d;
        state = (R::half() * dt * (drift.at(i) + drift.at(i + 1))).exp() * (state + forcing);
        if !state.is_finite() {
            return Err(Error::non_finite("Z", grid.t(i + 1).as_f64()));
        }
        z.push(state);
    }
    ScalarPath::new(grid, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, Coefficient, ModelSpec, SymMat2};

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    fn example(n: usize) -> ValidatedModel<f64> {
        validate_model(&ModelSpec::worked_example(1.0), &TimeGrid::new(1.0, n).unwrap()).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.1
            })
            .collect()
    }

    #[test]
    fn kalman_with_blind_sensor() {
        let spec = ModelSpec::constant(0.3, 0.0, SymMat2::new(2.0, -1.0, 1.0), -1.0, 1.0);
        let m = validate_model(&spec, &TimeGrid::new(1.0, 100).unwrap()).unwrap();
        let dy = noise(100, 1);
        let k = kalman_filter(&m, &dy).unwrap();
        assert!(k.pi_x.values().iter().all(|&p| p == 0.0));
        assert_eq!(k.innovations, dy);
    }

    #[test]
    fn kalman_zero_record_and_innovations() {
        let m = example(100);
        let k = kalman_filter(&m, &[0.0; 100]).unwrap();
        assert!(k.pi_x.values().iter().all(|&p| p == 0.0));
        let dy = noise(100, 2);
        let k = kalman_filter(&m, &dy).unwrap();
        for (i, (&nu, &d)) in k.innovations.iter().zip(&dy).enumerate() {
            assert_eq!(nu, d - k.pi_x.at(i) * m.grid().dt());
        }
    }

    #[test]
    fn risk_neutral_estimate() {
        let m = example(100);
        let k = kalman_filter(&m, &noise(100, 3)).unwrap();
        assert_eq!(risk_neutral_h(&m, &k), k.pi_x);
        let spec = ModelSpec::constant(0.0, 1.0, SymMat2::new(2.0, 0.0, 1.0), -1.0, 1.0);
        let m0 = validate_model(&spec, m.grid()).unwrap();
        assert!(risk_neutral_h(&m0, &k).values().iter().all(|&h| h == 0.0));
        let zero = KalmanOutput {
            pi_x: ScalarPath::zeros(*m.grid()),
            innovations: vec![0.0; 100],
        };
        assert!(risk_neutral_h(&m, &zero).values().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn leg_gain_values() {
        let m = example(2000);
        let g = leg_gains(&m, 1.0).unwrap();
        assert_eq!(g.gain.at(0), 1.0);
        assert!((g.gain.at(1000) - 0.842752).abs() < 1e-6);
        assert!((g.gain.last() - 1.0).abs() < 1e-15);
        assert_eq!(g.obsgain.at(0), 0.0);
    }

    #[test]
    fn leg_for_shorter_horizon_lives_on_prefix() {
        let m: ValidatedModel<f64> =
            validate_model(&ModelSpec::worked_example(2.0), &TimeGrid::new(2.0, 400).unwrap()).unwrap();
        let g = leg_gains(&m, 1.0).unwrap();
        assert_eq!(g.grid().steps(), 200);
        assert!((g.gain.last() - 1.0).abs() < 1e-15);
        assert!(leg_gains(&m, 1.003).is_err());
    }

    #[test]
    fn rs_gain_formula() {
        // gammaXX = 0.5 on the example model: 1 / (1 + 0.5).
        let c: f64 = rs_gain(-1.0, 0.5, 2.0, -1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((c - 2.0 / 3.0).abs() < 1e-15);
        let g = rs_gains(&example(100)).unwrap();
        assert_eq!(g.gain.at(0), 1.0);
    }

    #[test]
    fn singular_criterion_leg_equals_rs() {
        let m: ValidatedModel<f64> =
            validate_model(&ModelSpec::singular_example(1.0), &TimeGrid::new(1.0, 500).unwrap()).unwrap();
        let leg = leg_gains(&m, 1.0).unwrap();
        let rs = rs_gains(&m).unwrap();
        assert!(leg.gain.values().iter().all(|c| (c - 1.0).abs() < 1e-10));
        assert!(rs.gain.values().iter().all(|&c| c == 1.0));
        assert!(leg.zdrift.max_abs_diff(&rs.zdrift) < 1e-10);
    }

    #[test]
    fn zero_record_gives_zero_estimate() {
        let g = leg_gains(&example(100), 1.0).unwrap();
        let run = apply_filter(&g, &[0.0; 100]).unwrap();
        assert!(run.h.values().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn filter_is_linear() {
        let g = rs_gains(&example(300)).unwrap();
        let (d1, d2) = (noise(300, 4), noise(300, 5));
        let (a, b) = (1.7, -0.3);
        let mix: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| a * x + b * y).collect();
        let h1 = apply_filter(&g, &d1).unwrap().h;
        let h2 = apply_filter(&g, &d2).unwrap().h;
        let hm = apply_filter(&g, &mix).unwrap().h;
        assert!(h1.zip_map(&h2, |x, y| a * x + b * y).max_abs_diff(&hm) < 1e-14);
    }

    #[test]
    fn impulse_response_is_kernel_column() {
        let g = leg_gains(&example(200), 1.0).unwrap();
        let k = extract_kernel(&g).unwrap();
        for j in [0, 17, 100, 199] {
            let mut dy = vec![0.0; 200];
            dy[j] = 1.0;
            let h = apply_filter(&g, &dy).unwrap().h;
            for i in 0..=200 {
                let expected = if i > j { k.get(i, j) } else { 0.0 };
                assert!((h.at(i) - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn kernel_diagonal_and_first_column() {
        let m = example(2000);
        let g = leg_gains(&m, 1.0).unwrap();
        let k = extract_kernel(&g).unwrap();
        assert!((k.get(2000, 2000) - 0.542303).abs() < 1e-6);
        assert!((0..=2000).all(|i| k.get(i, 0) == 0.0));
        for i in 0..=2000 {
            assert_eq!(k.get(i, i), g.gain.at(i) * g.obsgain.at(i));
        }
    }

    #[test]
    fn leg_kernel_close_to_closed_form() {
        // Independent oracle: the closed-form LEG kernel of the example model.
        let alpha = |t: f64| {
            (SQRT3 + 1.0) / 2.0 * (1.0 + (SQRT3 - 1.0) * t).cosh()
                + (SQRT3 - 1.0) / 2.0 * (1.0 - (SQRT3 + 1.0) * t).cosh()
        };
        let hbar = |t: f64, s: f64| (SQRT3 * s).sinh() * (1.0 - t).cosh() / (alpha(t) * alpha(s)).sqrt();
        let m = example(1000);
        let k = extract_kernel(&leg_gains(&m, 1.0).unwrap()).unwrap();
        let err = k
            .entries()
            .map(|(i, j, v)| (v - hbar(m.grid().t(i), m.grid().t(j))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn mu_zero_reduces_to_risk_neutral() {
        let m = example(400).with_mu(0.0);
        let dy = noise(400, 6);
        let rn = risk_neutral_h(&m, &kalman_filter(&m, &dy).unwrap());
        let leg = apply_filter(&leg_gains(&m, 1.0).unwrap(), &dy).unwrap().h;
        let rs = apply_filter(&rs_gains(&m).unwrap(), &dy).unwrap().h;
        assert!(leg.max_abs_diff(&rn) < 1e-9);
        assert!(rs.max_abs_diff(&rn) < 1e-9);
    }

    #[test]
    fn open_loop_matches_closed_loop_rs() {
        let m = example(2000);
        let rs = rs_gains(&m).unwrap();
        let dy = noise(2000, 7);
        let closed = apply_filter(&rs, &dy).unwrap();
        let gamma = solve_forward_gamma(&m).unwrap().gamma_xx;
        let open = propagate_open_loop(&m, &gamma, &closed.h, &dy).unwrap();
        assert!(open.max_abs_diff(&closed.z) < 1e-4);
    }

    #[test]
    fn open_loop_with_zero_criterion_is_kalman() {
        let spec = ModelSpec::constant(0.2, 1.0, SymMat2::new(0.0, 0.0, 1.0), -1.0, 1.0);
        let m = validate_model(&spec, &TimeGrid::new(1.0, 100).unwrap()).unwrap();
        let dy = noise(100, 8);
        let gamma = solve_forward_gamma(&m).unwrap().gamma_xx;
        let h = ScalarPath::from_fn(*m.grid(), |t| t * 3.0);
        let open = propagate_open_loop(&m, &gamma, &h, &dy).unwrap();
        assert_eq!(open, kalman_filter(&m, &dy).unwrap().pi_x);
    }

    #[test]
    fn leg_rejects_blowup() {
        let m = example(100).with_mu(10.0);
        assert!(matches!(leg_gains(&m, 1.0), Err(Error::ConditionViolated(_))));
        assert!(matches!(rs_gains(&m), Err(Error::ConditionViolated(_))));
    }

    #[test]
    fn time_varying_gains_are_finite() {
        let mut spec = ModelSpec::worked_example(1.0);
        spec.drift = Coefficient::func(|t: f64| (3.0 * t).sin());
        spec.obs_gain = Coefficient::func(|t: f64| 1.0 + t);
        let m = validate_model(&spec, &TimeGrid::new(1.0, 200).unwrap()).unwrap();
        for g in [
            leg_gains(&m, 1.0).unwrap(),
            rs_gains(&m).unwrap(),
            risk_neutral_gains(&m).unwrap(),
        ] {
            assert!(extract_kernel(&g).unwrap().entries().all(|(_, _, v)| v.is_finite()));
        }
    }
}
