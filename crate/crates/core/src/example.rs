//! Closed-form solution of the example model `a = 0`, `A = 1`, `mu = -1`,
//! `Lambda = ((2,-1),(-1,1))`, and the LEG/RS discrepancy report built on it.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::filters::{extract_kernel, leg_gains, rs_gains, FilterGains};
use crate::grid::{TimeGrid, TriKernel};
use crate::model::{validate_model, ModelSpec};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// A point `0 <= s <= t <= T` of the example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExamplePoint {
    horizon: f64,
    t: f64,
    s: f64,
}

impl ExamplePoint {
    pub fn new(horizon: f64, t: f64, s: f64) -> Result<Self> {
        if !(0.0 <= s && s <= t && t <= horizon && horizon.is_finite()) {
            return Err(Error::Invalid(format!(
                "need 0 <= s <= t <= T, got T = {horizon}, t = {t}, s = {s}"
            )));
        }
        Ok(Self { horizon, t, s })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

/// Quantities with a closed form in the example. Single-time quantities read `t`;
/// `Hhat` does not depend on `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    GammaXX,
    Gamma,
    Phi1,
    Phi2,
    Alpha,
    Hbar,
    Hhat,
}

pub fn gamma_xx(t: f64) -> f64 {
    (SQRT3 * t).tanh() / SQRT3
}

pub fn phi1(horizon: f64, t: f64) -> f64 {
    (horizon - t).cosh() + gamma_xx(t) * (horizon - t).sinh()
}

pub fn phi2(horizon: f64, t: f64) -> f64 {
    (horizon - t).sinh()
}

pub fn big_gamma(horizon: f64, t: f64) -> f64 {
    phi2(horizon, t) / phi1(horizon, t)
}

pub fn alpha(horizon: f64, t: f64) -> f64 {
    (SQRT3 + 1.0) / 2.0 * (horizon + (SQRT3 - 1.0) * t).cosh()
        + (SQRT3 - 1.0) / 2.0 * (horizon - (SQRT3 + 1.0) * t).cosh()
}

/// LEG kernel `sinh(sqrt3 s) cosh(T - t) / sqrt(alpha_t alpha_s)`.
pub fn hbar(horizon: f64, t: f64, s: f64) -> f64 {
    (SQRT3 * s).sinh() * (horizon - t).cosh() / (alpha(horizon, t) * alpha(horizon, s)).sqrt()
}

/// Closed-form candidate for the RS kernel,
/// `(1/sqrt3) cosh(sqrt3 t)^(1/3) sinh(sqrt3 s) cosh(sqrt3 s)^(-2/3)`.
/// It fails `Hhat(t,t) = c(t) gammaXX(t)` and is not the kernel of the RS filter.
pub fn hhat_printed(t: f64, s: f64) -> f64 {
    (SQRT3 * t).cosh().powf(1.0 / 3.0) * (SQRT3 * s).sinh() * (SQRT3 * s).cosh().powf(-2.0 / 3.0) / SQRT3
}

pub fn eval_example(what: Quantity, p: ExamplePoint) -> f64 {
    let (horizon, t, s) = (p.horizon, p.t, p.s);
    match what {
        Quantity::GammaXX => gamma_xx(t),
        Quantity::Gamma => big_gamma(horizon, t),
        Quantity::Phi1 => phi1(horizon, t),
        Quantity::Phi2 => phi2(horizon, t),
        Quantity::Alpha => alpha(horizon, t),
        Quantity::Hbar => hbar(horizon, t, s),
        Quantity::Hhat => hhat_printed(t, s),
    }
}

/// One tabulated node pair of the discrepancy report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyRow {
    pub horizon: f64,
    pub t: f64,
    pub s: f64,
    pub hbar: f64,
    pub hhat_numeric: f64,
    pub hhat_printed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyReport {
    pub steps_per_unit: usize,
    pub rows: Vec<DiscrepancyRow>,
    /// `|Hbar(1,0.5,0.25) - Hbar(2,0.5,0.25)|` from the closed form.
    pub hbar_gap: f64,
    /// The same gap between the numeric LEG kernels.
    pub hbar_gap_numeric: f64,
    /// Numeric LEG kernels against the closed form, for `T = 1` and `T = 2`.
    pub leg_oracle_dev: [f64; 2],
    /// Whether the numeric RS kernels for `T = 1` and `T = 2` agree bit for bit on `t <= 1`.
    pub rs_bit_identical: bool,
    /// `max |Hbar(1,t,s) - Hhat_numeric(t,s)|` over `s <= t <= 1`.
    pub leg_rs_max_gap: f64,
    /// `max |Hhat_printed - Hhat_numeric|` over `s <= t <= 1`.
    pub printed_hhat_max_dev: f64,
    /// Numeric RS kernel at `(t,s) = (1, 0.5)`.
    pub hhat_numeric_at_1_half: f64,
    pub printed_hhat_dev_at_1_half: f64,
    /// `max |diag - c gammaXX A|` of the numeric RS kernel.
    pub rs_diag_identity_dev: f64,
    /// `max |H_LEG - H_RS|` for the singular criterion, `T = 1`.
    pub singular_gap: f64,
}

struct Kernels {
    grid: TimeGrid<f64>,
    leg: TriKernel<f64>,
    rs: TriKernel<f64>,
    rs_gains: FilterGains<f64>,
}

fn kernels(spec: &ModelSpec<f64>, horizon: f64, steps: usize) -> Result<Kernels> {
    let grid = TimeGrid::new(horizon, steps)?;
    let model = validate_model(spec, &grid)?;
    let rs_gains = rs_gains(&model)?;
    Ok(Kernels {
        grid,
        leg: extract_kernel(&leg_gains(&model, horizon)?)?,
        rs: extract_kernel(&rs_gains)?,
        rs_gains,
    })
}

/// Numeric LEG and RS kernels for `T = 1` and `T = 2` at `steps_per_unit` steps per
/// unit time, compared with the closed forms. Rows are tabulated every `stride` nodes.
pub fn discrepancy_report(steps_per_unit: usize, stride: usize) -> Result<DiscrepancyReport> {
    if steps_per_unit == 0 || !steps_per_unit.is_multiple_of(4) {
        return Err(Error::Invalid(format!(
            "steps per unit must be a positive multiple of 4, got {steps_per_unit}"
        )));
    }
    if stride == 0 {
        return Err(Error::Invalid("stride must be positive".into()));
    }
    let n1 = steps_per_unit;
    let k1 = kernels(&ModelSpec::worked_example(1.0), 1.0, n1)?;
    let k2 = kernels(&ModelSpec::worked_example(2.0), 2.0, 2 * n1)?;

    let mut rows = Vec::new();
    let mut leg_oracle_dev = [0.0f64; 2];
    for (slot, k) in [&k1, &k2].into_iter().enumerate() {
        let horizon = k.grid.horizon();
        for (i, j, v) in k.leg.entries() {
            let (t, s) = (k.grid.t(i), k.grid.t(j));
            leg_oracle_dev[slot] = leg_oracle_dev[slot].max((v - hbar(horizon, t, s)).abs());
            if i % stride == 0 && j % stride == 0 {
                rows.push(DiscrepancyRow {
                    horizon,
                    t,
                    s,
                    hbar: hbar(horizon, t, s),
                    hhat_numeric: k.rs.get(i, j),
                    hhat_printed: hhat_printed(t, s),
                });
            }
        }
    }

    let (i_half, i_quarter) = (n1 / 2, n1 / 4);
    let hbar_gap = (hbar(1.0, 0.5, 0.25) - hbar(2.0, 0.5, 0.25)).abs();
    let hbar_gap_numeric = (k1.leg.get(i_half, i_quarter) - k2.leg.get(i_half, i_quarter)).abs();

    let mut rs_bit_identical = true;
    let mut leg_rs_max_gap = 0.0f64;
    let mut printed_hhat_max_dev = 0.0f64;
    for (i, j, v) in k1.rs.entries() {
        rs_bit_identical &= v.to_bits() == k2.rs.get(i, j).to_bits();
        let (t, s) = (k1.grid.t(i), k1.grid.t(j));
        leg_rs_max_gap = leg_rs_max_gap.max((hbar(1.0, t, s) - v).abs());
        printed_hhat_max_dev = printed_hhat_max_dev.max((hhat_printed(t, s) - v).abs());
    }
    let hhat_numeric_at_1_half = k1.rs.get(n1, i_half);
    let printed_hhat_dev_at_1_half = (hhat_printed(1.0, 0.5) - hhat_numeric_at_1_half).abs();

    let g = &k1.rs_gains;
    let rs_diag_identity_dev = (0..k1.grid.len())
        .map(|i| (k1.rs.get(i, i) - g.gain.at(i) * g.obsgain.at(i)).abs())
        .fold(0.0, f64::max);

    let ks = kernels(&ModelSpec::singular_example(1.0), 1.0, n1)?;
    let singular_gap = ks.leg.max_abs_diff(&ks.rs);

    Ok(DiscrepancyReport {
        steps_per_unit,
        rows,
        hbar_gap,
        hbar_gap_numeric,
        leg_oracle_dev,
        rs_bit_identical,
        leg_rs_max_gap,
        printed_hhat_max_dev,
        hhat_numeric_at_1_half,
        printed_hhat_dev_at_1_half,
        rs_diag_identity_dev,
        singular_gap,
    })
}

impl DiscrepancyReport {
    /// Plain-text summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let dt = 1.0 / self.steps_per_unit as f64;
        let _ = writeln!(
            out,
            "LEG/RS discrepancy for a = 0, A = 1, mu = -1, Lambda = ((2,-1),(-1,1))"
        );
        let _ = writeln!(out, "grid step dt = {dt:e}; horizons T = 1 and T = 2");
        let _ = writeln!(out);
        let _ = writeln!(out, "LEG kernel Hbar(T,t,s) depends on the horizon:");
        let _ = writeln!(out, "  Hbar(1,0.5,0.25) = {:.6}", hbar(1.0, 0.5, 0.25));
        let _ = writeln!(out, "  Hbar(2,0.5,0.25) = {:.6}", hbar(2.0, 0.5, 0.25));
        let _ = writeln!(
            out,
            "  |difference| closed form = {:.6}, numeric = {:.6}",
            self.hbar_gap, self.hbar_gap_numeric
        );
        let _ = writeln!(
            out,
            "  numeric vs closed form, max |dev|: T = 1: {:.3e}, T = 2: {:.3e}",
            self.leg_oracle_dev[0], self.leg_oracle_dev[1]
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "RS kernel does not depend on the horizon:");
        let _ = writeln!(
            out,
            "  numeric kernels for T = 1 and T = 2 bit-identical on t <= 1: {}",
            if self.rs_bit_identical { "yes" } else { "no" }
        );
        let _ = writeln!(
            out,
            "  max |Hhat(t,t) - c(t) gammaXX(t) A(t)| = {:.3e}",
            self.rs_diag_identity_dev
        );
        let _ = writeln!(
            out,
            "  max |Hbar(1,t,s) - Hhat(t,s)| over s <= t <= 1 = {:.6}",
            self.leg_rs_max_gap
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "Closed-form Hhat candidate against the numeric RS kernel:");
        let _ = writeln!(
            out,
            "  at (t,s) = (1,0.5): candidate {:.6}, numeric {:.6}, |deviation| = {:.6}",
            hhat_printed(1.0, 0.5),
            self.hhat_numeric_at_1_half,
            self.printed_hhat_dev_at_1_half
        );
        let _ = writeln!(
            out,
            "  max |deviation| over s <= t <= 1 = {:.6}",
            self.printed_hhat_max_dev
        );
        let _ = writeln!(
            out,
            "  the candidate fails Hhat(t,t) = c(t) gammaXX(t) and is not used as a reference"
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "Singular criterion control (l11 = l22 = -l12 = 1):");
        let _ = writeln!(out, "  max |H_LEG - H_RS| = {:.3e}", self.singular_gap);
        out
    }
}
