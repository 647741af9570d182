//! Fixed-step classical Runge-Kutta used by every deterministic ODE in the crate.

use crate::scalar::Real;

/// Where a right-hand side is evaluated: a grid node or the midpoint after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum At {
    Node(usize),
    Mid(usize),
}

/// One RK4 step from node `from` to node `to` (`to = from ± 1`). A negative
/// direction integrates in reversed time with the same scheme.
pub(crate) fn rk4_step<R: Real, const D: usize>(
    y: [R; D],
    from: usize,
    to: usize,
    dt: R,
    f: &impl Fn(At, [R; D]) -> [R; D],
) -> [R; D] {
    let h = if to > from { dt } else { -dt };
    let mid = At::Mid(from.min(to));
    let two = R::lit(2.0);
    let axpy = |y: [R; D], k: [R; D], s: R| {
        let mut out = y;
        for d in 0..D {
            out[d] = y[d] + s * k[d];
        }
        out
    };
    let k1 = f(At::Node(from), y);
    let k2 = f(mid, axpy(y, k1, h / two));
    let k3 = f(mid, axpy(y, k2, h / two));
    let k4 = f(At::Node(to), axpy(y, k3, h));
    let mut out = y;
    for d in 0..D {
        out[d] = y[d] + h / R::lit(6.0) * (k1[d] + two * k2[d] + two * k3[d] + k4[d]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_forward_and_back() {
        let dt = 0.01_f64;
        let f = |_: At, y: [f64; 1]| [y[0]];
        let mut y = [1.0];
        for i in 0..100 {
            y = rk4_step(y, i, i + 1, dt, &f);
        }
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
        for i in (0..100).rev() {
            y = rk4_step(y, i + 1, i, dt, &f);
        }
        assert!((y[0] - 1.0).abs() < 1e-9);
    }
}
