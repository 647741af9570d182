//! Scalar abstraction shared by every solver.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the solvers are generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier-compensated sum.
pub fn compensated_sum<R: Real>(values: impl IntoIterator<Item = R>) -> R {
    let mut sum = R::zero();
    let mut comp = R::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Composite trapezoid rule for samples spaced `dt` apart.
pub fn trapezoid<R: Real>(values: &[R], dt: R) -> R {
    match values.len() {
        0 | 1 => R::zero(),
        n => {
            let inner = compensated_sum(values[1..n - 1].iter().copied());
            dt * (inner + R::half() * (values[0] + values[n - 1]))
        }
    }
}
