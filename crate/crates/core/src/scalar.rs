//! Scalar abstraction shared by every formula in the crate.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

/// Floating-point type the model can be evaluated in: `f32`, `f64`, or a
/// forward-mode [`Dual`](crate::dual::Dual) wrapping one of them.
pub trait Scalar: Float + FromPrimitive + Debug + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal representable in scalar type")
    }

    /// Value as `f64`, dropping any derivative part.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Send + Sync + 'static {}

/// Numerically stable `ln(sum(exp(v)))`.
pub fn log_sum_exp<T: Scalar>(values: impl IntoIterator<Item = T> + Clone) -> T {
    let max = values
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |acc, v| if v > acc { v } else { acc });
    if !max.is_finite() {
        return max;
    }
    let sum = values
        .into_iter()
        .fold(T::zero(), |acc, v| acc + (v - max).exp());
    max + sum.ln()
}
