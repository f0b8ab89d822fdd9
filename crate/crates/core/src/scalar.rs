//! Scalar abstraction for the numeric core.
//!
//! Everything downstream (tensors, layers, explainers) is generic over
//! [`Scalar`], so the same code runs in f32 or f64. The operational lane
//! is f64; the f32 instantiation mostly serves tests and experiments.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an f64 constant into this scalar type.
    fn cast(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
