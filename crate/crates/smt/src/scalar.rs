//! Exact ordered fields and the infinitesimal extension used for strict bounds.

use std::cmp::Ordering;
use std::fmt::{self, Debug, Display};
use std::hash::Hash;
use std::ops::{Add, Neg, Sub};

use num_traits::{FromPrimitive, Signed};

/// An exact ordered field the solver can run over.
///
/// Any `num_rational::Ratio<T>` with a signed integer `T` qualifies. Floating point types do not
/// (they are neither `Ord` nor `Hash`), which is intentional: every decision the engine makes is
/// exact.
pub trait Scalar:
    Clone + Ord + Hash + Debug + Display + Signed + FromPrimitive + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self {
        <Self as FromPrimitive>::from_i64(v).expect("scalar type cannot represent an i64")
    }
}

impl<T> Scalar for T where
    T: Clone + Ord + Hash + Debug + Display + Signed + FromPrimitive + Send + Sync + 'static
{
}

/// A value `real + delta·δ` where δ is a positive infinitesimal.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DeltaValue<S> {
    pub real: S,
    pub delta: S,
}

impl<S: Scalar> DeltaValue<S> {
    pub fn new(real: S, delta: S) -> Self {
        Self { real, delta }
    }

    pub fn exact(real: S) -> Self {
        Self { real, delta: S::zero() }
    }

    pub fn zero() -> Self {
        Self::exact(S::zero())
    }

    pub fn scale(&self, k: &S) -> Self {
        Self { real: self.real.clone() * k.clone(), delta: self.delta.clone() * k.clone() }
    }

    pub fn div(&self, k: &S) -> Self {
        Self { real: self.real.clone() / k.clone(), delta: self.delta.clone() / k.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.real.is_zero() && self.delta.is_zero()
    }

    /// Concrete value for a chosen δ.
    pub fn materialize(&self, delta: &S) -> S {
        self.real.clone() + self.delta.clone() * delta.clone()
    }
}

impl<S: Scalar> PartialOrd for DeltaValue<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Scalar> Ord for DeltaValue<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.real.cmp(&other.real).then_with(|| self.delta.cmp(&other.delta))
    }
}

impl<S: Scalar> Add for &DeltaValue<S> {
    type Output = DeltaValue<S>;
    fn add(self, rhs: Self) -> DeltaValue<S> {
        DeltaValue {
            real: self.real.clone() + rhs.real.clone(),
            delta: self.delta.clone() + rhs.delta.clone(),
        }
    }
}

impl<S: Scalar> Sub for &DeltaValue<S> {
    type Output = DeltaValue<S>;
    fn sub(self, rhs: Self) -> DeltaValue<S> {
        DeltaValue {
            real: self.real.clone() - rhs.real.clone(),
            delta: self.delta.clone() - rhs.delta.clone(),
        }
    }
}

impl<S: Scalar> Neg for DeltaValue<S> {
    type Output = DeltaValue<S>;
    fn neg(self) -> DeltaValue<S> {
        DeltaValue { real: -self.real, delta: -self.delta }
    }
}

impl<S: Debug> Debug for DeltaValue<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}+({:?})δ", self.real, self.delta)
    }
}

impl<S: Scalar> Display for DeltaValue<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.delta.is_zero() {
            write!(f, "{}", self.real)
        } else {
            let sign = if self.delta.is_positive() { "+" } else { "" };
            write!(f, "{}{}{}δ", self.real, sign, self.delta)
        }
    }
}
