use std::ops::{Add, Div, Mul, Neg, Sub};

/// Real-number interface shared by plain `f64` and taped [`Var`](super::Var)s.
///
/// Everything built on top of it (jets, the network, residuals) can be
/// evaluated either for values only or while recording a gradient tape.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(c: f64) -> Self;
    fn value(self) -> f64;

    /// Applies a unary primitive whose value and first derivative at
    /// `self.value()` are already known.
    fn unary(self, value: f64, derivative: f64) -> Self;

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }

    fn shift(self, c: f64) -> Self {
        self + Self::cst(c)
    }

    fn tanh(self) -> Self {
        let s = self.value().tanh();
        self.unary(s, 1.0 - s * s)
    }

    fn sin(self) -> Self {
        let v = self.value();
        self.unary(v.sin(), v.cos())
    }

    fn cos(self) -> Self {
        let v = self.value();
        self.unary(v.cos(), -v.sin())
    }

    fn exp(self) -> Self {
        let e = self.value().exp();
        self.unary(e, e)
    }

    fn ln(self) -> Self {
        let v = self.value();
        self.unary(v.ln(), 1.0 / v)
    }

    fn sqrt(self) -> Self {
        let r = self.value().sqrt();
        self.unary(r, 0.5 / r)
    }

    fn powi(self, n: i32) -> Self {
        let v = self.value();
        let d = if n == 0 { 0.0 } else { n as f64 * v.powi(n - 1) };
        self.unary(v.powi(n), d)
    }

    fn powf(self, p: f64) -> Self {
        let v = self.value();
        self.unary(v.powf(p), p * v.powf(p - 1.0))
    }

    fn square(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(c: f64) -> Self {
        c
    }

    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn unary(self, value: f64, _derivative: f64) -> Self {
        value
    }

    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }

    #[inline]
    fn shift(self, c: f64) -> Self {
        self + c
    }

    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }

    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }

    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }

    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}
