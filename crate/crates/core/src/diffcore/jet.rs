use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{DiffError, Scalar};

/// Which input partials a computation must carry.
///
/// Second-order channels imply the first-order channels they are built
/// from, see [`Channels::closure`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Channels {
    pub d_x: bool,
    pub d_t: bool,
    pub d_xx: bool,
    pub d_xt: bool,
    pub d_tt: bool,
}

impl Channels {
    pub const VALUE: Channels = Channels {
        d_x: false,
        d_t: false,
        d_xx: false,
        d_xt: false,
        d_tt: false,
    };
    pub const ALL: Channels = Channels {
        d_x: true,
        d_t: true,
        d_xx: true,
        d_xt: true,
        d_tt: true,
    };
    pub const FIRST: Channels = Channels {
        d_x: true,
        d_t: true,
        d_xx: false,
        d_xt: false,
        d_tt: false,
    };
    pub const SPACE: Channels = Channels {
        d_x: true,
        d_t: false,
        d_xx: true,
        d_xt: false,
        d_tt: false,
    };

    pub fn union(self, o: Channels) -> Channels {
        Channels {
            d_x: self.d_x || o.d_x,
            d_t: self.d_t || o.d_t,
            d_xx: self.d_xx || o.d_xx,
            d_xt: self.d_xt || o.d_xt,
            d_tt: self.d_tt || o.d_tt,
        }
    }

    /// Adds every first-order channel a requested second-order channel
    /// depends on.
    pub fn closure(self) -> Channels {
        Channels {
            d_x: self.d_x || self.d_xx || self.d_xt,
            d_t: self.d_t || self.d_xt || self.d_tt,
            ..self
        }
    }

    /// Channel flags in storage order (value first, always on).
    pub fn mask(self) -> [bool; 6] {
        let c = self.closure();
        [true, c.d_x, c.d_t, c.d_xx, c.d_xt, c.d_tt]
    }
}

impl Default for Channels {
    fn default() -> Self {
        Channels::ALL
    }
}

/// A scalar carried together with its partials in `x` and `t` up to
/// second order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<S> {
    pub value: S,
    pub d_x: S,
    pub d_t: S,
    pub d_xx: S,
    pub d_xt: S,
    pub d_tt: S,
}

impl<S: Scalar> Jet2<S> {
    pub fn constant(value: S) -> Self {
        let z = S::cst(0.0);
        Jet2 {
            value,
            d_x: z,
            d_t: z,
            d_xx: z,
            d_xt: z,
            d_tt: z,
        }
    }

    pub fn zero() -> Self {
        Self::constant(S::cst(0.0))
    }

    /// The coordinate `x` itself: d_x = 1.
    pub fn seed_x(x: S) -> Self {
        Jet2 {
            d_x: S::cst(1.0),
            ..Self::constant(x)
        }
    }

    /// The coordinate `t` itself: d_t = 1.
    pub fn seed_t(t: S) -> Self {
        Jet2 {
            d_t: S::cst(1.0),
            ..Self::constant(t)
        }
    }

    /// Lifts a plain jet into this scalar type as constants.
    pub fn lift(j: Jet2<f64>) -> Self {
        Jet2 {
            value: S::cst(j.value),
            d_x: S::cst(j.d_x),
            d_t: S::cst(j.d_t),
            d_xx: S::cst(j.d_xx),
            d_xt: S::cst(j.d_xt),
            d_tt: S::cst(j.d_tt),
        }
    }

    pub fn to_array(self) -> [S; 6] {
        [self.value, self.d_x, self.d_t, self.d_xx, self.d_xt, self.d_tt]
    }

    pub fn from_array(a: [S; 6]) -> Self {
        Jet2 {
            value: a[0],
            d_x: a[1],
            d_t: a[2],
            d_xx: a[3],
            d_xt: a[4],
            d_tt: a[5],
        }
    }

    pub fn map(self, f: impl Fn(S) -> S) -> Self {
        Self::from_array(self.to_array().map(f))
    }

    /// Plain-value view of every channel.
    pub fn values(self) -> Jet2<f64> {
        Jet2::from_array(self.to_array().map(Scalar::value))
    }

    /// Zeroes every channel not in `ch`.
    pub fn masked(self, ch: Channels) -> Self {
        let m = [true, ch.d_x, ch.d_t, ch.d_xx, ch.d_xt, ch.d_tt];
        let z = S::cst(0.0);
        let mut a = self.to_array();
        for (v, keep) in a.iter_mut().zip(m) {
            if !keep {
                *v = z;
            }
        }
        Self::from_array(a)
    }

    pub fn scale(self, c: f64) -> Self {
        self.map(|v| v.scale(c))
    }

    pub fn shift(self, c: f64) -> Self {
        Jet2 {
            value: self.value.shift(c),
            ..self
        }
    }

    /// Applies g with known g(a), g'(a), g''(a) at the carried value.
    pub fn chain(self, g0: S, g1: S, g2: S) -> Self {
        Jet2 {
            value: g0,
            d_x: g1 * self.d_x,
            d_t: g1 * self.d_t,
            d_xx: g2 * self.d_x * self.d_x + g1 * self.d_xx,
            d_xt: g2 * self.d_x * self.d_t + g1 * self.d_xt,
            d_tt: g2 * self.d_t * self.d_t + g1 * self.d_tt,
        }
    }

    pub fn tanh(self) -> Self {
        let s = self.value.tanh();
        let s1 = S::cst(1.0) - s * s;
        let s2 = (s * s1).scale(-2.0);
        self.chain(s, s1, s2)
    }

    pub fn sin(self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn powi(self, n: i32) -> Self {
        let v = self.value;
        let nf = n as f64;
        let g1 = if n == 0 {
            S::cst(0.0)
        } else {
            v.powi(n - 1).scale(nf)
        };
        let g2 = if n == 0 || n == 1 {
            S::cst(0.0)
        } else {
            v.powi(n - 2).scale(nf * (nf - 1.0))
        };
        self.chain(v.powi(n), g1, g2)
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn recip(self) -> Self {
        let r = S::cst(1.0) / self.value;
        let r2 = r * r;
        self.chain(r, -r2, (r2 * r).scale(2.0))
    }

    pub fn try_recip(self) -> Result<Self, DiffError> {
        let v = self.value.value();
        if v == 0.0 || !v.is_finite() {
            return Err(DiffError::Domain {
                primitive: "div",
                arg: v,
            });
        }
        Ok(self.recip())
    }

    pub fn try_div(self, rhs: Self) -> Result<Self, DiffError> {
        Ok(self * rhs.try_recip()?)
    }

    pub fn try_ln(self) -> Result<Self, DiffError> {
        let v = self.value.value();
        if v <= 0.0 || !v.is_finite() {
            return Err(DiffError::Domain {
                primitive: "ln",
                arg: v,
            });
        }
        let r = S::cst(1.0) / self.value;
        Ok(self.chain(self.value.ln(), r, -(r * r)))
    }

    pub fn try_sqrt(self) -> Result<Self, DiffError> {
        let v = self.value.value();
        if v <= 0.0 || !v.is_finite() {
            return Err(DiffError::Domain {
                primitive: "sqrt",
                arg: v,
            });
        }
        let r = self.value.sqrt();
        let g1 = S::cst(0.5) / r;
        let g2 = -(g1 / self.value).scale(0.5);
        Ok(self.chain(r, g1, g2))
    }

    /// Real power `self^p`; a non-positive base is rejected unless `p` is
    /// an integer, which is routed through [`Jet2::powi`].
    pub fn try_powf(self, p: f64) -> Result<Self, DiffError> {
        if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
            if p < 0.0 && self.value.value() == 0.0 {
                return Err(DiffError::Domain {
                    primitive: "pow",
                    arg: 0.0,
                });
            }
            return Ok(self.powi(p as i32));
        }
        let v = self.value.value();
        if v <= 0.0 || !v.is_finite() {
            return Err(DiffError::Domain {
                primitive: "pow",
                arg: v,
            });
        }
        let x = self.value;
        Ok(self.chain(
            x.powf(p),
            x.powf(p - 1.0).scale(p),
            x.powf(p - 2.0).scale(p * (p - 1.0)),
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.value().is_finite())
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Jet2 {
            value: self.value + o.value,
            d_x: self.d_x + o.d_x,
            d_t: self.d_t + o.d_t,
            d_xx: self.d_xx + o.d_xx,
            d_xt: self.d_xt + o.d_xt,
            d_tt: self.d_tt + o.d_tt,
        }
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Jet2 {
            value: self.value - o.value,
            d_x: self.d_x - o.d_x,
            d_t: self.d_t - o.d_t,
            d_xx: self.d_xx - o.d_xx,
            d_xt: self.d_xt - o.d_xt,
            d_tt: self.d_tt - o.d_tt,
        }
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self, o);
        Jet2 {
            value: a.value * b.value,
            d_x: a.d_x * b.value + a.value * b.d_x,
            d_t: a.d_t * b.value + a.value * b.d_t,
            d_xx: a.d_xx * b.value + (a.d_x * b.d_x).scale(2.0) + a.value * b.d_xx,
            d_xt: a.d_xt * b.value + a.d_x * b.d_t + a.d_t * b.d_x + a.value * b.d_xt,
            d_tt: a.d_tt * b.value + (a.d_t * b.d_t).scale(2.0) + a.value * b.d_tt,
        }
    }
}

impl<S: Scalar> Div for Jet2<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|v| -v)
    }
}

/// Evaluates `f` at `(x, t)` with both coordinates seeded, returning the
/// requested partials (unrequested channels are zero).
///
/// Domain errors raised inside `f` are passed through; a non-finite
/// channel in the result is reported as [`DiffError::NonFinite`].
pub fn jet_eval<F>(f: F, x: f64, t: f64, channels: Channels) -> Result<Jet2<f64>, DiffError>
where
    F: Fn(Jet2<f64>, Jet2<f64>) -> Result<Jet2<f64>, DiffError>,
{
    let out = f(Jet2::seed_x(x), Jet2::seed_t(t))?.masked(channels);
    if !out.is_finite() {
        return Err(DiffError::NonFinite("jet_eval"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_coordinates() {
        let j = jet_eval(|x, t| Ok(x * t), 2.0, 3.0, Channels::ALL).unwrap();
        assert_eq!(j.value, 6.0);
        assert_eq!(j.d_x, 3.0);
        assert_eq!(j.d_t, 2.0);
        assert_eq!(j.d_xt, 1.0);
        assert_eq!(j.d_xx, 0.0);
        assert_eq!(j.d_tt, 0.0);
    }

    #[test]
    fn tanh_at_origin() {
        let j = jet_eval(|x, _| Ok(x.tanh()), 0.0, 0.4, Channels::ALL).unwrap();
        assert_eq!(j.value, 0.0);
        assert_eq!(j.d_x, 1.0);
        assert_eq!(j.d_xx, 0.0);
    }

    #[test]
    fn seeds_are_unit_vectors() {
        let x = Jet2::<f64>::seed_x(1.5);
        assert_eq!(x.to_array(), [1.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let t = Jet2::<f64>::seed_t(0.5);
        assert_eq!(t.to_array(), [0.5, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn division_by_zero_names_primitive() {
        let err = jet_eval(|x, t| x.try_div(t), 1.0, 0.0, Channels::ALL).unwrap_err();
        assert_eq!(
            err,
            DiffError::Domain {
                primitive: "div",
                arg: 0.0
            }
        );
    }

    #[test]
    fn ln_and_sqrt_domain() {
        assert!(matches!(
            jet_eval(|x, _| x.try_ln(), -1.0, 0.0, Channels::ALL),
            Err(DiffError::Domain { primitive: "ln", .. })
        ));
        assert!(matches!(
            jet_eval(|x, _| x.try_sqrt(), 0.0, 0.0, Channels::ALL),
            Err(DiffError::Domain {
                primitive: "sqrt",
                ..
            })
        ));
        assert!(matches!(
            jet_eval(|x, _| x.try_powf(0.5), -2.0, 0.0, Channels::ALL),
            Err(DiffError::Domain { primitive: "pow", .. })
        ));
    }

    #[test]
    fn integer_power_of_negative_base_is_allowed() {
        let j = jet_eval(|x, _| x.try_powf(3.0), -2.0, 0.0, Channels::ALL).unwrap();
        assert_eq!(j.value, -8.0);
        assert_eq!(j.d_x, 12.0);
        assert_eq!(j.d_xx, -12.0);
    }

    #[test]
    fn unrequested_channels_are_zero() {
        let j = jet_eval(|x, t| Ok(x * x * t), 1.0, 2.0, Channels::FIRST).unwrap();
        assert_eq!(j.d_x, 4.0);
        assert_eq!(j.d_xx, 0.0);
        assert_eq!(j.d_xt, 0.0);
    }

    #[test]
    fn closure_pulls_in_first_order() {
        let c = Channels {
            d_xt: true,
            ..Channels::VALUE
        }
        .closure();
        assert!(c.d_x && c.d_t && c.d_xt && !c.d_xx);
    }
}
