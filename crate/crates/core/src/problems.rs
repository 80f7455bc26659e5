//! Benchmark PDEs `u_t + N[u] = 0` (first order) or `u_tt + N[u] = 0`
//! (second order), each with its time-differentiated residual.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{jet_eval, Channels, Jet2, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("residual needs the {0} field, which was not supplied")]
    MissingField(&'static str),
    #[error("unknown problem {0:?} (expected advection, burgers or klein-gordon)")]
    Unknown(String),
    #[error("invalid problem parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProblemKind {
    Advection { c: f64 },
    Burgers { nu: f64 },
    KleinGordon,
}

/// Space-time box `[x_lo, x_hi] x [0, t_end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_end: f64,
}

impl Domain {
    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }
}

/// Which network channels each residual reads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelPlan {
    /// Interior quadrature nodes of the reconstruction.
    pub node: Channels,
    /// The learned field at the query time itself.
    pub end: Channels,
    /// Whether the differentiated residual touches the reconstructed state.
    pub needs_state: bool,
    /// Channels of `u` used by the undifferentiated residual.
    pub primal: Channels,
}

const CH_X: Channels = Channels {
    d_x: true,
    ..Channels::VALUE
};
const CH_XX: Channels = Channels {
    d_xx: true,
    ..CH_X
};

/// Network outputs and reconstructions that a residual may read.
#[derive(Clone, Copy, Debug)]
pub struct Fields<S> {
    pub state: Option<Jet2<S>>,
    pub rate: Option<Jet2<S>>,
    pub accel: Option<Jet2<S>>,
}

impl<S> Default for Fields<S> {
    fn default() -> Self {
        Fields {
            state: None,
            rate: None,
            accel: None,
        }
    }
}

impl<S: Copy> Fields<S> {
    pub fn state(u: Jet2<S>) -> Self {
        Fields {
            state: Some(u),
            rate: None,
            accel: None,
        }
    }

    fn need_state(&self) -> Result<Jet2<S>, ProblemError> {
        self.state.ok_or(ProblemError::MissingField("state"))
    }

    fn need_rate(&self) -> Result<Jet2<S>, ProblemError> {
        self.rate.ok_or(ProblemError::MissingField("rate"))
    }

    fn need_accel(&self) -> Result<Jet2<S>, ProblemError> {
        self.accel.ok_or(ProblemError::MissingField("accel"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: ProblemKind,
    pub order: Order,
    pub domain: Domain,
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub const PROBLEM_NAMES: [&str; 3] = ["advection", "burgers", "klein-gordon"];

impl ProblemSpec {
    pub fn advection(c: f64) -> Self {
        ProblemSpec {
            name: "advection".into(),
            kind: ProblemKind::Advection { c },
            order: Order::First,
            domain: Domain {
                x_lo: 0.0,
                x_hi: 2.0 * PI,
                t_end: 4.0,
            },
        }
    }

    pub fn burgers(nu: f64) -> Self {
        ProblemSpec {
            name: "burgers".into(),
            kind: ProblemKind::Burgers { nu },
            order: Order::First,
            domain: Domain {
                x_lo: -1.0,
                x_hi: 1.0,
                t_end: 1.0,
            },
        }
    }

    pub fn klein_gordon() -> Self {
        ProblemSpec {
            name: "klein-gordon".into(),
            kind: ProblemKind::KleinGordon,
            order: Order::Second,
            domain: Domain {
                x_lo: 0.0,
                x_hi: 1.0,
                t_end: 1.0,
            },
        }
    }

    /// Default instance by name.
    pub fn by_name(name: &str) -> Result<Self, ProblemError> {
        match name {
            "advection" => Ok(Self::advection(1.0)),
            "burgers" => Ok(Self::burgers(0.01 / PI)),
            "klein-gordon" | "kg" => Ok(Self::klein_gordon()),
            other => Err(ProblemError::Unknown(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let d = &self.domain;
        if !(d.x_hi > d.x_lo) || !(d.t_end > 0.0) {
            return Err(ProblemError::InvalidParameter(format!("empty domain {d:?}")));
        }
        match self.kind {
            ProblemKind::Advection { c } if !c.is_finite() => {
                Err(ProblemError::InvalidParameter(format!("advection speed {c}")))
            }
            ProblemKind::Burgers { nu } if !(nu >= 0.0) || !nu.is_finite() => {
                Err(ProblemError::InvalidParameter(format!("viscosity {nu}")))
            }
            _ => Ok(()),
        }
    }

    /// Named scalar parameters, for reports.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match self.kind {
            ProblemKind::Advection { c } => vec![("c", c)],
            ProblemKind::Burgers { nu } => vec![("nu", nu)],
            ProblemKind::KleinGordon => vec![],
        }
    }

    pub fn channel_plan(&self) -> ChannelPlan {
        match self.kind {
            ProblemKind::Advection { .. } => ChannelPlan {
                node: Channels::VALUE,
                end: Channels::FIRST,
                needs_state: false,
                primal: Channels::FIRST,
            },
            ProblemKind::Burgers { .. } => ChannelPlan {
                node: CH_X,
                end: Channels {
                    d_t: true,
                    ..CH_XX
                },
                needs_state: true,
                primal: Channels {
                    d_t: true,
                    ..CH_XX
                },
            },
            ProblemKind::KleinGordon => ChannelPlan {
                node: CH_XX,
                end: Channels {
                    d_t: true,
                    ..CH_XX
                },
                needs_state: true,
                primal: Channels {
                    d_tt: true,
                    ..CH_XX
                },
            },
        }
    }

    /// Initial state with its spatial partials.
    pub fn u0(&self, x: f64) -> Jet2<f64> {
        let xs = Jet2::seed_x(x);
        match self.kind {
            ProblemKind::Advection { .. } => xs.sin(),
            ProblemKind::Burgers { .. } => -(xs.scale(PI)).sin(),
            ProblemKind::KleinGordon => xs.scale(PI).sin(),
        }
    }

    /// Initial velocity for second-order problems.
    pub fn v0(&self, _x: f64) -> Option<Jet2<f64>> {
        match self.order {
            Order::First => None,
            Order::Second => Some(Jet2::zero()),
        }
    }

    /// Dirichlet data `g(x, t)` at a wall, with `d_t` and `d_tt` filled in.
    pub fn boundary(&self, x: f64, t: f64) -> Jet2<f64> {
        match self.kind {
            ProblemKind::Advection { .. } => self.exact(x, t).unwrap_or_else(Jet2::zero),
            _ => Jet2::zero(),
        }
    }

    /// Forcing term `f(x, t)`; identically zero except for Klein-Gordon.
    pub fn source(&self, x: f64, t: f64) -> Jet2<f64> {
        match self.kind {
            ProblemKind::KleinGordon => {
                let u = kg_exact(Jet2::seed_x(x), Jet2::seed_t(t));
                u.scale(-3.0 * PI * PI) + u * u
            }
            _ => Jet2::zero(),
        }
    }

    /// Closed-form solution where one exists.
    pub fn exact(&self, x: f64, t: f64) -> Option<Jet2<f64>> {
        match self.kind {
            ProblemKind::Advection { c } => jet_eval(
                |x, t| Ok((x - t.scale(c)).sin()),
                x,
                t,
                Channels::ALL,
            )
            .ok(),
            ProblemKind::Burgers { .. } => None,
            ProblemKind::KleinGordon => Some(kg_exact(Jet2::seed_x(x), Jet2::seed_t(t))),
        }
    }

    /// The spatial operator `N[u]` at `(x, t)`.
    pub fn operator<S: Scalar>(&self, u: &Jet2<S>, x: f64, t: f64) -> S {
        match self.kind {
            ProblemKind::Advection { c } => u.d_x.scale(c),
            ProblemKind::Burgers { nu } => u.value * u.d_x - u.d_xx.scale(nu),
            ProblemKind::KleinGordon => {
                let f = self.source(x, t).value;
                u.value * u.value - u.d_xx - S::cst(f)
            }
        }
    }

    /// `d/dt N[u]` given the state `u` and its time derivative `v`.
    pub fn operator_dt<S: Scalar>(
        &self,
        state: Option<&Jet2<S>>,
        v: &Jet2<S>,
        x: f64,
        t: f64,
    ) -> Result<S, ProblemError> {
        Ok(match self.kind {
            ProblemKind::Advection { c } => v.d_x.scale(c),
            ProblemKind::Burgers { nu } => {
                let u = state.ok_or(ProblemError::MissingField("state"))?;
                v.value * u.d_x + u.value * v.d_x - v.d_xx.scale(nu)
            }
            ProblemKind::KleinGordon => {
                let u = state.ok_or(ProblemError::MissingField("state"))?;
                let f_t = self.source(x, t).d_t;
                (u.value * v.value).scale(2.0) - v.d_xx - S::cst(f_t)
            }
        })
    }

    /// The value the learned derivative must take at `t = 0`: `-N[u0](x)`.
    pub fn initial_rate(&self, x: f64) -> f64 {
        -self.operator(&self.u0(x), x, 0.0)
    }

    /// `u_t + N[u]` or `u_tt + N[u]` from the state jet.
    pub fn primal_residual<S: Scalar>(&self, f: &Fields<S>, x: f64, t: f64) -> Result<S, ProblemError> {
        let u = f.need_state()?;
        let lead = match self.order {
            Order::First => u.d_t,
            Order::Second => u.d_tt,
        };
        Ok(lead + self.operator(&u, x, t))
    }

    /// Time derivative of the primal residual, written in terms of the
    /// learned field (`rate` for first order, `accel` for second order)
    /// and the reconstructed lower-order fields.
    pub fn diff_residual<S: Scalar>(&self, f: &Fields<S>, x: f64, t: f64) -> Result<S, ProblemError> {
        match self.order {
            Order::First => {
                let v = f.need_rate()?;
                let dn = self.operator_dt(f.state.as_ref(), &v, x, t)?;
                Ok(v.d_t + dn)
            }
            Order::Second => {
                let a = f.need_accel()?;
                let v = f.need_rate()?;
                let u = f.need_state()?;
                let dn = self.operator_dt(Some(&u), &v, x, t)?;
                Ok(a.d_t + dn)
            }
        }
    }
}

fn kg_exact(x: Jet2<f64>, t: Jet2<f64>) -> Jet2<f64> {
    x.scale(PI).sin() * t.scale(2.0 * PI).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        for n in PROBLEM_NAMES {
            let p = ProblemSpec::by_name(n).unwrap();
            assert_eq!(p.name, n);
            p.validate().unwrap();
        }
        assert!(matches!(ProblemSpec::by_name("heat"), Err(ProblemError::Unknown(_))));
        assert_eq!(ProblemSpec::klein_gordon().order, Order::Second);
    }

    #[test]
    fn advection_exact_solution_has_zero_residuals() {
        let p = ProblemSpec::advection(1.0);
        for &(x, t) in &[(0.3, 0.2), (5.0, 3.9), (1.0, 0.0)] {
            let u = p.exact(x, t).unwrap();
            let r = p.primal_residual(&Fields::state(u), x, t).unwrap();
            assert!(r.abs() < 1e-12);
            let v = jet_eval(|x, t| Ok(-(x - t).cos()), x, t, Channels::ALL).unwrap();
            let f = Fields {
                rate: Some(v),
                ..Fields::default()
            };
            assert!(p.diff_residual(&f, x, t).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn burgers_initial_rate() {
        // -N[u0] = -(u0 u0' - nu u0'') for u0 = -sin(pi x)
        let p = ProblemSpec::burgers(0.01 / PI);
        let x = 0.4;
        let u = -(PI * x).sin();
        let ux = -PI * (PI * x).cos();
        let uxx = PI * PI * (PI * x).sin();
        let expect = -(u * ux - 0.01 / PI * uxx);
        assert!((p.initial_rate(x) - expect).abs() < 1e-12);
        assert!(p.boundary(-1.0, 0.5).value == 0.0);
    }

    #[test]
    fn burgers_needs_state() {
        let p = ProblemSpec::burgers(0.01);
        let f: Fields<f64> = Fields {
            rate: Some(Jet2::constant(1.0)),
            ..Fields::default()
        };
        assert_eq!(p.diff_residual(&f, 0.0, 0.5), Err(ProblemError::MissingField("state")));
    }

    #[test]
    fn klein_gordon_exact_solution() {
        let p = ProblemSpec::klein_gordon();
        for &(x, t) in &[(0.25, 0.1), (0.7, 0.9), (0.5, 0.0)] {
            let u = p.exact(x, t).unwrap();
            let r = p.primal_residual(&Fields::state(u), x, t).unwrap();
            assert!(r.abs() < 1e-10, "r={r}");
            // u_t and u_tt as the rate and acceleration fields
            let v = jet_eval(
                |x, t| Ok(x.scale(PI).sin() * t.scale(2.0 * PI).sin().scale(-2.0 * PI)),
                x,
                t,
                Channels::ALL,
            )
            .unwrap();
            let a = jet_eval(
                |x, t| Ok(x.scale(PI).sin() * t.scale(2.0 * PI).cos().scale(-4.0 * PI * PI)),
                x,
                t,
                Channels::ALL,
            )
            .unwrap();
            let f = Fields {
                state: Some(u),
                rate: Some(v),
                accel: Some(a),
            };
            assert!(p.diff_residual(&f, x, t).unwrap().abs() < 1e-9);
        }
        // zero boundary data at both walls
        assert!(p.exact(0.0, 0.3).unwrap().value.abs() < 1e-15);
        assert!(p.exact(1.0, 0.3).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn klein_gordon_source_matches_formula() {
        let p = ProblemSpec::klein_gordon();
        let (x, t) = (0.3, 0.2);
        let s = (PI * x).sin() * (2.0 * PI * t).cos();
        let f = -3.0 * PI * PI * s + s * s;
        let src = p.source(x, t);
        assert!((src.value - f).abs() < 1e-12);
        let ut = -2.0 * PI * (PI * x).sin() * (2.0 * PI * t).sin();
        assert!((src.d_t - (-3.0 * PI * PI + 2.0 * s) * ut).abs() < 1e-10);
    }

    #[test]
    fn advection_boundary_carries_time_partials() {
        let p = ProblemSpec::advection(1.0);
        let g = p.boundary(2.0 * PI, 1.3);
        assert!((g.value - (2.0 * PI - 1.3f64).sin()).abs() < 1e-14);
        assert!((g.d_t + (2.0 * PI - 1.3f64).cos()).abs() < 1e-14);
    }
}
