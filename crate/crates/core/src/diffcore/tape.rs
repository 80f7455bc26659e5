use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{DiffError, Scalar};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    lhs: u32,
    d_lhs: f64,
    rhs: u32,
    d_rhs: f64,
}

/// Wengert list for reverse-mode differentiation of scalar computations.
///
/// Every node has at most two parents. Nodes are appended in evaluation
/// order, so a single reverse sweep yields all adjoints.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    /// Registers an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(Node {
            lhs: NONE,
            d_lhs: 0.0,
            rhs: NONE,
            d_rhs: 0.0,
        });
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops all recorded nodes but keeps the allocation.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(node);
        idx
    }

    /// Reverse sweep seeded with d(root)/d(root) = 1.
    ///
    /// `adjoints` is resized to the tape length; entry `i` holds
    /// d(root)/d(node i). A constant root leaves every adjoint at zero.
    pub fn backward_into(&self, root: Var<'_>, adjoints: &mut Vec<f64>) {
        let nodes = self.nodes.borrow();
        adjoints.clear();
        adjoints.resize(nodes.len(), 0.0);
        if root.idx == NONE {
            return;
        }
        adjoints[root.idx as usize] = 1.0;
        for i in (0..=root.idx as usize).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let n = nodes[i];
            if n.lhs != NONE {
                adjoints[n.lhs as usize] += a * n.d_lhs;
            }
            if n.rhs != NONE {
                adjoints[n.rhs as usize] += a * n.d_rhs;
            }
        }
    }

    pub fn backward(&self, root: Var<'_>) -> Vec<f64> {
        let mut adj = Vec::new();
        self.backward_into(root, &mut adj);
        adj
    }
}

/// A scalar recorded on a [`Tape`], or a constant that is not.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.idx == NONE {
            write!(f, "Var(const {})", self.val)
        } else {
            write!(f, "Var(#{} = {})", self.idx, self.val)
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Var {
            tape: None,
            idx: NONE,
            val: value,
        }
    }

    /// Tape position, or `None` for constants.
    pub fn index(&self) -> Option<usize> {
        (self.idx != NONE).then_some(self.idx as usize)
    }

    pub fn is_constant(&self) -> bool {
        self.idx == NONE
    }

    fn binary(self, other: Var<'t>, val: f64, d_self: f64, d_other: f64) -> Var<'t> {
        let tape = match (self.tape, other.tape) {
            (Some(a), Some(b)) => {
                debug_assert!(std::ptr::eq(a, b), "mixing variables from two tapes");
                a
            }
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => return Var::constant(val),
        };
        let (lhs, d_lhs) = if self.idx == NONE {
            (NONE, 0.0)
        } else {
            (self.idx, d_self)
        };
        let (rhs, d_rhs) = if other.idx == NONE {
            (NONE, 0.0)
        } else {
            (other.idx, d_other)
        };
        let idx = tape.push(Node {
            lhs,
            d_lhs,
            rhs,
            d_rhs,
        });
        Var {
            tape: Some(tape),
            idx,
            val,
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self.val / rhs.val;
        self.binary(rhs, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Scalar for Var<'t> {
    fn cst(c: f64) -> Self {
        Var::constant(c)
    }

    fn value(self) -> f64 {
        self.val
    }

    fn unary(self, value: f64, derivative: f64) -> Self {
        match self.tape {
            None => Var::constant(value),
            Some(tape) => {
                let idx = tape.push(Node {
                    lhs: self.idx,
                    d_lhs: derivative,
                    rhs: NONE,
                    d_rhs: 0.0,
                });
                Var {
                    tape: Some(tape),
                    idx,
                    val: value,
                }
            }
        }
    }

    fn scale(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }

    fn shift(self, c: f64) -> Self {
        self.unary(self.val + c, 1.0)
    }
}

/// Loss value together with its parameter gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Exact gradient of a scalar closure with respect to `params`.
///
/// The closure receives one taped variable per parameter and must build
/// its result from them using [`Scalar`] arithmetic.
pub fn param_gradient<F>(params: &[f64], loss: F) -> Result<Gradient, DiffError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, DiffError>,
{
    let tape = Tape::with_capacity(params.len() * 4);
    let vars: Vec<Var<'_>> = params.iter().map(|&p| tape.var(p)).collect();
    let out = loss(&tape, &vars)?;
    let value = out.value();
    if !value.is_finite() {
        return Err(DiffError::NonFiniteLoss {
            value,
            params: params.to_vec(),
        });
    }
    let adj = tape.backward(out);
    let grad = vars
        .iter()
        .map(|v| v.index().map_or(0.0, |i| adj[i]))
        .collect();
    Ok(Gradient { value, grad })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let g = param_gradient(&[3.0], |_, p| Ok(p[0] * p[0])).unwrap();
        assert_eq!(g.value, 9.0);
        assert_eq!(g.grad, vec![6.0]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let g = param_gradient(&[1.0, -2.0, 0.5], |_, _| Ok(Var::constant(4.0))).unwrap();
        assert_eq!(g.grad, vec![0.0; 3]);
    }

    #[test]
    fn non_finite_loss_reports_params() {
        let err = param_gradient(&[0.0], |_, p| Ok(Var::constant(1.0) / p[0])).unwrap_err();
        match err {
            DiffError::NonFiniteLoss { params, .. } => assert_eq!(params, vec![0.0]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        // f = (a*b) + sin(a*b) -> df/da = b (1 + cos(ab))
        let g = param_gradient(&[0.7, 1.3], |_, p| {
            let ab = p[0] * p[1];
            Ok(ab + ab.sin())
        })
        .unwrap();
        let ab: f64 = 0.7 * 1.3;
        assert!((g.grad[0] - 1.3 * (1.0 + ab.cos())).abs() < 1e-15);
        assert!((g.grad[1] - 0.7 * (1.0 + ab.cos())).abs() < 1e-15);
    }

    #[test]
    fn clear_keeps_tape_reusable() {
        let mut tape = Tape::new();
        {
            let a = tape.var(2.0);
            let _ = a * a;
        }
        assert_eq!(tape.len(), 2);
        tape.clear();
        assert!(tape.is_empty());
    }
}
