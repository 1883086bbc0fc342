//! Reverse-mode gradient tape.
//!
//! The tape is a Wengert list whose recorded values are small `f64` matrices
//! rather than individual scalars: a batch of collocation points travels
//! through the network as one `width x n_points` block, so the hot path runs
//! as dense matrix products instead of per-scalar dispatch. A plain scalar is
//! just a 1x1 block.
//!
//! Recording is append-only. [`Tape::backward`] seeds the adjoint of a 1x1
//! loss node with one and sweeps the list in reverse, accumulating adjoints
//! into every parent; the adjoints of leaf nodes are the exact partial
//! derivatives of the loss. A tape can be swept exactly once — a second
//! sweep is an error, not a silent recompute.
//!
//! Time derivatives compose with this as forward-over-reverse: the tangent
//! stream of the network (seeded with dt/dt = 1 at the input) is itself made
//! of recorded operations, so the reverse sweep differentiates straight
//! through it and parameter gradients include the contribution of the
//! time-derivative term.

use crate::autodiff::scalar::Scalar;
use crate::error::{Error, Result};
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis, Zip};
use std::cell::{Cell, RefCell};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Denominator magnitudes below this are treated as division blow-ups.
pub const DIV_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    /// Elementwise product.
    Mul(usize, usize),
    /// Elementwise quotient (guarded against near-zero denominators).
    Div(usize, usize),
    Neg(usize),
    /// `c * x`.
    Scale(usize, f64),
    /// `c + x` elementwise.
    Offset(usize),
    /// Dense product `(r x k) . (k x c)`.
    MatMul(usize, usize),
    /// Matrix plus a column vector broadcast across columns.
    AddCol(usize, usize),
    Tanh(usize),
    Sin(usize),
    Cos(usize),
    Sigmoid(usize),
    Relu(usize),
    /// Indicator of positivity; derivative of relu. Zero slope almost
    /// everywhere, so it contributes no adjoint of its own.
    StepPos,
    /// `1 - x^2`; derivative of tanh expressed through the tanh value.
    OneMinusSq(usize),
    Sqrt(usize),
    Powi(usize, i32),
    /// Row slice `[start, end)` of the parent.
    Rows(usize, usize, usize),
    /// Sum of squared entries, a 1x1 result.
    SumSq(usize),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Append-only record of a computation, consumed by one backward sweep.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
    /// Smallest near-zero denominator seen by a recorded division, if any.
    div_fault: Cell<Option<f64>>,
}

/// Handle to one recorded value. Copyable; all arithmetic on handles records
/// new nodes on the owning tape. Operands of a binary op must share a tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            nodes: RefCell::new(Vec::new()),
            consumed: Cell::new(false),
            div_fault: Cell::new(None),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Magnitude of the worst guarded denominator, if a division faulted.
    pub fn division_fault(&self) -> Option<f64> {
        self.div_fault.get()
    }

    fn push(&self, value: Array2<f64>, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            index: nodes.len() - 1,
        }
    }

    /// Record an input value (parameter, data, or constant).
    pub fn leaf(&self, value: Array2<f64>) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    /// Record a `1 x n` row leaf.
    pub fn leaf_row(&self, values: &[f64]) -> Var<'_> {
        self.leaf(Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap())
    }

    /// Record an `n x 1` column leaf.
    pub fn leaf_col(&self, values: &[f64]) -> Var<'_> {
        self.leaf(Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap())
    }

    /// Record a 1x1 leaf.
    pub fn leaf_scalar(&self, value: f64) -> Var<'_> {
        self.leaf(Array2::from_elem((1, 1), value))
    }

    /// Run the reverse sweep from a 1x1 `loss` node. Consumes the tape's
    /// single backward allowance and returns per-node adjoints.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        assert!(
            std::ptr::eq(loss.tape, self),
            "loss recorded on a different tape"
        );
        if self.consumed.replace(true) {
            return Err(Error::TapeConsumed);
        }
        if let Some(magnitude) = self.div_fault.get() {
            return Err(Error::DivisionByNearZero { magnitude });
        }
        let nodes = self.nodes.borrow();
        let loss_node = &nodes[loss.index];
        assert_eq!(
            loss_node.value.dim(),
            (1, 1),
            "backward needs a scalar loss"
        );
        if !loss_node.value[(0, 0)].is_finite() {
            return Err(Error::NonFiniteAdjoint {
                what: "loss value".into(),
            });
        }

        let mut adj: Vec<Option<Array2<f64>>> = (0..nodes.len()).map(|_| None).collect();
        adj[loss.index] = Some(Array2::from_elem((1, 1), 1.0));

        for i in (0..=loss.index).rev() {
            let Some(g) = adj[i].take() else { continue };
            match nodes[i].op {
                Op::Leaf => {
                    // Keep leaf adjoints for extraction.
                    adj[i] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj[b], g.clone());
                    accumulate(&mut adj[a], g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj[b], -&g);
                    accumulate(&mut adj[a], g);
                }
                Op::Mul(a, b) => {
                    accumulate(&mut adj[a], &g * &nodes[b].value);
                    accumulate(&mut adj[b], g * &nodes[a].value);
                }
                Op::Div(a, b) => {
                    // y = a / b: da += g / b, db -= g * y / b.
                    let y = &nodes[i].value;
                    let vb = &nodes[b].value;
                    let da = &g / vb;
                    let mut db = g;
                    Zip::from(&mut db).and(y).and(vb).for_each(|d, &yv, &bv| {
                        *d = -*d * yv / bv;
                    });
                    accumulate(&mut adj[a], da);
                    accumulate(&mut adj[b], db);
                }
                Op::Neg(a) => accumulate(&mut adj[a], -g),
                Op::Scale(a, c) => accumulate(&mut adj[a], g * c),
                Op::Offset(a) => accumulate(&mut adj[a], g),
                Op::MatMul(a, b) => {
                    matmul_accumulate(&mut adj[a], g.view(), nodes[b].value.t());
                    matmul_accumulate(&mut adj[b], nodes[a].value.t(), g.view());
                }
                Op::AddCol(a, b) => {
                    let col = g.sum_axis(Axis(1)).insert_axis(Axis(1));
                    accumulate(&mut adj[b], col);
                    accumulate(&mut adj[a], g);
                }
                Op::Tanh(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&nodes[i].value).for_each(|dv, &y| {
                        *dv *= 1.0 - y * y;
                    });
                    accumulate(&mut adj[a], d);
                }
                Op::Sin(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&nodes[a].value).for_each(|dv, &x| {
                        *dv *= x.cos();
                    });
                    accumulate(&mut adj[a], d);
                }
                Op::Cos(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&nodes[a].value).for_each(|dv, &x| {
                        *dv *= -x.sin();
                    });
                    accumulate(&mut adj[a], d);
                }
                Op::Sigmoid(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&nodes[i].value).for_each(|dv, &y| {
                        *dv *= y * (1.0 - y);
                    });
                    accumulate(&mut adj[a], d);
                }
                Op::Relu(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&nodes[a].value).for_each(|dv, &x| {
                        if x <= 0.0 {
                            *dv = 0.0;
                        }
                    });
                    accumulate(&mut adj[a], d);
                }
                // Piecewise-constant: zero slope almost everywhere.
                Op::StepPos => {}
                Op::OneMinusSq(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&nodes[a].value).for_each(|dv, &x| {
                        *dv *= -2.0 * x;
                    });
                    accumulate(&mut adj[a], d);
                }
                Op::Sqrt(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&nodes[i].value).for_each(|dv, &y| {
                        *dv /= 2.0 * y;
                    });
                    accumulate(&mut adj[a], d);
                }
                Op::Powi(a, n) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&nodes[a].value).for_each(|dv, &x| {
                        *dv *= f64::from(n) * x.powi(n - 1);
                    });
                    accumulate(&mut adj[a], d);
                }
                Op::Rows(a, start, end) => {
                    let slot = &mut adj[a];
                    if slot.is_none() {
                        *slot = Some(Array2::zeros(nodes[a].value.dim()));
                    }
                    let dst = slot.as_mut().unwrap();
                    let mut window = dst.slice_mut(ndarray::s![start..end, ..]);
                    window += &g;
                }
                Op::SumSq(a) => {
                    let s = g[(0, 0)];
                    accumulate(&mut adj[a], nodes[a].value.mapv(|x| 2.0 * s * x));
                }
            }
        }
        Ok(Gradients { adj })
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, delta: Array2<f64>) {
    match slot {
        Some(total) => *total += &delta,
        None => *slot = Some(delta),
    }
}

fn matmul_accumulate(slot: &mut Option<Array2<f64>>, a: ArrayView2<f64>, b: ArrayView2<f64>) {
    match slot {
        Some(total) => general_mat_mul(1.0, &a, &b, 1.0, total),
        None => {
            let mut fresh = Array2::zeros((a.nrows(), b.ncols()));
            general_mat_mul(1.0, &a, &b, 0.0, &mut fresh);
            *slot = Some(fresh);
        }
    }
}

/// Per-node adjoints produced by one backward sweep.
#[derive(Debug)]
pub struct Gradients {
    adj: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// d(loss)/d(`v`), zero-filled when the loss never touched `v`.
    pub fn wrt(&self, v: Var<'_>) -> Array2<f64> {
        match &self.adj[v.index] {
            Some(a) => a.clone(),
            None => Array2::zeros(v.tape.nodes.borrow()[v.index].value.dim()),
        }
    }

    /// Adjoints of `leaves` flattened (row-major, in argument order) into one
    /// vector. Errors if any entry is non-finite.
    pub fn flat(&self, leaves: &[Var<'_>]) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for &v in leaves {
            match &self.adj[v.index] {
                Some(a) => out.extend(a.iter().copied()),
                None => {
                    let n = v.tape.nodes.borrow()[v.index].value.len();
                    out.extend(std::iter::repeat_n(0.0, n));
                }
            }
        }
        if let Some(bad) = out.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteAdjoint {
                what: format!("gradient entry {bad}"),
            });
        }
        Ok(out)
    }
}

impl<'t> Var<'t> {
    pub fn value(self) -> Array2<f64> {
        self.tape.nodes.borrow()[self.index].value.clone()
    }

    /// The single entry of a 1x1 node.
    pub fn scalar(self) -> f64 {
        let nodes = self.tape.nodes.borrow();
        let v = &nodes[self.index].value;
        assert_eq!(v.dim(), (1, 1), "scalar() on a non-1x1 node");
        v[(0, 0)]
    }

    pub fn shape(self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.index].value.dim()
    }

    fn same_tape(self, other: Var<'t>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "operands recorded on different tapes"
        );
    }

    fn unary(self, op: Op, value: Array2<f64>) -> Var<'t> {
        self.tape.push(value, op)
    }

    fn with_parent<R>(self, f: impl FnOnce(&Array2<f64>) -> R) -> R {
        let nodes = self.tape.nodes.borrow();
        f(&nodes[self.index].value)
    }

    pub fn matmul(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        let value = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.index].value;
            let b = &nodes[rhs.index].value;
            assert_eq!(a.ncols(), b.nrows(), "matmul inner dimensions differ");
            a.dot(b)
        };
        self.tape.push(value, Op::MatMul(self.index, rhs.index))
    }

    /// Add a column vector to every column of `self`.
    pub fn add_col(self, col: Var<'t>) -> Var<'t> {
        self.same_tape(col);
        let value = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.index].value;
            let b = &nodes[col.index].value;
            assert_eq!(b.ncols(), 1, "add_col expects a column");
            assert_eq!(a.nrows(), b.nrows(), "add_col row count differs");
            a + b
        };
        self.tape.push(value, Op::AddCol(self.index, col.index))
    }

    pub fn tanh(self) -> Var<'t> {
        let value = self.with_parent(|a| a.mapv(f64::tanh));
        self.unary(Op::Tanh(self.index), value)
    }

    pub fn sin(self) -> Var<'t> {
        let value = self.with_parent(|a| a.mapv(f64::sin));
        self.unary(Op::Sin(self.index), value)
    }

    pub fn cos(self) -> Var<'t> {
        let value = self.with_parent(|a| a.mapv(f64::cos));
        self.unary(Op::Cos(self.index), value)
    }

    pub fn sigmoid(self) -> Var<'t> {
        let value = self.with_parent(|a| a.mapv(|x| 1.0 / (1.0 + (-x).exp())));
        self.unary(Op::Sigmoid(self.index), value)
    }

    pub fn relu(self) -> Var<'t> {
        let value = self.with_parent(|a| a.mapv(|x| if x > 0.0 { x } else { 0.0 }));
        self.unary(Op::Relu(self.index), value)
    }

    /// 1 where the entry is positive, 0 elsewhere (relu slope).
    pub fn step_pos(self) -> Var<'t> {
        let value = self.with_parent(|a| a.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 }));
        self.unary(Op::StepPos, value)
    }

    /// `1 - x^2` (tanh slope given the tanh value).
    pub fn one_minus_sq(self) -> Var<'t> {
        let value = self.with_parent(|a| a.mapv(|x| 1.0 - x * x));
        self.unary(Op::OneMinusSq(self.index), value)
    }

    /// Row slice `[start, end)`.
    pub fn rows(self, start: usize, end: usize) -> Var<'t> {
        let value = self.with_parent(|a| {
            assert!(end <= a.nrows() && start <= end, "row slice out of bounds");
            a.slice(ndarray::s![start..end, ..]).to_owned()
        });
        self.unary(Op::Rows(self.index, start, end), value)
    }

    /// Sum of squared entries as a 1x1 node.
    pub fn sum_sq(self) -> Var<'t> {
        let value = self.with_parent(|a| {
            let s: f64 = a.iter().map(|x| x * x).sum();
            Array2::from_elem((1, 1), s)
        });
        self.unary(Op::SumSq(self.index), value)
    }
}

macro_rules! elementwise_binop {
    ($trait:ident, $method:ident, $op:ident, $combine:expr) => {
        impl<'t> $trait for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: Var<'t>) -> Var<'t> {
                self.same_tape(rhs);
                let value = {
                    let nodes = self.tape.nodes.borrow();
                    let a = &nodes[self.index].value;
                    let b = &nodes[rhs.index].value;
                    assert_eq!(a.dim(), b.dim(), "elementwise operands differ in shape");
                    #[allow(clippy::redundant_closure_call)]
                    ($combine)(a, b)
                };
                self.tape.push(value, Op::$op(self.index, rhs.index))
            }
        }
    };
}

elementwise_binop!(Add, add, Add, |a: &Array2<f64>, b: &Array2<f64>| a + b);
elementwise_binop!(Sub, sub, Sub, |a: &Array2<f64>, b: &Array2<f64>| a - b);
elementwise_binop!(Mul, mul, Mul, |a: &Array2<f64>, b: &Array2<f64>| a * b);

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;

    /// Elementwise division. A denominator entry with magnitude below
    /// [`DIV_GUARD`] marks the tape as faulted and the quotient entries turn
    /// into NaN instead of infinities; the fault surfaces as an error from
    /// [`Tape::backward`].
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        let value = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.index].value;
            let b = &nodes[rhs.index].value;
            assert_eq!(a.dim(), b.dim(), "elementwise operands differ in shape");
            let mut worst: Option<f64> = None;
            for &d in b.iter() {
                if d.abs() < DIV_GUARD {
                    worst = Some(worst.map_or(d.abs(), |w: f64| w.min(d.abs())));
                }
            }
            if let Some(w) = worst {
                let prior = self.tape.div_fault.get();
                self.tape.div_fault.set(Some(prior.map_or(w, |p| p.min(w))));
                Array2::from_elem(a.dim(), f64::NAN)
            } else {
                a / b
            }
        };
        self.tape.push(value, Op::Div(self.index, rhs.index))
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        let value = self.with_parent(|a| -a);
        self.unary(Op::Neg(self.index), value)
    }
}

impl<'t> Scalar for Var<'t> {
    fn lift(self, c: f64) -> Self {
        let value = self.with_parent(|a| Array2::from_elem(a.dim(), c));
        self.tape.push(value, Op::Leaf)
    }

    fn sqrt(self) -> Self {
        let value = self.with_parent(|a| a.mapv(f64::sqrt));
        self.unary(Op::Sqrt(self.index), value)
    }

    fn powi(self, n: i32) -> Self {
        let value = self.with_parent(|a| a.mapv(|x| x.powi(n)));
        self.unary(Op::Powi(self.index, n), value)
    }

    fn scale(self, c: f64) -> Self {
        let value = self.with_parent(|a| a * c);
        self.unary(Op::Scale(self.index, c), value)
    }

    fn offset(self, c: f64) -> Self {
        let value = self.with_parent(|a| a + c);
        self.unary(Op::Offset(self.index), value)
    }
}

/// Compare the tape gradient of a scalar-valued build against central finite
/// differences at `point`, perturbing one coordinate at a time by `step`.
///
/// `build` must record the computation on the given tape from the given flat
/// parameter vector and return the scalar output together with the parameter
/// leaves (in flat order). Returns the maximum over coordinates of
/// `|analytic - fd| / max(1, |analytic|)`.
pub fn check_gradient<F>(build: F, point: &[f64], step: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[f64]) -> (Var<'t>, Vec<Var<'t>>),
{
    let value_at = |p: &[f64]| -> f64 {
        let tape = Tape::new();
        let (out, _) = build(&tape, p);
        out.scalar()
    };

    let tape = Tape::new();
    let (out, leaves) = build(&tape, point);
    let analytic = tape.backward(out)?.flat(&leaves)?;
    assert_eq!(
        analytic.len(),
        point.len(),
        "leaf count differs from point length"
    );

    let mut worst = 0.0_f64;
    let mut perturbed = point.to_vec();
    for i in 0..point.len() {
        perturbed[i] = point[i] + step;
        let up = value_at(&perturbed);
        perturbed[i] = point[i] - step;
        let down = value_at(&perturbed);
        perturbed[i] = point[i];
        let fd = (up - down) / (2.0 * step);
        let err = (analytic[i] - fd).abs() / 1.0_f64.max(analytic[i].abs());
        worst = worst.max(err);
    }
    Ok(worst)
}
