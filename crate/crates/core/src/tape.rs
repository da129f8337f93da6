//! Reverse-mode automatic differentiation on an append-only tape.
//!
//! Every primitive's backward rule is itself expressed with tape primitives,
//! so [`Tape::grad`] records the backward pass as ordinary nodes. The
//! returned gradient [`Var`]s can be differentiated again, which is how
//! Hessian-vector products and exact MAML meta-gradients are computed.

use std::sync::Arc;

use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Const,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    SumRows(Var),
    BroadcastRows(Var, usize),
    SumCols(Var),
    BroadcastCols(Var, usize),
    SumAll(Var),
    Expand(Var, Vec<usize>),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Recip(Var),
    Pick(Var, Arc<[usize]>),
    Scatter(Var, Arc<[usize]>, usize),
}

impl Op {
    fn inputs(&self) -> [Option<Var>; 2] {
        use Op::*;
        match *self {
            Leaf | Const => [None, None],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | AddRow(a, b) => [Some(a), Some(b)],
            Transpose(a) | Neg(a) | Scale(a, _) | SumRows(a) | BroadcastRows(a, _) | SumCols(a)
            | BroadcastCols(a, _) | SumAll(a) | Expand(a, _) | Tanh(a) | Relu(a) | Exp(a)
            | Log(a) | Recip(a) | Pick(a, _) | Scatter(a, _, _) => [Some(a), None],
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    /// Depends on at least one leaf.
    tracked: bool,
}

/// Single-threaded recorder of tensor operations.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            tracked: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A value gradients never flow into.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Const,
            value,
            tracked: false,
        });
        Var(self.nodes.len() - 1)
    }

    fn eval(nodes: &[Node], op: &Op) -> Tensor {
        let v = |x: &Var| &nodes[x.0].value;
        match op {
            Op::Leaf | Op::Const => unreachable!("leaves and constants carry their own value"),
            Op::MatMul(a, b) => v(a).matmul(v(b)),
            Op::Transpose(a) => v(a).transpose(),
            Op::Add(a, b) => v(a).add(v(b)),
            Op::Sub(a, b) => v(a).sub(v(b)),
            Op::Mul(a, b) => v(a).mul(v(b)),
            Op::Neg(a) => v(a).neg(),
            Op::Scale(a, c) => v(a).scale(*c),
            Op::AddRow(a, b) => v(a).add_row(v(b)),
            Op::SumRows(a) => v(a).sum_rows(),
            Op::BroadcastRows(a, n) => v(a).broadcast_rows(*n),
            Op::SumCols(a) => v(a).sum_cols(),
            Op::BroadcastCols(a, m) => v(a).broadcast_cols(*m),
            Op::SumAll(a) => v(a).sum_all(),
            Op::Expand(a, shape) => v(a).expand(shape),
            Op::Tanh(a) => v(a).map(f64::tanh),
            Op::Relu(a) => v(a).map(|x| x.max(0.0)),
            Op::Exp(a) => v(a).map(f64::exp),
            Op::Log(a) => v(a).map(f64::ln),
            Op::Recip(a) => v(a).map(f64::recip),
            Op::Pick(a, idx) => v(a).pick(idx),
            Op::Scatter(a, idx, m) => v(a).scatter(idx, *m),
        }
    }

    fn push(&mut self, op: Op) -> Var {
        let value = Self::eval(&self.nodes, &op);
        let tracked = op.inputs().iter().flatten().any(|x| self.nodes[x.0].tracked);
        self.nodes.push(Node { op, value, tracked });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::MatMul(a, b))
    }
    pub fn transpose(&mut self, a: Var) -> Var {
        self.push(Op::Transpose(a))
    }
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::Add(a, b))
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::Sub(a, b))
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::Mul(a, b))
    }
    pub fn neg(&mut self, a: Var) -> Var {
        self.push(Op::Neg(a))
    }
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.push(Op::Scale(a, c))
    }
    /// `a[n, m] + b[m]`, broadcasting `b` over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::AddRow(a, b))
    }
    pub fn sum_rows(&mut self, a: Var) -> Var {
        self.push(Op::SumRows(a))
    }
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Var {
        self.push(Op::BroadcastRows(a, n))
    }
    pub fn sum_cols(&mut self, a: Var) -> Var {
        self.push(Op::SumCols(a))
    }
    pub fn broadcast_cols(&mut self, a: Var, m: usize) -> Var {
        self.push(Op::BroadcastCols(a, m))
    }
    pub fn sum_all(&mut self, a: Var) -> Var {
        self.push(Op::SumAll(a))
    }
    pub fn expand(&mut self, a: Var, shape: &[usize]) -> Var {
        self.push(Op::Expand(a, shape.to_vec()))
    }
    pub fn tanh(&mut self, a: Var) -> Var {
        self.push(Op::Tanh(a))
    }
    pub fn relu(&mut self, a: Var) -> Var {
        self.push(Op::Relu(a))
    }
    pub fn exp(&mut self, a: Var) -> Var {
        self.push(Op::Exp(a))
    }
    pub fn log(&mut self, a: Var) -> Var {
        self.push(Op::Log(a))
    }
    pub fn recip(&mut self, a: Var) -> Var {
        self.push(Op::Recip(a))
    }
    pub fn pick(&mut self, a: Var, idx: impl Into<Arc<[usize]>>) -> Var {
        self.push(Op::Pick(a, idx.into()))
    }
    pub fn scatter(&mut self, a: Var, idx: impl Into<Arc<[usize]>>, m: usize) -> Var {
        self.push(Op::Scatter(a, idx.into(), m))
    }

    /// Mean over all elements.
    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// Sum of elementwise products, as a scalar node.
    pub fn inner(&mut self, a: Var, b: Var) -> Var {
        let p = self.mul(a, b);
        self.sum_all(p)
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// The backward pass is recorded on this tape, so the returned vars are
    /// themselves differentiable. Inputs `output` does not depend on get a
    /// zero constant.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Vec<Var> {
        assert_eq!(
            self.value(output).len(),
            1,
            "grad() needs a scalar output, got shape {:?}",
            self.shape(output)
        );
        let end = output.0 + 1;

        // Nodes on some path from `wrt` to `output`.
        let mut relevant = vec![false; end];
        for w in wrt {
            if w.0 < end {
                relevant[w.0] = true;
            }
        }
        for i in 0..end {
            if !relevant[i] && self.nodes[i].tracked {
                relevant[i] = self.nodes[i].op.inputs().iter().flatten().any(|x| relevant[x.0]);
            }
        }

        let mut adjoint: Vec<Option<Var>> = vec![None; end];
        if relevant[output.0] {
            let shape = self.shape(output).to_vec();
            adjoint[output.0] = Some(self.constant(Tensor::filled(&shape, 1.0)));
        }

        for i in (0..end).rev() {
            if !relevant[i] {
                continue;
            }
            let Some(g) = adjoint[i] else { continue };
            let op = self.nodes[i].op.clone();
            let out = Var(i);
            let mut send = |tape: &mut Tape, to: Var, contrib: Var| {
                if relevant[to.0] {
                    adjoint[to.0] = Some(match adjoint[to.0] {
                        Some(acc) => tape.add(acc, contrib),
                        None => contrib,
                    });
                }
            };
            let wants = |x: Var| relevant[x.0];
            match op {
                Op::Leaf | Op::Const => {}
                Op::MatMul(a, b) => {
                    if wants(a) {
                        let bt = self.transpose(b);
                        let da = self.matmul(g, bt);
                        send(self, a, da);
                    }
                    if wants(b) {
                        let at = self.transpose(a);
                        let db = self.matmul(at, g);
                        send(self, b, db);
                    }
                }
                Op::Transpose(a) => {
                    let da = self.transpose(g);
                    send(self, a, da);
                }
                Op::Add(a, b) => {
                    send(self, a, g);
                    send(self, b, g);
                }
                Op::Sub(a, b) => {
                    send(self, a, g);
                    if wants(b) {
                        let db = self.neg(g);
                        send(self, b, db);
                    }
                }
                Op::Mul(a, b) => {
                    if wants(a) {
                        let da = self.mul(g, b);
                        send(self, a, da);
                    }
                    if wants(b) {
                        let db = self.mul(g, a);
                        send(self, b, db);
                    }
                }
                Op::Neg(a) => {
                    let da = self.neg(g);
                    send(self, a, da);
                }
                Op::Scale(a, c) => {
                    let da = self.scale(g, c);
                    send(self, a, da);
                }
                Op::AddRow(a, b) => {
                    send(self, a, g);
                    if wants(b) {
                        let db = self.sum_rows(g);
                        send(self, b, db);
                    }
                }
                Op::SumRows(a) => {
                    let n = self.value(a).rows();
                    let da = self.broadcast_rows(g, n);
                    send(self, a, da);
                }
                Op::BroadcastRows(a, _) => {
                    let da = self.sum_rows(g);
                    send(self, a, da);
                }
                Op::SumCols(a) => {
                    let m = self.value(a).cols();
                    let da = self.broadcast_cols(g, m);
                    send(self, a, da);
                }
                Op::BroadcastCols(a, _) => {
                    let da = self.sum_cols(g);
                    send(self, a, da);
                }
                Op::SumAll(a) => {
                    let shape = self.shape(a).to_vec();
                    let da = self.expand(g, &shape);
                    send(self, a, da);
                }
                Op::Expand(a, _) => {
                    let s = self.sum_all(g);
                    let shape = self.shape(a).to_vec();
                    let da = if shape.is_empty() {
                        s
                    } else {
                        self.expand(s, &shape)
                    };
                    send(self, a, da);
                }
                Op::Tanh(a) => {
                    // g * (1 - y^2) = g - g*y*y
                    let yy = self.mul(out, out);
                    let gyy = self.mul(g, yy);
                    let da = self.sub(g, gyy);
                    send(self, a, da);
                }
                Op::Relu(a) => {
                    let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    let mask = self.constant(mask);
                    let da = self.mul(g, mask);
                    send(self, a, da);
                }
                Op::Exp(a) => {
                    let da = self.mul(g, out);
                    send(self, a, da);
                }
                Op::Log(a) => {
                    let r = self.recip(a);
                    let da = self.mul(g, r);
                    send(self, a, da);
                }
                Op::Recip(a) => {
                    let yy = self.mul(out, out);
                    let gyy = self.mul(g, yy);
                    let da = self.neg(gyy);
                    send(self, a, da);
                }
                Op::Pick(a, idx) => {
                    let m = self.value(a).cols();
                    let da = self.scatter(g, idx, m);
                    send(self, a, da);
                }
                Op::Scatter(a, idx, _) => {
                    let da = self.pick(g, idx);
                    send(self, a, da);
                }
            }
        }

        wrt.iter()
            .map(|w| match adjoint.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.shape(*w).to_vec();
                    self.constant(Tensor::zeros(&shape))
                }
            })
            .collect()
    }

    /// Recomputes every derived node from the recorded leaves and constants.
    pub fn replay(&self) -> Vec<Tensor> {
        let mut replayed: Vec<Node> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let value = match node.op {
                Op::Leaf | Op::Const => node.value.clone(),
                _ => Self::eval(&replayed, &node.op),
            };
            replayed.push(Node {
                op: node.op.clone(),
                value,
                tracked: node.tracked,
            });
        }
        replayed.into_iter().map(|n| n.value).collect()
    }

    pub fn values(&self) -> impl Iterator<Item = &Tensor> {
        self.nodes.iter().map(|n| &n.value)
    }
}
