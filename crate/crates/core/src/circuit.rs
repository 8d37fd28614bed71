//! Arithmetic circuits: DAGs of input, constant, add, multiply and analytic
//! unary nodes, evaluable over any [`Ring`].

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{AnalyticGate, Jet};

pub type NodeId = usize;

/// Current version of the circuit JSON format.
pub const CIRCUIT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    /// Input coordinate, zero-based.
    Input(usize),
    Constant(Complex64),
    /// Sum of operands, folded left to right.
    Add(Vec<NodeId>),
    /// Product of operands, folded left to right.
    Mul(Vec<NodeId>),
    Unary(AnalyticGate, NodeId),
}

impl Op {
    pub fn operands(&self) -> &[NodeId] {
        match self {
            Op::Input(_) | Op::Constant(_) => &[],
            Op::Add(args) | Op::Mul(args) => args,
            Op::Unary(_, arg) => std::slice::from_ref(arg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub op: Op,
}

/// A circuit before validation. Output labels are `(output index, node)`
/// pairs so that duplicate or missing labels can be reported.
#[derive(Debug, Clone, Default)]
pub struct CircuitDraft {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub nodes: Vec<Node>,
    pub output_labels: Vec<(usize, NodeId)>,
}

/// A broken circuit invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    IdMismatch {
        position: usize,
        id: NodeId,
    },
    /// Operand does not precede the node that uses it.
    ForwardReference {
        node: NodeId,
        operand: NodeId,
    },
    EmptyOperands {
        node: NodeId,
    },
    InputOutOfRange {
        node: NodeId,
        index: usize,
        n: usize,
    },
    NonFiniteConstant {
        node: NodeId,
    },
    OutputIndexOutOfRange {
        index: usize,
        p: usize,
    },
    DuplicateOutput {
        index: usize,
        first: NodeId,
        second: NodeId,
    },
    UnlabeledOutput {
        index: usize,
    },
    OutputNodeMissing {
        index: usize,
        node: NodeId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IdMismatch { position, id } => {
                write!(f, "node at position {position} has id {id}")
            }
            Violation::ForwardReference { node, operand } => {
                write!(
                    f,
                    "node {node} references node {operand}, which does not precede it"
                )
            }
            Violation::EmptyOperands { node } => write!(f, "node {node} has no operands"),
            Violation::InputOutOfRange { node, index, n } => {
                write!(f, "node {node} reads input {index} but n = {n}")
            }
            Violation::NonFiniteConstant { node } => {
                write!(f, "node {node} holds a non-finite constant")
            }
            Violation::OutputIndexOutOfRange { index, p } => {
                write!(f, "output index {index} out of range for p = {p}")
            }
            Violation::DuplicateOutput {
                index,
                first,
                second,
            } => write!(
                f,
                "output {index} labels both node {first} and node {second}"
            ),
            Violation::UnlabeledOutput { index } => write!(f, "output {index} labels no node"),
            Violation::OutputNodeMissing { index, node } => {
                write!(f, "output {index} labels missing node {node}")
            }
        }
    }
}

/// Checks every circuit invariant, returning all violations found.
pub fn validate(draft: &CircuitDraft) -> Vec<Violation> {
    let mut out = Vec::new();
    for (pos, node) in draft.nodes.iter().enumerate() {
        if node.id != pos {
            out.push(Violation::IdMismatch {
                position: pos,
                id: node.id,
            });
        }
        match &node.op {
            Op::Input(index) if *index >= draft.num_inputs => {
                out.push(Violation::InputOutOfRange {
                    node: node.id,
                    index: *index,
                    n: draft.num_inputs,
                })
            }
            Op::Constant(c) if !c.is_finite() => {
                out.push(Violation::NonFiniteConstant { node: node.id })
            }
            Op::Add(args) | Op::Mul(args) if args.is_empty() => {
                out.push(Violation::EmptyOperands { node: node.id })
            }
            _ => {}
        }
        for &operand in node.op.operands() {
            if operand >= pos {
                out.push(Violation::ForwardReference {
                    node: node.id,
                    operand,
                });
            }
        }
    }

    let mut labelled: Vec<Option<NodeId>> = vec![None; draft.num_outputs];
    for &(index, node) in &draft.output_labels {
        if index >= draft.num_outputs {
            out.push(Violation::OutputIndexOutOfRange {
                index,
                p: draft.num_outputs,
            });
            continue;
        }
        if node >= draft.nodes.len() {
            out.push(Violation::OutputNodeMissing { index, node });
        }
        match labelled[index] {
            Some(first) => out.push(Violation::DuplicateOutput {
                index,
                first,
                second: node,
            }),
            None => labelled[index] = Some(node),
        }
    }
    for (index, l) in labelled.iter().enumerate() {
        if l.is_none() {
            out.push(Violation::UnlabeledOutput { index });
        }
    }
    out
}

/// A validated, immutable arithmetic circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    nodes: Vec<Op>,
    num_inputs: usize,
    outputs: Vec<NodeId>,
}

impl Circuit {
    pub fn from_draft(draft: CircuitDraft) -> Result<Circuit> {
        let violations = validate(&draft);
        if !violations.is_empty() {
            return Err(Error::InvalidCircuit(violations));
        }
        let mut outputs = vec![0; draft.num_outputs];
        for (index, node) in draft.output_labels {
            outputs[index] = node;
        }
        Ok(Circuit {
            nodes: draft.nodes.into_iter().map(|n| n.op).collect(),
            num_inputs: draft.num_inputs,
            outputs,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn ops(&self) -> &[Op] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|op| op.operands().len()).sum()
    }

    /// `max(n, p, edges)`.
    pub fn size(&self) -> usize {
        self.num_inputs
            .max(self.num_outputs())
            .max(self.edge_count())
    }

    /// Total degree of the polynomial computed, or `None` when an analytic
    /// gate feeds some output.
    pub fn polynomial_degree(&self) -> Option<usize> {
        let mut deg: Vec<Option<usize>> = Vec::with_capacity(self.nodes.len());
        for op in &self.nodes {
            let d = match op {
                Op::Input(_) => Some(1),
                Op::Constant(_) => Some(0),
                Op::Add(args) => args
                    .iter()
                    .try_fold(0, |acc, &a| deg[a].map(|d| acc.max(d))),
                Op::Mul(args) => args.iter().try_fold(0, |acc, &a| deg[a].map(|d| acc + d)),
                Op::Unary(..) => None,
            };
            deg.push(d);
        }
        self.outputs
            .iter()
            .try_fold(0, |acc, &o| deg[o].map(|d| acc.max(d)))
    }

    /// Evaluates the circuit over `R`. `ctx` fixes the ring instance (the
    /// jet order, for instance) and every input must belong to it.
    pub fn eval_ring<R: Ring>(&self, ctx: R::Ctx, inputs: &[R]) -> Result<Vec<R>> {
        if inputs.len() != self.num_inputs {
            return Err(Error::Dimension {
                what: "circuit inputs",
                expected: self.num_inputs,
                got: inputs.len(),
            });
        }
        if inputs.iter().any(|x| !x.in_ring(ctx)) {
            return Err(Error::invalid("circuit inputs must share one ring"));
        }
        let mut values: Vec<R> = Vec::with_capacity(self.nodes.len());
        for (id, op) in self.nodes.iter().enumerate() {
            let v = match op {
                Op::Input(i) => inputs[*i].clone(),
                Op::Constant(c) => R::constant(ctx, *c),
                Op::Add(args) => {
                    let mut acc = values[args[0]].clone();
                    for &a in &args[1..] {
                        acc.add_assign(&values[a]);
                    }
                    acc
                }
                Op::Mul(args) => {
                    let mut acc = values[args[0]].clone();
                    for &a in &args[1..] {
                        acc = acc.mul(&values[a]);
                    }
                    acc
                }
                Op::Unary(gate, a) => values[*a].apply(*gate).map_err(|e| e.at_node(id))?,
            };
            values.push(v);
        }
        Ok(self.outputs.iter().map(|&o| values[o].clone()).collect())
    }

    pub fn eval_scalar(&self, inputs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.eval_ring((), inputs)
    }

    pub fn eval_jets(&self, order: usize, inputs: &[Jet]) -> Result<Vec<Jet>> {
        self.eval_ring(order, inputs)
    }

    /// Evaluates over whichever ring the inputs belong to.
    pub fn eval(&self, inputs: &[RingValue]) -> Result<Vec<RingValue>> {
        match inputs.first() {
            None | Some(RingValue::Scalar(_)) => {
                let xs = inputs
                    .iter()
                    .map(|v| match v {
                        RingValue::Scalar(c) => Ok(*c),
                        RingValue::Jet(_) => Err(mixed()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(self
                    .eval_scalar(&xs)?
                    .into_iter()
                    .map(RingValue::Scalar)
                    .collect())
            }
            Some(RingValue::Jet(first)) => {
                let order = first.order();
                let xs = inputs
                    .iter()
                    .map(|v| match v {
                        RingValue::Jet(j) => Ok(j.clone()),
                        RingValue::Scalar(_) => Err(mixed()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(self
                    .eval_jets(order, &xs)?
                    .into_iter()
                    .map(RingValue::Jet)
                    .collect())
            }
        }
    }

    /// The circuit computing `outer(inner(x))`. Evaluating it performs the
    /// same operations in the same order as evaluating `inner` and then
    /// `outer`, so results are bit-identical.
    pub fn compose(outer: &Circuit, inner: &Circuit) -> Result<Circuit> {
        if outer.num_inputs != inner.num_outputs() {
            return Err(Error::Dimension {
                what: "composition arity",
                expected: inner.num_outputs(),
                got: outer.num_inputs,
            });
        }
        let mut nodes = inner.nodes.clone();
        let mut remap = Vec::with_capacity(outer.nodes.len());
        for op in &outer.nodes {
            let id = match op {
                Op::Input(j) => inner.outputs[*j],
                other => {
                    let mapped = match other {
                        Op::Constant(c) => Op::Constant(*c),
                        Op::Add(args) => Op::Add(args.iter().map(|&a| remap[a]).collect()),
                        Op::Mul(args) => Op::Mul(args.iter().map(|&a| remap[a]).collect()),
                        Op::Unary(g, a) => Op::Unary(*g, remap[*a]),
                        Op::Input(_) => unreachable!(),
                    };
                    nodes.push(mapped);
                    nodes.len() - 1
                }
            };
            remap.push(id);
        }
        Ok(Circuit {
            nodes,
            num_inputs: inner.num_inputs,
            outputs: outer.outputs.iter().map(|&o| remap[o]).collect(),
        })
    }

    pub fn to_draft(&self) -> CircuitDraft {
        CircuitDraft {
            num_inputs: self.num_inputs,
            num_outputs: self.outputs.len(),
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, op)| Node { id, op: op.clone() })
                .collect(),
            output_labels: self.outputs.iter().copied().enumerate().collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Circuit> {
        let doc: CircuitJson =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("circuit JSON: {e}")))?;
        doc.into_circuit()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&CircuitJson::from_circuit(self)).expect("circuit serializes")
    }
}

fn mixed() -> Error {
    Error::invalid("circuit inputs must all be scalars or all be jets")
}

/// Ring element of a circuit evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum RingValue {
    Scalar(Complex64),
    Jet(Jet),
}

/// Commutative ring a circuit can be evaluated over.
pub trait Ring: Clone {
    /// Identifies one ring instance (for jets, the truncation order).
    type Ctx: Copy;

    fn constant(ctx: Self::Ctx, c: Complex64) -> Self;
    fn in_ring(&self, ctx: Self::Ctx) -> bool;
    fn add_assign(&mut self, other: &Self);
    fn mul(&self, other: &Self) -> Self;
    fn apply(&self, gate: AnalyticGate) -> Result<Self>;
}

impl Ring for Complex64 {
    type Ctx = ();

    fn constant(_: (), c: Complex64) -> Self {
        c
    }

    fn in_ring(&self, _: ()) -> bool {
        true
    }

    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }

    fn mul(&self, other: &Self) -> Self {
        self * other
    }

    fn apply(&self, gate: AnalyticGate) -> Result<Self> {
        gate.eval_scalar(*self)
    }
}

impl Ring for Jet {
    type Ctx = usize;

    fn constant(order: usize, c: Complex64) -> Self {
        Jet::constant(order, c)
    }

    fn in_ring(&self, order: usize) -> bool {
        self.order() == order
    }

    fn add_assign(&mut self, other: &Self) {
        self.add_assign_unchecked(other);
    }

    fn mul(&self, other: &Self) -> Self {
        crate::jet::mul_coeffs(self.coeffs(), other.coeffs())
    }

    fn apply(&self, gate: AnalyticGate) -> Result<Self> {
        self.compose(gate)
    }
}

/// Incremental circuit construction; [`CircuitBuilder::build`] validates.
#[derive(Debug, Default)]
pub struct CircuitBuilder {
    num_inputs: usize,
    nodes: Vec<Node>,
    outputs: Vec<NodeId>,
    inputs: HashMap<usize, NodeId>,
}

impl CircuitBuilder {
    pub fn new(num_inputs: usize) -> Self {
        CircuitBuilder {
            num_inputs,
            ..Default::default()
        }
    }

    fn push(&mut self, op: Op) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { id, op });
        id
    }

    /// Node reading input `i`; repeated calls return the same node.
    pub fn input(&mut self, i: usize) -> NodeId {
        if let Some(&id) = self.inputs.get(&i) {
            return id;
        }
        let id = self.push(Op::Input(i));
        self.inputs.insert(i, id);
        id
    }

    pub fn constant(&mut self, c: Complex64) -> NodeId {
        self.push(Op::Constant(c))
    }

    pub fn real(&mut self, x: f64) -> NodeId {
        self.constant(Complex64::new(x, 0.0))
    }

    pub fn add(&mut self, args: &[NodeId]) -> NodeId {
        self.push(Op::Add(args.to_vec()))
    }

    pub fn mul(&mut self, args: &[NodeId]) -> NodeId {
        self.push(Op::Mul(args.to_vec()))
    }

    /// `a - b`, as `a + (-1)·b`.
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let neg = self.real(-1.0);
        let nb = self.mul(&[neg, b]);
        self.add(&[a, nb])
    }

    pub fn unary(&mut self, gate: AnalyticGate, a: NodeId) -> NodeId {
        self.push(Op::Unary(gate, a))
    }

    /// Labels `node` with the next output index.
    pub fn output(&mut self, node: NodeId) {
        self.outputs.push(node);
    }

    pub fn build(self) -> Result<Circuit> {
        Circuit::from_draft(CircuitDraft {
            num_inputs: self.num_inputs,
            num_outputs: self.outputs.len(),
            nodes: self.nodes,
            output_labels: self.outputs.into_iter().enumerate().collect(),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CircuitJson {
    version: u32,
    n: usize,
    p: usize,
    nodes: Vec<NodeJson>,
    outputs: Vec<NodeId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeJson {
    id: NodeId,
    #[serde(flatten)]
    op: OpJson,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum OpJson {
    Input { index: usize },
    Const { value: [f64; 2] },
    Add { args: Vec<NodeId> },
    Mul { args: Vec<NodeId> },
    Unary { gate: AnalyticGate, arg: NodeId },
}

impl CircuitJson {
    fn from_circuit(c: &Circuit) -> Self {
        let nodes = c
            .nodes
            .iter()
            .enumerate()
            .map(|(id, op)| NodeJson {
                id,
                op: match op {
                    Op::Input(i) => OpJson::Input { index: *i },
                    Op::Constant(v) => OpJson::Const {
                        value: [v.re, v.im],
                    },
                    Op::Add(a) => OpJson::Add { args: a.clone() },
                    Op::Mul(a) => OpJson::Mul { args: a.clone() },
                    Op::Unary(g, a) => OpJson::Unary { gate: *g, arg: *a },
                },
            })
            .collect();
        CircuitJson {
            version: CIRCUIT_FORMAT_VERSION,
            n: c.num_inputs,
            p: c.outputs.len(),
            nodes,
            outputs: c.outputs.clone(),
        }
    }

    fn into_circuit(self) -> Result<Circuit> {
        if self.version != CIRCUIT_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported circuit format version {}",
                self.version
            )));
        }
        let nodes = self
            .nodes
            .into_iter()
            .map(|n| Node {
                id: n.id,
                op: match n.op {
                    OpJson::Input { index } => Op::Input(index),
                    OpJson::Const { value } => Op::Constant(Complex64::new(value[0], value[1])),
                    OpJson::Add { args } => Op::Add(args),
                    OpJson::Mul { args } => Op::Mul(args),
                    OpJson::Unary { gate, arg } => Op::Unary(gate, arg),
                },
            })
            .collect();
        Circuit::from_draft(CircuitDraft {
            num_inputs: self.n,
            num_outputs: self.p,
            nodes,
            output_labels: self.outputs.into_iter().enumerate().collect(),
        })
    }
}
