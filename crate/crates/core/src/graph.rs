//! The computation hypergraph.
//!
//! Nodes are appended and never removed. Every derived node is the output of
//! exactly one hyperedge ([`EdgeKind`]), and structurally identical edges are
//! shared: inserting `mul(x, y)` twice returns the same [`NodeId`]. The edge
//! constructors also apply the local algebraic simplifications (`0 + x = x`,
//! `1 * x = x`, `0 * x = 0`, `x^1 = x`, `x^0 = 1`) and fold edges whose
//! operands are all constants, before anything reaches the cons table.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use crate::autodiff::AdjointMap;
use crate::error::{Error, Result};
use crate::value::{Domain, Value};

static NEXT_GRAPH_ID: AtomicU32 = AtomicU32::new(0);

/// Handle to a node of one particular [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    graph: u32,
    index: u32,
}

impl NodeId {
    /// Creation index within the owning graph.
    pub fn index(self) -> usize {
        self.index as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// `base^k` for a fixed integer `k`.
    Pow(i64, NodeId),
    Exp(NodeId),
    Log(NodeId),
}

impl EdgeKind {
    /// Operands in argument order, repeated if the edge uses a node twice.
    pub fn operands(&self) -> impl Iterator<Item = NodeId> {
        let (a, b) = match *self {
            EdgeKind::Add(a, b) | EdgeKind::Mul(a, b) => (a, Some(b)),
            EdgeKind::Pow(_, a) | EdgeKind::Exp(a) | EdgeKind::Log(a) => (a, None),
        };
        std::iter::once(a).chain(b)
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            EdgeKind::Add(..) => "add",
            EdgeKind::Mul(..) => "mul",
            EdgeKind::Pow(..) => "pow",
            EdgeKind::Exp(_) => "exp",
            EdgeKind::Log(_) => "log",
        }
    }

    /// Operator label as drawn in graph exports, e.g. `pow(-1)`.
    pub fn label(&self) -> String {
        match self {
            EdgeKind::Pow(k, _) => format!("pow({k})"),
            other => other.op_name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Input(String),
    Const(Value),
    Derived(EdgeKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ConsKey {
    Const(Value),
    Edge(EdgeKind),
}

#[derive(Debug)]
pub struct Graph {
    id: u32,
    domain: Domain,
    nodes: Vec<NodeKind>,
    cons: HashMap<ConsKey, NodeId>,
    inputs: HashMap<String, NodeId>,
    pub(crate) adjoints: HashMap<NodeId, Arc<AdjointMap>>,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new(Domain::Float)
    }
}

impl Graph {
    pub fn new(domain: Domain) -> Self {
        Graph {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            domain,
            nodes: Vec::new(),
            cons: HashMap::new(),
            inputs: HashMap::new(),
            adjoints: HashMap::new(),
        }
    }

    pub fn float() -> Self {
        Graph::new(Domain::Float)
    }

    pub fn rational() -> Self {
        Graph::new(Domain::Rational)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All node ids in creation order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(|i| self.id_at(i))
    }

    pub fn kind(&self, id: NodeId) -> &NodeKind {
        self.check(id).expect("node id from another graph");
        &self.nodes[id.index()]
    }

    pub fn edge(&self, id: NodeId) -> Option<&EdgeKind> {
        match self.kind(id) {
            NodeKind::Derived(e) => Some(e),
            _ => None,
        }
    }

    pub fn const_value(&self, id: NodeId) -> Option<&Value> {
        match self.kind(id) {
            NodeKind::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_const(&self, id: NodeId) -> bool {
        matches!(self.kind(id), NodeKind::Const(_))
    }

    pub fn input_name(&self, id: NodeId) -> Option<&str> {
        match self.kind(id) {
            NodeKind::Input(name) => Some(name),
            _ => None,
        }
    }

    pub fn find_input(&self, name: &str) -> Option<NodeId> {
        self.inputs.get(name).copied()
    }

    /// Input nodes in creation order.
    pub fn inputs(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self.inputs.values().copied().collect();
        ids.sort();
        ids
    }

    /// Returns `Err(ForeignNodeId)` unless `id` was created by this graph.
    pub fn check(&self, id: NodeId) -> Result<NodeId> {
        if id.graph == self.id && id.index() < self.nodes.len() {
            Ok(id)
        } else {
            Err(Error::ForeignNodeId(id))
        }
    }

    fn id_at(&self, index: usize) -> NodeId {
        NodeId {
            graph: self.id,
            index: index as u32,
        }
    }

    fn push(&mut self, kind: NodeKind) -> NodeId {
        let id = self.id_at(self.nodes.len());
        self.nodes.push(kind);
        id
    }

    fn intern(&mut self, key: ConsKey) -> NodeId {
        if let Some(&id) = self.cons.get(&key) {
            return id;
        }
        let kind = match &key {
            ConsKey::Const(v) => NodeKind::Const(v.clone()),
            ConsKey::Edge(e) => NodeKind::Derived(*e),
        };
        let id = self.push(kind);
        self.cons.insert(key, id);
        id
    }

    /// A fresh named input.
    pub fn input(&mut self, name: &str) -> Result<NodeId> {
        if name.is_empty() {
            return Err(Error::EmptyInputName);
        }
        if self.inputs.contains_key(name) {
            return Err(Error::DuplicateInputName(name.to_string()));
        }
        let id = self.push(NodeKind::Input(name.to_string()));
        self.inputs.insert(name.to_string(), id);
        Ok(id)
    }

    /// The shared constant node for `v`, which must be in the graph's domain.
    pub fn constant(&mut self, v: impl Into<Value>) -> Result<NodeId> {
        let v = v.into();
        if v.domain() != self.domain {
            return Err(Error::DomainMismatch {
                expected: self.domain,
                found: v.domain(),
            });
        }
        Ok(self.intern(ConsKey::Const(v)))
    }

    /// The integer constant `n` in the graph's domain.
    pub fn int(&mut self, n: i64) -> NodeId {
        self.intern(ConsKey::Const(Value::int(self.domain, n)))
    }

    pub fn zero(&mut self) -> NodeId {
        self.int(0)
    }

    pub fn one(&mut self) -> NodeId {
        self.int(1)
    }

    fn folded(&mut self, v: Value) -> NodeId {
        self.intern(ConsKey::Const(v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), _) if x.is_zero() => Ok(b),
            (_, Some(y)) if y.is_zero() => Ok(a),
            (Some(x), Some(y)) => {
                let v = x.add(y)?;
                Ok(self.folded(v))
            }
            _ => Ok(self.intern(ConsKey::Edge(EdgeKind::Add(a, b)))),
        }
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), _) if x.is_zero() => Ok(a),
            (_, Some(y)) if y.is_zero() => Ok(b),
            (Some(x), _) if x.is_one() => Ok(b),
            (_, Some(y)) if y.is_one() => Ok(a),
            (Some(x), Some(y)) => {
                let v = x.mul(y)?;
                Ok(self.folded(v))
            }
            _ => Ok(self.intern(ConsKey::Edge(EdgeKind::Mul(a, b)))),
        }
    }

    pub fn pow(&mut self, k: i64, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        if k == 1 {
            return Ok(a);
        }
        if k == 0 {
            return Ok(self.one());
        }
        if let Some(x) = self.const_value(a) {
            let v = x.powi(k)?;
            return Ok(self.folded(v));
        }
        Ok(self.intern(ConsKey::Edge(EdgeKind::Pow(k, a))))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        if let Some(x) = self.const_value(a) {
            let v = x.exp()?;
            return Ok(self.folded(v));
        }
        Ok(self.intern(ConsKey::Edge(EdgeKind::Exp(a))))
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.check(a)?;
        if let Some(x) = self.const_value(a) {
            let v = x.ln()?;
            return Ok(self.folded(v));
        }
        Ok(self.intern(ConsKey::Edge(EdgeKind::Log(a))))
    }

    /// Inserts `edge` through the matching simplifying constructor.
    pub fn apply(&mut self, edge: EdgeKind) -> Result<NodeId> {
        match edge {
            EdgeKind::Add(a, b) => self.add(a, b),
            EdgeKind::Mul(a, b) => self.mul(a, b),
            EdgeKind::Pow(k, a) => self.pow(k, a),
            EdgeKind::Exp(a) => self.exp(a),
            EdgeKind::Log(a) => self.log(a),
        }
    }

    /// Marks every node the roots depend on, indexed by creation index.
    pub(crate) fn reachable(&self, roots: &[NodeId]) -> Result<Vec<bool>> {
        let mut marked = vec![false; self.nodes.len()];
        let mut top = 0;
        for &r in roots {
            self.check(r)?;
            marked[r.index()] = true;
            top = top.max(r.index() + 1);
        }
        // Operands always precede their edge, so one descending sweep suffices.
        for i in (0..top).rev() {
            if !marked[i] {
                continue;
            }
            if let NodeKind::Derived(e) = &self.nodes[i] {
                for op in e.operands() {
                    marked[op.index()] = true;
                }
            }
        }
        Ok(marked)
    }

    /// Every node the roots depend on, each once, operands before users.
    ///
    /// Creation order is already topological, so this is the reachable set
    /// in ascending creation index.
    pub fn topo_order(&self, roots: &[NodeId]) -> Result<Vec<NodeId>> {
        let marked = self.reachable(roots)?;
        Ok(marked
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.id_at(i))
            .collect())
    }

    /// Counts edges of each kind among the nodes the roots depend on, in the
    /// order add, mul, pow, exp, log.
    pub fn edge_counts(&self, roots: &[NodeId]) -> Result<EdgeCounts> {
        let mut counts = EdgeCounts::default();
        for id in self.topo_order(roots)? {
            match self.edge(id) {
                Some(EdgeKind::Add(..)) => counts.add += 1,
                Some(EdgeKind::Mul(..)) => counts.mul += 1,
                Some(EdgeKind::Pow(..)) => counts.pow += 1,
                Some(EdgeKind::Exp(_)) => counts.exp += 1,
                Some(EdgeKind::Log(_)) => counts.log += 1,
                None => {}
            }
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct EdgeCounts {
    pub add: usize,
    pub mul: usize,
    pub pow: usize,
    pub exp: usize,
    pub log: usize,
}

impl EdgeCounts {
    pub fn total(&self) -> usize {
        self.add + self.mul + self.pow + self.exp + self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_x_log_x(g: &mut Graph) -> (NodeId, NodeId, NodeId, NodeId) {
        let x = g.input("x").unwrap();
        let two = g.constant(2.0).unwrap();
        let y = g.mul(two, x).unwrap();
        let z = g.log(x).unwrap();
        let l = g.add(y, z).unwrap();
        (x, y, z, l)
    }

    #[test]
    fn inputs_are_fresh_and_unique() {
        let mut g = Graph::float();
        let x = g.input("x").unwrap();
        let y = g.input("y").unwrap();
        assert_ne!(x, y);
        assert_eq!(g.input("x"), Err(Error::DuplicateInputName("x".into())));
        assert_eq!(g.input(""), Err(Error::EmptyInputName));
        assert_eq!(g.find_input("y"), Some(y));
        assert_eq!(g.input_name(x), Some("x"));
    }

    #[test]
    fn constants_are_hash_consed() {
        let mut g = Graph::float();
        let a = g.constant(2.0).unwrap();
        let b = g.constant(2.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(g.len(), 1);

        let mut r = Graph::rational();
        let third = r.constant(Value::ratio(1, 3)).unwrap();
        assert_eq!(r.constant(Value::ratio(2, 6)).unwrap(), third);
        assert!(matches!(
            r.constant(1.0),
            Err(Error::DomainMismatch { .. })
        ));
    }

    #[test]
    fn add_rules() {
        let mut g = Graph::float();
        let x = g.input("x").unwrap();
        let y = g.input("y").unwrap();
        let zero = g.constant(0.0).unwrap();
        assert_eq!(g.add(zero, x).unwrap(), x);
        assert_eq!(g.add(x, zero).unwrap(), x);
        let s1 = g.add(x, y).unwrap();
        assert_eq!(g.add(x, y).unwrap(), s1);
        assert_ne!(g.add(y, x).unwrap(), s1);
        let (two, three) = (g.constant(2.0).unwrap(), g.constant(3.0).unwrap());
        let five = g.add(two, three).unwrap();
        assert_eq!(g.const_value(five), Some(&Value::Float(5.0)));
    }

    #[test]
    fn mul_rules() {
        let mut g = Graph::float();
        let x = g.input("x").unwrap();
        let y = g.input("y").unwrap();
        let zero = g.zero();
        let one = g.one();
        assert_eq!(g.mul(zero, x).unwrap(), zero);
        assert_eq!(g.mul(x, zero).unwrap(), zero);
        assert_eq!(g.mul(one, x).unwrap(), x);
        assert_eq!(g.mul(x, one).unwrap(), x);
        let xy = g.mul(x, y).unwrap();
        let yx = g.mul(y, x).unwrap();
        assert_ne!(xy, yx);
        assert_eq!(g.mul(x, y).unwrap(), xy);
    }

    #[test]
    fn pow_rules() {
        let mut g = Graph::float();
        let x = g.input("x").unwrap();
        assert_eq!(g.pow(1, x).unwrap(), x);
        let p0 = g.pow(0, x).unwrap();
        assert_eq!(g.const_value(p0), Some(&Value::Float(1.0)));
        let four = g.constant(4.0).unwrap();
        let q = g.pow(-1, four).unwrap();
        assert_eq!(g.const_value(q), Some(&Value::Float(0.25)));
        let zero = g.zero();
        assert_eq!(g.pow(-2, zero), Err(Error::ZeroToNegativePower));
        let p = g.pow(-1, x).unwrap();
        assert_eq!(g.edge(p), Some(&EdgeKind::Pow(-1, x)));
    }

    #[test]
    fn log_exp_rules() {
        let mut g = Graph::float();
        let zero = g.zero();
        let e0 = g.exp(zero).unwrap();
        assert_eq!(g.const_value(e0), Some(&Value::Float(1.0)));
        let one = g.one();
        let l1 = g.log(one).unwrap();
        assert_eq!(g.const_value(l1), Some(&Value::Float(0.0)));
        let m1 = g.constant(-1.0).unwrap();
        assert!(matches!(g.log(m1), Err(Error::LogDomainError(_))));

        // No cancellation between log and exp.
        let x = g.input("x").unwrap();
        let ex = g.exp(x).unwrap();
        let lex = g.log(ex).unwrap();
        assert_eq!(g.edge(lex), Some(&EdgeKind::Log(ex)));
    }

    #[test]
    fn rational_graph_folds_exact_log_exp_only() {
        let mut g = Graph::rational();
        let one = g.one();
        let l = g.log(one).unwrap();
        assert_eq!(g.const_value(l), Some(&Value::ratio(0, 1)));
        let two = g.int(2);
        assert!(matches!(
            g.log(two),
            Err(Error::ExactModeUnsupported { op: "log", .. })
        ));
        // Symbolic log/exp nodes are allowed; evaluation decides exactness.
        let x = g.input("x").unwrap();
        assert!(g.log(x).is_ok());
    }

    #[test]
    fn foreign_ids_are_rejected() {
        let mut g = Graph::float();
        let mut h = Graph::float();
        let x = g.input("x").unwrap();
        let y = h.input("y").unwrap();
        assert_eq!(h.add(x, y), Err(Error::ForeignNodeId(x)));
        assert_eq!(h.topo_order(&[x]), Err(Error::ForeignNodeId(x)));
    }

    #[test]
    fn topo_order_cases() {
        let mut g = Graph::float();
        let (x, y, z, l) = two_x_log_x(&mut g);
        assert_eq!(g.topo_order(&[x]).unwrap(), vec![x]);
        let order = g.topo_order(&[l]).unwrap();
        assert_eq!(order.iter().filter(|&&n| n == x).count(), 1);
        let pos = |n| order.iter().position(|&m| m == n).unwrap();
        assert!(pos(x) < pos(y) && pos(x) < pos(z));
        assert!(pos(y) < pos(l) && pos(z) < pos(l));
        assert_eq!(order.len(), 5);
        assert!(g.topo_order(&[]).unwrap().is_empty());
    }

    #[test]
    fn edge_counts() {
        let mut g = Graph::float();
        let (_, _, _, l) = two_x_log_x(&mut g);
        let c = g.edge_counts(&[l]).unwrap();
        assert_eq!((c.add, c.mul, c.log, c.total()), (1, 1, 1, 3));
    }
}
