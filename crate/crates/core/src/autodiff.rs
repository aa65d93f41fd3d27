//! Reverse-mode differentiation as a graph-to-graph transformation.
//!
//! [`backward`] sweeps the graph from a target towards its inputs and emits
//! each adjoint as ordinary graph nodes, built with the same simplifying
//! constructors as the primal computation. Derivatives can therefore be
//! differentiated again to any order.
//!
//! [`forward_first_order`] is the older forward analysis: it walks from the
//! differentiation variable towards the target and produces a numeric
//! [`FirstOrderPlan`] instead of graph nodes. It only serves first
//! derivatives and is kept as an independent cross-check of [`backward`].

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::Result;
use crate::eval::{compile, Bindings, Tape};
use crate::graph::{EdgeKind, Graph, NodeId};
use crate::value::Value;

/// Adjoints of every node with respect to one target.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointMap {
    target: NodeId,
    zero: NodeId,
    adjoints: HashMap<NodeId, NodeId>,
}

impl AdjointMap {
    pub fn target(&self) -> NodeId {
        self.target
    }

    /// The node holding `∂target/∂node`; the zero constant for nodes the
    /// target does not depend on.
    pub fn get(&self, node: NodeId) -> NodeId {
        self.adjoints.get(&node).copied().unwrap_or(self.zero)
    }

    /// Nodes the target depends on (constants excluded), with their adjoints,
    /// in creation order.
    pub fn entries(&self) -> Vec<(NodeId, NodeId)> {
        let mut v: Vec<_> = self.adjoints.iter().map(|(&k, &d)| (k, d)).collect();
        v.sort();
        v
    }

    pub fn len(&self) -> usize {
        self.adjoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjoints.is_empty()
    }
}

/// One additive term of an operand's adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contribution {
    pub to: NodeId,
    pub term: NodeId,
}

/// The chain-rule terms that edge `edge`, whose output `out` has adjoint
/// `d_out`, sends to its non-constant operands, in operand order.
pub fn contributions(
    graph: &mut Graph,
    out: NodeId,
    edge: EdgeKind,
    d_out: NodeId,
) -> Result<Vec<Contribution>> {
    let mut terms = Vec::with_capacity(2);
    match edge {
        EdgeKind::Add(a, b) => {
            for x in [a, b] {
                if !graph.is_const(x) {
                    terms.push(Contribution { to: x, term: d_out });
                }
            }
        }
        EdgeKind::Mul(a, b) => {
            for (x, other) in [(a, b), (b, a)] {
                if !graph.is_const(x) {
                    let term = graph.mul(other, d_out)?;
                    terms.push(Contribution { to: x, term });
                }
            }
        }
        EdgeKind::Pow(k, x) => {
            if !graph.is_const(x) {
                let lowered = graph.pow(k - 1, x)?;
                let kk = graph.int(k);
                let local = graph.mul(kk, lowered)?;
                let term = graph.mul(d_out, local)?;
                terms.push(Contribution { to: x, term });
            }
        }
        EdgeKind::Exp(x) => {
            if !graph.is_const(x) {
                let term = graph.mul(out, d_out)?;
                terms.push(Contribution { to: x, term });
            }
        }
        EdgeKind::Log(x) => {
            if !graph.is_const(x) {
                let recip = graph.pow(-1, x)?;
                let term = graph.mul(recip, d_out)?;
                terms.push(Contribution { to: x, term });
            }
        }
    }
    Ok(terms)
}

/// Back-propagates from `target`, adding the adjoint nodes to the graph.
///
/// Each node's adjoint is its contributions folded as
/// `add(t_n, ... add(t_2, add(t_1, 0)))` in emission order, which is reverse
/// creation order of the emitting edges, operands left to right. Results are
/// cached per target.
pub fn backward(graph: &mut Graph, target: NodeId) -> Result<Arc<AdjointMap>> {
    graph.check(target)?;
    if let Some(map) = graph.adjoints.get(&target) {
        return Ok(Arc::clone(map));
    }
    let zero = graph.zero();
    let mut adjoints = HashMap::new();
    if !graph.is_const(target) {
        let order = graph.topo_order(&[target])?;
        let mut pending: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for &node in order.iter().rev() {
            if graph.is_const(node) {
                continue;
            }
            let adjoint = if node == target {
                graph.one()
            } else {
                let mut acc = zero;
                for term in pending.remove(&node).unwrap_or_default() {
                    acc = graph.add(term, acc)?;
                }
                acc
            };
            adjoints.insert(node, adjoint);
            if let Some(&edge) = graph.edge(node) {
                for c in contributions(graph, node, edge, adjoint)? {
                    pending.entry(c.to).or_default().push(c.term);
                }
            }
        }
    }
    let map = Arc::new(AdjointMap {
        target,
        zero,
        adjoints,
    });
    graph.adjoints.insert(target, Arc::clone(&map));
    Ok(map)
}

/// The node holding `∂target/∂wrt`.
pub fn deriv(graph: &mut Graph, target: NodeId, wrt: NodeId) -> Result<NodeId> {
    graph.check(target)?;
    graph.check(wrt)?;
    if graph.is_const(wrt) {
        return Ok(graph.zero());
    }
    Ok(backward(graph, target)?.get(wrt))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    /// `d_out`
    Unit,
    /// `d_out * slot`
    Times(usize),
    /// `d_out / slot`
    Over(usize),
    /// `d_out * k * slot^(k-1)`
    Power(i64, usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    from: usize,
    factor: Factor,
}

#[derive(Debug, Clone, PartialEq)]
enum Plan {
    Constant(Value),
    /// `steps[0]` belongs to the target; the last step belongs to `wrt`.
    Walk(Vec<Vec<Term>>),
}

/// A numeric recipe for one first derivative, evaluated against a primal tape.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderPlan {
    primal: Tape,
    plan: Plan,
}

/// Builds the forward analysis for `∂target/∂wrt` without modifying the graph.
///
/// Starting at `wrt`, every edge that consumes it requests the derivative of
/// the edge's output, recursively, until the target is reached; each path
/// contributes a product of local factors. Paths that never reach the target
/// contribute nothing and are dropped.
pub fn forward_first_order(graph: &Graph, target: NodeId, wrt: NodeId) -> Result<FirstOrderPlan> {
    graph.check(target)?;
    graph.check(wrt)?;
    let primal = compile(graph, &[("target", target)])?;
    let domain = graph.domain();
    if wrt == target {
        return Ok(FirstOrderPlan {
            primal,
            plan: Plan::Constant(Value::one(domain)),
        });
    }
    let upstream = graph.reachable(&[target])?;
    if graph.is_const(target) || graph.is_const(wrt) || !upstream[wrt.index()] {
        return Ok(FirstOrderPlan {
            primal,
            plan: Plan::Constant(Value::zero(domain)),
        });
    }

    // Nodes on some path wrt -> target.
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let mut on_path = vec![false; graph.len()];
    on_path[wrt.index()] = true;
    for &id in &ids[wrt.index() + 1..=target.index()] {
        if !upstream[id.index()] {
            continue;
        }
        if let Some(edge) = graph.edge(id) {
            on_path[id.index()] = edge.operands().any(|op| on_path[op.index()]);
        }
    }

    let path: Vec<NodeId> = ids[wrt.index()..=target.index()]
        .iter()
        .rev()
        .copied()
        .filter(|id| on_path[id.index()])
        .collect();
    let step_of: HashMap<NodeId, usize> = path.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let slot = |id: NodeId| primal.slot_of(id).expect("path node compiled into primal tape");

    let mut steps: Vec<Vec<Term>> = vec![Vec::new(); path.len()];
    // Consumers in creation order so each node's terms sum deterministically.
    for &out in path.iter().rev() {
        let Some(&edge) = graph.edge(out) else { continue };
        let from = step_of[&out];
        let mut request = |x: NodeId, factor: Factor| {
            if let Some(&s) = step_of.get(&x) {
                steps[s].push(Term { from, factor });
            }
        };
        match edge {
            EdgeKind::Add(a, b) => {
                request(a, Factor::Unit);
                request(b, Factor::Unit);
            }
            EdgeKind::Mul(a, b) => {
                request(a, Factor::Times(slot(b)));
                request(b, Factor::Times(slot(a)));
            }
            EdgeKind::Pow(k, x) => request(x, Factor::Power(k, slot(x))),
            EdgeKind::Log(x) => request(x, Factor::Over(slot(x))),
            EdgeKind::Exp(x) => request(x, Factor::Times(slot(out))),
        }
    }
    Ok(FirstOrderPlan {
        primal,
        plan: Plan::Walk(steps),
    })
}

impl FirstOrderPlan {
    /// The primal tape the plan reads from; its single output is the target.
    pub fn primal(&self) -> &Tape {
        &self.primal
    }

    pub fn evaluate(&self, bindings: &Bindings) -> Result<Value> {
        let domain = self.primal.domain();
        let steps = match &self.plan {
            Plan::Constant(v) => return Ok(v.clone()),
            Plan::Walk(steps) => steps,
        };
        let slots = self.primal.eval_slots(bindings)?;
        let mut derivs: Vec<Value> = Vec::with_capacity(steps.len());
        derivs.push(Value::one(domain));
        for terms in &steps[1..] {
            let mut acc = Value::zero(domain);
            for t in terms {
                let d = &derivs[t.from];
                let contribution = match t.factor {
                    Factor::Unit => d.clone(),
                    Factor::Times(s) => d.mul(&slots[s])?,
                    Factor::Over(s) => d.div(&slots[s])?,
                    Factor::Power(k, s) => {
                        let local = Value::int(domain, k).mul(&slots[s].powi(k - 1)?)?;
                        d.mul(&local)?
                    }
                };
                acc = acc.add(&contribution)?;
            }
            derivs.push(acc);
        }
        Ok(derivs.pop().expect("plan has at least the target step"))
    }
}
