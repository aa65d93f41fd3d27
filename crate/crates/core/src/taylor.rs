//! Taylor coefficients by repeated reverse-mode differentiation.

use crate::autodiff::deriv;
use crate::error::{Error, Result};
use crate::eval::{compile, Bindings};
use crate::graph::{Graph, NodeId};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorResult {
    pub center: Value,
    /// `coefficients[k] = f^(k)(center) / k!`, starting with `f(center)`.
    pub coefficients: Vec<Value>,
}

impl TaylorResult {
    /// The truncated series evaluated at `x`, by Horner's rule.
    pub fn partial_sum(&self, x: &Value) -> Result<Value> {
        let h = x.add(&self.center.mul(&Value::int(self.center.domain(), -1))?)?;
        let mut acc = Value::zero(self.center.domain());
        for c in self.coefficients.iter().rev() {
            acc = acc.mul(&h)?.add(c)?;
        }
        Ok(acc)
    }
}

/// `[y, dy/dx, ..., d^n y/dx^n]`, each element the derivative of the one
/// before it.
pub fn derivative_tower(graph: &mut Graph, y: NodeId, x: NodeId, n: usize) -> Result<Vec<NodeId>> {
    graph.check(y)?;
    graph.check(x)?;
    if graph.input_name(x).is_none() {
        return Err(Error::NotAnInput(x));
    }
    let mut tower = Vec::with_capacity(n + 1);
    tower.push(y);
    for _ in 0..n {
        let last = *tower.last().unwrap();
        tower.push(deriv(graph, last, x)?);
    }
    Ok(tower)
}

/// The first `terms` Taylor coefficients of `y` as a function of input `x`
/// around `center`.
///
/// All derivatives are compiled into one tape and evaluated once; the k-th
/// value is divided by a running factorial.
pub fn taylor(graph: &mut Graph, y: NodeId, x: NodeId, center: Value, terms: usize) -> Result<TaylorResult> {
    if terms == 0 {
        return Err(Error::NoTerms);
    }
    let center = center.convert(graph.domain())?;
    let tower = derivative_tower(graph, y, x, terms - 1)?;
    let outputs: Vec<(String, NodeId)> = tower
        .iter()
        .enumerate()
        .map(|(k, &id)| (format!("d{k}"), id))
        .collect();
    let tape = compile(graph, &outputs)?;
    let name = graph.input_name(x).expect("checked above").to_string();
    let mut bindings = Bindings::new();
    bindings.set(name, center.clone());
    let values = tape.evaluate(&bindings)?.into_values();

    let domain = graph.domain();
    let mut factorial = Value::one(domain);
    let mut coefficients = Vec::with_capacity(terms);
    for (k, d) in values.into_iter().enumerate() {
        coefficients.push(d.div(&factorial)?);
        factorial = factorial.mul(&Value::int(domain, k as i64 + 1))?;
    }
    Ok(TaylorResult {
        center,
        coefficients,
    })
}
