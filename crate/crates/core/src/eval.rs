//! Lowering a graph to a reusable instruction tape.
//!
//! Compiling does not touch the graph, so a graph can be compiled, then
//! differentiated further, then compiled again. A [`Tape`] is immutable and
//! every [`Tape::evaluate`] call owns its own slot storage, so one tape can be
//! evaluated from many threads at once.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, Graph, NodeId, NodeKind};
use crate::value::{float_ln, float_powi, Domain, Value};

/// One tape instruction. The destination slot is the instruction's position.
#[derive(Debug, Clone, PartialEq)]
pub enum Instr {
    /// Reads input number `i` of [`Tape::required_inputs`].
    LoadInput(usize),
    LoadConst(Value),
    Add(usize, usize),
    Mul(usize, usize),
    Pow(i64, usize),
    Exp(usize),
    Log(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    domain: Domain,
    instrs: Vec<Instr>,
    outputs: Vec<(String, usize)>,
    inputs: Vec<String>,
    slots: HashMap<NodeId, usize>,
}

/// Input values by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, Value>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: impl Into<Value>) -> &mut Self {
        self.0.insert(name.into(), value.into());
        self
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.set(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }
}

impl<S: Into<String>, V: Into<Value>> FromIterator<(S, V)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (S, V)>>(iter: I) -> Self {
        Bindings(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

/// Labelled results of one evaluation, in the tape's output order.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs(Vec<(String, Value)>);

impl Outputs {
    pub fn get(&self, label: &str) -> Option<&Value> {
        self.0.iter().find(|(l, _)| l == label).map(|(_, v)| v)
    }

    pub fn value(&self, label: &str) -> Result<&Value> {
        self.get(label).ok_or_else(|| Error::UnknownOutput(label.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.0.iter().map(|(l, v)| (l.as_str(), v))
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        self.0.iter().map(|(_, v)| v)
    }

    pub fn into_values(self) -> Vec<Value> {
        self.0.into_iter().map(|(_, v)| v).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Compiles the nodes the outputs depend on, in topological order.
pub fn compile<S: AsRef<str>>(graph: &Graph, outputs: &[(S, NodeId)]) -> Result<Tape> {
    let roots: Vec<NodeId> = outputs.iter().map(|(_, id)| *id).collect();
    let order = graph.topo_order(&roots)?;

    let mut inputs: Vec<String> = order
        .iter()
        .filter_map(|&id| graph.input_name(id).map(str::to_string))
        .collect();
    inputs.sort();
    let input_index: HashMap<&str, usize> =
        inputs.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let mut slots = HashMap::with_capacity(order.len());
    let mut instrs = Vec::with_capacity(order.len());
    for &id in &order {
        let instr = match graph.kind(id) {
            NodeKind::Input(name) => Instr::LoadInput(input_index[name.as_str()]),
            NodeKind::Const(v) => Instr::LoadConst(v.clone()),
            NodeKind::Derived(edge) => match *edge {
                EdgeKind::Add(a, b) => Instr::Add(slots[&a], slots[&b]),
                EdgeKind::Mul(a, b) => Instr::Mul(slots[&a], slots[&b]),
                EdgeKind::Pow(k, a) => Instr::Pow(k, slots[&a]),
                EdgeKind::Exp(a) => Instr::Exp(slots[&a]),
                EdgeKind::Log(a) => Instr::Log(slots[&a]),
            },
        };
        slots.insert(id, instrs.len());
        instrs.push(instr);
    }
    let outputs = outputs
        .iter()
        .map(|(label, id)| (label.as_ref().to_string(), slots[id]))
        .collect();
    Ok(Tape {
        domain: graph.domain(),
        instrs,
        outputs,
        inputs,
        slots,
    })
}

trait Scalar: Sized + Clone {
    fn add(&self, o: &Self) -> Result<Self>;
    fn mul(&self, o: &Self) -> Result<Self>;
    fn powi(&self, k: i64) -> Result<Self>;
    fn exp(&self) -> Result<Self>;
    fn ln(&self) -> Result<Self>;
}

impl Scalar for f64 {
    fn add(&self, o: &Self) -> Result<Self> {
        Ok(self + o)
    }
    fn mul(&self, o: &Self) -> Result<Self> {
        Ok(self * o)
    }
    fn powi(&self, k: i64) -> Result<Self> {
        float_powi(*self, k)
    }
    fn exp(&self) -> Result<Self> {
        Ok(f64::exp(*self))
    }
    fn ln(&self) -> Result<Self> {
        float_ln(*self)
    }
}

impl Scalar for Value {
    fn add(&self, o: &Self) -> Result<Self> {
        Value::add(self, o)
    }
    fn mul(&self, o: &Self) -> Result<Self> {
        Value::mul(self, o)
    }
    fn powi(&self, k: i64) -> Result<Self> {
        Value::powi(self, k)
    }
    fn exp(&self) -> Result<Self> {
        Value::exp(self)
    }
    fn ln(&self) -> Result<Self> {
        Value::ln(self)
    }
}

impl Tape {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn instructions(&self) -> &[Instr] {
        &self.instrs
    }

    /// Output labels and their slots.
    pub fn outputs(&self) -> &[(String, usize)] {
        &self.outputs
    }

    /// Names of the inputs the outputs depend on, sorted.
    pub fn required_inputs(&self) -> &[String] {
        &self.inputs
    }

    pub(crate) fn slot_of(&self, id: NodeId) -> Option<usize> {
        self.slots.get(&id).copied()
    }

    fn resolve_inputs(&self, bindings: &Bindings) -> Result<Vec<Value>> {
        self.inputs
            .iter()
            .map(|name| {
                let v = bindings
                    .get(name)
                    .ok_or_else(|| Error::MissingInput(name.clone()))?;
                if v.domain() != self.domain {
                    return Err(Error::DomainMismatch {
                        expected: self.domain,
                        found: v.domain(),
                    });
                }
                Ok(v.clone())
            })
            .collect()
    }

    fn run<T: Scalar>(&self, inputs: &[T], konst: impl Fn(&Value) -> T) -> Result<Vec<T>> {
        let mut slots: Vec<T> = Vec::with_capacity(self.instrs.len());
        for instr in &self.instrs {
            let v = match instr {
                Instr::LoadInput(i) => inputs[*i].clone(),
                Instr::LoadConst(c) => konst(c),
                Instr::Add(a, b) => slots[*a].add(&slots[*b])?,
                Instr::Mul(a, b) => slots[*a].mul(&slots[*b])?,
                Instr::Pow(k, a) => slots[*a].powi(*k)?,
                Instr::Exp(a) => slots[*a].exp()?,
                Instr::Log(a) => slots[*a].ln()?,
            };
            slots.push(v);
        }
        Ok(slots)
    }

    /// Values of every slot.
    pub(crate) fn eval_slots(&self, bindings: &Bindings) -> Result<Vec<Value>> {
        let inputs = self.resolve_inputs(bindings)?;
        match self.domain {
            Domain::Float => {
                let xs: Vec<f64> = inputs.iter().map(Value::to_f64).collect();
                let slots = self.run(&xs, Value::to_f64)?;
                Ok(slots.into_iter().map(Value::Float).collect())
            }
            Domain::Rational => self.run(&inputs, Value::clone),
        }
    }

    pub fn evaluate(&self, bindings: &Bindings) -> Result<Outputs> {
        let inputs = self.resolve_inputs(bindings)?;
        let values: Vec<(String, Value)> = match self.domain {
            Domain::Float => {
                let xs: Vec<f64> = inputs.iter().map(Value::to_f64).collect();
                let slots = self.run(&xs, Value::to_f64)?;
                self.outputs
                    .iter()
                    .map(|(l, s)| (l.clone(), Value::Float(slots[*s])))
                    .collect()
            }
            Domain::Rational => {
                let slots = self.run(&inputs, Value::clone)?;
                self.outputs
                    .iter()
                    .map(|(l, s)| (l.clone(), slots[*s].clone()))
                    .collect()
            }
        };
        Ok(Outputs(values))
    }

    /// Float-domain evaluation straight to `f64`, in output order.
    pub fn evaluate_f64(&self, inputs: &HashMap<&str, f64>) -> Result<Vec<f64>> {
        if self.domain != Domain::Float {
            return Err(Error::FloatDomainRequired);
        }
        let xs: Vec<f64> = self
            .inputs
            .iter()
            .map(|n| {
                inputs
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::MissingInput(n.clone()))
            })
            .collect::<Result<_>>()?;
        let slots = self.run(&xs, Value::to_f64)?;
        Ok(self.outputs.iter().map(|(_, s)| slots[*s]).collect())
    }

    /// Central difference `(f(x+h) - f(x-h)) / 2h` of output `label` with
    /// respect to input `input`.
    pub fn finite_difference(&self, bindings: &Bindings, label: &str, input: &str, h: f64) -> Result<Value> {
        if self.domain != Domain::Float {
            return Err(Error::FloatDomainRequired);
        }
        let x = bindings
            .get(input)
            .ok_or_else(|| Error::MissingInput(input.to_string()))?
            .to_f64();
        let at = |xv: f64| -> Result<f64> {
            let b = bindings.clone().with(input, xv);
            Ok(self.evaluate(&b)?.value(label)?.to_f64())
        };
        let hi = at(x + h)?;
        let lo = at(x - h)?;
        Ok(Value::Float((hi - lo) / (2.0 * h)))
    }
}
