//! Seedable generators for random expression graphs and small grammars,
//! shared by the property tests, the acceptance suite and the benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::{deriv, forward_first_order};
use crate::error::Result;
use crate::eval::{compile, Bindings};
use crate::graph::{Graph, NodeId};
use crate::pcfg::{Grammar, Rhs, Rule};
use crate::value::{Domain, Value};

/// One operation of a [`RandomGraph`]; operands index earlier operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Input(usize),
    Const(f64),
    Add(usize, usize),
    Mul(usize, usize),
    Pow(i64, usize),
    Exp(usize),
    Log(usize),
}

impl Op {
    fn operands(&self) -> Vec<usize> {
        match *self {
            Op::Input(_) | Op::Const(_) => vec![],
            Op::Add(a, b) | Op::Mul(a, b) => vec![a, b],
            Op::Pow(_, a) | Op::Exp(a) | Op::Log(a) => vec![a],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphConfig {
    pub inputs: usize,
    /// Longest operand chain from any input or constant to the root.
    pub max_depth: usize,
    /// Operations attempted after the leaves.
    pub ops: usize,
    pub input_range: (f64, f64),
    pub exponents: Vec<i64>,
    pub constants: Vec<f64>,
    /// Whether `exp` and `log` may be drawn.
    pub transcendental: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            inputs: 3,
            max_depth: 8,
            ops: 16,
            input_range: (0.5, 2.0),
            exponents: vec![-3, -2, -1, 0, 1, 2, 3],
            constants: vec![0.0, 1.0, -1.0, 0.5, 2.0, 1.5],
            transcendental: true,
        }
    }
}

impl GraphConfig {
    /// Polynomial and reciprocal graphs only, small enough for exact
    /// rational evaluation to stay cheap.
    pub fn rational() -> Self {
        GraphConfig {
            max_depth: 5,
            ops: 10,
            exponents: vec![-2, -1, 0, 1, 2],
            transcendental: false,
            ..GraphConfig::default()
        }
    }
}

/// A random DAG of operations together with the point it was conditioned
/// on. Every intermediate value at `point` is finite and moderate, `log`
/// arguments are bounded away from zero and negative powers never see a
/// base near zero.
#[derive(Debug, Clone)]
pub struct RandomGraph {
    pub ops: Vec<Op>,
    pub point: Vec<f64>,
}

const VALUE_BOUND: f64 = 50.0;
const ARG_FLOOR: f64 = 0.05;
const EXP_CEILING: f64 = 3.0;

/// Input names used by [`RandomGraph`].
pub fn input_name(i: usize) -> String {
    format!("x{i}")
}

impl RandomGraph {
    pub fn generate<R: Rng + ?Sized>(rng: &mut R, config: &GraphConfig) -> RandomGraph {
        let (lo, hi) = config.input_range;
        // Inputs sit on a 1/256 grid so that rational evaluation stays small.
        let point: Vec<f64> = (0..config.inputs)
            .map(|_| (rng.gen_range(lo..=hi) * 256.0).round() / 256.0)
            .collect();
        RandomGraph::generate_at(rng, config, point)
    }

    /// Like [`RandomGraph::generate`] but conditioned on a given point, whose
    /// length overrides `config.inputs`.
    pub fn generate_at<R: Rng + ?Sized>(rng: &mut R, config: &GraphConfig, point: Vec<f64>) -> RandomGraph {
        let inputs = point.len();
        let mut ops: Vec<Op> = (0..inputs).map(Op::Input).collect();
        let mut values = point.clone();
        let mut depth = vec![0; inputs];
        let n_const = rng.gen_range(0..=2);
        for _ in 0..n_const {
            let c = *config.constants.choose(rng).unwrap();
            ops.push(Op::Const(c));
            values.push(c);
            depth.push(0);
        }

        let kinds = if config.transcendental { 5 } else { 3 };
        for _ in 0..config.ops {
            for _attempt in 0..20 {
                let pick = |rng: &mut R| -> usize {
                    // Favour recent nodes so chains get deep, but keep
                    // earlier ones reachable for sharing.
                    let n = values.len();
                    if rng.gen_bool(0.6) {
                        n - 1 - rng.gen_range(0..n.min(3))
                    } else {
                        rng.gen_range(0..n)
                    }
                };
                let op = match rng.gen_range(0..kinds) {
                    0 => Op::Add(pick(rng), pick(rng)),
                    1 => Op::Mul(pick(rng), pick(rng)),
                    2 => Op::Pow(*config.exponents.choose(rng).unwrap(), pick(rng)),
                    3 => Op::Exp(pick(rng)),
                    _ => Op::Log(pick(rng)),
                };
                let d = 1 + op.operands().iter().map(|&a| depth[a]).max().unwrap_or(0);
                if d > config.max_depth {
                    continue;
                }
                if let Some(v) = conditioned_value(&op, &values) {
                    ops.push(op);
                    values.push(v);
                    depth.push(d);
                    break;
                }
            }
        }
        // Sum every unused operation and input into the root so the whole
        // DAG, and every input, reaches it.
        let mut used = vec![false; ops.len()];
        for op in &ops {
            for a in op.operands() {
                used[a] = true;
            }
        }
        let mut root = ops.len() - 1;
        for i in (0..ops.len() - 1).rev() {
            let is_input = i < inputs;
            let dangling = is_input || (!used[i] && !matches!(ops[i], Op::Const(_)));
            if dangling && !reaches(&ops, root, i) {
                let v = values[root] + values[i];
                if !is_input && v.abs() > VALUE_BOUND {
                    continue;
                }
                ops.push(Op::Add(root, i));
                values.push(v);
                root = ops.len() - 1;
            }
        }
        RandomGraph { ops, point }
    }

    pub fn inputs(&self) -> usize {
        self.point.len()
    }

    pub fn root(&self) -> usize {
        self.ops.len() - 1
    }

    pub fn bindings(&self) -> Bindings {
        self.bindings_at(&self.point)
    }

    pub fn bindings_at(&self, point: &[f64]) -> Bindings {
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| (input_name(i), Value::Float(v)))
            .collect()
    }

    /// Exact rational bindings of the conditioning point.
    pub fn rational_bindings(&self) -> Result<Bindings> {
        self.point
            .iter()
            .enumerate()
            .map(|(i, &v)| Ok((input_name(i), Value::Float(v).convert(Domain::Rational)?)))
            .collect()
    }

    /// Adds the operations to `graph` through its simplifying constructors,
    /// returning the node each operation became.
    pub fn build(&self, graph: &mut Graph) -> Result<Vec<NodeId>> {
        let domain = graph.domain();
        let mut nodes: Vec<NodeId> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let id = match *op {
                Op::Input(i) => {
                    let name = input_name(i);
                    match graph.find_input(&name) {
                        Some(id) => id,
                        None => graph.input(&name)?,
                    }
                }
                Op::Const(c) => graph.constant(Value::Float(c).convert(domain)?)?,
                Op::Add(a, b) => graph.add(nodes[a], nodes[b])?,
                Op::Mul(a, b) => graph.mul(nodes[a], nodes[b])?,
                Op::Pow(k, a) => graph.pow(k, nodes[a])?,
                Op::Exp(a) => graph.exp(nodes[a])?,
                Op::Log(a) => graph.log(nodes[a])?,
            };
            nodes.push(id);
        }
        Ok(nodes)
    }

    /// Straightforward evaluation of every operation, with no rewriting.
    pub fn eval_naive(&self, point: &[Value]) -> Result<Vec<Value>> {
        let domain = point.first().map_or(Domain::Float, Value::domain);
        let mut out: Vec<Value> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Input(i) => point[i].clone(),
                Op::Const(c) => Value::Float(c).convert(domain)?,
                Op::Add(a, b) => out[a].add(&out[b])?,
                Op::Mul(a, b) => out[a].mul(&out[b])?,
                Op::Pow(k, a) => out[a].powi(k)?,
                Op::Exp(a) => out[a].exp()?,
                Op::Log(a) => out[a].ln()?,
            };
            out.push(v);
        }
        Ok(out)
    }

    /// Whether any operation of each of the five kinds occurs.
    pub fn kinds_used(&self) -> [bool; 5] {
        let mut used = [false; 5];
        for op in &self.ops {
            match op {
                Op::Add(..) => used[0] = true,
                Op::Mul(..) => used[1] = true,
                Op::Pow(..) => used[2] = true,
                Op::Exp(_) => used[3] = true,
                Op::Log(_) => used[4] = true,
                _ => {}
            }
        }
        used
    }
}

fn conditioned_value(op: &Op, values: &[f64]) -> Option<f64> {
    let v = match *op {
        Op::Add(a, b) => values[a] + values[b],
        Op::Mul(a, b) => values[a] * values[b],
        Op::Pow(k, a) => {
            if k < 0 && values[a].abs() < ARG_FLOOR {
                return None;
            }
            values[a].powi(k as i32)
        }
        Op::Exp(a) => {
            if values[a] > EXP_CEILING {
                return None;
            }
            values[a].exp()
        }
        Op::Log(a) => {
            if values[a] < ARG_FLOOR {
                return None;
            }
            values[a].ln()
        }
        Op::Input(_) | Op::Const(_) => unreachable!(),
    };
    (v.is_finite() && v.abs() <= VALUE_BOUND).then_some(v)
}

fn reaches(ops: &[Op], from: usize, target: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = vec![false; ops.len()];
    while let Some(i) = stack.pop() {
        if i == target {
            return true;
        }
        if !std::mem::replace(&mut seen[i], true) {
            stack.extend(ops[i].operands());
        }
    }
    false
}

/// `|a - b|` relative to the larger magnitude, with the scale floored at one
/// so values near zero are compared absolutely.
pub fn rel_error(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Worst-case disagreements found by [`check_gradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Reverse mode against central differences.
    pub fd_error: f64,
    /// Reverse mode against the forward analysis.
    pub mode_error: f64,
}

/// Differentiates the root with respect to every input and compares the
/// result with central differences of step `h` and with
/// [`forward_first_order`](crate::autodiff::forward_first_order).
pub fn check_gradient(rg: &RandomGraph, h: f64) -> Result<GradientCheck> {
    let mut g = Graph::float();
    let nodes = rg.build(&mut g)?;
    let root = nodes[rg.root()];
    let mut outputs = vec![("f".to_string(), root)];
    let mut wrt = Vec::new();
    for (i, &x) in nodes.iter().enumerate().take(rg.inputs()) {
        outputs.push((format!("d{i}"), deriv(&mut g, root, x)?));
        wrt.push(x);
    }
    let tape = compile(&g, &outputs)?;
    let b = rg.bindings();
    let values = tape.evaluate(&b)?;
    let mut check = GradientCheck {
        fd_error: 0.0,
        mode_error: 0.0,
    };
    for (i, &x) in wrt.iter().enumerate() {
        let reverse = values.value(&format!("d{i}"))?.to_f64();
        let fd = tape.finite_difference(&b, "f", &input_name(i), h)?.to_f64();
        let forward = forward_first_order(&g, root, x)?.evaluate(&b)?.to_f64();
        check.fd_error = check.fd_error.max(rel_error(reverse, fd));
        check.mode_error = check.mode_error.max(rel_error(reverse, forward));
    }
    Ok(check)
}

/// Builds derivatives of the root up to `order` along input sequences drawn
/// from `rng`, and returns the worst disagreement between each derivative
/// and a central difference of the one below it.
pub fn check_higher_order<R: Rng + ?Sized>(rng: &mut R, rg: &RandomGraph, order: usize, h: f64) -> Result<f64> {
    let mut g = Graph::float();
    let nodes = rg.build(&mut g)?;
    let mut chain = vec![nodes[rg.root()]];
    let mut wrt = Vec::new();
    for _ in 0..order {
        let i = rng.gen_range(0..rg.inputs());
        let next = deriv(&mut g, *chain.last().unwrap(), nodes[i])?;
        chain.push(next);
        wrt.push(i);
    }
    let outputs: Vec<(String, NodeId)> = chain.iter().enumerate().map(|(k, &n)| (format!("d{k}"), n)).collect();
    let tape = compile(&g, &outputs)?;
    let b = rg.bindings();
    let values = tape.evaluate(&b)?;
    let mut worst: f64 = 0.0;
    for (k, &i) in wrt.iter().enumerate() {
        let exact = values.value(&format!("d{}", k + 1))?.to_f64();
        let fd = tape.finite_difference(&b, &format!("d{k}"), &input_name(i), h)?.to_f64();
        worst = worst.max(rel_error(exact, fd));
    }
    Ok(worst)
}

/// A random CNF grammar over `terminals` with at most `max_nonterminals`
/// nonterminals and `max_rules` rules. Every nonterminal has a terminal rule,
/// so sampling always terminates, and at least one binary rule exists.
pub fn random_grammar<R: Rng + ?Sized>(
    rng: &mut R,
    max_nonterminals: usize,
    max_rules: usize,
    terminals: &[&str],
) -> Grammar {
    let n = rng.gen_range(1..=max_nonterminals.max(1));
    let target = rng.gen_range((n + 1).min(max_rules)..=max_rules.max(n + 1));
    let mut rhs: Vec<(usize, Rhs)> = (0..n)
        .map(|a| (a, Rhs::Terminal(terminals.choose(rng).unwrap().to_string())))
        .collect();
    // The start symbol always expands, otherwise every sentence has length one.
    rhs.push((0, Rhs::Binary(rng.gen_range(0..n), rng.gen_range(0..n))));
    let mut stalls = 0;
    while rhs.len() < target && stalls < 100 {
        let a = rng.gen_range(0..n);
        let candidate = if rng.gen_bool(0.65) {
            Rhs::Binary(rng.gen_range(0..n), rng.gen_range(0..n))
        } else {
            Rhs::Terminal(terminals.choose(rng).unwrap().to_string())
        };
        if rhs.iter().any(|(l, r)| *l == a && *r == candidate) {
            stalls += 1;
            continue;
        }
        rhs.push((a, candidate));
    }
    let weights: Vec<f64> = rhs.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
    let mut totals = vec![0.0; n];
    for ((a, _), w) in rhs.iter().zip(&weights) {
        totals[*a] += w;
    }
    let rules = rhs
        .into_iter()
        .zip(weights)
        .map(|((lhs, rhs), w)| Rule {
            lhs,
            rhs,
            prob: w / totals[lhs],
        })
        .collect();
    let names = (0..n).map(|a| if a == 0 { "S".to_string() } else { format!("N{a}") }).collect();
    Grammar::new(names, rules).expect("generated grammar is normalized")
}

/// `count` sentences of at most `max_len` tokens sampled from `grammar`, or
/// `None` if the grammar rarely produces sentences that short.
pub fn random_corpus<R: Rng + ?Sized>(
    rng: &mut R,
    grammar: &Grammar,
    count: usize,
    max_len: usize,
) -> Option<Vec<Vec<String>>> {
    let mut corpus = Vec::with_capacity(count);
    let mut attempts = 0;
    while corpus.len() < count {
        attempts += 1;
        if attempts > 200 * count {
            return None;
        }
        if let Some(s) = grammar.sample(rng, max_len) {
            corpus.push(s);
        }
    }
    Some(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_graphs_respect_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let config = GraphConfig::default();
        let mut kinds = [false; 5];
        for _ in 0..200 {
            let rg = RandomGraph::generate(&mut rng, &config);
            assert!(rg.point.iter().all(|&x| (0.5..=2.0).contains(&x)));
            let naive = rg.eval_naive(&rg.point.iter().map(|&x| Value::Float(x)).collect::<Vec<_>>()).unwrap();
            assert!(naive.iter().all(|v| v.to_f64().is_finite()));
            for i in 0..config.inputs {
                assert!(reaches(&rg.ops, rg.root(), i));
            }
            for (k, used) in rg.kinds_used().into_iter().enumerate() {
                kinds[k] |= used;
            }
        }
        assert_eq!(kinds, [true; 5]);
    }

    #[test]
    fn random_grammars_are_valid_and_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let g = random_grammar(&mut rng, 5, 12, &["a", "b", "c"]);
            assert!(g.nonterminals().len() <= 5);
            assert!(g.num_params() <= 12);
            assert!(g.rules().iter().any(|r| matches!(r.rhs, Rhs::Binary(..))));
        }
    }
}
