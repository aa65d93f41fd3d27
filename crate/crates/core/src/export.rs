//! DOT and JSON renderings of a graph.

use std::collections::HashMap;
use std::fmt::Write;

use serde_json::{json, Value as Json};

use crate::error::Result;
use crate::graph::{EdgeKind, Graph, NodeId, NodeKind};
use crate::value::Value;

/// Renders the part of the graph the roots depend on as Graphviz DOT.
///
/// Each hyperedge becomes a boldface operator node with arcs from its
/// operands and an arc to its output node. Value nodes are labelled from
/// `labels`, falling back to the input name, the constant, or `n<index>`.
pub fn to_dot(graph: &Graph, roots: &[NodeId], labels: &HashMap<NodeId, String>) -> Result<String> {
    let order = graph.topo_order(roots)?;
    let mut out = String::from("digraph G {\n");
    if !order.is_empty() {
        out.push_str("  rankdir=LR;\n  node [shape=plaintext];\n");
    }
    for &id in &order {
        let i = id.index();
        let label = labels.get(&id).cloned().unwrap_or_else(|| match graph.kind(id) {
            NodeKind::Input(name) => name.clone(),
            NodeKind::Const(v) => v.to_string(),
            NodeKind::Derived(_) => id.to_string(),
        });
        writeln!(out, "  n{i} [label=\"{}\"];", escape(&label)).unwrap();
        if let NodeKind::Derived(edge) = graph.kind(id) {
            writeln!(out, "  op{i} [label=<<b>{}</b>>];", edge.label()).unwrap();
            for operand in edge.operands() {
                writeln!(out, "  n{} -> op{i};", operand.index()).unwrap();
            }
            writeln!(out, "  op{i} -> n{i};").unwrap();
        }
    }
    out.push_str("}\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn value_json(v: &Value) -> Json {
    match v {
        Value::Float(x) if x.is_finite() => json!(x),
        _ => json!(v.to_string()),
    }
}

/// Every node of the graph in creation order as a JSON array.
///
/// Objects carry `id` and `kind` (`input`, `const` or `op`), plus `name` for
/// inputs, `value` for constants, and `op`, `args` (and `k` for `pow`) for
/// edges. Finite floats are JSON numbers; rationals and non-finite floats are
/// strings.
pub fn to_json(graph: &Graph) -> Json {
    let nodes = graph
        .node_ids()
        .map(|id| match graph.kind(id) {
            NodeKind::Input(name) => json!({"id": id.index(), "kind": "input", "name": name}),
            NodeKind::Const(v) => json!({"id": id.index(), "kind": "const", "value": value_json(v)}),
            NodeKind::Derived(edge) => {
                let args: Vec<usize> = edge.operands().map(NodeId::index).collect();
                match edge {
                    EdgeKind::Pow(k, _) => json!({
                        "id": id.index(), "kind": "op", "op": "pow", "k": k, "args": args
                    }),
                    _ => json!({"id": id.index(), "kind": "op", "op": edge.op_name(), "args": args}),
                }
            }
        })
        .collect();
    Json::Array(nodes)
}

/// An infix rendering of the expression rooted at `id`, with shared
/// subexpressions written out in full.
pub fn to_infix(graph: &Graph, id: NodeId) -> String {
    fn go(g: &Graph, id: NodeId, out: &mut String) {
        match g.kind(id) {
            NodeKind::Input(name) => out.push_str(name),
            NodeKind::Const(v) => {
                if v.to_f64() < 0.0 {
                    write!(out, "({v})").unwrap()
                } else {
                    write!(out, "{v}").unwrap()
                }
            }
            NodeKind::Derived(edge) => match *edge {
                EdgeKind::Add(a, b) => {
                    out.push('(');
                    go(g, a, out);
                    out.push_str(" + ");
                    go(g, b, out);
                    out.push(')');
                }
                EdgeKind::Mul(a, b) => {
                    out.push('(');
                    go(g, a, out);
                    out.push_str(" * ");
                    go(g, b, out);
                    out.push(')');
                }
                EdgeKind::Pow(k, a) => {
                    go(g, a, out);
                    if k < 0 {
                        write!(out, "^({k})").unwrap();
                    } else {
                        write!(out, "^{k}").unwrap();
                    }
                }
                EdgeKind::Exp(a) => {
                    out.push_str("exp(");
                    go(g, a, out);
                    out.push(')');
                }
                EdgeKind::Log(a) => {
                    out.push_str("log(");
                    go(g, a, out);
                    out.push(')');
                }
            },
        }
    }
    let mut s = String::new();
    go(graph, id, &mut s);
    s
}
