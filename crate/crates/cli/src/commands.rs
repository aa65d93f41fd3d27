use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use adgraph::export::{to_dot, to_infix, to_json};
use adgraph::pcfg::bench::{benchmark_corpus, run_pcfg_bench};
use adgraph::pcfg::{parse_corpus, train, Grammar, TrainOptions};
use adgraph::taylor::{derivative_tower, taylor};
use adgraph::{compile, deriv, Bindings, Domain, Graph, NodeId, Value};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::CliError;
use crate::expr::{parse_expr, parse_number};

#[derive(Debug, Parser)]
#[command(name = "adgraph", version, about = "Symbolic differentiation on hash-consed expression graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Differentiate an expression and print, export or evaluate the result.
    Diff(DiffArgs),
    /// Evaluate an expression.
    Eval(EvalArgs),
    /// Taylor coefficients of an expression around a point.
    Taylor(TaylorArgs),
    /// Fit PCFG rule probabilities to a corpus by EM.
    PcfgTrain(TrainArgs),
    /// Setup versus evaluation timings.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[arg(long)]
    pub expr: String,
    #[arg(long)]
    pub wrt: String,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Graphviz export of the expression and its derivative.
    #[arg(long, conflicts_with_all = ["json", "at"])]
    pub dot: bool,
    /// JSON export of the whole graph.
    #[arg(long, conflicts_with = "at")]
    pub json: bool,
    /// Evaluate the derivative with `name=value` bindings.
    #[arg(long, value_name = "NAME=VALUE")]
    pub at: Vec<String>,
    /// Use exact rational arithmetic.
    #[arg(long)]
    pub exact: bool,
    /// Write the output here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub expr: String,
    #[arg(long, value_name = "NAME=VALUE")]
    pub at: Vec<String>,
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct TaylorArgs {
    #[arg(long)]
    pub expr: String,
    #[arg(long)]
    pub var: String,
    #[arg(long, allow_hyphen_values = true)]
    pub center: String,
    #[arg(long)]
    pub terms: usize,
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub grammar: String,
    #[arg(long, value_name = "FILE")]
    pub corpus: String,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Taylor,
    Pcfg,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Runs per measurement; the fastest is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
}

/// Runs a parsed command line and returns what it prints.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Diff(a) => diff(&a),
        Command::Eval(a) => eval(&a),
        Command::Taylor(a) => taylor_cmd(&a),
        Command::PcfgTrain(a) => pcfg_train(&a),
        Command::Bench(a) => bench(&a),
    }
}

fn domain(exact: bool) -> Domain {
    if exact {
        Domain::Rational
    } else {
        Domain::Float
    }
}

fn parse_bindings(pairs: &[String], domain: Domain) -> Result<Bindings, CliError> {
    let mut b = Bindings::new();
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected NAME=VALUE, got '{pair}'")))?;
        let v = parse_number(value, domain)
            .ok_or_else(|| CliError::Usage(format!("'{value}' is not a {domain} number")))?;
        b.set(name.trim(), v);
    }
    Ok(b)
}

fn input_node(g: &mut Graph, name: &str) -> Result<NodeId, CliError> {
    Ok(match g.find_input(name) {
        Some(id) => id,
        None => g.input(name)?,
    })
}

fn emit(text: String, out: Option<&str>) -> Result<String, CliError> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|source| CliError::Io {
                path: path.to_string(),
                source,
            })?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn diff(a: &DiffArgs) -> Result<String, CliError> {
    let domain = domain(a.exact);
    let ast = parse_expr(&a.expr, domain)?;
    let mut g = Graph::new(domain);
    let f = ast.lower(&mut g)?;
    let x = input_node(&mut g, &a.wrt)?;
    let mut d = f;
    for _ in 0..a.order {
        d = deriv(&mut g, d, x)?;
    }
    let name = if a.order == 1 {
        format!("df/d{}", a.wrt)
    } else {
        format!("d{}f/d{}{}", a.order, a.wrt, a.order)
    };

    let text = if a.dot {
        let labels = HashMap::from([(f, "f".to_string()), (d, name)]);
        to_dot(&g, &[f, d], &labels)?
    } else if a.json {
        let doc = json!({
            "domain": domain,
            "expr": f.index(),
            "derivative": d.index(),
            "nodes": to_json(&g),
        });
        serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n"
    } else if !a.at.is_empty() {
        let b = parse_bindings(&a.at, domain)?;
        let out = compile(&g, &[("d", d)])?.evaluate(&b)?;
        format!("{}\n", out.value("d")?)
    } else {
        format!("{}\n", to_infix(&g, d))
    };
    emit(text, a.out.as_deref())
}

fn eval(a: &EvalArgs) -> Result<String, CliError> {
    let domain = domain(a.exact);
    let ast = parse_expr(&a.expr, domain)?;
    let mut g = Graph::new(domain);
    let f = ast.lower(&mut g)?;
    let b = parse_bindings(&a.at, domain)?;
    let out = compile(&g, &[("f", f)])?.evaluate(&b)?;
    Ok(format!("{}\n", out.value("f")?))
}

fn taylor_cmd(a: &TaylorArgs) -> Result<String, CliError> {
    let domain = domain(a.exact);
    let ast = parse_expr(&a.expr, domain)?;
    let mut g = Graph::new(domain);
    let y = ast.lower(&mut g)?;
    let x = input_node(&mut g, &a.var)?;
    let center = parse_number(&a.center, domain)
        .ok_or_else(|| CliError::Usage(format!("'{}' is not a {domain} number", a.center)))?;
    let series = taylor(&mut g, y, x, center, a.terms)?;
    let items: Vec<String> = series.coefficients.iter().map(Value::to_string).collect();
    Ok(format!("[{}]\n", items.join(", ")))
}

fn read(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_string(),
        source,
    })
}

fn pcfg_train(a: &TrainArgs) -> Result<String, CliError> {
    let grammar = Grammar::parse(&read(&a.grammar)?)?;
    let corpus = parse_corpus(&read(&a.corpus)?);
    let options = TrainOptions {
        max_iters: a.iters,
        tol: a.tol,
    };
    let report = train(grammar, &corpus, options)?;
    let text = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
    emit(text, a.out.as_deref())
}

fn bench(a: &BenchArgs) -> Result<String, CliError> {
    match a.suite {
        Suite::Taylor => bench_taylor(a.repeats),
        Suite::Pcfg => bench_pcfg(a.repeats),
    }
}

fn bench_taylor(repeats: usize) -> Result<String, CliError> {
    let mut out = String::new();
    writeln!(out, "1/(1+x) around 0").unwrap();
    writeln!(out, "{:>6} {:>8} {:>8} {:>12} {:>12}", "terms", "nodes", "tape", "setup_s", "eval_s").unwrap();
    for terms in [10, 20, 40, 80] {
        let mut setup = f64::INFINITY;
        let mut eval = f64::INFINITY;
        let mut sizes = (0, 0);
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            let mut g = Graph::float();
            let y = parse_expr("1/(1+x)", Domain::Float)?.lower(&mut g)?;
            let x = g.find_input("x").expect("expression mentions x");
            let tower = derivative_tower(&mut g, y, x, terms - 1)?;
            let outputs: Vec<(String, NodeId)> = tower.iter().enumerate().map(|(k, &n)| (format!("d{k}"), n)).collect();
            let tape = compile(&g, &outputs)?;
            setup = setup.min(start.elapsed().as_secs_f64());

            let b = Bindings::new().with("x", 0.0);
            let start = Instant::now();
            std::hint::black_box(tape.evaluate(&b)?);
            eval = eval.min(start.elapsed().as_secs_f64());
            sizes = (g.len(), tape.len());
        }
        writeln!(out, "{terms:>6} {:>8} {:>8} {setup:>12.6} {eval:>12.6}", sizes.0, sizes.1).unwrap();
    }
    Ok(out)
}

fn bench_pcfg(repeats: usize) -> Result<String, CliError> {
    let (grammar, corpus) = benchmark_corpus();
    let b = run_pcfg_bench(&grammar, &corpus, repeats)?;
    let mut out = String::new();
    let mut row = |k: &str, v: String| writeln!(out, "{k:<22} {v}").unwrap();
    row("sentences", b.sentences.to_string());
    row("parameters", b.parameters.to_string());
    row("inside mul edges", b.inside_edges.mul.to_string());
    row("inside add edges", b.inside_edges.add.to_string());
    row("graph nodes", b.graph_nodes.to_string());
    row("tape instructions", b.tape_instructions.to_string());
    row("setup_s", format!("{:.6}", b.setup_seconds));
    row("eval_s", format!("{:.6}", b.eval_seconds));
    row("rebuild_and_eval_s", format!("{:.6}", b.rebuild_seconds));
    row("speedup", format!("{:.1}x", b.speedup()));
    Ok(out)
}
