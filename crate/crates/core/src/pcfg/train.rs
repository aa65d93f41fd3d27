use std::collections::HashMap;
use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::eval::{compile, Tape};
use crate::graph::{Graph, NodeId};
use crate::pcfg::grammar::{em_step, param_name, Grammar};
use crate::pcfg::inside::{build_corpus, expected_counts};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub max_iters: usize,
    /// Stop once the log-likelihood changes by less than this between
    /// iterations, or no parameter moves by this much.
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_iters: 100,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
    /// Corpus log-likelihood at the parameters each iteration started from.
    pub log_likelihood: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub graph_nodes: usize,
    pub tape_instructions: usize,
    pub tape_compiles: usize,
    pub setup_seconds: f64,
    pub eval_seconds_per_iteration: f64,
}

/// EM for a fixed corpus, split into a one-off setup phase (build the inside
/// graph, differentiate it, compile one tape) and cheap per-iteration
/// evaluations of that tape.
#[derive(Debug)]
pub struct EmTrainer {
    grammar: Grammar,
    graph: Graph,
    tape: Tape,
    loglik: NodeId,
    counts: Vec<NodeId>,
    tape_compiles: usize,
    setup_seconds: f64,
}

impl EmTrainer {
    pub fn new<S: AsRef<str>>(grammar: Grammar, corpus: &[Vec<S>]) -> Result<EmTrainer> {
        let start = Instant::now();
        let mut graph = Graph::float();
        let loglik = build_corpus(&mut graph, &grammar, corpus)?.loglik;
        let counts = expected_counts(&mut graph, &grammar, loglik)?;
        let mut outputs = vec![("loglik".to_string(), loglik)];
        outputs.extend(counts.iter().enumerate().map(|(r, &c)| (format!("count{r}"), c)));
        let tape = compile(&graph, &outputs)?;
        Ok(EmTrainer {
            grammar,
            graph,
            tape,
            loglik,
            counts,
            tape_compiles: 1,
            setup_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn loglik_node(&self) -> NodeId {
        self.loglik
    }

    pub fn count_nodes(&self) -> &[NodeId] {
        &self.counts
    }

    pub fn tape_compiles(&self) -> usize {
        self.tape_compiles
    }

    pub fn setup_seconds(&self) -> f64 {
        self.setup_seconds
    }

    /// Log-likelihood and expected rule counts at `theta`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let names: Vec<String> = (0..theta.len()).map(param_name).collect();
        let inputs: HashMap<&str, f64> = names.iter().map(String::as_str).zip(theta.iter().copied()).collect();
        let mut values = self.tape.evaluate_f64(&inputs)?;
        let counts = values.split_off(1);
        Ok((values[0], counts))
    }

    /// Runs EM from the trainer's current grammar, which is replaced by the
    /// final estimate.
    pub fn run(&mut self, options: TrainOptions) -> Result<TrainReport> {
        let mut trace: Vec<f64> = Vec::new();
        let mut eval_seconds = 0.0;
        let mut converged = false;
        for _ in 0..options.max_iters {
            let start = Instant::now();
            let (ll, counts) = self.evaluate(&self.grammar.theta())?;
            eval_seconds += start.elapsed().as_secs_f64();
            let previous = trace.last().copied();
            trace.push(ll);
            if previous.is_some_and(|p| (ll - p).abs() < options.tol) {
                converged = true;
                break;
            }
            let next = em_step(&self.grammar, &counts)?;
            let moved = self
                .grammar
                .theta()
                .iter()
                .zip(next.theta())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            self.grammar = next;
            if moved < options.tol {
                converged = true;
                break;
            }
        }
        let iterations = trace.len();
        Ok(TrainReport {
            iterations,
            converged,
            log_likelihood: trace,
            final_theta: self.grammar.theta(),
            graph_nodes: self.graph.len(),
            tape_instructions: self.tape.len(),
            tape_compiles: self.tape_compiles,
            setup_seconds: self.setup_seconds,
            eval_seconds_per_iteration: if iterations > 0 {
                eval_seconds / iterations as f64
            } else {
                0.0
            },
        })
    }
}

/// Fits the grammar's probabilities to the corpus by EM.
pub fn train<S: AsRef<str>>(grammar: Grammar, corpus: &[Vec<S>], options: TrainOptions) -> Result<TrainReport> {
    EmTrainer::new(grammar, corpus)?.run(options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn fixed_point_stops_after_one_iteration() {
        let grammar = Grammar::parse("S -> A B : 1.0\nA -> 'a' : 1.0\nB -> 'b' : 1.0\n").unwrap();
        let report = train(grammar, &[words("a b")], TrainOptions::default()).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
        assert_eq!(report.log_likelihood, vec![0.0]);
        assert_eq!(report.tape_compiles, 1);
    }

    #[test]
    fn loglik_increases_toward_even_split() {
        let grammar = Grammar::parse("S -> S S : 0.3\nS -> 'a' : 0.7\n").unwrap();
        let corpus = vec![words("a a a"), words("a"), words("a a"), words("a a a a")];
        let options = TrainOptions {
            max_iters: 60,
            tol: 0.0,
        };
        let report = train(grammar, &corpus, options).unwrap();
        assert_eq!(report.iterations, 60);
        for w in report.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{w:?}");
        }
        // 10 tokens need 6 binary and 10 lexical rules in total: 6/16.
        assert!((report.final_theta[0] - 0.375).abs() < 1e-9, "{:?}", report.final_theta);
    }

    #[test]
    fn graph_is_untouched_by_iterations() {
        let grammar = Grammar::parse("S -> S S : 0.3\nS -> 'a' : 0.7\n").unwrap();
        let corpus = vec![words("a a a")];
        let mut trainer = EmTrainer::new(grammar, &corpus).unwrap();
        let nodes = trainer.graph().len();
        let tape = trainer.tape().clone();
        trainer
            .run(TrainOptions {
                max_iters: 20,
                tol: 0.0,
            })
            .unwrap();
        assert_eq!(trainer.graph().len(), nodes);
        assert_eq!(trainer.tape(), &tape);
        assert_eq!(trainer.tape_compiles(), 1);
    }

    #[test]
    fn report_serializes() {
        let grammar = Grammar::parse("S -> A B : 1.0\nA -> 'a' : 1.0\nB -> 'b' : 1.0\n").unwrap();
        let report = train(grammar, &[words("a b")], TrainOptions::default()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["iterations"], 1);
        assert_eq!(json["final_theta"], serde_json::json!([1.0, 1.0, 1.0]));
    }
}
