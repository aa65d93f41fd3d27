use std::collections::BTreeMap;

use crate::autodiff::backward;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::pcfg::grammar::{param_name, Grammar, Rhs};

/// Symbolic inside probabilities of one sentence.
///
/// `cell(i, j, a)` is the graph node for the probability that nonterminal
/// `a` derives tokens `i..j`. Cells that are identically zero are absent.
#[derive(Debug, Clone)]
pub struct InsideChart {
    pub sentence: Vec<String>,
    cells: BTreeMap<(usize, usize, usize), NodeId>,
    pub root: NodeId,
}

impl InsideChart {
    pub fn cell(&self, i: usize, j: usize, nt: usize) -> Option<NodeId> {
        self.cells.get(&(i, j, nt)).copied()
    }

    /// Non-zero cells as `((i, j, nonterminal), node)`, ordered by span.
    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize, usize), NodeId)> + '_ {
        self.cells.iter().map(|(&k, &v)| (k, v))
    }

    pub fn is_parseable(&self) -> bool {
        !self.cells.is_empty() && self.cell(0, self.sentence.len(), 0).is_some()
    }
}

/// The input node for each rule's probability, created on first use.
pub fn parameter_inputs(graph: &mut Graph, grammar: &Grammar) -> Result<Vec<NodeId>> {
    (0..grammar.num_params())
        .map(|r| {
            let name = param_name(r);
            match graph.find_input(&name) {
                Some(id) => Ok(id),
                None => graph.input(&name),
            }
        })
        .collect()
}

/// Builds the CKY inside recursion for `sentence` with rule probabilities as
/// graph inputs:
///
/// ```text
/// inside(i, i+1, A) = sum over A -> w_i of theta
/// inside(i, j, A)   = sum over A -> B C, i < k < j of theta * inside(i, k, B) * inside(k, j, C)
/// ```
pub fn build_inside<S: AsRef<str>>(graph: &mut Graph, grammar: &Grammar, sentence: &[S]) -> Result<InsideChart> {
    let n = sentence.len();
    if n == 0 {
        return Err(Error::EmptySentence);
    }
    let theta = parameter_inputs(graph, grammar)?;
    let lexicon = grammar.lexicon();
    let by_lhs = grammar.rules_by_lhs();
    let nts = grammar.nonterminals().len();
    let zero = graph.zero();
    let mut cells = BTreeMap::new();

    for (i, tok) in sentence.iter().enumerate() {
        let tok = tok.as_ref();
        let rules = lexicon
            .get(tok)
            .ok_or_else(|| Error::UnknownToken(tok.to_string()))?;
        let mut sums = vec![zero; nts];
        for &r in rules {
            let a = grammar.rules()[r].lhs;
            sums[a] = graph.add(sums[a], theta[r])?;
        }
        for (a, s) in sums.into_iter().enumerate() {
            if s != zero {
                cells.insert((i, i + 1, a), s);
            }
        }
    }

    for width in 2..=n {
        for i in 0..=n - width {
            let j = i + width;
            for (a, rules) in by_lhs.iter().enumerate() {
                let mut acc = zero;
                for &r in rules {
                    let Rhs::Binary(b, c) = grammar.rules()[r].rhs else {
                        continue;
                    };
                    for k in i + 1..j {
                        let (Some(left), Some(right)) = (cells.get(&(i, k, b)), cells.get(&(k, j, c))) else {
                            continue;
                        };
                        let (left, right) = (*left, *right);
                        let t = graph.mul(theta[r], left)?;
                        let t = graph.mul(t, right)?;
                        acc = graph.add(acc, t)?;
                    }
                }
                if acc != zero {
                    cells.insert((i, j, a), acc);
                }
            }
        }
    }

    let root = cells.get(&(0, n, grammar.start())).copied().unwrap_or(zero);
    Ok(InsideChart {
        sentence: sentence.iter().map(|s| s.as_ref().to_string()).collect(),
        cells,
        root,
    })
}

/// Charts of a whole corpus and its log-likelihood node.
#[derive(Debug, Clone)]
pub struct CorpusGraph {
    pub charts: Vec<InsideChart>,
    pub loglik: NodeId,
}

/// Builds every sentence's chart and `sum_s log(inside_s)`.
pub fn build_corpus<S: AsRef<str>>(graph: &mut Graph, grammar: &Grammar, corpus: &[Vec<S>]) -> Result<CorpusGraph> {
    let mut loglik = graph.zero();
    let mut charts = Vec::with_capacity(corpus.len());
    for (index, sentence) in corpus.iter().enumerate() {
        let chart = build_inside(graph, grammar, sentence)?;
        if !chart.is_parseable() {
            return Err(Error::UnparseableSentence(index));
        }
        let log_root = graph.log(chart.root)?;
        loglik = graph.add(loglik, log_root)?;
        charts.push(chart);
    }
    Ok(CorpusGraph { charts, loglik })
}

/// The corpus log-likelihood `sum_s log(inside_s)` as a graph node.
pub fn corpus_loglik<S: AsRef<str>>(graph: &mut Graph, grammar: &Grammar, corpus: &[Vec<S>]) -> Result<NodeId> {
    Ok(build_corpus(graph, grammar, corpus)?.loglik)
}

/// Expected rule counts `theta_r * d(loglik)/d(theta_r)`, one node per rule.
///
/// This equals the derivative with respect to `log theta_r`, which is the
/// EM sufficient statistic for rule `r`.
pub fn expected_counts(graph: &mut Graph, grammar: &Grammar, loglik: NodeId) -> Result<Vec<NodeId>> {
    let theta = parameter_inputs(graph, grammar)?;
    let adjoints = backward(graph, loglik)?;
    theta
        .into_iter()
        .map(|t| graph.mul(t, adjoints.get(t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::compile;
    use crate::value::Value;

    fn eval(g: &Graph, grammar: &Grammar, node: NodeId) -> f64 {
        let t = compile(g, &[("v", node)]).unwrap();
        t.evaluate(&grammar.bindings()).unwrap().value("v").unwrap().to_f64()
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn ambiguous() -> Grammar {
        Grammar::parse("S -> S S : 0.5\nS -> 'a' : 0.5\n").unwrap()
    }

    #[test]
    fn single_parse() {
        let grammar = Grammar::parse("S -> A B : 1.0\nA -> 'a' : 1.0\nB -> 'b' : 1.0\n").unwrap();
        let mut g = Graph::float();
        let chart = build_inside(&mut g, &grammar, &words("a b")).unwrap();
        assert_eq!(eval(&g, &grammar, chart.root), 1.0);
    }

    #[test]
    fn two_bracketings() {
        let grammar = ambiguous();
        let mut g = Graph::float();
        let chart = build_inside(&mut g, &grammar, &words("a a a")).unwrap();
        assert_eq!(eval(&g, &grammar, chart.root), 0.0625);
    }

    #[test]
    fn unparseable_root_is_zero() {
        let grammar = Grammar::parse("S -> A B : 1.0\nA -> 'a' : 1.0\nB -> 'b' : 1.0\n").unwrap();
        let mut g = Graph::float();
        let chart = build_inside(&mut g, &grammar, &words("b a")).unwrap();
        assert_eq!(g.const_value(chart.root), Some(&Value::Float(0.0)));
        assert!(!chart.is_parseable());
        assert_eq!(
            corpus_loglik(&mut g, &grammar, &[words("a b"), words("b a")]),
            Err(Error::UnparseableSentence(1))
        );
    }

    #[test]
    fn unknown_token_and_empty_sentence() {
        let grammar = ambiguous();
        let mut g = Graph::float();
        assert_eq!(
            build_inside(&mut g, &grammar, &words("a z")).unwrap_err(),
            Error::UnknownToken("z".into())
        );
        assert_eq!(
            build_inside::<String>(&mut g, &grammar, &[]).unwrap_err(),
            Error::EmptySentence
        );
    }

    #[test]
    fn loglik_is_additive() {
        let grammar = ambiguous();
        let mut g = Graph::float();
        let one = corpus_loglik(&mut g, &grammar, &[words("a a a")]).unwrap();
        let two = corpus_loglik(&mut g, &grammar, &[words("a a a"), words("a a a")]).unwrap();
        let v1 = eval(&g, &grammar, one);
        assert!((v1 - 0.0625f64.ln()).abs() < 1e-15);
        assert_eq!(eval(&g, &grammar, two), 2.0 * v1);
    }

    #[test]
    fn counts_for_single_parse() {
        // S -> A A uses A -> 'a' twice.
        let grammar = Grammar::parse("S -> A A : 1.0\nA -> 'a' : 1.0\n").unwrap();
        let mut g = Graph::float();
        let ll = corpus_loglik(&mut g, &grammar, &[words("a a")]).unwrap();
        let counts = expected_counts(&mut g, &grammar, ll).unwrap();
        assert_eq!(eval(&g, &grammar, counts[0]), 1.0);
        assert_eq!(eval(&g, &grammar, counts[1]), 2.0);
    }

    #[test]
    fn unusable_rule_has_zero_count() {
        let grammar = Grammar::parse("S -> A B : 0.5\nS -> 'a' : 0.5\nA -> 'a' : 1.0\nB -> 'b' : 1.0\n").unwrap();
        let mut g = Graph::float();
        let ll = corpus_loglik(&mut g, &grammar, &[words("a")]).unwrap();
        let counts = expected_counts(&mut g, &grammar, ll).unwrap();
        assert!(g.const_value(counts[0]).unwrap().is_zero());
        assert!(g.const_value(counts[3]).unwrap().is_zero());
        assert_eq!(eval(&g, &grammar, counts[1]), 1.0);
    }

    #[test]
    fn ambiguous_counts() {
        let grammar = ambiguous();
        let mut g = Graph::float();
        let ll = corpus_loglik(&mut g, &grammar, &[words("a a a")]).unwrap();
        let counts = expected_counts(&mut g, &grammar, ll).unwrap();
        assert!((eval(&g, &grammar, counts[0]) - 2.0).abs() < 1e-12);
        assert!((eval(&g, &grammar, counts[1]) - 3.0).abs() < 1e-12);
    }
}
