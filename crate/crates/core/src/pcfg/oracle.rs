//! Direct numeric inside/outside recursions and exhaustive parse enumeration.
//!
//! These never touch a [`Graph`](crate::Graph); they exist to check the
//! differentiation-based quantities against the classical algorithms.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::pcfg::grammar::{Grammar, Rhs};

/// Longest sentence [`oracle_enumerate`] accepts.
pub const ENUMERATION_LIMIT: usize = 8;

/// Dense table indexed by `(i, j, nonterminal)`.
pub type SpanTable = HashMap<(usize, usize, usize), f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseTree {
    Leaf { rule: usize, word: String },
    Node { rule: usize, left: Box<ParseTree>, right: Box<ParseTree> },
}

impl ParseTree {
    pub fn rule(&self) -> usize {
        match self {
            ParseTree::Leaf { rule, .. } | ParseTree::Node { rule, .. } => *rule,
        }
    }

    /// How many times each rule is used.
    pub fn rule_counts(&self, num_rules: usize) -> Vec<usize> {
        fn go(t: &ParseTree, counts: &mut [usize]) {
            counts[t.rule()] += 1;
            if let ParseTree::Node { left, right, .. } = t {
                go(left, counts);
                go(right, counts);
            }
        }
        let mut counts = vec![0; num_rules];
        go(self, &mut counts);
        counts
    }

    pub fn probability(&self, grammar: &Grammar) -> f64 {
        match self {
            ParseTree::Leaf { rule, .. } => grammar.rules()[*rule].prob,
            ParseTree::Node { rule, left, right } => {
                grammar.rules()[*rule].prob * left.probability(grammar) * right.probability(grammar)
            }
        }
    }

    pub fn to_bracketed(&self, grammar: &Grammar) -> String {
        let lhs = grammar.symbol(grammar.rules()[self.rule()].lhs);
        match self {
            ParseTree::Leaf { word, .. } => format!("({lhs} {word})"),
            ParseTree::Node { left, right, .. } => {
                format!("({lhs} {} {})", left.to_bracketed(grammar), right.to_bracketed(grammar))
            }
        }
    }
}

fn tokens_known<S: AsRef<str>>(grammar: &Grammar, sentence: &[S]) -> Result<()> {
    if sentence.is_empty() {
        return Err(Error::EmptySentence);
    }
    let lex = grammar.lexicon();
    for t in sentence {
        if !lex.contains_key(t.as_ref()) {
            return Err(Error::UnknownToken(t.as_ref().to_string()));
        }
    }
    Ok(())
}

/// Numeric CKY inside probabilities for every span and nonterminal.
pub fn oracle_inside<S: AsRef<str>>(grammar: &Grammar, sentence: &[S]) -> Result<SpanTable> {
    tokens_known(grammar, sentence)?;
    let n = sentence.len();
    let nts = grammar.nonterminals().len();
    let mut inside = SpanTable::new();
    for i in 0..n {
        for j in i + 1..=n {
            for a in 0..nts {
                inside.insert((i, j, a), 0.0);
            }
        }
    }
    for (i, tok) in sentence.iter().enumerate() {
        for rule in grammar.rules() {
            if let Rhs::Terminal(w) = &rule.rhs {
                if w == tok.as_ref() {
                    *inside.get_mut(&(i, i + 1, rule.lhs)).unwrap() += rule.prob;
                }
            }
        }
    }
    for width in 2..=n {
        for i in 0..=n - width {
            let j = i + width;
            for rule in grammar.rules() {
                if let Rhs::Binary(b, c) = rule.rhs {
                    let mut s = 0.0;
                    for k in i + 1..j {
                        s += inside[&(i, k, b)] * inside[&(k, j, c)];
                    }
                    *inside.get_mut(&(i, j, rule.lhs)).unwrap() += rule.prob * s;
                }
            }
        }
    }
    Ok(inside)
}

/// Classical outside probabilities: the start symbol over the whole sentence
/// has outside probability one, and each binary rule pushes
/// `theta * outside(parent) * inside(sibling)` down to each child.
pub fn oracle_outside<S: AsRef<str>>(grammar: &Grammar, sentence: &[S]) -> Result<SpanTable> {
    let inside = oracle_inside(grammar, sentence)?;
    let n = sentence.len();
    let mut outside: SpanTable = inside.keys().map(|&k| (k, 0.0)).collect();
    outside.insert((0, n, grammar.start()), 1.0);
    for width in (2..=n).rev() {
        for i in 0..=n - width {
            let j = i + width;
            for rule in grammar.rules() {
                let Rhs::Binary(b, c) = rule.rhs else { continue };
                let parent = outside[&(i, j, rule.lhs)];
                if parent == 0.0 {
                    continue;
                }
                for k in i + 1..j {
                    let to_left = rule.prob * parent * inside[&(k, j, c)];
                    let to_right = rule.prob * parent * inside[&(i, k, b)];
                    *outside.get_mut(&(i, k, b)).unwrap() += to_left;
                    *outside.get_mut(&(k, j, c)).unwrap() += to_right;
                }
            }
        }
    }
    Ok(outside)
}

/// Every parse tree of `sentence` with its probability.
pub fn oracle_enumerate<S: AsRef<str>>(grammar: &Grammar, sentence: &[S]) -> Result<Vec<(ParseTree, f64)>> {
    if sentence.len() > ENUMERATION_LIMIT {
        return Err(Error::SentenceTooLong {
            len: sentence.len(),
            limit: ENUMERATION_LIMIT,
        });
    }
    tokens_known(grammar, sentence)?;
    let words: Vec<&str> = sentence.iter().map(AsRef::as_ref).collect();
    let mut memo: HashMap<(usize, usize, usize), Vec<ParseTree>> = HashMap::new();
    let trees = enumerate(grammar, &words, 0, words.len(), grammar.start(), &mut memo);
    Ok(trees
        .into_iter()
        .map(|t| {
            let p = t.probability(grammar);
            (t, p)
        })
        .collect())
}

fn enumerate(
    grammar: &Grammar,
    words: &[&str],
    i: usize,
    j: usize,
    a: usize,
    memo: &mut HashMap<(usize, usize, usize), Vec<ParseTree>>,
) -> Vec<ParseTree> {
    if let Some(t) = memo.get(&(i, j, a)) {
        return t.clone();
    }
    let mut out = Vec::new();
    for (r, rule) in grammar.rules().iter().enumerate() {
        if rule.lhs != a {
            continue;
        }
        match &rule.rhs {
            Rhs::Terminal(w) => {
                if j == i + 1 && w == words[i] {
                    out.push(ParseTree::Leaf { rule: r, word: w.clone() });
                }
            }
            Rhs::Binary(b, c) => {
                for k in i + 1..j {
                    let lefts = enumerate(grammar, words, i, k, *b, memo);
                    if lefts.is_empty() {
                        continue;
                    }
                    let rights = enumerate(grammar, words, k, j, *c, memo);
                    for l in &lefts {
                        for rt in &rights {
                            out.push(ParseTree::Node {
                                rule: r,
                                left: Box::new(l.clone()),
                                right: Box::new(rt.clone()),
                            });
                        }
                    }
                }
            }
        }
    }
    memo.insert((i, j, a), out.clone());
    out
}

/// Expected rule counts over a corpus by explicit enumeration: each parse's
/// rule counts weighted by its posterior probability.
pub fn oracle_expected_counts<S: AsRef<str>>(grammar: &Grammar, corpus: &[Vec<S>]) -> Result<Vec<f64>> {
    let mut counts = vec![0.0; grammar.num_params()];
    for (index, sentence) in corpus.iter().enumerate() {
        let parses = oracle_enumerate(grammar, sentence)?;
        let total: f64 = parses.iter().map(|(_, p)| p).sum();
        if total == 0.0 {
            return Err(Error::UnparseableSentence(index));
        }
        for (tree, p) in &parses {
            for (r, c) in tree.rule_counts(grammar.num_params()).into_iter().enumerate() {
                counts[r] += c as f64 * p / total;
            }
        }
    }
    Ok(counts)
}

/// Corpus log-likelihood by enumeration.
pub fn oracle_loglik<S: AsRef<str>>(grammar: &Grammar, corpus: &[Vec<S>]) -> Result<f64> {
    let mut ll = 0.0;
    for sentence in corpus {
        let total: f64 = oracle_enumerate(grammar, sentence)?.iter().map(|(_, p)| p).sum();
        ll += total.ln();
    }
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn two_trees_for_three_leaves() {
        let g = Grammar::parse("S -> S S : 0.5\nS -> 'a' : 0.5\n").unwrap();
        let trees = oracle_enumerate(&g, &words("a a a")).unwrap();
        assert_eq!(trees.len(), 2);
        for (t, p) in &trees {
            assert_eq!(*p, 0.5f64.powi(5));
            assert_eq!(t.rule_counts(2), vec![2, 3]);
        }
        let total: f64 = trees.iter().map(|(_, p)| p).sum();
        let inside = oracle_inside(&g, &words("a a a")).unwrap();
        assert_eq!(total, inside[&(0, 3, 0)]);
        assert_eq!(
            trees[0].0.to_bracketed(&g),
            "(S (S a) (S (S a) (S a)))"
        );
    }

    #[test]
    fn outside_base_case() {
        let g = Grammar::parse("S -> S S : 0.5\nS -> 'a' : 0.5\n").unwrap();
        let out = oracle_outside(&g, &words("a a a a")).unwrap();
        assert_eq!(out[&(0, 4, 0)], 1.0);
    }

    #[test]
    fn inside_outside_identity() {
        // For every span width-1 position, sum_A inside * outside over
        // terminal rules reproduces the sentence probability.
        let g = Grammar::parse(
            "S -> A B : 0.7\nS -> B A : 0.3\nA -> A B : 0.2\nA -> 'a' : 0.8\nB -> 'b' : 0.6\nB -> 'a' : 0.4\n",
        )
        .unwrap();
        let s = words("a b a b");
        let inside = oracle_inside(&g, &s).unwrap();
        let outside = oracle_outside(&g, &s).unwrap();
        let z = inside[&(0, 4, 0)];
        for i in 0..4 {
            let sum: f64 = (0..3).map(|a| inside[&(i, i + 1, a)] * outside[&(i, i + 1, a)]).sum();
            assert!((sum - z).abs() < 1e-15, "{sum} vs {z}");
        }
    }

    #[test]
    fn limits() {
        let g = Grammar::parse("S -> S S : 0.5\nS -> 'a' : 0.5\n").unwrap();
        let long = vec!["a"; 9];
        assert_eq!(
            oracle_enumerate(&g, &long).unwrap_err(),
            Error::SentenceTooLong { len: 9, limit: 8 }
        );
        assert_eq!(oracle_inside(&g, &words("b")).unwrap_err(), Error::UnknownToken("b".into()));
    }
}
