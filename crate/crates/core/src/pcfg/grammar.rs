use std::collections::HashMap;
use std::fmt::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::Bindings;

/// Tolerance for per-LHS probability sums.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rhs {
    /// Two nonterminals, by index.
    Binary(usize, usize),
    Terminal(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub lhs: usize,
    pub rhs: Rhs,
    pub prob: f64,
}

/// A probabilistic context-free grammar in Chomsky normal form.
///
/// Rule `r` owns parameter `r`; the start symbol is nonterminal 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    nonterminals: Vec<String>,
    rules: Vec<Rule>,
}

/// Name of the graph input that carries the probability of rule `r`.
pub fn param_name(r: usize) -> String {
    format!("theta{r}")
}

impl Grammar {
    /// Validates and builds a grammar. Every rule probability must lie in
    /// `(0, 1]` and each nonterminal's rules must sum to one.
    pub fn new(nonterminals: Vec<String>, rules: Vec<Rule>) -> Result<Grammar> {
        for rule in &rules {
            if !(rule.prob > 0.0 && rule.prob <= 1.0) {
                return Err(Error::InvalidProbability {
                    line: 0,
                    prob: rule.prob,
                });
            }
        }
        Grammar::with_support(nonterminals, rules)
    }

    /// Like [`Grammar::new`] but admits zero-probability rules, which EM
    /// produces for rules with no expected usage.
    fn with_support(nonterminals: Vec<String>, rules: Vec<Rule>) -> Result<Grammar> {
        if rules.is_empty() {
            return Err(Error::EmptyGrammar);
        }
        let g = Grammar {
            nonterminals,
            rules,
        };
        let sums = g.lhs_sums(|r| g.rules[r].prob);
        for (a, sum) in sums.into_iter().enumerate() {
            if sum == 0.0 && !g.rules.iter().any(|r| r.lhs == a) {
                return Err(Error::UndefinedNonterminal(g.nonterminals[a].clone()));
            }
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::NotNormalized {
                    lhs: g.nonterminals[a].clone(),
                    sum,
                });
            }
        }
        Ok(g)
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn symbol(&self, nt: usize) -> &str {
        &self.nonterminals[nt]
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn num_params(&self) -> usize {
        self.rules.len()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.rules.iter().map(|r| r.prob).collect()
    }

    /// Current probabilities bound to the parameter inputs.
    pub fn bindings(&self) -> Bindings {
        self.rules
            .iter()
            .enumerate()
            .map(|(r, rule)| (param_name(r), rule.prob))
            .collect()
    }

    /// A copy with new rule probabilities, validated like [`Grammar::new`]
    /// except that zero is allowed.
    pub fn with_theta(&self, theta: &[f64]) -> Result<Grammar> {
        if theta.len() != self.rules.len() {
            return Err(Error::CountLengthMismatch {
                expected: self.rules.len(),
                found: theta.len(),
            });
        }
        let rules = self
            .rules
            .iter()
            .zip(theta)
            .map(|(r, &p)| Rule { prob: p, ..r.clone() })
            .collect();
        Grammar::with_support(self.nonterminals.clone(), rules)
    }

    fn lhs_sums(&self, value: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut sums = vec![0.0; self.nonterminals.len()];
        for (r, rule) in self.rules.iter().enumerate() {
            sums[rule.lhs] += value(r);
        }
        sums
    }

    /// Rule indices grouped by left-hand side, in rule order.
    pub fn rules_by_lhs(&self) -> Vec<Vec<usize>> {
        let mut by = vec![Vec::new(); self.nonterminals.len()];
        for (r, rule) in self.rules.iter().enumerate() {
            by[rule.lhs].push(r);
        }
        by
    }

    /// Terminal rules indexed by word.
    pub fn lexicon(&self) -> HashMap<&str, Vec<usize>> {
        let mut lex: HashMap<&str, Vec<usize>> = HashMap::new();
        for (r, rule) in self.rules.iter().enumerate() {
            if let Rhs::Terminal(w) = &rule.rhs {
                lex.entry(w.as_str()).or_default().push(r);
            }
        }
        lex
    }

    /// Parses the line-oriented grammar format:
    ///
    /// ```text
    /// # comment
    /// S -> NP VP : 1.0
    /// NP -> 'john' : 0.5
    /// ```
    ///
    /// The first rule's left-hand side is the start symbol.
    pub fn parse(text: &str) -> Result<Grammar> {
        let mut nonterminals: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut pending: Vec<(usize, String, Vec<String>, bool, f64)> = Vec::new();

        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: &str| Error::SyntaxError {
                line: line_no,
                message: message.to_string(),
            };
            let (lhs, rest) = line.split_once("->").ok_or_else(|| syntax("expected `->`"))?;
            let (rhs, prob) = rest.rsplit_once(':').ok_or_else(|| syntax("expected `: probability`"))?;
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) || lhs.contains('\'') {
                return Err(syntax("left-hand side must be one nonterminal"));
            }
            let prob: f64 = prob
                .trim()
                .parse()
                .map_err(|_| syntax("probability is not a number"))?;
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(Error::InvalidProbability { line: line_no, prob });
            }
            let symbols = tokenize_rhs(rhs).map_err(|m| syntax(&m))?;
            let terminal = match symbols.as_slice() {
                [(w, true)] => {
                    if w.is_empty() {
                        return Err(syntax("empty terminal"));
                    }
                    true
                }
                [(_, false), (_, false)] => false,
                _ => {
                    return Err(Error::NotCnf {
                        line: line_no,
                        rule: line.to_string(),
                    })
                }
            };
            let lhs_id = *index.entry(lhs.to_string()).or_insert_with(|| {
                nonterminals.push(lhs.to_string());
                nonterminals.len() - 1
            });
            let names = symbols.into_iter().map(|(s, _)| s).collect();
            pending.push((lhs_id, line.to_string(), names, terminal, prob));
        }

        let mut rules = Vec::with_capacity(pending.len());
        for (lhs, _, names, terminal, prob) in pending {
            let rhs = if terminal {
                Rhs::Terminal(names[0].clone())
            } else {
                let id = |s: &String| {
                    index
                        .get(s)
                        .copied()
                        .ok_or_else(|| Error::UndefinedNonterminal(s.clone()))
                };
                Rhs::Binary(id(&names[0])?, id(&names[1])?)
            };
            rules.push(Rule { lhs, rhs, prob });
        }
        Grammar::new(nonterminals, rules)
    }

    /// Renders the grammar in the format [`Grammar::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            let lhs = &self.nonterminals[rule.lhs];
            match &rule.rhs {
                Rhs::Binary(b, c) => writeln!(
                    out,
                    "{lhs} -> {} {} : {:?}",
                    self.nonterminals[*b], self.nonterminals[*c], rule.prob
                ),
                Rhs::Terminal(w) => writeln!(out, "{lhs} -> '{w}' : {:?}", rule.prob),
            }
            .unwrap();
        }
        out
    }

    /// Draws one sentence top-down. Returns `None` if the yield would exceed
    /// `max_len` tokens.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize) -> Option<Vec<String>> {
        let by_lhs = self.rules_by_lhs();
        let mut out = Vec::new();
        let mut stack = vec![self.start()];
        while let Some(a) = stack.pop() {
            if out.len() + stack.len() + 1 > max_len {
                return None;
            }
            let u: f64 = rng.gen();
            let choices = &by_lhs[a];
            let mut acc = 0.0;
            let mut chosen = *choices.last().unwrap();
            for &r in choices {
                acc += self.rules[r].prob;
                if u < acc {
                    chosen = r;
                    break;
                }
            }
            match &self.rules[chosen].rhs {
                Rhs::Terminal(w) => out.push(w.clone()),
                Rhs::Binary(b, c) => {
                    stack.push(*c);
                    stack.push(*b);
                }
            }
        }
        Some(out)
    }
}

/// A corpus file: one whitespace-tokenized sentence per line. Blank lines
/// are skipped.
pub fn parse_corpus(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|line| line.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

/// The M-step: each rule's new probability is its expected count divided by
/// the total count of rules sharing its left-hand side.
pub fn em_step(grammar: &Grammar, counts: &[f64]) -> Result<Grammar> {
    if counts.len() != grammar.num_params() {
        return Err(Error::CountLengthMismatch {
            expected: grammar.num_params(),
            found: counts.len(),
        });
    }
    let sums = grammar.lhs_sums(|r| counts[r]);
    for (a, &sum) in sums.iter().enumerate() {
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::ZeroLhsMass(grammar.symbol(a).to_string()));
        }
    }
    let theta: Vec<f64> = grammar
        .rules
        .iter()
        .zip(counts)
        .map(|(rule, &c)| c / sums[rule.lhs])
        .collect();
    grammar.with_theta(&theta)
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '\'' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Splits a right-hand side into `(symbol, is_terminal)` pairs.
fn tokenize_rhs(rhs: &str) -> std::result::Result<Vec<(String, bool)>, String> {
    let mut out = Vec::new();
    let mut chars = rhs.trim().chars().peekable();
    while let Some(&ch) = chars.peek() {
        if ch.is_whitespace() {
            chars.next();
        } else if ch == '\'' {
            chars.next();
            let mut word = String::new();
            loop {
                match chars.next() {
                    Some('\'') => break,
                    Some(c) => word.push(c),
                    None => return Err("unterminated quote".into()),
                }
            }
            out.push((word, true));
        } else {
            let mut sym = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || c == '\'' {
                    break;
                }
                sym.push(c);
                chars.next();
            }
            out.push((sym, false));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn corpus_lines() {
        assert_eq!(
            parse_corpus("a  b\n\n   \nc\n"),
            vec![vec!["a".to_string(), "b".to_string()], vec!["c".to_string()]]
        );
    }

    #[test]
    fn smallest_grammar() {
        let g = Grammar::parse("S -> A B : 1.0\nA -> 'a' : 1.0\nB -> 'b' : 1.0\n").unwrap();
        assert_eq!(g.num_params(), 3);
        assert_eq!(g.nonterminals(), &["S", "A", "B"]);
        assert_eq!(g.rules()[0].rhs, Rhs::Binary(1, 2));
        assert_eq!(g.rules()[1].rhs, Rhs::Terminal("a".into()));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# toy\n\nS -> S S : 0.5  # recursion\nS -> 'a#b' : 0.5\n";
        let g = Grammar::parse(text).unwrap();
        assert_eq!(g.rules()[1].rhs, Rhs::Terminal("a#b".into()));
    }

    #[test]
    fn not_normalized() {
        let err = Grammar::parse("S -> 'a' : 0.5\nS -> 'b' : 0.4\n").unwrap_err();
        assert!(matches!(err, Error::NotNormalized { ref lhs, sum } if lhs == "S" && (sum - 0.9).abs() < 1e-12));
    }

    #[test]
    fn not_cnf() {
        let text = "S -> A B C : 1.0\nA -> 'a' : 1.0\nB -> 'b' : 1.0\nC -> 'c' : 1.0\n";
        assert!(matches!(Grammar::parse(text), Err(Error::NotCnf { line: 1, .. })));
        assert!(matches!(Grammar::parse("S -> A : 1.0\nA -> 'a' : 1.0"), Err(Error::NotCnf { .. })));
        assert!(matches!(
            Grammar::parse("S -> A 'a' : 1.0\nA -> 'a' : 1.0"),
            Err(Error::NotCnf { .. })
        ));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(Grammar::parse("S 'a' : 1.0"), Err(Error::SyntaxError { line: 1, .. })));
        assert!(matches!(Grammar::parse("S -> 'a'"), Err(Error::SyntaxError { line: 1, .. })));
        assert!(matches!(
            Grammar::parse("S -> 'a' : 1.0\nS -> 'b' : x"),
            Err(Error::SyntaxError { line: 2, .. })
        ));
        assert!(matches!(
            Grammar::parse("S -> 'a' : 1.5"),
            Err(Error::InvalidProbability { line: 1, .. })
        ));
        assert!(matches!(Grammar::parse("S -> A B : 1.0\nA -> 'a' : 1.0"), Err(Error::UndefinedNonterminal(b)) if b == "B"));
        assert_eq!(Grammar::parse("# nothing\n"), Err(Error::EmptyGrammar));
    }

    #[test]
    fn text_round_trip() {
        let g = Grammar::parse("S -> S S : 0.25\nS -> 'a' : 0.75\n").unwrap();
        assert_eq!(Grammar::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn em_step_cases() {
        let g = Grammar::parse("S -> S S : 0.3\nS -> 'a' : 0.7\n").unwrap();
        assert_eq!(em_step(&g, &[2.0, 2.0]).unwrap().theta(), vec![0.5, 0.5]);
        assert_eq!(em_step(&g, &[3.0, 1.0]).unwrap().theta(), vec![0.75, 0.25]);
        assert_eq!(em_step(&g, &[0.0, 0.0]), Err(Error::ZeroLhsMass("S".into())));
        assert!(matches!(em_step(&g, &[1.0]), Err(Error::CountLengthMismatch { .. })));
        // A rule with no expected usage drops to zero probability.
        assert_eq!(em_step(&g, &[0.0, 3.0]).unwrap().theta(), vec![0.0, 1.0]);
    }

    #[test]
    fn sampling_respects_length_limit() {
        let g = Grammar::parse("S -> S S : 0.4\nS -> 'a' : 0.6\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = 0;
        for _ in 0..200 {
            if let Some(s) = g.sample(&mut rng, 5) {
                assert!(!s.is_empty() && s.len() <= 5);
                seen += 1;
            }
        }
        assert!(seen > 50);
    }
}
