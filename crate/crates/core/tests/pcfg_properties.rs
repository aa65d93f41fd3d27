use std::collections::HashMap;

use adgraph::pcfg::{
    build_inside, corpus_loglik, em_step, expected_counts, oracle_expected_counts, oracle_inside, oracle_loglik,
    oracle_outside, train, EmTrainer, Grammar, TrainOptions,
};
use adgraph::random::{random_corpus, random_grammar, rel_error};
use adgraph::{backward, compile, Graph, NodeId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TERMINALS: [&str; 3] = ["a", "b", "c"];

/// A random grammar with at most 5 nonterminals and 12 rules, and `count`
/// sentences of at most 6 tokens drawn from it.
fn grammar_and_corpus(seed: u64, count: usize) -> (Grammar, Vec<Vec<String>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g = random_grammar(&mut rng, 5, 12, &TERMINALS);
        if let Some(corpus) = random_corpus(&mut rng, &g, count, 6) {
            return (g, corpus);
        }
    }
}

/// Same support, fresh probabilities.
fn reinitialize(g: &Grammar, rng: &mut ChaCha8Rng) -> Grammar {
    let mut theta: Vec<f64> = g.rules().iter().map(|_| rng.gen_range(0.1..1.0)).collect();
    let mut totals = vec![0.0; g.nonterminals().len()];
    for (r, rule) in g.rules().iter().enumerate() {
        totals[rule.lhs] += theta[r];
    }
    for (r, rule) in g.rules().iter().enumerate() {
        theta[r] /= totals[rule.lhs];
    }
    g.with_theta(&theta).unwrap()
}

fn lhs_sums(g: &Grammar) -> Vec<f64> {
    let mut sums = vec![0.0; g.nonterminals().len()];
    for rule in g.rules() {
        sums[rule.lhs] += rule.prob;
    }
    sums
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cell_adjoints_are_outside_probabilities(seed in any::<u64>()) {
        let (grammar, corpus) = grammar_and_corpus(seed, 1);
        let sentence = &corpus[0];
        let mut g = Graph::float();
        let chart = build_inside(&mut g, &grammar, sentence).unwrap();
        let adjoints = backward(&mut g, chart.root).unwrap();
        let outside = oracle_outside(&grammar, sentence).unwrap();
        let inside = oracle_inside(&grammar, sentence).unwrap();

        // Identical subphrases share one node, whose adjoint collects the
        // outside mass of every cell it stands for.
        let mut expected: HashMap<NodeId, f64> = HashMap::new();
        for (cell, node) in chart.cells() {
            *expected.entry(node).or_default() += outside[&cell];
        }
        let nodes: Vec<NodeId> = expected.keys().copied().collect();
        let outputs: Vec<(String, NodeId)> = nodes
            .iter()
            .flat_map(|&n| [(format!("adj{}", n.index()), adjoints.get(n)), (format!("in{}", n.index()), n)])
            .collect();
        let values = compile(&g, &outputs).unwrap().evaluate(&grammar.bindings()).unwrap();
        for (cell, node) in chart.cells() {
            let v = values.value(&format!("in{}", node.index())).unwrap().to_f64();
            prop_assert!(rel_error(v, inside[&cell]) < 1e-12);
        }
        for n in nodes {
            let adj = values.value(&format!("adj{}", n.index())).unwrap().to_f64();
            prop_assert!(rel_error(adj, expected[&n]) < 1e-9, "{adj} vs {}", expected[&n]);
        }
    }

    #[test]
    fn expected_counts_match_enumeration(seed in any::<u64>()) {
        let (grammar, corpus) = grammar_and_corpus(seed, 3);
        let mut g = Graph::float();
        let ll = corpus_loglik(&mut g, &grammar, &corpus).unwrap();
        let counts = expected_counts(&mut g, &grammar, ll).unwrap();
        let mut outputs = vec![("ll".to_string(), ll)];
        outputs.extend(counts.iter().enumerate().map(|(r, &c)| (format!("c{r}"), c)));
        let values = compile(&g, &outputs).unwrap().evaluate(&grammar.bindings()).unwrap().into_values();
        let oracle = oracle_expected_counts(&grammar, &corpus).unwrap();
        prop_assert!(rel_error(values[0].to_f64(), oracle_loglik(&grammar, &corpus).unwrap()) < 1e-9);
        for (got, want) in values[1..].iter().zip(&oracle) {
            prop_assert!(rel_error(got.to_f64(), *want) < 1e-9, "{got} vs {want}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn em_climbs_and_stays_on_the_simplex(seed in any::<u64>()) {
        let (truth, corpus) = grammar_and_corpus(seed, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let mut grammar = reinitialize(&truth, &mut rng);
        let trainer = EmTrainer::new(grammar.clone(), &corpus).unwrap();
        let mut previous = f64::NEG_INFINITY;
        for _ in 0..50 {
            let (ll, counts) = trainer.evaluate(&grammar.theta()).unwrap();
            prop_assert!(ll >= previous - 1e-9, "{ll} after {previous}");
            previous = ll;
            // A nonterminal the corpus never needs has no mass to renormalize.
            prop_assume!(counts.iter().zip(grammar.rules()).fold(vec![0.0; grammar.nonterminals().len()], |mut s, (c, r)| {
                s[r.lhs] += c;
                s
            }).iter().all(|&s| s > 0.0));
            grammar = em_step(&grammar, &counts).unwrap();
            for sum in lhs_sums(&grammar) {
                prop_assert!((sum - 1.0).abs() < 1e-12, "{sum}");
            }
        }
        prop_assert_eq!(trainer.tape_compiles(), 1);
    }
}

#[test]
fn em_matches_brute_force_em() {
    let grammar = Grammar::parse(
        "S -> S S : 0.2\nS -> A B : 0.3\nS -> 'a' : 0.5\nA -> 'a' : 0.6\nA -> 'b' : 0.4\nB -> 'b' : 0.7\nB -> 'a' : 0.3\n",
    )
    .unwrap();
    let corpus: Vec<Vec<String>> = [
        "a", "a b", "a a", "b b", "a b a", "a a a", "b a a", "a b b a", "a a b b a", "b b a a b a",
    ]
    .iter()
    .map(|s| s.split_whitespace().map(str::to_string).collect())
    .collect();

    let mut oracle = grammar.clone();
    for _ in 0..50 {
        let counts = oracle_expected_counts(&oracle, &corpus).unwrap();
        oracle = em_step(&oracle, &counts).unwrap();
    }
    let report = train(
        grammar,
        &corpus,
        TrainOptions {
            max_iters: 50,
            tol: 0.0,
        },
    )
    .unwrap();
    assert_eq!(report.iterations, 50);
    assert_eq!(report.tape_compiles, 1);
    for (got, want) in report.final_theta.iter().zip(oracle.theta()) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}
