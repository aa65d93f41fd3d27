//! A synthetic English-fragment grammar, a seeded corpus sampler, and the
//! setup-versus-evaluation timing harness.

use std::ops::RangeInclusive;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::eval::compile;
use crate::graph::{EdgeCounts, Graph};
use crate::pcfg::grammar::Grammar;
use crate::pcfg::inside::{build_corpus, expected_counts};
use crate::pcfg::train::EmTrainer;

pub const ENGLISH_FRAGMENT: &str = "\
S -> NP VP : 0.7
S -> S CONJS : 0.1
S -> S PP : 0.1
S -> ADV S : 0.1
CONJS -> CC S : 1.0
NP -> DT NBAR : 0.3
NP -> DT NN : 0.1
NP -> NP PP : 0.25
NP -> NP CONJNP : 0.1
NP -> 'john' : 0.05
NP -> 'mary' : 0.05
NP -> 'she' : 0.05
NP -> NP NP : 0.05
NP -> 'fish' : 0.05
CONJNP -> CC NP : 1.0
NBAR -> JJ NN : 0.4
NBAR -> JJ NBAR : 0.2
NBAR -> NN NN : 0.2
NBAR -> NBAR PP : 0.2
VP -> VT NP : 0.35
VP -> VP PP : 0.25
VP -> VS SBAR : 0.1
VP -> VP ADV : 0.1
VP -> VP CONJVP : 0.05
VP -> 'slept' : 0.05
VP -> VP NP : 0.05
VP -> 'fish' : 0.05
CONJVP -> CC VP : 1.0
SBAR -> COMP S : 1.0
PP -> P NP : 1.0
DT -> 'the' : 0.5
DT -> 'a' : 0.3
DT -> 'that' : 0.2
NN -> 'dog' : 0.15
NN -> 'cat' : 0.1
NN -> 'park' : 0.15
NN -> 'telescope' : 0.1
NN -> 'man' : 0.1
NN -> 'saw' : 0.1
NN -> 'watch' : 0.1
NN -> 'fish' : 0.1
NN -> 'run' : 0.1
JJ -> 'big' : 0.4
JJ -> 'old' : 0.3
JJ -> 'red' : 0.3
VT -> 'saw' : 0.25
VT -> 'watch' : 0.2
VT -> 'liked' : 0.2
VT -> 'run' : 0.1
VT -> 'fish' : 0.15
VT -> 'found' : 0.1
VS -> 'said' : 0.5
VS -> 'thought' : 0.5
P -> 'with' : 0.4
P -> 'in' : 0.3
P -> 'on' : 0.2
P -> 'near' : 0.1
CC -> 'and' : 0.6
CC -> 'but' : 0.4
COMP -> 'that' : 1.0
ADV -> 'today' : 0.5
ADV -> 'often' : 0.5
";

/// Sentences in the benchmark corpus.
pub const BENCH_SENTENCES: usize = 30;
/// Token-count range of benchmark sentences.
pub const BENCH_LENGTHS: RangeInclusive<usize> = 10..=16;
pub const BENCH_SEED: u64 = 20170601;

pub fn english_fragment() -> Grammar {
    Grammar::parse(ENGLISH_FRAGMENT).expect("built-in grammar is valid")
}

/// `count` sentences whose lengths fall in `lengths`, drawn with a fixed seed.
pub fn sample_corpus(grammar: &Grammar, count: usize, lengths: RangeInclusive<usize>, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::with_capacity(count);
    while corpus.len() < count {
        if let Some(s) = grammar.sample(&mut rng, *lengths.end()) {
            if lengths.contains(&s.len()) {
                corpus.push(s);
            }
        }
    }
    corpus
}

pub fn benchmark_corpus() -> (Grammar, Vec<Vec<String>>) {
    let grammar = english_fragment();
    let corpus = sample_corpus(&grammar, BENCH_SENTENCES, BENCH_LENGTHS, BENCH_SEED);
    (grammar, corpus)
}

#[derive(Debug, Clone, Serialize)]
pub struct PcfgBench {
    pub sentences: usize,
    pub parameters: usize,
    /// Edges of the inside computation alone.
    pub inside_edges: EdgeCounts,
    pub graph_nodes: usize,
    pub tape_instructions: usize,
    pub setup_seconds: f64,
    pub eval_seconds: f64,
    pub rebuild_seconds: f64,
}

impl PcfgBench {
    /// How much faster a cached-tape evaluation is than rebuilding,
    /// differentiating, compiling and evaluating from scratch.
    pub fn speedup(&self) -> f64 {
        self.rebuild_seconds / self.eval_seconds
    }
}

/// Setup, evaluation and rebuild timings; each is the minimum over `repeats`
/// runs.
pub fn run_pcfg_bench(grammar: &Grammar, corpus: &[Vec<String>], repeats: usize) -> Result<PcfgBench> {
    let repeats = repeats.max(1);
    let mut inside = Graph::float();
    let cg = build_corpus(&mut inside, grammar, corpus)?;
    let roots: Vec<_> = cg.charts.iter().map(|c| c.root).collect();
    let inside_edges = inside.edge_counts(&roots)?;

    let mut setup = f64::INFINITY;
    let mut trainer = None;
    for _ in 0..repeats {
        let t = EmTrainer::new(grammar.clone(), corpus)?;
        setup = setup.min(t.setup_seconds());
        trainer = Some(t);
    }
    let trainer = trainer.expect("at least one repeat");
    let theta = grammar.theta();

    let mut eval = f64::INFINITY;
    for _ in 0..repeats {
        let start = Instant::now();
        std::hint::black_box(trainer.evaluate(&theta)?);
        eval = eval.min(start.elapsed().as_secs_f64());
    }

    let mut rebuild = f64::INFINITY;
    for _ in 0..repeats {
        let start = Instant::now();
        let mut g = Graph::float();
        let ll = build_corpus(&mut g, grammar, corpus)?.loglik;
        let counts = expected_counts(&mut g, grammar, ll)?;
        let mut outputs = vec![("loglik".to_string(), ll)];
        outputs.extend(counts.iter().enumerate().map(|(r, &c)| (format!("count{r}"), c)));
        let tape = compile(&g, &outputs)?;
        std::hint::black_box(tape.evaluate(&grammar.bindings())?);
        rebuild = rebuild.min(start.elapsed().as_secs_f64());
    }

    Ok(PcfgBench {
        sentences: corpus.len(),
        parameters: grammar.num_params(),
        inside_edges,
        graph_nodes: trainer.graph().len(),
        tape_instructions: trainer.tape().len(),
        setup_seconds: setup,
        eval_seconds: eval,
        rebuild_seconds: rebuild,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fragment_has_62_parameters() {
        assert_eq!(english_fragment().num_params(), 62);
    }

    #[test]
    fn corpus_is_deterministic() {
        let (g, a) = benchmark_corpus();
        let b = sample_corpus(&g, BENCH_SENTENCES, BENCH_LENGTHS, BENCH_SEED);
        assert_eq!(a, b);
        assert!(a.iter().all(|s| BENCH_LENGTHS.contains(&s.len())));
    }
}
