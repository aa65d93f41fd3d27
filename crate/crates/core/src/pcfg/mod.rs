//! Inside-outside estimation for probabilistic context-free grammars in
//! Chomsky normal form.
//!
//! The inside recursion is built symbolically over graph inputs that stand
//! for the rule probabilities. Differentiating the corpus log-likelihood then
//! yields outside probabilities and, scaled by each parameter, the expected
//! rule counts that drive EM. No outside recursion is written by hand except
//! in [`oracle`], which checks the result.

pub mod bench;
pub mod grammar;
pub mod inside;
pub mod oracle;
pub mod train;

pub use grammar::{em_step, param_name, parse_corpus, Grammar, Rhs, Rule};
pub use inside::{
    build_corpus, build_inside, corpus_loglik, expected_counts, parameter_inputs, CorpusGraph, InsideChart,
};
pub use oracle::{oracle_enumerate, oracle_expected_counts, oracle_inside, oracle_loglik, oracle_outside, ParseTree};
pub use train::{train, EmTrainer, TrainOptions, TrainReport};
