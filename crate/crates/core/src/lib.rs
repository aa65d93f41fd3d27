//! Reverse-mode automatic differentiation over a hash-consed computation
//! hypergraph.
//!
//! A [`Graph`] holds scalar inputs, constants and the outputs of five kinds of
//! hyperedge: `add`, `mul`, integer `pow`, `exp` and `log`. Edge constructors
//! simplify locally and deduplicate structurally. [`autodiff::backward`]
//! emits derivatives as new graph nodes, so they can be differentiated again,
//! and [`eval::compile`] lowers any set of nodes to a reusable [`Tape`].
//!
//! ```
//! use adgraph::{autodiff::deriv, eval::compile, Bindings, Graph};
//!
//! let mut g = Graph::float();
//! let x = g.input("x")?;
//! let two = g.constant(2.0)?;
//! let y = g.mul(two, x)?;
//! let z = g.log(x)?;
//! let l = g.add(y, z)?;
//! let dx = deriv(&mut g, l, x)?;
//!
//! let tape = compile(&g, &[("L", l), ("DX", dx)])?;
//! let out = tape.evaluate(&Bindings::new().with("x", 2.0))?;
//! assert_eq!(out.value("DX")?.to_f64(), 2.5);
//! # Ok::<(), adgraph::Error>(())
//! ```

pub mod autodiff;
pub mod error;
pub mod eval;
pub mod export;
pub mod graph;
pub mod pcfg;
pub mod random;
pub mod taylor;
pub mod value;

pub use autodiff::{backward, deriv, forward_first_order, AdjointMap, FirstOrderPlan};
pub use error::{Error, Result};
pub use eval::{compile, Bindings, Outputs, Tape};
pub use graph::{EdgeKind, Graph, NodeId, NodeKind};
pub use value::{Domain, Value};
