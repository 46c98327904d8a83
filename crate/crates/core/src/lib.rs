//! Completion of strings with holes under a context-free grammar.
//!
//! Given a grammar and a porous string (tokens plus `_` holes), this crate
//! builds a packed forest of every derivation of every completion, counts
//! those derivations exactly, decodes any index into its derivation, and
//! samples derivations with replacement (recursive pair selection) or without
//! replacement (a full-cycle index permutation fed through the decoder).
//!
//! ```
//! use bcfl::{build_forest, count, root_forest, CnfGrammar, PorousString};
//!
//! let g = CnfGrammar::parse("S -> S S | ( S ) | ( )").unwrap();
//! let s = PorousString::parse(&g, "_ _ _ _").unwrap();
//! let root = root_forest(&build_forest(&g, &s), &g).unwrap();
//! assert_eq!(count(&root).to_string(), "2");
//! ```

pub mod cli;
pub mod enumeration;
pub mod error;
pub mod forest;
pub mod grammar;
pub mod oracle;
pub mod porous;
pub mod recognizer;
pub mod sampling;

pub use enumeration::{count, phi, prefix_sums, select_pair, DerivationTree, TreeCount};
pub use error::{Error, Result};
pub use forest::{build_chart, build_forest, leaf_forest, oplus, otimes, root_forest, ForestMap, ForestNode};
pub use grammar::{parse_grammar, to_cnf, CnfGrammar, Grammar, GrammarError, NtId, TermId};
pub use porous::{PorousString, Token};
pub use recognizer::{recognize, recognize_matrix, set_product};
