//! Exact counting and unranking of the derivations packed in a forest node.
//!
//! A leaf counts as one tree. An internal node with child pairs
//! `(l_0, r_0), (l_1, r_1), ...` has `Σ |l_j|·|r_j|` trees, and index `i` is
//! decoded by locating the pair whose block of the prefix sums contains `i`,
//! then splitting the residual into a left and a right index by quotient and
//! remainder against `|r_j|`. Counts and prefix sums are memoized on the nodes
//! themselves (write-once, so concurrent readers are fine).

use std::fmt::{self, Write as _};
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::forest::{ForestNode, ForestSymbol};
use crate::grammar::{CnfGrammar, NtId, TermId};

pub type TreeCount = BigUint;

/// Number of derivation trees in `node`.
pub fn count(node: &ForestNode) -> &TreeCount {
    if let Some(c) = node.count.get() {
        return c;
    }
    let c = if node.is_leaf() {
        BigUint::one()
    } else {
        node.children()
            .iter()
            .map(|p| count(&p.left) * count(&p.right))
            .sum()
    };
    node.count.get_or_init(|| c)
}

/// `F(k) = Σ_{j ≤ k} |l_j|·|r_j|`. Empty for leaves.
pub fn prefix_sums(node: &ForestNode) -> &[TreeCount] {
    node.prefix_sums.get_or_init(|| {
        let mut acc = BigUint::zero();
        node.children()
            .iter()
            .map(|p| {
                acc += count(&p.left) * count(&p.right);
                acc.clone()
            })
            .collect()
    })
}

/// Find the pair whose half-open block `[F(p-1), F(p))` contains `i`, and the
/// offset `q = i - F(p-1)` within it.
pub fn select_pair(prefix: &[TreeCount], i: &TreeCount) -> Result<(usize, TreeCount)> {
    let p = prefix.partition_point(|f| f <= i);
    if p == prefix.len() {
        return Err(Error::IndexOutOfBounds {
            index: i.clone(),
            count: prefix.last().cloned().unwrap_or_default(),
        });
    }
    let q = if p == 0 { i.clone() } else { i - &prefix[p - 1] };
    Ok((p, q))
}

/// A single derivation. Terminal rules appear as [`DerivationTree::Terminal`];
/// the ε half of the forest's terminal pairs is dropped on decoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DerivationTree {
    /// A bare terminal leaf (only produced when decoding a leaf directly).
    Leaf(TermId),
    /// The ε sentinel, decoded on its own.
    Epsilon,
    /// `root -> terminal`
    Terminal { root: NtId, terminal: TermId },
    /// `root -> left.root right.root`
    Binary { root: NtId, left: Box<DerivationTree>, right: Box<DerivationTree> },
}

impl DerivationTree {
    pub fn root(&self) -> Option<NtId> {
        match self {
            DerivationTree::Terminal { root, .. } | DerivationTree::Binary { root, .. } => Some(*root),
            _ => None,
        }
    }

    /// Terminals left to right.
    pub fn yield_of(&self) -> Vec<TermId> {
        let mut out = Vec::new();
        self.collect_yield(&mut out);
        out
    }

    fn collect_yield(&self, out: &mut Vec<TermId>) {
        match self {
            DerivationTree::Leaf(t) | DerivationTree::Terminal { terminal: t, .. } => out.push(*t),
            DerivationTree::Epsilon => {}
            DerivationTree::Binary { left, right, .. } => {
                left.collect_yield(out);
                right.collect_yield(out);
            }
        }
    }

    /// Every internal node is an instance of a grammar rule.
    pub fn is_licensed(&self, g: &CnfGrammar) -> bool {
        match self {
            DerivationTree::Leaf(_) | DerivationTree::Epsilon => true,
            DerivationTree::Terminal { root, terminal } => g.terminal_rule_index(*root, *terminal).is_some(),
            DerivationTree::Binary { root, left, right } => {
                match (left.root(), right.root()) {
                    (Some(l), Some(r)) => {
                        g.binary_rule_index(*root, l, r).is_some()
                            && left.is_licensed(g)
                            && right.is_licensed(g)
                    }
                    _ => false,
                }
            }
        }
    }

    /// Canonical s-expression: `(S (T.1.0 "(") (T.1.2 ")"))`. Terminals are always
    /// quoted; nonterminals only when they contain delimiters.
    pub fn to_sexpr(&self, g: &CnfGrammar) -> String {
        let mut out = String::new();
        self.write_sexpr(g, &mut out).expect("writing to a String");
        out
    }

    fn write_sexpr(&self, g: &CnfGrammar, out: &mut String) -> fmt::Result {
        match self {
            DerivationTree::Leaf(t) => write_quoted(out, g.terminal_name(*t)),
            DerivationTree::Epsilon => out.write_str("ε"),
            DerivationTree::Terminal { root, terminal } => {
                out.write_char('(')?;
                write_atom(out, g.nonterminal_name(*root))?;
                out.write_char(' ')?;
                write_quoted(out, g.terminal_name(*terminal))?;
                out.write_char(')')
            }
            DerivationTree::Binary { root, left, right } => {
                out.write_char('(')?;
                write_atom(out, g.nonterminal_name(*root))?;
                out.write_char(' ')?;
                left.write_sexpr(g, out)?;
                out.write_char(' ')?;
                right.write_sexpr(g, out)?;
                out.write_char(')')
            }
        }
    }

    /// Space-joined terminal names of the yield.
    pub fn yield_string(&self, g: &CnfGrammar) -> String {
        self.yield_of()
            .into_iter()
            .map(|t| g.terminal_name(t))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn write_quoted(out: &mut String, s: &str) -> fmt::Result {
    out.write_char('"')?;
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.write_char('\\')?;
        }
        out.write_char(c)?;
    }
    out.write_char('"')
}

fn write_atom(out: &mut String, s: &str) -> fmt::Result {
    if s.chars().any(|c| c.is_whitespace() || matches!(c, '(' | ')' | '"' | '\\')) {
        write_quoted(out, s)
    } else {
        out.write_str(s)
    }
}

/// Decode index `i ∈ [0, count(node))` into the derivation it stands for.
/// Distinct indices give distinct trees.
pub fn phi(node: &ForestNode, i: &TreeCount) -> Result<DerivationTree> {
    let total = count(node);
    if i >= total {
        return Err(Error::IndexOutOfBounds { index: i.clone(), count: total.clone() });
    }
    Ok(decode(node, i.clone()))
}

fn decode(node: &ForestNode, i: BigUint) -> DerivationTree {
    match node.root() {
        ForestSymbol::Terminal(t) if node.is_leaf() => return DerivationTree::Leaf(t),
        ForestSymbol::Epsilon => return DerivationTree::Epsilon,
        _ => {}
    }
    let ForestSymbol::Nonterminal(root) = node.root() else {
        unreachable!("terminal roots are leaves");
    };
    let (p, q) = select_pair(prefix_sums(node), &i).expect("index checked against count");
    let pair = &node.children()[p];
    if pair.right.root() == ForestSymbol::Epsilon {
        if let ForestSymbol::Terminal(terminal) = pair.left.root() {
            return DerivationTree::Terminal { root, terminal };
        }
    }
    let (q1, q2) = q.div_rem(count(&pair.right));
    DerivationTree::Binary {
        root,
        left: Box::new(decode(&pair.left, q1)),
        right: Box::new(decode(&pair.right, q2)),
    }
}

/// Decode `indices` on the rayon pool, preserving order.
pub fn phi_many(node: &Arc<ForestNode>, indices: &[TreeCount]) -> Result<Vec<DerivationTree>> {
    use rayon::prelude::*;
    // memoize on one thread before fanning out
    count(node);
    indices.par_iter().map(|i| phi(node, i)).collect()
}

/// Every tree of `node`, in index order. Meant for small forests.
pub fn all_trees(node: &ForestNode) -> impl Iterator<Item = DerivationTree> + '_ {
    let total = count(node).clone();
    num_iter::range(BigUint::zero(), total).map(move |i| decode(node, i))
}

mod num_iter {
    use num_bigint::BigUint;
    use num_traits::One;

    pub fn range(start: BigUint, end: BigUint) -> impl Iterator<Item = BigUint> {
        let mut next = start;
        std::iter::from_fn(move || {
            if next < end {
                let out = next.clone();
                next += BigUint::one();
                Some(out)
            } else {
                None
            }
        })
    }
}
