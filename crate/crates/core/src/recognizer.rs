//! Membership of concrete and porous strings via the set-valued CYK chart.
//!
//! Cell `(r, c)` holds the nonterminals deriving tokens `r..c` under some
//! completion of the holes. The superdiagonal `(r, r + 1)` is seeded with the
//! producers of token `r` (all producers of any terminal for a hole), and
//! longer spans are filled by increasing length. [`squaring_fixpoint`] computes
//! the same chart by literally iterating `M <- M + M²` and exists as a
//! reference for the span-length schedule.

use std::collections::BTreeSet;

use crate::grammar::{CnfGrammar, NtId};
use crate::porous::{PorousString, Token};

pub type NtSet = BTreeSet<NtId>;

/// `X ⊗ Z = { w | x ∈ X, z ∈ Z, (w -> x z) ∈ P }`
pub fn set_product(x: &NtSet, z: &NtSet, g: &CnfGrammar) -> NtSet {
    let mut out = NtSet::new();
    for &l in x {
        for &r in z {
            for &i in g.rules_with_children(l, r) {
                out.insert(g.binary_rules()[i].lhs);
            }
        }
    }
    out
}

/// Nonterminals that can produce `token`.
pub fn leaf_set(token: Token, g: &CnfGrammar) -> NtSet {
    match token {
        Token::Terminal(t) => g.producers_of(t).iter().map(|&i| g.terminal_rules()[i].lhs).collect(),
        Token::Hole => g.terminal_rules().iter().map(|r| r.lhs).collect(),
    }
}

/// Strictly upper-triangular `(n+1)×(n+1)` matrix of nonterminal sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetMatrix {
    n: usize,
    cells: Vec<NtSet>,
}

pub(crate) fn triangle_index(n: usize, r: usize, c: usize) -> usize {
    assert!(r < c && c <= n, "cell ({r}, {c}) outside the triangle of width {n}");
    // rows before r hold n + (n-1) + ... + (n-r+1) cells
    r * n - r * r.saturating_sub(1) / 2 + (c - r - 1)
}

impl SetMatrix {
    fn empty(n: usize) -> Self {
        SetMatrix { n, cells: vec![NtSet::new(); n * (n + 1) / 2] }
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> &NtSet {
        &self.cells[triangle_index(self.n, r, c)]
    }

    fn get_mut(&mut self, r: usize, c: usize) -> &mut NtSet {
        let i = triangle_index(self.n, r, c);
        &mut self.cells[i]
    }

    /// The top-right cell, covering the whole string.
    pub fn top(&self) -> &NtSet {
        self.get(0, self.n)
    }

    fn seeded(g: &CnfGrammar, s: &PorousString) -> Self {
        let mut m = SetMatrix::empty(s.len());
        for (r, &tok) in s.tokens().iter().enumerate() {
            *m.get_mut(r, r + 1) = leaf_set(tok, g);
        }
        m
    }
}

/// Fill the chart by increasing span length.
pub fn recognize_matrix(g: &CnfGrammar, s: &PorousString) -> SetMatrix {
    let mut m = SetMatrix::seeded(g, s);
    let n = s.len();
    for span in 2..=n {
        for r in 0..=n - span {
            let c = r + span;
            let mut cell = NtSet::new();
            for k in r + 1..c {
                cell.extend(set_product(m.get(r, k), m.get(k, c), g));
            }
            *m.get_mut(r, c) = cell;
        }
    }
    m
}

/// Whether some completion of `s` is in the language.
pub fn recognize(g: &CnfGrammar, s: &PorousString) -> bool {
    recognize_matrix(g, s).top().contains(&g.start())
}

/// Iterate `M <- M + M²` from the seeded superdiagonal until nothing changes.
/// Returns the fixpoint and the number of iterations that changed the matrix.
pub fn squaring_fixpoint(g: &CnfGrammar, s: &PorousString) -> (SetMatrix, usize) {
    let mut m = SetMatrix::seeded(g, s);
    let n = s.len();
    let mut rounds = 0;
    loop {
        let mut next = m.clone();
        for r in 0..n {
            for c in r + 1..=n {
                // (M²)[r][c] = ⋃_k M[r][k] ⊗ M[k][c]
                for k in r + 1..c {
                    let product = set_product(m.get(r, k), m.get(k, c), g);
                    next.get_mut(r, c).extend(product);
                }
            }
        }
        if next == m {
            return (m, rounds);
        }
        m = next;
        rounds += 1;
    }
}
