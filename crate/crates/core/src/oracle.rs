//! Brute-force reference answers for small instances.
//!
//! Nothing here uses the chart or the forest: completions are enumerated by
//! substituting every terminal into every hole, membership is a memoized
//! top-down search, and derivations are enumerated by plain backtracking over
//! every rule and split point. Everything is exponential; the guards keep
//! instances small.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::enumeration::DerivationTree;
use crate::error::{Error, Result};
use crate::grammar::{CnfGrammar, Grammar, NtId, SymbolKind, TermId};
use crate::porous::{PorousString, Token};

pub const MAX_COMPLETIONS: u64 = 1_000_000;
pub const MAX_DERIVATION_WIDTH: usize = 8;

/// All derivations of a set of words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DerivationSet {
    /// Canonical s-expressions, one per tree.
    pub trees: BTreeSet<String>,
    /// Number of derivations of each word.
    pub per_yield: BTreeMap<Vec<TermId>, usize>,
}

impl DerivationSet {
    pub fn total(&self) -> usize {
        self.per_yield.values().sum()
    }

    fn absorb(&mut self, other: DerivationSet) {
        self.trees.extend(other.trees);
        for (word, n) in other.per_yield {
            *self.per_yield.entry(word).or_default() += n;
        }
    }
}

fn derives(
    g: &CnfGrammar,
    word: &[TermId],
    a: NtId,
    i: usize,
    j: usize,
    memo: &mut HashMap<(NtId, usize, usize), bool>,
) -> bool {
    if let Some(&b) = memo.get(&(a, i, j)) {
        return b;
    }
    let result = if j - i == 1 {
        g.terminal_rules().iter().any(|r| r.lhs == a && r.terminal == word[i])
    } else {
        g.binary_rules().iter().any(|r| {
            r.lhs == a
                && (i + 1..j).any(|k| derives(g, word, r.left, i, k, memo) && derives(g, word, r.right, k, j, memo))
        })
    };
    memo.insert((a, i, j), result);
    result
}

/// Membership of a concrete nonempty word in the normal-form language.
pub fn accepts(g: &CnfGrammar, word: &[TermId]) -> bool {
    !word.is_empty() && derives(g, word, g.start(), 0, word.len(), &mut HashMap::new())
}

/// Every concrete word agreeing with `s` on its fixed tokens that the grammar
/// accepts.
pub fn enumerate_completions(g: &CnfGrammar, s: &PorousString) -> Result<BTreeSet<Vec<TermId>>> {
    let sigma = g.terminals().len() as u64;
    let holes = s.hole_count() as u32;
    let candidates = sigma.checked_pow(holes).filter(|&c| c <= MAX_COMPLETIONS);
    if candidates.is_none() {
        return Err(Error::OracleTooLarge(format!("{sigma}^{holes} candidate completions")));
    }
    let mut out = BTreeSet::new();
    let mut word: Vec<TermId> = Vec::with_capacity(s.len());
    fill(g, s.tokens(), &mut word, &mut out);
    Ok(out)
}

fn fill(g: &CnfGrammar, rest: &[Token], word: &mut Vec<TermId>, out: &mut BTreeSet<Vec<TermId>>) {
    match rest.split_first() {
        None => {
            if accepts(g, word) {
                out.insert(word.clone());
            }
        }
        Some((Token::Terminal(t), tail)) => {
            word.push(*t);
            fill(g, tail, word, out);
            word.pop();
        }
        Some((Token::Hole, tail)) => {
            for t in 0..g.terminals().len() {
                word.push(TermId(t));
                fill(g, tail, word, out);
                word.pop();
            }
        }
    }
}

fn trees(g: &CnfGrammar, word: &[TermId], a: NtId, i: usize, j: usize) -> Vec<DerivationTree> {
    let mut out = Vec::new();
    if j - i == 1 {
        for r in g.terminal_rules() {
            if r.lhs == a && r.terminal == word[i] {
                out.push(DerivationTree::Terminal { root: a, terminal: r.terminal });
            }
        }
        return out;
    }
    for r in g.binary_rules() {
        if r.lhs != a {
            continue;
        }
        for k in i + 1..j {
            let lefts = trees(g, word, r.left, i, k);
            if lefts.is_empty() {
                continue;
            }
            let rights = trees(g, word, r.right, k, j);
            for l in &lefts {
                for rt in &rights {
                    out.push(DerivationTree::Binary {
                        root: a,
                        left: Box::new(l.clone()),
                        right: Box::new(rt.clone()),
                    });
                }
            }
        }
    }
    out
}

/// Every derivation tree of a concrete word.
pub fn enumerate_derivations(g: &CnfGrammar, word: &[TermId]) -> Result<DerivationSet> {
    if word.len() > MAX_DERIVATION_WIDTH {
        return Err(Error::OracleTooLarge(format!(
            "word of length {} (limit {MAX_DERIVATION_WIDTH})",
            word.len()
        )));
    }
    let mut set = DerivationSet::default();
    if word.is_empty() {
        return Ok(set);
    }
    let found = trees(g, word, g.start(), 0, word.len());
    if !found.is_empty() {
        set.per_yield.insert(word.to_vec(), found.len());
    }
    set.trees = found.iter().map(|t| t.to_sexpr(g)).collect();
    debug_assert_eq!(set.trees.len(), found.len());
    Ok(set)
}

/// Derivations of every completion of `s`.
pub fn enumerate_porous(g: &CnfGrammar, s: &PorousString) -> Result<DerivationSet> {
    let mut set = DerivationSet::default();
    for word in enumerate_completions(g, s)? {
        set.absorb(enumerate_derivations(g, &word)?);
    }
    Ok(set)
}

/// Membership under an arbitrary (not normalized) grammar, including
/// ε-productions and unit cycles. Computes the least table
/// `D[A][i][j] = A ⇒* word[i..j]` by iterating every production to a fixpoint.
pub fn grammar_accepts(g: &Grammar, word: &[&str]) -> bool {
    let n = word.len();
    let nts: HashMap<&str, usize> = g
        .nonterminals()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut table = vec![vec![vec![false; n + 1]; n + 1]; nts.len()];
    loop {
        let mut changed = false;
        for p in g.productions() {
            let a = nts[p.lhs.as_str()];
            for i in 0..=n {
                for j in i..=n {
                    if table[a][i][j] {
                        continue;
                    }
                    // reach[k]: the body prefix so far can cover word[i..k]
                    let mut reach = vec![false; n + 1];
                    reach[i] = true;
                    for sym in &p.rhs {
                        let mut next = vec![false; n + 1];
                        for k in i..=j {
                            if !reach[k] {
                                continue;
                            }
                            match sym.kind {
                                SymbolKind::Terminal => {
                                    if k < j && word[k] == sym.name {
                                        next[k + 1] = true;
                                    }
                                }
                                SymbolKind::Nonterminal => {
                                    let b = nts[sym.name.as_str()];
                                    for m in k..=j {
                                        if table[b][k][m] {
                                            next[m] = true;
                                        }
                                    }
                                }
                            }
                        }
                        reach = next;
                    }
                    if reach[j] {
                        table[a][i][j] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    table[nts[g.start()]][0][n]
}
