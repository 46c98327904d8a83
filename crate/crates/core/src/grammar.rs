//! Context-free grammars and their Chomsky normal form.
//!
//! Grammar files hold one production per line:
//!
//! ```text
//! # Dyck language
//! S -> S S | ( S ) | ( )
//! ```
//!
//! A token is a nonterminal iff it appears on some left-hand side, and the
//! first left-hand side is the start symbol. A token wrapped in double quotes
//! is always a terminal, which is how terminals that start with an uppercase
//! letter are written. An empty alternative (or the token `ε`) derives the
//! empty string.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// The hole marker of porous strings. Never a grammar symbol.
pub const HOLE: &str = "_";

/// Token standing for an empty alternative in grammar files.
pub const EPSILON: &str = "ε";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: undefined nonterminal `{name}`")]
    UndefinedNonterminal { line: usize, name: String },

    #[error("line {line}: `_` is reserved for holes")]
    ReservedHole { line: usize },

    #[error("line {line}: `{name}` is used both as a terminal and a nonterminal")]
    Conflict { line: usize, name: String },

    #[error("grammar has no productions")]
    NoProductions,

    #[error("grammar generates only the empty string")]
    OnlyEmpty,

    #[error("start symbol `{0}` generates no strings")]
    EmptyLanguage(String),

    #[error("duplicate rule `{0}`")]
    DuplicateRule(String),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKind {
    Terminal,
    Nonterminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
}

impl Symbol {
    pub fn terminal(name: impl Into<String>) -> Self {
        Symbol { name: name.into(), kind: SymbolKind::Terminal }
    }

    pub fn nonterminal(name: impl Into<String>) -> Self {
        Symbol { name: name.into(), kind: SymbolKind::Nonterminal }
    }

    pub fn is_terminal(&self) -> bool {
        self.kind == SymbolKind::Terminal
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub lhs: String,
    /// Empty for an ε-production.
    pub rhs: Vec<Symbol>,
}

/// A context-free grammar as written by the user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    terminals: Vec<String>,
    nonterminals: Vec<String>,
    productions: Vec<Production>,
    start: String,
}

impl Grammar {
    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn start(&self) -> &str {
        &self.start
    }
}

fn unquote(token: &str) -> Option<&str> {
    if token.len() >= 3 && token.starts_with('"') && token.ends_with('"') {
        Some(&token[1..token.len() - 1])
    } else {
        None
    }
}

fn looks_like_nonterminal(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

/// Parse the line-oriented grammar format. Production order follows the text.
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    // (line, lhs, alternatives)
    let mut lines: Vec<(usize, &str, Vec<Vec<&str>>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let (lhs, rhs) = line.split_once("->").ok_or_else(|| GrammarError::Syntax {
            line: line_no,
            message: "expected `->`".into(),
        })?;
        let lhs_tokens: Vec<&str> = lhs.split_whitespace().collect();
        let lhs = match lhs_tokens.as_slice() {
            [one] => *one,
            [] => {
                return Err(GrammarError::Syntax {
                    line: line_no,
                    message: "missing left-hand side".into(),
                })
            }
            _ => {
                return Err(GrammarError::Syntax {
                    line: line_no,
                    message: "left-hand side must be a single symbol".into(),
                })
            }
        };
        if lhs == HOLE {
            return Err(GrammarError::ReservedHole { line: line_no });
        }
        if lhs == EPSILON || unquote(lhs).is_some() {
            return Err(GrammarError::Syntax {
                line: line_no,
                message: format!("`{lhs}` cannot be a nonterminal"),
            });
        }
        let alternatives = rhs
            .split('|')
            .map(|alt| {
                alt.split_whitespace()
                    .filter(|tok| *tok != EPSILON)
                    .collect::<Vec<_>>()
            })
            .collect();
        lines.push((line_no, lhs, alternatives));
    }
    if lines.is_empty() {
        return Err(GrammarError::NoProductions);
    }

    let mut nonterminals: Vec<String> = Vec::new();
    let mut nt_set: HashSet<&str> = HashSet::new();
    for (_, lhs, _) in &lines {
        if nt_set.insert(lhs) {
            nonterminals.push(lhs.to_string());
        }
    }

    let mut terminals: Vec<String> = Vec::new();
    let mut t_set: HashSet<String> = HashSet::new();
    let mut productions = Vec::new();
    for (line, lhs, alternatives) in &lines {
        for alt in alternatives {
            let mut rhs = Vec::with_capacity(alt.len());
            for &tok in alt {
                if tok == HOLE {
                    return Err(GrammarError::ReservedHole { line: *line });
                }
                let symbol = if let Some(lit) = unquote(tok) {
                    if lit == HOLE {
                        return Err(GrammarError::ReservedHole { line: *line });
                    }
                    if nt_set.contains(lit) {
                        return Err(GrammarError::Conflict { line: *line, name: lit.into() });
                    }
                    Symbol::terminal(lit)
                } else if nt_set.contains(tok) {
                    Symbol::nonterminal(tok)
                } else if looks_like_nonterminal(tok) {
                    return Err(GrammarError::UndefinedNonterminal {
                        line: *line,
                        name: tok.into(),
                    });
                } else {
                    Symbol::terminal(tok)
                };
                if symbol.is_terminal() && t_set.insert(symbol.name.clone()) {
                    terminals.push(symbol.name.clone());
                }
                rhs.push(symbol);
            }
            productions.push(Production { lhs: lhs.to_string(), rhs });
        }
    }

    let start = nonterminals[0].clone();
    Ok(Grammar { terminals, nonterminals, productions, start })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NtId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub usize);

/// `lhs -> left right`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinaryRule {
    pub lhs: NtId,
    pub left: NtId,
    pub right: NtId,
}

/// `lhs -> terminal`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TerminalRule {
    pub lhs: NtId,
    pub terminal: TermId,
}

/// Identifies a rule by its position in one of the two rule lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleRef {
    Binary(usize),
    Terminal(usize),
}

/// A grammar whose rules all have the form `w -> x z` or `w -> t`.
#[derive(Debug, Clone)]
pub struct CnfGrammar {
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    binary_rules: Vec<BinaryRule>,
    terminal_rules: Vec<TerminalRule>,
    start: NtId,
    nonterminal_index: HashMap<String, NtId>,
    terminal_index: HashMap<String, TermId>,
    // terminal -> indices into terminal_rules
    producers: Vec<Vec<usize>>,
    // (left, right) -> indices into binary_rules
    by_children: HashMap<(NtId, NtId), Vec<usize>>,
    // (lhs, left, right) -> index into binary_rules
    binary_lookup: HashMap<(NtId, NtId, NtId), usize>,
}

impl CnfGrammar {
    /// Assemble a normal-form grammar from interned rules. Rejects duplicate rules
    /// and out-of-range ids.
    pub fn new(
        nonterminals: Vec<String>,
        terminals: Vec<String>,
        binary_rules: Vec<BinaryRule>,
        terminal_rules: Vec<TerminalRule>,
        start: NtId,
    ) -> Result<Self, GrammarError> {
        let nt_ok = |id: NtId| id.0 < nonterminals.len();
        if !nt_ok(start) {
            return Err(GrammarError::UnknownSymbol(format!("#{}", start.0)));
        }
        for r in &binary_rules {
            for id in [r.lhs, r.left, r.right] {
                if !nt_ok(id) {
                    return Err(GrammarError::UnknownSymbol(format!("#{}", id.0)));
                }
            }
        }
        for r in &terminal_rules {
            if !nt_ok(r.lhs) {
                return Err(GrammarError::UnknownSymbol(format!("#{}", r.lhs.0)));
            }
            if r.terminal.0 >= terminals.len() {
                return Err(GrammarError::UnknownSymbol(format!("#{}", r.terminal.0)));
            }
        }

        let nonterminal_index: HashMap<_, _> = nonterminals
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NtId(i)))
            .collect();
        let terminal_index: HashMap<_, _> = terminals
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), TermId(i)))
            .collect();

        let mut producers = vec![Vec::new(); terminals.len()];
        let mut seen_terminal = HashSet::new();
        for (i, r) in terminal_rules.iter().enumerate() {
            if !seen_terminal.insert(*r) {
                return Err(GrammarError::DuplicateRule(format!(
                    "{} -> {}",
                    nonterminals[r.lhs.0], terminals[r.terminal.0]
                )));
            }
            producers[r.terminal.0].push(i);
        }
        let mut by_children: HashMap<(NtId, NtId), Vec<usize>> = HashMap::new();
        let mut binary_lookup = HashMap::new();
        for (i, r) in binary_rules.iter().enumerate() {
            if binary_lookup.insert((r.lhs, r.left, r.right), i).is_some() {
                return Err(GrammarError::DuplicateRule(format!(
                    "{} -> {} {}",
                    nonterminals[r.lhs.0], nonterminals[r.left.0], nonterminals[r.right.0]
                )));
            }
            by_children.entry((r.left, r.right)).or_default().push(i);
        }

        Ok(CnfGrammar {
            nonterminals,
            terminals,
            binary_rules,
            terminal_rules,
            start,
            nonterminal_index,
            terminal_index,
            producers,
            by_children,
            binary_lookup,
        })
    }

    /// Parse grammar text and normalize it.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        to_cnf(&parse_grammar(text)?)
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn binary_rules(&self) -> &[BinaryRule] {
        &self.binary_rules
    }

    pub fn terminal_rules(&self) -> &[TerminalRule] {
        &self.terminal_rules
    }

    pub fn start(&self) -> NtId {
        self.start
    }

    pub fn nonterminal_name(&self, id: NtId) -> &str {
        &self.nonterminals[id.0]
    }

    pub fn terminal_name(&self, id: TermId) -> &str {
        &self.terminals[id.0]
    }

    pub fn nonterminal_id(&self, name: &str) -> Option<NtId> {
        self.nonterminal_index.get(name).copied()
    }

    pub fn terminal_id(&self, name: &str) -> Option<TermId> {
        self.terminal_index.get(name).copied()
    }

    /// Indices of the terminal rules `w -> t`, in rule order.
    pub fn producers_of(&self, t: TermId) -> &[usize] {
        &self.producers[t.0]
    }

    /// Indices of the binary rules `w -> left right`, in rule order.
    pub fn rules_with_children(&self, left: NtId, right: NtId) -> &[usize] {
        self.by_children.get(&(left, right)).map_or(&[], Vec::as_slice)
    }

    pub fn binary_rule_index(&self, lhs: NtId, left: NtId, right: NtId) -> Option<usize> {
        self.binary_lookup.get(&(lhs, left, right)).copied()
    }

    pub fn terminal_rule_index(&self, lhs: NtId, t: TermId) -> Option<usize> {
        self.producers[t.0]
            .iter()
            .copied()
            .find(|&i| self.terminal_rules[i].lhs == lhs)
    }

    /// `σ̂` for a single terminal: every `w` with a rule `w -> t`, sorted by id.
    /// An unknown terminal has no producers.
    pub fn terminal_producers(&self, t: &str) -> Vec<NtId> {
        let Some(id) = self.terminal_id(t) else {
            return Vec::new();
        };
        let mut out: Vec<NtId> = self.producers[id.0]
            .iter()
            .map(|&i| self.terminal_rules[i].lhs)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn rule_display(&self, rule: RuleRef) -> String {
        match rule {
            RuleRef::Binary(i) => {
                let r = self.binary_rules[i];
                format!(
                    "{} -> {} {}",
                    self.nonterminal_name(r.lhs),
                    self.nonterminal_name(r.left),
                    self.nonterminal_name(r.right)
                )
            }
            RuleRef::Terminal(i) => {
                let r = self.terminal_rules[i];
                let t = self.terminal_name(r.terminal);
                if looks_like_nonterminal(t) || t == EPSILON || self.nonterminal_index.contains_key(t) {
                    format!("{} -> \"{t}\"", self.nonterminal_name(r.lhs))
                } else {
                    format!("{} -> {t}", self.nonterminal_name(r.lhs))
                }
            }
        }
    }
}

impl fmt::Display for CnfGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Start-symbol rules first so the output reads back with the same start.
        let order = std::iter::once(self.start)
            .chain((0..self.nonterminals.len()).map(NtId).filter(|&n| n != self.start));
        for nt in order {
            let binary = self
                .binary_rules
                .iter()
                .enumerate()
                .filter(|(_, r)| r.lhs == nt)
                .map(|(i, _)| RuleRef::Binary(i));
            let terminal = self
                .terminal_rules
                .iter()
                .enumerate()
                .filter(|(_, r)| r.lhs == nt)
                .map(|(i, _)| RuleRef::Terminal(i));
            for rule in binary.chain(terminal) {
                writeln!(f, "{}", self.rule_display(rule))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Sym {
    N(usize),
    T(usize),
}

type Rule = (usize, Vec<Sym>);

struct Names {
    nonterminals: Vec<String>,
    taken: HashSet<String>,
}

impl Names {
    fn fresh(&mut self, base: String) -> usize {
        let mut name = base;
        while self.taken.contains(&name) {
            name.push('\'');
        }
        self.taken.insert(name.clone());
        self.nonterminals.push(name);
        self.nonterminals.len() - 1
    }
}

fn push_unique(out: &mut Vec<Rule>, seen: &mut HashSet<Rule>, rule: Rule) {
    if seen.insert(rule.clone()) {
        out.push(rule);
    }
}

/// Normalize a grammar. Steps, in order: terminal isolation, left-to-right
/// binarization, ε-elimination, unit-chain elimination, then removal of
/// useless symbols. Fresh nonterminals are named after what they replace:
/// `<t>` for a terminal `t` (or `T.i.j` when `t` holds parentheses, quotes or
/// backslashes, after its first occurrence at position `j` of production `i`),
/// and `A.i.j` for the j-th prefix of production `i` of `A`. A `'` is appended
/// on collision.
pub fn to_cnf(g: &Grammar) -> Result<CnfGrammar, GrammarError> {
    let nt_index: HashMap<&str, usize> = g
        .nonterminals
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let t_index: HashMap<&str, usize> = g
        .terminals
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut names = Names {
        nonterminals: g.nonterminals.clone(),
        taken: g.nonterminals.iter().chain(&g.terminals).cloned().collect(),
    };

    let intern = |s: &Symbol| -> Result<Sym, GrammarError> {
        match s.kind {
            SymbolKind::Nonterminal => nt_index
                .get(s.name.as_str())
                .map(|&i| Sym::N(i))
                .ok_or_else(|| GrammarError::UnknownSymbol(s.name.clone())),
            SymbolKind::Terminal => t_index
                .get(s.name.as_str())
                .map(|&i| Sym::T(i))
                .ok_or_else(|| GrammarError::UnknownSymbol(s.name.clone())),
        }
    };
    let start = *nt_index
        .get(g.start.as_str())
        .ok_or_else(|| GrammarError::UnknownSymbol(g.start.clone()))?;

    let mut rules: Vec<(usize, Rule)> = Vec::with_capacity(g.productions.len());
    for (i, p) in g.productions.iter().enumerate() {
        let lhs = *nt_index
            .get(p.lhs.as_str())
            .ok_or_else(|| GrammarError::UnknownSymbol(p.lhs.clone()))?;
        let rhs = p.rhs.iter().map(intern).collect::<Result<Vec<_>, _>>()?;
        rules.push((i, (lhs, rhs)));
    }

    // TERM: one shared `<t> -> t` per terminal occurring in a long body.
    let mut isolated: HashMap<usize, usize> = HashMap::new();
    let mut isolation_rules: Vec<(usize, Rule)> = Vec::new();
    for (source, (_, rhs)) in rules.iter_mut() {
        let source = *source;
        if rhs.len() < 2 {
            continue;
        }
        for (position, sym) in rhs.iter_mut().enumerate() {
            if let Sym::T(t) = *sym {
                let nt = *isolated.entry(t).or_insert_with(|| {
                    let name = &g.terminals[t];
                    let base = if name.contains(['(', ')', '"', '\\']) {
                        format!("T.{source}.{position}")
                    } else {
                        format!("<{name}>")
                    };
                    let id = names.fresh(base);
                    isolation_rules.push((usize::MAX, (id, vec![Sym::T(t)])));
                    id
                });
                *sym = Sym::N(nt);
            }
        }
    }
    rules.extend(isolation_rules);

    // BIN: A -> X0 X1 ... Xk-1 becomes A -> P(k-2) Xk-1, P(j) -> P(j-1) Xj, P(1) -> X0 X1.
    let mut binarized: Vec<Rule> = Vec::with_capacity(rules.len());
    for (source, (lhs, rhs)) in rules {
        if rhs.len() <= 2 {
            binarized.push((lhs, rhs));
            continue;
        }
        let k = rhs.len();
        let lhs_name = names.nonterminals[lhs].clone();
        let mut prefix = rhs[0];
        let mut helpers = Vec::with_capacity(k - 2);
        for (j, sym) in rhs.iter().enumerate().take(k - 1).skip(1) {
            let p = names.fresh(format!("{lhs_name}.{source}.{j}"));
            helpers.push((p, vec![prefix, *sym]));
            prefix = Sym::N(p);
        }
        binarized.push((lhs, vec![prefix, rhs[k - 1]]));
        binarized.extend(helpers);
    }

    // DEL
    let nt_count = names.nonterminals.len();
    let mut nullable = vec![false; nt_count];
    loop {
        let mut changed = false;
        for (lhs, rhs) in &binarized {
            if !nullable[*lhs]
                && rhs.iter().all(|s| matches!(s, Sym::N(n) if nullable[*n]))
            {
                nullable[*lhs] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let start_nullable = nullable[start];
    let mut seen = HashSet::new();
    let mut deleted: Vec<Rule> = Vec::new();
    for (lhs, rhs) in binarized {
        match rhs.as_slice() {
            [] => {}
            [_] => push_unique(&mut deleted, &mut seen, (lhs, rhs)),
            [x, z] => {
                let (x, z) = (*x, *z);
                push_unique(&mut deleted, &mut seen, (lhs, vec![x, z]));
                if matches!(x, Sym::N(n) if nullable[n]) {
                    push_unique(&mut deleted, &mut seen, (lhs, vec![z]));
                }
                if matches!(z, Sym::N(n) if nullable[n]) {
                    push_unique(&mut deleted, &mut seen, (lhs, vec![x]));
                }
            }
            _ => unreachable!("bodies are binarized"),
        }
    }

    // UNIT
    let mut unit_edges: Vec<Vec<usize>> = vec![Vec::new(); nt_count];
    let mut by_lhs: Vec<Vec<&Vec<Sym>>> = vec![Vec::new(); nt_count];
    for (lhs, rhs) in &deleted {
        match rhs.as_slice() {
            [Sym::N(b)] => unit_edges[*lhs].push(*b),
            _ => by_lhs[*lhs].push(rhs),
        }
    }
    let mut seen = HashSet::new();
    let mut unfolded: Vec<Rule> = Vec::new();
    for a in 0..nt_count {
        let mut closure = vec![a];
        let mut visited = HashSet::from([a]);
        let mut queue = VecDeque::from([a]);
        while let Some(b) = queue.pop_front() {
            for &c in &unit_edges[b] {
                if visited.insert(c) {
                    closure.push(c);
                    queue.push_back(c);
                }
            }
        }
        for b in closure {
            for rhs in &by_lhs[b] {
                push_unique(&mut unfolded, &mut seen, (a, (*rhs).clone()));
            }
        }
    }

    // Useless symbols: keep generating rules, then those reachable from start.
    let mut generating = vec![false; nt_count];
    loop {
        let mut changed = false;
        for (lhs, rhs) in &unfolded {
            if !generating[*lhs]
                && rhs.iter().all(|s| match s {
                    Sym::T(_) => true,
                    Sym::N(n) => generating[*n],
                })
            {
                generating[*lhs] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if !generating[start] {
        return Err(if start_nullable {
            GrammarError::OnlyEmpty
        } else {
            GrammarError::EmptyLanguage(g.start.clone())
        });
    }
    unfolded.retain(|(lhs, rhs)| {
        generating[*lhs] && rhs.iter().all(|s| !matches!(s, Sym::N(n) if !generating[*n]))
    });
    let mut reachable = vec![false; nt_count];
    reachable[start] = true;
    let mut stack = vec![start];
    while let Some(a) = stack.pop() {
        for (lhs, rhs) in &unfolded {
            if *lhs != a {
                continue;
            }
            for s in rhs {
                if let Sym::N(n) = *s {
                    if !reachable[n] {
                        reachable[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
    }
    unfolded.retain(|(lhs, _)| reachable[*lhs]);

    let mut remap = vec![None; nt_count];
    let mut kept = Vec::new();
    for (old, name) in names.nonterminals.iter().enumerate() {
        if reachable[old] && generating[old] {
            remap[old] = Some(NtId(kept.len()));
            kept.push(name.clone());
        }
    }
    let id = |n: usize| remap[n].expect("rule mentions a removed nonterminal");
    let mut binary_rules = Vec::new();
    let mut terminal_rules = Vec::new();
    for (lhs, rhs) in &unfolded {
        match rhs.as_slice() {
            [Sym::T(t)] => terminal_rules.push(TerminalRule { lhs: id(*lhs), terminal: TermId(*t) }),
            [Sym::N(x), Sym::N(z)] => {
                binary_rules.push(BinaryRule { lhs: id(*lhs), left: id(*x), right: id(*z) })
            }
            _ => unreachable!("normal form violated"),
        }
    }
    CnfGrammar::new(kept, g.terminals.clone(), binary_rules, terminal_rules, id(start))
}
