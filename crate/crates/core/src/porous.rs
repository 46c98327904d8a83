//! Strings with holes.

use std::fmt;

use crate::error::{Error, Result};
use crate::grammar::{CnfGrammar, TermId, HOLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Hole,
    Terminal(TermId),
}

impl Token {
    /// Resolve one whitespace-free token against the grammar's terminals.
    pub fn resolve(g: &CnfGrammar, text: &str, position: usize) -> Result<Self> {
        if text == HOLE {
            return Ok(Token::Hole);
        }
        g.terminal_id(text)
            .map(Token::Terminal)
            .ok_or_else(|| Error::UnknownToken { token: text.to_string(), position })
    }

    /// Whether terminal `t` may stand at this position.
    pub fn admits(self, t: TermId) -> bool {
        match self {
            Token::Hole => true,
            Token::Terminal(own) => own == t,
        }
    }
}

/// A nonempty token sequence over the terminals plus the hole `_`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PorousString {
    tokens: Vec<Token>,
}

impl PorousString {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyString);
        }
        Ok(PorousString { tokens })
    }

    /// Split on whitespace and resolve every token.
    pub fn parse(g: &CnfGrammar, text: &str) -> Result<Self> {
        let tokens = text
            .split_whitespace()
            .enumerate()
            .map(|(i, tok)| Token::resolve(g, tok, i))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tokens)
    }

    pub fn holes(n: usize) -> Result<Self> {
        Self::new(vec![Token::Hole; n])
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn hole_count(&self) -> usize {
        self.tokens.iter().filter(|t| **t == Token::Hole).count()
    }

    /// The `⊑` relation: `word` has the same length and agrees on every fixed token.
    pub fn is_completed_by(&self, word: &[TermId]) -> bool {
        word.len() == self.tokens.len()
            && self.tokens.iter().zip(word).all(|(tok, &t)| tok.admits(t))
    }

    pub fn display<'a>(&'a self, g: &'a CnfGrammar) -> impl fmt::Display + 'a {
        DisplayPorous { s: self, g }
    }
}

struct DisplayPorous<'a> {
    s: &'a PorousString,
    g: &'a CnfGrammar,
}

impl fmt::Display for DisplayPorous<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tok) in self.s.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match tok {
                Token::Hole => f.write_str(HOLE)?,
                Token::Terminal(t) => f.write_str(self.g.terminal_name(*t))?,
            }
        }
        Ok(())
    }
}
