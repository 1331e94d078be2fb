//! S-expression form of trees.
//!
//! `(Sym child ...)` for nonterminals, `(Sym "token")` for terminals. The
//! `NodeID` terminal prints its token bare: `(NodeID 9)`.

use super::{Ast, Grammar, GrammarError, NodeId, SymbolKind, Tree};

const BARE_TERMINAL: &str = "NodeID";
const PRETTY_WIDTH: usize = 72;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SexpError {
    #[error("unexpected end of input")]
    Eof,
    #[error("unexpected `{found}` at byte {at}")]
    Unexpected { found: String, at: usize },
    #[error("unterminated string starting at byte {0}")]
    Unterminated(usize),
    #[error("trailing input at byte {0}")]
    Trailing(usize),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

fn quote(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_compact(g: &Grammar, t: &Tree, out: &mut String) {
    out.push('(');
    out.push_str(g.name(t.symbol));
    if let Some(tok) = &t.token {
        out.push(' ');
        if g.name(t.symbol) == BARE_TERMINAL {
            out.push_str(tok);
        } else {
            quote(tok, out);
        }
    }
    for c in &t.children {
        out.push(' ');
        write_compact(g, c, out);
    }
    out.push(')');
}

fn write_pretty(g: &Grammar, t: &Tree, indent: usize, out: &mut String) {
    let mut flat = String::new();
    write_compact(g, t, &mut flat);
    if flat.len() + indent <= PRETTY_WIDTH || t.children.is_empty() {
        out.push_str(&flat);
        return;
    }
    out.push('(');
    out.push_str(g.name(t.symbol));
    for c in &t.children {
        out.push('\n');
        out.extend(std::iter::repeat_n(' ', indent + 2));
        write_pretty(g, c, indent + 2, out);
    }
    out.push(')');
}

impl Tree {
    pub fn to_sexp(&self, g: &Grammar) -> String {
        let mut s = String::new();
        write_compact(g, self, &mut s);
        s
    }

    pub fn to_sexp_pretty(&self, g: &Grammar) -> String {
        let mut s = String::new();
        write_pretty(g, self, 0, &mut s);
        s
    }

    pub fn from_sexp(g: &Grammar, src: &str) -> Result<Tree, SexpError> {
        let mut p = Parser { src, pos: 0, g };
        let t = p.tree()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(SexpError::Trailing(p.pos));
        }
        Ok(t)
    }
}

impl Ast {
    pub fn to_sexp(&self, g: &Grammar) -> String {
        self.tree().to_sexp(g)
    }

    pub fn to_sexp_pretty(&self, g: &Grammar) -> String {
        self.tree().to_sexp_pretty(g)
    }

    pub fn subtree_sexp(&self, g: &Grammar, id: NodeId) -> Result<String, GrammarError> {
        Ok(self.to_tree(id)?.to_sexp(g))
    }

    pub fn from_sexp(g: &Grammar, src: &str) -> Result<Ast, SexpError> {
        Ok(Ast::from_tree(&Tree::from_sexp(g, src)?))
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    g: &'a Grammar,
}

enum Tok {
    Open,
    Close,
    Atom(String),
    Str(String),
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek_char(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(Tok, usize), SexpError> {
        let c = self.peek_char().ok_or(SexpError::Eof)?;
        let at = self.pos;
        match c {
            '(' => {
                self.pos += 1;
                Ok((Tok::Open, at))
            }
            ')' => {
                self.pos += 1;
                Ok((Tok::Close, at))
            }
            '"' => {
                let mut s = String::new();
                let mut chars = self.src[at + 1..].char_indices();
                loop {
                    let (i, ch) = chars.next().ok_or(SexpError::Unterminated(at))?;
                    match ch {
                        '"' => {
                            self.pos = at + 1 + i + 1;
                            return Ok((Tok::Str(s), at));
                        }
                        '\\' => match chars.next() {
                            Some((_, 'n')) => s.push('\n'),
                            Some((_, e)) => s.push(e),
                            None => return Err(SexpError::Unterminated(at)),
                        },
                        ch => s.push(ch),
                    }
                }
            }
            _ => {
                let rest = &self.src[at..];
                let end = rest
                    .find(|ch: char| ch.is_whitespace() || ch == '(' || ch == ')' || ch == '"')
                    .unwrap_or(rest.len());
                self.pos = at + end;
                Ok((Tok::Atom(rest[..end].to_string()), at))
            }
        }
    }

    fn unexpected(tok: &Tok, at: usize) -> SexpError {
        let found = match tok {
            Tok::Open => "(".to_string(),
            Tok::Close => ")".to_string(),
            Tok::Atom(a) => a.clone(),
            Tok::Str(s) => format!("\"{s}\""),
        };
        SexpError::Unexpected { found, at }
    }

    fn tree(&mut self) -> Result<Tree, SexpError> {
        match self.next()? {
            (Tok::Open, _) => {}
            (t, at) => return Err(Self::unexpected(&t, at)),
        }
        let symbol = match self.next()? {
            (Tok::Atom(name), _) => self.g.lookup(&name)?,
            (t, at) => return Err(Self::unexpected(&t, at)),
        };
        if self.g.symbol(symbol).kind == SymbolKind::Terminal {
            let token = match self.next()? {
                (Tok::Str(s), _) | (Tok::Atom(s), _) => s,
                (t, at) => return Err(Self::unexpected(&t, at)),
            };
            match self.next()? {
                (Tok::Close, _) => Ok(Tree::leaf(symbol, token)),
                (t, at) => Err(Self::unexpected(&t, at)),
            }
        } else {
            let mut children = Vec::new();
            loop {
                if self.peek_char() == Some(')') {
                    self.pos += 1;
                    return Ok(Tree::node(symbol, children));
                }
                children.push(self.tree()?);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::GrammarBuilder;
    use super::*;

    fn g() -> Grammar {
        let mut b = GrammarBuilder::new();
        b.nonterminal("A").unwrap();
        b.terminal("T").unwrap();
        b.terminal("NodeID").unwrap();
        b.rule("A", &["A", "T"]).unwrap();
        b.rule("A", &["NodeID"]).unwrap();
        b.rule("A", &[]).unwrap();
        b.build("A").unwrap()
    }

    #[test]
    fn compact_form() {
        let g = g();
        let t = Tree::from_sexp(&g, r#"(A (A (NodeID 9)) (T "say \"hi\""))"#).unwrap();
        assert_eq!(t.children[1].token.as_deref(), Some("say \"hi\""));
        assert_eq!(t.to_sexp(&g), r#"(A (A (NodeID 9)) (T "say \"hi\""))"#);
    }

    #[test]
    fn pretty_form_parses_back() {
        let g = g();
        let mut t = Tree::from_sexp(&g, "(A)").unwrap();
        for i in 0..12 {
            t = Tree::node(t.symbol, vec![t, Tree::leaf(SymbolId(1), format!("tok{i}"))]);
        }
        let pretty = t.to_sexp_pretty(&g);
        assert!(pretty.contains('\n'));
        assert_eq!(Tree::from_sexp(&g, &pretty).unwrap(), t);
    }

    use super::super::SymbolId;

    #[test]
    fn errors() {
        let g = g();
        assert_eq!(Tree::from_sexp(&g, "(A"), Err(SexpError::Eof));
        assert!(matches!(Tree::from_sexp(&g, "(B)"), Err(SexpError::Grammar(_))));
        assert_eq!(Tree::from_sexp(&g, "(A) x"), Err(SexpError::Trailing(4)));
        assert_eq!(Tree::from_sexp(&g, "(T \"x)"), Err(SexpError::Unterminated(3)));
    }
}
