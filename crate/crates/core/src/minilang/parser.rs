use super::lexer::{lex, LexError, Spanned, Tok};
use super::{minilang, MiniLang, PLACEHOLDER};
use crate::grammar::{Ast, Tree};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: integer literal `{text}` out of range")]
    IntRange { line: usize, col: usize, text: String },
}

pub fn parse(src: &str) -> Result<Ast, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        m: minilang(),
    };
    let mut funcs = Vec::new();
    while p.peek() != &Tok::Eof {
        funcs.push(p.func()?);
    }
    Ok(Ast::from_tree(&p.m.program(funcs)))
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    m: &'static MiniLang,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Int(s) => format!("integer `{s}`"),
        Tok::Kw(k) => format!("`{k}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

// Binary precedence levels, loosest first.
const LEVELS: [&[&str]; 6] = [
    &["||"],
    &["&&"],
    &["==", "!="],
    &["<", "<=", ">", ">="],
    &["+", "-"],
    &["*", "/", "%"],
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError::Syntax {
            line: s.line,
            col: s.col,
            expected: expected.to_string(),
            found: describe(&s.tok),
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if matches!(self.peek(), Tok::Kw(q) if *q == k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&format!("`{p}`")))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), ParseError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.error(&format!("`{k}`")))
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Kw(k) if k == PLACEHOLDER => {
                self.bump();
                Ok(PLACEHOLDER.to_string())
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn type_name(&mut self) -> Result<&'static str, ParseError> {
        if self.eat_kw("int") {
            Ok("int")
        } else if self.eat_kw("bool") {
            Ok("bool")
        } else {
            Err(self.error("type"))
        }
    }

    fn func(&mut self) -> Result<Tree, ParseError> {
        self.expect_kw("fn")?;
        let name = self.name()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.eat_punct(")") {
            loop {
                let p = self.name()?;
                self.expect_punct(":")?;
                let t = self.type_name()?;
                params.push((p, t));
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        let ret = if self.eat_punct(":") { self.type_name()? } else { "int" };
        let body = self.block()?;
        let params: Vec<(&str, &str)> = params.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        let mut f = self.m.func(&name, &params, ret, vec![]);
        f.children[3] = body;
        Ok(f)
    }

    fn block(&mut self) -> Result<Tree, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.eat_punct("}") {
            stmts.push(self.stmt()?);
        }
        Ok(self.m.block(stmts))
    }

    fn stmt(&mut self) -> Result<Tree, ParseError> {
        let m = self.m;
        if self.eat_kw("var") {
            let name = self.name()?;
            self.expect_punct(":")?;
            let t = self.type_name()?;
            self.expect_punct("=")?;
            let e = self.expr()?;
            self.expect_punct(";")?;
            return Ok(m.stmt_var(&name, t, e));
        }
        if self.eat_kw("if") {
            return self.if_rest();
        }
        if self.eat_kw("while") {
            self.expect_punct("(")?;
            let c = self.expr()?;
            self.expect_punct(")")?;
            let body = self.block()?;
            let w = Tree::node(m.syms.while_, vec![c, body]);
            return Ok(Tree::node(m.syms.stmt, vec![w]));
        }
        if self.eat_kw("return") {
            if matches!(self.peek(), Tok::Punct(";")) {
                return Err(self.error("expression"));
            }
            let e = self.expr()?;
            self.expect_punct(";")?;
            return Ok(m.stmt_return(e));
        }
        let is_ident = matches!(self.peek(), Tok::Ident(_) | Tok::Kw(PLACEHOLDER));
        if is_ident && matches!(self.peek_at(1), Tok::Punct("=")) {
            let name = self.name()?;
            self.bump();
            let e = self.expr()?;
            self.expect_punct(";")?;
            return Ok(m.stmt_assign(&name, e));
        }
        let e = self.expr()?;
        self.expect_punct(";")?;
        Ok(m.stmt_expr(e))
    }

    // After `if`.
    fn if_rest(&mut self) -> Result<Tree, ParseError> {
        self.expect_punct("(")?;
        let c = self.expr()?;
        self.expect_punct(")")?;
        let then = self.block()?;
        let els = if self.eat_kw("else") {
            if self.eat_kw("if") {
                let nested = self.if_rest()?;
                self.m.block(vec![nested])
            } else {
                self.block()?
            }
        } else {
            self.m.block(vec![])
        };
        let i = Tree::node(self.m.syms.if_, vec![c, then, els]);
        Ok(Tree::node(self.m.syms.stmt, vec![i]))
    }

    fn expr(&mut self) -> Result<Tree, ParseError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<Tree, ParseError> {
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = match self.peek() {
                Tok::Punct(p) if LEVELS[level].contains(p) => *p,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.binary(level + 1)?;
            lhs = self.m.expr_bin(lhs, op, rhs);
        }
    }

    fn unary(&mut self) -> Result<Tree, ParseError> {
        for op in ["-", "!"] {
            if self.eat_punct(op) {
                let e = self.unary()?;
                return Ok(self.m.expr_un(op, e));
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Tree, ParseError> {
        let m = self.m;
        let here = &self.toks[self.pos];
        let (line, col) = (here.line, here.col);
        match self.peek().clone() {
            Tok::Int(text) => {
                self.bump();
                if text.parse::<i64>().is_err() {
                    return Err(ParseError::IntRange { line, col, text });
                }
                let lit = Tree::node(m.syms.int_lit, vec![Tree::leaf(m.syms.int, text)]);
                Ok(Tree::node(m.syms.expr, vec![lit]))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(m.expr_bool(true))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(m.expr_bool(false))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(_) | Tok::Kw(PLACEHOLDER) => {
                let name = self.name()?;
                if self.eat_punct("(") {
                    let mut args = Vec::new();
                    if !self.eat_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.eat_punct(")") {
                                break;
                            }
                            self.expect_punct(",")?;
                        }
                    }
                    Ok(m.expr_call(&name, args))
                } else {
                    Ok(m.expr_ident(&name))
                }
            }
            _ => Err(self.error("expression")),
        }
    }
}
