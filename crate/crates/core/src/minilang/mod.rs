//! MiniLang, the bundled host language.
//!
//! ```text
//! fn gcd(a: int, b: int): int {
//!     while (b != 0) {
//!         var t: int = a % b;
//!         a = b;
//!         b = t;
//!     }
//!     return a;
//! }
//! ```
//!
//! Two scalar types (`int`, `bool`), functions, `if`/`else`, `while`,
//! `return`. Every statement sits in a `Stmts` sequence, so a statement can
//! be inserted before any existing one without breaking the syntax.
//! Identifier leaves hang off the `HLIdentifier` nonterminal.

mod check;
mod interp;
mod lexer;
mod parser;
mod printer;

pub use check::{collect_identifiers, typecheck, DeclKind, Identifier, IdentType, Ty, TypeError};
pub use interp::{run, run_all, CompiledProgram, CoverageRecord, TestCase, Value, Verdict, DEFAULT_FUEL};
pub use lexer::LexError;
pub use parser::{parse, ParseError};
pub use printer::{print, print_lossy, PrintError};

use std::sync::OnceLock;

use crate::grammar::{Grammar, GrammarBuilder, SymbolId, Tree};

/// Token of an identifier awaiting instantiation.
pub const PLACEHOLDER: &str = "placeholder";

pub const BINARY_OPS: [&str; 13] = [
    "+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||",
];
pub const UNARY_OPS: [&str; 2] = ["-", "!"];

/// Symbol ids of the MiniLang grammar, resolved once.
#[derive(Debug, Clone, Copy)]
pub struct Syms {
    pub program: SymbolId,
    pub funcs: SymbolId,
    pub func: SymbolId,
    pub params: SymbolId,
    pub param: SymbolId,
    pub ty: SymbolId,
    pub block: SymbolId,
    pub stmts: SymbolId,
    pub stmt: SymbolId,
    pub var_decl: SymbolId,
    pub assign: SymbolId,
    pub if_: SymbolId,
    pub while_: SymbolId,
    pub ret: SymbolId,
    pub expr_stmt: SymbolId,
    pub expr: SymbolId,
    pub call: SymbolId,
    pub args: SymbolId,
    pub bin_op: SymbolId,
    pub un_op: SymbolId,
    pub int_lit: SymbolId,
    pub bool_lit: SymbolId,
    pub hl_ident: SymbolId,
    pub ident: SymbolId,
    pub int: SymbolId,
    pub bool_: SymbolId,
    pub op: SymbolId,
    pub type_name: SymbolId,
}

#[derive(Debug)]
pub struct MiniLang {
    pub grammar: Grammar,
    pub syms: Syms,
}

pub fn minilang() -> &'static MiniLang {
    static CELL: OnceLock<MiniLang> = OnceLock::new();
    CELL.get_or_init(|| build().expect("MiniLang grammar is well-formed"))
}

pub fn grammar() -> &'static Grammar {
    &minilang().grammar
}

fn build() -> Result<MiniLang, crate::grammar::GrammarError> {
    let mut b = GrammarBuilder::new();
    for nt in [
        "Program", "Funcs", "Func", "Params", "Param", "Type", "Block", "Stmts", "Stmt", "VarDecl",
        "Assign", "If", "While", "Return", "ExprStmt", "Expr", "Call", "Args", "BinOp", "UnOp",
        "IntLit", "BoolLit", "HLIdentifier",
    ] {
        b.nonterminal(nt)?;
    }
    for t in ["Ident", "Int", "Bool", "Op", "TypeName"] {
        b.terminal(t)?;
    }
    b.rule("Program", &["Funcs"])?;
    b.rule("Funcs", &["Func", "Funcs"])?;
    b.rule("Funcs", &[])?;
    b.rule("Func", &["HLIdentifier", "Params", "Type", "Block"])?;
    b.rule("Params", &["Param", "Params"])?;
    b.rule("Params", &[])?;
    b.rule("Param", &["HLIdentifier", "Type"])?;
    b.rule("Type", &["TypeName:int"])?;
    b.rule("Type", &["TypeName:bool"])?;
    b.rule("Block", &["Stmts"])?;
    b.rule("Stmts", &["Stmt", "Stmts"])?;
    b.rule("Stmts", &[])?;
    for s in ["VarDecl", "Assign", "If", "While", "Return", "ExprStmt"] {
        b.rule("Stmt", &[s])?;
    }
    b.rule("VarDecl", &["HLIdentifier", "Type", "Expr"])?;
    b.rule("Assign", &["HLIdentifier", "Expr"])?;
    b.rule("If", &["Expr", "Block", "Block"])?;
    b.rule("While", &["Expr", "Block"])?;
    b.rule("Return", &["Expr"])?;
    b.rule("ExprStmt", &["Expr"])?;
    b.rule("Expr", &["Expr", "BinOp", "Expr"])?;
    b.rule("Expr", &["UnOp", "Expr"])?;
    b.rule("Expr", &["HLIdentifier"])?;
    b.rule("Expr", &["IntLit"])?;
    b.rule("Expr", &["BoolLit"])?;
    b.rule("Expr", &["Call"])?;
    b.rule("Call", &["HLIdentifier", "Args"])?;
    b.rule("Args", &["Expr", "Args"])?;
    b.rule("Args", &[])?;
    for op in BINARY_OPS {
        b.rule("BinOp", &[&format!("Op:{op}")])?;
    }
    for op in UNARY_OPS {
        b.rule("UnOp", &[&format!("Op:{op}")])?;
    }
    b.rule("IntLit", &["Int"])?;
    b.rule("BoolLit", &["Bool:true"])?;
    b.rule("BoolLit", &["Bool:false"])?;
    b.rule("HLIdentifier", &["Ident"])?;
    let grammar = b.build("Program")?;
    let s = |n: &str| grammar.lookup(n).expect("declared above");
    let syms = Syms {
        program: s("Program"),
        funcs: s("Funcs"),
        func: s("Func"),
        params: s("Params"),
        param: s("Param"),
        ty: s("Type"),
        block: s("Block"),
        stmts: s("Stmts"),
        stmt: s("Stmt"),
        var_decl: s("VarDecl"),
        assign: s("Assign"),
        if_: s("If"),
        while_: s("While"),
        ret: s("Return"),
        expr_stmt: s("ExprStmt"),
        expr: s("Expr"),
        call: s("Call"),
        args: s("Args"),
        bin_op: s("BinOp"),
        un_op: s("UnOp"),
        int_lit: s("IntLit"),
        bool_lit: s("BoolLit"),
        hl_ident: s("HLIdentifier"),
        ident: s("Ident"),
        int: s("Int"),
        bool_: s("Bool"),
        op: s("Op"),
        type_name: s("TypeName"),
    };
    Ok(MiniLang { grammar, syms })
}

/// Tree constructors for MiniLang fragments.
impl MiniLang {
    pub fn ident(&self, name: &str) -> Tree {
        Tree::node(self.syms.hl_ident, vec![Tree::leaf(self.syms.ident, name)])
    }

    pub fn ty(&self, name: &str) -> Tree {
        Tree::node(self.syms.ty, vec![Tree::leaf(self.syms.type_name, name)])
    }

    pub fn expr_ident(&self, name: &str) -> Tree {
        Tree::node(self.syms.expr, vec![self.ident(name)])
    }

    pub fn expr_int(&self, v: i64) -> Tree {
        let lit = Tree::node(self.syms.int_lit, vec![Tree::leaf(self.syms.int, v.unsigned_abs().to_string())]);
        let e = Tree::node(self.syms.expr, vec![lit]);
        if v < 0 {
            self.expr_un("-", e)
        } else {
            e
        }
    }

    pub fn expr_bool(&self, v: bool) -> Tree {
        let lit = Tree::node(self.syms.bool_lit, vec![Tree::leaf(self.syms.bool_, v.to_string())]);
        Tree::node(self.syms.expr, vec![lit])
    }

    pub fn expr_bin(&self, l: Tree, op: &str, r: Tree) -> Tree {
        let op = Tree::node(self.syms.bin_op, vec![Tree::leaf(self.syms.op, op)]);
        Tree::node(self.syms.expr, vec![l, op, r])
    }

    pub fn expr_un(&self, op: &str, e: Tree) -> Tree {
        let op = Tree::node(self.syms.un_op, vec![Tree::leaf(self.syms.op, op)]);
        Tree::node(self.syms.expr, vec![op, e])
    }

    pub fn expr_call(&self, name: &str, args: Vec<Tree>) -> Tree {
        let call = Tree::node(self.syms.call, vec![self.ident(name), self.list(self.syms.args, args)]);
        Tree::node(self.syms.expr, vec![call])
    }

    /// Right-nested cons list (`Stmts`, `Args`, `Params`, `Funcs`).
    pub fn list(&self, sym: SymbolId, items: Vec<Tree>) -> Tree {
        items
            .into_iter()
            .rev()
            .fold(Tree::node(sym, vec![]), |rest, item| Tree::node(sym, vec![item, rest]))
    }

    /// Items of a cons list rooted at `t`.
    pub fn list_items<'a>(&self, t: &'a Tree) -> Vec<&'a Tree> {
        let mut out = Vec::new();
        let mut cur = t;
        while cur.children.len() == 2 {
            out.push(&cur.children[0]);
            cur = &cur.children[1];
        }
        out
    }

    pub fn block(&self, stmts: Vec<Tree>) -> Tree {
        Tree::node(self.syms.block, vec![self.list(self.syms.stmts, stmts)])
    }

    fn stmt(&self, inner: Tree) -> Tree {
        Tree::node(self.syms.stmt, vec![inner])
    }

    pub fn stmt_var(&self, name: &str, ty: &str, e: Tree) -> Tree {
        self.stmt(Tree::node(self.syms.var_decl, vec![self.ident(name), self.ty(ty), e]))
    }

    pub fn stmt_assign(&self, name: &str, e: Tree) -> Tree {
        self.stmt(Tree::node(self.syms.assign, vec![self.ident(name), e]))
    }

    pub fn stmt_if(&self, c: Tree, then: Vec<Tree>, els: Vec<Tree>) -> Tree {
        self.stmt(Tree::node(self.syms.if_, vec![c, self.block(then), self.block(els)]))
    }

    pub fn stmt_while(&self, c: Tree, body: Vec<Tree>) -> Tree {
        self.stmt(Tree::node(self.syms.while_, vec![c, self.block(body)]))
    }

    pub fn stmt_return(&self, e: Tree) -> Tree {
        self.stmt(Tree::node(self.syms.ret, vec![e]))
    }

    pub fn stmt_expr(&self, e: Tree) -> Tree {
        self.stmt(Tree::node(self.syms.expr_stmt, vec![e]))
    }

    pub fn func(&self, name: &str, params: &[(&str, &str)], ret: &str, body: Vec<Tree>) -> Tree {
        let params = params
            .iter()
            .map(|(n, t)| Tree::node(self.syms.param, vec![self.ident(n), self.ty(t)]))
            .collect();
        Tree::node(
            self.syms.func,
            vec![self.ident(name), self.list(self.syms.params, params), self.ty(ret), self.block(body)],
        )
    }

    pub fn program(&self, funcs: Vec<Tree>) -> Tree {
        Tree::node(self.syms.program, vec![self.list(self.syms.funcs, funcs)])
    }
}
