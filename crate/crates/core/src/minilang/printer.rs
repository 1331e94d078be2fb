use super::{minilang, PLACEHOLDER};
use crate::grammar::{Ast, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrintError {
    #[error("node {0} is an uninstantiated placeholder")]
    Placeholder(NodeId),
    #[error("node {0} is not a MiniLang construct printable here")]
    Unexpected(NodeId),
}

/// Source text for a whole program.
pub fn print(ast: &Ast) -> Result<String, PrintError> {
    Printer::new(ast, false).program()
}

/// Like [`print`], but placeholders are printed as the `placeholder`
/// keyword (which [`super::parse`] accepts back).
pub fn print_lossy(ast: &Ast) -> Result<String, PrintError> {
    Printer::new(ast, true).program()
}

struct Printer<'a> {
    ast: &'a Ast,
    allow_placeholder: bool,
    out: String,
}

impl<'a> Printer<'a> {
    fn new(ast: &'a Ast, allow_placeholder: bool) -> Self {
        Self {
            ast,
            allow_placeholder,
            out: String::new(),
        }
    }

    fn kids(&self, id: NodeId) -> &'a [NodeId] {
        &self.ast.get(id).children
    }

    fn list(&self, mut id: NodeId) -> Vec<NodeId> {
        let mut items = Vec::new();
        while let [item, rest] = self.kids(id) {
            items.push(*item);
            id = *rest;
        }
        items
    }

    fn leaf_token(&self, id: NodeId) -> &'a str {
        let leaf = self.kids(id)[0];
        self.ast.get(leaf).token.as_deref().unwrap_or("")
    }

    fn ident(&self, id: NodeId) -> Result<&'a str, PrintError> {
        let name = self.leaf_token(id);
        if name == PLACEHOLDER && !self.allow_placeholder {
            return Err(PrintError::Placeholder(id));
        }
        Ok(name)
    }

    fn program(mut self) -> Result<String, PrintError> {
        let s = minilang().syms;
        let root = self.ast.root();
        if self.ast.get(root).symbol != s.program {
            return Err(PrintError::Unexpected(root));
        }
        let funcs = self.list(self.kids(root)[0]);
        for (i, f) in funcs.into_iter().enumerate() {
            if i > 0 {
                self.out.push('\n');
            }
            self.func(f)?;
        }
        Ok(self.out)
    }

    fn func(&mut self, id: NodeId) -> Result<(), PrintError> {
        let [name, params, ret, body] = self.kids(id) else {
            return Err(PrintError::Unexpected(id));
        };
        let name = self.ident(*name)?;
        self.out.push_str("fn ");
        self.out.push_str(name);
        self.out.push('(');
        for (i, p) in self.list(*params).into_iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            let [pn, pt] = self.kids(p) else {
                return Err(PrintError::Unexpected(p));
            };
            let pn = self.ident(*pn)?;
            self.out.push_str(pn);
            self.out.push_str(": ");
            self.out.push_str(self.leaf_token(*pt));
        }
        self.out.push_str("): ");
        self.out.push_str(self.leaf_token(*ret));
        self.out.push(' ');
        self.block(*body, 0)?;
        self.out.push('\n');
        Ok(())
    }

    fn indent(&mut self, depth: usize) {
        self.out.extend(std::iter::repeat_n(' ', depth * 4));
    }

    fn block(&mut self, id: NodeId, depth: usize) -> Result<(), PrintError> {
        self.out.push_str("{\n");
        for st in self.list(self.kids(id)[0]) {
            self.stmt(st, depth + 1)?;
        }
        self.indent(depth);
        self.out.push('}');
        Ok(())
    }

    fn stmt(&mut self, id: NodeId, depth: usize) -> Result<(), PrintError> {
        let s = minilang().syms;
        self.indent(depth);
        let inner = self.kids(id)[0];
        let sym = self.ast.get(inner).symbol;
        let k = self.kids(inner);
        if sym == s.var_decl {
            let name = self.ident(k[0])?;
            self.out.push_str("var ");
            self.out.push_str(name);
            self.out.push_str(": ");
            self.out.push_str(self.leaf_token(k[1]));
            self.out.push_str(" = ");
            self.expr(k[2])?;
            self.out.push_str(";\n");
        } else if sym == s.assign {
            let name = self.ident(k[0])?;
            self.out.push_str(name);
            self.out.push_str(" = ");
            self.expr(k[1])?;
            self.out.push_str(";\n");
        } else if sym == s.if_ {
            self.out.push_str("if (");
            self.expr(k[0])?;
            self.out.push_str(") ");
            self.block(k[1], depth)?;
            if !self.list(self.kids(k[2])[0]).is_empty() {
                self.out.push_str(" else ");
                self.block(k[2], depth)?;
            }
            self.out.push('\n');
        } else if sym == s.while_ {
            self.out.push_str("while (");
            self.expr(k[0])?;
            self.out.push_str(") ");
            self.block(k[1], depth)?;
            self.out.push('\n');
        } else if sym == s.ret {
            self.out.push_str("return ");
            self.expr(k[0])?;
            self.out.push_str(";\n");
        } else if sym == s.expr_stmt {
            self.expr(k[0])?;
            self.out.push_str(";\n");
        } else {
            return Err(PrintError::Unexpected(inner));
        }
        Ok(())
    }

    fn is_compound(&self, expr: NodeId) -> bool {
        self.kids(expr).len() > 1
    }

    fn operand(&mut self, id: NodeId) -> Result<(), PrintError> {
        if self.is_compound(id) {
            self.out.push('(');
            self.expr(id)?;
            self.out.push(')');
            Ok(())
        } else {
            self.expr(id)
        }
    }

    fn expr(&mut self, id: NodeId) -> Result<(), PrintError> {
        let s = minilang().syms;
        let k = self.kids(id);
        match k {
            [l, op, r] => {
                self.operand(*l)?;
                self.out.push(' ');
                self.out.push_str(self.leaf_token(*op));
                self.out.push(' ');
                self.operand(*r)
            }
            [op, e] => {
                self.out.push_str(self.leaf_token(*op));
                self.operand(*e)
            }
            [inner] => {
                let sym = self.ast.get(*inner).symbol;
                if sym == s.hl_ident {
                    let name = self.ident(*inner)?;
                    self.out.push_str(name);
                } else if sym == s.int_lit || sym == s.bool_lit {
                    self.out.push_str(self.leaf_token(*inner));
                } else if sym == s.call {
                    let [callee, args] = self.kids(*inner) else {
                        return Err(PrintError::Unexpected(*inner));
                    };
                    let name = self.ident(*callee)?;
                    self.out.push_str(name);
                    self.out.push('(');
                    for (i, a) in self.list(*args).into_iter().enumerate() {
                        if i > 0 {
                            self.out.push_str(", ");
                        }
                        self.expr(a)?;
                    }
                    self.out.push(')');
                } else {
                    return Err(PrintError::Unexpected(*inner));
                }
                Ok(())
            }
            _ => Err(PrintError::Unexpected(id)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn canonical_layout() {
        let src = "fn f(a: int, b: bool): int {\n    var x: int = (a + 1) * (-a);\n    if (b) {\n        x = g(x, 2);\n    } else {\n        return 0;\n    }\n    while (x > 0) {\n        x = x - 1;\n    }\n    return x;\n}\n";
        assert_eq!(print(&parse(src).unwrap()).unwrap(), src);
    }

    #[test]
    fn single_return() {
        let ast = parse("fn main() { return 2; }").unwrap();
        assert_eq!(print(&ast).unwrap(), "fn main(): int {\n    return 2;\n}\n");
    }

    #[test]
    fn placeholder_needs_instantiation() {
        let ast = parse("fn main() { return placeholder(1); }").unwrap();
        assert!(matches!(print(&ast), Err(PrintError::Placeholder(_))));
        let lossy = print_lossy(&ast).unwrap();
        assert!(parse(&lossy).unwrap().structural_equal(&ast));
    }
}
