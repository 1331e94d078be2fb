//! Random well-typed MiniLang programs with test suites, used as the fixed
//! side of synthetic bug/fix pairs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grammar::{Ast, Tree};
use crate::minilang::{minilang, run_all, CompiledProgram, TestCase, Ty, Value, DEFAULT_FUEL};

const VAR_NAMES: [&str; 24] = [
    "x", "y", "z", "n", "m", "i", "j", "k", "t", "v", "acc", "sum", "total", "count", "res", "tmp",
    "lo", "hi", "step", "limit", "best", "cur", "prev", "delta",
];
const FUNC_NAMES: [&str; 10] = [
    "f", "g", "h", "helper", "compute", "check", "calc", "update", "combine", "scale",
];
const RARE_HEAD: [&str; 32] = [
    "grid", "pixel", "tax", "orbit", "cache", "frame", "vector", "ledger", "sensor", "packet",
    "cargo", "glyph", "quota", "tensor", "voxel", "token", "signal", "matrix", "bucket", "cursor",
    "locale", "socket", "shard", "tile", "beacon", "parcel", "ember", "quark", "fiber", "lumen",
    "vertex", "harbor",
];
const RARE_TAIL: [&str; 24] = [
    "Width", "Offset", "Rate", "Limit", "Index", "Scale", "Bias", "Count", "Span", "Depth",
    "Margin", "Weight", "Factor", "Budget", "Level", "Ratio", "Stride", "Quota", "Delay", "Floor",
    "Ceil", "Gain", "Slack", "Phase",
];

pub const ENTRY: &str = "main";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    /// Chance that a declared name is drawn from the project-specific pool.
    pub rare_name_prob: f64,
    pub tests: usize,
    pub max_helpers: usize,
    pub max_statements: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            rare_name_prob: 0.25,
            tests: 4,
            max_helpers: 2,
            max_statements: 5,
        }
    }
}

/// A fixed program with a passing test suite over its `main` function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    pub program: Ast,
    pub tests: Vec<TestCase>,
}

struct FnSig {
    name: String,
    arity: usize,
    ret: Ty,
}

struct Gen<'r, R: Rng + ?Sized> {
    rng: &'r mut R,
    cfg: SeedConfig,
    helpers: Vec<FnSig>,
    used: Vec<String>,
    scopes: Vec<Vec<(String, Ty)>>,
    /// Loop counters, never reassigned outside their increment.
    frozen: Vec<String>,
}

impl<R: Rng + ?Sized> Gen<'_, R> {
    fn fresh(&mut self, pool: &[&str]) -> String {
        for _ in 0..64 {
            let name = if self.rng.gen_bool(self.cfg.rare_name_prob) {
                format!(
                    "{}{}",
                    RARE_HEAD.choose(self.rng).unwrap(),
                    RARE_TAIL.choose(self.rng).unwrap()
                )
            } else {
                pool.choose(self.rng).unwrap().to_string()
            };
            if !self.used.contains(&name) {
                self.used.push(name.clone());
                return name;
            }
        }
        let name = format!("v{}", self.used.len());
        self.used.push(name.clone());
        name
    }

    fn vars(&self, ty: Ty) -> Vec<String> {
        self.scopes
            .iter()
            .flatten()
            .filter(|(_, t)| *t == ty)
            .map(|(n, _)| n.clone())
            .collect()
    }

    fn declare(&mut self, name: &str, ty: Ty) {
        self.scopes.last_mut().unwrap().push((name.to_string(), ty));
    }

    fn literal(&mut self) -> Tree {
        let v = if self.rng.gen_bool(0.85) {
            self.rng.gen_range(0..10)
        } else {
            self.rng.gen_range(10..13)
        };
        minilang().expr_int(v)
    }

    fn int_leaf(&mut self) -> Tree {
        let m = minilang();
        let vars = self.vars(Ty::Int);
        if !vars.is_empty() && self.rng.gen_bool(0.65) {
            m.expr_ident(vars.choose(self.rng).unwrap())
        } else {
            self.literal()
        }
    }

    fn int_expr(&mut self, depth: usize) -> Tree {
        let m = minilang();
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.int_leaf();
        }
        let int_helpers: Vec<(String, usize)> = self
            .helpers
            .iter()
            .filter(|h| h.ret == Ty::Int)
            .map(|h| (h.name.clone(), h.arity))
            .collect();
        match self.rng.gen_range(0..10) {
            0..=5 => {
                let op = *["+", "+", "-", "*"].choose(self.rng).unwrap();
                let l = self.int_expr(depth - 1);
                let r = self.int_expr(depth - 1);
                m.expr_bin(l, op, r)
            }
            6 => {
                let op = *["/", "%"].choose(self.rng).unwrap();
                let l = self.int_expr(depth - 1);
                let d = self.rng.gen_range(2..6);
                m.expr_bin(l, op, m.expr_int(d))
            }
            _ if !int_helpers.is_empty() => {
                let (name, arity) = int_helpers.choose(self.rng).unwrap().clone();
                let args = (0..arity).map(|_| self.int_expr(depth - 1)).collect();
                m.expr_call(&name, args)
            }
            _ => {
                let l = self.int_leaf();
                let r = self.int_leaf();
                m.expr_bin(l, "+", r)
            }
        }
    }

    fn cond(&mut self, depth: usize) -> Tree {
        let m = minilang();
        let bools = self.vars(Ty::Bool);
        let bool_helpers: Vec<(String, usize)> = self
            .helpers
            .iter()
            .filter(|h| h.ret == Ty::Bool)
            .map(|h| (h.name.clone(), h.arity))
            .collect();
        match self.rng.gen_range(0..10) {
            0 if !bools.is_empty() => m.expr_ident(bools.choose(self.rng).unwrap()),
            1 if !bool_helpers.is_empty() => {
                let (name, arity) = bool_helpers.choose(self.rng).unwrap().clone();
                let args = (0..arity).map(|_| self.int_leaf()).collect();
                m.expr_call(&name, args)
            }
            2 if depth > 0 => {
                let op = *["&&", "||"].choose(self.rng).unwrap();
                let l = self.cond(0);
                let r = self.cond(0);
                m.expr_bin(l, op, r)
            }
            _ => {
                let op = *["<", "<=", ">", ">=", "==", "!="].choose(self.rng).unwrap();
                let l = self.int_expr(1);
                let r = self.int_leaf();
                m.expr_bin(l, op, r)
            }
        }
    }

    fn assignable(&self) -> Vec<String> {
        self.vars(Ty::Int)
            .into_iter()
            .filter(|v| !self.frozen.contains(v))
            .collect()
    }

    fn assign(&mut self) -> Option<Tree> {
        let targets = self.assignable();
        let t = targets.choose(self.rng)?.clone();
        let m = minilang();
        let e = if self.rng.gen_bool(0.5) {
            let op = *["+", "-", "*"].choose(self.rng).unwrap();
            let r = self.int_expr(1);
            m.expr_bin(m.expr_ident(&t), op, r)
        } else {
            self.int_expr(2)
        };
        Some(m.stmt_assign(&t, e))
    }

    fn block(&mut self, n: usize, depth: usize) -> Vec<Tree> {
        self.scopes.push(Vec::new());
        let mut out = Vec::new();
        for _ in 0..n {
            out.extend(self.stmt(depth));
        }
        self.scopes.pop();
        out
    }

    fn stmt(&mut self, depth: usize) -> Vec<Tree> {
        let m = minilang();
        let roll = self.rng.gen_range(0..20);
        match roll {
            0..=6 => {
                let name = self.fresh(&VAR_NAMES);
                if self.rng.gen_bool(0.15) {
                    let c = self.cond(1);
                    self.declare(&name, Ty::Bool);
                    vec![m.stmt_var(&name, "bool", c)]
                } else {
                    let e = self.int_expr(2);
                    self.declare(&name, Ty::Int);
                    vec![m.stmt_var(&name, "int", e)]
                }
            }
            7..=11 => self.assign().into_iter().collect(),
            12..=16 if depth < 2 => {
                let c = self.cond(1);
                let n_then = self.rng.gen_range(1..3);
                let then = self.block(n_then, depth + 1);
                let n_else = self.rng.gen_range(0..2);
                let els = self.block(n_else, depth + 1);
                if then.is_empty() {
                    return Vec::new();
                }
                vec![m.stmt_if(c, then, els)]
            }
            17..=19 if depth == 0 => {
                let i = self.fresh(&["i", "j", "k"]);
                let bound = if self.rng.gen_bool(0.5) {
                    self.int_leaf()
                } else {
                    m.expr_int(self.rng.gen_range(2..7))
                };
                let init = m.stmt_var(&i, "int", m.expr_int(0));
                self.declare(&i, Ty::Int);
                self.frozen.push(i.clone());
                let n_body = self.rng.gen_range(1..3);
                let mut body = self.block(n_body, depth + 1);
                let inc = m.stmt_assign(&i, m.expr_bin(m.expr_ident(&i), "+", m.expr_int(1)));
                body.push(inc);
                vec![init, m.stmt_while(m.expr_bin(m.expr_ident(&i), "<", bound), body)]
            }
            _ => self.assign().into_iter().collect(),
        }
    }

    fn func(&mut self, name: &str, arity: usize, ret: Ty) -> Tree {
        let m = minilang();
        self.used
            .retain(|u| u == name || u == ENTRY || self.helpers.iter().any(|h| &h.name == u));
        self.scopes = vec![Vec::new()];
        self.frozen.clear();
        let params: Vec<String> = (0..arity).map(|_| self.fresh(&VAR_NAMES)).collect();
        for p in &params {
            self.declare(p, Ty::Int);
        }
        let n = self.rng.gen_range(2..=self.cfg.max_statements.max(2));
        let mut body = Vec::new();
        for _ in 0..n {
            body.extend(self.stmt(0));
        }
        let last = match ret {
            Ty::Bool => self.cond(1),
            _ => self.int_expr(2),
        };
        body.push(m.stmt_return(last));
        let ps: Vec<(&str, &str)> = params.iter().map(|p| (p.as_str(), "int")).collect();
        m.func(name, &ps, if ret == Ty::Bool { "bool" } else { "int" }, body)
    }
}

fn candidate<R: Rng + ?Sized>(rng: &mut R, cfg: SeedConfig) -> Seed {
    let m = minilang();
    let mut g = Gen {
        rng,
        cfg,
        helpers: Vec::new(),
        used: vec![ENTRY.to_string()],
        scopes: Vec::new(),
        frozen: Vec::new(),
    };
    let mut funcs = Vec::new();
    let n_helpers = g.rng.gen_range(0..=cfg.max_helpers);
    for _ in 0..n_helpers {
        let name = g.fresh(&FUNC_NAMES);
        let arity = g.rng.gen_range(1..3);
        let ret = if g.rng.gen_bool(0.2) { Ty::Bool } else { Ty::Int };
        funcs.push(g.func(&name, arity, ret));
        g.helpers.push(FnSig { name, arity, ret });
    }
    let arity = g.rng.gen_range(1..4);
    funcs.push(g.func(ENTRY, arity, Ty::Int));
    let tests = (0..cfg.tests)
        .map(|_| TestCase {
            entry: ENTRY.to_string(),
            args: (0..arity).map(|_| Value::Int(g.rng.gen_range(-3..10))).collect(),
            expect: Value::Int(0),
        })
        .collect();
    Seed {
        program: Ast::from_tree(&m.program(funcs)),
        tests,
    }
}

/// Fills in expected values by running the program. `None` if some test
/// does not terminate normally or the outputs do not vary.
fn with_oracle_outputs(mut seed: Seed) -> Option<Seed> {
    let prog = CompiledProgram::compile(&seed.program).ok()?;
    let mut outputs = Vec::new();
    for t in &mut seed.tests {
        let rec = prog.run(t, DEFAULT_FUEL / 10);
        match rec.verdict {
            crate::minilang::Verdict::WrongValue { got } => t.expect = got,
            crate::minilang::Verdict::Pass => {}
            _ => return None,
        }
        outputs.push(t.expect);
    }
    outputs.sort_by_key(|v| match v {
        Value::Int(i) => *i,
        Value::Bool(b) => *b as i64,
    });
    outputs.dedup();
    if outputs.len() < 2 {
        return None;
    }
    debug_assert!(run_all(&prog, &seed.tests, DEFAULT_FUEL).iter().all(|r| r.passed()));
    Some(seed)
}

/// `n` seed programs whose test suites pass.
pub fn generate_seeds<R: Rng + ?Sized>(n: usize, cfg: SeedConfig, rng: &mut R) -> Vec<Seed> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if let Some(s) = with_oracle_outputs(candidate(rng, cfg)) {
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{parse, print, typecheck};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn seeds_typecheck_and_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let seeds = generate_seeds(40, SeedConfig::default(), &mut rng);
        for s in &seeds {
            typecheck(&s.program).unwrap();
            let text = print(&s.program).unwrap();
            assert!(parse(&text).unwrap().structural_equal(&s.program), "{text}");
            let prog = CompiledProgram::compile(&s.program).unwrap();
            assert!(run_all(&prog, &s.tests, DEFAULT_FUEL).iter().all(|r| r.passed()));
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_seeds(5, SeedConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let b = generate_seeds(5, SeedConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
    }
}
