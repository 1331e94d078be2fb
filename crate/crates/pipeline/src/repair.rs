//! Localize, generate, validate.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use editrepair_core::edit::{apply, DecodePolicy, EditContext, EditGrammar};
use editrepair_core::grammar::{Ast, NodeId};
use editrepair_core::minilang::{print, CompiledProgram, TestCase, DEFAULT_FUEL};
use editrepair_core::oracle::{diff_single_hunk, extract_oracle, PatchPair};
use editrepair_core::placeholder::instantiate_all;
use editrepair_model::{beam_search, BeamConfig, Model, ModelError};
use editrepair_tensor::Scalar;

use crate::ochiai::{ochiai, Suspicious};

#[derive(Debug, thiserror::Error)]
pub enum RepairError {
    #[error("nothing to repair: all {0} tests pass")]
    NothingToRepair(usize),
    #[error("the program does not compile: {0}")]
    DoesNotCompile(String),
    #[error("node {0} is not a statement inside a function")]
    BadStatement(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "stmt")]
pub enum Localization {
    Ochiai,
    /// The faulty statement is known.
    Perfect(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairBudget {
    pub beam: usize,
    /// Scripts generated per statement.
    pub candidates: usize,
    /// Suspicious statements tried, in ranking order.
    pub top_statements: usize,
    pub max_steps: usize,
    /// Wall-clock cap per bug. Reports are only reproducible when it is
    /// not reached.
    pub time_limit_secs: Option<u64>,
    /// Interpreter fuel per test.
    pub fuel: u64,
    pub placeholders: bool,
}

impl Default for RepairBudget {
    fn default() -> Self {
        Self {
            beam: 100,
            candidates: 100,
            top_statements: 10,
            max_steps: 128,
            time_limit_secs: Some(600),
            fuel: DEFAULT_FUEL,
            placeholders: true,
        }
    }
}

impl RepairBudget {
    pub fn beam_config(&self) -> BeamConfig {
        BeamConfig {
            beam: self.beam,
            candidates: self.candidates,
            max_steps: self.max_steps,
            policy: self.policy(),
        }
    }

    pub fn policy(&self) -> DecodePolicy {
        DecodePolicy {
            placeholder_enabled: self.placeholders,
            max_placeholders: if self.placeholders { 1 } else { 0 },
            ..DecodePolicy::default()
        }
    }
}

/// A generated edit script and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredScript {
    pub script: Ast,
    pub log_prob: f64,
}

/// Anything proposing scripts for a repair context, best first.
pub trait ScriptSource {
    fn edit_grammar(&self) -> &EditGrammar;
    fn scripts(&self, ctx: &EditContext, budget: &RepairBudget) -> Result<Vec<ScoredScript>, RepairError>;
}

impl<T: Scalar> ScriptSource for Model<T> {
    fn edit_grammar(&self) -> &EditGrammar {
        &self.eg
    }

    fn scripts(&self, ctx: &EditContext, budget: &RepairBudget) -> Result<Vec<ScoredScript>, RepairError> {
        Ok(beam_search(self, ctx, &budget.beam_config())?
            .into_iter()
            .map(|c| ScoredScript {
                script: c.script,
                log_prob: c.log_prob,
            })
            .collect())
    }
}

/// Proposes the oracle script of a known fix at its faulty statement and
/// nothing elsewhere.
pub struct OracleReplay {
    pub eg: EditGrammar,
    pub fixed: Ast,
}

impl ScriptSource for OracleReplay {
    fn edit_grammar(&self) -> &EditGrammar {
        &self.eg
    }

    fn scripts(&self, ctx: &EditContext, _: &RepairBudget) -> Result<Vec<ScoredScript>, RepairError> {
        let pair = PatchPair {
            id: String::new(),
            buggy: ctx.program.clone(),
            fixed: self.fixed.clone(),
            tests: Vec::new(),
            mutation: None,
        };
        Ok(match extract_oracle(&self.eg, &pair, true) {
            Ok(ex) if ex.ctx.faulty == ctx.faulty => vec![ScoredScript {
                script: ex.script,
                log_prob: 0.0,
            }],
            _ => Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchVerdict {
    CompileFail,
    TestFail,
    Plausible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchCandidate {
    pub stmt: NodeId,
    /// Position of the script in the statement's beam.
    pub rank: usize,
    pub script: String,
    pub log_prob: f64,
    /// Name substituted for the placeholder, if the script had one.
    pub instantiation: Option<String>,
    pub verdict: PatchVerdict,
    /// Failing tests; absent when the patch did not compile.
    pub failing_tests: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementAttempt {
    pub stmt: NodeId,
    pub suspiciousness: Option<f64>,
    pub scripts: usize,
    pub candidates: Vec<PatchCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausiblePatch {
    pub candidate: PatchCandidate,
    pub source: String,
    #[serde(skip)]
    pub program: Option<Ast>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub localization: Localization,
    pub tests: usize,
    pub failing_tests: usize,
    /// Statements selected for repair, in the order tried.
    pub ranking: Vec<Suspicious>,
    pub attempts: Vec<StatementAttempt>,
    pub plausible: Option<PlausiblePatch>,
    /// Candidate programs checked.
    pub validated: usize,
    pub time_limit_reached: bool,
}

impl RepairReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Compile, then run every test. Tests never run on a patch that does not
/// compile.
pub fn validate_patch(program: &Ast, tests: &[TestCase], fuel: u64) -> (PatchVerdict, Option<usize>) {
    let Ok(compiled) = CompiledProgram::compile(program) else {
        return (PatchVerdict::CompileFail, None);
    };
    let failing = tests.iter().filter(|t| !compiled.run(t, fuel).passed()).count();
    let verdict = if failing == 0 {
        PatchVerdict::Plausible
    } else {
        PatchVerdict::TestFail
    };
    (verdict, Some(failing))
}

fn statement_context(program: &Ast, stmt: NodeId) -> Result<EditContext, RepairError> {
    if !program.contains(stmt) {
        return Err(RepairError::BadStatement(stmt.0));
    }
    EditContext::for_minilang(program.clone(), stmt).map_err(|_| RepairError::BadStatement(stmt.0))
}

/// Tries suspicious statements in order and stops at the first plausible
/// patch.
pub fn repair(
    source: &dyn ScriptSource,
    program: &Ast,
    tests: &[TestCase],
    budget: &RepairBudget,
    localization: Localization,
) -> Result<RepairReport, RepairError> {
    let start = Instant::now();
    let limit = budget.time_limit_secs.map(Duration::from_secs);
    let compiled = CompiledProgram::compile(program).map_err(|e| {
        RepairError::DoesNotCompile(e.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("; "))
    })?;
    let records: Vec<_> = tests.iter().map(|t| compiled.run(t, budget.fuel)).collect();
    let failing = records.iter().filter(|r| !r.passed()).count();
    if failing == 0 {
        return Err(RepairError::NothingToRepair(tests.len()));
    }
    let ranking: Vec<Suspicious> = match localization {
        Localization::Perfect(stmt) => {
            statement_context(program, stmt)?;
            Vec::new()
        }
        Localization::Ochiai => ochiai(&records)
            .entries
            .into_iter()
            .filter(|s| s.score > 0.0 && statement_context(program, s.stmt).is_ok())
            .take(budget.top_statements)
            .collect(),
    };
    let targets: Vec<(NodeId, Option<f64>)> = match localization {
        Localization::Perfect(stmt) => vec![(stmt, None)],
        Localization::Ochiai => ranking.iter().map(|s| (s.stmt, Some(s.score))).collect(),
    };
    let mut report = RepairReport {
        localization,
        tests: tests.len(),
        failing_tests: failing,
        ranking,
        attempts: Vec::new(),
        plausible: None,
        validated: 0,
        time_limit_reached: false,
    };
    let eg = source.edit_grammar();
    let out_of_time = || limit.is_some_and(|l| start.elapsed() > l);
    'stmts: for (stmt, suspiciousness) in targets {
        if out_of_time() {
            report.time_limit_reached = true;
            break;
        }
        let ctx = statement_context(program, stmt)?;
        let scripts = source.scripts(&ctx, budget)?;
        let mut attempt = StatementAttempt {
            stmt,
            suspiciousness,
            scripts: scripts.len(),
            candidates: Vec::new(),
        };
        for (rank, s) in scripts.iter().enumerate() {
            if out_of_time() {
                report.time_limit_reached = true;
                report.attempts.push(attempt);
                break 'stmts;
            }
            let text = s.script.to_sexp(&eg.grammar);
            let candidate = |instantiation, verdict, failing_tests| PatchCandidate {
                stmt,
                rank,
                script: text.clone(),
                log_prob: s.log_prob,
                instantiation,
                verdict,
                failing_tests,
            };
            let insts = apply(eg, &s.script, &ctx)
                .ok()
                .and_then(|patched| instantiate_all(&patched, &ctx).ok())
                .unwrap_or_default();
            if insts.is_empty() {
                attempt.candidates.push(candidate(None, PatchVerdict::CompileFail, None));
                report.validated += 1;
                continue;
            }
            for inst in insts {
                let (verdict, failing) = validate_patch(&inst.program, tests, budget.fuel);
                report.validated += 1;
                let c = candidate(inst.name, verdict, failing);
                attempt.candidates.push(c.clone());
                if verdict == PatchVerdict::Plausible {
                    report.plausible = Some(PlausiblePatch {
                        candidate: c,
                        source: print(&inst.program).unwrap_or_default(),
                        program: Some(inst.program),
                    });
                    report.attempts.push(attempt);
                    break 'stmts;
                }
            }
        }
        report.attempts.push(attempt);
    }
    Ok(report)
}

/// The statement a known fix edits.
pub fn true_faulty_statement(buggy: &Ast, fixed: &Ast) -> Option<NodeId> {
    diff_single_hunk(buggy, fixed).ok().map(|h| h.faulty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use editrepair_core::minilang::{minilang, parse, Value};
    use editrepair_core::oracle::Vocabulary;

    const BUGGY: &str = "fn main(a: int, b: int): int {
        var x: int = a - b;
        var y: int = x * 2;
        if (y > 10) {
            y = y - 1;
        }
        return y;
    }";
    const FIXED: &str = "fn main(a: int, b: int): int {
        var x: int = a + b;
        var y: int = x * 2;
        if (y > 10) {
            y = y - 1;
        }
        return y;
    }";

    fn tests() -> Vec<TestCase> {
        let fixed = CompiledProgram::compile(&parse(FIXED).unwrap()).unwrap();
        [(1, 2), (5, 3), (0, 7)]
            .into_iter()
            .map(|(a, b)| {
                let mut t = TestCase {
                    entry: "main".into(),
                    args: vec![Value::Int(a), Value::Int(b)],
                    expect: Value::Int(0),
                };
                // expected values come from the fixed program
                t.expect = match fixed.run(&t, DEFAULT_FUEL).verdict {
                    editrepair_core::minilang::Verdict::WrongValue { got } => got,
                    _ => Value::Int(0),
                };
                t
            })
            .collect()
    }

    fn replay() -> OracleReplay {
        OracleReplay {
            eg: Vocabulary::default().edit_grammar(),
            fixed: parse(FIXED).unwrap(),
        }
    }

    fn stmts(ast: &Ast) -> Vec<NodeId> {
        ast.ids().filter(|i| ast.get(*i).symbol == minilang().syms.stmt).collect()
    }

    #[test]
    fn operator_swap_is_repaired_in_one_statement() {
        let buggy = parse(BUGGY).unwrap();
        let fixed = parse(FIXED).unwrap();
        let report = repair(&replay(), &buggy, &tests(), &RepairBudget::default(), Localization::Ochiai).unwrap();
        let p = report.plausible.as_ref().expect("plausible patch");
        let patched = p.program.as_ref().unwrap();
        assert!(patched.structural_equal(&fixed));
        assert_eq!(p.candidate.stmt, stmts(&buggy)[0]);
        assert!(report.ranking.iter().any(|s| s.stmt == stmts(&buggy)[0]));
        // validation soundness: rerun independently
        for t in tests() {
            assert!(editrepair_core::minilang::run(&parse(&p.source).unwrap(), &t, DEFAULT_FUEL).passed());
        }
    }

    #[test]
    fn perfect_localization_skips_ranking() {
        let buggy = parse(BUGGY).unwrap();
        let stmt = true_faulty_statement(&buggy, &parse(FIXED).unwrap()).unwrap();
        let report =
            repair(&replay(), &buggy, &tests(), &RepairBudget::default(), Localization::Perfect(stmt)).unwrap();
        assert!(report.ranking.is_empty());
        assert_eq!(report.attempts.len(), 1);
        assert!(report.plausible.is_some());
        let wrong = stmts(&buggy)[1];
        let report =
            repair(&replay(), &buggy, &tests(), &RepairBudget::default(), Localization::Perfect(wrong)).unwrap();
        assert!(report.plausible.is_none());
        assert!(matches!(
            repair(&replay(), &buggy, &tests(), &RepairBudget::default(), Localization::Perfect(NodeId(2))),
            Err(RepairError::BadStatement(2))
        ));
    }

    #[test]
    fn passing_program_has_nothing_to_repair() {
        let fixed = parse(FIXED).unwrap();
        let err = repair(&replay(), &fixed, &tests(), &RepairBudget::default(), Localization::Ochiai).unwrap_err();
        assert!(matches!(err, RepairError::NothingToRepair(3)));
    }

    struct Fixed(EditGrammar, Vec<&'static str>);
    impl ScriptSource for Fixed {
        fn edit_grammar(&self) -> &EditGrammar {
            &self.0
        }
        fn scripts(&self, _: &EditContext, _: &RepairBudget) -> Result<Vec<ScoredScript>, RepairError> {
            Ok(self
                .1
                .iter()
                .map(|s| ScoredScript {
                    script: Ast::from_sexp(&self.0.grammar, s).unwrap(),
                    log_prob: -1.0,
                })
                .collect())
        }
    }

    #[test]
    fn compile_failures_never_run_tests() {
        let buggy = parse(BUGGY).unwrap();
        let stmt = stmts(&buggy)[0];
        let eg = Vocabulary::default().edit_grammar();
        // the initializer `a - b` replaced by `true`: a type error
        let target = buggy.descendants(stmt).find(|n| buggy.get(*n).symbol == minilang().syms.expr).unwrap();
        let bad = format!(
            "(Edits (Edit (Modify (NodeID {}) (Expr (BoolLit (Bool \"true\"))))) (Edits (End \"end\")))",
            target.0
        );
        let src = Fixed(eg, vec![Box::leak(bad.into_boxed_str())]);
        let report = repair(&src, &buggy, &tests(), &RepairBudget::default(), Localization::Perfect(stmt)).unwrap();
        let c = &report.attempts[0].candidates[0];
        assert_eq!(c.verdict, PatchVerdict::CompileFail);
        assert_eq!(c.failing_tests, None);
        assert!(report.plausible.is_none());
    }

    #[test]
    fn report_json_is_stable() {
        let buggy = parse(BUGGY).unwrap();
        let a = repair(&replay(), &buggy, &tests(), &RepairBudget::default(), Localization::Ochiai).unwrap();
        let b = repair(&replay(), &buggy, &tests(), &RepairBudget::default(), Localization::Ochiai).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let back: RepairReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back.to_json(), a.to_json());
    }
}
