//! Corpus-level repair statistics.

use serde::{Deserialize, Serialize};

use editrepair_core::edit::EditGrammar;
use editrepair_core::oracle::PatchPair;

use crate::repair::{repair, true_faulty_statement, Localization, OracleReplay, RepairBudget, ScriptSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizationMode {
    Perfect,
    Ochiai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugOutcome {
    pub id: String,
    pub repaired: bool,
    /// The plausible patch equals the reference fix.
    pub exact: bool,
    pub validated: usize,
    /// Placeholder name used by the plausible patch.
    pub instantiation: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub bugs: usize,
    pub repaired: usize,
    pub exact: usize,
    /// Percent of bugs with a plausible patch.
    pub repair_rate: f64,
    /// Percent of plausible patches that equal the reference fix.
    pub exact_rate: f64,
    pub mean_validated: f64,
    pub outcomes: Vec<BugOutcome>,
}

impl EvalSummary {
    fn from_outcomes(outcomes: Vec<BugOutcome>) -> Self {
        let bugs = outcomes.len();
        let repaired = outcomes.iter().filter(|o| o.repaired).count();
        let exact = outcomes.iter().filter(|o| o.exact).count();
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        let validated: usize = outcomes.iter().map(|o| o.validated).sum();
        Self {
            bugs,
            repaired,
            exact,
            repair_rate: pct(repaired, bugs),
            exact_rate: pct(exact, repaired),
            mean_validated: if bugs == 0 { 0.0 } else { validated as f64 / bugs as f64 },
            outcomes,
        }
    }
}

/// Repairs every pair's buggy program with scripts from `source_for(pair)`.
pub fn evaluate_with<'a, F>(pairs: &[PatchPair], budget: &RepairBudget, mode: LocalizationMode, mut source_for: F) -> EvalSummary
where
    F: FnMut(&PatchPair) -> Box<dyn ScriptSource + 'a>,
{
    let outcomes = pairs
        .iter()
        .map(|p| {
            let mut o = BugOutcome {
                id: p.id.clone(),
                repaired: false,
                exact: false,
                validated: 0,
                instantiation: None,
                error: None,
            };
            let loc = match mode {
                LocalizationMode::Ochiai => Localization::Ochiai,
                LocalizationMode::Perfect => match true_faulty_statement(&p.buggy, &p.fixed) {
                    Some(s) => Localization::Perfect(s),
                    None => {
                        o.error = Some("not a single-statement fix".into());
                        return o;
                    }
                },
            };
            let source = source_for(p);
            match repair(source.as_ref(), &p.buggy, &p.tests, budget, loc) {
                Ok(r) => {
                    o.validated = r.validated;
                    if let Some(patch) = r.plausible {
                        o.repaired = true;
                        o.exact = patch.program.is_some_and(|a| a.structural_equal(&p.fixed));
                        o.instantiation = patch.candidate.instantiation;
                    }
                }
                Err(e) => o.error = Some(e.to_string()),
            }
            o
        })
        .collect();
    EvalSummary::from_outcomes(outcomes)
}

/// Model-driven evaluation.
pub fn evaluate(source: &dyn ScriptSource, pairs: &[PatchPair], budget: &RepairBudget, mode: LocalizationMode) -> EvalSummary {
    struct Borrowed<'s>(&'s dyn ScriptSource);
    impl ScriptSource for Borrowed<'_> {
        fn edit_grammar(&self) -> &EditGrammar {
            self.0.edit_grammar()
        }
        fn scripts(
            &self,
            ctx: &editrepair_core::edit::EditContext,
            budget: &RepairBudget,
        ) -> Result<Vec<crate::repair::ScoredScript>, crate::repair::RepairError> {
            self.0.scripts(ctx, budget)
        }
    }
    evaluate_with(pairs, budget, mode, |_| Box::new(Borrowed(source)))
}

/// Baseline that replays each pair's own oracle script.
pub fn evaluate_oracle(eg: &EditGrammar, pairs: &[PatchPair], budget: &RepairBudget, mode: LocalizationMode) -> EvalSummary {
    evaluate_with(pairs, budget, mode, |p| {
        Box::new(OracleReplay {
            eg: eg.clone(),
            fixed: p.fixed.clone(),
        })
    })
}
