//! Spectrum-based fault localization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use editrepair_core::grammar::NodeId;
use editrepair_core::minilang::CoverageRecord;

/// `ef / sqrt((ef + nf) * (ef + ep))`, or 0 when the denominator is 0.
pub fn ochiai_score(ef: usize, nf: usize, ep: usize) -> f64 {
    let den = ((ef + nf) * (ef + ep)) as f64;
    if den == 0.0 {
        0.0
    } else {
        ef as f64 / den.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suspicious {
    pub stmt: NodeId,
    pub score: f64,
    /// Failing tests executing the statement.
    pub ef: usize,
    /// Passing tests executing the statement.
    pub ep: usize,
    /// Failing tests not executing it.
    pub nf: usize,
}

/// Executed statements by descending score, ties by ascending id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuspiciousnessRanking {
    pub entries: Vec<Suspicious>,
}

impl SuspiciousnessRanking {
    pub fn top(&self, n: usize) -> impl Iterator<Item = &Suspicious> {
        self.entries.iter().take(n)
    }
}

/// Ranks every statement covered by at least one test. A test counts as
/// failing unless its verdict is a pass.
pub fn ochiai(records: &[CoverageRecord]) -> SuspiciousnessRanking {
    let failing = records.iter().filter(|r| !r.passed()).count();
    let mut counts: BTreeMap<NodeId, (usize, usize)> = BTreeMap::new();
    for r in records {
        for s in &r.covered {
            let c = counts.entry(*s).or_default();
            if r.passed() {
                c.1 += 1;
            } else {
                c.0 += 1;
            }
        }
    }
    let mut entries: Vec<Suspicious> = counts
        .into_iter()
        .map(|(stmt, (ef, ep))| Suspicious {
            stmt,
            score: ochiai_score(ef, failing - ef, ep),
            ef,
            ep,
            nf: failing - ef,
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.stmt.cmp(&b.stmt)));
    SuspiciousnessRanking { entries }
}
