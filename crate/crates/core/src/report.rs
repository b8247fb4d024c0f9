//! Structured outcome of a single identity check.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Detailed mismatches kept per report; the total is always counted.
pub const MAX_DETAILED_MISMATCHES: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub location: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub params: BTreeMap<String, String>,
    pub cells: u64,
    pub mismatches: Vec<Mismatch>,
    pub mismatch_total: u64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub millis: u64,
}

impl Report {
    pub fn new(id: impl Into<String>) -> Self {
        Report {
            id: id.into(),
            params: BTreeMap::new(),
            cells: 0,
            mismatches: Vec::new(),
            mismatch_total: 0,
            pass: true,
            notes: Vec::new(),
            millis: 0,
        }
    }

    pub fn param(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set_param(&mut self, key: &str, value: impl fmt::Display) {
        self.params.insert(key.to_string(), value.to_string());
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Records one compared cell.
    pub fn check<T: PartialEq + fmt::Display>(&mut self, location: impl FnOnce() -> String, lhs: &T, rhs: &T) -> bool {
        self.cells += 1;
        if lhs == rhs {
            return true;
        }
        self.record_mismatch(location(), lhs.to_string(), rhs.to_string());
        false
    }

    pub fn record_mismatch(&mut self, location: String, lhs: String, rhs: String) {
        self.mismatch_total += 1;
        self.pass = false;
        if self.mismatches.len() < MAX_DETAILED_MISMATCHES {
            self.mismatches.push(Mismatch { location, lhs, rhs });
        }
    }

    /// Folds another report's cells and mismatches into this one.
    pub fn absorb(&mut self, other: Report) {
        self.cells += other.cells;
        self.mismatch_total += other.mismatch_total;
        self.pass &= other.pass;
        for m in other.mismatches {
            if self.mismatches.len() < MAX_DETAILED_MISMATCHES {
                self.mismatches.push(m);
            }
        }
        self.notes.extend(other.notes);
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(
            f,
            "{} {} [{}] cells={} mismatches={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            params.join(" "),
            self.cells,
            self.mismatch_total
        )?;
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        for m in &self.mismatches {
            writeln!(f, "  at {}\n    lhs = {}\n    rhs = {}", m.location, m.lhs, m.rhs)?;
        }
        if self.mismatch_total as usize > self.mismatches.len() {
            writeln!(
                f,
                "  ... {} further mismatches not shown",
                self.mismatch_total as usize - self.mismatches.len()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_tracks_mismatches() {
        let mut r = Report::new("x");
        assert!(r.check(|| "a".into(), &1, &1));
        assert!(r.pass);
        assert!(!r.check(|| "b".into(), &1, &2));
        assert!(!r.pass);
        assert_eq!(r.cells, 2);
        assert_eq!(r.mismatches.len(), 1);
    }

    #[test]
    fn detail_is_capped() {
        let mut r = Report::new("x");
        for i in 0..(MAX_DETAILED_MISMATCHES + 7) {
            r.check(|| i.to_string(), &0, &1);
        }
        assert_eq!(r.mismatches.len(), MAX_DETAILED_MISMATCHES);
        assert_eq!(r.mismatch_total as usize, MAX_DETAILED_MISMATCHES + 7);
    }
}
