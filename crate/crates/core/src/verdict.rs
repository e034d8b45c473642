//! Plateau / growth classification of refinement traces.

use serde::{Deserialize, Serialize};

/// Relative change below which the last refinement step counts as a plateau.
pub const PLATEAU_TOL: f64 = 0.10;
/// Per-step growth factor that counts as divergence when sustained twice.
pub const GROWTH_FACTOR: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Divergent,
}

impl Verdict {
    /// Classifies a sequence of running estimates of a supremum.
    ///
    /// `Fail` when each of the last two steps grew by at least
    /// [`GROWTH_FACTOR`], `Pass` when the last step changed by less than
    /// [`PLATEAU_TOL`], `Inconclusive` otherwise.
    pub fn from_trace(trace: &[f64]) -> Verdict {
        if trace.iter().any(|v| !v.is_finite()) {
            return Verdict::Fail;
        }
        let n = trace.len();
        if n >= 3 {
            let g1 = trace[n - 2] / trace[n - 3];
            let g2 = trace[n - 1] / trace[n - 2];
            if g1 >= GROWTH_FACTOR && g2 >= GROWTH_FACTOR {
                return Verdict::Fail;
            }
        }
        if n >= 2 {
            let prev = trace[n - 2];
            let last = trace[n - 1];
            let change = if prev == 0.0 {
                if last == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (last / prev - 1.0).abs()
            };
            if change < PLATEAU_TOL {
                return Verdict::Pass;
            }
        }
        Verdict::Inconclusive
    }

    /// Same growth rule, but reports divergence as [`Verdict::Divergent`].
    pub fn divergence(trace: &[f64]) -> Verdict {
        match Self::from_trace(trace) {
            Verdict::Fail => Verdict::Divergent,
            v => v,
        }
    }

    /// Worst of several verdicts: any FAIL, then INCONCLUSIVE, else PASS.
    /// DIVERGENT is informational and does not affect the combination.
    pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Pass;
        for v in verdicts {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                _ => {}
            }
        }
        out
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass | Verdict::Divergent => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Divergent => "DIVERGENT",
        }
    }
}
