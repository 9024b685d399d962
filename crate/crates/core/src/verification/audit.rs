use std::sync::Mutex;

use crate::error::Result;
use crate::reconstruct::{check_form, FormCheck, DEFAULT_CLIP_TOL};
use crate::sdp::SdpStandardForm;
use crate::solver::{RawSolution, SolverAdapter, SolverSettings};

/// Wraps an adapter and re-checks every usable solution it returns on
/// factored Gram blocks.
pub struct AuditingAdapter<A> {
    pub inner: A,
    pub clip: f64,
    checks: Mutex<Vec<FormCheck>>,
}

impl<A: SolverAdapter> AuditingAdapter<A> {
    pub fn new(inner: A) -> Self {
        AuditingAdapter {
            inner,
            clip: DEFAULT_CLIP_TOL,
            checks: Mutex::new(Vec::new()),
        }
    }

    pub fn checks(&self) -> Vec<FormCheck> {
        self.checks.lock().expect("audit lock").clone()
    }

    /// Number of audited solves and the ones failing `tol`.
    pub fn summary(&self, tol: f64) -> (usize, Vec<FormCheck>) {
        let all = self.checks();
        let bad = all.iter().filter(|c| !c.passes(tol)).cloned().collect();
        (all.len(), bad)
    }
}

impl<A: SolverAdapter> SolverAdapter for AuditingAdapter<A> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn settings(&self) -> SolverSettings {
        self.inner.settings()
    }

    fn solve_form(&self, form: &SdpStandardForm) -> Result<RawSolution> {
        let raw = self.inner.solve_form(form)?;
        if raw.status.is_usable() {
            let c = check_form(form, &raw.z, self.clip);
            self.checks.lock().expect("audit lock").push(c);
        }
        Ok(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::SpectralRange;
    use crate::function_class::FunctionClass;
    use crate::methods::{Method, MethodParams};
    use crate::pep::{CriterionKind, InitialCondition, Scenario};
    use crate::problem::ConsensusModel;
    use crate::solver::{solve, ClarabelAdapter};

    #[test]
    fn records_every_usable_solve() {
        let audit = AuditingAdapter::new(ClarabelAdapter::default());
        for k in 1..=3 {
            let b = Scenario::new(
                Method::Extra,
                MethodParams::new(k, 0.4),
                FunctionClass::BoundedSubgradientConvex { r: 1.0 },
                InitialCondition::ConsensusStart { d: 1.0 },
                CriterionKind::FvalGapAveraged,
                ConsensusModel::Spectral(SpectralRange::symmetric(0.7).unwrap()),
            )
            .build()
            .unwrap();
            solve(&audit, &b.problem).unwrap();
        }
        let (n, bad) = audit.summary(1e-6);
        assert_eq!(n, 3);
        assert!(bad.is_empty(), "{bad:?}");
    }
}
