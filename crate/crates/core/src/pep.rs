//! Initial conditions, performance criteria and end-to-end scenario
//! assembly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constraint::Constraint;
use crate::error::{PepError, Result};
use crate::function_class::{EvalPoint, FunctionClass};
use crate::gram::{norm_sq, BlockTag, PointExpr, ScalarExpr};
use crate::methods::{averaged_iterate, Method, MethodParams, MethodTrace};
use crate::problem::{ConsensusModel, PepBuilder, PepProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// All agents start from the same point, within `d` of the optimum.
    ConsensusStart { d: f64 },
    /// Mean squared distance of the agents' starting points to the optimum at most `d^2`.
    MeanSquaredDistance { d: f64 },
}

impl InitialCondition {
    pub fn radius(&self) -> f64 {
        match *self {
            InitialCondition::ConsensusStart { d } | InitialCondition::MeanSquaredDistance { d } => d,
        }
    }

    pub fn with_radius(self, d: f64) -> Self {
        match self {
            InitialCondition::ConsensusStart { .. } => InitialCondition::ConsensusStart { d },
            InitialCondition::MeanSquaredDistance { .. } => InitialCondition::MeanSquaredDistance { d },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.radius();
        if d.is_finite() && d > 0.0 {
            Ok(())
        } else {
            Err(PepError::InvalidParameter(format!("initial distance must be positive, got {d}")))
        }
    }

    /// Create the starting point: a consensus leaf only, or fresh leaves in
    /// both blocks.
    pub fn initial_point(&self, pep: &mut PepBuilder) -> Result<PointExpr> {
        match self {
            InitialCondition::ConsensusStart { .. } => pep.new_leaf(BlockTag::Parallel, "x∥[0]"),
            InitialCondition::MeanSquaredDistance { .. } => {
                let a = pep.new_leaf(BlockTag::Parallel, "x∥[0]")?;
                let b = pep.new_leaf(BlockTag::Perp, "x⊥[0]")?;
                Ok(&a + &b)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::ConsensusStart { .. } => "consensus",
            InitialCondition::MeanSquaredDistance { .. } => "msd",
        }
    }
}

/// Without a bound on how far the local gradients disagree at the start,
/// worst cases on smooth classes are unbounded: adding `<h, x>` with `h`
/// orthogonal to consensus to every local function changes no
/// interpolation condition but shifts the iterates arbitrarily. This caps
/// `‖g⊥(x0)‖²`, i.e. `(1/N) Σ ‖∇f_i(x0_i) - mean_j ∇f_j(x0_j)‖²`, at `g^2`.
pub fn apply_gradient_spread(pep: &mut PepBuilder, x0: &PointExpr, g: f64) -> Result<()> {
    if !(g.is_finite() && g >= 0.0) {
        return Err(PepError::InvalidParameter(format!("gradient spread must be nonnegative, got {g}")));
    }
    let existing = pep.evaluations().iter().find(|e| &e.point == x0).cloned();
    let e = match existing {
        Some(e) => e,
        None => pep.add_evaluation(EvalPoint::At(x0.clone()), "x0")?,
    };
    let mut c = norm_sq(&e.grad.perp_part());
    c.add_constant(-g * g);
    pep.add_constraint(Constraint::le_zero("init-grad", c));
    Ok(())
}

/// `‖x0 - x*‖² - D² <= 0`. The optimum has no disagreement component, so
/// for a consensus start this only involves the consensus block.
pub fn apply_initial_condition(pep: &mut PepBuilder, x0: &PointExpr, ic: InitialCondition) -> Result<()> {
    ic.validate()?;
    if matches!(ic, InitialCondition::ConsensusStart { .. }) && !x0.is_block_zero(BlockTag::Perp) {
        return Err(PepError::InvalidParameter(
            "consensus start requires an initial point without disagreement".into(),
        ));
    }
    let star = pep.star()?.point.clone();
    let mut e = norm_sq(&(x0 - &star));
    e.add_constant(-ic.radius() * ic.radius());
    pep.add_constraint(Constraint::le_zero("init", e));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionKind {
    /// `f(xbar_av) - f*` at the running average of all iterates.
    #[serde(rename = "fval-gap-avg")]
    FvalGapAveraged,
    /// Mean squared distance of the last iterates to the optimum.
    #[serde(rename = "dist-k")]
    DistanceAtK,
}

impl CriterionKind {
    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::FvalGapAveraged => "fval-gap-avg",
            CriterionKind::DistanceAtK => "dist-k",
        }
    }
}

impl FromStr for CriterionKind {
    type Err = PepError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fval-gap-avg" | "fval-gap-averaged" => Ok(CriterionKind::FvalGapAveraged),
            "dist-k" | "distance-at-k" => Ok(CriterionKind::DistanceAtK),
            other => Err(PepError::InvalidParameter(format!("unknown criterion `{other}`"))),
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerformanceCriterion {
    FValGapAtAveragedIterate,
    MeanSquaredDistanceAtK,
    /// Any expression over the problem's leaves and values.
    Custom(ScalarExpr),
}

impl From<CriterionKind> for PerformanceCriterion {
    fn from(k: CriterionKind) -> Self {
        match k {
            CriterionKind::FvalGapAveraged => PerformanceCriterion::FValGapAtAveragedIterate,
            CriterionKind::DistanceAtK => PerformanceCriterion::MeanSquaredDistanceAtK,
        }
    }
}

/// Set the objective for `crit` and return it.
pub fn apply_criterion(pep: &mut PepBuilder, trace: &MethodTrace, crit: &PerformanceCriterion) -> Result<ScalarExpr> {
    let objective = match crit {
        PerformanceCriterion::FValGapAtAveragedIterate => {
            let avg = averaged_iterate(trace)?;
            let e = pep.add_evaluation(EvalPoint::At(avg), "xav")?;
            let star = pep.star()?;
            pep.evaluations().fval_gap(&e, star)
        }
        PerformanceCriterion::MeanSquaredDistanceAtK => {
            let last = trace
                .last_iterate()
                .ok_or_else(|| PepError::CriterionMismatch("trace has no iterates".into()))?;
            norm_sq(&(last - &pep.star()?.point))
        }
        PerformanceCriterion::Custom(e) => e.clone(),
    };
    pep.set_objective(objective.clone());
    Ok(objective)
}

/// Smooth classes need a gradient spread bound; it defaults to the initial
/// distance so that bounds keep scaling as `D²`. Bounded-subgradient
/// classes already control every gradient.
pub fn default_gradient_spread(class: FunctionClass, init: InitialCondition) -> Option<f64> {
    match class {
        FunctionClass::SmoothStronglyConvex { .. } => Some(init.radius()),
        FunctionClass::BoundedSubgradientConvex { .. } => None,
    }
}

/// Everything needed to assemble one performance estimation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub method: Method,
    pub params: MethodParams,
    pub class: FunctionClass,
    pub init: InitialCondition,
    pub criterion: CriterionKind,
    pub consensus: ConsensusModel,
    /// Bound on the initial gradient disagreement, see [`apply_gradient_spread`].
    pub gradient_spread: Option<f64>,
    pub gauge_optimum: bool,
}

/// A problem together with the trace it was built from.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub problem: PepProblem,
    pub trace: MethodTrace,
}

impl Scenario {
    pub fn new(
        method: Method,
        params: MethodParams,
        class: FunctionClass,
        init: InitialCondition,
        criterion: CriterionKind,
        consensus: ConsensusModel,
    ) -> Self {
        Scenario {
            method,
            params,
            class,
            init,
            criterion,
            consensus,
            gradient_spread: default_gradient_spread(class, init),
            gauge_optimum: true,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        let mut s = self.clone();
        s.params.alpha = alpha;
        s
    }

    pub fn with_consensus(&self, consensus: ConsensusModel) -> Self {
        let mut s = self.clone();
        s.consensus = consensus;
        s
    }

    pub fn build(&self) -> Result<BuiltProblem> {
        self.class.validate()?;
        self.init.validate()?;
        let mut pep = PepBuilder::new();
        pep.add_optimum()?;
        let x0 = self.init.initial_point(&mut pep)?;
        apply_initial_condition(&mut pep, &x0, self.init)?;
        let trace = self.method.build(&mut pep, x0.clone(), &self.params)?;
        if let Some(g) = self.gradient_spread {
            apply_gradient_spread(&mut pep, &x0, g)?;
        }
        apply_criterion(&mut pep, &trace, &self.criterion.into())?;
        let problem = pep.finish(self.class, &self.consensus, self.gauge_optimum)?;
        Ok(BuiltProblem { problem, trace })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::SpectralRange;
    use crate::gram::inner;

    fn scenario(method: Method, k: usize, crit: CriterionKind) -> Scenario {
        Scenario::new(
            method,
            MethodParams::new(k, 0.3),
            FunctionClass::BoundedSubgradientConvex { r: 1.0 },
            InitialCondition::ConsensusStart { d: 1.0 },
            crit,
            ConsensusModel::Spectral(SpectralRange::symmetric(0.5).unwrap()),
        )
    }

    #[test]
    fn consensus_start_has_no_disagreement() {
        let mut pep = PepBuilder::new();
        pep.add_optimum().unwrap();
        let x0 = InitialCondition::ConsensusStart { d: 1.0 }.initial_point(&mut pep).unwrap();
        let q = pep.new_leaf(BlockTag::Perp, "q").unwrap();
        assert!(inner(&x0, &q).is_zero());
    }

    #[test]
    fn msd_initial_condition_is_one_inequality() {
        let mut pep = PepBuilder::new();
        pep.add_optimum().unwrap();
        let ic = InitialCondition::MeanSquaredDistance { d: 1.0 };
        let x0 = ic.initial_point(&mut pep).unwrap();
        apply_initial_condition(&mut pep, &x0, ic).unwrap();
        let trace = Method::Dgd.build(&mut pep, x0, &MethodParams::new(0, 0.1)).unwrap();
        apply_criterion(&mut pep, &trace, &PerformanceCriterion::MeanSquaredDistanceAtK).unwrap();
        let p = pep
            .finish(
                FunctionClass::SmoothStronglyConvex { mu: 0.1, l: 1.0 },
                &ConsensusModel::Spectral(SpectralRange::symmetric(0.5).unwrap()),
                true,
            )
            .unwrap();
        let init: Vec<_> = p.inequalities.iter().filter(|c| c.label == "init").collect();
        assert_eq!(init.len(), 1);
        assert_eq!(init[0].expr.constant_term(), -1.0);
        // both blocks appear
        let blocks: std::collections::BTreeSet<_> = init[0].expr.gram_terms().keys().map(|k| k.block).collect();
        assert_eq!(blocks.len(), 2);
    }

    #[test]
    fn dgd_layout_sizes() {
        let s = scenario(Method::Dgd, 10, CriterionKind::FvalGapAveraged);
        let b = s.build().unwrap();
        // x0, x*, g0..g9, g_av
        assert_eq!(b.problem.layout.block_size(BlockTag::Parallel), 13);
        let mut s = s;
        s.params.evaluate_last = true;
        let b = s.build().unwrap();
        assert_eq!(b.problem.layout.block_size(BlockTag::Parallel), 14);
        assert_eq!(b.problem.lmis.iter().map(|l| l.matrix.dim()).max(), Some(10));
    }

    #[test]
    fn averaged_criterion_adds_evaluation() {
        let b = scenario(Method::Dgd, 3, CriterionKind::FvalGapAveraged).build().unwrap();
        let xav = b.problem.evaluations.by_label("xav").unwrap();
        assert!(xav.point.is_block_zero(BlockTag::Perp));
        let terms = b.problem.objective.fval_terms();
        assert_eq!(terms.get(&xav.fval), Some(&1.0));
        assert_eq!(terms.len(), 2);
    }

    #[test]
    fn rebuild_is_identical() {
        let s = scenario(Method::Diging, 4, CriterionKind::DistanceAtK);
        let a = s.build().unwrap().problem;
        let b = s.build().unwrap().problem;
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.inequalities, b.inequalities);
        assert_eq!(a.lmis, b.lmis);
        assert_eq!(
            serde_json::to_string(&a.layout).unwrap(),
            serde_json::to_string(&b.layout).unwrap()
        );
    }

    #[test]
    fn criterion_names_round_trip() {
        for c in [CriterionKind::FvalGapAveraged, CriterionKind::DistanceAtK] {
            assert_eq!(c.name().parse::<CriterionKind>().unwrap(), c);
        }
    }
}
