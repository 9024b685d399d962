//! Problem context: one layout, one evaluation set, one consensus registry,
//! and the constraints accumulated while a method trace is built.

use std::collections::BTreeMap;

use crate::consensus::{
    exact_scalar_consensus_constraints, spectral_constraints, ConsensusRegistry, MatrixClassId, SpectralRange,
};
use crate::constraint::{Constraint, Lmi, Relation};
use crate::error::{PepError, Result};
use crate::function_class::{interpolation_constraints, EvalPoint, Evaluation, EvaluationSet, FunctionClass};
use crate::gram::{BlockTag, GramLayout, PointExpr, ScalarExpr};

/// How consensus steps are constrained when the problem is closed.
#[derive(Debug, Clone, PartialEq)]
pub enum ConsensusModel {
    /// Every matrix ranges over the symmetric matrices with spectrum in the range.
    Spectral(SpectralRange),
    /// Every matrix acts as the same known scalar.
    ExactScalarAll(f64),
    /// One known scalar per matrix.
    ExactScalar(BTreeMap<MatrixClassId, f64>),
}

#[derive(Debug, Default)]
pub struct PepBuilder {
    layout: GramLayout,
    evals: EvaluationSet,
    consensus: ConsensusRegistry,
    equalities: Vec<Constraint>,
    inequalities: Vec<Constraint>,
    lmis: Vec<Lmi>,
    objective: Option<ScalarExpr>,
}

impl PepBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn layout(&self) -> &GramLayout {
        &self.layout
    }

    pub fn evaluations(&self) -> &EvaluationSet {
        &self.evals
    }

    pub fn consensus(&self) -> &ConsensusRegistry {
        &self.consensus
    }

    pub fn new_leaf(&mut self, block: BlockTag, label: impl Into<String>) -> Result<PointExpr> {
        self.layout.new_leaf(block, label)
    }

    pub fn add_evaluation(&mut self, point: EvalPoint, label: impl Into<String>) -> Result<Evaluation> {
        self.evals.add_evaluation(&mut self.layout, point, label)
    }

    pub fn add_optimum(&mut self) -> Result<Evaluation> {
        self.evals.add_optimum(&mut self.layout)
    }

    pub fn star(&self) -> Result<&Evaluation> {
        self.evals.star().ok_or(PepError::MissingOptimum)
    }

    pub fn new_matrix(&mut self) -> MatrixClassId {
        self.consensus.new_class()
    }

    pub fn consensus_step(&mut self, p: &PointExpr, id: MatrixClassId, label: impl Into<String>) -> Result<PointExpr> {
        self.consensus.consensus_step(&mut self.layout, p, id, label)
    }

    pub fn add_constraint(&mut self, c: Constraint) {
        match c.relation {
            Relation::EqZero => self.equalities.push(c),
            Relation::LeZero => self.inequalities.push(c),
        }
    }

    pub fn add_lmi(&mut self, lmi: Lmi) {
        self.lmis.push(lmi);
    }

    /// Quantity to maximize.
    pub fn set_objective(&mut self, e: ScalarExpr) {
        self.objective = Some(e);
    }

    /// Emit interpolation and consensus constraints and freeze the layout.
    ///
    /// With `gauge_optimum`, the optimal value is pinned to zero; objectives
    /// built from value gaps are unaffected.
    pub fn finish(mut self, class: FunctionClass, model: &ConsensusModel, gauge_optimum: bool) -> Result<PepProblem> {
        let objective = self
            .objective
            .take()
            .ok_or_else(|| PepError::InvalidParameter("no objective set".into()))?;
        for c in interpolation_constraints(&self.evals, class)? {
            self.add_constraint(c);
        }
        if gauge_optimum {
            let star = self.star()?;
            let c = Constraint::eq_zero("gauge[f*=0]", ScalarExpr::fval(star.fval));
            self.add_constraint(c);
        }
        match model {
            ConsensusModel::Spectral(range) => {
                let cs = spectral_constraints(&self.consensus, *range)?;
                self.equalities.extend(cs.equalities);
                self.inequalities.extend(cs.inequalities);
                self.lmis.extend(cs.lmis);
            }
            ConsensusModel::ExactScalarAll(v) => {
                let values = self.consensus.ids().map(|id| (id, *v)).collect();
                let cs = exact_scalar_consensus_constraints(&self.consensus, &self.layout, &values)?;
                self.equalities.extend(cs);
            }
            ConsensusModel::ExactScalar(values) => {
                let cs = exact_scalar_consensus_constraints(&self.consensus, &self.layout, values)?;
                self.equalities.extend(cs);
            }
        }
        self.layout.freeze();
        let problem = PepProblem {
            layout: self.layout,
            evaluations: self.evals,
            consensus: self.consensus,
            equalities: self.equalities,
            inequalities: self.inequalities,
            lmis: self.lmis,
            objective,
        };
        debug_assert!(problem.references_only_layout());
        Ok(problem)
    }
}

/// An assembled problem: maximize `objective` over PSD Gram blocks and
/// free function values subject to the constraints.
#[derive(Debug, Clone)]
pub struct PepProblem {
    pub layout: GramLayout,
    pub evaluations: EvaluationSet,
    pub consensus: ConsensusRegistry,
    pub equalities: Vec<Constraint>,
    pub inequalities: Vec<Constraint>,
    pub lmis: Vec<Lmi>,
    pub objective: ScalarExpr,
}

impl PepProblem {
    pub fn references_only_layout(&self) -> bool {
        let l = &self.layout;
        self.equalities.iter().chain(&self.inequalities).all(|c| l.covers(&c.expr))
            && l.covers(&self.objective)
            && self.lmis.iter().all(|m| {
                (0..m.matrix.dim()).all(|i| (0..m.matrix.dim()).all(|j| l.covers(m.matrix.get(i, j))))
            })
    }
}
