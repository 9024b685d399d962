//! Function classes and their interpolation conditions.
//!
//! Constraints are stated on the lifted function (the objective seen in the
//! consensus/disagreement coordinates). That function belongs to the same
//! class, with the same constants, as each local function, so the agent
//! count never enters.

use serde::{Deserialize, Serialize};

use crate::constraint::Constraint;
use crate::error::{PepError, Result};
use crate::gram::{inner, norm_sq, BlockTag, FValId, GramLayout, PointExpr, ScalarExpr};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionClass {
    /// Convex with every subgradient norm at most `r`.
    BoundedSubgradientConvex { r: f64 },
    /// `mu`-strongly convex and `l`-smooth, `0 <= mu < l`.
    SmoothStronglyConvex { mu: f64, l: f64 },
}

impl FunctionClass {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FunctionClass::BoundedSubgradientConvex { r } => {
                if !(r.is_finite() && r > 0.0) {
                    return Err(PepError::InvalidClass(format!("R must be positive and finite, got {r}")));
                }
            }
            FunctionClass::SmoothStronglyConvex { mu, l } => {
                if !(l.is_finite() && l > 0.0) {
                    return Err(PepError::InvalidClass(format!("L must be positive and finite, got {l}")));
                }
                if !(mu >= 0.0 && mu <= l) {
                    return Err(PepError::InvalidClass(format!("need 0 <= mu <= L, got mu={mu}, L={l}")));
                }
                if mu == l {
                    return Err(PepError::InvalidClass(
                        "mu = L describes quadratics only; use mu < L".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EvalId(pub usize);

/// One oracle call: a point, the (sub)gradient returned there and the value.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub id: EvalId,
    pub label: String,
    pub point: PointExpr,
    pub grad: PointExpr,
    pub fval: FValId,
}

/// Where to evaluate.
#[derive(Debug, Clone)]
pub enum EvalPoint {
    /// Introduce new leaves for the point in both blocks.
    Fresh,
    At(PointExpr),
}

#[derive(Debug, Clone, Default)]
pub struct EvaluationSet {
    evals: Vec<Evaluation>,
    star: Option<EvalId>,
}

impl EvaluationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_evaluation(
        &mut self,
        layout: &mut GramLayout,
        point: EvalPoint,
        label: impl Into<String>,
    ) -> Result<Evaluation> {
        let label = label.into();
        if self.evals.iter().any(|e| e.label == label) {
            return Err(PepError::DuplicateLabel(label));
        }
        let point = match point {
            EvalPoint::Fresh => {
                let p = layout.new_leaf(BlockTag::Parallel, format!("x∥[{label}]"))?;
                let q = layout.new_leaf(BlockTag::Perp, format!("x⊥[{label}]"))?;
                &p + &q
            }
            EvalPoint::At(p) => p,
        };
        let gp = layout.new_leaf(BlockTag::Parallel, format!("g∥[{label}]"))?;
        let gq = layout.new_leaf(BlockTag::Perp, format!("g⊥[{label}]"))?;
        let fval = layout.new_fval(format!("f[{label}]"))?;
        let eval = Evaluation {
            id: EvalId(self.evals.len()),
            label,
            point,
            grad: &gp + &gq,
            fval,
        };
        self.evals.push(eval.clone());
        Ok(eval)
    }

    /// Declare the minimizer of the constrained problem: its point lies in
    /// the consensus subspace and its gradient has no consensus component.
    pub fn add_optimum(&mut self, layout: &mut GramLayout) -> Result<Evaluation> {
        if self.star.is_some() {
            return Err(PepError::DuplicateOptimum);
        }
        let label = "*".to_string();
        if self.evals.iter().any(|e| e.label == label) {
            return Err(PepError::DuplicateLabel(label));
        }
        let point = layout.new_leaf(BlockTag::Parallel, "x∥[*]")?;
        let grad = layout.new_leaf(BlockTag::Perp, "g⊥[*]")?;
        let fval = layout.new_fval("f[*]")?;
        let eval = Evaluation {
            id: EvalId(self.evals.len()),
            label,
            point,
            grad,
            fval,
        };
        self.star = Some(eval.id);
        self.evals.push(eval.clone());
        Ok(eval)
    }

    pub fn star(&self) -> Option<&Evaluation> {
        self.star.map(|id| &self.evals[id.0])
    }

    pub fn get(&self, id: EvalId) -> &Evaluation {
        &self.evals[id.0]
    }

    pub fn by_label(&self, label: &str) -> Option<&Evaluation> {
        self.evals.iter().find(|e| e.label == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Evaluation> {
        self.evals.iter()
    }

    pub fn len(&self) -> usize {
        self.evals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evals.is_empty()
    }

    /// `f_a - f_b`
    pub fn fval_gap(&self, a: &Evaluation, b: &Evaluation) -> ScalarExpr {
        let mut e = ScalarExpr::fval(a.fval);
        e.add_fval(b.fval, -1.0);
        e
    }
}

/// Interpolation conditions for `class` over every evaluation in `set`.
///
/// All constraints are returned in `expr <= 0` form: `n(n-1)` pairwise
/// inequalities, plus `n` gradient-norm caps for the bounded-subgradient
/// class.
pub fn interpolation_constraints(set: &EvaluationSet, class: FunctionClass) -> Result<Vec<Constraint>> {
    class.validate()?;
    if set.is_empty() {
        return Err(PepError::EmptyEvaluationSet);
    }
    let evals: Vec<&Evaluation> = set.iter().collect();
    let mut out = Vec::with_capacity(evals.len() * evals.len());
    for ei in &evals {
        for ej in &evals {
            if ei.id == ej.id {
                continue;
            }
            let expr = pair_condition(ei, ej, class);
            out.push(Constraint::le_zero(format!("interp[{},{}]", ei.label, ej.label), expr));
        }
    }
    if let FunctionClass::BoundedSubgradientConvex { r } = class {
        for e in &evals {
            let mut expr = norm_sq(&e.grad);
            expr.add_constant(-r * r);
            out.push(Constraint::le_zero(format!("gradnorm[{}]", e.label), expr));
        }
    }
    Ok(out)
}

/// Condition ensuring `f_i` lies above the model built at `j`.
fn pair_condition(ei: &Evaluation, ej: &Evaluation, class: FunctionClass) -> ScalarExpr {
    let dx = &ei.point - &ej.point;
    let mut expr = ScalarExpr::fval(ej.fval);
    expr.add_fval(ei.fval, -1.0);
    expr.add_scaled(1.0, &inner(&ej.grad, &dx));
    if let FunctionClass::SmoothStronglyConvex { mu, l } = class {
        let dg = &ei.grad - &ej.grad;
        let c = 1.0 / (2.0 * (1.0 - mu / l));
        expr.add_scaled(c / l, &norm_sq(&dg));
        expr.add_scaled(c * mu, &norm_sq(&dx));
        // <g_j - g_i, x_j - x_i> = <dg, dx>
        expr.add_scaled(-c * 2.0 * mu / l, &inner(&dg, &dx));
    }
    expr
}
