use nalgebra::{DMatrix, SymmetricEigen};

use crate::gram::{MatrixExpr, ScalarExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `expr == 0`
    EqZero,
    /// `expr <= 0`
    LeZero,
}

/// A labeled scalar constraint, normalized against zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub expr: ScalarExpr,
    pub relation: Relation,
}

impl Constraint {
    pub fn le_zero(label: impl Into<String>, expr: ScalarExpr) -> Self {
        Constraint {
            label: label.into(),
            expr,
            relation: Relation::LeZero,
        }
    }

    pub fn eq_zero(label: impl Into<String>, expr: ScalarExpr) -> Self {
        Constraint {
            label: label.into(),
            expr,
            relation: Relation::EqZero,
        }
    }

    /// Amount by which explicit data violates the constraint (0 when satisfied).
    pub fn violation(&self, g_par: &DMatrix<f64>, g_perp: &DMatrix<f64>, fvals: &[f64]) -> f64 {
        let v = self.expr.evaluate(g_par, g_perp, fvals);
        match self.relation {
            Relation::EqZero => v.abs(),
            Relation::LeZero => v.max(0.0),
        }
    }
}

/// `matrix ⪰ 0`
#[derive(Debug, Clone, PartialEq)]
pub struct Lmi {
    pub label: String,
    pub matrix: MatrixExpr,
}

impl Lmi {
    pub fn psd(label: impl Into<String>, matrix: MatrixExpr) -> Self {
        Lmi {
            label: label.into(),
            matrix,
        }
    }

    /// Negative part of the smallest eigenvalue under explicit data.
    pub fn violation(&self, g_par: &DMatrix<f64>, g_perp: &DMatrix<f64>, fvals: &[f64]) -> f64 {
        let m = self.matrix.evaluate(g_par, g_perp, fvals);
        let m = (&m + m.transpose()) * 0.5;
        let min = SymmetricEigen::new(m).eigenvalues.min();
        (-min).max(0.0)
    }
}
