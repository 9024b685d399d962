//! Explicit worst-case data from solved Gram blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{PepError, Result};
use crate::gram::BlockTag;
use crate::problem::PepProblem;
use crate::sdp::{svec_index, SdpStandardForm};
use crate::solver::Solution;

/// Default eigenvalue clipping threshold.
pub const DEFAULT_CLIP_TOL: f64 = 1e-7;

/// Coordinates of one evaluation in the consensus and disagreement spaces.
#[derive(Debug, Clone, Serialize)]
pub struct ExplicitEvaluation {
    pub label: String,
    pub x_par: Vec<f64>,
    pub x_perp: Vec<f64>,
    pub g_par: Vec<f64>,
    pub g_perp: Vec<f64>,
    pub f: f64,
}

impl ExplicitEvaluation {
    /// Point in the concatenated space `[par; perp]`.
    pub fn x(&self) -> DVector<f64> {
        DVector::from_iterator(self.x_par.len() + self.x_perp.len(), self.x_par.iter().chain(&self.x_perp).copied())
    }

    pub fn g(&self) -> DVector<f64> {
        DVector::from_iterator(self.g_par.len() + self.g_perp.len(), self.g_par.iter().chain(&self.g_perp).copied())
    }
}

#[derive(Debug, Clone)]
pub struct WorstCaseData {
    /// Columns are leaf coordinates, `r_par x n_par`.
    pub p_par: DMatrix<f64>,
    pub p_perp: DMatrix<f64>,
    pub fvals: Vec<f64>,
    pub evaluations: Vec<ExplicitEvaluation>,
    pub objective: f64,
    pub max_constraint_residual: f64,
    pub worst_constraint: String,
}

impl WorstCaseData {
    pub fn rank(&self, block: BlockTag) -> usize {
        match block {
            BlockTag::Parallel => self.p_par.nrows(),
            BlockTag::Perp => self.p_perp.nrows(),
        }
    }

    /// Gram blocks of the factor, `PᵀP`.
    pub fn gram(&self, block: BlockTag) -> DMatrix<f64> {
        let p = match block {
            BlockTag::Parallel => &self.p_par,
            BlockTag::Perp => &self.p_perp,
        };
        p.transpose() * p
    }
}

/// `P` with `PᵀP ≈ G`, keeping eigenvalues above `tol`.
pub fn factor(g: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = g.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > tol).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    DMatrix::from_fn(order.len(), n, |r, c| {
        let k = order[r];
        eig.eigenvalues[k].sqrt() * eig.eigenvectors[(c, k)]
    })
}

/// Factor both blocks, realize every evaluation and re-check all
/// constraints on the factored data. Fails when a constraint is violated by
/// more than `10 * tol` relative to the scale of the data.
pub fn reconstruct(solution: &Solution, problem: &PepProblem, tol: f64) -> Result<WorstCaseData> {
    if !solution.status.is_usable() {
        return Err(PepError::InvalidParameter("cannot reconstruct an unsolved problem".into()));
    }
    let p_par = factor(&solution.g_par, tol);
    let p_perp = factor(&solution.g_perp, tol);
    let g_par = p_par.transpose() * &p_par;
    let g_perp = p_perp.transpose() * &p_perp;
    let fv = &solution.fvals;

    let mut worst = (0.0_f64, String::new());
    let mut note = |label: &str, v: f64| {
        if v > worst.0 {
            worst = (v, label.to_string());
        }
    };
    for c in problem.equalities.iter().chain(&problem.inequalities) {
        note(&c.label, c.violation(&g_par, &g_perp, fv));
    }
    for l in &problem.lmis {
        note(&l.label, l.violation(&g_par, &g_perp, fv));
    }
    let objective = problem.objective.evaluate(&g_par, &g_perp, fv);
    note("objective", (objective - solution.value).abs());

    let scale = 1.0_f64
        .max(solution.g_par.amax())
        .max(solution.g_perp.amax())
        .max(fv.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    let limit = 10.0 * tol * scale;
    if worst.0 > limit {
        return Err(PepError::ReconstructionFailed {
            residual: worst.0,
            limit,
            worst: worst.1,
        });
    }

    let evaluations = problem
        .evaluations
        .iter()
        .map(|e| ExplicitEvaluation {
            label: e.label.clone(),
            x_par: e.point.realize(BlockTag::Parallel, &p_par).iter().copied().collect(),
            x_perp: e.point.realize(BlockTag::Perp, &p_perp).iter().copied().collect(),
            g_par: e.grad.realize(BlockTag::Parallel, &p_par).iter().copied().collect(),
            g_perp: e.grad.realize(BlockTag::Perp, &p_perp).iter().copied().collect(),
            f: fv[e.fval.0],
        })
        .collect();

    Ok(WorstCaseData {
        p_par,
        p_perp,
        fvals: fv.clone(),
        evaluations,
        objective,
        max_constraint_residual: worst.0,
        worst_constraint: worst.1,
    })
}

/// Outcome of re-checking a standard form on factored Gram blocks.
#[derive(Debug, Clone, Serialize)]
pub struct FormCheck {
    /// Largest constraint violation, including LMI eigenvalues below zero.
    pub max_residual: f64,
    pub worst: String,
    /// `|objective(factored) - objective(z)|`
    pub objective_gap: f64,
    /// `max(1, |G|, |f|)`, the scale residuals are judged against.
    pub scale: f64,
}

impl FormCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol * self.scale && self.objective_gap <= tol * self.scale
    }
}

/// Factor the Gram blocks of `z` with eigenvalues clipped at `clip`, then
/// evaluate every row of `form` on the factored data.
pub fn check_form(form: &SdpStandardForm, z: &[f64], clip: f64) -> FormCheck {
    let (g_par, g_perp, fv) = form.unpack(z);
    let p_par = factor(&g_par, clip);
    let p_perp = factor(&g_perp, clip);
    let mut y = z.to_vec();
    for (block, p) in [(BlockTag::Parallel, &p_par), (BlockTag::Perp, &p_perp)] {
        let g = p.transpose() * p;
        let off = form.block_offset(block);
        for j in 0..form.block_dim(block) {
            for i in 0..=j {
                y[off + svec_index(i, j)] = g[(i, j)];
            }
        }
    }
    let mut worst = (0.0_f64, String::new());
    let mut note = |label: &str, v: f64| {
        if v > worst.0 {
            worst = (v, label.to_string());
        }
    };
    for (label, r) in &form.equalities {
        note(label, r.evaluate(&y).abs());
    }
    for (label, r) in &form.inequalities {
        note(label, r.evaluate(&y).max(0.0));
    }
    for lmi in &form.lmis {
        let m = DMatrix::from_fn(lmi.dim, lmi.dim, |i, j| lmi.entries[svec_index(i.min(j), i.max(j))].evaluate(&y));
        if lmi.dim > 0 {
            let lo = SymmetricEigen::new(m).eigenvalues.min();
            note(&lmi.label, (-lo).max(0.0));
        }
    }
    let scale = 1.0_f64
        .max(g_par.amax())
        .max(g_perp.amax())
        .max(fv.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    FormCheck {
        max_residual: worst.0,
        worst: worst.1,
        objective_gap: (form.objective.evaluate(&y) - form.objective.evaluate(z)).abs(),
        scale,
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
    use crate::solver::{solve, ClarabelAdapter, SolverAdapter};

    #[test]
    fn factor_recovers_rank_one() {
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let g = &v * v.transpose();
        let p = factor(&g, 1e-9);
        assert_eq!(p.nrows(), 1);
        assert!((p.transpose() * &p - g).amax() < 1e-12);
    }

    #[test]
    fn factor_of_empty_and_zero() {
        assert_eq!(factor(&DMatrix::zeros(0, 0), 1e-7).nrows(), 0);
        assert_eq!(factor(&DMatrix::zeros(3, 3), 1e-7).nrows(), 0);
    }

    #[test]
    fn reconstruction_reproduces_objective() {
        for method in [Method::Dgd, Method::Extra] {
            let b = Scenario::new(
                method,
                MethodParams::new(3, 0.5),
                FunctionClass::BoundedSubgradientConvex { r: 1.0 },
                InitialCondition::ConsensusStart { d: 1.0 },
                CriterionKind::FvalGapAveraged,
                ConsensusModel::Spectral(SpectralRange::symmetric(0.5).unwrap()),
            )
            .build()
            .unwrap();
            let s = solve(&ClarabelAdapter::default(), &b.problem).unwrap();
            let w = reconstruct(&s, &b.problem, DEFAULT_CLIP_TOL).unwrap();
            assert!((w.objective - s.value).abs() < 1e-6);
            assert!(w.max_constraint_residual < 1e-6, "{} {}", w.max_constraint_residual, w.worst_constraint);
            let star = w.evaluations.iter().find(|e| e.label == "*").unwrap();
            assert!(star.x_perp.iter().all(|&v| v == 0.0));
            assert!(star.g_par.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn form_check_on_solved_and_perturbed_points() {
        let b = Scenario::new(
            Method::Diging,
            MethodParams::new(2, 0.2),
            FunctionClass::SmoothStronglyConvex { mu: 0.1, l: 1.0 },
            InitialCondition::MeanSquaredDistance { d: 1.0 },
            CriterionKind::DistanceAtK,
            ConsensusModel::Spectral(SpectralRange::symmetric(0.5).unwrap()),
        )
        .build()
        .unwrap();
        let form = crate::sdp::to_standard_form(&b.problem).unwrap();
        let raw = ClarabelAdapter::default().solve_form(&form).unwrap();
        let c = check_form(&form, &raw.z, DEFAULT_CLIP_TOL);
        assert!(c.passes(1e-6), "{c:?}");
        // a function value pushed past an interpolation inequality
        let mut z = raw.z.clone();
        z[form.fval_offset() + 1] += 1.0;
        assert!(!check_form(&form, &z, DEFAULT_CLIP_TOL).passes(1e-6));
    }
}
