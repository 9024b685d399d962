//! Solver-neutral standard form.
//!
//! Decision variables are stacked as
//! `[svec(G_par), svec(G_perp), f]`, where `svec` lists the upper triangle
//! column by column without scaling. Every constraint is an affine row
//! `a·z + c` compared against zero, and every LMI is a symmetric matrix of
//! such rows stored in the same upper-triangle order.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{PepError, Result};
use crate::gram::{BlockTag, GramKey, MatrixExpr, ScalarExpr};
use crate::problem::PepProblem;

/// `Σ coeffs[i].1 · z[coeffs[i].0] + constant`
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl SparseRow {
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, c)| c * z[i]).sum::<f64>() + self.constant
    }
}

/// `dim x dim` symmetric matrix of affine rows, upper triangle column-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdConstraint {
    pub label: String,
    pub dim: usize,
    pub entries: Vec<SparseRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SdpStats {
    pub n_par: usize,
    pub n_perp: usize,
    pub n_fvals: usize,
    pub n_vars: usize,
    pub n_equalities: usize,
    pub n_inequalities: usize,
    pub n_lmis: usize,
    pub max_lmi_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpStandardForm {
    pub n_par: usize,
    pub n_perp: usize,
    pub n_fvals: usize,
    /// Maximized.
    pub objective: SparseRow,
    /// `row == 0`
    pub equalities: Vec<(String, SparseRow)>,
    /// `row <= 0`
    pub inequalities: Vec<(String, SparseRow)>,
    /// `matrix ⪰ 0`
    pub lmis: Vec<PsdConstraint>,
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of `(i, j)`, `i <= j`, in the column-major upper triangle.
pub fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

impl SdpStandardForm {
    pub fn n_vars(&self) -> usize {
        svec_len(self.n_par) + svec_len(self.n_perp) + self.n_fvals
    }

    pub fn block_offset(&self, block: BlockTag) -> usize {
        match block {
            BlockTag::Parallel => 0,
            BlockTag::Perp => svec_len(self.n_par),
        }
    }

    pub fn block_dim(&self, block: BlockTag) -> usize {
        match block {
            BlockTag::Parallel => self.n_par,
            BlockTag::Perp => self.n_perp,
        }
    }

    pub fn fval_offset(&self) -> usize {
        svec_len(self.n_par) + svec_len(self.n_perp)
    }

    pub fn gram_index(&self, key: &GramKey) -> usize {
        self.block_offset(key.block) + svec_index(key.row.0, key.col.0)
    }

    pub fn stats(&self) -> SdpStats {
        SdpStats {
            n_par: self.n_par,
            n_perp: self.n_perp,
            n_fvals: self.n_fvals,
            n_vars: self.n_vars(),
            n_equalities: self.equalities.len(),
            n_inequalities: self.inequalities.len(),
            n_lmis: self.lmis.len(),
            max_lmi_dim: self.lmis.iter().map(|l| l.dim).max().unwrap_or(0),
        }
    }

    fn row(&self, e: &ScalarExpr) -> SparseRow {
        let mut coeffs: Vec<(usize, f64)> = e
            .gram_terms()
            .iter()
            .map(|(k, &c)| (self.gram_index(k), c))
            .chain(e.fval_terms().iter().map(|(f, &c)| (self.fval_offset() + f.0, c)))
            .collect();
        coeffs.sort_by_key(|&(i, _)| i);
        SparseRow {
            coeffs,
            constant: e.constant_term(),
        }
    }

    fn psd(&self, label: &str, m: &MatrixExpr) -> PsdConstraint {
        let dim = m.dim();
        let entries = (0..dim)
            .flat_map(|j| (0..=j).map(move |i| (i, j)))
            .map(|(i, j)| self.row(m.get(i, j)))
            .collect();
        PsdConstraint {
            label: label.to_string(),
            dim,
            entries,
        }
    }

    /// Unpack a variable vector into the two Gram blocks and the values.
    pub fn unpack(&self, z: &[f64]) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>, Vec<f64>) {
        let block = |b: BlockTag| {
            let n = self.block_dim(b);
            let off = self.block_offset(b);
            nalgebra::DMatrix::from_fn(n, n, |i, j| {
                let (i, j) = if i <= j { (i, j) } else { (j, i) };
                z[off + svec_index(i, j)]
            })
        };
        let f = z[self.fval_offset()..self.fval_offset() + self.n_fvals].to_vec();
        (block(BlockTag::Parallel), block(BlockTag::Perp), f)
    }

    /// Deterministic text dump for debugging and diffing.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let s = self.stats();
        let _ = writeln!(out, "# vars {} (par {}, perp {}, fvals {})", s.n_vars, s.n_par, s.n_perp, s.n_fvals);
        let fmt_row = |r: &SparseRow| {
            let mut t = String::new();
            for &(i, c) in &r.coeffs {
                let _ = write!(t, " {c:+.17e}*z{i}");
            }
            let _ = write!(t, " {:+.17e}", r.constant);
            t
        };
        let _ = writeln!(out, "max{}", fmt_row(&self.objective));
        for (l, r) in &self.equalities {
            let _ = writeln!(out, "eq {l}:{} == 0", fmt_row(r));
        }
        for (l, r) in &self.inequalities {
            let _ = writeln!(out, "le {l}:{} <= 0", fmt_row(r));
        }
        for m in &self.lmis {
            let _ = writeln!(out, "psd {} dim {}", m.label, m.dim);
            for (k, r) in m.entries.iter().enumerate() {
                let _ = writeln!(out, "  [{k}]{}", fmt_row(r));
            }
        }
        out
    }
}

pub fn to_standard_form(problem: &PepProblem) -> Result<SdpStandardForm> {
    if !problem.layout.is_frozen() {
        return Err(PepError::InvalidParameter("layout must be frozen before emission".into()));
    }
    for l in &problem.lmis {
        if !l.matrix.is_symmetric() {
            return Err(PepError::NonSymmetric(l.label.clone()));
        }
    }
    let mut form = SdpStandardForm {
        n_par: problem.layout.block_size(BlockTag::Parallel),
        n_perp: problem.layout.block_size(BlockTag::Perp),
        n_fvals: problem.layout.fvals().len(),
        objective: SparseRow::default(),
        equalities: Vec::new(),
        inequalities: Vec::new(),
        lmis: Vec::new(),
    };
    form.objective = form.row(&problem.objective);
    form.equalities = problem.equalities.iter().map(|c| (c.label.clone(), form.row(&c.expr))).collect();
    form.inequalities = problem.inequalities.iter().map(|c| (c.label.clone(), form.row(&c.expr))).collect();
    form.lmis = problem.lmis.iter().map(|l| form.psd(&l.label, &l.matrix)).collect();
    Ok(form)
}
