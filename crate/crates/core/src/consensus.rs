//! Consensus steps in the consensus/disagreement basis.
//!
//! A consensus step with a symmetric, generalized doubly stochastic matrix
//! leaves the consensus component untouched and multiplies the disagreement
//! component by an unknown symmetric matrix whose spectrum is that of the
//! averaging matrix without its unit eigenvalue. Each step introduces one
//! fresh disagreement leaf for its output; the registry keeps the
//! `(input, output)` columns grouped by matrix so the spectral constraints
//! can be imposed jointly for a constant matrix or separately for
//! time-varying ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constraint::{Constraint, Lmi};
use crate::error::{PepError, Result};
use crate::gram::{inner, BlockTag, GramLayout, MatrixExpr, PointExpr, ScalarExpr};

/// Eigenvalue range of the disagreement action, `[lam_minus, lam_plus]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRange {
    pub lam_minus: f64,
    pub lam_plus: f64,
}

impl SpectralRange {
    pub fn new(lam_minus: f64, lam_plus: f64) -> Result<Self> {
        let r = SpectralRange { lam_minus, lam_plus };
        r.validate()?;
        Ok(r)
    }

    /// `[-lam, lam]`
    pub fn symmetric(lam: f64) -> Result<Self> {
        Self::new(-lam, lam)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = -1.0 < self.lam_minus && self.lam_minus <= self.lam_plus && self.lam_plus < 1.0;
        if ok {
            Ok(())
        } else {
            Err(PepError::InvalidSpectralRange {
                lam_minus: self.lam_minus,
                lam_plus: self.lam_plus,
            })
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lam_minus <= v && v <= self.lam_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatrixClassId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusPair {
    /// Disagreement part of the step input.
    pub input: PointExpr,
    /// Fresh disagreement leaf holding the step output.
    pub output: PointExpr,
}

#[derive(Debug, Clone, Default)]
pub struct ConsensusRegistry {
    classes: Vec<Vec<ConsensusPair>>,
}

impl ConsensusRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserve a new matrix; steps registered under it share one matrix.
    pub fn new_class(&mut self) -> MatrixClassId {
        self.classes.push(Vec::new());
        MatrixClassId(self.classes.len() - 1)
    }

    /// Apply the matrix `id` to `p`: the consensus part is copied, the
    /// disagreement part becomes a fresh leaf tied to `p`'s by the registry.
    pub fn consensus_step(
        &mut self,
        layout: &mut GramLayout,
        p: &PointExpr,
        id: MatrixClassId,
        label: impl Into<String>,
    ) -> Result<PointExpr> {
        let pairs = self
            .classes
            .get_mut(id.0)
            .ok_or_else(|| PepError::InvalidParameter(format!("unknown matrix class {}", id.0)))?;
        let output = layout.new_leaf(BlockTag::Perp, label)?;
        pairs.push(ConsensusPair {
            input: p.perp_part(),
            output: output.clone(),
        });
        Ok(PointExpr::from_parts(p, &output))
    }

    pub fn ids(&self) -> impl Iterator<Item = MatrixClassId> {
        (0..self.classes.len()).map(MatrixClassId)
    }

    pub fn pairs(&self, id: MatrixClassId) -> &[ConsensusPair] {
        &self.classes[id.0]
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_steps(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }
}

/// Constraints emitted for the consensus steps of one problem.
#[derive(Debug, Clone, Default)]
pub struct ConsensusConstraints {
    pub equalities: Vec<Constraint>,
    pub inequalities: Vec<Constraint>,
    pub lmis: Vec<Lmi>,
}

/// Necessary conditions for `Y = W X` with `W` symmetric and spectrum in `range`.
///
/// Per matrix with `k` columns: `k(k-1)/2` symmetry equalities on `X^T Y`,
/// and `lam_minus X^T X ⪯ X^T Y ⪯ lam_plus X^T X`,
/// `(Y - lam_minus X)^T (Y - lam_plus X) ⪯ 0`. A single column gives three
/// scalar inequalities instead of 1x1 LMIs.
pub fn spectral_constraints(reg: &ConsensusRegistry, range: SpectralRange) -> Result<ConsensusConstraints> {
    range.validate()?;
    let (lm, lp) = (range.lam_minus, range.lam_plus);
    let mut out = ConsensusConstraints::default();
    for id in reg.ids() {
        let pairs = reg.pairs(id);
        if pairs.is_empty() {
            return Err(PepError::EmptyMatrixClass(id.0));
        }
        let xs: Vec<PointExpr> = pairs.iter().map(|p| p.input.clone()).collect();
        let ys: Vec<PointExpr> = pairs.iter().map(|p| p.output.clone()).collect();
        let k = xs.len();

        for i in 0..k {
            for j in i + 1..k {
                let e = &inner(&xs[i], &ys[j]) - &inner(&ys[i], &xs[j]);
                out.equalities
                    .push(Constraint::eq_zero(format!("W{}:sym[{i},{j}]", id.0), e));
            }
        }

        let xx = MatrixExpr::cross_gram(&xs, &xs);
        let yy = MatrixExpr::cross_gram(&ys, &ys);
        let xy = MatrixExpr::sym_cross_gram(&xs, &ys);
        let lower = xy.add_scaled(-lm, &xx);
        let upper = xx.scaled(lp).add_scaled(-1.0, &xy);
        // -(Y^T Y - (lm + lp) sym(X^T Y) + lm lp X^T X)
        let var_red = yy.add_scaled(-(lm + lp), &xy).add_scaled(lm * lp, &xx).scaled(-1.0);

        let labeled = [("lower", lower), ("upper", upper), ("varred", var_red)];
        for (name, m) in labeled {
            let label = format!("W{}:{name}", id.0);
            if k == 1 {
                out.inequalities.push(Constraint::le_zero(label, m.get(0, 0).scaled(-1.0)));
            } else {
                out.lmis.push(Lmi::psd(label, m));
            }
        }
    }
    Ok(out)
}

/// Pin every registered step to `y = lam2 * x` exactly, one scalar per matrix.
///
/// For two agents the disagreement space is a single eigenspace, so the
/// consensus matrix acts on it as a multiple of the identity. The equality
/// `<y - lam2 x, z> = 0` is emitted for every disagreement leaf `z`; since
/// `y - lam2 x` lies in the span of those leaves, it vanishes.
pub fn exact_scalar_consensus_constraints(
    reg: &ConsensusRegistry,
    layout: &GramLayout,
    values: &BTreeMap<MatrixClassId, f64>,
) -> Result<Vec<Constraint>> {
    let leaves = layout.leaf_points(BlockTag::Perp);
    let mut out = Vec::new();
    for id in reg.ids() {
        let lam = *values.get(&id).ok_or(PepError::MissingScalar(id.0))?;
        if !(lam.abs() < 1.0) {
            return Err(PepError::InvalidParameter(format!(
                "scalar consensus value {lam} for matrix {} must lie in (-1, 1)",
                id.0
            )));
        }
        for (col, pair) in reg.pairs(id).iter().enumerate() {
            let resid = &pair.output - &pair.input.scaled(lam);
            for (leaf_idx, z) in leaves.iter().enumerate() {
                let e: ScalarExpr = inner(&resid, z);
                if e.is_zero() {
                    continue;
                }
                out.push(Constraint::eq_zero(format!("W{}:scalar[{col},{leaf_idx}]", id.0), e));
            }
        }
    }
    Ok(out)
}
