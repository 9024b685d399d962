//! Symbolic algebra over the two Gram blocks.
//!
//! Every vector of the lifted problem is split into a consensus part and a
//! disagreement part. A [`PointExpr`] is a linear combination of basis leaves
//! in each block; the leaves are the columns of the (unknown) factors
//! `P_par` and `P_perp`, whose Gram matrices are the SDP variables. Scalar
//! products of points are therefore affine in the Gram entries, which is what
//! [`ScalarExpr`] records. Neither the dimension nor the number of agents is
//! represented anywhere in this module.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{PepError, Result};

/// Which of the two orthogonal Gram blocks a leaf lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BlockTag {
    /// Consensus subspace.
    Parallel,
    /// Orthogonal complement of the consensus subspace.
    Perp,
}

impl BlockTag {
    pub const ALL: [BlockTag; 2] = [BlockTag::Parallel, BlockTag::Perp];

    pub fn short(self) -> &'static str {
        match self {
            BlockTag::Parallel => "par",
            BlockTag::Perp => "perp",
        }
    }
}

/// Index of a leaf inside its block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LeafId(pub usize);

/// Index of a function-value symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FValId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisLeaf {
    pub id: LeafId,
    pub block: BlockTag,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FValSymbol {
    pub id: FValId,
    pub label: String,
}

/// Canonical key of a Gram entry: `(block, i, j)` with `i <= j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GramKey {
    pub block: BlockTag,
    pub row: LeafId,
    pub col: LeafId,
}

impl GramKey {
    pub fn new(block: BlockTag, a: LeafId, b: LeafId) -> Self {
        let (row, col) = if a <= b { (a, b) } else { (b, a) };
        GramKey { block, row, col }
    }
}

type Coeffs = BTreeMap<LeafId, f64>;

fn axpy_into(dst: &mut Coeffs, scale: f64, src: &Coeffs) {
    if scale == 0.0 {
        return;
    }
    for (&leaf, &c) in src {
        let entry = dst.entry(leaf).or_insert(0.0);
        *entry += scale * c;
        if *entry == 0.0 {
            dst.remove(&leaf);
        }
    }
}

/// A vector of the lifted problem, as coefficients on basis leaves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointExpr {
    par: Coeffs,
    perp: Coeffs,
}

impl PointExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn leaf(block: BlockTag, id: LeafId) -> Self {
        let mut p = Self::zero();
        p.block_mut(block).insert(id, 1.0);
        p
    }

    pub fn block(&self, block: BlockTag) -> &BTreeMap<LeafId, f64> {
        match block {
            BlockTag::Parallel => &self.par,
            BlockTag::Perp => &self.perp,
        }
    }

    fn block_mut(&mut self, block: BlockTag) -> &mut Coeffs {
        match block {
            BlockTag::Parallel => &mut self.par,
            BlockTag::Perp => &mut self.perp,
        }
    }

    pub fn par(&self) -> &BTreeMap<LeafId, f64> {
        &self.par
    }

    pub fn perp(&self) -> &BTreeMap<LeafId, f64> {
        &self.perp
    }

    /// The same point with its disagreement part dropped.
    pub fn par_part(&self) -> PointExpr {
        PointExpr {
            par: self.par.clone(),
            perp: Coeffs::new(),
        }
    }

    /// The same point with its consensus part dropped.
    pub fn perp_part(&self) -> PointExpr {
        PointExpr {
            par: Coeffs::new(),
            perp: self.perp.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.par.is_empty() && self.perp.is_empty()
    }

    pub fn is_block_zero(&self, block: BlockTag) -> bool {
        self.block(block).is_empty()
    }

    /// Joins a consensus part and a disagreement part into one point.
    pub fn from_parts(par_source: &PointExpr, perp_source: &PointExpr) -> PointExpr {
        PointExpr {
            par: par_source.par.clone(),
            perp: perp_source.perp.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> PointExpr {
        let mut out = PointExpr::zero();
        axpy_into(&mut out.par, s, &self.par);
        axpy_into(&mut out.perp, s, &self.perp);
        out
    }

    /// Coordinates of this point given explicit coordinates for every leaf.
    /// `coords` holds one column per leaf of the block.
    pub fn realize(&self, block: BlockTag, coords: &DMatrix<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(coords.nrows());
        for (leaf, &c) in self.block(block) {
            v.axpy(c, &coords.column(leaf.0), 1.0);
        }
        v
    }
}

/// Exact blockwise linear combination `sum_k c_k * p_k`.
pub fn combine<'a, I>(terms: I) -> PointExpr
where
    I: IntoIterator<Item = (f64, &'a PointExpr)>,
{
    let mut out = PointExpr::zero();
    for (c, p) in terms {
        axpy_into(&mut out.par, c, &p.par);
        axpy_into(&mut out.perp, c, &p.perp);
    }
    out
}

impl Add for &PointExpr {
    type Output = PointExpr;
    fn add(self, rhs: &PointExpr) -> PointExpr {
        combine([(1.0, self), (1.0, rhs)])
    }
}

impl Sub for &PointExpr {
    type Output = PointExpr;
    fn sub(self, rhs: &PointExpr) -> PointExpr {
        combine([(1.0, self), (-1.0, rhs)])
    }
}

impl Neg for &PointExpr {
    type Output = PointExpr;
    fn neg(self) -> PointExpr {
        self.scaled(-1.0)
    }
}

impl Mul<&PointExpr> for f64 {
    type Output = PointExpr;
    fn mul(self, rhs: &PointExpr) -> PointExpr {
        rhs.scaled(self)
    }
}

/// Scalar product of two points, as an affine expression in the Gram entries.
///
/// The two blocks are orthogonal, so no cross-block term is ever produced.
pub fn inner(a: &PointExpr, b: &PointExpr) -> ScalarExpr {
    let mut out = ScalarExpr::zero();
    for block in BlockTag::ALL {
        for (&i, &ci) in a.block(block) {
            for (&j, &cj) in b.block(block) {
                out.add_gram(GramKey::new(block, i, j), ci * cj);
            }
        }
    }
    out
}

/// Squared norm `inner(a, a)`.
pub fn norm_sq(a: &PointExpr) -> ScalarExpr {
    inner(a, a)
}

/// Affine expression in the Gram entries and the function values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalarExpr {
    gram: BTreeMap<GramKey, f64>,
    fvals: BTreeMap<FValId, f64>,
    constant: f64,
}

impl ScalarExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        ScalarExpr {
            constant: c,
            ..Self::default()
        }
    }

    pub fn fval(id: FValId) -> Self {
        let mut e = Self::zero();
        e.add_fval(id, 1.0);
        e
    }

    pub fn gram_terms(&self) -> &BTreeMap<GramKey, f64> {
        &self.gram
    }

    pub fn fval_terms(&self) -> &BTreeMap<FValId, f64> {
        &self.fvals
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.gram.is_empty() && self.fvals.is_empty() && self.constant == 0.0
    }

    pub fn add_gram(&mut self, key: GramKey, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.gram.entry(key).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.gram.remove(&key);
        }
    }

    pub fn add_fval(&mut self, id: FValId, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.fvals.entry(id).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.fvals.remove(&id);
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: f64, other: &ScalarExpr) {
        if s == 0.0 {
            return;
        }
        for (&k, &c) in &other.gram {
            self.add_gram(k, s * c);
        }
        for (&k, &c) in &other.fvals {
            self.add_fval(k, s * c);
        }
        self.constant += s * other.constant;
    }

    pub fn scaled(&self, s: f64) -> ScalarExpr {
        let mut out = ScalarExpr::zero();
        out.add_scaled(s, self);
        out
    }

    /// Evaluate under explicit Gram blocks and function values.
    pub fn evaluate(&self, g_par: &DMatrix<f64>, g_perp: &DMatrix<f64>, fvals: &[f64]) -> f64 {
        let mut v = self.constant;
        for (k, &c) in &self.gram {
            let g = match k.block {
                BlockTag::Parallel => g_par,
                BlockTag::Perp => g_perp,
            };
            v += c * g[(k.row.0, k.col.0)];
        }
        for (k, &c) in &self.fvals {
            v += c * fvals[k.0];
        }
        v
    }
}

impl Add for &ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: &ScalarExpr) -> ScalarExpr {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl Sub for &ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: &ScalarExpr) -> ScalarExpr {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

impl AddAssign<&ScalarExpr> for ScalarExpr {
    fn add_assign(&mut self, rhs: &ScalarExpr) {
        self.add_scaled(1.0, rhs);
    }
}

impl Mul<&ScalarExpr> for f64 {
    type Output = ScalarExpr;
    fn mul(self, rhs: &ScalarExpr) -> ScalarExpr {
        rhs.scaled(self)
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut term = |f: &mut fmt::Formatter<'_>, c: f64, name: String| -> fmt::Result {
            if first {
                first = false;
                write!(f, "{c:+e}*{name}")
            } else {
                write!(f, " {c:+e}*{name}")
            }
        };
        for (k, &c) in &self.gram {
            term(f, c, format!("G{}[{},{}]", k.block.short(), k.row.0, k.col.0))?;
        }
        for (k, &c) in &self.fvals {
            term(f, c, format!("f[{}]", k.0))?;
        }
        if self.constant != 0.0 || first {
            if first {
                write!(f, "{:+e}", self.constant)?;
            } else {
                write!(f, " {:+e}", self.constant)?;
            }
        }
        Ok(())
    }
}

/// Square matrix of affine expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixExpr {
    dim: usize,
    entries: Vec<ScalarExpr>,
}

impl MatrixExpr {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> ScalarExpr) -> Self {
        assert!(dim > 0, "matrix expressions are at least 1x1");
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        MatrixExpr { dim, entries }
    }

    /// `[inner(a_i, b_j)]_{ij}`.
    pub fn cross_gram(a: &[PointExpr], b: &[PointExpr]) -> Self {
        assert_eq!(a.len(), b.len());
        Self::from_fn(a.len(), |i, j| inner(&a[i], &b[j]))
    }

    /// `[(inner(a_i, b_j) + inner(b_i, a_j)) / 2]_{ij}`, the symmetric part of `A^T B`.
    pub fn sym_cross_gram(a: &[PointExpr], b: &[PointExpr]) -> Self {
        assert_eq!(a.len(), b.len());
        Self::from_fn(a.len(), |i, j| {
            let mut e = inner(&a[i], &b[j]).scaled(0.5);
            e.add_scaled(0.5, &inner(&b[i], &a[j]));
            e
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarExpr {
        &self.entries[i * self.dim + j]
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &MatrixExpr) -> MatrixExpr {
        assert_eq!(self.dim, other.dim);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| {
                let mut e = a.clone();
                e.add_scaled(s, b);
                e
            })
            .collect();
        MatrixExpr {
            dim: self.dim,
            entries,
        }
    }

    pub fn scaled(&self, s: f64) -> MatrixExpr {
        MatrixExpr {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e.scaled(s)).collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (i + 1..self.dim).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn evaluate(&self, g_par: &DMatrix<f64>, g_perp: &DMatrix<f64>, fvals: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j).evaluate(g_par, g_perp, fvals))
    }
}

/// Ordered record of every leaf and function-value symbol of a problem.
#[derive(Debug, Clone, Default, Serialize)]
pub struct GramLayout {
    leaves_par: Vec<BasisLeaf>,
    leaves_perp: Vec<BasisLeaf>,
    fvals: Vec<FValSymbol>,
    frozen: bool,
}

impl GramLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Introduce a fresh column in the given block and return it as a point.
    pub fn new_leaf(&mut self, block: BlockTag, label: impl Into<String>) -> Result<PointExpr> {
        let label = label.into();
        if self.frozen {
            return Err(PepError::LayoutFrozen(format!("leaf `{label}`")));
        }
        let leaves = match block {
            BlockTag::Parallel => &mut self.leaves_par,
            BlockTag::Perp => &mut self.leaves_perp,
        };
        let id = LeafId(leaves.len());
        leaves.push(BasisLeaf { id, block, label });
        Ok(PointExpr::leaf(block, id))
    }

    pub fn new_fval(&mut self, label: impl Into<String>) -> Result<FValId> {
        let label = label.into();
        if self.frozen {
            return Err(PepError::LayoutFrozen(format!("function value `{label}`")));
        }
        let id = FValId(self.fvals.len());
        self.fvals.push(FValSymbol { id, label });
        Ok(id)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn leaves(&self, block: BlockTag) -> &[BasisLeaf] {
        match block {
            BlockTag::Parallel => &self.leaves_par,
            BlockTag::Perp => &self.leaves_perp,
        }
    }

    pub fn block_size(&self, block: BlockTag) -> usize {
        self.leaves(block).len()
    }

    pub fn fvals(&self) -> &[FValSymbol] {
        &self.fvals
    }

    pub fn fval_label(&self, id: FValId) -> &str {
        &self.fvals[id.0].label
    }

    /// Every leaf of a block, as points.
    pub fn leaf_points(&self, block: BlockTag) -> Vec<PointExpr> {
        self.leaves(block).iter().map(|l| PointExpr::leaf(block, l.id)).collect()
    }

    /// True if every leaf and symbol referenced by `e` belongs to this layout.
    pub fn covers(&self, e: &ScalarExpr) -> bool {
        e.gram_terms()
            .keys()
            .all(|k| k.col.0 < self.block_size(k.block))
            && e.fval_terms().keys().all(|f| f.0 < self.fvals.len())
    }
}
