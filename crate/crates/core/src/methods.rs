//! Decentralized methods as traces of gradient, consensus and combination
//! operations.
//!
//! A trace is a small straight-line program over [`PointExpr`] values. The
//! built-in methods are written against [`TraceBuilder`], which is also the
//! entry point for user-defined methods; [`validate_trace`] re-checks a trace
//! against the problem it was recorded into.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consensus::MatrixClassId;
use crate::error::{PepError, Result};
use crate::function_class::{EvalId, EvalPoint, EvaluationSet};
use crate::consensus::ConsensusRegistry;
use crate::gram::{combine, BlockTag, LeafId, PointExpr};
use crate::problem::PepBuilder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixMode {
    /// One matrix for every consensus step.
    #[default]
    Constant,
    /// A possibly different matrix at every step.
    TimeVarying,
}

impl FromStr for MatrixMode {
    type Err = PepError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(MatrixMode::Constant),
            "time-varying" | "time_varying" | "tv" => Ok(MatrixMode::TimeVarying),
            other => Err(PepError::InvalidParameter(format!("unknown matrix mode `{other}`"))),
        }
    }
}

impl fmt::Display for MatrixMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixMode::Constant => "constant",
            MatrixMode::TimeVarying => "time-varying",
        })
    }
}

/// How DIGing's two consensus steps per iteration map onto matrices in
/// time-varying mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DigingGrouping {
    /// Both steps of an iteration use the same matrix.
    #[default]
    PerIteration,
    /// Every step draws its own matrix.
    PerApplication,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    /// Number of iterations.
    pub k: usize,
    /// Constant step size.
    pub alpha: f64,
    #[serde(default)]
    pub matrix_mode: MatrixMode,
    #[serde(default)]
    pub diging_grouping: DigingGrouping,
    /// Also evaluate the gradient at the last iterate (DGD and EXTRA).
    #[serde(default)]
    pub evaluate_last: bool,
}

impl MethodParams {
    pub fn new(k: usize, alpha: f64) -> Self {
        MethodParams {
            k,
            alpha,
            matrix_mode: MatrixMode::Constant,
            diging_grouping: DigingGrouping::PerIteration,
            evaluate_last: false,
        }
    }

    pub fn with_mode(mut self, mode: MatrixMode) -> Self {
        self.matrix_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(PepError::InvalidParameter(format!("step size must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Built-in methods, keyed by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dgd,
    Diging,
    Extra,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Dgd, Method::Diging, Method::Extra];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dgd => "dgd",
            Method::Diging => "diging",
            Method::Extra => "extra",
        }
    }

    pub fn build(self, pep: &mut PepBuilder, x0: PointExpr, params: &MethodParams) -> Result<MethodTrace> {
        match self {
            Method::Dgd => build_dgd(pep, x0, params),
            Method::Diging => build_diging(pep, x0, params),
            Method::Extra => build_extra(pep, x0, params),
        }
    }
}

impl FromStr for Method {
    type Err = PepError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| PepError::UnknownMethod(s.to_string()))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum TraceOp {
    /// An externally supplied point (the initial iterate).
    Input { out: ValueId },
    /// Local (sub)gradients at a point.
    Gradient { at: ValueId, eval: EvalId, out: ValueId },
    /// One averaging step with the given matrix.
    Consensus { input: ValueId, matrix: MatrixClassId, out: ValueId },
    /// The same linear combination on every agent.
    Combination { terms: Vec<(f64, ValueId)>, out: ValueId },
}

#[derive(Debug, Clone, Default)]
pub struct MethodTrace {
    pub name: String,
    pub values: Vec<PointExpr>,
    pub ops: Vec<TraceOp>,
    /// Main iterate sequence `x^0 ... x^K`.
    pub iterates: Vec<ValueId>,
    /// Auxiliary sequences, e.g. DIGing's tracking variable.
    pub aux: BTreeMap<String, Vec<ValueId>>,
    pub gradient_evals: Vec<EvalId>,
    pub consensus_ids: Vec<MatrixClassId>,
}

impl MethodTrace {
    pub fn value(&self, v: ValueId) -> &PointExpr {
        &self.values[v.0]
    }

    pub fn iterate(&self, k: usize) -> &PointExpr {
        self.value(self.iterates[k])
    }

    pub fn last_iterate(&self) -> Option<&PointExpr> {
        self.iterates.last().map(|&v| self.value(v))
    }

    /// Number of completed iterations.
    pub fn k(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn consensus_steps(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, TraceOp::Consensus { .. })).count()
    }
}

/// Records operations into a [`PepBuilder`] and a [`MethodTrace`] at once.
pub struct TraceBuilder<'a> {
    pep: &'a mut PepBuilder,
    trace: MethodTrace,
}

impl<'a> TraceBuilder<'a> {
    pub fn new(pep: &'a mut PepBuilder, name: impl Into<String>) -> Self {
        TraceBuilder {
            pep,
            trace: MethodTrace {
                name: name.into(),
                ..MethodTrace::default()
            },
        }
    }

    fn push(&mut self, p: PointExpr) -> ValueId {
        self.trace.values.push(p);
        ValueId(self.trace.values.len() - 1)
    }

    pub fn value(&self, v: ValueId) -> &PointExpr {
        self.trace.value(v)
    }

    pub fn input(&mut self, p: PointExpr) -> ValueId {
        let out = self.push(p);
        self.trace.ops.push(TraceOp::Input { out });
        out
    }

    pub fn gradient(&mut self, at: ValueId, label: impl Into<String>) -> Result<ValueId> {
        let point = self.value(at).clone();
        let eval = self.pep.add_evaluation(EvalPoint::At(point), label)?;
        let out = self.push(eval.grad.clone());
        self.trace.ops.push(TraceOp::Gradient { at, eval: eval.id, out });
        self.trace.gradient_evals.push(eval.id);
        Ok(out)
    }

    pub fn new_matrix(&mut self) -> MatrixClassId {
        let id = self.pep.new_matrix();
        self.trace.consensus_ids.push(id);
        id
    }

    pub fn consensus(&mut self, input: ValueId, matrix: MatrixClassId) -> Result<ValueId> {
        let label = format!("y⊥[W{}#{}]", matrix.0, self.trace.consensus_steps());
        let p = self.value(input).clone();
        let y = self.pep.consensus_step(&p, matrix, label)?;
        let out = self.push(y);
        self.trace.ops.push(TraceOp::Consensus { input, matrix, out });
        Ok(out)
    }

    pub fn combine(&mut self, terms: &[(f64, ValueId)]) -> ValueId {
        let p = combine(terms.iter().map(|&(c, v)| (c, &self.trace.values[v.0])));
        let out = self.push(p);
        self.trace.ops.push(TraceOp::Combination {
            terms: terms.to_vec(),
            out,
        });
        out
    }

    pub fn push_iterate(&mut self, v: ValueId) {
        self.trace.iterates.push(v);
    }

    pub fn push_aux(&mut self, name: &str, v: ValueId) {
        self.trace.aux.entry(name.to_string()).or_default().push(v);
    }

    pub fn finish(self) -> MethodTrace {
        self.trace
    }
}

/// Hands out matrices for successive consensus steps according to the mode.
struct MatrixSchedule {
    mode: MatrixMode,
    constant: Option<MatrixClassId>,
}

impl MatrixSchedule {
    fn new(mode: MatrixMode) -> Self {
        MatrixSchedule { mode, constant: None }
    }

    fn next(&mut self, tb: &mut TraceBuilder<'_>) -> MatrixClassId {
        match self.mode {
            MatrixMode::TimeVarying => tb.new_matrix(),
            MatrixMode::Constant => *self.constant.get_or_insert_with(|| tb.new_matrix()),
        }
    }
}

/// DGD: `y^k = W x^k`, `x^{k+1} = y^k - alpha g^k`.
pub fn build_dgd(pep: &mut PepBuilder, x0: PointExpr, params: &MethodParams) -> Result<MethodTrace> {
    params.validate()?;
    let mut tb = TraceBuilder::new(pep, "dgd");
    let mut schedule = MatrixSchedule::new(params.matrix_mode);
    let mut x = tb.input(x0);
    tb.push_iterate(x);
    for k in 0..params.k {
        let w = schedule.next(&mut tb);
        let y = tb.consensus(x, w)?;
        let g = tb.gradient(x, format!("x{k}"))?;
        x = tb.combine(&[(1.0, y), (-params.alpha, g)]);
        tb.push_iterate(x);
    }
    if params.evaluate_last {
        tb.gradient(x, format!("x{}", params.k))?;
    }
    Ok(tb.finish())
}

/// DIGing (gradient tracking), `s^0 = g^0`:
/// `x^{k+1} = W x^k - alpha s^k`, `s^{k+1} = W s^k + g^{k+1} - g^k`.
pub fn build_diging(pep: &mut PepBuilder, x0: PointExpr, params: &MethodParams) -> Result<MethodTrace> {
    params.validate()?;
    let mut tb = TraceBuilder::new(pep, "diging");
    let mut schedule = MatrixSchedule::new(params.matrix_mode);
    let mut x = tb.input(x0);
    tb.push_iterate(x);
    let mut g = tb.gradient(x, "x0")?;
    let mut s = g;
    tb.push_aux("s", s);
    for k in 0..params.k {
        let (wx, ws) = match (params.matrix_mode, params.diging_grouping) {
            (MatrixMode::TimeVarying, DigingGrouping::PerIteration) => {
                let w = tb.new_matrix();
                (w, w)
            }
            _ => {
                let a = schedule.next(&mut tb);
                let b = schedule.next(&mut tb);
                (a, b)
            }
        };
        let yx = tb.consensus(x, wx)?;
        let x_next = tb.combine(&[(1.0, yx), (-params.alpha, s)]);
        let g_next = tb.gradient(x_next, format!("x{}", k + 1))?;
        let ys = tb.consensus(s, ws)?;
        s = tb.combine(&[(1.0, ys), (1.0, g_next), (-1.0, g)]);
        x = x_next;
        g = g_next;
        tb.push_iterate(x);
        tb.push_aux("s", s);
    }
    Ok(tb.finish())
}

/// EXTRA with `W2 = (I + W) / 2`:
/// `x^1 = W x^0 - alpha g^0`,
/// `x^{k+1} = x^k + W x^k - (x^{k-1} + W x^{k-1}) / 2 - alpha (g^k - g^{k-1})`.
pub fn build_extra(pep: &mut PepBuilder, x0: PointExpr, params: &MethodParams) -> Result<MethodTrace> {
    params.validate()?;
    let mut tb = TraceBuilder::new(pep, "extra");
    let mut schedule = MatrixSchedule::new(params.matrix_mode);
    let x_first = tb.input(x0);
    tb.push_iterate(x_first);
    if params.k == 0 {
        if params.evaluate_last {
            tb.gradient(x_first, "x0")?;
        }
        return Ok(tb.finish());
    }
    let mut x_prev = x_first;
    let mut g_prev = tb.gradient(x_prev, "x0")?;
    let w = schedule.next(&mut tb);
    let mut wx_prev = tb.consensus(x_prev, w)?;
    let mut x = tb.combine(&[(1.0, wx_prev), (-params.alpha, g_prev)]);
    tb.push_iterate(x);
    for k in 1..params.k {
        let g = tb.gradient(x, format!("x{k}"))?;
        let w = schedule.next(&mut tb);
        let wx = tb.consensus(x, w)?;
        let a = params.alpha;
        let x_next = tb.combine(&[
            (1.0, x),
            (1.0, wx),
            (-0.5, x_prev),
            (-0.5, wx_prev),
            (-a, g),
            (a, g_prev),
        ]);
        x_prev = x;
        wx_prev = wx;
        g_prev = g;
        x = x_next;
        tb.push_iterate(x);
    }
    if params.evaluate_last {
        tb.gradient(x, format!("x{}", params.k))?;
    }
    Ok(tb.finish())
}

/// Average of all iterates, projected on the consensus subspace.
pub fn averaged_iterate(trace: &MethodTrace) -> Result<PointExpr> {
    if trace.iterates.is_empty() {
        return Err(PepError::CriterionMismatch("trace has no iterates to average".into()));
    }
    let w = 1.0 / trace.iterates.len() as f64;
    let avg = combine(trace.iterates.iter().map(|&v| (w, trace.value(v))));
    Ok(avg.par_part())
}

/// Check that a trace only uses the three allowed operations and is
/// consistent with the evaluations and consensus steps it claims.
pub fn validate_trace(trace: &MethodTrace, evals: &EvaluationSet, reg: &ConsensusRegistry) -> Result<()> {
    let bad = |msg: String| Err(PepError::InvalidTrace(msg));
    let mut defined = vec![false; trace.values.len()];
    let mut known: BTreeSet<(BlockTag, LeafId)> = BTreeSet::new();
    let mut seen_pairs: BTreeMap<MatrixClassId, usize> = BTreeMap::new();
    let leaves = |p: &PointExpr| -> Vec<(BlockTag, LeafId)> {
        BlockTag::ALL
            .into_iter()
            .flat_map(|b| p.block(b).keys().map(move |&l| (b, l)))
            .collect()
    };
    let check_in = |v: ValueId, defined: &[bool]| -> Result<()> {
        if v.0 < defined.len() && defined[v.0] {
            Ok(())
        } else {
            Err(PepError::InvalidTrace(format!("value {} used before definition", v.0)))
        }
    };

    for (i, op) in trace.ops.iter().enumerate() {
        let out = match op {
            TraceOp::Input { out } => {
                known.extend(leaves(trace.value(*out)));
                *out
            }
            TraceOp::Gradient { at, eval, out } => {
                check_in(*at, &defined)?;
                if eval.0 >= evals.len() {
                    return bad(format!("op {i}: unknown evaluation {}", eval.0));
                }
                let e = evals.get(*eval);
                if &e.point != trace.value(*at) || &e.grad != trace.value(*out) {
                    return bad(format!("op {i}: gradient does not match evaluation `{}`", e.label));
                }
                known.extend(leaves(&e.grad));
                *out
            }
            TraceOp::Consensus { input, matrix, out } => {
                check_in(*input, &defined)?;
                let x = trace.value(*input);
                let y = trace.value(*out);
                if x.par() != y.par() {
                    return bad(format!("op {i}: consensus changed the consensus component"));
                }
                let col = seen_pairs.entry(*matrix).or_insert(0);
                let pair = reg
                    .pairs(*matrix)
                    .get(*col)
                    .ok_or_else(|| PepError::InvalidTrace(format!("op {i}: unregistered consensus step")))?;
                *col += 1;
                if pair.input != x.perp_part() || pair.output != y.perp_part() {
                    return bad(format!("op {i}: consensus step does not match registry"));
                }
                known.extend(leaves(&pair.output));
                *out
            }
            TraceOp::Combination { terms, out } => {
                for &(_, v) in terms {
                    check_in(v, &defined)?;
                }
                let expected = combine(terms.iter().map(|&(c, v)| (c, trace.value(v))));
                if &expected != trace.value(*out) {
                    return bad(format!("op {i}: combination result mismatch"));
                }
                *out
            }
        };
        if out.0 >= defined.len() || defined[out.0] {
            return bad(format!("op {i}: output {} redefined or out of range", out.0));
        }
        defined[out.0] = true;
        if let Some(l) = leaves(trace.value(out)).into_iter().find(|l| !known.contains(l)) {
            return bad(format!("op {i}: value uses leaf {:?}:{} not produced by any operation", l.0, l.1 .0));
        }
    }
    for v in trace.iterates.iter().chain(trace.aux.values().flatten()) {
        check_in(*v, &defined)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::{inner, BlockTag};

    fn consensus_start(pep: &mut PepBuilder) -> PointExpr {
        pep.add_optimum().unwrap();
        pep.new_leaf(BlockTag::Parallel, "x∥0").unwrap()
    }

    fn build(method: Method, params: MethodParams) -> (PepBuilder, MethodTrace) {
        let mut pep = PepBuilder::new();
        let x0 = consensus_start(&mut pep);
        let trace = method.build(&mut pep, x0, &params).unwrap();
        validate_trace(&trace, pep.evaluations(), pep.consensus()).unwrap();
        (pep, trace)
    }

    #[test]
    fn dgd_counts() {
        let (pep, trace) = build(Method::Dgd, MethodParams::new(1, 0.5));
        assert_eq!(pep.consensus().num_steps(), 1);
        assert_eq!(trace.gradient_evals.len(), 1);
        assert_eq!(trace.iterates.len(), 2);

        let (pep, _) = build(Method::Dgd, MethodParams::new(10, 0.3));
        assert_eq!(pep.consensus().num_classes(), 1);
        assert_eq!(pep.consensus().pairs(MatrixClassId(0)).len(), 10);

        let (pep, _) = build(Method::Dgd, MethodParams::new(10, 0.3).with_mode(MatrixMode::TimeVarying));
        assert_eq!(pep.consensus().num_classes(), 10);
    }

    #[test]
    fn dgd_parallel_recursion() {
        let alpha = 0.37;
        let (pep, trace) = build(Method::Dgd, MethodParams::new(4, alpha));
        for k in 0..4 {
            let g = &pep.evaluations().get(trace.gradient_evals[k]).grad;
            let expected = combine([(1.0, trace.iterate(k)), (-alpha, g)]);
            assert_eq!(trace.iterate(k + 1).par_part(), expected.par_part());
        }
    }

    #[test]
    fn diging_counts() {
        let (pep, trace) = build(Method::Diging, MethodParams::new(10, 0.1));
        assert_eq!(pep.consensus().num_classes(), 1);
        assert_eq!(pep.consensus().pairs(MatrixClassId(0)).len(), 20);
        assert_eq!(trace.gradient_evals.len(), 11);

        let (pep, _) = build(Method::Diging, MethodParams::new(10, 0.1).with_mode(MatrixMode::TimeVarying));
        assert_eq!(pep.consensus().num_classes(), 10);
        assert!(pep.consensus().ids().all(|id| pep.consensus().pairs(id).len() == 2));

        let mut params = MethodParams::new(10, 0.1).with_mode(MatrixMode::TimeVarying);
        params.diging_grouping = DigingGrouping::PerApplication;
        let (pep, _) = build(Method::Diging, params);
        assert_eq!(pep.consensus().num_classes(), 20);
    }

    #[test]
    fn diging_tracking_variable_tracks_average_gradient() {
        let (pep, trace) = build(Method::Diging, MethodParams::new(5, 0.2));
        let s = &trace.aux["s"];
        for (k, &sv) in s.iter().enumerate() {
            let g = &pep.evaluations().get(trace.gradient_evals[k]).grad;
            assert_eq!(trace.value(sv).par_part(), g.par_part(), "k={k}");
        }
    }

    #[test]
    fn extra_counts() {
        let (pep, trace) = build(Method::Extra, MethodParams::new(2, 0.1));
        assert_eq!(pep.consensus().num_steps(), 2);
        assert_eq!(trace.gradient_evals.len(), 2);

        let (pep, _) = build(Method::Extra, MethodParams::new(10, 0.1));
        assert_eq!(pep.consensus().num_classes(), 1);
        assert_eq!(pep.consensus().pairs(MatrixClassId(0)).len(), 10);

        let (pep, _) = build(Method::Extra, MethodParams::new(10, 0.1).with_mode(MatrixMode::TimeVarying));
        assert_eq!(pep.consensus().num_classes(), 10);
    }

    /// Consensus leaves the average untouched, so the average of EXTRA obeys
    /// `xbar^{k+1} = 2 xbar^k - xbar^{k-1} - alpha (gbar^k - gbar^{k-1})`.
    #[test]
    fn extra_parallel_recursion() {
        let a = 0.21;
        let (pep, trace) = build(Method::Extra, MethodParams::new(5, a));
        let g = |k: usize| pep.evaluations().get(trace.gradient_evals[k]).grad.par_part();
        let x = |k: usize| trace.iterate(k).par_part();
        assert_eq!(x(1), combine([(1.0, &x(0)), (-a, &g(0))]));
        for k in 1..5 {
            let expected = combine([(2.0, &x(k)), (-1.0, &x(k - 1)), (-a, &g(k)), (a, &g(k - 1))]);
            let diff = &x(k + 1) - &expected;
            assert!(diff.par().values().all(|c| c.abs() < 1e-12), "k={k}: {diff:?}");
        }
    }

    #[test]
    fn averaged_iterate_properties() {
        let (mut pep, trace) = build(Method::Dgd, MethodParams::new(0, 0.5));
        let avg = averaged_iterate(&trace).unwrap();
        assert_eq!(avg, trace.iterate(0).par_part());

        let (_, trace) = build(Method::Dgd, MethodParams::new(3, 0.5));
        let avg = averaged_iterate(&trace).unwrap();
        assert!(avg.is_block_zero(BlockTag::Perp));
        let q = pep.new_leaf(BlockTag::Perp, "probe").unwrap();
        assert!(inner(&avg, &q).is_zero());
        // x0's leaf carries weight 1: every iterate contains x0 with coefficient 1
        let x0_leaf = trace.iterate(0).par().keys().next().copied().unwrap();
        assert!((avg.par()[&x0_leaf] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("nids".parse::<Method>(), Err(PepError::UnknownMethod(_))));
    }

    #[test]
    fn custom_method_through_trace_builder() {
        // Two consensus rounds per gradient step.
        let mut pep = PepBuilder::new();
        let x0 = consensus_start(&mut pep);
        let mut tb = TraceBuilder::new(&mut pep, "double-gossip");
        let w = tb.new_matrix();
        let mut x = tb.input(x0);
        tb.push_iterate(x);
        for k in 0..3 {
            let y = tb.consensus(x, w).unwrap();
            let z = tb.consensus(y, w).unwrap();
            let g = tb.gradient(x, format!("x{k}")).unwrap();
            x = tb.combine(&[(1.0, z), (-0.1, g)]);
            tb.push_iterate(x);
        }
        let trace = tb.finish();
        validate_trace(&trace, pep.evaluations(), pep.consensus()).unwrap();
        assert_eq!(pep.consensus().pairs(w).len(), 6);
    }

    #[test]
    fn validator_rejects_forged_values() {
        let (mut pep, mut trace) = build(Method::Dgd, MethodParams::new(2, 0.5));
        let stray = pep.new_leaf(BlockTag::Perp, "stray").unwrap();
        let last = *trace.iterates.last().unwrap();
        let forged = &trace.value(last).clone() + &stray;
        trace.values.push(forged);
        let out = ValueId(trace.values.len() - 1);
        trace.ops.push(TraceOp::Combination {
            terms: vec![(1.0, last)],
            out,
        });
        assert!(matches!(
            validate_trace(&trace, pep.evaluations(), pep.consensus()),
            Err(PepError::InvalidTrace(_))
        ));
    }

    #[test]
    fn validator_rejects_consensus_that_moves_average() {
        let (pep, mut trace) = build(Method::Dgd, MethodParams::new(1, 0.5));
        let idx = trace
            .ops
            .iter()
            .find_map(|op| match op {
                TraceOp::Consensus { out, .. } => Some(*out),
                _ => None,
            })
            .unwrap();
        trace.values[idx.0] = trace.values[idx.0].scaled(2.0);
        assert!(validate_trace(&trace, pep.evaluations(), pep.consensus()).is_err());
    }
}
