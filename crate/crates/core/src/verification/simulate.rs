use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{PepError, Result};
use crate::methods::{DigingGrouping, MatrixMode, Method, MethodParams};
use crate::pep::{CriterionKind, InitialCondition};
use crate::verification::instances::ExplicitInstance;

/// Averaging matrices for successive consensus slots. A constant schedule
/// holds one matrix; a time-varying one holds one per slot.
#[derive(Debug, Clone)]
pub struct AveragingSchedule {
    pub matrices: Vec<DMatrix<f64>>,
}

impl AveragingSchedule {
    pub fn constant(w: DMatrix<f64>) -> Self {
        AveragingSchedule { matrices: vec![w] }
    }

    fn get(&self, slot: usize) -> &DMatrix<f64> {
        &self.matrices[slot % self.matrices.len()]
    }
}

/// Number of distinct matrices the method uses under `params`.
pub fn matrices_needed(method: Method, params: &MethodParams) -> usize {
    match (params.matrix_mode, method, params.diging_grouping) {
        (MatrixMode::Constant, _, _) => 1,
        (MatrixMode::TimeVarying, Method::Diging, DigingGrouping::PerApplication) => 2 * params.k.max(1),
        (MatrixMode::TimeVarying, _, _) => params.k.max(1),
    }
}

#[derive(Debug, Clone)]
pub struct SimulatorResult {
    /// Agent states `x^0 ... x^K`, one row per agent.
    pub iterates: Vec<DMatrix<f64>>,
    pub criterion: f64,
}

fn rows(x: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..x.nrows()).map(|i| x.row(i).transpose()).collect()
}

fn gradients(inst: &ExplicitInstance, x: &DMatrix<f64>) -> DMatrix<f64> {
    let g = inst.local_gradients(&rows(x));
    DMatrix::from_fn(inst.n, inst.d, |i, k| g[i][k])
}

fn check(x: &DMatrix<f64>, iteration: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() < 1e150) {
        Ok(())
    } else {
        Err(PepError::Diverged { iteration })
    }
}

/// Run the agent-level recursions of `method` from `x0` (one row per agent)
/// and evaluate `criterion`.
pub fn simulate_method(
    inst: &ExplicitInstance,
    method: Method,
    params: &MethodParams,
    schedule: &AveragingSchedule,
    x0: &DMatrix<f64>,
    criterion: CriterionKind,
) -> Result<SimulatorResult> {
    params.validate()?;
    if x0.nrows() != inst.n || x0.ncols() != inst.d {
        return Err(PepError::InvalidParameter("initial state has the wrong shape".into()));
    }
    let a = params.alpha;
    let tv = params.matrix_mode == MatrixMode::TimeVarying;
    let slot = |k: usize| if tv { k } else { 0 };
    let mut iterates = vec![x0.clone()];
    match method {
        Method::Dgd => {
            let mut x = x0.clone();
            for k in 0..params.k {
                let g = gradients(inst, &x);
                x = schedule.get(slot(k)) * &x - a * g;
                check(&x, k + 1)?;
                iterates.push(x.clone());
            }
        }
        Method::Diging => {
            let per_app = params.diging_grouping == DigingGrouping::PerApplication;
            let mut x = x0.clone();
            let mut g = gradients(inst, &x);
            let mut s = g.clone();
            for k in 0..params.k {
                let (wx, ws) = if per_app && tv {
                    (schedule.get(2 * k), schedule.get(2 * k + 1))
                } else {
                    (schedule.get(slot(k)), schedule.get(slot(k)))
                };
                let x_next = wx * &x - a * &s;
                let g_next = gradients(inst, &x_next);
                s = ws * &s + &g_next - &g;
                x = x_next;
                g = g_next;
                check(&x, k + 1)?;
                iterates.push(x.clone());
            }
        }
        Method::Extra => {
            if params.k >= 1 {
                let mut x_prev = x0.clone();
                let mut g_prev = gradients(inst, &x_prev);
                let mut wx_prev = schedule.get(slot(0)) * &x_prev;
                let mut x = &wx_prev - a * &g_prev;
                check(&x, 1)?;
                iterates.push(x.clone());
                for k in 1..params.k {
                    let g = gradients(inst, &x);
                    let wx = schedule.get(slot(k)) * &x;
                    let x_next = &x + &wx - 0.5 * &x_prev - 0.5 * &wx_prev - a * (&g - &g_prev);
                    x_prev = x;
                    wx_prev = wx;
                    g_prev = g;
                    x = x_next;
                    check(&x, k + 1)?;
                    iterates.push(x.clone());
                }
            }
        }
    }
    let criterion = evaluate_criterion(inst, &iterates, criterion);
    Ok(SimulatorResult { iterates, criterion })
}

/// Same formulas as the problem objectives.
pub fn evaluate_criterion(inst: &ExplicitInstance, iterates: &[DMatrix<f64>], criterion: CriterionKind) -> f64 {
    match criterion {
        CriterionKind::FvalGapAveraged => {
            let total = iterates.iter().fold(DVector::zeros(inst.d), |acc, x| {
                acc + x.row_sum().transpose()
            });
            let avg = total / (inst.n * iterates.len()) as f64;
            inst.f(&avg) - inst.f_star
        }
        CriterionKind::DistanceAtK => {
            let x = iterates.last().expect("at least the initial iterate");
            rows(x).iter().map(|xi| (xi - &inst.x_star).norm_squared()).sum::<f64>() / inst.n as f64
        }
    }
}

/// Starting states meeting `ic` with equality.
pub fn initial_points(inst: &ExplicitInstance, ic: InitialCondition, rng: &mut impl Rng) -> DMatrix<f64> {
    let d = ic.radius();
    match ic {
        InitialCondition::ConsensusStart { .. } => {
            let u = DVector::from_fn(inst.d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &inst.x_star + u.normalize() * d;
            DMatrix::from_fn(inst.n, inst.d, |_, k| x[k])
        }
        InitialCondition::MeanSquaredDistance { .. } => {
            let dev = DMatrix::from_fn(inst.n, inst.d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let scale = d * (inst.n as f64).sqrt() / dev.norm();
            DMatrix::from_fn(inst.n, inst.d, |i, k| inst.x_star[k] + scale * dev[(i, k)])
        }
    }
}

/// Mean squared deviation of the local gradients from their average.
pub fn gradient_spread(inst: &ExplicitInstance, x: &DMatrix<f64>) -> f64 {
    let g = gradients(inst, x);
    let mean = g.row_mean();
    (0..inst.n).map(|i| (g.row(i) - &mean).norm_squared()).sum::<f64>() / inst.n as f64
}

/// Make a quadratic instance and start meet `gradient_spread <= g²`: shrink
/// the start towards the optimum if needed, then scale the heterogeneity at
/// the optimum as far as the bound allows.
pub fn fit_gradient_spread(
    inst: &ExplicitInstance,
    x0: &DMatrix<f64>,
    g: f64,
) -> Result<(ExplicitInstance, DMatrix<f64>)> {
    let target = g * g;
    let centered = |x: &DMatrix<f64>| DMatrix::from_fn(inst.n, inst.d, |i, k| x[(i, k)] - inst.x_star[k]);
    let homog = inst.with_heterogeneity(0.0)?;
    let mut x0 = x0.clone();
    let s0 = gradient_spread(&homog, &x0);
    if s0 > 0.25 * target {
        let shrink = if target > 0.0 { (0.25 * target / s0).sqrt() } else { 0.0 };
        let dev = centered(&x0) * shrink;
        x0 = DMatrix::from_fn(inst.n, inst.d, |i, k| inst.x_star[k] + dev[(i, k)]);
    }
    // spread(t) = a t² + b t + c
    let p = gradients(&homog, &x0);
    let h = gradients(&inst.with_heterogeneity(1.0)?, &DMatrix::from_fn(inst.n, inst.d, |_, k| inst.x_star[k]));
    let (pm, hm) = (p.row_mean(), h.row_mean());
    let nf = inst.n as f64;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for i in 0..inst.n {
        let pi = p.row(i) - &pm;
        let hi = h.row(i) - &hm;
        a += hi.norm_squared() / nf;
        b += 2.0 * pi.dot(&hi) / nf;
        c += pi.norm_squared() / nf;
    }
    let t = if a < 1e-300 {
        1.0
    } else {
        let disc = (b * b - 4.0 * a * (c - target)).max(0.0);
        ((-b + disc.sqrt()) / (2.0 * a)).max(0.0)
    };
    Ok((inst.with_heterogeneity(t)?, x0))
}
