//! Seeded explicit instances simulated against the spectral bound.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::consensus::SpectralRange;
use crate::error::Result;
use crate::function_class::FunctionClass;
use crate::methods::{MatrixMode, Method, MethodParams};
use crate::pep::{CriterionKind, InitialCondition, Scenario};
use crate::problem::ConsensusModel;
use crate::solver::{solve, SolverAdapter};
use crate::verification::averaging::{make_averaging_matrix, sample_spectrum};
use crate::verification::instances::{piecewise_linear_sampler, quadratic_instance_sampler};
use crate::verification::simulate::{
    fit_gradient_spread, initial_points, matrices_needed, simulate_method, AveragingSchedule,
};

#[derive(Debug, Clone)]
pub struct SoundnessConfig {
    pub instances: usize,
    pub seed: u64,
    pub agents: Vec<usize>,
    pub dims: Vec<usize>,
    pub methods: Vec<Method>,
    pub lambdas: Vec<f64>,
    pub modes: Vec<MatrixMode>,
    pub k: usize,
    /// Allowed excess of a simulated value over its bound.
    pub tol: f64,
}

impl Default for SoundnessConfig {
    fn default() -> Self {
        SoundnessConfig {
            instances: 100,
            seed: 2024,
            agents: vec![2, 3, 5],
            dims: vec![1, 2],
            methods: Method::ALL.to_vec(),
            lambdas: vec![0.3, 0.6, 0.9],
            modes: vec![MatrixMode::Constant, MatrixMode::TimeVarying],
            k: 5,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundnessCase {
    pub index: usize,
    pub method: String,
    pub mode: String,
    pub lambda: f64,
    pub n: usize,
    pub d: usize,
    pub simulated: f64,
    pub bound: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub cases: Vec<SoundnessCase>,
    /// Problems solved, one per method, mode and range.
    pub solves: usize,
}

impl SoundnessReport {
    pub fn violations(&self) -> usize {
        self.cases.iter().filter(|c| c.violation).count()
    }

    pub fn worst_margin(&self) -> f64 {
        self.cases.iter().map(|c| c.simulated - c.bound).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scenario each method is checked under: DGD on bounded-subgradient
/// functions from a consensual start with the averaged value gap, the
/// gradient-tracking methods on smooth strongly convex functions with the
/// mean squared distance.
pub fn soundness_scenario(method: Method, k: usize, mode: MatrixMode, lambda: f64) -> Result<Scenario> {
    let range = ConsensusModel::Spectral(SpectralRange::symmetric(lambda)?);
    let s = match method {
        Method::Dgd => Scenario::new(
            method,
            MethodParams::new(k, 1.0 / (k.max(1) as f64).sqrt()).with_mode(mode),
            FunctionClass::BoundedSubgradientConvex { r: 1.0 },
            InitialCondition::ConsensusStart { d: 1.0 },
            CriterionKind::FvalGapAveraged,
            range,
        ),
        Method::Diging | Method::Extra => Scenario::new(
            method,
            MethodParams::new(k, 0.1).with_mode(mode),
            FunctionClass::SmoothStronglyConvex { mu: 0.1, l: 1.0 },
            InitialCondition::MeanSquaredDistance { d: 1.0 },
            CriterionKind::DistanceAtK,
            range,
        ),
    };
    Ok(s)
}

/// Case `i` cycles through methods, ranges, agent counts, dimensions and
/// matrix modes in that order.
pub fn soundness_sweep(adapter: &dyn SolverAdapter, cfg: &SoundnessConfig) -> Result<SoundnessReport> {
    let mut bounds: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut cases = Vec::with_capacity(cfg.instances);
    for index in 0..cfg.instances {
        let mut q = index;
        let mut pick = |len: usize| {
            let v = q % len;
            q /= len;
            v
        };
        let (mi, li, ni, di, oi) = (
            pick(cfg.methods.len()),
            pick(cfg.lambdas.len()),
            pick(cfg.agents.len()),
            pick(cfg.dims.len()),
            pick(cfg.modes.len()),
        );
        let (method, lambda, n, d, mode) = (cfg.methods[mi], cfg.lambdas[li], cfg.agents[ni], cfg.dims[di], cfg.modes[oi]);
        let scenario = soundness_scenario(method, cfg.k, mode, lambda)?;
        let bound = match bounds.get(&(mi, li, oi)) {
            Some(&b) => b,
            None => {
                let b = solve(adapter, &scenario.build()?.problem)?.value;
                bounds.insert((mi, li, oi), b);
                b
            }
        };

        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (inst, x0) = match scenario.class {
            FunctionClass::BoundedSubgradientConvex { r } => {
                let inst = piecewise_linear_sampler(r, n, d, 4, seed)?;
                let x0 = initial_points(&inst, scenario.init, &mut rng);
                (inst, x0)
            }
            FunctionClass::SmoothStronglyConvex { mu, l } => {
                let inst = quadratic_instance_sampler(mu, l, n, d, seed)?;
                let x0 = initial_points(&inst, scenario.init, &mut rng);
                match scenario.gradient_spread {
                    Some(g) => fit_gradient_spread(&inst, &x0, g)?,
                    None => (inst, x0),
                }
            }
        };
        let count = matrices_needed(method, &scenario.params);
        let matrices = (0..count)
            .map(|j| {
                let eigs = sample_spectrum(n, -lambda, lambda, &mut rng);
                make_averaging_matrix(n, &eigs, seed.wrapping_add(j as u64 + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        let sim = simulate_method(
            &inst,
            method,
            &scenario.params,
            &AveragingSchedule { matrices },
            &x0,
            scenario.criterion,
        )?;
        cases.push(SoundnessCase {
            index,
            method: method.to_string(),
            mode: mode.to_string(),
            lambda,
            n,
            d,
            simulated: sim.criterion,
            bound,
            violation: sim.criterion > bound + cfg.tol,
        });
    }
    Ok(SoundnessReport { cases, solves: bounds.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::ClarabelAdapter;

    #[test]
    fn small_sweep_has_no_violations() {
        let cfg = SoundnessConfig {
            instances: 12,
            lambdas: vec![0.5],
            modes: vec![MatrixMode::Constant],
            k: 3,
            ..SoundnessConfig::default()
        };
        let r = soundness_sweep(&ClarabelAdapter::default(), &cfg).unwrap();
        assert_eq!(r.cases.len(), 12);
        assert_eq!(r.solves, 3);
        assert_eq!(r.violations(), 0, "{:?}", r.cases);
        assert!(r.cases.iter().all(|c| c.simulated >= -1e-9));
    }
}
