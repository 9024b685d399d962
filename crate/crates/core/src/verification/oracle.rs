use crate::consensus::SpectralRange;
use crate::error::{PepError, Result};
use crate::pep::Scenario;
use crate::problem::ConsensusModel;
use crate::solver::{solve, SolverAdapter};

pub const DEFAULT_GRID_POINTS: usize = 41;

#[derive(Debug, Clone)]
pub struct ScalarOracle {
    /// `(scalar, value)` for every grid point that solved.
    pub values: Vec<(f64, f64)>,
    pub best: f64,
    pub argmax: f64,
}

/// Evenly spaced points covering `range`.
pub fn scalar_grid(range: SpectralRange, points: usize) -> Vec<f64> {
    if points <= 1 || range.lam_minus == range.lam_plus {
        return vec![range.lam_plus];
    }
    let step = (range.lam_plus - range.lam_minus) / (points - 1) as f64;
    (0..points).map(|i| range.lam_minus + step * i as f64).collect()
}

/// Lower bound on the spectral worst case: every matrix acts as the same
/// scalar `v` on the disagreement space, maximized over the grid.
pub fn scalar_oracle(
    adapter: &dyn SolverAdapter,
    scenario: &Scenario,
    range: SpectralRange,
    grid: &[f64],
) -> Result<ScalarOracle> {
    if grid.is_empty() {
        return Err(PepError::InvalidParameter("empty scalar grid".into()));
    }
    if let Some(v) = grid.iter().find(|&&v| !range.contains(v)) {
        return Err(PepError::InvalidParameter(format!(
            "scalar {v} lies outside [{}, {}]",
            range.lam_minus, range.lam_plus
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    for &v in grid {
        let built = scenario.with_consensus(ConsensusModel::ExactScalarAll(v)).build()?;
        values.push((v, solve(adapter, &built.problem)?.value));
    }
    let (argmax, best) = values
        .iter()
        .copied()
        .fold((grid[0], f64::NEG_INFINITY), |acc, (v, f)| if f > acc.1 { (v, f) } else { acc });
    Ok(ScalarOracle { values, best, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_class::FunctionClass;
    use crate::methods::{Method, MethodParams};
    use crate::pep::{CriterionKind, InitialCondition};
    use crate::solver::ClarabelAdapter;

    fn scenario(lam: f64) -> Scenario {
        Scenario::new(
            Method::Dgd,
            MethodParams::new(2, 0.5),
            FunctionClass::BoundedSubgradientConvex { r: 1.0 },
            InitialCondition::MeanSquaredDistance { d: 1.0 },
            CriterionKind::FvalGapAveraged,
            ConsensusModel::Spectral(SpectralRange::symmetric(lam).unwrap()),
        )
    }

    #[test]
    fn grid_endpoints() {
        let g = scalar_grid(SpectralRange::symmetric(0.5).unwrap(), 41);
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], -0.5);
        assert!((g[40] - 0.5).abs() < 1e-15);
        assert!((g[20]).abs() < 1e-15);
    }

    #[test]
    fn rejects_points_outside_range() {
        let range = SpectralRange::symmetric(0.3).unwrap();
        let r = scalar_oracle(&ClarabelAdapter::default(), &scenario(0.3), range, &[0.0, 0.4]);
        assert!(matches!(r, Err(PepError::InvalidParameter(_))));
    }

    #[test]
    fn oracle_bounds_spectral_value_from_below() {
        let range = SpectralRange::symmetric(0.5).unwrap();
        let adapter = ClarabelAdapter::default();
        let sc = scenario(0.5);
        let pep = solve(&adapter, &sc.build().unwrap().problem).unwrap().value;
        let o = scalar_oracle(&adapter, &sc, range, &scalar_grid(range, 5)).unwrap();
        assert_eq!(o.values.len(), 5);
        assert!(o.best <= pep + 1e-6, "{} > {}", o.best, pep);
    }
}
