use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consensus::SpectralRange;
use crate::error::{PepError, Result};
use crate::function_class::FunctionClass;
use crate::methods::{DigingGrouping, MatrixMode, Method, MethodParams};
use crate::pep::{default_gradient_spread, CriterionKind, InitialCondition, Scenario};
use crate::problem::ConsensusModel;
use crate::solver::SolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKind {
    /// Convex with subgradients bounded by `r`.
    BoundedSubgradient,
    /// `mu`-strongly convex and `l`-smooth.
    SmoothStronglyConvex,
}

impl FromStr for ClassKind {
    type Err = PepError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bounded-subgradient" | "fr" | "F_R" => Ok(ClassKind::BoundedSubgradient),
            "smooth-strongly-convex" | "fmul" | "F_muL" => Ok(ClassKind::SmoothStronglyConvex),
            other => Err(PepError::InvalidParameter(format!("unknown function class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Consensus,
    Msd,
}

impl FromStr for InitKind {
    type Err = PepError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consensus" => Ok(InitKind::Consensus),
            "msd" | "mean-squared-distance" => Ok(InitKind::Msd),
            other => Err(PepError::InvalidParameter(format!("unknown initial condition `{other}`"))),
        }
    }
}

/// Step size policy: a number, `"1/sqrt(K)"` or `"optimize"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlphaRepr", into = "AlphaRepr")]
pub enum AlphaSpec {
    Fixed(f64),
    InvSqrtK,
    Optimize,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AlphaRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<AlphaRepr> for AlphaSpec {
    type Error = PepError;
    fn try_from(r: AlphaRepr) -> Result<Self> {
        match r {
            AlphaRepr::Number(v) => Ok(AlphaSpec::Fixed(v)),
            AlphaRepr::Text(s) => s.parse(),
        }
    }
}

impl From<AlphaSpec> for AlphaRepr {
    fn from(a: AlphaSpec) -> Self {
        match a {
            AlphaSpec::Fixed(v) => AlphaRepr::Number(v),
            other => AlphaRepr::Text(other.to_string()),
        }
    }
}

impl FromStr for AlphaSpec {
    type Err = PepError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "optimize" => Ok(AlphaSpec::Optimize),
            "1/sqrt(K)" | "1/sqrtK" | "inv-sqrt-k" => Ok(AlphaSpec::InvSqrtK),
            t => t
                .parse::<f64>()
                .map(AlphaSpec::Fixed)
                .map_err(|_| PepError::InvalidParameter(format!("step size `{t}` is not a number, `1/sqrt(K)` or `optimize`"))),
        }
    }
}

impl fmt::Display for AlphaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSpec::Fixed(v) => write!(f, "{v}"),
            AlphaSpec::InvSqrtK => f.write_str("1/sqrt(K)"),
            AlphaSpec::Optimize => f.write_str("optimize"),
        }
    }
}

/// Step size search: a log-spaced grid on `[lo, hi]`, then golden-section
/// refinement around the best grid point. Unset bounds default to
/// `[0.01/L, 2/L]` on smooth classes and `[0.01 D/R, 2 D/R]` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaSearch {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub grid_points: usize,
    pub refine_iterations: usize,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        AlphaSearch {
            lo: None,
            hi: None,
            grid_points: 25,
            refine_iterations: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    #[serde(rename = "K")]
    pub k: usize,
    pub class: ClassKind,
    #[serde(rename = "R")]
    pub r: f64,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub criterion: CriterionKind,
    pub init: InitKind,
    pub matrix_mode: MatrixMode,
    pub diging_grouping: DigingGrouping,
    pub lambda_grid: Vec<f64>,
    pub alpha: AlphaSpec,
    pub alpha_search: AlphaSearch,
    /// Bound on the initial gradient disagreement; unset means the class
    /// default (`D` on smooth classes, none otherwise).
    pub gradient_spread: Option<f64>,
    pub solver: SolverSettings,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// Plot `log10(1 + bound)` instead of the bound.
    pub log_shift: bool,
    /// Include the wall time column. Tables without it are byte-identical
    /// across runs.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    /// DGD on bounded-subgradient functions: `K = 10`, `R = D = 1`,
    /// `alpha = 1/sqrt(K)`, `lambda` from 0 to 0.9.
    fn default() -> Self {
        ExperimentConfig {
            method: Method::Dgd,
            k: 10,
            class: ClassKind::BoundedSubgradient,
            r: 1.0,
            mu: 0.1,
            l: 1.0,
            d: 1.0,
            criterion: CriterionKind::FvalGapAveraged,
            init: InitKind::Consensus,
            matrix_mode: MatrixMode::Constant,
            diging_grouping: DigingGrouping::PerIteration,
            lambda_grid: lambda_range(0.0, 0.9, 0.1),
            alpha: AlphaSpec::InvSqrtK,
            alpha_search: AlphaSearch::default(),
            gradient_spread: None,
            solver: SolverSettings::default(),
            seed: 0,
            jobs: 1,
            out: None,
            svg: None,
            log_shift: false,
            record_wall_time: true,
        }
    }
}

/// `lo, lo + step, ...` up to `hi` inclusive, rounded to 12 digits.
pub fn lambda_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((lo + step * i as f64) * 1e12).round() / 1e12).collect()
}

/// Parse `a:step:b` or a comma-separated list.
pub fn parse_lambda_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || PepError::InvalidParameter(format!("cannot parse lambda grid `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        if !(v[1] > 0.0) || v[2] < v[0] {
            return Err(bad());
        }
        return Ok(lambda_range(v[0], v[2], v[1]));
    }
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
}

impl ExperimentConfig {
    /// The smooth strongly convex setup: DIGing, `mu = 0.1`, `L = 1`,
    /// `D = 1`, distance criterion from a mean-squared-distance start,
    /// optimized step size.
    pub fn smooth_default(method: Method) -> Self {
        ExperimentConfig {
            method,
            class: ClassKind::SmoothStronglyConvex,
            criterion: CriterionKind::DistanceAtK,
            init: InitKind::Msd,
            alpha: AlphaSpec::Optimize,
            ..Self::default()
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| PepError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn function_class(&self) -> FunctionClass {
        match self.class {
            ClassKind::BoundedSubgradient => FunctionClass::BoundedSubgradientConvex { r: self.r },
            ClassKind::SmoothStronglyConvex => FunctionClass::SmoothStronglyConvex { mu: self.mu, l: self.l },
        }
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match self.init {
            InitKind::Consensus => InitialCondition::ConsensusStart { d: self.d },
            InitKind::Msd => InitialCondition::MeanSquaredDistance { d: self.d },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.function_class().validate()?;
        self.initial_condition().validate()?;
        if self.lambda_grid.is_empty() {
            return Err(PepError::Config("lambda grid is empty".into()));
        }
        for &l in &self.lambda_grid {
            SpectralRange::symmetric(l)?;
        }
        if let AlphaSpec::Fixed(a) = self.alpha {
            MethodParams::new(self.k, a).validate()?;
        }
        if self.alpha == AlphaSpec::InvSqrtK && self.k == 0 {
            return Err(PepError::Config("alpha = 1/sqrt(K) needs K >= 1".into()));
        }
        if self.alpha == AlphaSpec::Optimize {
            let (lo, hi) = self.alpha_bounds();
            if !(lo > 0.0 && hi > lo) {
                return Err(PepError::Config(format!("alpha search range [{lo}, {hi}] is empty")));
            }
            if self.alpha_search.grid_points < 2 {
                return Err(PepError::Config("alpha search needs at least 2 grid points".into()));
            }
        }
        if let Some(g) = self.gradient_spread {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(PepError::Config(format!("gradient spread must be nonnegative, got {g}")));
            }
        }
        Ok(())
    }

    pub fn alpha_bounds(&self) -> (f64, f64) {
        let (lo, hi) = match self.class {
            ClassKind::SmoothStronglyConvex => (0.01 / self.l, 2.0 / self.l),
            ClassKind::BoundedSubgradient => (0.01 * self.d / self.r, 2.0 * self.d / self.r),
        };
        (self.alpha_search.lo.unwrap_or(lo), self.alpha_search.hi.unwrap_or(hi))
    }

    /// Step size for a non-optimized policy.
    pub fn fixed_alpha(&self) -> Option<f64> {
        match self.alpha {
            AlphaSpec::Fixed(a) => Some(a),
            AlphaSpec::InvSqrtK => Some(1.0 / (self.k.max(1) as f64).sqrt()),
            AlphaSpec::Optimize => None,
        }
    }

    pub fn scenario(&self, lambda: f64, alpha: f64) -> Result<Scenario> {
        let mut params = MethodParams::new(self.k, alpha).with_mode(self.matrix_mode);
        params.diging_grouping = self.diging_grouping;
        let class = self.function_class();
        let init = self.initial_condition();
        let mut s = Scenario::new(
            self.method,
            params,
            class,
            init,
            self.criterion,
            ConsensusModel::Spectral(SpectralRange::symmetric(lambda)?),
        );
        s.gradient_spread = self.gradient_spread.or(default_gradient_spread(class, init));
        Ok(s)
    }

    /// Short series name, `method-mode`.
    pub fn series_name(&self) -> String {
        format!("{}-{}", self.method, self.matrix_mode)
    }
}
