use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{PepError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LocalFunction {
    /// `½ xᵀ A x + bᵀ x`
    Quadratic { a: DMatrix<f64>, b: DVector<f64> },
    /// `max_j (slopes[j]ᵀ x + offsets[j])`
    PiecewiseLinear {
        slopes: Vec<DVector<f64>>,
        offsets: Vec<f64>,
    },
}

impl LocalFunction {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            LocalFunction::Quadratic { a, b } => 0.5 * x.dot(&(a * x)) + b.dot(x),
            LocalFunction::PiecewiseLinear { slopes, offsets } => slopes
                .iter()
                .zip(offsets)
                .map(|(s, c)| s.dot(x) + c)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Gradient, or the subgradient of the first active piece.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            LocalFunction::Quadratic { a, b } => a * x + b,
            LocalFunction::PiecewiseLinear { slopes, offsets } => {
                let mut best = 0;
                let mut val = f64::NEG_INFINITY;
                for (j, (s, c)) in slopes.iter().zip(offsets).enumerate() {
                    let v = s.dot(x) + c;
                    if v > val {
                        val = v;
                        best = j;
                    }
                }
                slopes[best].clone()
            }
        }
    }
}

/// A concrete decentralized problem: `N` local functions on `R^d` and the
/// minimizer of their average.
#[derive(Debug, Clone)]
pub struct ExplicitInstance {
    pub n: usize,
    pub d: usize,
    pub functions: Vec<LocalFunction>,
    pub x_star: DVector<f64>,
    pub f_star: f64,
}

impl ExplicitInstance {
    /// `f(x) = (1/N) Σ f_i(x)`
    pub fn f(&self, x: &DVector<f64>) -> f64 {
        self.functions.iter().map(|f| f.value(x)).sum::<f64>() / self.n as f64
    }

    pub fn local_gradients(&self, xs: &[DVector<f64>]) -> Vec<DVector<f64>> {
        self.functions.iter().zip(xs).map(|(f, x)| f.gradient(x)).collect()
    }

    /// Scale the local gradients at the optimum by `t` without moving the
    /// optimum. Only defined for quadratics.
    pub fn with_heterogeneity(&self, t: f64) -> Result<ExplicitInstance> {
        let mut out = self.clone();
        for f in &mut out.functions {
            match f {
                LocalFunction::Quadratic { a, b } => {
                    let h = &*a * &self.x_star + &*b;
                    *b += (t - 1.0) * h;
                }
                LocalFunction::PiecewiseLinear { .. } => {
                    return Err(PepError::Unsupported("heterogeneity scaling of piecewise-linear functions".into()))
                }
            }
        }
        out.f_star = out.f(&out.x_star);
        Ok(out)
    }
}

fn random_orthogonal(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal)).qr().q()
}

/// `N` quadratics with Hessian spectra in `[mu, l]` (both ends attained when
/// `d >= 2`) and random linear terms.
pub fn quadratic_instance_sampler(mu: f64, l: f64, n: usize, d: usize, seed: u64) -> Result<ExplicitInstance> {
    if !(0.0 < mu && mu <= l) || n == 0 || d == 0 {
        return Err(PepError::InvalidParameter(format!("need 0 < mu <= L, N, d >= 1 (mu={mu}, L={l})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut functions = Vec::with_capacity(n);
    let mut sum_a = DMatrix::zeros(d, d);
    let mut sum_b = DVector::zeros(d);
    for _ in 0..n {
        let u = random_orthogonal(d, &mut rng);
        let mut eig: Vec<f64> = (0..d).map(|_| rng.gen_range(mu..=l)).collect();
        if d >= 2 {
            eig[0] = mu;
            eig[1] = l;
        }
        let a = &u * DMatrix::from_diagonal(&DVector::from_vec(eig)) * u.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let b = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        sum_a += &a;
        sum_b += &b;
        functions.push(LocalFunction::Quadratic { a, b });
    }
    let x_star = -sum_a
        .cholesky()
        .ok_or_else(|| PepError::InvalidParameter("sum of Hessians not positive definite".into()))?
        .solve(&sum_b);
    let mut inst = ExplicitInstance {
        n,
        d,
        functions,
        x_star,
        f_star: 0.0,
    };
    inst.f_star = inst.f(&inst.x_star);
    Ok(inst)
}

/// `N` convex piecewise-linear functions with every slope of norm at most
/// `r`. Each function includes the pieces `±r e_k`, so it is coercive and
/// the average has a minimizer, found by linear programming.
pub fn piecewise_linear_sampler(r: f64, n: usize, d: usize, pieces: usize, seed: u64) -> Result<ExplicitInstance> {
    if !(r > 0.0) || n == 0 || d == 0 {
        return Err(PepError::InvalidParameter(format!("need R > 0 and N, d >= 1 (R={r})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut functions = Vec::with_capacity(n);
    for _ in 0..n {
        let mut slopes = Vec::new();
        let mut offsets = Vec::new();
        for _ in 0..pieces {
            let dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = dir.norm().max(1e-12);
            let radius = r * rng.gen_range(0.2..=1.0_f64);
            slopes.push(dir * (radius / norm));
            offsets.push(rng.sample::<f64, _>(StandardNormal));
        }
        for k in 0..d {
            for sign in [1.0, -1.0] {
                let mut s = DVector::zeros(d);
                s[k] = sign * r;
                slopes.push(s);
                offsets.push(-rng.gen_range(1.0..3.0));
            }
        }
        functions.push(LocalFunction::PiecewiseLinear { slopes, offsets });
    }
    let x_star = minimize_piecewise_linear(&functions, d)?;
    let mut inst = ExplicitInstance {
        n,
        d,
        functions,
        x_star,
        f_star: 0.0,
    };
    inst.f_star = inst.f(&inst.x_star);
    Ok(inst)
}

/// `min (1/N) Σ t_i` s.t. `t_i >= slope_ijᵀ x + offset_ij`.
fn minimize_piecewise_linear(functions: &[LocalFunction], d: usize) -> Result<DVector<f64>> {
    let n = functions.len();
    let nv = d + n;
    let (mut rows, mut cols, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, f) in functions.iter().enumerate() {
        let LocalFunction::PiecewiseLinear { slopes, offsets } = f else {
            return Err(PepError::Unsupported("linear program for non-piecewise-linear functions".into()));
        };
        for (s, &c) in slopes.iter().zip(offsets) {
            let m = b.len();
            for k in 0..d {
                rows.push(m);
                cols.push(k);
                vals.push(s[k]);
            }
            rows.push(m);
            cols.push(d + i);
            vals.push(-1.0);
            b.push(-c);
        }
    }
    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, nv, rows, cols, vals);
    let p = CscMatrix::zeros((nv, nv));
    let mut q = vec![0.0; nv];
    q[d..].iter_mut().for_each(|v| *v = 1.0 / n as f64);
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_feas(1e-10)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .build()
        .map_err(|e| PepError::SolverFailure(format!("{e:?}")))?;
    let cones = [SupportedConeT::NonnegativeConeT(m)];
    let mut solver =
        DefaultSolver::new(&p, &q, &a, &b, &cones, settings).map_err(|e| PepError::SolverFailure(e.to_string()))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(DVector::from_column_slice(&solver.solution.x[..d])),
        s => Err(PepError::SolverFailure(format!("minimizer LP: {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    #[test]
    fn quadratic_spectra_within_bounds() {
        let inst = quadratic_instance_sampler(0.1, 1.0, 5, 3, 42).unwrap();
        for f in &inst.functions {
            let LocalFunction::Quadratic { a, .. } = f else { unreachable!() };
            for &e in SymmetricEigen::new(a.clone()).eigenvalues.iter() {
                assert!((0.1 - 1e-12..=1.0 + 1e-12).contains(&e));
            }
        }
        let g: DVector<f64> = inst
            .functions
            .iter()
            .map(|f| f.gradient(&inst.x_star))
            .fold(DVector::zeros(3), |a, g| a + g);
        assert!(g.norm() < 1e-10);
    }

    #[test]
    fn isotropic_case() {
        let inst = quadratic_instance_sampler(2.0, 2.0, 4, 1, 3).unwrap();
        let mean_b: f64 = inst
            .functions
            .iter()
            .map(|f| match f {
                LocalFunction::Quadratic { b, .. } => b[0],
                _ => unreachable!(),
            })
            .sum::<f64>()
            / 4.0;
        assert!((inst.x_star[0] + mean_b / 2.0).abs() < 1e-12);
    }

    /// Smooth strongly convex interpolation inequality at random pairs.
    #[test]
    fn quadratics_belong_to_class() {
        let (mu, l) = (0.1, 1.0);
        let inst = quadratic_instance_sampler(mu, l, 3, 2, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in &inst.functions {
            for _ in 0..50 {
                let x = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
                let (gx, gy) = (f.gradient(&x), f.gradient(&y));
                let dg = &gx - &gy;
                let dx = &x - &y;
                let rhs = f.value(&y)
                    + gy.dot(&dx)
                    + (dg.norm_squared() / l + mu * dx.norm_squared() - 2.0 * mu / l * dg.dot(&dx))
                        / (2.0 * (1.0 - mu / l));
                assert!(f.value(&x) >= rhs - 1e-10);
            }
        }
    }

    #[test]
    fn heterogeneity_scaling_keeps_optimum() {
        let inst = quadratic_instance_sampler(0.1, 1.0, 3, 2, 5).unwrap();
        let zero = inst.with_heterogeneity(0.0).unwrap();
        for f in &zero.functions {
            assert!(f.gradient(&inst.x_star).norm() < 1e-10);
        }
        let g: DVector<f64> = inst
            .with_heterogeneity(3.0)
            .unwrap()
            .functions
            .iter()
            .map(|f| f.gradient(&inst.x_star))
            .fold(DVector::zeros(2), |a, g| a + g);
        assert!(g.norm() < 1e-10);
    }

    #[test]
    fn piecewise_linear_minimizer() {
        let inst = piecewise_linear_sampler(1.0, 3, 2, 4, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for f in &inst.functions {
            let LocalFunction::PiecewiseLinear { slopes, .. } = f else { unreachable!() };
            assert!(slopes.iter().all(|s| s.norm() <= 1.0 + 1e-12));
        }
        for _ in 0..200 {
            let x = &inst.x_star + DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal)) * 0.5;
            assert!(inst.f(&x) >= inst.f_star - 1e-8);
        }
    }
}
