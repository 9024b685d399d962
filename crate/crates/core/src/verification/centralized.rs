//! Worst case of the centralized subgradient method with averaged iterates,
//! assembled directly as a dense SDP with a single Gram matrix.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::DVector;

use crate::error::{PepError, Result};

struct Point {
    x: DVector<f64>,
    g: DVector<f64>,
    /// Function value variable; `None` for the optimum, pinned to zero.
    f: Option<usize>,
}

/// Maximize `f(x_av) - f*` over convex functions with subgradients bounded
/// by `r` and starts within `d` of a minimizer, for `k` steps
/// `x_{j+1} = x_j - alpha g_j` and `x_av` the mean of `x_0 ... x_k`.
pub fn centralized_subgradient_pep(k: usize, alpha: f64, r: f64, d: f64) -> Result<f64> {
    // basis: x_0 - x*, g_0 ... g_{k-1}, g_av
    let n = k + 2;
    let e = |i: usize| {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    };
    let mut xs = vec![e(0)];
    for j in 0..k {
        let next = &xs[j] - alpha * e(1 + j);
        xs.push(next);
    }
    let x_av = xs.iter().fold(DVector::zeros(n), |a, x| a + x) / (k + 1) as f64;

    let mut pts = vec![Point { x: DVector::zeros(n), g: DVector::zeros(n), f: None }];
    for j in 0..k {
        pts.push(Point { x: xs[j].clone(), g: e(1 + j), f: Some(j) });
    }
    pts.push(Point { x: x_av, g: e(k + 1), f: Some(k) });
    let n_f = k + 1;
    let n_tri = n * (n + 1) / 2;
    let n_vars = n_tri + n_f;

    // a·z + c <= 0 rows, with ⟨M, G⟩ expanded over the scaled triangle
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let quad = |u: &DVector<f64>, v: &DVector<f64>| {
        let mut a = vec![0.0; n_vars];
        for j in 0..n {
            for i in 0..=j {
                let m = 0.5 * (u[i] * v[j] + u[j] * v[i]);
                let idx = j * (j + 1) / 2 + i;
                a[idx] = if i == j { m } else { 2.0 * m / std::f64::consts::SQRT_2 };
            }
        }
        a
    };
    for (ia, a) in pts.iter().enumerate() {
        for (ib, b) in pts.iter().enumerate() {
            if ia == ib {
                continue;
            }
            // f_b - f_a + <g_b, x_a - x_b> <= 0
            let mut row = quad(&b.g, &(&a.x - &b.x));
            if let Some(fb) = b.f {
                row[n_tri + fb] += 1.0;
            }
            if let Some(fa) = a.f {
                row[n_tri + fa] -= 1.0;
            }
            rows.push((row, 0.0));
        }
        if a.f.is_some() {
            rows.push((quad(&a.g, &a.g), -r * r));
        }
    }
    rows.push((quad(&e(0), &e(0)), -d * d));

    let m_lin = rows.len();
    let (mut ri, mut ci, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (r, (row, c)) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                ri.push(r);
                ci.push(j);
                vals.push(v);
            }
        }
        b.push(-c);
    }
    // -G_tri + s = 0, s in the PSD cone
    for t in 0..n_tri {
        ri.push(m_lin + t);
        ci.push(t);
        vals.push(-1.0);
        b.push(0.0);
    }
    let a = CscMatrix::new_from_triplets(m_lin + n_tri, n_vars, ri, ci, vals);
    let p = CscMatrix::zeros((n_vars, n_vars));
    let mut q = vec![0.0; n_vars];
    q[n_tri + k] = -1.0;
    let cones = [SupportedConeT::NonnegativeConeT(m_lin), SupportedConeT::PSDTriangleConeT(n)];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_feas(1e-9)
        .tol_gap_abs(1e-9)
        .tol_gap_rel(1e-9)
        .build()
        .map_err(|e| PepError::SolverFailure(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| PepError::SolverFailure(e.to_string()))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(-solver.solution.obj_val),
        s => Err(PepError::SolverFailure(format!("{s:?}"))),
    }
}
