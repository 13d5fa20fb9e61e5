//! Primal-dual interior-point solver for small complex Hermitian SDPs in
//! standard form:
//!
//! ```text
//! minimize   <C, X>
//! subject to <A_i, X> = b_i,  X ⪰ 0
//! ```
//!
//! with `<A, X> = Re tr(A X)`. Search directions are HKM with a Mehrotra
//! predictor-corrector step.

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};

const STEP_FRACTION: f64 = 0.95;

/// A Hermitian constraint matrix, kept sparse when it has few entries.
#[derive(Clone, Debug)]
pub struct Constraint {
    matrix: ComplexMatrix,
    entries: Option<Vec<(usize, usize, C64)>>,
}

impl Constraint {
    pub fn new(matrix: ComplexMatrix) -> Self {
        let n = matrix.rows();
        let nz: Vec<_> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| matrix[(i, j)] != C64::new(0.0, 0.0))
            .map(|(i, j)| (i, j, matrix[(i, j)]))
            .collect();
        let entries = (nz.len() <= n).then_some(nz);
        Self { matrix, entries }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `<self, X>`.
    fn inner(&self, x: &ComplexMatrix) -> f64 {
        match &self.entries {
            Some(nz) => nz.iter().map(|&(i, j, a)| (a * x[(j, i)]).re).sum(),
            None => self.matrix.trace_product_re(x),
        }
    }

    /// `X · self · W`.
    fn sandwich(&self, x: &ComplexMatrix, w: &ComplexMatrix) -> ComplexMatrix {
        match &self.entries {
            Some(nz) => {
                let n = x.rows();
                let mut out = ComplexMatrix::zeros(n, n);
                for &(k, l, a) in nz {
                    for i in 0..n {
                        let xa = x[(i, k)] * a;
                        for j in 0..n {
                            out[(i, j)] += xa * w[(l, j)];
                        }
                    }
                }
                out
            }
            None => &(x * &self.matrix) * w,
        }
    }

    fn add_scaled_to(&self, target: &mut ComplexMatrix, factor: f64) {
        match &self.entries {
            Some(nz) => {
                for &(i, j, a) in nz {
                    target[(i, j)] += a * factor;
                }
            }
            None => {
                let n = target.rows();
                for i in 0..n {
                    for j in 0..n {
                        target[(i, j)] += self.matrix[(i, j)] * factor;
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct StandardSdp {
    pub cost: ComplexMatrix,
    pub constraints: Vec<Constraint>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SdpIterate {
    pub x: ComplexMatrix,
    pub y: Vec<f64>,
    pub z: ComplexMatrix,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

pub const MAX_ITERATIONS: usize = 100;

impl StandardSdp {
    pub fn dim(&self) -> usize {
        self.cost.rows()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if !self.cost.is_square() || n == 0 {
            return Err(Error::DimensionMismatch("cost must be square and nonempty".into()));
        }
        if self.constraints.len() != self.rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} constraints with {} right-hand sides",
                self.constraints.len(),
                self.rhs.len()
            )));
        }
        if self.constraints.iter().any(|a| a.matrix.rows() != n || a.matrix.cols() != n) {
            return Err(Error::DimensionMismatch("constraint size differs from cost".into()));
        }
        Ok(())
    }

    fn apply(&self, x: &ComplexMatrix) -> Vec<f64> {
        self.constraints.iter().map(|a| a.inner(x)).collect()
    }

    /// `C − Σ y_i A_i`.
    fn slack(&self, y: &[f64]) -> ComplexMatrix {
        let mut s = self.cost.clone();
        for (a, &yi) in self.constraints.iter().zip(y) {
            a.add_scaled_to(&mut s, -yi);
        }
        s
    }

    /// Runs the interior-point method from `X = Z = I`, `y = 0` until the
    /// relative primal/dual infeasibilities and duality gap fall below `tol`.
    pub fn solve(&self, tol: f64) -> Result<SdpIterate> {
        self.validate()?;
        let n = self.dim();
        let m = self.constraints.len();
        let b_norm = self.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let c_norm = self.cost.frobenius_norm();

        let mut x = ComplexMatrix::identity(n);
        let mut z = ComplexMatrix::identity(n);
        let mut y = vec![0.0; m];

        for iter in 0..=MAX_ITERATIONS {
            let ax = self.apply(&x);
            let rp: Vec<f64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let rd = &self.slack(&y) - &z;
            let pobj = self.cost.trace_product_re(&x);
            let dobj: f64 = self.rhs.iter().zip(&y).map(|(b, v)| b * v).sum();
            let primal_inf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + b_norm);
            let dual_inf = rd.frobenius_norm() / (1.0 + c_norm);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            if primal_inf <= tol && dual_inf <= tol && gap <= tol {
                return Ok(SdpIterate {
                    x: x.hermitian_part(),
                    y,
                    z: z.hermitian_part(),
                    iterations: iter,
                    primal_objective: pobj,
                    dual_objective: dobj,
                });
            }
            if iter == MAX_ITERATIONS || !x.is_finite() || !z.is_finite() {
                break;
            }

            let mu = x.trace_product_re(&z) / n as f64;
            let z_inv = linalg::invert(&z)?.hermitian_part();

            // Schur complement M_ij = <A_i, X A_j Z⁻¹>
            let products: Vec<ComplexMatrix> =
                self.constraints.iter().map(|a| a.sandwich(&x, &z_inv)).collect();
            let schur = ComplexMatrix::from_fn(m, m, |i, j| {
                C64::new(self.constraints[i].inner(&products[j]), 0.0)
            })
            .hermitian_part();
            let chol = linalg::cholesky(&schur).map_err(|_| Error::NoConvergence {
                what: "SDP interior point (Schur complement lost definiteness)",
                iterations: iter,
            })?;

            let x_rd_zinv = &(&x * &rd) * &z_inv;
            let a_x_rd = self.apply(&x_rd_zinv);
            let direction = |g: &ComplexMatrix| -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
                let ag = self.apply(g);
                let rhs: Vec<C64> = (0..m)
                    .map(|i| C64::new(rp[i] - ag[i] + a_x_rd[i], 0.0))
                    .collect();
                let dy: Vec<f64> = cholesky_solve(&chol, &rhs).iter().map(|v| v.re).collect();
                let mut dz = rd.clone();
                for (a, &v) in self.constraints.iter().zip(&dy) {
                    a.add_scaled_to(&mut dz, -v);
                }
                let dx = (g - &(&(&x * &dz) * &z_inv)).hermitian_part();
                (dx, dy, dz)
            };

            // predictor
            let (dx_p, _, dz_p) = direction(&x.scale(-1.0));
            let ap = (STEP_FRACTION * max_step(&x, &dx_p)?).min(1.0);
            let ad = (STEP_FRACTION * max_step(&z, &dz_p)?).min(1.0);
            let x_aff = &x + &dx_p.scale(ap);
            let z_aff = &z + &dz_p.scale(ad);
            let mu_aff = x_aff.trace_product_re(&z_aff) / n as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let second_order = (&(&dx_p * &dz_p) * &z_inv).hermitian_part();
            let g = &(&z_inv.scale(sigma * mu) - &x) - &second_order;
            let (dx, dy, dz) = direction(&g);
            let ap = (STEP_FRACTION * max_step(&x, &dx)?).min(1.0);
            let ad = (STEP_FRACTION * max_step(&z, &dz)?).min(1.0);

            x = (&x + &dx.scale(ap)).hermitian_part();
            z = (&z + &dz.scale(ad)).hermitian_part();
            for (yi, d) in y.iter_mut().zip(&dy) {
                *yi += ad * d;
            }
        }
        Err(Error::NoConvergence {
            what: "SDP interior point",
            iterations: MAX_ITERATIONS,
        })
    }
}

fn cholesky_solve(l: &ComplexMatrix, rhs: &[C64]) -> Vec<C64> {
    let b = ComplexMatrix::from_vec(rhs.len(), 1, rhs.to_vec());
    let w = linalg::forward_substitute(l, &b);
    // back substitution with Lᴴ
    let n = rhs.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = w[(i, 0)];
        for k in i + 1..n {
            s -= l[(k, i)].conj() * out[k];
        }
        out[i] = s / l[(i, i)].conj();
    }
    out
}

/// Largest `α` with `X + α ΔX ⪰ 0`, infinite if every step stays feasible.
fn max_step(x: &ComplexMatrix, dx: &ComplexMatrix) -> Result<f64> {
    let l = linalg::cholesky(x).map_err(|_| Error::NoConvergence {
        what: "SDP interior point (iterate left the cone)",
        iterations: 0,
    })?;
    let w = linalg::whiten(&l, dx);
    let lambda_min = linalg::eigh(&w)?.values[0];
    Ok(if lambda_min < 0.0 {
        -1.0 / lambda_min
    } else {
        f64::INFINITY
    })
}
