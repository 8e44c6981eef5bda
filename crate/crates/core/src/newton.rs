//! Damped Newton iteration for square nonlinear systems with a forward
//! finite-difference Jacobian and a halving line search.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 100,
            fd_step: 1e-7,
            max_halvings: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub x: DVector<f64>,
    pub residual: DVector<f64>,
    pub iterations: usize,
}

impl NewtonOutcome {
    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }
}

/// Forward-difference Jacobian of `f` at `x` given `f(x) = r`.
pub fn fd_jacobian<F>(f: &mut F, x: &DVector<f64>, r: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut jac = DMatrix::zeros(r.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let rp = f(&xp)?;
        jac.set_column(j, &((rp - r) / h));
        xp[j] = x[j];
    }
    Ok(jac)
}

/// Solve `J·dx = −r`, falling back to a least-squares step when `J` is singular.
pub fn newton_step(jac: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    if let Some(dx) = jac.clone().lu().solve(&(-r)) {
        if dx.iter().all(|v| v.is_finite()) {
            return dx;
        }
    }
    jac.clone()
        .svd(true, true)
        .solve(&(-r), 1e-12)
        .unwrap_or_else(|_| DVector::zeros(r.len()))
}

pub fn solve<F>(mut f: F, x0: DVector<f64>, opts: &NewtonOptions) -> Result<NewtonOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut x = x0;
    let mut r = f(&x)?;
    for iter in 0..=opts.max_iter {
        let norm = r.norm();
        if norm <= opts.tol {
            return Ok(NewtonOutcome {
                x,
                residual: r,
                iterations: iter,
            });
        }
        if iter == opts.max_iter {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: norm,
            });
        }
        let jac = fd_jacobian(&mut f, &x, &r, opts.fd_step)?;
        let dx = newton_step(&jac, &r);

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut fallback = None;
        for _ in 0..=opts.max_halvings {
            let trial = &x + &dx * alpha;
            if let Ok(rt) = f(&trial) {
                if rt.norm() < norm {
                    accepted = Some((trial, rt));
                    break;
                }
                fallback = Some((trial, rt));
            }
            alpha *= 0.5;
        }
        match accepted.or(fallback) {
            Some((xn, rn)) => {
                x = xn;
                r = rn;
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iter + 1,
                    residual: norm,
                })
            }
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_a_small_nonlinear_system() {
        // x² + y² = 4, x·y = 1
        let f = |v: &DVector<f64>| Ok(DVector::from_vec(vec![v[0] * v[0] + v[1] * v[1] - 4.0, v[0] * v[1] - 1.0]));
        let out = solve(f, DVector::from_vec(vec![2.0, 0.3]), &NewtonOptions::default()).unwrap();
        assert!(out.residual_norm() <= 1e-7);
        assert_relative_eq!(out.x[0] * out.x[1], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn reports_no_convergence() {
        // x² + 1 = 0 has no real root.
        let f = |v: &DVector<f64>| Ok(DVector::from_vec(vec![v[0] * v[0] + 1.0]));
        let opts = NewtonOptions {
            max_iter: 10,
            ..Default::default()
        };
        assert!(matches!(
            solve(f, DVector::from_vec(vec![0.5]), &opts),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn zero_iterations_at_a_root() {
        let f = |v: &DVector<f64>| Ok(v.clone());
        let out = solve(f, DVector::zeros(3), &NewtonOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
    }
}
