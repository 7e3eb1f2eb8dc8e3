use nalgebra::DVector;

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// `|A x - b| / |b|` at the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradient for a symmetric positive-definite operator given as a
/// closure. Starts from `x0` and stops once the relative residual drops to
/// `tol` or after `max_iter` iterations, returning the last iterate either way.
pub fn conjugate_gradient<F>(apply: F, b: &DVector<f64>, x0: DVector<f64>, tol: f64, max_iter: usize) -> CgOutcome
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    preconditioned_conjugate_gradient(apply, |r| r.clone(), b, x0, tol, max_iter)
}

/// Conjugate gradient with a symmetric positive-definite preconditioner
/// `precond(r) ~ A^-1 r`. Stopping uses the unpreconditioned residual.
pub fn preconditioned_conjugate_gradient<F, M>(
    apply: F,
    precond: M,
    b: &DVector<f64>,
    x0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    M: Fn(&DVector<f64>) -> DVector<f64>,
{
    let b_norm = b.norm();
    if b_norm == 0.0 {
        let n = b.len();
        return CgOutcome {
            x: DVector::zeros(n),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut x = x0;
    let mut r = b - apply(&x);
    let target = (tol * b_norm).powi(2);
    let mut z = precond(&r);
    let mut rz = r.dot(&z);
    let mut p = z.clone();
    let mut iterations = 0;
    while r.norm_squared() > target && iterations < max_iter {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        z = precond(&r);
        let rz_next = r.dot(&z);
        p = &z + &p * (rz_next / rz);
        rz = rz_next;
        iterations += 1;
    }
    // recompute to avoid drift in the recursive residual
    let relative_residual = (b - apply(&x)).norm() / b_norm;
    CgOutcome {
        x,
        iterations,
        relative_residual,
        converged: relative_residual <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn solves_small_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let out = conjugate_gradient(|x| &a * x, &b, DVector::zeros(3), 1e-12, 50);
        assert!(out.converged);
        let direct = a.clone().cholesky().unwrap().solve(&b);
        assert!((out.x - direct).amax() < 1e-10);
    }

    #[test]
    fn zero_rhs() {
        let out = conjugate_gradient(|x| x * 2.0, &DVector::zeros(4), DVector::from_element(4, 1.0), 1e-8, 10);
        assert_eq!(out.x, DVector::zeros(4));
        assert!(out.converged);
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let a = DMatrix::from_fn(20, 20, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
        let b = DVector::from_element(20, 1.0);
        let out = conjugate_gradient(|x| &a * x, &b, DVector::zeros(20), 1e-14, 3);
        assert_eq!(out.iterations, 3);
        assert!(!out.converged);
        assert!(out.relative_residual < 1.0);
    }

    #[test]
    fn jacobi_preconditioner_agrees() {
        let a = DMatrix::from_fn(6, 6, |i, j| if i == j { 10.0 * (i + 1) as f64 } else { 1.0 / (1 + i + j) as f64 });
        let b = DVector::from_fn(6, |i, _| (i as f64).sin());
        let d = a.diagonal();
        let out = preconditioned_conjugate_gradient(|x| &a * x, |r| r.component_div(&d), &b, DVector::zeros(6), 1e-13, 50);
        assert!(out.converged);
        let direct = a.clone().cholesky().unwrap().solve(&b);
        assert!((out.x - direct).amax() < 1e-11);
    }
}
