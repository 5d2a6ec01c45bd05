//! Preconditioned conjugate gradients for the constrained stiffness system.
//!
//! Convergence is judged on the true relative residual `‖b − K V‖ / ‖b‖`.
//! The recurrence residual is only used to decide when to check; a true
//! residual above tolerance replaces the recurrence and iteration resumes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::LinearSystem;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    #[default]
    Jacobi,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveSettings {
    pub rel_tolerance: f64,
    /// Defaults to ten times the system size.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-8,
            max_iterations: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolveSettings {
    pub fn with_tolerance(rel_tolerance: f64) -> Self {
        Self {
            rel_tolerance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(SolveError::Settings(format!(
                "tolerance {} not in (0, 1)",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(SolveError::Settings("max_iterations must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver settings: {0}")]
    Settings(String),
    #[error("no Dirichlet node; the system is singular")]
    Unconstrained,
    #[error("non-positive diagonal at row {0}")]
    Diagonal(usize),
    #[error("matrix is not positive definite (breakdown at iteration {0})")]
    Breakdown(usize),
    #[error("no convergence after {iterations} iterations (relative residual {:.3e})", history.last().copied().unwrap_or(f64::NAN))]
    NotConverged {
        iterations: usize,
        /// Relative residual after every iteration.
        history: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult<T> {
    /// Nodal potential in volts.
    pub potential: Vec<T>,
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `‖b − K x‖₂ / ‖b‖₂`.
pub fn relative_residual<T: Real>(sys: &LinearSystem<T>, x: &[T]) -> f64 {
    let kx = sys.matrix.mul_vec(x);
    let r: Vec<T> = sys.rhs.iter().zip(&kx).map(|(&b, &k)| b - k).collect();
    (norm(&r) / norm(&sys.rhs)).as_f64()
}

pub fn solve_pcg<T: Real>(
    sys: &LinearSystem<T>,
    s: &SolveSettings,
) -> Result<SolveResult<T>, SolveError> {
    s.validate()?;
    let n = sys.dim();
    if !sys.constrained.iter().any(|&c| c) {
        return Err(SolveError::Unconstrained);
    }
    let b = &sys.rhs;
    let b_norm = norm(b);
    if b_norm == T::zero() {
        return Ok(SolveResult {
            potential: vec![T::zero(); n],
            iterations: 0,
            residual: 0.0,
        });
    }

    let inv_diag: Vec<T> = match s.preconditioner {
        Preconditioner::Jacobi => sys
            .matrix
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d > T::zero() {
                    Ok(T::one() / d)
                } else {
                    Err(SolveError::Diagonal(i))
                }
            })
            .collect::<Result<_, _>>()?,
        Preconditioner::None => vec![T::one(); n],
    };
    let precondition = |r: &[T], z: &mut [T]| {
        for ((zi, &ri), &d) in z.iter_mut().zip(r).zip(&inv_diag) {
            *zi = ri * d;
        }
    };

    let tol = T::of(s.rel_tolerance);
    let max_iter = s.max_iterations.unwrap_or(10 * n.max(1));
    let mut x = vec![T::zero(); n];
    let mut r = b.clone();
    let mut z = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();

    for it in 1..=max_iter {
        sys.matrix.mul_vec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > T::zero()) {
            return Err(SolveError::Breakdown(it));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * q[i];
        }
        let rel = norm(&r) / b_norm;
        history.push(rel.as_f64());

        let mut restart = false;
        if rel <= tol {
            sys.matrix.mul_vec_into(&x, &mut q);
            for i in 0..n {
                r[i] = b[i] - q[i];
            }
            let true_rel = norm(&r) / b_norm;
            if true_rel <= tol {
                return Ok(SolveResult {
                    potential: x,
                    iterations: it,
                    residual: true_rel.as_f64(),
                });
            }
            *history.last_mut().unwrap() = true_rel.as_f64();
            restart = true;
        }

        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        if restart {
            p.copy_from_slice(&z);
        } else {
            let beta = rz_new / rz;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        rz = rz_new;
    }

    Err(SolveError::NotConverged {
        iterations: max_iter,
        history,
    })
}
