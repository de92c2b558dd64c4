//! Independent references for the test suites.
//!
//! Nothing here calls into the safety filter: the QP reference projects onto
//! the constraint halfspace directly, and the derivative check compares a
//! supplied Jacobian with a directional central difference.

use crate::{Error, Matrix, Result, Vector};

/// `min ‖v − target‖²  s.t.  a·v ≥ −b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub target: Vector,
    pub a: Vector,
    pub b: f64,
}

/// Euclidean projection of `target` onto `{v : a·v ≥ −b}`.
pub fn solve_qp_projection(p: &QpProblem) -> Result<Vector> {
    let slack = p.a.dot(&p.target) + p.b;
    if slack >= 0.0 {
        return Ok(p.target.clone());
    }
    let a2 = p.a.norm_squared();
    if a2 == 0.0 {
        return Err(Error::Infeasible);
    }
    Ok(&p.target - &p.a * (slack / a2))
}

/// KKT residuals of a candidate solution: `(primal violation, stationarity)`.
///
/// Stationarity is the norm of the component of `v − target` orthogonal to
/// `a` plus any component pointing against `a`; both are zero at the optimum.
pub fn kkt_residuals(p: &QpProblem, v: &Vector) -> (f64, f64) {
    let violation = (-(p.a.dot(v) + p.b)).max(0.0);
    let step = v - &p.target;
    let a2 = p.a.norm_squared();
    if a2 == 0.0 {
        return (violation, step.norm());
    }
    let along = step.dot(&p.a) / a2;
    let orth = (&step - &p.a * along).norm();
    (violation, orth + (-along).max(0.0) * p.a.norm())
}

/// Step used by [`check_derivative`].
pub const DERIVATIVE_STEP: f64 = 1e-6;

/// `‖J·d − (f(x + hd) − f(x − hd))/(2h)‖` with `h = 1e−6`.
pub fn check_derivative(f: impl Fn(&Vector) -> Vector, jacobian: &Matrix, x: &Vector, direction: &Vector) -> f64 {
    let h = DERIVATIVE_STEP;
    let fd = (f(&(x + direction * h)) - f(&(x - direction * h))) / (2.0 * h);
    (jacobian * direction - fd).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    #[test]
    fn projection_examples() {
        let inactive = QpProblem {
            target: v2(1.0, 1.0),
            a: v2(1.0, 0.0),
            b: 0.0,
        };
        assert_eq!(solve_qp_projection(&inactive).unwrap(), v2(1.0, 1.0));

        // reference point: a = ∇h(1,0) = (−2,−6), b = α h = 9, target = (2,5)
        let reference = QpProblem {
            target: v2(2.0, 5.0),
            a: v2(-2.0, -6.0),
            b: 9.0,
        };
        assert_abs_diff_eq!(
            solve_qp_projection(&reference).unwrap(),
            v2(0.75, 1.25),
            epsilon = 1e-12
        );

        let boundary = QpProblem {
            target: v2(-1.0, 0.0),
            a: v2(1.0, 0.0),
            b: 0.0,
        };
        assert_eq!(solve_qp_projection(&boundary).unwrap(), v2(0.0, 0.0));
    }

    #[test]
    fn infeasible_when_row_vanishes() {
        let p = QpProblem {
            target: v2(1.0, 1.0),
            a: v2(0.0, 0.0),
            b: -1.0,
        };
        assert_eq!(solve_qp_projection(&p), Err(Error::Infeasible));
        let ok = QpProblem { b: 0.0, ..p };
        assert!(solve_qp_projection(&ok).is_ok());
    }

    #[test]
    fn linear_map_has_negligible_discrepancy() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let f = |x: &Vector| &a * x;
        let d = check_derivative(f, &a, &v2(0.5, 0.25), &v2(1.0, -1.0));
        assert!(d <= 1e-10, "{d}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kkt_holds_at_projection(tx in -5.0..5.0f64, ty in -5.0..5.0f64, ax in -5.0..5.0f64, ay in -5.0..5.0f64, b in -5.0..5.0f64) {
                let p = QpProblem { target: v2(tx, ty), a: v2(ax, ay), b };
                prop_assume!(p.a.norm() > 1e-3);
                let v = solve_qp_projection(&p).unwrap();
                let active = p.a.dot(&p.target) + p.b < 0.0;
                if active {
                    prop_assert!((p.a.dot(&v) + p.b).abs() <= 1e-10 * (1.0 + p.b.abs() + p.a.norm() * p.target.norm()));
                } else {
                    prop_assert_eq!(&v, &p.target);
                }
                let (viol, stat) = kkt_residuals(&p, &v);
                prop_assert!(viol <= 1e-10);
                prop_assert!(stat <= 1e-9);
            }
        }
    }
}
