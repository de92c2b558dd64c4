//! Barrier-function geometry for a single circular (spherical) obstacle.
//!
//! `h(x) = ‖x − c‖² − r²` is nonnegative outside the obstacle disk, so the safe
//! set is `C₁ = {h ≥ 0}` and its relaxation `C_γ = {h + γ ≥ 0}`.

use crate::{Error, Result, Vector};

/// Barrier `h(x) = ‖x − center‖² − radius²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleCbf {
    center: Vector,
    radius: f64,
}

impl ObstacleCbf {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidInput("obstacle center has dimension 0".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "obstacle radius must be positive and finite, got {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("obstacle center is not finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        (x - &self.center).norm_squared() - self.radius * self.radius
    }

    /// `∇h(x) = 2(x − center)`, returned as a column vector.
    pub fn grad(&self, x: &Vector) -> Vector {
        (x - &self.center) * 2.0
    }

    /// Membership in `C_γ`; `gamma = 0` is membership in `C₁`.
    pub fn is_safe(&self, x: &Vector, gamma: f64) -> bool {
        self.eval(x) + gamma >= 0.0
    }
}

/// Axis-aligned box of positions (the workspace `X₁`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    lower: Vector,
    upper: Vector,
}

impl StateBox {
    /// Degenerate boxes (`lower == upper` in some axis) are accepted; a box with
    /// `lower > upper` in any axis is empty and rejected.
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidInput("box has dimension 0".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidInput(format!("box bound {i} is not finite")));
            }
            if lo > hi {
                return Err(Error::InvalidInput(format!(
                    "empty box: lower[{i}] = {lo} > upper[{i}] = {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// All `2ⁿ` corners (fewer distinct points when the box is degenerate).
    pub fn corners(&self) -> Vec<Vector> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                Vector::from_iterator(
                    n,
                    (0..n).map(|i| {
                        if mask >> i & 1 == 1 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    }),
                )
            })
            .collect()
    }

    /// Uniform tensor grid with `per_axis` points along every axis.
    pub fn grid(&self, per_axis: usize) -> Vec<Vector> {
        let n = self.dim();
        let per_axis = per_axis.max(1);
        let total = per_axis.pow(n as u32);
        let step = |i: usize, k: usize| {
            if per_axis == 1 {
                self.lower[i]
            } else {
                self.lower[i] + (self.upper[i] - self.lower[i]) * k as f64 / (per_axis - 1) as f64
            }
        };
        (0..total)
            .map(|mut idx| {
                Vector::from_iterator(
                    n,
                    (0..n).map(|i| {
                        let k = idx % per_axis;
                        idx /= per_axis;
                        step(i, k)
                    }),
                )
            })
            .collect()
    }
}

/// Linear extended class-K function `α(h) = alpha·h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassKGain(f64);

impl ClassKGain {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    pub fn apply(self, h: f64) -> f64 {
        self.0 * h
    }
}

/// `η = max over the box of ‖∇h(x)‖`.
///
/// `‖∇h‖ = 2‖x − center‖` is convex, so its maximum over a box sits at a
/// corner; the grid pass only matters for barriers that are not quadratic.
pub fn compute_eta(cbf: &ObstacleCbf, bx: &StateBox, grid_resolution: usize) -> Result<f64> {
    if grid_resolution < 2 {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be at least 2, got {grid_resolution}"
        )));
    }
    if bx.dim() != cbf.dim() {
        return Err(Error::DimensionMismatch {
            expected: cbf.dim(),
            got: bx.dim(),
        });
    }
    let eta = bx
        .corners()
        .iter()
        .chain(bx.grid(grid_resolution).iter())
        .map(|x| cbf.grad(x).norm())
        .fold(0.0, f64::max);
    Ok(eta)
}
