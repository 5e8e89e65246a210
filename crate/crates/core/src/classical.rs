//! Classical reference path: discrete Laplacian with zeroed boundary rows
//! and Krylov evaluation of `exp(nu t L) phi0`.

use crate::dataset::ExperimentParams;
use crate::error::{Error, Result};
use crate::krylov::{self, KrylovConfig, LinearOperator};
use crate::pde::{self, ColeHopfField, Diagnostics, Grid, VelocityField};

/// Tridiagonal second-difference operator. Rows 0 and N-1 are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianOp {
    dx: f64,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl LaplacianOp {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `(sub, diag, super)` coefficients of row `i`.
    pub fn row(&self, i: usize) -> (f64, f64, f64) {
        (self.sub[i], self.diag[i], self.sup[i])
    }

    /// Dense row-major copy, for inspection and testing.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            if i > 0 {
                out[i][i - 1] = self.sub[i];
            }
            out[i][i] = self.diag[i];
            if i + 1 < n {
                out[i][i + 1] = self.sup[i];
            }
        }
        out
    }
}

/// `nu * L`, the generator passed to the Krylov propagator.
struct ScaledLaplacian<'a> {
    op: &'a LaplacianOp,
    nu: f64,
}

impl LinearOperator for ScaledLaplacian<'_> {
    fn dim(&self) -> usize {
        self.op.size()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.op.size();
        for i in 0..n {
            let mut acc = self.op.diag[i] * x[i];
            if i > 0 {
                acc += self.op.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.op.sup[i] * x[i + 1];
            }
            y[i] = self.nu * acc;
        }
    }

    fn norm_inf(&self) -> f64 {
        (0..self.op.size())
            .map(|i| {
                self.nu.abs()
                    * (self.op.sub[i].abs() + self.op.diag[i].abs() + self.op.sup[i].abs())
            })
            .fold(0.0, f64::max)
    }
}

pub fn build_laplacian(grid: &Grid) -> LaplacianOp {
    let n = grid.n_points();
    let inv = 1.0 / (grid.dx() * grid.dx());
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 1..n - 1 {
        sub[i] = inv;
        diag[i] = -2.0 * inv;
        sup[i] = inv;
    }
    LaplacianOp {
        dx: grid.dx(),
        sub,
        diag,
        sup,
    }
}

/// Approximates `exp(nu t L) phi0`.
pub fn krylov_expm_apply(
    op: &LaplacianOp,
    nu: f64,
    phi0: &ColeHopfField,
    t: f64,
    cfg: &KrylovConfig,
) -> Result<Vec<f64>> {
    if phi0.len() != op.size() {
        return Err(Error::LengthMismatch {
            expected: op.size(),
            actual: phi0.len(),
        });
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "viscosity must be positive, got {nu}"
        )));
    }
    let generator = ScaledLaplacian { op, nu };
    let (phi, _) = krylov::expv(&generator, t, phi0.as_slice(), cfg)?;
    Ok(phi)
}

/// One classical snapshot at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSnapshot {
    pub t: f64,
    pub phi: Vec<f64>,
    pub velocity: VelocityField,
    pub diagnostics: Diagnostics,
}

/// Grid, initial velocity and normalized Cole–Hopf potential for `params`.
pub fn initial_state(params: &ExperimentParams) -> Result<(Grid, VelocityField, ColeHopfField)> {
    let grid = pde::build_grid(params.n_grid)?;
    let u0 = pde::initial_velocity(&grid, params.u_left, params.u_right);
    let phi0 = pde::cole_hopf_initial(&grid, &u0, params.nu)?;
    Ok((grid, u0, phi0))
}

/// Classical reference fields at each requested time, each propagated
/// independently from `t = 0`.
pub fn classical_reference(
    params: &ExperimentParams,
    times: &[f64],
    cfg: &KrylovConfig,
) -> Result<Vec<ClassicalSnapshot>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidArgument(
            "times must be sorted and nonnegative".into(),
        ));
    }
    let (grid, _, phi0) = initial_state(params)?;
    let op = build_laplacian(&grid);
    times
        .iter()
        .map(|&t| {
            let phi = krylov_expm_apply(&op, params.nu, &phi0, t, cfg)?;
            let velocity = pde::reconstruct_velocity(
                &phi,
                params.nu,
                &grid,
                params.u_left,
                params.u_right,
                params.epsilon,
            )?;
            let diagnostics = Diagnostics::compute(&velocity, &grid, params.nu, None)?;
            Ok(ClassicalSnapshot {
                t,
                phi,
                velocity,
                diagnostics,
            })
        })
        .collect()
}
