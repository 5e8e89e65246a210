//! Spatial grid, Cole–Hopf initial data, velocity reconstruction and the
//! physical diagnostics shared by the classical and quantum paths.
//!
//! The viscous Burgers field `u` is linked to a positive potential `phi` by
//! `u = -2 nu phi_x / phi`. Everything here works on a uniform grid over
//! `[0, 1]` with Dirichlet velocities imposed at both ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularization used in the denominator of [`reconstruct_velocity`].
pub const DEFAULT_EPSILON: f64 = 1e-10;

/// Uniform grid `x_j = j dx`, `dx = 1 / (N - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_points: usize,
    dx: f64,
    points: Vec<f64>,
}

impl Grid {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// Discrete velocity with its Dirichlet boundary values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub values: Vec<f64>,
    pub u_left: f64,
    pub u_right: f64,
}

impl VelocityField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Overwrites the end points with `u_left` / `u_right`.
    pub fn enforce_boundaries(&mut self) {
        if let Some(first) = self.values.first_mut() {
            *first = self.u_left;
        }
        if let Some(last) = self.values.last_mut() {
            *last = self.u_right;
        }
    }
}

/// Nonnegative Cole–Hopf potential with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ColeHopfField {
    phi: Vec<f64>,
}

impl ColeHopfField {
    /// Normalizes `phi` to unit norm. Entries must be finite and nonnegative
    /// and at least one must be positive.
    pub fn from_unnormalized(phi: Vec<f64>) -> Result<Self> {
        if phi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "Cole-Hopf potential must be finite and nonnegative".into(),
            ));
        }
        let norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(
                "Cole-Hopf potential has zero norm".into(),
            ));
        }
        Ok(Self {
            phi: phi.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.phi
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Shock position, dissipation rate and (optionally) the L2 error against a
/// reference field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub shock_position: f64,
    pub dissipation: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub l2_error: Option<f64>,
}

impl Diagnostics {
    /// Shock position and dissipation of `u`, plus the L2 error against
    /// `reference` when one is given.
    pub fn compute(
        u: &VelocityField,
        grid: &Grid,
        nu: f64,
        reference: Option<&VelocityField>,
    ) -> Result<Self> {
        check_len(grid, u.len())?;
        let l2_error = match reference {
            Some(r) => Some(l2_error(u, r, grid)?),
            None => None,
        };
        Ok(Self {
            shock_position: shock_position(u, grid),
            dissipation: dissipation_rate(u, grid, nu),
            l2_error,
        })
    }
}

pub fn build_grid(n_points: usize) -> Result<Grid> {
    if n_points < 3 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 3 points for the interior stencil, got {n_points}"
        )));
    }
    let dx = 1.0 / (n_points - 1) as f64;
    let mut points: Vec<f64> = (0..n_points).map(|j| j as f64 * dx).collect();
    points[n_points - 1] = 1.0;
    Ok(Grid {
        n_points,
        dx,
        points,
    })
}

/// `u0(x) = sin(pi x)` on the interior, boundary values overwritten.
pub fn initial_velocity(grid: &Grid, u_left: f64, u_right: f64) -> VelocityField {
    let mut field = VelocityField {
        values: grid
            .points
            .iter()
            .map(|x| (std::f64::consts::PI * x).sin())
            .collect(),
        u_left,
        u_right,
    };
    field.enforce_boundaries();
    field
}

/// Discrete Cole–Hopf potential `phi_j = exp(-I_j / (2 nu))` where `I_j` is
/// the cumulative trapezoid of `u0`, normalized to unit norm.
pub fn cole_hopf_initial(grid: &Grid, u0: &VelocityField, nu: f64) -> Result<ColeHopfField> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "viscosity must be positive, got {nu}"
        )));
    }
    check_len(grid, u0.len())?;
    let integral = cumulative_trapezoid(&u0.values, grid.dx);
    let phi = integral.iter().map(|i| (-i / (2.0 * nu)).exp()).collect();
    ColeHopfField::from_unnormalized(phi)
}

pub(crate) fn cumulative_trapezoid(values: &[f64], dx: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(values.len());
    out.push(0.0);
    for pair in values.windows(2) {
        acc += 0.5 * dx * (pair[0] + pair[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

/// Centred-difference inverse Cole–Hopf map.
///
/// `phi_like` may be any real array (quantum amplitudes included); only the
/// denominator is guarded by `max(phi_j, epsilon)`.
pub fn reconstruct_velocity(
    phi_like: &[f64],
    nu: f64,
    grid: &Grid,
    u_left: f64,
    u_right: f64,
    epsilon: f64,
) -> Result<VelocityField> {
    check_len(grid, phi_like.len())?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = phi_like.len();
    let dx = grid.dx;
    let mut values = vec![0.0; n];
    for j in 1..n - 1 {
        let denom = 2.0 * dx * phi_like[j].max(epsilon);
        values[j] = -2.0 * nu * (phi_like[j + 1] - phi_like[j - 1]) / denom;
    }
    let mut field = VelocityField {
        values,
        u_left,
        u_right,
    };
    field.enforce_boundaries();
    Ok(field)
}

/// `sqrt(dx * sum (a_j - b_j)^2)`.
pub fn l2_error(u_a: &VelocityField, u_b: &VelocityField, grid: &Grid) -> Result<f64> {
    if u_a.len() != u_b.len() {
        return Err(Error::LengthMismatch {
            expected: u_a.len(),
            actual: u_b.len(),
        });
    }
    let sum: f64 = u_a
        .values
        .iter()
        .zip(&u_b.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((grid.dx * sum).sqrt())
}

fn forward_gradients<'a>(u: &'a VelocityField, dx: f64) -> impl Iterator<Item = f64> + 'a {
    u.values.windows(2).map(move |w| (w[1] - w[0]) / dx)
}

/// Grid point of the steepest forward difference over `j = 0..=N-2`; ties go
/// to the smallest index.
pub fn shock_position(u: &VelocityField, grid: &Grid) -> f64 {
    let mut best = 0usize;
    let mut best_mag = f64::NEG_INFINITY;
    for (j, g) in forward_gradients(u, grid.dx).enumerate() {
        let mag = g.abs();
        if mag > best_mag {
            best = j;
            best_mag = mag;
        }
    }
    grid.points[best]
}

/// `nu * sum_{j <= N-2} ((u_{j+1} - u_j) / dx)^2 * dx`.
pub fn dissipation_rate(u: &VelocityField, grid: &Grid, nu: f64) -> f64 {
    let dx = grid.dx;
    nu * forward_gradients(u, dx).map(|g| g * g).sum::<f64>() * dx
}

fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if grid.n_points != len {
        return Err(Error::LengthMismatch {
            expected: grid.n_points,
            actual: len,
        });
    }
    Ok(())
}
