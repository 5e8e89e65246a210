//! Action of a matrix exponential on a vector by restarted Arnoldi
//! projection with adaptive time stepping.
//!
//! The step-size control follows the classic `expv` scheme: a Krylov basis
//! of dimension `m` is built at the current state, the small Hessenberg
//! exponential is evaluated densely (Padé with scaling and squaring), and
//! the local error is estimated from the two trailing entries of the
//! augmented projection. Each accepted step restarts the Arnoldi process
//! from the propagated vector.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A real linear operator `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Infinity norm, used only to choose the first step size.
    fn norm_inf(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub max_subspace_dim: usize,
    pub tolerance: f64,
    pub max_restarts: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            max_subspace_dim: 30,
            tolerance: 1e-10,
            max_restarts: 50,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_subspace_dim == 0 || !(self.tolerance > 0.0) || self.max_restarts == 0 {
            return Err(Error::InvalidArgument(format!(
                "krylov config entries must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Summary of a propagation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub steps: usize,
    pub rejections: usize,
    pub error_estimate: f64,
}

const HAPPY_BREAKDOWN_TOL: f64 = 1e-7;
const SAFETY_GAMMA: f64 = 0.9;
const SAFETY_DELTA: f64 = 1.2;

/// Computes `exp(t A) v`.
pub fn expv<A: LinearOperator + ?Sized>(
    op: &A,
    t: f64,
    v: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, KrylovStats)> {
    cfg.validate()?;
    let n = op.dim();
    if v.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: v.len(),
        });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "propagation time must be finite and nonnegative, got {t}"
        )));
    }
    let mut stats = KrylovStats {
        steps: 0,
        rejections: 0,
        error_estimate: 0.0,
    };
    let mut w = v.to_vec();
    let mut beta = norm(&w);
    if t == 0.0 || beta == 0.0 {
        return Ok((w, stats));
    }

    let m = cfg.max_subspace_dim.min(n);
    let tol = cfg.tolerance;
    let anorm = op.norm_inf();
    if anorm == 0.0 {
        return Ok((w, stats));
    }
    let rndoff = anorm * f64::EPSILON;
    let mf = m as f64;
    let fact = ((mf + 1.0) / std::f64::consts::E).powf(mf + 1.0)
        * (2.0 * std::f64::consts::PI * (mf + 1.0)).sqrt();
    let mut t_new = (1.0 / anorm) * ((fact * tol) / (4.0 * beta * anorm)).powf(1.0 / mf);
    t_new = round_two_digits(t_new);

    let mut t_now = 0.0;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut p = vec![0.0; n];

    while t_now < t {
        if stats.steps >= cfg.max_restarts {
            return Err(Error::KrylovNonConvergence {
                restarts: stats.steps,
                residual: stats.error_estimate,
            });
        }
        stats.steps += 1;
        let mut t_step = (t - t_now).min(t_new);

        basis.clear();
        basis.push(w.iter().map(|x| x / beta).collect());
        let mut h = DMatrix::<f64>::zeros(m + 2, m + 2);
        let mut breakdown = false;
        let mut mb = m;
        for j in 0..m {
            op.apply(&basis[j], &mut p);
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(vi, &p);
                h[(i, j)] = hij;
                axpy(-hij, vi, &mut p);
            }
            let s = norm(&p);
            if s < HAPPY_BREAKDOWN_TOL {
                breakdown = true;
                mb = j + 1;
                t_step = t - t_now;
                break;
            }
            h[(j + 1, j)] = s;
            basis.push(p.iter().map(|x| x / s).collect());
        }

        let mut avnorm = 0.0;
        if !breakdown {
            h[(m + 1, m)] = 1.0;
            op.apply(&basis[m], &mut p);
            avnorm = norm(&p);
        }

        let mut rejections_this_step = 0usize;
        let (f, err_loc, xm) = loop {
            let mx = if breakdown { mb } else { mb + 2 };
            let hs = h.view((0, 0), (mx, mx)) * t_step;
            let f = expm_pade(&hs.into_owned());
            if breakdown {
                break (f, HAPPY_BREAKDOWN_TOL, 1.0 / mf);
            }
            let phi1 = (beta * f[(m, 0)]).abs();
            let phi2 = (beta * f[(m + 1, 0)] * avnorm).abs();
            let (err, xm) = if phi1 > 10.0 * phi2 {
                (phi2, 1.0 / mf)
            } else if phi1 > phi2 {
                (phi1 * phi2 / (phi1 - phi2), 1.0 / mf)
            } else {
                (phi1, 1.0 / (mf - 1.0).max(1.0))
            };
            if err <= SAFETY_DELTA * t_step * tol {
                break (f, err, xm);
            }
            rejections_this_step += 1;
            stats.rejections += 1;
            stats.error_estimate = err;
            if rejections_this_step > cfg.max_restarts {
                return Err(Error::KrylovNonConvergence {
                    restarts: stats.rejections,
                    residual: err,
                });
            }
            t_step = round_two_digits(SAFETY_GAMMA * t_step * (t_step * tol / err).powf(xm));
        };

        let mx = if breakdown { mb } else { mb + 1 };
        w.iter_mut().for_each(|x| *x = 0.0);
        for (k, vk) in basis.iter().take(mx).enumerate() {
            axpy(beta * f[(k, 0)], vk, &mut w);
        }
        beta = norm(&w);
        t_now += t_step;
        t_new = if err_loc > 0.0 {
            round_two_digits(SAFETY_GAMMA * t_step * (t_step * tol / err_loc).powf(xm))
        } else {
            t - t_now
        };
        stats.error_estimate = err_loc.max(rndoff);
        if beta == 0.0 {
            break;
        }
    }
    Ok((w, stats))
}

/// Dense matrix exponential by the (6,6) Padé approximant with scaling and
/// squaring.
pub fn expm_pade(a: &DMatrix<f64>) -> DMatrix<f64> {
    const COEFFS: [f64; 7] = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let n = a.nrows();
    let norm = (0..n)
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        ((norm / 0.5).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let a2 = &scaled * &scaled;
    let ident = DMatrix::<f64>::identity(n, n);
    // even and odd parts of the Padé numerator
    let mut even = &ident * COEFFS[6];
    let mut odd = &ident * COEFFS[5];
    for k in [4usize, 2, 0] {
        even = &a2 * even + &ident * COEFFS[k];
    }
    for k in [3usize, 1] {
        odd = &a2 * odd + &ident * COEFFS[k];
    }
    let odd = &scaled * odd;
    let num = &even + &odd;
    let den = &even - &odd;
    let mut r = den
        .lu()
        .solve(&num)
        .expect("Pade denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn round_two_digits(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return x;
    }
    let s = 10f64.powf(x.log10().floor() - 1.0);
    (x / s).ceil() * s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(DMatrix<f64>);

    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..self.0.nrows() {
                y[i] = (0..x.len()).map(|j| self.0[(i, j)] * x[j]).sum();
            }
        }
        fn norm_inf(&self) -> f64 {
            (0..self.0.nrows())
                .map(|i| self.0.row(i).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        }
    }

    #[test]
    fn pade_matches_scalar_exponential() {
        let a = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 1.5]);
        let e = expm_pade(&a);
        assert!((e[(0, 0)] - (-3.0f64).exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - 1.5f64.exp()).abs() < 1e-13);
    }

    #[test]
    fn pade_rotation_generator() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let e = expm_pade(&a);
        assert!((e[(0, 0)] - 2f64.cos()).abs() < 1e-14);
        assert!((e[(1, 0)] - 2f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn expv_diagonal_operator() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, -40.0, 0.5]));
        let v = vec![1.0, 1.0, 1.0, 1.0];
        let (w, _) = expv(&Dense(d), 0.3, &v, &KrylovConfig::default()).unwrap();
        for (wi, lam) in w.iter().zip([-1.0f64, -2.0, -40.0, 0.5]) {
            assert!((wi - (0.3 * lam).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn expv_zero_time_is_identity() {
        let d = DMatrix::from_element(3, 3, 1.0);
        let v = vec![0.1, 0.2, 0.3];
        let (w, stats) = expv(&Dense(d), 0.0, &v, &KrylovConfig::default()).unwrap();
        assert_eq!(w, v);
        assert_eq!(stats.steps, 0);
    }

    #[test]
    fn expv_reports_nonconvergence() {
        let n = 40;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = -(i as f64) * 50.0;
            if i + 1 < n {
                a[(i, i + 1)] = 30.0;
            }
        }
        let cfg = KrylovConfig {
            max_subspace_dim: 3,
            tolerance: 1e-12,
            max_restarts: 1,
        };
        let err = expv(&Dense(a), 1.0, &vec![1.0; n], &cfg).unwrap_err();
        assert!(matches!(err, Error::KrylovNonConvergence { .. }));
    }
}
