use nalgebra::{DMatrix, SymmetricEigen};

use super::SystemMatrices;
use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;
const MAX_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ModalResult {
    /// Natural frequencies in Hz, ascending.
    pub frequencies: Vec<f64>,
    /// Mass-normalised mode shapes, one column per frequency.
    pub mode_shapes: DMatrix<f64>,
}

/// Lowest `m` eigenpairs of `K φ = ω² M φ`.
///
/// The problem is reduced to standard form with the Cholesky factor of M
/// (`L⁻¹ K L⁻ᵀ y = ω² y`, `φ = L⁻ᵀ y`), which makes the shapes
/// M-orthonormal.
pub fn modal_analysis(sys: &SystemMatrices, m: usize) -> Result<ModalResult> {
    if m == 0 || m > sys.n {
        return Err(Error::Usage(format!("requested {m} modes from a {}-DOF system", sys.n)));
    }
    let chol = sys
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("mass Cholesky factor is singular".into()))?;
    let mut a = &l_inv * &sys.stiffness * l_inv.transpose();
    a = (&a + a.transpose()) * 0.5;

    let eig = SymmetricEigen::try_new(a, EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::Numerical(format!("symmetric eigensolver did not converge in {EIGEN_MAX_ITER} iterations"))
    })?;

    let mut order: Vec<usize> = (0..sys.n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let back = l_inv.transpose();
    let mut shapes = DMatrix::zeros(sys.n, m);
    let mut frequencies = Vec::with_capacity(m);
    for (col, &idx) in order.iter().take(m).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if !(lambda > 0.0) {
            return Err(Error::Numerical(format!("non-positive eigenvalue {lambda:e} in mode {col}")));
        }
        let phi = &back * eig.eigenvectors.column(idx);
        let kphi = &sys.stiffness * &phi;
        let residual = (&kphi - &sys.mass * &phi * lambda).norm() / kphi.norm();
        if !(residual <= MAX_RESIDUAL) {
            return Err(Error::Numerical(format!(
                "mode {col} residual |Kφ - λMφ|/|Kφ| = {residual:e} exceeds {MAX_RESIDUAL:e}"
            )));
        }
        shapes.set_column(col, &phi);
        frequencies.push(lambda.sqrt() / (2.0 * std::f64::consts::PI));
    }
    Ok(ModalResult { frequencies, mode_shapes: shapes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{assemble_frame, FrameConfig, JointSpringSet};

    #[test]
    fn sdof_frequency_is_analytic() {
        let (m, k) = (3.7, 2.9e4);
        let sys = SystemMatrices::from_matrices(
            DMatrix::from_element(1, 1, m),
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, k),
        )
        .unwrap();
        let res = modal_analysis(&sys, 1).unwrap();
        let want = (k / m).sqrt() / (2.0 * std::f64::consts::PI);
        assert!(((res.frequencies[0] - want) / want).abs() < 1e-9);
    }

    #[test]
    fn shapes_are_mass_normalised() {
        let sys = assemble_frame(&FrameConfig::default(), &JointSpringSet::default()).unwrap();
        let res = modal_analysis(&sys, 8).unwrap();
        let gram = res.mode_shapes.transpose() * &sys.mass * &res.mode_shapes;
        let err = (gram - DMatrix::identity(8, 8)).amax();
        assert!(err < 1e-6, "φᵀMφ deviates from I by {err}");
        assert!(res.frequencies.windows(2).all(|w| w[0] <= w[1]));
        assert!(res.frequencies[0] > 0.0);
    }

    #[test]
    fn too_many_modes_rejected() {
        let sys = assemble_frame(&FrameConfig::default(), &JointSpringSet::default()).unwrap();
        assert!(matches!(modal_analysis(&sys, sys.n + 1), Err(Error::Usage(_))));
    }

    #[test]
    fn doubling_density_scales_by_inverse_sqrt2() {
        let cfg = FrameConfig::default();
        let heavy = FrameConfig { density: 2.0 * cfg.density, ..cfg.clone() };
        let springs = JointSpringSet::default();
        let a = modal_analysis(&assemble_frame(&cfg, &springs).unwrap(), 10).unwrap();
        let b = modal_analysis(&assemble_frame(&heavy, &springs).unwrap(), 10).unwrap();
        for (fa, fb) in a.frequencies.iter().zip(&b.frequencies) {
            let rel = (fb - fa / 2f64.sqrt()).abs() / fb;
            assert!(rel < 1e-9, "{fa} {fb} rel {rel}");
        }
    }
}
