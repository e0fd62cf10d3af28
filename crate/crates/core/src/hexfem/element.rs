use nalgebra::{SMatrix, SVector};

use super::Material;
use crate::error::{Error, Result};
use crate::voxgrid::CORNER_OFFSETS;

pub type Mat24 = SMatrix<f64, 24, 24>;

/// Element stiffness and consistent mass of one cubic voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices {
    /// Stiffness, N/m.
    pub ke: Mat24,
    /// Consistent mass, kg.
    pub me: Mat24,
}

const GAUSS: f64 = 0.577_350_269_189_625_8;

/// Trilinear 8-node hexahedron of edge `h`, integrated with 2×2×2 Gauss
/// points. Nodes follow the `zyx` corner order of [`crate::voxgrid`].
pub fn element_matrices(mat: &Material, h: f64) -> Result<ElementMatrices> {
    mat.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("element size must be positive, got {h}")));
    }
    let (lambda, mu) = mat.lame();
    let mut d = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] = lambda + 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }

    // Reference cube [-1, 1]^3 maps to [0, h]^3: J = h/2 I.
    let jac = h / 2.0;
    let det = jac * jac * jac;
    let mut ke = Mat24::zeros();
    let mut me = Mat24::zeros();
    let signs = CORNER_OFFSETS.map(|o| o.map(|v| 2.0 * v as f64 - 1.0));

    for gp in 0..8 {
        let xi = CORNER_OFFSETS[gp].map(|v| (2.0 * v as f64 - 1.0) * GAUSS);
        let mut n = SVector::<f64, 8>::zeros();
        let mut dn = [[0.0; 3]; 8];
        for (c, s) in signs.iter().enumerate() {
            let f = [1.0 + s[0] * xi[0], 1.0 + s[1] * xi[1], 1.0 + s[2] * xi[2]];
            n[c] = f[0] * f[1] * f[2] / 8.0;
            dn[c] = [
                s[0] * f[1] * f[2] / 8.0 / jac,
                f[0] * s[1] * f[2] / 8.0 / jac,
                f[0] * f[1] * s[2] / 8.0 / jac,
            ];
        }

        // Voigt order xx, yy, zz, yz, xz, xy with engineering shear.
        let mut b = SMatrix::<f64, 6, 24>::zeros();
        for c in 0..8 {
            let [dx, dy, dz] = dn[c];
            let k = 3 * c;
            b[(0, k)] = dx;
            b[(1, k + 1)] = dy;
            b[(2, k + 2)] = dz;
            b[(3, k + 1)] = dz;
            b[(3, k + 2)] = dy;
            b[(4, k)] = dz;
            b[(4, k + 2)] = dx;
            b[(5, k)] = dy;
            b[(5, k + 1)] = dx;
        }
        ke += b.transpose() * d * b * det;

        for a in 0..8 {
            for c in 0..8 {
                let v = mat.density * n[a] * n[c] * det;
                for ax in 0..3 {
                    me[(3 * a + ax, 3 * c + ax)] += v;
                }
            }
        }
    }
    // Symmetrize away quadrature round-off.
    let ke = (ke + ke.transpose()) * 0.5;
    let me = (me + me.transpose()) * 0.5;
    Ok(ElementMatrices { ke, me })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steel() -> Material {
        Material::by_name("steel").unwrap()
    }

    #[test]
    fn rigid_translation_in_null_space() {
        let em = element_matrices(&steel(), 0.01).unwrap();
        let norm = em.ke.norm();
        for axis in 0..3 {
            let mut t = SVector::<f64, 24>::zeros();
            for c in 0..8 {
                t[3 * c + axis] = 1.0;
            }
            assert!((em.ke * t).norm() <= 1e-9 * norm);
        }
    }

    #[test]
    fn mass_sums_to_element_mass() {
        let (h, m) = (0.02, steel());
        let em = element_matrices(&m, h).unwrap();
        let expected = m.density * h * h * h;
        for axis in 0..3 {
            let mut s = 0.0;
            for a in 0..8 {
                for c in 0..8 {
                    s += em.me[(3 * a + axis, 3 * c + axis)];
                }
            }
            assert!((s - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn exactly_six_zero_eigenvalues() {
        let em = element_matrices(&Material::by_name("ceramic").unwrap(), 0.005).unwrap();
        let eig = em.ke.symmetric_eigen();
        let max = eig.eigenvalues.amax();
        let zeros = eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-8 * max).count();
        assert_eq!(zeros, 6);
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-8 * max));
    }

    #[test]
    fn mass_positive_definite_and_symmetric() {
        let em = element_matrices(&steel(), 0.01).unwrap();
        assert!(em.me.cholesky().is_some());
        assert_eq!(em.ke, em.ke.transpose());
        assert_eq!(em.me, em.me.transpose());
    }

    #[test]
    fn rigid_rotations_in_null_space() {
        let h = 0.01;
        let em = element_matrices(&steel(), h).unwrap();
        let norm = em.ke.norm();
        for axis in 0..3 {
            let mut r = SVector::<f64, 24>::zeros();
            for (c, o) in CORNER_OFFSETS.iter().enumerate() {
                let p = o.map(|v| (v as f64 - 0.5) * h);
                // omega x p for omega = e_axis
                let mut w = [0.0; 3];
                w[axis] = 1.0;
                let v = [
                    w[1] * p[2] - w[2] * p[1],
                    w[2] * p[0] - w[0] * p[2],
                    w[0] * p[1] - w[1] * p[0],
                ];
                for a in 0..3 {
                    r[3 * c + a] = v[a];
                }
            }
            assert!((em.ke * r).norm() <= 1e-9 * norm * r.norm());
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(element_matrices(&steel(), 0.0).is_err());
        let mut m = steel();
        m.youngs_modulus = -1.0;
        assert!(matches!(element_matrices(&m, 1.0), Err(Error::InvalidMaterial(_))));
    }
}
