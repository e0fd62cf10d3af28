use nalgebra::DMatrix;

use super::linalg::{sorted_symmetric_eigen, symmetrize, SymOperator};
use super::svqb::{svqb, SubspaceBasis};
use crate::error::{Error, Result};

/// Ritz pairs of a pencil restricted to a subspace, ascending.
#[derive(Debug, Clone)]
pub struct RitzPairs {
    pub values: Vec<f64>,
    /// Full-space Ritz vectors `S Û`, M-orthonormal.
    pub vectors: DMatrix<f64>,
    /// Coefficients `Û` in the (M-orthonormalized) basis.
    pub coefficients: DMatrix<f64>,
    /// The M-orthonormal basis the projection was taken in.
    pub basis: DMatrix<f64>,
}

/// Projected generalized eigenproblem `(SᵀKS) Û = (SᵀMS) Û Λ̂`.
///
/// A raw basis is M-orthonormalized with SVQB first, which turns the
/// projected problem into a standard symmetric one.
pub fn rayleigh_ritz<K, M>(s: &SubspaceBasis, k: &K, m: &M) -> Result<RitzPairs>
where
    K: SymOperator + ?Sized,
    M: SymOperator + ?Sized,
{
    let basis = if s.m_orthonormal {
        s.vectors.clone()
    } else {
        svqb(s, m)?.vectors
    };
    let ks = k.apply(&basis);
    let a = basis.transpose() * &ks;
    let scale = a.amax();
    let asym = (&a - a.transpose()).amax();
    if asym > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "projected stiffness is not symmetric (relative asymmetry {:.2e})",
            asym / scale
        )));
    }
    let (values, coefficients) = sorted_symmetric_eigen(symmetrize(&a));
    if let Some(&min) = values.first() {
        if min < -1e-8 * scale {
            return Err(Error::Numerical(format!(
                "projected stiffness is indefinite (smallest Ritz value {min:.3e})"
            )));
        }
    }
    let vectors = &basis * &coefficients;
    Ok(RitzPairs {
        values,
        vectors,
        coefficients,
        basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::linalg::{dense_oracle, random_block};
    use crate::hexfem::{AssembledSystem, Material};
    use crate::voxgrid::VoxelGrid;
    use std::sync::Arc;

    fn body(dims: [u32; 3]) -> AssembledSystem {
        AssembledSystem::build(
            Arc::new(VoxelGrid::solid_box(dims, 0.01).unwrap()),
            &Material::by_name("ceramic").unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn exact_eigenvectors_give_exact_values() {
        // 30-dof pencil: random SPD K and M
        let a = random_block(30, 30, 11);
        let k = a.transpose() * &a;
        let b = random_block(30, 30, 12);
        let m = b.transpose() * &b + DMatrix::identity(30, 30) * 30.0;
        let e = dense_oracle(&k, &m).unwrap();
        let s = SubspaceBasis::raw(e.vectors.columns(0, 8).into_owned());
        let rr = rayleigh_ritz(&s, &k, &m).unwrap();
        for i in 0..8 {
            assert!((rr.values[i] - e.values[i]).abs() <= 1e-10 * e.values[29]);
        }
    }

    #[test]
    fn single_vector_gives_rayleigh_quotient() {
        let sys = body([2, 1, 1]);
        let v = random_block(sys.ndof(), 1, 3);
        let rr = rayleigh_ritz(&SubspaceBasis::raw(v.clone()), &sys.k, &sys.m).unwrap();
        let kv = sys.k.mul_vec(v.as_slice());
        let mv = sys.m.mul_vec(v.as_slice());
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let q = dot(v.as_slice(), &kv) / dot(v.as_slice(), &mv);
        assert!((rr.values[0] - q).abs() <= 1e-12 * q);
    }

    #[test]
    fn krylov_ritz_values_bound_true_values() {
        use crate::eigensolve::{krylov_warmstart, KrylovConfig};
        let sys = body([2, 2, 2]);
        let e = dense_oracle(&sys.k.to_dense(), &sys.m.to_dense()).unwrap();
        let basis = krylov_warmstart(&sys.k, &sys.m, KrylovConfig { modes: 20, depth: 1, seed: 5 }).unwrap();
        let rr = rayleigh_ritz(&basis, &sys.k, &sys.m).unwrap();
        let scale = e.values.last().unwrap();
        for (i, &r) in rr.values.iter().enumerate() {
            assert!(r >= e.values[i] - 1e-10 * scale, "ritz {i}: {r} < {}", e.values[i]);
        }
    }

    #[test]
    fn indefinite_projection_is_rejected() {
        let k = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 2.0, 3.0]));
        let m = DMatrix::<f64>::identity(3, 3);
        let s = SubspaceBasis::raw(DMatrix::identity(3, 2));
        assert!(matches!(rayleigh_ritz(&s, &k, &m), Err(Error::Numerical(_))));
    }
}
