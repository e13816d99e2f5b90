//! Lindblad generator in matrix-free and superoperator form.
//!
//! Superoperators act on `vec(ρ)`, the column-stacked density matrix, which is
//! the storage order of `nalgebra::DMatrix`. With that convention
//! `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{check_dim, Result};
use crate::hilbert::{DensityMatrix, OperatorMatrix};
use crate::model::DissipatorSpec;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `−i[H, ρ] + Σ (rate/2)(2·O₁ρO₂† − O₁†O₂ρ − ρO₁†O₂)`, evaluated directly on
/// the matrix.
pub fn liouvillian_apply(
    h: &OperatorMatrix,
    diss: &DissipatorSpec,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    check_dim(h.dim(), rho.nrows())?;
    check_dim(h.dim(), rho.ncols())?;
    let mut out = (h.mul_dense(rho)? - h.dense_mul(rho)?) * -I;
    for ch in diss.active() {
        let (o1, o2) = ch.pair();
        check_dim(h.dim(), o1.dim())?;
        let k = &o1.adjoint() * o2;
        let jump = o2.adjoint().dense_mul(&o1.mul_dense(rho)?)?;
        let anti = k.mul_dense(rho)? + k.dense_mul(rho)?;
        out += (jump * C64::new(2.0, 0.0) - anti) * C64::new(0.5 * ch.rate(), 0.0);
    }
    Ok(out)
}

/// Sparse superoperator of the full master equation.
#[derive(Clone, Debug)]
pub struct Generator {
    hilbert_dim: usize,
    matrix: OperatorMatrix,
}

impl Generator {
    pub fn new(h: &OperatorMatrix, diss: &DissipatorSpec) -> Result<Self> {
        let d = h.dim();
        let id = OperatorMatrix::identity(d);
        // −i(I ⊗ H) + i(Hᵀ ⊗ I)
        let mut s = &OperatorMatrix::kron(&id, h).scale(-I) + &OperatorMatrix::kron(&h.transpose(), &id).scale(I);
        for ch in diss.active() {
            let (o1, o2) = ch.pair();
            check_dim(d, o1.dim())?;
            check_dim(d, o2.dim())?;
            let k = &o1.adjoint() * o2;
            let jump = OperatorMatrix::kron(&o2.conj(), o1).scale(C64::new(2.0, 0.0));
            let left = OperatorMatrix::kron(&id, &k);
            let right = OperatorMatrix::kron(&k.transpose(), &id);
            let term = &(&jump - &left) - &right;
            s = &s + &term.scale(C64::new(0.5 * ch.rate(), 0.0));
        }
        Ok(Self { hilbert_dim: d, matrix: s })
    }

    /// Dimension of the underlying Hilbert space.
    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Length of `vec(ρ)`.
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    /// Generator of the Heisenberg-picture flow under the Hilbert-Schmidt
    /// inner product: `⟨X, L(ρ)⟩ = ⟨L†(X), ρ⟩`.
    pub fn adjoint(&self) -> Self {
        Self { hilbert_dim: self.hilbert_dim, matrix: self.matrix.adjoint() }
    }

    pub fn apply_vec(&self, x: &[C64], y: &mut [C64]) {
        self.matrix.matvec(x, y);
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        check_dim(self.hilbert_dim, rho.nrows())?;
        check_dim(self.hilbert_dim, rho.ncols())?;
        let mut out = DensityMatrix::zeros(self.hilbert_dim, self.hilbert_dim);
        self.matrix.matvec(rho.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::hilbert::{BasisIndex, HilbertSpace, Level};
    use crate::model::{build_dissipators, build_hamiltonian, ModelParams};
    use crate::testutil::random_density_matrix;

    fn loaded_params() -> ModelParams {
        ModelParams {
            delta_ac: 0.3,
            j: 0.8,
            gamma_a: 0.2,
            gamma_a_coop: 0.15,
            gamma_m: 0.1,
            mbar: 0.2,
            ..ModelParams::default()
        }
    }

    /// Kronecker-product superoperator assembled densely, independent of the
    /// sparse construction.
    fn dense_superoperator(h: &OperatorMatrix, diss: &DissipatorSpec) -> DMatrix<C64> {
        let d = h.dim();
        let id = DMatrix::<C64>::identity(d, d);
        let hd = h.to_dense();
        let mut s = id.kronecker(&hd) * -I + hd.transpose().kronecker(&id) * I;
        for ch in diss.active() {
            let (o1, o2) = ch.pair();
            let (a, b) = (o1.to_dense(), o2.to_dense());
            let k = a.adjoint() * &b;
            let term = b.adjoint().transpose().kronecker(&a) * C64::new(2.0, 0.0)
                - id.kronecker(&k)
                - k.transpose().kronecker(&id);
            s += term * C64::new(0.5 * ch.rate(), 0.0);
        }
        s
    }

    #[test]
    fn zero_rates_give_commutator() {
        let space = HilbertSpace::new(1, 2, Some(1)).unwrap();
        let h = build_hamiltonian(&ModelParams::default(), &space);
        let rho = random_density_matrix(space.dim(), 3);
        let out = liouvillian_apply(&h, &DissipatorSpec::empty(), &rho).unwrap();
        let hd = h.to_dense();
        let expected = (&hd * &rho - &rho * &hd) * -I;
        assert!((out - expected).norm() < 1e-13);
    }

    #[test]
    fn vacuum_is_stationary() {
        let space = HilbertSpace::new(1, 3, Some(1)).unwrap();
        let params = ModelParams { gamma_m: 0.2, gamma_a_coop: 0.04, ..ModelParams::default() };
        let h = build_hamiltonian(&params, &space);
        let diss = build_dissipators(&params, &space).unwrap();
        let vac = space.projector(&BasisIndex::new(Level::Ground, Level::Ground, 0, 0)).unwrap();
        let out = liouvillian_apply(&h, &diss, &vac).unwrap();
        assert!(out.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn matches_dense_superoperator_on_dim8() {
        let space = HilbertSpace::new(1, 0, None).unwrap();
        assert_eq!(space.dim(), 8);
        let params = loaded_params();
        let h = build_hamiltonian(&params, &space);
        let diss = build_dissipators(&params, &space).unwrap();
        let dense = dense_superoperator(&h, &diss);
        let gen = Generator::new(&h, &diss).unwrap();
        let diff = (gen.to_dense() - &dense).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(diff < 1e-12, "superoperator mismatch {diff}");

        for seed in 0..4 {
            let rho = random_density_matrix(8, seed);
            let direct = liouvillian_apply(&h, &diss, &rho).unwrap();
            let flat = DMatrix::from_column_slice(64, 1, rho.as_slice());
            let via_dense = &dense * flat;
            let diff = direct.iter().zip(via_dense.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            assert!(diff < 1e-12, "matrix-free mismatch {diff}");
        }
    }

    #[test]
    fn dense_oracle_with_phonons() {
        let space = HilbertSpace::new(1, 2, None).unwrap();
        let params = loaded_params();
        let h = build_hamiltonian(&params, &space);
        let diss = build_dissipators(&params, &space).unwrap();
        let gen = Generator::new(&h, &diss).unwrap();
        let diff = (gen.to_dense() - dense_superoperator(&h, &diss)).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(diff < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trace_and_hermiticity_preserved(
            seed in 0u64..10_000,
            j in -1.5f64..1.5,
            coop in -0.2f64..0.2,
            gamma_m in 0.0f64..0.4,
            mbar in 0.0f64..0.5,
        ) {
            let space = HilbertSpace::new(2, 2, None).unwrap();
            let params = ModelParams { j, gamma_a: 0.2, gamma_a_coop: coop, gamma_m, mbar, ..ModelParams::default() };
            let h = build_hamiltonian(&params, &space);
            let diss = build_dissipators(&params, &space).unwrap();
            let rho = random_density_matrix(space.dim(), seed);
            let out = liouvillian_apply(&h, &diss, &rho).unwrap();
            prop_assert!(out.trace().norm() < 1e-10);
            prop_assert!((&out - out.adjoint()).iter().all(|v| v.norm() < 1e-12));
        }

        #[test]
        fn adjoint_generator_is_hilbert_schmidt_adjoint(seed in 0u64..10_000) {
            let space = HilbertSpace::new(1, 2, Some(1)).unwrap();
            let params = loaded_params();
            let h = build_hamiltonian(&params, &space);
            let diss = build_dissipators(&params, &space).unwrap();
            let gen = Generator::new(&h, &diss).unwrap();
            let x = random_density_matrix(space.dim(), seed) * C64::new(0.3, -1.1);
            let rho = random_density_matrix(space.dim(), seed + 1);
            let lhs = (x.adjoint() * gen.apply(&rho).unwrap()).trace();
            let rhs = (gen.adjoint().apply(&x).unwrap().adjoint() * &rho).trace();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
