use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Full-rank random density matrix `GG†/Tr(GG†)`.
pub fn random_density_matrix(dim: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}
