//! Seeded random matrices: Ginibre, Haar unitaries, density operators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{c, hermitian_part, ComplexMatrix, C64};

/// Deterministic generator used by every randomized routine in the crate.
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn seed(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.0)
    }

    pub fn below(&mut self, n: usize) -> usize {
        rand::Rng::random_range(&mut self.0, 0..n)
    }
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rng: &mut Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(rng.normal(), rng.normal()) * c(std::f64::consts::FRAC_1_SQRT_2))
}

pub fn random_hermitian(rng: &mut Rng, n: usize) -> ComplexMatrix {
    hermitian_part(&ginibre(rng, n, n))
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary(rng: &mut Rng, n: usize) -> ComplexMatrix {
    let g = ginibre(rng, n, n);
    let qr = g.qr();
    let (q, r) = qr.unpack();
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / c(d.norm()) } else { c(1.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Random density operator of the given rank (`G G† / tr`, `G` Ginibre `n x rank`).
pub fn random_density(rng: &mut Rng, n: usize, rank: usize) -> ComplexMatrix {
    let g = ginibre(rng, n, rank);
    let m = &g * g.adjoint();
    let t = m.trace();
    hermitian_part(&(m / t))
}

/// Random full-rank density operator whose eigenvalues are bounded away from zero.
pub fn random_full_rank_density(rng: &mut Rng, n: usize) -> ComplexMatrix {
    let u = random_unitary(rng, n);
    let weights: Vec<f64> = (0..n).map(|_| 0.2 + rng.uniform()).collect();
    let total: f64 = weights.iter().sum();
    let d = ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(weights[i] / total) } else { c(0.0) });
    hermitian_part(&(&u * d * u.adjoint()))
}
