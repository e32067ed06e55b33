//! Deterministic randomness: one root seed per run, with named substreams so
//! adding an experiment never perturbs another's draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::linalg::{c64, DensityOperator, PureState, UnitaryMatrix, C64};
use crate::Result;

/// Derives an independent generator for `label` from the root seed. The
/// stream id is the first eight bytes of SHA-256(label), so streams are
/// stable across runs and platforms.
pub fn fork_stream(seed: u64, label: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(label.as_bytes());
    let stream = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn standard_gaussian_c64<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im)
}

/// Complex Ginibre matrix (iid standard complex Gaussians).
pub fn ginibre<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| standard_gaussian_c64(rng))
}

/// Haar-random pure state.
pub fn haar_state<R: Rng>(dim: usize, rng: &mut R) -> Result<PureState> {
    let v = DVector::from_fn(dim, |_, _| standard_gaussian_c64(rng));
    PureState::normalized(v)
}

/// Haar-random unitary via QR of a Ginibre matrix, with the R diagonal's
/// phases folded into Q to make the distribution exactly Haar.
pub fn haar_unitary<R: Rng>(dim: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    let g = ginibre(dim, dim, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() == 0.0 {
            c64(1.0, 0.0)
        } else {
            d / d.norm()
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix::new(q)
}

/// Random full-rank density operator `G G† / tr(G G†)`.
pub fn random_density<R: Rng>(dim: usize, rng: &mut R) -> Result<DensityOperator> {
    let g = ginibre(dim, dim, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::new(m / c64(tr, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_deviation;

    #[test]
    fn streams_are_deterministic_and_label_separated() {
        let mut a = fork_stream(7, "lift");
        let mut b = fork_stream(7, "lift");
        let mut c = fork_stream(7, "prep");
        let xa: u64 = a.gen();
        let xb: u64 = b.gen();
        let xc: u64 = c.gen();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = fork_stream(3, "test/haar");
        for dim in [2, 3, 5] {
            let u = haar_unitary(dim, &mut rng).unwrap();
            assert!(unitarity_deviation(u.matrix()) < 1e-12);
        }
    }

    #[test]
    fn random_density_is_valid() {
        let mut rng = fork_stream(11, "test/density");
        let rho = random_density(4, &mut rng).unwrap();
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
    }
}
