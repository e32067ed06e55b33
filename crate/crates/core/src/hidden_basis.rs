//! The hidden logical basis and its embedding into physical space.
//!
//! A logical qubit is spanned by two states |**0**⟩, |**1**⟩ that live in
//! known orthogonal subspaces of a physical qudit but whose expansion
//! coefficients are private. Everything downstream only ever touches the
//! logical labels; this module provides the dictionary between logical
//! bitstrings, Hamming-weight sectors, and physical product states.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, PureState, C64, MAX_DENSE_DIM};
use crate::phase_invariant::WeightBlockOperator;
use crate::rng;

/// Hamming weight of a logical label.
#[inline]
pub fn hamming_weight(y: usize) -> usize {
    y.count_ones() as usize
}

/// Binomial coefficient, exact in u128 then narrowed.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .unwrap_or_else(|| panic!("binomial({n}, {k}) exceeds the exact integer range"))
            / (i + 1) as u128;
    }
    usize::try_from(acc)
        .unwrap_or_else(|_| panic!("binomial({n}, {k}) exceeds the exact integer range"))
}

/// Label of the number state: `c` sites with the rightmost `d` set,
/// i.e. the bitstring `0^(c-d) 1^d`.
#[inline]
pub fn number_state_label(c: usize, d: usize) -> usize {
    debug_assert!(d <= c);
    (1usize << d) - 1
}

/// Basis label inside one Hamming-weight sector.
///
/// `z` is the 1-based rank of the bitstring among all weight-`w` strings of
/// length `n` in lexicographic order (which coincides with numeric order of
/// the labels, most significant bit first).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightLabel {
    pub n: usize,
    pub w: usize,
    pub z: usize,
    /// The bitstring as an integer; bit `n-1-p` holds position `p`.
    pub label: usize,
}

impl WeightLabel {
    pub fn bitstring(&self) -> String {
        (0..self.n)
            .map(|p| {
                if self.label >> (self.n - 1 - p) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }
}

/// Enumerates the weight-`w` sector in lexicographic order.
pub fn weight_basis(n: usize, w: usize) -> Result<Vec<WeightLabel>> {
    if w > n {
        return Err(Error::WeightOutOfRange { n, w });
    }
    let mut out = Vec::with_capacity(binomial(n, w));
    for label in 0..(1usize << n) {
        if hamming_weight(label) == w {
            out.push(WeightLabel {
                n,
                w,
                z: out.len() + 1,
                label,
            });
        }
    }
    Ok(out)
}

/// Precomputed weight-sector tables for an `n`-site logical register.
#[derive(Debug, Clone)]
pub struct WeightClasses {
    n: usize,
    /// `classes[w][z-1]` = label of rank `z` in sector `w`.
    classes: Vec<Vec<usize>>,
    /// `rank0[label]` = zero-based rank of `label` inside its sector.
    rank0: Vec<usize>,
}

impl WeightClasses {
    pub fn new(n: usize) -> Self {
        let dim = 1usize << n;
        let mut classes = vec![Vec::new(); n + 1];
        let mut rank0 = vec![0usize; dim];
        for (label, rank) in rank0.iter_mut().enumerate() {
            let w = hamming_weight(label);
            *rank = classes[w].len();
            classes[w].push(label);
        }
        Self { n, classes, rank0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sector(&self, w: usize) -> &[usize] {
        &self.classes[w]
    }

    pub fn sector_size(&self, w: usize) -> usize {
        self.classes[w].len()
    }

    /// Zero-based rank of `label` within its own weight sector.
    pub fn rank0(&self, label: usize) -> usize {
        self.rank0[label]
    }
}

/// A state of `n` logical qubits, expressed over labels `y ∈ {0,1}^n` in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalState {
    n: usize,
    state: PureState,
}

impl LogicalState {
    pub fn new(n: usize, state: PureState) -> Result<Self> {
        if state.dim() != 1usize << n {
            return Err(Error::DimensionMismatch {
                left: state.dim(),
                right: 1usize << n,
            });
        }
        Ok(Self { n, state })
    }

    pub fn from_amplitudes(n: usize, amps: &[C64]) -> Result<Self> {
        Self::new(n, PureState::from_slice(amps)?)
    }

    /// Basis state `|label⟩`.
    pub fn basis(n: usize, label: usize) -> Result<Self> {
        Self::new(n, PureState::basis_state(1usize << n, label)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn as_pure(&self) -> &PureState {
        &self.state
    }

    pub fn amplitude(&self, label: usize) -> C64 {
        self.state.amplitude(label)
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.state.inner(other.state.as_ref())
    }

    /// Applies a dense operator on the logical space. The result is
    /// re-normalized only in the sense of validation: passing a non-unitary
    /// matrix that breaks normalization is an error.
    pub fn apply_matrix(&self, m: &DMatrix<C64>) -> Result<Self> {
        if m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: m.ncols(),
                right: self.dim(),
            });
        }
        Ok(Self {
            n: self.n,
            state: PureState::new(m * self.state.amplitudes())?,
        })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            n: self.n + other.n,
            state: self.state.tensor(&other.state)?,
        })
    }

    /// Probability carried by each Hamming-weight sector.
    pub fn weight_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.n + 1];
        for (label, amp) in self.state.amplitudes().iter().enumerate() {
            p[hamming_weight(label)] += amp.norm_sqr();
        }
        p
    }
}

impl AsRef<PureState> for LogicalState {
    fn as_ref(&self) -> &PureState {
        &self.state
    }
}

impl AsRef<PureState> for PureState {
    fn as_ref(&self) -> &PureState {
        self
    }
}

#[derive(Serialize, Deserialize)]
struct HiddenBasisSpecRaw {
    d0: usize,
    d1: usize,
    alpha: Vec<[f64; 2]>,
    beta: Vec<[f64; 2]>,
}

/// Private description of the hidden basis: |**0**⟩ = Σ αᵢ|aᵢ⟩ over the first
/// subspace's basis, |**1**⟩ = Σ βⱼ|bⱼ⟩ over the second. The physical qudit
/// dimension is `d0 + d1`; indices `0..d0` span the first subspace and
/// `d0..d0+d1` the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HiddenBasisSpecRaw", into = "HiddenBasisSpecRaw")]
pub struct HiddenBasisSpec {
    d0: usize,
    d1: usize,
    alpha: Vec<C64>,
    beta: Vec<C64>,
}

impl HiddenBasisSpec {
    pub fn new(alpha: Vec<C64>, beta: Vec<C64>) -> Result<Self> {
        if alpha.is_empty() || beta.is_empty() {
            return Err(Error::InvalidParameter {
                name: "alpha/beta",
                reason: "subspace dimensions must be at least 1".into(),
            });
        }
        for (name, v) in [("alpha", &alpha), ("beta", &beta)] {
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > crate::linalg::VALIDATION_TOL {
                return Err(Error::InvalidParameter {
                    name: if name == "alpha" { "alpha" } else { "beta" },
                    reason: format!("coefficient vector has norm {norm}, expected 1"),
                });
            }
        }
        Ok(Self {
            d0: alpha.len(),
            d1: beta.len(),
            alpha,
            beta,
        })
    }

    /// Haar-random coefficient vectors on given subspace dimensions.
    pub fn random<R: Rng>(d0: usize, d1: usize, rng_: &mut R) -> Result<Self> {
        let a = rng::haar_state(d0, rng_)?;
        let b = rng::haar_state(d1, rng_)?;
        Self::new(
            a.amplitudes().iter().copied().collect(),
            b.amplitudes().iter().copied().collect(),
        )
    }

    pub fn d0(&self) -> usize {
        self.d0
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    /// Physical qudit dimension.
    pub fn d(&self) -> usize {
        self.d0 + self.d1
    }

    pub fn alpha(&self) -> &[C64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[C64] {
        &self.beta
    }

    /// |**0**⟩ as a physical qudit state.
    pub fn ket_zero(&self) -> PureState {
        let mut v = DVector::zeros(self.d());
        for (i, a) in self.alpha.iter().enumerate() {
            v[i] = *a;
        }
        PureState::new(v).expect("alpha is validated unit norm")
    }

    /// |**1**⟩ as a physical qudit state.
    pub fn ket_one(&self) -> PureState {
        let mut v = DVector::zeros(self.d());
        for (j, b) in self.beta.iter().enumerate() {
            v[self.d0 + j] = *b;
        }
        PureState::new(v).expect("beta is validated unit norm")
    }

    /// Letter amplitude of physical digit `c` against logical bit `bit`:
    /// zero when the digit lies in the wrong subspace.
    fn letter(&self, bit: usize, c: usize) -> C64 {
        if bit == 0 {
            if c < self.d0 {
                self.alpha[c]
            } else {
                c64(0.0, 0.0)
            }
        } else if c >= self.d0 {
            self.beta[c - self.d0]
        } else {
            c64(0.0, 0.0)
        }
    }
}

impl TryFrom<HiddenBasisSpecRaw> for HiddenBasisSpec {
    type Error = Error;

    fn try_from(raw: HiddenBasisSpecRaw) -> Result<Self> {
        if raw.alpha.len() != raw.d0 || raw.beta.len() != raw.d1 {
            return Err(Error::InvalidParameter {
                name: "d0/d1",
                reason: format!(
                    "declared dimensions ({}, {}) do not match coefficient lengths ({}, {})",
                    raw.d0,
                    raw.d1,
                    raw.alpha.len(),
                    raw.beta.len()
                ),
            });
        }
        HiddenBasisSpec::new(
            raw.alpha.iter().map(|p| c64(p[0], p[1])).collect(),
            raw.beta.iter().map(|p| c64(p[0], p[1])).collect(),
        )
    }
}

impl From<HiddenBasisSpec> for HiddenBasisSpecRaw {
    fn from(s: HiddenBasisSpec) -> Self {
        HiddenBasisSpecRaw {
            d0: s.d0,
            d1: s.d1,
            alpha: s.alpha.iter().map(|z| [z.re, z.im]).collect(),
            beta: s.beta.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

/// Expands a logical state into the physical product space: each logical bit
/// becomes the corresponding hidden-basis qudit state.
pub fn embed(spec: &HiddenBasisSpec, psi: &LogicalState) -> Result<PureState> {
    let n = psi.n();
    let d = spec.d();
    let phys_dim = d.checked_pow(n as u32).ok_or(Error::DimensionCap {
        dim: usize::MAX,
        cap: MAX_DENSE_DIM,
    })?;
    if phys_dim > MAX_DENSE_DIM {
        return Err(Error::DimensionCap {
            dim: phys_dim,
            cap: MAX_DENSE_DIM,
        });
    }
    let mut out = DVector::zeros(phys_dim);
    // Walk physical indices once; each base-d digit picks the letter
    // amplitude for the logical bit determined by its subspace.
    for (idx, slot) in out.iter_mut().enumerate() {
        let mut rem = idx;
        let mut label = 0usize;
        let mut letters = c64(1.0, 0.0);
        for p in (0..n).rev() {
            let digit = rem % d;
            rem /= d;
            let bit = usize::from(digit >= spec.d0);
            label |= bit << (n - 1 - p);
            letters *= spec.letter(bit, digit);
            if letters == c64(0.0, 0.0) {
                break;
            }
        }
        if letters != c64(0.0, 0.0) {
            *slot = psi.amplitude(label) * letters;
        }
    }
    PureState::new(out)
}

/// Dense diagonal of the phase shift `|y⟩ ↦ e^{i·H(y)·θ}|y⟩`.
pub fn phase_shift_matrix(theta: f64, n: usize) -> DMatrix<C64> {
    let dim = 1usize << n;
    DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::from_polar(1.0, hamming_weight(i) as f64 * theta)
        } else {
            c64(0.0, 0.0)
        }
    })
}

/// The phase shift as a weight-block operator: scalar `e^{iwθ}` on each
/// sector.
pub fn phase_shift(theta: f64, n: usize) -> WeightBlockOperator {
    let blocks = (0..=n)
        .map(|w| {
            let size = binomial(n, w);
            DMatrix::from_diagonal_element(size, size, C64::from_polar(1.0, w as f64 * theta))
        })
        .collect();
    WeightBlockOperator::unitary(n, blocks).expect("diagonal phase blocks are unitary")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_table() {
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(4, 5), 0);
    }

    #[test]
    fn weight_basis_is_lexicographic() {
        let basis = weight_basis(4, 2).unwrap();
        let strings: Vec<String> = basis.iter().map(|l| l.bitstring()).collect();
        assert_eq!(strings, ["0011", "0101", "0110", "1001", "1010", "1100"]);
        for (i, l) in basis.iter().enumerate() {
            assert_eq!(l.z, i + 1);
        }
        assert!(weight_basis(3, 4).is_err());
    }

    #[test]
    fn weight_classes_rank_roundtrip() {
        let wc = WeightClasses::new(5);
        for w in 0..=5 {
            for (z0, &label) in wc.sector(w).iter().enumerate() {
                assert_eq!(wc.rank0(label), z0);
                assert_eq!(hamming_weight(label), w);
            }
        }
    }

    #[test]
    fn number_state_labels_are_trailing_ones() {
        assert_eq!(number_state_label(4, 0), 0b0000);
        assert_eq!(number_state_label(4, 2), 0b0011);
        assert_eq!(number_state_label(4, 4), 0b1111);
    }

    #[test]
    fn trivial_subspaces_embed_as_relabeling() {
        let spec = HiddenBasisSpec::new(vec![c64(1.0, 0.0)], vec![c64(1.0, 0.0)]).unwrap();
        let psi = LogicalState::from_amplitudes(
            2,
            &[c64(0.5, 0.0), c64(0.5, 0.0), c64(0.5, 0.0), c64(0.5, 0.0)],
        )
        .unwrap();
        let phys = embed(&spec, &psi).unwrap();
        for i in 0..4 {
            assert_eq!(phys.amplitude(i), psi.amplitude(i));
        }
    }

    #[test]
    fn single_site_embedding_places_coefficients() {
        let spec = HiddenBasisSpec::new(
            vec![c64(1.0, 0.0), c64(0.0, 0.0)],
            vec![c64(0.0, 0.0), c64(1.0, 0.0)],
        )
        .unwrap();
        let one = LogicalState::basis(1, 1).unwrap();
        let phys = embed(&spec, &one).unwrap();
        // beta = (0, 1) sits at physical index d0 + 1 = 3.
        assert_eq!(phys.amplitude(3), c64(1.0, 0.0));
    }

    #[test]
    fn embedding_is_isometric_on_random_spec() {
        let mut rng_ = crate::rng::fork_stream(5, "test/embed-gram");
        let spec = HiddenBasisSpec::random(2, 2, &mut rng_).unwrap();
        let n = 2;
        for y in 0..(1usize << n) {
            for yp in 0..(1usize << n) {
                let a = embed(&spec, &LogicalState::basis(n, y).unwrap()).unwrap();
                let b = embed(&spec, &LogicalState::basis(n, yp).unwrap()).unwrap();
                let g = a.inner(&b).unwrap();
                let expect = if y == yp { 1.0 } else { 0.0 };
                assert!((g - c64(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_shift_diagonal_and_group_law() {
        let m = phase_shift_matrix(std::f64::consts::PI, 2);
        for (i, expect) in [1.0, -1.0, -1.0, 1.0].iter().enumerate() {
            assert!((m[(i, i)] - c64(*expect, 0.0)).norm() < 1e-12);
        }
        let a = phase_shift_matrix(0.4, 2);
        let b = phase_shift_matrix(0.9, 2);
        let ab = &a * &b;
        let sum = phase_shift_matrix(1.3, 2);
        assert!(crate::linalg::max_abs_entry(&(ab - sum)) < 1e-12);
    }

    #[test]
    fn spec_json_schema_roundtrip() {
        let mut rng_ = crate::rng::fork_stream(9, "test/spec-json");
        let spec = HiddenBasisSpec::random(2, 3, &mut rng_).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["d0"], 2);
        assert_eq!(v["d1"], 3);
        assert_eq!(v["alpha"].as_array().unwrap().len(), 2);
        assert_eq!(v["alpha"][0].as_array().unwrap().len(), 2);
        let back: HiddenBasisSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        // Mismatched declared dimensions must be rejected.
        let bad = r#"{"d0":2,"d1":1,"alpha":[[1.0,0.0]],"beta":[[1.0,0.0]]}"#;
        assert!(serde_json::from_str::<HiddenBasisSpec>(bad).is_err());
    }
}
