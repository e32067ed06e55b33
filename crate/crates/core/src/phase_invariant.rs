//! Phase-invariant operators: block-diagonal structure over Hamming-weight
//! sectors, lifting of logical block operators to physical space, and the
//! copy-consuming circuits that prepare weight-sector states.
//!
//! An operator commutes with every phase shift exactly when it is block
//! diagonal over the weight sectors; that characterization is what makes the
//! operators here implementable without knowing the hidden basis.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hidden_basis::{
    binomial, hamming_weight, number_state_label, weight_basis, HiddenBasisSpec, LogicalState,
    WeightClasses,
};
use crate::linalg::{
    c64, hermitian_eigenvalues, max_abs_entry, unitarity_deviation, PureState, UnitaryMatrix, C64,
    MAX_DENSE_DIM, VALIDATION_TOL,
};

/// Which contract the blocks of a [`WeightBlockOperator`] satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Unitary,
    Hermitian,
}

#[derive(Serialize, Deserialize)]
struct WeightBlockRaw {
    n: usize,
    kind: BlockKind,
    blocks: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Block-diagonal operator over the weight sectors of `n` logical qubits:
/// one `C(n,w) × C(n,w)` matrix per weight `w = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightBlockRaw", into = "WeightBlockRaw")]
pub struct WeightBlockOperator {
    n: usize,
    kind: BlockKind,
    blocks: Vec<DMatrix<C64>>,
}

fn check_block_shapes(n: usize, blocks: &[DMatrix<C64>]) -> Result<()> {
    if blocks.len() != n + 1 {
        return Err(Error::InvalidParameter {
            name: "blocks",
            reason: format!("expected {} blocks, got {}", n + 1, blocks.len()),
        });
    }
    for (w, b) in blocks.iter().enumerate() {
        let size = binomial(n, w);
        if b.nrows() != size || b.ncols() != size {
            return Err(Error::DimensionMismatch {
                left: b.nrows(),
                right: size,
            });
        }
    }
    Ok(())
}

impl WeightBlockOperator {
    /// Wraps unitary blocks (each validated to [`VALIDATION_TOL`]).
    pub fn unitary(n: usize, blocks: Vec<DMatrix<C64>>) -> Result<Self> {
        check_block_shapes(n, &blocks)?;
        for b in &blocks {
            let dev = unitarity_deviation(b);
            if dev > VALIDATION_TOL {
                return Err(Error::NotUnitary { deviation: dev });
            }
        }
        Ok(Self {
            n,
            kind: BlockKind::Unitary,
            blocks,
        })
    }

    /// Wraps Hermitian blocks (observable form).
    pub fn hermitian(n: usize, blocks: Vec<DMatrix<C64>>) -> Result<Self> {
        check_block_shapes(n, &blocks)?;
        for b in &blocks {
            let dev = max_abs_entry(&(b - b.adjoint()));
            if dev > VALIDATION_TOL {
                return Err(Error::NotHermitian { deviation: dev });
            }
        }
        Ok(Self {
            n,
            kind: BlockKind::Hermitian,
            blocks,
        })
    }

    /// Identity on every sector.
    pub fn identity(n: usize) -> Self {
        let blocks = (0..=n)
            .map(|w| DMatrix::identity(binomial(n, w), binomial(n, w)))
            .collect();
        Self {
            n,
            kind: BlockKind::Unitary,
            blocks,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn block(&self, w: usize) -> &DMatrix<C64> {
        &self.blocks[w]
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    /// Dense `2^n × 2^n` logical matrix with the blocks embedded at their
    /// sector positions.
    pub fn to_logical_matrix(&self) -> DMatrix<C64> {
        let wc = WeightClasses::new(self.n);
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for w in 0..=self.n {
            let sector = wc.sector(w);
            let b = &self.blocks[w];
            for (i0, &row) in sector.iter().enumerate() {
                for (j0, &col) in sector.iter().enumerate() {
                    m[(row, col)] = b[(i0, j0)];
                }
            }
        }
        m
    }

    /// Applies the operator to a logical state, sector by sector.
    pub fn apply_logical(&self, psi: &LogicalState) -> Result<LogicalState> {
        if psi.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: psi.n(),
                right: self.n,
            });
        }
        let wc = WeightClasses::new(self.n);
        let mut out = DVector::zeros(psi.dim());
        for w in 0..=self.n {
            let sector = wc.sector(w);
            let b = &self.blocks[w];
            let sub = DVector::from_fn(sector.len(), |z0, _| psi.amplitude(sector[z0]));
            let mapped = b * sub;
            for (k0, &row) in sector.iter().enumerate() {
                out[row] = mapped[k0];
            }
        }
        LogicalState::new(self.n, PureState::new(out)?)
    }
}

impl TryFrom<WeightBlockRaw> for WeightBlockOperator {
    type Error = Error;

    fn try_from(raw: WeightBlockRaw) -> Result<Self> {
        let blocks: Vec<DMatrix<C64>> = raw
            .blocks
            .iter()
            .map(|rows| {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                DMatrix::from_fn(r, c, |i, j| c64(rows[i][j][0], rows[i][j][1]))
            })
            .collect();
        match raw.kind {
            BlockKind::Unitary => Self::unitary(raw.n, blocks),
            BlockKind::Hermitian => Self::hermitian(raw.n, blocks),
        }
    }
}

impl From<WeightBlockOperator> for WeightBlockRaw {
    fn from(op: WeightBlockOperator) -> Self {
        WeightBlockRaw {
            n: op.n,
            kind: op.kind,
            blocks: op
                .blocks
                .iter()
                .map(|b| {
                    (0..b.nrows())
                        .map(|i| {
                            (0..b.ncols())
                                .map(|j| [b[(i, j)].re, b[(i, j)].im])
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Block-diagonal density operator: Hermitian positive blocks with total
/// trace one. This is the general form of a state invariant under every
/// phase shift.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBlockDensity {
    n: usize,
    blocks: Vec<DMatrix<C64>>,
}

impl WeightBlockDensity {
    pub fn new(n: usize, blocks: Vec<DMatrix<C64>>) -> Result<Self> {
        check_block_shapes(n, &blocks)?;
        let mut trace = 0.0;
        for b in &blocks {
            let dev = max_abs_entry(&(b - b.adjoint()));
            if dev > VALIDATION_TOL {
                return Err(Error::NotHermitian { deviation: dev });
            }
            if b.nrows() > 0 {
                let min_eig = hermitian_eigenvalues(b)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                if min_eig < -VALIDATION_TOL {
                    return Err(Error::NotDensity {
                        reason: format!("block eigenvalue {min_eig:e} is negative"),
                    });
                }
            }
            trace += b.trace().re;
        }
        if (trace - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::NotDensity {
                reason: format!("blocks trace to {trace}, expected 1"),
            });
        }
        Ok(Self { n, blocks })
    }

    /// The sector-diagonal restriction (uniform-phase average) of an
    /// arbitrary logical density matrix.
    pub fn dephase(n: usize, rho: &DMatrix<C64>) -> Result<Self> {
        let dim = 1usize << n;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch {
                left: rho.nrows(),
                right: dim,
            });
        }
        let wc = WeightClasses::new(n);
        let blocks = (0..=n)
            .map(|w| {
                let sector = wc.sector(w);
                DMatrix::from_fn(sector.len(), sector.len(), |i0, j0| {
                    rho[(sector[i0], sector[j0])]
                })
            })
            .collect();
        Self::new(n, blocks)
    }

    /// The mixture obtained by averaging `(|0⟩+|1⟩)(⟨0|+⟨1|)/2` product
    /// states over a uniform phase: sector weights are binomial.
    pub fn binomial_symmetric_mixture(n: usize) -> Self {
        let scale = 0.5f64.powi(n as i32);
        let blocks = (0..=n)
            .map(|w| {
                let size = binomial(n, w);
                DMatrix::from_element(size, size, c64(scale, 0.0))
            })
            .collect();
        Self::new(n, blocks).expect("binomial mixture is a valid density")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block(&self, w: usize) -> &DMatrix<C64> {
        &self.blocks[w]
    }

    /// Trace carried by sector `w`.
    pub fn sector_weight(&self, w: usize) -> f64 {
        self.blocks[w].trace().re
    }

    /// Dense logical-space density matrix.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let wc = WeightClasses::new(self.n);
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for w in 0..=self.n {
            let sector = wc.sector(w);
            for (i0, &row) in sector.iter().enumerate() {
                for (j0, &col) in sector.iter().enumerate() {
                    m[(row, col)] = self.blocks[w][(i0, j0)];
                }
            }
        }
        m
    }

    pub fn to_density_operator(&self) -> crate::linalg::DensityOperator {
        crate::linalg::DensityOperator::new(self.to_matrix())
            .expect("validated blocks assemble into a valid density")
    }
}

/// Tests whether `m` is block diagonal over weight sectors: every entry that
/// couples different Hamming weights must have magnitude at most `tol`.
pub fn is_phase_invariant(m: &DMatrix<C64>, tol: f64) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            left: m.nrows(),
            right: m.ncols(),
        });
    }
    let dim = m.nrows();
    if !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { dim });
    }
    for i in 0..dim {
        for j in 0..dim {
            if hamming_weight(i) != hamming_weight(j) && m[(i, j)].norm() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A logical weight-block unitary lifted to the physical product space of a
/// hidden-basis register.
///
/// The physical weight-`w` sector splits into invariant subspaces indexed by
/// the multiset of subspace letters; on each, the lift acts as the logical
/// block `V_w` in the pattern basis, so the operator is implementable without
/// the hidden coefficients.
#[derive(Debug, Clone)]
pub struct LiftedUnitary {
    v: WeightBlockOperator,
    d0: usize,
    d1: usize,
}

impl LiftedUnitary {
    pub fn new(v: &WeightBlockOperator, spec: &HiddenBasisSpec) -> Result<Self> {
        if v.kind() != BlockKind::Unitary {
            return Err(Error::InvalidParameter {
                name: "v",
                reason: "lifting requires unitary blocks".into(),
            });
        }
        Ok(Self {
            v: v.clone(),
            d0: spec.d0(),
            d1: spec.d1(),
        })
    }

    pub fn n(&self) -> usize {
        self.v.n()
    }

    pub fn physical_dim(&self) -> usize {
        (self.d0 + self.d1).pow(self.n() as u32)
    }

    /// Visits every invariant subspace: passes `(w, indices)` where
    /// `indices[z-1]` is the physical index of pattern rank `z` filled with
    /// the current letter tuple.
    fn for_each_sector_group<F: FnMut(usize, &[usize])>(&self, mut f: F) {
        let n = self.n();
        let d = self.d0 + self.d1;
        let wc = WeightClasses::new(n);
        let mut pow = vec![1usize; n];
        for p in (0..n.saturating_sub(1)).rev() {
            pow[p] = pow[p + 1] * d;
        }
        let mut indices = Vec::new();
        for w in 0..=n {
            let patterns = wc.sector(w);
            let na = n - w;
            // Mixed-radix counters over letter tuples.
            let mut a_tuple = vec![0usize; na];
            loop {
                let mut b_tuple = vec![0usize; w];
                loop {
                    indices.clear();
                    for &pattern in patterns {
                        let (mut ai, mut bi) = (0, 0);
                        let mut idx = 0usize;
                        for (p, &place) in pow.iter().enumerate() {
                            let bit = pattern >> (n - 1 - p) & 1;
                            let digit = if bit == 0 {
                                let v = a_tuple[ai];
                                ai += 1;
                                v
                            } else {
                                let v = self.d0 + b_tuple[bi];
                                bi += 1;
                                v
                            };
                            idx += digit * place;
                        }
                        indices.push(idx);
                    }
                    f(w, &indices);
                    // Advance b_tuple.
                    let mut k = w;
                    loop {
                        if k == 0 {
                            break;
                        }
                        b_tuple[k - 1] += 1;
                        if b_tuple[k - 1] < self.d1 {
                            break;
                        }
                        b_tuple[k - 1] = 0;
                        k -= 1;
                    }
                    if k == 0 {
                        break;
                    }
                }
                // Advance a_tuple.
                let mut k = na;
                loop {
                    if k == 0 {
                        break;
                    }
                    a_tuple[k - 1] += 1;
                    if a_tuple[k - 1] < self.d0 {
                        break;
                    }
                    a_tuple[k - 1] = 0;
                    k -= 1;
                }
                if k == 0 {
                    break;
                }
            }
        }
    }

    /// Applies the lifted operator to a physical state without materializing
    /// the matrix.
    pub fn apply(&self, psi: &PureState) -> Result<PureState> {
        let dim = self.physical_dim();
        if psi.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: psi.dim(),
                right: dim,
            });
        }
        let mut out = DVector::zeros(dim);
        self.for_each_sector_group(|w, indices| {
            let block = self.v.block(w);
            let sub = DVector::from_fn(indices.len(), |z0, _| psi.amplitude(indices[z0]));
            let mapped = block * sub;
            for (k0, &row) in indices.iter().enumerate() {
                out[row] = mapped[k0];
            }
        });
        PureState::new(out)
    }

    /// Materializes the dense physical matrix. Errors above
    /// [`MAX_DENSE_DIM`]; use [`LiftedUnitary::apply`] there instead.
    pub fn to_matrix(&self) -> Result<UnitaryMatrix> {
        let dim = self.physical_dim();
        if dim > MAX_DENSE_DIM {
            return Err(Error::DimensionCap {
                dim,
                cap: MAX_DENSE_DIM,
            });
        }
        let mut m = DMatrix::zeros(dim, dim);
        self.for_each_sector_group(|w, indices| {
            let block = self.v.block(w);
            for (z0, &col) in indices.iter().enumerate() {
                for (k0, &row) in indices.iter().enumerate() {
                    m[(row, col)] = block[(k0, z0)];
                }
            }
        });
        // Unitarity is structural: validated unitary blocks acting on
        // disjoint index groups. The full check is quadratic-times-dim, so
        // it is reserved for debug builds at small sizes.
        #[cfg(debug_assertions)]
        if dim <= 256 {
            debug_assert!(unitarity_deviation(&m) < 1e-9);
        }
        Ok(UnitaryMatrix::new_structural(m))
    }
}

/// Lifts a logical weight-block unitary to the physical space.
pub fn lift_unitary(v: &WeightBlockOperator, spec: &HiddenBasisSpec) -> Result<UnitaryMatrix> {
    LiftedUnitary::new(v, spec)?.to_matrix()
}

/// One recorded branch of a preparation step: the prefix `x` already fixed,
/// the count of ones still to place, and the branching amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepBranch {
    pub prefix: String,
    pub remaining_ones: usize,
    pub sqrt_p0: f64,
    pub sqrt_p1: f64,
    pub reachable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepStep {
    pub j: usize,
    pub branches: Vec<PrepBranch>,
}

/// Audit record of a weight-state preparation: per-step branching
/// probabilities plus the final diagonal phase correction over the target
/// sector.
///
/// The simulation replays exactly what the record says, so edits to
/// unreachable branches are observable no-ops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepCircuit {
    pub n: usize,
    pub w: usize,
    pub steps: Vec<PrepStep>,
    /// Phase (radians) applied to each weight-`w` label, in sector order.
    pub phases: Vec<f64>,
}

impl PrepCircuit {
    /// Replays the recorded circuit from the initial product state
    /// (`n−w` zeros' worth of |**0**⟩ copies, then `w` copies of |**1**⟩).
    pub fn simulate(&self) -> Result<LogicalState> {
        let n = self.n;
        let dim = 1usize << n;
        // Amplitudes over prefixes, keyed by (len, bits); start at the empty
        // prefix. The suffix is always the number state of the ones still to
        // place, so prefixes describe the full state.
        let mut amps: BTreeMap<usize, C64> = BTreeMap::new();
        amps.insert(0, c64(1.0, 0.0));
        for (step_idx, step) in self.steps.iter().enumerate() {
            let j = step_idx + 1;
            if step.j != j {
                return Err(Error::InvalidParameter {
                    name: "steps",
                    reason: format!("step {} labeled {}", j, step.j),
                });
            }
            let branch_of: BTreeMap<&str, &PrepBranch> = step
                .branches
                .iter()
                .map(|b| (b.prefix.as_str(), b))
                .collect();
            let mut next: BTreeMap<usize, C64> = BTreeMap::new();
            for (&bits, &amp) in &amps {
                let prefix = bitstring(bits, j - 1);
                let branch =
                    branch_of
                        .get(prefix.as_str())
                        .ok_or_else(|| Error::InvalidParameter {
                            name: "steps",
                            reason: format!("missing branch for prefix \"{prefix}\" at step {j}"),
                        })?;
                let d = branch.remaining_ones;
                let zeros_left = n - j + 1 - d;
                if zeros_left > 0 && branch.sqrt_p0 != 0.0 {
                    *next.entry(bits << 1).or_insert_with(|| c64(0.0, 0.0)) +=
                        amp * c64(branch.sqrt_p0, 0.0);
                }
                if d > 0 && branch.sqrt_p1 != 0.0 {
                    *next.entry(bits << 1 | 1).or_insert_with(|| c64(0.0, 0.0)) +=
                        amp * c64(branch.sqrt_p1, 0.0);
                }
            }
            amps = next;
        }
        let mut out = DVector::zeros(dim);
        if self.steps.is_empty() {
            // Degenerate target: the sector has a single label.
            out[number_state_label(self.n, self.w)] = c64(1.0, 0.0);
        } else {
            for (&bits, &amp) in &amps {
                out[bits] = amp;
            }
        }
        let basis = weight_basis(self.n, self.w)?;
        if self.phases.len() != basis.len() {
            return Err(Error::InvalidParameter {
                name: "phases",
                reason: format!("expected {} phases, got {}", basis.len(), self.phases.len()),
            });
        }
        for (z0, lbl) in basis.iter().enumerate() {
            out[lbl.label] *= C64::from_polar(1.0, self.phases[z0]);
        }
        LogicalState::new(n, PureState::new(out)?)
    }

    /// Copies of |**0**⟩ consumed by the initial product state.
    pub fn copies_zero(&self) -> usize {
        self.n - self.w
    }

    /// Copies of |**1**⟩ consumed by the initial product state.
    pub fn copies_one(&self) -> usize {
        self.w
    }
}

fn bitstring(bits: usize, len: usize) -> String {
    (0..len)
        .map(|p| {
            if bits >> (len - 1 - p) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

/// Builds the branching-probability circuit that prepares the weight-`w`
/// state with coefficients `eta` (over [`weight_basis`]`(n, w)` order) from
/// the number-state product input.
///
/// Branch probabilities follow the chain rule `p_{b|x} = p_{x·b}/p_x` on the
/// prefix distribution induced by `|eta|²`; the final step applies the target
/// phases. Degenerate sectors (`w = 0` or `w = n`) need no branching at all.
pub fn prepare_weight_state(n: usize, w: usize, eta: &[C64]) -> Result<PrepCircuit> {
    if w > n {
        return Err(Error::WeightOutOfRange { n, w });
    }
    if n == 0 || 1usize << n > MAX_DENSE_DIM {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("register size {n} outside supported range"),
        });
    }
    let sector = weight_basis(n, w)?;
    if eta.len() != sector.len() {
        return Err(Error::DimensionMismatch {
            left: eta.len(),
            right: sector.len(),
        });
    }
    let norm_sq: f64 = eta.iter().map(|z| z.norm_sqr()).sum();
    if norm_sq <= 0.0 || !norm_sq.is_finite() {
        return Err(Error::ZeroNorm);
    }

    let phases = eta
        .iter()
        .map(|z| if z.norm_sqr() > 0.0 { z.arg() } else { 0.0 })
        .collect();

    if w == 0 || w == n {
        return Ok(PrepCircuit {
            n,
            w,
            steps: Vec::new(),
            phases,
        });
    }

    // Prefix probabilities p[len][bits], normalized at the root.
    let mut p = vec![BTreeMap::<usize, f64>::new(); n + 1];
    for (z0, lbl) in sector.iter().enumerate() {
        *p[n].entry(lbl.label).or_insert(0.0) += eta[z0].norm_sqr() / norm_sq;
    }
    for len in (0..n).rev() {
        let mut level = BTreeMap::new();
        for (&bits, &prob) in &p[len + 1] {
            *level.entry(bits >> 1).or_insert(0.0) += prob;
        }
        p[len] = level;
    }

    let mut steps = Vec::with_capacity(n);
    for j in 1..=n {
        let mut branches = Vec::new();
        // Feasible prefixes: those that can still be completed to weight w.
        for bits in 0..(1usize << (j - 1)) {
            let h = hamming_weight(bits);
            if h > w || (j - 1 - h) > n - w {
                continue;
            }
            let d = w - h;
            let c = n - j + 1;
            let px = p[j - 1].get(&bits).copied().unwrap_or(0.0);
            let reachable = px > 0.0;
            let (sqrt_p0, sqrt_p1) = if reachable {
                let p1 = p[j].get(&(bits << 1 | 1)).copied().unwrap_or(0.0) / px;
                let p0 = p[j].get(&(bits << 1)).copied().unwrap_or(0.0) / px;
                (p0.max(0.0).sqrt(), p1.max(0.0).sqrt())
            } else if d == c {
                // Only the one-branch exists structurally.
                (0.0, 1.0)
            } else {
                (1.0, 0.0)
            };
            branches.push(PrepBranch {
                prefix: bitstring(bits, j - 1),
                remaining_ones: d,
                sqrt_p0,
                sqrt_p1,
                reachable,
            });
        }
        steps.push(PrepStep { j, branches });
    }

    Ok(PrepCircuit {
        n,
        w,
        steps,
        phases,
    })
}

/// Uniform superposition over the weight-`w` sector.
pub fn symmetric_state(n: usize, w: usize) -> Result<LogicalState> {
    let sector = weight_basis(n, w)?;
    let amp = c64(1.0 / (sector.len() as f64).sqrt(), 0.0);
    let mut v = DVector::zeros(1usize << n);
    for lbl in &sector {
        v[lbl.label] = amp;
    }
    LogicalState::new(n, PureState::new(v)?)
}

/// One sampled preparation drawn from a phase-invariant density.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    /// Sampled weight sector.
    pub w: usize,
    /// Probability with which this (sector, eigenvector) pair is drawn.
    pub probability: f64,
    /// The circuit that prepares the sampled eigenvector.
    pub circuit: PrepCircuit,
    /// The prepared logical state.
    pub state: LogicalState,
    /// Copies of |**0**⟩ consumed.
    pub copies_zero: usize,
    /// Copies of |**1**⟩ consumed.
    pub copies_one: usize,
}

/// Spectral decomposition per sector; weights are global eigenvalues.
fn spectral_draws(rho: &WeightBlockDensity) -> Vec<(usize, f64, Vec<C64>)> {
    let n = rho.n();
    let mut draws: Vec<(usize, f64, Vec<C64>)> = Vec::new();
    for w in 0..=n {
        let b = rho.block(w);
        if b.nrows() == 0 {
            continue;
        }
        let eig = b.clone().symmetric_eigen();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > VALIDATION_TOL {
                draws.push((
                    w,
                    lambda,
                    eig.eigenvectors.column(k).iter().copied().collect(),
                ));
            }
        }
    }
    draws
}

fn prepare_draw(n: usize, w: usize, lambda: f64, eta: &[C64]) -> Result<PreparedSample> {
    let circuit = prepare_weight_state(n, w, eta)?;
    let state = circuit.simulate()?;
    Ok(PreparedSample {
        w,
        probability: lambda,
        circuit,
        state,
        copies_zero: n - w,
        copies_one: w,
    })
}

/// Prepares every eigen-branch of a phase-invariant density. Mixing the
/// branch states with their probabilities reproduces the density exactly.
pub fn spectral_preparations(rho: &WeightBlockDensity) -> Result<Vec<PreparedSample>> {
    spectral_draws(rho)
        .into_iter()
        .map(|(w, lambda, eta)| prepare_draw(rho.n(), w, lambda, &eta))
        .collect()
}

/// Samples an eigenvector of a phase-invariant density (sector trace times
/// eigenweight) and prepares it. Mixing such samples reproduces the density;
/// every sample costs at most `n` copies of each hidden-basis state.
pub fn prepare_phase_invariant_density<R: Rng>(
    rho: &WeightBlockDensity,
    rng: &mut R,
) -> Result<PreparedSample> {
    let mut draws = spectral_draws(rho);
    let total: f64 = draws.iter().map(|d| d.1).sum();
    let mut x: f64 = rng.gen::<f64>() * total;
    let mut chosen = draws.len() - 1;
    for (i, d) in draws.iter().enumerate() {
        x -= d.1;
        if x <= 0.0 {
            chosen = i;
            break;
        }
    }
    let (w, lambda, eta) = draws.swap_remove(chosen);
    prepare_draw(rho.n(), w, lambda, &eta)
}
