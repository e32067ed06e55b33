//! Hidden-key identification and forgery: the SWAP test, fingerprint
//! families, the two-message identification kernel with honest and
//! reference-bounded adversarial provers, session accounting, and the
//! uniform-phase forgery of publicly-described signature states.
//!
//! Everything is simulated in the logical frame: the honest prover's secret
//! knowledge shows up as exact logical gates, while the adversary only gets
//! phase-invariant operations plus states built from public keys.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hidden_basis::{binomial, phase_shift_matrix, LogicalState};
use crate::linalg::{c64, DensityOperator, PureState, C64, VALIDATION_TOL};
use crate::phase_invariant::{
    prepare_weight_state, spectral_preparations, symmetric_state, WeightBlockDensity,
    WeightBlockOperator,
};
use crate::phase_reference::{
    apply_h_theta, apply_phase_gate, GateSpec, JointState, ReferenceState,
};

/// Probability that the SWAP test passes on the pair: `(1 + tr(ρσ))/2`.
pub fn swap_test(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    Ok((1.0 + (rho.matrix() * sigma.matrix()).trace().re) / 2.0)
}

/// A set of pairwise almost-orthogonal states (quantum fingerprints) with a
/// distinguished zero state.
#[derive(Debug, Clone)]
pub struct FingerprintFamily {
    dim: usize,
    delta: f64,
    zero_state: PureState,
    states: Vec<PureState>,
    orthogonal_to_zero: bool,
}

impl FingerprintFamily {
    /// Validates pairwise overlaps `≤ delta` and, when flagged, exact
    /// orthogonality of every member to the zero state.
    pub fn new(
        dim: usize,
        zero_state: PureState,
        states: Vec<PureState>,
        delta: f64,
        orthogonal_to_zero: bool,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("{delta} outside [0, 1)"),
            });
        }
        if zero_state.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: zero_state.dim(),
                right: dim,
            });
        }
        for s in &states {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: s.dim(),
                    right: dim,
                });
            }
            if orthogonal_to_zero && zero_state.inner(s)?.norm() > VALIDATION_TOL {
                return Err(Error::InvalidParameter {
                    name: "states",
                    reason: "member has nonzero overlap with the zero state".into(),
                });
            }
        }
        for i in 0..states.len() {
            for j in (i + 1)..states.len() {
                let ov = states[i].inner(&states[j])?.norm();
                if ov > delta + VALIDATION_TOL {
                    return Err(Error::InvalidParameter {
                        name: "states",
                        reason: format!("pair ({i}, {j}) overlap {ov} exceeds delta {delta}"),
                    });
                }
            }
        }
        Ok(Self {
            dim,
            delta,
            zero_state,
            states,
            orthogonal_to_zero,
        })
    }

    /// The exactly-orthogonal toy family: basis states `|1⟩ … |k⟩` with
    /// `|0⟩` as the zero state.
    pub fn orthonormal(dim: usize, k: usize) -> Result<Self> {
        if k + 1 > dim {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: format!("{k} members do not fit in dimension {dim} beside the zero state"),
            });
        }
        let zero = PureState::basis_state(dim, 0)?;
        let states = (1..=k)
            .map(|i| PureState::basis_state(dim, i))
            .collect::<Result<_>>()?;
        Self::new(dim, zero, states, 0.0, true)
    }

    /// Seeded random family: members are drawn uniformly in the subspace
    /// orthogonal to `|0⟩` and rejected until all pairwise overlaps are at
    /// most `delta`.
    pub fn random<R: Rng>(dim: usize, k: usize, delta: f64, rng: &mut R) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "need at least one dimension beside the zero state".into(),
            });
        }
        let zero = PureState::basis_state(dim, 0)?;
        let mut states: Vec<PureState> = Vec::with_capacity(k);
        let mut tries = 0usize;
        while states.len() < k {
            tries += 1;
            if tries > 200 * (k + 1) {
                return Err(Error::InvalidParameter {
                    name: "delta",
                    reason: format!(
                        "could not place {k} states with pairwise overlap <= {delta} in dim {dim}"
                    ),
                });
            }
            let inner = crate::rng::haar_state(dim - 1, rng)?;
            let mut amps = DVector::zeros(dim);
            for i in 1..dim {
                amps[i] = inner.amplitude(i - 1);
            }
            let candidate = PureState::new(amps)?;
            if states.iter().all(|s| {
                s.inner(&candidate)
                    .map(|z| z.norm() <= delta)
                    .unwrap_or(false)
            }) {
                states.push(candidate);
            }
        }
        Self::new(dim, zero, states, delta, true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &PureState {
        &self.states[i]
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn zero_state(&self) -> &PureState {
        &self.zero_state
    }

    pub fn orthogonal_to_zero(&self) -> bool {
        self.orthogonal_to_zero
    }

    /// Largest pairwise overlap magnitude actually present.
    pub fn max_pairwise_overlap(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.states.len() {
            for j in (i + 1)..self.states.len() {
                let ov = self.states[i]
                    .inner(&self.states[j])
                    .expect("same-dimension members")
                    .norm();
                max = max.max(ov);
            }
        }
        max
    }
}

/// Exact record of one identification kernel run.
#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    /// Probability of the prover reporting bit 0 / bit 1.
    pub outcome_probabilities: [f64; 2],
    /// Verifier SWAP-test pass probability conditioned on each bit.
    pub pass_given_outcome: [f64; 2],
    /// Total pass probability.
    pub pass_probability: f64,
}

fn bob_state_after(amp_b0: C64, amp_b1: C64, probability: f64, apply_z: bool) -> DensityOperator {
    let z = if apply_z {
        c64(-1.0, 0.0)
    } else {
        c64(1.0, 0.0)
    };
    let scale = c64(1.0 / probability.sqrt(), 0.0);
    let state = PureState::new(DVector::from_vec(vec![amp_b0 * scale, amp_b1 * z * scale]))
        .expect("collapsed branch is normalized");
    state.to_density()
}

/// Verification target `(|0⟩ + e^{iθ}|1⟩)/√2`, the squashed public key.
fn verification_state(theta: f64) -> DensityOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    PureState::from_slice(&[c64(s, 0.0), C64::from_polar(s, theta)])
        .expect("normalized by construction")
        .to_density()
}

/// The symmetric two-register key state: `(|0⟩|ψ⟩ + |ψ⟩|0⟩)/√2` in the
/// logical frame with `|ψ⟩ = e^{iθ}|1⟩`, built through the weight-state
/// preparation circuit.
fn symmetric_key_state(theta: f64) -> LogicalState {
    let phase = C64::from_polar(1.0, theta);
    prepare_weight_state(2, 1, &[phase, phase])
        .expect("two-register weight-1 target is valid")
        .simulate()
        .expect("recorded circuit replays")
}

/// One honest kernel at phase `theta`: the prover applies the exact
/// phase-shifted Hadamard and reports the measured bit; the verifier
/// conditionally flips and SWAP-tests against the squashed key. Passes with
/// probability exactly 1.
pub fn kernel_honest_with_phase(theta: f64) -> Result<KernelReport> {
    let state = symmetric_key_state(theta);
    let h = crate::phase_reference::ideal_h_theta(theta, std::f64::consts::FRAC_1_SQRT_2);
    let full = crate::linalg::one_qubit_op(2, 1, &h)?;
    let sent = state.apply_matrix(&full)?;
    let verifier = verification_state(theta);
    let mut outcome_probabilities = [0.0; 2];
    let mut pass_given_outcome = [0.0; 2];
    let mut total = 0.0;
    for a in 0..2usize {
        // Labels (b, a): qubit 0 is the kept register, qubit 1 was sent.
        let amp_b0 = sent.amplitude(a);
        let amp_b1 = sent.amplitude(0b10 | a);
        let p = amp_b0.norm_sqr() + amp_b1.norm_sqr();
        outcome_probabilities[a] = p;
        if p > 1e-300 {
            let bob = bob_state_after(amp_b0, amp_b1, p, a == 1);
            let pass = swap_test(&bob, &verifier)?;
            pass_given_outcome[a] = pass;
            total += p * pass;
        }
    }
    let leaked = 1.0 - outcome_probabilities[0] - outcome_probabilities[1];
    if leaked.abs() > 1e-12 {
        return Err(Error::NotNormalized { norm: 1.0 - leaked });
    }
    Ok(KernelReport {
        outcome_probabilities,
        pass_given_outcome,
        pass_probability: total,
    })
}

/// [`kernel_honest_with_phase`] in the canonical frame.
pub fn kernel_honest() -> Result<KernelReport> {
    kernel_honest_with_phase(0.0)
}

/// The adversary's reference distilled from `r'` public keys: binomial
/// amplitudes `√(C(r',w)/2^{r'})` over numbers `w = 0…r'`, with the key
/// phase appearing as `e^{iwθ}`.
///
/// Weights come from the multiplicative recurrence in floating point, so
/// the construction scales past exact-integer binomials; the profile is
/// renormalized to absorb the accumulated rounding.
pub fn eve_reference_with_phase(r_prime: usize, theta: f64) -> Result<ReferenceState> {
    if r_prime == 0 {
        return Err(Error::ReferenceTooSmall {
            t: r_prime,
            reason: "the binomial reference needs at least one key copy".into(),
        });
    }
    if r_prime > 1020 {
        return Err(Error::InvalidParameter {
            name: "r_prime",
            reason: format!("{r_prime} keys underflow the binomial tail weights"),
        });
    }
    let mut probs = vec![0.0f64; r_prime + 1];
    let mut p = 0.5f64.powi(r_prime as i32);
    for (w, slot) in probs.iter_mut().enumerate() {
        *slot = p;
        p *= (r_prime - w) as f64 / (w + 1) as f64;
    }
    let norm = probs.iter().sum::<f64>().sqrt();
    let c = DVector::from_fn(r_prime + 1, |w, _| {
        C64::from_polar(probs[w].sqrt() / norm, w as f64 * theta)
    });
    ReferenceState::new(r_prime, c)
}

/// [`eve_reference_with_phase`] in the canonical frame.
pub fn eve_reference(r_prime: usize) -> Result<ReferenceState> {
    eve_reference_with_phase(r_prime, 0.0)
}

fn trace_out_qubit(joint: &JointState, kept: usize) -> DensityOperator {
    // Reduce the two-qubit system marginal to one qubit.
    let full = joint.system_marginal();
    let other = 1 - kept;
    let mut rho = DMatrix::zeros(2, 2);
    for b in 0..2usize {
        for b2 in 0..2usize {
            let mut acc = c64(0.0, 0.0);
            for x in 0..2usize {
                let mut i = 0usize;
                let mut j = 0usize;
                i |= b << (1 - kept);
                i |= x << (1 - other);
                j |= b2 << (1 - kept);
                j |= x << (1 - other);
                acc += full.entry(i, j);
            }
            rho[(b, b2)] = acc;
        }
    }
    DensityOperator::new(rho).expect("partial trace preserves density structure")
}

/// One adversarial kernel at phase `theta`: the prover mimics the Hadamard
/// with the bounded binomial reference, measures the sent register, and
/// reports the bit; verification proceeds as in the honest kernel.
pub fn kernel_eve_with_phase(r_prime: usize, theta: f64) -> Result<KernelReport> {
    if r_prime < 3 {
        return Err(Error::ReferenceTooSmall {
            t: r_prime,
            reason: "the attack needs a reference that survives one gate".into(),
        });
    }
    let system = symmetric_key_state(theta);
    let reference = eve_reference_with_phase(r_prime, theta)?;
    let joint = JointState::from_parts(&system, &reference)?;
    let after = apply_h_theta(&joint, 1, std::f64::consts::FRAC_1_SQRT_2)?;
    let verifier = verification_state(theta);
    let mut outcome_probabilities = [0.0; 2];
    let mut pass_given_outcome = [0.0; 2];
    let mut total = 0.0;
    for a in 0..2u8 {
        let p = after.outcome_probability(1, a)?;
        outcome_probabilities[a as usize] = p;
        let Some(collapsed) = after.collapse(1, a)? else {
            continue;
        };
        let corrected = if a == 1 {
            apply_phase_gate(&collapsed, &GateSpec::Z { qubit: 0 })?
        } else {
            collapsed
        };
        let bob = trace_out_qubit(&corrected, 0);
        let pass = swap_test(&bob, &verifier)?;
        pass_given_outcome[a as usize] = pass;
        total += p * pass;
    }
    Ok(KernelReport {
        outcome_probabilities,
        pass_given_outcome,
        pass_probability: total,
    })
}

/// [`kernel_eve_with_phase`] in the canonical frame. The value equals the
/// uniform average over the unknown phase: every element of the kernel
/// rotates covariantly, so the pass probability is phase independent.
pub fn kernel_eve(r_prime: usize) -> Result<KernelReport> {
    kernel_eve_with_phase(r_prime, 0.0)
}

/// Averages the adversarial kernel over a uniform phase grid. Agreement
/// with [`kernel_eve`] is the dephasing-equivalence check.
pub fn kernel_eve_quadrature(r_prime: usize, points: usize) -> Result<f64> {
    if points == 0 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "quadrature needs at least one node".into(),
        });
    }
    let mut acc = 0.0;
    for k in 0..points {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
        acc += kernel_eve_with_phase(r_prime, theta)?.pass_probability;
    }
    Ok(acc / points as f64)
}

/// Who runs the prover side of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Prover {
    Honest,
    /// The binomial-reference adversary holding `r − 1` public keys.
    Eve,
}

/// Aggregate result of `s` independent kernels.
#[derive(Debug, Clone, Serialize)]
pub struct SessionReport {
    pub r: usize,
    pub s: usize,
    pub prover: Prover,
    pub kernel_pass_prob: f64,
    pub accept_prob: f64,
}

/// Runs a session of `s` independent kernels with reusability budget `r`;
/// the verifier accepts only if every SWAP test passes, so the accept
/// probability is the per-kernel probability to the `s`-th power.
pub fn run_session(r: usize, s: usize, prover: Prover) -> Result<SessionReport> {
    if s == 0 {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: "a session needs at least one kernel".into(),
        });
    }
    let kernel_pass_prob = match prover {
        Prover::Honest => kernel_honest()?.pass_probability,
        Prover::Eve => {
            if r < 4 {
                return Err(Error::InvalidParameter {
                    name: "r",
                    reason: "the adversary needs r - 1 >= 3 key copies".into(),
                });
            }
            kernel_eve(r - 1)?.pass_probability
        }
    };
    Ok(SessionReport {
        r,
        s,
        prover,
        kernel_pass_prob,
        accept_prob: kernel_pass_prob.powi(s as i32),
    })
}

/// How many kernels force the adversary's accept probability below
/// `epsilon`, compared against the `r·ln(r/ε)` scaling shape.
#[derive(Debug, Clone, Serialize)]
pub struct SecurityReport {
    pub r: usize,
    pub epsilon: f64,
    pub kernel_pass_prob: f64,
    pub required_s: usize,
    pub shape_r_log_r_over_eps: f64,
}

pub fn required_security_parameter(r: usize, epsilon: f64) -> Result<SecurityReport> {
    if !(0.0..1.0).contains(&epsilon) || epsilon == 0.0 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("{epsilon} outside (0, 1)"),
        });
    }
    if r < 4 {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: "the adversary needs r - 1 >= 3 key copies".into(),
        });
    }
    let p = kernel_eve(r - 1)?.pass_probability;
    let required_s = (epsilon.ln() / p.ln()).ceil() as usize;
    Ok(SecurityReport {
        r,
        epsilon,
        kernel_pass_prob: p,
        required_s,
        shape_r_log_r_over_eps: r as f64 * (r as f64 / epsilon).ln(),
    })
}

/// Publicly-known description of a signature state's functional form.
#[derive(Debug, Clone)]
pub enum SignatureDescription {
    /// The signature depends on the key only through its phase: the
    /// logical-frame density at phase zero determines the whole family.
    PhaseCovariant {
        n: usize,
        sigma_at_zero: DensityOperator,
    },
    /// Descriptions that read the private key are outside the forgeable
    /// class and are rejected.
    KeyDependent { reason: String },
}

/// The signature `((|0⟩+|ψ⟩)(⟨0|+⟨ψ|)/2)^{⊗n}` at phase zero.
pub fn plus_product_signature(n: usize) -> Result<SignatureDescription> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = PureState::from_slice(&[c64(s, 0.0), c64(s, 0.0)])?;
    let mut state = plus.clone();
    for _ in 1..n {
        state = state.tensor(&plus)?;
    }
    Ok(SignatureDescription::PhaseCovariant {
        n,
        sigma_at_zero: state.to_density(),
    })
}

/// One verifier's statistics on authentic versus forged states.
#[derive(Debug, Clone, Serialize)]
pub struct VerifierComparison {
    pub name: String,
    pub authentic_pass: f64,
    pub forged_pass: f64,
}

impl VerifierComparison {
    pub fn deviation(&self) -> f64 {
        (self.authentic_pass - self.forged_pass).abs()
    }
}

/// Outcome of the uniform-phase forgery demonstration.
#[derive(Debug, Clone, Serialize)]
pub struct ForgeryReport {
    pub n: usize,
    /// Trace carried by each weight sector of the forged mixture.
    pub forged_sector_weights: Vec<f64>,
    /// Statistics under verifiers implementable without the key phase.
    pub invariant_verifiers: Vec<VerifierComparison>,
    pub max_invariant_deviation: f64,
    /// Negative control: a verifier holding the exact squashed key.
    pub sensitive_verifier: VerifierComparison,
    /// How far the forged mixture deviates from the exact mixture of its
    /// prepared eigen-branches (ties the forgery to the preparation
    /// circuits).
    pub reconstruction_deviation: f64,
    /// Copies of (|**0**⟩, |**1**⟩) that suffice for any single prepared
    /// sample.
    pub copy_budget: (usize, usize),
}

/// Builds the uniform-phase mixture of a publicly-described signature and
/// compares verifier statistics on forged versus authentic states.
///
/// The forged state is the weight-sector restriction of the phase-zero
/// density; it is preparable from subspace information alone. Verifiers
/// whose effective observable is phase invariant cannot tell it from the
/// authentic signature at the true (hidden) phase; the phase-sensitive
/// control shows the forgery is not the identity map.
pub fn forge_signature_mixture<R: Rng>(
    description: &SignatureDescription,
    rng: &mut R,
) -> Result<ForgeryReport> {
    let (n, sigma_at_zero) = match description {
        SignatureDescription::PhaseCovariant { n, sigma_at_zero } => (*n, sigma_at_zero),
        SignatureDescription::KeyDependent { reason } => {
            return Err(Error::KeyDependentSignature {
                reason: reason.clone(),
            })
        }
    };
    let dim = 1usize << n;
    if sigma_at_zero.dim() != dim {
        return Err(Error::DimensionMismatch {
            left: sigma_at_zero.dim(),
            right: dim,
        });
    }
    let forged_blocks = WeightBlockDensity::dephase(n, sigma_at_zero.matrix())?;
    let forged = forged_blocks.to_density_operator();

    // The hidden phase of the authentic world.
    let theta: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
    let u = phase_shift_matrix(theta, n);
    let u_dag = phase_shift_matrix(-theta, n);
    let authentic = DensityOperator::new(&u * sigma_at_zero.matrix() * &u_dag)?;

    let mut invariant_verifiers = Vec::new();

    // Swap against the raw key product |ψ⟩^{⊗n}: diagonal, phase invariant.
    let key_product = {
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(dim - 1, dim - 1)] = c64(1.0, 0.0);
        DensityOperator::new(rho)?
    };
    invariant_verifiers.push(VerifierComparison {
        name: "swap-vs-key-product".into(),
        authentic_pass: swap_test(&authentic, &key_product)?,
        forged_pass: swap_test(&forged, &key_product)?,
    });

    // Swap against symmetric weight states (phase-invariant pure states).
    for w in [1usize, n.max(1)] {
        let sym = symmetric_state(n, w)?.as_pure().to_density();
        invariant_verifiers.push(VerifierComparison {
            name: format!("swap-vs-symmetric-weight-{w}"),
            authentic_pass: swap_test(&authentic, &sym)?,
            forged_pass: swap_test(&forged, &sym)?,
        });
    }

    // A random Hermitian weight-block observable's expectation value.
    let observable = random_hermitian_blocks(n, rng)?;
    let m = observable.to_logical_matrix();
    invariant_verifiers.push(VerifierComparison {
        name: "random-weight-block-observable".into(),
        authentic_pass: (authentic.matrix() * &m).trace().re,
        forged_pass: (forged.matrix() * &m).trace().re,
    });

    let max_invariant_deviation = invariant_verifiers
        .iter()
        .map(VerifierComparison::deviation)
        .fold(0.0, f64::max);

    // Negative control: swap against the squashed key (|0⟩+e^{iθ}|1⟩)^{⊗n},
    // a resource the hidden-basis verifier cannot build from key copies.
    let plus_theta = PureState::from_slice(&[
        c64(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, theta),
    ])?;
    let mut sensitive_target = plus_theta.clone();
    for _ in 1..n {
        sensitive_target = sensitive_target.tensor(&plus_theta)?;
    }
    let sensitive_density = sensitive_target.to_density();
    let sensitive_verifier = VerifierComparison {
        name: "swap-vs-squashed-key".into(),
        authentic_pass: swap_test(&authentic, &sensitive_density)?,
        forged_pass: swap_test(&forged, &sensitive_density)?,
    };

    // Reconstruct the forged mixture from its prepared eigen-branches.
    let branches = spectral_preparations(&forged_blocks)?;
    let mut reconstructed = DMatrix::zeros(dim, dim);
    for b in &branches {
        reconstructed += b.state.as_pure().to_density().matrix() * c64(b.probability, 0.0);
    }
    let reconstruction_deviation = crate::linalg::max_abs_entry(&(reconstructed - forged.matrix()));

    Ok(ForgeryReport {
        n,
        forged_sector_weights: (0..=n).map(|w| forged_blocks.sector_weight(w)).collect(),
        invariant_verifiers,
        max_invariant_deviation,
        sensitive_verifier,
        reconstruction_deviation,
        copy_budget: (n, n),
    })
}

fn random_hermitian_blocks<R: Rng>(n: usize, rng: &mut R) -> Result<WeightBlockOperator> {
    let blocks = (0..=n)
        .map(|w| {
            let size = binomial(n, w);
            let g = crate::rng::ginibre(size, size, rng);
            (&g + g.adjoint()) * c64(0.5, 0.0)
        })
        .collect();
    WeightBlockOperator::hermitian(n, blocks)
}
