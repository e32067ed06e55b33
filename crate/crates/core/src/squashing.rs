//! Copy-cost bounds for squashing: producing `|0⟩ + |ψ⟩` from copies of
//! `|ψ⟩` uniformly over a fingerprint family. Implements the search-instance
//! family built from shifted uniform vectors, the closed-form copy lower
//! bound, and exact verification of the trace-distance chain behind it.
//!
//! No squasher is constructed; the module verifies bound arithmetic only.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c64, trace_distance, PureState, C64};
use crate::protocol::FingerprintFamily;

/// Largest dense dimension `M^t` the chain verifier will materialize.
pub const MAX_CHAIN_DIM: usize = 4096;

/// A fingerprint family paired with an accuracy demand `ε < 1/2`.
#[derive(Debug, Clone)]
pub struct SquashInstance {
    family: FingerprintFamily,
    epsilon: f64,
}

impl SquashInstance {
    pub fn new(family: FingerprintFamily, epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("{epsilon} outside [0, 1/2)"),
            });
        }
        Ok(Self { family, epsilon })
    }

    pub fn family(&self) -> &FingerprintFamily {
        &self.family
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn zero_state(&self) -> &PureState {
        self.family.zero_state()
    }

    /// The squasher's ideal output on member `i`: `|0⟩ + |ψ_i⟩`, normalized.
    pub fn squashed_target(&self, i: usize) -> Result<PureState> {
        if i >= self.family.len() {
            return Err(Error::InvalidParameter {
                name: "i",
                reason: format!("member {i} outside family of {}", self.family.len()),
            });
        }
        let sum = self.zero_state().amplitudes() + self.family.state(i).amplitudes();
        PureState::normalized(sum)
    }
}

/// Member `j` of the shifted-uniform search family: `+1/√M` at `j` and
/// `−1/√M` elsewhere. All members live in one rotated frame whose common
/// rotation cancels in every distance.
pub fn a2_state(j: usize, m: usize) -> Result<PureState> {
    if m == 0 || j >= m {
        return Err(Error::InvalidParameter {
            name: "j",
            reason: format!("index {j} outside family size {m}"),
        });
    }
    let a = 1.0 / (m as f64).sqrt();
    let v = DVector::from_fn(m, |i, _| if i == j { c64(a, 0.0) } else { c64(-a, 0.0) });
    PureState::new(v)
}

/// The full shifted-uniform family with the uniform vector as zero state.
/// Distinct members overlap at exactly `1 − 4/M`.
pub fn a2_family(m: usize) -> Result<FingerprintFamily> {
    if m < 3 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("family size {m} collapses distinct members onto one ray"),
        });
    }
    let a = 1.0 / (m as f64).sqrt();
    let zero = PureState::new(DVector::from_element(m, c64(a, 0.0)))?;
    let states = (0..m).map(|j| a2_state(j, m)).collect::<Result<_>>()?;
    let delta = (1.0 - 4.0 / m as f64).abs();
    FingerprintFamily::new(m, zero, states, delta, false)
}

/// The shifted-uniform instance at accuracy `epsilon`.
pub fn a2_instance(m: usize, epsilon: f64) -> Result<SquashInstance> {
    SquashInstance::new(a2_family(m)?, epsilon)
}

/// Trace distance between `t`-fold tensor powers of pure states with the
/// given overlap: `√(1 − |overlap|^{2t})`.
pub fn tensor_power_trace_distance(overlap: C64, t: usize) -> Result<f64> {
    let ov = overlap.norm();
    if ov > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter {
            name: "overlap",
            reason: format!("magnitude {ov} exceeds 1"),
        });
    }
    if t == 0 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "tensor power needs at least one copy".into(),
        });
    }
    Ok((1.0 - ov.min(1.0).powi(2 * t as i32)).max(0.0).sqrt())
}

/// Fewest copies any `ε`-accurate squasher of the shifted-uniform family
/// must consume: `ln(4ε(1−ε)) / (2 ln(1−4/M))`.
pub fn squash_copy_lower_bound(m: usize, epsilon: f64) -> Result<f64> {
    if m <= 4 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("{m} <= 4 makes the member overlap nonpositive"),
        });
    }
    if !(0.0 < epsilon && epsilon < 0.5) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("{epsilon} outside (0, 1/2)"),
        });
    }
    Ok((4.0 * epsilon * (1.0 - epsilon)).ln() / (2.0 * (1.0 - 4.0 / m as f64).ln()))
}

/// Growth witness for the bound: `bound(2M)/bound(M)`, approaching 2 for
/// large `M` (the bound is asymptotically linear in the family size).
pub fn bound_doubling_ratio(m: usize, epsilon: f64) -> Result<f64> {
    Ok(squash_copy_lower_bound(2 * m, epsilon)? / squash_copy_lower_bound(m, epsilon)?)
}

/// Exact evaluation of the distinguishability chain for one `(M, t, ε)`.
#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub m: usize,
    pub t: usize,
    pub epsilon: f64,
    /// Trace distance between ideal squashed outputs for distinct members
    /// (exactly 1: the targets are proportional to orthogonal basis states).
    pub target_distance: f64,
    /// Copy bound at these parameters.
    pub bound_t: f64,
    /// Distance an `ε`-accurate squasher must keep: `1 − 2ε`.
    pub chain_lhs: f64,
    /// Distance the `t`-copy inputs supply: `√(1 − (1−4/M)^{2t})`.
    pub chain_rhs: f64,
    /// Dense tensor-power distance, computed without the closed form.
    pub dense_tensor_distance: f64,
    /// Dense and closed-form values agree within 1e−9.
    pub dense_check_pass: bool,
    /// `t` copies cannot feed any `ε`-accurate squasher: the required
    /// output distance exceeds the available input distance.
    pub infeasible: bool,
    /// Frame in which the family numerics were carried out.
    pub frame_note: &'static str,
}

/// Verifies the lower-bound chain exactly at one parameter point: squashed
/// outputs of distinct members are distance 1 apart, the tensor-power input
/// distance matches its closed form densely, and `t` below the copy bound
/// makes the chain infeasible.
pub fn verify_chain(m: usize, t: usize, epsilon: f64) -> Result<ChainReport> {
    let bound_t = squash_copy_lower_bound(m, epsilon)?;
    if t == 0 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "the chain needs at least one input copy".into(),
        });
    }
    let dim = m.checked_pow(t as u32).ok_or(Error::DimensionCap {
        dim: usize::MAX,
        cap: MAX_CHAIN_DIM,
    })?;
    if dim > MAX_CHAIN_DIM {
        return Err(Error::DimensionCap {
            dim,
            cap: MAX_CHAIN_DIM,
        });
    }

    let instance = a2_instance(m, epsilon)?;
    let target_distance = trace_distance(
        &instance.squashed_target(0)?.to_density(),
        &instance.squashed_target(1)?.to_density(),
    )?;

    let psi = instance.family().state(0);
    let phi = instance.family().state(1);
    let mut psi_t = psi.clone();
    let mut phi_t = phi.clone();
    for _ in 1..t {
        psi_t = psi_t.tensor(psi)?;
        phi_t = phi_t.tensor(phi)?;
    }
    let dense_tensor_distance = trace_distance(&psi_t.to_density(), &phi_t.to_density())?;
    let chain_rhs = tensor_power_trace_distance(psi.inner(phi)?, t)?;
    let chain_lhs = 1.0 - 2.0 * epsilon;

    Ok(ChainReport {
        m,
        t,
        epsilon,
        target_distance,
        bound_t,
        chain_lhs,
        chain_rhs,
        dense_tensor_distance,
        dense_check_pass: (dense_tensor_distance - chain_rhs).abs() < 1e-9,
        infeasible: chain_lhs > chain_rhs,
        frame_note:
            "family numerics in the rotated frame; the common rotation cancels in all distances",
    })
}

/// Smallest slack, over all member pairs, of the statement that squashing
/// does not increase pairwise distinguishability:
/// `D(ψ^{⊗t}, φ^{⊗t}) − D(σ_{0,ψ}, σ_{0,φ}) ≥ 0`.
pub fn no_increase_slack(instance: &SquashInstance, t: usize) -> Result<f64> {
    let family = instance.family();
    if family.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "family",
            reason: "need at least two members to compare".into(),
        });
    }
    let mut slack = f64::INFINITY;
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            let input = tensor_power_trace_distance(family.state(i).inner(family.state(j))?, t)?;
            let output = trace_distance(
                &instance.squashed_target(i)?.to_density(),
                &instance.squashed_target(j)?.to_density(),
            )?;
            slack = slack.min(input - output);
        }
    }
    Ok(slack)
}

/// Slack of the log-series estimate `−ln(1−x) ≤ 2x` on `(0, 1/2]`.
pub fn log_series_slack(x: f64) -> Result<f64> {
    if !(0.0 < x && x <= 0.5) {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: format!("{x} outside (0, 1/2]"),
        });
    }
    Ok(2.0 * x + (1.0 - x).ln())
}
