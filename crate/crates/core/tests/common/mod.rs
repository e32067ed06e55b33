//! Independently recomputed oracles shared by the integration suites.
//!
//! Each oracle rebuilds an expected value through a different code path
//! than the library uses, so agreement is evidence rather than tautology.
#![allow(dead_code)]

use hbsim_core::hidden_basis::weight_basis;
use hbsim_core::linalg::{DensityOperator, C64};
use hbsim_core::phase_invariant::{PrepCircuit, WeightBlockOperator};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Closed-form pass probability of the binomial-reference adversary:
/// `3/4 + K/4` with `K = Σ_w c_{w−1} c_w` over the binomial amplitudes.
/// Amplitudes come from the multiplicative recurrence so large key counts
/// stay in floating-point range.
pub fn eve_pass_closed_form(r_prime: usize) -> f64 {
    let mut c = vec![0.0f64; r_prime + 1];
    let mut p = 0.5f64.powi(r_prime as i32);
    for (w, slot) in c.iter_mut().enumerate() {
        *slot = p.sqrt();
        p *= (r_prime - w) as f64 / (w + 1) as f64;
    }
    let k: f64 = (1..=r_prime).map(|w| c[w - 1] * c[w]).sum();
    0.75 + k / 4.0
}

/// Replays a preparation record by explicit tree recursion over recorded
/// branch amplitudes, independent of the library's replay. Returns dense
/// amplitudes over all `2^n` labels.
pub fn prep_tree_oracle(circuit: &PrepCircuit) -> Vec<C64> {
    let n = circuit.n;
    let w = circuit.w;
    let sector = weight_basis(n, w).expect("circuit carries a valid sector");
    let rank_of = |label: usize| -> usize {
        sector
            .iter()
            .position(|l| l.label == label)
            .expect("leaf label lies in the target sector")
    };

    let mut out = vec![Complex64::new(0.0, 0.0); 1usize << n];
    if circuit.steps.is_empty() {
        // Degenerate sectors hold a single label prepared directly.
        let label = sector[0].label;
        out[label] = Complex64::from_polar(1.0, circuit.phases[0]);
        return out;
    }

    // Frontier of (prefix bits, amplitude) pairs, extended one step a time.
    let mut frontier: Vec<(String, Complex64)> = vec![(String::new(), Complex64::new(1.0, 0.0))];
    for step in &circuit.steps {
        let mut next = Vec::new();
        for (prefix, amp) in &frontier {
            let branch = step
                .branches
                .iter()
                .find(|b| &b.prefix == prefix)
                .unwrap_or_else(|| panic!("recorded step {} lacks prefix {prefix:?}", step.j));
            if branch.sqrt_p0 != 0.0 {
                next.push((format!("{prefix}0"), amp * branch.sqrt_p0));
            }
            if branch.sqrt_p1 != 0.0 {
                next.push((format!("{prefix}1"), amp * branch.sqrt_p1));
            }
        }
        frontier = next;
    }

    for (bits, amp) in frontier {
        let label = usize::from_str_radix(&bits, 2).expect("binary prefix");
        let ones = bits.chars().filter(|&c| c == '1').count();
        assert_eq!(ones, w, "leaf {bits} escapes the weight-{w} sector");
        let phase = Complex64::from_polar(1.0, circuit.phases[rank_of(label)]);
        out[label] += amp * phase;
    }
    out
}

/// Grouped outcome of a projective measurement: (eigenvalue, probability).
pub struct GroupedOutcome {
    pub value: f64,
    pub probability: f64,
}

/// Measures a Hermitian weight-block observable by dense spectral
/// projection on the full logical space, grouping eigenvalues within
/// `group_tol`. Independent of the library's sector-by-sector route.
pub fn dense_observable_outcomes(
    rho: &DensityOperator,
    observable: &WeightBlockOperator,
    group_tol: f64,
) -> Vec<GroupedOutcome> {
    let m: DMatrix<C64> = observable.to_logical_matrix();
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for (k, &value) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut p = 0.0;
        for i in 0..rho.dim() {
            for j in 0..rho.dim() {
                p += (v[i].conj() * rho.entry(i, j) * v[j]).re;
            }
        }
        pairs.push((value, p));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut grouped: Vec<GroupedOutcome> = Vec::new();
    for (value, p) in pairs {
        match grouped.last_mut() {
            Some(last) if (value - last.value).abs() <= group_tol => {
                // Weighted running mean keeps the group center stable.
                let total = last.probability + p;
                if total > 0.0 {
                    last.value = (last.value * last.probability + value * p) / total;
                }
                last.probability = total;
            }
            _ => grouped.push(GroupedOutcome {
                value,
                probability: p,
            }),
        }
    }
    grouped.retain(|g| g.probability > 1e-15);
    grouped
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let xb = x.iter().sum::<f64>() / n;
    let yb = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - xb) * (b - yb)).sum();
    let den: f64 = x.iter().map(|a| (a - xb).powi(2)).sum();
    num / den
}
