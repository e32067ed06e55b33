//! Seeded experiment harness shared by the command-line tool and the C
//! interface: merges configuration, runs one named experiment, and renders
//! the typed report as JSON or CSV with deterministic bytes.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hidden_basis::{weight_basis, HiddenBasisSpec, LogicalState};
use crate::linalg::{fidelity_pure, unitarity_deviation, C64};
use crate::phase_invariant::{prepare_weight_state, LiftedUnitary, WeightBlockOperator};
use crate::phase_reference::{make_reference, run_circuit, FidelityReport, GateSpec};
use crate::protocol::{
    forge_signature_mixture, kernel_eve, plus_product_signature, run_session, Prover,
};
use crate::rng::{fork_stream, haar_state, haar_unitary};
use crate::squashing::{verify_chain, ChainReport, MAX_CHAIN_DIM};

/// The experiments the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Lift,
    Prep,
    HadamardChain,
    IdProtocol,
    Squash,
    Forge,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lift => "lift",
            Command::Prep => "prep",
            Command::HadamardChain => "hadamard-chain",
            Command::IdProtocol => "id-protocol",
            Command::Squash => "squash",
            Command::Forge => "forge",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "lift" => Ok(Command::Lift),
            "prep" => Ok(Command::Prep),
            "hadamard-chain" => Ok(Command::HadamardChain),
            "id-protocol" => Ok(Command::IdProtocol),
            "squash" => Ok(Command::Squash),
            "forge" => Ok(Command::Forge),
            other => Err(Error::InvalidParameter {
                name: "command",
                reason: format!("unknown command {other:?}"),
            }),
        }
    }
}

/// Report rendering formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl ReportFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidParameter {
                name: "format",
                reason: format!("unknown format {other:?} (expected json or csv)"),
            }),
        }
    }
}

/// Experiment parameters. Every field is optional; each command applies its
/// own defaults and validates the fields it consumes. A JSON config file
/// deserializes into this struct and individual flags override fields.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub n: Option<usize>,
    pub w: Option<usize>,
    pub d0: Option<usize>,
    pub d1: Option<usize>,
    pub t: Option<usize>,
    pub l: Option<usize>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub m: Option<usize>,
    pub epsilon: Option<f64>,
    pub r: Option<usize>,
    pub s: Option<usize>,
    pub r_prime: Option<usize>,
    pub prover: Option<String>,
    pub trials: Option<usize>,
    pub sweep: Option<bool>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub output: Option<String>,
    pub format: Option<String>,
}

impl ExperimentParams {
    /// Parses a JSON config document; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter {
            name: "config",
            reason: e.to_string(),
        })
    }

    /// Returns these parameters with every populated field of `overrides`
    /// taking precedence.
    pub fn overridden_by(&self, overrides: &ExperimentParams) -> ExperimentParams {
        macro_rules! pick {
            ($field:ident) => {
                overrides.$field.clone().or_else(|| self.$field.clone())
            };
        }
        ExperimentParams {
            n: pick!(n),
            w: pick!(w),
            d0: pick!(d0),
            d1: pick!(d1),
            t: pick!(t),
            l: pick!(l),
            theta: pick!(theta),
            alpha: pick!(alpha),
            m: pick!(m),
            epsilon: pick!(epsilon),
            r: pick!(r),
            s: pick!(s),
            r_prime: pick!(r_prime),
            prover: pick!(prover),
            trials: pick!(trials),
            sweep: pick!(sweep),
            seed: pick!(seed),
            tolerance: pick!(tolerance),
            output: pick!(output),
            format: pick!(format),
        }
    }
}

/// Rendered result of one experiment run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Pretty JSON document, newline terminated.
    pub json: String,
    /// CSV document with a fixed, documented column order.
    pub csv: String,
    /// Whether every assertion of the experiment held.
    pub pass: bool,
}

/// Runs one experiment. Parameter problems surface as `Err`; assertion
/// outcomes surface as `pass`.
pub fn run(command: Command, params: &ExperimentParams) -> Result<RunOutcome> {
    match command {
        Command::Lift => run_lift(params),
        Command::Prep => run_prep(params),
        Command::HadamardChain => run_hadamard_chain(params),
        Command::IdProtocol => run_id_protocol(params),
        Command::Squash => run_squash(params),
        Command::Forge => run_forge(params),
    }
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_document(header: &str, rows: &[String]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct LiftRunReport {
    n: usize,
    d0: usize,
    d1: usize,
    trials: usize,
    seed: u64,
    tolerance: f64,
    max_roundtrip_deviation: f64,
    max_unitarity_deviation: f64,
    pass: bool,
}

/// Round-trips random phase-invariant unitaries through random hidden
/// bases: the lifted operator must agree with the logical action on every
/// embedded basis state and must itself be unitary.
fn run_lift(params: &ExperimentParams) -> Result<RunOutcome> {
    let n = params.n.unwrap_or(2);
    let d0 = params.d0.unwrap_or(2);
    let d1 = params.d1.unwrap_or(2);
    let trials = params.trials.unwrap_or(20);
    let seed = params.seed.unwrap_or(1);
    let tolerance = params.tolerance.unwrap_or(1e-9);
    let mut rng = fork_stream(seed, "harness/lift");

    let mut max_roundtrip = 0.0f64;
    let mut max_unitarity = 0.0f64;
    for _ in 0..trials {
        let spec = HiddenBasisSpec::random(d0, d1, &mut rng)?;
        let blocks = (0..=n)
            .map(|w| {
                let size = crate::hidden_basis::binomial(n, w);
                Ok(haar_unitary(size, &mut rng)?.matrix().clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let v = WeightBlockOperator::unitary(n, blocks)?;
        let lifted = LiftedUnitary::new(&v, &spec)?;
        for label in 0..(1usize << n) {
            let basis = LogicalState::basis(n, label)?;
            let via_lift = lifted.apply(&crate::hidden_basis::embed(&spec, &basis)?)?;
            let via_logic = crate::hidden_basis::embed(&spec, &v.apply_logical(&basis)?)?;
            let diff = (via_lift.amplitudes() - via_logic.amplitudes()).norm();
            max_roundtrip = max_roundtrip.max(diff);
        }
        max_unitarity = max_unitarity.max(unitarity_deviation(lifted.to_matrix()?.matrix()));
    }

    let pass = max_roundtrip <= tolerance && max_unitarity <= tolerance;
    let report = LiftRunReport {
        n,
        d0,
        d1,
        trials,
        seed,
        tolerance,
        max_roundtrip_deviation: max_roundtrip,
        max_unitarity_deviation: max_unitarity,
        pass,
    };
    let row = format!(
        "{},{},{},{},{},{},{},{}",
        n,
        d0,
        d1,
        trials,
        seed,
        fmt_float(max_roundtrip),
        fmt_float(max_unitarity),
        pass
    );
    Ok(RunOutcome {
        json: to_json(&report),
        csv: csv_document(
            "n,d0,d1,trials,seed,max_roundtrip_deviation,max_unitarity_deviation,pass",
            &[row],
        ),
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
struct PrepRow {
    n: usize,
    w: usize,
    trials: usize,
    min_fidelity: f64,
    copies_zero: usize,
    copies_one: usize,
}

#[derive(Debug, Clone, Serialize)]
struct PrepRunReport {
    n: usize,
    seed: u64,
    tolerance: f64,
    rows: Vec<PrepRow>,
    pass: bool,
}

/// Prepares random weight-sector targets through the recorded circuits and
/// checks fidelity and structural copy consumption.
fn run_prep(params: &ExperimentParams) -> Result<RunOutcome> {
    let n = params.n.unwrap_or(4);
    let trials = params.trials.unwrap_or(20);
    let seed = params.seed.unwrap_or(1);
    let tolerance = params.tolerance.unwrap_or(1e-9);
    let weights: Vec<usize> = match params.w {
        Some(w) => vec![w],
        None => (0..=n).collect(),
    };
    let mut rng = fork_stream(seed, "harness/prep");

    let mut rows = Vec::new();
    let mut pass = true;
    for &w in &weights {
        let sector = weight_basis(n, w)?;
        let mut min_fidelity = f64::INFINITY;
        let mut copies = (0usize, 0usize);
        for _ in 0..trials {
            let eta: Vec<C64> = haar_state(sector.len(), &mut rng)?
                .amplitudes()
                .iter()
                .copied()
                .collect();
            let circuit = prepare_weight_state(n, w, &eta)?;
            let prepared = circuit.simulate()?;
            let mut target = DVector::zeros(1usize << n);
            for (k, lbl) in sector.iter().enumerate() {
                target[lbl.label] = eta[k];
            }
            let target = LogicalState::new(n, crate::linalg::PureState::new(target)?)?;
            let f = fidelity_pure(prepared.as_pure(), target.as_pure())?;
            min_fidelity = min_fidelity.min(f);
            copies = (circuit.copies_zero(), circuit.copies_one());
        }
        pass &= min_fidelity >= 1.0 - tolerance && copies == (n - w, w);
        rows.push(PrepRow {
            n,
            w,
            trials,
            min_fidelity,
            copies_zero: copies.0,
            copies_one: copies.1,
        });
    }

    let report = PrepRunReport {
        n,
        seed,
        tolerance,
        rows,
        pass,
    };
    let csv_rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.n,
                r.w,
                r.trials,
                fmt_float(r.min_fidelity),
                r.copies_zero,
                r.copies_one
            )
        })
        .collect();
    Ok(RunOutcome {
        json: to_json(&report),
        csv: csv_document("n,w,trials,min_fidelity,copies_zero,copies_one", &csv_rows),
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
struct HadamardChainReport {
    #[serde(flatten)]
    report: FidelityReport,
    alpha: f64,
    pass: bool,
}

/// Runs a chain of reference-consuming Hadamard gates on one qubit and
/// checks the exact fidelity floor.
fn run_hadamard_chain(params: &ExperimentParams) -> Result<RunOutcome> {
    let t = params.t.unwrap_or(200);
    let l = params.l.unwrap_or(1);
    let theta = params.theta.unwrap_or(0.0);
    let alpha = params.alpha.unwrap_or(std::f64::consts::FRAC_1_SQRT_2);
    let reference = make_reference(theta, t)?;
    let gates = vec![GateSpec::HTheta { qubit: 0, alpha }; l];
    let rho0 = LogicalState::basis(1, 0)?;
    let (_, report) = run_circuit(&rho0, &gates, &reference, theta)?;
    let pass = report.final_fidelity + 1e-12 >= report.bound_sqrt_1_minus_2l_over_t;
    let row = format!(
        "{},{},{},{},{},{},{}",
        report.t,
        report.l,
        fmt_float(report.theta),
        fmt_float(alpha),
        fmt_float(report.final_fidelity),
        fmt_float(report.bound_sqrt_1_minus_2l_over_t),
        pass
    );
    let wrapped = HadamardChainReport {
        report,
        alpha,
        pass,
    };
    Ok(RunOutcome {
        json: to_json(&wrapped),
        csv: csv_document("t,l,theta,alpha,final_fidelity,lower_bound,pass", &[row]),
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
struct IdSweepRow {
    r_prime: usize,
    pass_prob: f64,
}

#[derive(Debug, Clone, Serialize)]
struct IdSweepReport {
    rows: Vec<IdSweepRow>,
    strictly_below_one: bool,
    strictly_increasing: bool,
    pass: bool,
}

#[derive(Debug, Clone, Serialize)]
struct IdSessionRunReport {
    #[serde(flatten)]
    session: crate::protocol::SessionReport,
    pass: bool,
}

/// Runs identification sessions, or a doubling sweep of the adversary's
/// kernel pass probability when `sweep` is set.
fn run_id_protocol(params: &ExperimentParams) -> Result<RunOutcome> {
    if params.sweep.unwrap_or(false) {
        let max = params.r_prime.unwrap_or(128);
        if max < 4 {
            return Err(Error::InvalidParameter {
                name: "r_prime",
                reason: format!("sweep ceiling {max} below the smallest attack size 4"),
            });
        }
        let mut rows = Vec::new();
        let mut r_prime = 4usize;
        while r_prime <= max {
            rows.push(IdSweepRow {
                r_prime,
                pass_prob: kernel_eve(r_prime)?.pass_probability,
            });
            r_prime *= 2;
        }
        let strictly_below_one = rows.iter().all(|r| r.pass_prob < 1.0);
        let strictly_increasing = rows.windows(2).all(|p| p[0].pass_prob < p[1].pass_prob);
        let pass = strictly_below_one && strictly_increasing;
        let csv_rows: Vec<String> = rows
            .iter()
            .map(|r| format!("{},{}", r.r_prime, fmt_float(r.pass_prob)))
            .collect();
        let report = IdSweepReport {
            rows,
            strictly_below_one,
            strictly_increasing,
            pass,
        };
        return Ok(RunOutcome {
            json: to_json(&report),
            csv: csv_document("r_prime,pass_prob", &csv_rows),
            pass,
        });
    }

    let prover = match params.prover.as_deref().unwrap_or("honest") {
        "honest" => Prover::Honest,
        "eve" => Prover::Eve,
        other => {
            return Err(Error::InvalidParameter {
                name: "prover",
                reason: format!("unknown prover {other:?} (expected honest or eve)"),
            })
        }
    };
    let r = params.r.unwrap_or(4);
    let s = params.s.unwrap_or(10);
    let session = run_session(r, s, prover)?;
    let pass = match prover {
        Prover::Honest => (session.accept_prob - 1.0).abs() <= 1e-12,
        Prover::Eve => session.kernel_pass_prob < 1.0 && session.kernel_pass_prob > 0.75,
    };
    let row = format!(
        "{},{},{},{},{},{}",
        session.r,
        session.s,
        match prover {
            Prover::Honest => "honest",
            Prover::Eve => "eve",
        },
        fmt_float(session.kernel_pass_prob),
        fmt_float(session.accept_prob),
        pass
    );
    let report = IdSessionRunReport { session, pass };
    Ok(RunOutcome {
        json: to_json(&report),
        csv: csv_document("r,s,prover,kernel_pass_prob,accept_prob,pass", &[row]),
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
struct SquashRunReport {
    rows: Vec<ChainReport>,
    pass: bool,
}

fn chain_row_csv(r: &ChainReport) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.m,
        fmt_float(r.epsilon),
        fmt_float(r.bound_t),
        fmt_float(r.chain_lhs),
        fmt_float(r.chain_rhs),
        r.dense_check_pass
    )
}

fn chain_row_pass(r: &ChainReport) -> bool {
    r.dense_check_pass
        && (r.target_distance - 1.0).abs() <= 1e-10
        && r.infeasible == ((r.t as f64) < r.bound_t)
}

/// Largest dense dimension one sweep row may cost; single-point runs may
/// go up to the chain verifier's own cap.
const SWEEP_DENSE_CAP: usize = 1024;

/// Verifies the copy-bound chain at one point, or over a doubling sweep of
/// family sizes when `sweep` is set.
fn run_squash(params: &ExperimentParams) -> Result<RunOutcome> {
    let epsilon = params.epsilon.unwrap_or(1.0 / 3.0);
    let rows = if params.sweep.unwrap_or(false) {
        let t = params.t.unwrap_or(2);
        let mut m = params.m.unwrap_or(8);
        let mut rows = Vec::new();
        while m.pow(t as u32) <= SWEEP_DENSE_CAP.min(MAX_CHAIN_DIM) {
            rows.push(verify_chain(m, t, epsilon)?);
            m *= 2;
        }
        if rows.is_empty() {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("no family size fits {t} copies under the dense cap"),
            });
        }
        rows
    } else {
        let m = params.m.unwrap_or(8);
        let t = params.t.unwrap_or(3);
        vec![verify_chain(m, t, epsilon)?]
    };

    let pass = rows.iter().all(chain_row_pass);
    let csv_rows: Vec<String> = rows.iter().map(chain_row_csv).collect();
    let report = SquashRunReport { rows, pass };
    Ok(RunOutcome {
        json: to_json(&report),
        csv: csv_document(
            "m,epsilon,bound_t,chain_lhs,chain_rhs,dense_check_pass",
            &csv_rows,
        ),
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
struct ForgeRunReport {
    #[serde(flatten)]
    report: crate::protocol::ForgeryReport,
    seed: u64,
    pass: bool,
}

/// Forges the product signature state and compares verifier statistics.
fn run_forge(params: &ExperimentParams) -> Result<RunOutcome> {
    let n = params.n.unwrap_or(3);
    let seed = params.seed.unwrap_or(1);
    let tolerance = params.tolerance.unwrap_or(1e-10);
    let mut rng = fork_stream(seed, "harness/forge");
    let description = plus_product_signature(n)?;
    let report = forge_signature_mixture(&description, &mut rng)?;
    let pass = report.max_invariant_deviation <= tolerance
        && report.sensitive_verifier.deviation() >= 0.1
        && report.reconstruction_deviation <= tolerance;
    let row = format!(
        "{},{},{},{},{},{}",
        report.n,
        seed,
        fmt_float(report.max_invariant_deviation),
        fmt_float(report.sensitive_verifier.deviation()),
        fmt_float(report.reconstruction_deviation),
        pass
    );
    let wrapped = ForgeRunReport { report, seed, pass };
    Ok(RunOutcome {
        json: to_json(&wrapped),
        csv: csv_document(
            "n,seed,max_invariant_deviation,sensitive_gap,reconstruction_deviation,pass",
            &[row],
        ),
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_merge_prefers_overrides() {
        let base = ExperimentParams {
            n: Some(3),
            seed: Some(7),
            theta: Some(0.5),
            ..Default::default()
        };
        let over = ExperimentParams {
            n: Some(5),
            format: Some("csv".into()),
            ..Default::default()
        };
        let merged = base.overridden_by(&over);
        assert_eq!(merged.n, Some(5));
        assert_eq!(merged.seed, Some(7));
        assert_eq!(merged.theta, Some(0.5));
        assert_eq!(merged.format.as_deref(), Some("csv"));
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        assert!(ExperimentParams::from_json(r#"{"n": 3, "seed": 9}"#).is_ok());
        assert!(ExperimentParams::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn command_and_format_names_round_trip() {
        for cmd in [
            Command::Lift,
            Command::Prep,
            Command::HadamardChain,
            Command::IdProtocol,
            Command::Squash,
            Command::Forge,
        ] {
            assert_eq!(Command::from_name(cmd.name()).unwrap(), cmd);
        }
        assert!(Command::from_name("nope").is_err());
        assert_eq!(ReportFormat::from_name("json").unwrap(), ReportFormat::Json);
        assert_eq!(ReportFormat::from_name("csv").unwrap(), ReportFormat::Csv);
        assert!(ReportFormat::from_name("yaml").is_err());
    }

    #[test]
    fn every_command_runs_and_passes_at_defaults() {
        let params = ExperimentParams {
            trials: Some(3),
            ..Default::default()
        };
        for cmd in [
            Command::Lift,
            Command::Prep,
            Command::HadamardChain,
            Command::IdProtocol,
            Command::Squash,
            Command::Forge,
        ] {
            let outcome = run(cmd, &params).unwrap();
            assert!(outcome.pass, "{} failed at defaults", cmd.name());
            assert!(outcome.json.ends_with('\n'));
            assert!(outcome.csv.lines().count() >= 2);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let params = ExperimentParams {
            trials: Some(2),
            seed: Some(42),
            ..Default::default()
        };
        let a = run(Command::Lift, &params).unwrap();
        let b = run(Command::Lift, &params).unwrap();
        assert_eq!(a.json, b.json);
        assert_eq!(a.csv, b.csv);
    }

    #[test]
    fn sweeps_emit_one_row_per_point() {
        let params = ExperimentParams {
            sweep: Some(true),
            r_prime: Some(16),
            ..Default::default()
        };
        let outcome = run(Command::IdProtocol, &params).unwrap();
        assert!(outcome.pass);
        // Header plus r' in {4, 8, 16}.
        assert_eq!(outcome.csv.lines().count(), 4);

        let params = ExperimentParams {
            sweep: Some(true),
            t: Some(2),
            ..Default::default()
        };
        let outcome = run(Command::Squash, &params).unwrap();
        assert!(outcome.pass);
        // Header plus M in {8, 16, 32}.
        assert_eq!(outcome.csv.lines().count(), 4);
    }

    #[test]
    fn invalid_parameters_error_before_running() {
        let params = ExperimentParams {
            prover: Some("mallory".into()),
            ..Default::default()
        };
        assert!(run(Command::IdProtocol, &params).is_err());

        let params = ExperimentParams {
            m: Some(4),
            ..Default::default()
        };
        assert!(run(Command::Squash, &params).is_err());
    }
}
