//! The two QuPUF circuit variants and their execution against drifted device
//! sessions.
//!
//! Both circuits are single-qubit product circuits, so a closed-form 2-level
//! model is exact: no state-vector simulator needed. Shot statistics come
//! from one binomial draw per qubit per session, which is statistically
//! identical to per-shot trajectories and far cheaper.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::device::{sample_session, DeviceFingerprint, QubitParams};
use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{self, domain};

/// Shot/session budget of the standard campaign.
pub const BASIC_SHOTS: u64 = 8192;
pub const BASIC_EXPERIMENTS: u32 = 75;
/// Reduced budget for tunable-rotation (resilient) runs.
pub const RESILIENT_SHOTS: u64 = 1024;
pub const RESILIENT_EXPERIMENTS: u32 = 20;

/// Which fingerprint mechanism the circuit exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PufVariant {
    /// H then R_Y(theta) then measure: readout and rotation bias shape p(1).
    Hadamard,
    /// X then R_Y(theta) then idle gates then measure: T1 decay shapes p(1).
    Decoherence,
}

/// One PUF challenge: circuit variant, rotation angle, idle budget, and the
/// shot/session counts to estimate probabilities with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PufChallenge {
    pub variant: PufVariant,
    /// Commanded R_Y angle, degrees.
    pub theta_deg: f64,
    /// Idle-gate count; must be 0 for the Hadamard variant.
    pub idle_count: u32,
    pub shots: u64,
    pub n_experiments: u32,
    /// Qubits to run on, in response order. `None` means all, ascending.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_subset: Option<Vec<usize>>,
}

impl PufChallenge {
    pub fn new(variant: PufVariant, theta_deg: f64, idle_count: u32) -> Self {
        PufChallenge {
            variant,
            theta_deg,
            idle_count,
            shots: BASIC_SHOTS,
            n_experiments: BASIC_EXPERIMENTS,
            qubit_subset: None,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidChallenge("shots must be positive".into()));
        }
        if self.n_experiments == 0 {
            return Err(Error::InvalidChallenge(
                "n_experiments must be positive".into(),
            ));
        }
        if !self.theta_deg.is_finite() || !(-90.0..=90.0).contains(&self.theta_deg) {
            return Err(Error::InvalidChallenge(format!(
                "theta_deg must be within [-90, 90], got {}",
                self.theta_deg
            )));
        }
        if self.variant == PufVariant::Hadamard && self.idle_count != 0 {
            return Err(Error::InvalidChallenge(
                "idle gates apply only to the decoherence variant".into(),
            ));
        }
        if let Some(subset) = &self.qubit_subset {
            if subset.is_empty() {
                return Err(Error::InvalidChallenge("qubit_subset is empty".into()));
            }
            let mut seen = std::collections::HashSet::new();
            for &q in subset {
                if q >= n_qubits {
                    return Err(Error::QubitIndex { index: q, n_qubits });
                }
                if !seen.insert(q) {
                    return Err(Error::InvalidChallenge(format!(
                        "duplicate qubit index {q} in subset"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Qubits this challenge runs on, in response order.
    pub fn qubit_indices(&self, n_qubits: usize) -> Vec<usize> {
        match &self.qubit_subset {
            Some(subset) => subset.clone(),
            None => (0..n_qubits).collect(),
        }
    }
}

/// One session's estimates: per-qubit probability of reading 1 and the raw
/// one-counts they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    #[serde(rename = "i")]
    pub session_index: u64,
    #[serde(rename = "p1")]
    pub prob_one: Vec<f64>,
    #[serde(rename = "ones")]
    pub one_counts: Vec<u64>,
}

/// The analog PUF response: one record per session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTrace {
    /// The device the user believes answered.
    #[serde(rename = "device")]
    pub device_id: String,
    pub challenge: PufChallenge,
    pub sessions: Vec<SessionRecord>,
    /// Ground-truth executing device, set only when it differs from the
    /// nominal run (reroutes, subgraph mappings, crosstalk).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocated: Option<String>,
}

impl ResponseTrace {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }
}

/// Closed-form probability of reading 1 for one qubit under the given
/// effective parameters.
///
/// Hadamard: p1 = (1 + sin(theta_eff)) / 2 with theta_eff = theta + bias.
/// Positive theta after H increases p(1) under the R_Y convention
/// [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]]; a rotation toward the
/// ground state is a negative theta.
///
/// Decoherence: p1 = cos^2(theta_eff / 2) * exp(-idle_time / T1), pure
/// amplitude damping of the excited population. Dephasing is irrelevant
/// here because only populations are measured.
///
/// Both are then pushed through the readout map
/// p_obs = p1 * (1 - read10) + (1 - p1) * read01.
pub fn ideal_prob_one(
    variant: PufVariant,
    theta_deg: f64,
    idle_count: u32,
    params: &QubitParams,
    idle_gate_ns: f64,
) -> f64 {
    let theta_eff = (theta_deg + params.rotation_bias_deg).to_radians();
    let p_state1 = match variant {
        PufVariant::Hadamard => (1.0 + theta_eff.sin()) / 2.0,
        PufVariant::Decoherence => {
            let t1_ns = params.t1_us * 1e3;
            let idle_ns = f64::from(idle_count) * idle_gate_ns;
            (theta_eff / 2.0).cos().powi(2) * (-idle_ns / t1_ns).exp()
        }
    };
    let p_obs = p_state1 * (1.0 - params.read_flip_1to0) + (1.0 - p_state1) * params.read_flip_0to1;
    p_obs.clamp(0.0, 1.0)
}

/// Runs one session: drift-sample the device, evaluate each challenge qubit,
/// draw its one-count binomially. Pure function of the seed material; shot
/// streams are keyed by physical qubit, so a subset run reproduces the full
/// run's counts for the qubits it shares.
pub fn run_session(
    device: &DeviceFingerprint,
    challenge: &PufChallenge,
    rng_seed: u64,
    session_index: u64,
) -> Result<SessionRecord> {
    challenge.validate(device.n_qubits)?;
    let params = sample_session(device, session_index, rng_seed);
    let indices = challenge.qubit_indices(device.n_qubits);
    let mut prob_one = Vec::with_capacity(indices.len());
    let mut one_counts = Vec::with_capacity(indices.len());
    for &q in &indices {
        let p = ideal_prob_one(
            challenge.variant,
            challenge.theta_deg,
            challenge.idle_count,
            &params.qubits[q],
            device.idle_gate_duration_ns,
        );
        let mut rng = rng::stream(&[
            device.base_seed,
            rng_seed,
            session_index,
            q as u64,
            domain::SHOTS,
        ]);
        let ones = Binomial::new(challenge.shots, p)
            .expect("probability within [0, 1]")
            .sample(&mut rng);
        one_counts.push(ones);
        prob_one.push(ones as f64 / challenge.shots as f64);
    }
    Ok(SessionRecord {
        session_index,
        prob_one,
        one_counts,
    })
}

/// Executes every session of the challenge. Sessions derive independent RNG
/// streams from their index, so the result is schedule-independent and fully
/// deterministic given the seed.
pub fn execute_challenge(
    device: &DeviceFingerprint,
    challenge: &PufChallenge,
    rng_seed: u64,
) -> Result<ResponseTrace> {
    challenge.validate(device.n_qubits)?;
    let sessions = exec::try_map_indexed(challenge.n_experiments as usize, |s| {
        run_session(device, challenge, rng_seed, s as u64)
    })?;
    Ok(ResponseTrace {
        device_id: device.device_id.clone(),
        challenge: challenge.clone(),
        sessions,
        allocated: None,
    })
}

/// Human-readable per-qubit gate listing, also used as the job payload text.
pub fn circuit_description(challenge: &PufChallenge, n_qubits: usize) -> String {
    let indices = challenge.qubit_indices(n_qubits);
    let mut lines = Vec::with_capacity(indices.len());
    for q in indices {
        let mut ops: Vec<String> = Vec::new();
        match challenge.variant {
            PufVariant::Hadamard => ops.push("H".into()),
            PufVariant::Decoherence => ops.push("X".into()),
        }
        ops.push(format!("RY({:.1}°)", challenge.theta_deg));
        for _ in 0..challenge.idle_count {
            ops.push("ID".into());
        }
        ops.push("M".into());
        lines.push(format!("q{q}: {}", ops.join("; ")));
    }
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{generate_device, t_shape_edges};
    use proptest::prelude::*;

    fn quiet_qubit() -> QubitParams {
        QubitParams::ideal()
    }

    /// 2x2 statevector oracle: prepare (H or X)|0>, apply
    /// R_Y(theta) = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]],
    /// return |<1|psi>|^2. Real amplitudes suffice for these circuits.
    fn statevector_prob_one(variant: PufVariant, theta_deg: f64) -> f64 {
        let (a0, a1) = match variant {
            PufVariant::Hadamard => (
                std::f64::consts::FRAC_1_SQRT_2,
                std::f64::consts::FRAC_1_SQRT_2,
            ),
            PufVariant::Decoherence => (0.0, 1.0),
        };
        let half = theta_deg.to_radians() / 2.0;
        let (c, s) = (half.cos(), half.sin());
        let b1 = s * a0 + c * a1;
        b1 * b1
    }

    #[test]
    fn hadamard_at_zero_is_half() {
        let p = ideal_prob_one(PufVariant::Hadamard, 0.0, 0, &quiet_qubit(), 100.0);
        assert_eq!(p, 0.5);
    }

    #[test]
    fn hadamard_matches_statevector_oracle() {
        for theta in [-45.0, -5.0, -1.0, 0.0, 1.0, 3.0, 5.0, 45.0, 90.0] {
            let expected = statevector_prob_one(PufVariant::Hadamard, theta);
            let got = ideal_prob_one(PufVariant::Hadamard, theta, 0, &quiet_qubit(), 100.0);
            assert!(
                (got - expected).abs() < 1e-12,
                "theta {theta}: {got} vs {expected}"
            );
        }
        // Frozen value for 3 degrees.
        let got = ideal_prob_one(PufVariant::Hadamard, 3.0, 0, &quiet_qubit(), 100.0);
        assert!((got - 0.526168).abs() < 5e-7);
    }

    #[test]
    fn decoherence_after_one_t1_is_inv_e() {
        // 100 idles x 1000 ns == 100 us == T1.
        let q = QubitParams {
            t1_us: 100.0,
            ..quiet_qubit()
        };
        let p = ideal_prob_one(PufVariant::Decoherence, 0.0, 100, &q, 1000.0);
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
        assert!((p - 0.367879).abs() < 5e-7);
    }

    #[test]
    fn decoherence_theta_matches_statevector_oracle() {
        // Zero idle time isolates the rotation part.
        let q = quiet_qubit();
        for theta in [-30.0, -3.0, 0.0, 2.0, 10.0] {
            let expected = statevector_prob_one(PufVariant::Decoherence, theta);
            let got = ideal_prob_one(PufVariant::Decoherence, theta, 0, &q, 100.0);
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_readout_pins_half() {
        let q = QubitParams {
            read_flip_0to1: 0.1,
            read_flip_1to0: 0.1,
            ..quiet_qubit()
        };
        let p = ideal_prob_one(PufVariant::Hadamard, 0.0, 0, &q, 100.0);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotation_bias_shifts_effective_angle() {
        let biased = QubitParams {
            rotation_bias_deg: 2.0,
            ..quiet_qubit()
        };
        let shifted = ideal_prob_one(PufVariant::Hadamard, 1.0, 0, &biased, 100.0);
        let direct = ideal_prob_one(PufVariant::Hadamard, 3.0, 0, &quiet_qubit(), 100.0);
        assert!((shifted - direct).abs() < 1e-12);
    }

    #[test]
    fn execute_produces_requested_sessions() {
        let device = generate_device("exec", 5, t_shape_edges(), 100.0, 21).unwrap();
        let challenge = PufChallenge::new(PufVariant::Hadamard, 3.0, 0);
        let trace = execute_challenge(&device, &challenge, 4).unwrap();
        assert_eq!(trace.sessions.len(), 75);
        for s in &trace.sessions {
            assert_eq!(s.prob_one.len(), 5);
            for (p, ones) in s.prob_one.iter().zip(&s.one_counts) {
                assert_eq!(*p, *ones as f64 / challenge.shots as f64);
            }
        }
    }

    #[test]
    fn execute_is_deterministic() {
        let device = generate_device("det", 5, t_shape_edges(), 100.0, 8).unwrap();
        let challenge = PufChallenge::new(PufVariant::Decoherence, 1.0, 50);
        let a = execute_challenge(&device, &challenge, 77).unwrap();
        let b = execute_challenge(&device, &challenge, 77).unwrap();
        assert_eq!(a, b);
        let c = execute_challenge(&device, &challenge, 78).unwrap();
        assert_ne!(a, c);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_sessions_agree() {
        let device = generate_device("sched", 5, t_shape_edges(), 100.0, 13).unwrap();
        let challenge = PufChallenge::new(PufVariant::Hadamard, 2.0, 0);
        let par = crate::exec::map_indexed_par(20, |s| {
            run_session(&device, &challenge, 5, s as u64).unwrap()
        });
        let seq = crate::exec::map_indexed_seq(20, |s| {
            run_session(&device, &challenge, 5, s as u64).unwrap()
        });
        assert_eq!(par, seq);
    }

    #[test]
    fn zero_noise_sessions_concentrate_around_half() {
        // Binomial 3-sigma band at 8192 shots; holds for this seed.
        let device = DeviceFingerprint {
            device_id: "ideal".into(),
            n_qubits: 5,
            coupling_map: t_shape_edges(),
            idle_gate_duration_ns: 100.0,
            base_seed: 1,
            qubits: vec![quiet_qubit(); 5],
        };
        let challenge = PufChallenge::new(PufVariant::Hadamard, 0.0, 0);
        let trace = execute_challenge(&device, &challenge, 0).unwrap();
        let band = 3.0 * (0.25f64 / 8192.0).sqrt();
        for s in &trace.sessions {
            for &p in &s.prob_one {
                assert!((p - 0.5).abs() <= band, "p {p} outside 0.5 +/- {band}");
            }
        }
    }

    #[test]
    fn subset_restricts_response_order() {
        let device = generate_device("subset", 5, t_shape_edges(), 100.0, 2).unwrap();
        let mut challenge = PufChallenge::new(PufVariant::Hadamard, 0.0, 0);
        challenge.qubit_subset = Some(vec![3, 1]);
        let trace = execute_challenge(&device, &challenge, 9).unwrap();
        assert_eq!(trace.sessions[0].prob_one.len(), 2);

        // Entry k of the subset run matches qubit subset[k] of the full run.
        challenge.qubit_subset = None;
        let full = execute_challenge(&device, &challenge, 9).unwrap();
        assert_eq!(
            trace.sessions[0].one_counts[0],
            full.sessions[0].one_counts[3]
        );
        assert_eq!(
            trace.sessions[0].one_counts[1],
            full.sessions[0].one_counts[1]
        );
    }

    #[test]
    fn invalid_subset_is_rejected() {
        let device = generate_device("badsub", 5, t_shape_edges(), 100.0, 2).unwrap();
        let mut challenge = PufChallenge::new(PufVariant::Hadamard, 0.0, 0);
        challenge.qubit_subset = Some(vec![0, 7]);
        assert!(matches!(
            execute_challenge(&device, &challenge, 0),
            Err(Error::QubitIndex { index: 7, .. })
        ));
        challenge.qubit_subset = Some(vec![0, 0]);
        assert!(execute_challenge(&device, &challenge, 0).is_err());
    }

    #[test]
    fn hadamard_rejects_idle_gates() {
        let device = generate_device("noidle", 5, t_shape_edges(), 100.0, 2).unwrap();
        let mut challenge = PufChallenge::new(PufVariant::Hadamard, 0.0, 0);
        challenge.idle_count = 3;
        assert!(execute_challenge(&device, &challenge, 0).is_err());
    }

    #[test]
    fn description_lists_gates_per_qubit() {
        let mut challenge = PufChallenge::new(PufVariant::Hadamard, 3.0, 0);
        assert_eq!(circuit_description(&challenge, 1), "q0: H; RY(3.0°); M");

        challenge = PufChallenge::new(PufVariant::Decoherence, 0.0, 2);
        assert_eq!(
            circuit_description(&challenge, 1),
            "q0: X; RY(0.0°); ID; ID; M"
        );

        challenge = PufChallenge::new(PufVariant::Hadamard, 1.5, 0);
        challenge.qubit_subset = Some(vec![1, 3]);
        let listing = circuit_description(&challenge, 5);
        assert_eq!(listing, "q1: H; RY(1.5°); M\nq3: H; RY(1.5°); M");
    }

    #[test]
    fn trace_json_uses_compact_session_keys() {
        let device = generate_device("wire", 2, vec![(0, 1)], 100.0, 6).unwrap();
        let mut challenge = PufChallenge::new(PufVariant::Hadamard, 0.0, 0);
        challenge.n_experiments = 1;
        challenge.shots = 16;
        let trace = execute_challenge(&device, &challenge, 0).unwrap();
        let json: serde_json::Value = serde_json::from_str(&trace.to_json()).unwrap();
        assert!(json.get("device").is_some());
        let session = &json["sessions"][0];
        assert!(session.get("i").is_some());
        assert!(session.get("p1").is_some());
        assert!(session.get("ones").is_some());
        let round: ResponseTrace = serde_json::from_str(&trace.to_json()).unwrap();
        assert_eq!(round, trace);
    }

    proptest! {
        #[test]
        fn prob_one_stays_in_unit_interval(
            theta in -90.0f64..=90.0,
            bias in -89.0f64..=89.0,
            r01 in 0.0f64..=1.0,
            r10 in 0.0f64..=1.0,
            t1 in 0.1f64..=1000.0,
            idles in 0u32..=500,
            decoherence in proptest::bool::ANY,
        ) {
            let q = QubitParams {
                read_flip_0to1: r01,
                read_flip_1to0: r10,
                rotation_bias_deg: bias,
                t1_us: t1,
                ..QubitParams::ideal()
            };
            let variant = if decoherence { PufVariant::Decoherence } else { PufVariant::Hadamard };
            let idles = if decoherence { idles } else { 0 };
            let p = ideal_prob_one(variant, theta, idles, &q, 100.0);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn asymmetric_readout_identity_at_zero_angle(
            r01 in 0.0f64..=1.0,
            r10 in 0.0f64..=1.0,
        ) {
            let q = QubitParams {
                read_flip_0to1: r01,
                read_flip_1to0: r10,
                ..QubitParams::ideal()
            };
            let p = ideal_prob_one(PufVariant::Hadamard, 0.0, 0, &q, 100.0);
            let identity = 0.5 + 0.5 * (r01 - r10);
            prop_assert!((p - identity).abs() < 1e-12);
        }

        #[test]
        fn decoherence_decays_with_idle_count(
            theta in -89.0f64..=89.0,
            r01 in 0.0f64..=0.5,
            r10 in 0.0f64..=0.5,
            t1 in 1.0f64..=200.0,
        ) {
            // Readout flips summing below 1 keep the map monotone.
            let q = QubitParams {
                read_flip_0to1: r01,
                read_flip_1to0: r10,
                t1_us: t1,
                ..QubitParams::ideal()
            };
            let mut last = f64::INFINITY;
            for k in [0u32, 50, 100, 200, 400, 800] {
                let p = ideal_prob_one(PufVariant::Decoherence, theta, k, &q, 100.0);
                prop_assert!(p <= last + 1e-12);
                last = p;
            }
        }
    }
}
