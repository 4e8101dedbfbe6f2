//! Cloud-scheduler allocation policies and detection experiments.
//!
//! The adversarial scheduler either reroutes the job to a same-shape device
//! of (presumably) worse quality, or embeds it into an isomorphic subgraph
//! of a larger device where co-tenant circuits inflate its error rates.
//! Detection measures how often the registered QuPUF catches the swap.

use serde::{Deserialize, Serialize};

use crate::auth::{AuthDecision, AuthOutcome, CRPDatabase, ChallengeKey};
use crate::circuits::{execute_challenge, PufChallenge, ResponseTrace};
use crate::device::{bias_limit_deg, find_isomorphic_embeddings, DeviceRegistry};
use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{self, domain};
use crate::signature::digitize;

/// What the scheduler does with an allocation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SchedulerPolicy {
    /// Allocate exactly what was requested.
    Honest,
    /// Allocate a different device with an identical coupling-map shape.
    RerouteSameShape { target_id: String },
    /// Map the job onto an isomorphic subgraph of a larger device; co-tenant
    /// interference scales the mapped qubits' readout flips and bias
    /// magnitude by `crosstalk_factor` (>= 1).
    RerouteSubgraph {
        host_id: String,
        crosstalk_factor: f64,
    },
}

/// Outcome of one allocation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationEvent {
    pub requested_id: String,
    pub allocated_id: String,
    /// Requested qubit i runs on allocated qubit `qubit_mapping[i]`.
    pub qubit_mapping: Vec<usize>,
    pub crosstalk_applied: bool,
    /// 1.0 when no crosstalk applies.
    pub crosstalk_factor: f64,
}

impl AllocationEvent {
    fn is_plain_honest(&self) -> bool {
        self.allocated_id == self.requested_id
            && !self.crosstalk_applied
            && self.qubit_mapping.iter().enumerate().all(|(i, &m)| i == m)
    }
}

/// Detection rates over a batch of trials.
///
/// Honest policies populate `honest_accept_rate`/`false_reject_rate`; attack
/// policies populate `attack_detect_rate` (fraction of trials Rejected).
/// Unpopulated rates are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub trials: usize,
    pub honest_accept_rate: f64,
    pub attack_detect_rate: f64,
    pub false_reject_rate: f64,
    pub decisions: Vec<AuthDecision>,
}

impl DetectionReport {
    pub fn summary(&self) -> String {
        format!(
            "honest_accept={:.4}, attack_detect={:.4}, false_reject={:.4}",
            self.honest_accept_rate, self.attack_detect_rate, self.false_reject_rate
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Resolves the policy into a concrete allocation.
///
/// Same-shape reroutes validate that the target's coupling map is isomorphic
/// to the requested one and keep the identity qubit mapping. Subgraph
/// reroutes pick one embedding, seeded-uniformly over the full embedding
/// list for reproducibility.
pub fn allocate(
    registry: &DeviceRegistry,
    requested_id: &str,
    policy: &SchedulerPolicy,
    rng_seed: u64,
) -> Result<AllocationEvent> {
    let requested = registry.get(requested_id)?;
    let identity: Vec<usize> = (0..requested.n_qubits).collect();
    match policy {
        SchedulerPolicy::Honest => Ok(AllocationEvent {
            requested_id: requested_id.to_string(),
            allocated_id: requested_id.to_string(),
            qubit_mapping: identity,
            crosstalk_applied: false,
            crosstalk_factor: 1.0,
        }),
        SchedulerPolicy::RerouteSameShape { target_id } => {
            let target = registry.get(target_id)?;
            let same_shape = target.n_qubits == requested.n_qubits
                && target.coupling_map.len() == requested.coupling_map.len()
                && !find_isomorphic_embeddings(target, &requested.coupling_map, requested.n_qubits)
                    .is_empty();
            if !same_shape {
                return Err(Error::NotIsomorphic {
                    requested: requested_id.to_string(),
                    target: target_id.clone(),
                });
            }
            Ok(AllocationEvent {
                requested_id: requested_id.to_string(),
                allocated_id: target_id.clone(),
                qubit_mapping: identity,
                crosstalk_applied: false,
                crosstalk_factor: 1.0,
            })
        }
        SchedulerPolicy::RerouteSubgraph {
            host_id,
            crosstalk_factor,
        } => {
            if *crosstalk_factor < 1.0 || !crosstalk_factor.is_finite() {
                return Err(Error::Invariant {
                    context: "scheduler policy".into(),
                    message: format!(
                        "crosstalk_factor must be >= 1 and finite, got {crosstalk_factor}"
                    ),
                });
            }
            let host = registry.get(host_id)?;
            let embeddings =
                find_isomorphic_embeddings(host, &requested.coupling_map, requested.n_qubits);
            if embeddings.is_empty() {
                return Err(Error::NoEmbedding {
                    host: host_id.clone(),
                });
            }
            let pick = rng::mix(&[rng_seed, domain::EMBED]) as usize % embeddings.len();
            Ok(AllocationEvent {
                requested_id: requested_id.to_string(),
                allocated_id: host_id.clone(),
                qubit_mapping: embeddings[pick].clone(),
                crosstalk_applied: true,
                crosstalk_factor: *crosstalk_factor,
            })
        }
    }
}

/// Scales readout flips and bias magnitude by the crosstalk factor, clamped
/// back into valid ranges.
pub(crate) fn inflate_crosstalk(
    params: &crate::device::QubitParams,
    factor: f64,
) -> crate::device::QubitParams {
    let limit = bias_limit_deg();
    crate::device::QubitParams {
        read_flip_0to1: (params.read_flip_0to1 * factor).clamp(0.0, 1.0),
        read_flip_1to0: (params.read_flip_1to0 * factor).clamp(0.0, 1.0),
        rotation_bias_deg: (params.rotation_bias_deg * factor).clamp(-limit, limit),
        ..*params
    }
}

/// Runs the challenge on the allocated device restricted to the mapped
/// qubits. Crosstalk inflation happens before session sampling, so drift is
/// applied on top of the inflated base values. The returned trace carries
/// the requested device as its nominal id; `allocated` records the ground
/// truth when the run was not a plain honest execution.
pub fn execute_on_allocation(
    event: &AllocationEvent,
    challenge: &PufChallenge,
    registry: &DeviceRegistry,
    rng_seed: u64,
) -> Result<ResponseTrace> {
    let requested = registry.get(&event.requested_id)?;
    challenge.validate(requested.n_qubits)?;
    if event.is_plain_honest() {
        return execute_challenge(requested, challenge, rng_seed);
    }

    let host = registry.get(&event.allocated_id)?;
    if event.qubit_mapping.len() != requested.n_qubits {
        return Err(Error::Invariant {
            context: "allocation event".into(),
            message: format!(
                "mapping length {} != requested qubit count {}",
                event.qubit_mapping.len(),
                requested.n_qubits
            ),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for &m in &event.qubit_mapping {
        if m >= host.n_qubits {
            return Err(Error::QubitIndex {
                index: m,
                n_qubits: host.n_qubits,
            });
        }
        if !seen.insert(m) {
            return Err(Error::Invariant {
                context: "allocation event".into(),
                message: format!("mapping is not injective: qubit {m} reused"),
            });
        }
    }

    let mut effective = host.clone();
    if event.crosstalk_applied {
        for &m in &event.qubit_mapping {
            effective.qubits[m] = inflate_crosstalk(&effective.qubits[m], event.crosstalk_factor);
        }
    }

    // Requested-qubit order defines the response order, so signatures stay
    // comparable to the registered reference.
    let guest_indices = challenge.qubit_indices(requested.n_qubits);
    let host_subset: Vec<usize> = guest_indices
        .iter()
        .map(|&g| event.qubit_mapping[g])
        .collect();
    let mut mapped_challenge = challenge.clone();
    mapped_challenge.qubit_subset = Some(host_subset);

    let trace = execute_challenge(&effective, &mapped_challenge, rng_seed)?;
    Ok(ResponseTrace {
        device_id: event.requested_id.clone(),
        challenge: challenge.clone(),
        sessions: trace.sessions,
        allocated: Some(event.allocated_id.clone()),
    })
}

/// Runs `trials` independent allocate -> execute -> digitize-last-session ->
/// verify rounds against the registered record and aggregates the rates.
/// Trials derive per-index seeds, so the report is schedule-independent.
pub fn run_detection_experiment(
    registry: &DeviceRegistry,
    db: &CRPDatabase,
    requested_id: &str,
    policy: &SchedulerPolicy,
    key: &ChallengeKey,
    trials: usize,
    seed: u64,
) -> Result<DetectionReport> {
    if trials == 0 {
        return Err(Error::Empty("detection trials"));
    }
    let record = db
        .get(requested_id, key)
        .ok_or_else(|| Error::MissingRecord(format!("device '{requested_id}' under {key}")))?;
    let challenge = record.challenge.clone();
    let precision = record.precision;

    let decisions = exec::try_map_indexed(trials, |trial| {
        let trial_seed = rng::mix(&[seed, trial as u64, domain::TRIAL]);
        let event = allocate(registry, requested_id, policy, trial_seed)?;
        let trace = execute_on_allocation(&event, &challenge, registry, trial_seed)?;
        let last = trace.sessions.last().expect("n_experiments >= 1");
        let response = digitize(&last.prob_one, precision)?;
        db.verify(requested_id, &response, key)
    })?;

    let accepted = decisions
        .iter()
        .filter(|d| d.outcome == AuthOutcome::Accepted)
        .count();
    let rejected = decisions
        .iter()
        .filter(|d| d.outcome == AuthOutcome::Rejected)
        .count();
    let (honest_accept_rate, attack_detect_rate, false_reject_rate) = match policy {
        SchedulerPolicy::Honest => (
            accepted as f64 / trials as f64,
            0.0,
            (trials - accepted) as f64 / trials as f64,
        ),
        _ => (0.0, rejected as f64 / trials as f64, 0.0),
    };
    Ok(DetectionReport {
        trials,
        honest_accept_rate,
        attack_detect_rate,
        false_reject_rate,
        decisions,
    })
}
