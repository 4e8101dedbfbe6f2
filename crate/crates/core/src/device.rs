//! Simulated quantum devices: per-qubit noise fingerprints, session-to-session
//! drift, coupling-map topology, and subgraph embedding search.
//!
//! A device is nothing more than a bundle of per-qubit error parameters and a
//! coupling graph. Drift makes each session see a slightly different device,
//! which is what the PUF metrics have to survive.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Effective T1 after drift never drops below this fraction of the base value.
const T1_FLOOR_FRACTION: f64 = 0.01;

/// Largest representable rotation bias, strictly below 90 degrees.
pub(crate) fn bias_limit_deg() -> f64 {
    f64::from_bits(90.0_f64.to_bits() - 1)
}

/// Noise and drift parameters of a single qubit.
///
/// Serialized field names match the device-spec file format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// P(read 1 | state 0).
    #[serde(rename = "read01")]
    pub read_flip_0to1: f64,
    /// P(read 0 | state 1).
    #[serde(rename = "read10")]
    pub read_flip_1to0: f64,
    /// Systematic over/under-rotation added to any commanded R_Y angle, degrees.
    #[serde(rename = "bias_deg")]
    pub rotation_bias_deg: f64,
    /// Relaxation time, microseconds.
    #[serde(rename = "t1_us")]
    pub t1_us: f64,
    /// Per-session Gaussian sigma on each readout flip probability.
    #[serde(rename = "drift_readout")]
    pub drift_sigma_readout: f64,
    /// Per-session Gaussian sigma on the rotation bias, degrees.
    #[serde(rename = "drift_bias_deg")]
    pub drift_sigma_bias_deg: f64,
    /// Per-session relative jitter on T1 (dimensionless).
    #[serde(rename = "drift_t1_rel")]
    pub drift_sigma_t1_rel: f64,
}

impl QubitParams {
    /// An ideal qubit: no readout error, no bias, effectively infinite T1,
    /// no drift. Useful as a base for tests and hand-built fleets.
    pub fn ideal() -> Self {
        QubitParams {
            read_flip_0to1: 0.0,
            read_flip_1to0: 0.0,
            rotation_bias_deg: 0.0,
            t1_us: 1e9,
            drift_sigma_readout: 0.0,
            drift_sigma_bias_deg: 0.0,
            drift_sigma_t1_rel: 0.0,
        }
    }

    pub fn validate(&self, context: &str) -> Result<()> {
        let prob = |field: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invariant {
                    context: context.to_string(),
                    message: format!("{field} must be within [0, 1], got {v}"),
                });
            }
            Ok(())
        };
        prob("read01", self.read_flip_0to1)?;
        prob("read10", self.read_flip_1to0)?;
        if self.rotation_bias_deg.abs() >= 90.0 || self.rotation_bias_deg.is_nan() {
            return Err(Error::Invariant {
                context: context.to_string(),
                message: format!(
                    "bias_deg magnitude must be below 90, got {}",
                    self.rotation_bias_deg
                ),
            });
        }
        if self.t1_us <= 0.0 || !self.t1_us.is_finite() {
            return Err(Error::Invariant {
                context: context.to_string(),
                message: format!("t1_us must be positive and finite, got {}", self.t1_us),
            });
        }
        let sigma = |field: &str, v: f64| -> Result<()> {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Invariant {
                    context: context.to_string(),
                    message: format!("{field} must be >= 0 and finite, got {v}"),
                });
            }
            Ok(())
        };
        sigma("drift_readout", self.drift_sigma_readout)?;
        sigma("drift_bias_deg", self.drift_sigma_bias_deg)?;
        sigma("drift_t1_rel", self.drift_sigma_t1_rel)?;
        Ok(())
    }
}

/// A simulated device's identity: qubit parameters, coupling map, and the
/// seed all of its stochastic behavior derives from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceFingerprint {
    #[serde(rename = "id")]
    pub device_id: String,
    pub n_qubits: usize,
    /// Undirected qubit-index pairs supporting two-qubit interactions.
    pub coupling_map: Vec<(usize, usize)>,
    /// Wall time consumed by one idle gate, nanoseconds.
    #[serde(rename = "idle_gate_ns")]
    pub idle_gate_duration_ns: f64,
    #[serde(rename = "seed")]
    pub base_seed: u64,
    pub qubits: Vec<QubitParams>,
}

impl DeviceFingerprint {
    pub fn validate(&self) -> Result<()> {
        let ctx = |detail: String| Error::Invariant {
            context: format!("device '{}'", self.device_id),
            message: detail,
        };
        if self.device_id.is_empty() {
            return Err(ctx("id must be non-empty".into()));
        }
        if self.n_qubits == 0 {
            return Err(ctx("n_qubits must be positive".into()));
        }
        if self.qubits.len() != self.n_qubits {
            return Err(ctx(format!(
                "qubits length {} != n_qubits {}",
                self.qubits.len(),
                self.n_qubits
            )));
        }
        if self.idle_gate_duration_ns <= 0.0 || !self.idle_gate_duration_ns.is_finite() {
            return Err(ctx(format!(
                "idle_gate_ns must be positive and finite, got {}",
                self.idle_gate_duration_ns
            )));
        }
        let mut seen = HashSet::new();
        for &(u, v) in &self.coupling_map {
            if u == v {
                return Err(ctx(format!("coupling_map self-loop on qubit {u}")));
            }
            if u >= self.n_qubits || v >= self.n_qubits {
                return Err(ctx(format!(
                    "coupling_map edge ({u}, {v}) references a qubit >= {}",
                    self.n_qubits
                )));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(ctx(format!("coupling_map duplicate edge ({u}, {v})")));
            }
        }
        for (i, q) in self.qubits.iter().enumerate() {
            q.validate(&format!("device '{}' qubits[{i}]", self.device_id))?;
        }
        Ok(())
    }

    /// Normalized (min, max) edge set.
    pub fn edge_set(&self) -> HashSet<(usize, usize)> {
        self.coupling_map
            .iter()
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect()
    }
}

/// Per-qubit effective parameters for one session, after drift sampling.
///
/// Drift sigmas are carried over unchanged; only the physical values move.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionParams {
    pub session_index: u64,
    pub qubits: Vec<QubitParams>,
}

/// Samples the effective per-qubit parameters for one session.
///
/// Pure function of `(device.base_seed, rng_seed, session_index)`: readout
/// flips and rotation bias get zero-mean Gaussian offsets, T1 a relative
/// jitter. Everything is clamped back into its valid range; T1 is floored
/// at 1% of the base value.
pub fn sample_session(
    device: &DeviceFingerprint,
    session_index: u64,
    rng_seed: u64,
) -> SessionParams {
    let mut rng = rng::stream(&[device.base_seed, rng_seed, session_index, domain::DRIFT]);
    let bias_limit = bias_limit_deg();
    let qubits = device
        .qubits
        .iter()
        .map(|q| {
            // Draw order per qubit is fixed: read01, read10, bias, t1.
            let z01: f64 = StandardNormal.sample(&mut rng);
            let z10: f64 = StandardNormal.sample(&mut rng);
            let zb: f64 = StandardNormal.sample(&mut rng);
            let zt: f64 = StandardNormal.sample(&mut rng);
            QubitParams {
                read_flip_0to1: (q.read_flip_0to1 + z01 * q.drift_sigma_readout).clamp(0.0, 1.0),
                read_flip_1to0: (q.read_flip_1to0 + z10 * q.drift_sigma_readout).clamp(0.0, 1.0),
                rotation_bias_deg: (q.rotation_bias_deg + zb * q.drift_sigma_bias_deg)
                    .clamp(-bias_limit, bias_limit),
                t1_us: (q.t1_us * (1.0 + zt * q.drift_sigma_t1_rel))
                    .max(q.t1_us * T1_FLOOR_FRACTION),
                ..*q
            }
        })
        .collect();
    SessionParams {
        session_index,
        qubits,
    }
}

/// All injective maps from the guest graph into the host coupling map that
/// send every guest edge to a host edge.
///
/// Returned mappings are index vectors of length `guest_n_qubits`, listed in
/// lexicographic order of the mapped tuple. An empty list means no embedding
/// exists. Plain backtracking; fleet sizes keep this cheap.
pub fn find_isomorphic_embeddings(
    host: &DeviceFingerprint,
    guest_coupling_map: &[(usize, usize)],
    guest_n_qubits: usize,
) -> Vec<Vec<usize>> {
    if guest_n_qubits == 0 || guest_n_qubits > host.n_qubits {
        return Vec::new();
    }
    let host_edges = host.edge_set();
    // For each guest vertex, the already-assigned neighbors (smaller index).
    let mut back_edges: Vec<Vec<usize>> = vec![Vec::new(); guest_n_qubits];
    for &(u, v) in guest_coupling_map {
        if u == v || u >= guest_n_qubits || v >= guest_n_qubits {
            return Vec::new();
        }
        let (a, b) = (u.min(v), u.max(v));
        back_edges[b].push(a);
    }
    for e in &mut back_edges {
        e.sort_unstable();
        e.dedup();
    }

    fn extend(
        depth: usize,
        mapping: &mut Vec<usize>,
        used: &mut Vec<bool>,
        back_edges: &[Vec<usize>],
        host_edges: &HashSet<(usize, usize)>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if depth == mapping.len() {
            out.push(mapping.clone());
            return;
        }
        'candidates: for h in 0..used.len() {
            if used[h] {
                continue;
            }
            for &g in &back_edges[depth] {
                let (a, b) = (mapping[g].min(h), mapping[g].max(h));
                if !host_edges.contains(&(a, b)) {
                    continue 'candidates;
                }
            }
            mapping[depth] = h;
            used[h] = true;
            extend(depth + 1, mapping, used, back_edges, host_edges, out);
            used[h] = false;
        }
    }

    let mut out = Vec::new();
    let mut mapping = vec![usize::MAX; guest_n_qubits];
    let mut used = vec![false; host.n_qubits];
    extend(
        0,
        &mut mapping,
        &mut used,
        &back_edges,
        &host_edges,
        &mut out,
    );
    out
}

/// The registered fleet, keyed by device id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviceRegistry {
    devices: BTreeMap<String, DeviceFingerprint>,
}

impl DeviceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, device: DeviceFingerprint) -> Result<()> {
        device.validate()?;
        if self.devices.contains_key(&device.device_id) {
            return Err(Error::DuplicateDevice(device.device_id));
        }
        self.devices.insert(device.device_id.clone(), device);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&DeviceFingerprint> {
        self.devices.get(id).ok_or_else(|| Error::UnknownDevice {
            id: id.to_string(),
            known: self.ids(),
        })
    }

    pub fn ids(&self) -> Vec<String> {
        self.devices.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    /// Devices in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &DeviceFingerprint> {
        self.devices.values()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let devices: Vec<DeviceFingerprint> = serde_json::from_str(text)?;
        let mut registry = Self::new();
        for d in devices {
            registry.insert(d)?;
        }
        Ok(registry)
    }

    pub fn to_json(&self) -> String {
        let devices: Vec<&DeviceFingerprint> = self.devices.values().collect();
        let mut s = serde_json::to_string_pretty(&devices).expect("registry serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

/// 5-qubit T-shaped coupling map: a 0-1-2 line with 1-3-4 hanging off qubit 1.
pub fn t_shape_edges() -> Vec<(usize, usize)> {
    vec![(0, 1), (1, 2), (1, 3), (3, 4)]
}

/// Linear chain over `n` qubits.
pub fn line_edges(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (i - 1, i)).collect()
}

/// Builds one device with parameters drawn uniformly from the default
/// calibration ranges:
///
/// read01 [0.01, 0.06], read10 [0.015, 0.09], bias [-2, 2] deg,
/// t1 [40, 120] us, drift_readout [0.002, 0.008],
/// drift_bias [0.05, 0.25] deg, drift_t1_rel [0.01, 0.04].
///
/// Deterministic per `(id-independent) seed`; the device's own `base_seed`
/// is drawn from the same stream.
pub fn generate_device(
    device_id: &str,
    n_qubits: usize,
    coupling_map: Vec<(usize, usize)>,
    idle_gate_ns: f64,
    seed: u64,
) -> Result<DeviceFingerprint> {
    let mut rng = rng::stream(&[seed, domain::GEN]);
    let qubits = (0..n_qubits)
        .map(|_| QubitParams {
            read_flip_0to1: rng.random_range(0.01..=0.06),
            read_flip_1to0: rng.random_range(0.015..=0.09),
            rotation_bias_deg: rng.random_range(-2.0..=2.0),
            t1_us: rng.random_range(40.0..=120.0),
            drift_sigma_readout: rng.random_range(0.002..=0.008),
            drift_sigma_bias_deg: rng.random_range(0.05..=0.25),
            drift_sigma_t1_rel: rng.random_range(0.01..=0.04),
        })
        .collect();
    let device = DeviceFingerprint {
        device_id: device_id.to_string(),
        n_qubits,
        coupling_map,
        idle_gate_duration_ns: idle_gate_ns,
        base_seed: rng.random(),
        qubits,
    };
    device.validate()?;
    Ok(device)
}

/// Generates `count` devices named `qpu_00`, `qpu_01`, ... sharing one
/// topology, each with its own derived parameter seed.
pub fn generate_registry(
    count: usize,
    n_qubits: usize,
    coupling_map: &[(usize, usize)],
    idle_gate_ns: f64,
    seed: u64,
) -> Result<DeviceRegistry> {
    let mut registry = DeviceRegistry::new();
    for i in 0..count {
        let device = generate_device(
            &format!("qpu_{i:02}"),
            n_qubits,
            coupling_map.to_vec(),
            idle_gate_ns,
            rng::mix(&[seed, i as u64]),
        )?;
        registry.insert(device)?;
    }
    Ok(registry)
}
