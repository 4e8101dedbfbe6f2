//! CRP database: enrollment (registration), identification of an unknown
//! device, and verification of a claimed identity against a threshold.
//!
//! The matching target is the enrollment mean signature rather than the
//! nearest enrollment session: one stored template, lower variance. The
//! per-session signatures stay in the record so thresholds can be
//! recalibrated without re-running enrollment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuits::{execute_challenge, PufChallenge, PufVariant};
use crate::device::DeviceFingerprint;
use crate::error::{Error, Result};
use crate::metrics::{cross_hd_stats, pairwise_hd_stats, HDStats};
use crate::signature::{digitize, hamming_distance_pct, mean_signature, Signature};

/// Threshold used until a challenge key has at least two comparable records
/// to calibrate from: the midpoint of the ideal intra (0%) and inter (50%).
pub const PROVISIONAL_THRESHOLD_PCT: f64 = 25.0;

/// Challenge identity for database lookup. Theta is rounded to 0.1 degrees
/// so registration and validation challenges match robustly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChallengeKey {
    pub variant: PufVariant,
    pub theta_tenths_deg: i32,
    pub idle_count: u32,
    pub precision: u8,
}

impl ChallengeKey {
    pub fn new(variant: PufVariant, theta_deg: f64, idle_count: u32, precision: u8) -> Self {
        ChallengeKey {
            variant,
            theta_tenths_deg: (theta_deg * 10.0).round() as i32,
            idle_count,
            precision,
        }
    }

    pub fn of(challenge: &PufChallenge, precision: u8) -> Self {
        Self::new(
            challenge.variant,
            challenge.theta_deg,
            challenge.idle_count,
            precision,
        )
    }
}

impl std::fmt::Display for ChallengeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let variant = match self.variant {
            PufVariant::Hadamard => "hadamard",
            PufVariant::Decoherence => "decoherence",
        };
        write!(
            f,
            "{variant}@{:.1}°/idle{}/{}b",
            self.theta_tenths_deg as f64 / 10.0,
            self.idle_count,
            self.precision
        )
    }
}

/// One registered challenge-response record.
#[derive(Debug, Clone, PartialEq)]
pub struct CRPRecord {
    pub device_id: String,
    pub challenge: PufChallenge,
    pub precision: u8,
    /// Digitized per-qubit mean over the enrollment sessions.
    pub reference: Signature,
    pub enrollment_sessions: Vec<Signature>,
    pub intra_stats: HDStats,
    pub threshold_pct: f64,
}

/// The authentication verdict for one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthDecision {
    pub outcome: AuthOutcome,
    pub best_match_id: Option<String>,
    pub hd_to_best: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuthOutcome {
    Accepted,
    Rejected,
    Unknown,
}

/// Midpoint threshold between enrollment intra-HD and suite inter-HD.
/// Errors when the statistics are not separable.
pub fn choose_threshold(intra: &HDStats, inter: &HDStats) -> Result<f64> {
    if intra.mean >= inter.mean {
        return Err(Error::NonSeparable {
            intra: intra.mean,
            inter: inter.mean,
        });
    }
    Ok(((intra.mean + inter.mean) / 2.0).clamp(0.0, 100.0))
}

/// Registered challenge -> signature records, keyed by (device, challenge).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CRPDatabase {
    records: BTreeMap<(String, ChallengeKey), CRPRecord>,
}

#[derive(Serialize, Deserialize)]
struct DbFile {
    records: Vec<RecordWire>,
}

#[derive(Serialize, Deserialize)]
struct RecordWire {
    device: String,
    challenge: PufChallenge,
    precision: u8,
    reference: Signature,
    sessions: Vec<Signature>,
    intra_mean: f64,
    threshold: f64,
}

impl CRPDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, device_id: &str, key: &ChallengeKey) -> Option<&CRPRecord> {
        self.records.get(&(device_id.to_string(), *key))
    }

    /// Records in ascending (device id, key) order.
    pub fn iter(&self) -> impl Iterator<Item = &CRPRecord> {
        self.records.values()
    }

    /// Runs the enrollment challenge on the device and stores per-session
    /// signatures, the mean reference, and enrollment intra stats. The new
    /// record starts at the provisional threshold; every record sharing the
    /// challenge key is then recalibrated against the suite.
    pub fn register(
        &mut self,
        device: &DeviceFingerprint,
        challenge: &PufChallenge,
        precision: u8,
        seed: u64,
        overwrite: bool,
    ) -> Result<()> {
        let key = ChallengeKey::of(challenge, precision);
        let map_key = (device.device_id.clone(), key);
        if !overwrite && self.records.contains_key(&map_key) {
            return Err(Error::DuplicateRecord(format!(
                "device '{}' under {key}",
                device.device_id
            )));
        }
        let trace = execute_challenge(device, challenge, seed)?;
        let enrollment_sessions: Vec<Signature> = trace
            .sessions
            .iter()
            .map(|s| digitize(&s.prob_one, precision))
            .collect::<Result<_>>()?;
        let intra_stats = pairwise_hd_stats(&enrollment_sessions)?;
        let record = CRPRecord {
            device_id: device.device_id.clone(),
            challenge: challenge.clone(),
            precision,
            reference: mean_signature(&trace, precision)?,
            enrollment_sessions,
            intra_stats,
            threshold_pct: PROVISIONAL_THRESHOLD_PCT,
        };
        self.records.insert(map_key, record);
        self.recalibrate_thresholds(&key);
        Ok(())
    }

    /// Sets each record's threshold for this key to the midpoint of its own
    /// enrollment intra-HD and its inter-HD against the other records'
    /// enrollment sessions. Records without a separable suite (or without
    /// shape-compatible peers) keep their current threshold.
    pub fn recalibrate_thresholds(&mut self, key: &ChallengeKey) {
        let ids: Vec<String> = self
            .records
            .iter()
            .filter(|((_, k), _)| k == key)
            .map(|((id, _), _)| id.clone())
            .collect();
        if ids.len() < 2 {
            return;
        }
        let mut updates = Vec::new();
        for id in &ids {
            let record = &self.records[&(id.clone(), *key)];
            let shape = (record.reference.precision(), record.reference.n_qubits());
            let others: Vec<Signature> = ids
                .iter()
                .filter(|other| *other != id)
                .flat_map(|other| {
                    self.records[&(other.clone(), *key)]
                        .enrollment_sessions
                        .iter()
                        .cloned()
                })
                .filter(|s| (s.precision(), s.n_qubits()) == shape)
                .collect();
            if others.is_empty() {
                continue;
            }
            let inter = cross_hd_stats(&record.enrollment_sessions, &others)
                .expect("both signature sets are non-empty and shape-checked");
            if let Ok(threshold) = choose_threshold(&record.intra_stats, &inter) {
                updates.push((id.clone(), threshold));
            }
        }
        for (id, threshold) in updates {
            self.records
                .get_mut(&(id, *key))
                .expect("record existed above")
                .threshold_pct = threshold;
        }
    }

    /// Finds the registered reference closest to the response among records
    /// for this challenge key. Accepted when the best distance is within
    /// that record's threshold, Unknown otherwise. Ties break toward the
    /// lexicographically smaller device id.
    pub fn identify(&self, response: &Signature, key: &ChallengeKey) -> Result<AuthDecision> {
        let mut candidates = 0usize;
        let mut best: Option<(&CRPRecord, f64)> = None;
        for ((_, k), record) in &self.records {
            if k != key {
                continue;
            }
            candidates += 1;
            // Mixed-width suites: skip references the response cannot match.
            if record.reference.precision() != response.precision()
                || record.reference.n_qubits() != response.n_qubits()
            {
                continue;
            }
            let hd = hamming_distance_pct(response, &record.reference)?;
            if best.is_none_or(|(_, b)| hd < b) {
                best = Some((record, hd));
            }
        }
        match best {
            Some((record, hd)) => Ok(AuthDecision {
                outcome: if hd <= record.threshold_pct {
                    AuthOutcome::Accepted
                } else {
                    AuthOutcome::Unknown
                },
                best_match_id: Some(record.device_id.clone()),
                hd_to_best: hd,
                threshold: record.threshold_pct,
            }),
            None if candidates > 0 => Err(Error::MissingRecord(format!(
                "{key} matching response shape {}x{}",
                response.precision(),
                response.n_qubits()
            ))),
            None => Err(Error::MissingRecord(key.to_string())),
        }
    }

    /// Accepted iff the response is within the claimed record's threshold.
    pub fn verify(
        &self,
        claimed_id: &str,
        response: &Signature,
        key: &ChallengeKey,
    ) -> Result<AuthDecision> {
        let record = self
            .get(claimed_id, key)
            .ok_or_else(|| Error::MissingRecord(format!("device '{claimed_id}' under {key}")))?;
        let hd = hamming_distance_pct(response, &record.reference)?;
        Ok(AuthDecision {
            outcome: if hd <= record.threshold_pct {
                AuthOutcome::Accepted
            } else {
                AuthOutcome::Rejected
            },
            best_match_id: Some(claimed_id.to_string()),
            hd_to_best: hd,
            threshold: record.threshold_pct,
        })
    }

    pub fn to_json(&self) -> String {
        let records = self
            .records
            .values()
            .map(|r| RecordWire {
                device: r.device_id.clone(),
                challenge: r.challenge.clone(),
                precision: r.precision,
                reference: r.reference.clone(),
                sessions: r.enrollment_sessions.clone(),
                intra_mean: r.intra_stats.mean,
                threshold: r.threshold_pct,
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&DbFile { records }).expect("database serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DbFile = serde_json::from_str(text)?;
        let mut db = CRPDatabase::new();
        for wire in file.records {
            let key = ChallengeKey::of(&wire.challenge, wire.precision);
            let context = format!("record for device '{}' under {key}", wire.device);
            if wire.precision != wire.reference.precision() {
                return Err(Error::Invariant {
                    context,
                    message: "reference precision disagrees with record precision".into(),
                });
            }
            if wire.sessions.is_empty() {
                return Err(Error::Invariant {
                    context,
                    message: "enrollment sessions must be non-empty".into(),
                });
            }
            if !(0.0..=100.0).contains(&wire.threshold) {
                return Err(Error::Invariant {
                    context,
                    message: format!("threshold must be within [0, 100], got {}", wire.threshold),
                });
            }
            // Rebuild enrollment stats from the stored sessions; a single
            // session carries no pairwise distribution.
            let intra_stats = if wire.sessions.len() >= 2 {
                pairwise_hd_stats(&wire.sessions)?
            } else {
                HDStats::from_distribution(vec![0.0])?
            };
            if (intra_stats.mean - wire.intra_mean).abs() > 1e-6 {
                return Err(Error::Invariant {
                    context,
                    message: format!(
                        "stored intra_mean {} disagrees with recomputed {}",
                        wire.intra_mean, intra_stats.mean
                    ),
                });
            }
            let map_key = (wire.device.clone(), key);
            if db.records.contains_key(&map_key) {
                return Err(Error::DuplicateRecord(format!(
                    "device '{}' under {key}",
                    wire.device
                )));
            }
            db.records.insert(
                map_key,
                CRPRecord {
                    device_id: wire.device,
                    challenge: wire.challenge,
                    precision: wire.precision,
                    reference: wire.reference,
                    enrollment_sessions: wire.sessions,
                    intra_stats,
                    threshold_pct: wire.threshold,
                },
            );
        }
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}
