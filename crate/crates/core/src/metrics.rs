//! Intra/inter Hamming-distance statistics, the combined deviation metric,
//! and the angle/precision/idle sweep that picks the PUF operating point.
//!
//! Intra-HD (same device over time, ideal 0%) uses all unordered session
//! pairs; inter-HD (two devices, ideal 50%) uses all cross pairs. Both are
//! computed on digitized signatures, so one execution serves every precision.

use serde::{Deserialize, Serialize};

use crate::circuits::{execute_challenge, PufChallenge, PufVariant, ResponseTrace};
use crate::device::DeviceFingerprint;
use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{self, domain};
use crate::signature::{digitize, hamming_distance_pct, Signature};

/// Mean/sigma summary of a pairwise Hamming-distance distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct HDStats {
    /// Percentage in [0, 100].
    pub mean: f64,
    /// Population standard deviation of the distribution, percentage.
    pub sigma: f64,
    /// Number of evaluated pairs.
    pub count: usize,
    pub distribution: Vec<f64>,
}

impl HDStats {
    pub fn from_distribution(distribution: Vec<f64>) -> Result<HDStats> {
        if distribution.is_empty() {
            return Err(Error::Empty("HD distribution"));
        }
        let n = distribution.len() as f64;
        let mean = distribution.iter().sum::<f64>() / n;
        let var = distribution.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        Ok(HDStats {
            mean,
            sigma: var.sqrt(),
            count: distribution.len(),
            distribution,
        })
    }
}

/// HD over all C(n, 2) unordered pairs of the given signatures.
pub fn pairwise_hd_stats(signatures: &[Signature]) -> Result<HDStats> {
    if signatures.len() < 2 {
        return Err(Error::TooFewSessions {
            got: signatures.len(),
            need: 2,
        });
    }
    let mut distribution = Vec::with_capacity(signatures.len() * (signatures.len() - 1) / 2);
    for i in 0..signatures.len() {
        for j in (i + 1)..signatures.len() {
            distribution.push(hamming_distance_pct(&signatures[i], &signatures[j])?);
        }
    }
    HDStats::from_distribution(distribution)
}

/// HD over all |a| x |b| cross pairs (self-pairs included when a and b
/// coincide).
pub fn cross_hd_stats(a: &[Signature], b: &[Signature]) -> Result<HDStats> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("signature set"));
    }
    let mut distribution = Vec::with_capacity(a.len() * b.len());
    for sa in a {
        for sb in b {
            distribution.push(hamming_distance_pct(sa, sb)?);
        }
    }
    HDStats::from_distribution(distribution)
}

fn session_signatures(trace: &ResponseTrace, precision: u8) -> Result<Vec<Signature>> {
    trace
        .sessions
        .iter()
        .map(|s| digitize(&s.prob_one, precision))
        .collect()
}

/// Intra-HD of one device: digitize every session, HD over all session pairs.
pub fn intra_hd(trace: &ResponseTrace, precision: u8) -> Result<HDStats> {
    if trace.sessions.len() < 2 {
        return Err(Error::TooFewSessions {
            got: trace.sessions.len(),
            need: 2,
        });
    }
    pairwise_hd_stats(&session_signatures(trace, precision)?)
}

/// Inter-HD of two devices: HD over all cross session pairs.
pub fn inter_hd(
    trace_a: &ResponseTrace,
    trace_b: &ResponseTrace,
    precision: u8,
) -> Result<HDStats> {
    cross_hd_stats(
        &session_signatures(trace_a, precision)?,
        &session_signatures(trace_b, precision)?,
    )
}

/// Combined HD deviation: |inter - 50| + |intra - 0|. Lower is better; a
/// perfect PUF scores 0.
pub fn combined_deviation(inter_mean: f64, intra_mean: f64) -> f64 {
    (inter_mean - 50.0).abs() + intra_mean.abs()
}

/// Sweep configuration. The designated device/pair feed the combined metric;
/// they default to the first device and the first pair.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub variant: PufVariant,
    pub theta_values: Vec<f64>,
    pub precisions: Vec<u8>,
    pub idle_values: Vec<u32>,
    pub shots: u64,
    pub n_experiments: u32,
    pub seed: u64,
    pub intra_device: Option<String>,
    pub inter_pair: Option<(String, String)>,
}

/// One sweep row. `intra` aligns with `SweepResult::devices`, `inter` with
/// `SweepResult::pairs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta_deg: f64,
    pub precision: u8,
    pub idle_count: u32,
    pub intra: Vec<f64>,
    pub inter: Vec<f64>,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub devices: Vec<String>,
    pub pairs: Vec<(String, String)>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// CSV export: one column per device intra, one per pair inter.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta_deg,precision_bits,idle_count");
        for d in &self.devices {
            out.push_str(&format!(",intra_{d}"));
        }
        for (a, b) in &self.pairs {
            out.push_str(&format!(",inter_{a}_{b}"));
        }
        out.push_str(",combined_pct\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}",
                row.theta_deg, row.precision, row.idle_count
            ));
            for v in row.intra.iter().chain(&row.inter) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", row.combined));
        }
        out
    }
}

/// The sweep-selected operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub theta_deg: f64,
    pub precision: u8,
    pub idle_count: u32,
    pub combined: f64,
}

/// Executes each (device, theta, idle) challenge once and fills one row per
/// (theta, idle, precision): digitization is post-hoc, so sharing the
/// execution across precisions is exact. Deterministic given the seed.
pub fn sweep(devices: &[DeviceFingerprint], config: &SweepConfig) -> Result<SweepResult> {
    if devices.len() < 2 {
        return Err(Error::Empty("sweep needs at least two devices"));
    }
    if config.theta_values.is_empty() || config.precisions.is_empty() {
        return Err(Error::Empty("sweep value lists"));
    }
    if config.idle_values.is_empty() {
        return Err(Error::Empty("sweep idle list"));
    }
    if config.variant == PufVariant::Hadamard && config.idle_values != [0] {
        return Err(Error::InvalidChallenge(
            "the Hadamard variant sweeps idle_values == [0] only".into(),
        ));
    }

    let names: Vec<String> = devices.iter().map(|d| d.device_id.clone()).collect();
    let mut pairs = Vec::new();
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            pairs.push((names[i].clone(), names[j].clone()));
        }
    }

    let intra_name = config
        .intra_device
        .clone()
        .unwrap_or_else(|| names[0].clone());
    let intra_idx =
        names
            .iter()
            .position(|n| *n == intra_name)
            .ok_or_else(|| Error::UnknownDevice {
                id: intra_name.clone(),
                known: names.clone(),
            })?;
    let pair_names = config
        .inter_pair
        .clone()
        .unwrap_or_else(|| pairs[0].clone());
    let pair_idx = pairs
        .iter()
        .position(|(a, b)| {
            (*a == pair_names.0 && *b == pair_names.1) || (*a == pair_names.1 && *b == pair_names.0)
        })
        .ok_or_else(|| Error::Invariant {
            context: "sweep inter_pair".into(),
            message: format!("({}, {}) is not a device pair", pair_names.0, pair_names.1),
        })?;

    // One execution per (device, theta, idle), shared across precisions.
    let n_theta = config.theta_values.len();
    let n_idle = config.idle_values.len();
    let grid = devices.len() * n_theta * n_idle;
    let traces = exec::try_map_indexed(grid, |g| {
        let di = g / (n_theta * n_idle);
        let ti = (g / n_idle) % n_theta;
        let ii = g % n_idle;
        let challenge = PufChallenge {
            variant: config.variant,
            theta_deg: config.theta_values[ti],
            idle_count: config.idle_values[ii],
            shots: config.shots,
            n_experiments: config.n_experiments,
            qubit_subset: None,
        };
        let seed = rng::mix(&[config.seed, di as u64, ti as u64, ii as u64, domain::SWEEP]);
        execute_challenge(&devices[di], &challenge, seed)
    })?;
    let trace = |di: usize, ti: usize, ii: usize| &traces[(di * n_theta + ti) * n_idle + ii];

    let mut rows = Vec::with_capacity(n_theta * n_idle * config.precisions.len());
    for (ti, &theta) in config.theta_values.iter().enumerate() {
        for (ii, &idle) in config.idle_values.iter().enumerate() {
            for &precision in &config.precisions {
                let mut intra = Vec::with_capacity(devices.len());
                for di in 0..devices.len() {
                    intra.push(intra_hd(trace(di, ti, ii), precision)?.mean);
                }
                let mut inter = Vec::with_capacity(pairs.len());
                for i in 0..devices.len() {
                    for j in (i + 1)..devices.len() {
                        inter.push(inter_hd(trace(i, ti, ii), trace(j, ti, ii), precision)?.mean);
                    }
                }
                let combined = combined_deviation(inter[pair_idx], intra[intra_idx]);
                rows.push(SweepRow {
                    theta_deg: theta,
                    precision,
                    idle_count: idle,
                    intra,
                    inter,
                    combined,
                });
            }
        }
    }
    Ok(SweepResult {
        devices: names,
        pairs,
        rows,
    })
}

/// Row minimizing the combined metric. Ties break toward lower precision,
/// then smaller |theta|, then lower idle count.
pub fn select_optimum(result: &SweepResult) -> Result<Optimum> {
    let mut best: Option<&SweepRow> = None;
    for row in &result.rows {
        let better = match best {
            None => true,
            Some(b) => {
                let key = (
                    row.combined,
                    row.precision,
                    row.theta_deg.abs(),
                    row.idle_count,
                );
                let best_key = (b.combined, b.precision, b.theta_deg.abs(), b.idle_count);
                key.partial_cmp(&best_key) == Some(std::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some(row);
        }
    }
    let row = best.ok_or(Error::Empty("sweep result"))?;
    Ok(Optimum {
        theta_deg: row.theta_deg,
        precision: row.precision,
        idle_count: row.idle_count,
        combined: row.combined,
    })
}
