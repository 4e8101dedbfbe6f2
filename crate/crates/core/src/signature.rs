//! Digitization of analog responses into fixed-precision bit-string
//! signatures, plus Hamming distance between them.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::circuits::ResponseTrace;
use crate::error::{Error, Result};

/// Per-qubit bin encoding. Plain binary is the default; Gray is available
/// because a one-bin drift under plain binary can flip up to `b` bits
/// (01111 -> 10000), which inflates intra-HD.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitEncoding {
    #[default]
    Binary,
    Gray,
}

/// Fixed-precision concatenated bit string: `precision` bits per qubit,
/// most-significant bit first, qubits in response order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    /// Packed bits, MSB-first; trailing pad bits are zero.
    bytes: Vec<u8>,
    precision: u8,
    n_qubits: usize,
}

impl Signature {
    pub fn precision(&self) -> u8 {
        self.precision
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn bit_len(&self) -> usize {
        self.precision as usize * self.n_qubits
    }

    pub fn bit(&self, index: usize) -> bool {
        assert!(index < self.bit_len(), "bit index out of range");
        (self.bytes[index / 8] >> (7 - index % 8)) & 1 == 1
    }

    fn shape(&self) -> String {
        format!("{}x{}", self.precision, self.n_qubits)
    }

    fn from_bins(bins: &[u16], precision: u8) -> Signature {
        let n_qubits = bins.len();
        let bit_len = precision as usize * n_qubits;
        let mut bytes = vec![0u8; bit_len.div_ceil(8)];
        let mut pos = 0;
        for &bin in bins {
            for t in (0..precision).rev() {
                if (bin >> t) & 1 == 1 {
                    bytes[pos / 8] |= 1 << (7 - pos % 8);
                }
                pos += 1;
            }
        }
        Signature {
            bytes,
            precision,
            n_qubits,
        }
    }

    /// Bitwise complement with the same shape.
    pub fn complement(&self) -> Signature {
        let mut bytes: Vec<u8> = self.bytes.iter().map(|b| !b).collect();
        mask_padding(&mut bytes, self.bit_len());
        Signature {
            bytes,
            precision: self.precision,
            n_qubits: self.n_qubits,
        }
    }
}

fn mask_padding(bytes: &mut [u8], bit_len: usize) {
    let tail = bit_len % 8;
    if tail != 0 {
        if let Some(last) = bytes.last_mut() {
            *last &= !(0xffu8 >> tail);
        }
    }
}

/// Digitizes per-qubit probabilities with plain binary bin codes.
///
/// bin = min(floor(p * 2^b), 2^b - 1); the upper clamp keeps p = 1.0 in the
/// top bin. Codes are concatenated in qubit order, MSB first.
pub fn digitize(prob_one: &[f64], precision: u8) -> Result<Signature> {
    digitize_with(prob_one, precision, BitEncoding::Binary)
}

/// [`digitize`] with an explicit bin encoding.
pub fn digitize_with(prob_one: &[f64], precision: u8, encoding: BitEncoding) -> Result<Signature> {
    if !(1..=16).contains(&precision) {
        return Err(Error::Invariant {
            context: "precision".into(),
            message: format!("bits per qubit must be within [1, 16], got {precision}"),
        });
    }
    if prob_one.is_empty() {
        return Err(Error::Empty("probability vector"));
    }
    let levels = 1u32 << precision;
    let mut bins = Vec::with_capacity(prob_one.len());
    for (i, &p) in prob_one.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Invariant {
                context: format!("prob_one[{i}]"),
                message: format!("probability must be within [0, 1], got {p}"),
            });
        }
        let bin = ((p * levels as f64).floor() as u32).min(levels - 1) as u16;
        let code = match encoding {
            BitEncoding::Binary => bin,
            BitEncoding::Gray => bin ^ (bin >> 1),
        };
        bins.push(code);
    }
    Ok(Signature::from_bins(&bins, precision))
}

/// Raw count of differing bit positions. Shapes must match.
pub fn hamming_distance(a: &Signature, b: &Signature) -> Result<u32> {
    if a.precision != b.precision || a.n_qubits != b.n_qubits {
        return Err(Error::ShapeMismatch {
            a: a.shape(),
            b: b.shape(),
        });
    }
    // Pad bits are zero on both sides, so whole-byte xor is exact.
    Ok(a.bytes
        .iter()
        .zip(&b.bytes)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum())
}

/// Hamming distance as a percentage of total bits, in [0, 100].
pub fn hamming_distance_pct(a: &Signature, b: &Signature) -> Result<f64> {
    let d = hamming_distance(a, b)?;
    Ok(100.0 * d as f64 / a.bit_len() as f64)
}

/// Digitizes the per-qubit arithmetic mean of `prob_one` across sessions.
/// This is the reference template stored at enrollment.
pub fn mean_signature(trace: &ResponseTrace, precision: u8) -> Result<Signature> {
    let first = trace
        .sessions
        .first()
        .ok_or(Error::Empty("trace sessions"))?;
    let n = first.prob_one.len();
    let mut means = vec![0.0f64; n];
    for s in &trace.sessions {
        if s.prob_one.len() != n {
            return Err(Error::Invariant {
                context: format!("trace '{}'", trace.device_id),
                message: "sessions disagree on qubit count".into(),
            });
        }
        for (m, p) in means.iter_mut().zip(&s.prob_one) {
            *m += p;
        }
    }
    for m in &mut means {
        *m /= trace.sessions.len() as f64;
    }
    digitize(&means, precision)
}

impl fmt::Display for Signature {
    /// `"{precision}x{n_qubits}:0x{hex}"`, e.g. `5x5:0x84210880`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}:0x", self.precision, self.n_qubits)?;
        for b in &self.bytes {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl FromStr for Signature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |message: String| Error::Invariant {
            context: "signature".into(),
            message,
        };
        let (shape, hex) = s
            .split_once(":0x")
            .ok_or_else(|| bad(format!("expected '<bits>x<qubits>:0x<hex>', got '{s}'")))?;
        let (p, n) = shape
            .split_once('x')
            .ok_or_else(|| bad(format!("bad shape prefix '{shape}'")))?;
        let precision: u8 = p.parse().map_err(|_| bad(format!("bad precision '{p}'")))?;
        let n_qubits: usize = n
            .parse()
            .map_err(|_| bad(format!("bad qubit count '{n}'")))?;
        if !(1..=16).contains(&precision) || n_qubits == 0 {
            return Err(bad(format!("unsupported shape '{shape}'")));
        }
        let bit_len = precision as usize * n_qubits;
        let byte_len = bit_len.div_ceil(8);
        if hex.len() != byte_len * 2 {
            return Err(bad(format!(
                "hex length {} does not match shape '{shape}' (expected {})",
                hex.len(),
                byte_len * 2
            )));
        }
        let mut bytes = Vec::with_capacity(byte_len);
        for chunk in hex.as_bytes().chunks(2) {
            let pair = std::str::from_utf8(chunk).map_err(|_| bad("non-ascii hex".into()))?;
            bytes.push(u8::from_str_radix(pair, 16).map_err(|_| bad(format!("bad hex '{pair}'")))?);
        }
        let mut masked = bytes.clone();
        mask_padding(&mut masked, bit_len);
        if masked != bytes {
            return Err(bad("padding bits must be zero".into()));
        }
        Ok(Signature {
            bytes,
            precision,
            n_qubits,
        })
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}
