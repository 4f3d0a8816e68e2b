//! Binary parameter file.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DKNN"
//! 4       2     format version (1)
//! 6       1     head id: 0 linear, 1 softmax, 2 dueling, 3 gaussian
//! 7       1     hidden activation id: 1 tanh
//! 8       4     number of layer sizes n (>= 2)
//! 12      4n    layer sizes
//! ..      16    gaussian head only: action bounds low, high (f64)
//! ..      8     parameter count
//! ..      8k    parameters (f64), buffers in canonical order, row-major
//! ```
//!
//! Canonical buffer order is weights then bias for each hidden layer, then
//! the head: linear/softmax `W, b`; dueling `W_v, b_v, W_a, b_a`; gaussian
//! `W_mean, b_mean, log_std`.

use std::fmt;

use super::{HeadKind, HeadSpec, MlpNetwork};

pub const MAGIC: [u8; 4] = *b"DKNN";
pub const FORMAT_VERSION: u16 = 1;
const ACTIVATION_TANH: u8 = 1;
/// Upper bound on a single layer width accepted by the decoder.
const MAX_WIDTH: usize = 1 << 16;
const MAX_LAYERS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedEof { needed: usize },
    BadMagic,
    UnsupportedVersion(u16),
    UnknownHead(u8),
    UnknownActivation(u8),
    InvalidShape(String),
    ParamCountMismatch { expected: u64, found: u64 },
    NonFiniteParameter,
    TrailingBytes(usize),
}

/// Decoding failure at byte `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed network file at byte {}: ", self.offset)?;
        match &self.kind {
            ParseErrorKind::UnexpectedEof { needed } => {
                write!(f, "unexpected end of input ({needed} more bytes needed)")
            }
            ParseErrorKind::BadMagic => write!(f, "bad magic"),
            ParseErrorKind::UnsupportedVersion(v) => write!(f, "unsupported version {v}"),
            ParseErrorKind::UnknownHead(h) => write!(f, "unknown head id {h}"),
            ParseErrorKind::UnknownActivation(a) => write!(f, "unknown activation id {a}"),
            ParseErrorKind::InvalidShape(s) => write!(f, "invalid shape: {s}"),
            ParseErrorKind::ParamCountMismatch { expected, found } => {
                write!(f, "expected {expected} parameters, header declares {found}")
            }
            ParseErrorKind::NonFiniteParameter => write!(f, "non-finite parameter"),
            ParseErrorKind::TrailingBytes(n) => write!(f, "{n} trailing bytes"),
        }
    }
}

impl std::error::Error for ParseError {}

fn head_id(kind: HeadKind) -> u8 {
    match kind {
        HeadKind::Linear => 0,
        HeadKind::Softmax => 1,
        HeadKind::Dueling => 2,
        HeadKind::Gaussian => 3,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.pos,
            kind,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ParseError> {
        let remaining = self.bytes.len() - self.pos;
        if remaining < n {
            return Err(self.err(ParseErrorKind::UnexpectedEof {
                needed: n - remaining,
            }));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ParseError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ParseError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ParseError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ParseError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ParseError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Number of parameters implied by a shape, or `None` on overflow.
fn expected_params(sizes: &[usize], head: HeadKind) -> Option<u64> {
    let mut total: u64 = 0;
    let dense = |i: usize, o: usize| (i as u64).checked_mul(o as u64)?.checked_add(o as u64);
    let n = sizes.len();
    for w in sizes[..n - 1].windows(2) {
        total = total.checked_add(dense(w[0], w[1])?)?;
    }
    let (last, out) = (sizes[n - 2], sizes[n - 1]);
    let head_params = match head {
        HeadKind::Linear | HeadKind::Softmax => dense(last, out)?,
        HeadKind::Dueling => dense(last, 1)?.checked_add(dense(last, out)?)?,
        HeadKind::Gaussian => dense(last, out)?.checked_add(out as u64)?,
    };
    total.checked_add(head_params)
}

impl MlpNetwork {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.param_count());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(head_id(self.head_kind()));
        out.push(ACTIVATION_TANH);
        out.extend_from_slice(&(self.layer_sizes.len() as u32).to_le_bytes());
        for &s in &self.layer_sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        if let Some((low, high)) = self.gaussian_bounds() {
            out.extend_from_slice(&low.to_le_bytes());
            out.extend_from_slice(&high.to_le_bytes());
        }
        out.extend_from_slice(&(self.param_count() as u64).to_le_bytes());
        for buf in self.param_buffers() {
            for v in buf {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Decodes a parameter file. Nothing is allocated for parameters until
    /// the header has been checked against the input length.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ParseError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            r.pos = 0;
            return Err(r.err(ParseErrorKind::BadMagic));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            r.pos -= 2;
            return Err(r.err(ParseErrorKind::UnsupportedVersion(version)));
        }
        let head = match r.u8()? {
            0 => HeadKind::Linear,
            1 => HeadKind::Softmax,
            2 => HeadKind::Dueling,
            3 => HeadKind::Gaussian,
            other => {
                r.pos -= 1;
                return Err(r.err(ParseErrorKind::UnknownHead(other)));
            }
        };
        let activation = r.u8()?;
        if activation != ACTIVATION_TANH {
            r.pos -= 1;
            return Err(r.err(ParseErrorKind::UnknownActivation(activation)));
        }

        let shape_at = r.pos;
        let n = r.u32()? as usize;
        if !(2..=MAX_LAYERS).contains(&n) {
            return Err(ParseError {
                offset: shape_at,
                kind: ParseErrorKind::InvalidShape(format!("{n} layer sizes")),
            });
        }
        let mut sizes = Vec::with_capacity(n);
        for _ in 0..n {
            let at = r.pos;
            let s = r.u32()? as usize;
            if s == 0 || s > MAX_WIDTH {
                return Err(ParseError {
                    offset: at,
                    kind: ParseErrorKind::InvalidShape(format!("layer width {s}")),
                });
            }
            sizes.push(s);
        }

        let spec = match head {
            HeadKind::Linear => HeadSpec::Linear,
            HeadKind::Softmax => HeadSpec::Softmax,
            HeadKind::Dueling => HeadSpec::Dueling,
            HeadKind::Gaussian => {
                let at = r.pos;
                let low = r.f64()?;
                let high = r.f64()?;
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(ParseError {
                        offset: at,
                        kind: ParseErrorKind::InvalidShape(format!(
                            "gaussian bounds [{low}, {high}]"
                        )),
                    });
                }
                HeadSpec::Gaussian {
                    low,
                    high,
                    init_log_std: 0.0,
                }
            }
        };

        let count_at = r.pos;
        let found = r.u64()?;
        let expected = expected_params(&sizes, head).ok_or_else(|| ParseError {
            offset: shape_at,
            kind: ParseErrorKind::InvalidShape("parameter count overflows".into()),
        })?;
        if found != expected {
            return Err(ParseError {
                offset: count_at,
                kind: ParseErrorKind::ParamCountMismatch { expected, found },
            });
        }
        let remaining = (bytes.len() - r.pos) as u64;
        let needed = expected.saturating_mul(8);
        if remaining < needed {
            return Err(ParseError {
                offset: bytes.len(),
                kind: ParseErrorKind::UnexpectedEof {
                    needed: (needed - remaining) as usize,
                },
            });
        }
        if remaining > needed {
            return Err(ParseError {
                offset: r.pos + needed as usize,
                kind: ParseErrorKind::TrailingBytes((remaining - needed) as usize),
            });
        }

        let mut net = MlpNetwork::zeros(&sizes, spec).map_err(|e| ParseError {
            offset: shape_at,
            kind: ParseErrorKind::InvalidShape(e.to_string()),
        })?;
        for buf in net.param_buffers_mut() {
            for v in buf.iter_mut() {
                let at = r.pos;
                *v = r.f64()?;
                if !v.is_finite() {
                    return Err(ParseError {
                        offset: at,
                        kind: ParseErrorKind::NonFiniteParameter,
                    });
                }
            }
        }
        Ok(net)
    }
}
