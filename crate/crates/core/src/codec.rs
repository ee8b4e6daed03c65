//! Per-document serialization of factor streams.
//!
//! Positions and lengths are written as two separate streams. Positions are
//! either raw 32-bit little-endian integers (`U`) or that same fixed-width
//! serialization compressed as one zlib unit (`Z`). Lengths are either
//! variable-byte coded (`V`) or the fixed-width serialization compressed as
//! one zlib unit (`Z`).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;

use crate::error::{Result, RlzError};
use crate::factorize::{Factor, FactorDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PosCode {
    /// Raw unsigned 32-bit.
    U,
    /// zlib over the raw 32-bit serialization.
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LenCode {
    /// Variable-byte.
    V,
    /// zlib over the raw 32-bit serialization.
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scheme {
    pub pos: PosCode,
    pub len: LenCode,
}

impl Scheme {
    pub const UV: Scheme = Scheme { pos: PosCode::U, len: LenCode::V };
    pub const UZ: Scheme = Scheme { pos: PosCode::U, len: LenCode::Z };
    pub const ZV: Scheme = Scheme { pos: PosCode::Z, len: LenCode::V };
    pub const ZZ: Scheme = Scheme { pos: PosCode::Z, len: LenCode::Z };
    pub const ALL: [Scheme; 4] = [Scheme::UV, Scheme::UZ, Scheme::ZV, Scheme::ZZ];

    /// Header byte: high nibble position code, low nibble length code.
    pub fn to_byte(self) -> u8 {
        let p = match self.pos {
            PosCode::U => 0,
            PosCode::Z => 1,
        };
        let l = match self.len {
            LenCode::V => 0,
            LenCode::Z => 1,
        };
        (p << 4) | l
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        let pos = match b >> 4 {
            0 => PosCode::U,
            1 => PosCode::Z,
            _ => return Err(RlzError::Format(format!("unknown scheme byte {b:#04x}"))),
        };
        let len = match b & 0x0f {
            0 => LenCode::V,
            1 => LenCode::Z,
            _ => return Err(RlzError::Format(format!("unknown scheme byte {b:#04x}"))),
        };
        Ok(Scheme { pos, len })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.pos {
            PosCode::U => 'u',
            PosCode::Z => 'z',
        };
        let l = match self.len {
            LenCode::V => 'v',
            LenCode::Z => 'z',
        };
        write!(f, "{p}{l}")
    }
}

impl FromStr for Scheme {
    type Err = RlzError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uv" => Ok(Scheme::UV),
            "uz" => Ok(Scheme::UZ),
            "zv" => Ok(Scheme::ZV),
            "zz" => Ok(Scheme::ZZ),
            other => Err(RlzError::InvalidParams(format!(
                "unknown scheme {other:?} (expected uv, uz, zv or zz)"
            ))),
        }
    }
}

/// The two serialized streams of one document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncodedDocument {
    pub pos_stream: Vec<u8>,
    pub len_stream: Vec<u8>,
    pub factor_count: u32,
    pub original_len: u64,
}

impl EncodedDocument {
    pub fn payload_len(&self) -> usize {
        self.pos_stream.len() + self.len_stream.len()
    }
}

/// Appends the variable-byte code of `value`: 7-bit groups, least significant
/// first, with the high bit set only on the final byte.
pub fn vbyte_encode_into(mut value: u32, out: &mut Vec<u8>) {
    while value >= 0x80 {
        out.push((value & 0x7f) as u8);
        value >>= 7;
    }
    out.push(value as u8 | 0x80);
}

pub fn vbyte_encode(value: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(5);
    vbyte_encode_into(value, &mut out);
    out
}

/// Decodes one value starting at `cursor`, returning it with the number of
/// bytes consumed.
pub fn vbyte_decode(bytes: &[u8], cursor: usize) -> Result<(u32, usize)> {
    let mut value: u64 = 0;
    for (i, &b) in bytes.get(cursor..).unwrap_or_default().iter().enumerate() {
        if i >= 5 {
            break;
        }
        value |= ((b & 0x7f) as u64) << (7 * i);
        if b & 0x80 != 0 {
            return u32::try_from(value)
                .map(|v| (v, i + 1))
                .map_err(|_| RlzError::CorruptStream("variable-byte value exceeds 32 bits".into()));
        }
    }
    if bytes.len().saturating_sub(cursor) >= 5 {
        Err(RlzError::CorruptStream("variable-byte code longer than 5 bytes".into()))
    } else {
        Err(RlzError::TruncatedCode)
    }
}

fn fixed_width<I: Iterator<Item = u32>>(values: I, n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 * n);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn zlib_compress(raw: &[u8]) -> Vec<u8> {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::best());
    enc.write_all(raw).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

/// Inflates a zlib unit expected to hold exactly `expected` bytes.
pub(crate) fn zlib_decompress_exact(stream: &[u8], expected: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(expected);
    ZlibDecoder::new(stream)
        .take(expected as u64 + 1)
        .read_to_end(&mut out)
        .map_err(|e| RlzError::CorruptStream(format!("zlib: {e}")))?;
    if out.len() != expected {
        return Err(RlzError::CorruptStream(format!(
            "zlib unit inflated to {} bytes, expected {expected}",
            out.len()
        )));
    }
    Ok(out)
}

fn read_fixed_width(raw: &[u8], count: usize, what: &str) -> Result<Vec<u32>> {
    if raw.len() != 4 * count {
        return Err(RlzError::CorruptStream(format!(
            "{what} stream holds {} bytes, expected {} for {count} factors",
            raw.len(),
            4 * count
        )));
    }
    Ok(raw
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn encode_document(fdoc: &FactorDocument, scheme: Scheme) -> EncodedDocument {
    let n = fdoc.factors.len();
    let mut enc = EncodedDocument {
        factor_count: u32::try_from(n).expect("factor count exceeds u32"),
        original_len: fdoc.original_len,
        ..Default::default()
    };
    if n == 0 {
        return enc;
    }
    let positions = fixed_width(fdoc.factors.iter().map(|f| f.position), n);
    enc.pos_stream = match scheme.pos {
        PosCode::U => positions,
        PosCode::Z => zlib_compress(&positions),
    };
    enc.len_stream = match scheme.len {
        LenCode::V => {
            let mut out = Vec::with_capacity(n);
            for f in &fdoc.factors {
                vbyte_encode_into(f.length, &mut out);
            }
            out
        }
        LenCode::Z => zlib_compress(&fixed_width(fdoc.factors.iter().map(|f| f.length), n)),
    };
    enc
}

pub fn decode_document(enc: &EncodedDocument, scheme: Scheme) -> Result<FactorDocument> {
    let count = enc.factor_count as usize;
    if count == 0 {
        if !enc.pos_stream.is_empty() || !enc.len_stream.is_empty() {
            return Err(RlzError::CorruptStream(
                "non-empty streams for a document without factors".into(),
            ));
        }
        return check_sum(
            FactorDocument {
                factors: Vec::new(),
                original_len: enc.original_len,
            },
        );
    }
    let positions = match scheme.pos {
        PosCode::U => read_fixed_width(&enc.pos_stream, count, "position")?,
        PosCode::Z => read_fixed_width(
            &zlib_decompress_exact(&enc.pos_stream, 4 * count)?,
            count,
            "position",
        )?,
    };
    let lengths = match scheme.len {
        LenCode::V => {
            let mut out = Vec::with_capacity(count);
            let mut cursor = 0usize;
            while out.len() < count {
                let (v, used) = vbyte_decode(&enc.len_stream, cursor).map_err(|e| match e {
                    RlzError::TruncatedCode => RlzError::CorruptStream(format!(
                        "length stream ended after {} of {count} values",
                        out.len()
                    )),
                    other => other,
                })?;
                out.push(v);
                cursor += used;
            }
            if cursor != enc.len_stream.len() {
                return Err(RlzError::CorruptStream(format!(
                    "length stream carries more than {count} values"
                )));
            }
            out
        }
        LenCode::Z => read_fixed_width(
            &zlib_decompress_exact(&enc.len_stream, 4 * count)?,
            count,
            "length",
        )?,
    };
    let factors = positions
        .into_iter()
        .zip(lengths)
        .map(|(position, length)| {
            if length == 0 && position > 0xff {
                Err(RlzError::CorruptStream(format!(
                    "literal factor carries non-byte value {position}"
                )))
            } else {
                Ok(Factor { position, length })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    check_sum(FactorDocument {
        factors,
        original_len: enc.original_len,
    })
}

fn check_sum(fdoc: FactorDocument) -> Result<FactorDocument> {
    let covered = fdoc.covered_len();
    if covered != fdoc.original_len {
        return Err(RlzError::CorruptStream(format!(
            "factors cover {covered} bytes but document length is {}",
            fdoc.original_len
        )));
    }
    Ok(fdoc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn worked() -> FactorDocument {
        FactorDocument {
            factors: vec![Factor::copy(2, 4), Factor::literal(b'n'), Factor::copy(0, 4)],
            original_len: 9,
        }
    }

    #[test]
    fn vbyte_examples() {
        assert_eq!(vbyte_encode(0), [0x80]);
        assert_eq!(vbyte_encode(127), [0xff]);
        assert_eq!(vbyte_encode(128), [0x00, 0x81]);
        assert_eq!(vbyte_encode(300), [0x2c, 0x82]);
        assert_eq!(vbyte_decode(&[0x2c, 0x82], 0).unwrap(), (300, 2));
        assert_eq!(vbyte_decode(&[0x11, 0x00, 0x81], 1).unwrap(), (128, 2));
        assert_eq!(vbyte_decode(&vbyte_encode(u32::MAX), 0).unwrap(), (u32::MAX, 5));
    }

    #[test]
    fn vbyte_errors() {
        assert!(matches!(vbyte_decode(&[0x2c], 0), Err(RlzError::TruncatedCode)));
        assert!(matches!(vbyte_decode(&[], 0), Err(RlzError::TruncatedCode)));
        assert!(matches!(vbyte_decode(&[0x80], 3), Err(RlzError::TruncatedCode)));
        assert!(matches!(
            vbyte_decode(&[0x7f, 0x7f, 0x7f, 0x7f, 0x7f, 0x81], 0),
            Err(RlzError::CorruptStream(_))
        ));
        // 2^32 does not fit
        assert!(matches!(
            vbyte_decode(&[0x00, 0x00, 0x00, 0x00, 0x90], 0),
            Err(RlzError::CorruptStream(_))
        ));
    }

    #[test]
    fn uv_layout_of_worked_example() {
        let enc = encode_document(&worked(), Scheme::UV);
        assert_eq!(
            enc.pos_stream,
            [2, 0, 0, 0, 0x6e, 0, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(enc.len_stream, [0x84, 0x80, 0x84]);
        assert_eq!(enc.factor_count, 3);
        assert_eq!(decode_document(&enc, Scheme::UV).unwrap(), worked());
    }

    #[test]
    fn z_streams_are_zlib_of_fixed_width() {
        let enc = encode_document(&worked(), Scheme::ZZ);
        let raw_pos = zlib_decompress_exact(&enc.pos_stream, 12).unwrap();
        assert_eq!(raw_pos, [2, 0, 0, 0, 0x6e, 0, 0, 0, 0, 0, 0, 0]);
        let raw_len = zlib_decompress_exact(&enc.len_stream, 12).unwrap();
        assert_eq!(raw_len, [4, 0, 0, 0, 0, 0, 0, 0, 4, 0, 0, 0]);
        // zlib header byte CMF for deflate with a 32K window
        assert_eq!(enc.pos_stream[0], 0x78);
        assert_eq!(decode_document(&enc, Scheme::ZZ).unwrap(), worked());
    }

    #[test]
    fn empty_document() {
        for scheme in Scheme::ALL {
            let enc = encode_document(&FactorDocument::default(), scheme);
            assert!(enc.pos_stream.is_empty() && enc.len_stream.is_empty());
            assert_eq!(enc.factor_count, 0);
            assert_eq!(decode_document(&enc, scheme).unwrap(), FactorDocument::default());
        }
    }

    #[test]
    fn corrupt_streams() {
        let mut enc = encode_document(&worked(), Scheme::UV);
        enc.pos_stream.truncate(3);
        assert!(matches!(decode_document(&enc, Scheme::UV), Err(RlzError::CorruptStream(_))));

        let mut enc = encode_document(&worked(), Scheme::UV);
        enc.factor_count = 2;
        enc.pos_stream.truncate(8);
        assert!(matches!(decode_document(&enc, Scheme::UV), Err(RlzError::CorruptStream(_))));

        let mut enc = encode_document(&worked(), Scheme::UV);
        enc.len_stream.pop();
        assert!(matches!(decode_document(&enc, Scheme::UV), Err(RlzError::CorruptStream(_))));

        let mut enc = encode_document(&worked(), Scheme::UV);
        enc.original_len = 10;
        assert!(matches!(decode_document(&enc, Scheme::UV), Err(RlzError::CorruptStream(_))));

        let mut enc = encode_document(&worked(), Scheme::ZZ);
        enc.len_stream[3] ^= 0xff;
        assert!(matches!(decode_document(&enc, Scheme::ZZ), Err(RlzError::CorruptStream(_))));
    }

    #[test]
    fn scheme_names_and_bytes() {
        for s in Scheme::ALL {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
            assert_eq!(Scheme::from_byte(s.to_byte()).unwrap(), s);
        }
        assert_eq!(Scheme::ZV.to_byte(), 0x10);
        assert_eq!(Scheme::UZ.to_byte(), 0x01);
        assert!("xy".parse::<Scheme>().is_err());
        assert!(Scheme::from_byte(0x22).is_err());
    }

    #[test]
    fn repetitive_pairs_compress_under_zz() {
        let factors: Vec<Factor> = (0..8)
            .flat_map(|_| [Factor::copy(123_456, 37), Factor::copy(9_001, 200)])
            .collect();
        let fdoc = FactorDocument {
            original_len: factors.iter().map(Factor::span).sum(),
            factors,
        };
        let uv = encode_document(&fdoc, Scheme::UV).payload_len();
        let zz = encode_document(&fdoc, Scheme::ZZ).payload_len();
        assert!(zz <= uv + 24, "zz {zz} uv {uv}");
    }

    fn arb_fdoc() -> impl Strategy<Value = FactorDocument> {
        proptest::collection::vec(
            prop_oneof![
                any::<u8>().prop_map(Factor::literal),
                (any::<u32>(), 1u32..100_000).prop_map(|(p, l)| Factor::copy(p, l)),
            ],
            0..200,
        )
        .prop_map(|factors| FactorDocument {
            original_len: factors.iter().map(Factor::span).sum(),
            factors,
        })
    }

    proptest! {
        #[test]
        fn round_trip_every_scheme(fdoc in arb_fdoc()) {
            for scheme in Scheme::ALL {
                let enc = encode_document(&fdoc, scheme);
                if scheme.pos == PosCode::U {
                    prop_assert_eq!(enc.pos_stream.len(), 4 * fdoc.factors.len());
                }
                prop_assert_eq!(decode_document(&enc, scheme).unwrap(), fdoc.clone());
            }
        }

        #[test]
        fn vbyte_round_trip(v in any::<u32>()) {
            let code = vbyte_encode(v);
            prop_assert!(code[..code.len() - 1].iter().all(|b| b & 0x80 == 0));
            prop_assert!(code.last().unwrap() & 0x80 != 0);
            prop_assert_eq!(vbyte_decode(&code, 0).unwrap(), (v, code.len()));
        }

        #[test]
        fn repeated_pairs_zz_bound(p in any::<u32>(), l in 1u32..5000, reps in 8usize..64) {
            let factors = vec![Factor::copy(p, l); reps];
            let fdoc = FactorDocument { original_len: l as u64 * reps as u64, factors };
            let uv = encode_document(&fdoc, Scheme::UV).payload_len();
            let zz = encode_document(&fdoc, Scheme::ZZ).payload_len();
            prop_assert!(zz <= uv + 24);
        }
    }
}
