//! Field schemas for the leaf boxes that are decoded rather than kept opaque.

use thiserror::Error;

use super::{opaque_fields, BoxHeader, FourCC};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("PayloadTooShort: '{type_code}' needs {needed} bytes, {available} available")]
    PayloadTooShort {
        type_code: FourCC,
        needed: usize,
        available: usize,
    },
    #[error("no field schema registered for '{0}'")]
    NoSchema(FourCC),
}

const SCHEMA_BOXES: [&[u8; 4]; 16] = [
    b"ftyp", b"mvhd", b"tkhd", b"mdhd", b"hdlr", b"vmhd", b"smhd", b"dref", b"stsd", b"stts",
    b"stsc", b"stsz", b"stco", b"co64", b"elst", b"uuid",
];

pub fn has_schema(code: &FourCC) -> bool {
    SCHEMA_BOXES.contains(&&code.0)
}

/// Decodes the payload of a box with a registered schema into ordered
/// `(field, value)` pairs.
///
/// `payload` may be a prefix of the real payload (the parser caps reads);
/// summaries that only need leading bytes are unaffected.
pub fn decode_known_box(
    header: &BoxHeader,
    payload: &[u8],
) -> Result<Vec<(String, String)>, DecodeError> {
    let code = header.type_code;
    let mut r = Reader {
        buf: payload,
        pos: 0,
        code,
    };
    let mut out = Fields::default();
    match &code.0 {
        b"ftyp" => {
            out.push("majorBrand", bytes_value(r.take(4)?));
            out.push("minorVersion", r.u32()?);
            let mut i = 1;
            while r.remaining() >= 4 {
                out.push(&format!("compatibleBrand_{i}"), bytes_value(r.take(4)?));
                i += 1;
            }
        }
        b"mvhd" => {
            let version = r.full_box(&mut out)?;
            r.times(version, &mut out)?;
            out.push("rate", fixed_16_16(r.i32()?));
            out.push("volume", fixed_8_8(r.i16()?));
            r.skip(10)?;
            out.push("matrix", r.matrix()?);
            r.skip(24)?;
            out.push("nextTrackId", r.u32()?);
        }
        b"tkhd" => {
            let version = r.full_box(&mut out)?;
            if version == 1 {
                out.push("creationTime", r.u64()?);
                out.push("modificationTime", r.u64()?);
                out.push("trackId", r.u32()?);
                r.skip(4)?;
                out.push("duration", r.u64()?);
            } else {
                out.push("creationTime", r.u32()?);
                out.push("modificationTime", r.u32()?);
                out.push("trackId", r.u32()?);
                r.skip(4)?;
                out.push("duration", r.u32()?);
            }
            r.skip(8)?;
            out.push("layer", r.i16()?);
            out.push("alternateGroup", r.i16()?);
            out.push("volume", fixed_8_8(r.i16()?));
            r.skip(2)?;
            out.push("matrix", r.matrix()?);
            out.push("width", fixed_16_16(r.i32()?));
            out.push("height", fixed_16_16(r.i32()?));
        }
        b"mdhd" => {
            let version = r.full_box(&mut out)?;
            r.times(version, &mut out)?;
            out.push("language", language(r.u16()?));
        }
        b"hdlr" => {
            r.full_box(&mut out)?;
            r.skip(4)?;
            out.push("handlerType", bytes_value(r.take(4)?));
            r.skip(12)?;
            let rest = r.rest();
            let name = match rest.iter().position(|&b| b == 0) {
                Some(end) => &rest[..end],
                None => rest,
            };
            out.push("name", bytes_value(name));
        }
        b"vmhd" => {
            r.full_box(&mut out)?;
            out.push("graphicsMode", r.u16()?);
            let colors = [r.u16()?, r.u16()?, r.u16()?];
            out.push(
                "opcolor",
                format!("[{},{},{}]", colors[0], colors[1], colors[2]),
            );
        }
        b"smhd" => {
            r.full_box(&mut out)?;
            out.push("balance", fixed_8_8(r.i16()?));
            r.skip(2)?;
        }
        b"dref" | b"stts" | b"stsc" | b"stco" | b"co64" => {
            r.full_box(&mut out)?;
            out.push("entryCount", r.u32()?);
        }
        b"stsz" => {
            r.full_box(&mut out)?;
            out.push("sampleSize", r.u32()?);
            out.push("sampleCount", r.u32()?);
        }
        b"stsd" => {
            r.full_box(&mut out)?;
            let entries = r.u32()?;
            out.push("entryCount", entries);
            // Only the format code of each sample entry; entries that run past
            // the available bytes end the walk.
            for i in 1..=entries {
                if r.remaining() < 8 {
                    break;
                }
                let size = r.u32()? as usize;
                let format = FourCC(r.take(4)?.try_into().expect("4 bytes"));
                out.push(&format!("format_{i}"), format.to_string());
                if size < 8 || r.remaining() < size - 8 {
                    break;
                }
                r.skip(size - 8)?;
            }
        }
        b"elst" => {
            // Field names are unique per node, so only the first edit is
            // described; the count carries the rest.
            let version = r.full_box(&mut out)?;
            let entries = r.u32()?;
            out.push("entryCount", entries);
            let entry_len = if version == 1 { 20 } else { 12 };
            if entries > 0 && r.remaining() >= entry_len {
                if version == 1 {
                    out.push("segmentDuration", r.u64()?);
                    out.push("mediaTime", r.u64()? as i64);
                } else {
                    out.push("segmentDuration", r.u32()?);
                    out.push("mediaTime", r.i32()?);
                }
                out.push("mediaRate", fixed_16_16(r.i32()?));
            }
        }
        b"uuid" => {
            let user_type = header.user_type.unwrap_or_default();
            out.push("userType", bytes_value(&user_type));
            out.0.extend(opaque_fields(header.payload_len()));
        }
        _ => return Err(DecodeError::NoSchema(code)),
    }
    Ok(out.0)
}

#[derive(Default)]
struct Fields(Vec<(String, String)>);

impl Fields {
    fn push(&mut self, name: &str, value: impl ToString) {
        self.0.push((name.to_string(), value.to_string()));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    code: FourCC,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::PayloadTooShort {
                type_code: self.code,
                needed: self.pos + n,
                available: self.buf.len(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn skip(&mut self, n: usize) -> Result<(), DecodeError> {
        self.take(n).map(|_| ())
    }

    fn rest(&mut self) -> &'a [u8] {
        let out = &self.buf[self.pos..];
        self.pos = self.buf.len();
        out
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_be_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn i16(&mut self) -> Result<i16, DecodeError> {
        Ok(self.u16()? as i16)
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn i32(&mut self) -> Result<i32, DecodeError> {
        Ok(self.u32()? as i32)
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    /// Reads the version/flags word of a full box and emits both fields.
    fn full_box(&mut self, out: &mut Fields) -> Result<u8, DecodeError> {
        let word = self.u32()?;
        let version = (word >> 24) as u8;
        out.push("version", version);
        out.push("flags", word & 0x00ff_ffff);
        Ok(version)
    }

    /// creationTime, modificationTime, timescale, duration as laid out in
    /// mvhd and mdhd.
    fn times(&mut self, version: u8, out: &mut Fields) -> Result<(), DecodeError> {
        if version == 1 {
            out.push("creationTime", self.u64()?);
            out.push("modificationTime", self.u64()?);
            out.push("timescale", self.u32()?);
            out.push("duration", self.u64()?);
        } else {
            out.push("creationTime", self.u32()?);
            out.push("modificationTime", self.u32()?);
            out.push("timescale", self.u32()?);
            out.push("duration", self.u32()?);
        }
        Ok(())
    }

    /// 3x3 transformation matrix: 16.16 entries except the last column (2.30).
    fn matrix(&mut self) -> Result<String, DecodeError> {
        let mut parts = Vec::with_capacity(9);
        for i in 0..9 {
            let raw = self.i32()?;
            parts.push(if i % 3 == 2 {
                fixed(raw as f64, 30)
            } else {
                fixed_16_16(raw)
            });
        }
        Ok(format!("[{}]", parts.join(",")))
    }
}

fn fixed(raw: f64, frac_bits: i32) -> String {
    // f64 Display never uses exponents and drops trailing zeros.
    format!("{}", raw / 2f64.powi(frac_bits))
}

fn fixed_16_16(raw: i32) -> String {
    fixed(raw as f64, 16)
}

fn fixed_8_8(raw: i16) -> String {
    fixed(raw as f64, 8)
}

/// ISO-639-2/T code packed as three 5-bit letters offset by 0x60.
fn language(packed: u16) -> String {
    let letters = [(packed >> 10) & 0x1f, (packed >> 5) & 0x1f, packed & 0x1f];
    if letters.iter().all(|&l| (1..=26).contains(&l)) {
        letters.iter().map(|&l| (l as u8 + 0x60) as char).collect()
    } else {
        format!("0x{packed:04x}")
    }
}

/// Printable ASCII verbatim, anything else as `0x`-prefixed lowercase hex.
pub(crate) fn bytes_value(bytes: &[u8]) -> String {
    if bytes.iter().all(|b| (0x20..0x7f).contains(b)) {
        String::from_utf8(bytes.to_vec()).expect("ascii")
    } else {
        let mut s = String::with_capacity(2 + bytes.len() * 2);
        s.push_str("0x");
        for b in bytes {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}
