//! Minimal reader/writer for the numpy `.npy` format, version 1.0.
//!
//! Only little-endian `f4`/`f8` and `u1` element types in C order are
//! supported. Values are always surfaced as `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F4,
    F8,
    U1,
}

impl Dtype {
    fn parse(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(Dtype::F4),
            "<f8" => Ok(Dtype::F8),
            "|u1" | "<u1" => Ok(Dtype::U1),
            other => Err(Error::Format(format!("unsupported npy dtype {other:?}"))),
        }
    }

    fn descr(self) -> &'static str {
        match self {
            Dtype::F4 => "<f4",
            Dtype::F8 => "<f8",
            Dtype::U1 => "|u1",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
            Dtype::U1 => 1,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Dtype::F4 | Dtype::F8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    /// Elements in C order.
    pub values: Vec<f64>,
}

pub fn read_npy<R: Read>(reader: &mut R) -> Result<NpyArray> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("reading npy stream: {e}")))?;
    parse_npy(&bytes)
}

pub fn parse_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || bytes[..6] != MAGIC {
        return Err(Error::Format("missing npy magic string".into()));
    }
    if bytes[6..8] != [1, 0] {
        return Err(Error::Format(format!(
            "unsupported npy version {}.{}",
            bytes[6], bytes[7]
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let header_end = 10 + header_len;
    if bytes.len() < header_end {
        return Err(Error::Format("truncated npy header".into()));
    }
    let header = std::str::from_utf8(&bytes[10..header_end])
        .map_err(|_| Error::Format("npy header is not ASCII".into()))?;
    let dict = HeaderDict::parse(header)?;
    if dict.fortran_order {
        return Err(Error::Format(
            "fortran-order npy arrays are not supported".into(),
        ));
    }
    let dtype = Dtype::parse(&dict.descr)?;
    let count: usize = dict.shape.iter().product();
    let payload = &bytes[header_end..];
    if payload.len() != count * dtype.size() {
        return Err(Error::Format(format!(
            "npy payload has {} bytes, shape {:?} needs {}",
            payload.len(),
            dict.shape,
            count * dtype.size()
        )));
    }
    let values = match dtype {
        Dtype::F8 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F4 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::U1 => payload.iter().map(|&b| b as f64).collect(),
    };
    Ok(NpyArray {
        dtype,
        shape: dict.shape,
        values,
    })
}

/// Writes `values` (C order) as a little-endian `f8` array.
pub fn write_npy<W: Write>(writer: &mut W, shape: &[usize], values: &[f64]) -> std::io::Result<()> {
    assert_eq!(
        shape.iter().product::<usize>(),
        values.len(),
        "shape does not match value count"
    );
    writer.write_all(&encode_header(Dtype::F8, shape))?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&buf)
}

fn encode_header(dtype: Dtype, shape: &[usize]) -> Vec<u8> {
    let shape_str = match shape {
        [n] => format!("({n},)"),
        dims => format!(
            "({})",
            dims.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    );
    // magic + version + u16 length + dict + '\n' must be a multiple of ALIGN
    let unpadded = 10 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.push_str(&" ".repeat(pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(10 + dict.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

#[derive(Debug, PartialEq)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl HeaderDict {
    fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Format(format!("malformed npy header ({msg}): {text:?}"));
        let body = text
            .trim()
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| bad("not a dict"))?;

        let mut descr = None;
        let mut fortran_order = None;
        let mut shape = None;
        let mut rest = body.trim_start();
        while !rest.is_empty() {
            let (key, after) = take_quoted(rest).ok_or_else(|| bad("expected key"))?;
            rest = after
                .trim_start()
                .strip_prefix(':')
                .ok_or_else(|| bad("expected ':'"))?
                .trim_start();
            match key {
                "descr" => {
                    let (v, after) = take_quoted(rest).ok_or_else(|| bad("descr"))?;
                    descr = Some(v.to_string());
                    rest = after;
                }
                "fortran_order" => {
                    if let Some(after) = rest.strip_prefix("False") {
                        fortran_order = Some(false);
                        rest = after;
                    } else if let Some(after) = rest.strip_prefix("True") {
                        fortran_order = Some(true);
                        rest = after;
                    } else {
                        return Err(bad("fortran_order"));
                    }
                }
                "shape" => {
                    let inner = rest.strip_prefix('(').ok_or_else(|| bad("shape"))?;
                    let close = inner.find(')').ok_or_else(|| bad("shape"))?;
                    let dims = inner[..close]
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<usize>().map_err(|_| bad("shape entry")))
                        .collect::<Result<Vec<_>>>()?;
                    shape = Some(dims);
                    rest = &inner[close + 1..];
                }
                _ => return Err(bad("unknown key")),
            }
            rest = rest.trim_start();
            rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
        }
        Ok(HeaderDict {
            descr: descr.ok_or_else(|| bad("missing descr"))?,
            fortran_order: fortran_order.ok_or_else(|| bad("missing fortran_order"))?,
            shape: shape.ok_or_else(|| bad("missing shape"))?,
        })
    }
}

fn take_quoted(s: &str) -> Option<(&str, &str)> {
    let quote = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let inner = &s[1..];
    let end = inner.find(quote)?;
    Some((&inner[..end], &inner[end + 1..]))
}
