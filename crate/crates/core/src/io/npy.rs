//! Reader and writer for the `.npy` version 1.0 array layout, restricted to
//! C-order little-endian `float32` and `uint8` payloads.
//!
//! Layout: magic `\x93NUMPY`, version bytes `1 0`, a little-endian `u16` header
//! length, then an ASCII dict literal padded with spaces and a final newline so
//! the whole preamble is a multiple of 64 bytes, then the raw payload.

use thiserror::Error;

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;
const PREAMBLE: usize = MAGIC.len() + 2 + 2;

#[derive(Debug, Error, PartialEq)]
pub enum NpyError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}.{1}")]
    BadVersion(u8, u8),
    #[error("unsupported dtype `{0}`")]
    BadDtype(String),
    #[error("fortran-ordered arrays are not supported")]
    FortranOrder,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("payload has {got} bytes, shape requires {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("data length {len} does not match shape {shape:?}")]
    ShapeMismatch { len: usize, shape: Vec<usize> },
    #[error("expected {expected} array, found {found}")]
    WrongDtype { expected: &'static str, found: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::U8 => "|u1",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "float32",
            Dtype::U8 => "uint8",
        }
    }

    fn from_descr(descr: &str) -> Result<Self, NpyError> {
        match descr {
            "<f4" => Ok(Dtype::F32),
            "|u1" | "<u1" | ">u1" | "u1" => Ok(Dtype::U8),
            other => Err(NpyError::BadDtype(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl ArrayData {
    pub fn dtype(&self) -> Dtype {
        match self {
            ArrayData::F32(_) => Dtype::F32,
            ArrayData::U8(_) => Dtype::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A row-major array with its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    shape: Vec<usize>,
    data: ArrayData,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: ArrayData) -> Result<Self, NpyError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NpyError::ShapeMismatch { len: data.len(), shape });
        }
        Ok(Self { shape, data })
    }

    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, NpyError> {
        Self::new(shape, ArrayData::F32(data))
    }

    pub fn u8(shape: Vec<usize>, data: Vec<u8>) -> Result<Self, NpyError> {
        Self::new(shape, ArrayData::U8(data))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn as_f32(&self) -> Result<&[f32], NpyError> {
        match &self.data {
            ArrayData::F32(v) => Ok(v),
            other => Err(NpyError::WrongDtype { expected: "float32", found: other.dtype().name() }),
        }
    }

    pub fn as_u8(&self) -> Result<&[u8], NpyError> {
        match &self.data {
            ArrayData::U8(v) => Ok(v),
            other => Err(NpyError::WrongDtype { expected: "uint8", found: other.dtype().name() }),
        }
    }
}

fn shape_literal(shape: &[usize]) -> String {
    match shape {
        [] => "()".to_string(),
        [n] => format!("({n},)"),
        dims => {
            let parts: Vec<String> = dims.iter().map(usize::to_string).collect();
            format!("({})", parts.join(", "))
        }
    }
}

/// Serializes `array` to `.npy` bytes.
pub fn write_array(array: &NpyArray) -> Vec<u8> {
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        array.dtype().descr(),
        shape_literal(&array.shape)
    );
    let unpadded = PREAMBLE + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', padding));
    dict.push('\n');

    let payload = array.shape.iter().product::<usize>() * array.dtype().size();
    let mut out = Vec::with_capacity(PREAMBLE + dict.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    match &array.data {
        ArrayData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        ArrayData::U8(v) => out.extend_from_slice(v),
    }
    out
}

/// Minimal reader for the header dict literal written by numpy and by [`write_array`].
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn parse_header(text: &str) -> Result<HeaderDict, NpyError> {
    let bad = |m: &str| NpyError::BadHeader(m.to_string());
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| bad("header is not a dict literal"))?;

    let mut descr = None;
    let mut fortran_order = None;
    let mut shape = None;
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let quote = rest.chars().next().filter(|c| *c == '\'' || *c == '"').ok_or_else(|| bad("expected quoted key"))?;
        let end = rest[1..].find(quote).ok_or_else(|| bad("unterminated key"))? + 1;
        let key = &rest[1..end];
        rest = rest[end + 1..].trim_start().strip_prefix(':').ok_or_else(|| bad("expected ':'"))?.trim_start();
        match key {
            "descr" => {
                let q = rest.chars().next().filter(|c| *c == '\'' || *c == '"').ok_or_else(|| bad("descr must be a string"))?;
                let end = rest[1..].find(q).ok_or_else(|| bad("unterminated descr"))? + 1;
                descr = Some(rest[1..end].to_string());
                rest = &rest[end + 1..];
            }
            "fortran_order" => {
                if let Some(r) = rest.strip_prefix("False") {
                    fortran_order = Some(false);
                    rest = r;
                } else if let Some(r) = rest.strip_prefix("True") {
                    fortran_order = Some(true);
                    rest = r;
                } else {
                    return Err(bad("fortran_order must be True or False"));
                }
            }
            "shape" => {
                let inner_end = rest.find(')').ok_or_else(|| bad("unterminated shape"))?;
                let inner = rest.strip_prefix('(').ok_or_else(|| bad("shape must be a tuple"))?;
                let dims: Result<Vec<usize>, _> = inner[..inner_end - 1]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim_end_matches('L').parse::<usize>())
                    .collect();
                shape = Some(dims.map_err(|_| bad("shape entries must be integers"))?);
                rest = &rest[inner_end + 1..];
            }
            other => return Err(NpyError::BadHeader(format!("unexpected key `{other}`"))),
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

/// Parses `.npy` bytes written by [`write_array`] or numpy (format 1.0).
pub fn read_array(bytes: &[u8]) -> Result<NpyArray, NpyError> {
    if bytes.len() < PREAMBLE || &bytes[..6] != MAGIC {
        return Err(NpyError::BadMagic);
    }
    let (major, minor) = (bytes[6], bytes[7]);
    if (major, minor) != (1, 0) {
        return Err(NpyError::BadVersion(major, minor));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let header_end = PREAMBLE + header_len;
    let header = bytes
        .get(PREAMBLE..header_end)
        .ok_or_else(|| NpyError::BadHeader("truncated header".into()))?;
    let header = std::str::from_utf8(header).map_err(|_| NpyError::BadHeader("header is not ASCII".into()))?;
    let dict = parse_header(header)?;
    if dict.fortran_order {
        return Err(NpyError::FortranOrder);
    }
    let dtype = Dtype::from_descr(&dict.descr)?;
    let count: usize = dict.shape.iter().product();
    let payload = &bytes[header_end..];
    let expected = count * dtype.size();
    if payload.len() != expected {
        return Err(NpyError::PayloadLength { expected, got: payload.len() });
    }
    let data = match dtype {
        Dtype::F32 => ArrayData::F32(
            payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect(),
        ),
        Dtype::U8 => ArrayData::U8(payload.to_vec()),
    };
    NpyArray::new(dict.shape, data)
}
