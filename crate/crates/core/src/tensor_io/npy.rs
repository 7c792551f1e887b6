//! Minimal reader and writer for the NumPy `.npy` container.
//!
//! Only little-endian, C-order arrays of `f4`, `f8`, `i4` and `i8` are handled.
//! Files are always written as format version 1.0 with the header padded so the
//! payload starts on a 64-byte boundary. Versions 2.0 and 3.0 are accepted on read.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
    I32,
    I64,
}

impl DType {
    pub fn descr(self) -> &'static str {
        match self {
            DType::F32 => "<f4",
            DType::F64 => "<f8",
            DType::I32 => "<i4",
            DType::I64 => "<i8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 | DType::I32 => 4,
            DType::F64 | DType::I64 => 8,
        }
    }

    fn parse(descr: &str) -> Result<Self> {
        let (order, kind) = descr.split_at(descr.len().min(1));
        if !matches!(order, "<" | "|" | "=") || (order == "=" && cfg!(target_endian = "big")) {
            return Err(Error::Format(format!("unsupported byte order in descr '{descr}'")));
        }
        match kind {
            "f4" => Ok(DType::F32),
            "f8" => Ok(DType::F64),
            "i4" => Ok(DType::I32),
            "i8" => Ok(DType::I64),
            _ => Err(Error::Format(format!("unsupported dtype '{descr}'"))),
        }
    }
}

/// Typed payload of an npy array.
#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I32(Vec<i32>),
    I64(Vec<i64>),
}

impl NpyData {
    pub fn dtype(&self) -> DType {
        match self {
            NpyData::F32(_) => DType::F32,
            NpyData::F64(_) => DType::F64,
            NpyData::I32(_) => DType::I32,
            NpyData::I64(_) => DType::I64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            NpyData::F32(v) => v.len(),
            NpyData::F64(v) => v.len(),
            NpyData::I32(v) => v.len(),
            NpyData::I64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

/// Renders the header dictionary exactly as `numpy.save` does.
fn header_dict(dtype: DType, shape: &[usize]) -> String {
    let shape_str = match shape {
        [single] => format!("({single},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    )
}

/// Writes `data` with the given shape as an npy v1.0 stream.
pub fn write_npy<W: Write>(w: &mut W, shape: &[usize], data: &NpyData) -> std::io::Result<()> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("shape {shape:?} does not match {} elements", data.len()),
        ));
    }
    let mut header = header_dict(data.dtype(), shape);
    // magic(6) + version(2) + header length(2) + header + '\n'
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');
    let header_len = u16::try_from(header.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "npy header too long"))?;

    w.write_all(MAGIC)?;
    w.write_all(&[1, 0])?;
    w.write_all(&header_len.to_le_bytes())?;
    w.write_all(header.as_bytes())?;

    let mut buf = Vec::with_capacity(data.len() * data.dtype().size());
    match data {
        NpyData::F32(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        NpyData::F64(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        NpyData::I32(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        NpyData::I64(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
    }
    w.write_all(&buf)
}

/// Reads an npy stream. Format problems map to [`Error::Format`]; the caller
/// supplies path context for I/O failures.
pub fn read_npy<R: Read>(r: &mut R) -> Result<NpyArray> {
    let fmt_err = |what: &str| Error::Format(what.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| fmt_err("file too short for npy magic"))?;
    if &magic[..6] != MAGIC {
        return Err(fmt_err("missing npy magic bytes"));
    }
    let header_len = match magic[6] {
        1 => {
            let mut b = [0u8; 2];
            r.read_exact(&mut b)
                .map_err(|_| fmt_err("truncated npy header length"))?;
            u16::from_le_bytes(b) as usize
        }
        2 | 3 => {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)
                .map_err(|_| fmt_err("truncated npy header length"))?;
            u32::from_le_bytes(b) as usize
        }
        v => return Err(Error::Format(format!("unsupported npy version {v}.{}", magic[7]))),
    };
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header).map_err(|_| fmt_err("truncated npy header"))?;
    let header = std::str::from_utf8(&header).map_err(|_| fmt_err("npy header is not UTF-8"))?;
    let parsed = parse_header(header)?;
    if parsed.fortran_order {
        return Err(fmt_err("Fortran-order arrays are not supported"));
    }

    let count = parsed
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| fmt_err("npy shape overflows"))?;
    let nbytes = count
        .checked_mul(parsed.dtype.size())
        .ok_or_else(|| fmt_err("npy shape overflows"))?;
    let mut payload = Vec::new();
    r.take(nbytes as u64)
        .read_to_end(&mut payload)
        .map_err(|e| Error::Format(format!("reading npy payload: {e}")))?;
    if payload.len() != nbytes {
        return Err(Error::Format(format!(
            "npy payload has {} bytes, header implies {nbytes}",
            payload.len()
        )));
    }

    let data = match parsed.dtype {
        DType::F32 => NpyData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::F64 => NpyData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::I32 => NpyData::I32(
            payload
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::I64 => NpyData::I64(
            payload
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    Ok(NpyArray {
        shape: parsed.shape,
        data,
    })
}

#[derive(Debug)]
struct ParsedHeader {
    dtype: DType,
    fortran_order: bool,
    shape: Vec<usize>,
}

#[derive(Debug, PartialEq)]
enum Literal {
    Str(String),
    Bool(bool),
    Int(usize),
    Tuple(Vec<Literal>),
}

/// Parser for the Python dict literal subset used in npy headers.
struct LiteralParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> LiteralParser<'a> {
    fn err(&self, what: &str) -> Error {
        Error::Format(format!("malformed npy header at byte {}: {what}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn value(&mut self) -> Result<Literal> {
        match self.peek() {
            Some(q @ (b'\'' | b'"')) => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos] != q {
                    self.pos += 1;
                }
                if self.pos == self.src.len() {
                    return Err(self.err("unterminated string"));
                }
                let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                self.pos += 1;
                Ok(Literal::Str(s))
            }
            Some(b'(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    if self.peek() == Some(b')') {
                        self.pos += 1;
                        break;
                    }
                    items.push(self.value()?);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {}
                        _ => return Err(self.err("expected ',' or ')' in tuple")),
                    }
                }
                Ok(Literal::Tuple(items))
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                // numpy may print Python 2 longs as `3L`
                if self.src.get(self.pos) == Some(&b'L') {
                    self.pos += 1;
                }
                text.parse()
                    .map(Literal::Int)
                    .map_err(|_| self.err("integer out of range"))
            }
            Some(_) => {
                let rest = &self.src[self.pos..];
                if rest.starts_with(b"True") {
                    self.pos += 4;
                    Ok(Literal::Bool(true))
                } else if rest.starts_with(b"False") {
                    self.pos += 5;
                    Ok(Literal::Bool(false))
                } else {
                    Err(self.err("unexpected token"))
                }
            }
            None => Err(self.err("unexpected end of header")),
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Literal)>> {
        self.expect(b'{')?;
        let mut entries = Vec::new();
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = match self.value()? {
                Literal::Str(s) => s,
                _ => return Err(self.err("dict key must be a string")),
            };
            self.expect(b':')?;
            let value = self.value()?;
            entries.push((key, value));
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(self.err("expected ',' or '}' in dict")),
            }
        }
        Ok(entries)
    }
}

fn parse_header(text: &str) -> Result<ParsedHeader> {
    let mut parser = LiteralParser {
        src: text.as_bytes(),
        pos: 0,
    };
    let entries = parser.dict()?;
    if parser.peek().is_some() {
        return Err(parser.err("trailing characters after header dict"));
    }

    let (mut dtype, mut fortran, mut shape) = (None, None, None);
    for (key, value) in entries {
        match (key.as_str(), value) {
            ("descr", Literal::Str(s)) => dtype = Some(DType::parse(&s)?),
            ("fortran_order", Literal::Bool(b)) => fortran = Some(b),
            ("shape", Literal::Tuple(items)) => {
                let dims = items
                    .into_iter()
                    .map(|it| match it {
                        Literal::Int(d) => Ok(d),
                        _ => Err(Error::Format("shape entries must be integers".into())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
            }
            (k, v) => return Err(Error::Format(format!("unexpected npy header entry '{k}': {v:?}"))),
        }
    }
    match (dtype, fortran, shape) {
        (Some(dtype), Some(fortran_order), Some(shape)) => Ok(ParsedHeader {
            dtype,
            fortran_order,
            shape,
        }),
        _ => Err(Error::Format(
            "npy header must contain descr, fortran_order and shape".into(),
        )),
    }
}
