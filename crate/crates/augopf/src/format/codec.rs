use augopf_core::digest::{digest_bytes, Digest};
use augopf_core::nn::Standardizer;

use super::FormatError;

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 8], version: u32) -> Self {
        let mut w = Self::default();
        w.bytes(magic);
        w.u32(version);
        w
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }

    /// Length-prefixed vector.
    pub fn vec(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        self.f64s(vs);
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    pub fn scaler(&mut self, s: &Standardizer) {
        self.vec(&s.mean);
        self.vec(&s.std);
    }

    pub fn finish(mut self) -> Vec<u8> {
        let d = digest_bytes(&self.buf);
        self.buf.extend_from_slice(&d.0);
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic, version and trailing digest.
    pub fn open(
        bytes: &'a [u8],
        magic: &[u8; 8],
        name: &'static str,
        version: u32,
    ) -> Result<Self, FormatError> {
        if bytes.len() < 8 || &bytes[..8] != magic {
            return Err(FormatError::BadMagic { expected: name });
        }
        if bytes.len() < 12 + 32 {
            return Err(FormatError::Truncated(bytes.len()));
        }
        let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if found != version {
            return Err(FormatError::Version {
                expected: version,
                found,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 32);
        if digest_bytes(body) != Digest(tail.try_into().unwrap()) {
            return Err(FormatError::Digest);
        }
        Ok(Self { bytes: body, pos: 12 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(FormatError::Truncated(self.bytes.len())),
        }
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn usize(&mut self) -> Result<usize, FormatError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| FormatError::Invalid {
            field: "length",
            detail: v.to_string(),
        })
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        if n.saturating_mul(8) > self.bytes.len() - self.pos {
            return Err(FormatError::Truncated(self.bytes.len()));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn vec(&mut self) -> Result<Vec<f64>, FormatError> {
        let n = self.usize()?;
        self.f64s(n)
    }

    pub fn str(&mut self) -> Result<String, FormatError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| FormatError::Invalid {
            field: "string",
            detail: e.to_string(),
        })
    }

    pub fn scaler(&mut self) -> Result<Standardizer, FormatError> {
        let mean = self.vec()?;
        let std = self.vec()?;
        if mean.len() != std.len() || std.iter().any(|s| !(*s != 0.0 && s.is_finite())) {
            return Err(FormatError::Invalid {
                field: "scaler",
                detail: format!("{} means, {} scales", mean.len(), std.len()),
            });
        }
        Ok(Standardizer { mean, std })
    }

    pub fn end(self) -> Result<(), FormatError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(FormatError::Trailing(n)),
        }
    }
}
