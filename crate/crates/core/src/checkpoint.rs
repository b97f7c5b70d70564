//! Versioned checkpoint container shared by the classifier and the detector.
//!
//! ```text
//! VSQCKPT1
//! key=value            (any number of lines)
//!                      (blank line)
//! tensor name=<n> dtype=f32 shape=a,b,c
//! <little-endian payload>
//! tensor ...
//! ```

use std::fs;
use std::path::Path;

use vertseq_nn::{ParamSet, Scalar, Tensor};

use crate::error::{io_err, Error, Result};

pub const CHECKPOINT_MAGIC: &str = "VSQCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    /// Ordered `key=value` metadata.
    pub meta: Vec<(String, String)>,
    pub params: ParamSet<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(params: ParamSet<T>) -> Self {
        Self {
            meta: Vec::new(),
            params,
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Looks up and parses a required metadata value.
    pub fn require<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Checkpoint(format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::Checkpoint(format!("bad value `{raw}` for `{key}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("{CHECKPOINT_MAGIC}\n").into_bytes();
        for (k, v) in &self.meta {
            out.extend_from_slice(format!("{k}={v}\n").as_bytes());
        }
        out.push(b'\n');
        for (name, t) in self.params.iter() {
            let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            out.extend_from_slice(format!("tensor name={name} dtype={} shape={}\n", T::DTYPE, shape.join(",")).as_bytes());
            for &v in t.data() {
                v.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut pos = 0;
        let next_line = |pos: &mut usize| -> Result<String> {
            let rest = &bytes[*pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("unterminated text line".into()))?;
            let line = std::str::from_utf8(&rest[..end])
                .map_err(|_| bad("text line is not UTF-8".into()))?
                .to_string();
            *pos += end + 1;
            Ok(line)
        };
        if next_line(&mut pos)? != CHECKPOINT_MAGIC {
            return Err(bad(format!("missing `{CHECKPOINT_MAGIC}` magic")));
        }
        let mut meta = Vec::new();
        loop {
            let line = next_line(&mut pos)?;
            if line.is_empty() {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("metadata line `{line}` lacks `=`")))?;
            meta.push((k.to_string(), v.to_string()));
        }
        let mut params = ParamSet::new();
        while pos < bytes.len() {
            let line = next_line(&mut pos)?;
            let mut fields = line.split(' ');
            if fields.next() != Some("tensor") {
                return Err(bad(format!("expected tensor record, found `{line}`")));
            }
            let (mut name, mut dtype, mut shape) = (None, None, None);
            for f in fields {
                match f.split_once('=') {
                    Some(("name", v)) => name = Some(v.to_string()),
                    Some(("dtype", v)) => dtype = Some(v.to_string()),
                    Some(("shape", v)) => {
                        shape = v
                            .split(',')
                            .map(|d| d.parse::<usize>().ok())
                            .collect::<Option<Vec<_>>>()
                    }
                    _ => return Err(bad(format!("bad tensor field `{f}`"))),
                }
            }
            let name = name.ok_or_else(|| bad(format!("tensor without name: `{line}`")))?;
            let shape = shape.ok_or_else(|| bad(format!("tensor `{name}` has a bad shape")))?;
            if dtype.as_deref() != Some(T::DTYPE) {
                return Err(bad(format!("tensor `{name}` has dtype {dtype:?}, expected {}", T::DTYPE)));
            }
            let n: usize = shape.iter().product();
            let len = n * T::BYTES;
            if bytes.len() - pos < len {
                return Err(Error::DataLength {
                    expected_bytes: len,
                    found_bytes: bytes.len() - pos,
                });
            }
            let data = bytes[pos..pos + len].chunks_exact(T::BYTES).map(T::read_le).collect();
            pos += len;
            if params.get(&name).is_ok() {
                return Err(bad(format!("duplicate tensor `{name}`")));
            }
            params.push(name, Tensor::from_vec(&shape, data)?);
        }
        Ok(Self { meta, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes)
    }

    /// Checks that every tensor in `expected` is present with the same shape.
    pub fn check_layout(&self, expected: &ParamSet<T>) -> Result<()> {
        if self.params.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.params.len()
            )));
        }
        for ((n, t), (en, et)) in self.params.iter().zip(expected.iter()) {
            if n != en || t.shape() != et.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{n}` {:?} does not match `{en}` {:?}",
                    t.shape(),
                    et.shape()
                )));
            }
        }
        Ok(())
    }
}
