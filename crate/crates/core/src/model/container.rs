//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     4 bytes  "PSYM"
//! version   u16
//! kind      u8       0 = ngsvm, 1 = ccnn, 2 = seqnet
//! hlen      u32      header length
//! header    hlen     UTF-8 JSON
//! ntensors  u32
//! tensor*   name_len u16, name, trainable u8, ndim u8, dims u32*ndim,
//!           encoding u8 (0 = dense: f64 * prod(dims);
//!                        1 = sparse: nnz u32, indices u32 * nnz, values f64 * nnz)
//! ```

use crate::neural::Tensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PSYM";
pub const VERSION: u16 = 1;

/// Largest tensor (in entries) the decoder will allocate.
pub const MAX_TENSOR_LEN: usize = 1 << 26;

const DENSE: u8 = 0;
const SPARSE: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: u8,
    pub header: Vec<u8>,
    pub tensors: Vec<Tensor>,
}

fn err(msg: impl Into<String>) -> Error {
    Error::Container(msg.into())
}

impl Container {
    /// Tensors with at most half their entries non-zero are stored sparse
    /// when `sparse_ok` is set.
    pub fn encode(&self, sparse_ok: bool) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind);
        out.extend_from_slice(&(self.header.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.trainable as u8);
            out.push(t.shape.len() as u8);
            for d in &t.shape {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            let nnz = t.data.iter().filter(|v| **v != 0.0 || v.is_sign_negative()).count();
            if sparse_ok && nnz * 2 <= t.data.len() {
                out.push(SPARSE);
                out.extend_from_slice(&(nnz as u32).to_le_bytes());
                let nz = || t.data.iter().enumerate().filter(|(_, v)| **v != 0.0 || v.is_sign_negative());
                for (i, _) in nz() {
                    out.extend_from_slice(&(i as u32).to_le_bytes());
                }
                for (_, v) in nz() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            } else {
                out.push(DENSE);
                for v in &t.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Container> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(err("not a model file (bad magic)"));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(err(format!("unsupported container version {version}")));
        }
        let kind = r.u8()?;
        let hlen = r.u32()? as usize;
        let header = r.take(hlen)?.to_vec();
        let n = r.u32()? as usize;
        let mut tensors = Vec::new();
        for _ in 0..n {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| err("tensor name is not UTF-8"))?
                .to_string();
            let trainable = match r.u8()? {
                0 => false,
                1 => true,
                b => return Err(err(format!("bad trainable flag {b}"))),
            };
            let ndim = r.u8()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            let mut len: usize = 1;
            for _ in 0..ndim {
                let d = r.u32()? as usize;
                len = len.checked_mul(d).ok_or_else(|| err(format!("tensor {name} is too large")))?;
                shape.push(d);
            }
            if len > MAX_TENSOR_LEN {
                return Err(err(format!("tensor {name} has {len} entries, limit {MAX_TENSOR_LEN}")));
            }
            let data = match r.u8()? {
                DENSE => {
                    let raw = r.take(len.checked_mul(8).ok_or_else(|| err("tensor too large"))?)?;
                    raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
                }
                SPARSE => {
                    let nnz = r.u32()? as usize;
                    if nnz > len {
                        return Err(err(format!("tensor {name}: {nnz} entries exceed size {len}")));
                    }
                    r.ensure(nnz * 12)?;
                    let idx: Vec<usize> = (0..nnz).map(|_| r.u32().map(|i| i as usize)).collect::<Result<_>>()?;
                    let mut data = vec![0.0; len];
                    for &i in &idx {
                        let v = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
                        *data
                            .get_mut(i)
                            .ok_or_else(|| err(format!("tensor {name}: index {i} out of range")))? = v;
                    }
                    data
                }
                e => return Err(err(format!("unknown tensor encoding {e}"))),
            };
            tensors.push(Tensor {
                name,
                shape,
                data,
                trainable,
            });
        }
        if r.pos != bytes.len() {
            return Err(err(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Container { kind, header, tensors })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn ensure(&self, n: usize) -> Result<()> {
        if self.bytes.len() - self.pos < n {
            return Err(err(format!("truncated at byte {}", self.pos)));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.ensure(n)?;
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Container {
        Container {
            kind: 2,
            header: br#"{"a":1}"#.to_vec(),
            tensors: vec![
                Tensor {
                    name: "w".into(),
                    shape: vec![2, 3],
                    data: vec![1.0, -0.0, 0.0, 0.0, f64::MIN_POSITIVE, 0.0],
                    trainable: true,
                },
                Tensor {
                    name: "e".into(),
                    shape: vec![2],
                    data: vec![0.5, 0.25],
                    trainable: false,
                },
            ],
        }
    }

    #[test]
    fn round_trips_dense_and_sparse() {
        let c = sample();
        for sparse in [false, true] {
            let bytes = c.encode(sparse);
            let back = Container::decode(&bytes).unwrap();
            assert_eq!(back.encode(sparse), bytes);
            assert!(back.tensors[0].data[1].is_sign_negative());
        }
        assert!(c.encode(true).len() < c.encode(false).len());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().encode(true);
        assert!(Container::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Container::decode(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(Container::decode(&long).is_err());
    }

    proptest! {
        #[test]
        fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let _ = Container::decode(&bytes);
        }
    }
}
