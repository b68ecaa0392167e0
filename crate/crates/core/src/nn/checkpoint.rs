//! Binary policy checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes            | content                                              |
//! |------------------|------------------------------------------------------|
//! | 8                | magic `PIVOTNET`                                     |
//! | 4 (u32)          | format version, currently 1                          |
//! | 4 (u32)          | number of layer sizes `L`                            |
//! | 4·L (u32)        | layer sizes, input first                             |
//! | 8 (u64)          | parameter count `P`                                  |
//! | 8·P (f64)        | mean-network parameters, per layer: weights row-major (`out × in`), then biases |
//! | 8·out (f64)      | log standard deviations                              |
//! | 8·in (f64)       | observation shift                                    |
//! | 8·in (f64)       | observation scale                                    |
//!
//! No trailing bytes are allowed.

use std::fs;
use std::path::Path;

use super::mlp::{param_count, Mlp};
use super::policy::{GaussianPolicy, ObsNormalizer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PIVOTNET";
pub const VERSION: u32 = 1;

pub fn encode(policy: &GaussianPolicy) -> Vec<u8> {
    let net = policy.mean_net();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
    for &s in net.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    let norm = policy.normalizer();
    for v in net
        .params()
        .iter()
        .chain(policy.log_std())
        .chain(&norm.shift)
        .chain(&norm.scale)
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<GaussianPolicy> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a policy checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version} (expected {VERSION})")));
    }
    let n_sizes = r.u32()? as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(Error::Checkpoint(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| r.u32().map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    let n_params = r.u64()? as usize;
    if sizes.iter().any(|&s| s == 0 || s > 1 << 16) || n_params != param_count(&sizes) {
        return Err(Error::Checkpoint(format!(
            "parameter count {n_params} does not match layer sizes {sizes:?}"
        )));
    }
    let params = r.f64s(n_params)?;
    let (input, output) = (sizes[0], *sizes.last().unwrap());
    let log_std = r.f64s(output)?;
    let shift = r.f64s(input)?;
    let scale = r.f64s(input)?;
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.buf.len())));
    }
    let net = Mlp::from_params(&sizes, params).map_err(|e| Error::Checkpoint(e.to_string()))?;
    GaussianPolicy::new(net, log_std, ObsNormalizer { shift, scale }).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save(policy: &GaussianPolicy, path: &Path) -> Result<()> {
    fs::write(path, encode(policy)).map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
}

pub fn load(path: &Path) -> Result<GaussianPolicy> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let p = GaussianPolicy::pivot(-0.5, &mut rng_from(1, &[])).unwrap();
        let bytes = encode(&p);
        assert_eq!(&bytes[..8], b"PIVOTNET");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
        let sizes: Vec<u32> = bytes[16..32]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(sizes, vec![5, 32, 16, 2]);
        let n = u64::from_le_bytes(bytes[32..40].try_into().unwrap()) as usize;
        assert_eq!(n, p.mean_net().num_params());
        let first = f64::from_le_bytes(bytes[40..48].try_into().unwrap());
        assert_eq!(first, p.mean_net().params()[0]);
        assert_eq!(bytes.len(), 40 + 8 * (n + 2 + 5 + 5));
    }

    #[test]
    fn rejects_corruption() {
        let p = GaussianPolicy::pivot(-0.5, &mut rng_from(1, &[])).unwrap();
        let bytes = encode(&p);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode(&magic).is_err());
        let mut version = bytes.clone();
        version[8] = 9;
        assert!(matches!(decode(&version), Err(Error::Checkpoint(m)) if m.contains("version")));
    }

    proptest! {
        #[test]
        fn round_trip(seed in any::<u64>(), log_std in -3.0f64..1.0) {
            let p = GaussianPolicy::pivot(log_std, &mut rng_from(seed, &[])).unwrap();
            let q = decode(&encode(&p)).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}
