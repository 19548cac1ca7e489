//! Versioned binary checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    4 bytes  "NSCK"
//! version  u32      = 1
//! kind     u32      0 = bare network, 1 = Gaussian policy
//! n_sizes  u32      number of layer sizes
//! sizes    u32 × n_sizes
//! n_params u64
//! params   f64 × n_params
//! -- kind 1 only --
//! n_std    u32
//! log_std  f64 × n_std
//! ```

use std::fs;
use std::path::Path;

use super::mlp::param_count;
use super::{GaussianPolicy, Mlp};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const KIND_MLP: u32 = 0;
const KIND_POLICY: u32 = 1;

fn encode_mlp(buf: &mut Vec<u8>, kind: u32, net: &Mlp) {
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&kind.to_le_bytes());
    buf.extend_from_slice(&(net.layer_sizes().len() as u32).to_le_bytes());
    for &s in net.layer_sizes() {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn decode_mlp(reader: &mut Reader<'_>, expected_kind: u32, expected_sizes: Option<&[usize]>) -> Result<Mlp> {
    if reader.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = reader.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = reader.u32()?;
    if kind != expected_kind {
        return Err(Error::Checkpoint(format!("expected kind {expected_kind}, found {kind}")));
    }
    let n_sizes = reader.u32()? as usize;
    let sizes: Vec<usize> = (0..n_sizes).map(|_| reader.u32().map(|s| s as usize)).collect::<Result<_>>()?;
    if let Some(expected) = expected_sizes {
        if expected != sizes.as_slice() {
            return Err(Error::Checkpoint(format!(
                "shape mismatch: file has {sizes:?}, expected {expected:?}"
            )));
        }
    }
    let n_params = reader.u64()? as usize;
    if n_sizes < 2 || n_params != param_count(&sizes) {
        return Err(Error::Checkpoint(format!(
            "parameter count {n_params} does not match layer sizes {sizes:?}"
        )));
    }
    let params = reader.f64s(n_params)?;
    Mlp::from_params(&sizes, params)
}

pub fn save_mlp(path: &Path, net: &Mlp) -> Result<()> {
    let mut buf = Vec::new();
    encode_mlp(&mut buf, KIND_MLP, net);
    fs::write(path, buf)?;
    Ok(())
}

/// Loads a network; when `expected_sizes` is given, any other shape is rejected.
pub fn load_mlp(path: &Path, expected_sizes: Option<&[usize]>) -> Result<Mlp> {
    let bytes = fs::read(path)?;
    let mut reader = Reader { bytes: &bytes, pos: 0 };
    let net = decode_mlp(&mut reader, KIND_MLP, expected_sizes)?;
    if reader.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(net)
}

pub fn save_policy(path: &Path, policy: &GaussianPolicy) -> Result<()> {
    let mut buf = Vec::new();
    encode_mlp(&mut buf, KIND_POLICY, &policy.mean_net);
    buf.extend_from_slice(&(policy.log_std.len() as u32).to_le_bytes());
    for s in &policy.log_std {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_policy(path: &Path, expected_sizes: Option<&[usize]>) -> Result<GaussianPolicy> {
    let bytes = fs::read(path)?;
    let mut reader = Reader { bytes: &bytes, pos: 0 };
    let mean_net = decode_mlp(&mut reader, KIND_POLICY, expected_sizes)?;
    let n_std = reader.u32()? as usize;
    if n_std != mean_net.output_dim() {
        return Err(Error::Checkpoint(format!(
            "log_std length {n_std} does not match action dimension {}",
            mean_net.output_dim()
        )));
    }
    let log_std = reader.f64s(n_std)?;
    if reader.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(GaussianPolicy { mean_net, log_std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn policy_round_trip_and_shape_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let policy = GaussianPolicy::new(5, 3, &[7, 6], 0.3, &mut rng);
        save_policy(&path, &policy).unwrap();
        assert_eq!(load_policy(&path, Some(&[5, 7, 6, 3])).unwrap(), policy);
        assert!(matches!(
            load_policy(&path, Some(&[5, 8, 6, 3])),
            Err(Error::Checkpoint(_))
        ));
        // a policy file is not a bare network
        assert!(load_mlp(&path, None).is_err());
    }

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let net = Mlp::from_params(&[1, 1], vec![1.5, -0.25]).unwrap();
        save_mlp(&path, &net).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"NSCK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), 4 + 4 + 4 + 4 + 2 * 4 + 8 + 2 * 8);
        assert_eq!(f64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap()), -0.25);
        assert_eq!(load_mlp(&path, None).unwrap(), net);

        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_mlp(&path, None).is_err());
    }
}
