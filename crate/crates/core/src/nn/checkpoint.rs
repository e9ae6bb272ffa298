//! Binary parameter files: magic, format version, architecture hash, then
//! little-endian f64 tensors.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::network::{Network, ParameterSet};
use super::spec::NetworkSpec;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EDGN";
pub const FORMAT_VERSION: u32 = 1;

/// First 8 bytes of the SHA-256 of the architecture's JSON form.
pub fn spec_hash(spec: &NetworkSpec) -> u64 {
    let json = serde_json::to_vec(spec).expect("spec serializes");
    let digest = Sha256::digest(&json);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Writes one or more parameter sets of the same network.
pub fn write_params<W: Write>(out: &mut W, net: &Network, sets: &[&ParameterSet]) -> Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&spec_hash(net.spec()).to_le_bytes())?;
    out.write_all(&(sets.len() as u64).to_le_bytes())?;
    for set in sets {
        for tensor in [&set.weights, &set.stats] {
            out.write_all(&(tensor.len() as u64).to_le_bytes())?;
            for v in tensor.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_params<R: Read>(input: &mut R, net: &Network) -> Result<Vec<ParameterSet>> {
    let mut head = [0u8; 8];
    input
        .read_exact(&mut head)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    if head[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(head[4..].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    if read_u64(input)? != spec_hash(net.spec()) {
        return Err(Error::Checkpoint("architecture does not match".into()));
    }
    let count = read_u64(input)?;
    let mut sets = Vec::new();
    for _ in 0..count {
        let mut tensors = Vec::with_capacity(2);
        for expected in [net.n_weights(), net.n_stats()] {
            let n = read_u64(input)? as usize;
            if n != expected {
                return Err(Error::Checkpoint(format!("tensor length {n}, expected {expected}")));
            }
            let mut buf = vec![0u8; n * 8];
            input
                .read_exact(&mut buf)
                .map_err(|e| Error::Checkpoint(format!("truncated tensor: {e}")))?;
            tensors.push(
                buf.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect::<Vec<_>>(),
            );
        }
        let stats = tensors.pop().expect("two tensors");
        let weights = tensors.pop().expect("two tensors");
        sets.push(ParameterSet { weights, stats });
    }
    Ok(sets)
}

pub fn save(path: &Path, net: &Network, sets: &[&ParameterSet]) -> Result<()> {
    let mut buf = Vec::new();
    write_params(&mut buf, net, sets)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path, net: &Network) -> Result<Vec<ParameterSet>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)?;
    read_params(&mut bytes.as_slice(), net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::{actor_spec, WidthPreset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bitwise() {
        let net = Network::new(actor_spec(3, 3, 3, 3, WidthPreset::Desk).unwrap()).unwrap();
        let a = net.init(&mut ChaCha8Rng::seed_from_u64(1));
        let b = net.init(&mut ChaCha8Rng::seed_from_u64(2));
        let mut buf = Vec::new();
        write_params(&mut buf, &net, &[&a, &b]).unwrap();
        let back = read_params(&mut buf.as_slice(), &net).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn rejects_other_architecture_and_corruption() {
        let net = Network::new(actor_spec(3, 3, 3, 3, WidthPreset::Desk).unwrap()).unwrap();
        let other = Network::new(actor_spec(3, 3, 3, 5, WidthPreset::Desk).unwrap()).unwrap();
        let a = net.init(&mut ChaCha8Rng::seed_from_u64(1));
        let mut buf = Vec::new();
        write_params(&mut buf, &net, &[&a]).unwrap();
        assert!(matches!(read_params(&mut buf.as_slice(), &other), Err(Error::Checkpoint(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_params(&mut bad.as_slice(), &net).is_err());
        let short = &buf[..buf.len() - 3];
        assert!(read_params(&mut &short[..], &net).is_err());
    }
}
