//! Binary parameter checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! 8 bytes   magic "PITDNCK1"
//! u32       number of layer sizes L
//! u32 x L   layer sizes
//! u64       initialization seed
//! u64       parameter count P
//! f64 x P   flat parameters (layout of `ParamVector`)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{MlpConfig, NetError, ParamVector};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PITDNCK1";

pub fn write_checkpoint<W: Write>(params: &ParamVector, mut w: W) -> Result<(), NetError> {
    let cfg = params.config();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(cfg.layer_sizes.len() as u32).to_le_bytes())?;
    for &s in &cfg.layer_sizes {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    w.write_all(&cfg.seed.to_le_bytes())?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for &p in params.as_slice() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParamVector, NetError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NetError::BadCheckpoint("wrong magic bytes".into()));
    }
    let n_layers = read_u32(&mut r)? as usize;
    if n_layers > 1024 {
        return Err(NetError::BadCheckpoint(format!("implausible layer count {n_layers}")));
    }
    let mut layer_sizes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        layer_sizes.push(read_u32(&mut r)? as usize);
    }
    let seed = read_u64(&mut r)?;
    let count = read_u64(&mut r)? as usize;
    let config = MlpConfig { layer_sizes, seed };
    config.validate()?;
    if count != config.param_count() {
        return Err(NetError::BadCheckpoint(format!(
            "header declares {count} parameters, layout needs {}",
            config.param_count()
        )));
    }
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    ParamVector::new(config, data)
}

impl ParamVector {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetError> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        write_checkpoint(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetError> {
        let f = std::fs::File::open(path)?;
        read_checkpoint(std::io::BufReader::new(f))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NetError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, NetError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_xavier;

    #[test]
    fn header_bytes() {
        let p = init_xavier(&MlpConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"PITDNCK1");
        assert_eq!(&buf[8..12], &5u32.to_le_bytes());
        assert_eq!(buf.len(), 8 + 4 + 5 * 4 + 8 + 8 + 261 * 8);
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn rejects_truncated_and_corrupt() {
        let p = init_xavier(&MlpConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(NetError::BadCheckpoint(_))));
    }
}
