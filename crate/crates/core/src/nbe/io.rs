//! Binary formats for network weights and cached training pairs.
//!
//! Weights: 8-byte magic `TKNBEW\0\0`, `u32` version, `u32` layer count, a
//! `(u32 inputs, u32 outputs, u32 bias count)` triple per layer, then per
//! layer the row-major weights and the biases as little-endian `f64`, then
//! a `u8` flag and the input `(mean, sd)` as `f64`.
//!
//! Pairs: magic `TKNBEP\0\0`, `u32` version, `u64` record count, then per
//! record `u64 m`, `m` replicate `f64`s and the `f64` quantile.

use std::io::{Read, Write};

use super::network::{DeepSetsNetwork, LAYER_SHAPES, N_PARAMS};
use super::prior::TrainingPair;
use crate::{Error, Result};

const WEIGHTS_MAGIC: &[u8; 8] = b"TKNBEW\0\0";
const PAIRS_MAGIC: &[u8; 8] = b"TKNBEP\0\0";
const VERSION: u32 = 1;
/// Bias count per layer; the first layer shares one bias across units.
const BIASES: [usize; 4] = [1, LAYER_SHAPES[1].1, LAYER_SHAPES[2].1, 1];

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact(r)?))
}

pub fn write_weights(net: &DeepSetsNetwork, w: &mut impl Write) -> Result<()> {
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(LAYER_SHAPES.len() as u32).to_le_bytes())?;
    for ((i, o), b) in LAYER_SHAPES.iter().zip(BIASES) {
        for v in [*i as u32, *o as u32, b as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for v in &net.params {
        w.write_all(&v.to_le_bytes())?;
    }
    match net.standardisation {
        Some((m, s)) => {
            w.write_all(&[1u8])?;
            w.write_all(&m.to_le_bytes())?;
            w.write_all(&s.to_le_bytes())?;
        }
        None => {
            w.write_all(&[0u8])?;
            w.write_all(&0f64.to_le_bytes())?;
            w.write_all(&1f64.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_weights(r: &mut impl Read) -> Result<DeepSetsNetwork> {
    if &read_exact::<8>(r)? != WEIGHTS_MAGIC {
        return Err(Error::Format("not a network weights file".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported weights version {version}")));
    }
    let layers = read_u32(r)? as usize;
    if layers != LAYER_SHAPES.len() {
        return Err(Error::Format(format!("expected {} layers, found {layers}", LAYER_SHAPES.len())));
    }
    for ((i, o), b) in LAYER_SHAPES.iter().zip(BIASES) {
        let got = (read_u32(r)? as usize, read_u32(r)? as usize, read_u32(r)? as usize);
        if got != (*i, *o, b) {
            return Err(Error::Format(format!("layer shape {got:?} does not match ({i}, {o}, {b})")));
        }
    }
    let params = (0..N_PARAMS).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
    let flag = read_exact::<1>(r)?[0];
    let (m, s) = (read_f64(r)?, read_f64(r)?);
    Ok(DeepSetsNetwork { params, standardisation: (flag == 1).then_some((m, s)) })
}

pub fn write_pairs(pairs: &[TrainingPair], w: &mut impl Write) -> Result<()> {
    w.write_all(PAIRS_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(pairs.len() as u64).to_le_bytes())?;
    for p in pairs {
        w.write_all(&(p.replicates.len() as u64).to_le_bytes())?;
        for v in &p.replicates {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&p.theta.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_pairs(r: &mut impl Read) -> Result<Vec<TrainingPair>> {
    if &read_exact::<8>(r)? != PAIRS_MAGIC {
        return Err(Error::Format("not a training-pair cache".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported pair cache version {version}")));
    }
    let n = read_u64(r)?;
    let mut out = Vec::new();
    for _ in 0..n {
        let m = read_u64(r)? as usize;
        let replicates = (0..m).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        out.push(TrainingPair { replicates, theta: read_f64(r)? });
    }
    Ok(out)
}
