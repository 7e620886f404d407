//! Binary parameter files and per-epoch F1 logs.
//!
//! Parameter layout, all integers little-endian: the 8-byte magic, a u32
//! version, a u32 tensor count, then per tensor a u32 name length, the UTF-8
//! name, a u32 rank, u64 dimensions and the f64 values in row-major order.

use std::io::{Read, Write};

use super::{Dense, Embedding, ModelError, ModelParams, CLASSES, TENSOR_NAMES};
use crate::locality::FEATURE_COUNT;

pub const PARAMS_MAGIC: &[u8; 8] = b"NEAMERPM";
pub const PARAMS_VERSION: u32 = 1;

fn shapes(params: &ModelParams) -> [Vec<u64>; 7] {
    let e = &params.text_embed;
    let dims = |d: &Dense| (d.outputs as u64, d.inputs as u64);
    let (f1o, f1i) = dims(&params.feat1);
    let (f2o, f2i) = dims(&params.feat2);
    let (ho, hi) = dims(&params.head);
    [
        vec![e.buckets as u64, e.dim as u64],
        vec![f1o, f1i],
        vec![f1o],
        vec![f2o, f2i],
        vec![f2o],
        vec![ho, hi],
        vec![ho],
    ]
}

pub fn write_params<W: Write>(mut w: W, params: &ModelParams) -> Result<(), ModelError> {
    params.check_shapes()?;
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    w.write_all(&(TENSOR_NAMES.len() as u32).to_le_bytes())?;
    for ((name, values), dims) in params.tensors().iter().zip(shapes(params)) {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for d in dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for v in values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::BadParams(msg.into())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], ModelError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => bad("truncated file"),
        _ => ModelError::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, ModelError> {
    Ok(u32::from_le_bytes(read_exact::<R, 4>(r)?))
}

/// Guards allocations against corrupted headers.
const MAX_TENSOR_LEN: u64 = 1 << 31;

fn read_tensor<R: Read>(r: &mut R, expected_name: &str) -> Result<(Vec<usize>, Vec<f64>), ModelError> {
    let name_len = read_u32(r)? as usize;
    if name_len > 64 {
        return Err(bad("tensor name too long"));
    }
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name).map_err(|_| bad("truncated file"))?;
    if name != expected_name.as_bytes() {
        return Err(bad(format!(
            "expected tensor {expected_name:?}, found {:?}",
            String::from_utf8_lossy(&name)
        )));
    }
    let rank = read_u32(r)? as usize;
    if rank == 0 || rank > 2 {
        return Err(bad(format!("tensor {expected_name} has rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut len: u64 = 1;
    for _ in 0..rank {
        let d = u64::from_le_bytes(read_exact::<R, 8>(r)?);
        len = len.checked_mul(d).filter(|&l| l <= MAX_TENSOR_LEN).ok_or_else(|| bad("tensor too large"))?;
        dims.push(d as usize);
    }
    let mut values = Vec::with_capacity(len as usize);
    for _ in 0..len {
        let v = f64::from_le_bytes(read_exact::<R, 8>(r)?);
        if !v.is_finite() {
            return Err(bad(format!("non-finite value in {expected_name}")));
        }
        values.push(v);
    }
    Ok((dims, values))
}

fn dense(w: (Vec<usize>, Vec<f64>), b: (Vec<usize>, Vec<f64>), name: &str) -> Result<Dense, ModelError> {
    match (&w.0[..], &b.0[..]) {
        (&[outputs, inputs], &[bias_len]) if bias_len == outputs => Ok(Dense {
            inputs,
            outputs,
            weights: w.1,
            bias: b.1,
        }),
        _ => Err(bad(format!("inconsistent shapes for layer {name}"))),
    }
}

pub fn read_params<R: Read>(mut r: R) -> Result<ModelParams, ModelError> {
    if &read_exact::<R, 8>(&mut r)? != PARAMS_MAGIC {
        return Err(bad("not a parameter file"));
    }
    let version = read_u32(&mut r)?;
    if version != PARAMS_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    if read_u32(&mut r)? as usize != TENSOR_NAMES.len() {
        return Err(bad("unexpected tensor count"));
    }
    let mut t: Vec<(Vec<usize>, Vec<f64>)> = Vec::with_capacity(TENSOR_NAMES.len());
    for name in TENSOR_NAMES {
        t.push(read_tensor(&mut r, name)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes"));
    }

    let mut it = t.into_iter();
    let mut next = || it.next().expect("one entry per tensor name");
    let (edims, table) = next();
    let text_embed = match edims[..] {
        [buckets, dim] => Embedding { buckets, dim, table },
        _ => return Err(bad("text_embed must have rank 2")),
    };
    let feat1 = dense(next(), next(), "feat1")?;
    let feat2 = dense(next(), next(), "feat2")?;
    let head = dense(next(), next(), "head")?;
    if feat1.inputs != FEATURE_COUNT || head.outputs != CLASSES {
        return Err(bad("unexpected input or output width"));
    }
    let params = ModelParams {
        text_embed,
        feat1,
        feat2,
        head,
    };
    params.check_shapes()?;
    Ok(params)
}

/// `epoch,f1` rows, epoch 0 being the initialization.
pub fn write_f1_log<W: Write>(writer: W, epoch_f1: &[f64]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "f1"])?;
    for (epoch, f1) in epoch_f1.iter().enumerate() {
        w.write_record([epoch.to_string(), f1.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_f1_log<R: Read>(reader: R) -> Result<Vec<f64>, csv::Error> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize::<(usize, f64)>() {
        out.push(rec?.1);
    }
    Ok(out)
}
