//! Binary checkpoints of text-to-graph models.
//!
//! Layout (little-endian): magic `OLOW`, version `u32`, mode `u8`, encoder
//! kind `u8` (0 tokens, 1 external), trainable `u8`, d' `u32`, table rows
//! `u32`, config hash `u64`, an embedded graph checkpoint, then the
//! projection `W` and `b` and the token table as `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array1;

use super::{InductiveError, Mode, OpenWorldModel};
use crate::complex::checkpoint::{self as kgc, read_matrix, write_matrix};
use crate::text::{Encoder, Projection, TokenEncoder};

const MAGIC: &[u8; 4] = b"OLOW";
const VERSION: u32 = 1;

pub fn write<W: Write>(
    w: &mut W,
    model: &OpenWorldModel,
    seed: u64,
    config_hash: u64,
) -> Result<(), InductiveError> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u8(match model.mode {
        Mode::Single => 0,
        Mode::Multi => 1,
    })?;
    let (kind, trainable, rows) = match &model.encoder {
        Encoder::Tokens(t) => (0u8, t.trainable as u8, t.table.nrows()),
        Encoder::External { .. } => (1, 0, 0),
    };
    w.write_u8(kind)?;
    w.write_u8(trainable)?;
    w.write_u32::<LittleEndian>(model.encoder.dim() as u32)?;
    w.write_u32::<LittleEndian>(rows as u32)?;
    w.write_u64::<LittleEndian>(config_hash)?;
    kgc::write(w, &model.graph, seed, config_hash)?;
    write_matrix(w, &model.projection.w)?;
    for &x in model.projection.b.iter() {
        w.write_f32::<LittleEndian>(x as f32)?;
    }
    if let Encoder::Tokens(t) = &model.encoder {
        write_matrix(w, &t.table)?;
    }
    Ok(())
}

/// Returns the model and the stored config hash.
pub fn read<R: Read>(r: &mut R) -> Result<(OpenWorldModel, u64), InductiveError> {
    let bad = |m: &str| InductiveError::Checkpoint(m.to_owned());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a model checkpoint"));
    }
    if r.read_u32::<LittleEndian>()? != VERSION {
        return Err(bad("unsupported version"));
    }
    let mode = match r.read_u8()? {
        0 => Mode::Single,
        1 => Mode::Multi,
        _ => return Err(bad("bad mode")),
    };
    let kind = r.read_u8()?;
    let trainable = r.read_u8()? != 0;
    let text_dim = r.read_u32::<LittleEndian>()? as usize;
    let rows = r.read_u32::<LittleEndian>()? as usize;
    let config_hash = r.read_u64::<LittleEndian>()?;
    let (_, graph) = kgc::read(r)?;
    let w = read_matrix(r, text_dim, 2 * graph.dim())?;
    let mut b = vec![0f32; 2 * graph.dim()];
    r.read_f32_into::<LittleEndian>(&mut b)?;
    let projection = Projection::new(w, Array1::from_iter(b.into_iter().map(f64::from)))?;
    let encoder = match kind {
        0 => Encoder::Tokens(TokenEncoder {
            table: read_matrix(r, rows, text_dim)?,
            trainable,
        }),
        1 => Encoder::External { dim: text_dim },
        _ => return Err(bad("bad encoder kind")),
    };
    Ok((OpenWorldModel::new(encoder, projection, graph, mode)?, config_hash))
}

pub fn save(
    path: impl AsRef<Path>,
    model: &OpenWorldModel,
    seed: u64,
    config_hash: u64,
) -> Result<(), InductiveError> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w, model, seed, config_hash)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(OpenWorldModel, u64), InductiveError> {
    read(&mut BufReader::new(File::open(path)?))
}
