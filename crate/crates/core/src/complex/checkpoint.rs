//! Binary embedding checkpoints.
//!
//! Layout (little-endian): magic `OLKG`, version `u32`, `d`, `|V|`, `|R|` as
//! `u32`, seed `u64`, config hash `u64`, then entity rows followed by
//! relation rows as row-major `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use super::{ComplexEmbeddings, KgcError};

const MAGIC: &[u8; 4] = b"OLKG";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub dim: usize,
    pub vertices: usize,
    pub relations: usize,
    pub seed: u64,
    pub config_hash: u64,
}

pub(crate) fn write_matrix<W: Write>(w: &mut W, m: &Array2<f64>) -> std::io::Result<()> {
    for &x in m.iter() {
        w.write_f32::<LittleEndian>(x as f32)?;
    }
    Ok(())
}

pub(crate) fn read_matrix<R: Read>(
    r: &mut R,
    rows: usize,
    cols: usize,
) -> std::io::Result<Array2<f64>> {
    let mut buf = vec![0f32; rows * cols];
    r.read_f32_into::<LittleEndian>(&mut buf)?;
    Ok(Array2::from_shape_vec((rows, cols), buf.into_iter().map(f64::from).collect())
        .expect("buffer sized to shape"))
}

pub fn write<W: Write>(
    w: &mut W,
    emb: &ComplexEmbeddings,
    seed: u64,
    config_hash: u64,
) -> Result<(), KgcError> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(emb.dim() as u32)?;
    w.write_u32::<LittleEndian>(emb.vertex_count() as u32)?;
    w.write_u32::<LittleEndian>(emb.relation_count() as u32)?;
    w.write_u64::<LittleEndian>(seed)?;
    w.write_u64::<LittleEndian>(config_hash)?;
    write_matrix(w, emb.entity())?;
    write_matrix(w, emb.relation())?;
    Ok(())
}

pub fn read<R: Read>(r: &mut R) -> Result<(CheckpointHeader, ComplexEmbeddings), KgcError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(KgcError::Checkpoint("not an embedding checkpoint".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(KgcError::Checkpoint(format!("unsupported version {version}")));
    }
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let vertices = r.read_u32::<LittleEndian>()? as usize;
    let relations = r.read_u32::<LittleEndian>()? as usize;
    let seed = r.read_u64::<LittleEndian>()?;
    let config_hash = r.read_u64::<LittleEndian>()?;
    let entity = read_matrix(r, vertices, 2 * dim)?;
    let relation = read_matrix(r, relations, 2 * dim)?;
    let header = CheckpointHeader {
        dim,
        vertices,
        relations,
        seed,
        config_hash,
    };
    Ok((header, ComplexEmbeddings::new(entity, relation)?))
}

pub fn save(
    path: impl AsRef<Path>,
    emb: &ComplexEmbeddings,
    seed: u64,
    config_hash: u64,
) -> Result<(), KgcError> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w, emb, seed, config_hash)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(CheckpointHeader, ComplexEmbeddings), KgcError> {
    read(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_f32() {
        let emb = ComplexEmbeddings::random(5, 2, 3, 1);
        let mut buf = Vec::new();
        write(&mut buf, &emb, 7, 99).unwrap();
        assert_eq!(buf.len(), 4 + 4 * 4 + 16 + 4 * (5 + 2) * 6);
        let (h, back) = read(&mut buf.as_slice()).unwrap();
        assert_eq!((h.dim, h.vertices, h.relations, h.seed, h.config_hash), (3, 5, 2, 7, 99));
        let err = (back.entity() - emb.entity()).mapv(f64::abs).fold(0.0f64, |m, &x| m.max(x));
        assert!(err < 1e-7);
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(read(&mut &b"NOPE0000"[..]).is_err());
    }
}
