//! Checkpoint persistence.
//!
//! Layout: magic bytes `CKBC1\n`, one JSON header line
//! `{dim, n_entities, n_relations, entity_names, relation_names}`, then four
//! contiguous little-endian f64 arrays in order entity_re, entity_im,
//! relation_re, relation_im, row-major. Round-trips are bitwise exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::vocab::Vocabulary;

use super::{ModelError, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"CKBC1\n";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dim: usize,
    n_entities: usize,
    n_relations: usize,
    entity_names: Vec<String>,
    relation_names: Vec<String>,
}

fn write_array<W: Write>(w: &mut W, data: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(8 * 8192.min(data.len()));
    for chunk in data.chunks(8192) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_array<R: Read>(r: &mut R, len: usize, what: &str) -> Result<Vec<f64>, ModelError> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| ModelError::Format(format!("truncated {what} array")))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    let vocab = params.vocabulary();
    let header = Header {
        dim: params.dim(),
        n_entities: vocab.n_entities(),
        n_relations: vocab.n_relations(),
        entity_names: vocab.entity_names().to_vec(),
        relation_names: vocab.relation_names().to_vec(),
    };
    serde_json::to_writer(&mut w, &header)
        .map_err(|e| ModelError::Format(format!("cannot encode header: {e}")))?;
    w.write_all(b"\n")?;
    for table in params.tables() {
        write_array(&mut w, table.data())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, ModelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)
        .map_err(|_| ModelError::Format("file too short for magic bytes".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(ModelError::Format("bad magic bytes".into()));
    }
    let mut header_line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)
            .map_err(|_| ModelError::Format("truncated header".into()))?;
        if byte[0] == b'\n' {
            break;
        }
        header_line.push(byte[0]);
        if header_line.len() > 64 * 1024 * 1024 {
            return Err(ModelError::Format("header line too long".into()));
        }
    }
    let header: Header = serde_json::from_slice(&header_line)
        .map_err(|e| ModelError::Format(format!("bad header: {e}")))?;
    if header.entity_names.len() != header.n_entities {
        return Err(ModelError::Format(format!(
            "header claims {} entities but lists {} names",
            header.n_entities,
            header.entity_names.len()
        )));
    }
    if header.relation_names.len() != header.n_relations {
        return Err(ModelError::Format(format!(
            "header claims {} relations but lists {} names",
            header.n_relations,
            header.relation_names.len()
        )));
    }
    if header.dim == 0 {
        return Err(ModelError::Format("dim must be >= 1".into()));
    }

    let ne = header.n_entities * header.dim;
    let nr = header.n_relations * header.dim;
    let entity_re = read_array(&mut r, ne, "entity_re")?;
    let entity_im = read_array(&mut r, ne, "entity_im")?;
    let relation_re = read_array(&mut r, nr, "relation_re")?;
    let relation_im = read_array(&mut r, nr, "relation_im")?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(ModelError::Format("trailing bytes after arrays".into()));
    }

    let mut vocab = Vocabulary::new();
    for name in &header.relation_names {
        vocab.intern_relation(name);
    }
    if vocab.n_relations() != header.n_relations {
        return Err(ModelError::Format(
            "relation names must be unique and include the canonical five".into(),
        ));
    }
    for name in &header.entity_names {
        vocab.intern_entity(name);
    }
    if vocab.n_entities() != header.n_entities {
        return Err(ModelError::Format("duplicate entity names in header".into()));
    }

    ModelParams::from_parts(vocab, header.dim, entity_re, entity_im, relation_re, relation_im)
        .map_err(|e| ModelError::Format(format!("inconsistent checkpoint: {e}")))
}
