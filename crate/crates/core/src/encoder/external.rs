//! Container for token vectors precomputed outside this crate.
//!
//! Layout, all integers `u32` little-endian:
//! `b"SPVEC1"`, dim, count, then per excerpt: id byte length, UTF-8 id,
//! token count, and `token_count * dim` row-major `f32` little-endian values.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const VECTOR_MAGIC: &[u8; 6] = b"SPVEC1";

#[derive(Clone, Debug, PartialEq)]
pub struct ExternalVectors {
    pub dim: usize,
    pub by_excerpt: BTreeMap<String, Array2<f32>>,
}

impl ExternalVectors {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            by_excerpt: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Array2<f32>> {
        self.by_excerpt.get(id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(VECTOR_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.by_excerpt.len() as u32).to_le_bytes());
        for (id, m) in &self.by_excerpt {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
            for v in m.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(mut data: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 6];
        read_exact(&mut data, &mut magic)?;
        if &magic != VECTOR_MAGIC {
            return Err(Error::Format("not a SPVEC1 vector file".into()));
        }
        let dim = read_u32(&mut data)? as usize;
        let count = read_u32(&mut data)?;
        let mut vectors = ExternalVectors::new(dim);
        for _ in 0..count {
            let len = read_u32(&mut data)? as usize;
            let mut id = vec![0u8; len];
            read_exact(&mut data, &mut id)?;
            let id = String::from_utf8(id).map_err(|_| Error::Format("excerpt id is not UTF-8".into()))?;
            let tokens = read_u32(&mut data)? as usize;
            let mut values = Vec::with_capacity(tokens * dim);
            for _ in 0..tokens * dim {
                let mut b = [0u8; 4];
                read_exact(&mut data, &mut b)?;
                values.push(f32::from_le_bytes(b));
            }
            let m = Array2::from_shape_vec((tokens, dim), values).expect("length checked");
            if vectors.by_excerpt.insert(id.clone(), m).is_some() {
                return Err(Error::Format(format!("excerpt {id} appears twice")));
            }
        }
        if !data.is_empty() {
            return Err(Error::Format("trailing bytes after last excerpt".into()));
        }
        Ok(vectors)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&data)
    }
}

fn read_exact(data: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    data.read_exact(buf)
        .map_err(|_| Error::Format("unexpected end of file".into()))
}

fn read_u32(data: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(data, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Load vectors for every excerpt of `corpus`, checking coverage and shapes.
pub fn load_external_vectors(path: impl AsRef<Path>, corpus: &Corpus, dim: usize) -> Result<ExternalVectors> {
    let vectors = ExternalVectors::read(path)?;
    check_coverage(&vectors, corpus, dim)?;
    Ok(vectors)
}

pub fn check_coverage(vectors: &ExternalVectors, corpus: &Corpus, dim: usize) -> Result<()> {
    if vectors.dim != dim {
        return Err(Error::DimensionMismatch {
            what: "external vector file".into(),
            expected: dim,
            found: vectors.dim,
        });
    }
    for ex in &corpus.excerpts {
        let m = vectors
            .get(&ex.id)
            .ok_or_else(|| Error::MissingVectors(ex.id.clone()))?;
        if m.nrows() != ex.len() {
            return Err(Error::DimensionMismatch {
                what: format!("token count of excerpt {}", ex.id),
                expected: ex.len(),
                found: m.nrows(),
            });
        }
    }
    Ok(())
}
