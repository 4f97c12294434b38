//! Brute-force vector index: stores one unit vector per passage, answers
//! exact top-k cosine queries, and round-trips through a versioned binary
//! file bit-for-bit.
//!
//! Exactness is deliberate: at desk scale a full scan is affordable and it
//! keeps nondeterminism out of every downstream count. Ties are broken by
//! ascending passage id so the ordering is total.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Passage;
use crate::embedding::{dot, EmbeddingError, EmbeddingProvider, EmbeddingVector};

const MAGIC: &[u8; 4] = b"OVIX";
const FORMAT_VERSION: u32 = 1;

/// One passage retrieved for a query, with its cosine score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub passage_id: String,
    pub score: f64,
}

/// An immutable collection of (passage id, unit vector) pairs sharing one
/// dimension. Queries are read-only and safe to run concurrently.
pub struct VectorIndex {
    dimension: usize,
    entries: Vec<(String, EmbeddingVector)>,
    by_id: HashMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot build an index from an empty passage list")]
    EmptyCorpus,
    #[error("embedding provider failed after {embedded} of {total} passages: {source}")]
    Provider {
        embedded: usize,
        total: usize,
        source: EmbeddingError,
    },
    #[error("duplicate passage id {0:?} in index")]
    DuplicateId(String),
    #[error("entry dimension {got} does not match index dimension {expected}")]
    EntryDimension { expected: usize, got: usize },
    #[error("query dimension {got} does not match index dimension {expected}")]
    QueryDimension { expected: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: not an index file (bad magic) or unsupported version")]
    Version { path: String },
    #[error("{path}: corrupt index file: {message}")]
    Corrupt { path: String, message: String },
}

impl VectorIndex {
    /// Embeds every passage with the provider (in provider-sized batches)
    /// and builds the index. Provider failures abort with a progress report.
    pub fn build(passages: &[Passage], provider: &EmbeddingProvider) -> Result<Self, IndexError> {
        if passages.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let total = passages.len();
        let mut entries = Vec::with_capacity(total);
        for chunk in passages.chunks(provider.config().batch_size) {
            let texts: Vec<String> = chunk.iter().map(|p| p.text.clone()).collect();
            let vectors = provider
                .embed_batch(&texts)
                .map_err(|source| IndexError::Provider {
                    embedded: entries.len(),
                    total,
                    source,
                })?;
            for (passage, vector) in chunk.iter().zip(vectors) {
                entries.push((passage.id.clone(), vector));
            }
        }
        Self::from_entries(provider.dimension(), entries)
    }

    /// Assembles an index from pre-computed vectors, validating id
    /// uniqueness and dimension consistency.
    pub fn from_entries(
        dimension: usize,
        entries: Vec<(String, EmbeddingVector)>,
    ) -> Result<Self, IndexError> {
        if entries.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let mut by_id = HashMap::with_capacity(entries.len());
        for (pos, (id, vector)) in entries.iter().enumerate() {
            if vector.dimension() != dimension {
                return Err(IndexError::EntryDimension {
                    expected: dimension,
                    got: vector.dimension(),
                });
            }
            if by_id.insert(id.clone(), pos).is_some() {
                return Err(IndexError::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            dimension,
            entries,
            by_id,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    /// The stored vector for a passage id, if present.
    pub fn vector(&self, passage_id: &str) -> Option<&EmbeddingVector> {
        self.by_id.get(passage_id).map(|pos| &self.entries[*pos].1)
    }

    /// Exact top-k by cosine: scans every entry, returns min(k, len) hits
    /// in descending score order, equal scores ordered by ascending id.
    pub fn top_k(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<RetrievalHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if query.dimension() != self.dimension {
            return Err(IndexError::QueryDimension {
                expected: self.dimension,
                got: query.dimension(),
            });
        }
        let mut scored: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(pos, (_, vector))| (dot(query.values(), vector.values()), pos))
            .collect();
        let take = k.min(scored.len());
        let by_rank = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.partial_cmp(&a.0)
                .expect("cosine scores are finite")
                .then_with(|| self.entries[a.1].0.cmp(&self.entries[b.1].0))
        };
        if take < scored.len() {
            scored.select_nth_unstable_by(take - 1, by_rank);
            scored.truncate(take);
        }
        scored.sort_unstable_by(by_rank);
        Ok(scored
            .into_iter()
            .map(|(score, pos)| RetrievalHit {
                passage_id: self.entries[pos].0.clone(),
                score,
            })
            .collect())
    }

    /// Writes the index as a versioned binary file: magic, version,
    /// dimension, entry count, then per entry the id (length-prefixed) and
    /// the vector as little-endian f32s. Bit-exact round-trip.
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let io_err = |source| IndexError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC).map_err(io_err)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io_err)?;
        w.write_all(&(self.dimension as u32).to_le_bytes())
            .map_err(io_err)?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())
            .map_err(io_err)?;
        for (id, vector) in &self.entries {
            w.write_all(&(id.len() as u32).to_le_bytes()).map_err(io_err)?;
            w.write_all(id.as_bytes()).map_err(io_err)?;
            for value in vector.values() {
                w.write_all(&value.to_le_bytes()).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)?;
        Ok(())
    }

    /// Reads an index written by [`VectorIndex::save`]. A wrong magic or
    /// version is a version error; short reads and trailing bytes are
    /// corruption errors.
    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let display = path.display().to_string();
        let io_err = |source| IndexError::Io {
            path: display.clone(),
            source,
        };
        let corrupt = |message: &str| IndexError::Corrupt {
            path: display.clone(),
            message: message.to_string(),
        };
        let file = File::open(path).map_err(io_err)?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 4];
        read_fully(&mut r, &mut magic).map_err(|_| corrupt("truncated header"))?;
        if &magic != MAGIC {
            return Err(IndexError::Version { path: display });
        }
        let version = read_u32(&mut r).map_err(|_| corrupt("truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(IndexError::Version { path: display });
        }
        let dimension = read_u32(&mut r).map_err(|_| corrupt("truncated header"))? as usize;
        let count = read_u64(&mut r).map_err(|_| corrupt("truncated header"))? as usize;

        let mut entries = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id_len = read_u32(&mut r).map_err(|_| corrupt("truncated entry"))? as usize;
            let mut id_bytes = vec![0u8; id_len];
            read_fully(&mut r, &mut id_bytes).map_err(|_| corrupt("truncated entry id"))?;
            let id = String::from_utf8(id_bytes).map_err(|_| corrupt("entry id is not UTF-8"))?;
            let mut values = Vec::with_capacity(dimension);
            let mut buf = [0u8; 4];
            for _ in 0..dimension {
                read_fully(&mut r, &mut buf).map_err(|_| corrupt("truncated entry vector"))?;
                values.push(f32::from_le_bytes(buf));
            }
            entries.push((id, EmbeddingVector::from_stored(values)));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(io_err)? != 0 {
            return Err(corrupt("trailing bytes after final entry"));
        }
        Self::from_entries(dimension, entries)
    }
}

fn read_fully<R: Read>(reader: &mut R, buf: &mut [u8]) -> std::io::Result<()> {
    reader.read_exact(buf)
}

fn read_u32<R: Read>(reader: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(reader: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    reader.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
