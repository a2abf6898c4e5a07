//! `CTDE` embedding files: magic `CTDE`, u32 version, u32 count, u32 dim,
//! then per entry a u16 name length, the UTF-8 name and `dim` f32 values,
//! all little-endian.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EmbeddingVector;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CTDE";
pub const CTDE_VERSION: u32 = 1;

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "CTDE",
        reason: reason.into(),
    }
}

/// Which prompt set an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptSet {
    High,
    Low,
}

impl PromptSet {
    fn tag(self) -> &'static str {
        match self {
            Self::High => "H",
            Self::Low => "L",
        }
    }
}

pub fn image_key(sample_id: &str) -> String {
    format!("img:{sample_id}")
}

pub fn patch_key(sample_id: &str, index: usize) -> String {
    format!("patch:{sample_id}:{index}")
}

pub fn prompt_key(set: PromptSet, index: usize) -> String {
    format!("prompt:{}:{index}", set.tag())
}

/// Named embeddings of a common dimension, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    entries: Vec<EmbeddingVector>,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            entries: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[EmbeddingVector] {
        &self.entries
    }

    /// Appends an entry; names must be unique and at most 65535 bytes.
    pub fn push(&mut self, entry: EmbeddingVector) -> Result<()> {
        if entry.dim() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "entry '{}' has dimension {}, set has {}",
                entry.name,
                entry.dim(),
                self.dim
            )));
        }
        if entry.name.len() > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "entry name of {} bytes is too long",
                entry.name.len()
            )));
        }
        if self.index.contains_key(&entry.name) {
            return Err(Error::InvalidParameter(format!("duplicate entry '{}'", entry.name)));
        }
        self.index.insert(entry.name.clone(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&EmbeddingVector> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn image(&self, sample_id: &str) -> Option<&EmbeddingVector> {
        self.get(&image_key(sample_id))
    }

    /// Patch tokens of a sample ordered by index, stopping at the first gap.
    pub fn patches(&self, sample_id: &str) -> Vec<&EmbeddingVector> {
        (0..)
            .map_while(|i| self.get(&patch_key(sample_id, i)))
            .collect()
    }

    /// Prompt embeddings of one set ordered by index, stopping at the first gap.
    pub fn prompts(&self, set: PromptSet) -> Vec<&EmbeddingVector> {
        (0..).map_while(|i| self.get(&prompt_key(set, i))).collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&CTDE_VERSION.to_le_bytes())?;
        let count = u32::try_from(self.entries.len())
            .map_err(|_| Error::InvalidParameter("too many entries".into()))?;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for e in &self.entries {
            w.write_all(&(e.name.len() as u16).to_le_bytes())?;
            w.write_all(e.name.as_bytes())?;
            for &v in &e.values {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| format_err("truncated header"))?;
        if &magic != MAGIC {
            return Err(format_err("bad magic"));
        }
        let mut u32_buf = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut u32_buf)
                .map_err(|_| format_err("truncated header"))?;
            Ok(u32::from_le_bytes(u32_buf))
        };
        let version = read_u32(&mut r)?;
        if version != CTDE_VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let mut set = Self::new(dim).map_err(|_| format_err("zero dimension"))?;
        let mut raw = vec![0u8; dim * 4];
        for i in 0..count {
            let mut len = [0u8; 2];
            r.read_exact(&mut len)
                .map_err(|_| format_err(format!("truncated at entry {i}")))?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            r.read_exact(&mut name)
                .map_err(|_| format_err(format!("truncated name at entry {i}")))?;
            let name = String::from_utf8(name)
                .map_err(|_| format_err(format!("entry {i} name is not UTF-8")))?;
            r.read_exact(&mut raw)
                .map_err(|_| format_err(format!("truncated values at entry {i}")))?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let entry = EmbeddingVector::new(name, values)
                .map_err(|e| format_err(format!("entry {i}: {e}")))?;
            set.push(entry).map_err(|e| format_err(e.to_string()))?;
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(format_err("trailing bytes after last entry"));
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
