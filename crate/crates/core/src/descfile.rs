//! Binary descriptor file (`.adsc`), used both as the mel descriptor cache
//! and as the interchange format for imported embeddings.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "ADSC"
//! 4       4  u32      format version (1)
//! 8       1  u8       kind: 0 = mel, 1 = imported
//! 9       4  u32      dim
//! 13      8  u64      count
//! 21      4*dim*count row-major f32 (IEEE-754, little-endian)
//! ...     rest        UTF-8 text index
//! ```
//!
//! The text index starts with `corpus\t<corpus id>\n`, followed by exactly
//! `count` lines `<row>\t<clip id>\n` or `<row>\t<clip id>\t<source key>\n`,
//! rows numbered from 0 in order. The optional source key is the hex SHA-256
//! content key of a cached mel row.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::corpus::{ClipId, DescriptorKind, DescriptorSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ADSC";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 21;

pub fn encode(set: &DescriptorSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + set.raw_data().len() * 4 + set.len() * 24);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(set.kind().code());
    out.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for v in set.raw_data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(format!("corpus\t{}\n", set.corpus_id()).as_bytes());
    for (row, id) in set.ids().iter().enumerate() {
        let line = match set.source_key(row) {
            Some(key) => format!("{row}\t{id}\t{key}\n"),
            None => format!("{row}\t{id}\n"),
        };
        out.extend_from_slice(line.as_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<DescriptorSet> {
    let bad = |reason: String| Error::format("descriptor file", reason);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic, expected \"ADSC\"".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let kind = DescriptorKind::from_code(bytes[8]).ok_or_else(|| bad(format!("unknown kind {}", bytes[8])))?;
    let dim = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let data_len = (dim as u64)
        .checked_mul(count)
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| n <= (bytes.len() - HEADER_LEN) as u64)
        .ok_or_else(|| bad(format!("truncated: {count} rows of dim {dim} do not fit")))?
        as usize;
    let count = count as usize;
    let data = &bytes[HEADER_LEN..HEADER_LEN + data_len];
    let index = std::str::from_utf8(&bytes[HEADER_LEN + data_len..])
        .map_err(|e| bad(format!("index block is not UTF-8: {e}")))?;

    let mut lines = index.split_terminator('\n');
    let corpus_id = lines
        .next()
        .and_then(|l| l.strip_prefix("corpus\t"))
        .ok_or_else(|| bad("index block must start with a corpus line".into()))?;
    let mut set = DescriptorSet::new(corpus_id, kind, dim)?;
    let mut row_values = vec![0f32; dim];
    for row in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("index block has {row} entries, header says {count}")))?;
        let mut fields = line.split('\t');
        let idx = fields.next().unwrap_or_default();
        if idx.parse::<usize>().ok() != Some(row) {
            return Err(bad(format!("index line {row} has row number {idx:?}")));
        }
        let id = ClipId::new(fields.next().unwrap_or_default())?;
        let key = fields.next().map(str::to_string);
        if fields.next().is_some() {
            return Err(bad(format!("index line {row} has too many fields")));
        }
        let raw = &data[row * dim * 4..(row + 1) * dim * 4];
        for (v, b) in row_values.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().unwrap());
        }
        set.push_keyed(id, &row_values, key)?;
    }
    if lines.next().is_some() {
        return Err(bad(format!("index block has more than {count} entries")));
    }
    Ok(set)
}

pub fn read(path: &Path) -> Result<DescriptorSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format { what, reason } => Error::Format {
            what,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}

/// Writes through a temporary sibling and renames, so readers never observe
/// a partially written file.
pub fn write(set: &DescriptorSet, path: &Path) -> Result<()> {
    let bytes = encode(set);
    let tmp = path.with_extension("adsc.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
