//! Binary index snapshots. Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "FRix"
//! version u8       1
//! mode    u8       0 = single, 1 = late
//! dim     u32
//! count   u64      number of facts
//! seed    u64
//! offsets (count+1) x u32   per-fact vector start offsets
//! rows    offsets[count] * dim x f32
//! ids     count x (u16 len + utf-8 bytes)
//! ```
//!
//! The writer is deterministic: identical indexes produce identical
//! bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use factrag_core::retrieval::{IndexMode, VectorIndex};

const MAGIC: &[u8; 4] = b"FRix";
const VERSION: u8 = 1;

pub fn save_index(index: &VectorIndex, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    let mode = match index.mode() {
        IndexMode::Single => 0u8,
        IndexMode::Late => 1u8,
    };
    w.write_all(&[mode])?;
    w.write_all(&(index.dim() as u32).to_le_bytes())?;
    w.write_all(&(index.len() as u64).to_le_bytes())?;
    w.write_all(&index.seed().to_le_bytes())?;
    for off in index.offsets() {
        w.write_all(&off.to_le_bytes())?;
    }
    for x in index.rows() {
        w.write_all(&x.to_le_bytes())?;
    }
    for id in index.ids() {
        let bytes = id.as_bytes();
        if bytes.len() > u16::MAX as usize {
            bail!("fact id too long for snapshot: {} bytes", bytes.len());
        }
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
    }
    Ok(())
}

pub fn load_index(path: &Path) -> Result<VectorIndex> {
    let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).context("read magic")?;
    if &magic != MAGIC {
        bail!("not an index snapshot (bad magic)");
    }
    let version = read_u8(&mut r)?;
    if version != VERSION {
        bail!("unsupported snapshot version {version}");
    }
    let mode = match read_u8(&mut r)? {
        0 => IndexMode::Single,
        1 => IndexMode::Late,
        m => bail!("unknown index mode byte {m}"),
    };
    let dim = read_u32(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    let seed = read_u64(&mut r)?;

    let mut offsets = Vec::with_capacity(count + 1);
    for _ in 0..=count {
        offsets.push(read_u32(&mut r)?);
    }
    let vectors = *offsets.last().unwrap() as usize;
    let mut rows = vec![0f32; vectors * dim];
    {
        let mut buf = [0u8; 4];
        for x in rows.iter_mut() {
            r.read_exact(&mut buf).context("read rows")?;
            *x = f32::from_le_bytes(buf);
        }
    }
    let mut ids = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u16(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).context("read id table")?;
        ids.push(String::from_utf8(buf).context("id not utf-8")?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        bail!("trailing bytes after snapshot");
    }
    VectorIndex::from_parts(mode, dim, seed, ids, rows, offsets)
        .map_err(|e| anyhow::anyhow!("inconsistent snapshot: {e}"))
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use factrag_core::corpus::{Corpus, Fact};
    use factrag_core::mock::MockEmbedder;
    use factrag_core::retrieval::{brute_force_topk, index_corpus, search_topk, search_topk_late};
    use std::fs;

    fn toy_corpus(n: usize) -> Corpus {
        let mut c = Corpus::new("t");
        for i in 0..n {
            c.push(Fact::new(&format!("f{i:03}"), &format!("fact about thing {i} and item {}", i % 7), "t").unwrap())
                .unwrap();
        }
        c
    }

    #[test]
    fn round_trip_single_mode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ix.bin");
        let corpus = toy_corpus(30);
        let emb = MockEmbedder::new(9, 16);
        let index = index_corpus(&corpus, &emb, IndexMode::Single, 9).unwrap();
        save_index(&index, &path).unwrap();
        let loaded = load_index(&path).unwrap();
        assert_eq!(index, loaded);
        // identical search results through the reloaded index
        let a = search_topk(&index, &emb, "thing 4 item", 5).unwrap();
        let b = search_topk(&loaded, &emb, "thing 4 item", 5).unwrap();
        assert_eq!(a, b);
        let oracle = brute_force_topk(&corpus, &emb, "thing 4 item", 5, IndexMode::Single).unwrap();
        assert_eq!(a, oracle);
    }

    #[test]
    fn round_trip_late_mode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ix.bin");
        let corpus = toy_corpus(20);
        let emb = MockEmbedder::new(3, 8);
        let index = index_corpus(&corpus, &emb, IndexMode::Late, 3).unwrap();
        save_index(&index, &path).unwrap();
        let loaded = load_index(&path).unwrap();
        assert_eq!(index, loaded);
        assert_eq!(
            search_topk_late(&index, &emb, "fact about thing", 4).unwrap(),
            search_topk_late(&loaded, &emb, "fact about thing", 4).unwrap()
        );
    }

    #[test]
    fn writer_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        let corpus = toy_corpus(12);
        let emb = MockEmbedder::new(7, 8);
        let index = index_corpus(&corpus, &emb, IndexMode::Single, 7).unwrap();
        save_index(&index, &a).unwrap();
        save_index(&index, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ix.bin");
        fs::write(&path, b"nope").unwrap();
        assert!(load_index(&path).is_err());

        let good = dir.path().join("good.bin");
        let corpus = toy_corpus(5);
        let emb = MockEmbedder::new(1, 4);
        let index = index_corpus(&corpus, &emb, IndexMode::Single, 1).unwrap();
        save_index(&index, &good).unwrap();
        let bytes = fs::read(&good).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_index(&path).is_err());
    }
}
