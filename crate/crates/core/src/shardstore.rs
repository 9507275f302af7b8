//! Slices of the coordinate space and the on-disk shard format.
//!
//! A shard file is laid out as follows, all integers big-endian:
//!
//! ```text
//! magic    "EMSCR1\0"                 7 bytes
//! version  0x01                       1 byte
//! digest   SHA-256 of the param file  32 bytes
//! node     u64
//! slice    u64 block count, then per block:
//!            block u16, u64 free count, free positions u16 each,
//!            u64 base count, bases u128 each
//! entries  u64 count, then per entry: block u16, b u128, symbol u16
//! ```
//!
//! Entries are sorted by `(block, b)`. Bases carry digit 0 at every free
//! position.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::field::Fe;
use crate::indexspace::{pow3, BIndex};

pub const MAGIC: &[u8; 7] = b"EMSCR1\0";
pub const VERSION: u8 = 0x01;

/// SHA-256 of the canonical parameter file.
pub type ParamsDigest = [u8; 32];

/// Symbols keyed by `(block, b)`.
pub type SymbolMap = BTreeMap<(usize, BIndex), Fe>;

#[derive(Debug, Error)]
pub enum ShardError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported shard format version {0}")]
    UnsupportedVersion(u8),
    #[error("params digest mismatch")]
    DigestMismatch,
    #[error("shard stream truncated")]
    Truncated,
    #[error("malformed shard: {0}")]
    Malformed(String),
    #[error("value {0} does not fit the fixed-width field")]
    TooWide(u128),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for ShardError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ShardError::Truncated
        } else {
            ShardError::Io(e)
        }
    }
}

/// Coordinates of one block: every base with every trit assignment on the
/// free positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockSlice {
    pub block: usize,
    pub free: BTreeSet<usize>,
    pub bases: BTreeSet<BIndex>,
}

impl BlockSlice {
    pub fn coords(&self) -> impl Iterator<Item = BIndex> + '_ {
        let free: Vec<usize> = self.free.iter().copied().collect();
        let per_base = pow3(free.len());
        self.bases.iter().flat_map(move |&base| {
            let free = free.clone();
            (0..per_base).map(move |mut k| {
                let mut b = base;
                for &pos in &free {
                    b = b.set_digit(pos, (k % 3) as u8);
                    k /= 3;
                }
                b
            })
        })
    }

    pub fn len(&self) -> usize {
        self.bases.len() * pow3(self.free.len()) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn is_closed_at(&self, pos: usize) -> bool {
        self.free.contains(&pos)
    }
}

/// A substitution-closed set of coordinates across blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SliceDescriptor {
    pub blocks: Vec<BlockSlice>,
}

impl SliceDescriptor {
    /// One fixed assignment shared by all listed blocks.
    pub fn uniform(free: BTreeSet<usize>, fixed: BIndex, blocks: &[usize]) -> SliceDescriptor {
        let base = free.iter().fold(fixed, |b, &p| b.set_digit(p, 0));
        let mut blocks: Vec<usize> = blocks.to_vec();
        blocks.sort_unstable();
        blocks.dedup();
        SliceDescriptor {
            blocks: blocks
                .into_iter()
                .map(|block| BlockSlice {
                    block,
                    free: free.clone(),
                    bases: [base].into(),
                })
                .collect(),
        }
    }

    pub fn block(&self, block: usize) -> Option<&BlockSlice> {
        self.blocks.iter().find(|s| s.block == block)
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, BIndex)> + '_ {
        self.blocks.iter().flat_map(|s| s.coords().map(move |b| (s.block, b)))
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(BlockSlice::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks ordering, digit ranges, and zero digits at free positions.
    pub fn validate(&self, blocks: usize, digits: usize) -> Result<(), ShardError> {
        let mut last = 0;
        for s in &self.blocks {
            if s.block == 0 || s.block > blocks || s.block <= last {
                return Err(ShardError::Malformed(format!("block {} out of order or range", s.block)));
            }
            last = s.block;
            if s.free.iter().any(|&p| p == 0 || p > digits) {
                return Err(ShardError::Malformed("free position out of range".into()));
            }
            for b in &s.bases {
                if b.0 >= pow3(digits) || s.free.iter().any(|&p| b.digit(p) != 0) {
                    return Err(ShardError::Malformed(format!("bad base {}", b.0)));
                }
            }
        }
        Ok(())
    }
}

/// One node's symbols restricted to a slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shard {
    pub node: usize,
    pub digest: ParamsDigest,
    pub slice: SliceDescriptor,
    pub symbols: SymbolMap,
}

impl Shard {
    /// Every slice coordinate carries exactly one symbol and nothing else.
    pub fn is_complete(&self) -> bool {
        self.symbols.len() == self.slice.len()
            && self.slice.coords().all(|key| self.symbols.contains_key(&key))
    }

    pub fn get(&self, block: usize, b: BIndex) -> Option<Fe> {
        self.symbols.get(&(block, b)).copied()
    }
}

fn put_u16(out: &mut Vec<u8>, v: u128) -> Result<(), ShardError> {
    let v = u16::try_from(v).map_err(|_| ShardError::TooWide(v))?;
    out.extend_from_slice(&v.to_be_bytes());
    Ok(())
}

fn put_u64(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u64).to_be_bytes());
}

/// Serializes a shard into its canonical byte form.
pub fn encode_shard(shard: &Shard) -> Result<Vec<u8>, ShardError> {
    let mut out = Vec::with_capacity(64 + 20 * shard.symbols.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&shard.digest);
    put_u64(&mut out, shard.node);
    put_u64(&mut out, shard.slice.blocks.len());
    for s in &shard.slice.blocks {
        put_u16(&mut out, s.block as u128)?;
        put_u64(&mut out, s.free.len());
        for &p in &s.free {
            put_u16(&mut out, p as u128)?;
        }
        put_u64(&mut out, s.bases.len());
        for b in &s.bases {
            out.extend_from_slice(&b.0.to_be_bytes());
        }
    }
    put_u64(&mut out, shard.symbols.len());
    for (&(block, b), &v) in &shard.symbols {
        put_u16(&mut out, block as u128)?;
        out.extend_from_slice(&b.0.to_be_bytes());
        put_u16(&mut out, u128::from(v.0))?;
    }
    Ok(out)
}

pub fn write_shard<W: Write>(shard: &Shard, mut sink: W) -> Result<(), ShardError> {
    sink.write_all(&encode_shard(shard)?)?;
    Ok(())
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_shard_file(path: &Path, shard: &Shard) -> Result<(), ShardError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write_shard(shard, &mut tmp)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| ShardError::Io(e.error))?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], ShardError> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn u16(&mut self) -> Result<u16, ShardError> {
        Ok(u16::from_be_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64, ShardError> {
        Ok(u64::from_be_bytes(self.bytes()?))
    }

    fn u128(&mut self) -> Result<u128, ShardError> {
        Ok(u128::from_be_bytes(self.bytes()?))
    }

    fn count(&mut self) -> Result<usize, ShardError> {
        let n = self.u64()?;
        // counts never exceed what the 16-bit block and digit ranges allow
        if n > 1 << 32 {
            return Err(ShardError::Malformed(format!("implausible count {n}")));
        }
        Ok(n as usize)
    }
}

/// Parses a shard without checking its params digest.
pub fn read_shard<R: Read>(source: R) -> Result<Shard, ShardError> {
    let mut r = Reader { inner: source };
    if &r.bytes::<7>()? != MAGIC {
        return Err(ShardError::BadMagic);
    }
    let [version] = r.bytes::<1>()?;
    if version != VERSION {
        return Err(ShardError::UnsupportedVersion(version));
    }
    let digest = r.bytes::<32>()?;
    let node = r.u64()? as usize;
    let mut blocks = Vec::new();
    for _ in 0..r.count()? {
        let block = usize::from(r.u16()?);
        let mut free = BTreeSet::new();
        for _ in 0..r.count()? {
            free.insert(usize::from(r.u16()?));
        }
        let mut bases = BTreeSet::new();
        for _ in 0..r.count()? {
            bases.insert(BIndex(r.u128()?));
        }
        blocks.push(BlockSlice { block, free, bases });
    }
    let mut symbols = BTreeMap::new();
    let mut last = None;
    for _ in 0..r.count()? {
        let key = (usize::from(r.u16()?), BIndex(r.u128()?));
        let v = Fe(u32::from(r.u16()?));
        if last.is_some_and(|prev| prev >= key) {
            return Err(ShardError::Malformed("entries not strictly sorted".into()));
        }
        last = Some(key);
        symbols.insert(key, v);
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest)? != 0 {
        return Err(ShardError::Malformed("trailing bytes".into()));
    }
    Ok(Shard {
        node,
        digest,
        slice: SliceDescriptor { blocks },
        symbols,
    })
}

/// Parses a shard and requires its digest to equal `expected`.
pub fn read_shard_checked<R: Read>(source: R, expected: &ParamsDigest) -> Result<Shard, ShardError> {
    let shard = read_shard(source)?;
    if &shard.digest != expected {
        return Err(ShardError::DigestMismatch);
    }
    Ok(shard)
}

pub fn read_shard_file(path: &Path, expected: &ParamsDigest) -> Result<Shard, ShardError> {
    let f = std::fs::File::open(path)?;
    read_shard_checked(io::BufReader::new(f), expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_shard() -> Shard {
        let slice = SliceDescriptor {
            blocks: vec![BlockSlice {
                block: 2,
                free: [3].into(),
                bases: [BIndex(1)].into(),
            }],
        };
        let symbols = slice
            .coords()
            .enumerate()
            .map(|(k, key)| (key, Fe(k as u32 * 1000 + 7)))
            .collect();
        Shard {
            node: 17,
            digest: [0xab; 32],
            slice,
            symbols,
        }
    }

    #[test]
    fn slice_expansion() {
        let s = &sample_shard().slice;
        let coords: Vec<(usize, BIndex)> = s.coords().collect();
        assert_eq!(coords, vec![(2, BIndex(1)), (2, BIndex(10)), (2, BIndex(19))]);
        let u = SliceDescriptor::uniform([1, 2].into(), BIndex(5 + 27), &[3, 1, 3]);
        assert_eq!(u.blocks.len(), 2);
        assert_eq!(u.len(), 18);
        assert!(u.validate(3, 4).is_ok());
        assert!(u.validate(3, 3).is_err());
        assert!(u.validate(2, 4).is_err());
    }

    #[test]
    fn roundtrips() {
        let empty = Shard {
            node: 1,
            digest: [0; 32],
            slice: SliceDescriptor::default(),
            symbols: BTreeMap::new(),
        };
        let bytes = encode_shard(&empty).unwrap();
        assert_eq!(read_shard(&bytes[..]).unwrap(), empty);

        let s = sample_shard();
        assert!(s.is_complete());
        let bytes = encode_shard(&s).unwrap();
        let back = read_shard_checked(&bytes[..], &[0xab; 32]).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode_shard(&back).unwrap(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let s = sample_shard();
        let bytes = encode_shard(&s).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_shard(&bad[..]), Err(ShardError::BadMagic)));

        let mut bad = bytes.clone();
        bad[7] = 2;
        assert!(matches!(read_shard(&bad[..]), Err(ShardError::UnsupportedVersion(2))));

        let mut bad = bytes.clone();
        bad[10] ^= 1;
        assert!(matches!(
            read_shard_checked(&bad[..], &[0xab; 32]),
            Err(ShardError::DigestMismatch)
        ));

        assert!(matches!(read_shard(&bytes[..bytes.len() - 1]), Err(ShardError::Truncated)));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(read_shard(&long[..]), Err(ShardError::Malformed(_))));
    }

    #[test]
    fn wide_symbols_are_rejected() {
        let mut s = sample_shard();
        s.symbols.insert((2, BIndex(1)), Fe(70000));
        assert!(matches!(encode_shard(&s), Err(ShardError::TooWide(70000))));
    }

    #[test]
    fn atomic_file_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("node.shard");
        let s = sample_shard();
        write_shard_file(&path, &s).unwrap();
        assert_eq!(read_shard_file(&path, &s.digest).unwrap(), s);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn roundtrip_is_identity(
            node in 1usize..5000,
            digest in any::<[u8; 32]>(),
            base in 0u128..3u128.pow(20),
            pos in 1usize..=21,
            vals in proptest::collection::vec(0u32..4096, 3),
        ) {
            let base = BIndex(base).set_digit(pos, 0);
            let slice = SliceDescriptor {
                blocks: vec![BlockSlice { block: 4, free: [pos].into(), bases: [base].into() }],
            };
            let symbols = slice.coords().zip(vals).map(|(k, v)| (k, Fe(v))).collect();
            let shard = Shard { node, digest, slice, symbols };
            let bytes = encode_shard(&shard).unwrap();
            prop_assert_eq!(read_shard(&bytes[..]).unwrap(), shard);
        }
    }
}
