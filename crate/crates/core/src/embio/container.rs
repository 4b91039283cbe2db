//! Binary container for factorized embeddings.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "DEMB" | version u16 | method u8 | n_dims u32 | dims u32×n_dims
//!        | payload_len u32 | payload | crc32(payload) u32
//! ```
//!
//! Method tags: 0 low-rank identity, 1 low-rank ReLU, 2 grouped, 3 PQ, 4 TT.
//! Payloads hold `f32` values and `u32` indices.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::factorizations::{
    Activation, AnyEmbedding, CompressedEmbedding, EmbeddingGroup, GroupedEmbedding, LowRankEmbedding, PqEmbedding,
    TtEmbedding,
};
use crate::matrix::DenseMatrix;

pub const MAGIC: [u8; 4] = *b"DEMB";
pub const VERSION: u16 = 1;

const TAG_LOW_RANK: u8 = 0;
const TAG_FUNNELING: u8 = 1;
const TAG_GROUPED: u8 = 2;
const TAG_PQ: u8 = 3;
const TAG_TT: u8 = 4;

pub fn write_factorized(path: impl AsRef<Path>, emb: &AnyEmbedding) -> Result<()> {
    fs::write(path, encode(emb)?)?;
    Ok(())
}

pub fn read_factorized(path: impl AsRef<Path>) -> Result<AnyEmbedding> {
    decode(&fs::read(path)?)
}

fn act_code(a: Activation) -> u32 {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
    }
}

fn act_from(code: u32) -> Result<Activation> {
    match code {
        0 => Ok(Activation::Identity),
        1 => Ok(Activation::Relu),
        c => Err(Error::Malformed(format!("unknown activation code {c}"))),
    }
}

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::arg(format!("{n} does not fit in 32 bits")))
}

#[derive(Default)]
struct Payload(Vec<u8>);

impl Payload {
    fn floats(&mut self, xs: &[f64]) {
        for &x in xs {
            self.0.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }

    fn indices(&mut self, xs: impl IntoIterator<Item = u32>) {
        for x in xs {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

/// Serialize to bytes. Identical embeddings give identical bytes.
pub fn encode(emb: &AnyEmbedding) -> Result<Vec<u8>> {
    let mut dims: Vec<usize> = Vec::new();
    let mut p = Payload::default();
    let tag = match emb {
        AnyEmbedding::LowRank(l) => {
            dims.extend([l.u().rows(), l.v().rows(), l.rank()]);
            p.floats(l.u().as_slice());
            p.floats(l.v().as_slice());
            match l.activation() {
                Activation::Identity => TAG_LOW_RANK,
                Activation::Relu => TAG_FUNNELING,
            }
        }
        AnyEmbedding::Grouped(g) => {
            dims.extend([g.vocab(), g.dim(), g.groups().len()]);
            for grp in g.groups() {
                dims.extend([grp.words.len(), grp.rank(), act_code(grp.activation) as usize]);
                p.indices(grp.words.iter().map(|&w| w as u32));
                p.floats(grp.u.as_slice());
                p.floats(grp.v.as_slice());
            }
            TAG_GROUPED
        }
        AnyEmbedding::Pq(q) => {
            dims.extend([q.vocab(), q.dim(), q.group_size(), q.n_clusters()]);
            for cb in q.codebooks() {
                p.floats(cb.as_slice());
            }
            p.indices(q.assignments().iter().copied());
            TAG_PQ
        }
        AnyEmbedding::Tt(t) => {
            dims.extend([t.vocab(), t.dim(), t.vocab_shape().len()]);
            dims.extend(t.vocab_shape());
            dims.extend(t.dim_shape());
            dims.extend(t.ranks());
            for core in t.cores() {
                p.floats(core);
            }
            TAG_TT
        }
    };
    let mut out = Vec::with_capacity(p.0.len() + 4 * dims.len() + 24);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(tag);
    out.extend_from_slice(&u32_of(dims.len())?.to_le_bytes());
    for d in dims {
        out.extend_from_slice(&u32_of(d)?.to_le_bytes());
    }
    out.extend_from_slice(&u32_of(p.0.len())?.to_le_bytes());
    let crc = crc32fast::hash(&p.0);
    out.extend_from_slice(&p.0);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Malformed(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::Malformed("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Malformed("size overflow".into()))?;
        DenseMatrix::new(rows, cols, self.floats(n)?).map_err(|e| Error::Malformed(e.to_string()))
    }

    fn indices(&mut self, n: usize) -> Result<Vec<u32>> {
        (0..n).map(|_| self.u32()).collect()
    }
}

/// Parse bytes produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<AnyEmbedding> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let magic: [u8; 4] = c.take(4)?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let tag = c.take(1)?[0];
    if tag > TAG_TT {
        return Err(Error::UnsupportedMethod(tag));
    }
    let n_dims = c.usize()?;
    let dims = (0..n_dims).map(|_| c.usize()).collect::<Result<Vec<_>>>()?;
    let payload_len = c.usize()?;
    let payload = c.take(payload_len)?;
    let stored = c.u32()?;
    if c.pos != bytes.len() {
        return Err(Error::Malformed(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let emb = decode_payload(tag, &dims, payload)?;
    Ok(emb)
}

fn need(dims: &[usize], n: usize) -> Result<()> {
    if dims.len() != n {
        return Err(Error::Malformed(format!("{} header dims, expected {n}", dims.len())));
    }
    Ok(())
}

fn decode_payload(tag: u8, dims: &[usize], payload: &[u8]) -> Result<AnyEmbedding> {
    let mut p = Cursor { buf: payload, pos: 0 };
    let malformed = |e: Error| match e {
        Error::InvalidArgument(m) | Error::InvalidInput(m) => Error::Malformed(m),
        other => other,
    };
    let emb: AnyEmbedding = match tag {
        TAG_LOW_RANK | TAG_FUNNELING => {
            need(dims, 3)?;
            let (vocab, dim, r) = (dims[0], dims[1], dims[2]);
            let u = p.matrix(vocab, r)?;
            let v = p.matrix(dim, r)?;
            let act = if tag == TAG_LOW_RANK {
                Activation::Identity
            } else {
                Activation::Relu
            };
            LowRankEmbedding::new(u, v, act).map_err(malformed)?.into()
        }
        TAG_GROUPED => {
            if dims.len() < 3 {
                return Err(Error::Malformed("grouped header too short".into()));
            }
            let (vocab, dim, n_groups) = (dims[0], dims[1], dims[2]);
            need(dims, 3 + 3 * n_groups)?;
            let mut groups = Vec::with_capacity(n_groups);
            for g in 0..n_groups {
                let (size, rank, act) = (dims[3 + 3 * g], dims[4 + 3 * g], dims[5 + 3 * g]);
                let words = p.indices(size)?.into_iter().map(|w| w as usize).collect();
                let u = p.matrix(size, rank)?;
                let v = p.matrix(dim, rank)?;
                groups.push(EmbeddingGroup {
                    words,
                    u,
                    v,
                    activation: act_from(act as u32)?,
                });
            }
            GroupedEmbedding::new(vocab, dim, groups).map_err(malformed)?.into()
        }
        TAG_PQ => {
            need(dims, 4)?;
            let (vocab, dim, g, k) = (dims[0], dims[1], dims[2], dims[3]);
            if g == 0 || dim % g != 0 {
                return Err(Error::Malformed(format!("group size {g} does not divide {dim}")));
            }
            let s = dim / g;
            let codebooks = (0..s).map(|_| p.matrix(k, g)).collect::<Result<Vec<_>>>()?;
            let assignments = p.indices(vocab * s)?;
            PqEmbedding::new(vocab, g, codebooks, assignments)
                .map_err(malformed)?
                .into()
        }
        TAG_TT => {
            if dims.len() < 3 {
                return Err(Error::Malformed("tensor-train header too short".into()));
            }
            let (vocab, dim, n) = (dims[0], dims[1], dims[2]);
            need(dims, 3 + 3 * n + 1)?;
            let vs = dims[3..3 + n].to_vec();
            let ds = dims[3 + n..3 + 2 * n].to_vec();
            let ranks = dims[3 + 2 * n..].to_vec();
            if ds.iter().product::<usize>() != dim {
                return Err(Error::Malformed("dimension shape does not multiply to dim".into()));
            }
            let mut cores = Vec::with_capacity(n);
            for k in 0..n {
                cores.push(p.floats(ranks[k] * vs[k] * ds[k] * ranks[k + 1])?);
            }
            TtEmbedding::new(vocab, vs, ds, ranks, cores).map_err(malformed)?.into()
        }
        other => return Err(Error::UnsupportedMethod(other)),
    };
    if p.pos != payload.len() {
        return Err(Error::Malformed(format!(
            "payload has {} bytes, header accounts for {}",
            payload.len(),
            p.pos
        )));
    }
    Ok(emb)
}
