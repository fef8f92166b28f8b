//! Approximate cosine nearest-neighbour search.
//!
//! A forest of random projection trees. Each internal node splits its items
//! with a hyperplane between two centroids found by a short 2-means run;
//! leaves hold at most `leaf_size` items. A query walks all trees at once
//! through a shared priority queue keyed by the smallest hyperplane margin
//! seen on the way down, collecting at least `search_k` distinct candidates.
//! Candidates are then ranked by their exact cosine similarity.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::{is_zero, normalize_in_place, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::metrics::cosine_unchecked;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnParams {
    pub n_trees: usize,
    /// Minimum number of distinct candidates inspected per query.
    pub search_k: usize,
    pub leaf_size: usize,
    pub seed: u64,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self {
            n_trees: 16,
            search_k: 6000,
            leaf_size: 32,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub unit_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Vec<u32>),
    Split {
        normal: Vec<f32>,
        offset: f32,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnIndex {
    dim: usize,
    params: AnnParams,
    ids: Vec<String>,
    vectors: Vec<f32>,
    live: Vec<bool>,
    nodes: Vec<Node>,
    roots: Vec<u32>,
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Descending similarity, ties by ascending unit id.
pub fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.unit_id.cmp(&b.unit_id))
}

struct TreeBuilder<'a> {
    vectors: &'a [f32],
    dim: usize,
    leaf_size: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn row(&self, i: u32) -> &[f32] {
        let i = i as usize;
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn two_means(&mut self, items: &[u32]) -> (Vec<f32>, Vec<f32>) {
        let a = items[self.rng.gen_range(0..items.len())];
        let mut b = items[self.rng.gen_range(0..items.len())];
        let mut tries = 0;
        while self.row(a) == self.row(b) && tries < 8 {
            b = items[self.rng.gen_range(0..items.len())];
            tries += 1;
        }
        let mut p = self.row(a).to_vec();
        let mut q = self.row(b).to_vec();
        let (mut np, mut nq) = (1f32, 1f32);
        for _ in 0..200 {
            let pick = items[self.rng.gen_range(0..items.len())];
            let x = self.row(pick).to_vec();
            let dp: f32 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            let dq: f32 = q.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            let (c, n) = if dp < dq { (&mut p, &mut np) } else { (&mut q, &mut nq) };
            for (ci, xi) in c.iter_mut().zip(&x) {
                *ci = (*ci * *n + xi) / (*n + 1.0);
            }
            *n += 1.0;
        }
        (p, q)
    }

    fn split(&mut self, items: &[u32]) -> (Vec<f32>, f32) {
        let (p, q) = self.two_means(items);
        let mut normal: Vec<f32> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
        normalize_in_place(&mut normal);
        let mid: Vec<f32> = p.iter().zip(&q).map(|(a, b)| (a + b) / 2.0).collect();
        let offset = dot(&normal, &mid);
        (normal, offset)
    }

    fn build(&mut self, items: Vec<u32>) -> u32 {
        if items.len() <= self.leaf_size {
            self.nodes.push(Node::Leaf(items));
            return (self.nodes.len() - 1) as u32;
        }
        let (mut normal, mut offset) = self.split(&items);
        let (mut left, mut right): (Vec<u32>, Vec<u32>) = items
            .iter()
            .partition(|&&i| dot(&normal, self.row(i)) <= offset);
        if left.is_empty() || right.is_empty() {
            // degenerate (duplicates): random hyperplane, random halves
            normal = (0..self.dim).map(|_| self.rng.gen_range(-1f32..1.0)).collect();
            normalize_in_place(&mut normal);
            offset = 0.0;
            let mut shuffled = items;
            shuffled.shuffle(&mut self.rng);
            right = shuffled.split_off(shuffled.len() / 2);
            left = shuffled;
        }
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let l = self.build(left);
        let r = self.build(right);
        self.nodes[slot] = Node::Split {
            normal,
            offset,
            left: l,
            right: r,
        };
        slot as u32
    }
}

#[derive(PartialEq)]
struct Entry(f32, u32);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl AnnIndex {
    /// Builds the forest. Rows are normalized for indexing if the matrix is
    /// not already; zero rows are never returned.
    pub fn build(m: &EmbeddingMatrix, params: AnnParams) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::Empty("cannot index an empty matrix".into()));
        }
        if params.n_trees == 0 || params.leaf_size == 0 {
            return Err(Error::InvalidArgument(
                "n_trees and leaf_size must be positive".into(),
            ));
        }
        let dim = m.dim();
        let mut vectors = Vec::with_capacity(m.len() * dim);
        let mut live = Vec::with_capacity(m.len());
        for row in m.rows() {
            let mut r = row.to_vec();
            if !m.unit_normalized() {
                normalize_in_place(&mut r);
            }
            live.push(!is_zero(&r));
            vectors.extend_from_slice(&r);
        }
        let items: Vec<u32> = (0..m.len() as u32).filter(|&i| live[i as usize]).collect();

        let trees: Vec<Vec<Node>> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let seed = params
                    .seed
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .wrapping_add(t as u64);
                let mut b = TreeBuilder {
                    vectors: &vectors,
                    dim,
                    leaf_size: params.leaf_size,
                    rng: ChaCha8Rng::seed_from_u64(seed),
                    nodes: Vec::new(),
                };
                b.build(items.clone());
                b.nodes
            })
            .collect();

        let mut nodes = Vec::new();
        let mut roots = Vec::with_capacity(trees.len());
        for tree in trees {
            let base = nodes.len() as u32;
            roots.push(base);
            nodes.extend(tree.into_iter().map(|n| match n {
                Node::Split {
                    normal,
                    offset,
                    left,
                    right,
                } => Node::Split {
                    normal,
                    offset,
                    left: left + base,
                    right: right + base,
                },
                leaf => leaf,
            }));
        }
        Ok(Self {
            dim,
            params,
            ids: m.unit_ids().to_vec(),
            vectors,
            live,
            nodes,
            roots,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of indexed units, including zero rows that are never returned.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn params(&self) -> AnnParams {
        self.params
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Indexed vector of `unit_id`, as stored (normalized).
    pub fn get(&self, unit_id: &str) -> Option<&[f32]> {
        self.ids.iter().position(|id| id == unit_id).map(|i| self.vector(i))
    }

    fn candidates(&self, v: &[f32], budget: usize) -> Vec<u32> {
        let mut seen = vec![false; self.ids.len()];
        let mut out = Vec::with_capacity(budget);
        let mut heap: BinaryHeap<Entry> = self
            .roots
            .iter()
            .map(|&r| Entry(f32::INFINITY, r))
            .collect();
        while let Some(Entry(priority, node)) = heap.pop() {
            if out.len() >= budget {
                break;
            }
            match &self.nodes[node as usize] {
                Node::Leaf(items) => {
                    for &i in items {
                        if !seen[i as usize] {
                            seen[i as usize] = true;
                            out.push(i);
                        }
                    }
                }
                Node::Split {
                    normal,
                    offset,
                    left,
                    right,
                } => {
                    let margin = dot(normal, v) - offset;
                    heap.push(Entry(priority.min(margin), *right));
                    heap.push(Entry(priority.min(-margin), *left));
                }
            }
        }
        out
    }

    fn rank(&self, v: &[f32], items: impl Iterator<Item = u32>, k: usize) -> Vec<Neighbor> {
        let mut scored: Vec<(f64, u32)> = items
            .map(|i| (cosine_unchecked(v, self.vector(i as usize)), i))
            .collect();
        let order = |a: &(f64, u32), b: &(f64, u32)| {
            b.0.total_cmp(&a.0)
                .then_with(|| self.ids[a.1 as usize].cmp(&self.ids[b.1 as usize]))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        scored
            .into_iter()
            .map(|(s, i)| Neighbor {
                unit_id: self.ids[i as usize].clone(),
                similarity: s,
            })
            .collect()
    }

    /// Up to `k` approximate nearest neighbours of `v`, similarity
    /// descending (ties by unit id). Reported similarities are exact cosines.
    pub fn query(&self, v: &[f32], k: usize) -> Result<Vec<Neighbor>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let budget = self.params.search_k.max(k);
        let cands = self.candidates(v, budget);
        Ok(self.rank(v, cands.into_iter(), k))
    }

    /// Exhaustive search over the indexed vectors.
    pub fn query_exact(&self, v: &[f32], k: usize) -> Result<Vec<Neighbor>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        let live = (0..self.ids.len() as u32).filter(|&i| self.live[i as usize]);
        Ok(self.rank(v, live, k))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::read(&bytes)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(INDEX_MAGIC)?;
        out.write_all(&INDEX_VERSION.to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.params.n_trees as u32).to_le_bytes())?;
        out.write_all(&(self.params.search_k as u64).to_le_bytes())?;
        out.write_all(&(self.params.leaf_size as u32).to_le_bytes())?;
        out.write_all(&self.params.seed.to_le_bytes())?;
        out.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        for id in &self.ids {
            out.write_all(&(id.len() as u32).to_le_bytes())?;
            out.write_all(id.as_bytes())?;
        }
        for x in &self.vectors {
            out.write_all(&x.to_le_bytes())?;
        }
        for &l in &self.live {
            out.write_all(&[l as u8])?;
        }
        out.write_all(&(self.roots.len() as u32).to_le_bytes())?;
        for r in &self.roots {
            out.write_all(&r.to_le_bytes())?;
        }
        out.write_all(&(self.nodes.len() as u64).to_le_bytes())?;
        for n in &self.nodes {
            match n {
                Node::Leaf(items) => {
                    out.write_all(&[0])?;
                    out.write_all(&(items.len() as u32).to_le_bytes())?;
                    for i in items {
                        out.write_all(&i.to_le_bytes())?;
                    }
                }
                Node::Split {
                    normal,
                    offset,
                    left,
                    right,
                } => {
                    out.write_all(&[1])?;
                    out.write_all(&offset.to_le_bytes())?;
                    out.write_all(&left.to_le_bytes())?;
                    out.write_all(&right.to_le_bytes())?;
                    for x in normal {
                        out.write_all(&x.to_le_bytes())?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != INDEX_MAGIC {
            return Err(Error::Format("not an LHAI index file (bad magic)".into()));
        }
        let version = r.u16()?;
        if version != INDEX_VERSION {
            return Err(Error::Format(format!("unsupported LHAI version {version}")));
        }
        let dim = r.u32()? as usize;
        let params = AnnParams {
            n_trees: r.u32()? as usize,
            search_k: r.u64()? as usize,
            leaf_size: r.u32()? as usize,
            seed: r.u64()?,
        };
        let count = r.u64()? as usize;
        let mut ids = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let s = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("unit id is not UTF-8".into()))?;
            ids.push(s.to_string());
        }
        let mut vectors = Vec::with_capacity(count * dim);
        for _ in 0..count * dim {
            vectors.push(r.f32()?);
        }
        let live = r.take(count)?.iter().map(|&b| b != 0).collect();
        let n_roots = r.u32()? as usize;
        let mut roots = Vec::with_capacity(n_roots);
        for _ in 0..n_roots {
            roots.push(r.u32()?);
        }
        let n_nodes = r.u64()? as usize;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 24));
        for _ in 0..n_nodes {
            let node = match r.take(1)?[0] {
                0 => {
                    let len = r.u32()? as usize;
                    let mut items = Vec::with_capacity(len);
                    for _ in 0..len {
                        items.push(r.u32()?);
                    }
                    Node::Leaf(items)
                }
                1 => {
                    let offset = r.f32()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    let mut normal = Vec::with_capacity(dim);
                    for _ in 0..dim {
                        normal.push(r.f32()?);
                    }
                    Node::Split {
                        normal,
                        offset,
                        left,
                        right,
                    }
                }
                t => return Err(Error::Format(format!("bad node tag {t}"))),
            };
            nodes.push(node);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after index".into()));
        }
        Ok(Self {
            dim,
            params,
            ids,
            vectors,
            live,
            nodes,
            roots,
        })
    }
}

const INDEX_MAGIC: &[u8; 4] = b"LHAI";
const INDEX_VERSION: u16 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated {
                expected: (self.pos + n) as u64,
                actual: self.buf.len() as u64,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Exhaustive cosine k-NN over the non-zero rows of `m`.
pub fn exact_knn(m: &EmbeddingMatrix, v: &[f32], k: usize) -> Result<Vec<Neighbor>> {
    if v.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            actual: v.len(),
        });
    }
    let ids = m.unit_ids();
    let mut scored: Vec<(f64, usize)> = m
        .rows()
        .enumerate()
        .filter(|(_, row)| !is_zero(row))
        .map(|(i, row)| (cosine_unchecked(v, row), i))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| {
        b.0.total_cmp(&a.0).then_with(|| ids[a.1].cmp(&ids[b.1]))
    };
    if k < scored.len() {
        if k == 0 {
            return Ok(Vec::new());
        }
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_by(order);
    Ok(scored
        .into_iter()
        .map(|(s, i)| Neighbor {
            unit_id: ids[i].clone(),
            similarity: s,
        })
        .collect())
}
