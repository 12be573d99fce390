use serde::{Deserialize, Serialize};

use super::edm::EdmMatrix;
use crate::{Error, Result};

/// One agglomeration step. Leaves are `0..d`; the cluster created by merge
/// `m` gets id `d + m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cut {
    Blocks(usize),
    Height(f64),
}

/// Disjoint blocks covering `0..d`. Each block is sorted and blocks are
/// ordered by their smallest member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub blocks: Vec<Vec<usize>>,
    pub cut: Cut,
    pub dendrogram: Dendrogram,
}

impl BlockPartition {
    /// Partition given directly, without a dendrogram.
    pub fn explicit(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let d: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; d];
        for &i in blocks.iter().flatten() {
            if i >= d || seen[i] {
                return Err(Error::invalid("blocks must partition 0..d"));
            }
            seen[i] = true;
        }
        if blocks.iter().any(Vec::is_empty) {
            return Err(Error::invalid("blocks must be non-empty"));
        }
        let k = blocks.len();
        Ok(Self { blocks: canonical(blocks), cut: Cut::Blocks(k), dendrogram: Dendrogram { leaves: d, merges: vec![] } })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Block label of each component.
    pub fn labels(&self) -> Vec<usize> {
        let mut l = vec![0; self.dim()];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                l[i] = b;
            }
        }
        l
    }
}

fn canonical(mut blocks: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    blocks.iter_mut().for_each(|b| b.sort_unstable());
    blocks.sort_by_key(|b| b[0]);
    blocks
}

/// Average-linkage agglomerative clustering on `max − EDM`.
pub fn dendrogram(m: &EdmMatrix) -> Dendrogram {
    let d = m.dim();
    let dist = |i: usize, j: usize| m.max - m.values[i][j];
    // active clusters: (id, members)
    let mut active: Vec<(usize, Vec<usize>)> = (0..d).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(d.saturating_sub(1));
    while active.len() > 1 {
        let mut best = (f64::INFINITY, 0, 1);
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let (ma, mb) = (&active[a].1, &active[b].1);
                let total: f64 = ma.iter().flat_map(|&i| mb.iter().map(move |&j| dist(i, j))).sum();
                let avg = total / (ma.len() * mb.len()) as f64;
                if avg < best.0 {
                    best = (avg, a, b);
                }
            }
        }
        let (height, a, b) = best;
        let (id_b, members_b) = active.remove(b);
        let (id_a, members_a) = std::mem::take(&mut active[a]);
        let mut members = members_a;
        members.extend(members_b);
        merges.push(Merge { left: id_a.min(id_b), right: id_a.max(id_b), height, size: members.len() });
        active[a] = (d + merges.len() - 1, members);
    }
    Dendrogram { leaves: d, merges }
}

/// Clusters the columns into blocks, cutting the average-linkage tree
/// either at a block count or at a merge height.
pub fn cluster_edm(m: &EdmMatrix, cut: Cut) -> Result<BlockPartition> {
    let d = m.dim();
    if d == 0 {
        return Err(Error::invalid("empty EDM matrix"));
    }
    if m.values.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("EDM matrix is not square"));
    }
    let tree = dendrogram(m);
    let n_merges = match cut {
        Cut::Blocks(k) => {
            if k == 0 || k > d {
                return Err(Error::invalid(format!("block count must lie in 1..={d}, got {k}")));
            }
            d - k
        }
        Cut::Height(h) => tree.merges.iter().take_while(|mg| mg.height <= h).count(),
    };
    let mut clusters: Vec<Option<Vec<usize>>> = (0..d).map(|i| Some(vec![i])).collect();
    for mg in &tree.merges[..n_merges] {
        let mut a = clusters[mg.left].take().expect("live cluster");
        a.extend(clusters[mg.right].take().expect("live cluster"));
        clusters.push(Some(a));
    }
    for _ in n_merges..tree.merges.len() {
        clusters.push(None);
    }
    let blocks = canonical(clusters.into_iter().flatten().collect());
    Ok(BlockPartition { blocks, cut, dendrogram: tree })
}
