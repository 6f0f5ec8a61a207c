//! Finite node sets standing in for Z².

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{resonant_minus, resonant_plus, FrequencyFamily, LatticeVec};

/// `Λ' ∪ Σ` grown by up to `shell_depth` steps of `±l_k` over the given drives.
#[derive(Clone, Debug)]
pub struct TruncationSet {
    pub nodes: Vec<LatticeVec>,
    pub shell_depth: usize,
    pub drives: Vec<usize>,
    /// `|n|²` per node.
    pub energy: Vec<i128>,
    index: HashMap<LatticeVec, usize>,
    /// Node indices of `m_0..m_{K+1}` and `m_k − l_k`.
    pub p_nodes: Vec<usize>,
    pub s_nodes: Vec<usize>,
}

/// One drive's coupling restricted to the set.
#[derive(Clone, Debug)]
pub struct DriveCoupling {
    pub drive: usize,
    pub l: LatticeVec,
    pub energy_l: i128,
    /// Maximal runs `n, n + l, n + 2l, …` inside the set, in that order; runs of length one are omitted.
    pub blocks: Vec<Vec<usize>>,
    /// Edges `(n, m)` with `n − m = ±l`, both in the set; each unordered pair once, as `(m, m + l)`.
    pub edges: Vec<(usize, usize)>,
    /// Resonant part: `(target, source, sign)` with `a_target' ∋ sign · r · a_source`.
    pub resonant: Vec<(usize, usize, f64)>,
    /// Nodes with a neighbour `n ± l` outside the set, with the number of such neighbours.
    pub boundary: Vec<(usize, usize)>,
}

impl TruncationSet {
    pub fn build(family: &FrequencyFamily, drives: &[usize], shell_depth: usize) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut index = HashMap::new();
        let add = |v: LatticeVec, nodes: &mut Vec<LatticeVec>, index: &mut HashMap<LatticeVec, usize>| -> usize {
            *index.entry(v).or_insert_with(|| {
                nodes.push(v);
                nodes.len() - 1
            })
        };
        let mut p_nodes = Vec::new();
        for v in family.m_extended()? {
            p_nodes.push(add(v, &mut nodes, &mut index));
        }
        let mut s_nodes = Vec::new();
        for k in 0..=family.k_max() {
            s_nodes.push(add(family.s_at(k)?, &mut nodes, &mut index));
        }
        for &k in drives {
            if k > family.k_max() {
                return Err(Error::InvalidArgument(format!("drive {k} outside the family")));
            }
        }
        let mut frontier: Vec<usize> = (0..nodes.len()).collect();
        for _ in 0..shell_depth {
            let mut next = Vec::new();
            for &i in &frontier {
                let n = nodes[i];
                for &k in drives {
                    let l = family.l[k];
                    for v in [n.add(l)?, n.sub(l)?] {
                        if !index.contains_key(&v) {
                            next.push(add(v, &mut nodes, &mut index));
                        }
                    }
                }
            }
            frontier = next;
        }
        let energy = nodes.iter().map(|v| v.norm_sq()).collect::<Result<_>>()?;
        let mut drives = drives.to_vec();
        drives.sort_unstable();
        drives.dedup();
        Ok(TruncationSet { nodes, shell_depth, drives, energy, index, p_nodes, s_nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, v: LatticeVec) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn coupling(&self, family: &FrequencyFamily, drive: usize) -> Result<DriveCoupling> {
        let l = family.l[drive];
        let mut edges = Vec::new();
        let mut blocks = Vec::new();
        let mut boundary = Vec::new();
        let mut resonant = Vec::new();
        for (i, &n) in self.nodes.iter().enumerate() {
            let up = self.index_of(n.add(l)?);
            let down = self.index_of(n.sub(l)?);
            if let Some(j) = up {
                edges.push((i, j));
            }
            let missing = usize::from(up.is_none()) + usize::from(down.is_none());
            if missing > 0 {
                boundary.push((i, missing));
            }
            if down.is_none() && up.is_some() {
                let mut run = vec![i];
                let mut cur = n;
                loop {
                    cur = cur.add(l)?;
                    match self.index_of(cur) {
                        Some(j) => run.push(j),
                        None => break,
                    }
                }
                blocks.push(run);
            }
            for m in [up, down].into_iter().flatten() {
                let mv = self.nodes[m];
                if resonant_plus(n, mv)? {
                    resonant.push((i, m, 1.0));
                }
                if resonant_minus(n, mv)? {
                    resonant.push((i, m, -1.0));
                }
            }
        }
        Ok(DriveCoupling { drive, l, energy_l: l.norm_sq()?, blocks, edges, resonant, boundary })
    }

    pub fn summary(&self) -> TruncationSummary {
        TruncationSummary { nodes: self.len(), shell_depth: self.shell_depth, drives: self.drives.clone() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationSummary {
    pub nodes: usize,
    pub shell_depth: usize,
    pub drives: Vec<usize>,
}
