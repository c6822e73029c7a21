//! Collections of bad cubes with disjoint triples, words and the coding
//! partition.

use std::collections::BTreeMap;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{cells_of_3q, DyadicCube, GridGeometry, GridPoint, MAX_DIM};
use crate::error::{QmdError, Result};
use crate::gridset::GridSet;

use super::pipeline::BadCubeSet;

/// Cells of one collection, per level, on the lattice extended by one cell
/// on every side (`[-1, 2^k]` per axis).
#[derive(Debug, Clone)]
struct OwnerMask {
    dim: usize,
    levels: Vec<BitVec<u64, Lsb0>>,
    used: Vec<bool>,
}

impl OwnerMask {
    fn new(dim: usize, max_level: u32) -> Self {
        let levels = (0..=max_level).map(|_| BitVec::new()).collect();
        Self { dim, levels, used: vec![false; max_level as usize + 1] }
    }

    fn offset(&self, level: u32, cell: &[i64]) -> usize {
        let side = (1i64 << level) + 2;
        let mut off = 0i64;
        for i in (0..self.dim).rev() {
            off = off * side + cell[i] + 1;
        }
        off as usize
    }

    fn mark(&mut self, q: &DyadicCube) {
        let k = q.level();
        if !self.used[k as usize] {
            let side = (1usize << k) + 2;
            self.levels[k as usize] = bitvec![u64, Lsb0; 0; side.pow(self.dim as u32)];
            self.used[k as usize] = true;
        }
        for c in cells_of_3q(q) {
            let off = self.offset(k, c.cube.corner());
            self.levels[k as usize].set(off, true);
        }
    }

    /// Whether the triple of `q` meets the triple of a member no finer than `q`.
    fn hits(&self, q: &DyadicCube) -> bool {
        let cells = cells_of_3q(q);
        (0..=q.level()).filter(|&j| self.used[j as usize]).any(|j| {
            let shift = q.level() - j;
            cells.iter().any(|c| {
                let mut anc = [0i64; MAX_DIM];
                for (i, a) in anc.iter_mut().enumerate().take(self.dim) {
                    *a = c.cube.corner()[i] >> shift;
                }
                self.levels[j as usize][self.offset(j, &anc[..self.dim])]
            })
        })
    }
}

/// `Q -> i` with the triples of one collection pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionAssignment {
    /// Per cube of the bad set (same order), its 0-based collection.
    pub collection: Vec<u32>,
    pub num_collections: u32,
}

impl CollectionAssignment {
    pub fn members<'a>(&'a self, b: &'a BadCubeSet, i: u32) -> impl Iterator<Item = &'a DyadicCube> + 'a {
        b.cubes().iter().zip(&self.collection).filter(move |(_, &c)| c == i).map(|(q, _)| q)
    }
}

/// Number of cubes of `b` whose unclipped `7Q` holds `p`.
fn regions_holding(b: &BadCubeSet, p: &GridPoint) -> u64 {
    b.cubes().iter().filter(|q| q.expansion_contains(b.geometry(), 7, p)).count() as u64
}

/// First-fit in the order of `b`: each cube goes to the lowest collection
/// whose members have triples disjoint from its own. At most `limit`
/// collections; running out means some cell of `3Q ∩ g` lies in more than
/// `limit` bad regions `7R`, reported as the witness.
pub fn assign_collections(b: &BadCubeSet, g: &GridSet, limit: u64) -> Result<CollectionAssignment> {
    let geom = b.geometry();
    let mut masks: Vec<OwnerMask> = Vec::new();
    let mut collection = Vec::with_capacity(b.len());
    for q in b.cubes() {
        match masks.iter().position(|m| !m.hits(q)) {
            Some(i) => {
                masks[i].mark(q);
                collection.push(i as u32);
            }
            None if (masks.len() as u64) < limit => {
                let mut m = OwnerMask::new(geom.dim(), geom.level());
                m.mark(q);
                masks.push(m);
                collection.push(masks.len() as u32 - 1);
            }
            None => {
                let bx = q.expansion_box(geom, 3).intersect(&geom.unit_box());
                let witness = bx.points().find(|p| g.contains_point(p)).or_else(|| bx.points().next());
                let (witness, count) = match witness {
                    Some(p) => (geom.index_of(&p), regions_holding(b, &p)),
                    None => (0, 0),
                };
                return Err(QmdError::AssignmentFailure {
                    cube: q.to_string(),
                    witness,
                    count,
                    limit: limit.to_string(),
                });
            }
        }
    }
    Ok(CollectionAssignment { collection, num_collections: masks.len() as u32 })
}

/// Letter `i`: 0 off the triples of collection `i`, else the 1-based cell
/// label in the unique triple holding the point.
pub type Word = Vec<u8>;

/// Words of every cell in dictionary order (cells outside `g` get empty
/// words).
pub fn words(b: &BadCubeSet, a: &CollectionAssignment, g: &GridSet) -> Vec<Word> {
    let geom = b.geometry();
    let n = a.num_collections as usize;
    let mut out: Vec<Word> =
        (0..geom.num_cells()).map(|i| if g.contains(i) { vec![0; n] } else { Vec::new() }).collect();
    for (q, &i) in b.cubes().iter().zip(&a.collection) {
        let s = geom.cube_cells(q.level());
        for (label, cell) in cells_of_3q(q).iter().enumerate() {
            if cell.outside {
                continue;
            }
            let lo: Vec<i64> = cell.cube.corner().iter().map(|c| c * s).collect();
            let hi: Vec<i64> = lo.iter().map(|c| c + s).collect();
            for p in crate::dyadic::CellBox::new(&lo, &hi).points() {
                let idx = geom.index_of(&p);
                if g.contains(idx) {
                    out[idx][i as usize] = label as u8 + 1;
                }
            }
        }
    }
    out
}

/// Word of a single point by scanning every collection.
pub fn word_of(b: &BadCubeSet, a: &CollectionAssignment, x: &GridPoint) -> Result<Word> {
    let geom = b.geometry();
    let mut w = vec![0u8; a.num_collections as usize];
    for (q, &i) in b.cubes().iter().zip(&a.collection) {
        if q.expansion_contains(geom, 3, x) {
            w[i as usize] = crate::dyadic::cell_label(geom, x, q)? as u8;
        }
    }
    Ok(w)
}

/// Nonempty classes of equal words, ordered lexicographically by word.
#[derive(Debug, Clone)]
pub struct CodingPartition {
    pub words: Vec<Word>,
    pub pieces: Vec<GridSet>,
}

pub fn coding_partition(g: &GridSet, b: &BadCubeSet, a: &CollectionAssignment) -> CodingPartition {
    let geom: GridGeometry = *g.geometry();
    let all = words(b, a, g);
    let mut classes: BTreeMap<Word, Vec<usize>> = BTreeMap::new();
    for idx in g.iter() {
        classes.entry(all[idx].clone()).or_default().push(idx);
    }
    let (words, pieces) = classes
        .into_iter()
        .map(|(w, cells)| (w, GridSet::from_indices(geom, cells).expect("indices in range")))
        .unzip();
    CodingPartition { words, pieces }
}
