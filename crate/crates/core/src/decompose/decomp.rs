//! The full decomposition `E = F_1 ∪ ... ∪ F_M ∪ Z`.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::sweep::CubeSweep;
use crate::density::zset::CoverCounts;
use crate::error::{QmdError, Result};
use crate::gridset::{Encoding, GridSet, SetFile};
use crate::rational::{serde_rational, Rational};
use crate::scalar::Real;

use super::coding::{assign_collections, coding_partition};
use super::pipeline::{choose_n, n_saturating, pipeline_constants, BadCubeSet, NMode};
use super::verify::{connect, select_pairs, verify_well_connected, PairPolicy, WellConnectedVerdict};

/// `N` above which `(3^d + 1)^N` is written symbolically.
const M_EXPAND_MAX: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(with = "serde_rational")]
    pub alpha: Rational,
    #[serde(with = "serde_rational")]
    pub delta: Rational,
    #[serde(rename = "P")]
    pub p: u64,
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    /// Decimal string; the theoretical value does not fit a machine word.
    #[serde(rename = "N")]
    pub n: String,
    /// `(3^d + 1)^N`, expanded when small.
    #[serde(rename = "M")]
    pub m: String,
    pub mode: NMode,
    pub clip: bool,
    /// Collections used by the assignment; the word length.
    pub collections: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Certificate {
    pub x: usize,
    pub y: usize,
    /// 1-based ordinal of the piece among the nonempty classes.
    pub class: usize,
    /// Chain cells, `x` first and `y` last.
    pub points: Vec<usize>,
    pub steps: Vec<f64>,
    pub length: f64,
    pub max_step: f64,
    pub distance: f64,
    pub method: super::chain::ChainMethod,
    /// Both bounds exactly.
    pub strict: bool,
    /// Both bounds up to `2 sqrt(d) 2^-L`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub params: Params,
    pub pieces: Vec<SetFile>,
    pub garbage: SetFile,
    /// Words of the pieces, in piece order.
    pub words: Vec<Vec<u8>>,
    pub certificates: Vec<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecomposeOptions {
    pub mode: NMode,
    pub clip: bool,
    pub pairs: PairPolicy,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { mode: NMode::Empirical, clip: true, pairs: PairPolicy::default() }
    }
}

fn m_string(dim: usize, n: &BigUint) -> String {
    let base = 3u64.pow(dim as u32) + 1;
    match u64::try_from(n.clone()) {
        Ok(v) if v <= M_EXPAND_MAX => BigUint::from(base).pow(v as u32).to_string(),
        _ => format!("{base}^{n}"),
    }
}

fn encoding_for(set: &GridSet) -> Encoding {
    if set.len() * 8 > set.geometry().num_cells() {
        Encoding::HexBitset
    } else {
        Encoding::CellList
    }
}

pub fn decompose<T: Real>(
    e: &GridSet,
    alpha: &Rational,
    delta: &Rational,
    opts: DecomposeOptions,
) -> Result<Decomposition> {
    if e.is_empty() {
        return Err(QmdError::EmptySet);
    }
    let (p, eps) = pipeline_constants(delta)?;
    let geom = *e.geometry();
    let sweep = CubeSweep::new(e, opts.clip)?;
    let counts = CoverCounts::new(&sweep, &eps);
    let n = choose_n(&counts, &eps, alpha, opts.mode)?;
    let n_u = n_saturating(&n);
    let z = counts.z_set(n_u).intersection(e);
    let g = e.difference(&z);
    let b = BadCubeSet::from_sweep(&sweep, &eps).restrict_to(&g);
    let assignment = assign_collections(&b, &g, n_u)?;
    let part = coding_partition(&g, &b, &assignment);

    let pairs = select_pairs(&part.pieces, opts.pairs);
    let certificates: Vec<Certificate> = pairs
        .par_iter()
        .map(|&(j, x, y)| {
            let c = connect::<T>(e, x, y, p, delta);
            Certificate {
                x,
                y,
                class: j + 1,
                steps: c.steps.iter().map(|s| s.to_f64_lossy()).collect(),
                length: c.length.to_f64_lossy(),
                max_step: c.max_step.to_f64_lossy(),
                distance: c.distance.to_f64_lossy(),
                strict: c.passes(),
                pass: c.passes_with_slack(),
                method: c.method,
                points: c.points,
            }
        })
        .collect();

    Ok(Decomposition {
        params: Params {
            alpha: *alpha,
            delta: *delta,
            p,
            epsilon: eps,
            m: m_string(geom.dim(), &n),
            n: n.to_string(),
            mode: opts.mode,
            clip: opts.clip,
            collections: assignment.num_collections,
        },
        pieces: part.pieces.iter().map(|f| SetFile::encode(f, encoding_for(f))).collect(),
        garbage: SetFile::encode(&z, encoding_for(&z)),
        words: part.words,
        certificates,
        manifest: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub pieces_in_set: bool,
    pub pieces_disjoint: bool,
    pub covers_set: bool,
    pub garbage_in_set: bool,
    #[serde(with = "serde_rational")]
    pub garbage_measure: Rational,
    pub garbage_small: bool,
    pub connectivity: Option<WellConnectedVerdict>,
    /// Cells breaking the partition (at most a few).
    pub witnesses: Vec<usize>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.pieces_in_set
            && self.pieces_disjoint
            && self.covers_set
            && self.garbage_in_set
            && self.garbage_small
            && self.connectivity.as_ref().is_some_and(|c| c.passed())
    }
}

/// Re-checks a decomposition against `E`: the partition, `λ(Z) < α`, and
/// well-connectedness of every piece on the selected pairs.
pub fn verify_decomposition<T: Real>(d: &Decomposition, e: &GridSet, pairs: PairPolicy) -> Result<VerifyReport> {
    let geom = *e.geometry();
    let pieces: Vec<GridSet> = d.pieces.iter().map(SetFile::decode).collect::<Result<_>>()?;
    let z = d.garbage.decode()?;
    if pieces.iter().chain([&z]).any(|f| *f.geometry() != geom) {
        return Err(QmdError::Domain("decomposition and set geometries differ".into()));
    }
    let mut witnesses = Vec::new();
    let mut seen = GridSet::empty(geom);
    let mut disjoint = true;
    for f in pieces.iter().chain([&z]) {
        let overlap = seen.intersection(f);
        if !overlap.is_empty() {
            disjoint = false;
            witnesses.extend(overlap.iter().take(4));
        }
        seen = seen.union(f);
    }
    let outside = seen.difference(e);
    witnesses.extend(outside.iter().take(4));
    let missing = e.difference(&seen);
    witnesses.extend(missing.iter().take(4));
    let pieces_in_set = pieces.iter().all(|f| f.is_subset(e));
    let connectivity =
        if pieces_in_set { Some(verify_well_connected::<T>(&pieces, e, &d.params.delta, pairs)?) } else { None };
    Ok(VerifyReport {
        pieces_in_set,
        pieces_disjoint: disjoint,
        covers_set: missing.is_empty(),
        garbage_in_set: z.is_subset(e),
        garbage_measure: z.measure(),
        garbage_small: z.measure() < d.params.alpha,
        connectivity,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::GridGeometry;
    use crate::gridset::{gen_family, FamilyKind};

    #[test]
    fn full_set_is_one_piece() {
        let g = GridGeometry::new(2, 4).unwrap();
        let e = GridSet::full(g);
        let d = decompose::<f64>(&e, &Rational::new(1, 20), &Rational::new(2, 5), DecomposeOptions::default()).unwrap();
        assert_eq!(d.pieces.len(), 1);
        assert_eq!(d.pieces[0].decode().unwrap(), e);
        assert!(d.garbage.decode().unwrap().is_empty());
        assert_eq!(d.params.n, "1");
        assert!(d.certificates.iter().all(|c| c.pass));
        let r = verify_decomposition::<f64>(&d, &e, PairPolicy::Sample { n: 300, seed: 1 }).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn random_set_partition_and_round_trip() {
        let g = GridGeometry::new(1, 8).unwrap();
        let e = gen_family(&FamilyKind::Bernoulli { p: 0.5, seed: 11 }, g).unwrap();
        let opts = DecomposeOptions { pairs: PairPolicy::Sample { n: 2000, seed: 3 }, ..Default::default() };
        let d = decompose::<f64>(&e, &Rational::new(1, 10), &Rational::new(2, 5), opts).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        let back: Decomposition = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
        let r = verify_decomposition::<f64>(&back, &e, PairPolicy::Sample { n: 500, seed: 2 }).unwrap();
        assert!(r.pieces_disjoint && r.covers_set && r.garbage_small, "{r:?}");
        assert!(d.certificates.iter().all(|c| c.pass));
    }

    #[test]
    fn corrupted_piece_is_caught() {
        let g = GridGeometry::new(1, 6).unwrap();
        let e = gen_family(&FamilyKind::Stripes { k: 2 }, g).unwrap();
        let mut d =
            decompose::<f64>(&e, &Rational::new(1, 10), &Rational::new(2, 5), DecomposeOptions::default()).unwrap();
        let mut f = d.pieces[0].decode().unwrap();
        let outside = (0..g.num_cells()).find(|&i| !e.contains(i)).unwrap();
        f.insert(outside);
        d.pieces[0] = SetFile::encode(&f, Encoding::CellList);
        let r = verify_decomposition::<f64>(&d, &e, PairPolicy::Exhaustive).unwrap();
        assert!(!r.passed());
        assert!(r.witnesses.contains(&outside));
    }

    #[test]
    fn symbolic_class_bound() {
        assert_eq!(m_string(1, &BigUint::from(2u32)), "16");
        assert_eq!(m_string(2, &BigUint::from(1000u32)), "10^1000");
    }
}
