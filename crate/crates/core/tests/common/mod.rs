//! Randomized agreement between the main modules and the brute-force oracle.

#![allow(dead_code)]

use qmd_core::decompose::{build_chain, Chain, ChainMethod};
use qmd_core::density::{
    carleson_cubes_for, carleson_sum_balls, sparsity_7q, sparsity_ball, BallSweep, CoverCounts, CubeSweep,
    DistanceField,
};
use qmd_core::oracle::{
    oracle_avg_dist, oracle_carleson_balls, oracle_carleson_cubes, oracle_chain_check, oracle_cover_counts,
    oracle_min_cube, oracle_sparsity, OracleConfig, OracleRegion,
};
use qmd_core::{minimal_common_cube, Ball, DyadicCube, GridGeometry, GridSet, MultiresFamily, Rational, ScaleConstant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FUNCTIONALS: [&str; 8] = [
    "sparsity_ball",
    "sparsity_7q",
    "avg_dist",
    "carleson_cubes",
    "carleson_balls",
    "cover_counts",
    "min_cube",
    "chain_check",
];

const EPSILONS: [(i128, i128); 4] = [(1, 2), (1, 4), (1, 10), (1, 20)];

fn random_geometry(rng: &mut ChaCha8Rng, small: bool) -> GridGeometry {
    let d = rng.random_range(1..=2usize);
    let max = match (d, small) {
        (1, true) => 6,
        (1, false) => 6,
        (_, true) => 3,
        (_, false) => 4,
    };
    GridGeometry::new(d, rng.random_range(1..=max)).unwrap()
}

fn random_set(rng: &mut ChaCha8Rng, geom: GridGeometry) -> GridSet {
    let p = rng.random_range(1..10) as f64 / 10.0;
    let mut e = GridSet::from_fn(geom, |_| rng.random::<f64>() < p);
    e.insert(rng.random_range(0..geom.num_cells()));
    e
}

fn random_eps(rng: &mut ChaCha8Rng) -> Rational {
    let (n, d) = EPSILONS[rng.random_range(0..EPSILONS.len())];
    Rational::new(n, d)
}

fn random_a2(rng: &mut ChaCha8Rng, dim: usize) -> Rational {
    match rng.random_range(0..3) {
        0 => Rational::from_integer(1),
        1 => Rational::new(9, 4),
        _ => Rational::from_integer(49 * dim as i128),
    }
}

fn random_cube(rng: &mut ChaCha8Rng, geom: &GridGeometry) -> DyadicCube {
    let k = rng.random_range(0..=geom.level());
    let corner: Vec<i64> = (0..geom.dim()).map(|_| rng.random_range(0..1i64 << k)).collect();
    DyadicCube::new(k, &corner)
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// One instance of `name`; `Err` describes a disagreement.
pub fn check_instance(name: &str, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let cfg = OracleConfig::default();
    match name {
        "sparsity_ball" => {
            let geom = random_geometry(rng, false);
            let e = random_set(rng, geom);
            let center = rng.random_range(0..geom.num_cells());
            let level = rng.random_range(0..=geom.level());
            let a2 = random_a2(rng, geom.dim());
            let b = Ball { center: geom.point(center), level, scale: ScaleConstant::from_square(a2).unwrap() };
            let main = sparsity_ball(&e, &b).map(|s| (s.sup_sq, s.scale_sq));
            let oracle = oracle_sparsity(&cfg, &e, &OracleRegion::Ball { center, level, a2 }).unwrap();
            (main == oracle).then_some(()).ok_or(format!("{geom:?} ball {center}@{level}: {main:?} vs {oracle:?}"))
        }
        "sparsity_7q" => {
            let geom = random_geometry(rng, false);
            let e = random_set(rng, geom);
            let cube = random_cube(rng, &geom);
            let clip = rng.random::<bool>();
            let main = sparsity_7q(&e, &cube, clip).map(|s| (s.sup_sq, s.scale_sq));
            let oracle = oracle_sparsity(&cfg, &e, &OracleRegion::Cube7 { cube, clip }).unwrap();
            (main == oracle).then_some(()).ok_or(format!("{geom:?} {cube} clip {clip}: {main:?} vs {oracle:?}"))
        }
        "avg_dist" => {
            let geom = random_geometry(rng, false);
            let e = random_set(rng, geom);
            let center = rng.random_range(0..geom.num_cells());
            let level = rng.random_range(0..=geom.level());
            let a2 = random_a2(rng, geom.dim());
            let b = Ball { center: geom.point(center), level, scale: ScaleConstant::from_square(a2).unwrap() };
            let main = DistanceField::new(&e).unwrap().avg_dist::<f64>(&b).unwrap().value();
            let oracle = oracle_avg_dist(&cfg, &e, center, level, &a2).unwrap();
            rel_close(main, oracle).then_some(()).ok_or(format!("{geom:?} ball {center}@{level}: {main} vs {oracle}"))
        }
        "carleson_cubes" => {
            let geom = random_geometry(rng, true);
            let e = random_set(rng, geom);
            let eps = random_eps(rng);
            let clip = rng.random::<bool>();
            let main = carleson_cubes_for(&e, &eps, clip).unwrap().total;
            let oracle = oracle_carleson_cubes(&cfg, &e, &eps, clip).unwrap();
            (main == oracle).then_some(()).ok_or(format!("{geom:?} eps {eps} clip {clip}: {main} vs {oracle}"))
        }
        "carleson_balls" => {
            let geom = random_geometry(rng, true);
            let e = random_set(rng, geom);
            let eps = random_eps(rng);
            let a2 = random_a2(rng, geom.dim());
            let family = MultiresFamily::build(&geom, ScaleConstant::from_square(a2).unwrap());
            let main = carleson_sum_balls(&BallSweep::<f64>::new(&e, &family).unwrap(), &eps).unwrap().total;
            let centers: Vec<Vec<usize>> = (0..=geom.level()).map(|k| family.nets().level(k).to_vec()).collect();
            let oracle = oracle_carleson_balls(&cfg, &e, &eps, &centers, &a2).unwrap();
            (main == oracle).then_some(()).ok_or(format!("{geom:?} eps {eps} A2 {a2}: {main} vs {oracle}"))
        }
        "cover_counts" => {
            let geom = random_geometry(rng, true);
            let e = random_set(rng, geom);
            let eps = random_eps(rng);
            let clip = rng.random::<bool>();
            let main = CoverCounts::new(&CubeSweep::new(&e, clip).unwrap(), &eps).counts().to_vec();
            let oracle = oracle_cover_counts(&cfg, &e, &eps, clip).unwrap();
            (main == oracle).then_some(()).ok_or(format!("{geom:?} eps {eps} clip {clip}"))
        }
        "min_cube" => {
            let geom = random_geometry(rng, false);
            let x = geom.point(rng.random_range(0..geom.num_cells()));
            let y = geom.point(rng.random_range(0..geom.num_cells()));
            let main = minimal_common_cube(&geom, &x, &y);
            let oracle = oracle_min_cube(&cfg, &geom, &x, &y).unwrap();
            (main == oracle).then_some(()).ok_or(format!("{geom:?} {x:?} {y:?}: {main} vs {oracle}"))
        }
        "chain_check" => {
            let geom = random_geometry(rng, false);
            let e = random_set(rng, geom);
            let cells: Vec<usize> = e.iter().collect();
            let x = cells[rng.random_range(0..cells.len())];
            let y = cells[rng.random_range(0..cells.len())];
            let delta = [Rational::new(2, 5), Rational::new(1, 5), Rational::new(1, 2)][rng.random_range(0..3)];
            let chain: Chain<f64> = if rng.random::<bool>() {
                let q = minimal_common_cube(&geom, &geom.point(x), &geom.point(y));
                match build_chain(&e, x, y, &q, rng.random_range(2..8), &delta) {
                    Ok(c) => c,
                    Err(_) => return Ok(()),
                }
            } else {
                let mut pts = vec![x];
                pts.extend((0..rng.random_range(0..6)).map(|_| cells[rng.random_range(0..cells.len())]));
                pts.push(y);
                Chain::measure(&geom, pts, &delta, ChainMethod::None)
            };
            let v = oracle_chain_check(&cfg, &e, &chain.points, x, y, &delta).unwrap();
            let agree = v.in_set && v.endpoints && v.step_ok == chain.step_ok && v.length_ok == chain.length_ok;
            agree
                .then_some(())
                .ok_or(format!("{geom:?} {:?}: {v:?} vs {} {}", chain.points, chain.step_ok, chain.length_ok))
        }
        other => panic!("unknown functional {other}"),
    }
}

/// Runs `n` instances of `name` from `seed`; returns the first disagreement.
pub fn check_functional(name: &str, n: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        check_instance(name, &mut rng).map_err(|m| format!("{name} #{i}: {m}"))?;
    }
    Ok(n)
}
