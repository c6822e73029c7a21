//! The eight acceptance criteria, one PASS/FAIL line each.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use qmd_core::decompose::{assign_collections, coding_partition, decompose, BadCubeSet, DecomposeOptions};
use qmd_core::density::{
    carleson_sum_balls, carleson_sum_cubes, counterexample_audit, small_average_audit, z_report, BallSweep,
    CoverCounts, CubeSweep,
};
use qmd_core::gridset::corpus;
use qmd_core::{minimal_common_cube, GridGeometry, GridSet, MultiresFamily, Rational, ScaleConstant};

type Outcome = Result<String, String>;

fn r(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

fn sets(geoms: &[(usize, u32)]) -> Vec<(String, GridSet)> {
    geoms
        .iter()
        .flat_map(|&(d, l)| {
            corpus(GridGeometry::new(d, l).unwrap()).into_iter().map(move |(n, e)| (format!("d{d}L{l}/{n}"), e))
        })
        .filter(|(_, e)| !e.is_empty())
        .collect()
}

/// The first thirty nonempty corpus sets over four geometries with `L <= 8`.
fn corpus30() -> Vec<(String, GridSet)> {
    let mut all = sets(&[(1, 8), (2, 5), (1, 6), (2, 4)]);
    all.truncate(30);
    all
}

fn criterion_1() -> Outcome {
    let mut out = Vec::new();
    for k in 1..=4 {
        let a = counterexample_audit(k, k + 4, &r(1, 10)).map_err(|e| e.to_string())?;
        if !(a.within_bound && a.dyadic_half && a.below_threshold) {
            return Err(format!("k={k}: max density {} dyadic half {}", a.max_density, a.dyadic_half));
        }
        out.push(format!("k={k} max {}", a.max_density));
    }
    Ok(out.join(", "))
}

fn criterion_2() -> Outcome {
    let eps = r(1, 4);
    let sets = corpus30();
    if sets.len() < 30 {
        return Err(format!("corpus has {} sets", sets.len()));
    }
    for (name, e) in &sets {
        let geom = e.geometry();
        let cubes = carleson_sum_cubes(&CubeSweep::new(e, true).unwrap(), &eps).unwrap();
        let family = MultiresFamily::build(geom, ScaleConstant::one());
        let balls = carleson_sum_balls(&BallSweep::<f64>::new(e, &family).unwrap(), &eps).unwrap();
        for (fam, rep) in [("cubes", &cubes), ("balls", &balls)] {
            if !rep.within_bound() {
                return Err(format!("{name} {fam}: total {} above bound", rep.total));
            }
            let floor = f64::from(geom.level() + 1) * qmd_core::rational::rational_to_f64(&e.measure()) - rep.slack;
            let unfiltered = qmd_core::rational::rational_to_f64(&rep.unfiltered_total);
            if unfiltered < floor {
                return Err(format!("{name} {fam}: unfiltered {unfiltered} below {floor}"));
            }
        }
    }
    Ok(format!("{} sets, cubes and balls", sets.len()))
}

fn criterion_3() -> Outcome {
    let mut checked = 0;
    let sets = corpus30();
    for (name, e) in &sets {
        let family = MultiresFamily::build(e.geometry(), ScaleConstant::one());
        let sweep = BallSweep::<f64>::new(e, &family).unwrap();
        for eps in [r(1, 2), r(1, 4), r(1, 10)] {
            let a = small_average_audit(&sweep, &eps).map_err(|e| e.to_string())?;
            if a.violations > 0 {
                return Err(format!("{name} eps {eps}: {} violations", a.violations));
            }
            checked += a.checked;
        }
    }
    Ok(format!("{checked} balls, zero violations"))
}

fn criterion_4() -> Outcome {
    let eps = r(1, 4);
    let sets = corpus30();
    for (name, e) in &sets {
        let counts = CoverCounts::new(&CubeSweep::new(e, true).unwrap(), &eps);
        for j in 0..=10 {
            let rep = z_report(&counts, &eps, 1 << j, true).unwrap();
            if !rep.within_bound() {
                return Err(format!("{name} N={}: {} above bound", 1 << j, rep.measure));
            }
        }
        let mut prev = counts.z_set(1);
        for n in 2..=(u64::from(counts.max()) + 1).max(1025) {
            let z = counts.z_set(n);
            if !z.is_subset(&prev) {
                return Err(format!("{name}: Z_{n} not inside Z_{}", n - 1));
            }
            prev = z;
        }
    }
    Ok(format!("{} sets, N = 1..1024", sets.len()))
}

fn criterion_5() -> Outcome {
    let eps = r(1, 4);
    let mut pairs = 0u64;
    let mut runs = 0;
    for (name, e) in sets(&[(1, 4), (1, 5), (2, 2), (2, 3)]) {
        let geom = *e.geometry();
        let sweep = CubeSweep::new(&e, true).unwrap();
        let counts = CoverCounts::new(&sweep, &eps);
        let all_bad = BadCubeSet::from_sweep(&sweep, &eps);
        let empirical = counts.empirical_n(&r(1, 10)).unwrap();
        for n in [empirical, u64::from(counts.max()) + 1] {
            let g = e.difference(&counts.z_set(n).intersection(&e));
            let b = all_bad.restrict_to(&g);
            let a = assign_collections(&b, &g, n).map_err(|err| format!("{name} N={n}: {err}"))?;
            let part = coding_partition(&g, &b, &a);
            let bound = BigUint::from(3u32.pow(geom.dim() as u32) + 1).pow(n as u32);
            if BigUint::from(part.pieces.len()) > bound {
                return Err(format!("{name} N={n}: {} classes", part.pieces.len()));
            }
            for f in &part.pieces {
                let pts: Vec<_> = f.points().collect();
                for (i, x) in pts.iter().enumerate() {
                    for y in &pts[i + 1..] {
                        if b.contains(&minimal_common_cube(&geom, x, y)) {
                            return Err(format!("{name} N={n}: {x:?} {y:?} share a bad cube"));
                        }
                        pairs += 1;
                    }
                }
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs, {pairs} same-class pairs"))
}

fn criterion_6() -> Outcome {
    let sets = sets(&[(1, 8), (2, 6)]);
    let mut certs = 0usize;
    let mut far = 0usize;
    let mut strict = 0usize;
    for alpha in [r(1, 10), r(1, 20)] {
        for delta in [r(2, 5), r(1, 5)] {
            for (name, e) in &sets {
                let geom = *e.geometry();
                let tag = format!("{name} alpha {alpha} delta {delta}");
                let d = decompose::<f64>(e, &alpha, &delta, DecomposeOptions::default())
                    .map_err(|err| format!("{tag}: {err}"))?;
                let z = d.garbage.decode().unwrap();
                if z.measure() >= alpha {
                    return Err(format!("{tag}: garbage {}", z.measure()));
                }
                let mut union = z;
                for f in &d.pieces {
                    let f = f.decode().unwrap();
                    if !f.is_disjoint(&union) {
                        return Err(format!("{tag}: pieces overlap"));
                    }
                    union = union.union(&f);
                }
                if union != *e {
                    return Err(format!("{tag}: pieces do not tile the set"));
                }
                let far_sq = 64i64 * 64;
                for c in &d.certificates {
                    if !c.pass {
                        return Err(format!("{tag}: certificate {}-{} fails", c.x, c.y));
                    }
                    strict += usize::from(c.strict);
                    if geom.point(c.x).sq_dist(&geom.point(c.y)) >= far_sq {
                        far += 1;
                        if !c.strict {
                            return Err(format!("{tag}: far pair {}-{} needs slack", c.x, c.y));
                        }
                    }
                }
                certs += d.certificates.len();
            }
        }
    }
    Ok(format!("{} runs, {certs} certificates ({strict} strict), {far} far pairs strict", 4 * sets.len()))
}

fn criterion_7() -> Outcome {
    let mut parts = Vec::new();
    for (i, name) in common::FUNCTIONALS.iter().enumerate() {
        let n = common::check_functional(name, 1000, 7000 + i as u64)?;
        parts.push(format!("{name} {n}"));
    }
    Ok(parts.join(", "))
}

fn qmd(dir: &Path, args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_qmd")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    match o.status.code() {
        Some(0) => Ok(()),
        c => Err(format!("qmd {args:?} exited {c:?}: {}", String::from_utf8_lossy(&o.stderr))),
    }
}

fn criterion_8() -> Outcome {
    let t = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = t.path();
    qmd(
        dir,
        &["--seed", "9", "gen", "--kind", "bernoulli", "--dim", "2", "--level", "5", "--p", "0.6", "--out", "set.json"],
    )?;
    qmd(dir, &["decompose", "--set", "set.json", "--alpha", "0.1", "--delta", "0.4", "--out", "d.json"])?;
    let runs: [(&str, Vec<&str>); 5] = [
        ("set.json", vec![]),
        ("cubes.json", vec!["analyze", "--set", "set.json", "--epsilon", "1/4", "--family", "cubes"]),
        ("balls.json", vec!["analyze", "--set", "set.json", "--epsilon", "1/4", "--family", "balls", "--A2", "2"]),
        ("d.json", vec![]),
        ("v.json", vec!["--seed", "42", "verify", "--decomp", "d.json", "--set", "set.json", "--pairs", "sample:2000"]),
    ];
    for (out, args) in &runs {
        if !args.is_empty() {
            let mut a = vec!["--threads", "1"];
            a.extend(args);
            a.extend(["--out", out]);
            qmd(dir, &a)?;
        }
        let original = fs::read(dir.join(out)).map_err(|e| e.to_string())?;
        for threads in ["1", "3", "8"] {
            let copy = format!("replay-{threads}-{out}");
            qmd(dir, &["--threads", threads, "replay", "--from", out, "--out", &copy])?;
            if fs::read(dir.join(&copy)).map_err(|e| e.to_string())? != original {
                return Err(format!("{out} differs after replay with {threads} threads"));
            }
        }
    }
    Ok("5 manifests, threads 1/3/8".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("counterexample densities", criterion_1, Duration::from_secs(10)),
        ("Carleson boundedness", criterion_2, Duration::from_secs(120)),
        ("small average forces density", criterion_3, Duration::from_secs(120)),
        ("garbage-set bound", criterion_4, Duration::from_secs(60)),
        ("same-class pairs avoid bad cubes", criterion_5, Duration::from_secs(120)),
        ("end-to-end decomposition", criterion_6, Duration::from_secs(300)),
        ("oracle equivalence", criterion_7, Duration::from_secs(180)),
        ("determinism", criterion_8, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let verdict = match &outcome {
            Ok(_) if took > *budget => "FAIL",
            Ok(_) => "PASS",
            Err(_) => "FAIL",
        };
        let detail = match &outcome {
            Ok(s) | Err(s) => s,
        };
        println!("criterion {} {name}: {verdict} ({:.2} s; {detail})", i + 1, took.as_secs_f64());
        failed += usize::from(verdict == "FAIL");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
