//! Subcommand bodies.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use qmd_core::decompose::{
    decompose as run_decompose, verify_decomposition, DecomposeOptions, Decomposition, NMode, PairPolicy,
};
use qmd_core::density::{
    carleson_cubes_for, carleson_sum_balls, counterexample_audit, dense_scale_search, ktilde_of, z_bound, BallSweep,
    CarlesonReport, CoverCounts, CubeSweep,
};
use qmd_core::gridset::{gen_counterexample, gen_family, BallSpec, Encoding, FamilyKind};
use qmd_core::multires::{build_nets, theoretical_overlap_bound};
use qmd_core::rational::{big_to_string, parse_rational, rational_to_f64, rational_to_string};
use qmd_core::{GridGeometry, GridSet, MultiresFamily, Rational, ScaleConstant, SetFile};
use serde::Serialize;
use serde_json::{json, Value};

use crate::manifest::Manifest;
use crate::{Precision, Status};

pub struct Ctx<'a> {
    pub argv: &'a [String],
    pub seed: u64,
    pub precision: Precision,
}

impl Ctx<'_> {
    fn manifest(&self, command: &str, inputs: &[(&str, &Path)]) -> Result<Manifest> {
        Manifest::new(command, self.argv, self.seed, inputs)
    }
}

/// Runs `$body` with `$t` bound to the selected scalar.
macro_rules! with_real {
    ($p:expr, $t:ident => $body:expr) => {
        match $p {
            Precision::F64 => {
                type $t = f64;
                $body
            }
            Precision::F32 => {
                type $t = f32;
                $body
            }
        }
    };
}

fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn geometry_arg(s: &str) -> Result<(usize, u32), String> {
    let (d, l) = s.split_once(',').ok_or("expected d,L")?;
    Ok((d.trim().parse().map_err(|_| "bad dimension")?, l.trim().parse().map_err(|_| "bad level")?))
}

fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn with_manifest<S: Serialize>(value: &S, m: &Manifest) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("manifest".into(), m.to_value());
        }
        None => bail!("output is not a JSON object"),
    }
    Ok(v)
}

fn write_json(out: Option<&Path>, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    write_bytes(out, text.as_bytes())
}

fn write_csv<R: Serialize>(out: Option<&Path>, m: &Manifest, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(m.csv_header().into_bytes());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    write_bytes(out, &bytes)
}

fn read_set(path: &Path) -> Result<GridSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(SetFile::from_json(&text)?.decode()?)
}

fn scale_from(a: &Option<Rational>, a2: &Option<Rational>) -> Result<ScaleConstant> {
    Ok(match (a, a2) {
        (Some(_), Some(_)) => bail!("give at most one of --A and --A2"),
        (Some(a), None) => ScaleConstant::from_value(*a)?,
        (None, Some(a2)) => ScaleConstant::from_square(*a2)?,
        (None, None) => ScaleConstant::one(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Full,
    Bernoulli,
    Cantor,
    BallUnion,
    Stripes,
    Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    CellList,
    HexBitset,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long)]
    pub level: u32,
    /// Stripe index for `stripes` and `counterexample`.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Cell probability for `bernoulli`.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 1)]
    pub depth: u32,
    /// JSON list of `{"center": [..], "radius": r}` for `ball-union`.
    #[arg(long)]
    pub balls: Option<String>,
    #[arg(long, value_enum, default_value_t = EncodingArg::CellList)]
    pub encoding: EncodingArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn gen(ctx: &Ctx, a: &GenArgs) -> Result<Status> {
    let geom = GridGeometry::new(a.dim, a.level)?;
    let set = match a.kind {
        GenKind::Counterexample => {
            if a.dim != 1 {
                bail!(qmd_core::QmdError::Domain("the counterexample is one-dimensional".into()));
            }
            gen_counterexample(a.k, a.level)?
        }
        kind => {
            let family = match kind {
                GenKind::Full => FamilyKind::Full,
                GenKind::Bernoulli => FamilyKind::Bernoulli { p: a.p, seed: ctx.seed },
                GenKind::Cantor => FamilyKind::Cantor { depth: a.depth },
                GenKind::Stripes => FamilyKind::Stripes { k: a.k },
                GenKind::BallUnion => {
                    let text = a.balls.as_deref().context("ball-union needs --balls")?;
                    let balls: Vec<BallSpec> = serde_json::from_str(text).context("parsing --balls")?;
                    FamilyKind::BallUnion { balls }
                }
                GenKind::Counterexample => unreachable!(),
            };
            gen_family(&family, geom)?
        }
    };
    let encoding = match a.encoding {
        EncodingArg::CellList => Encoding::CellList,
        EncodingArg::HexBitset => Encoding::HexBitset,
    };
    let mut file = SetFile::encode(&set, encoding);
    file.manifest = Some(ctx.manifest("gen", &[])?.to_value());
    eprintln!("cells: {} of {}", set.len(), geom.num_cells());
    write_json(a.out.as_deref(), &serde_json::to_value(&file)?)?;
    Ok(Status::Ok)
}

#[derive(Debug, Args)]
pub struct NetsArgs {
    /// `d,L`.
    #[arg(long, value_parser = geometry_arg)]
    pub set_geometry: (usize, u32),
    /// Ball scale `A`.
    #[arg(long = "A", value_parser = rational_arg)]
    pub a: Option<Rational>,
    /// Ball scale given as `A^2`.
    #[arg(long = "A2", value_parser = rational_arg)]
    pub a2: Option<Rational>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn nets(ctx: &Ctx, a: &NetsArgs) -> Result<Status> {
    let (d, l) = a.set_geometry;
    let geom = GridGeometry::new(d, l)?;
    let scale = scale_from(&a.a, &a.a2)?;
    let nets = build_nets(&geom);
    let audit = nets.audit();
    let levels: Vec<&[usize]> = (0..=l).map(|k| nets.level(k)).collect();
    let v = json!({
        "dimension": d,
        "level": l,
        "A2": rational_to_string(&scale.square()),
        "levels": levels,
        "audit": audit,
        "overlapBound": theoretical_overlap_bound(d, &scale).to_string(),
        "manifest": ctx.manifest("nets", &[])?.to_value(),
    });
    write_json(a.out.as_deref(), &v)?;
    Ok(if audit.ok() { Status::Ok } else { Status::Failed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Cubes,
    Balls,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub set: PathBuf,
    #[arg(long, value_parser = rational_arg)]
    pub epsilon: Rational,
    #[arg(long, value_enum, default_value_t = FamilyArg::Cubes)]
    pub family: FamilyArg,
    /// Intersect `7Q` with the unit cube.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub clip: bool,
    #[arg(long = "A", value_parser = rational_arg)]
    pub a: Option<Rational>,
    #[arg(long = "A2", value_parser = rational_arg)]
    pub a2: Option<Rational>,
    /// Per-level sums for plotting.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LevelRow {
    level: u32,
    filtered_sum: f64,
    unfiltered_sum: f64,
}

fn level_rows(r: &CarlesonReport) -> Vec<LevelRow> {
    r.per_level
        .iter()
        .zip(&r.unfiltered_per_level)
        .map(|(f, u)| LevelRow {
            level: f.k,
            filtered_sum: rational_to_f64(&f.sum),
            unfiltered_sum: rational_to_f64(&u.sum),
        })
        .collect()
}

pub fn analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<Status> {
    let e = read_set(&a.set)?;
    let m = ctx.manifest("analyze", &[("set", &a.set)])?;
    let (report, extra) = match a.family {
        FamilyArg::Cubes => (carleson_cubes_for(&e, &a.epsilon, a.clip)?, Value::Null),
        FamilyArg::Balls => {
            let family = MultiresFamily::build(e.geometry(), scale_from(&a.a, &a.a2)?);
            with_real!(ctx.precision, T => {
                let sweep = BallSweep::<T>::new(&e, &family)?;
                let r = carleson_sum_balls(&sweep, &a.epsilon)?;
                let dense = dense_scale_search(&sweep, &a.epsilon)?;
                (r, serde_json::to_value(dense)?)
            })
        }
    };
    let ok = report.within_bound();
    let mut v = with_manifest(&report, &m)?;
    let obj = v.as_object_mut().expect("object");
    obj.insert("withinBound".into(), ok.into());
    if a.family == FamilyArg::Balls {
        obj.insert("denseScale".into(), extra);
    }
    write_json(a.out.as_deref(), &v)?;
    if let Some(path) = &a.csv {
        write_csv(Some(path), &m, &level_rows(&report))?;
    }
    eprintln!("total {} bound {}", rational_to_string(&report.total), big_to_string(&report.theoretical_bound));
    Ok(if ok { Status::Ok } else { Status::Failed })
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub set: PathBuf,
    #[arg(long, value_parser = rational_arg)]
    pub alpha: Rational,
    #[arg(long, value_parser = rational_arg)]
    pub delta: Rational,
    #[arg(long, default_value = "empirical")]
    pub mode: NMode,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub clip: bool,
    /// `exhaustive` or `sample:N`.
    #[arg(long, default_value = "sample:10000")]
    pub pairs: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn decompose(ctx: &Ctx, a: &DecomposeArgs) -> Result<Status> {
    let e = read_set(&a.set)?;
    let m = ctx.manifest("decompose", &[("set", &a.set)])?;
    let opts = DecomposeOptions { mode: a.mode, clip: a.clip, pairs: PairPolicy::parse(&a.pairs, ctx.seed)? };
    let mut d = with_real!(ctx.precision, T => run_decompose::<T>(&e, &a.alpha, &a.delta, opts)?);
    d.manifest = Some(m.to_value());
    let passed = d.certificates.iter().filter(|c| c.pass).count();
    eprintln!(
        "pieces {} garbage {} certificates {}/{}",
        d.pieces.len(),
        d.garbage.decode()?.len(),
        passed,
        d.certificates.len()
    );
    write_json(a.out.as_deref(), &serde_json::to_value(&d)?)?;
    Ok(if passed == d.certificates.len() { Status::Ok } else { Status::Failed })
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub decomp: PathBuf,
    #[arg(long)]
    pub set: PathBuf,
    /// `exhaustive` or `sample:N`.
    #[arg(long, default_value = "sample:10000")]
    pub pairs: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn verify(ctx: &Ctx, a: &VerifyArgs) -> Result<Status> {
    let e = read_set(&a.set)?;
    let text = fs::read_to_string(&a.decomp).with_context(|| format!("reading {}", a.decomp.display()))?;
    let d: Decomposition = serde_json::from_str(&text)?;
    let m = ctx.manifest("verify", &[("decomp", &a.decomp), ("set", &a.set)])?;
    let pairs = PairPolicy::parse(&a.pairs, ctx.seed)?;
    let r = with_real!(ctx.precision, T => verify_decomposition::<T>(&d, &e, pairs)?);
    let ok = r.passed();
    let mut v = with_manifest(&r, &m)?;
    v.as_object_mut().expect("object").insert("passed".into(), ok.into());
    write_json(a.out.as_deref(), &v)?;
    if !ok {
        let failures = r.connectivity.as_ref().map_or(0, |c| c.failures.len());
        eprintln!("verification failed: witnesses {:?}, failing pairs {failures}", r.witnesses);
    }
    Ok(if ok { Status::Ok } else { Status::Failed })
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    #[arg(long)]
    pub k: u32,
    /// Grid level; defaults to `k + 4`.
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long, value_parser = rational_arg, default_value = "1/10")]
    pub epsilon: Rational,
    /// `.csv` writes the per-radius rows, anything else the JSON audit.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RadiusCsv {
    r_cells: u64,
    r: String,
    max_density: String,
    max_density_f64: f64,
    argmax_x_cells: u64,
}

pub fn counterexample(ctx: &Ctx, a: &CounterexampleArgs) -> Result<Status> {
    let audit = counterexample_audit(a.k, a.level.unwrap_or(a.k + 4), &a.epsilon)?;
    let m = ctx.manifest("counterexample", &[])?;
    let csv = a.out.as_ref().is_some_and(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")));
    if csv {
        let rows: Vec<RadiusCsv> = audit
            .rows
            .iter()
            .map(|r| RadiusCsv {
                r_cells: r.r_cells,
                r: rational_to_string(&r.r),
                max_density: rational_to_string(&r.max_density),
                max_density_f64: rational_to_f64(&r.max_density),
                argmax_x_cells: r.argmax_x_cells,
            })
            .collect();
        write_csv(a.out.as_deref(), &m, &rows)?;
    } else {
        write_json(a.out.as_deref(), &with_manifest(&audit, &m)?)?;
    }
    eprintln!(
        "max density {} at x = {}, r = {}; dyadic half: {}",
        rational_to_string(&audit.max_density),
        rational_to_string(&audit.argmax_x),
        rational_to_string(&audit.argmax_r),
        audit.dyadic_half
    );
    Ok(if audit.passed() { Status::Ok } else { Status::Failed })
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub set: PathBuf,
    #[arg(long, value_parser = rational_arg, default_value = "1/4")]
    pub epsilon: Rational,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub clip: bool,
    #[arg(long = "A", value_parser = rational_arg)]
    pub a: Option<Rational>,
    #[arg(long = "A2", value_parser = rational_arg)]
    pub a2: Option<Rational>,
    /// Largest `N` of the garbage-set table, doubled from 1.
    #[arg(long, default_value_t = 1024)]
    pub max_n: u64,
    /// Receives `carleson_cubes.csv`, `carleson_balls.csv` and `zset.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct ZRow {
    n: u64,
    measure: f64,
    bound: f64,
    within_bound: bool,
}

pub fn report(ctx: &Ctx, a: &ReportArgs) -> Result<Status> {
    let e = read_set(&a.set)?;
    let m = ctx.manifest("report", &[("set", &a.set)])?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let geom = *e.geometry();

    let sweep = CubeSweep::new(&e, a.clip)?;
    let cubes = qmd_core::density::carleson_sum_cubes(&sweep, &a.epsilon)?;
    write_csv(Some(&a.out_dir.join("carleson_cubes.csv")), &m, &level_rows(&cubes))?;

    let family = MultiresFamily::build(&geom, scale_from(&a.a, &a.a2)?);
    let balls = with_real!(ctx.precision, T => carleson_sum_balls(&BallSweep::<T>::new(&e, &family)?, &a.epsilon)?);
    write_csv(Some(&a.out_dir.join("carleson_balls.csv")), &m, &level_rows(&balls))?;

    let counts = CoverCounts::new(&sweep, &a.epsilon);
    let kt = ktilde_of(&a.epsilon, geom.dim())?;
    let mut rows = Vec::new();
    let mut n = 1u64;
    while n <= a.max_n.max(1) {
        let measure = counts.z_set(n).measure();
        let bound = z_bound(&kt, geom.dim(), n);
        rows.push(ZRow {
            n,
            measure: rational_to_f64(&measure),
            bound: qmd_core::rational::big_to_f64(&bound),
            within_bound: qmd_core::rational::to_big(&measure) <= bound,
        });
        n = match n.checked_mul(2) {
            Some(v) => v,
            None => break,
        };
    }
    write_csv(Some(&a.out_dir.join("zset.csv")), &m, &rows)?;
    let ok = cubes.within_bound() && balls.within_bound() && rows.iter().all(|r| r.within_bound);
    Ok(if ok { Status::Ok } else { Status::Failed })
}
