use std::fmt::Write as _;
use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;

use punctum_core::dsl::CompiledMap;
use punctum_core::modulus::{estimate_r_f, mm_sequence, ModulusEngine, ModulusError};
use punctum_core::orbit::{Classifier, Fate};
use punctum_core::raster::{
    classify_grid, fate_grid_bytes, render_ppm, sidecar_text, write_atomic, ClassificationRaster, Selector,
};
use punctum_core::sphere::{ChartIndex, SpherePoint};
use punctum_core::verify::{
    verify_boundary_identities, verify_components, verify_en_inequality, verify_invariance_and_disjointness,
    verify_mmseq_lemma, verify_remark_counterexample, BoundaryConfig, Check, EnConfig, InvarianceConfig,
    MmseqConfig, VerificationReport, REMARK_MAP,
};

use crate::config::{complex_literal, Format, RunConfig};
use crate::error::CliError;

pub const VERSION: &str = concat!("punctum ", env!("CARGO_PKG_VERSION"));

fn compile(cfg: &RunConfig, text: &str) -> Result<CompiledMap, CliError> {
    CompiledMap::parse(text, cfg.punctures.clone()).map_err(|e| CliError::Config(format!("map `{text}`: {e}")))
}

/// `R(f)` surrogate on the grid `rho_S * 1.1^i`, `i < 48`; `None` if no
/// grid radius qualifies.
fn surrogate_r_f(cfg: &RunConfig, map: &CompiledMap) -> Result<Option<f64>, CliError> {
    let rho = cfg.punctures.rho_s();
    let grid: Vec<f64> = (0..48).map(|i| rho * 1.1f64.powi(i)).collect();
    match estimate_r_f(map, &grid, cfg.modulus) {
        Ok(r) => Ok(Some(r)),
        Err(ModulusError::RfNotFound) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn classifier(cfg: &RunConfig, map: CompiledMap) -> Result<Classifier, CliError> {
    let r_f = surrogate_r_f(cfg, &map)?;
    Ok(Classifier::new(ModulusEngine::new(map, cfg.modulus), cfg.classify, r_f)?)
}

/// Runs `work` on a pool of the configured size.
fn in_pool<T: Send>(cfg: &RunConfig, work: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.count())
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

fn header_lines(cfg: &RunConfig) -> Vec<String> {
    let mut out = vec![VERSION.to_string()];
    out.extend(cfg.effective_entries().into_iter().map(|(k, v)| format!("{k} = {v}")));
    out
}

/// Classifies the window and writes the configured artifacts. Returns the
/// written paths.
pub fn render(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.output.dir;
    if !dir.is_dir() {
        return Err(CliError::Config(format!("output directory {} does not exist", dir.display())));
    }
    if cfg.output.formats.is_empty() {
        return Err(CliError::Config("output.formats is empty".into()));
    }
    let cl = classifier(cfg, compile(cfg, cfg.map_text()?)?)?;
    let raster = in_pool(cfg, || classify_grid(&cl, &cfg.window))??;
    write_artifacts(cfg, &raster)
}

fn write_artifacts(cfg: &RunConfig, raster: &ClassificationRaster) -> Result<Vec<PathBuf>, CliError> {
    let base = cfg.output.dir.join(&cfg.output.name);
    let path = |ext: &str| base.with_extension(ext);
    let mut written = Vec::new();
    for f in &cfg.output.formats {
        let (p, bytes) = match f {
            Format::Ppm => (path("ppm"), render_ppm(raster, &header_lines(cfg))),
            Format::Fate => (path("fate"), fate_grid_bytes(raster)),
            Format::Sidecar => {
                let mut extra = vec![("tool".to_string(), VERSION.to_string())];
                extra.extend(cfg.effective_entries().into_iter().map(|(k, v)| (format!("config.{k}"), v)));
                (path("txt"), sidecar_text(raster, &extra).into_bytes())
            }
        };
        write_atomic(&p, &bytes)?;
        written.push(p);
    }
    Ok(written)
}

/// CSV of the maximum modulus sequence: `n,e_n,log_R_n,truncated`. A
/// truncated sequence ends with one row whose value is empty.
pub fn mmseq(cfg: &RunConfig, e: Option<&str>, r: Option<f64>, depth: usize) -> Result<String, CliError> {
    let map = compile(cfg, cfg.map_text()?)?;
    let e = match e {
        Some(t) => t.parse().map_err(|err| CliError::Config(format!("itinerary `{t}`: {err}")))?,
        None => cfg.itineraries.first().cloned().ok_or_else(|| CliError::Config("no itinerary configured".into()))?,
    };
    e.check_nu(cfg.punctures.nu()).map_err(|err| CliError::Config(err.to_string()))?;
    let r = r.unwrap_or(cfg.classify.r_start);
    match surrogate_r_f(cfg, &map)? {
        Some(r_f) if !(r > r_f) => {
            return Err(CliError::Precondition(format!("R = {r} does not exceed the R(f) surrogate {r_f}")))
        }
        None => return Err(CliError::Precondition("no R(f) surrogate found for this map".into())),
        Some(_) => {}
    }
    let symbols = e.take(depth + 1);
    let seq = mm_sequence(&map, &symbols, r, depth, cfg.modulus)?;
    let mut out = String::from("n,e_n,log_R_n,truncated\n");
    for (n, j) in symbols.iter().enumerate() {
        match seq.get(n) {
            Some(v) => writeln!(out, "{n},{j},{v},false").unwrap(),
            None => {
                writeln!(out, "{n},{j},,true").unwrap();
                break;
            }
        }
    }
    Ok(out)
}

fn symbols_text(e: &[ChartIndex]) -> String {
    e.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(",")
}

/// One `key=value` line describing the fate of `point`.
pub fn classify(cfg: &RunConfig, point: &str) -> Result<String, CliError> {
    let z: Complex64 = complex_literal(point)?;
    let x = SpherePoint::Finite(z);
    if let Some(j) = cfg.punctures.index_of(x) {
        return Err(CliError::Precondition(format!("point {point} is puncture {j}")));
    }
    let cl = classifier(cfg, compile(cfg, cfg.map_text()?)?)?;
    let c = cl.classify(x)?;
    let body = match &c.fate {
        Fate::FastEscapingCandidate { itinerary, offset, certified_depth, margin } => format!(
            "fate=FastEscapingCandidate itinerary={} offset={offset} depth={certified_depth} margin={margin}",
            symbols_text(itinerary)
        ),
        Fate::BoundedCandidate { bound } => format!("fate=BoundedCandidate L={bound}"),
        Fate::Undecided { reason } => format!("fate=Undecided reason={reason}"),
    };
    Ok(format!("point={} {body}", point.trim()))
}

/// One verification job: the checks that share work on one map.
enum Job {
    Remark,
    Map(String),
}

type Tagged = (Check, usize, String, VerificationReport);

fn run_map_checks(cfg: &RunConfig, idx: usize, text: &str) -> Result<Vec<Tagged>, CliError> {
    let map = compile(cfg, text)?;
    let wants = |c: Check| cfg.verify.checks.contains(&c);
    let e = |i: usize| {
        cfg.itineraries
            .get(i)
            .cloned()
            .ok_or_else(|| CliError::Config(format!("verification needs at least {} itineraries", i + 1)))
    };
    let mut out = Vec::new();
    let mut tag = |c: Check, rep: VerificationReport| out.push((c, idx, text.to_string(), rep));

    if wants(Check::MmseqLemma) {
        let rho = cfg.punctures.rho_s();
        let mc = MmseqConfig {
            grid: (2..=50).map(f64::from).filter(|&r| r >= rho).collect(),
            params: cfg.modulus,
            ..MmseqConfig::default()
        };
        tag(Check::MmseqLemma, verify_mmseq_lemma(&map, &mc)?);
    }
    if wants(Check::EnInequality) {
        let ec = EnConfig { itinerary: e(0)?, params: cfg.modulus, ..EnConfig::default() };
        tag(Check::EnInequality, verify_en_inequality(&map, &ec)?);
    }
    let classifying = [Check::BoundaryIdentities, Check::ComponentsUnbounded, Check::InvarianceDisjointness];
    if classifying.iter().any(|&c| wants(c)) {
        if let Some(r_f) = surrogate_r_f(cfg, &map)?.filter(|&r_f| !(cfg.classify.r_start > r_f)) {
            for c in classifying.into_iter().filter(|&c| wants(c)) {
                let mut rep = VerificationReport::for_check(c, 0.0);
                rep.measure("r_start", cfg.classify.r_start);
                rep.measure("r_f", r_f);
                rep.skip(format!(
                    "precondition violated: R_start = {} does not exceed the R(f) surrogate {r_f}",
                    cfg.classify.r_start
                ));
                tag(c, rep);
            }
            return Ok(out);
        }
    }
    if wants(Check::BoundaryIdentities) || wants(Check::ComponentsUnbounded) {
        let bc = BoundaryConfig {
            window: cfg.window,
            e1: e(0)?,
            e2: e(1)?,
            p: cfg.verify.iterate,
            tolerance_px: cfg.verify.tolerance_px,
            classify: cfg.classify,
            modulus: cfg.modulus,
        };
        let (rep, base, _) = verify_boundary_identities(&map, &bc)?;
        if wants(Check::BoundaryIdentities) {
            tag(Check::BoundaryIdentities, rep);
        }
        if wants(Check::ComponentsUnbounded) {
            let sel = Selector::Equivalent(e(0)?);
            tag(Check::ComponentsUnbounded, verify_components(&base, &sel, &cfg.punctures, cfg.verify.min_pixels));
        }
    }
    if wants(Check::InvarianceDisjointness) {
        let ic = InvarianceConfig {
            window: cfg.window,
            classify: cfg.classify,
            modulus: cfg.modulus,
            ..InvarianceConfig::standard(cfg.verify.points, cfg.seed)?
        };
        tag(Check::InvarianceDisjointness, verify_invariance_and_disjointness(&map, &ic)?);
    }
    Ok(out)
}

/// Runs the configured checks on every map. Returns the record lines,
/// ordered by check name and then map, and whether any check failed.
pub fn verify(cfg: &RunConfig) -> Result<(Vec<String>, bool), CliError> {
    let maps: Vec<String> = if cfg.verify.maps.is_empty() {
        vec![cfg.map_text()?.to_string()]
    } else {
        cfg.verify.maps.clone()
    };
    let mut jobs: Vec<Job> = maps.into_iter().map(Job::Map).collect();
    if cfg.verify.checks.contains(&Check::RemarkCounterexample) {
        jobs.push(Job::Remark);
    }
    let results: Vec<Result<Vec<Tagged>, CliError>> = in_pool(cfg, || {
        jobs.par_iter()
            .enumerate()
            .map(|(i, job)| match job {
                Job::Remark => Ok(vec![(Check::RemarkCounterexample, i, REMARK_MAP.to_string(), verify_remark_counterexample()?)]),
                Job::Map(text) => run_map_checks(cfg, i, text),
            })
            .collect()
    })?;
    let mut tagged = Vec::new();
    for r in results {
        tagged.extend(r?);
    }
    tagged.sort_by(|a, b| (a.0.name(), a.1).cmp(&(b.0.name(), b.1)));
    let failed = tagged.iter().any(|t| t.3.is_failure());
    let lines = tagged
        .iter()
        .map(|(_, _, map, rep)| format!("{} map=\"{}\"", rep.record(), map.replace('"', "\\\"")))
        .collect();
    Ok((lines, failed))
}
