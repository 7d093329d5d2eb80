//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! process fails if a criterion fails that is not listed in
//! [`KNOWN_FAILURES`], or if a listed one starts passing.

use std::f64::consts::E;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use punctum_core::dsl::{parse, CompiledMap, Expr, ParseError};
use punctum_core::itinerary::Itinerary;
use punctum_core::modulus::{estimate_m, mm_sequence, ModulusEngine, ModulusParams};
use punctum_core::orbit::{Classifier, ClassifyParams};
use punctum_core::raster::{
    classify_grid_with_threads, fate_grid_bytes, render_ppm, ClassificationRaster, Selector, ViewWindow,
};
use punctum_core::sphere::{ChartIndex, PunctureSet};
use punctum_core::verify::{
    verify_boundary_identities, verify_components, verify_en_inequality, verify_invariance_and_disjointness,
    verify_mmseq_lemma, verify_remark_counterexample, BoundaryConfig, EnConfig, InvarianceConfig, MmseqConfig,
    Status, VerificationReport, REMARK_F_MINUS_4, REMARK_LOGLOG_MINUS_4, REMARK_LOGLOG_MINUS_6,
};

/// Criteria that fail for a documented reason.
const KNOWN_FAILURES: &[(u8, &str)] = &[(
    8,
    "components of the (0)* escaping set detach into sub-pixel-connected islands; \
     isolated large components grow with resolution (20, 94, 316, 1212 at 128, 256, 512, 1024 px)",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn expz() -> CompiledMap {
    CompiledMap::parse("exp(z + 1/z)", PunctureSet::punctured_plane()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn c1_modulus_oracle() -> Outcome {
    let f = expz();
    let params = ModulusParams { n_samples: 4096, refine_iters: 30 };
    let t = Instant::now();
    let mut ests = Vec::new();
    for r in [2.0f64, 3.0, 5.0] {
        ests.push((r, estimate_m(&f, ChartIndex(0), ChartIndex(0), r, params).unwrap().value_log));
    }
    let elapsed = t.elapsed();
    let mut ok = secs(elapsed) < 1.0;
    let mut d = String::new();
    for (r, log_m) in ests {
        // closed form: |f| = exp((r + 1/r) cos theta) on |z| = r
        let closed = r + 1.0 / r;
        let brute = (0..1_000_000)
            .map(|i| {
                let z = Complex64::from_polar(r, std::f64::consts::TAU * i as f64 / 1e6);
                (z + 1.0 / z).re
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let err = (log_m - closed).exp_m1().abs();
        ok &= err <= 1e-6 && (brute - closed).abs() <= 1e-9;
        write!(d, "r={r} rel_err={err:.1e} ").unwrap();
    }
    write!(d, "time={:.3}s", secs(elapsed)).unwrap();
    outcome(ok, d)
}

fn c2_sequence_oracle() -> Outcome {
    let seq = mm_sequence(&expz(), &[ChartIndex(0); 3], 3.0, 2, ModulusParams::default()).unwrap();
    let expected = [1.098612, 3.333333, 28.067280];
    let ok = seq.values_log.len() == 3 && seq.values_log.iter().zip(expected).all(|(v, e)| rel_err(*v, e) <= 1e-3);
    outcome(ok, format!("log R_n = {:?}", seq.values_log))
}

fn c3_lemma_suite() -> Outcome {
    let good = verify_mmseq_lemma(&expz(), &MmseqConfig::default()).unwrap();
    let z = CompiledMap::parse("z", PunctureSet::punctured_plane()).unwrap();
    let degenerate = verify_mmseq_lemma(&z, &MmseqConfig::default()).unwrap();
    let ok = good.status == Status::Pass && degenerate.status == Status::Fail && degenerate.get("a.pass") == Some(0.0);
    outcome(
        ok,
        format!(
            "exp(z + 1/z): {} (a.margin={:.4}, r_f={}); z: {} (a.pass={})",
            good.status,
            good.get("a.margin").unwrap_or(f64::NAN),
            good.get("r_f").unwrap_or(f64::NAN),
            degenerate.status,
            degenerate.get("a.pass").unwrap_or(f64::NAN)
        ),
    )
}

fn c4_en_inequality() -> Outcome {
    let f = expz();
    let at10 = verify_en_inequality(&f, &EnConfig::default()).unwrap();
    let at3 = verify_en_inequality(&f, &EnConfig { r: 3.0, ..EnConfig::default() }).unwrap();
    let v1 = at10.get("value_1").unwrap_or(f64::NAN);
    let v2 = at10.get("value_2").unwrap_or(f64::NAN);
    let pre = matches!(&at3.status, Status::Skipped(why) if why.starts_with("precondition"));
    let ok = at10.status == Status::Pass
        && v1 >= 1.0
        && v2 >= E
        && (v1 - 1.478).abs() <= 1e-2
        && (v2 - 7.787).abs() <= 1e-2
        && pre;
    outcome(ok, format!("R=10: {} values {v1:.4} {v2:.4}; R=3: {}", at10.status, at3.record()))
}

fn c5_remark() -> Outcome {
    let rep = verify_remark_counterexample().unwrap();
    let m = |k: &str| rep.get(k).unwrap_or(f64::NAN);
    let oracle = |s: &str| s.parse::<f64>().unwrap();
    let (l4, l6, f4) = (m("loglog_at_minus_4"), m("loglog_at_minus_6"), m("f_at_minus_4"));
    let ok = rep.status == Status::Pass
        && (l4 - oracle(REMARK_LOGLOG_MINUS_4)).abs() <= 1e-3
        && l4 >= E * E
        && (l6 - oracle(REMARK_LOGLOG_MINUS_6)).abs() <= 1e-3
        && l6 >= E.powi(3)
        && (f4 - oracle(REMARK_F_MINUS_4)).abs() <= 1e-6;
    outcome(ok, format!("f(-4)={f4:.9} loglog(-4)={l4:.7} loglog(-6)={l6:.7}"))
}

struct Rasters {
    report: VerificationReport,
    base: ClassificationRaster,
    elapsed: Duration,
}

fn boundary_rasters() -> Rasters {
    let cfg = BoundaryConfig::standard(512).unwrap();
    let t = Instant::now();
    let (report, base, _) = verify_boundary_identities(&expz(), &cfg).unwrap();
    Rasters { report, base, elapsed: t.elapsed() }
}

fn c6_boundaries(r: &Rasters) -> Outcome {
    let h = r.report.get("hausdorff_px_e1_e2").unwrap_or(f64::NAN);
    let ok = h <= 4.0 && secs(r.elapsed) < 60.0;
    outcome(ok, format!("hausdorff={h:.3}px jaccard={:.3} time={:.2}s (f and f^2)", r.report.get("jaccard_e1_e2").unwrap_or(f64::NAN), secs(r.elapsed)))
}

fn c7_iterate(r: &Rasters) -> Outcome {
    let h = r.report.get("hausdorff_px_f_fp").unwrap_or(f64::NAN);
    outcome(h <= 4.0, format!("hausdorff={h:.3}px jaccard={:.3}", r.report.get("jaccard_f_fp").unwrap_or(f64::NAN)))
}

fn c8_components(r: &Rasters) -> Outcome {
    let s = PunctureSet::punctured_plane();
    let e0 = verify_components(&r.base, &Selector::Equivalent(Itinerary::constant(ChartIndex(0))), &s, 16);
    let any = verify_components(&r.base, &Selector::FastEscaping, &s, 16);
    let v = e0.get("violations").unwrap_or(f64::NAN);
    outcome(
        e0.status == Status::Pass,
        format!(
            "(0)* components: {} large, {v} isolated; all fast escaping cells: {} large, {} isolated",
            e0.get("large_components").unwrap_or(f64::NAN),
            any.get("large_components").unwrap_or(f64::NAN),
            any.get("violations").unwrap_or(f64::NAN)
        ),
    )
}

fn c9_invariance() -> Outcome {
    let rep = verify_invariance_and_disjointness(&expz(), &InvarianceConfig::standard(1000, 7).unwrap()).unwrap();
    let m = |k: &str| rep.get(k).unwrap_or(f64::NAN);
    let ok = rep.status == Status::Pass
        && m("shift_agreement") >= 0.99
        && m("r_agreement") >= 0.99
        && m("uniqueness") == 1.0;
    outcome(
        ok,
        format!(
            "witnesses={} shift={:.4} R={:.4} unique={:.4} exceptions={}",
            m("witnesses"),
            m("shift_agreement"),
            m("r_agreement"),
            m("uniqueness"),
            rep.exceptions.len()
        ),
    )
}

fn c10_determinism() -> Outcome {
    let params = ClassifyParams { max_depth: 64, ..ClassifyParams::default() };
    let cl = Classifier::new(ModulusEngine::new(expz(), ModulusParams::default()), params, None).unwrap();
    let window = ViewWindow::square(Complex64::new(0.0, 0.0), 3.0, 1024).unwrap();
    let t1 = Instant::now();
    let one = classify_grid_with_threads(&cl, &window, 1).unwrap();
    let d1 = t1.elapsed();
    let t8 = Instant::now();
    let eight = classify_grid_with_threads(&cl, &window, 8).unwrap();
    let d8 = t8.elapsed();
    let same = fate_grid_bytes(&one) == fate_grid_bytes(&eight) && render_ppm(&one, &[]) == render_ppm(&eight, &[]);
    let soft = if secs(d8) <= 10.0 { "met" } else { "missed" };
    outcome(
        same && secs(d8) <= 60.0,
        format!(
            "identical={same} time_1={:.2}s time_8={:.2}s soft_10s={soft} hw_threads={}",
            secs(d1),
            secs(d8),
            std::thread::available_parallelism().map_or(0, |n| n.get())
        ),
    )
}

fn c11_parser() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/expressions.txt");
    let text = std::fs::read_to_string(path).expect("parser corpus");
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).collect();
    let mut bad = Vec::new();
    for l in &lines {
        match parse(l) {
            Ok(e) if e.to_string() == *l && parse(&e.to_string()).as_ref() == Ok(&e) => {}
            _ => bad.push(*l),
        }
    }
    let z = || Expr::Var;
    let one = || Expr::Real(1.0);
    let fixtures = [
        ("exp(z + 1/z)", Expr::exp(Expr::add(z(), Expr::div(one(), z())))),
        ("z^2*exp(z)", Expr::mul(Expr::pow(z(), 2), Expr::exp(z()))),
        ("exp(exp(1/z) + z)", Expr::exp(Expr::add(Expr::exp(Expr::div(one(), z())), z()))),
    ];
    let fixtures_ok = fixtures.iter().all(|(t, e)| parse(t).as_ref() == Ok(e) && e.to_string() == *t);
    let rejects = [("z^0.5", 2), ("z^2^3", 3), ("exp(z)^z", 7)];
    let rejects_ok = rejects
        .iter()
        .all(|(t, at)| parse(t) == Err(ParseError::NonIntegerExponent { offset: *at }));
    outcome(
        lines.len() == 50 && bad.is_empty() && fixtures_ok && rejects_ok,
        format!(
            "corpus={} mismatches={bad:?} fixtures={fixtures_ok} positioned_rejections={rejects_ok}",
            lines.len()
        ),
    )
}

fn main() {
    let mut results: Vec<(u8, &str, Outcome)> = vec![
        (1, "modulus oracle", c1_modulus_oracle()),
        (2, "sequence oracle", c2_sequence_oracle()),
        (3, "growth lemma suite", c3_lemma_suite()),
        (4, "iterated-exponential inequality", c4_en_inequality()),
        (5, "second-iterate counterexample", c5_remark()),
    ];
    let rasters = boundary_rasters();
    results.push((6, "boundaries of (0)* and (1)*", c6_boundaries(&rasters)));
    results.push((7, "boundary of f against f^2", c7_iterate(&rasters)));
    results.push((8, "escaping components reach S", c8_components(&rasters)));
    drop(rasters);
    results.push((9, "invariance and disjointness", c9_invariance()));
    results.push((10, "determinism and performance", c10_determinism()));
    results.push((11, "parser", c11_parser()));

    let mut unexpected = 0;
    for (id, name, o) in &results {
        let known = KNOWN_FAILURES.iter().find(|(k, _)| k == id);
        println!("criterion {id:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        match (o.pass, known) {
            (false, Some((_, why))) => println!("    known failure: {why}"),
            (false, None) => unexpected += 1,
            (true, Some(_)) => {
                println!("    listed as a known failure but passed; update KNOWN_FAILURES");
                unexpected += 1;
            }
            (true, None) => {}
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria pass, {unexpected} unexpected", results.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
