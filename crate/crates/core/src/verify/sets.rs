use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsl::{compose_power, CompiledMap, Image};
use crate::itinerary::Itinerary;
use crate::modulus::{ModulusEngine, ModulusParams};
use crate::orbit::{level_set_member, Classifier, ClassifyParams, Fate, LevelSetVerdict};
use crate::raster::{
    classify_grid, extract_boundary, label_components, raster_distance, ClassificationRaster, Selector, ViewWindow,
};
use crate::sphere::{ChartIndex, PunctureSet, SpherePoint};

use super::{Check, VerificationReport, VerifyError};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConfig {
    pub window: ViewWindow,
    pub e1: Itinerary,
    pub e2: Itinerary,
    /// Iterate order for the `J(f) = J(f^p)` comparison.
    pub p: u32,
    pub tolerance_px: f64,
    pub classify: ClassifyParams,
    pub modulus: ModulusParams,
}

impl BoundaryConfig {
    /// `[-3, 3]^2` at `n x n`, `e1 = (0)*`, `e2 = (1)*`, `p = 2`, 4 px.
    pub fn standard(n: usize) -> Result<Self, VerifyError> {
        Ok(Self {
            window: ViewWindow::square(Complex64::new(0.0, 0.0), 3.0, n)?,
            e1: Itinerary::constant(ChartIndex(0)),
            e2: Itinerary::constant(ChartIndex(1)),
            p: 2,
            tolerance_px: 4.0,
            classify: ClassifyParams::default(),
            modulus: ModulusParams::default(),
        })
    }
}

/// Classifies the window for `f` and `f^p`, then compares the boundaries.
pub fn verify_boundary_identities(
    map: &CompiledMap,
    cfg: &BoundaryConfig,
) -> Result<(VerificationReport, ClassificationRaster, ClassificationRaster), VerifyError> {
    if cfg.p == 0 {
        return Err(VerifyError::Invalid("p must be at least 1".into()));
    }
    let base = Classifier::new(ModulusEngine::new(map.clone(), cfg.modulus), cfg.classify, None)?;
    let base_raster = classify_grid(&base, &cfg.window)?;
    let iter_raster = if cfg.p == 1 {
        base_raster.clone()
    } else {
        let fp = compose_power(map, cfg.p);
        let cl = Classifier::new(ModulusEngine::new(fp, cfg.modulus), cfg.classify, None)?;
        classify_grid(&cl, &cfg.window)?
    };
    let rep = boundary_identities_from_rasters(&base_raster, &iter_raster, &cfg.e1, &cfg.e2, cfg.p, cfg.tolerance_px)?;
    Ok((rep, base_raster, iter_raster))
}

/// Hausdorff distances between the boundaries of `A_{e1}(f)`, `A_{e2}(f)`
/// and `A_{e1'}(f^p)`, where `e1'` is `e1` downsampled by `p`.
pub fn boundary_identities_from_rasters(
    base: &ClassificationRaster,
    iterate: &ClassificationRaster,
    e1: &Itinerary,
    e2: &Itinerary,
    p: u32,
    tolerance_px: f64,
) -> Result<VerificationReport, VerifyError> {
    if e1.is_equivalent(e2) {
        return Err(VerifyError::Invalid(format!("itineraries {e1} and {e2} are equivalent")));
    }
    let mut rep = VerificationReport::for_check(Check::BoundaryIdentities, tolerance_px);
    let e1p = e1.downsample(p as usize);
    let b1 = extract_boundary(base, &Selector::Equivalent(e1.clone()));
    let b2 = extract_boundary(base, &Selector::Equivalent(e2.clone()));
    let bp = extract_boundary(iterate, &Selector::Equivalent(e1p.clone()));
    rep.measure("boundary_px_e1", b1.count() as f64);
    rep.measure("boundary_px_e2", b2.count() as f64);
    rep.measure("boundary_px_iterate", bp.count() as f64);
    if b1.is_empty() || b2.is_empty() || bp.is_empty() {
        rep.skip("empty boundary raster");
        return Ok(rep);
    }
    let d12 = raster_distance(&b1, &b2)?;
    let d1p = raster_distance(&b1, &bp)?;
    rep.measure("hausdorff_px_e1_e2", d12.hausdorff_px);
    rep.measure("jaccard_e1_e2", d12.jaccard);
    rep.measure("hausdorff_px_f_fp", d1p.hausdorff_px);
    rep.measure("jaccard_f_fp", d1p.jaccard);
    rep.fail_unless(d12.hausdorff_px <= tolerance_px && d1p.hausdorff_px <= tolerance_px);
    Ok(rep)
}

/// Every selected component of at least `min_pixels` cells must touch the
/// window frame or a puncture disk.
pub fn verify_components(
    raster: &ClassificationRaster,
    selector: &Selector,
    s: &PunctureSet,
    min_pixels: usize,
) -> VerificationReport {
    let mut rep = VerificationReport::for_check(Check::ComponentsUnbounded, 0.0);
    let lab = label_components(raster, selector, s);
    let large: Vec<_> = lab.components.iter().filter(|c| c.pixels >= min_pixels).collect();
    let (cols, _) = raster.dims();
    let mut violations = 0usize;
    for c in &large {
        if !c.touches_frame_or_puncture() {
            violations += 1;
            let first = lab.labels.iter().position(|&l| l == c.label).unwrap_or(0);
            let z = raster.window.pixel_center(first % cols, first / cols);
            rep.exceptions.push(format!("component {} of {} px isolated near {} {}", c.label, c.pixels, z.re, z.im));
        }
    }
    rep.measure("components", lab.components.len() as f64);
    rep.measure("large_components", large.len() as f64);
    rep.measure("min_pixels", min_pixels as f64);
    rep.measure("violations", violations as f64);
    if large.is_empty() {
        rep.skip("no component reaches the size threshold");
    } else {
        rep.fail_unless(violations == 0);
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceConfig {
    pub window: ViewWindow,
    pub n_points: usize,
    pub seed: u64,
    /// Second start radius is `ratio * r_start`.
    pub ratio: f64,
    pub classify: ClassifyParams,
    pub modulus: ModulusParams,
    /// Depth of the level-set tests against alternative itineraries.
    pub disjoint_depth: usize,
    /// Required agreement fraction.
    pub threshold: f64,
}

impl InvarianceConfig {
    pub fn standard(n_points: usize, seed: u64) -> Result<Self, VerifyError> {
        Ok(Self {
            window: ViewWindow::square(Complex64::new(0.0, 0.0), 3.0, 512)?,
            n_points,
            seed,
            ratio: 1.5,
            classify: ClassifyParams::default(),
            modulus: ModulusParams::default(),
            disjoint_depth: 8,
            threshold: 0.99,
        })
    }
}

/// Orbit step at which the emitted itinerary starts, and its symbols.
fn escaping(fate: &Fate) -> Option<(usize, &[ChartIndex])> {
    match fate {
        Fate::FastEscapingCandidate { itinerary, offset, .. } => Some((*offset, itinerary)),
        _ => None,
    }
}

fn decided(fate: &Fate) -> bool {
    !matches!(fate, Fate::Undecided { .. })
}

/// Two itinerary windows of the same orbit, starting at steps `a0` and
/// `b0`, agree where they overlap.
fn windows_agree(a0: usize, a: &[ChartIndex], b0: usize, b: &[ChartIndex]) -> bool {
    let lo = a0.max(b0);
    let hi = (a0 + a.len()).min(b0 + b.len());
    (lo..hi).all(|t| a[t - a0] == b[t - b0])
}

fn same_fate(a: &Fate, a_shift: usize, b: &Fate) -> bool {
    match (escaping(a), escaping(b)) {
        (Some((la, ea)), Some((lb, eb))) => windows_agree(la + a_shift, ea, lb, eb),
        (None, None) => matches!(
            (a, b),
            (Fate::BoundedCandidate { .. }, Fate::BoundedCandidate { .. })
        ),
        _ => false,
    }
}

/// Itineraries tested for disjointness: every constant and every 2-cycle.
fn alternatives(s: &PunctureSet) -> Vec<Itinerary> {
    let mut out: Vec<Itinerary> = s.charts().map(Itinerary::constant).collect();
    for j in s.charts() {
        for k in s.charts().filter(|k| k.get() > j.get()) {
            out.push(Itinerary::new(Vec::new(), vec![j, k]).expect("non-empty cycle"));
        }
    }
    out
}

/// On seeded samples from the window: classification commutes with one
/// application of `f` (shift compatibility), does not depend on the start
/// radius (`R` against `ratio * R`), and no point certifies membership for
/// an itinerary inequivalent to the one it emitted.
pub fn verify_invariance_and_disjointness(
    map: &CompiledMap,
    cfg: &InvarianceConfig,
) -> Result<VerificationReport, VerifyError> {
    if cfg.n_points < 100 {
        return Err(VerifyError::Invalid(format!("need at least 100 points, got {}", cfg.n_points)));
    }
    let mut rep = VerificationReport::for_check(Check::InvarianceDisjointness, 1.0 - cfg.threshold);
    let s = map.punctures();
    let engine = || ModulusEngine::new(map.clone(), cfg.modulus);
    let ca = Classifier::new(engine(), cfg.classify, None)?;
    let params_b = ClassifyParams { r_start: cfg.classify.r_start * cfg.ratio, ..cfg.classify };
    let cb = Classifier::new(engine(), params_b, None)?;
    let alts = alternatives(s);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w = cfg.window;
    let (mut excluded, mut witnesses) = (0usize, 0usize);
    let (mut shift_n, mut shift_ok, mut r_n, mut r_ok) = (0usize, 0usize, 0usize, 0usize);
    let (mut unique_n, mut unique_ok) = (0usize, 0usize);
    let near = |x: SpherePoint, r: f64| s.charts().any(|j| (s.log_modulus(x, j) - r.ln()).abs() <= 1e-12);

    for _ in 0..cfg.n_points {
        let z = Complex64::new(
            w.center.re + (rng.gen::<f64>() - 0.5) * w.width,
            w.center.im + (rng.gen::<f64>() - 0.5) * w.height,
        );
        let x = SpherePoint::Finite(z);
        if s.contains(x) || near(x, ca.params().r_start) || near(x, cb.params().r_start) {
            excluded += 1;
            rep.exceptions.push(format!("excluded {} {}: on a puncture or a start circle", z.re, z.im));
            continue;
        }
        let fa = ca.classify(x)?.fate;

        // shift compatibility
        match map.eval(x).image {
            Image::Finite(fz) if !s.contains(SpherePoint::Finite(fz)) => {
                let ff = ca.classify(SpherePoint::Finite(fz))?.fate;
                if decided(&fa) && decided(&ff) {
                    shift_n += 1;
                    if same_fate(&ff, 1, &fa) {
                        shift_ok += 1;
                    } else {
                        rep.exceptions.push(format!("shift {} {}: x {fa:?} vs f(x) {ff:?}", z.re, z.im));
                    }
                }
            }
            _ => rep.exceptions.push(format!("shift {} {}: f(x) not in the plane", z.re, z.im)),
        }

        // R independence
        let fb = cb.classify(x)?.fate;
        if decided(&fa) && decided(&fb) {
            r_n += 1;
            if same_fate(&fa, 0, &fb) {
                r_ok += 1;
            } else {
                rep.exceptions.push(format!("R {} {}: {fa:?} vs {fb:?}", z.re, z.im));
            }
        }

        // disjointness
        if let Some((offset, window)) = escaping(&fa) {
            witnesses += 1;
            unique_n += 1;
            let tail = window.len().min(8);
            let mut unique = true;
            for alt in alts.iter().filter(|e| !e.matches_tail(window, tail)) {
                let word = alt.take(cfg.disjoint_depth + 1);
                for m in 0..=cfg.classify.max_offset.max(offset) {
                    let v = level_set_member(ca.engine(), x, &word, m, cfg.classify.r_start, cfg.disjoint_depth)?;
                    if matches!(v, LevelSetVerdict::CandidateYes { .. }) {
                        unique = false;
                        rep.exceptions.push(format!("disjoint {} {}: also in A_{alt} at offset {m}", z.re, z.im));
                    }
                }
            }
            if unique {
                unique_ok += 1;
            }
        }
    }

    let frac = |ok: usize, n: usize| if n == 0 { f64::NAN } else { ok as f64 / n as f64 };
    rep.measure("points", cfg.n_points as f64);
    rep.measure("excluded", excluded as f64);
    rep.measure("witnesses", witnesses as f64);
    rep.measure("shift_pairs", shift_n as f64);
    rep.measure("shift_agreement", frac(shift_ok, shift_n));
    rep.measure("r_pairs", r_n as f64);
    rep.measure("r_agreement", frac(r_ok, r_n));
    rep.measure("uniqueness", frac(unique_ok, unique_n));
    if witnesses == 0 {
        rep.skip("no fast-escaping witnesses");
        return Ok(rep);
    }
    rep.fail_unless(
        frac(shift_ok, shift_n) >= cfg.threshold && frac(r_ok, r_n) >= cfg.threshold && unique_ok == unique_n,
    );
    Ok(rep)
}
