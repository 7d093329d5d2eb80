//! Generalised maximum modulus `M_{j,k}(r, f)`, maximum modulus sequences,
//! the `R(f)` surrogate and the growth constant `B`.
//!
//! Everything is carried as natural logarithms. `R_2` is already around
//! `1e12` for `exp(z + 1/z)` and `R_3` is far outside double range.

use std::collections::HashMap;
use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::RwLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::dsl::{CompiledMap, Image};
use crate::sphere::{chart_inverse, ChartIndex, GeometryError, SpherePoint};

/// `ln(OVERFLOW_CAP)`: log-moduli above this are outside double range.
pub const LOG_RANGE: f64 = 690.7755278982137;

/// Relative slack on `log M > 2 log r` so that `M = r^2` is not accepted
/// through rounding.
const SQUARE_MARGIN: f64 = 1e-9;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModulusError {
    #[error("radius {r} is below rho_S = {rho}")]
    RadiusBelowRho { r: f64, rho: f64 },
    #[error("at least 64 circle samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("every sample on the circle |x|_{j} = {r} underflowed onto a puncture")]
    AllSamplesUnderflow { j: usize, r: f64 },
    #[error("no sample on the circle |x|_{j} = {r} could be evaluated")]
    NoResolvedSamples { j: usize, r: f64 },
    #[error("itinerary prefix of length {len} is too short for depth {depth}")]
    ItineraryTooShort { len: usize, depth: usize },
    #[error("radius grid must be non-empty and strictly increasing")]
    BadGrid,
    #[error("no radius on the grid satisfies M > r^2 and log M / log r >= e for all chart pairs")]
    RfNotFound,
    #[error("growth estimate needs at least 4 radii, got {0}")]
    TooFewRadii(usize),
    #[error("log M is not finite and positive at r = {0}; growth is undefined there")]
    GrowthUndefined(f64),
    #[error("iterated exponential E_n is defined here for 1 <= n <= 4, got {0}")]
    IteratedExpRange(u32),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModulusParams {
    pub n_samples: usize,
    pub refine_iters: usize,
}

impl Default for ModulusParams {
    fn default() -> Self {
        Self { n_samples: 4096, refine_iters: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusEstimate {
    /// `log` of the largest `|f(x)|_k` seen; `+inf` if that value overflowed
    /// with no log-domain route.
    pub value_log: f64,
    pub argmax: SpherePoint,
    pub samples: usize,
    pub refinement_depth: usize,
    /// Samples whose image was indeterminate.
    pub unresolved: usize,
}

/// Outcome of measuring `log |f(x)|_k` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LogSample {
    Value(f64),
    /// `f(x)` was flushed exactly onto puncture `k`: `|f(x)|_k` is beyond
    /// double range.
    Underflow,
    Unresolved,
}

/// `log |f(x)|_k`, through the symbolic `log |f|` whenever that applies.
pub(crate) fn log_modulus_of_image(map: &CompiledMap, x: SpherePoint, k: ChartIndex) -> LogSample {
    let s = map.punctures();
    let z = x.finite();
    let yk = (k.get() > 0).then(|| s.finite_punctures()[k.get() - 1]);
    let symbolic = |neg: bool| {
        z.and_then(|z| map.log_abs(z)).map(|v| LogSample::Value(if neg { -v } else { v }))
    };
    if k.get() == 0 {
        if let Some(v) = symbolic(false) {
            return v;
        }
    } else if yk == Some(Complex64::new(0.0, 0.0)) {
        if let Some(v) = symbolic(true) {
            return v;
        }
    }
    let ev = map.eval(x);
    match ev.image {
        Image::Indeterminate => LogSample::Unresolved,
        Image::Infinity if k.get() == 0 => LogSample::Value(f64::INFINITY),
        // |f|_k ~ 1/|f| once f is huge.
        Image::Infinity => symbolic(true).unwrap_or(LogSample::Value(f64::NEG_INFINITY)),
        Image::Finite(w) => {
            if ev.underflow && s.index_of(SpherePoint::Finite(w)) == Some(k) {
                LogSample::Underflow
            } else {
                LogSample::Value(s.log_modulus(SpherePoint::Finite(w), k))
            }
        }
    }
}

struct CircleSearch<'a> {
    map: &'a CompiledMap,
    j: ChartIndex,
    k: ChartIndex,
    r: f64,
    best: f64,
    best_theta: f64,
    seen_any: bool,
    evaluated: usize,
    underflows: usize,
    unresolved: usize,
}

impl CircleSearch<'_> {
    fn point(&self, theta: f64) -> SpherePoint {
        let w = Complex64::from_polar(self.r, theta);
        chart_inverse(SpherePoint::Finite(w), self.j, self.map.punctures())
    }

    /// Value used for comparisons. Unresolved samples rank below everything;
    /// an underflow onto puncture `k` ranks above everything.
    fn sample(&mut self, theta: f64) -> f64 {
        self.evaluated += 1;
        let v = match log_modulus_of_image(self.map, self.point(theta), self.k) {
            LogSample::Value(v) => v,
            LogSample::Underflow => {
                self.underflows += 1;
                f64::INFINITY
            }
            LogSample::Unresolved => {
                self.unresolved += 1;
                return f64::NEG_INFINITY;
            }
        };
        if !self.seen_any || v > self.best {
            self.best = v;
            self.best_theta = theta;
            self.seen_any = true;
        }
        v
    }
}

/// `log M_{j,k}(r, f)`: the maximum of `|f(x)|_k` over `|x|_j = r`.
///
/// The circle is sampled at `n_samples` equispaced chart angles, then
/// golden-section search runs `refine_iters` steps on the two sample
/// intervals around the best sample. The result is the maximum over every
/// evaluated point, so more refinement never lowers it. A sample flushed
/// onto puncture `k` counts as `+inf` unless every sample is.
pub fn estimate_m(
    map: &CompiledMap,
    j: ChartIndex,
    k: ChartIndex,
    r: f64,
    params: ModulusParams,
) -> Result<ModulusEstimate, ModulusError> {
    let s = map.punctures();
    s.chart(j.get())?;
    s.chart(k.get())?;
    if !(r >= s.rho_s()) {
        return Err(ModulusError::RadiusBelowRho { r, rho: s.rho_s() });
    }
    if params.n_samples < 64 {
        return Err(ModulusError::TooFewSamples(params.n_samples));
    }
    let mut c = CircleSearch {
        map,
        j,
        k,
        r,
        best: f64::NEG_INFINITY,
        best_theta: 0.0,
        seen_any: false,
        evaluated: 0,
        underflows: 0,
        unresolved: 0,
    };
    let step = 2.0 * PI / params.n_samples as f64;
    for i in 0..params.n_samples {
        c.sample(step * i as f64);
    }
    if c.underflows == params.n_samples {
        return Err(ModulusError::AllSamplesUnderflow { j: j.get(), r });
    }
    if !c.seen_any {
        return Err(ModulusError::NoResolvedSamples { j: j.get(), r });
    }

    if params.refine_iters > 0 && c.best.is_finite() {
        let (mut a, mut b) = (c.best_theta - step, c.best_theta + step);
        let mut x1 = b - GOLDEN * (b - a);
        let mut x2 = a + GOLDEN * (b - a);
        let mut f1 = c.sample(x1);
        let mut f2 = c.sample(x2);
        for _ in 2..params.refine_iters {
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLDEN * (b - a);
                f1 = c.sample(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLDEN * (b - a);
                f2 = c.sample(x2);
            }
        }
    }

    Ok(ModulusEstimate {
        value_log: c.best,
        argmax: c.point(c.best_theta),
        samples: c.evaluated,
        refinement_depth: params.refine_iters,
        unresolved: c.unresolved,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationReason {
    /// `R_{n-1}` exceeds the evaluation range.
    RangeExhausted,
    /// The maximum overflowed without a log-domain route.
    Overflow,
    /// Some circle samples were indeterminate, so the maximum is unreliable.
    Unresolved,
    /// `R_{n-1} < rho_S`: the next maximum is not defined.
    BelowRho,
}

impl fmt::Display for TruncationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruncationReason::RangeExhausted => "range_exhausted",
            TruncationReason::Overflow => "overflow",
            TruncationReason::Unresolved => "unresolved",
            TruncationReason::BelowRho => "below_rho",
        })
    }
}

/// `L_n = log R_n` along an itinerary prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxModSequence {
    pub itinerary: Vec<ChartIndex>,
    pub start_log: f64,
    /// `L_0 .. L_m`; `m < depth` iff truncated.
    pub values_log: Vec<f64>,
    /// First index that could not be computed.
    pub truncated_at: Option<(usize, TruncationReason)>,
}

impl MaxModSequence {
    /// `L_n`, or `None` past the computed prefix.
    pub fn get(&self, n: usize) -> Option<f64> {
        self.values_log.get(n).copied()
    }

    /// First `n >= 1` with `L_n <= L_{n-1}`.
    pub fn first_non_increase(&self) -> Option<usize> {
        self.values_log.windows(2).position(|w| !(w[1] > w[0])).map(|i| i + 1)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.first_non_increase().is_none()
    }
}

type StepKey = (u64, usize, usize);

/// Memoizing front end to [`estimate_m`] for one map. The step
/// `L -> log M_{j,k}(e^L)` is pure, so caching cannot change results.
pub struct ModulusEngine {
    map: CompiledMap,
    params: ModulusParams,
    steps: RwLock<HashMap<StepKey, Result<ModulusEstimate, ModulusError>>>,
}

impl ModulusEngine {
    pub fn new(map: CompiledMap, params: ModulusParams) -> Self {
        Self { map, params, steps: RwLock::new(HashMap::new()) }
    }

    pub fn map(&self) -> &CompiledMap {
        &self.map
    }

    pub fn params(&self) -> ModulusParams {
        self.params
    }

    pub fn estimate(&self, j: ChartIndex, k: ChartIndex, r: f64) -> Result<ModulusEstimate, ModulusError> {
        estimate_m(&self.map, j, k, r, self.params)
    }

    fn step(&self, log_r: f64, j: ChartIndex, k: ChartIndex) -> Result<ModulusEstimate, ModulusError> {
        let key = (log_r.to_bits(), j.get(), k.get());
        if let Some(hit) = self.steps.read().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let out = self.estimate(j, k, log_r.exp());
        self.steps.write().expect("cache lock").insert(key, out.clone());
        out
    }

    /// `L_0 = log R`, `L_n = log M_{e_{n-1}, e_n}(exp L_{n-1})` for
    /// `n <= depth`, stopping early once `exp L_{n-1}` leaves double range.
    pub fn sequence(&self, e: &[ChartIndex], r: f64, depth: usize) -> Result<MaxModSequence, ModulusError> {
        if e.len() < depth + 1 {
            return Err(ModulusError::ItineraryTooShort { len: e.len(), depth });
        }
        let mut values = vec![r.ln()];
        let mut truncated_at = None;
        for n in 1..=depth {
            let prev = values[n - 1];
            if prev > LOG_RANGE {
                truncated_at = Some((n, TruncationReason::RangeExhausted));
                break;
            }
            if prev.exp() < self.map.punctures().rho_s() {
                truncated_at = Some((n, TruncationReason::BelowRho));
                break;
            }
            let est = self.step(prev, e[n - 1], e[n])?;
            if est.unresolved > 0 {
                truncated_at = Some((n, TruncationReason::Unresolved));
                break;
            }
            if est.value_log == f64::INFINITY {
                truncated_at = Some((n, TruncationReason::Overflow));
                break;
            }
            values.push(est.value_log);
        }
        Ok(MaxModSequence { itinerary: e[..=depth].to_vec(), start_log: values[0], values_log: values, truncated_at })
    }
}

pub fn mm_sequence(
    map: &CompiledMap,
    e: &[ChartIndex],
    r: f64,
    depth: usize,
    params: ModulusParams,
) -> Result<MaxModSequence, ModulusError> {
    ModulusEngine::new(map.clone(), params).sequence(e, r, depth)
}

fn check_grid(grid: &[f64]) -> Result<(), ModulusError> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ModulusError::BadGrid);
    }
    Ok(())
}

/// Whether `log M` passes both `R(f)` conditions at radius `r`:
/// `M > r^2` and `log M / log r >= e`.
pub fn rf_conditions_hold(log_m: f64, r: f64) -> bool {
    let lr = r.ln();
    log_m > 2.0 * lr * (1.0 + SQUARE_MARGIN) && log_m >= E * lr
}

/// Numerical surrogate for `R(f)`: the smallest grid radius from which on
/// every grid radius satisfies `M_{j,k}(r) > r^2` and
/// `log M_{j,k}(r) / log r >= e` for all chart pairs.
pub fn estimate_r_f(map: &CompiledMap, grid: &[f64], params: ModulusParams) -> Result<f64, ModulusError> {
    let s = map.punctures();
    let pairs: Vec<_> = s.charts().flat_map(|j| s.charts().map(move |k| (j, k))).collect();
    estimate_r_f_on(map, grid, &pairs, params)
}

/// [`estimate_r_f`] restricted to the given chart pairs.
pub fn estimate_r_f_on(
    map: &CompiledMap,
    grid: &[f64],
    pairs: &[(ChartIndex, ChartIndex)],
    params: ModulusParams,
) -> Result<f64, ModulusError> {
    check_grid(grid)?;
    let mut found = None;
    for &r in grid.iter().rev() {
        for &(j, k) in pairs {
            let ok = match estimate_m(map, j, k, r, params) {
                Ok(est) => rf_conditions_hold(est.value_log, r),
                Err(ModulusError::AllSamplesUnderflow { .. } | ModulusError::NoResolvedSamples { .. }) => false,
                Err(e) => return Err(e),
            };
            if !ok {
                return found.ok_or(ModulusError::RfNotFound);
            }
        }
        found = Some(r);
    }
    found.ok_or(ModulusError::RfNotFound)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEstimate {
    /// Minimum over consecutive pairs of `log(log M(r)/log M(s)) / log(r/s)`.
    pub b_hat: f64,
    /// Smallest consecutive radius ratio.
    pub alpha_hat: f64,
    /// Smallest radius of the fit.
    pub rho0_hat: f64,
    /// RMS residual of the least-squares line through the origin.
    pub fit_residual: f64,
    /// Least-squares slope through the origin.
    pub ls_slope: f64,
    pub pair_slopes: Vec<f64>,
}

/// Growth constant `B` in `log(log M(r)/log M(s)) >= B log(r/s)`.
pub fn estimate_growth_b(
    map: &CompiledMap,
    j: ChartIndex,
    k: ChartIndex,
    radii: &[f64],
    params: ModulusParams,
) -> Result<GrowthEstimate, ModulusError> {
    if radii.len() < 4 {
        return Err(ModulusError::TooFewRadii(radii.len()));
    }
    check_grid(radii)?;
    let mut log_m = Vec::with_capacity(radii.len());
    for &r in radii {
        let v = estimate_m(map, j, k, r, params)?.value_log;
        if !(v.is_finite() && v > 0.0) {
            return Err(ModulusError::GrowthUndefined(r));
        }
        log_m.push(v);
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 1..radii.len() {
        xs.push((radii[i] / radii[i - 1]).ln());
        ys.push((log_m[i] / log_m[i - 1]).ln());
    }
    let pair_slopes: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y / x).collect();
    let b_hat = pair_slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let ls_slope = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let fit_residual =
        (xs.iter().zip(&ys).map(|(x, y)| (y - ls_slope * x).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    let alpha_hat = radii.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
    Ok(GrowthEstimate { b_hat, alpha_hat, rho0_hat: radii[0], fit_residual, ls_slope, pair_slopes })
}

/// `E_1 = 1`, `E_n = exp(E_{n-1})`; `E_5` overflows doubles.
pub fn iterated_exp(n: u32) -> Result<f64, ModulusError> {
    if !(1..=4).contains(&n) {
        return Err(ModulusError::IteratedExpRange(n));
    }
    Ok((1..n).fold(1.0, |e, _| f64::exp(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::PunctureSet;

    fn map(text: &str) -> CompiledMap {
        CompiledMap::parse(text, PunctureSet::punctured_plane()).unwrap()
    }

    const J0: ChartIndex = ChartIndex(0);
    const J1: ChartIndex = ChartIndex(1);

    #[test]
    fn closed_form_maximum() {
        let f = map("exp(z+1/z)");
        for (j, k) in [(J0, J0), (J1, J0), (J0, J1), (J1, J1)] {
            let est = estimate_m(&f, j, k, 2.0, ModulusParams::default()).unwrap();
            assert!((est.value_log - 2.5).abs() < 1e-12, "{j} {k}: {}", est.value_log);
        }
        let id = map("z");
        let est = estimate_m(&id, J0, J0, 7.0, ModulusParams::default()).unwrap();
        assert!((est.value_log.exp() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_finds_off_grid_maximum() {
        // max of Re(e^{0.3 i} z) on |z| = 3 sits at angle -0.3, between samples.
        let f = map("exp((0.955336489125606 + 0.29552020666134i)*z)");
        let coarse = estimate_m(&f, J0, J0, 3.0, ModulusParams { n_samples: 64, refine_iters: 0 }).unwrap();
        let fine = estimate_m(&f, J0, J0, 3.0, ModulusParams { n_samples: 64, refine_iters: 40 }).unwrap();
        assert!(coarse.value_log < 3.0 - 1e-5);
        assert!((fine.value_log - 3.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_refinement() {
        let f = map("exp((0.955336489125606 + 0.29552020666134i)*z + 1/z)");
        let mut last = f64::NEG_INFINITY;
        for it in 0..40 {
            let v = estimate_m(&f, J1, J0, 2.5, ModulusParams { n_samples: 64, refine_iters: it }).unwrap().value_log;
            assert!(v >= last, "refine {it}: {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = map("exp(z+1/z)");
        assert!(matches!(
            estimate_m(&f, J0, J0, 1.5, ModulusParams::default()),
            Err(ModulusError::RadiusBelowRho { .. })
        ));
        assert!(matches!(
            estimate_m(&f, J0, J0, 3.0, ModulusParams { n_samples: 32, refine_iters: 0 }),
            Err(ModulusError::TooFewSamples(32))
        ));
        assert!(matches!(
            estimate_m(&map("exp(-z^2)*0"), J0, J0, 3.0, ModulusParams::default()),
            Ok(ModulusEstimate { value_log, .. }) if value_log == f64::NEG_INFINITY
        ));
        assert_eq!(
            estimate_m(&map("exp(-1000 + 0*z) + 0"), J0, J1, 3.0, ModulusParams::default()),
            Err(ModulusError::AllSamplesUnderflow { j: 0, r: 3.0 })
        );
    }

    #[test]
    fn sequence_closed_form() {
        let f = map("exp(z+1/z)");
        let e = vec![J0; 3];
        let seq = mm_sequence(&f, &e, 3.0, 2, ModulusParams::default()).unwrap();
        let want = [3f64.ln(), 3.0 + 1.0 / 3.0, 28.0672988878734];
        for (got, want) in seq.values_log.iter().zip(want) {
            assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
        }
        assert!(seq.is_strictly_increasing());
        let deeper = mm_sequence(&f, &vec![J0; 6], 3.0, 5, ModulusParams::default()).unwrap();
        assert_eq!(deeper.values_log.len(), 4);
        assert_eq!(deeper.truncated_at, Some((4, TruncationReason::RangeExhausted)));
        assert!(matches!(
            mm_sequence(&f, &e, 3.0, 3, ModulusParams::default()),
            Err(ModulusError::ItineraryTooShort { len: 3, depth: 3 })
        ));
    }

    #[test]
    fn identity_sequence_is_flat() {
        let seq = mm_sequence(&map("z"), &[J0; 4], 5.0, 3, ModulusParams::default()).unwrap();
        assert!(seq.values_log.iter().all(|v| (v - 5f64.ln()).abs() < 1e-12));
        assert_eq!(seq.first_non_increase(), Some(1));
    }

    #[test]
    fn r_f_surrogate() {
        let grid: Vec<f64> = (2..=50).map(f64::from).collect();
        let p = ModulusParams { n_samples: 256, refine_iters: 10 };
        assert_eq!(estimate_r_f(&map("exp(z+1/z)"), &grid, p), Ok(2.0));
        assert_eq!(estimate_r_f(&map("z"), &grid, p), Err(ModulusError::RfNotFound));
        assert_eq!(estimate_r_f(&map("z^2"), &grid, p), Err(ModulusError::RfNotFound));
        assert_eq!(estimate_r_f(&map("z"), &[3.0, 2.0], p), Err(ModulusError::BadGrid));
    }

    #[test]
    fn iterated_exponentials() {
        assert_eq!(iterated_exp(1), Ok(1.0));
        assert!((iterated_exp(2).unwrap() - E).abs() < 1e-15);
        assert!((iterated_exp(3).unwrap() - 15.154262241479262).abs() < 1e-12);
        assert!(iterated_exp(4).unwrap() > 3.8e6);
        assert_eq!(iterated_exp(0), Err(ModulusError::IteratedExpRange(0)));
        assert_eq!(iterated_exp(5), Err(ModulusError::IteratedExpRange(5)));
    }

    #[test]
    fn growth_needs_four_radii() {
        let f = map("exp(z+1/z)");
        assert_eq!(
            estimate_growth_b(&f, J0, J0, &[4.0, 8.0, 16.0], ModulusParams::default()),
            Err(ModulusError::TooFewRadii(3))
        );
    }
}
