//! Forward orbits with chart moduli, itinerary extraction, finite-depth
//! little level set tests and point classification.
//!
//! Verdicts are finite-depth statements. `FastEscapingCandidate` at depth
//! `N` means the orbit kept pace with the maximum modulus sequence for `N`
//! steps, nothing more.
//!
//! Once an orbit has overflowed it is padded as sitting at infinity, and an
//! orbit flushed onto a puncture stays there. Comparisons past the end of
//! double range follow the dominant-escape convention: if `R_n` is beyond
//! range and the orbit's modulus in chart `e_n` is also beyond range, the
//! comparison holds.

use std::fmt;

use thiserror::Error;

use crate::dsl::{CompiledMap, Image};
use crate::modulus::{log_modulus_of_image, LogSample, ModulusEngine, ModulusError, TruncationReason, LOG_RANGE};
use crate::sphere::{dominant_symbol, ChartIndex, GeometryError, PunctureSet, SpherePoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("start point {0} is a puncture")]
    StartAtPuncture(SpherePoint),
    #[error("bounded_threshold {threshold} is below rho_S = {rho}")]
    BoundedBelowRho { threshold: f64, rho: f64 },
    #[error("R_start {r_start} must exceed bounded_threshold {bounded}")]
    StartNotAboveBounded { r_start: f64, bounded: f64 },
    #[error("symbol threshold {threshold} must lie in [rho_S, R_start] = [{rho}, {r_start}]")]
    SymbolThreshold { threshold: f64, rho: f64, r_start: f64 },
    #[error("R_start {r_start} does not exceed the R(f) surrogate {r_f}")]
    StartNotAboveRf { r_start: f64, r_f: f64 },
    #[error("itinerary prefix of length {len} is too short for depth {depth}")]
    ItineraryTooShort { len: usize, depth: usize },
    #[error(transparent)]
    Modulus(#[from] ModulusError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    /// `f` of `points[step]` overflowed; the last point is `Infinity`.
    Overflow { step: usize },
    /// `f` of `points[step]` landed exactly on the puncture `y_j`.
    UnderflowArtifact { step: usize, j: ChartIndex },
    /// `f` of `points[step]` was indeterminate; nothing is known afterwards.
    Unresolved { step: usize },
}

/// `x, f(x), f^2(x), ...` with `log |f^n(x)|_j` for every chart.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRecord {
    pub points: Vec<SpherePoint>,
    /// Row-major, `stride` entries per step.
    moduli: Vec<f64>,
    stride: usize,
    pub terminated: Termination,
}

impl OrbitRecord {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `log |f^n(x)|_j` for each chart `j`.
    pub fn moduli_row(&self, n: usize) -> &[f64] {
        &self.moduli[n * self.stride..(n + 1) * self.stride]
    }

    /// `log |f^n(x)|_j`, extended past a termination by the padding rule;
    /// `None` when unknown.
    pub fn log_modulus(&self, n: usize, j: ChartIndex) -> Option<f64> {
        if n < self.points.len() {
            return Some(self.moduli[n * self.stride + j.get()]);
        }
        match self.terminated {
            Termination::Overflow { .. } => Some(if j.get() == 0 { f64::INFINITY } else { f64::NEG_INFINITY }),
            Termination::UnderflowArtifact { j: jt, .. } => {
                if j == jt {
                    Some(f64::INFINITY)
                } else {
                    Some(self.moduli[(self.points.len() - 1) * self.stride + j.get()])
                }
            }
            Termination::Completed | Termination::Unresolved { .. } => None,
        }
    }

    /// Symbol of step `n` (padded past a termination).
    pub fn symbol(&self, n: usize, s: &PunctureSet, threshold: f64) -> Option<ChartIndex> {
        let last = self.points.len() - 1;
        match self.terminated {
            Termination::Overflow { .. } if n >= last => return Some(ChartIndex(0)),
            Termination::UnderflowArtifact { j, .. } if n >= last => return Some(j),
            _ => {}
        }
        let p = *self.points.get(n)?;
        dominant_symbol(p, s, threshold).ok().flatten()
    }

    /// Largest `|f^n(x)|_j` over all stored steps and charts.
    pub fn max_modulus_log(&self) -> f64 {
        self.moduli.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Applies `map` up to `max_steps` times, stopping at overflow, at an
/// underflow onto a puncture, or at an indeterminate value.
pub fn iterate_orbit(map: &CompiledMap, x: SpherePoint, max_steps: usize) -> Result<OrbitRecord, OrbitError> {
    let s = map.punctures();
    if s.contains(x) {
        return Err(OrbitError::StartAtPuncture(x));
    }
    let stride = s.len();
    let mut points = Vec::with_capacity(max_steps.min(16) + 1);
    let mut moduli = Vec::with_capacity(stride * (max_steps.min(16) + 1));
    let push_row = |p: SpherePoint, moduli: &mut Vec<f64>| {
        for j in s.charts() {
            moduli.push(s.log_modulus(p, j));
        }
    };
    points.push(x);
    push_row(x, &mut moduli);
    let mut cur = x;
    for step in 0..max_steps {
        let ev = map.eval(cur);
        match ev.image {
            Image::Indeterminate => {
                return Ok(OrbitRecord { points, moduli, stride, terminated: Termination::Unresolved { step } });
            }
            Image::Infinity => {
                points.push(SpherePoint::Infinity);
                for j in s.charts() {
                    moduli.push(match log_modulus_of_image(map, cur, j) {
                        LogSample::Value(v) => v,
                        _ => s.log_modulus(SpherePoint::Infinity, j),
                    });
                }
                return Ok(OrbitRecord { points, moduli, stride, terminated: Termination::Overflow { step } });
            }
            Image::Finite(w) => {
                let p = SpherePoint::Finite(w);
                if let Some(jt) = s.index_of(p) {
                    points.push(p);
                    for j in s.charts() {
                        moduli.push(if j == jt {
                            match log_modulus_of_image(map, cur, j) {
                                LogSample::Value(v) => v,
                                _ => f64::INFINITY,
                            }
                        } else {
                            s.log_modulus(p, j)
                        });
                    }
                    return Ok(OrbitRecord {
                        points,
                        moduli,
                        stride,
                        terminated: Termination::UnderflowArtifact { step, j: jt },
                    });
                }
                points.push(p);
                push_row(p, &mut moduli);
                cur = p;
            }
        }
    }
    Ok(OrbitRecord { points, moduli, stride, terminated: Termination::Completed })
}

/// Symbols of every stored step.
pub fn extract_itinerary(orbit: &OrbitRecord, s: &PunctureSet, threshold: f64) -> Result<Vec<Option<ChartIndex>>, OrbitError> {
    if !(threshold >= s.rho_s()) {
        return Err(GeometryError::ThresholdBelowRho { threshold, rho: s.rho_s() }.into());
    }
    Ok((0..orbit.len()).map(|n| orbit.symbol(n, s, threshold)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSetVerdict {
    /// All comparisons `n <= depth` held; `margin` is the smallest
    /// `log|f^{l+n}(x)|_{e_n} - L_n` among those decided in double range.
    CandidateYes { depth: usize, margin: f64 },
    No { failed_at: usize },
    Undecided { at: usize },
}

/// Compares `log |f^{offset+n}(x)|_{e_n}` with `L_n` for `n <= depth`.
pub(crate) fn compare_with_sequence(
    engine: &ModulusEngine,
    orbit: &OrbitRecord,
    offset: usize,
    e: &[ChartIndex],
    r: f64,
    depth: usize,
) -> Result<LevelSetVerdict, OrbitError> {
    let usable = e.len().min(depth + 1);
    let seq = engine.sequence(&e[..usable], r, usable - 1)?;
    let mut margin = f64::INFINITY;
    for n in 0..=depth {
        if n >= usable {
            if matches!(orbit.terminated, Termination::Unresolved { .. }) && offset + n >= orbit.len() {
                return Ok(LevelSetVerdict::Undecided { at: n });
            }
            return Ok(LevelSetVerdict::No { failed_at: n });
        }
        let Some(o) = orbit.log_modulus(offset + n, e[n]) else {
            return Ok(LevelSetVerdict::Undecided { at: n });
        };
        match seq.get(n) {
            Some(l) => {
                if !(o >= l) {
                    return Ok(LevelSetVerdict::No { failed_at: n });
                }
                if o.is_finite() {
                    margin = margin.min(o - l);
                }
            }
            None => match seq.truncated_at.map(|(_, why)| why) {
                Some(TruncationReason::Unresolved | TruncationReason::BelowRho) | None => return Ok(LevelSetVerdict::Undecided { at: n }),
                Some(TruncationReason::RangeExhausted | TruncationReason::Overflow) => {
                    if !(o > LOG_RANGE) {
                        return Ok(LevelSetVerdict::No { failed_at: n });
                    }
                }
            },
        }
    }
    Ok(LevelSetVerdict::CandidateYes { depth, margin })
}

/// Finite-depth membership of `x` in the little level set `A_e^l(f, R)`.
pub fn level_set_member(
    engine: &ModulusEngine,
    x: SpherePoint,
    e: &[ChartIndex],
    offset: usize,
    r: f64,
    depth: usize,
) -> Result<LevelSetVerdict, OrbitError> {
    if e.len() <= depth {
        return Err(OrbitError::ItineraryTooShort { len: e.len(), depth });
    }
    let orbit = iterate_orbit(engine.map(), x, offset + depth)?;
    compare_with_sequence(engine, &orbit, offset, e, r, depth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyParams {
    pub r_start: f64,
    pub max_depth: usize,
    pub bounded_threshold: f64,
    pub max_offset: usize,
    /// Threshold for itinerary symbols; `None` uses `bounded_threshold`.
    /// Callers normally pass the `R(f)` surrogate here.
    pub symbol_threshold: Option<f64>,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self { r_start: 3.0, max_depth: 32, bounded_threshold: 2.5, max_offset: 8, symbol_threshold: None }
    }
}

impl ClassifyParams {
    pub fn symbol_threshold(&self) -> f64 {
        self.symbol_threshold.unwrap_or(self.bounded_threshold)
    }

    /// Cross-field checks; `r_f` is the `R(f)` surrogate when one was found.
    pub fn validate(&self, s: &PunctureSet, r_f: Option<f64>) -> Result<(), OrbitError> {
        let rho = s.rho_s();
        if !(self.bounded_threshold >= rho) {
            return Err(OrbitError::BoundedBelowRho { threshold: self.bounded_threshold, rho });
        }
        if !(self.r_start > self.bounded_threshold) {
            return Err(OrbitError::StartNotAboveBounded { r_start: self.r_start, bounded: self.bounded_threshold });
        }
        let t = self.symbol_threshold();
        if !(t >= rho && t <= self.r_start) {
            return Err(OrbitError::SymbolThreshold { threshold: t, rho, r_start: self.r_start });
        }
        if let Some(r_f) = r_f {
            if !(self.r_start > r_f) {
                return Err(OrbitError::StartNotAboveRf { r_start: self.r_start, r_f });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UndecidedReason {
    /// No step up to `max_offset` reached the symbol threshold.
    NoSymbol,
    /// Every offset failed; the last failing comparison index is kept.
    LevelSetFailed { offset: usize, failed_at: usize },
    /// The orbit or the sequence ended without a verdict.
    Unresolved { offset: usize, at: usize },
}

impl fmt::Display for UndecidedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UndecidedReason::NoSymbol => f.write_str("no_symbol"),
            UndecidedReason::LevelSetFailed { offset, failed_at } => {
                write!(f, "level_set_failed(offset={offset},n={failed_at})")
            }
            UndecidedReason::Unresolved { offset, at } => write!(f, "unresolved(offset={offset},n={at})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fate {
    FastEscapingCandidate {
        /// Itinerary read from the orbit, starting at step `offset`;
        /// `certified_depth + 1` symbols.
        itinerary: Vec<ChartIndex>,
        offset: usize,
        certified_depth: usize,
        margin: f64,
    },
    BoundedCandidate {
        bound: f64,
    },
    Undecided {
        reason: UndecidedReason,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub fate: Fate,
    pub params_used: ClassifyParams,
}

/// Classifies points of one map; holds the memoized modulus engine.
pub struct Classifier {
    engine: ModulusEngine,
    params: ClassifyParams,
}

impl Classifier {
    /// `r_f` is the `R(f)` surrogate, if one was found; it is only used for
    /// validation.
    pub fn new(engine: ModulusEngine, params: ClassifyParams, r_f: Option<f64>) -> Result<Self, OrbitError> {
        params.validate(engine.map().punctures(), r_f)?;
        Ok(Self { engine, params })
    }

    pub fn engine(&self) -> &ModulusEngine {
        &self.engine
    }

    pub fn params(&self) -> &ClassifyParams {
        &self.params
    }

    pub fn map(&self) -> &CompiledMap {
        self.engine.map()
    }

    pub fn classify(&self, x: SpherePoint) -> Result<Classification, OrbitError> {
        let p = self.params;
        let s = self.map().punctures();
        let orbit = iterate_orbit(self.map(), x, p.max_depth + p.max_offset)?;
        let fate = self.fate_of(&orbit, s)?;
        Ok(Classification { fate, params_used: p })
    }

    fn fate_of(&self, orbit: &OrbitRecord, s: &PunctureSet) -> Result<Fate, OrbitError> {
        let p = self.params;
        if orbit.terminated == Termination::Completed {
            let top = orbit.max_modulus_log();
            if top < p.bounded_threshold.ln() {
                return Ok(Fate::BoundedCandidate { bound: top.exp() });
            }
        }
        let threshold = p.symbol_threshold();
        let mut reason = UndecidedReason::NoSymbol;
        let mut e = Vec::with_capacity(p.max_depth + 1);
        for m in 0..=p.max_offset {
            if orbit.symbol(m, s, threshold).is_none() {
                continue;
            }
            e.clear();
            for n in 0..=p.max_depth {
                match orbit.symbol(m + n, s, threshold) {
                    Some(j) => e.push(j),
                    None => break,
                }
            }
            match compare_with_sequence(&self.engine, orbit, m, &e, p.r_start, p.max_depth)? {
                LevelSetVerdict::CandidateYes { depth, margin } => {
                    return Ok(Fate::FastEscapingCandidate {
                        itinerary: e.clone(),
                        offset: m,
                        certified_depth: depth,
                        margin,
                    });
                }
                LevelSetVerdict::No { failed_at } => reason = UndecidedReason::LevelSetFailed { offset: m, failed_at },
                LevelSetVerdict::Undecided { at } => reason = UndecidedReason::Unresolved { offset: m, at },
            }
        }
        Ok(Fate::Undecided { reason })
    }
}
