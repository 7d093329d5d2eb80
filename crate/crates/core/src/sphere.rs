//! Points of the extended plane, puncture sets, generalised moduli and the
//! Möbius charts that send each puncture to infinity.
//!
//! Every finite puncture `y_j` gets a chart `phi_j` with `|x|_j = |phi_j(x)|`,
//! where `|x|_0 = |x|` and `|x|_j = 1/|x - y_j|` for `j > 0`. Chart 0 is the
//! identity and measures proximity to infinity.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// A point of the one-point compactification of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    /// Builds a point, normalizing non-finite components (overflow or NaN)
    /// to `Infinity`.
    pub fn new(re: f64, im: f64) -> Self {
        Self::from_complex(Complex64::new(re, im))
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }

    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        Self::from_complex(z)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Finite(z) if z.im == 0.0 => write!(f, "{}", z.re),
            SpherePoint::Finite(z) if z.im < 0.0 => write!(f, "{}-{}i", z.re, -z.im),
            SpherePoint::Finite(z) => write!(f, "{}+{}i", z.re, z.im),
            SpherePoint::Infinity => f.write_str("inf"),
        }
    }
}

/// Index into `P = {0, 1, ..., nu}`; 0 is the puncture at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChartIndex(pub usize);

impl ChartIndex {
    pub const INFINITY: ChartIndex = ChartIndex(0);

    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for ChartIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("a puncture set needs at least one finite puncture")]
    NoFinitePunctures,
    #[error("puncture {index} is not a finite complex number")]
    NonFinitePuncture { index: usize },
    #[error("punctures {first} and {second} coincide")]
    CoincidentPunctures { first: usize, second: usize },
    #[error("chart index {index} is outside 0..={nu}")]
    ChartOutOfRange { index: usize, nu: usize },
    #[error("threshold {threshold} is below rho_S = {rho}")]
    ThresholdBelowRho { threshold: f64, rho: f64 },
}

/// The singular set `S = {inf, y_1, ..., y_nu}` together with its separation
/// radius `rho_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct PunctureSet {
    finite: Vec<Complex64>,
    rho: f64,
}

impl PunctureSet {
    pub fn new(finite: Vec<Complex64>) -> Result<Self, GeometryError> {
        let rho = compute_rho_s(&finite)?;
        Ok(Self { finite, rho })
    }

    /// `S = {inf, 0}`, the punctured plane `C*`.
    pub fn punctured_plane() -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0)]).expect("single puncture")
    }

    /// Number of finite punctures `nu`.
    pub fn nu(&self) -> usize {
        self.finite.len()
    }

    /// Number of chart indices, `nu + 1`.
    pub fn len(&self) -> usize {
        self.finite.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rho_s(&self) -> f64 {
        self.rho
    }

    pub fn finite_punctures(&self) -> &[Complex64] {
        &self.finite
    }

    pub fn charts(&self) -> impl Iterator<Item = ChartIndex> {
        (0..self.len()).map(ChartIndex)
    }

    pub fn chart(&self, j: usize) -> Result<ChartIndex, GeometryError> {
        if j <= self.nu() {
            Ok(ChartIndex(j))
        } else {
            Err(GeometryError::ChartOutOfRange { index: j, nu: self.nu() })
        }
    }

    /// The puncture `y_j` (`Infinity` for `j = 0`).
    pub fn puncture(&self, j: ChartIndex) -> SpherePoint {
        match j.0 {
            0 => SpherePoint::Infinity,
            i => SpherePoint::Finite(self.finite[i - 1]),
        }
    }

    /// Chart index of `x` if `x` is a puncture.
    pub fn index_of(&self, x: SpherePoint) -> Option<ChartIndex> {
        match x {
            SpherePoint::Infinity => Some(ChartIndex(0)),
            SpherePoint::Finite(z) => self
                .finite
                .iter()
                .position(|&y| y == z)
                .map(|i| ChartIndex(i + 1)),
        }
    }

    pub fn contains(&self, x: SpherePoint) -> bool {
        self.index_of(x).is_some()
    }

    /// `|x|_j`.
    pub fn modulus(&self, x: SpherePoint, j: ChartIndex) -> f64 {
        generalized_modulus(x, j, self)
    }

    /// `log |x|_j`, exact at the extremes (`+inf` at `y_j`, `-inf` where
    /// the modulus vanishes).
    pub fn log_modulus(&self, x: SpherePoint, j: ChartIndex) -> f64 {
        match (x, j.0) {
            (SpherePoint::Infinity, 0) => f64::INFINITY,
            (SpherePoint::Infinity, _) => f64::NEG_INFINITY,
            (SpherePoint::Finite(z), 0) => z.norm().ln(),
            (SpherePoint::Finite(z), i) => -(z - self.finite[i - 1]).norm().ln(),
        }
    }
}

/// `|x|_j`: the Euclidean norm for `j = 0`, reciprocal distance to `y_j`
/// otherwise.
pub fn generalized_modulus(x: SpherePoint, j: ChartIndex, s: &PunctureSet) -> f64 {
    match (x, j.0) {
        (SpherePoint::Infinity, 0) => f64::INFINITY,
        (SpherePoint::Infinity, _) => 0.0,
        (SpherePoint::Finite(z), 0) => z.norm(),
        (SpherePoint::Finite(z), i) => {
            let d = (z - s.finite[i - 1]).norm();
            if d == 0.0 {
                f64::INFINITY
            } else {
                1.0 / d
            }
        }
    }
}

/// Reflection in the first coordinate.
fn reflect(v: Complex64) -> Complex64 {
    Complex64::new(-v.re, v.im)
}

/// Inversion `v / |v|^2`, computed as `(1/|v|) * (v/|v|)` so that tiny and
/// huge vectors stay representable. `None` means the image is infinite.
fn invert(v: Complex64) -> Option<Complex64> {
    let n = v.norm();
    if n == 0.0 {
        return None;
    }
    let out = (v / n) * (1.0 / n);
    (out.re.is_finite() && out.im.is_finite()).then_some(out)
}

/// The chart `phi_j`: identity for `j = 0`, and
/// `phi_j(x) = tau((x - y_j) / |x - y_j|^2)` otherwise.
pub fn chart_map(x: SpherePoint, j: ChartIndex, s: &PunctureSet) -> SpherePoint {
    if j.0 == 0 {
        return x;
    }
    let y = s.finite[j.0 - 1];
    match x {
        SpherePoint::Infinity => SpherePoint::Finite(Complex64::new(0.0, 0.0)),
        SpherePoint::Finite(z) => match invert(z - y) {
            Some(v) => SpherePoint::from_complex(reflect(v)),
            None => SpherePoint::Infinity,
        },
    }
}

/// Inverse of [`chart_map`].
pub fn chart_inverse(w: SpherePoint, j: ChartIndex, s: &PunctureSet) -> SpherePoint {
    if j.0 == 0 {
        return w;
    }
    let y = s.finite[j.0 - 1];
    match w {
        SpherePoint::Infinity => SpherePoint::Finite(y),
        SpherePoint::Finite(v) => match invert(reflect(v)) {
            Some(d) => SpherePoint::from_complex(y + d),
            None => SpherePoint::Infinity,
        },
    }
}

/// `rho_S = 2 * max(1, max |y_i|, max_{i != j} 1/|y_i - y_j|)`.
///
/// Any `rho >= rho_S / 2` already isolates each puncture in its own chart
/// region; the factor two keeps symbol extraction away from the region
/// boundaries.
pub fn compute_rho_s(finite: &[Complex64]) -> Result<f64, GeometryError> {
    if finite.is_empty() {
        return Err(GeometryError::NoFinitePunctures);
    }
    let mut m: f64 = 1.0;
    for (i, y) in finite.iter().enumerate() {
        if !(y.re.is_finite() && y.im.is_finite()) {
            return Err(GeometryError::NonFinitePuncture { index: i + 1 });
        }
        m = m.max(y.norm());
    }
    for i in 0..finite.len() {
        for j in i + 1..finite.len() {
            let gap = (finite[i] - finite[j]).norm();
            if gap == 0.0 {
                return Err(GeometryError::CoincidentPunctures { first: i + 1, second: j + 1 });
            }
            m = m.max(1.0 / gap);
        }
    }
    Ok(2.0 * m)
}

/// The chart in which `x` is largest, if that modulus reaches `threshold`.
/// Ties go to the smallest index.
pub fn dominant_symbol(
    x: SpherePoint,
    s: &PunctureSet,
    threshold: f64,
) -> Result<Option<ChartIndex>, GeometryError> {
    if !(threshold >= s.rho_s()) {
        return Err(GeometryError::ThresholdBelowRho { threshold, rho: s.rho_s() });
    }
    Ok(dominant_chart(x, s).filter(|&(_, m)| m >= threshold).map(|(j, _)| j))
}

/// The chart maximizing `|x|_j` with its modulus, without any threshold.
pub(crate) fn dominant_chart(x: SpherePoint, s: &PunctureSet) -> Option<(ChartIndex, f64)> {
    let mut best: Option<(ChartIndex, f64)> = None;
    for j in s.charts() {
        let m = generalized_modulus(x, j, s);
        if best.map_or(true, |(_, b)| m > b) {
            best = Some((j, m));
        }
    }
    best
}
