//! Eventually periodic itineraries `prefix(cycle)*` over the chart symbols,
//! the shift map and equivalence up to shifts.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::sphere::ChartIndex;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ItineraryError {
    #[error("itinerary `{text}`: expected `prefix(cycle)*` with single-digit symbols")]
    Syntax { text: String },
    #[error("itinerary cycle must be non-empty")]
    EmptyCycle,
    #[error("itinerary symbol {symbol} exceeds nu = {nu}")]
    SymbolOutOfRange { symbol: usize, nu: usize },
}

/// `e = prefix cycle cycle cycle ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Itinerary {
    prefix: Vec<ChartIndex>,
    cycle: Vec<ChartIndex>,
}

/// Shortest block whose repetition gives `c`.
fn primitive(c: &[ChartIndex]) -> &[ChartIndex] {
    let n = c.len();
    (1..=n)
        .find(|&p| n.is_multiple_of(p) && (p..n).all(|i| c[i] == c[i - p]))
        .map_or(c, |p| &c[..p])
}

impl Itinerary {
    pub fn new(prefix: Vec<ChartIndex>, cycle: Vec<ChartIndex>) -> Result<Self, ItineraryError> {
        if cycle.is_empty() {
            return Err(ItineraryError::EmptyCycle);
        }
        Ok(Self { prefix, cycle })
    }

    /// `(j)*`.
    pub fn constant(j: ChartIndex) -> Self {
        Self { prefix: Vec::new(), cycle: vec![j] }
    }

    pub fn prefix(&self) -> &[ChartIndex] {
        &self.prefix
    }

    pub fn cycle(&self) -> &[ChartIndex] {
        &self.cycle
    }

    /// `e_n`.
    pub fn symbol(&self, n: usize) -> ChartIndex {
        match n.checked_sub(self.prefix.len()) {
            None => self.prefix[n],
            Some(i) => self.cycle[i % self.cycle.len()],
        }
    }

    /// `e_0 .. e_{n-1}`.
    pub fn take(&self, n: usize) -> Vec<ChartIndex> {
        (0..n).map(|i| self.symbol(i)).collect()
    }

    /// `sigma(e) = e_1 e_2 ...`.
    pub fn shift(&self) -> Self {
        if let Some((_, rest)) = self.prefix.split_first() {
            Self { prefix: rest.to_vec(), cycle: self.cycle.clone() }
        } else {
            let mut cycle = self.cycle.clone();
            cycle.rotate_left(1);
            Self { prefix: Vec::new(), cycle }
        }
    }

    /// `e_0 e_p e_{2p} ...`, the itinerary of the same orbit under `f^p`.
    pub fn downsample(&self, p: usize) -> Self {
        assert!(p >= 1, "downsample needs p >= 1");
        let pre = self.prefix.len().div_ceil(p);
        // After index pre*p the sequence is periodic; its p-subsampling has
        // period cycle.len() / gcd(cycle.len(), p), and cycle.len() is a
        // multiple of that.
        let prefix = (0..pre).map(|i| self.symbol(i * p)).collect();
        let cycle = (0..self.cycle.len()).map(|i| self.symbol((pre + i) * p)).collect();
        Self { prefix, cycle: primitive_owned(cycle) }
    }

    /// `sigma^a(e) = sigma^b(other)` for some `a, b`.
    pub fn is_equivalent(&self, other: &Itinerary) -> bool {
        let a = primitive(&self.cycle);
        let b = primitive(&other.cycle);
        a.len() == b.len() && (0..a.len()).any(|r| (0..a.len()).all(|i| a[(i + r) % a.len()] == b[i]))
    }

    /// Whether the tail of an observed symbol window repeats this cycle at
    /// some phase. Only the last `tail` symbols are compared.
    pub fn matches_tail(&self, window: &[ChartIndex], tail: usize) -> bool {
        let c = &self.cycle;
        if window.len() < tail || tail == 0 {
            return false;
        }
        let w = &window[window.len() - tail..];
        (0..c.len()).any(|phase| w.iter().enumerate().all(|(i, s)| *s == c[(i + phase) % c.len()]))
    }

    pub fn max_symbol(&self) -> usize {
        self.prefix.iter().chain(&self.cycle).map(|j| j.get()).max().unwrap_or(0)
    }

    pub fn check_nu(&self, nu: usize) -> Result<(), ItineraryError> {
        let m = self.max_symbol();
        if m > nu {
            return Err(ItineraryError::SymbolOutOfRange { symbol: m, nu });
        }
        Ok(())
    }
}

fn primitive_owned(c: Vec<ChartIndex>) -> Vec<ChartIndex> {
    primitive(&c).to_vec()
}

impl FromStr for Itinerary {
    type Err = ItineraryError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = || ItineraryError::Syntax { text: text.to_string() };
        let t = text.trim();
        let body = t.strip_suffix(")*").ok_or_else(bad)?;
        let (prefix, cycle) = body.split_once('(').ok_or_else(bad)?;
        let digits = |s: &str| -> Result<Vec<ChartIndex>, ItineraryError> {
            s.chars()
                .map(|c| c.to_digit(10).map(|d| ChartIndex(d as usize)).ok_or_else(bad))
                .collect()
        };
        Self::new(digits(prefix)?, digits(cycle)?)
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in &self.prefix {
            write!(f, "{j}")?;
        }
        f.write_str("(")?;
        for j in &self.cycle {
            write!(f, "{j}")?;
        }
        f.write_str(")*")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn it(s: &str) -> Itinerary {
        s.parse().unwrap()
    }

    fn syms(v: &[usize]) -> Vec<ChartIndex> {
        v.iter().map(|&j| ChartIndex(j)).collect()
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(it("(0)*"), Itinerary::constant(ChartIndex(0)));
        assert_eq!(it("01(10)*").to_string(), "01(10)*");
        assert_eq!(it("01(10)*").take(6), syms(&[0, 1, 1, 0, 1, 0]));
        assert!(matches!("0101".parse::<Itinerary>(), Err(ItineraryError::Syntax { .. })));
        assert!(matches!("()*".parse::<Itinerary>(), Err(ItineraryError::EmptyCycle)));
        assert!(matches!("(a)*".parse::<Itinerary>(), Err(ItineraryError::Syntax { .. })));
        assert_eq!(it("(02)*").check_nu(1), Err(ItineraryError::SymbolOutOfRange { symbol: 2, nu: 1 }));
    }

    #[test]
    fn shift_and_equivalence() {
        let e = it("1(01)*");
        assert_eq!(e.shift(), it("(01)*"));
        assert_eq!(e.shift().shift(), it("(10)*"));
        assert!(e.is_equivalent(&it("(10)*")));
        assert!(it("(0101)*").is_equivalent(&it("1(10)*")));
        assert!(!it("(0)*").is_equivalent(&it("(1)*")));
        assert!(!it("(001)*").is_equivalent(&it("(01)*")));
        for n in 0..10 {
            assert_eq!(e.shift().symbol(n), e.symbol(n + 1));
        }
    }

    #[test]
    fn downsampling() {
        assert_eq!(it("(0)*").downsample(2), it("(0)*"));
        assert_eq!(it("(01)*").downsample(2), it("(0)*"));
        assert_eq!(it("1(01)*").downsample(2), it("1(1)*"));
        let e = it("012(0112)*");
        for p in 1..5 {
            let d = e.downsample(p);
            for n in 0..20 {
                assert_eq!(d.symbol(n), e.symbol(n * p), "p = {p}, n = {n}");
            }
        }
    }

    #[test]
    fn tail_matching() {
        let w = syms(&[1, 1, 0, 1, 0, 1, 0, 1]);
        assert!(it("(01)*").matches_tail(&w, 6));
        assert!(it("(10)*").matches_tail(&w, 6));
        assert!(!it("(01)*").matches_tail(&w, 8));
        assert!(!it("(0)*").matches_tail(&w, 4));
    }
}
