//! Run configuration.
//!
//! Grammar: UTF-8 lines, `[section]` headers, `key = value` entries and
//! `#` comments. Keys before the first header are top level (`threads`,
//! `seed`). Itineraries use `prefix(cycle)*`, e.g. `(01)*` or `1(0)*`.
//!
//! ```text
//! seed = 7
//! threads = auto
//!
//! [map]
//! expr = exp(z + 1/z)
//!
//! [punctures]
//! finite = 0
//!
//! [window]
//! center = 0
//! width = 6
//! height = 6
//! cols = 512
//! rows = 512
//!
//! [classify]
//! r_start = 3
//! max_depth = 32
//! bounded_threshold = 2.5
//! max_offset = 8
//!
//! [itineraries]
//! list = (0)*, (1)*
//!
//! [output]
//! dir = out
//! name = expz_basic
//! formats = ppm, fate, sidecar
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use punctum_core::dsl::{constant_value, parse};
use punctum_core::itinerary::Itinerary;
use punctum_core::modulus::ModulusParams;
use punctum_core::orbit::ClassifyParams;
use punctum_core::raster::ViewWindow;
use punctum_core::sphere::PunctureSet;
use punctum_core::verify::Check;

use crate::error::CliError;

/// Every accepted key, as `section.key`, with its default.
const KEYS: &[(&str, &str)] = &[
    ("threads", "auto"),
    ("seed", "0"),
    ("map.expr", ""),
    ("punctures.finite", "0"),
    ("window.center", "0"),
    ("window.width", "6"),
    ("window.height", "6"),
    ("window.cols", "512"),
    ("window.rows", "512"),
    ("classify.r_start", "3"),
    ("classify.max_depth", "32"),
    ("classify.bounded_threshold", "2.5"),
    ("classify.max_offset", "8"),
    ("classify.symbol_threshold", "auto"),
    ("modulus.n_samples", "4096"),
    ("modulus.refine_iters", "30"),
    ("itineraries.list", "(0)*, (1)*"),
    ("output.dir", "."),
    ("output.name", "render"),
    ("output.formats", "ppm, fate, sidecar"),
    ("verify.checks", "all"),
    ("verify.maps", ""),
    ("verify.points", "1000"),
    ("verify.min_pixels", "16"),
    ("verify.tolerance_px", "4"),
    ("verify.iterate", "2"),
];

/// Key/value pairs after parsing and overrides, keyed by `section.key`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

fn check_key(key: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown key `{key}`")))
    }
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let at = |msg: String| CliError::Config(format!("line {}: {msg}", i + 1));
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| at("unterminated section header".into()))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
            check_key(&key).map_err(|e| at(e.to_string()))?;
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(at(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        check_key(key)?;
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> &str {
        self.entries
            .get(key)
            .map(String::as_str)
            .or_else(|| KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d))
            .expect("key is listed in KEYS")
    }

    fn num<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.get(key);
        v.parse().map_err(|_| CliError::Config(format!("`{key}` = `{v}` is not a valid number")))
    }
}

fn list(v: &str, sep: char) -> impl Iterator<Item = &str> {
    v.split(sep).map(str::trim).filter(|s| !s.is_empty())
}

/// A complex literal in the expression grammar, e.g. `-0.5 + 2i`.
pub fn complex_literal(text: &str) -> Result<Complex64, CliError> {
    let bad = |m: String| CliError::Config(format!("`{text}` is not a complex literal: {m}"));
    let e = parse(text).map_err(|e| bad(e.to_string()))?;
    constant_value(&e).map_err(|e| bad(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

impl Threads {
    pub fn count(self) -> usize {
        match self {
            Threads::Auto => std::thread::available_parallelism().map_or(1, |n| n.get()),
            Threads::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Ppm,
    Fate,
    Sidecar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub name: String,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub checks: Vec<Check>,
    /// Maps under test; empty means the `[map]` expression.
    pub maps: Vec<String>,
    pub points: usize,
    pub min_pixels: usize,
    pub tolerance_px: f64,
    pub iterate: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub map: String,
    pub punctures: PunctureSet,
    pub window: ViewWindow,
    pub classify: ClassifyParams,
    pub modulus: ModulusParams,
    pub itineraries: Vec<Itinerary>,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
    pub threads: Threads,
    pub seed: u64,
    raw: RawConfig,
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let map = raw.get("map.expr").to_string();
        let finite = list(raw.get("punctures.finite"), ',').map(complex_literal).collect::<Result<Vec<_>, _>>()?;
        let punctures = PunctureSet::new(finite).map_err(|e| CliError::Config(format!("punctures: {e}")))?;
        let window = ViewWindow::new(
            complex_literal(raw.get("window.center"))?,
            raw.num("window.width")?,
            raw.num("window.height")?,
            raw.num("window.cols")?,
            raw.num("window.rows")?,
        )
        .map_err(|e| CliError::Config(format!("window: {e}")))?;
        let symbol_threshold = match raw.get("classify.symbol_threshold") {
            "auto" => None,
            _ => Some(raw.num("classify.symbol_threshold")?),
        };
        let classify = ClassifyParams {
            r_start: raw.num("classify.r_start")?,
            max_depth: raw.num("classify.max_depth")?,
            bounded_threshold: raw.num("classify.bounded_threshold")?,
            max_offset: raw.num("classify.max_offset")?,
            symbol_threshold,
        };
        let modulus =
            ModulusParams { n_samples: raw.num("modulus.n_samples")?, refine_iters: raw.num("modulus.refine_iters")? };
        let itineraries = list(raw.get("itineraries.list"), ',')
            .map(|t| t.parse::<Itinerary>().map_err(|e| CliError::Config(format!("itinerary `{t}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        for e in &itineraries {
            e.check_nu(punctures.nu()).map_err(|err| CliError::Config(format!("itinerary {e}: {err}")))?;
        }
        let formats = list(raw.get("output.formats"), ',')
            .map(|f| match f {
                "ppm" => Ok(Format::Ppm),
                "fate" => Ok(Format::Fate),
                "sidecar" => Ok(Format::Sidecar),
                other => Err(CliError::Config(format!("unknown output format `{other}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let name = raw.get("output.name").to_string();
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(CliError::Config(format!("output.name `{name}` must be a plain file stem")));
        }
        let checks = match raw.get("verify.checks") {
            "all" => Check::ALL.to_vec(),
            v => list(v, ',')
                .map(|c| c.parse::<Check>().map_err(|e| CliError::Config(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let verify = VerifyConfig {
            checks,
            maps: list(raw.get("verify.maps"), ';').map(str::to_string).collect(),
            points: raw.num("verify.points")?,
            min_pixels: raw.num("verify.min_pixels")?,
            tolerance_px: raw.num("verify.tolerance_px")?,
            iterate: raw.num("verify.iterate")?,
        };
        let threads = match raw.get("threads") {
            "auto" => Threads::Auto,
            _ => match raw.num::<usize>("threads")? {
                0 => return Err(CliError::Config("threads must be positive or `auto`".into())),
                n => Threads::Fixed(n),
            },
        };
        Ok(Self {
            map,
            punctures,
            window,
            classify,
            modulus,
            itineraries,
            output: OutputConfig { dir: PathBuf::from(raw.get("output.dir")), name, formats },
            verify,
            threads,
            seed: raw.num("seed")?,
            raw,
        })
    }

    /// The map expression; an error if none is configured.
    pub fn map_text(&self) -> Result<&str, CliError> {
        if self.map.is_empty() {
            Err(CliError::Config("`map.expr` is required".into()))
        } else {
            Ok(&self.map)
        }
    }

    /// Every effective key except `threads` and `output.dir`, which never
    /// change results, as sorted `section.key = value` lines.
    pub fn effective_entries(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .filter(|(k, _)| !matches!(*k, "threads" | "output.dir"))
            .map(|(k, _)| (k.to_string(), self.raw.get(k).to_string()))
            .collect()
    }
}
