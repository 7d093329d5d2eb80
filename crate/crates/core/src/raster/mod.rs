//! Grid classification over a view window, boundaries of selected fate
//! classes, connected components and raster metrics.

mod boundary;
mod components;
mod distance;
mod io;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::itinerary::Itinerary;
use crate::orbit::{Classifier, ClassifyParams, Fate, OrbitError, UndecidedReason};
use crate::sphere::{ChartIndex, SpherePoint};

pub use boundary::{extract_boundary, BoundaryRaster, Selector};
pub use components::{label_components, Component, ComponentLabeling};
pub use distance::{distance_transform, raster_distance, RasterDistance};
pub use io::{
    fate_color, fate_grid_bytes, read_fate_grid, render_ppm, sidecar_text, write_atomic, write_fate_grid, write_ppm,
    FATE_MAGIC, PALETTE_VERSION, SYMBOL_COLORS,
};

/// Edge length of the square work tiles.
pub const TILE: usize = 64;
/// Symbols kept per cell.
pub const PREFIX_LEN: usize = 16;
/// Nibble marking "no symbol" in a packed prefix.
pub const NO_SYMBOL: u8 = 0xF;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("window needs at least 2x2 cells, got {cols}x{rows}")]
    TooSmall { cols: usize, rows: usize },
    #[error("window width and height must be positive and finite")]
    BadExtent,
    #[error("window center must be finite")]
    BadCenter,
    #[error("rasters differ in size: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("packed itinerary prefixes hold symbols 0..=14; nu = {0} is too large")]
    TooManyPunctures(usize),
    #[error("could not build a thread pool: {0}")]
    ThreadPool(String),
    #[error("malformed fate grid: {0}")]
    BadFateGrid(String),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rectangle of the plane sampled at cell centers; row 0 is the top edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewWindow {
    pub center: Complex64,
    pub width: f64,
    pub height: f64,
    pub cols: usize,
    pub rows: usize,
}

impl ViewWindow {
    pub fn new(center: Complex64, width: f64, height: f64, cols: usize, rows: usize) -> Result<Self, RasterError> {
        if cols < 2 || rows < 2 {
            return Err(RasterError::TooSmall { cols, rows });
        }
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(RasterError::BadExtent);
        }
        if !(center.re.is_finite() && center.im.is_finite()) {
            return Err(RasterError::BadCenter);
        }
        Ok(Self { center, width, height, cols, rows })
    }

    /// Square window `[c - h, c + h]^2`.
    pub fn square(center: Complex64, half: f64, n: usize) -> Result<Self, RasterError> {
        Self::new(center, 2.0 * half, 2.0 * half, n, n)
    }

    /// `center + ((c + 1/2)/cols - 1/2) width - i ((r + 1/2)/rows - 1/2) height`.
    pub fn pixel_center(&self, c: usize, r: usize) -> Complex64 {
        let u = (c as f64 + 0.5) / self.cols as f64 - 0.5;
        let v = (r as f64 + 0.5) / self.rows as f64 - 0.5;
        Complex64::new(self.center.re + u * self.width, self.center.im - v * self.height)
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Width of one cell in plane units.
    pub fn pixel_size(&self) -> f64 {
        self.width / self.cols as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FateTag {
    Undecided = 0,
    Bounded = 1,
    FastEscaping = 2,
}

/// Fixed-size per-cell record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FateCell {
    pub tag: FateTag,
    /// Offset `l` for fast escaping cells, reason code for undecided ones.
    pub detail: u8,
    pub depth: u16,
    /// Bound `L` for bounded cells, comparison margin for fast escaping ones.
    pub aux: f32,
    /// Symbols `e_0 .. e_15` as nibbles, `e_n` in bits `4n..4n+4`.
    pub prefix: u64,
}

impl FateCell {
    pub const UNDECIDED: FateCell =
        FateCell { tag: FateTag::Undecided, detail: 0, depth: 0, aux: 0.0, prefix: u64::MAX };

    pub fn symbol(&self, n: usize) -> Option<ChartIndex> {
        let nib = ((self.prefix >> (4 * n)) & 0xF) as u8;
        (nib != NO_SYMBOL).then_some(ChartIndex(nib as usize))
    }

    /// Leading run of known symbols.
    pub fn symbols(&self) -> Vec<ChartIndex> {
        (0..PREFIX_LEN).map_while(|n| self.symbol(n)).collect()
    }

    pub fn is_fast_escaping(&self) -> bool {
        self.tag == FateTag::FastEscaping
    }
}

pub fn pack_prefix(symbols: &[ChartIndex]) -> u64 {
    let mut p = u64::MAX;
    for (n, j) in symbols.iter().take(PREFIX_LEN).enumerate() {
        p &= !(0xF << (4 * n));
        p |= (j.get() as u64 & 0xF) << (4 * n);
    }
    p
}

fn reason_code(r: UndecidedReason) -> u8 {
    match r {
        UndecidedReason::NoSymbol => 1,
        UndecidedReason::LevelSetFailed { .. } => 2,
        UndecidedReason::Unresolved { .. } => 3,
    }
}

pub fn encode_fate(fate: &Fate) -> FateCell {
    match fate {
        Fate::FastEscapingCandidate { itinerary, offset, certified_depth, margin } => FateCell {
            tag: FateTag::FastEscaping,
            detail: (*offset).min(255) as u8,
            depth: (*certified_depth).min(u16::MAX as usize) as u16,
            aux: *margin as f32,
            prefix: pack_prefix(itinerary),
        },
        Fate::BoundedCandidate { bound } => {
            FateCell { tag: FateTag::Bounded, detail: 0, depth: 0, aux: *bound as f32, prefix: u64::MAX }
        }
        Fate::Undecided { reason } => FateCell { detail: reason_code(*reason), ..FateCell::UNDECIDED },
    }
}

/// Per-cell fates over a window, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationRaster {
    pub window: ViewWindow,
    pub cells: Vec<FateCell>,
    pub params: ClassifyParams,
    pub map_text: String,
}

impl ClassificationRaster {
    pub fn cell(&self, c: usize, r: usize) -> &FateCell {
        &self.cells[r * self.window.cols + c]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.window.cols, self.window.rows)
    }

    /// Synthetic raster, for fixtures.
    pub fn from_cells(window: ViewWindow, cells: Vec<FateCell>) -> Self {
        assert_eq!(cells.len(), window.len(), "cell count must match the window");
        Self { window, cells, params: ClassifyParams::default(), map_text: String::new() }
    }
}

fn classify_cell(classifier: &Classifier, z: Complex64) -> Result<FateCell, RasterError> {
    let p = SpherePoint::Finite(z);
    if let Some(j) = classifier.map().punctures().index_of(p) {
        // A cell center on a puncture escapes toward it by convention.
        let depth = classifier.params().max_depth;
        return Ok(FateCell {
            tag: FateTag::FastEscaping,
            detail: 0,
            depth: depth.min(u16::MAX as usize) as u16,
            aux: f32::INFINITY,
            prefix: pack_prefix(&vec![j; PREFIX_LEN]),
        });
    }
    Ok(encode_fate(&classifier.classify(p)?.fate))
}

/// Classifies every cell center. Work is split into `TILE x TILE` tiles
/// on the current rayon pool; each tile writes a disjoint block, so the
/// result does not depend on the thread count.
pub fn classify_grid(classifier: &Classifier, window: &ViewWindow) -> Result<ClassificationRaster, RasterError> {
    let nu = classifier.map().punctures().nu();
    if nu >= NO_SYMBOL as usize {
        return Err(RasterError::TooManyPunctures(nu));
    }
    let tiles_x = window.cols.div_ceil(TILE);
    let tiles_y = window.rows.div_ceil(TILE);
    let tiles: Vec<(usize, Vec<FateCell>)> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|t| {
            let (tx, ty) = (t % tiles_x, t / tiles_x);
            let (c0, r0) = (tx * TILE, ty * TILE);
            let (c1, r1) = ((c0 + TILE).min(window.cols), (r0 + TILE).min(window.rows));
            let mut out = Vec::with_capacity((c1 - c0) * (r1 - r0));
            for r in r0..r1 {
                for c in c0..c1 {
                    out.push(classify_cell(classifier, window.pixel_center(c, r))?);
                }
            }
            Ok((t, out))
        })
        .collect::<Result<_, RasterError>>()?;

    let mut cells = vec![FateCell::UNDECIDED; window.len()];
    for (t, block) in tiles {
        let (tx, ty) = (t % tiles_x, t / tiles_x);
        let (c0, r0) = (tx * TILE, ty * TILE);
        let w = (c0 + TILE).min(window.cols) - c0;
        for (i, row) in block.chunks(w).enumerate() {
            let start = (r0 + i) * window.cols + c0;
            cells[start..start + w].copy_from_slice(row);
        }
    }
    Ok(ClassificationRaster {
        window: *window,
        cells,
        params: *classifier.params(),
        map_text: classifier.map().to_string(),
    })
}

/// [`classify_grid`] on a dedicated pool of `threads` workers.
pub fn classify_grid_with_threads(
    classifier: &Classifier,
    window: &ViewWindow,
    threads: usize,
) -> Result<ClassificationRaster, RasterError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RasterError::ThreadPool(e.to_string()))?;
    pool.install(|| classify_grid(classifier, window))
}

/// Whether a cell's itinerary window is eventually the cycle of `e`: the
/// last `min(8, known)` symbols must repeat the cycle at some phase.
pub fn cell_matches(cell: &FateCell, e: &Itinerary) -> bool {
    if !cell.is_fast_escaping() {
        return false;
    }
    let syms = cell.symbols();
    let tail = syms.len().min(8);
    e.matches_tail(&syms, tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::CompiledMap;
    use crate::modulus::{ModulusEngine, ModulusParams};
    use crate::sphere::PunctureSet;

    fn classifier(text: &str, params: ClassifyParams) -> Classifier {
        let map = CompiledMap::parse(text, PunctureSet::punctured_plane()).unwrap();
        Classifier::new(ModulusEngine::new(map, ModulusParams::default()), params, None).unwrap()
    }

    #[test]
    fn window_mapping() {
        let w = ViewWindow::square(Complex64::new(0.0, 0.0), 3.0, 64).unwrap();
        let tl = w.pixel_center(0, 0);
        assert!((tl.re + 3.0 - 3.0 / 64.0).abs() < 1e-15 && (tl.im - 3.0 + 3.0 / 64.0).abs() < 1e-15);
        let br = w.pixel_center(63, 63);
        assert!((br.re - 3.0 + 3.0 / 64.0).abs() < 1e-15 && (br.im + 3.0 - 3.0 / 64.0).abs() < 1e-15);
        assert!(ViewWindow::new(Complex64::new(0.0, 0.0), 1.0, 1.0, 1, 5).is_err());
        assert!(ViewWindow::new(Complex64::new(0.0, 0.0), 0.0, 1.0, 5, 5).is_err());
    }

    #[test]
    fn prefix_packing() {
        let syms: Vec<ChartIndex> = [0, 1, 2, 1].iter().map(|&j| ChartIndex(j)).collect();
        let cell = FateCell { prefix: pack_prefix(&syms), ..FateCell::UNDECIDED };
        assert_eq!(cell.symbols(), syms);
        assert_eq!(cell.symbol(4), None);
        let full = vec![ChartIndex(1); 20];
        assert_eq!(FateCell { prefix: pack_prefix(&full), ..FateCell::UNDECIDED }.symbols().len(), 16);
    }

    #[test]
    fn identity_is_bounded_everywhere() {
        let cl = classifier("z", ClassifyParams { r_start: 12.0, bounded_threshold: 10.0, max_depth: 8, ..Default::default() });
        let w = ViewWindow::square(Complex64::new(0.0, 0.0), 3.0, 16).unwrap();
        let r = classify_grid(&cl, &w).unwrap();
        assert!(r.cells.iter().all(|c| c.tag == FateTag::Bounded));
    }

    #[test]
    fn positive_real_edge_escapes_along_zero() {
        let cl = classifier("exp(z+1/z)", ClassifyParams::default());
        let w = ViewWindow::square(Complex64::new(0.0, 0.0), 3.0, 64).unwrap();
        let r = classify_grid(&cl, &w).unwrap();
        let cell = r.cell(63, 31);
        assert!(cell.is_fast_escaping(), "{cell:?}");
        assert!(cell.symbols().iter().all(|j| *j == ChartIndex(0)));
        assert!(cell_matches(cell, &Itinerary::constant(ChartIndex(0))));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let cl = classifier("exp(z+1/z)", ClassifyParams::default());
        let w = ViewWindow::new(Complex64::new(0.1, -0.2), 6.0, 5.0, 150, 70).unwrap();
        let a = classify_grid_with_threads(&cl, &w, 1).unwrap();
        let b = classify_grid_with_threads(&cl, &w, 8).unwrap();
        assert_eq!(a.cells.len(), b.cells.len());
        assert!(a.cells.iter().zip(&b.cells).all(|(x, y)| x.prefix == y.prefix
            && x.tag == y.tag
            && x.aux.to_bits() == y.aux.to_bits()
            && x.detail == y.detail
            && x.depth == y.depth));
    }

    #[test]
    fn puncture_cell_center_escapes_toward_it() {
        let cl = classifier("exp(z+1/z)", ClassifyParams::default());
        // Odd size puts the middle cell center exactly on 0.
        let w = ViewWindow::square(Complex64::new(0.0, 0.0), 3.0, 5).unwrap();
        let r = classify_grid(&cl, &w).unwrap();
        let mid = r.cell(2, 2);
        assert!(mid.is_fast_escaping());
        assert_eq!(mid.symbols(), vec![ChartIndex(1); 16]);
    }
}
