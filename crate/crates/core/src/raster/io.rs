//! Artifact formats.
//!
//! Fate grid layout, little-endian:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `PNCFATE1` |
//! | 8 | 4 | cols (u32) |
//! | 12 | 4 | rows (u32) |
//! | 16 + 16 i | 16 | cell `i`, row-major |
//!
//! Each cell record is tag (u8), detail (u8), depth (u16), aux (f32 bits),
//! prefix (u64).
//!
//! Palette `fate-palette-1`: bounded cells are dark blue `(20, 30, 90)`,
//! undecided cells gray `(128, 128, 128)`. A fast escaping cell takes the
//! color of the last symbol in its prefix from [`SYMBOL_COLORS`], scaled by
//! `(16 - min(offset, 8)) / 16`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ClassificationRaster, FateCell, FateTag, RasterError};

pub const FATE_MAGIC: &[u8; 8] = b"PNCFATE1";
pub const PALETTE_VERSION: &str = "fate-palette-1";
const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = 16;

/// Base colors for symbols 0..=14.
pub const SYMBOL_COLORS: [[u8; 3]; 15] = [
    [240, 200, 40],
    [220, 60, 50],
    [60, 180, 90],
    [230, 120, 200],
    [80, 200, 220],
    [250, 140, 30],
    [160, 110, 230],
    [200, 220, 120],
    [255, 255, 255],
    [150, 80, 40],
    [100, 140, 255],
    [255, 170, 170],
    [0, 130, 130],
    [190, 190, 60],
    [110, 110, 110],
];

pub fn fate_color(cell: &FateCell) -> [u8; 3] {
    match cell.tag {
        FateTag::Bounded => [20, 30, 90],
        FateTag::Undecided => [128, 128, 128],
        FateTag::FastEscaping => {
            let last = cell.symbols().last().map_or(0, |j| j.get().min(14));
            let scale = 16 - u16::from(cell.detail.min(8));
            SYMBOL_COLORS[last].map(|c| (u16::from(c) * scale / 16) as u8)
        }
    }
}

/// Binary PPM of the raster; each entry of `comments` becomes a `#` header
/// line (newlines are replaced by spaces).
pub fn render_ppm(raster: &ClassificationRaster, comments: &[String]) -> Vec<u8> {
    let (cols, rows) = raster.dims();
    let mut out = Vec::with_capacity(64 + 3 * cols * rows);
    out.extend_from_slice(b"P6\n");
    for c in comments {
        out.extend_from_slice(format!("# {}\n", c.replace(['\n', '\r'], " ")).as_bytes());
    }
    out.extend_from_slice(format!("{cols} {rows}\n255\n").as_bytes());
    for cell in &raster.cells {
        out.extend_from_slice(&fate_color(cell));
    }
    out
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
/// The parent directory must exist.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RasterError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", dir.display()),
        )
        .into());
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn write_ppm(path: &Path, raster: &ClassificationRaster, comments: &[String]) -> Result<(), RasterError> {
    write_atomic(path, &render_ppm(raster, comments))
}

pub fn fate_grid_bytes(raster: &ClassificationRaster) -> Vec<u8> {
    let (cols, rows) = raster.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * raster.cells.len());
    out.extend_from_slice(FATE_MAGIC);
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    for c in &raster.cells {
        out.push(c.tag as u8);
        out.push(c.detail);
        out.extend_from_slice(&c.depth.to_le_bytes());
        out.extend_from_slice(&c.aux.to_bits().to_le_bytes());
        out.extend_from_slice(&c.prefix.to_le_bytes());
    }
    out
}

pub fn write_fate_grid(path: &Path, raster: &ClassificationRaster) -> Result<(), RasterError> {
    write_atomic(path, &fate_grid_bytes(raster))
}

/// Decoded fate grid: `(cols, rows, cells)`.
pub fn read_fate_grid(bytes: &[u8]) -> Result<(usize, usize, Vec<FateCell>), RasterError> {
    let bad = |m: &str| RasterError::BadFateGrid(m.to_string());
    if bytes.len() < HEADER_LEN || &bytes[..8] != FATE_MAGIC {
        return Err(bad("missing magic"));
    }
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let rows = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let n = cols.checked_mul(rows).ok_or_else(|| bad("size overflow"))?;
    if bytes.len() != HEADER_LEN + RECORD_LEN * n {
        return Err(bad(&format!("expected {} cell records", n)));
    }
    let cells = bytes[HEADER_LEN..]
        .chunks_exact(RECORD_LEN)
        .map(|r| {
            let tag = match r[0] {
                0 => FateTag::Undecided,
                1 => FateTag::Bounded,
                2 => FateTag::FastEscaping,
                t => return Err(bad(&format!("unknown tag {t}"))),
            };
            Ok(FateCell {
                tag,
                detail: r[1],
                depth: u16::from_le_bytes([r[2], r[3]]),
                aux: f32::from_bits(u32::from_le_bytes(r[4..8].try_into().unwrap())),
                prefix: u64::from_le_bytes(r[8..16].try_into().unwrap()),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok((cols, rows, cells))
}

/// `key = value` metadata describing how a raster was produced.
pub fn sidecar_text(raster: &ClassificationRaster, extra: &[(String, String)]) -> String {
    let w = &raster.window;
    let p = &raster.params;
    let mut s = String::new();
    s.push_str(&format!("map = {}\n", raster.map_text));
    s.push_str(&format!("window.center = {} {}\n", w.center.re, w.center.im));
    s.push_str(&format!("window.width = {}\nwindow.height = {}\n", w.width, w.height));
    s.push_str(&format!("window.cols = {}\nwindow.rows = {}\n", w.cols, w.rows));
    s.push_str(&format!(
        "classify.r_start = {}\nclassify.max_depth = {}\nclassify.bounded_threshold = {}\nclassify.max_offset = {}\n",
        p.r_start, p.max_depth, p.bounded_threshold, p.max_offset
    ));
    s.push_str(&format!("palette = {PALETTE_VERSION}\n"));
    for (k, v) in extra {
        s.push_str(&format!("{k} = {}\n", v.replace(['\n', '\r'], " ")));
    }
    s
}
