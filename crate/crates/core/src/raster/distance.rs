use super::{BoundaryRaster, RasterError};

/// Symmetric Hausdorff distance (pixels) and Jaccard index of two binary
/// rasters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterDistance {
    pub hausdorff_px: f64,
    pub jaccard: f64,
}

/// 1-D lower envelope of parabolas (Felzenszwalb and Huttenlocher).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q].is_infinite() {
            continue;
        }
        if f[v[0]].is_infinite() {
            v[0] = q;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: q replaces the only parabola.
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if f[v[0]].is_infinite() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from every cell to the nearest set
/// cell; `inf` everywhere if none is set.
pub fn distance_transform(b: &BoundaryRaster) -> Vec<f64> {
    let (cols, rows) = (b.cols, b.rows);
    let n = cols.max(rows);
    let mut grid: Vec<f64> = b.cells.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for c in 0..cols {
        for r in 0..rows {
            f[r] = grid[r * cols + c];
        }
        edt_1d(&f[..rows], &mut out[..rows], &mut v, &mut z);
        for r in 0..rows {
            grid[r * cols + c] = out[r];
        }
    }
    for r in 0..rows {
        let row = &mut grid[r * cols..(r + 1) * cols];
        f[..cols].copy_from_slice(row);
        edt_1d(&f[..cols], &mut out[..cols], &mut v, &mut z);
        row.copy_from_slice(&out[..cols]);
    }
    grid
}

fn directed(from: &BoundaryRaster, to_dt: &[f64]) -> f64 {
    from.cells
        .iter()
        .zip(to_dt)
        .filter(|(s, _)| **s)
        .map(|(_, d)| *d)
        .fold(0.0, f64::max)
        .sqrt()
}

/// Hausdorff distance is `inf` when exactly one raster is empty and 0 when
/// both are; the Jaccard index of two empty rasters is 1.
pub fn raster_distance(a: &BoundaryRaster, b: &BoundaryRaster) -> Result<RasterDistance, RasterError> {
    if (a.cols, a.rows) != (b.cols, b.rows) {
        return Err(RasterError::DimensionMismatch { a: (a.cols, a.rows), b: (b.cols, b.rows) });
    }
    let (na, nb) = (a.count(), b.count());
    let inter = a.cells.iter().zip(&b.cells).filter(|(x, y)| **x && **y).count();
    let union = na + nb - inter;
    let jaccard = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    let hausdorff_px = match (na, nb) {
        (0, 0) => 0.0,
        (0, _) | (_, 0) => f64::INFINITY,
        _ => directed(a, &distance_transform(b)).max(directed(b, &distance_transform(a))),
    };
    Ok(RasterDistance { hausdorff_px, jaccard })
}
