use std::collections::BTreeSet;

use crate::sphere::{ChartIndex, PunctureSet, SpherePoint};

use super::{ClassificationRaster, Selector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Label in [`ComponentLabeling::labels`], starting at 1.
    pub label: u32,
    pub pixels: usize,
    pub touches_frame: bool,
    /// Charts `j` whose disk `{|x|_j >= rho_S}` the component meets or
    /// borders.
    pub touches_punctures: BTreeSet<usize>,
}

impl Component {
    /// Stand-in for reaching the punctures: meets the window frame or a
    /// puncture disk.
    pub fn touches_frame_or_puncture(&self) -> bool {
        self.touches_frame || !self.touches_punctures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub cols: usize,
    pub rows: usize,
    /// Row-major labels; 0 for unselected cells.
    pub labels: Vec<u32>,
    /// Components in order of their first pixel in row-major order.
    pub components: Vec<Component>,
}

/// For each cell, the charts whose disk contains its center.
fn disk_masks(raster: &ClassificationRaster, s: &PunctureSet) -> Vec<u32> {
    let w = &raster.window;
    let rho = s.rho_s();
    let mut out = vec![0u32; w.len()];
    for r in 0..w.rows {
        for c in 0..w.cols {
            let x = SpherePoint::Finite(w.pixel_center(c, r));
            for j in s.charts() {
                if s.modulus(x, j) >= rho {
                    out[r * w.cols + c] |= 1 << j.get().min(31);
                }
            }
        }
    }
    out
}

/// 4-connected components of the selected cells, with frame and puncture
/// disk contacts. A component touches a disk if one of its cells lies in
/// the disk or is 4-adjacent to a cell that does.
pub fn label_components(raster: &ClassificationRaster, selector: &Selector, s: &PunctureSet) -> ComponentLabeling {
    let (cols, rows) = raster.dims();
    let sel: Vec<bool> = raster.cells.iter().map(|c| selector.selects(c)).collect();
    let disks = disk_masks(raster, s);
    let mut labels = vec![0u32; cols * rows];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..cols * rows {
        if !sel[start] || labels[start] != 0 {
            continue;
        }
        let label = components.len() as u32 + 1;
        let mut comp =
            Component { label, pixels: 0, touches_frame: false, touches_punctures: BTreeSet::new() };
        let mut mask = 0u32;
        labels[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            comp.pixels += 1;
            let (c, r) = (i % cols, i / cols);
            if c == 0 || r == 0 || c + 1 == cols || r + 1 == rows {
                comp.touches_frame = true;
            }
            mask |= disks[i];
            let neighbours = [
                (c > 0).then(|| i - 1),
                (c + 1 < cols).then(|| i + 1),
                (r > 0).then(|| i - cols),
                (r + 1 < rows).then(|| i + cols),
            ];
            for n in neighbours.into_iter().flatten() {
                mask |= disks[n];
                if sel[n] && labels[n] == 0 {
                    labels[n] = label;
                    stack.push(n);
                }
            }
        }
        comp.touches_punctures = s.charts().map(ChartIndex::get).filter(|&j| mask & (1 << j.min(31)) != 0).collect();
        components.push(comp);
    }
    ComponentLabeling { cols, rows, labels, components }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{FateCell, FateTag, ViewWindow};
    use num_complex::Complex64;

    fn blob_raster(n: usize, on: impl Fn(usize, usize) -> bool) -> ClassificationRaster {
        // Window small enough that no cell center reaches a puncture disk
        // of S = {inf, 10}.
        let w = ViewWindow::square(Complex64::new(0.0, 0.0), 1.0, n).unwrap();
        let cells = (0..n * n)
            .map(|i| {
                if on(i % n, i / n) {
                    FateCell { tag: FateTag::FastEscaping, ..FateCell::UNDECIDED }
                } else {
                    FateCell::UNDECIDED
                }
            })
            .collect();
        ClassificationRaster::from_cells(w, cells)
    }

    fn far_puncture() -> PunctureSet {
        PunctureSet::new(vec![Complex64::new(10.0, 0.0)]).unwrap()
    }

    #[test]
    fn two_blobs() {
        let r = blob_raster(12, |c, r| (2..5).contains(&c) && (2..4).contains(&r) || (7..10).contains(&c) && (6..10).contains(&r));
        let l = label_components(&r, &Selector::FastEscaping, &far_puncture());
        assert_eq!(l.components.len(), 2);
        assert_eq!(l.components[0].pixels, 6);
        assert_eq!(l.components[1].pixels, 12);
        assert!(l.components.iter().all(|c| !c.touches_frame_or_puncture()));
        let selected = r.cells.iter().filter(|c| c.is_fast_escaping()).count();
        assert_eq!(l.components.iter().map(|c| c.pixels).sum::<usize>(), selected);
        assert_eq!(l.labels.iter().filter(|&&x| x != 0).count(), selected);
    }

    #[test]
    fn diagonal_cells_are_separate() {
        let r = blob_raster(6, |c, r| (c, r) == (2, 2) || (c, r) == (3, 3));
        assert_eq!(label_components(&r, &Selector::FastEscaping, &far_puncture()).components.len(), 2);
    }

    #[test]
    fn frame_contact() {
        let r = blob_raster(8, |c, r| c < 3 && (3..5).contains(&r));
        let l = label_components(&r, &Selector::FastEscaping, &far_puncture());
        assert_eq!(l.components.len(), 1);
        assert!(l.components[0].touches_frame);
        assert!(l.components[0].touches_punctures.is_empty());
    }

    #[test]
    fn puncture_disk_contact() {
        // S = {inf, 0}: rho_S = 2, so the disk |x|_1 >= 2 is |x| <= 1/2.
        let w = ViewWindow::square(Complex64::new(0.0, 0.0), 1.5, 15).unwrap();
        let cells = (0..225)
            .map(|i| {
                let (c, r) = (i % 15, i / 15);
                // ring at distance ~0.6 from 0, away from the frame
                let d = w.pixel_center(c, r).norm();
                if (0.55..0.75).contains(&d) {
                    FateCell { tag: FateTag::FastEscaping, ..FateCell::UNDECIDED }
                } else {
                    FateCell::UNDECIDED
                }
            })
            .collect();
        let r = ClassificationRaster::from_cells(w, cells);
        let l = label_components(&r, &Selector::FastEscaping, &PunctureSet::punctured_plane());
        assert!(!l.components.is_empty());
        for comp in &l.components {
            assert!(!comp.touches_frame);
            assert!(comp.touches_punctures.contains(&1), "{comp:?}");
        }
    }
}
