use crate::itinerary::Itinerary;

use super::{cell_matches, ClassificationRaster, FateCell, FateTag};

/// Which cells a boundary or labeling is about.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    /// Full partition by fate tag and itinerary prefix. The boundary marks
    /// both sides of every interface.
    Partition,
    FastEscaping,
    Bounded,
    /// Fast escaping with itinerary eventually equal to `e` up to shift.
    Equivalent(Itinerary),
}

impl Selector {
    pub fn selects(&self, cell: &FateCell) -> bool {
        match self {
            Selector::Partition => true,
            Selector::FastEscaping => cell.is_fast_escaping(),
            Selector::Bounded => cell.tag == FateTag::Bounded,
            Selector::Equivalent(e) => cell_matches(cell, e),
        }
    }
}

/// Binary raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryRaster {
    pub cols: usize,
    pub rows: usize,
    pub cells: Vec<bool>,
}

impl BoundaryRaster {
    pub fn new(cols: usize, rows: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), cols * rows, "cell count must match the size");
        Self { cols, rows, cells }
    }

    pub fn empty(cols: usize, rows: usize) -> Self {
        Self::new(cols, rows, vec![false; cols * rows])
    }

    pub fn get(&self, c: usize, r: usize) -> bool {
        self.cells[r * self.cols + c]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

fn same_class(a: &FateCell, b: &FateCell) -> bool {
    a.tag == b.tag && a.prefix == b.prefix
}

/// Cells on the edge of the selected region under 4-adjacency.
///
/// For a predicate selector a cell is marked when it is selected and has
/// an unselected 4-neighbour (the inner boundary). For
/// [`Selector::Partition`] a cell is marked when some 4-neighbour differs
/// in fate tag or itinerary prefix.
pub fn extract_boundary(raster: &ClassificationRaster, selector: &Selector) -> BoundaryRaster {
    let (cols, rows) = raster.dims();
    let sel: Vec<bool> = raster.cells.iter().map(|c| selector.selects(c)).collect();
    let mut out = vec![false; cols * rows];
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let mut neighbours = [None; 4];
            if c > 0 {
                neighbours[0] = Some(i - 1);
            }
            if c + 1 < cols {
                neighbours[1] = Some(i + 1);
            }
            if r > 0 {
                neighbours[2] = Some(i - cols);
            }
            if r + 1 < rows {
                neighbours[3] = Some(i + cols);
            }
            out[i] = match selector {
                Selector::Partition => neighbours
                    .iter()
                    .flatten()
                    .any(|&n| !same_class(&raster.cells[i], &raster.cells[n])),
                _ => sel[i] && neighbours.iter().flatten().any(|&n| !sel[n]),
            };
        }
    }
    BoundaryRaster::new(cols, rows, out)
}
