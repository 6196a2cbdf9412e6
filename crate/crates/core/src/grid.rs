use crate::error::{invalid, Result};

/// Rectangular evaluation grid with per-dimension breakpoints.
///
/// Evaluation points are cell midpoints, flattened with the last coordinate
/// varying fastest.
#[derive(Debug, Clone)]
pub struct EvalGrid {
    breakpoints: Vec<Vec<f64>>,
    cell_volume: f64,
    points: Vec<f64>,
    d: usize,
}

impl EvalGrid {
    /// Regular grid with `cells[j]` equal cells on `[lo[j], hi[j]]`.
    pub fn regular(lo: &[f64], hi: &[f64], cells: &[usize]) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != cells.len() || lo.is_empty() {
            return Err(invalid(
                "grid bounds and cell counts must share a nonzero dimension",
            ));
        }
        let mut breakpoints = Vec::with_capacity(lo.len());
        for j in 0..lo.len() {
            if !(hi[j] > lo[j]) || cells[j] == 0 || !lo[j].is_finite() || !hi[j].is_finite() {
                return Err(invalid(format!("degenerate grid axis {j}")));
            }
            let step = (hi[j] - lo[j]) / cells[j] as f64;
            breakpoints.push((0..=cells[j]).map(|k| lo[j] + step * k as f64).collect());
        }
        Self::from_breakpoints(breakpoints)
    }

    /// Square grid `[lo, hi]^d` with `cells` cells per axis.
    pub fn cube(lo: f64, hi: f64, cells: usize, d: usize) -> Result<Self> {
        Self::regular(&vec![lo; d], &vec![hi; d], &vec![cells; d])
    }

    pub fn from_breakpoints(breakpoints: Vec<Vec<f64>>) -> Result<Self> {
        let d = breakpoints.len();
        if d == 0 {
            return Err(invalid("grid needs at least one axis"));
        }
        let mut cell_volume = 1.0;
        for (j, b) in breakpoints.iter().enumerate() {
            if b.len() < 2 || b.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(invalid(format!(
                    "breakpoints on axis {j} must be strictly increasing"
                )));
            }
            let step = b[1] - b[0];
            let regular = b
                .windows(2)
                .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
            if !regular {
                return Err(invalid(format!("axis {j} is not regularly spaced")));
            }
            cell_volume *= (b[b.len() - 1] - b[0]) / (b.len() - 1) as f64;
        }
        let mids: Vec<Vec<f64>> = breakpoints
            .iter()
            .map(|b| b.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
            .collect();
        let total: usize = mids.iter().map(Vec::len).product();
        let mut points = Vec::with_capacity(total * d);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            for j in 0..d {
                points.push(mids[j][idx[j]]);
            }
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < mids[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
        Ok(EvalGrid {
            breakpoints,
            cell_volume,
            points,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn breakpoints(&self) -> &[Vec<f64>] {
        &self.breakpoints
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.d)
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.d..(k + 1) * self.d]
    }

    /// Per-axis cell counts.
    pub fn shape(&self) -> Vec<usize> {
        self.breakpoints.iter().map(|b| b.len() - 1).collect()
    }

    /// Lower and upper corners of cell `k`.
    pub fn cell_bounds(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
        let shape = self.shape();
        let mut rem = k;
        let mut idx = vec![0; self.d];
        for j in (0..self.d).rev() {
            idx[j] = rem % shape[j];
            rem /= shape[j];
        }
        let lo = (0..self.d).map(|j| self.breakpoints[j][idx[j]]).collect();
        let hi = (0..self.d)
            .map(|j| self.breakpoints[j][idx[j] + 1])
            .collect();
        (lo, hi)
    }

    /// Whether cell `k` touches the outer boundary of the grid.
    pub fn is_boundary_cell(&self, k: usize) -> bool {
        let shape = self.shape();
        let mut rem = k;
        for j in (0..self.d).rev() {
            let i = rem % shape[j];
            rem /= shape[j];
            if i == 0 || i + 1 == shape[j] {
                return true;
            }
        }
        false
    }
}
